fn main() {
    std::process::exit(voting_bbm::cli::run(std::env::args_os()));
}
