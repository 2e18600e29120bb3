use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_voting-bbm"));
    c.env_remove("VOTING_BBM_WORKERS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn body(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn compile_prints_tables() {
    let o = run(&["compile", "--f", "[0,1,-1]", "--monotone"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("rate = 2\n"), "{text}");
    assert!(text.contains("2 = [0, 0.75, 1]"), "{text}");
    let o = run(&["compile", "--f", "[0,1,-1]"]);
    let text = stdout(&o);
    assert!(
        text.contains("rate = 1\n") && text.contains("2 = [0, 1, 1]"),
        "{text}"
    );
    let o = run(&["compile", "--f", "u - u^2", "--kind", "threshold"]);
    assert!(
        stdout(&o).contains("zeta = [0, 0.75, 0.25]"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn nonlinearity_of_the_majority_model() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("efp.toml");
    let o = run(&[
        "catalog",
        "efp_allen_cahn",
        "-q",
        "-o",
        doc.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let o = run(&["nonlinearity", "--model", doc.to_str().unwrap()]);
    assert_eq!(stdout(&o), "-u + 3u^2 - 2u^3\n");
    let o = run(&["nonlinearity", "--model", doc.to_str().unwrap(), "--list"]);
    assert_eq!(stdout(&o), "[0, -1, 3, -2]\n");
}

#[test]
fn decompose_and_catalog_listing() {
    assert_eq!(
        stdout(&run(&["decompose", "--f", "u - u^2"])),
        "mckean: rate 1 offspring 2:1 lambda 1\n"
    );
    let text = stdout(&run(&["decompose", "--f", "u - u^3"]));
    assert!(
        text.starts_with("not mckean: coefficient of (1-u)^3"),
        "{text}"
    );
    let listing = stdout(&run(&["catalog"]));
    assert_eq!(listing.lines().count(), 6);
    for name in [
        "heat",
        "efp_allen_cahn",
        "mckean",
        "uniform_bias",
        "group",
        "evs",
    ] {
        assert!(listing.contains(name));
    }
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["simulate", "--f", "u^3"]).status.code(), Some(1));
    assert_eq!(
        run(&["simulate", "--catalog", "nope"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["simulate"]).status.code(), Some(1));
    assert_eq!(
        run(&["simulate", "--catalog", "heat", "--x", "1:0:3"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(run(&["bogus"]).status.code(), Some(1));
    let o = run(&[
        "simulate",
        "--catalog",
        "heat",
        "--t",
        "8",
        "--n",
        "5",
        "--population-cap",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("population"));
    let o = run(&[
        "compare",
        "--catalog",
        "heat",
        "--n",
        "200",
        "--x",
        "0.5",
        "--z-max",
        "0",
        "--assert",
        "-q",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains(",false,"));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn outputs_carry_headers_and_rerun_identically() {
    let args = [
        "simulate",
        "--catalog",
        "mckean",
        "--x",
        "-1:1:3",
        "--n",
        "2000",
        "--seed",
        "4",
        "-q",
    ];
    let first = stdout(&run(&args));
    let second = stdout(&run(&args));
    assert_eq!(first, second);
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(
        lines[0],
        concat!("# voting-bbm ", env!("CARGO_PKG_VERSION"))
    );
    assert_eq!(lines[1], "# command: simulate");
    assert!(lines[2].starts_with("# config: {") && lines[2].contains("\"seed\":4"));
    assert_eq!(lines[3], "x,t,mean,std_error,n,mode,model");
    assert_eq!(body(&first).len(), 4);
    let other_seed = stdout(&run(&[
        "simulate",
        "--catalog",
        "mckean",
        "--x",
        "-1:1:3",
        "--n",
        "2000",
        "--seed",
        "5",
        "-q",
    ]));
    assert_ne!(first, other_seed);
}

#[test]
fn worker_count_does_not_change_output() {
    let base = [
        "simulate",
        "--catalog",
        "evs",
        "--evs-n",
        "2",
        "--chi",
        "2",
        "--x",
        "-1,0,1",
        "--n",
        "3000",
        "-q",
    ];
    let one = bin().args(base).args(["--workers", "1"]).output().unwrap();
    let four = bin()
        .args(base)
        .env("VOTING_BBM_WORKERS", "4")
        .output()
        .unwrap();
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 11\nquiet = true\n\n[simulate]\ncatalog = \"heat\"\nn = 500\nx = [-1, 0, 1]\nt = 0.5\n").unwrap();
    let via_file = stdout(&run(&["simulate", "--config", cfg.to_str().unwrap()]));
    let direct = stdout(&run(&[
        "simulate",
        "--catalog",
        "heat",
        "--n",
        "500",
        "--x",
        "-1,0,1",
        "--t",
        "0.5",
        "--seed",
        "11",
        "-q",
    ]));
    assert_eq!(body(&via_file), body(&direct));
    let overridden = stdout(&run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--n",
        "700",
    ]));
    assert!(
        body(&overridden)[1].ends_with(",700,conditional,heat"),
        "{overridden}"
    );

    std::fs::write(&cfg, "[simulate]\ncatalog = \"heat\"\nt = \"soon\"\n").unwrap();
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("run.toml:3: key `t`"), "{err}");
}

#[test]
fn solve_writes_the_field() {
    let o = run(&[
        "solve", "--f", "heat", "--t", "1", "--domain", "-6:6", "--dx", "0.1", "-q",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows = body(&text);
    assert_eq!(rows[0], "t,x,u");
    assert_eq!(rows.len(), 122);
    let middle: Vec<f64> = rows[61].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(middle[1], 0.0);
    assert!((middle[2] - 0.5).abs() < 1e-12);
    let snaps = stdout(&run(&[
        "solve",
        "--f",
        "fkpp",
        "--t",
        "1",
        "--domain",
        "-6:6",
        "--dx",
        "0.1",
        "--snapshot-every",
        "0.5",
        "-q",
    ]));
    assert_eq!(body(&snaps).len(), 1 + 3 * 121);
}

#[test]
fn front_reports_fits() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("front.json");
    let o = run(&[
        "front",
        "--f",
        "fkpp",
        "--t-end",
        "30",
        "--window",
        "10:30",
        "--dx",
        "0.1",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("log t"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let speed = summary["pushed_speed"].as_f64().unwrap();
    assert!(speed > 1.8 && speed < 2.0, "{speed}");
    assert!(summary["bramson"]["log_slope"].as_f64().unwrap() < 0.0);
    assert_eq!(body(&stdout(&o)).len(), 32);
}

#[test]
fn simulate_dumps_a_tree() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("tree.txt");
    let o = run(&[
        "simulate",
        "--catalog",
        "heat",
        "--n",
        "10",
        "--t",
        "1",
        "--dump-tree",
        dump.to_str().unwrap(),
        "-q",
    ]);
    assert!(o.status.success());
    let outline = std::fs::read_to_string(Path::new(&dump)).unwrap();
    assert!(
        outline
            .lines()
            .any(|l| l.trim_start().starts_with("leaf t=")),
        "{outline}"
    );
}

#[test]
fn allen_cahn_compare_example() {
    let o = run(&[
        "compare",
        "--f",
        "allen-cahn",
        "--t",
        "1",
        "--x",
        "-2:2:9",
        "--n",
        "100000",
        "--seed",
        "7",
        "--assert",
        "-q",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows = body(&text);
    assert_eq!(rows.len(), 10);
    for row in &rows[1..] {
        let z: f64 = row.split(',').nth(6).unwrap().parse().unwrap();
        assert!(z.abs() <= 3.0, "{row}");
    }
}

#[test]
fn maxdist_matches_the_oracle() {
    let o = run(&["maxdist", "--x", "0:2:3", "--n", "20000", "-q"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for row in &body(&text)[1..] {
        let cols: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        assert!(cols[5].abs() <= 3.0 * cols[3] + 2e-3, "{row}");
    }
}
