use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::CliError;
use crate::models::OffspringDistribution;
use crate::poly::Polynomial;

pub const VERSION_LINE: &str = concat!("# voting-bbm ", env!("CARGO_PKG_VERSION"));

/// `"a:b"` with `a < b`.
pub fn parse_range(spec: &str) -> Result<(f64, f64), String> {
    let (a, b) = spec
        .split_once(':')
        .ok_or_else(|| format!("expected `min:max`, got `{spec}`"))?;
    let a: f64 = a
        .trim()
        .parse()
        .map_err(|_| format!("bad number `{a}` in `{spec}`"))?;
    let b: f64 = b
        .trim()
        .parse()
        .map_err(|_| format!("bad number `{b}` in `{spec}`"))?;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(format!("range `{spec}` needs finite min < max"));
    }
    Ok((a, b))
}

/// `"min:max:count"` (inclusive, evenly spaced), `"x1,x2,..."` or a single number.
pub fn parse_x_grid(spec: &str) -> Result<Vec<f64>, String> {
    let number = |s: &str| -> Result<f64, String> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| format!("bad number `{}` in `{spec}`", s.trim()))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("non-finite value in `{spec}`"))
        }
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [a, b, count] => {
            let (a, b) = (number(a)?, number(b)?);
            let count: usize = count
                .trim()
                .parse()
                .map_err(|_| format!("bad count `{count}` in `{spec}`"))?;
            if count == 0 {
                return Err(format!("grid `{spec}` has no points"));
            }
            if count == 1 {
                return Ok(vec![a]);
            }
            if a > b {
                return Err(format!("grid `{spec}` needs min <= max"));
            }
            let h = (b - a) / (count - 1) as f64;
            Ok((0..count)
                .map(|i| if i == count - 1 { b } else { a + i as f64 * h })
                .collect())
        }
        [single] => single.split(',').map(number).collect(),
        _ => Err(format!(
            "expected `min:max:count` or a comma list, got `{spec}`"
        )),
    }
}

/// `"3"` for pure ternary branching, or `"2:0.5,3:0.5"`.
pub fn parse_offspring(spec: &str) -> Result<OffspringDistribution, CliError> {
    let bad = |why: String| CliError::Validation(format!("offspring law `{spec}`: {why}"));
    if let Ok(n) = spec.trim().parse::<usize>() {
        return OffspringDistribution::pure(n).map_err(|e| bad(e.to_string()));
    }
    let mut probs = Vec::new();
    for item in spec.split(',') {
        let (k, p) = item
            .split_once(':')
            .ok_or_else(|| bad(format!("expected `k:p`, got `{item}`")))?;
        let k: usize = k
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad child count `{k}`")))?;
        let p: f64 = p
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad probability `{p}`")))?;
        probs.push((k, p));
    }
    OffspringDistribution::new(probs).map_err(|e| bad(e.to_string()))
}

/// Polynomial text or list, or one of the names `heat`, `fkpp`, `allen-cahn`.
pub fn parse_nonlinearity(spec: &str) -> Result<Polynomial, CliError> {
    let named = match spec.trim().to_ascii_lowercase().replace('_', "-").as_str() {
        "heat" | "zero" => Some(vec![0.0]),
        "fkpp" | "kpp" => Some(vec![0.0, 1.0, -1.0]),
        "allen-cahn" => Some(vec![0.0, -1.0, 3.0, -2.0]),
        _ => None,
    };
    let parsed = match named {
        Some(c) => Polynomial::new(c),
        None => spec.parse(),
    };
    parsed.map_err(|e| CliError::Validation(format!("nonlinearity `{spec}`: {e}")))
}

pub fn io_error(path: Option<&Path>, e: io::Error) -> CliError {
    match path {
        Some(p) => CliError::Runtime(format!("{}: {e}", p.display())),
        None => CliError::Runtime(format!("stdout: {e}")),
    }
}

/// The main output stream, to a file or stdout.
pub struct Sink {
    path: Option<PathBuf>,
    out: Box<dyn Write>,
}

impl Sink {
    pub fn open(path: Option<&Path>) -> Result<Sink, CliError> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).map_err(|e| io_error(Some(p), e))?,
            )),
            None => Box::new(BufWriter::new(io::stdout())),
        };
        Ok(Sink {
            path: path.map(Path::to_path_buf),
            out,
        })
    }

    /// Opens the sink and writes the comment header with the version, command and resolved config.
    pub fn with_header<C: Serialize>(
        path: Option<&Path>,
        command: &str,
        config: &C,
    ) -> Result<Sink, CliError> {
        let mut sink = Sink::open(path)?;
        let config = serde_json::to_string(config).expect("config serialises");
        sink.write_str(&format!(
            "{VERSION_LINE}\n# command: {command}\n# config: {config}\n"
        ))?;
        Ok(sink)
    }

    pub fn write_str(&mut self, s: &str) -> Result<(), CliError> {
        self.out
            .write_all(s.as_bytes())
            .map_err(|e| io_error(self.path.as_deref(), e))
    }

    pub fn writer(&mut self) -> &mut dyn Write {
        &mut self.out
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out
            .flush()
            .map_err(|e| io_error(self.path.as_deref(), e))
    }

    pub fn map_io(&self, e: io::Error) -> CliError {
        io_error(self.path.as_deref(), e)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("summary serialises");
    std::fs::write(path, text + "\n").map_err(|e| io_error(Some(path), e))
}
