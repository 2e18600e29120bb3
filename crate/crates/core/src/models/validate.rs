//! Model diagnostics.

use std::fmt;

use super::{
    CompositeLabelModel, Model, RandomOutcomeModel, RandomThresholdModel, RecursiveModel, PROB_TOL,
};

#[derive(Debug, Clone, PartialEq)]
pub enum Issue {
    Rate(f64),
    /// A table entry outside `[0, 1]`.
    OutOfRange {
        table: String,
        index: usize,
        value: f64,
    },
    /// A unanimity entry that is not pinned (`alpha_0 = 0`, `alpha_n = 1`, `zeta_0 = 0`).
    Unanimity {
        table: String,
        index: usize,
        value: f64,
        expected: f64,
    },
    /// Table length does not match its arity.
    Length {
        table: String,
        expected: usize,
        found: usize,
    },
    /// Probabilities that should sum to one do not.
    Sum {
        what: String,
        sum: f64,
    },
    MissingTable(usize),
    /// Recursive model whose symmetric form does not rebuild `f`.
    Reconstruction {
        max_diff: f64,
    },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::Rate(r) => write!(f, "rate {r} is not positive"),
            Issue::OutOfRange {
                table,
                index,
                value,
            } => {
                write!(f, "{table}[{index}] = {value} is outside [0, 1]")
            }
            Issue::Unanimity {
                table,
                index,
                value,
                expected,
            } => {
                write!(f, "{table}[{index}] = {value}, expected {expected}")
            }
            Issue::Length {
                table,
                expected,
                found,
            } => {
                write!(f, "{table} has {found} entries, expected {expected}")
            }
            Issue::Sum { what, sum } => {
                write!(f, "{what} sum to {sum} (deficit {})", 1.0 - sum)
            }
            Issue::MissingTable(n) => write!(f, "no alpha table for arity {n}"),
            Issue::Reconstruction { max_diff } => {
                write!(f, "symmetric coefficients rebuild f only to {max_diff:e}")
            }
        }
    }
}

/// Outcome of [`validate`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub issues: Vec<Issue>,
    /// Every table is nondecreasing in the number of 1-votes.
    pub monotone: bool,
    /// Monotone and pure-arity, so a threshold law exists.
    pub threshold_convertible: bool,
}

impl Diagnostics {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn summary(&self) -> String {
        let parts: Vec<String> = self.issues.iter().map(ToString::to_string).collect();
        parts.join("; ")
    }
}

pub fn validate(model: &Model) -> Diagnostics {
    match model {
        Model::Outcome(m) => validate_outcome(m),
        Model::Threshold(m) => validate_threshold(m),
        Model::Recursive(m) => validate_recursive(m),
        Model::Composite(m) => validate_composite(m),
    }
}

fn check_rate(rate: f64, issues: &mut Vec<Issue>) {
    if !(rate.is_finite() && rate > 0.0) {
        issues.push(Issue::Rate(rate));
    }
}

fn in_unit(v: f64) -> bool {
    v.is_finite() && (-PROB_TOL..=1.0 + PROB_TOL).contains(&v)
}

/// Checks one `alpha` table of arity `n`; returns whether it is monotone.
fn check_alpha(name: &str, n: usize, alpha: &[f64], issues: &mut Vec<Issue>) -> bool {
    if alpha.len() != n + 1 {
        issues.push(Issue::Length {
            table: name.into(),
            expected: n + 1,
            found: alpha.len(),
        });
        return false;
    }
    for (index, &value) in alpha.iter().enumerate() {
        if !in_unit(value) {
            issues.push(Issue::OutOfRange {
                table: name.into(),
                index,
                value,
            });
        }
    }
    if alpha[0].abs() > PROB_TOL {
        issues.push(Issue::Unanimity {
            table: name.into(),
            index: 0,
            value: alpha[0],
            expected: 0.0,
        });
    }
    if (alpha[n] - 1.0).abs() > PROB_TOL {
        issues.push(Issue::Unanimity {
            table: name.into(),
            index: n,
            value: alpha[n],
            expected: 1.0,
        });
    }
    alpha.windows(2).all(|w| w[1] >= w[0] - PROB_TOL)
}

pub(super) fn validate_outcome(m: &RandomOutcomeModel) -> Diagnostics {
    let mut issues = Vec::new();
    check_rate(m.rate, &mut issues);
    let mut monotone = true;
    for n in m.offspring.support() {
        match m.alpha.get(&n) {
            Some(table) => monotone &= check_alpha(&format!("alpha_{n}"), n, table, &mut issues),
            None => issues.push(Issue::MissingTable(n)),
        }
    }
    let threshold_convertible = monotone && m.offspring.pure_arity().is_some();
    Diagnostics {
        issues,
        monotone,
        threshold_convertible,
    }
}

pub(super) fn validate_threshold(m: &RandomThresholdModel) -> Diagnostics {
    let mut issues = Vec::new();
    check_rate(m.rate, &mut issues);
    if m.arity < 2 || m.zeta.len() != m.arity + 1 {
        issues.push(Issue::Length {
            table: "zeta".into(),
            expected: m.arity + 1,
            found: m.zeta.len(),
        });
        return Diagnostics {
            issues,
            monotone: false,
            threshold_convertible: false,
        };
    }
    for (index, &value) in m.zeta.iter().enumerate() {
        if !in_unit(value) {
            issues.push(Issue::OutOfRange {
                table: "zeta".into(),
                index,
                value,
            });
        }
    }
    if m.zeta[0].abs() > PROB_TOL {
        issues.push(Issue::Unanimity {
            table: "zeta".into(),
            index: 0,
            value: m.zeta[0],
            expected: 0.0,
        });
    }
    let sum: f64 = m.zeta.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        issues.push(Issue::Sum {
            what: "zeta".into(),
            sum,
        });
    }
    Diagnostics {
        issues,
        monotone: true,
        threshold_convertible: true,
    }
}

pub(super) fn validate_recursive(m: &RecursiveModel) -> Diagnostics {
    let mut issues = Vec::new();
    if m.symmetric_coeffs.len() != m.arity + 1 || m.arity < m.f.degree() {
        issues.push(Issue::Length {
            table: "symmetric_coeffs".into(),
            expected: m.arity + 1,
            found: m.symmetric_coeffs.len(),
        });
    } else {
        let max_diff = m.reconstruct().max_coeff_diff(&m.f);
        if max_diff > 1e-9 {
            issues.push(Issue::Reconstruction { max_diff });
        }
    }
    Diagnostics {
        issues,
        monotone: false,
        threshold_convertible: false,
    }
}

pub(super) fn validate_composite(m: &CompositeLabelModel) -> Diagnostics {
    let mut issues = Vec::new();
    check_rate(m.rate, &mut issues);
    let mut monotone = true;
    for label in &m.labels {
        if !in_unit(label.probability) {
            issues.push(Issue::OutOfRange {
                table: format!("probability of label {}", label.name),
                index: 0,
                value: label.probability,
            });
        }
        monotone &= check_alpha(
            &format!("alpha[{}]", label.name),
            m.arity,
            &label.alpha,
            &mut issues,
        );
    }
    let sum: f64 = m.labels.iter().map(|l| l.probability).sum();
    if (sum - 1.0).abs() > PROB_TOL {
        issues.push(Issue::Sum {
            what: "label probabilities".into(),
            sum,
        });
    }
    Diagnostics {
        issues,
        monotone,
        threshold_convertible: false,
    }
}
