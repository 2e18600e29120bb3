//! Text documents for models.
//!
//! Models are stored as TOML with every real number written at `%.17g`, so a
//! write/read cycle is bit-exact:
//!
//! ```toml
//! kind = "outcome"
//! rate = 1
//!
//! [offspring]
//! 3 = 1
//!
//! [alpha]
//! 3 = [0, 0, 1, 1]
//! ```
//!
//! Threshold models carry `arity` and `zeta`, recursive models `arity`,
//! `symmetric_coeffs` and optionally the power-basis `f`, and composite models `arity` plus a `[[labels]]` array
//! of `name`, `probability` and `alpha`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;
use toml::{Table, Value};

use super::{
    CompositeLabelModel, Label, Model, ModelError, OffspringDistribution, RandomOutcomeModel,
    RandomThresholdModel, RecursiveModel,
};
use crate::numfmt::g17;
use crate::poly::{binom_f, Polynomial};

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("model document is not valid TOML: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("model document: missing key `{0}`")]
    Missing(String),
    #[error("model document: key `{key}` {problem}")]
    Type { key: String, problem: String },
    #[error("model document: unknown kind `{0}`")]
    Kind(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Serialisation entry points for [`Model`].
pub struct ModelDocument;

fn array(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|&v| g17(v)).collect();
    format!("[{}]", parts.join(", "))
}

fn quote(s: &str) -> String {
    Value::String(s.to_string()).to_string()
}

impl ModelDocument {
    pub fn write(model: &Model) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "kind = {}", quote(model.kind()));
        let _ = writeln!(out, "rate = {}", g17(model.rate()));
        match model {
            Model::Outcome(m) => {
                out.push_str("\n[offspring]\n");
                for &(k, p) in m.offspring.probs() {
                    let _ = writeln!(out, "{k} = {}", g17(p));
                }
                out.push_str("\n[alpha]\n");
                for (k, table) in &m.alpha {
                    let _ = writeln!(out, "{k} = {}", array(table));
                }
            }
            Model::Threshold(m) => {
                let _ = writeln!(out, "arity = {}", m.arity);
                let _ = writeln!(out, "zeta = {}", array(&m.zeta));
            }
            Model::Recursive(m) => {
                let _ = writeln!(out, "arity = {}", m.arity);
                let _ = writeln!(out, "symmetric_coeffs = {}", array(&m.symmetric_coeffs));
                let _ = writeln!(out, "f = {}", array(m.f.coeffs()));
            }
            Model::Composite(m) => {
                let _ = writeln!(out, "arity = {}", m.arity);
                for label in &m.labels {
                    out.push_str("\n[[labels]]\n");
                    let _ = writeln!(out, "name = {}", quote(&label.name));
                    let _ = writeln!(out, "probability = {}", g17(label.probability));
                    let _ = writeln!(out, "alpha = {}", array(&label.alpha));
                }
            }
        }
        out
    }

    pub fn read(text: &str) -> Result<Model, DocumentError> {
        let doc: Table = text.parse()?;
        let kind = doc
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| DocumentError::Missing("kind".into()))?;
        let rate = number(&doc, "rate")?;
        match kind {
            "outcome" => {
                let offspring = table(&doc, "offspring")?
                    .iter()
                    .map(|(k, v)| {
                        Ok((
                            index_key(k, "offspring")?,
                            as_number(v, &format!("offspring.{k}"))?,
                        ))
                    })
                    .collect::<Result<Vec<_>, DocumentError>>()?;
                let offspring = OffspringDistribution::new(offspring)?;
                let alpha = table(&doc, "alpha")?
                    .iter()
                    .map(|(k, v)| {
                        Ok((
                            index_key(k, "alpha")?,
                            as_numbers(v, &format!("alpha.{k}"))?,
                        ))
                    })
                    .collect::<Result<BTreeMap<_, _>, DocumentError>>()?;
                Ok(RandomOutcomeModel::new(rate, offspring, alpha)?.into())
            }
            "threshold" => {
                let zeta = numbers(&doc, "zeta")?;
                check_arity(&doc, zeta.len())?;
                Ok(RandomThresholdModel::new(rate, zeta)?.into())
            }
            "recursive" => {
                let s = numbers(&doc, "symmetric_coeffs")?;
                let arity = check_arity(&doc, s.len())?;
                // `f` is optional; without it the polynomial is rebuilt from `s`
                let coeffs = match doc.get("f") {
                    Some(v) => as_numbers(v, "f")?,
                    None => s
                        .iter()
                        .enumerate()
                        .map(|(j, v)| v * binom_f(arity, j))
                        .collect(),
                };
                let f = Polynomial::new(coeffs).map_err(ModelError::from)?;
                let model = RecursiveModel {
                    arity,
                    f,
                    symmetric_coeffs: s,
                };
                let diag = super::validate(&Model::Recursive(model.clone()));
                if !diag.is_valid() {
                    return Err(ModelError::Invalid(diag.summary()).into());
                }
                Ok(model.into())
            }
            "composite" => {
                let arity = integer(&doc, "arity")?;
                let labels = doc
                    .get("labels")
                    .and_then(Value::as_array)
                    .ok_or_else(|| DocumentError::Missing("labels".into()))?
                    .iter()
                    .map(|entry| {
                        let t = entry.as_table().ok_or_else(|| DocumentError::Type {
                            key: "labels".into(),
                            problem: "must be an array of tables".into(),
                        })?;
                        Ok(Label {
                            name: t
                                .get("name")
                                .and_then(Value::as_str)
                                .ok_or_else(|| DocumentError::Missing("labels.name".into()))?
                                .to_string(),
                            probability: number(t, "probability")?,
                            alpha: numbers(t, "alpha")?,
                        })
                    })
                    .collect::<Result<Vec<_>, DocumentError>>()?;
                Ok(CompositeLabelModel::new(rate, arity, labels)?.into())
            }
            other => Err(DocumentError::Kind(other.to_string())),
        }
    }
}

fn check_arity(doc: &Table, len: usize) -> Result<usize, DocumentError> {
    let arity = integer(doc, "arity")?;
    if arity + 1 != len {
        return Err(DocumentError::Type {
            key: "arity".into(),
            problem: format!("is {arity} but the table has {len} entries"),
        });
    }
    Ok(arity)
}

fn index_key(k: &str, section: &str) -> Result<usize, DocumentError> {
    k.parse().map_err(|_| DocumentError::Type {
        key: format!("{section}.{k}"),
        problem: "must be an integer number of children".into(),
    })
}

fn table<'a>(doc: &'a Table, key: &str) -> Result<&'a Table, DocumentError> {
    doc.get(key)
        .ok_or_else(|| DocumentError::Missing(key.into()))?
        .as_table()
        .ok_or_else(|| DocumentError::Type {
            key: key.into(),
            problem: "must be a table".into(),
        })
}

fn as_number(v: &Value, key: &str) -> Result<f64, DocumentError> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(DocumentError::Type {
            key: key.into(),
            problem: "must be a number".into(),
        }),
    }
}

fn as_numbers(v: &Value, key: &str) -> Result<Vec<f64>, DocumentError> {
    v.as_array()
        .ok_or_else(|| DocumentError::Type {
            key: key.into(),
            problem: "must be an array".into(),
        })?
        .iter()
        .map(|x| as_number(x, key))
        .collect()
}

fn number(doc: &Table, key: &str) -> Result<f64, DocumentError> {
    as_number(
        doc.get(key)
            .ok_or_else(|| DocumentError::Missing(key.into()))?,
        key,
    )
}

fn numbers(doc: &Table, key: &str) -> Result<Vec<f64>, DocumentError> {
    as_numbers(
        doc.get(key)
            .ok_or_else(|| DocumentError::Missing(key.into()))?,
        key,
    )
}

fn integer(doc: &Table, key: &str) -> Result<usize, DocumentError> {
    doc.get(key)
        .ok_or_else(|| DocumentError::Missing(key.into()))?
        .as_integer()
        .and_then(|i| usize::try_from(i).ok())
        .ok_or_else(|| DocumentError::Type {
            key: key.into(),
            problem: "must be a non-negative integer".into(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{
        catalog, compile_outcome, compile_recursive, compile_threshold, CatalogName, CatalogParams,
    };
    use proptest::prelude::*;

    fn round_trip(model: &Model) {
        let text = ModelDocument::write(model);
        let back = ModelDocument::read(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        assert_eq!(&back, model, "{text}");
        assert_eq!(ModelDocument::write(&back), text);
    }

    #[test]
    fn every_kind_round_trips() {
        let ac = Polynomial::new(vec![0.0, -1.0, 3.0, -2.0]).unwrap();
        round_trip(&compile_outcome(&ac, Some(2.0)).unwrap().into());
        round_trip(&compile_threshold(&ac, None).unwrap().into());
        round_trip(
            &compile_recursive(&Polynomial::new(vec![0.3, 1.0, -1.0]).unwrap())
                .unwrap()
                .into(),
        );
        let law = OffspringDistribution::new([(2, 0.5), (3, 0.5)]).unwrap();
        let params = CatalogParams {
            offspring: Some(law),
            ..Default::default()
        };
        round_trip(&catalog(CatalogName::Heat, &params).unwrap());
        let params = CatalogParams {
            n: Some(3),
            chi: Some(1.7),
            ..Default::default()
        };
        round_trip(&catalog(CatalogName::Evs, &params).unwrap());
    }

    #[test]
    fn outcome_layout() {
        let m = RandomOutcomeModel::pure(1.0, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let text = ModelDocument::write(&m.into());
        assert_eq!(
            text,
            "kind = \"outcome\"\nrate = 1\n\n[offspring]\n3 = 1\n\n[alpha]\n3 = [0, 0, 1, 1]\n"
        );
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(matches!(
            ModelDocument::read("kind = \"nope\"\nrate = 1"),
            Err(DocumentError::Kind(_))
        ));
        assert!(matches!(
            ModelDocument::read("rate = 1"),
            Err(DocumentError::Missing(_))
        ));
        let bad_sum = "kind = \"threshold\"\nrate = 1\narity = 2\nzeta = [0, 0.5, 0.4]\n";
        assert!(matches!(
            ModelDocument::read(bad_sum),
            Err(DocumentError::Model(_))
        ));
        let bad_arity = "kind = \"threshold\"\nrate = 1\narity = 3\nzeta = [0, 0.5, 0.5]\n";
        assert!(matches!(
            ModelDocument::read(bad_arity),
            Err(DocumentError::Type { .. })
        ));
    }

    proptest! {
        #[test]
        fn threshold_documents_are_bit_stable(raw in proptest::collection::vec(0.0f64..1.0, 2..8), rate in 0.1f64..50.0) {
            let total: f64 = raw.iter().sum();
            let mut zeta: Vec<f64> = std::iter::once(0.0).chain(raw.iter().map(|z| z / total)).collect();
            let drift: f64 = zeta.iter().sum::<f64>() - 1.0;
            *zeta.last_mut().unwrap() -= drift;
            prop_assume!(zeta.iter().all(|z| (0.0..=1.0).contains(z)));
            let model: Model = RandomThresholdModel::new(rate, zeta).unwrap().into();
            let back = ModelDocument::read(&ModelDocument::write(&model)).unwrap();
            prop_assert_eq!(back, model);
        }
    }
}
