//! The JSON instance format.
//!
//! Linear coefficients carry the factor two of the model, so a constraint
//! reads `Σ A_j x_j² + 2 Σ a_j x_j ≤ b`.

use qcqp_exact_core::{validate_instance, Constraint, DiagonalQcqp, RawInstance};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBlock {
    #[serde(rename = "D")]
    pub d: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintBlock {
    #[serde(rename = "A")]
    pub quad: Vec<f64>,
    #[serde(rename = "a")]
    pub lin: Vec<f64>,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n: usize,
    pub m: usize,
    pub objective: ObjectiveBlock,
    pub constraints: Vec<ConstraintBlock>,
}

impl InstanceFile {
    pub fn from_instance(q: &DiagonalQcqp) -> Self {
        InstanceFile {
            n: q.n(),
            m: q.m(),
            objective: ObjectiveBlock { d: q.d().to_vec(), c: q.c().to_vec() },
            constraints: q
                .constraints()
                .iter()
                .map(|con| ConstraintBlock { quad: con.quad.clone(), lin: con.lin.clone(), b: con.rhs })
                .collect(),
        }
    }

    pub fn to_instance(&self) -> Result<DiagonalQcqp, CliError> {
        let raw = RawInstance {
            n: self.n,
            m: self.m,
            d: self.objective.d.clone(),
            c: self.objective.c.clone(),
            constraints: self
                .constraints
                .iter()
                .map(|c| Constraint { quad: c.quad.clone(), lin: c.lin.clone(), rhs: c.b })
                .collect(),
        };
        validate_instance(&raw).map_err(CliError::Instance)
    }
}

pub fn parse_instance(text: &str) -> Result<DiagonalQcqp, CliError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    file.to_instance()
}

pub fn read_instance(path: &str) -> Result<DiagonalQcqp, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_string(), source })?;
    parse_instance(&text)
}

/// Compact canonical JSON; parsing it back gives bit-identical coefficients.
pub fn to_json(q: &DiagonalQcqp) -> String {
    serde_json::to_string(&InstanceFile::from_instance(q)).expect("finite coefficients serialize")
}

pub fn to_json_pretty(q: &DiagonalQcqp) -> String {
    serde_json::to_string_pretty(&InstanceFile::from_instance(q)).expect("finite coefficients serialize")
}

/// SHA-256 of the canonical JSON, hex encoded.
pub fn digest(q: &DiagonalQcqp) -> String {
    hex::encode(Sha256::digest(to_json(q).as_bytes()))
}

/// Overwrites the scalar addressed by `path` (for example `constraints[1].b`
/// or `objective.D[0]`) in the document form of `q`.
pub fn set_scalar(q: &DiagonalQcqp, path: &str, value: f64) -> Result<DiagonalQcqp, CliError> {
    let mut doc = serde_json::to_value(InstanceFile::from_instance(q))?;
    let mut slot = &mut doc;
    for token in tokenize(path)? {
        slot = match token {
            Token::Field(name) => slot
                .get_mut(name.as_str())
                .ok_or_else(|| CliError::Usage(format!("no field `{}` in `{}`", name, path)))?,
            Token::Index(k) => {
                slot.get_mut(k).ok_or_else(|| CliError::Usage(format!("index {} out of range in `{}`", k, path)))?
            }
        };
    }
    if !slot.is_number() {
        return Err(CliError::Usage(format!("`{}` does not address a number", path)));
    }
    *slot = serde_json::Value::from(value);
    let file: InstanceFile = serde_json::from_value(doc)?;
    file.to_instance()
}

enum Token {
    Field(String),
    Index(usize),
}

fn tokenize(path: &str) -> Result<Vec<Token>, CliError> {
    let bad = || CliError::Usage(format!("cannot parse parameter path `{}`", path));
    let mut out = Vec::new();
    for part in path.split('.') {
        let (name, mut rest) = match part.find('[') {
            Some(k) => (&part[..k], &part[k..]),
            None => (part, ""),
        };
        if name.is_empty() && out.is_empty() {
            return Err(bad());
        }
        if !name.is_empty() {
            out.push(Token::Field(name.to_string()));
        }
        while !rest.is_empty() {
            let close = rest.find(']').ok_or_else(bad)?;
            let idx = rest[1..close].trim().parse().map_err(|_| bad())?;
            out.push(Token::Index(idx));
            rest = &rest[close + 1..];
            if !rest.is_empty() && !rest.starts_with('[') {
                return Err(bad());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use qcqp_exact_core::example_e1;

    #[test]
    fn round_trip_is_bit_identical() {
        let q = example_e1(-0.1);
        let back = parse_instance(&to_json(&q)).unwrap();
        assert_eq!(back, q);
        assert_eq!(to_json(&back), to_json(&q));
    }

    #[test]
    fn scalar_paths() {
        let q = example_e1(0.0);
        let moved = set_scalar(&q, "constraints[1].b", -0.5).unwrap();
        assert_eq!(moved, example_e1(-0.5));
        let d = set_scalar(&q, "objective.D[1]", 3.0).unwrap();
        assert_eq!(d.d()[1], 3.0);
        assert!(set_scalar(&q, "constraints[4].b", 1.0).is_err());
        assert!(set_scalar(&q, "objective", 1.0).is_err());
        assert!(set_scalar(&q, "constraints[x].b", 1.0).is_err());
    }

    #[test]
    fn rejects_mismatched_lengths() {
        let text = r#"{"n":2,"m":1,"objective":{"D":[1,2],"c":[0]},"constraints":[{"A":[1,1],"a":[0,0],"b":1}]}"#;
        assert!(matches!(parse_instance(text), Err(CliError::Instance(_))));
        assert!(matches!(parse_instance("{"), Err(CliError::Parse(_))));
    }
}
