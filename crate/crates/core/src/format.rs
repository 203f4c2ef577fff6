//! JSON instance files.
//!
//! ```json
//! {
//!   "rank_cap": 3,
//!   "variables": [{ "id": "X", "domain": ["0", "1"], "probs": ["1/2", "1/2"] }],
//!   "events": [{ "id": "E", "vars": ["X"], "occurs": [["0"]] }]
//! }
//! ```
//!
//! Probabilities are `"num/den"` strings in lowest terms; domain values are
//! opaque strings.

use std::fs;
use std::path::Path;

use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{BadEvent, InstanceError, LllInstance, Variable};
use crate::rational::{format_rational, parse_rational};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("parse error in {field}: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    rank_cap: usize,
    variables: Vec<VariableRecord>,
    events: Vec<EventRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableRecord {
    id: String,
    domain: Vec<String>,
    probs: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRecord {
    id: String,
    vars: Vec<String>,
    occurs: Vec<Vec<String>>,
}

pub fn from_json_str(text: &str) -> Result<LllInstance, LoadError> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| LoadError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut variables = Vec::with_capacity(file.variables.len());
    for (i, v) in file.variables.into_iter().enumerate() {
        let mut probs = Vec::with_capacity(v.probs.len());
        for (j, p) in v.probs.iter().enumerate() {
            probs.push(parse_rational(p).map_err(|message| LoadError::Field {
                field: format!("variables[{i}].probs[{j}]"),
                message,
            })?);
        }
        if probs.len() != v.domain.len() {
            return Err(LoadError::Field {
                field: format!("variables[{i}].probs"),
                message: format!("{} probabilities for {} values", probs.len(), v.domain.len()),
            });
        }
        let total: BigRational = probs.iter().sum();
        if !total.is_one() {
            return Err(LoadError::Field {
                field: format!("variables[{i}].probs"),
                message: format!("probabilities of {:?} sum to {}", v.id, format_rational(&total)),
            });
        }
        variables.push(Variable::new(v.id, v.domain, probs));
    }
    let events = file
        .events
        .into_iter()
        .map(|e| BadEvent::new(e.id, e.vars, e.occurs))
        .collect();
    Ok(LllInstance::build(variables, events, file.rank_cap)?)
}

pub fn to_json_string(instance: &LllInstance) -> String {
    let file = InstanceFile {
        rank_cap: instance.rank_cap(),
        variables: instance
            .variables()
            .iter()
            .map(|v| VariableRecord {
                id: v.id.clone(),
                domain: v.domain.clone(),
                probs: v.probs.iter().map(format_rational).collect(),
            })
            .collect(),
        events: instance
            .events()
            .iter()
            .map(|e| EventRecord {
                id: e.id.clone(),
                vars: e.vars.clone(),
                occurs: e.occurs.clone(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("instance serializes");
    s.push('\n');
    s
}

pub fn load(path: impl AsRef<Path>) -> Result<LllInstance, LoadError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_json_str(&text)
}

pub fn save(instance: &LllInstance, path: impl AsRef<Path>) -> Result<(), LoadError> {
    let path = path.as_ref();
    fs::write(path, to_json_string(instance)).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn save_then_load_is_identity() {
        let inst = fixtures::coin_triangle(true).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("triangle.json");
        save(&inst, &path).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.dependency_degree(), 2);
    }

    #[test]
    fn probabilities_must_sum_to_one() {
        let text = r#"{"rank_cap": 3,
            "variables": [{"id": "X", "domain": ["a", "b"], "probs": ["99/200", "1/2"]}],
            "events": []}"#;
        match from_json_str(text) {
            Err(LoadError::Field { field, .. }) => assert_eq!(field, "variables[0].probs"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        let text = "{\n  \"rank_cap\": 3,\n  \"variables\": [,\n}";
        match from_json_str(text) {
            Err(LoadError::Syntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_rational_names_the_field() {
        let text = r#"{"rank_cap": 3,
            "variables": [{"id": "X", "domain": ["a", "b"], "probs": ["1/2", "2/4"]}],
            "events": []}"#;
        match from_json_str(text) {
            Err(LoadError::Field { field, .. }) => assert_eq!(field, "variables[0].probs[1]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"rank_cap": 3, "variables": [], "events": [], "extra": 1}"#;
        assert!(matches!(from_json_str(text), Err(LoadError::Syntax { .. })));
    }
}
