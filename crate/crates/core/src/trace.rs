//! Line-delimited JSON for fix traces and round logs, and the assignment
//! file. Everything refers to variables, values and events by id, and
//! rationals are `"num/den"` strings.
//!
//! A trace line, fields in this order:
//!
//! ```text
//! {"step":0,"var":"Xuv","value":"T",
//!  "inc":[{"event":"u","inc":"0/1"},{"event":"v","inc":"0/1"}],
//!  "writes":[{"edge":["u","v"],"endpoint":"u","before":"1/1","after":"0/1"}, ...],
//!  "weighted_sum":"0/1","pstar":"held"}
//! ```
//!
//! `edge` names the two events of a dependency edge in index order,
//! `weighted_sum` is null on rank-3 steps and `pstar` is `held` or
//! `skipped`. A round log starts with one `coloring` line followed by one
//! `round` line per round.

use std::collections::BTreeMap;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixer::{FixTrace, PStarCheck};
use crate::instance::LllInstance;
use crate::local_sim::RoundLog;
use crate::rational::{format_rational, parse_rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("line {line}: unknown variable {var:?}")]
    UnknownVariable { line: usize, var: String },
    #[error("line {line}: {value:?} is not a value of {var:?}")]
    UnknownValue { line: usize, var: String, value: String },
    #[error("line {line}: unknown event {0:?}", .event)]
    UnknownEvent { line: usize, event: String },
    #[error("line {line}: {a:?} and {b:?} are not adjacent")]
    NotAnEdge { line: usize, a: String, b: String },
    #[error("line {line}: endpoint {endpoint:?} is not on its edge")]
    BadEndpoint { line: usize, endpoint: String },
    #[error("line {line}: {field}: {message}")]
    BadRational { line: usize, field: String, message: String },
    #[error("assignment: {0}")]
    Assignment(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncEntry {
    pub event: String,
    pub inc: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WriteEntry {
    pub edge: [String; 2],
    pub endpoint: String,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceLine {
    pub step: usize,
    pub var: String,
    pub value: String,
    pub inc: Vec<IncEntry>,
    pub writes: Vec<WriteEntry>,
    pub weighted_sum: Option<String>,
    pub pstar: String,
}

pub fn trace_lines(instance: &LllInstance, trace: &FixTrace) -> Vec<TraceLine> {
    let g = instance.graph();
    let ev = |e: usize| instance.event(e).id.clone();
    trace
        .records
        .iter()
        .map(|r| {
            let var = instance.variable(r.var);
            TraceLine {
                step: r.step,
                var: var.id.clone(),
                value: var.domain[r.value].clone(),
                inc: r
                    .incs
                    .iter()
                    .map(|(e, x)| IncEntry {
                        event: ev(*e),
                        inc: format_rational(x),
                    })
                    .collect(),
                writes: r
                    .writes
                    .iter()
                    .map(|w| {
                        let (a, b) = g.edge(w.edge);
                        WriteEntry {
                            edge: [ev(a), ev(b)],
                            endpoint: ev(w.endpoint),
                            before: format_rational(&w.before),
                            after: format_rational(&w.after),
                        }
                    })
                    .collect(),
                weighted_sum: r.weighted_sum.as_ref().map(format_rational),
                pstar: match r.pstar {
                    PStarCheck::Held => "held",
                    PStarCheck::Skipped => "skipped",
                }
                .to_string(),
            }
        })
        .collect()
}

fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("plain data serialises"));
        out.push('\n');
    }
    out
}

pub fn trace_to_jsonl(instance: &LllInstance, trace: &FixTrace) -> String {
    to_jsonl(&trace_lines(instance, trace))
}

/// Parses a trace; blank lines are ignored. Line numbers start at 1.
pub fn parse_trace_jsonl(text: &str) -> Result<Vec<TraceLine>, TraceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| TraceError::Json {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// A trace step resolved against an instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedStep {
    pub var: usize,
    pub value: usize,
    /// `(edge, endpoint, before, after)`.
    pub writes: Vec<(usize, usize, BigRational, BigRational)>,
}

pub fn resolve_trace(instance: &LllInstance, lines: &[TraceLine]) -> Result<Vec<ResolvedStep>, TraceError> {
    let g = instance.graph();
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let line = i + 1;
            let var = instance.var_index(&l.var).ok_or_else(|| TraceError::UnknownVariable {
                line,
                var: l.var.clone(),
            })?;
            let value = instance
                .variable(var)
                .value_index(&l.value)
                .ok_or_else(|| TraceError::UnknownValue {
                    line,
                    var: l.var.clone(),
                    value: l.value.clone(),
                })?;
            let event = |id: &str| {
                instance.event_index(id).ok_or_else(|| TraceError::UnknownEvent {
                    line,
                    event: id.to_string(),
                })
            };
            let rational = |field: &str, s: &str| {
                parse_rational(s).map_err(|message| TraceError::BadRational {
                    line,
                    field: field.to_string(),
                    message,
                })
            };
            let mut writes = Vec::with_capacity(l.writes.len());
            for w in &l.writes {
                let (a, b) = (event(&w.edge[0])?, event(&w.edge[1])?);
                let edge = g.edge_between(a, b).ok_or_else(|| TraceError::NotAnEdge {
                    line,
                    a: w.edge[0].clone(),
                    b: w.edge[1].clone(),
                })?;
                let end = event(&w.endpoint)?;
                if end != a && end != b {
                    return Err(TraceError::BadEndpoint {
                        line,
                        endpoint: w.endpoint.clone(),
                    });
                }
                writes.push((edge, end, rational("before", &w.before)?, rational("after", &w.after)?));
            }
            Ok(ResolvedStep { var, value, writes })
        })
        .collect()
}

/// `{"var": "value", ...}` sorted by variable id.
pub fn assignment_to_json(instance: &LllInstance, assignment: &[usize]) -> String {
    let map: BTreeMap<&str, &str> = instance
        .variables()
        .iter()
        .zip(assignment)
        .map(|(v, &y)| (v.id.as_str(), v.domain[y].as_str()))
        .collect();
    let mut s = serde_json::to_string_pretty(&map).expect("plain data serialises");
    s.push('\n');
    s
}

/// Reads an assignment file; every variable must be present exactly once.
pub fn parse_assignment(instance: &LllInstance, text: &str) -> Result<Vec<usize>, TraceError> {
    let map: BTreeMap<String, String> =
        serde_json::from_str(text).map_err(|e| TraceError::Assignment(e.to_string()))?;
    let mut out = vec![None; instance.num_variables()];
    for (var, value) in &map {
        let x = instance
            .var_index(var)
            .ok_or_else(|| TraceError::Assignment(format!("unknown variable {var:?}")))?;
        let y = instance
            .variable(x)
            .value_index(value)
            .ok_or_else(|| TraceError::Assignment(format!("{value:?} is not a value of {var:?}")))?;
        out[x] = Some(y);
    }
    out.into_iter()
        .enumerate()
        .map(|(x, y)| y.ok_or_else(|| TraceError::Assignment(format!("missing variable {:?}", instance.variable(x).id))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RoundLine {
    Coloring {
        coloring: String,
        palette: usize,
        log_star_rounds: usize,
        rounds: usize,
    },
    Round {
        round: usize,
        color: usize,
        nodes: Vec<String>,
        vars: Vec<String>,
        pstar: bool,
    },
}

pub fn round_lines(instance: &LllInstance, log: &RoundLog) -> Vec<RoundLine> {
    let mut out = vec![RoundLine::Coloring {
        coloring: log.kind.name().to_string(),
        palette: log.palette,
        log_star_rounds: log.coloring_rounds,
        rounds: log.rounds.len(),
    }];
    out.extend(log.rounds.iter().map(|r| RoundLine::Round {
        round: r.round,
        color: r.color,
        nodes: r.nodes.iter().map(|&e| instance.event(e).id.clone()).collect(),
        vars: r.vars.iter().map(|&x| instance.variable(x).id.clone()).collect(),
        pstar: r.pstar_ok,
    }));
    out
}

pub fn roundlog_to_jsonl(instance: &LllInstance, log: &RoundLog) -> String {
    to_jsonl(&round_lines(instance, log))
}

pub fn parse_roundlog_jsonl(text: &str) -> Result<Vec<RoundLine>, TraceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| TraceError::Json {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixer::run_sequential;
    use crate::fixtures;
    use crate::local_sim::run_parallel_r3;
    use crate::order::ReverseOrder;

    #[test]
    fn trace_round_trips_through_jsonl() {
        let inst = fixtures::rank3_triangle().unwrap();
        let out = run_sequential(&inst, &mut ReverseOrder).unwrap();
        let text = trace_to_jsonl(&inst, &out.trace);
        assert_eq!(text.lines().count(), inst.num_variables());
        let lines = parse_trace_jsonl(&text).unwrap();
        assert_eq!(lines, trace_lines(&inst, &out.trace));
        let steps = resolve_trace(&inst, &lines).unwrap();
        for (s, r) in steps.iter().zip(&out.trace.records) {
            assert_eq!((s.var, s.value), (r.var, r.value));
            assert_eq!(s.writes.len(), r.writes.len());
        }
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("{\"step\":0,\"var\":"));
    }

    #[test]
    fn unknown_ids_are_reported_with_lines() {
        let inst = fixtures::rank3_triangle().unwrap();
        let bad = r#"{"step":0,"var":"Q","value":"H","inc":[],"writes":[],"weighted_sum":null,"pstar":"held"}"#;
        let lines = parse_trace_jsonl(bad).unwrap();
        assert!(matches!(
            resolve_trace(&inst, &lines),
            Err(TraceError::UnknownVariable { line: 1, .. })
        ));
        assert!(matches!(
            parse_trace_jsonl("\n{oops"),
            Err(TraceError::Json { line: 2, .. })
        ));
    }

    #[test]
    fn assignment_round_trip_and_errors() {
        let inst = fixtures::single_edge().unwrap();
        let text = assignment_to_json(&inst, &[1, 0, 7]);
        assert_eq!(parse_assignment(&inst, &text).unwrap(), vec![1, 0, 7]);
        assert!(parse_assignment(&inst, r#"{"X":"H"}"#).is_err());
        assert!(parse_assignment(&inst, r#"{"X":"Q","Pu":"0","Pv":"0"}"#).is_err());
    }

    #[test]
    fn roundlog_has_header_and_rounds() {
        let inst = fixtures::rank3_triangle().unwrap();
        let out = run_parallel_r3(&inst).unwrap();
        let text = roundlog_to_jsonl(&inst, &out.log);
        let lines = parse_roundlog_jsonl(&text).unwrap();
        assert_eq!(lines.len(), 1 + out.log.rounds.len());
        assert!(matches!(lines[0], RoundLine::Coloring { palette: 3, .. }));
    }
}
