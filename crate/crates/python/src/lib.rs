//! Python bindings. Rationals cross the boundary as `"num/den"` strings,
//! artifacts as the same JSON / JSONL text the CLI writes.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use lllfix::fixer::{run_sequential_with, FixConfig, FixError};
use lllfix::format;
use lllfix::generators::{Family, GenSpec};
use lllfix::local_sim::{run_parallel_r2, run_parallel_r3, SimError};
use lllfix::order::OrderKind;
use lllfix::rational::{format_rational, parse_rational};
use lllfix::representable::{self, Triple};
use lllfix::trace::{parse_trace_jsonl, resolve_trace, roundlog_to_jsonl, trace_to_jsonl};
use lllfix::verify::{replay_trace, verify_assignment, ReplayOptions};
use lllfix::LllInstance;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn fix_err(e: FixError) -> PyErr {
    match e {
        FixError::NotRankTwo { .. } | FixError::InvalidOrder(_) => value_err(e),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn sim_err(e: SimError) -> PyErr {
    match e {
        SimError::Fix(f) => fix_err(f),
        SimError::NotRankTwo { .. } => value_err(e),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A validated LLL instance.
#[pyclass(name = "Instance", module = "pylllfix", frozen)]
pub struct PyInstance {
    inner: LllInstance,
}

#[pymethods]
impl PyInstance {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        format::from_json_str(text).map(|inner| PyInstance { inner }).map_err(value_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        format::load(path).map(|inner| PyInstance { inner }).map_err(value_err)
    }

    #[staticmethod]
    #[pyo3(signature = (family, seed=0))]
    fn generate(family: &str, seed: u64) -> PyResult<Self> {
        let family: Family = family.parse().map_err(value_err)?;
        let inner = GenSpec::new(family, seed).generate().map_err(value_err)?;
        Ok(PyInstance { inner })
    }

    fn to_json(&self) -> String {
        format::to_json_string(&self.inner)
    }

    #[getter]
    fn num_variables(&self) -> usize {
        self.inner.num_variables()
    }

    #[getter]
    fn num_events(&self) -> usize {
        self.inner.num_events()
    }

    /// Maximum degree `d` of the dependency graph.
    #[getter]
    fn dependency_degree(&self) -> usize {
        self.inner.dependency_degree()
    }

    #[getter]
    fn variable_ids(&self) -> Vec<String> {
        self.inner.variables().iter().map(|v| v.id.clone()).collect()
    }

    #[getter]
    fn event_ids(&self) -> Vec<String> {
        self.inner.events().iter().map(|e| e.id.clone()).collect()
    }

    /// Exact `Pr[E]` for the named event.
    fn probability(&self, event: &str) -> PyResult<String> {
        let e = self
            .inner
            .event_index(event)
            .ok_or_else(|| value_err(format!("unknown event {event:?}")))?;
        Ok(format_rational(self.inner.p_bound(e)))
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(variables={}, events={}, d={})",
            self.inner.num_variables(),
            self.inner.num_events(),
            self.inner.dependency_degree()
        )
    }
}

/// Outcome of a fixing run.
#[pyclass(name = "FixResult", module = "pylllfix", frozen, get_all)]
pub struct PyFixResult {
    /// Variable id to value.
    assignment: BTreeMap<String, String>,
    /// FixTrace as JSONL.
    trace: String,
    /// RoundLog as JSONL; empty for sequential runs.
    roundlog: String,
    rounds: usize,
}

fn named(inst: &LllInstance, assignment: &[usize]) -> BTreeMap<String, String> {
    assignment
        .iter()
        .enumerate()
        .map(|(x, &y)| {
            let v = inst.variable(x);
            (v.id.clone(), v.domain[y].clone())
        })
        .collect()
}

/// Sequential fixing under an order policy.
#[pyfunction]
#[pyo3(signature = (instance, order="declaration", seed=0))]
fn fix(instance: &PyInstance, order: &str, seed: u64) -> PyResult<PyFixResult> {
    let inst = &instance.inner;
    let kind: OrderKind = order.parse().map_err(value_err)?;
    let out = run_sequential_with(inst, kind.policy(inst, seed).as_mut(), FixConfig::default()).map_err(fix_err)?;
    Ok(PyFixResult {
        assignment: named(inst, &out.assignment),
        trace: trace_to_jsonl(inst, &out.trace),
        roundlog: String::new(),
        rounds: 0,
    })
}

/// Round-based simulation; `mode` is `parallel-r2` or `parallel-r3`.
#[pyfunction]
#[pyo3(signature = (instance, mode="parallel-r3"))]
fn simulate(instance: &PyInstance, mode: &str) -> PyResult<PyFixResult> {
    let inst = &instance.inner;
    let sim = match mode {
        "parallel-r2" => run_parallel_r2(inst),
        "parallel-r3" => run_parallel_r3(inst),
        _ => return Err(value_err(format!("unknown mode {mode:?}"))),
    }
    .map_err(sim_err)?;
    Ok(PyFixResult {
        assignment: named(inst, &sim.assignment),
        trace: trace_to_jsonl(inst, &sim.trace),
        roundlog: roundlog_to_jsonl(inst, &sim.log),
        rounds: sim.log.rounds.len(),
    })
}

/// Ids of the events that occur under `assignment` (variable id to value).
#[pyfunction]
fn verify(instance: &PyInstance, assignment: BTreeMap<String, String>) -> PyResult<Vec<String>> {
    let inst = &instance.inner;
    let mut full = vec![None; inst.num_variables()];
    for (var, value) in &assignment {
        let x = inst
            .var_index(var)
            .ok_or_else(|| value_err(format!("unknown variable {var:?}")))?;
        let y = inst
            .variable(x)
            .value_index(value)
            .ok_or_else(|| value_err(format!("{value:?} is not in the domain of {var:?}")))?;
        full[x] = Some(y);
    }
    let full: Vec<usize> = full
        .into_iter()
        .enumerate()
        .map(|(x, y)| y.ok_or_else(|| value_err(format!("{:?} is unassigned", inst.variable(x).id))))
        .collect::<PyResult<_>>()?;
    Ok(verify_assignment(inst, &full)
        .into_iter()
        .map(|e| inst.event(e).id.clone())
        .collect())
}

/// Replays a FixTrace; returns the list of failure messages (empty if clean).
#[pyfunction]
fn verify_trace(instance: &PyInstance, trace: &str) -> PyResult<Vec<String>> {
    let inst = &instance.inner;
    let lines = parse_trace_jsonl(trace).map_err(value_err)?;
    let steps = resolve_trace(inst, &lines).map_err(value_err)?;
    let report = replay_trace(inst, &steps, ReplayOptions::default());
    let mut msgs: Vec<String> = report
        .failures
        .iter()
        .map(|f| format!("step {}: {}", f.step, f.reason))
        .collect();
    if !report.complete {
        msgs.push("trace leaves variables unfixed".into());
    }
    msgs.extend(report.occurring.iter().map(|&e| format!("event {:?} occurs", inst.event(e).id)));
    Ok(msgs)
}

fn triple(a: &str, b: &str, c: &str) -> PyResult<Triple> {
    // plain integers are accepted as well as "num/den"
    let r = |s: &str| match s.contains('/') {
        true => parse_rational(s),
        false => parse_rational(&format!("{s}/1")),
    };
    Ok(Triple::new(
        r(a).map_err(value_err)?,
        r(b).map_err(value_err)?,
        r(c).map_err(value_err)?,
    ))
}

/// Exact membership of `(a, b, c)` in the representable set.
#[pyfunction]
fn is_representable(a: &str, b: &str, c: &str) -> PyResult<bool> {
    Ok(representable::is_representable(&triple(a, b, c)?))
}

/// Edge values `a1, a2, b1, b3, c2, c3` realising a representable triple.
#[pyfunction]
fn decompose(a: &str, b: &str, c: &str) -> PyResult<BTreeMap<&'static str, String>> {
    let s = representable::decompose(&triple(a, b, c)?).map_err(value_err)?;
    let names = ["a1", "a2", "b1", "b3", "c2", "c3"];
    Ok(names.into_iter().zip(s.values().map(format_rational)).collect())
}

/// The surface `f(a, b)` in double precision.
#[pyfunction]
fn surface(a: f64, b: f64) -> PyResult<f64> {
    representable::f_value(a, b).map_err(value_err)
}

#[pymodule]
fn pylllfix(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PyFixResult>()?;
    m.add_function(wrap_pyfunction!(fix, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(verify_trace, m)?)?;
    m.add_function(wrap_pyfunction!(is_representable, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(surface, m)?)?;
    Ok(())
}
