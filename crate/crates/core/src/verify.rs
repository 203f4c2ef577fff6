//! Checks an assignment or replays a trace without using the fixer: truth
//! tables come from the instance, conditional probabilities from the
//! enumeration engine, and the ledger is rebuilt here from the recorded
//! writes.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::instance::LllInstance;
use crate::prob::{PartialAssignment, ProbEngine};
use crate::rational::{format_rational, int};
use crate::trace::ResolvedStep;

/// Events that occur under a full assignment.
pub fn verify_assignment(instance: &LllInstance, assignment: &[usize]) -> Vec<usize> {
    assert_eq!(assignment.len(), instance.num_variables(), "assignment length");
    (0..instance.num_events())
        .filter(|&e| instance.event_occurs(e, assignment))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepFailure {
    pub step: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReplayOptions {
    /// Before each step, check `Σ p_y·Inc(E, y) = 1` for every affected
    /// event with positive conditional probability.
    pub expectation_identity: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReplayReport {
    pub steps: usize,
    pub failures: Vec<StepFailure>,
    /// Events occurring under the final assignment, if it is complete.
    pub occurring: Vec<usize>,
    pub complete: bool,
    pub identity_checks: usize,
    /// Full P* checks that passed, one per step.
    pub pstar_checks: usize,
}

impl ReplayReport {
    pub fn clean(&self) -> bool {
        self.failures.is_empty() && self.occurring.is_empty() && self.complete
    }
}

/// Replays `steps` from the all-ones ledger. Each step must fix an unfixed
/// variable, write only edges inside its own hyperedge, and find every
/// `before` value in place; after it, both parts of P* must hold on the
/// whole instance. Replay stops at the first structural failure.
pub fn replay_trace(instance: &LllInstance, steps: &[ResolvedStep], opts: ReplayOptions) -> ReplayReport {
    let g = instance.graph();
    let engine = ProbEngine::new(instance);
    let mut partial = PartialAssignment::for_instance(instance);
    let mut slots: Vec<[BigRational; 2]> = vec![[BigRational::one(), BigRational::one()]; g.edges().len()];
    let side = |edge: usize, end: usize| usize::from(g.edge(edge).0 != end);
    let two = int(2);
    let mut report = ReplayReport::default();
    for (i, step) in steps.iter().enumerate() {
        report.steps = i + 1;
        let fail = |reason: String| StepFailure { step: i, reason };
        let he = instance.hypergraph().hyperedge(step.var);
        let var_id = &instance.variable(step.var).id;
        if partial.is_assigned(step.var) {
            report.failures.push(fail(format!("{var_id:?} fixed twice")));
            break;
        }
        if opts.expectation_identity {
            for &e in he {
                if engine.cond_prob(e, &partial).is_positive() {
                    report.identity_checks += 1;
                    if !engine.expectation_identity_check(e, &partial, step.var) {
                        report.failures.push(fail(format!(
                            "expectation identity fails for {:?} at {var_id:?}",
                            instance.event(e).id
                        )));
                    }
                }
            }
        }
        let mut broken = false;
        for (edge, end, before, after) in &step.writes {
            let (a, b) = g.edge(*edge);
            if !he.contains(&a) || !he.contains(&b) {
                report.failures.push(fail(format!(
                    "write to edge {:?}~{:?} outside the events of {var_id:?}",
                    instance.event(a).id,
                    instance.event(b).id
                )));
                broken = true;
                continue;
            }
            let slot = &mut slots[*edge][side(*edge, *end)];
            if slot != before {
                report.failures.push(fail(format!(
                    "ledger at {:?} on {:?}~{:?} is {}, trace says {}",
                    instance.event(*end).id,
                    instance.event(a).id,
                    instance.event(b).id,
                    format_rational(slot),
                    format_rational(before)
                )));
                broken = true;
            }
            *slot = after.clone();
        }
        if broken {
            break;
        }
        if partial.assign(instance, step.var, step.value).is_err() {
            report.failures.push(fail(format!("bad value for {var_id:?}")));
            break;
        }
        let mut ok = true;
        for (edge, pair) in slots.iter().enumerate() {
            if pair.iter().any(|v| v.is_negative() || *v > two) || &pair[0] + &pair[1] > two {
                let (a, b) = g.edge(edge);
                report.failures.push(fail(format!(
                    "edge {:?}~{:?} holds {} and {}",
                    instance.event(a).id,
                    instance.event(b).id,
                    format_rational(&pair[0]),
                    format_rational(&pair[1])
                )));
                ok = false;
            }
        }
        for e in 0..instance.num_events() {
            let product: BigRational = g
                .neighbors(e)
                .iter()
                .map(|&(_, edge)| slots[edge][side(edge, e)].clone())
                .product();
            let bound = instance.p_bound(e) * product;
            let p = engine.cond_prob(e, &partial);
            if p > bound {
                report.failures.push(fail(format!(
                    "{:?} has conditional probability {} above its bound {}",
                    instance.event(e).id,
                    format_rational(&p),
                    format_rational(&bound)
                )));
                ok = false;
            }
        }
        if ok {
            report.pstar_checks += 1;
        }
    }
    if let Some(full) = partial.to_full() {
        report.complete = true;
        report.occurring = verify_assignment(instance, &full);
    }
    report
}

/// Whether `cond_prob` at a full assignment agrees with truth tables; used
/// to cross-check the two evaluation paths.
pub fn cond_prob_matches_tables(instance: &LllInstance, assignment: &[usize]) -> bool {
    let engine = ProbEngine::new(instance);
    let mut partial = PartialAssignment::for_instance(instance);
    for (x, &y) in assignment.iter().enumerate() {
        if partial.assign(instance, x, y).is_err() {
            return false;
        }
    }
    (0..instance.num_events()).all(|e| {
        let p = engine.cond_prob(e, &partial);
        if instance.event_occurs(e, assignment) {
            p.is_one()
        } else {
            p.is_zero()
        }
    })
}
