//! The sequential fixing process. Each step fixes one variable and rewrites
//! the ledger slots on the triangle spanned by the events it affects, so that
//! P* keeps holding; once every variable is fixed no bad event occurs.
//!
//! Variables of rank 1 or 2 are lifted to rank 3 with virtual events whose
//! increase is always 1. Their ledger slots are pinned to 1 and never stored,
//! which for rank 2 turns the triangle condition into the edge condition
//! `Inc_u·φ_e^u + Inc_v·φ_e^v <= 2`, and for rank 1 into `Inc_u <= 1`.

use log::{debug, trace};
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::instance::LllInstance;
use crate::ledger::{check_pstar_at, event_bound, LedgerWrite, PStarReport, PhiLedger};
use crate::prob::{PartialAssignment, ProbEngine, ProbError};
use crate::rational::{ceil_dyadic, format_rational, int};
use crate::representable::{decompose, decompose_compact, membership_slack, ReprError, Triple};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FixError {
    #[error("P* does not hold before fixing {var:?} (events {events:?})")]
    PStarViolatedPre { var: String, events: Vec<String> },
    #[error("P* fails after fixing {var:?} at step {step}: {detail}")]
    PStarViolatedPost { step: usize, var: String, detail: String },
    #[error("no good value for {var:?}: triple {triple}, increases {incs}")]
    NoGoodValue { var: String, triple: String, incs: String },
    #[error("every value of {var:?} is evil for triple {triple}")]
    AllValuesEvil { var: String, triple: String },
    #[error("variable {var:?} has rank {rank}, the rank-2 rule needs at most 2")]
    NotRankTwo { var: String, rank: usize },
    #[error("invalid order: {0}")]
    InvalidOrder(String),
    #[error("ledger bound for event {event:?} is {bound}, not below 1")]
    FinalBoundTooLarge { event: String, bound: String },
    #[error("event {0:?} occurs under the final assignment")]
    FinalEventOccurred(String),
    #[error("decomposition failed: {0}")]
    Decompose(#[from] ReprError),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// One position of a lifted hyperedge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Real(usize),
    Virtual,
}

/// The events of a variable padded to three slots; real events come first,
/// in index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiftedHyperedge {
    pub var: usize,
    pub slots: [Slot; 3],
}

/// Slot pairs of the triangle: `e = (0, 1)`, `e' = (0, 2)`, `e'' = (1, 2)`.
pub const TRIANGLE: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

impl LiftedHyperedge {
    /// Number of real slots.
    pub fn rank(&self) -> usize {
        self.real_events().count()
    }

    pub fn real_events(&self) -> impl Iterator<Item = usize> + '_ {
        self.slots.iter().filter_map(|s| match s {
            Slot::Real(e) => Some(*e),
            Slot::Virtual => None,
        })
    }
}

pub fn embed_rank_lift(instance: &LllInstance, var: usize) -> LiftedHyperedge {
    let he = instance.hypergraph().hyperedge(var);
    assert!(he.len() <= 3, "rank above 3");
    let mut slots = [Slot::Virtual; 3];
    for (slot, &e) in slots.iter_mut().zip(he) {
        *slot = Slot::Real(e);
    }
    LiftedHyperedge { var, slots }
}

/// What a single fixing step decided.
#[derive(Debug, Clone, PartialEq)]
pub struct StepChoice {
    pub value: usize,
    /// `Inc(event, value)` for each real event of the variable.
    pub incs: Vec<(usize, BigRational)>,
    pub writes: Vec<LedgerWrite>,
    /// `φ_e^u·Inc_u + φ_e^v·Inc_v` for the chosen value, on rank <= 2
    /// variables; a virtual partner contributes 1.
    pub weighted_sum: Option<BigRational>,
    /// Slack of the chosen value: `R` on rank 3, `2 - weighted_sum` on rank 2,
    /// `1 - Inc` on rank 1.
    pub slack: Option<BigRational>,
}

fn slot_incs(
    engine: &ProbEngine<'_>,
    lift: &LiftedHyperedge,
    partial: &PartialAssignment,
) -> Result<Vec<[BigRational; 3]>, FixError> {
    let n = engine.instance().variable(lift.var).domain.len();
    (0..n)
        .map(|y| {
            let mut out = [BigRational::one(), BigRational::one(), BigRational::one()];
            for (o, s) in out.iter_mut().zip(&lift.slots) {
                if let Slot::Real(e) = s {
                    *o = engine.inc(*e, partial, lift.var, y)?;
                }
            }
            Ok(out)
        })
        .collect()
}

fn real_incs(lift: &LiftedHyperedge, incs: &[BigRational; 3]) -> Vec<(usize, BigRational)> {
    lift.real_events().zip(incs.iter().cloned()).collect()
}

fn describe_incs(instance: &LllInstance, lift: &LiftedHyperedge, all: &[[BigRational; 3]]) -> String {
    let var = instance.variable(lift.var);
    all.iter()
        .enumerate()
        .map(|(y, incs)| {
            let parts: Vec<String> = real_incs(lift, incs)
                .iter()
                .map(|(e, r)| format!("{}:{}", instance.event(*e).id, format_rational(r)))
                .collect();
            format!("{}=[{}]", var.domain[y], parts.join(","))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// The ledger triple `(φ_e^u φ_e'^u, φ_e^v φ_e''^v, φ_e'^w φ_e''^w)` of a
/// rank-3 hyperedge, with the edge ids `[e, e', e'']`.
pub fn current_triple(instance: &LllInstance, ledger: &PhiLedger, events: [usize; 3]) -> (Triple, [usize; 3]) {
    let g = instance.graph();
    let [u, v, w] = events;
    let edge = |x, y| g.edge_between(x, y).expect("events sharing a variable are adjacent");
    let ids = [edge(u, v), edge(u, w), edge(v, w)];
    let phi = |e: usize, x: usize| ledger.get(g, e, x).clone();
    let t = Triple::new(
        phi(ids[0], u) * phi(ids[1], u),
        phi(ids[0], v) * phi(ids[2], v),
        phi(ids[1], w) * phi(ids[2], w),
    );
    (t, ids)
}

/// Rank-2 ledger values, rounded up to a short dyadic when the edge sum
/// still fits under 2.
fn compact_pair(x: BigRational, y: BigRational) -> (BigRational, BigRational) {
    let two = int(2);
    for bits in [8, 16, 32, 64] {
        let (cx, cy) = (ceil_dyadic(&x, bits), ceil_dyadic(&y, bits));
        if &cx + &cy <= two {
            return (cx, cy);
        }
    }
    (x, y)
}

/// Fixes `var` by the rule for rank 3, lifting lower ranks. Among values
/// whose scaled triple is representable it picks the largest slack, ties
/// going to the first value in domain order. The partial assignment is not
/// touched; the ledger is.
pub fn fix_r3(
    engine: &ProbEngine<'_>,
    var: usize,
    partial: &PartialAssignment,
    ledger: &mut PhiLedger,
    compact: bool,
) -> Result<StepChoice, FixError> {
    let instance = engine.instance();
    let lift = embed_rank_lift(instance, var);
    let all = slot_incs(engine, &lift, partial)?;
    let g = instance.graph();
    let vid = || instance.variable(var).id.clone();
    let real: Vec<usize> = lift.real_events().collect();
    match real.len() {
        3 => {
            let events = [real[0], real[1], real[2]];
            let (t, [e, e1, e2]) = current_triple(instance, ledger, events);
            let mut best: Option<(BigRational, usize, Triple)> = None;
            for (y, inc) in all.iter().enumerate() {
                let target = t.scaled(&inc[0], &inc[1], &inc[2]);
                if let Some(r) = membership_slack(&target) {
                    if best.as_ref().map_or(true, |b| r > b.0) {
                        best = Some((r, y, target));
                    }
                }
            }
            let Some((slack, y, target)) = best else {
                return Err(FixError::NoGoodValue {
                    var: vid(),
                    triple: t.to_string(),
                    incs: describe_incs(instance, &lift, &all),
                });
            };
            let split = if compact { decompose_compact(&target)? } else { decompose(&target)? };
            let [u, v, w] = events;
            let writes = vec![
                ledger.write(g, e, u, split.a1),
                ledger.write(g, e1, u, split.a2),
                ledger.write(g, e, v, split.b1),
                ledger.write(g, e2, v, split.b3),
                ledger.write(g, e1, w, split.c2),
                ledger.write(g, e2, w, split.c3),
            ];
            Ok(StepChoice {
                value: y,
                incs: real_incs(&lift, &all[y]),
                writes,
                weighted_sum: None,
                slack: Some(slack),
            })
        }
        2 => {
            let (y, sum, pu, pv, e) = best_pair(instance, ledger, &real, &all);
            let two = int(2);
            if sum > two {
                return Err(FixError::NoGoodValue {
                    var: vid(),
                    triple: format!("edge sum {}", format_rational(&sum)),
                    incs: describe_incs(instance, &lift, &all),
                });
            }
            let (pu, pv) = if compact { compact_pair(pu, pv) } else { (pu, pv) };
            let writes = vec![ledger.write(g, e, real[0], pu), ledger.write(g, e, real[1], pv)];
            Ok(StepChoice {
                value: y,
                incs: real_incs(&lift, &all[y]),
                writes,
                slack: Some(&two - &sum),
                weighted_sum: Some(sum),
            })
        }
        1 => {
            let (y, inc) = min_inc(&all);
            if inc > BigRational::one() {
                return Err(FixError::NoGoodValue {
                    var: vid(),
                    triple: format!("increase {}", format_rational(&inc)),
                    incs: describe_incs(instance, &lift, &all),
                });
            }
            Ok(StepChoice {
                value: y,
                incs: real_incs(&lift, &all[y]),
                writes: Vec::new(),
                slack: Some(BigRational::one() - &inc),
                weighted_sum: Some(inc + BigRational::one()),
            })
        }
        _ => Ok(StepChoice {
            value: 0,
            incs: Vec::new(),
            writes: Vec::new(),
            weighted_sum: None,
            slack: None,
        }),
    }
}

/// Value minimising `φ_e^u·Inc_u + φ_e^v·Inc_v`, first in domain order on
/// ties. Returns `(value, sum, ψ_u, ψ_v, edge)`.
fn best_pair(
    instance: &LllInstance,
    ledger: &PhiLedger,
    real: &[usize],
    all: &[[BigRational; 3]],
) -> (usize, BigRational, BigRational, BigRational, usize) {
    let g = instance.graph();
    let (u, v) = (real[0], real[1]);
    let e = g.edge_between(u, v).expect("events sharing a variable are adjacent");
    let (fu, fv) = (ledger.get(g, e, u), ledger.get(g, e, v));
    let mut best: Option<(usize, BigRational, BigRational, BigRational)> = None;
    for (y, inc) in all.iter().enumerate() {
        let pu = fu * &inc[0];
        let pv = fv * &inc[1];
        let sum = &pu + &pv;
        if best.as_ref().map_or(true, |b| sum < b.1) {
            best = Some((y, sum, pu, pv));
        }
    }
    let (y, sum, pu, pv) = best.expect("non-empty domain");
    (y, sum, pu, pv, e)
}

fn min_inc(all: &[[BigRational; 3]]) -> (usize, BigRational) {
    let mut best = (0, all[0][0].clone());
    for (y, inc) in all.iter().enumerate().skip(1) {
        if inc[0] < best.1 {
            best = (y, inc[0].clone());
        }
    }
    best
}

/// Fixes a variable of rank at most 2 by minimising the weighted increase
/// sum on its edge. Ledger values are written exactly. A rank-1 variable
/// pairs with a virtual event of weight 1.
pub fn fix_r2(
    engine: &ProbEngine<'_>,
    var: usize,
    partial: &PartialAssignment,
    ledger: &mut PhiLedger,
) -> Result<StepChoice, FixError> {
    let instance = engine.instance();
    let lift = embed_rank_lift(instance, var);
    let real: Vec<usize> = lift.real_events().collect();
    if real.len() > 2 {
        return Err(FixError::NotRankTwo {
            var: instance.variable(var).id.clone(),
            rank: real.len(),
        });
    }
    let pre = check_pstar_at(engine, ledger, partial, real.iter().copied());
    if !pre.holds() {
        let mut events: Vec<String> = pre
            .bound_violations
            .iter()
            .map(|&e| instance.event(e).id.clone())
            .collect();
        for &e in &pre.sum_violations {
            let (a, b) = instance.graph().edge(e);
            events.push(format!("{}~{}", instance.event(a).id, instance.event(b).id));
        }
        return Err(FixError::PStarViolatedPre {
            var: instance.variable(var).id.clone(),
            events,
        });
    }
    let all = slot_incs(engine, &lift, partial)?;
    match real.len() {
        2 => {
            let (y, sum, pu, pv, e) = best_pair(instance, ledger, &real, &all);
            let g = instance.graph();
            let writes = vec![ledger.write(g, e, real[0], pu), ledger.write(g, e, real[1], pv)];
            Ok(StepChoice {
                value: y,
                incs: real_incs(&lift, &all[y]),
                writes,
                slack: Some(int(2) - &sum),
                weighted_sum: Some(sum),
            })
        }
        1 => {
            let (y, inc) = min_inc(&all);
            Ok(StepChoice {
                value: y,
                incs: real_incs(&lift, &all[y]),
                writes: Vec::new(),
                slack: Some(BigRational::one() - &inc),
                weighted_sum: Some(inc + BigRational::one()),
            })
        }
        _ => Ok(StepChoice {
            value: 0,
            incs: Vec::new(),
            writes: Vec::new(),
            weighted_sum: None,
            slack: None,
        }),
    }
}

/// Values of `var` whose increase-scaled `triple` leaves the representable
/// set. Virtual slots scale by 1.
pub fn find_evil_values(
    engine: &ProbEngine<'_>,
    var: usize,
    partial: &PartialAssignment,
    triple: &Triple,
) -> Result<Vec<usize>, FixError> {
    let lift = embed_rank_lift(engine.instance(), var);
    let all = slot_incs(engine, &lift, partial)?;
    let evil: Vec<usize> = all
        .iter()
        .enumerate()
        .filter(|(_, inc)| membership_slack(&triple.scaled(&inc[0], &inc[1], &inc[2])).is_none())
        .map(|(y, _)| y)
        .collect();
    if evil.len() == all.len() {
        return Err(FixError::AllValuesEvil {
            var: engine.instance().variable(var).id.clone(),
            triple: triple.to_string(),
        });
    }
    Ok(evil)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FixRule {
    /// [`fix_r3`] for every variable.
    #[default]
    Rank3Lift,
    /// [`fix_r2`]; fails on rank-3 variables.
    Rank2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CheckLevel {
    #[default]
    EveryStep,
    /// Every step for the first 1000 fixings, then every 100th.
    Sampled,
}

impl CheckLevel {
    pub fn due(self, step: usize) -> bool {
        match self {
            CheckLevel::EveryStep => true,
            CheckLevel::Sampled => step < 1000 || step % 100 == 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixConfig {
    pub rule: FixRule,
    pub check: CheckLevel,
    /// Round rewritten ledger values to short dyadics where that keeps P*.
    pub compact: bool,
}

impl Default for FixConfig {
    fn default() -> Self {
        FixConfig {
            rule: FixRule::Rank3Lift,
            check: CheckLevel::EveryStep,
            compact: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PStarCheck {
    Held,
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixRecord {
    pub step: usize,
    pub var: usize,
    pub value: usize,
    pub incs: Vec<(usize, BigRational)>,
    pub writes: Vec<LedgerWrite>,
    pub weighted_sum: Option<BigRational>,
    pub pstar: PStarCheck,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixTrace {
    pub records: Vec<FixRecord>,
}

impl FixTrace {
    /// Variables in the order they were fixed.
    pub fn order(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.var).collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Read-only view handed to order policies.
pub struct FixState<'s> {
    pub instance: &'s LllInstance,
    pub partial: &'s PartialAssignment,
    pub ledger: &'s PhiLedger,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixOutcome {
    /// Value index per variable.
    pub assignment: Vec<usize>,
    pub ledger: PhiLedger,
    pub trace: FixTrace,
}

/// A fixing session: owns the engine, the partial assignment, the ledger
/// and the trace.
pub struct Fixer<'a> {
    engine: ProbEngine<'a>,
    partial: PartialAssignment,
    ledger: PhiLedger,
    trace: FixTrace,
    config: FixConfig,
}

impl<'a> Fixer<'a> {
    pub fn new(instance: &'a LllInstance, config: FixConfig) -> Self {
        Fixer {
            engine: ProbEngine::new(instance),
            partial: PartialAssignment::for_instance(instance),
            ledger: PhiLedger::all_ones(instance.graph()),
            trace: FixTrace::default(),
            config,
        }
    }

    pub fn instance(&self) -> &'a LllInstance {
        self.engine.instance()
    }

    pub fn engine(&self) -> &ProbEngine<'a> {
        &self.engine
    }

    pub fn partial(&self) -> &PartialAssignment {
        &self.partial
    }

    pub fn ledger(&self) -> &PhiLedger {
        &self.ledger
    }

    pub fn trace(&self) -> &FixTrace {
        &self.trace
    }

    pub fn state(&self) -> FixState<'_> {
        FixState {
            instance: self.instance(),
            partial: &self.partial,
            ledger: &self.ledger,
        }
    }

    /// Fixes one unassigned variable.
    pub fn fix(&mut self, var: usize) -> Result<&FixRecord, FixError> {
        let instance = self.instance();
        if var >= instance.num_variables() {
            return Err(FixError::InvalidOrder(format!("variable index {var} out of range")));
        }
        if self.partial.is_assigned(var) {
            return Err(FixError::InvalidOrder(format!(
                "variable {:?} is already fixed",
                instance.variable(var).id
            )));
        }
        let choice = match self.config.rule {
            FixRule::Rank3Lift => fix_r3(&self.engine, var, &self.partial, &mut self.ledger, self.config.compact)?,
            FixRule::Rank2 => fix_r2(&self.engine, var, &self.partial, &mut self.ledger)?,
        };
        self.partial.assign(instance, var, choice.value)?;
        let step = self.trace.records.len();
        let pstar = if self.config.check.due(step) {
            let events = instance.hypergraph().hyperedge(var).iter().copied();
            let report = check_pstar_at(&self.engine, &self.ledger, &self.partial, events);
            if !report.holds() {
                return Err(FixError::PStarViolatedPost {
                    step,
                    var: instance.variable(var).id.clone(),
                    detail: describe_report(instance, &report),
                });
            }
            PStarCheck::Held
        } else {
            PStarCheck::Skipped
        };
        debug!(
            "step {step}: {} = {} ({} ledger writes)",
            instance.variable(var).id,
            instance.variable(var).domain[choice.value],
            choice.writes.len()
        );
        for w in &choice.writes {
            trace!(
                "  edge {} at {}: {} -> {}",
                w.edge,
                instance.event(w.endpoint).id,
                format_rational(&w.before),
                format_rational(&w.after)
            );
        }
        self.trace.records.push(FixRecord {
            step,
            var,
            value: choice.value,
            incs: choice.incs,
            writes: choice.writes,
            weighted_sum: choice.weighted_sum,
            pstar,
        });
        Ok(self.trace.records.last().expect("just pushed"))
    }

    /// Checks the final ledger bounds and truth tables.
    pub fn finish(self) -> Result<FixOutcome, FixError> {
        let instance = self.instance();
        let Some(assignment) = self.partial.to_full() else {
            let left = self.partial.unassigned().count();
            return Err(FixError::InvalidOrder(format!("{left} variable(s) left unfixed")));
        };
        for e in 0..instance.num_events() {
            let bound = event_bound(instance, &self.ledger, e);
            if bound >= BigRational::one() {
                return Err(FixError::FinalBoundTooLarge {
                    event: instance.event(e).id.clone(),
                    bound: format_rational(&bound),
                });
            }
            if !self.engine.cond_prob(e, &self.partial).is_zero() || instance.event_occurs(e, &assignment) {
                return Err(FixError::FinalEventOccurred(instance.event(e).id.clone()));
            }
        }
        Ok(FixOutcome {
            assignment,
            ledger: self.ledger,
            trace: self.trace,
        })
    }
}

fn describe_report(instance: &LllInstance, r: &PStarReport) -> String {
    let ev = |e: &usize| instance.event(*e).id.clone();
    format!(
        "bound violated at {:?}, edge sums above 2 at {:?}, out-of-range slots {:?}",
        r.bound_violations.iter().map(ev).collect::<Vec<_>>(),
        r.sum_violations,
        r.range_violations
    )
}

/// Chooses the next variable to fix from the current state.
pub trait OrderPolicy {
    /// An unfixed variable, or `None` to stop early (an error if variables
    /// remain).
    fn next_var(&mut self, state: &FixState<'_>) -> Option<usize>;
}

impl<F> OrderPolicy for F
where
    F: FnMut(&FixState<'_>) -> Option<usize>,
{
    fn next_var(&mut self, state: &FixState<'_>) -> Option<usize> {
        self(state)
    }
}

pub fn run_sequential(instance: &LllInstance, order: &mut dyn OrderPolicy) -> Result<FixOutcome, FixError> {
    run_sequential_with(instance, order, FixConfig::default())
}

pub fn run_sequential_with(
    instance: &LllInstance,
    order: &mut dyn OrderPolicy,
    config: FixConfig,
) -> Result<FixOutcome, FixError> {
    let mut fixer = Fixer::new(instance, config);
    while !fixer.partial().is_complete() {
        let Some(var) = order.next_var(&fixer.state()) else {
            break;
        };
        fixer.fix(var)?;
    }
    fixer.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::instance::{BadEvent, Variable};
    use crate::ledger::check_pstar;
    use crate::order::{DeclarationOrder, ReverseOrder};
    use crate::rational::ratio;

    /// `u` fires on `X = 0`, `v` on `X = 1`, each also needing a private die.
    fn split_coin() -> LllInstance {
        let faces: Vec<String> = (0..8).map(|i| i.to_string()).collect();
        let vars = vec![
            Variable::uniform("X", ["0", "1"]),
            Variable::uniform("Pu", faces.clone()),
            Variable::uniform("Pv", faces),
        ];
        let events = vec![
            BadEvent::new("u", vec!["X".into(), "Pu".into()], vec![vec!["0".into(), "0".into()]]),
            BadEvent::new("v", vec!["X".into(), "Pv".into()], vec![vec!["1".into(), "0".into()]]),
        ];
        LllInstance::build(vars, events, 2).unwrap()
    }

    #[test]
    fn r2_on_opposite_events_picks_first_value() {
        let inst = split_coin();
        let eng = ProbEngine::new(&inst);
        let mut ledger = PhiLedger::all_ones(inst.graph());
        let p = PartialAssignment::for_instance(&inst);
        let c = fix_r2(&eng, 0, &p, &mut ledger).unwrap();
        assert_eq!(c.value, 0);
        assert_eq!(c.weighted_sum, Some(int(2)));
        assert_eq!(ledger.get(inst.graph(), 0, 0), &int(2));
        assert_eq!(ledger.get(inst.graph(), 0, 1), &int(0));
    }

    #[test]
    fn r2_weighted_state_stays_under_two() {
        let inst = split_coin();
        let eng = ProbEngine::new(&inst);
        let g = inst.graph();
        let mut ledger = PhiLedger::all_ones(g);
        // with Pv off zero, v is dead and may give up ledger weight
        let mut p = PartialAssignment::for_instance(&inst);
        p.assign(&inst, inst.var_index("Pv").unwrap(), 1).unwrap();
        ledger.set(g, 0, 0, ratio(3, 2));
        ledger.set(g, 0, 1, ratio(1, 2));
        let c = fix_r2(&eng, 0, &p, &mut ledger).unwrap();
        // 3/2·2 = 3 for X = 0, 3/2·0 = 0 for X = 1
        assert_eq!(c.value, 1);
        assert_eq!(c.weighted_sum, Some(int(0)));
    }

    #[test]
    fn r2_rejects_broken_precondition() {
        let inst = split_coin();
        let eng = ProbEngine::new(&inst);
        let g = inst.graph();
        let mut ledger = PhiLedger::all_ones(g);
        ledger.set(g, 0, 0, ratio(1, 100));
        let p = PartialAssignment::for_instance(&inst);
        assert!(matches!(
            fix_r2(&eng, 0, &p, &mut ledger),
            Err(FixError::PStarViolatedPre { .. })
        ));
    }

    #[test]
    fn lift_pads_with_virtual_slots() {
        let inst = fixtures::coin_triangle(true).unwrap();
        let xuv = inst.var_index("Xuv").unwrap();
        let lift = embed_rank_lift(&inst, xuv);
        assert_eq!(lift.rank(), 2);
        assert_eq!(lift.slots[2], Slot::Virtual);
        let pu = inst.var_index("Pu").unwrap();
        assert_eq!(embed_rank_lift(&inst, pu).rank(), 1);
        let r3 = fixtures::rank3_triangle().unwrap();
        assert_eq!(embed_rank_lift(&r3, r3.var_index("Z").unwrap()).rank(), 3);
    }

    #[test]
    fn r3_shared_die_keeps_pstar() {
        // Z = u triples u and kills v, w: target (3, 0, 0), slack 2 for each face
        let inst = fixtures::rank3_triangle().unwrap();
        let eng = ProbEngine::new(&inst);
        let mut ledger = PhiLedger::all_ones(inst.graph());
        let p = PartialAssignment::for_instance(&inst);
        let z = inst.var_index("Z").unwrap();
        let (t, _) = current_triple(&inst, &ledger, [0, 1, 2]);
        assert_eq!(t, Triple::ones());
        let c = fix_r3(&eng, z, &p, &mut ledger, false).unwrap();
        assert_eq!(c.value, 0);
        assert_eq!(c.slack, Some(int(2)));
        assert_eq!(c.writes.len(), 6);
        assert!(check_pstar(&eng, &ledger, &{
            let mut q = p.clone();
            q.assign(&inst, z, c.value).unwrap();
            q
        })
        .holds());
    }

    #[test]
    fn r3_tails_zeroes_both_sides() {
        let inst = fixtures::coin_triangle(true).unwrap();
        let eng = ProbEngine::new(&inst);
        let mut ledger = PhiLedger::all_ones(inst.graph());
        let p = PartialAssignment::for_instance(&inst);
        let xuv = inst.var_index("Xuv").unwrap();
        let c = fix_r3(&eng, xuv, &p, &mut ledger, false).unwrap();
        // H doubles both events, T kills both: T has the larger slack
        assert_eq!(inst.variable(xuv).domain[c.value], "T");
        assert!(c.incs.iter().all(|(_, r)| r.is_zero()));
        assert!(c.writes.iter().all(|w| w.after.is_zero()));
    }

    #[test]
    fn evil_values() {
        let inst = split_coin();
        let eng = ProbEngine::new(&inst);
        let p = PartialAssignment::for_instance(&inst);
        // X = 0 gives (6, 0, 1) with a > 4; X = 1 gives (0, 2, 1)
        let t = Triple::new(int(3), int(1), int(1));
        assert_eq!(find_evil_values(&eng, 0, &p, &t).unwrap(), vec![0]);
        let t = Triple::new(int(4), int(4), int(4));
        assert!(matches!(
            find_evil_values(&eng, 0, &p, &t),
            Err(FixError::AllValuesEvil { .. })
        ));
        assert_eq!(find_evil_values(&eng, 0, &p, &Triple::ones()).unwrap(), Vec::<usize>::new());
        // a private die only scales u; faces other than 0 zero it out
        let pu = inst.var_index("Pu").unwrap();
        let evil = find_evil_values(&eng, pu, &p, &Triple::new(int(1), int(2), int(0))).unwrap();
        assert_eq!(evil, vec![0]);
    }

    #[test]
    fn triangle_runs_avoid_everything() {
        for inst in [
            fixtures::coin_triangle(true).unwrap(),
            fixtures::rank3_triangle().unwrap(),
            fixtures::two_rank3_triangles().unwrap(),
            fixtures::path3().unwrap(),
            fixtures::coin_star(3).unwrap(),
        ] {
            for out in [
                run_sequential(&inst, &mut DeclarationOrder).unwrap(),
                run_sequential(&inst, &mut ReverseOrder).unwrap(),
            ] {
                assert!(inst.occurring_events(&out.assignment).is_empty());
                assert_eq!(out.trace.len(), inst.num_variables());
            }
        }
    }

    #[test]
    fn empty_instance_gives_empty_assignment() {
        let inst = LllInstance::build(vec![], vec![], 3).unwrap();
        let out = run_sequential(&inst, &mut DeclarationOrder).unwrap();
        assert!(out.assignment.is_empty());
    }

    #[test]
    fn rank2_rule_refuses_rank3_variable() {
        let inst = fixtures::rank3_triangle().unwrap();
        let cfg = FixConfig {
            rule: FixRule::Rank2,
            ..FixConfig::default()
        };
        assert!(matches!(
            run_sequential_with(&inst, &mut ReverseOrder, cfg),
            Err(FixError::NotRankTwo { .. })
        ));
    }

    #[test]
    fn order_that_repeats_is_rejected() {
        let inst = fixtures::single_edge().unwrap();
        let mut again = |_: &FixState<'_>| Some(0);
        assert!(matches!(
            run_sequential(&inst, &mut again),
            Err(FixError::InvalidOrder(_))
        ));
        let mut stop = |_: &FixState<'_>| None;
        assert!(matches!(run_sequential(&inst, &mut stop), Err(FixError::InvalidOrder(_))));
    }

    #[test]
    fn sampled_schedule() {
        assert!(CheckLevel::Sampled.due(999));
        assert!(!CheckLevel::Sampled.due(1001));
        assert!(CheckLevel::Sampled.due(1100));
    }
}
