//! Round-based LOCAL-model simulation of the fixer. A round processes one
//! colour class: on rank-2 instances the classes of a proper edge colouring,
//! on rank-3 instances the classes of a distance-2 vertex colouring of the
//! dependency graph. Colourings are computed greedily and centrally; the
//! `O(log* n)` cost of a distributed colouring is only reported.
//!
//! Units of one class touch pairwise disjoint events, so running them one
//! after another inside the round gives the same result as running them
//! against a shared snapshot. This is asserted every round.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fixer::{run_sequential_with, CheckLevel, FixConfig, FixError, FixRule, FixTrace, Fixer};
use crate::instance::{DependencyGraph, LllInstance};
use crate::ledger::{check_pstar, PhiLedger};
use crate::order::Permutation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Fix(#[from] FixError),
    #[error("round {round}: event {event:?} is touched by two units")]
    DisjointnessViolation { round: usize, event: String },
    #[error("variable {var:?} has rank {rank}; the edge-coloured run needs rank at most 2")]
    NotRankTwo { var: String, rank: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColoringKind {
    Edge,
    Distance2Vertex,
}

impl ColoringKind {
    pub fn name(self) -> &'static str {
        match self {
            ColoringKind::Edge => "edge",
            ColoringKind::Distance2Vertex => "distance2_vertex",
        }
    }
}

/// Colours of edges (by edge id) or of nodes (by event index).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    pub kind: ColoringKind,
    pub colors: Vec<usize>,
    pub palette: usize,
}

impl Coloring {
    /// Pairwise check of properness.
    pub fn is_proper(&self, graph: &DependencyGraph) -> bool {
        match self.kind {
            ColoringKind::Edge => {
                let edges = graph.edges();
                (0..edges.len()).all(|i| {
                    (i + 1..edges.len()).all(|j| {
                        let (a, b) = edges[i];
                        let (c, d) = edges[j];
                        let share = a == c || a == d || b == c || b == d;
                        !share || self.colors[i] != self.colors[j]
                    })
                })
            }
            ColoringKind::Distance2Vertex => {
                let n = graph.node_count();
                (0..n).all(|u| {
                    (u + 1..n).all(|v| !within_two(graph, u, v) || self.colors[u] != self.colors[v])
                })
            }
        }
    }
}

fn within_two(graph: &DependencyGraph, u: usize, v: usize) -> bool {
    graph.edge_between(u, v).is_some()
        || graph
            .neighbors(u)
            .iter()
            .any(|&(w, _)| graph.edge_between(w, v).is_some())
}

fn smallest_free(used: &BTreeSet<usize>) -> usize {
    (0..).find(|c| !used.contains(c)).expect("unbounded range")
}

/// Greedy in edge-id order; at most `2d - 1` colours.
pub fn greedy_edge_coloring(graph: &DependencyGraph) -> Coloring {
    let mut colors: Vec<usize> = Vec::with_capacity(graph.edges().len());
    for &(u, v) in graph.edges() {
        let used: BTreeSet<usize> = [u, v]
            .iter()
            .flat_map(|&x| graph.neighbors(x).iter().map(|&(_, e)| e))
            .filter(|&e| e < colors.len())
            .map(|e| colors[e])
            .collect();
        colors.push(smallest_free(&used));
    }
    let palette = colors.iter().max().map_or(0, |m| m + 1);
    Coloring {
        kind: ColoringKind::Edge,
        colors,
        palette,
    }
}

/// Greedy in node order on the square of the graph; at most `d² + 1`
/// colours.
pub fn greedy_distance2_coloring(graph: &DependencyGraph) -> Coloring {
    let n = graph.node_count();
    let mut colors: Vec<Option<usize>> = vec![None; n];
    for u in 0..n {
        let mut used = BTreeSet::new();
        for &(w, _) in graph.neighbors(u) {
            used.extend(colors[w]);
            for &(x, _) in graph.neighbors(w) {
                if x != u {
                    used.extend(colors[x]);
                }
            }
        }
        colors[u] = Some(smallest_free(&used));
    }
    let colors: Vec<usize> = colors.into_iter().map(|c| c.expect("coloured")).collect();
    let palette = colors.iter().max().map_or(0, |m| m + 1);
    Coloring {
        kind: ColoringKind::Distance2Vertex,
        colors,
        palette,
    }
}

/// Iterated logarithm (base 2), the round cost of distributed colouring
/// reported alongside the simulated rounds.
pub fn log_star(n: usize) -> usize {
    let mut x = n as f64;
    let mut k = 0;
    while x > 1.0 {
        x = x.log2();
        k += 1;
    }
    k
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundRecord {
    pub round: usize,
    pub color: usize,
    /// Acting nodes (event indices): owners on rank 3, edge endpoints on
    /// rank 2.
    pub nodes: Vec<usize>,
    /// Variables fixed in this round, in the order they were fixed.
    pub vars: Vec<usize>,
    pub pstar_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundLog {
    pub kind: ColoringKind,
    pub palette: usize,
    /// Reported `log* n` rounds for computing the colouring distributedly.
    pub coloring_rounds: usize,
    pub rounds: Vec<RoundRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimOptions {
    /// Shuffle the units inside every round with this seed.
    pub within_round_seed: Option<u64>,
    pub check: CheckLevel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub assignment: Vec<usize>,
    pub ledger: PhiLedger,
    pub trace: FixTrace,
    pub log: RoundLog,
}

/// One acting unit: the nodes it speaks for and the variables it fixes.
struct Unit {
    nodes: Vec<usize>,
    vars: Vec<usize>,
}

fn run_rounds(
    instance: &LllInstance,
    coloring: Coloring,
    classes: Vec<Vec<Unit>>,
    rule: FixRule,
    opts: SimOptions,
) -> Result<SimOutcome, SimError> {
    let config = FixConfig {
        rule,
        check: opts.check,
        compact: true,
    };
    let mut fixer = Fixer::new(instance, config);
    let mut rng = opts.within_round_seed.map(ChaCha8Rng::seed_from_u64);
    let mut rounds = Vec::with_capacity(classes.len());
    for (color, mut units) in classes.into_iter().enumerate() {
        let round = color;
        if let Some(rng) = rng.as_mut() {
            units.shuffle(rng);
        }
        let mut touched: BTreeSet<usize> = BTreeSet::new();
        for unit in &units {
            let mine: BTreeSet<usize> = unit
                .vars
                .iter()
                .flat_map(|&x| instance.hypergraph().hyperedge(x).iter().copied())
                .collect();
            if let Some(&e) = mine.intersection(&touched).next() {
                return Err(SimError::DisjointnessViolation {
                    round,
                    event: instance.event(e).id.clone(),
                });
            }
            touched.extend(mine);
        }
        let mut vars = Vec::new();
        for unit in &units {
            for &x in &unit.vars {
                fixer.fix(x)?;
                vars.push(x);
            }
        }
        let pstar_ok = check_pstar(fixer.engine(), fixer.ledger(), fixer.partial()).holds();
        let mut nodes: Vec<usize> = units.iter().flat_map(|u| u.nodes.iter().copied()).collect();
        nodes.sort_unstable();
        nodes.dedup();
        rounds.push(RoundRecord {
            round,
            color,
            nodes,
            vars,
            pstar_ok,
        });
    }
    let out = fixer.finish()?;
    Ok(SimOutcome {
        assignment: out.assignment,
        ledger: out.ledger,
        trace: out.trace,
        log: RoundLog {
            kind: coloring.kind,
            palette: coloring.palette,
            coloring_rounds: log_star(instance.num_events()),
            rounds,
        },
    })
}

/// Number of rounds: the palette, or one round when there are variables but
/// no colours.
fn round_count(palette: usize, instance: &LllInstance) -> usize {
    if instance.num_variables() > 0 {
        palette.max(1)
    } else {
        palette
    }
}

/// Rank-2 run over the classes of a greedy edge colouring. Each edge fixes
/// its variables in declaration order with the rank-2 rule. A rank-1
/// variable rides with the lowest-id edge at its event; variables of
/// isolated events and variables affecting nothing go to the first round.
pub fn run_parallel_r2(instance: &LllInstance) -> Result<SimOutcome, SimError> {
    run_parallel_r2_with(instance, SimOptions::default())
}

pub fn run_parallel_r2_with(instance: &LllInstance, opts: SimOptions) -> Result<SimOutcome, SimError> {
    let g = instance.graph();
    let coloring = greedy_edge_coloring(g);
    let mut edge_vars: Vec<Vec<usize>> = vec![Vec::new(); g.edges().len()];
    let mut loose: Vec<usize> = Vec::new();
    let mut loose_nodes: BTreeSet<usize> = BTreeSet::new();
    for x in 0..instance.num_variables() {
        let he = instance.hypergraph().hyperedge(x);
        match he.len() {
            0 => loose.push(x),
            1 => match g.neighbors(he[0]).iter().map(|&(_, e)| e).min() {
                Some(e) => edge_vars[e].push(x),
                None => {
                    loose.push(x);
                    loose_nodes.insert(he[0]);
                }
            },
            2 => edge_vars[g.edge_between(he[0], he[1]).expect("adjacent")].push(x),
            rank => {
                return Err(SimError::NotRankTwo {
                    var: instance.variable(x).id.clone(),
                    rank,
                })
            }
        }
    }
    let mut classes: Vec<Vec<Unit>> = (0..round_count(coloring.palette, instance)).map(|_| Vec::new()).collect();
    if !loose.is_empty() {
        classes[0].push(Unit {
            nodes: loose_nodes.into_iter().collect(),
            vars: loose,
        });
    }
    for (e, vars) in edge_vars.into_iter().enumerate() {
        if !vars.is_empty() {
            let (u, v) = g.edge(e);
            classes[coloring.colors[e]].push(Unit { nodes: vec![u, v], vars });
        }
    }
    run_rounds(instance, coloring, classes, FixRule::Rank2, opts)
}

/// Owner of a variable: the affected event whose id is lexicographically
/// least.
pub fn owner(instance: &LllInstance, var: usize) -> Option<usize> {
    instance
        .hypergraph()
        .hyperedge(var)
        .iter()
        .copied()
        .min_by(|&a, &b| instance.event(a).id.cmp(&instance.event(b).id))
}

/// Rank-3 run over the classes of a greedy distance-2 colouring. Every node
/// of the active class fixes all variables it owns, in declaration order.
/// Variables affecting no event are fixed in the first round.
pub fn run_parallel_r3(instance: &LllInstance) -> Result<SimOutcome, SimError> {
    run_parallel_r3_with(instance, SimOptions::default())
}

pub fn run_parallel_r3_with(instance: &LllInstance, opts: SimOptions) -> Result<SimOutcome, SimError> {
    let g = instance.graph();
    let coloring = greedy_distance2_coloring(g);
    let mut owned: Vec<Vec<usize>> = vec![Vec::new(); instance.num_events()];
    let mut loose = Vec::new();
    for x in 0..instance.num_variables() {
        match owner(instance, x) {
            Some(v) => owned[v].push(x),
            None => loose.push(x),
        }
    }
    let mut classes: Vec<Vec<Unit>> = (0..round_count(coloring.palette, instance)).map(|_| Vec::new()).collect();
    if !loose.is_empty() {
        classes[0].push(Unit {
            nodes: Vec::new(),
            vars: loose,
        });
    }
    for (v, vars) in owned.into_iter().enumerate() {
        if !vars.is_empty() {
            classes[coloring.colors[v]].push(Unit { nodes: vec![v], vars });
        }
    }
    run_rounds(instance, coloring, classes, FixRule::Rank3Lift, opts)
}

/// Replays the round-induced order with the sequential fixer and compares
/// assignment, final ledger and every trace record.
pub fn sequential_replay(instance: &LllInstance, sim: &SimOutcome, rule: FixRule) -> Result<(), String> {
    let config = FixConfig {
        rule,
        check: CheckLevel::EveryStep,
        compact: true,
    };
    let mut order = Permutation::new(sim.trace.order());
    let seq = run_sequential_with(instance, &mut order, config).map_err(|e| e.to_string())?;
    if seq.assignment != sim.assignment {
        return Err("assignments differ".into());
    }
    if seq.ledger != sim.ledger {
        return Err("final ledgers differ".into());
    }
    for (a, b) in seq.trace.records.iter().zip(&sim.trace.records) {
        // the sequential run checks every step; compare the decisions only
        let same = a.var == b.var && a.value == b.value && a.incs == b.incs && a.writes == b.writes && a.weighted_sum == b.weighted_sum;
        if !same {
            return Err(format!("trace differs at step {}", a.step));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn path(n: usize) -> DependencyGraph {
        DependencyGraph::from_edges(n, (1..n).map(|i| (i - 1, i)))
    }

    #[test]
    fn edge_colorings_of_small_graphs() {
        let tri = DependencyGraph::from_edges(3, [(0, 1), (0, 2), (1, 2)]);
        assert_eq!(greedy_edge_coloring(&tri).palette, 3);
        assert_eq!(greedy_edge_coloring(&path(3)).palette, 2);
        let star = DependencyGraph::from_edges(6, (1..6).map(|i| (0, i)));
        let c = greedy_edge_coloring(&star);
        assert_eq!(c.palette, 5);
        assert!(c.is_proper(&star));
    }

    #[test]
    fn distance2_colorings_of_small_graphs() {
        let tri = DependencyGraph::from_edges(3, [(0, 1), (0, 2), (1, 2)]);
        assert_eq!(greedy_distance2_coloring(&tri).palette, 3);
        let c = greedy_distance2_coloring(&path(5));
        assert!((3..=5).contains(&c.palette));
        assert!(c.is_proper(&path(5)));
        assert_eq!(greedy_distance2_coloring(&DependencyGraph::from_edges(4, [])).palette, 1);
    }

    #[test]
    fn improper_coloring_is_detected() {
        let c = Coloring {
            kind: ColoringKind::Distance2Vertex,
            colors: vec![0, 1, 0],
            palette: 2,
        };
        assert!(!c.is_proper(&path(3)));
    }

    #[test]
    fn r2_round_counts() {
        let tri = fixtures::coin_triangle(true).unwrap();
        let out = run_parallel_r2(&tri).unwrap();
        assert_eq!(out.log.rounds.len(), 3);
        assert!(tri.occurring_events(&out.assignment).is_empty());
        let star = fixtures::coin_star(4).unwrap();
        assert_eq!(run_parallel_r2(&star).unwrap().log.rounds.len(), 4);
        let edge = fixtures::single_edge().unwrap();
        assert_eq!(run_parallel_r2(&edge).unwrap().log.rounds.len(), 1);
    }

    #[test]
    fn r3_round_counts_and_replay() {
        let tri = fixtures::rank3_triangle().unwrap();
        let out = run_parallel_r3(&tri).unwrap();
        assert_eq!(out.log.rounds.len(), 3);
        assert!(tri.occurring_events(&out.assignment).is_empty());
        sequential_replay(&tri, &out, FixRule::Rank3Lift).unwrap();
        let two = fixtures::two_rank3_triangles().unwrap();
        let out2 = run_parallel_r3(&two).unwrap();
        assert_eq!(out2.log.palette, 3);
        assert!(out2.log.rounds.iter().all(|r| r.nodes.len() <= 2));
        assert!(out2.log.rounds.iter().any(|r| r.nodes.len() == 2));
    }

    #[test]
    fn within_round_shuffle_changes_nothing() {
        let two = fixtures::two_rank3_triangles().unwrap();
        let base = run_parallel_r3(&two).unwrap();
        for seed in 0..4 {
            let opts = SimOptions {
                within_round_seed: Some(seed),
                ..SimOptions::default()
            };
            let s = run_parallel_r3_with(&two, opts).unwrap();
            assert_eq!(s.assignment, base.assignment);
            assert_eq!(s.ledger, base.ledger);
        }
    }

    #[test]
    fn r2_refuses_rank3() {
        let tri = fixtures::rank3_triangle().unwrap();
        assert!(matches!(run_parallel_r2(&tri), Err(SimError::NotRankTwo { .. })));
    }

    #[test]
    fn single_variable_is_one_round() {
        let x = crate::instance::Variable::uniform("X", ["0", "1", "2", "3"]);
        let e = crate::instance::BadEvent::new("E", vec!["X".into()], vec![vec!["0".into()]]);
        let inst = LllInstance::build(vec![x], vec![e], 3).unwrap();
        assert_eq!(run_parallel_r3(&inst).unwrap().log.rounds.len(), 1);
    }

    #[test]
    fn log_star_values() {
        assert_eq!(log_star(1), 0);
        assert_eq!(log_star(2), 1);
        assert_eq!(log_star(16), 3);
        assert_eq!(log_star(65536), 4);
    }
}
