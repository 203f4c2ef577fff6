//! LLL instances: variables with exact discrete distributions, bad events
//! given as truth tables, and the derived dependency graph and variable
//! hypergraph.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::rational::{format_rational, pow2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("duplicate variable id {0:?}")]
    DuplicateVariable(String),
    #[error("duplicate event id {0:?}")]
    DuplicateEvent(String),
    #[error("event {event:?} references unknown variable {var:?}")]
    UnknownVariable { event: String, var: String },
    #[error("variable {var:?}: {reason}")]
    InvalidDistribution { var: String, reason: String },
    #[error("event {event:?}: malformed truth table: {reason}")]
    MalformedTable { event: String, reason: String },
    #[error("variable {variable:?} affects {events} events, rank cap is {cap}")]
    RankExceeded {
        variable: String,
        events: usize,
        cap: usize,
    },
    #[error("rank cap must be 1, 2 or 3, got {0}")]
    InvalidRankCap(usize),
    #[error("event {event:?} has probability {} which is not below 2^-{d}", format_rational(.prob))]
    CriterionViolated {
        event: String,
        prob: BigRational,
        d: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub id: String,
    pub domain: Vec<String>,
    pub probs: Vec<BigRational>,
}

impl Variable {
    pub fn new(id: impl Into<String>, domain: Vec<String>, probs: Vec<BigRational>) -> Self {
        Variable {
            id: id.into(),
            domain,
            probs,
        }
    }

    /// A uniform variable over `values`.
    pub fn uniform<S: Into<String>>(id: impl Into<String>, values: impl IntoIterator<Item = S>) -> Self {
        let domain: Vec<String> = values.into_iter().map(Into::into).collect();
        let k = BigInt::from(domain.len().max(1));
        let probs = vec![BigRational::new(BigInt::one(), k); domain.len()];
        Variable::new(id, domain, probs)
    }

    pub fn value_index(&self, value: &str) -> Option<usize> {
        self.domain.iter().position(|v| v == value)
    }
}

/// A bad event over an ordered list of variables; `occurs` lists the joint
/// value tuples on which it happens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BadEvent {
    pub id: String,
    pub vars: Vec<String>,
    pub occurs: Vec<Vec<String>>,
}

impl BadEvent {
    pub fn new(id: impl Into<String>, vars: Vec<String>, occurs: Vec<Vec<String>>) -> Self {
        BadEvent {
            id: id.into(),
            vars,
            occurs,
        }
    }
}

/// Events are nodes; two events are adjacent iff they share a variable.
/// Edges are stored as `(lo, hi)` event indices with `lo < hi`, sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyGraph {
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<(usize, usize)>>,
    edge_index: HashMap<(usize, usize), usize>,
}

impl DependencyGraph {
    pub fn from_edges(node_count: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut set: Vec<(usize, usize)> = pairs
            .into_iter()
            .filter(|(u, v)| u != v)
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        set.sort_unstable();
        set.dedup();
        let mut adjacency = vec![Vec::new(); node_count];
        let mut edge_index = HashMap::with_capacity(set.len());
        for (id, &(u, v)) in set.iter().enumerate() {
            adjacency[u].push((v, id));
            adjacency[v].push((u, id));
            edge_index.insert((u, v), id);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        DependencyGraph {
            edges: set,
            adjacency,
            edge_index,
        }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> (usize, usize) {
        self.edges[id]
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        self.edge_index.get(&(u.min(v), u.max(v))).copied()
    }

    /// `(neighbor, edge id)` pairs, sorted by neighbor.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// One hyperedge per variable: the sorted indices of the events it affects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableHypergraph {
    hyperedges: Vec<Vec<usize>>,
}

impl VariableHypergraph {
    pub fn hyperedge(&self, var: usize) -> &[usize] {
        &self.hyperedges[var]
    }

    pub fn hyperedges(&self) -> &[Vec<usize>] {
        &self.hyperedges
    }

    pub fn rank(&self) -> usize {
        self.hyperedges.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Truth table with names resolved to indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct CompiledEvent {
    pub vars: Vec<usize>,
    pub occurs: Vec<Vec<usize>>,
    occurs_set: HashSet<Vec<usize>>,
}

/// A validated instance. Immutable after [`LllInstance::build`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LllInstance {
    variables: Vec<Variable>,
    events: Vec<BadEvent>,
    rank_cap: usize,
    compiled: Vec<CompiledEvent>,
    graph: DependencyGraph,
    hypergraph: VariableHypergraph,
    p_bound: Vec<BigRational>,
    var_lookup: HashMap<String, usize>,
    event_lookup: HashMap<String, usize>,
}

impl LllInstance {
    /// Validates the instance and derives the dependency graph, the variable
    /// hypergraph and every event's exact probability.
    pub fn build(
        variables: Vec<Variable>,
        events: Vec<BadEvent>,
        rank_cap: usize,
    ) -> Result<Self, InstanceError> {
        if !(1..=3).contains(&rank_cap) {
            return Err(InstanceError::InvalidRankCap(rank_cap));
        }
        let mut var_lookup = HashMap::with_capacity(variables.len());
        for (i, v) in variables.iter().enumerate() {
            if var_lookup.insert(v.id.clone(), i).is_some() {
                return Err(InstanceError::DuplicateVariable(v.id.clone()));
            }
            validate_distribution(v)?;
        }
        let mut event_lookup = HashMap::with_capacity(events.len());
        for (i, e) in events.iter().enumerate() {
            if event_lookup.insert(e.id.clone(), i).is_some() {
                return Err(InstanceError::DuplicateEvent(e.id.clone()));
            }
        }

        let mut compiled = Vec::with_capacity(events.len());
        let mut hyperedges = vec![Vec::new(); variables.len()];
        for (ei, e) in events.iter().enumerate() {
            let c = compile_event(e, &variables, &var_lookup)?;
            for &x in &c.vars {
                hyperedges[x].push(ei);
            }
            compiled.push(c);
        }
        for (x, h) in hyperedges.iter().enumerate() {
            if h.len() > rank_cap {
                return Err(InstanceError::RankExceeded {
                    variable: variables[x].id.clone(),
                    events: h.len(),
                    cap: rank_cap,
                });
            }
        }

        let pairs = hyperedges.iter().flat_map(|h| {
            h.iter()
                .enumerate()
                .flat_map(move |(i, &u)| h[i + 1..].iter().map(move |&v| (u, v)))
        });
        let graph = DependencyGraph::from_edges(events.len(), pairs);
        let d = graph.max_degree();

        let p_bound: Vec<BigRational> = compiled
            .iter()
            .map(|c| event_probability(c, &variables))
            .collect();
        let threshold = BigRational::one() / pow2(d);
        for (ei, p) in p_bound.iter().enumerate() {
            if *p >= threshold {
                return Err(InstanceError::CriterionViolated {
                    event: events[ei].id.clone(),
                    prob: p.clone(),
                    d,
                });
            }
        }

        Ok(LllInstance {
            variables,
            events,
            rank_cap,
            compiled,
            graph,
            hypergraph: VariableHypergraph { hyperedges },
            p_bound,
            var_lookup,
            event_lookup,
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, x: usize) -> &Variable {
        &self.variables[x]
    }

    pub fn events(&self) -> &[BadEvent] {
        &self.events
    }

    pub fn event(&self, e: usize) -> &BadEvent {
        &self.events[e]
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    pub fn rank_cap(&self) -> usize {
        self.rank_cap
    }

    pub fn graph(&self) -> &DependencyGraph {
        &self.graph
    }

    pub fn hypergraph(&self) -> &VariableHypergraph {
        &self.hypergraph
    }

    /// Maximum degree of the dependency graph.
    pub fn dependency_degree(&self) -> usize {
        self.graph.max_degree()
    }

    /// Exact unconditioned probability of event `e`.
    pub fn p_bound(&self, e: usize) -> &BigRational {
        &self.p_bound[e]
    }

    pub fn var_index(&self, id: &str) -> Option<usize> {
        self.var_lookup.get(id).copied()
    }

    pub fn event_index(&self, id: &str) -> Option<usize> {
        self.event_lookup.get(id).copied()
    }

    /// Indices of the variables event `e` depends on, in declaration order.
    pub fn event_vars(&self, e: usize) -> &[usize] {
        &self.compiled[e].vars
    }

    pub(crate) fn compiled(&self, e: usize) -> &CompiledEvent {
        &self.compiled[e]
    }

    /// Whether event `e` occurs under a full assignment (value index per
    /// variable).
    pub fn event_occurs(&self, e: usize, assignment: &[usize]) -> bool {
        let c = &self.compiled[e];
        let key: Vec<usize> = c.vars.iter().map(|&x| assignment[x]).collect();
        c.occurs_set.contains(&key)
    }

    /// Events that occur under a full assignment.
    pub fn occurring_events(&self, assignment: &[usize]) -> Vec<usize> {
        (0..self.events.len())
            .filter(|&e| self.event_occurs(e, assignment))
            .collect()
    }

    /// Merges variables that affect exactly the same set of events into one
    /// product variable. Variables with an empty event set are left alone.
    /// Merged ids join the originals with `+`, merged values with `|`.
    pub fn merge_shared_variables(&self) -> Result<(LllInstance, MergeMap), InstanceError> {
        let mut groups: BTreeMap<&[usize], Vec<usize>> = BTreeMap::new();
        for (x, h) in self.hypergraph.hyperedges.iter().enumerate() {
            if !h.is_empty() {
                groups.entry(h.as_slice()).or_default().push(x);
            }
        }
        // groups in order of their first member
        let mut group_list: Vec<Vec<usize>> = Vec::new();
        for (x, h) in self.hypergraph.hyperedges.iter().enumerate() {
            if h.is_empty() {
                group_list.push(vec![x]);
            } else if let Some(g) = groups.remove(h.as_slice()) {
                group_list.push(g);
            }
        }

        let mut new_vars = Vec::with_capacity(group_list.len());
        let mut owner = vec![(0usize, 0usize); self.variables.len()]; // (group, position)
        let mut value_tuples: Vec<Vec<Vec<usize>>> = Vec::with_capacity(group_list.len());
        for (gi, g) in group_list.iter().enumerate() {
            for (pos, &x) in g.iter().enumerate() {
                owner[x] = (gi, pos);
            }
            if g.len() == 1 {
                let v = &self.variables[g[0]];
                new_vars.push(v.clone());
                value_tuples.push((0..v.domain.len()).map(|i| vec![i]).collect());
                continue;
            }
            let mut tuples: Vec<Vec<usize>> = vec![Vec::new()];
            for &x in g {
                let k = self.variables[x].domain.len();
                tuples = tuples
                    .into_iter()
                    .flat_map(|t| {
                        (0..k).map(move |i| {
                            let mut t = t.clone();
                            t.push(i);
                            t
                        })
                    })
                    .collect();
            }
            let id = g
                .iter()
                .map(|&x| self.variables[x].id.as_str())
                .collect::<Vec<_>>()
                .join("+");
            let domain = tuples
                .iter()
                .map(|t| {
                    t.iter()
                        .zip(g)
                        .map(|(&i, &x)| self.variables[x].domain[i].as_str())
                        .collect::<Vec<_>>()
                        .join("|")
                })
                .collect();
            let probs = tuples
                .iter()
                .map(|t| {
                    t.iter()
                        .zip(g)
                        .map(|(&i, &x)| self.variables[x].probs[i].clone())
                        .fold(BigRational::one(), |acc, p| acc * p)
                })
                .collect();
            new_vars.push(Variable::new(id, domain, probs));
            value_tuples.push(tuples);
        }

        let mut new_events = Vec::with_capacity(self.events.len());
        for (ei, e) in self.events.iter().enumerate() {
            let c = &self.compiled[ei];
            let mut gvars: Vec<usize> = Vec::new();
            for &x in &c.vars {
                let g = owner[x].0;
                if !gvars.contains(&g) {
                    gvars.push(g);
                }
            }
            let mut occurs = Vec::with_capacity(c.occurs.len());
            for t in &c.occurs {
                let row = gvars
                    .iter()
                    .map(|&g| {
                        let members = &group_list[g];
                        let picked: Vec<usize> = members
                            .iter()
                            .map(|&x| {
                                let pos = c.vars.iter().position(|&y| y == x).expect("member var");
                                t[pos]
                            })
                            .collect();
                        let vi = value_tuples[g]
                            .iter()
                            .position(|vt| *vt == picked)
                            .expect("tuple in product domain");
                        new_vars[g].domain[vi].clone()
                    })
                    .collect();
                occurs.push(row);
            }
            new_events.push(BadEvent::new(
                e.id.clone(),
                gvars.iter().map(|&g| new_vars[g].id.clone()).collect(),
                occurs,
            ));
        }
        let merged = LllInstance::build(new_vars, new_events, self.rank_cap)?;
        Ok((
            merged,
            MergeMap {
                groups: group_list,
                value_tuples,
            },
        ))
    }
}

/// Maps assignments of a merged instance back to the original variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeMap {
    groups: Vec<Vec<usize>>,
    value_tuples: Vec<Vec<Vec<usize>>>,
}

impl MergeMap {
    pub fn expand(&self, merged_assignment: &[usize]) -> Vec<usize> {
        let n = self.groups.iter().map(Vec::len).sum();
        let mut out = vec![0; n];
        for (g, members) in self.groups.iter().enumerate() {
            let t = &self.value_tuples[g][merged_assignment[g]];
            for (&x, &v) in members.iter().zip(t) {
                out[x] = v;
            }
        }
        out
    }
}

fn validate_distribution(v: &Variable) -> Result<(), InstanceError> {
    let bad = |reason: &str| InstanceError::InvalidDistribution {
        var: v.id.clone(),
        reason: reason.to_string(),
    };
    if v.domain.is_empty() {
        return Err(bad("empty domain"));
    }
    if v.domain.len() != v.probs.len() {
        return Err(bad("domain and probs differ in length"));
    }
    let distinct: HashSet<&String> = v.domain.iter().collect();
    if distinct.len() != v.domain.len() {
        return Err(bad("domain values are not distinct"));
    }
    if v.probs.iter().any(|p| *p <= BigRational::zero()) {
        return Err(bad("every probability must be positive"));
    }
    let total: BigRational = v.probs.iter().sum();
    if !total.is_one() {
        return Err(bad(&format!(
            "probabilities sum to {}, not 1",
            format_rational(&total)
        )));
    }
    Ok(())
}

fn compile_event(
    e: &BadEvent,
    variables: &[Variable],
    lookup: &HashMap<String, usize>,
) -> Result<CompiledEvent, InstanceError> {
    let malformed = |reason: String| InstanceError::MalformedTable {
        event: e.id.clone(),
        reason,
    };
    let mut vars = Vec::with_capacity(e.vars.len());
    for name in &e.vars {
        let x = *lookup.get(name).ok_or_else(|| InstanceError::UnknownVariable {
            event: e.id.clone(),
            var: name.clone(),
        })?;
        if vars.contains(&x) {
            return Err(malformed(format!("variable {name:?} listed twice")));
        }
        vars.push(x);
    }
    let mut occurs = Vec::with_capacity(e.occurs.len());
    let mut occurs_set = HashSet::with_capacity(e.occurs.len());
    for row in &e.occurs {
        if row.len() != vars.len() {
            return Err(malformed(format!(
                "tuple {row:?} has {} entries, expected {}",
                row.len(),
                vars.len()
            )));
        }
        let mut t = Vec::with_capacity(row.len());
        for (value, &x) in row.iter().zip(&vars) {
            let i = variables[x].value_index(value).ok_or_else(|| {
                malformed(format!(
                    "value {value:?} is not in the domain of {:?}",
                    variables[x].id
                ))
            })?;
            t.push(i);
        }
        if !occurs_set.insert(t.clone()) {
            return Err(malformed(format!("tuple {row:?} listed twice")));
        }
        occurs.push(t);
    }
    Ok(CompiledEvent {
        vars,
        occurs,
        occurs_set,
    })
}

fn event_probability(c: &CompiledEvent, variables: &[Variable]) -> BigRational {
    c.occurs
        .iter()
        .map(|t| {
            t.iter()
                .zip(&c.vars)
                .fold(BigRational::one(), |acc, (&i, &x)| acc * &variables[x].probs[i])
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rational::ratio;

    #[test]
    fn isolated_event_builds_with_degree_zero() {
        let x = Variable::uniform("X", ["0", "1"]);
        let e = BadEvent::new("E", vec!["X".into()], vec![vec!["0".into()]]);
        let inst = LllInstance::build(vec![x], vec![e], 3).unwrap();
        assert_eq!(inst.dependency_degree(), 0);
        assert_eq!(inst.p_bound(0), &ratio(1, 2));
    }

    #[test]
    fn triangle_of_two_coin_events_violates_criterion() {
        let err = fixtures::coin_triangle(false).unwrap_err();
        match err {
            InstanceError::CriterionViolated { prob, d, .. } => {
                assert_eq!(prob, ratio(1, 4));
                assert_eq!(d, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn triangle_with_private_coins_is_valid() {
        let inst = fixtures::coin_triangle(true).unwrap();
        assert_eq!(inst.dependency_degree(), 2);
        for e in 0..3 {
            assert_eq!(inst.p_bound(e), &ratio(1, 8));
        }
    }

    #[test]
    fn path_degree_is_two() {
        let inst = fixtures::path3().unwrap();
        assert_eq!(inst.dependency_degree(), 2);
        assert_eq!(inst.graph().degree(0), 1);
        assert_eq!(inst.graph().degree(1), 2);
    }

    #[test]
    fn rank_cap_is_enforced() {
        let x = Variable::uniform("X", ["0", "1", "2", "3", "4", "5", "6", "7"]);
        let events = ["a", "b"]
            .iter()
            .map(|id| BadEvent::new(*id, vec!["X".into()], vec![vec!["0".into()]]))
            .collect();
        let err = LllInstance::build(vec![x], events, 1).unwrap_err();
        assert!(matches!(err, InstanceError::RankExceeded { events: 2, cap: 1, .. }));
    }

    #[test]
    fn malformed_tables_are_rejected() {
        let x = Variable::uniform("X", ["0", "1"]);
        let wrong_value = BadEvent::new("E", vec!["X".into()], vec![vec!["7".into()]]);
        assert!(matches!(
            LllInstance::build(vec![x.clone()], vec![wrong_value], 3),
            Err(InstanceError::MalformedTable { .. })
        ));
        let wrong_arity = BadEvent::new("E", vec!["X".into()], vec![vec![]]);
        assert!(matches!(
            LllInstance::build(vec![x.clone()], vec![wrong_arity], 3),
            Err(InstanceError::MalformedTable { .. })
        ));
        let dup = BadEvent::new("E", vec!["X".into(), "X".into()], vec![]);
        assert!(matches!(
            LllInstance::build(vec![x.clone()], vec![dup], 3),
            Err(InstanceError::MalformedTable { .. })
        ));
        let unknown = BadEvent::new("E", vec!["Y".into()], vec![]);
        assert!(matches!(
            LllInstance::build(vec![x], vec![unknown], 3),
            Err(InstanceError::UnknownVariable { .. })
        ));
    }

    #[test]
    fn distributions_are_validated() {
        let short = Variable::new("X", vec!["0".into(), "1".into()], vec![ratio(1, 2), ratio(1, 4)]);
        assert!(matches!(
            LllInstance::build(vec![short], vec![], 3),
            Err(InstanceError::InvalidDistribution { .. })
        ));
        let zero = Variable::new("X", vec!["0".into(), "1".into()], vec![ratio(0, 1), ratio(1, 1)]);
        assert!(matches!(
            LllInstance::build(vec![zero], vec![], 3),
            Err(InstanceError::InvalidDistribution { .. })
        ));
    }

    #[test]
    fn graph_edges_match_shared_variables() {
        let inst = fixtures::coin_triangle(true).unwrap();
        let n = inst.num_events();
        for u in 0..n {
            for v in (u + 1)..n {
                let shared = inst
                    .event_vars(u)
                    .iter()
                    .any(|x| inst.event_vars(v).contains(x));
                assert_eq!(inst.graph().edge_between(u, v).is_some(), shared);
            }
        }
    }

    #[test]
    fn merge_combines_parallel_variables() {
        // two coins on the same pair of events
        let vars = vec![
            Variable::uniform("X", ["H", "T"]),
            Variable::uniform("Y", ["H", "T"]),
            Variable::uniform("P", ["H", "T", "A", "B"]),
        ];
        let events = vec![
            BadEvent::new(
                "u",
                vec!["X".into(), "Y".into(), "P".into()],
                vec![vec!["H".into(), "H".into(), "H".into()]],
            ),
            BadEvent::new("v", vec!["Y".into(), "X".into()], vec![vec!["T".into(), "T".into()]]),
        ];
        let inst = LllInstance::build(vars, events, 3).unwrap();
        let (merged, map) = inst.merge_shared_variables().unwrap();
        assert_eq!(merged.num_variables(), 2);
        assert_eq!(merged.variable(0).id, "X+Y");
        assert_eq!(merged.variable(0).domain.len(), 4);
        for e in 0..2 {
            assert_eq!(merged.p_bound(e), inst.p_bound(e));
        }
        // every merged assignment maps back to an assignment with the same outcome
        for a in 0..4 {
            for p in 0..4 {
                let expanded = map.expand(&[a, p]);
                for e in 0..2 {
                    assert_eq!(merged.event_occurs(e, &[a, p]), inst.event_occurs(e, &expanded));
                }
            }
        }
    }
}
