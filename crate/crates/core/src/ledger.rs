//! The φ-ledger: one value per (dependency edge, endpoint) pair, and the
//! two-part invariant P* the fixer maintains over it:
//!
//! 1. `φ_e^u + φ_e^v <= 2` for every edge `e = {u, v}`, and
//! 2. `Pr[E_v | fixed variables] <= p_v · Π_{e ∋ v} φ_e^v` for every event,
//!    where `p_v` is the exact unconditioned probability of `E_v`.

use num_rational::BigRational;
use num_traits::{One, Signed};

use crate::instance::{DependencyGraph, LllInstance};
use crate::prob::{PartialAssignment, ProbEngine};
use crate::rational::int;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhiLedger {
    // indexed by edge id; slot 0 belongs to the lower endpoint
    values: Vec<[BigRational; 2]>,
}

/// One ledger slot rewrite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerWrite {
    pub edge: usize,
    pub endpoint: usize,
    pub before: BigRational,
    pub after: BigRational,
}

fn side(graph: &DependencyGraph, edge: usize, endpoint: usize) -> usize {
    let (lo, hi) = graph.edge(edge);
    if endpoint == lo {
        0
    } else {
        assert_eq!(endpoint, hi, "event {endpoint} is not an endpoint of edge {edge}");
        1
    }
}

impl PhiLedger {
    pub fn all_ones(graph: &DependencyGraph) -> Self {
        PhiLedger {
            values: vec![[BigRational::one(), BigRational::one()]; graph.edges().len()],
        }
    }

    pub fn get(&self, graph: &DependencyGraph, edge: usize, endpoint: usize) -> &BigRational {
        &self.values[edge][side(graph, edge, endpoint)]
    }

    pub fn set(&mut self, graph: &DependencyGraph, edge: usize, endpoint: usize, value: BigRational) {
        self.values[edge][side(graph, edge, endpoint)] = value;
    }

    /// Sets the slot and returns the write record.
    pub fn write(
        &mut self,
        graph: &DependencyGraph,
        edge: usize,
        endpoint: usize,
        value: BigRational,
    ) -> LedgerWrite {
        let before = self.get(graph, edge, endpoint).clone();
        self.set(graph, edge, endpoint, value.clone());
        LedgerWrite {
            edge,
            endpoint,
            before,
            after: value,
        }
    }

    /// `Π_{e ∋ v} φ_e^v`.
    pub fn product_at(&self, graph: &DependencyGraph, event: usize) -> BigRational {
        graph
            .neighbors(event)
            .iter()
            .fold(BigRational::one(), |acc, &(_, e)| acc * self.get(graph, e, event))
    }

    pub fn edge_sum(&self, edge: usize) -> BigRational {
        &self.values[edge][0] + &self.values[edge][1]
    }

    /// `(edge, endpoint, value)` for every slot, by edge id then endpoint.
    pub fn entries<'a>(
        &'a self,
        graph: &'a DependencyGraph,
    ) -> impl Iterator<Item = (usize, usize, &'a BigRational)> + 'a {
        self.values.iter().enumerate().flat_map(move |(e, pair)| {
            let (lo, hi) = graph.edge(e);
            [(e, lo, &pair[0]), (e, hi, &pair[1])]
        })
    }

    /// Slots that differ from `other`, as `(edge, endpoint)`.
    pub fn diff(&self, other: &PhiLedger, graph: &DependencyGraph) -> Vec<(usize, usize)> {
        self.entries(graph)
            .zip(other.entries(graph))
            .filter(|(x, y)| x.2 != y.2)
            .map(|(x, _)| (x.0, x.1))
            .collect()
    }

    /// Largest total bit size of any slot value.
    pub fn max_bits(&self) -> u64 {
        self.values
            .iter()
            .flatten()
            .map(crate::rational::bit_size)
            .max()
            .unwrap_or(0)
    }
}

/// Which parts of P* fail, if any.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PStarReport {
    /// Edges whose two slots sum above 2.
    pub sum_violations: Vec<usize>,
    /// `(edge, endpoint)` slots outside `[0, 2]`.
    pub range_violations: Vec<(usize, usize)>,
    /// Events whose conditional probability exceeds their ledger bound.
    pub bound_violations: Vec<usize>,
}

impl PStarReport {
    pub fn holds(&self) -> bool {
        self.sum_violations.is_empty() && self.range_violations.is_empty() && self.bound_violations.is_empty()
    }
}

/// `p_v · Π_{e ∋ v} φ_e^v`.
pub fn event_bound(instance: &LllInstance, ledger: &PhiLedger, event: usize) -> BigRational {
    instance.p_bound(event) * ledger.product_at(instance.graph(), event)
}

/// Checks P* on the given events and every edge incident to them.
pub fn check_pstar_at(
    engine: &ProbEngine<'_>,
    ledger: &PhiLedger,
    partial: &PartialAssignment,
    events: impl IntoIterator<Item = usize>,
) -> PStarReport {
    let instance = engine.instance();
    let graph = instance.graph();
    let two = int(2);
    let mut report = PStarReport::default();
    let mut edges: Vec<usize> = Vec::new();
    for v in events {
        if engine.cond_prob(v, partial) > event_bound(instance, ledger, v) {
            report.bound_violations.push(v);
        }
        edges.extend(graph.neighbors(v).iter().map(|&(_, e)| e));
    }
    edges.sort_unstable();
    edges.dedup();
    for e in edges {
        if ledger.edge_sum(e) > two {
            report.sum_violations.push(e);
        }
        let (lo, hi) = graph.edge(e);
        for end in [lo, hi] {
            let v = ledger.get(graph, e, end);
            if v.is_negative() || *v > two {
                report.range_violations.push((e, end));
            }
        }
    }
    report
}

/// Checks P* on the whole instance.
pub fn check_pstar(engine: &ProbEngine<'_>, ledger: &PhiLedger, partial: &PartialAssignment) -> PStarReport {
    check_pstar_at(engine, ledger, partial, 0..engine.instance().num_events())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rational::ratio;

    #[test]
    fn all_ones_satisfies_pstar_initially() {
        let inst = fixtures::coin_triangle(true).unwrap();
        let eng = ProbEngine::new(&inst);
        let ledger = PhiLedger::all_ones(inst.graph());
        let partial = PartialAssignment::for_instance(&inst);
        assert!(check_pstar(&eng, &ledger, &partial).holds());
    }

    #[test]
    fn violations_are_reported() {
        let inst = fixtures::coin_triangle(true).unwrap();
        let eng = ProbEngine::new(&inst);
        let g = inst.graph();
        let mut ledger = PhiLedger::all_ones(g);
        let partial = PartialAssignment::for_instance(&inst);
        let (u, v) = g.edge(0);
        ledger.set(g, 0, u, ratio(3, 2));
        let r = check_pstar(&eng, &ledger, &partial);
        assert_eq!(r.sum_violations, vec![0]);
        ledger.set(g, 0, v, ratio(1, 4));
        let r = check_pstar(&eng, &ledger, &partial);
        assert!(r.sum_violations.is_empty());
        assert_eq!(r.bound_violations, vec![v]);
        ledger.set(g, 0, v, ratio(-1, 4));
        assert_eq!(check_pstar(&eng, &ledger, &partial).range_violations, vec![(0, v)]);
    }

    #[test]
    fn write_records_before_and_after() {
        let inst = fixtures::single_edge().unwrap();
        let g = inst.graph();
        let mut ledger = PhiLedger::all_ones(g);
        let w = ledger.write(g, 0, 1, ratio(1, 2));
        assert_eq!(w.before, int(1));
        assert_eq!(w.after, ratio(1, 2));
        assert_eq!(ledger.diff(&PhiLedger::all_ones(g), g), vec![(0, 1)]);
        assert_eq!(ledger.product_at(g, 1), ratio(1, 2));
    }
}
