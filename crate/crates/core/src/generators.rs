//! Instance generators: seeded random rank-2 and rank-3 instances, and the
//! two application families (three orientations of a 3-uniform hypergraph;
//! relaxed weak splitting with many colours). Every generated instance goes
//! through [`LllInstance::build`], so the criterion is checked exactly.

use std::collections::BTreeSet;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::instance::{BadEvent, InstanceError, LllInstance, Variable};
use crate::rational::{int, pow2, ratio};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("bad topology: {0}")]
    Topology(String),
    #[error("truth table too large to enumerate: {0}")]
    TooLarge(String),
}

/// Largest joint domain enumerated for one event.
pub const MAX_TUPLES: usize = 1 << 20;

/// Most variables attached to one event by the random generators.
const MAX_VARS_PER_EVENT: usize = 5;

/// All tuples over the given domain sizes, last coordinate fastest.
fn tuples(sizes: &[usize]) -> Result<Vec<Vec<usize>>, GenError> {
    let total = sizes
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s))
        .filter(|&t| t <= MAX_TUPLES)
        .ok_or_else(|| GenError::TooLarge(format!("domain sizes {sizes:?}")))?;
    let mut out = Vec::with_capacity(total);
    let mut cur = vec![0usize; sizes.len()];
    for _ in 0..total {
        out.push(cur.clone());
        for i in (0..sizes.len()).rev() {
            cur[i] += 1;
            if cur[i] < sizes[i] {
                break;
            }
            cur[i] = 0;
        }
    }
    Ok(out)
}

fn random_variable(rng: &mut ChaCha8Rng, id: String, domain_size: usize) -> Variable {
    let k = if domain_size <= 2 { domain_size.max(1) } else { rng.gen_range(2..=domain_size) };
    let weights: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=3)).collect();
    let total: i64 = weights.iter().sum();
    let domain = (0..k).map(|i| i.to_string()).collect();
    let probs = weights.iter().map(|&w| ratio(w, total)).collect();
    Variable::new(id, domain, probs)
}

fn random_instance(
    n_events: usize,
    d_max: usize,
    domain_size: usize,
    max_rank: usize,
    seed: u64,
) -> Result<LllInstance, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_events];
    let mut vars_of: Vec<Vec<usize>> = vec![Vec::new(); n_events];
    let mut hyperedges: Vec<Vec<usize>> = Vec::new();
    if max_rank >= 2 && n_events >= 2 && d_max > 0 {
        for _ in 0..3 * n_events {
            let k = rng.gen_range(2..=max_rank.min(n_events));
            let mut pick: Vec<usize> = (0..n_events).collect::<Vec<_>>().choose_multiple(&mut rng, k).copied().collect();
            pick.sort_unstable();
            if pick.iter().any(|&e| vars_of[e].len() + 1 >= MAX_VARS_PER_EVENT) {
                continue;
            }
            let fits = pick.iter().all(|&e| {
                let fresh = pick.iter().filter(|&&f| f != e && !adj[e].contains(&f)).count();
                adj[e].len() + fresh <= d_max
            });
            if !fits {
                continue;
            }
            for &e in &pick {
                for &f in &pick {
                    if e != f {
                        adj[e].insert(f);
                    }
                }
                vars_of[e].push(hyperedges.len());
            }
            hyperedges.push(pick);
        }
    }
    // every event gets a private variable
    for (e, vs) in vars_of.iter_mut().enumerate() {
        vs.push(hyperedges.len());
        hyperedges.push(vec![e]);
    }
    let mut order: Vec<usize> = (0..hyperedges.len()).collect();
    order.shuffle(&mut rng);
    let mut variables: Vec<Variable> = Vec::with_capacity(hyperedges.len());
    let mut slot = vec![0usize; hyperedges.len()];
    for (pos, &h) in order.iter().enumerate() {
        slot[h] = pos;
        variables.push(random_variable(&mut rng, format!("X{pos}"), domain_size));
    }
    let d = adj.iter().map(BTreeSet::len).max().unwrap_or(0);
    let threshold = BigRational::one() / pow2(d);
    let mut events = Vec::with_capacity(n_events);
    for (e, hs) in vars_of.iter().enumerate() {
        let mut vs: Vec<usize> = hs.iter().map(|&h| slot[h]).collect();
        vs.sort_unstable();
        let sizes: Vec<usize> = vs.iter().map(|&v| variables[v].domain.len()).collect();
        let weight = |t: &[usize]| -> BigRational {
            t.iter().zip(&vs).map(|(&y, &v)| variables[v].probs[y].clone()).product()
        };
        let mut kept: Vec<(Vec<usize>, BigRational)> = tuples(&sizes)?
            .into_iter()
            .filter(|_| rng.gen_bool(0.5))
            .map(|t| {
                let w = weight(&t);
                (t, w)
            })
            .collect();
        let mut p: BigRational = kept.iter().map(|(_, w)| w.clone()).sum();
        // drop the heaviest tuple until the event is below the threshold
        while p >= threshold {
            let (i, _) = kept
                .iter()
                .enumerate()
                .fold(None::<(usize, &BigRational)>, |best, (i, (_, w))| match best {
                    Some((_, bw)) if bw >= w => best,
                    _ => Some((i, w)),
                })
                .expect("positive mass means a kept tuple");
            p -= &kept[i].1;
            kept.remove(i);
        }
        let occurs = kept
            .into_iter()
            .map(|(t, _)| t.iter().zip(&vs).map(|(&y, &v)| variables[v].domain[y].clone()).collect())
            .collect();
        let names = vs.iter().map(|&v| variables[v].id.clone()).collect();
        events.push(BadEvent::new(format!("E{e}"), names, occurs));
    }
    Ok(LllInstance::build(variables, events, max_rank.max(1))?)
}

/// Random instance whose variables affect at most three events, dependency
/// degree at most `d_max`, and domains of 2 to `domain_size` values with
/// random probabilities. Truth tables are sampled, then their heaviest
/// tuples are dropped until every event is below `2^-d` for the realised
/// degree `d`. An event may end with an empty table.
pub fn gen_random_rank3(n_events: usize, d_max: usize, domain_size: usize, seed: u64) -> Result<LllInstance, GenError> {
    random_instance(n_events, d_max, domain_size, 3, seed)
}

/// As [`gen_random_rank3`] with every variable affecting at most two events.
pub fn gen_random_rank2(n_events: usize, d_max: usize, domain_size: usize, seed: u64) -> Result<LllInstance, GenError> {
    random_instance(n_events, d_max, domain_size, 2, seed)
}

/// Three orientations of a 3-uniform hypergraph. Each hyperedge carries one
/// uniform variable over 27 values `abc`, where digit `k` is the position,
/// within the sorted hyperedge, of its head in orientation `k`. The event of
/// a node fires when the node is the head of all its hyperedges in at least
/// two orientations. Nodes in no hyperedge get no event. Node labels are
/// permuted and hyperedges shuffled by `seed`.
pub fn gen_hypergraph_orientation(nodes: usize, hyperedges: &[[usize; 3]], seed: u64) -> Result<LllInstance, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut label: Vec<usize> = (0..nodes).collect();
    label.shuffle(&mut rng);
    let mut edges: Vec<[usize; 3]> = Vec::with_capacity(hyperedges.len());
    for h in hyperedges {
        if h.iter().any(|&x| x >= nodes) || h[0] == h[1] || h[0] == h[2] || h[1] == h[2] {
            return Err(GenError::Topology(format!("hyperedge {h:?} on {nodes} nodes")));
        }
        let mut r = h.map(|x| label[x]);
        r.sort_unstable();
        edges.push(r);
    }
    edges.shuffle(&mut rng);
    let values: Vec<String> = (0..27).map(|i| format!("{}{}{}", i / 9, (i / 3) % 3, i % 3)).collect();
    let variables: Vec<Variable> = (0..edges.len())
        .map(|i| Variable::uniform(format!("H{i}"), values.clone()))
        .collect();
    let mut events = Vec::new();
    for v in 0..nodes {
        let incident: Vec<usize> = (0..edges.len()).filter(|&i| edges[i].contains(&v)).collect();
        if incident.is_empty() {
            continue;
        }
        let pos: Vec<usize> = incident
            .iter()
            .map(|&i| edges[i].iter().position(|&x| x == v).expect("incident"))
            .collect();
        let mut occurs = Vec::new();
        for t in tuples(&vec![27; incident.len()])? {
            let sinks = (0..3)
                .filter(|&k| t.iter().zip(&pos).all(|(&y, &p)| digit(y, k) == p))
                .count();
            if sinks >= 2 {
                occurs.push(t.iter().map(|&y| values[y].clone()).collect());
            }
        }
        let names = incident.iter().map(|&i| variables[i].id.clone()).collect();
        events.push(BadEvent::new(format!("v{v}"), names, occurs));
    }
    Ok(LllInstance::build(variables, events, 3)?)
}

fn digit(y: usize, k: usize) -> usize {
    match k {
        0 => y / 9,
        1 => (y / 3) % 3,
        _ => y % 3,
    }
}

/// `3q²(1-q) + q³` with `q = 3^-δ`: a node of degree `δ` is a sink in at
/// least two of three independent orientations.
pub fn orientation_bad_probability(degree: usize) -> BigRational {
    let q = BigRational::new(BigInt::one(), BigInt::from(3).pow(degree as u32));
    int(3) * &q * &q * (BigRational::one() - &q) + &q * &q * &q
}

/// The Fano plane: 7 points, 7 lines, every point on 3 lines, any two lines
/// meeting once. Dependency degree 6.
pub fn fano_plane() -> (usize, Vec<[usize; 3]>) {
    (7, vec![[0, 1, 2], [0, 3, 4], [0, 5, 6], [1, 3, 5], [1, 4, 6], [2, 3, 6], [2, 4, 5]])
}

/// The affine plane over GF(3): 9 points, 12 lines, every point on 4
/// lines. Dependency degree 8.
pub fn affine_plane3() -> (usize, Vec<[usize; 3]>) {
    let p = |x: usize, y: usize| 3 * x + y;
    let mut lines = Vec::new();
    for m in 0..3 {
        for b in 0..3 {
            lines.push([p(0, b), p(1, (m + b) % 3), p(2, (2 * m + b) % 3)]);
        }
    }
    for x in 0..3 {
        lines.push([p(x, 0), p(x, 1), p(x, 2)]);
    }
    (9, lines)
}

/// `copies` disjoint copies of a design.
pub fn disjoint_copies(design: &(usize, Vec<[usize; 3]>), copies: usize) -> (usize, Vec<[usize; 3]>) {
    let (n, lines) = design;
    let all = (0..copies)
        .flat_map(|c| lines.iter().map(move |l| l.map(|x| x + c * n)))
        .collect();
    (n * copies, all)
}

/// Bipartite graph `V ∪ U` given by the `U`-neighbours of each `V`-node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bipartite {
    pub u_nodes: usize,
    pub v_adj: Vec<Vec<usize>>,
}

impl Bipartite {
    /// Each `V`-node picks `v_degree` distinct `U`-neighbours at random
    /// among those still below `U`-degree 3.
    pub fn random(v_nodes: usize, u_nodes: usize, v_degree: usize, seed: u64) -> Result<Self, GenError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u_deg = vec![0usize; u_nodes];
        let mut v_adj = Vec::with_capacity(v_nodes);
        for v in 0..v_nodes {
            let open: Vec<usize> = (0..u_nodes).filter(|&u| u_deg[u] < 3).collect();
            if open.len() < v_degree {
                return Err(GenError::Topology(format!(
                    "V-node {v}: only {} U-nodes below degree 3",
                    open.len()
                )));
            }
            let mut pick: Vec<usize> = open.choose_multiple(&mut rng, v_degree).copied().collect();
            pick.sort_unstable();
            for &u in &pick {
                u_deg[u] += 1;
            }
            v_adj.push(pick);
        }
        Ok(Bipartite { u_nodes, v_adj })
    }
}

/// Relaxed weak splitting: every `U`-node gets one of `colors` colours
/// uniformly, and a `V`-node is bad when its neighbours show fewer than
/// `coverage` distinct colours. `seed` shuffles the variable order.
pub fn gen_weak_splitting_relaxed(
    graph: &Bipartite,
    colors: usize,
    coverage: usize,
    seed: u64,
) -> Result<LllInstance, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let palette: Vec<String> = (0..colors).map(|c| format!("c{c}")).collect();
    let mut u_order: Vec<usize> = (0..graph.u_nodes).collect();
    u_order.shuffle(&mut rng);
    let variables: Vec<Variable> = u_order
        .iter()
        .map(|u| Variable::uniform(format!("U{u}"), palette.clone()))
        .collect();
    let mut events = Vec::with_capacity(graph.v_adj.len());
    for (v, nbrs) in graph.v_adj.iter().enumerate() {
        if nbrs.iter().any(|&u| u >= graph.u_nodes) {
            return Err(GenError::Topology(format!("V-node {v} has an unknown neighbour")));
        }
        let mut occurs = Vec::new();
        for t in tuples(&vec![colors; nbrs.len()])? {
            if t.iter().collect::<BTreeSet<_>>().len() < coverage {
                occurs.push(t.iter().map(|&c| palette[c].clone()).collect());
            }
        }
        let names = nbrs.iter().map(|u| format!("U{u}")).collect();
        events.push(BadEvent::new(format!("V{v}"), names, occurs));
    }
    Ok(LllInstance::build(variables, events, 3)?)
}

/// Probability that `k` uniform picks from `colors` colours show fewer
/// than `coverage` distinct ones: `Σ_{j<coverage} C(colors, j)·S(k, j)·j! / colors^k`
/// with `S` the Stirling numbers of the second kind.
pub fn weak_splitting_bad_probability(colors: usize, k: usize, coverage: usize) -> BigRational {
    // s[j] = S(k, j)
    let mut s = vec![BigInt::zero(); k + 1];
    s[0] = BigInt::one();
    for n in 1..=k {
        for j in (1..=n).rev() {
            s[j] = &s[j] * BigInt::from(j) + &s[j - 1];
        }
        s[0] = BigInt::zero();
    }
    let mut count = BigInt::zero();
    for (j, sj) in s.iter().enumerate().take(coverage.min(k + 1)) {
        // falling factorial colors·(colors-1)···(colors-j+1) = C(colors, j)·j!
        let falling: BigInt = (0..j).map(|i| BigInt::from(colors as i64 - i as i64)).product();
        count += falling * sj;
    }
    BigRational::new(count, BigInt::from(colors).pow(k as u32))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    HypergraphOrientation,
    WeakSplittingRelaxed,
    RandomRank3,
    RandomRank2,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::HypergraphOrientation,
        Family::WeakSplittingRelaxed,
        Family::RandomRank3,
        Family::RandomRank2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::HypergraphOrientation => "hypergraph-orientation",
            Family::WeakSplittingRelaxed => "weak-splitting-relaxed",
            Family::RandomRank3 => "random-rank3",
            Family::RandomRank2 => "random-rank2",
        }
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown family {s:?}"))
    }
}

/// A generator request. `nodes` is the event count for the random
/// families, the number of design copies for orientation (Fano plane when
/// `degree <= 3`, affine plane otherwise), and the `V`-node count for weak
/// splitting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenSpec {
    pub family: Family,
    pub nodes: usize,
    pub degree: usize,
    pub domain: usize,
    pub colors: usize,
    pub coverage: usize,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(family: Family, seed: u64) -> Self {
        let (nodes, degree) = match family {
            Family::HypergraphOrientation => (2, 3),
            Family::WeakSplittingRelaxed => (12, 3),
            Family::RandomRank3 | Family::RandomRank2 => (20, 4),
        };
        GenSpec {
            family,
            nodes,
            degree,
            domain: 3,
            colors: 16,
            coverage: 2,
            seed,
        }
    }

    pub fn generate(&self) -> Result<LllInstance, GenError> {
        match self.family {
            Family::RandomRank3 => gen_random_rank3(self.nodes, self.degree, self.domain, self.seed),
            Family::RandomRank2 => gen_random_rank2(self.nodes, self.degree, self.domain, self.seed),
            Family::HypergraphOrientation => {
                let design = if self.degree <= 3 { fano_plane() } else { affine_plane3() };
                let (n, lines) = disjoint_copies(&design, self.nodes.max(1));
                gen_hypergraph_orientation(n, &lines, self.seed)
            }
            Family::WeakSplittingRelaxed => {
                // three U-slots per V-node, so U-degrees average at most 3
                let u = (self.nodes * self.degree).div_ceil(3) + self.degree;
                let b = Bipartite::random(self.nodes, u, self.degree, self.seed)?;
                gen_weak_splitting_relaxed(&b, self.colors, self.coverage, self.seed)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixer::run_sequential;
    use crate::order::DeclarationOrder;
    use crate::rational::pow2;

    #[test]
    fn random_rank3_is_valid_and_seeded() {
        let a = gen_random_rank3(12, 4, 2, 1).unwrap();
        assert!(a.hypergraph().rank() <= 3);
        assert!(a.dependency_degree() <= 4);
        let b = gen_random_rank3(12, 4, 2, 1).unwrap();
        assert_eq!(crate::format::to_json_string(&a), crate::format::to_json_string(&b));
        let out = run_sequential(&a, &mut DeclarationOrder).unwrap();
        assert!(a.occurring_events(&out.assignment).is_empty());
    }

    #[test]
    fn zero_degree_gives_isolated_events() {
        let inst = gen_random_rank3(5, 0, 3, 9).unwrap();
        assert_eq!(inst.dependency_degree(), 0);
        assert!(inst.graph().edges().is_empty());
    }

    #[test]
    fn random_rank2_has_rank_two() {
        let inst = gen_random_rank2(15, 3, 4, 5).unwrap();
        assert!(inst.hypergraph().rank() <= 2);
        assert_eq!(inst.rank_cap(), 2);
    }

    #[test]
    fn orientation_probabilities_match_closed_form() {
        assert_eq!(orientation_bad_probability(3), ratio(79, 19683));
        for (design, degree, d) in [(fano_plane(), 3, 6), (affine_plane3(), 4, 8)] {
            let inst = gen_hypergraph_orientation(design.0, &design.1, 11).unwrap();
            assert_eq!(inst.dependency_degree(), d);
            let p = orientation_bad_probability(degree);
            for e in 0..inst.num_events() {
                assert_eq!(inst.p_bound(e), &p);
            }
            assert!(p < BigRational::one() / pow2(d));
        }
    }

    #[test]
    fn orientation_with_low_degree_violates_criterion() {
        // one hyperedge: degree-1 nodes, p = 7/27 against d = 2
        let err = gen_hypergraph_orientation(3, &[[0, 1, 2]], 0).unwrap_err();
        assert!(matches!(err, GenError::Instance(InstanceError::CriterionViolated { .. })));
    }

    #[test]
    fn weak_splitting_matches_counting() {
        assert_eq!(weak_splitting_bad_probability(16, 3, 2), ratio(1, 256));
        assert_eq!(weak_splitting_bad_probability(16, 4, 2), ratio(1, 4096));
        // fewer than 3 colours among 3 picks: 1 - 16·15·14/16³
        assert_eq!(weak_splitting_bad_probability(16, 3, 3), BigRational::one() - ratio(16 * 15 * 14, 4096));
        let b = Bipartite::random(10, 12, 3, 2).unwrap();
        let inst = gen_weak_splitting_relaxed(&b, 16, 2, 2).unwrap();
        for e in 0..inst.num_events() {
            assert_eq!(inst.p_bound(e), &ratio(1, 256));
        }
        assert!(inst.dependency_degree() <= 7);
    }

    #[test]
    fn every_family_generates() {
        for f in Family::ALL {
            let inst = GenSpec::new(f, 3).generate().unwrap();
            assert!(inst.num_events() > 0, "{}", f.name());
        }
    }
}
