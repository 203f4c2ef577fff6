//! Order policies for the sequential fixer.

use std::str::FromStr;

use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::fixer::{FixState, OrderPolicy};
use crate::instance::LllInstance;
use crate::ledger::event_bound;

/// First unfixed variable in declaration order.
pub struct DeclarationOrder;

impl OrderPolicy for DeclarationOrder {
    fn next_var(&mut self, state: &FixState<'_>) -> Option<usize> {
        state.partial.unassigned().next()
    }
}

/// Last unfixed variable in declaration order.
pub struct ReverseOrder;

impl OrderPolicy for ReverseOrder {
    fn next_var(&mut self, state: &FixState<'_>) -> Option<usize> {
        state.partial.unassigned().last()
    }
}

/// A fixed sequence of variable indices, handed out as is.
pub struct Permutation {
    order: Vec<usize>,
    pos: usize,
}

impl Permutation {
    pub fn new(order: Vec<usize>) -> Self {
        Permutation { order, pos: 0 }
    }

    /// A uniformly shuffled order of `n` variables.
    pub fn seeded_shuffle(n: usize, seed: u64) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Permutation::new(order)
    }
}

impl OrderPolicy for Permutation {
    fn next_var(&mut self, _: &FixState<'_>) -> Option<usize> {
        let v = self.order.get(self.pos).copied();
        self.pos += 1;
        v
    }
}

/// Adaptive adversary: looks at the current ledger and attacks the event
/// whose bound `p_v·Πφ` is largest among events with unfixed variables,
/// fixing its first unfixed variable. Ties go to the lower event index.
pub struct AdaptiveAdversary;

impl OrderPolicy for AdaptiveAdversary {
    fn next_var(&mut self, state: &FixState<'_>) -> Option<usize> {
        let inst = state.instance;
        let mut best: Option<(BigRational, usize)> = None;
        for e in 0..inst.num_events() {
            let Some(x) = inst.event_vars(e).iter().copied().find(|&x| !state.partial.is_assigned(x)) else {
                continue;
            };
            let bound = event_bound(inst, state.ledger, e);
            if best.as_ref().map_or(true, |b| bound > b.0) {
                best = Some((bound, x));
            }
        }
        best.map(|b| b.1).or_else(|| state.partial.unassigned().next())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderKind {
    Declaration,
    Reverse,
    SeededShuffle,
    AdaptiveAdversary,
}

impl OrderKind {
    pub const ALL: [OrderKind; 4] = [
        OrderKind::Declaration,
        OrderKind::Reverse,
        OrderKind::SeededShuffle,
        OrderKind::AdaptiveAdversary,
    ];

    pub fn policy(self, instance: &LllInstance, seed: u64) -> Box<dyn OrderPolicy> {
        match self {
            OrderKind::Declaration => Box::new(DeclarationOrder),
            OrderKind::Reverse => Box::new(ReverseOrder),
            OrderKind::SeededShuffle => Box::new(Permutation::seeded_shuffle(instance.num_variables(), seed)),
            OrderKind::AdaptiveAdversary => Box::new(AdaptiveAdversary),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OrderKind::Declaration => "declaration",
            OrderKind::Reverse => "reverse",
            OrderKind::SeededShuffle => "seeded-shuffle",
            OrderKind::AdaptiveAdversary => "adaptive-adversary",
        }
    }
}

impl FromStr for OrderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        OrderKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown order {s:?}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixer::run_sequential;
    use crate::fixtures;

    #[test]
    fn every_policy_avoids_on_fixtures() {
        let inst = fixtures::two_rank3_triangles().unwrap();
        for kind in OrderKind::ALL {
            let out = run_sequential(&inst, kind.policy(&inst, 7).as_mut()).unwrap();
            assert!(inst.occurring_events(&out.assignment).is_empty(), "{}", kind.name());
        }
    }

    #[test]
    fn shuffle_is_a_permutation_and_seeded() {
        let a = Permutation::seeded_shuffle(20, 3).order;
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..20).collect::<Vec<_>>());
        assert_eq!(a, Permutation::seeded_shuffle(20, 3).order);
        assert_ne!(a, Permutation::seeded_shuffle(20, 4).order);
    }

    #[test]
    fn names_round_trip() {
        for k in OrderKind::ALL {
            assert_eq!(k.name().parse::<OrderKind>().unwrap(), k);
        }
        assert!("random".parse::<OrderKind>().is_err());
    }
}
