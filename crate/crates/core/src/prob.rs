//! Exact conditional probabilities of bad events given a partial assignment,
//! and the increase ratios `Inc(t, y)` used by the fixer.
//!
//! Variables are mutually independent, so `Pr[E | θ]` is the sum, over the
//! occurring tuples of `E` that agree with `θ`, of the product of the
//! probabilities of the still-unfixed coordinates.

use std::cell::RefCell;
use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::instance::LllInstance;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProbError {
    #[error("variable {var} does not affect event {event}")]
    VarDoesNotAffect { var: usize, event: usize },
    #[error("variable {0} is already assigned")]
    AlreadyAssigned(usize),
    #[error("value {value} is outside the domain of variable {var}")]
    ValueOutOfDomain { var: usize, value: usize },
}

/// The conjunction of already fixed variables, in insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialAssignment {
    values: Vec<Option<usize>>,
    order: Vec<usize>,
}

impl PartialAssignment {
    pub fn empty(num_vars: usize) -> Self {
        PartialAssignment {
            values: vec![None; num_vars],
            order: Vec::new(),
        }
    }

    pub fn for_instance(instance: &LllInstance) -> Self {
        Self::empty(instance.num_variables())
    }

    pub fn assign(&mut self, instance: &LllInstance, var: usize, value: usize) -> Result<(), ProbError> {
        if value >= instance.variable(var).domain.len() {
            return Err(ProbError::ValueOutOfDomain { var, value });
        }
        if self.values[var].is_some() {
            return Err(ProbError::AlreadyAssigned(var));
        }
        self.values[var] = Some(value);
        self.order.push(var);
        Ok(())
    }

    pub fn get(&self, var: usize) -> Option<usize> {
        self.values[var]
    }

    pub fn is_assigned(&self, var: usize) -> bool {
        self.values[var].is_some()
    }

    /// Variables in the order they were fixed.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.order.len() == self.values.len()
    }

    pub fn unassigned(&self) -> impl Iterator<Item = usize> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_none())
            .map(|(i, _)| i)
    }

    /// The full assignment, if every variable is fixed.
    pub fn to_full(&self) -> Option<Vec<usize>> {
        self.values.iter().copied().collect()
    }
}

const UNSET: u32 = u32::MAX;

/// Enumeration engine over one instance. Results are memoized on the event
/// and the restriction of the partial assignment to the event's variables,
/// so the cache is per engine and the engine is not `Sync`.
pub struct ProbEngine<'a> {
    instance: &'a LllInstance,
    cache: RefCell<HashMap<(usize, Vec<u32>), BigRational>>,
}

impl<'a> ProbEngine<'a> {
    pub fn new(instance: &'a LllInstance) -> Self {
        ProbEngine {
            instance,
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn instance(&self) -> &'a LllInstance {
        self.instance
    }

    /// `Pr[E_event | partial]`.
    pub fn cond_prob(&self, event: usize, partial: &PartialAssignment) -> BigRational {
        self.cond_prob_with(event, partial, None)
    }

    /// `Pr[E_event | partial, var = value]`; `extra` overrides the partial
    /// assignment on one variable without cloning it.
    pub fn cond_prob_with(
        &self,
        event: usize,
        partial: &PartialAssignment,
        extra: Option<(usize, usize)>,
    ) -> BigRational {
        let c = self.instance.compiled(event);
        let key: Vec<u32> = c
            .vars
            .iter()
            .map(|&x| match extra {
                Some((y, v)) if y == x => v as u32,
                _ => partial.get(x).map_or(UNSET, |v| v as u32),
            })
            .collect();
        if let Some(p) = self.cache.borrow().get(&(event, key.clone())) {
            return p.clone();
        }
        let mut total = BigRational::zero();
        'tuples: for t in &c.occurs {
            let mut w = BigRational::one();
            for ((&val, &fixed), &x) in t.iter().zip(&key).zip(&c.vars) {
                if fixed == UNSET {
                    w *= &self.instance.variable(x).probs[val];
                } else if fixed as usize != val {
                    continue 'tuples;
                }
            }
            total += w;
        }
        self.cache.borrow_mut().insert((event, key), total.clone());
        total
    }

    /// `Inc(event, value) = Pr[E | θ, var = value] / Pr[E | θ]`, or 0 when
    /// `Pr[E | θ] = 0`.
    pub fn inc(
        &self,
        event: usize,
        partial: &PartialAssignment,
        var: usize,
        value: usize,
    ) -> Result<BigRational, ProbError> {
        if !self.instance.event_vars(event).contains(&var) {
            return Err(ProbError::VarDoesNotAffect { var, event });
        }
        if partial.is_assigned(var) {
            return Err(ProbError::AlreadyAssigned(var));
        }
        if value >= self.instance.variable(var).domain.len() {
            return Err(ProbError::ValueOutOfDomain { var, value });
        }
        let before = self.cond_prob(event, partial);
        if before.is_zero() {
            return Ok(BigRational::zero());
        }
        Ok(self.cond_prob_with(event, partial, Some((var, value))) / before)
    }

    /// Whether `Σ_i p_i · Inc(event, y_i) = 1` exactly.
    pub fn expectation_identity_check(
        &self,
        event: usize,
        partial: &PartialAssignment,
        var: usize,
    ) -> bool {
        let probs = &self.instance.variable(var).probs;
        let mut total = BigRational::zero();
        for (y, p) in probs.iter().enumerate() {
            match self.inc(event, partial, var, y) {
                Ok(inc) => total += p * inc,
                Err(_) => return false,
            }
        }
        total.is_one()
    }

    pub fn cache_len(&self) -> usize {
        self.cache.borrow().len()
    }
}
