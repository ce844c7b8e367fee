//! Finite-`N` posteriors with closed forms: the fair-throw model, the
//! Johnson (Dirichlet) model and its generalization with a base
//! distribution `m`.
//!
//! Every posterior is a weighted mean over the constraint set. Old throws
//! average `N_i / N`; new throws average the predictive probability of the
//! updated density. Weights are carried as logarithms and normalized with
//! log-sum-exp.

use rayon::prelude::*;

use crate::combinatorics::{
    enumerate_constrained_frequencies, ln_factorial, log_multinomial, log_sum_exp, ConstraintSet,
};
use crate::error::{Error, Result};
use crate::types::{check_base, Average, Distribution, Face, FrequencyVector, Method, PosteriorResult, Throw, FACES};

/// A constraint set with one log-weight per member, proportional to the
/// model plausibility of that frequency vector.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedFrequencySum {
    constraint_set: ConstraintSet,
    log_weights: Vec<f64>,
}

impl WeightedFrequencySum {
    pub fn new(constraint_set: ConstraintSet, log_weights: Vec<f64>) -> Result<Self> {
        constraint_set.require_nonempty()?;
        assert_eq!(constraint_set.len(), log_weights.len(), "one weight per member");
        if let Some(bad) = log_weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::domain("log weight", format!("{bad} is not finite")));
        }
        Ok(WeightedFrequencySum { constraint_set, log_weights })
    }

    /// Computes log-weights member by member, possibly in parallel; the
    /// output order is the member order either way.
    pub fn from_fn<F>(constraint_set: ConstraintSet, log_weight: F) -> Result<Self>
    where
        F: Fn(&FrequencyVector) -> f64 + Sync,
    {
        constraint_set.require_nonempty()?;
        let log_weights = constraint_set.members().par_iter().map(&log_weight).collect();
        WeightedFrequencySum::new(constraint_set, log_weights)
    }

    pub fn constraint_set(&self) -> &ConstraintSet {
        &self.constraint_set
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Weights rescaled to unit sum, reduced in member order.
    pub fn normalized_weights(&self) -> Vec<f64> {
        let norm = log_sum_exp(&self.log_weights);
        self.log_weights.iter().map(|w| (w - norm).exp()).collect()
    }

    /// `sum_j w_j g(N_j)` with normalized weights.
    pub fn weighted_mean<G>(&self, per_member: G) -> [f64; FACES]
    where
        G: Fn(&FrequencyVector) -> [f64; FACES],
    {
        let mut acc = [0.0; FACES];
        for (member, w) in self.constraint_set.members().iter().zip(self.normalized_weights()) {
            for (a, x) in acc.iter_mut().zip(per_member(member)) {
                *a += w * x;
            }
        }
        acc
    }
}

/// Plausibility that a given old throw shows `face`, knowing the frequency
/// vector of all old throws: `N_face / N`.
pub fn conditional_old_given_frequency(nv: &FrequencyVector, face: Face) -> f64 {
    let total = nv.total();
    assert!(total >= 1, "no old throws");
    f64::from(nv.count(face)) / f64::from(total)
}

fn old_frequencies(nv: &FrequencyVector) -> [f64; FACES] {
    nv.frequencies().expect("members of a constraint set have N >= 1")
}

pub(crate) fn constraint_set(n: u32, average: Average) -> Result<ConstraintSet> {
    if n == 0 {
        return Err(Error::domain("number of throws", "N must be >= 1"));
    }
    let set = enumerate_constrained_frequencies(n, average);
    set.require_nonempty()?;
    Ok(set)
}

fn finish(probs: [f64; FACES]) -> Result<PosteriorResult> {
    Ok(PosteriorResult::new(Distribution::from_weights(probs)?, Method::ClosedForm))
}

/// Fair-throw model: old throws weighted by the multinomial coefficient, new
/// throws uniform whatever the data.
pub fn fair_posterior(n: u32, average: Average, throw: Throw) -> Result<PosteriorResult> {
    iid_posterior(n, average, None, throw)
}

/// I.i.d. model with fixed single-throw distribution `m` (uniform when
/// `None`). This is the limit of both generalized models when their
/// parameter dominates `N`.
pub fn iid_posterior(n: u32, average: Average, base: Option<Distribution>, throw: Throw) -> Result<PosteriorResult> {
    check_base(base)?;
    let set = constraint_set(n, average)?;
    let base = base.unwrap_or_else(Distribution::uniform);
    match throw {
        Throw::New => Ok(PosteriorResult::new(base, Method::ClosedForm)),
        Throw::Old => {
            let log_m = base.probs().map(f64::ln);
            let sum = WeightedFrequencySum::from_fn(set, |nv| {
                log_multinomial(nv) + nv.counts().iter().zip(log_m).map(|(&c, lm)| f64::from(c) * lm).sum::<f64>()
            })?;
            finish(sum.weighted_mean(old_frequencies))
        }
    }
}

/// Log-weight of a member under the Johnson model with per-face
/// pseudo-counts `alpha_l`: `sum_l ln[(N_l + alpha_l - 1)! / N_l!]`.
pub(crate) fn johnson_log_weight(nv: &FrequencyVector, alpha: &[f64; FACES]) -> f64 {
    nv.counts()
        .iter()
        .zip(alpha)
        .map(|(&c, &a)| {
            let c = f64::from(c);
            ln_gamma(c + a) - ln_factorial(c)
        })
        .sum()
}

fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Johnson model with symmetric parameter `k`.
pub fn johnson_posterior(n: u32, average: Average, k: f64, throw: Throw) -> Result<PosteriorResult> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::domain("Johnson parameter K", format!("{k} must be > 0")));
    }
    let set = constraint_set(n, average)?;
    johnson_on_set(set, [k; FACES], throw)
}

/// Johnson model with pseudo-counts `k m_i`. `n = 0` is accepted for new
/// throws and yields the prior predictive `m`.
pub fn generalized_johnson_posterior(
    n: u32,
    average: Average,
    k: f64,
    base: Distribution,
    throw: Throw,
) -> Result<PosteriorResult> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::domain("Johnson parameter K", format!("{k} must be > 0")));
    }
    check_base(Some(base))?;
    if n == 0 {
        return match throw {
            Throw::New => Ok(PosteriorResult::new(base, Method::ClosedForm)),
            Throw::Old => Err(Error::domain("number of throws", "no old throw when N = 0")),
        };
    }
    let set = constraint_set(n, average)?;
    johnson_on_set(set, base.probs().map(|m| k * m), throw)
}

fn johnson_on_set(set: ConstraintSet, alpha: [f64; FACES], throw: Throw) -> Result<PosteriorResult> {
    let total_alpha: f64 = alpha.iter().sum();
    let n = f64::from(set.n());
    let sum = WeightedFrequencySum::from_fn(set, |nv| johnson_log_weight(nv, &alpha))?;
    let probs = match throw {
        Throw::Old => sum.weighted_mean(old_frequencies),
        Throw::New => sum.weighted_mean(|nv| {
            let mut p = [0.0; FACES];
            for (i, (&c, a)) in nv.counts().iter().zip(alpha).enumerate() {
                p[i] = (f64::from(c) + a) / (n + total_alpha);
            }
            p
        }),
    };
    finish(probs)
}
