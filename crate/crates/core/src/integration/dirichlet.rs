//! Importance sampling for the same monomial-mixture integrands as
//! [`super::lattice`], one stratum per term.
//!
//! Each term `c prod p^E phi(p)` is sampled from a defensive mixture of
//! `Dir(E + 1)` and a Dirichlet fitted to the term by a few weighted
//! moment-matching pilot rounds. Because `phi` is bounded, the weights
//! against the defensive component are bounded too.

use rand::Rng;
use rand_distr::{Distribution as _, Gamma};
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use super::lattice::MonomialTerm;
use super::moments::{combine_strata, Moments};
use super::rng::{chunk_sizes, mix_seed, stream_rng};
use crate::types::FACES;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureConfig {
    pub seed: u64,
    /// Total samples, pilot rounds included, shared among terms.
    pub samples: u64,
    pub pilot_rounds: usize,
    pub pilot_samples: u64,
    /// Weight of the `Dir(E + 1)` component.
    pub defensive: f64,
    /// Factor applied to the fitted Dirichlet precision, widening it.
    pub shrink: f64,
}

impl MixtureConfig {
    pub fn new(seed: u64, samples: u64) -> Self {
        MixtureConfig { seed, samples, pilot_rounds: 3, pilot_samples: 2048, defensive: 0.1, shrink: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureResult {
    pub ratios: [f64; 2 * FACES],
    pub stderr: [f64; 2 * FACES],
    pub evaluations: u64,
}

#[derive(Debug, Clone)]
struct Dirichlet {
    alpha: [f64; FACES],
    ln_norm: f64,
    gammas: [Gamma<f64>; FACES],
}

impl Dirichlet {
    fn new(alpha: [f64; FACES]) -> Self {
        let ln_norm = ln_gamma(alpha.iter().sum()) - alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>();
        let gammas = alpha.map(|a| Gamma::new(a, 1.0).expect("positive shape"));
        Dirichlet { alpha, ln_norm, gammas }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; FACES] {
        let g: [f64; FACES] = std::array::from_fn(|i| self.gammas[i].sample(rng).max(f64::MIN_POSITIVE));
        let total: f64 = g.iter().sum();
        g.map(|x| (x / total).max(f64::MIN_POSITIVE))
    }

    fn ln_density(&self, ln_p: &[f64; FACES]) -> f64 {
        self.ln_norm + self.alpha.iter().zip(ln_p).map(|(a, l)| (a - 1.0) * l).sum::<f64>()
    }
}

struct Proposal {
    defensive: Dirichlet,
    fitted: Option<Dirichlet>,
    ln_eps: f64,
    ln_rest: f64,
    eps: f64,
}

impl Proposal {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; FACES] {
        match &self.fitted {
            Some(fitted) if rng.random::<f64>() >= self.eps => fitted.sample(rng),
            _ => self.defensive.sample(rng),
        }
    }

    fn ln_density(&self, ln_p: &[f64; FACES]) -> f64 {
        let d = self.defensive.ln_density(ln_p);
        match &self.fitted {
            None => d,
            Some(fitted) => {
                let a = self.ln_eps + d;
                let b = self.ln_rest + fitted.ln_density(ln_p);
                let m = a.max(b);
                m + ((a - m).exp() + (b - m).exp()).ln()
            }
        }
    }
}

fn ln_target<F: Fn(usize, f64) -> f64>(
    term: &MonomialTerm,
    log_factor: &F,
    p: &[f64; FACES],
    ln_p: &[f64; FACES],
) -> f64 {
    let mut lw = term.log_coeff;
    for l in 0..FACES {
        if term.exponents[l] > 0 {
            lw += f64::from(term.exponents[l]) * ln_p[l];
        }
        lw += log_factor(l, p[l]);
    }
    lw
}

// Samples `count` points in fixed chunks from `stream_base` and merges the
// chunk accumulators in chunk order.
fn sample_chunks<D>(seed: u64, stream_base: u64, count: u64, draw: D) -> Moments<{ 2 * FACES }>
where
    D: Fn(&mut rand_chacha::ChaCha8Rng) -> (f64, [f64; 2 * FACES]) + Sync,
{
    let parts: Vec<Moments<{ 2 * FACES }>> = chunk_sizes(count)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(chunk, size)| {
            let mut rng = stream_rng(seed, stream_base + chunk);
            let mut m = Moments::new();
            for _ in 0..size {
                let (lw, obs) = draw(&mut rng);
                m.push(lw, &obs);
            }
            m
        })
        .collect();
    let mut total = Moments::new();
    for m in &parts {
        total.merge(m);
    }
    total
}

// Weights and the observables [o_j, p].
fn run<F: Fn(usize, f64) -> f64 + Sync>(
    term: &MonomialTerm,
    log_factor: &F,
    proposal: &Proposal,
    seed: u64,
    stream_base: u64,
    count: u64,
) -> Moments<{ 2 * FACES }> {
    sample_chunks(seed, stream_base, count, |rng| {
        let p = proposal.sample(rng);
        let ln_p = p.map(f64::ln);
        let lw = ln_target(term, log_factor, &p, &ln_p) - proposal.ln_density(&ln_p);
        (lw, std::array::from_fn(|k| if k < FACES { term.observable[k] } else { p[k - FACES] }))
    })
}

// Fits a Dirichlet to the weighted first two moments of p.
fn fit(m: &Moments<{ 2 * FACES }>, second: &[f64; FACES], shrink: f64) -> Option<Dirichlet> {
    let r = m.ratios();
    let mean: [f64; FACES] = std::array::from_fn(|i| r[FACES + i]);
    let var: f64 = (0..FACES).map(|i| (second[i] - mean[i] * mean[i]).max(0.0)).sum();
    let spread: f64 = mean.iter().map(|x| x * (1.0 - x)).sum();
    if !(var > 0.0) || !spread.is_finite() {
        return None;
    }
    let precision = (spread / var - 1.0) * shrink;
    if !(precision.is_finite() && precision > 0.0) {
        return None;
    }
    Some(Dirichlet::new(mean.map(|x| (x * precision).max(0.5))))
}

// Weighted second moments of p under the target, from a pilot run. They
// ride along as observables p_i^2 in place of o_j.
fn pilot_second_moments<F: Fn(usize, f64) -> f64 + Sync>(
    term: &MonomialTerm,
    log_factor: &F,
    proposal: &Proposal,
    seed: u64,
    stream_base: u64,
    count: u64,
) -> (Moments<{ 2 * FACES }>, [f64; FACES]) {
    let total = sample_chunks(seed, stream_base, count, |rng| {
        let p = proposal.sample(rng);
        let ln_p = p.map(f64::ln);
        let lw = ln_target(term, log_factor, &p, &ln_p) - proposal.ln_density(&ln_p);
        (lw, std::array::from_fn(|k| if k < FACES { p[k] * p[k] } else { p[k - FACES] }))
    });
    let r = total.ratios();
    let second = std::array::from_fn(|i| r[i]);
    (total, second)
}

const PHASE: u64 = 1 << 32;

/// Self-normalized ratios `[sum int f_j o_j / sum int f_j ; int f p / int f]`
/// with delta-method standard errors.
pub fn mixture_importance_ratios<F>(terms: &[MonomialTerm], log_factor: &F, config: &MixtureConfig) -> MixtureResult
where
    F: Fn(usize, f64) -> f64 + Sync,
{
    assert!(!terms.is_empty());
    let eps = config.defensive.clamp(1e-3, 1.0);
    // Pilot phase: fit one proposal per term and estimate its integral.
    let fitted: Vec<(Proposal, f64, u64)> = terms
        .par_iter()
        .enumerate()
        .map(|(j, term)| {
            let seed = mix_seed(config.seed, j as u64);
            let defensive = Dirichlet::new(term.exponents.map(|e| f64::from(e) + 1.0));
            let mut proposal = Proposal {
                defensive: defensive.clone(),
                fitted: None,
                ln_eps: eps.ln(),
                ln_rest: (1.0 - eps).ln(),
                eps,
            };
            let mut ln_integral = f64::NEG_INFINITY;
            let mut evaluations = 0;
            for round in 0..config.pilot_rounds {
                let (m, second) = pilot_second_moments(
                    term,
                    log_factor,
                    &proposal,
                    seed,
                    (round as u64 + 1) * PHASE,
                    config.pilot_samples,
                );
                evaluations += m.n;
                ln_integral = m.ln_mean_weight();
                if eps < 1.0 {
                    if let Some(d) = fit(&m, &second, config.shrink) {
                        proposal.fitted = Some(d);
                    }
                }
            }
            (proposal, ln_integral, evaluations)
        })
        .collect();

    let ln_max = fitted.iter().map(|f| f.1).fold(f64::NEG_INFINITY, f64::max);
    let shares: Vec<f64> = fitted.iter().map(|f| if f.1.is_finite() { (f.1 - ln_max).exp() } else { 0.0 }).collect();
    let share_total: f64 = shares.iter().sum();
    let pilot: u64 = fitted.iter().map(|f| f.2).sum();
    let samples = config.samples.saturating_sub(pilot).max(256 * terms.len() as u64);
    let floor = (samples / (20 * terms.len() as u64)).max(256);
    let strata: Vec<Moments<{ 2 * FACES }>> = terms
        .par_iter()
        .zip(&fitted)
        .zip(&shares)
        .enumerate()
        .map(|(j, ((term, (proposal, _, _)), share))| {
            let count = ((samples as f64 * share / share_total) as u64).max(floor);
            run(term, log_factor, proposal, mix_seed(config.seed, j as u64), 0, count)
        })
        .collect();
    let pairs: Vec<(f64, &Moments<{ 2 * FACES }>)> = strata.iter().map(|m| (0.0, m)).collect();
    let (ratios, stderr, _, _) = combine_strata(&pairs);
    let evaluations = strata.iter().map(|m| m.n).sum::<u64>() + fitted.iter().map(|f| f.2).sum::<u64>();
    MixtureResult { ratios, stderr, evaluations }
}
