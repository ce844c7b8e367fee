//! Integration over the probability simplex `Delta` and over its slices
//! `Delta_a`, with respect to the flat measure normalized to unit volume.
//!
//! Every integrand is given as a logarithm. Two independent integrators are
//! available for each domain: Monte Carlo (deterministic streams from a
//! seed) and adaptive Grundmann-Moeller cubature.

pub mod cubature;
pub mod dirichlet;
pub mod gaussian;
pub mod lattice;
pub mod moments;
pub mod polytope;
pub mod rng;

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Partial, Result};
use crate::types::{Distribution, FACES};

pub use polytope::{build_constraint_polytope, ConstraintPolytope};

use moments::{combine_strata, Moments};
use rng::{chunk_sizes, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Integrator {
    MonteCarlo { seed: u64 },
    Deterministic,
}

/// Evaluation cap and accuracy target. The target is relative for plain
/// integrals and absolute for ratios, which are probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub max_evaluations: u64,
    pub tolerance: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_evaluations: 4_000_000, tolerance: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureEstimate {
    pub value: f64,
    /// Monte Carlo standard error; zero for the deterministic integrator.
    pub stderr: f64,
    /// Error indicator of the deterministic integrator; zero for Monte
    /// Carlo.
    pub error_indicator: f64,
    pub evaluations: u64,
}

impl QuadratureEstimate {
    /// The larger of the two error measures.
    pub fn error(&self) -> f64 {
        self.stderr.max(self.error_indicator)
    }
}

/// Estimates of `int w o_k / int w`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioEstimate<const K: usize> {
    pub ratios: [f64; K],
    /// Per-ratio Monte Carlo standard errors (zeros for the deterministic
    /// integrator).
    pub stderr: [f64; K],
    /// Deterministic error indicator, absolute in ratio units (zero for
    /// Monte Carlo).
    pub error_indicator: f64,
    /// `ln int w` over the normalized measure.
    pub ln_denominator: f64,
    pub evaluations: u64,
    pub converged: bool,
}

impl<const K: usize> RatioEstimate<K> {
    pub fn error(&self) -> f64 {
        self.stderr.iter().copied().fold(self.error_indicator, f64::max)
    }
}

/// Points drawn uniformly from the simplex by normalizing independent
/// standard exponentials.
pub fn sample_simplex_uniform<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Vec<Distribution> {
    (0..count).map(|_| Distribution::new(uniform_point(rng)).expect("normalized spacings")).collect()
}

fn uniform_point<R: Rng + ?Sized>(rng: &mut R) -> [f64; FACES] {
    let e: [f64; FACES] = std::array::from_fn(|_| rng.sample::<f64, _>(Exp1));
    let total: f64 = e.iter().sum();
    let mut p = e.map(|x| x / total);
    // Push the rounding residue into the largest entry.
    let residue = 1.0 - p.iter().sum::<f64>();
    let largest = (0..FACES).max_by(|&a, &b| p[a].total_cmp(&p[b])).expect("faces");
    p[largest] += residue;
    p
}

/// `ln[prod Gamma(b_l) / Gamma(sum b_l)]`, the integral of `prod p_l^(b_l - 1)`
/// over the simplex with the Lebesgue measure of the first five coordinates.
pub fn dirichlet_beta_integral(b: &[f64; FACES]) -> Result<f64> {
    if let Some(bad) = b.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::domain("Dirichlet exponent", format!("{bad} must be > 0")));
    }
    Ok(b.iter().map(|&x| ln_gamma(x)).sum::<f64>() - ln_gamma(b.iter().sum()))
}

fn simplex_root() -> Vec<(Vec<[f64; FACES]>, f64)> {
    let verts = (0..FACES).map(|i| std::array::from_fn(|k| if k == i { 1.0 } else { 0.0 })).collect();
    vec![(verts, 1.0)]
}

fn polytope_roots(poly: &ConstraintPolytope) -> Vec<(Vec<[f64; FACES]>, f64)> {
    (0..poly.simplices().len()).map(|s| (poly.simplex_points(s), poly.relative_volumes()[s])).collect()
}

// Draws batches of i.i.d. samples from chunked streams, doubling until the
// stopping rule holds or the budget is spent.
fn monte_carlo<const K: usize, S>(seed: u64, budget: &Budget, draw: S, stop: impl Fn(&Moments<K>) -> bool) -> Moments<K>
where
    S: Fn(&mut rand_chacha::ChaCha8Rng) -> (f64, [f64; K]) + Sync,
{
    let mut total = Moments::new();
    let mut next_chunk = 0u64;
    let mut batch = (rng::CHUNK * 16).min(budget.max_evaluations.max(1));
    loop {
        let chunks: Vec<(u64, u64)> = chunk_sizes(batch).map(|(c, n)| (next_chunk + c, n)).collect();
        next_chunk += chunks.len() as u64;
        let parts: Vec<Moments<K>> = chunks
            .par_iter()
            .map(|&(c, n)| {
                let mut r = stream_rng(seed, c);
                let mut m = Moments::new();
                for _ in 0..n {
                    let (lw, o) = draw(&mut r);
                    m.push(lw, &o);
                }
                m
            })
            .collect();
        for part in &parts {
            total.merge(part);
        }
        let left = budget.max_evaluations.saturating_sub(total.n);
        if stop(&total) || left == 0 {
            return total;
        }
        batch = total.n.min(left);
    }
}

fn ratio_from_moments<const K: usize>(m: &Moments<K>, ln_factor: f64, tolerance: f64) -> RatioEstimate<K> {
    let (ratios, stderr, ln_den, _) = combine_strata(&[(ln_factor, m)]);
    let converged = stderr.iter().all(|s| *s <= tolerance);
    RatioEstimate { ratios, stderr, error_indicator: 0.0, ln_denominator: ln_den, evaluations: m.n, converged }
}

fn ratio_from_cubature<const K: usize>(r: cubature::CubatureResult<K>) -> RatioEstimate<K> {
    RatioEstimate {
        ratios: r.ratios,
        stderr: [0.0; K],
        error_indicator: r.error,
        ln_denominator: r.ln_integral,
        evaluations: r.evaluations,
        converged: r.converged,
    }
}

/// Ratios `int w o_k / int w` over the simplex for an integrand returning
/// `(ln w, o)`.
pub fn integrate_simplex_ratio<const K: usize, F>(
    integrand: F,
    integrator: Integrator,
    budget: &Budget,
) -> RatioEstimate<K>
where
    F: Fn(&[f64; FACES]) -> (f64, [f64; K]) + Sync,
{
    match integrator {
        Integrator::MonteCarlo { seed } => {
            let m = monte_carlo(
                seed,
                budget,
                |r| integrand(&uniform_point(r)),
                |m| {
                    let (_, se, _, _) = combine_strata(&[(0.0, m)]);
                    se.iter().all(|s| *s <= budget.tolerance)
                },
            );
            ratio_from_moments(&m, 0.0, budget.tolerance)
        }
        Integrator::Deterministic => ratio_from_cubature(cubature::adaptive(
            &simplex_root(),
            integrand,
            budget.tolerance,
            budget.max_evaluations,
        )),
    }
}

/// Ratios over `Delta_a`. Monte Carlo samples a mixture of the uniform
/// distribution on the slice and a Gaussian fitted at the integrand's mode.
pub fn integrate_polytope_ratio<const K: usize, F>(
    poly: &ConstraintPolytope,
    integrand: F,
    integrator: Integrator,
    budget: &Budget,
) -> RatioEstimate<K>
where
    F: Fn(&[f64; FACES]) -> (f64, [f64; K]) + Sync,
{
    match integrator {
        Integrator::MonteCarlo { seed } => {
            let gaussian = gaussian::laplace_fit(poly, &|p: &[f64; FACES]| integrand(p).0);
            let proposal = gaussian::SliceProposal::new(poly, gaussian);
            let draw = |r: &mut rand_chacha::ChaCha8Rng| {
                let (p, lq) = proposal.sample(poly, r);
                if p.iter().any(|x| *x < 0.0) {
                    return (f64::NEG_INFINITY, [0.0; K]);
                }
                let (lw, o) = integrand(&p);
                (lw - lq, o)
            };
            let m = monte_carlo(seed, budget, draw, |m| {
                let (_, se, _, _) = combine_strata(&[(0.0, m)]);
                se.iter().all(|s| *s <= budget.tolerance)
            });
            // Chart measure to unit volume.
            ratio_from_moments(&m, -poly.volume().ln(), budget.tolerance)
        }
        Integrator::Deterministic => ratio_from_cubature(cubature::adaptive(
            &polytope_roots(poly),
            integrand,
            budget.tolerance,
            budget.max_evaluations,
        )),
    }
}

fn plain_estimate(
    r: RatioEstimate<0>,
    integrator: Integrator,
    budget: &Budget,
    rel_stderr: f64,
) -> Result<QuadratureEstimate> {
    let value = r.ln_denominator.exp();
    let (stderr, error_indicator, achieved) = match integrator {
        Integrator::MonteCarlo { .. } => (value * rel_stderr, 0.0, rel_stderr),
        Integrator::Deterministic => (0.0, value * r.error_indicator, r.error_indicator),
    };
    let estimate = QuadratureEstimate { value, stderr, error_indicator, evaluations: r.evaluations };
    if achieved <= budget.tolerance {
        Ok(estimate)
    } else {
        Err(Error::BudgetExhausted { achieved, requested: budget.tolerance, partial: Partial::Quadrature(estimate) })
    }
}

/// `int exp(f)` over the simplex (unit volume). Fails with
/// [`Error::BudgetExhausted`], carrying the estimate, when the relative
/// error target is missed.
pub fn integrate_simplex<F>(integrand: F, integrator: Integrator, budget: &Budget) -> Result<QuadratureEstimate>
where
    F: Fn(&[f64; FACES]) -> f64 + Sync,
{
    match integrator {
        Integrator::MonteCarlo { seed } => {
            let m = monte_carlo(
                seed,
                budget,
                |r| (integrand(&uniform_point(r)), []),
                |m| m.relative_stderr() <= budget.tolerance,
            );
            let rel = m.relative_stderr();
            plain_estimate(ratio_from_moments(&m, 0.0, budget.tolerance), integrator, budget, rel)
        }
        Integrator::Deterministic => {
            let r = integrate_simplex_ratio::<0, _>(|p| (integrand(p), []), integrator, budget);
            plain_estimate(r, integrator, budget, 0.0)
        }
    }
}

/// `int exp(f)` over `Delta_a` (unit volume).
pub fn integrate_polytope<F>(
    poly: &ConstraintPolytope,
    integrand: F,
    integrator: Integrator,
    budget: &Budget,
) -> Result<QuadratureEstimate>
where
    F: Fn(&[f64; FACES]) -> f64 + Sync,
{
    match integrator {
        Integrator::MonteCarlo { seed } => {
            let gaussian = gaussian::laplace_fit(poly, &integrand);
            let proposal = gaussian::SliceProposal::new(poly, gaussian);
            let draw = |r: &mut rand_chacha::ChaCha8Rng| {
                let (p, lq) = proposal.sample(poly, r);
                if p.iter().any(|x| *x < 0.0) {
                    return (f64::NEG_INFINITY, []);
                }
                (integrand(&p) - lq, [])
            };
            let m = monte_carlo(seed, budget, draw, |m| m.relative_stderr() <= budget.tolerance);
            let rel = m.relative_stderr();
            plain_estimate(ratio_from_moments(&m, -poly.volume().ln(), budget.tolerance), integrator, budget, rel)
        }
        Integrator::Deterministic => {
            let r = integrate_polytope_ratio::<0, _>(poly, |p| (integrand(p), []), integrator, budget);
            plain_estimate(r, integrator, budget, 0.0)
        }
    }
}
