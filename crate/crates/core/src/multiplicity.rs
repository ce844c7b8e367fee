//! The multiplicity model at finite `N`, the large-`N` posteriors of the
//! Johnson and multiplicity models restricted to the slice `Delta_a`, and
//! dispatch of the analytic limits.
//!
//! At finite `N` the posterior is a ratio of simplex integrals of
//! `sum_j multinom(N_j) prod p^(N_j) phi(p)` with
//! `ln phi_l(p) = L p ln m_l - ln Gamma(L p + 1)`. Normalizing constants
//! cancel, so they are never computed.

use crate::combinatorics::log_multinomial;
use crate::error::{Error, Partial, Result};
use crate::exact::{constraint_set, iid_posterior};
use crate::integration::dirichlet::{mixture_importance_ratios, MixtureConfig};
use crate::integration::lattice::{lattice_ratios, MonomialTerm};
use crate::integration::{build_constraint_polytope, integrate_polytope_ratio, Budget, Integrator};
use crate::maxent::{min_kl, min_reverse_kl};
#[cfg(test)]
use crate::types::Face;
use crate::types::{check_base, Average, Distribution, Method, ModelSpec, PosteriorResult, Regime, Throw, FACES};

const LATTICE_START: u32 = 16;
const LATTICE_MIN_LEVELS: usize = 3;
const LATTICE_MAX_LEVELS: usize = 6;

/// Old- and new-throw posteriors from one shared integration.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorPair {
    pub old: PosteriorResult,
    pub new: PosteriorResult,
    /// Largest per-face error of either throw.
    pub error: f64,
    pub converged: bool,
}

impl PosteriorPair {
    pub fn get(&self, throw: Throw) -> &PosteriorResult {
        match throw {
            Throw::Old => &self.old,
            Throw::New => &self.new,
        }
    }

    fn into_throw(self, throw: Throw, budget: &Budget) -> Result<PosteriorResult> {
        let (error, converged) = (self.error, self.converged);
        let result = match throw {
            Throw::Old => self.old,
            Throw::New => self.new,
        };
        if converged {
            Ok(result)
        } else {
            Err(Error::BudgetExhausted {
                achieved: error,
                requested: budget.tolerance,
                partial: Partial::Posterior(Box::new(result)),
            })
        }
    }
}

fn check_l(l: f64) -> Result<()> {
    if l.is_finite() && l >= 1.0 {
        Ok(())
    } else {
        Err(Error::domain("multiplicity parameter L", format!("{l} must be >= 1")))
    }
}

fn ratios_to_pair(
    ratios: &[f64; 2 * FACES],
    method: Method,
    stderr: Option<&[f64; 2 * FACES]>,
    quad_error: f64,
    evaluations: u64,
    tolerance: f64,
) -> Result<PosteriorPair> {
    let build = |offset: usize| -> Result<PosteriorResult> {
        let probs: [f64; FACES] = std::array::from_fn(|i| ratios[offset + i].max(0.0));
        let mut r = PosteriorResult::new(Distribution::from_weights(probs)?, method).with_evaluations(evaluations);
        match stderr {
            Some(se) => r = r.with_stderr(std::array::from_fn(|i| se[offset + i])),
            None => r = r.with_quad_error(quad_error),
        }
        Ok(r)
    };
    let (old, new) = (build(0)?, build(FACES)?);
    let error = old.uncertainty().max(new.uncertainty());
    Ok(PosteriorPair { old, new, error, converged: error <= tolerance })
}

/// Both posteriors of the generalized multiplicity model (uniform base when
/// `base` is `None`).
pub fn multiplicity_pair(
    n: u32,
    average: Average,
    l: f64,
    base: Option<Distribution>,
    integrator: Integrator,
    budget: &Budget,
) -> Result<PosteriorPair> {
    check_l(l)?;
    check_base(base)?;
    let set = constraint_set(n, average)?;
    let ln_m = base.map(|m| m.probs().map(f64::ln));
    let terms: Vec<MonomialTerm> = set
        .members()
        .iter()
        .map(|nv| MonomialTerm {
            log_coeff: log_multinomial(nv),
            exponents: *nv.counts(),
            observable: nv.frequencies().expect("N >= 1"),
        })
        .collect();
    let log_factor = |face: usize, p: f64| {
        let tilt = ln_m.map_or(0.0, |lm| l * p * lm[face]);
        tilt - crate::combinatorics::ln_factorial(l * p)
    };
    match integrator {
        Integrator::Deterministic => {
            let r = lattice_ratios(
                &terms,
                &log_factor,
                LATTICE_START,
                LATTICE_MIN_LEVELS,
                LATTICE_MAX_LEVELS,
                budget.tolerance,
            );
            ratios_to_pair(&r.ratios, Method::DeterministicQuad, None, r.error, r.evaluations, budget.tolerance)
        }
        Integrator::MonteCarlo { seed } => {
            let config = MixtureConfig::new(seed, budget.max_evaluations);
            let r = mixture_importance_ratios(&terms, &log_factor, &config);
            ratios_to_pair(&r.ratios, Method::MonteCarlo, Some(&r.stderr), 0.0, r.evaluations, budget.tolerance)
        }
    }
}

/// Multiplicity model posterior after `n` throws averaging `average`.
pub fn multiplicity_posterior(
    n: u32,
    average: Average,
    l: f64,
    throw: Throw,
    integrator: Integrator,
    budget: &Budget,
) -> Result<PosteriorResult> {
    multiplicity_pair(n, average, l, None, integrator, budget)?.into_throw(throw, budget)
}

/// Multiplicity model tilted by `prod m_i^(L p_i)`.
pub fn generalized_multiplicity_posterior(
    n: u32,
    average: Average,
    l: f64,
    base: Distribution,
    throw: Throw,
    integrator: Integrator,
    budget: &Budget,
) -> Result<PosteriorResult> {
    multiplicity_pair(n, average, l, Some(base), integrator, budget)?.into_throw(throw, budget)
}

/// Large-`N` posterior of a Johnson or multiplicity model: the integrand's
/// mean over the slice `Delta_a`. Old and new throws share this answer.
pub fn large_n_posterior(
    average: Average,
    model: ModelSpec,
    integrator: Integrator,
    budget: &Budget,
) -> Result<PosteriorResult> {
    if let Some(face) = average.vertex_face() {
        return Ok(PosteriorResult::new(Distribution::vertex(face), Method::ClosedForm));
    }
    let poly = build_constraint_polytope(average)?;
    let r = match model {
        ModelSpec::FairThrow => {
            return Err(Error::domain(
                "large-N model",
                "the fair-throw model has no slice integral; use asymptotic_dispatch",
            ))
        }
        ModelSpec::Johnson { k, base } => {
            ModelSpec::johnson_with_base(k, base)?;
            let exps = base.map_or([k - 1.0; FACES], |m| m.probs().map(|x| k * x - 1.0));
            integrate_polytope_ratio(
                &poly,
                |f: &[f64; FACES]| {
                    let lw = f.iter().zip(exps).map(|(x, e)| if e == 0.0 { 0.0 } else { e * x.ln() }).sum();
                    (lw, *f)
                },
                integrator,
                budget,
            )
        }
        ModelSpec::Multiplicity { l, base } => {
            ModelSpec::multiplicity_with_base(l, base)?;
            let ln_m = base.map(|m| m.probs().map(f64::ln));
            integrate_polytope_ratio(
                &poly,
                |f: &[f64; FACES]| {
                    let lw = (0..FACES)
                        .map(|i| {
                            let tilt = ln_m.map_or(0.0, |lm| l * f[i] * lm[i]);
                            tilt - crate::combinatorics::ln_factorial(l * f[i])
                        })
                        .sum();
                    (lw, *f)
                },
                integrator,
                budget,
            )
        }
    };
    let method = match integrator {
        Integrator::MonteCarlo { .. } => Method::MonteCarlo,
        Integrator::Deterministic => Method::DeterministicQuad,
    };
    let mut result = PosteriorResult::new(Distribution::from_weights(r.ratios.map(|x| x.max(0.0)))?, method)
        .with_evaluations(r.evaluations);
    result = match integrator {
        Integrator::MonteCarlo { .. } => result.with_stderr(r.stderr),
        Integrator::Deterministic => result.with_quad_error(r.error_indicator),
    };
    if r.converged {
        Ok(result)
    } else {
        Err(Error::BudgetExhausted {
            achieved: r.error(),
            requested: budget.tolerance,
            partial: Partial::Posterior(Box::new(result)),
        })
    }
}

/// Large-`N` Johnson posterior with symmetric parameter `k`.
pub fn johnson_large_n(average: Average, k: f64, integrator: Integrator, budget: &Budget) -> Result<PosteriorResult> {
    large_n_posterior(average, ModelSpec::johnson(k)?, integrator, budget)
}

/// Large-`N` multiplicity posterior with parameter `l`.
pub fn multiplicity_large_n(
    average: Average,
    l: f64,
    integrator: Integrator,
    budget: &Budget,
) -> Result<PosteriorResult> {
    large_n_posterior(average, ModelSpec::multiplicity(l)?, integrator, budget)
}

/// Model family of a [`LimitQuery`], with its parameter left open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    FairThrow,
    Johnson,
    Multiplicity,
}

/// Which side wins when the model parameter is taken large.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dominance {
    /// The parameter outgrows `N`: the model behaves like i.i.d. throws.
    Parameter,
    /// `N` outgrows the parameter, itself large.
    Data,
}

/// A query that may leave the model parameter unspecified and describe
/// instead how it compares with `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitQuery {
    pub regime: Regime,
    pub average: Average,
    pub throw: Throw,
    pub family: Family,
    /// `K` or `L`; `None` for "large".
    pub parameter: Option<f64>,
    pub dominance: Option<Dominance>,
    pub base: Option<Distribution>,
}

/// A dispatched answer and the description of the limit it represents.
#[derive(Debug, Clone, PartialEq)]
pub struct Dispatched {
    pub result: PosteriorResult,
    pub annotation: Option<&'static str>,
}

pub const LIKE_FAIR_THROW: &str = "like fair-throw model";
pub const UNIFORM_NEW: &str = "uniform distribution irrespective of a";
pub const ME_SHANNON: &str = "ME distribution";
pub const ME_BURG: &str = "ME distribution for Burg entropy";

fn analytic(distribution: Distribution, annotation: Option<&'static str>) -> Dispatched {
    Dispatched { result: PosteriorResult::new(distribution, Method::AnalyticLimit), annotation }
}

fn new_throw_annotation(base: Option<Distribution>) -> Option<&'static str> {
    base.is_none().then_some(UNIFORM_NEW)
}

/// Routes a query to the formula that governs its regime. Numerical paths
/// use `integrator` and `budget`.
pub fn asymptotic_dispatch(query: &LimitQuery, integrator: Integrator, budget: &Budget) -> Result<Dispatched> {
    check_base(query.base)?;
    let a = query.average;
    let base = query.base;
    let m = base.unwrap_or_else(Distribution::uniform);
    let numerical = |result: PosteriorResult| Dispatched { result, annotation: None };
    match (query.family, query.parameter, query.dominance) {
        (Family::FairThrow, None, None) | (Family::FairThrow, None, Some(Dominance::Parameter)) => {
            fair_like(query.regime, a, base, query.throw, None)
        }
        (Family::FairThrow, _, _) => {
            Err(Error::AmbiguousRegime("the fair-throw model takes neither a parameter nor a dominance".into()))
        }
        (_, None, None) => {
            Err(Error::AmbiguousRegime("a large parameter needs a dominance (parameter or data)".into()))
        }
        (_, Some(_), Some(_)) => {
            Err(Error::AmbiguousRegime("give either a parameter value or a dominance, not both".into()))
        }
        (_, None, Some(Dominance::Parameter)) => fair_like(query.regime, a, base, query.throw, Some(LIKE_FAIR_THROW)),
        (family, None, Some(Dominance::Data)) => {
            if query.regime != Regime::LargeN {
                return Err(Error::AmbiguousRegime("data can dominate a large parameter only when N is large".into()));
            }
            let (solution, annotation) = match family {
                Family::Johnson => (min_reverse_kl(a, &m)?, ME_BURG),
                _ => (min_kl(a, &m)?, ME_SHANNON),
            };
            Ok(analytic(solution.distribution, base.is_none().then_some(annotation)))
        }
        (family, Some(x), None) => {
            let model = match family {
                Family::Johnson => ModelSpec::johnson_with_base(x, base)?,
                _ => ModelSpec::multiplicity_with_base(x, base)?,
            };
            match query.regime {
                Regime::LargeN => large_n_posterior(a, model, integrator, budget).map(numerical),
                Regime::Exact(n) => {
                    let result = match family {
                        Family::Johnson => match base {
                            None => crate::exact::johnson_posterior(n, a, x, query.throw)?,
                            Some(m) => crate::exact::generalized_johnson_posterior(n, a, x, m, query.throw)?,
                        },
                        _ => multiplicity_pair(n, a, x, base, integrator, budget)?.into_throw(query.throw, budget)?,
                    };
                    Ok(numerical(result))
                }
            }
        }
    }
}

// i.i.d. throws from `m`: exact at finite N; at large N, old throws follow
// the minimum-divergence distribution and new throws follow `m`.
fn fair_like(
    regime: Regime,
    a: Average,
    base: Option<Distribution>,
    throw: Throw,
    old_annotation: Option<&'static str>,
) -> Result<Dispatched> {
    let m = base.unwrap_or_else(Distribution::uniform);
    match (regime, throw) {
        (Regime::Exact(n), Throw::New) => {
            Ok(Dispatched { result: iid_posterior(n, a, base, Throw::New)?, annotation: new_throw_annotation(base) })
        }
        (Regime::LargeN, Throw::New) => Ok(analytic(m, new_throw_annotation(base))),
        (Regime::Exact(n), Throw::Old) => {
            Ok(Dispatched { result: iid_posterior(n, a, base, Throw::Old)?, annotation: old_annotation })
        }
        (Regime::LargeN, Throw::Old) => {
            let solution = min_kl(a, &m)?;
            let annotation = old_annotation.or(Some(ME_SHANNON)).filter(|_| base.is_none());
            Ok(analytic(solution.distribution, annotation))
        }
    }
}
