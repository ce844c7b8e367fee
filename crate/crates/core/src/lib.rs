//! Plausibilities of die-throw outcomes given an observed average, under
//! exchangeable models (fair-throw, Johnson, multiplicity), compared with
//! maximum-entropy assignments.
//!
//! ```
//! use exdice::{johnson_posterior, Average, Throw};
//!
//! let a: Average = "5".parse().unwrap();
//! let old = johnson_posterior(2, a, 1.0, Throw::Old).unwrap();
//! assert!((old.distribution.probs()[4] - 0.5).abs() < 1e-12);
//! ```

pub mod combinatorics;
pub mod entropy;
pub mod error;
pub mod exact;
pub mod integration;
pub mod maxent;
pub mod multiplicity;
pub mod types;

pub use combinatorics::{
    count_sequences, enumerate_constrained_frequencies, log_gamma_factorial, log_multinomial, ConstraintSet,
};
pub use entropy::{burg_entropy, kl_divergence, shannon_entropy};
pub use error::{Error, Partial, Result};
pub use exact::{
    conditional_old_given_frequency, fair_posterior, generalized_johnson_posterior, iid_posterior, johnson_posterior,
    WeightedFrequencySum,
};
pub use integration::{
    build_constraint_polytope, dirichlet_beta_integral, integrate_polytope, integrate_polytope_ratio,
    integrate_simplex, integrate_simplex_ratio, sample_simplex_uniform, Budget, ConstraintPolytope, Integrator,
    QuadratureEstimate, RatioEstimate,
};
pub use maxent::{maxent_burg, maxent_shannon, min_kl, min_reverse_kl, MaxentSolution};
pub use multiplicity::{
    asymptotic_dispatch, generalized_multiplicity_posterior, johnson_large_n, large_n_posterior, multiplicity_large_n,
    multiplicity_pair, multiplicity_posterior, Dispatched, Dominance, Family, LimitQuery, PosteriorPair,
};
pub use types::{
    Average, Distribution, ExtendedReal, Face, FrequencyVector, Method, ModelSpec, PosteriorResult, Query, Regime,
    Throw, FACES, FACE_VALUES,
};
