//! Distributions on the slice `v . f = a` that maximize Shannon or Burg
//! entropy, or minimize a Kullback-Leibler divergence from a base `m`.
//!
//! Each problem reduces to one monotone equation in a single parameter,
//! solved by Newton steps kept inside a shrinking bracket.

use crate::entropy::{burg_entropy, kl_divergence, shannon_entropy};
use crate::error::Result;
use crate::types::{check_base, Average, Distribution, ExtendedReal, Face, FACES, FACE_VALUES};

/// Largest `|lambda|` explored for the exponential family.
pub const LAMBDA_BOUND: f64 = 60.0;
/// Residual target on the mean constraint.
pub const ROOT_TOLERANCE: f64 = 1e-13;
pub const MAX_ITERATIONS: usize = 200;

// Burg solutions are parametrized by f_i ∝ m_i / (1 + t (i - 3.5)); every
// term stays positive for |t| < 1 / 2.5.
const BURG_T_BOUND: f64 = 0.4;
const CENTER: f64 = 3.5;

#[derive(Debug, Clone, PartialEq)]
pub struct MaxentSolution {
    pub distribution: Distribution,
    /// Multiplier of the mean constraint. For the exponential family
    /// `f_i = m_i exp(lambda i - 1 - mu)`; for Burg `f_i = m_i / (mu + lambda i)`.
    pub lambda: ExtendedReal,
    /// Multiplier of the normalization constraint, absent at a vertex.
    pub mu: Option<f64>,
    /// `H(f)`, `H_B(f)`, `D(f, m)` or `D(m, f)` depending on the solver.
    pub functional_value: ExtendedReal,
    /// `|sum f - 1|` and `|v . f - a|` before the final renormalization.
    pub residuals: (f64, f64),
    /// Set when the answer is a vertex of the simplex rather than an
    /// interior stationary point.
    pub degenerate: bool,
}

fn vertex_solution(face: Face, lambda: ExtendedReal, functional_value: ExtendedReal) -> MaxentSolution {
    MaxentSolution {
        distribution: Distribution::vertex(face),
        lambda,
        mu: None,
        functional_value,
        residuals: (0.0, 0.0),
        degenerate: true,
    }
}

fn endpoint_lambda(face: Face) -> ExtendedReal {
    if face.value() == 1 {
        ExtendedReal::NegInfinity
    } else {
        ExtendedReal::PosInfinity
    }
}

fn residuals(probs: &[f64; FACES], a: f64) -> (f64, f64) {
    let total: f64 = probs.iter().sum();
    let mean: f64 = probs.iter().zip(FACE_VALUES).map(|(p, v)| p * v).sum();
    ((total - 1.0).abs(), (mean - a).abs())
}

/// Finds the root of an increasing function on `[lo, hi]` with Newton steps
/// that fall back to bisection whenever they leave the current bracket.
/// `f` returns `(value, derivative)`. Returns the root and whether the
/// tolerance was met.
fn bracketed_newton<F>(mut lo: f64, mut hi: f64, start: f64, f: F) -> (f64, bool)
where
    F: Fn(f64) -> (f64, f64),
{
    let mut x = start;
    for _ in 0..MAX_ITERATIONS {
        let (value, slope) = f(x);
        if value.abs() <= ROOT_TOLERANCE {
            return (x, true);
        }
        if value < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - value / slope;
        x = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(1.0) {
            let (value, _) = f(x);
            return (x, value.abs() <= ROOT_TOLERANCE);
        }
    }
    let (value, _) = f(x);
    (x, value.abs() <= ROOT_TOLERANCE)
}

// f_i ∝ m_i exp(lambda (i - 3.5)), with log-normalizer ln Z relative to the
// uncentered exponent lambda i.
fn exp_family(lambda: f64, log_m: &[f64; FACES]) -> ([f64; FACES], f64) {
    let mut logs = [0.0; FACES];
    for (i, l) in logs.iter_mut().enumerate() {
        *l = log_m[i] + lambda * (FACE_VALUES[i] - CENTER);
    }
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs = logs.map(|l| (l - max).exp());
    let z: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= z;
    }
    let log_z = max + z.ln() + lambda * CENTER;
    (probs, log_z)
}

fn moments(probs: &[f64; FACES]) -> (f64, f64) {
    let mean: f64 = probs.iter().zip(FACE_VALUES).map(|(p, v)| p * v).sum();
    let var: f64 = probs.iter().zip(FACE_VALUES).map(|(p, v)| p * (v - mean) * (v - mean)).sum();
    (mean, var)
}

fn solve_exp_family(a: Average, m: &Distribution) -> Result<(MaxentSolution, [f64; FACES])> {
    let target = a.value();
    let log_m = m.probs().map(f64::ln);
    if let Some(face) = a.vertex_face() {
        return Ok((vertex_solution(face, endpoint_lambda(face), ExtendedReal::Finite(0.0)), log_m));
    }
    let (lambda, converged) = bracketed_newton(-LAMBDA_BOUND, LAMBDA_BOUND, 0.0, |lambda| {
        let (probs, _) = exp_family(lambda, &log_m);
        let (mean, var) = moments(&probs);
        (mean - target, var)
    });
    if !converged && lambda.abs() >= LAMBDA_BOUND * (1.0 - 1e-9) {
        let face = if lambda > 0.0 { Face::new(6) } else { Face::new(1) }.expect("face");
        return Ok((vertex_solution(face, endpoint_lambda(face), ExtendedReal::Finite(0.0)), log_m));
    }
    let (probs, log_z) = exp_family(lambda, &log_m);
    let res = residuals(&probs, target);
    let distribution = Distribution::from_weights(probs)?;
    Ok((
        MaxentSolution {
            distribution,
            lambda: ExtendedReal::Finite(lambda),
            mu: Some(log_z - 1.0),
            functional_value: ExtendedReal::Finite(0.0),
            residuals: res,
            degenerate: false,
        },
        log_m,
    ))
}

/// Maximizes `H(f)` subject to `v . f = a`: `f_i ∝ exp(lambda i)`.
pub fn maxent_shannon(a: Average) -> Result<MaxentSolution> {
    let (mut sol, _) = solve_exp_family(a, &Distribution::uniform())?;
    if a.ratio() == num_rational::Rational64::new(7, 2) {
        // The symmetric point: lambda is exactly zero.
        sol.distribution = Distribution::uniform();
        sol.lambda = ExtendedReal::Finite(0.0);
        sol.mu = Some(6f64.ln() - 1.0);
        sol.residuals = residuals(sol.distribution.probs(), 3.5);
    }
    sol.functional_value = ExtendedReal::Finite(shannon_entropy(&sol.distribution));
    Ok(sol)
}

/// Minimizes `D(f, m) = sum f_i ln(f_i / m_i)` subject to `v . f = a`:
/// `f_i ∝ m_i exp(lambda i)`.
pub fn min_kl(a: Average, m: &Distribution) -> Result<MaxentSolution> {
    check_base(Some(*m))?;
    let (mut sol, _) = solve_exp_family(a, m)?;
    sol.functional_value = kl_divergence(&sol.distribution, m);
    Ok(sol)
}

// q_i ∝ m_i / (1 + t (i - 3.5)) with its normalizer and d mean / dt.
fn burg_family(t: f64, m: &[f64; FACES]) -> ([f64; FACES], f64, f64, f64) {
    let mut g = [0.0; FACES];
    for (i, gi) in g.iter_mut().enumerate() {
        *gi = m[i] / (1.0 + t * (FACE_VALUES[i] - CENTER));
    }
    let z: f64 = g.iter().sum();
    let probs = g.map(|x| x / z);
    let (mean, _) = moments(&probs);
    // d q_i / dt = -q_i s_i + q_i <s> with s_i = d_i / (1 + t d_i).
    let s: [f64; FACES] = std::array::from_fn(|i| (FACE_VALUES[i] - CENTER) / (1.0 + t * (FACE_VALUES[i] - CENTER)));
    let s_mean: f64 = probs.iter().zip(s).map(|(q, s)| q * s).sum();
    let cov: f64 = probs.iter().enumerate().map(|(i, q)| q * (FACE_VALUES[i] - mean) * (s[i] - s_mean)).sum();
    (probs, z, mean, -cov)
}

fn solve_burg(a: Average, m: &Distribution) -> Result<MaxentSolution> {
    let target = a.value();
    if let Some(face) = a.vertex_face() {
        return Ok(vertex_solution(face, endpoint_lambda(face), ExtendedReal::NegInfinity));
    }
    let weights = *m.probs();
    // The mean decreases in t; solve on -t so the root finder sees an
    // increasing function.
    let (u, _) = bracketed_newton(-BURG_T_BOUND, BURG_T_BOUND, 0.0, |u| {
        let (_, _, mean, slope) = burg_family(-u, &weights);
        (mean - target, -slope)
    });
    let t = -u;
    let (probs, z, _, _) = burg_family(t, &weights);
    let res = residuals(&probs, target);
    Ok(MaxentSolution {
        distribution: Distribution::from_weights(probs)?,
        lambda: ExtendedReal::Finite(z * t),
        mu: Some(z * (1.0 - CENTER * t)),
        functional_value: ExtendedReal::NegInfinity,
        residuals: res,
        degenerate: false,
    })
}

/// Maximizes the Burg entropy `sum ln f_i` subject to `v . f = a`:
/// `f_i = 1 / (mu + lambda i)`. At `a = 1` or `a = 6` the vertex is
/// returned with a `-inf` functional value and the degenerate flag.
pub fn maxent_burg(a: Average) -> Result<MaxentSolution> {
    let mut sol = solve_burg(a, &Distribution::uniform())?;
    if a.ratio() == num_rational::Rational64::new(7, 2) {
        sol.distribution = Distribution::uniform();
        sol.lambda = ExtendedReal::Finite(0.0);
        sol.mu = Some(6.0);
        sol.residuals = residuals(sol.distribution.probs(), 3.5);
    } else if !sol.degenerate {
        // Report multipliers of the unweighted form 1 / (mu + lambda i).
        sol.lambda = sol.lambda.finite().map(|l| ExtendedReal::Finite(l * 6.0)).unwrap();
        sol.mu = sol.mu.map(|mu| mu * 6.0);
    }
    sol.functional_value = burg_entropy(&sol.distribution);
    Ok(sol)
}

/// Minimizes `D(m, f) = sum m_i ln(m_i / f_i)` subject to `v . f = a`, the
/// Burg problem with weights `m`: `f_i = m_i / (mu + lambda i)`.
pub fn min_reverse_kl(a: Average, m: &Distribution) -> Result<MaxentSolution> {
    check_base(Some(*m))?;
    let mut sol = solve_burg(a, m)?;
    sol.functional_value = kl_divergence(m, &sol.distribution);
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn avg(s: &str) -> Average {
        s.parse().unwrap()
    }

    fn close(got: [f64; 6], want: [f64; 6], tol: f64) {
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= tol, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn shannon_anchors() {
        let s = maxent_shannon(avg("5")).unwrap();
        close(s.distribution.percentages(), [2.1, 3.9, 7.2, 13.6, 25.5, 47.8], 0.05);
        assert!(s.residuals.0 <= 1e-12 && s.residuals.1 <= 1e-12);
        let h = s.functional_value.finite().unwrap();
        assert!((h - 1.3675).abs() < 1e-3);

        let u = maxent_shannon(avg("7/2")).unwrap();
        assert_eq!(u.distribution, Distribution::uniform());
        assert_eq!(u.lambda, ExtendedReal::Finite(0.0));

        let v = maxent_shannon(avg("6")).unwrap();
        assert!(v.degenerate);
        assert_eq!(v.lambda, ExtendedReal::PosInfinity);
        assert_eq!(v.functional_value, ExtendedReal::Finite(0.0));
        assert_eq!(maxent_shannon(avg("1")).unwrap().lambda, ExtendedReal::NegInfinity);
    }

    #[test]
    fn shannon_reversal() {
        let five = maxent_shannon(avg("5")).unwrap();
        let two = maxent_shannon(avg("2")).unwrap();
        assert!(two.distribution.max_abs_diff(&five.distribution.reversed()) < 1e-12);
    }

    #[test]
    fn shannon_multipliers_reproduce_solution() {
        let s = maxent_shannon(avg("5")).unwrap();
        let lambda = s.lambda.finite().unwrap();
        let mu = s.mu.unwrap();
        for (i, p) in s.distribution.probs().iter().enumerate() {
            let stationary = p.ln() + 1.0 + mu - lambda * FACE_VALUES[i] - (1.0f64 / 6.0).ln();
            assert!(stationary.abs() < 1e-9, "{stationary}");
        }
    }

    #[test]
    fn burg_anchors() {
        let b = maxent_burg(avg("5")).unwrap();
        close(b.distribution.percentages(), [4.4, 5.3, 6.9, 9.8, 16.7, 57.0], 0.05);
        assert!(b.residuals.1 <= 1e-12);
        let lambda = b.lambda.finite().unwrap();
        let mu = b.mu.unwrap();
        for (i, f) in b.distribution.probs().iter().enumerate() {
            assert!((1.0 / f - mu - lambda * FACE_VALUES[i]).abs() < 1e-9);
        }
        let u = maxent_burg(avg("3.5")).unwrap();
        assert_eq!(u.distribution, Distribution::uniform());
        assert_eq!((u.lambda, u.mu), (ExtendedReal::Finite(0.0), Some(6.0)));
        let v = maxent_burg(avg("6")).unwrap();
        assert!(v.degenerate);
        assert_eq!(v.functional_value, ExtendedReal::NegInfinity);
    }

    #[test]
    fn burg_near_endpoints() {
        for a in ["599/100", "101/100", "5999/1000"] {
            let b = maxent_burg(avg(a)).unwrap();
            assert!(b.residuals.1 < 1e-10, "{a}: {:?}", b.residuals);
            assert!(b.distribution.is_strictly_positive());
        }
    }

    #[test]
    fn min_kl_cases() {
        let u = Distribution::uniform();
        let k = min_kl(avg("5"), &u).unwrap();
        let s = maxent_shannon(avg("5")).unwrap();
        assert!(k.distribution.max_abs_diff(&s.distribution) < 1e-13);

        let m = Distribution::new([0.1, 0.1, 0.1, 0.2, 0.2, 0.3]).unwrap();
        // v . m = 4.2
        let same = min_kl(avg("4.2"), &m).unwrap();
        assert!(same.distribution.max_abs_diff(&m) < 1e-12);
        assert!(same.functional_value.finite().unwrap() < 1e-12);

        let k = min_kl(avg("5"), &m).unwrap();
        let lambda = k.lambda.finite().unwrap();
        let mu = k.mu.unwrap();
        for (i, f) in k.distribution.probs().iter().enumerate() {
            let stationary = (f / m.probs()[i]).ln() + 1.0 + mu - lambda * FACE_VALUES[i];
            assert!(stationary.abs() < 1e-9);
        }
    }

    #[test]
    fn min_reverse_kl_with_uniform_base_is_burg() {
        let u = Distribution::uniform();
        for a in ["5", "2", "33/10"] {
            let r = min_reverse_kl(avg(a), &u).unwrap();
            let b = maxent_burg(avg(a)).unwrap();
            assert!(r.distribution.max_abs_diff(&b.distribution) < 1e-12);
        }
        let m = Distribution::new([0.3, 0.2, 0.2, 0.1, 0.1, 0.1]).unwrap();
        let r = min_reverse_kl(avg("5"), &m).unwrap();
        let lambda = r.lambda.finite().unwrap();
        let mu = r.mu.unwrap();
        for (i, f) in r.distribution.probs().iter().enumerate() {
            assert!((m.probs()[i] / f - mu - lambda * FACE_VALUES[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn mean_is_increasing_in_lambda() {
        let log_m = [0.0; 6];
        let means: Vec<f64> = (-60..=60).map(|k| moments(&exp_family(f64::from(k) * 0.5, &log_m).0).0).collect();
        assert!(means.windows(2).all(|w| w[0] < w[1] || (w[1] - 6.0).abs() < 1e-12));
    }
}
