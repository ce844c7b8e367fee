//! Importance sampling on `Delta_a`: a balance-heuristic mixture of the
//! uniform distribution on the slice and a Gaussian fitted at the mode of
//! the integrand in the slice's orthonormal chart.

use rand::Rng;
use rand_distr::StandardNormal;

use super::polytope::{ConstraintPolytope, DIM};
use crate::types::FACES;

/// Widening applied to the Laplace standard deviations.
const INFLATION: f64 = 1.5;
/// Probability of drawing from the uniform component.
const UNIFORM_SHARE: f64 = 0.2;
/// Factor between the rounding bound on finite-difference curvature and the
/// curvature a fit must show.
const NOISE_MARGIN: f64 = 1e3;
/// Largest Laplace standard deviation worth a Gaussian component; the slice
/// itself is at most sqrt(2) across.
const MAX_STD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ChartGaussian {
    pub mean: [f64; DIM],
    /// Lower Cholesky factor of the covariance.
    pub cholesky: [[f64; DIM]; DIM],
    ln_norm: f64,
}

impl ChartGaussian {
    fn new(mean: [f64; DIM], cov: [[f64; DIM]; DIM]) -> Option<Self> {
        let cholesky = cholesky(&cov)?;
        let ln_det_half: f64 = (0..DIM).map(|i| cholesky[i][i].ln()).sum();
        let ln_norm = -ln_det_half - 0.5 * DIM as f64 * (2.0 * std::f64::consts::PI).ln();
        Some(ChartGaussian { mean, cholesky, ln_norm })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; DIM] {
        let z: [f64; DIM] = std::array::from_fn(|_| rng.sample(StandardNormal));
        std::array::from_fn(|i| self.mean[i] + (0..=i).map(|j| self.cholesky[i][j] * z[j]).sum::<f64>())
    }

    fn ln_density(&self, y: &[f64; DIM]) -> f64 {
        // Solve L z = y - mean.
        let mut z = [0.0; DIM];
        for i in 0..DIM {
            let s: f64 = (0..i).map(|j| self.cholesky[i][j] * z[j]).sum();
            z[i] = (y[i] - self.mean[i] - s) / self.cholesky[i][i];
        }
        self.ln_norm - 0.5 * z.iter().map(|x| x * x).sum::<f64>()
    }
}

fn cholesky(a: &[[f64; DIM]; DIM]) -> Option<[[f64; DIM]; DIM]> {
    let mut l = [[0.0; DIM]; DIM];
    for i in 0..DIM {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

fn invert(a: &[[f64; DIM]; DIM]) -> Option<[[f64; DIM]; DIM]> {
    let mut m = *a;
    let mut inv = [[0.0; DIM]; DIM];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..DIM {
        let pivot = (col..DIM).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(pivot, col);
        inv.swap(pivot, col);
        let d = m[col][col];
        for c in 0..DIM {
            m[col][c] /= d;
            inv[col][c] /= d;
        }
        for r in 0..DIM {
            if r != col {
                let f = m[r][col];
                for c in 0..DIM {
                    m[r][c] -= f * m[col][c];
                    inv[r][c] -= f * inv[col][c];
                }
            }
        }
    }
    Some(inv)
}

fn inside(p: &[f64; FACES]) -> bool {
    p.iter().all(|x| *x > 0.0)
}

// Log integrand in chart coordinates; -inf off the slice.
fn chart_value<F: Fn(&[f64; FACES]) -> f64>(poly: &ConstraintPolytope, f: &F, y: &[f64; DIM]) -> f64 {
    let p = poly.from_chart(y);
    if inside(&p) {
        f(&p)
    } else {
        f64::NEG_INFINITY
    }
}

fn min_coordinate(poly: &ConstraintPolytope, y: &[f64; DIM]) -> f64 {
    poly.from_chart(y).iter().copied().fold(f64::INFINITY, f64::min)
}

// Central finite-difference gradient and Hessian, with a bound on the
// Hessian entries that rounding of `f` alone can produce.
fn derivatives<F: Fn(&[f64; FACES]) -> f64>(
    poly: &ConstraintPolytope,
    f: &F,
    y: &[f64; DIM],
) -> Option<([f64; DIM], [[f64; DIM]; DIM], f64)> {
    let h = (0.25 * min_coordinate(poly, y)).min(1e-4);
    if !(h > 1e-12) {
        return None;
    }
    let at = |d: &[(usize, f64)]| {
        let mut z = *y;
        for &(i, s) in d {
            z[i] += s * h;
        }
        chart_value(poly, f, &z)
    };
    let f0 = at(&[]);
    let mut grad = [0.0; DIM];
    let mut hess = [[0.0; DIM]; DIM];
    for i in 0..DIM {
        let (fp, fm) = (at(&[(i, 1.0)]), at(&[(i, -1.0)]));
        grad[i] = (fp - fm) / (2.0 * h);
        hess[i][i] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let v = (at(&[(i, 1.0), (j, 1.0)]) - at(&[(i, 1.0), (j, -1.0)]) - at(&[(i, -1.0), (j, 1.0)])
                + at(&[(i, -1.0), (j, -1.0)]))
                / (4.0 * h * h);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    let finite = grad.iter().all(|g| g.is_finite()) && hess.iter().flatten().all(|x| x.is_finite());
    let noise = NOISE_MARGIN * 4.0 * f64::EPSILON * f0.abs().max(1.0) / (h * h);
    finite.then_some((grad, hess, noise))
}

/// Fits a Gaussian at the interior mode of `f` on the slice by damped
/// Newton ascent. `None` when the mode is not found or the Hessian there is
/// not negative definite.
pub fn laplace_fit<F: Fn(&[f64; FACES]) -> f64>(poly: &ConstraintPolytope, f: &F) -> Option<ChartGaussian> {
    let mut y = [0.0; DIM];
    let mut value = chart_value(poly, f, &y);
    if !value.is_finite() {
        return None;
    }
    for _ in 0..100 {
        let (grad, hess, _) = derivatives(poly, f, &y)?;
        let neg: [[f64; DIM]; DIM] = std::array::from_fn(|i| std::array::from_fn(|j| -hess[i][j]));
        let step: [f64; DIM] = match (cholesky(&neg), invert(&neg)) {
            (Some(_), Some(inv)) => std::array::from_fn(|i| (0..DIM).map(|j| inv[i][j] * grad[j]).sum()),
            _ => grad.map(|g| 1e-3 * g),
        };
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-10 {
            let trial: [f64; DIM] = std::array::from_fn(|i| y[i] + t * step[i]);
            let v = chart_value(poly, f, &trial);
            if v.is_finite() && v >= value {
                y = trial;
                value = v;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        let size = step.iter().map(|s| s * s).sum::<f64>().sqrt() * t;
        if !moved || size < 1e-9 {
            break;
        }
    }
    let (_, hess, noise) = derivatives(poly, f, &y)?;
    let neg: [[f64; DIM]; DIM] = std::array::from_fn(|i| std::array::from_fn(|j| -hess[i][j]));
    // The curvature must stand clear of rounding noise in every direction,
    // otherwise the fit would depend on the integrand's constant offset.
    let margin: [[f64; DIM]; DIM] =
        std::array::from_fn(|i| std::array::from_fn(|j| neg[i][j] - if i == j { noise } else { 0.0 }));
    cholesky(&margin)?;
    let cov = invert(&neg)?;
    // Curvature at the level of finite-difference noise: the integrand is
    // flat on the slice's scale and uniform sampling is the better proposal.
    if (0..DIM).any(|i| !(cov[i][i].sqrt() <= MAX_STD)) {
        return None;
    }
    let widened = cov.map(|row| row.map(|x| x * INFLATION * INFLATION));
    ChartGaussian::new(y, widened)
}

/// The sampling distribution on the slice, with its log density in chart
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceProposal {
    gaussian: Option<ChartGaussian>,
    ln_uniform: f64,
}

impl SliceProposal {
    pub fn new(poly: &ConstraintPolytope, gaussian: Option<ChartGaussian>) -> Self {
        SliceProposal { gaussian, ln_uniform: -poly.volume().ln() }
    }

    pub fn is_uniform(&self) -> bool {
        self.gaussian.is_none()
    }

    /// Draws a point of the hyperplane (possibly outside the simplex) and
    /// the log proposal density there.
    pub fn sample<R: Rng + ?Sized>(&self, poly: &ConstraintPolytope, rng: &mut R) -> ([f64; FACES], f64) {
        match &self.gaussian {
            None => (poly.sample_uniform(rng), self.ln_uniform),
            Some(g) => {
                let p = if rng.random::<f64>() < UNIFORM_SHARE {
                    poly.sample_uniform(rng)
                } else {
                    poly.from_chart(&g.sample(rng))
                };
                let y = poly.to_chart(&p);
                let a = UNIFORM_SHARE.ln() + if inside_or_boundary(&p) { self.ln_uniform } else { f64::NEG_INFINITY };
                let b = (1.0 - UNIFORM_SHARE).ln() + g.ln_density(&y);
                let m = a.max(b);
                (p, m + ((a - m).exp() + (b - m).exp()).ln())
            }
        }
    }
}

fn inside_or_boundary(p: &[f64; FACES]) -> bool {
    p.iter().all(|x| *x >= 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integration::polytope::build_constraint_polytope;

    #[test]
    fn laplace_fit_finds_burg_mode() {
        let poly = build_constraint_polytope("5".parse().unwrap()).unwrap();
        let k = 50.0;
        let f = |p: &[f64; FACES]| p.iter().map(|x| (k - 1.0) * x.ln()).sum::<f64>();
        let g = laplace_fit(&poly, &f).expect("peaked integrand");
        let mode = poly.from_chart(&g.mean);
        let burg = crate::maxent::maxent_burg("5".parse().unwrap()).unwrap();
        for (a, b) in mode.iter().zip(burg.distribution.probs()) {
            assert!((a - b).abs() < 1e-5, "{mode:?}");
        }
    }

    #[test]
    fn flat_integrand_has_no_gaussian() {
        let poly = build_constraint_polytope("7/2".parse().unwrap()).unwrap();
        assert!(laplace_fit(&poly, &|_: &[f64; FACES]| 0.0).is_none());
    }

    #[test]
    fn linear_integrand_has_no_gaussian_at_any_offset() {
        for a in ["4", "11/2"] {
            let poly = build_constraint_polytope(a.parse().unwrap()).unwrap();
            let tilt = [2.65, -0.74, 0.0, -2.95, 2.57, -1.15];
            for offset in [0.0, 1.0, 472.0, -490.3, -700.0] {
                let f = |p: &[f64; FACES]| offset + p.iter().zip(tilt).map(|(x, t)| t * x).sum::<f64>();
                assert!(laplace_fit(&poly, &f).is_none(), "a = {a}, offset {offset}");
            }
        }
    }

    #[test]
    fn gaussian_density_normalized() {
        let g = ChartGaussian::new(
            [0.0; DIM],
            [[1.0, 0.0, 0.0, 0.0], [0.0, 4.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]],
        )
        .unwrap();
        let want = -0.5 * 4.0 * (2.0 * std::f64::consts::PI).ln() - 2f64.ln();
        assert!((g.ln_density(&[0.0; DIM]) - want).abs() < 1e-14);
        let inv =
            invert(&[[2.0, 1.0, 0.0, 0.0], [1.0, 2.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 3.0]]).unwrap();
        assert!((inv[0][0] - 2.0 / 3.0).abs() < 1e-15 && (inv[0][1] + 1.0 / 3.0).abs() < 1e-15);
    }
}
