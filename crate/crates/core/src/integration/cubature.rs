//! Adaptive Grundmann-Moeller cubature on simplices embedded in the
//! probability simplex. A degree-9 rule is paired with the degree-7 rule
//! that shares its points; their difference drives bisection of the
//! longest edge of the worst region.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::types::FACES;

/// Symmetric rule on an `n`-simplex with weights normalized to unit volume.
#[derive(Debug, Clone)]
pub struct GmRule {
    dim: usize,
    /// Barycentric coordinates (length `dim + 1`), degree-9 weight and
    /// degree-7 weight.
    points: Vec<(Vec<f64>, f64, f64)>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

// All vectors of `len` non-negative integers adding up to `total`.
fn compositions(total: usize, len: usize) -> Vec<Vec<usize>> {
    if len == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, len - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn gm_weight(s: usize, i: usize, n: usize) -> f64 {
    let d = 2 * s + 1;
    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
    let base = (d + n - 2 * i) as f64;
    sign * base.powi(d as i32) / 4f64.powi(s as i32) / (factorial(i) * factorial(d + n - i)) * factorial(n)
}

impl GmRule {
    pub fn new(dim: usize) -> Self {
        const S: usize = 4;
        let d = 2 * S + 1;
        let mut points = Vec::new();
        for i in 0..=S {
            let wh = gm_weight(S, i, dim);
            // Level i of the degree-9 rule is level i - 1 of the degree-7 one.
            let wl = if i == 0 { 0.0 } else { gm_weight(S - 1, i - 1, dim) };
            let denom = (d + dim - 2 * i) as f64;
            for beta in compositions(S - i, dim + 1) {
                let bary = beta.iter().map(|&b| (2 * b + 1) as f64 / denom).collect();
                points.push((bary, wh, wl));
            }
        }
        GmRule { dim, points }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Averages of `f` over the simplex with vertices `verts`, by the
    /// degree-9 and degree-7 rules.
    pub fn apply<F: FnMut(&[f64; FACES]) -> f64>(&self, verts: &[[f64; FACES]], mut f: F) -> (f64, f64) {
        let mut qh = 0.0;
        let mut ql = 0.0;
        for (bary, wh, wl) in &self.points {
            let x = f(&combine(verts, bary));
            qh += wh * x;
            ql += wl * x;
        }
        (qh, ql)
    }
}

pub(crate) fn combine(verts: &[[f64; FACES]], bary: &[f64]) -> [f64; FACES] {
    let mut p = [0.0; FACES];
    for (v, b) in verts.iter().zip(bary) {
        for (pi, vi) in p.iter_mut().zip(v) {
            *pi += b * vi;
        }
    }
    p.map(|x| x.max(0.0))
}

#[derive(Debug, Clone)]
struct Region<const K: usize> {
    verts: Vec<[f64; FACES]>,
    /// Share of the total volume.
    volume: f64,
    /// Degree-9 estimates of the integrals of `w` and `w o_k`, times volume,
    /// relative to the global log-scale.
    q: [f64; K],
    q0: f64,
    err: f64,
}

impl<const K: usize> PartialEq for Region<K> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl<const K: usize> Eq for Region<K> {}
impl<const K: usize> PartialOrd for Region<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const K: usize> Ord for Region<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Result of an adaptive run: integral of `w` (unit total volume), ratios
/// `int w o_k / int w`, and the error indicator of the ratios (absolute) or
/// of the integral (relative) when `K = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubatureResult<const K: usize> {
    pub ln_integral: f64,
    pub ratios: [f64; K],
    pub error: f64,
    pub evaluations: u64,
    pub regions: usize,
    pub converged: bool,
}

/// Integrates `exp(lw(p))` and `exp(lw(p)) o_k(p)` over the union of the
/// given simplices (vertex lists with volume shares summing to 1). The
/// integrand returns `(lw, o)`; `lw = -inf` means zero weight.
pub fn adaptive<const K: usize, F>(
    roots: &[(Vec<[f64; FACES]>, f64)],
    integrand: F,
    tolerance: f64,
    max_evaluations: u64,
) -> CubatureResult<K>
where
    F: Fn(&[f64; FACES]) -> (f64, [f64; K]),
{
    assert!(!roots.is_empty());
    let dim = roots[0].0.len() - 1;
    let rule = GmRule::new(dim);
    let mut scale = f64::NEG_INFINITY;
    let mut evaluations = 0u64;

    // Evaluates a region relative to `scale`, or to its own maximum when that
    // is much larger; returns the scale used.
    let evaluate = |verts: Vec<[f64; FACES]>, volume: f64, scale: f64, evaluations: &mut u64| {
        let mut logs = Vec::with_capacity(rule.len());
        for (bary, _, _) in &rule.points {
            logs.push(integrand(&combine(&verts, bary)));
        }
        *evaluations += logs.len() as u64;
        let max = logs.iter().map(|(l, _)| *l).fold(f64::NEG_INFINITY, f64::max);
        let shift = if scale == f64::NEG_INFINITY || max > scale + 30.0 { max } else { scale };
        let mut qh = [0.0; K];
        let mut ql = [0.0; K];
        let (mut dh, mut dl) = (0.0, 0.0);
        for ((_, wh, wl), (l, o)) in rule.points.iter().zip(&logs) {
            let w = if *l == f64::NEG_INFINITY { 0.0 } else { (l - shift).exp() };
            dh += wh * w;
            dl += wl * w;
            for k in 0..K {
                qh[k] += wh * w * o[k];
                ql[k] += wl * w * o[k];
            }
        }
        let mut err = (dh - dl).abs();
        let mut worst = 0.0f64;
        for k in 0..K {
            worst = worst.max((qh[k] - ql[k]).abs());
        }
        err += worst;
        let region = Region { verts, volume, q: qh.map(|x| x * volume), q0: dh * volume, err: err * volume };
        (region, shift)
    };

    let mut heap: BinaryHeap<Region<K>> = BinaryHeap::new();
    let mut total = [0.0; K];
    let mut total0 = 0.0;
    let mut total_err = 0.0;

    let rescale = |heap: &mut BinaryHeap<Region<K>>, factor: f64| {
        let regions: Vec<Region<K>> = std::mem::take(heap).into_vec();
        *heap = regions
            .into_iter()
            .map(|mut r| {
                r.q = r.q.map(|x| x * factor);
                r.q0 *= factor;
                r.err *= factor;
                r
            })
            .collect();
    };

    let insert = |region: Region<K>,
                  shift: f64,
                  scale: &mut f64,
                  heap: &mut BinaryHeap<Region<K>>,
                  total: &mut [f64; K],
                  total0: &mut f64,
                  total_err: &mut f64| {
        if shift != *scale && shift != f64::NEG_INFINITY {
            // The region was evaluated on a larger scale; move everything
            // else to it.
            if *scale != f64::NEG_INFINITY {
                let factor = (*scale - shift).exp();
                rescale(heap, factor);
                *total = total.map(|x| x * factor);
                *total0 *= factor;
                *total_err *= factor;
            }
            *scale = shift;
        }
        for k in 0..K {
            total[k] += region.q[k];
        }
        *total0 += region.q0;
        *total_err += region.err;
        heap.push(region);
    };

    for (verts, volume) in roots {
        let (region, shift) = evaluate(verts.clone(), *volume, scale, &mut evaluations);
        insert(region, shift, &mut scale, &mut heap, &mut total, &mut total0, &mut total_err);
    }

    let per_split = 2 * rule.len() as u64;
    let done = |total0: f64, total_err: f64| total0 > 0.0 && total_err <= tolerance * total0;
    while !done(total0, total_err) && evaluations + per_split <= max_evaluations {
        let Some(worst) = heap.pop() else { break };
        for k in 0..K {
            total[k] -= worst.q[k];
        }
        total0 -= worst.q0;
        total_err -= worst.err;
        for child in bisect(&worst.verts) {
            let (region, shift) = evaluate(child, worst.volume / 2.0, scale, &mut evaluations);
            insert(region, shift, &mut scale, &mut heap, &mut total, &mut total0, &mut total_err);
        }
        // Guard the running sums against cancellation drift.
        if heap.len() % 4096 == 0 {
            total = [0.0; K];
            total0 = 0.0;
            total_err = 0.0;
            for r in heap.iter() {
                for k in 0..K {
                    total[k] += r.q[k];
                }
                total0 += r.q0;
                total_err += r.err;
            }
        }
    }
    let converged = done(total0, total_err);
    let ratios = std::array::from_fn(|k| total[k] / total0);
    CubatureResult {
        ln_integral: scale + total0.ln(),
        ratios,
        error: if total0 > 0.0 { total_err / total0 } else { f64::INFINITY },
        evaluations,
        regions: heap.len(),
        converged,
    }
}

// Splits a simplex through the midpoint of its longest edge.
fn bisect(verts: &[[f64; FACES]]) -> [Vec<[f64; FACES]>; 2] {
    let mut best = (0, 1, -1.0);
    for i in 0..verts.len() {
        for j in i + 1..verts.len() {
            let d: f64 = verts[i].iter().zip(&verts[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    let (i, j, _) = best;
    let mid: [f64; FACES] = std::array::from_fn(|k| 0.5 * (verts[i][k] + verts[j][k]));
    let mut a = verts.to_vec();
    let mut b = verts.to_vec();
    a[j] = mid;
    b[i] = mid;
    [a, b]
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::ln_gamma;

    fn simplex_vertices() -> Vec<[f64; FACES]> {
        (0..FACES).map(|i| std::array::from_fn(|k| if k == i { 1.0 } else { 0.0 })).collect()
    }

    // Average of prod p^e over the 5-simplex under the normalized flat measure.
    fn dirichlet_moment(e: [u32; 6]) -> f64 {
        let b: Vec<f64> = e.iter().map(|&x| f64::from(x) + 1.0).collect();
        let ln = b.iter().map(|&x| ln_gamma(x)).sum::<f64>() - ln_gamma(b.iter().sum());
        (ln + ln_gamma(6.0)).exp()
    }

    #[test]
    fn weights_sum_to_one() {
        for dim in 1..=5 {
            let rule = GmRule::new(dim);
            let s7: f64 = rule.points.iter().map(|p| p.1).sum();
            let s5: f64 = rule.points.iter().map(|p| p.2).sum();
            assert!((s7 - 1.0).abs() < 1e-12, "dim {dim}: {s7}");
            assert!((s5 - 1.0).abs() < 1e-12, "dim {dim}: {s5}");
        }
        assert_eq!(GmRule::new(5).len(), 210);
        assert_eq!(GmRule::new(4).len(), 126);
    }

    #[test]
    fn exact_for_low_degree_monomials() {
        let rule = GmRule::new(5);
        let verts = simplex_vertices();
        for e in [
            [0, 0, 0, 0, 0, 0],
            [1, 0, 0, 0, 0, 0],
            [2, 2, 0, 0, 0, 0],
            [3, 1, 1, 1, 1, 0],
            [7, 0, 0, 0, 0, 0],
            [2, 1, 1, 1, 1, 1],
            [9, 0, 0, 0, 0, 0],
            [3, 2, 1, 1, 1, 1],
        ] {
            let f = |p: &[f64; FACES]| p.iter().zip(e).map(|(x, k)| x.powi(k as i32)).product::<f64>();
            let (qh, ql) = rule.apply(&verts, f);
            let exact = dirichlet_moment(e);
            assert!(((qh - exact) / exact).abs() < 1e-11, "{e:?}: {qh} vs {exact}");
            if e.iter().sum::<u32>() <= 7 {
                assert!(((ql - exact) / exact).abs() < 1e-11, "{e:?}: {ql} vs {exact}");
            }
        }
    }

    #[test]
    fn adaptive_reaches_peaked_integral() {
        let verts = simplex_vertices();
        let e = [6.0, 2.0, 0.0, 1.0, 0.0, 3.0];
        let r = adaptive::<1, _>(
            &[(verts, 1.0)],
            |p| {
                let lw: f64 = p.iter().zip(e).map(|(x, k)| if k == 0.0 { 0.0 } else { k * x.ln() }).sum();
                (lw, [p[0]])
            },
            1e-5,
            5_000_000,
        );
        assert!(r.converged, "{} {} {}", r.error, r.evaluations, r.regions);
        let exact = dirichlet_moment([6, 2, 0, 1, 0, 3]);
        assert!((r.ln_integral - exact.ln()).abs() < 1e-5);
        let mean = dirichlet_moment([7, 2, 0, 1, 0, 3]) / exact;
        assert!((r.ratios[0] - mean).abs() < r.error);
    }

    #[test]
    fn bisection_halves_volume_consistently() {
        let verts = simplex_vertices();
        let r = adaptive::<0, _>(&[(verts, 1.0)], |_| (0.0, []), 0.0, 2000);
        assert!((r.ln_integral).abs() < 1e-12);
        assert!(r.regions > 1);
    }
}
