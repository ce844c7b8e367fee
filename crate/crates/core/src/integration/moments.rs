//! Running sums of importance weights and weighted observables, kept
//! relative to a log-scale so that weights spanning hundreds of orders of
//! magnitude neither overflow nor underflow.

// Rescale once a weight exceeds the current scale by this many nats.
const HEADROOM: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Moments<const K: usize> {
    /// Samples drawn, including those with zero weight.
    pub n: u64,
    log_scale: f64,
    sw: f64,
    sww: f64,
    swo: [f64; K],
    swwo: [f64; K],
    swwoo: [f64; K],
}

impl<const K: usize> Default for Moments<K> {
    fn default() -> Self {
        Moments {
            n: 0,
            log_scale: f64::NEG_INFINITY,
            sw: 0.0,
            sww: 0.0,
            swo: [0.0; K],
            swwo: [0.0; K],
            swwoo: [0.0; K],
        }
    }
}

impl<const K: usize> Moments<K> {
    pub fn new() -> Self {
        Self::default()
    }

    fn rescale(&mut self, log_scale: f64) {
        if self.log_scale == f64::NEG_INFINITY {
            self.log_scale = log_scale;
            return;
        }
        let r = (self.log_scale - log_scale).exp();
        let r2 = r * r;
        self.sw *= r;
        self.sww *= r2;
        for k in 0..K {
            self.swo[k] *= r;
            self.swwo[k] *= r2;
            self.swwoo[k] *= r2;
        }
        self.log_scale = log_scale;
    }

    /// Adds one sample with weight `exp(log_weight)`.
    pub fn push(&mut self, log_weight: f64, obs: &[f64; K]) {
        self.n += 1;
        if log_weight == f64::NEG_INFINITY {
            return;
        }
        debug_assert!(!log_weight.is_nan());
        if log_weight > self.log_scale + HEADROOM {
            self.rescale(log_weight);
        }
        let w = (log_weight - self.log_scale).exp();
        let ww = w * w;
        self.sw += w;
        self.sww += ww;
        for k in 0..K {
            self.swo[k] += w * obs[k];
            self.swwo[k] += ww * obs[k];
            self.swwoo[k] += ww * obs[k] * obs[k];
        }
    }

    /// Folds `other` in; addition order is the caller's, so merging chunks
    /// in a fixed order gives bit-identical sums.
    pub fn merge(&mut self, other: &Moments<K>) {
        self.n += other.n;
        if other.log_scale == f64::NEG_INFINITY {
            return;
        }
        let mut other = other.clone();
        if other.log_scale > self.log_scale {
            self.rescale(other.log_scale);
        } else {
            other.rescale(self.log_scale);
        }
        self.sw += other.sw;
        self.sww += other.sww;
        for k in 0..K {
            self.swo[k] += other.swo[k];
            self.swwo[k] += other.swwo[k];
            self.swwoo[k] += other.swwoo[k];
        }
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// `ln` of the sample mean of the weights.
    pub fn ln_mean_weight(&self) -> f64 {
        if self.n == 0 || self.sw <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.log_scale + (self.sw / self.n as f64).ln()
    }

    /// Standard error of the mean weight relative to the mean weight.
    pub fn relative_stderr(&self) -> f64 {
        if self.n < 2 || self.sw <= 0.0 {
            return f64::INFINITY;
        }
        let n = self.n as f64;
        let mean = self.sw / n;
        let var = (self.sww / n - mean * mean).max(0.0) / (n - 1.0);
        var.sqrt() / mean
    }

    /// Self-normalized estimates `sum w o_k / sum w`.
    pub fn ratios(&self) -> [f64; K] {
        std::array::from_fn(|k| if self.sw > 0.0 { self.swo[k] / self.sw } else { f64::NAN })
    }
}

/// Combines independent strata given as `(ln factor, moments)`, each
/// contributing `factor * (sample mean)` to numerator and denominator.
///
/// Combined ratios, their delta-method standard errors, and `ln` of the
/// total denominator with its relative standard error.
pub fn combine_strata<const K: usize>(strata: &[(f64, &Moments<K>)]) -> ([f64; K], [f64; K], f64, f64) {
    // Common scale: the largest stratum contribution.
    let scale = strata.iter().map(|(ln_factor, m)| ln_factor + m.ln_mean_weight()).fold(f64::NEG_INFINITY, f64::max);
    if scale == f64::NEG_INFINITY {
        return ([f64::NAN; K], [f64::INFINITY; K], f64::NEG_INFINITY, f64::INFINITY);
    }
    let mut den = 0.0;
    let mut num = [0.0; K];
    for (ln_factor, m) in strata {
        if m.n == 0 || m.sw <= 0.0 {
            continue;
        }
        let c = (ln_factor + m.log_scale - scale).exp() / m.n as f64;
        den += c * m.sw;
        for k in 0..K {
            num[k] += c * m.swo[k];
        }
    }
    let ratios: [f64; K] = std::array::from_fn(|k| num[k] / den);
    let mut var = [0.0; K];
    let mut den_var = 0.0;
    for (ln_factor, m) in strata {
        if m.n < 2 || m.sw <= 0.0 {
            continue;
        }
        let n = m.n as f64;
        let c = (ln_factor + m.log_scale - scale).exp();
        let mean_w = m.sw / n;
        den_var += c * c * (m.sww / n - mean_w * mean_w).max(0.0) / (n - 1.0);
        for k in 0..K {
            let r = ratios[k];
            let mean = (m.swo[k] - r * m.sw) / n;
            let second = (m.swwoo[k] - 2.0 * r * m.swwo[k] + r * r * m.sww) / n;
            var[k] += c * c * (second - mean * mean).max(0.0) / (n - 1.0);
        }
    }
    let stderr = std::array::from_fn(|k| var[k].sqrt() / den);
    (ratios, stderr, scale + den.ln(), den_var.sqrt() / den)
}
