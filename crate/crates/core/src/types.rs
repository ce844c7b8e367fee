//! Domain types shared by every module.

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};

use crate::entropy::shannon_entropy;
use crate::error::{Error, Result};

/// Number of faces of the die.
pub const FACES: usize = 6;

/// Pip value of each face, `v = (1, ..., 6)`.
pub const FACE_VALUES: [f64; FACES] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];

/// Maximum normalization defect accepted for a constructed [`Distribution`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// A real number extended with explicit infinities.
///
/// Burg entropy, KL divergence and Lagrange multipliers can all diverge; the
/// tag forces callers to handle that case instead of propagating IEEE
/// infinities silently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
    NegInfinity,
}

impl ExtendedReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    /// Lossy conversion to `f64` for display and ordering.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedReal::Finite(x) => x,
            ExtendedReal::PosInfinity => f64::INFINITY,
            ExtendedReal::NegInfinity => f64::NEG_INFINITY,
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(x) => write!(f, "{x}"),
            ExtendedReal::PosInfinity => f.write_str("+inf"),
            ExtendedReal::NegInfinity => f.write_str("-inf"),
        }
    }
}

/// A die face, `1..=6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Face(u8);

impl Face {
    pub fn new(face: u8) -> Option<Self> {
        (1..=FACES as u8).contains(&face).then_some(Face(face))
    }

    pub fn all() -> impl Iterator<Item = Face> {
        (1..=FACES as u8).map(Face)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Zero-based position in probability and count arrays.
    pub fn index(self) -> usize {
        usize::from(self.0 - 1)
    }
}

/// A point of the probability simplex over the six faces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distribution([f64; FACES]);

impl Distribution {
    /// Validates non-negativity and normalization (within
    /// [`NORMALIZATION_TOLERANCE`]).
    pub fn new(probs: [f64; FACES]) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidDistribution(format!("entries must be finite and non-negative: {probs:?}")));
        }
        let defect = (probs.iter().sum::<f64>() - 1.0).abs();
        if defect > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("entries sum to 1 + {defect:.3e}")));
        }
        Ok(Distribution(probs))
    }

    /// Rescales non-negative weights to unit sum.
    pub fn from_weights(weights: [f64; FACES]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution(format!("weights must be finite and non-negative: {weights:?}")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("all weights are zero".into()));
        }
        Ok(Distribution(weights.map(|w| w / total)))
    }

    pub fn uniform() -> Self {
        Distribution([1.0 / FACES as f64; FACES])
    }

    /// All mass on one face.
    pub fn vertex(face: Face) -> Self {
        let mut probs = [0.0; FACES];
        probs[face.index()] = 1.0;
        Distribution(probs)
    }

    pub fn probs(&self) -> &[f64; FACES] {
        &self.0
    }

    pub fn prob(&self, face: Face) -> f64 {
        self.0[face.index()]
    }

    /// Expected pip value `v . p`.
    pub fn mean(&self) -> f64 {
        self.0.iter().zip(FACE_VALUES).map(|(p, v)| p * v).sum()
    }

    /// Relabels faces by `i -> 7 - i`.
    pub fn reversed(&self) -> Self {
        let mut probs = self.0;
        probs.reverse();
        Distribution(probs)
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.0.iter().all(|p| *p > 0.0)
    }

    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn percentages(&self) -> [f64; FACES] {
        self.0.map(|p| 100.0 * p)
    }
}

/// Occupation counts of the six faces over `N` throws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrequencyVector([u32; FACES]);

impl FrequencyVector {
    pub fn new(counts: [u32; FACES]) -> Self {
        FrequencyVector(counts)
    }

    pub fn counts(&self) -> &[u32; FACES] {
        &self.0
    }

    pub fn count(&self, face: Face) -> u32 {
        self.0[face.index()]
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Total pips `v . N`.
    pub fn pip_sum(&self) -> u64 {
        self.0.iter().enumerate().map(|(i, &n)| (i as u64 + 1) * u64::from(n)).sum()
    }

    /// Relabels faces by `i -> 7 - i`.
    pub fn reversed(&self) -> Self {
        let mut counts = self.0;
        counts.reverse();
        FrequencyVector(counts)
    }

    /// Relative frequencies `N_i / N`; `None` for the empty vector.
    pub fn frequencies(&self) -> Option<[f64; FACES]> {
        let total = self.total();
        (total > 0).then(|| self.0.map(|n| f64::from(n) / f64::from(total)))
    }
}

/// Observed average, an exact rational in `[1, 6]` pips per throw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Average(Rational64);

impl Average {
    pub fn new(value: Rational64) -> Result<Self> {
        let one = Rational64::from_integer(1);
        let six = Rational64::from_integer(6);
        if value < one || value > six {
            return Err(Error::domain("average", format!("{value} not in [1, 6]")));
        }
        Ok(Average(value))
    }

    pub fn from_ratio(numer: i64, denom: i64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::domain("average", "zero denominator"));
        }
        Average::new(Rational64::new(numer, denom))
    }

    pub fn integer(value: i64) -> Result<Self> {
        Average::new(Rational64::from_integer(value))
    }

    pub fn ratio(&self) -> Rational64 {
        self.0
    }

    pub fn value(&self) -> f64 {
        self.0.to_f64().expect("small rational")
    }

    /// Total pips `a N`, when it is an integer.
    pub fn target_sum(&self, n: u32) -> Option<u64> {
        let total = self.0 * Rational64::from_integer(i64::from(n));
        total.is_integer().then(|| total.to_integer()).and_then(|t| u64::try_from(t).ok())
    }

    /// The average of the relabelled die, `7 - a`.
    pub fn reversed(&self) -> Self {
        Average(Rational64::from_integer(7) - self.0)
    }

    /// `a = 1` or `a = 6`: the constraint pins the distribution to a vertex.
    pub fn vertex_face(&self) -> Option<Face> {
        if self.0 == Rational64::from_integer(1) {
            Face::new(1)
        } else if self.0 == Rational64::from_integer(6) {
            Face::new(6)
        } else {
            None
        }
    }
}

impl fmt::Display for Average {
    /// Terminating decimals are printed as decimals (`7/2` as `3.5`), other
    /// values as `p/q`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.0;
        if r.is_integer() {
            return write!(f, "{}", r.to_integer());
        }
        let mut denom = *r.denom();
        let mut digits = 0usize;
        while denom % 2 == 0 || denom % 5 == 0 {
            if denom % 2 == 0 {
                denom /= 2;
            }
            if denom % 5 == 0 {
                denom /= 5;
            }
            digits += 1;
        }
        if denom == 1 && digits <= 12 {
            let text = format!("{:.*}", digits, self.value());
            let text = text.trim_end_matches('0').trim_end_matches('.');
            f.write_str(text)
        } else {
            write!(f, "{}/{}", r.numer(), r.denom())
        }
    }
}

impl FromStr for Average {
    type Err = Error;

    /// Accepts `"5"`, `"7/2"` and `"3.5"`; decimals are converted exactly.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::domain("average", format!("cannot parse {s:?}"));
        if let Some((n, d)) = s.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| bad())?;
            let d: i64 = d.trim().parse().map_err(|_| bad())?;
            if d <= 0 {
                return Err(bad());
            }
            return Average::from_ratio(n, d);
        }
        if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || frac.len() > 12 || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let int: i64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
            if int < 0 {
                return Err(bad());
            }
            let scale = 10i64.pow(frac.len() as u32);
            let frac: i64 = frac.parse().map_err(|_| bad())?;
            return Average::from_ratio(int * scale + frac, scale);
        }
        Average::integer(s.parse().map_err(|_| bad())?)
    }
}

/// Which exchangeable model the inference uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec {
    /// Independent, identically uniform throws.
    FairThrow,
    /// Dirichlet density with total pseudo-count `k` per face (or `k m_i` with
    /// a base distribution `m`).
    Johnson { k: f64, base: Option<Distribution> },
    /// Density proportional to the multiplicity factor `L! / prod (L p_i)!`,
    /// optionally tilted by `prod m_i^(L p_i)`.
    Multiplicity { l: f64, base: Option<Distribution> },
}

impl ModelSpec {
    pub fn johnson(k: f64) -> Result<Self> {
        ModelSpec::johnson_with_base(k, None)
    }

    pub fn johnson_with_base(k: f64, base: Option<Distribution>) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::domain("Johnson parameter K", format!("{k} must be > 0")));
        }
        check_base(base)?;
        Ok(ModelSpec::Johnson { k, base })
    }

    pub fn multiplicity(l: f64) -> Result<Self> {
        ModelSpec::multiplicity_with_base(l, None)
    }

    pub fn multiplicity_with_base(l: f64, base: Option<Distribution>) -> Result<Self> {
        if !(l.is_finite() && l >= 1.0) {
            return Err(Error::domain("multiplicity parameter L", format!("{l} must be >= 1")));
        }
        check_base(base)?;
        Ok(ModelSpec::Multiplicity { l, base })
    }
}

pub(crate) fn check_base(base: Option<Distribution>) -> Result<()> {
    match base {
        Some(m) if !m.is_strictly_positive() => {
            Err(Error::domain("base distribution m", format!("all entries must be > 0: {:?}", m.probs())))
        }
        _ => Ok(()),
    }
}

/// The throw whose outcome is asked about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Throw {
    /// One of the `N` throws that produced the average.
    Old,
    /// A further throw, exchangeable with the others.
    New,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Exact(u32),
    LargeN,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Query {
    pub regime: Regime,
    pub average: Average,
    pub throw: Throw,
    pub model: ModelSpec,
}

/// How a [`PosteriorResult`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    ClosedForm,
    BruteForce,
    MonteCarlo,
    DeterministicQuad,
    AnalyticLimit,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed-form",
            Method::BruteForce => "brute-force",
            Method::MonteCarlo => "monte-carlo",
            Method::DeterministicQuad => "deterministic-quadrature",
            Method::AnalyticLimit => "analytic-limit",
        }
    }

    pub fn is_numerical(self) -> bool {
        matches!(self, Method::MonteCarlo | Method::DeterministicQuad)
    }
}

/// A plausibility distribution for one throw, with its entropy and
/// provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorResult {
    pub distribution: Distribution,
    pub entropy_nats: f64,
    pub method: Method,
    /// Per-face standard error of a Monte Carlo estimate.
    pub mc_stderr: Option<[f64; FACES]>,
    /// Per-face error indicator of a deterministic quadrature.
    pub quad_error: Option<f64>,
    pub evaluations: u64,
}

impl PosteriorResult {
    pub fn new(distribution: Distribution, method: Method) -> Self {
        PosteriorResult {
            entropy_nats: shannon_entropy(&distribution),
            distribution,
            method,
            mc_stderr: None,
            quad_error: None,
            evaluations: 0,
        }
    }

    /// Builds a result from raw probabilities, rejecting normalization
    /// defects beyond [`NORMALIZATION_TOLERANCE`].
    pub fn from_probs(probs: [f64; FACES], method: Method) -> Result<Self> {
        Ok(PosteriorResult::new(Distribution::new(probs)?, method))
    }

    pub fn with_stderr(mut self, stderr: [f64; FACES]) -> Self {
        self.mc_stderr = Some(stderr);
        self
    }

    pub fn with_quad_error(mut self, error: f64) -> Self {
        self.quad_error = Some(error);
        self
    }

    pub fn with_evaluations(mut self, evaluations: u64) -> Self {
        self.evaluations = evaluations;
        self
    }

    /// Largest per-face uncertainty reported by the producing method.
    pub fn uncertainty(&self) -> f64 {
        let mc = self.mc_stderr.map(|s| s.iter().copied().fold(0.0, f64::max)).unwrap_or(0.0);
        mc.max(self.quad_error.unwrap_or(0.0))
    }
}

/// Exact helper used when building vertices of constraint polytopes.
pub(crate) fn rational_to_f64(r: Rational64) -> f64 {
    if r.is_zero() {
        0.0
    } else {
        r.to_f64().expect("small rational")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_parses_fractions_and_decimals() {
        let a: Average = "7/2".parse().unwrap();
        let b: Average = "3.5".parse().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "3.5");
        assert_eq!("5".parse::<Average>().unwrap().to_string(), "5");
        assert_eq!("10/3".parse::<Average>().unwrap().to_string(), "10/3");
        assert!("7".parse::<Average>().is_err());
        assert!("0.5".parse::<Average>().is_err());
        assert!("1/0".parse::<Average>().is_err());
        assert!("x".parse::<Average>().is_err());
    }

    #[test]
    fn target_sum_is_exact() {
        let a: Average = "7/2".parse().unwrap();
        assert_eq!(a.target_sum(1), None);
        assert_eq!(a.target_sum(2), Some(7));
        assert_eq!(a.target_sum(4), Some(14));
        assert_eq!(Average::integer(5).unwrap().target_sum(3), Some(15));
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new([0.5, 0.5, 0.0, 0.0, 0.0, 0.0]).is_ok());
        assert!(Distribution::new([0.5, 0.5, 1e-9, 0.0, 0.0, 0.0]).is_err());
        assert!(Distribution::new([1.5, -0.5, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(Distribution::from_weights([0.0; 6]).is_err());
        let d = Distribution::from_weights([1.0, 1.0, 2.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(d.probs()[2], 0.5);
        assert_eq!(d.reversed().probs()[3], 0.5);
    }

    #[test]
    fn posterior_result_rejects_unnormalized() {
        assert!(PosteriorResult::from_probs([0.2; 6], Method::ClosedForm).is_err());
        let r = PosteriorResult::from_probs([1.0 / 6.0; 6], Method::ClosedForm).unwrap();
        assert!((r.entropy_nats - 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn model_parameters_are_checked() {
        assert!(ModelSpec::johnson(0.0).is_err());
        assert!(ModelSpec::johnson(0.5).is_ok());
        assert!(ModelSpec::multiplicity(0.9).is_err());
        let m = Distribution::new([0.0, 0.2, 0.2, 0.2, 0.2, 0.2]).unwrap();
        assert!(ModelSpec::multiplicity_with_base(5.0, Some(m)).is_err());
    }
}
