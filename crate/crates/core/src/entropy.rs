//! Shannon entropy, Burg entropy and Kullback-Leibler divergence, in nats.

use crate::types::{Distribution, ExtendedReal};

/// `-sum f_i ln f_i` with `0 ln 0 = 0`.
pub fn shannon_entropy(f: &Distribution) -> f64 {
    let h: f64 = f.probs().iter().filter(|p| **p > 0.0).map(|p| -p * p.ln()).sum();
    h.max(0.0)
}

/// `sum ln f_i`; `-inf` as soon as one entry vanishes.
pub fn burg_entropy(f: &Distribution) -> ExtendedReal {
    if f.probs().iter().any(|p| *p == 0.0) {
        return ExtendedReal::NegInfinity;
    }
    ExtendedReal::Finite(f.probs().iter().map(|p| p.ln()).sum())
}

/// `D(m, f) = sum m_i ln(m_i / f_i)` with `0 ln(0/x) = 0`; `+inf` when some
/// `f_i = 0 < m_i`.
pub fn kl_divergence(m: &Distribution, f: &Distribution) -> ExtendedReal {
    let mut d = 0.0;
    for (&mi, &fi) in m.probs().iter().zip(f.probs()) {
        if mi == 0.0 {
            continue;
        }
        if fi == 0.0 {
            return ExtendedReal::PosInfinity;
        }
        d += mi * (mi / fi).ln();
    }
    ExtendedReal::Finite(d.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Face;

    #[test]
    fn shannon_extremes() {
        assert!((shannon_entropy(&Distribution::uniform()) - 6f64.ln()).abs() < 1e-15);
        assert_eq!(shannon_entropy(&Distribution::vertex(Face::new(6).unwrap())), 0.0);
        let third = 1.0 / 3.0;
        let f = Distribution::new([0.0, 0.0, 0.0, third, third, third]).unwrap();
        assert!((shannon_entropy(&f) - 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn burg_values() {
        let b = burg_entropy(&Distribution::uniform()).finite().unwrap();
        assert!((b - 6.0 * (1.0f64 / 6.0).ln()).abs() < 1e-12);
        assert!((b + 10.750_556_815_368_33).abs() < 1e-9);
        let f = Distribution::new([0.0, 0.2, 0.2, 0.2, 0.2, 0.2]).unwrap();
        assert_eq!(burg_entropy(&f), ExtendedReal::NegInfinity);
    }

    #[test]
    fn kl_values() {
        let m = Distribution::new([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let f = Distribution::new([0.5, 0.5, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let d = kl_divergence(&m, &f).finite().unwrap();
        assert!((d - 2f64.ln()).abs() < 1e-15);
        assert_eq!(kl_divergence(&f, &m), ExtendedReal::PosInfinity);
        assert_eq!(kl_divergence(&f, &f), ExtendedReal::Finite(0.0));
    }
}
