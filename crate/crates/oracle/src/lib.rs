//! Reference computations in exact arithmetic: ordered-sequence counts for
//! the fair-throw model and the Johnson posterior with integer parameter.
//! Nothing here shares code with the `exdice` crate.

use num_bigint::{BigInt, BigUint};
use num_rational::{BigRational, Rational64};
use num_traits::{One, ToPrimitive, Zero};

pub const FACES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Throw {
    Old,
    New,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    /// No outcome sequence has the requested average.
    Contradictory,
    TooLarge(&'static str),
}

pub type ExactDistribution = [BigRational; FACES];

/// Ordered outcome sequences of `n` throws, tallied by pip sum and by the
/// face shown on the first throw.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceCensus {
    n: u32,
    by_sum: Vec<BigUint>,
    first_face: Vec<[BigUint; FACES]>,
}

fn sum_counts(n: u32) -> Vec<BigUint> {
    let mut ways = vec![BigUint::one()];
    for _ in 0..n {
        let mut next = vec![BigUint::zero(); ways.len() + FACES];
        for (s, c) in ways.iter().enumerate() {
            for face in 1..=FACES {
                next[s + face] += c;
            }
        }
        ways = next;
    }
    ways
}

impl SequenceCensus {
    /// Builds the census by extending sequences one throw at a time.
    pub fn new(n: u32) -> Self {
        assert!(n >= 1);
        let by_sum = sum_counts(n);
        let rest = sum_counts(n - 1);
        let first_face = (0..by_sum.len())
            .map(|s| {
                std::array::from_fn(|f| {
                    let face = f + 1;
                    if s >= face && s - face < rest.len() {
                        rest[s - face].clone()
                    } else {
                        BigUint::zero()
                    }
                })
            })
            .collect();
        SequenceCensus { n, by_sum, first_face }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn sequences_with_sum(&self, s: u64) -> BigUint {
        self.by_sum.get(s as usize).cloned().unwrap_or_default()
    }

    /// Sequences with sum `s` whose first throw shows `face` (1-based).
    pub fn first_face_count(&self, s: u64, face: usize) -> BigUint {
        self.first_face.get(s as usize).map(|row| row[face - 1].clone()).unwrap_or_default()
    }

    pub fn total(&self) -> BigUint {
        self.by_sum.iter().sum()
    }
}

fn target_sum(n: u32, a: Rational64) -> Option<u64> {
    let s = a * Rational64::from_integer(i64::from(n));
    s.is_integer().then(|| s.to_integer()).and_then(|s| u64::try_from(s).ok())
}

fn ratio(num: &BigUint, den: &BigUint) -> BigRational {
    BigRational::new(BigInt::from(num.clone()), BigInt::from(den.clone()))
}

fn uniform() -> ExactDistribution {
    std::array::from_fn(|_| BigRational::new(BigInt::one(), BigInt::from(FACES)))
}

/// Fair-throw posterior from the census: for old throws, the share of
/// sequences with the observed sum that start with each face.
pub fn brute_force_fair(n: u32, a: Rational64, throw: Throw) -> Result<ExactDistribution, OracleError> {
    if n > 8 {
        return Err(OracleError::TooLarge("brute force is limited to N <= 8"));
    }
    let census = SequenceCensus::new(n);
    let s = target_sum(n, a).ok_or(OracleError::Contradictory)?;
    let total = census.sequences_with_sum(s);
    if total.is_zero() {
        return Err(OracleError::Contradictory);
    }
    Ok(match throw {
        Throw::New => uniform(),
        Throw::Old => std::array::from_fn(|f| ratio(&census.first_face_count(s, f + 1), &total)),
    })
}

/// The same posterior from a literal loop over all `6^n` sequences.
pub fn brute_force_fair_literal(n: u32, a: Rational64, throw: Throw) -> Result<ExactDistribution, OracleError> {
    if n > 6 {
        return Err(OracleError::TooLarge("the literal loop is limited to N <= 6"));
    }
    let s = target_sum(n, a).ok_or(OracleError::Contradictory)?;
    let mut counts = [0u64; FACES];
    let mut matches = 0u64;
    let total = (FACES as u64).pow(n);
    for code in 0..total {
        let mut rest = code;
        let mut sum = 0u64;
        let mut first = 0usize;
        for t in 0..n {
            let face = (rest % FACES as u64) as usize;
            rest /= FACES as u64;
            if t == 0 {
                first = face;
            }
            sum += face as u64 + 1;
        }
        if sum == s {
            matches += 1;
            counts[first] += 1;
        }
    }
    if matches == 0 {
        return Err(OracleError::Contradictory);
    }
    Ok(match throw {
        Throw::New => uniform(),
        Throw::Old => counts.map(|c| BigRational::new(BigInt::from(c), BigInt::from(matches))),
    })
}

/// Frequency vectors of `n` throws with pip sum `s`, by six nested loops.
pub fn frequency_vectors(n: u32, s: u64) -> Vec<[u32; FACES]> {
    let mut out = Vec::new();
    for a in 0..=n {
        for b in 0..=n - a {
            for c in 0..=n - a - b {
                for d in 0..=n - a - b - c {
                    for e in 0..=n - a - b - c - d {
                        let f = n - a - b - c - d - e;
                        let v = [a, b, c, d, e, f];
                        let sum: u64 = v.iter().enumerate().map(|(i, x)| (i as u64 + 1) * u64::from(*x)).sum();
                        if sum == s {
                            out.push(v);
                        }
                    }
                }
            }
        }
    }
    out
}

fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * k)
}

/// Johnson posterior with integer `k`, where `(N_l + k - 1)! / N_l!` is an
/// integer and every step stays exact.
pub fn exact_johnson(n: u32, a: Rational64, k: u32, throw: Throw) -> Result<ExactDistribution, OracleError> {
    if n > 12 || k == 0 {
        return Err(OracleError::TooLarge("exact Johnson needs N <= 12 and K >= 1"));
    }
    let s = target_sum(n, a).ok_or(OracleError::Contradictory)?;
    let members = frequency_vectors(n, s);
    if members.is_empty() {
        return Err(OracleError::Contradictory);
    }
    let k64 = u64::from(k);
    let mut den = BigRational::zero();
    let mut num: ExactDistribution = std::array::from_fn(|_| BigRational::zero());
    for v in &members {
        let w: BigUint = v.iter().map(|&c| factorial(u64::from(c) + k64 - 1) / factorial(u64::from(c))).product();
        let w = BigRational::from_integer(BigInt::from(w));
        for i in 0..FACES {
            let share = match throw {
                Throw::Old => BigRational::new(BigInt::from(v[i]), BigInt::from(n)),
                Throw::New => BigRational::new(
                    BigInt::from(u64::from(v[i]) + k64),
                    BigInt::from(u64::from(n) + FACES as u64 * k64),
                ),
            };
            num[i] += &w * share;
        }
        den += w;
    }
    Ok(num.map(|x| x / &den))
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().expect("finite rational")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn census_totals() {
        for n in 1..=8 {
            let c = SequenceCensus::new(n);
            assert_eq!(c.total(), BigUint::from(6u32).pow(n));
        }
        let c = SequenceCensus::new(4);
        assert_eq!(c.sequences_with_sum(14), BigUint::from(146u32));
        assert_eq!(c.first_face_count(14, 1), BigUint::from(21u32));
        assert_eq!(c.first_face_count(14, 3), BigUint::from(27u32));
    }

    #[test]
    fn fair_anchors() {
        let p = brute_force_fair(4, Rational64::new(7, 2), Throw::Old).unwrap();
        assert_eq!(p[0], r(21, 146));
        assert_eq!(p[2], r(27, 146));
        let p = brute_force_fair(2, Rational64::from_integer(5), Throw::Old).unwrap();
        assert_eq!(p, [r(0, 1), r(0, 1), r(0, 1), r(1, 3), r(1, 3), r(1, 3)]);
        let p = brute_force_fair(1, Rational64::from_integer(6), Throw::Old).unwrap();
        assert_eq!(p[5], r(1, 1));
        assert_eq!(brute_force_fair(1, Rational64::new(7, 2), Throw::Old), Err(OracleError::Contradictory));
    }

    #[test]
    fn literal_loop_agrees_with_census() {
        for n in 1..=5 {
            for a in [
                Rational64::from_integer(6),
                Rational64::from_integer(5),
                Rational64::new(7, 2),
                Rational64::new(13, 5),
            ] {
                let x = brute_force_fair(n, a, Throw::Old);
                let y = brute_force_fair_literal(n, a, Throw::Old);
                assert_eq!(x, y, "n = {n}, a = {a}");
            }
        }
    }

    #[test]
    fn johnson_anchors() {
        let p = exact_johnson(2, Rational64::from_integer(5), 1, Throw::Old).unwrap();
        assert_eq!(p, [r(0, 1), r(0, 1), r(0, 1), r(1, 4), r(1, 2), r(1, 4)]);
        let p = exact_johnson(1, Rational64::from_integer(5), 1, Throw::New).unwrap();
        assert_eq!(p, [r(1, 7), r(1, 7), r(1, 7), r(1, 7), r(2, 7), r(1, 7)]);
        let p = exact_johnson(6, Rational64::from_integer(6), 5, Throw::New).unwrap();
        assert_eq!(p, [r(5, 36), r(5, 36), r(5, 36), r(5, 36), r(5, 36), r(11, 36)]);
    }

    #[test]
    fn frequency_vectors_match_sequence_counts() {
        // Summing multinomial coefficients over the vectors recovers the census.
        for n in 1..=6u32 {
            let census = SequenceCensus::new(n);
            for s in u64::from(n)..=6 * u64::from(n) {
                let total: BigUint = frequency_vectors(n, s)
                    .iter()
                    .map(|v| v.iter().fold(factorial(u64::from(n)), |acc, &c| acc / factorial(u64::from(c))))
                    .sum();
                assert_eq!(total, census.sequences_with_sum(s));
            }
        }
    }
}
