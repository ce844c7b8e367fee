//! Randomized property suites. Each suite runs a proptest runner for a
//! given number of cases and reports the first counterexample.

use exdice::combinatorics::multinomial;
use exdice::integration::rng::stream_rng;
use exdice::{
    build_constraint_polytope, burg_entropy, enumerate_constrained_frequencies, fair_posterior,
    generalized_johnson_posterior, generalized_multiplicity_posterior, integrate_polytope_ratio,
    integrate_simplex_ratio, johnson_large_n, johnson_posterior, kl_divergence, log_multinomial, maxent_burg,
    maxent_shannon, min_kl, min_reverse_kl, multiplicity_large_n, multiplicity_posterior, sample_simplex_uniform,
    shannon_entropy, Average, Budget, Distribution, FrequencyVector, Integrator, PosteriorResult, Throw,
    WeightedFrequencySum, FACES,
};
use exdice_oracle::SequenceCensus;
use num_bigint::BigUint;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

pub type Suite = (&'static str, fn(u32) -> Result<(), String>);

pub fn suites() -> Vec<Suite> {
    vec![
        ("partition identity", partition_identity),
        ("multiplicity-factor sandwich", multiplicity_factor_sandwich),
        ("face-reversal symmetry", face_reversal),
        ("maxent optimality certificates", maxent_optimality),
        ("normalization-offset invariance", offset_invariance),
        ("seed determinism", seed_determinism),
    ]
}

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new(config);
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn avg(n: u32, s: u64) -> Average {
    Average::from_ratio(s as i64, i64::from(n)).expect("average within [1, 6]")
}

/// `(N, pip sum)` with a nonempty constraint set.
fn feasible(max_n: u32) -> impl Strategy<Value = (u32, u64)> {
    (1..=max_n).prop_flat_map(|n| (Just(n), u64::from(n)..=6 * u64::from(n)))
}

fn distribution() -> impl Strategy<Value = Distribution> {
    prop::array::uniform6(0.05f64..1.0).prop_map(|w| Distribution::from_weights(w).unwrap())
}

fn throw() -> impl Strategy<Value = Throw> {
    prop_oneof![Just(Throw::Old), Just(Throw::New)]
}

pub fn partition_identity(cases: u32) -> Result<(), String> {
    run(cases, feasible(8), |(n, s)| {
        let set = enumerate_constrained_frequencies(n, avg(n, s));
        let exact: BigUint = set.members().iter().map(multinomial).sum();
        let census = SequenceCensus::new(n);
        prop_assert_eq!(&exact, &census.sequences_with_sum(s));
        let float: f64 = set.members().iter().map(|m| log_multinomial(m).exp()).sum();
        let want: f64 = exact.to_string().parse().unwrap();
        prop_assert!((float - want).abs() <= 1e-12 * want);
        let all: BigUint = (u64::from(n)..=6 * u64::from(n)).map(|t| exdice::count_sequences(n, t)).sum();
        prop_assert_eq!(all, BigUint::from(6u32).pow(n));
        Ok(())
    })
}

pub fn multiplicity_factor_sandwich(cases: u32) -> Result<(), String> {
    let counts = prop::array::uniform6(0u32..40).prop_filter("at least one throw", |c| c.iter().sum::<u32>() > 0);
    run(cases, counts, |c| {
        let nv = FrequencyVector::new(c);
        let n = f64::from(nv.total());
        let h: f64 = -c
            .iter()
            .filter(|&&k| k > 0)
            .map(|&k| {
                let r = f64::from(k) / n;
                r * r.ln()
            })
            .sum::<f64>();
        let lm = log_multinomial(&nv);
        let upper = n * h;
        let lower = upper - FACES as f64 * (n + 1.0).ln();
        prop_assert!(lm <= upper + 1e-9, "{lm} > {upper}");
        prop_assert!(lm >= lower - 1e-9, "{lm} < {lower}");
        Ok(())
    })
}

#[derive(Debug, Clone)]
enum Op {
    Fair,
    Johnson(f64),
    GeneralizedJohnson(f64, Distribution),
    Multiplicity(f64),
    GeneralizedMultiplicity(f64, Distribution),
    JohnsonLarge(f64),
    MultiplicityLarge(f64),
    Shannon,
    Burg,
    MinKl(Distribution),
    MinReverseKl(Distribution),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        Just(Op::Fair),
        (0.1f64..100.0).prop_map(Op::Johnson),
        (0.1f64..100.0, distribution()).prop_map(|(k, m)| Op::GeneralizedJohnson(k, m)),
        (1.0f64..60.0).prop_map(Op::Multiplicity),
        (1.0f64..20.0, distribution()).prop_map(|(l, m)| Op::GeneralizedMultiplicity(l, m)),
        (0.5f64..60.0).prop_map(Op::JohnsonLarge),
        (0.5f64..60.0).prop_map(Op::MultiplicityLarge),
        Just(Op::Shannon),
        Just(Op::Burg),
        distribution().prop_map(Op::MinKl),
        distribution().prop_map(Op::MinReverseKl),
    ]
}

fn reversal_budget() -> Budget {
    Budget { max_evaluations: 400_000, tolerance: 1e-4 }
}

fn apply(op: &Op, n: u32, a: Average, throw: Throw, reversed: bool) -> exdice::Result<PosteriorResult> {
    let flip = |m: &Distribution| if reversed { m.reversed() } else { *m };
    let det = Integrator::Deterministic;
    let b = &reversal_budget();
    let maxent = |r: exdice::Result<exdice::MaxentSolution>| {
        r.map(|s| PosteriorResult::new(s.distribution, exdice::Method::ClosedForm))
    };
    match op {
        Op::Fair => fair_posterior(n, a, throw),
        Op::Johnson(k) => johnson_posterior(n, a, *k, throw),
        Op::GeneralizedJohnson(k, m) => generalized_johnson_posterior(n, a, *k, flip(m), throw),
        Op::Multiplicity(l) => multiplicity_posterior(n, a, *l, throw, det, b),
        Op::GeneralizedMultiplicity(l, m) => generalized_multiplicity_posterior(n, a, *l, flip(m), throw, det, b),
        Op::JohnsonLarge(k) => johnson_large_n(a, *k, det, b),
        Op::MultiplicityLarge(l) => multiplicity_large_n(a, *l, det, b),
        Op::Shannon => maxent(maxent_shannon(a)),
        Op::Burg => maxent(maxent_burg(a)),
        Op::MinKl(m) => maxent(min_kl(a, &flip(m))),
        Op::MinReverseKl(m) => maxent(min_reverse_kl(a, &flip(m))),
    }
}

// Whether a quadrature meets its target is decided on a noisy error
// indicator, so a run that misses it is compared through its estimate,
// within the error it reports.
fn settle(r: exdice::Result<PosteriorResult>) -> (exdice::Result<PosteriorResult>, f64) {
    match r {
        Err(exdice::Error::BudgetExhausted { partial: exdice::Partial::Posterior(p), achieved, .. }) => {
            (Ok(*p), achieved)
        }
        other => (other, 0.0),
    }
}

pub fn face_reversal(cases: u32) -> Result<(), String> {
    let strategy = (feasible(6), op(), throw()).prop_filter("finite-N integrals stay small", |((n, _), op, _)| {
        !matches!(op, Op::Multiplicity(_) | Op::GeneralizedMultiplicity(..)) || *n <= 3
    });
    run(cases, strategy, |((n, s), op, throw)| {
        let a = avg(n, s);
        let (x, slack_x) = settle(apply(&op, n, a, throw, false));
        let (y, slack_y) = settle(apply(&op, n, a.reversed(), throw, true));
        match (x, y) {
            (Ok(x), Ok(y)) => {
                let tol = if x.method.is_numerical() { 1e-6 } else { 1e-9 } + slack_x + slack_y;
                let dev = x.distribution.max_abs_diff(&y.distribution.reversed());
                prop_assert!(dev < tol, "{op:?} N={n} a={a}: deviation {dev}");
            }
            (Err(x), Err(y)) => prop_assert_eq!(std::mem::discriminant(&x), std::mem::discriminant(&y)),
            (x, y) => prop_assert!(false, "{op:?} N={n} a={a}: {x:?} vs {y:?}"),
        }
        Ok(())
    })
}

/// A direction that keeps normalization and the mean.
fn null_direction(raw: [f64; FACES]) -> Option<[f64; FACES]> {
    let ones = [1.0; FACES];
    let faces: [f64; FACES] = std::array::from_fn(|i| (i + 1) as f64 - 3.5);
    let dot = |u: &[f64; FACES], v: &[f64; FACES]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let mut v = raw;
    for basis in [ones, faces] {
        let c = dot(&v, &basis) / dot(&basis, &basis);
        v.iter_mut().zip(basis).for_each(|(x, b)| *x -= c * b);
    }
    let norm = dot(&v, &v).sqrt();
    (norm > 1e-6).then(|| v.map(|x| x / norm))
}

/// Moves `f` along `v` by a fraction of the largest step keeping it
/// positive.
fn perturb(f: &Distribution, v: &[f64; FACES], fraction: f64) -> Option<Distribution> {
    let p = f.probs();
    let max_step = p.iter().zip(v).filter(|(_, d)| **d < 0.0).map(|(x, d)| -x / d).fold(f64::INFINITY, f64::min);
    if !max_step.is_finite() || max_step <= 0.0 {
        return None;
    }
    let t = fraction * max_step;
    let q: [f64; FACES] = std::array::from_fn(|i| p[i] + t * v[i]);
    Distribution::new(q).ok()
}

pub fn maxent_optimality(cases: u32) -> Result<(), String> {
    // Interior averages p/q with q up to 12.
    let average = (2u32..=12).prop_flat_map(|q| (Just(q), (q + 1)..(6 * q)));
    let perturbations = prop::collection::vec((prop::array::uniform6(-1.0f64..1.0), 0.001f64..0.999), 200);
    run(cases, (average, distribution(), perturbations), |((q, p), m, perturbations)| {
        let a = Average::from_ratio(i64::from(p), i64::from(q)).unwrap();
        let shannon = maxent_shannon(a).unwrap().distribution;
        let burg = maxent_burg(a).unwrap().distribution;
        let kl = min_kl(a, &m).unwrap().distribution;
        let rkl = min_reverse_kl(a, &m).unwrap().distribution;
        let burg_of = |f: &Distribution| burg_entropy(f).finite().unwrap_or(f64::NEG_INFINITY);
        let kl_of = |f: &Distribution| kl_divergence(f, &m).finite().unwrap_or(f64::INFINITY);
        let rkl_of = |f: &Distribution| kl_divergence(&m, f).finite().unwrap_or(f64::INFINITY);
        for (raw, fraction) in perturbations {
            let Some(v) = null_direction(raw) else { continue };
            let slack = 1e-12;
            if let Some(g) = perturb(&shannon, &v, fraction) {
                prop_assert!(shannon_entropy(&g) <= shannon_entropy(&shannon) + slack);
            }
            if let Some(g) = perturb(&burg, &v, fraction) {
                prop_assert!(burg_of(&g) <= burg_of(&burg) + slack);
            }
            if let Some(g) = perturb(&kl, &v, fraction) {
                prop_assert!(kl_of(&g) >= kl_of(&kl) - slack);
            }
            if let Some(g) = perturb(&rkl, &v, fraction) {
                prop_assert!(rkl_of(&g) >= rkl_of(&rkl) - slack);
            }
        }
        Ok(())
    })
}

fn close(x: &[f64], y: &[f64], rel: f64) -> bool {
    x.iter().zip(y).all(|(a, b)| (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300))
}

pub fn offset_invariance(cases: u32) -> Result<(), String> {
    let strategy = (feasible(8), -700.0f64..700.0, any::<u64>(), 1usize..=5, prop::array::uniform6(-3.0f64..3.0));
    run(cases, strategy, |((n, s), offset, seed, which, tilt)| {
        let log_w = move |p: &[f64; FACES]| p.iter().zip(tilt).map(|(x, t)| t * x).sum::<f64>();
        let ratio_integrand = move |c: f64| move |p: &[f64; FACES]| (log_w(p) + c, *p);
        let budget = Budget { max_evaluations: 20_000, tolerance: 1e-3 };
        let mc = Integrator::MonteCarlo { seed };
        let det = Integrator::Deterministic;
        match which {
            1 => {
                let set = enumerate_constrained_frequencies(n, avg(n, s));
                let weights: Vec<f64> =
                    set.members().iter().map(|m| log_multinomial(m) + log_w(&m.frequencies().unwrap())).collect();
                let shifted: Vec<f64> = weights.iter().map(|w| w + offset).collect();
                let x = WeightedFrequencySum::new(set.clone(), weights).unwrap();
                let y = WeightedFrequencySum::new(set, shifted).unwrap();
                let f = |m: &FrequencyVector| m.frequencies().unwrap();
                prop_assert!(close(&x.weighted_mean(f), &y.weighted_mean(f), 1e-12));
            }
            2 | 3 => {
                let integrator = if which == 2 { det } else { mc };
                let x = integrate_simplex_ratio(ratio_integrand(0.0), integrator, &budget);
                let y = integrate_simplex_ratio(ratio_integrand(offset), integrator, &budget);
                prop_assert!(close(&x.ratios, &y.ratios, 1e-9), "{:?} vs {:?}", x.ratios, y.ratios);
            }
            _ => {
                let a = avg(n, s);
                let Ok(poly) = build_constraint_polytope(a) else { return Ok(()) };
                let integrator = if which == 4 { det } else { mc };
                let x = integrate_polytope_ratio(&poly, ratio_integrand(0.0), integrator, &budget);
                let y = integrate_polytope_ratio(&poly, ratio_integrand(offset), integrator, &budget);
                prop_assert!(close(&x.ratios, &y.ratios, 1e-9), "{:?} vs {:?}", x.ratios, y.ratios);
            }
        }
        Ok(())
    })
}

pub fn seed_determinism(cases: u32) -> Result<(), String> {
    let strategy = (any::<u64>(), feasible(3), 1.0f64..20.0, throw(), 0usize..3);
    run(cases, strategy, |(seed, (n, s), l, throw, which)| {
        let budget = Budget { max_evaluations: 10_000, tolerance: 1e-2 };
        let mc = Integrator::MonteCarlo { seed };
        match which {
            0 => {
                let draw = |stream| sample_simplex_uniform(&mut stream_rng(seed, stream), 8);
                prop_assert_eq!(draw(3), draw(3));
            }
            1 => {
                let f = |p: &[f64; FACES]| (-(l * p[0]), *p);
                let x = integrate_simplex_ratio(f, mc, &budget);
                let y = integrate_simplex_ratio(f, mc, &budget);
                prop_assert_eq!(x.ratios.map(f64::to_bits), y.ratios.map(f64::to_bits));
                prop_assert_eq!(x.stderr.map(f64::to_bits), y.stderr.map(f64::to_bits));
            }
            _ => {
                let a = avg(n, s);
                let run = || match multiplicity_posterior(n, a, l, throw, mc, &budget) {
                    Ok(r) => Some(r),
                    Err(exdice::Error::BudgetExhausted { partial: exdice::Partial::Posterior(r), .. }) => Some(*r),
                    Err(_) => None,
                };
                let (x, y) = (run(), run());
                prop_assert_eq!(
                    x.as_ref().map(|r| r.distribution.probs().map(f64::to_bits)),
                    y.as_ref().map(|r| r.distribution.probs().map(f64::to_bits))
                );
                prop_assert_eq!(x.and_then(|r| r.mc_stderr), y.and_then(|r| r.mc_stderr));
            }
        }
        Ok(())
    })
}
