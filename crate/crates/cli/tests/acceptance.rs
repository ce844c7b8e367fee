//! Acceptance suite: one pass/fail line per criterion. Run with
//! `cargo test -p exdice-cli --test acceptance`.

#[path = "../../core/tests/props/mod.rs"]
mod props;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use exdice::{
    fair_posterior, generalized_johnson_posterior, generalized_multiplicity_posterior, johnson_large_n,
    johnson_posterior, maxent_burg, maxent_shannon, multiplicity_large_n, multiplicity_posterior, shannon_entropy,
    Average, Budget, Distribution, Error, Integrator, PosteriorResult, Regime, Throw, FACES,
};
use exdice_cli::compute::{evaluate, Cell, EvalSettings, IntegratorKind, ProblemResult};
use exdice_cli::diff::{diff, Outcome, Tolerances};
use exdice_cli::problem::{table_rows, ProblemId};
use exdice_cli::reference::{RefThrow, RefValue, ReferenceTable};
use exdice_cli::render::{format_row, rounded_entropy, rounded_percentages};
use exdice_oracle::{brute_force_fair, exact_johnson, to_f64, OracleError};
use num_rational::Rational64;

const CLOSED_FORM_PP: f64 = 0.05;
const NUMERICAL_PP: f64 = 0.3;
const ORACLE_REL: f64 = 1e-12;
const PROPERTY_CASES: u32 = 1000;
/// Standard errors allowed between the Monte Carlo and deterministic values.
const MC_SIGMAS: f64 = 4.0;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(problems: &[String], summary: String) -> Self {
        if problems.is_empty() {
            Verdict { pass: true, detail: summary }
        } else {
            Verdict { pass: false, detail: format!("{summary}; {}", problems.join("; ")) }
        }
    }
}

fn avg(s: &str) -> Average {
    s.parse().unwrap()
}

fn rat(s: &str) -> Rational64 {
    match s.split_once('/') {
        Some((p, q)) => Rational64::new(p.parse().unwrap(), q.parse().unwrap()),
        None => Rational64::from_integer(s.parse().unwrap()),
    }
}

fn oracle_throw(t: Throw) -> exdice_oracle::Throw {
    match t {
        Throw::Old => exdice_oracle::Throw::Old,
        Throw::New => exdice_oracle::Throw::New,
    }
}

fn throw_name(t: Throw) -> &'static str {
    match t {
        Throw::Old => "old",
        Throw::New => "new",
    }
}

fn settings(integrator: IntegratorKind) -> EvalSettings {
    EvalSettings { integrator, seed: 0, budget: Budget::default() }
}

fn deadline(elapsed: Duration, limit: Duration, problems: &mut Vec<String>) {
    if elapsed > limit {
        problems.push(format!("took {:.1} s, limit {} s", elapsed.as_secs_f64(), limit.as_secs()));
    }
}

/// Diff the rows whose label starts with one of `families`.
fn diff_rows(
    results: &[ProblemResult],
    families: &[&str],
    tol: &Tolerances,
    tag: &str,
    problems: &mut Vec<String>,
) -> usize {
    let report = diff(results, &ReferenceTable::embedded(), tol);
    let mut compared = 0;
    for c in &report.cells {
        if !families.iter().any(|f| c.row.split(':').next() == Some(*f)) {
            continue;
        }
        match &c.outcome {
            Outcome::Pass => compared += 1,
            Outcome::Fail(why) => {
                compared += 1;
                problems.push(format!("{tag}{} {} {}: {why}", c.problem, c.row, throw_name(c.throw)));
            }
            Outcome::Unreferenced => {}
        }
    }
    compared
}

fn closed_form_tables() -> Verdict {
    let start = Instant::now();
    let plan: Vec<_> = ProblemId::published_set()
        .into_iter()
        .map(|id| (id, table_rows(id.regime, &[1.0, 5.0, 50.0], &[], false)))
        .collect();
    let results = evaluate(&plan, &settings(IntegratorKind::Deterministic));
    let tol = Tolerances { closed_form_pp: CLOSED_FORM_PP, numerical_pp: CLOSED_FORM_PP, ..Tolerances::default() };
    let mut problems = Vec::new();
    let compared = diff_rows(&results, &["fair", "johnson"], &tol, "", &mut problems);
    let elapsed = start.elapsed();
    deadline(elapsed, Duration::from_secs(10), &mut problems);
    Verdict::new(&problems, format!("{compared} cells within {CLOSED_FORM_PP} pp in {:.1} s", elapsed.as_secs_f64()))
}

fn multiplicity_tables() -> Verdict {
    let start = Instant::now();
    let plan: Vec<_> = ProblemId::published_set()
        .into_iter()
        .filter(|id| matches!(id.regime, Regime::Exact(_)))
        .map(|id| (id, table_rows(id.regime, &[], &[1.0, 5.0, 50.0], false)))
        .collect();
    let det = evaluate(&plan, &settings(IntegratorKind::Deterministic));
    let mc = evaluate(&plan, &settings(IntegratorKind::MonteCarlo));
    let mut problems = Vec::new();
    let mut compared = 0;
    for (results, tag) in [(&det, "deterministic: "), (&mc, "monte carlo: ")] {
        compared += diff_rows(results, &["multiplicity"], &Tolerances::default(), tag, &mut problems);
    }

    let mut agreeing = 0;
    let mut worst: f64 = 0.0;
    for (d, m) in det.iter().zip(&mc) {
        for (dr, mr) in d.rows.iter().zip(&m.rows) {
            if !dr.label.starts_with("multiplicity") {
                continue;
            }
            for throw in [Throw::Old, Throw::New] {
                let name = format!("{} {} {}", d.id, dr.label, throw_name(throw));
                match (dr.cell(throw), mr.cell(throw)) {
                    (Cell::Undefined, Cell::Undefined) => agreeing += 1,
                    (Cell::Value(x), Cell::Value(y)) => {
                        let se = y.stderr.unwrap_or([0.0; FACES]);
                        let q = x.quad_error.unwrap_or(0.0);
                        let mut ok = true;
                        for i in 0..FACES {
                            let gap = (x.distribution.probs()[i] - y.distribution.probs()[i]).abs();
                            let allowed = MC_SIGMAS * se[i] + q + 1e-12;
                            worst = worst.max(gap / allowed);
                            if gap > allowed {
                                ok = false;
                                problems.push(format!(
                                    "{name}: integrators differ by {:.3} pp on face {}, allowed {:.3} pp",
                                    100.0 * gap,
                                    i + 1,
                                    100.0 * allowed
                                ));
                            }
                        }
                        if ok {
                            agreeing += 1;
                        }
                    }
                    _ => problems.push(format!("{name}: integrators disagree on definedness")),
                }
            }
        }
    }
    let elapsed = start.elapsed();
    deadline(elapsed, Duration::from_secs(300), &mut problems);
    Verdict::new(
        &problems,
        format!(
            "{compared} cells against the tables within {NUMERICAL_PP} pp, {agreeing} integrator pairs agree \
             (worst gap {worst:.2} of allowed), {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn within_pp(got: &[f64; FACES], want: &[f64; FACES], pp: f64) -> Option<f64> {
    let dev = got.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    (dev > pp + 1e-9).then_some(dev)
}

fn maxent_anchors() -> Verdict {
    let mut problems = Vec::new();
    let shannon = maxent_shannon(avg("5")).unwrap().distribution;
    let want = [2.1, 3.9, 7.2, 13.6, 25.5, 47.8];
    let got = rounded_percentages(&shannon);
    if let Some(dev) = within_pp(&got, &want, CLOSED_FORM_PP) {
        problems.push(format!("Shannon(5) {} off by {dev:.2} pp", format_row(&got)));
    }
    // Printed entropies are those of the printed rows.
    let exact = shannon_entropy(&shannon);
    let h = rounded_entropy(&got);
    if (h - 1.370).abs() > 0.001 {
        problems.push(format!("Shannon(5) printed entropy {h:.4}"));
    }
    let burg = rounded_percentages(&maxent_burg(avg("5")).unwrap().distribution);
    if let Some(dev) = within_pp(&burg, &[4.4, 5.3, 6.9, 9.8, 16.7, 57.0], CLOSED_FORM_PP) {
        problems.push(format!("Burg(5) {} off by {dev:.2} pp", format_row(&burg)));
    }
    let flat = maxent_shannon(avg("7/2")).unwrap().distribution;
    if flat != Distribution::uniform() {
        problems.push(format!("Shannon(7/2) is {:?}, not uniform", flat.probs()));
    }
    Verdict::new(
        &problems,
        format!("Shannon(5) H = {h:.4} nat printed ({exact:.4} unrounded), Burg(5) {}", format_row(&burg)),
    )
}

fn percentages(d: &Distribution) -> [f64; FACES] {
    d.probs().map(|p| 100.0 * p)
}

fn reference_row(problem: &str, row: &str) -> [f64; FACES] {
    let cell = ReferenceTable::embedded().problem(problem).and_then(|p| p.cell(row, RefThrow::Old)).cloned();
    match cell.map(|c| c.value) {
        Some(RefValue::Percentages(x)) => x,
        other => panic!("no published row {problem} {row}: {other:?}"),
    }
}

fn asymptotic_equivalence() -> Verdict {
    let budget = Budget::default();
    let mut problems = Vec::new();
    let a = avg("5");
    let pairs = [
        (
            "multiplicity L=50 vs Shannon",
            multiplicity_large_n(a, 50.0, Integrator::Deterministic, &budget),
            maxent_shannon(a).unwrap().distribution,
            "multiplicity:50",
        ),
        (
            "Johnson K=50 vs Burg",
            johnson_large_n(a, 50.0, Integrator::Deterministic, &budget),
            maxent_burg(a).unwrap().distribution,
            "johnson:50",
        ),
    ];
    let mut devs = Vec::new();
    for (name, got, maxent, row) in pairs {
        let got = match got {
            Ok(r) => r.distribution,
            Err(e) => {
                problems.push(format!("{name}: {e}"));
                continue;
            }
        };
        let g = percentages(&got);
        let dev = g.iter().zip(&percentages(&maxent)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        devs.push(format!("{name} {dev:.2} pp"));
        if dev > NUMERICAL_PP {
            problems.push(format!("{name}: {} vs {}", format_row(&g), format_row(&percentages(&maxent))));
        }
        let published = reference_row("large-a5", row);
        if let Some(dev) = within_pp(&rounded_percentages(&got), &published, NUMERICAL_PP) {
            problems.push(format!("{name}: off the published {row} row by {dev:.2} pp"));
        }
    }
    Verdict::new(&problems, devs.join(", "))
}

fn close(got: &PosteriorResult, want: &[num_rational::BigRational; FACES]) -> Option<f64> {
    let mut worst: f64 = 0.0;
    for (g, w) in got.distribution.probs().iter().zip(want) {
        let w = to_f64(w);
        let err = if w == 0.0 { g.abs() } else { (g - w).abs() / w };
        worst = worst.max(err);
    }
    (worst > ORACLE_REL).then_some(worst)
}

fn oracle_equivalence() -> Verdict {
    let mut problems = Vec::new();
    let mut checked = 0;
    let averages = ["6", "5", "7/2"];
    for a in averages {
        for n in 1..=6 {
            for throw in [Throw::Old, Throw::New] {
                let name = format!("fair N={n} a={a} {}", throw_name(throw));
                match (fair_posterior(n, avg(a), throw), brute_force_fair(n, rat(a), oracle_throw(throw))) {
                    (Ok(got), Ok(want)) => {
                        checked += 1;
                        if let Some(e) = close(&got, &want) {
                            problems.push(format!("{name}: relative error {e:.1e}"));
                        }
                    }
                    (Err(Error::ContradictoryData { .. }), Err(OracleError::Contradictory)) => checked += 1,
                    (got, want) => problems.push(format!("{name}: {got:?} vs oracle {want:?}")),
                }
            }
        }
    }
    for a in averages {
        for n in [1, 2, 6, 12] {
            for k in [1, 5, 50] {
                for throw in [Throw::Old, Throw::New] {
                    let name = format!("Johnson N={n} a={a} K={k} {}", throw_name(throw));
                    match (
                        johnson_posterior(n, avg(a), f64::from(k), throw),
                        exact_johnson(n, rat(a), k, oracle_throw(throw)),
                    ) {
                        (Ok(got), Ok(want)) => {
                            checked += 1;
                            if let Some(e) = close(&got, &want) {
                                problems.push(format!("{name}: relative error {e:.1e}"));
                            }
                        }
                        (Err(Error::ContradictoryData { .. }), Err(OracleError::Contradictory)) => checked += 1,
                        (got, want) => problems.push(format!("{name}: {got:?} vs oracle {want:?}")),
                    }
                }
            }
        }
    }
    let anchor = fair_posterior(4, avg("7/2"), Throw::Old).unwrap();
    let counts = [21.0, 25.0, 27.0, 27.0, 25.0, 21.0];
    for (i, (p, c)) in anchor.distribution.probs().iter().zip(counts).enumerate() {
        if (p - c / 146.0).abs() > ORACLE_REL * p {
            problems.push(format!("N=4 sum 14 face {}: {p} vs {c}/146", i + 1));
        }
    }
    Verdict::new(&problems, format!("{checked} cases, N=4 sum 14 anchor 21/146 and 27/146"))
}

fn contradiction_handling() -> Verdict {
    let mut problems = Vec::new();
    let a = avg("7/2");
    let budget = Budget::default();
    let base = Distribution::new([0.1, 0.1, 0.2, 0.2, 0.2, 0.2]).unwrap();
    let mut checked = 0;
    for n in (1..=11).step_by(2) {
        for throw in [Throw::Old, Throw::New] {
            let mut models: Vec<(String, exdice::Result<PosteriorResult>)> =
                vec![("fair".into(), fair_posterior(n, a, throw))];
            for x in [1.0, 5.0, 50.0] {
                models.push((format!("Johnson K={x}"), johnson_posterior(n, a, x, throw)));
                models.push((format!("Johnson K={x} base m"), generalized_johnson_posterior(n, a, x, base, throw)));
                for integrator in [Integrator::Deterministic, Integrator::MonteCarlo { seed: 0 }] {
                    models.push((
                        format!("multiplicity L={x} {integrator:?}"),
                        multiplicity_posterior(n, a, x, throw, integrator, &budget),
                    ));
                }
                models.push((
                    format!("multiplicity L={x} base m"),
                    generalized_multiplicity_posterior(n, a, x, base, throw, Integrator::Deterministic, &budget),
                ));
            }
            for (model, r) in models {
                checked += 1;
                if !matches!(r, Err(Error::ContradictoryData { .. })) {
                    problems.push(format!("N={n} {model} {}: {:?}", throw_name(throw), r.map(|r| r.distribution)));
                }
            }
        }
    }
    match maxent_shannon(a) {
        Ok(s) if s.distribution == Distribution::uniform() => {}
        other => problems.push(format!("Shannon(7/2): {other:?}")),
    }
    Verdict::new(&problems, format!("{checked} model queries undefined, Shannon(7/2) uniform"))
}

fn property_suites() -> Verdict {
    let start = Instant::now();
    let mut problems = Vec::new();
    let mut names = Vec::new();
    for (name, suite) in props::suites() {
        names.push(name);
        if let Err(e) = suite(PROPERTY_CASES) {
            problems.push(format!("{name}: {e}"));
        }
    }
    let elapsed = start.elapsed();
    deadline(elapsed, Duration::from_secs(120), &mut problems);
    Verdict::new(
        &problems,
        format!(
            "{} suites x {PROPERTY_CASES} cases in {:.1} s ({})",
            names.len(),
            elapsed.as_secs_f64(),
            names.join(", ")
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 7] = [
        ("closed-form table reproduction", closed_form_tables),
        ("multiplicity table reproduction", multiplicity_tables),
        ("maxent anchors", maxent_anchors),
        ("asymptotic equivalence", asymptotic_equivalence),
        ("oracle equivalence", oracle_equivalence),
        ("contradiction handling", contradiction_handling),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!("[{}] {}. {name}: {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
