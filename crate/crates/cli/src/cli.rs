//! Argument parsing and the two commands. Commands return their output and
//! exit code instead of printing, so they can be driven in-process.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use exdice::{
    asymptotic_dispatch, generalized_johnson_posterior, generalized_multiplicity_posterior, iid_posterior,
    johnson_posterior, large_n_posterior, maxent_burg, maxent_shannon, min_kl, min_reverse_kl, multiplicity_posterior,
    Average, Budget, Distribution, Dominance, Error, Family, LimitQuery, MaxentSolution, ModelSpec, Partial,
    PosteriorResult, Regime, Throw, FACES,
};
use serde::Serialize;

use crate::compute::{evaluate, Cell, EvalSettings};
use crate::config::{
    fast_budget, CommonFlags, ConfigError, ConfigFile, DominanceChoice, EvalFormat, IntegratorChoice, ModelChoice,
    RunConfig, TableFormat, ThrowChoice, SEED_ENV,
};
use crate::diff::{diff, Tolerances};
use crate::problem::ProblemId;
use crate::reference::ReferenceTable;
use crate::render;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DIFF: i32 = 1;
pub const EXIT_CONTRADICTORY: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "exdice", version, about = "Die-throw plausibilities given an observed average")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one model for one throw.
    Eval(EvalArgs),
    /// Recompute the fifteen published tables, optionally diffing them.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// Seed for Monte Carlo integration [env: EXDICE_SEED]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Maximum integrand evaluations per cell.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Target error of numerical integration, absolute on probabilities.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long, value_enum)]
    pub integrator: Option<IntegratorChoice>,
    /// TOML file with default values for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl CommonArgs {
    fn flags(&self) -> CommonFlags {
        CommonFlags { seed: self.seed, budget: self.budget, tolerance: self.tolerance, integrator: self.integrator }
    }
}

#[derive(Debug, Args, Default)]
pub struct EvalArgs {
    /// Number of observed throws.
    #[arg(long, conflicts_with = "large_n")]
    pub n: Option<u32>,
    /// The limit of many observed throws.
    #[arg(long)]
    pub large_n: bool,
    /// Observed average, e.g. 5, 7/2 or 3.5.
    #[arg(long)]
    pub avg: Option<String>,
    #[arg(long, value_enum)]
    pub model: Option<ModelChoice>,
    /// K or L, or `large`.
    #[arg(long)]
    pub param: Option<String>,
    /// With `--param large`: which side grows faster.
    #[arg(long, value_enum)]
    pub dominance: Option<DominanceChoice>,
    #[arg(long, value_enum)]
    pub throw: Option<ThrowChoice>,
    /// Base measure p1,...,p6 for the generalized models.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub m: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub format: Option<EvalFormat>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args, Default)]
pub struct ReproduceArgs {
    /// Problems to run, e.g. n2-a5 or large-a3.5; all by default.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub only: Option<Vec<String>>,
    #[arg(long, value_enum)]
    pub format: Option<TableFormat>,
    /// Compare with the published values; exit 1 on deviations.
    #[arg(long)]
    pub diff: bool,
    /// Quicker integration and 0.5 pp diff tolerance.
    #[arg(long)]
    pub fast: bool,
    /// Johnson parameters K.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub johnson: Option<Vec<f64>>,
    /// Multiplicity parameters L.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub multiplicity: Option<Vec<f64>>,
    /// Leave out the large-parameter rows.
    #[arg(long)]
    pub no_large_rows: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl Outcome {
    fn usage(message: impl std::fmt::Display) -> Self {
        Outcome { stdout: String::new(), stderr: format!("error: {message}\n"), code: EXIT_USAGE }
    }
}

/// Parses arguments (program name first) and runs the command.
pub fn run<I, T>(args: I, env_seed: Option<&str>) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => match cli.command {
            Command::Eval(a) => run_eval(&a, env_seed),
            Command::Reproduce(a) => run_reproduce(&a, env_seed),
        },
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                Outcome { stdout: String::new(), stderr: text, code: EXIT_USAGE }
            } else {
                Outcome { stdout: text, stderr: String::new(), code: EXIT_OK }
            }
        }
    }
}

/// Reads the seed environment variable.
pub fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

fn load_config(path: &Option<PathBuf>) -> Result<ConfigFile, ConfigError> {
    path.as_deref().map_or(Ok(ConfigFile::default()), ConfigFile::load)
}

enum ParamValue {
    Value(f64),
    Large,
}

fn parse_param(s: &str) -> Result<ParamValue, String> {
    if s.eq_ignore_ascii_case("large") {
        return Ok(ParamValue::Large);
    }
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() && x > 0.0 => Ok(ParamValue::Value(x)),
        _ => Err(format!("--param {s:?}: expected a positive number or `large`")),
    }
}

/// One evaluated query ready for rendering.
struct EvalAnswer {
    result: PosteriorResult,
    annotation: Option<&'static str>,
    converged: bool,
}

enum EvalError {
    Usage(String),
    Contradictory(String),
}

impl From<Error> for EvalError {
    fn from(e: Error) -> Self {
        match e {
            Error::ContradictoryData { .. } => EvalError::Contradictory(e.to_string()),
            other => EvalError::Usage(other.to_string()),
        }
    }
}

fn maxent_answer(sol: MaxentSolution) -> EvalAnswer {
    EvalAnswer {
        result: PosteriorResult::new(sol.distribution, exdice::Method::ClosedForm),
        annotation: None,
        converged: true,
    }
}

/// A numerical result, or the partial one if the budget ran out.
fn tolerate_budget(r: exdice::Result<PosteriorResult>) -> Result<EvalAnswer, EvalError> {
    match r {
        Ok(result) => Ok(EvalAnswer { result, annotation: None, converged: true }),
        Err(Error::BudgetExhausted { partial: Partial::Posterior(p), .. }) => {
            Ok(EvalAnswer { result: *p, annotation: None, converged: false })
        }
        Err(e) => Err(e.into()),
    }
}

struct EvalQuery {
    regime: Option<Regime>,
    average: Average,
    model: ModelChoice,
    param: Option<String>,
    dominance: Option<DominanceChoice>,
    throw: Option<Throw>,
    base: Option<Distribution>,
}

fn answer(q: &EvalQuery, settings: &EvalSettings, cell: &str) -> Result<EvalAnswer, EvalError> {
    let a = q.average;
    let budget = &settings.budget;
    let integrator = settings.integrator_for(cell);
    let uniform = Distribution::uniform();
    match q.model {
        ModelChoice::MaxentShannon => {
            return Ok(maxent_answer(match &q.base {
                Some(m) => min_kl(a, m)?,
                None => maxent_shannon(a)?,
            }))
        }
        ModelChoice::MaxentBurg => {
            return Ok(maxent_answer(match &q.base {
                Some(m) => min_reverse_kl(a, m)?,
                None => maxent_burg(a)?,
            }))
        }
        ModelChoice::MinKl => return Ok(maxent_answer(min_kl(a, q.base.as_ref().unwrap_or(&uniform))?)),
        _ => {}
    }
    let regime = q.regime.ok_or_else(|| EvalError::Usage("--n or --large-n is required for this model".into()))?;
    let throw = q.throw.ok_or_else(|| EvalError::Usage("--throw is required for this model".into()))?;
    let param = q.param.as_deref().map(parse_param).transpose().map_err(EvalError::Usage)?;
    let family = match q.model {
        ModelChoice::Fair => Family::FairThrow,
        ModelChoice::Johnson => Family::Johnson,
        _ => Family::Multiplicity,
    };
    let dispatch = |dominance: Option<Dominance>| -> Result<EvalAnswer, EvalError> {
        let query = LimitQuery { regime, average: a, throw, family, parameter: None, dominance, base: q.base };
        let d = asymptotic_dispatch(&query, integrator, budget)?;
        Ok(EvalAnswer { result: d.result, annotation: d.annotation, converged: true })
    };
    if q.dominance.is_some() && !matches!(param, Some(ParamValue::Large)) {
        return Err(EvalError::Usage("--dominance needs --param large".into()));
    }
    match (family, param, regime) {
        (Family::FairThrow, Some(_), _) => Err(EvalError::Usage("the fair-throw model takes no --param".into())),
        (Family::FairThrow, None, Regime::Exact(n)) if q.base.is_some() => {
            Ok(EvalAnswer { result: iid_posterior(n, a, q.base, throw)?, annotation: None, converged: true })
        }
        (Family::FairThrow, None, _) => dispatch(None),
        (_, None, _) => Err(EvalError::Usage("--param is required for this model".into())),
        (_, Some(ParamValue::Large), Regime::Exact(_)) => {
            dispatch(Some(q.dominance.map_or(Dominance::Parameter, Dominance::from)))
        }
        (_, Some(ParamValue::Large), Regime::LargeN) => match q.dominance {
            Some(d) => dispatch(Some(d.into())),
            None => Err(EvalError::Usage("--param large at large N needs --dominance param|data".into())),
        },
        (f, Some(ParamValue::Value(x)), Regime::LargeN) => {
            let model = if f == Family::Johnson {
                ModelSpec::johnson_with_base(x, q.base)?
            } else {
                ModelSpec::multiplicity_with_base(x, q.base)?
            };
            tolerate_budget(large_n_posterior(a, model, integrator, budget))
        }
        (Family::Johnson, Some(ParamValue::Value(k)), Regime::Exact(n)) => {
            let r = match q.base {
                Some(m) => generalized_johnson_posterior(n, a, k, m, throw)?,
                None => johnson_posterior(n, a, k, throw)?,
            };
            Ok(EvalAnswer { result: r, annotation: None, converged: true })
        }
        (_, Some(ParamValue::Value(l)), Regime::Exact(n)) => tolerate_budget(match q.base {
            Some(m) => generalized_multiplicity_posterior(n, a, l, m, throw, integrator, budget),
            None => multiplicity_posterior(n, a, l, throw, integrator, budget),
        }),
    }
}

#[derive(Serialize)]
struct EvalJson<'a> {
    query: EvalJsonQuery,
    probs: [f64; FACES],
    entropy: f64,
    method: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    stderr: Option<[f64; FACES]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    quad_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    annotation: Option<&'a str>,
    converged: bool,
}

#[derive(Serialize)]
struct EvalJsonQuery {
    regime: Option<render::JsonRegime>,
    avg: String,
    model: ModelChoice,
    param: Option<String>,
    dominance: Option<DominanceChoice>,
    throw: Option<ThrowChoice>,
    m: Option<[f64; FACES]>,
}

fn method_label(q: &EvalQuery, r: &PosteriorResult) -> &'static str {
    match q.model {
        ModelChoice::MaxentShannon | ModelChoice::MaxentBurg | ModelChoice::MinKl => "maxent",
        _ => r.method.label(),
    }
}

fn render_eval(q: &EvalQuery, args: &EvalArgs, ans: &EvalAnswer, format: EvalFormat) -> String {
    let r = &ans.result;
    let method = method_label(q, r);
    match format {
        EvalFormat::Text => {
            let mut out = render::text_line(&r.distribution) + "\n";
            out += &format!("method: {method}\n");
            if let Some(se) = r.mc_stderr {
                let pp: [f64; FACES] = se.map(|x| 100.0 * x);
                let parts: Vec<String> = pp.iter().map(|x| format!("{x:.3}")).collect();
                out += &format!("mc stderr: ({}) pp\n", parts.join(", "));
            }
            if let Some(e) = r.quad_error {
                out += &format!("quadrature error: {:.1e}\n", e);
            }
            if let Some(a) = ans.annotation {
                out += &format!("note: {a}\n");
            }
            out
        }
        EvalFormat::Json => {
            let doc = EvalJson {
                query: EvalJsonQuery {
                    regime: q.regime.map(|r| match r {
                        Regime::Exact(n) => render::JsonRegime::N(n),
                        Regime::LargeN => render::JsonRegime::Large("large".into()),
                    }),
                    avg: q.average.to_string(),
                    model: q.model,
                    param: q.param.clone(),
                    dominance: q.dominance,
                    throw: args.throw,
                    m: q.base.map(|b| *b.probs()),
                },
                probs: *r.distribution.probs(),
                entropy: r.entropy_nats,
                method,
                stderr: r.mc_stderr,
                quad_error: r.quad_error,
                annotation: ans.annotation,
                converged: ans.converged,
            };
            serde_json::to_string(&doc).expect("serializable") + "\n"
        }
        EvalFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["p1", "p2", "p3", "p4", "p5", "p6", "entropy", "method", "max_stderr", "annotation"])
                .expect("in-memory write");
            let mut rec: Vec<String> = r.distribution.probs().iter().map(|x| format!("{}", 100.0 * x)).collect();
            rec.push(format!("{}", r.entropy_nats));
            rec.push(method.to_string());
            rec.push(
                r.mc_stderr.map(|s| format!("{}", 100.0 * s.iter().copied().fold(0.0, f64::max))).unwrap_or_default(),
            );
            rec.push(ans.annotation.unwrap_or_default().to_string());
            w.write_record(&rec).expect("in-memory write");
            String::from_utf8(w.into_inner().expect("flushed")).expect("utf-8")
        }
    }
}

pub fn run_eval(args: &EvalArgs, env_seed: Option<&str>) -> Outcome {
    let file = match load_config(&args.common.config) {
        Ok(f) => f,
        Err(e) => return Outcome::usage(e),
    };
    let section = &file.eval;
    let settings = match args.common.flags().settings(&file, env_seed, Budget::default()) {
        Ok(s) => s,
        Err(e) => return Outcome::usage(e),
    };
    let regime = match (args.n.or(section.n), args.large_n || section.large_n.unwrap_or(false)) {
        (Some(_), true) => return Outcome::usage("--n and --large-n exclude each other"),
        (Some(0), false) => return Outcome::usage("--n must be at least 1"),
        (Some(n), false) => Some(Regime::Exact(n)),
        (None, true) => Some(Regime::LargeN),
        (None, false) => None,
    };
    let Some(avg) = args.avg.clone().or_else(|| section.avg.clone()) else {
        return Outcome::usage("--avg is required");
    };
    let average: Average = match avg.parse() {
        Ok(a) => a,
        Err(e) => return Outcome::usage(format!("--avg {avg:?}: {e}")),
    };
    let Some(model) = args.model.or(section.model) else {
        return Outcome::usage("--model is required");
    };
    let base = match args.m.clone().or_else(|| section.m.clone()) {
        None => None,
        Some(v) => {
            let Ok(arr) = <[f64; FACES]>::try_from(v.as_slice()) else {
                return Outcome::usage(format!("--m needs {FACES} values, got {}", v.len()));
            };
            match Distribution::new(arr) {
                Ok(d) => Some(d),
                Err(e) => return Outcome::usage(format!("--m: {e}")),
            }
        }
    };
    let throw = args.throw.or(section.throw);
    let q = EvalQuery {
        regime,
        average,
        model,
        param: args.param.clone().or_else(|| section.param.clone()),
        dominance: args.dominance.or(section.dominance),
        throw: throw.map(|t| match t {
            ThrowChoice::Old => Throw::Old,
            ThrowChoice::New => Throw::New,
        }),
        base,
    };
    let format = args.format.or(section.format).unwrap_or(EvalFormat::Text);
    let cell = format!("eval/{model:?}/{}/{avg}/{:?}/{:?}", q.param.as_deref().unwrap_or("-"), q.regime, q.throw);
    match answer(&q, &settings, &cell) {
        Ok(ans) => {
            let stderr = if ans.converged {
                String::new()
            } else {
                format!(
                    "warning: integration budget exhausted before reaching tolerance {:e}\n",
                    settings.budget.tolerance
                )
            };
            Outcome { stdout: render_eval(&q, args, &ans, format), stderr, code: EXIT_OK }
        }
        Err(EvalError::Contradictory(detail)) => Outcome {
            stdout: "undefined (contradictory data)\n".into(),
            stderr: format!("{detail}\n"),
            code: EXIT_CONTRADICTORY,
        },
        Err(EvalError::Usage(m)) => Outcome::usage(m),
    }
}

/// Resolves `reproduce` flags, the config file and defaults.
pub fn reproduce_config(args: &ReproduceArgs, env_seed: Option<&str>) -> Result<RunConfig, ConfigError> {
    let file = load_config(&args.common.config)?;
    let section = &file.reproduce;
    let defaults = RunConfig::default();
    let fast = args.fast || section.fast.unwrap_or(false);
    let base_budget = if fast { fast_budget(defaults.settings.budget) } else { defaults.settings.budget };
    let settings = args.common.flags().settings(&file, env_seed, base_budget)?;
    let problems = match args.only.clone().or_else(|| section.only.clone()) {
        None => defaults.problems,
        Some(ids) => ids
            .iter()
            .map(|s| s.parse::<ProblemId>().map_err(|e| ConfigError::Invalid(e.to_string())))
            .collect::<Result<_, _>>()?,
    };
    let params = |v: Option<Vec<f64>>, name: &str| -> Result<Vec<f64>, ConfigError> {
        let v = v.unwrap_or_else(|| crate::config::TABLE_PARAMETERS.to_vec());
        match v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            Some(bad) => Err(ConfigError::Invalid(format!("{name} parameter {bad} must be positive"))),
            None => Ok(v),
        }
    };
    let tolerances = match (fast, section.tolerances) {
        (_, Some(t)) => t,
        (true, None) => Tolerances::fast(),
        (false, None) => Tolerances::default(),
    };
    Ok(RunConfig {
        problems,
        johnson: params(args.johnson.clone().or_else(|| section.johnson.clone()), "johnson")?,
        multiplicity: params(args.multiplicity.clone().or_else(|| section.multiplicity.clone()), "multiplicity")?,
        large_rows: !args.no_large_rows && section.large_rows.unwrap_or(true),
        settings,
        format: args.format.or(section.format).unwrap_or(TableFormat::Markdown),
        diff: args.diff || section.diff.unwrap_or(false),
        tolerances,
    })
}

pub fn run_reproduce(args: &ReproduceArgs, env_seed: Option<&str>) -> Outcome {
    let config = match reproduce_config(args, env_seed) {
        Ok(c) => c,
        Err(e) => return Outcome::usage(e),
    };
    run_config(&config)
}

pub fn run_config(config: &RunConfig) -> Outcome {
    let results = evaluate(&config.plan(), &config.settings);
    let stdout = match config.format {
        TableFormat::Markdown => render::markdown(&results),
        TableFormat::Csv => render::csv(&results),
        TableFormat::Json => render::json(&results),
    };
    let mut stderr = String::new();
    for p in &results {
        for row in &p.rows {
            for (throw, cell) in [("old", &row.old), ("new", &row.new)] {
                match cell {
                    Cell::Failed(e) => stderr += &format!("warning: {p} {} {throw}: {e}\n", row.label, p = p.id),
                    Cell::Value(v) if !v.converged => {
                        stderr += &format!("warning: {} {} {throw}: integration did not converge\n", p.id, row.label)
                    }
                    _ => {}
                }
            }
        }
    }
    let mut code = EXIT_OK;
    if config.diff {
        let report = diff(&results, &ReferenceTable::embedded(), &config.tolerances);
        stderr += &report.render();
        if !report.passed() {
            code = EXIT_DIFF;
        }
    }
    Outcome { stdout, stderr, code }
}
