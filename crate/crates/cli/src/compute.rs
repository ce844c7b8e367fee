//! Evaluation of table cells. Every cell is an independent work item with
//! its own seed, so tables come out the same whatever the scheduling.

use exdice::integration::rng::mix_seed;
use exdice::{
    asymptotic_dispatch, johnson_posterior, large_n_posterior, maxent_shannon, multiplicity_pair, Budget, Distribution,
    Dominance, Error, Family, Integrator, LimitQuery, ModelSpec, Partial, PosteriorResult, Regime, Throw, FACES,
};
use rayon::prelude::*;

use crate::problem::{ParamSpec, ProblemId, RowFamily, RowSpec};

/// Which integrator numerical cells use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntegratorKind {
    Deterministic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub integrator: IntegratorKind,
    pub seed: u64,
    pub budget: Budget,
}

impl EvalSettings {
    /// The integrator for one cell; Monte Carlo seeds are derived from the
    /// cell's name.
    pub fn integrator_for(&self, cell: &str) -> Integrator {
        match self.integrator {
            IntegratorKind::Deterministic => Integrator::Deterministic,
            IntegratorKind::MonteCarlo => Integrator::MonteCarlo { seed: cell_seed(self.seed, cell) },
        }
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

pub fn cell_seed(seed: u64, cell: &str) -> u64 {
    mix_seed(seed, fnv1a(cell))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellValue {
    pub distribution: Distribution,
    /// Method label: `maxent` or one of the core method labels.
    pub method: String,
    pub numerical: bool,
    pub stderr: Option<[f64; FACES]>,
    pub quad_error: Option<f64>,
    pub annotation: Option<String>,
    /// False when the integration budget ran out before the target error.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Value(CellValue),
    /// No frequency vector has the observed average.
    Undefined,
    Failed(String),
}

impl Cell {
    pub fn value(&self) -> Option<&CellValue> {
        match self {
            Cell::Value(v) => Some(v),
            _ => None,
        }
    }

    fn from_result(r: PosteriorResult, annotation: Option<&str>, converged: bool) -> Cell {
        Cell::Value(CellValue {
            distribution: r.distribution,
            method: r.method.label().to_string(),
            numerical: r.method.is_numerical(),
            stderr: r.mc_stderr,
            quad_error: r.quad_error,
            annotation: annotation.map(str::to_string),
            converged,
        })
    }

    fn from_outcome(outcome: exdice::Result<PosteriorResult>) -> Cell {
        match outcome {
            Ok(r) => Cell::from_result(r, None, true),
            Err(e) => Cell::from_error(e),
        }
    }

    fn from_error(e: Error) -> Cell {
        match e {
            Error::ContradictoryData { .. } => Cell::Undefined,
            Error::BudgetExhausted { partial: Partial::Posterior(r), .. } => Cell::from_result(*r, None, false),
            other => Cell::Failed(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowResult {
    pub spec: RowSpec,
    pub label: String,
    pub param: Option<String>,
    pub old: Cell,
    pub new: Cell,
}

impl RowResult {
    pub fn cell(&self, throw: Throw) -> &Cell {
        match throw {
            Throw::Old => &self.old,
            Throw::New => &self.new,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemResult {
    pub id: ProblemId,
    pub rows: Vec<RowResult>,
}

fn family(f: RowFamily) -> Family {
    match f {
        RowFamily::Johnson => Family::Johnson,
        RowFamily::Multiplicity => Family::Multiplicity,
        RowFamily::Fair | RowFamily::Maxent => Family::FairThrow,
    }
}

fn dispatched(query: &LimitQuery, integrator: Integrator, budget: &Budget) -> Cell {
    match asymptotic_dispatch(query, integrator, budget) {
        Ok(d) => Cell::from_result(d.result, d.annotation, true),
        Err(e) => Cell::from_error(e),
    }
}

fn both(cell: Cell) -> (Cell, Cell) {
    (cell.clone(), cell)
}

/// Old and new cells of one row.
pub fn evaluate_row(problem: ProblemId, row: RowSpec, settings: &EvalSettings) -> RowResult {
    let label = row.label(problem.regime);
    let integrator = settings.integrator_for(&format!("{problem}/{label}"));
    let budget = &settings.budget;
    let a = problem.average;
    let query = |throw: Throw, parameter: Option<f64>, dominance: Option<Dominance>| LimitQuery {
        regime: problem.regime,
        average: a,
        throw,
        family: family(row.family),
        parameter,
        dominance,
        base: None,
    };
    let (old, new) = match (row.family, row.param, problem.regime) {
        (RowFamily::Maxent, _, _) => both(match maxent_shannon(a) {
            Ok(s) => Cell::Value(CellValue {
                distribution: s.distribution,
                method: "maxent".to_string(),
                numerical: false,
                stderr: None,
                quad_error: None,
                annotation: None,
                converged: true,
            }),
            Err(e) => Cell::from_error(e),
        }),
        (RowFamily::Fair, _, _) => (
            dispatched(&query(Throw::Old, None, None), integrator, budget),
            dispatched(&query(Throw::New, None, None), integrator, budget),
        ),
        (_, Some(ParamSpec::Large(d)), _) => (
            dispatched(&query(Throw::Old, None, Some(d)), integrator, budget),
            dispatched(&query(Throw::New, None, Some(d)), integrator, budget),
        ),
        (f, Some(ParamSpec::Value(x)), Regime::LargeN) => {
            let model = match f {
                RowFamily::Johnson => ModelSpec::johnson(x),
                _ => ModelSpec::multiplicity(x),
            };
            both(match model {
                Ok(model) => Cell::from_outcome(large_n_posterior(a, model, integrator, budget)),
                Err(e) => Cell::from_error(e),
            })
        }
        (RowFamily::Johnson, Some(ParamSpec::Value(k)), Regime::Exact(n)) => (
            Cell::from_outcome(johnson_posterior(n, a, k, Throw::Old)),
            Cell::from_outcome(johnson_posterior(n, a, k, Throw::New)),
        ),
        (RowFamily::Multiplicity, Some(ParamSpec::Value(l)), Regime::Exact(n)) => {
            match multiplicity_pair(n, a, l, None, integrator, budget) {
                Ok(p) => (Cell::from_result(p.old, None, p.converged), Cell::from_result(p.new, None, p.converged)),
                Err(e) => both(Cell::from_error(e)),
            }
        }
        (_, None, _) => both(Cell::Failed(format!("row {label} needs a parameter"))),
    };
    RowResult { spec: row, param: row.param_label(problem.regime), label, old, new }
}

/// Evaluates all cells in parallel; results keep the input order.
pub fn evaluate(problems: &[(ProblemId, Vec<RowSpec>)], settings: &EvalSettings) -> Vec<ProblemResult> {
    let jobs: Vec<(usize, ProblemId, RowSpec)> =
        problems.iter().enumerate().flat_map(|(i, (id, rows))| rows.iter().map(move |r| (i, *id, *r))).collect();
    let rows: Vec<(usize, RowResult)> =
        jobs.par_iter().map(|&(i, id, row)| (i, evaluate_row(id, row, settings))).collect();
    let mut out: Vec<ProblemResult> =
        problems.iter().map(|(id, _)| ProblemResult { id: *id, rows: Vec::new() }).collect();
    for (i, row) in rows {
        out[i].rows.push(row);
    }
    out
}
