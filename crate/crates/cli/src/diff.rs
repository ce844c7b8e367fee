//! Comparison of computed tables with the published values.
//!
//! Cells are compared after rounding to 0.1 pp. Closed-form and analytic
//! cells get the tight percentage tolerance, numerically integrated cells
//! the loose one. Printed entropies are compared with the entropy of the
//! rounded row; entropies printed with fewer than three decimals, and those
//! of uniform rows, use the coarse entropy tolerance.

use std::fmt::Write as _;

use exdice::{Throw, FACES};
use serde::{Deserialize, Serialize};

use crate::compute::{Cell, ProblemResult};
use crate::reference::{RefThrow, RefValue, ReferenceTable};
use crate::render::{format_row, rounded_entropy, rounded_percentages};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Percentage points, closed-form and analytic cells.
    pub closed_form_pp: f64,
    /// Percentage points, numerically integrated cells.
    pub numerical_pp: f64,
    /// Nats.
    pub entropy: f64,
    /// Nats, for coarsely printed or uniform entropies.
    pub entropy_coarse: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { closed_form_pp: 0.05, numerical_pp: 0.3, entropy: 0.002, entropy_coarse: 0.005 }
    }
}

impl Tolerances {
    /// Smoke-test tolerances: 0.5 pp for every cell.
    pub fn fast() -> Self {
        Tolerances { closed_form_pp: 0.5, numerical_pp: 0.5, ..Tolerances::default() }
    }
}

/// Slack for values that sit exactly on a tolerance after rounding.
const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Pass,
    Fail(String),
    /// No published value for this cell.
    Unreferenced,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellDiff {
    pub problem: String,
    pub row: String,
    pub throw: Throw,
    /// Largest per-face deviation in percentage points.
    pub max_pp: Option<f64>,
    pub entropy_dev: Option<f64>,
    pub tolerance_pp: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiffReport {
    pub cells: Vec<CellDiff>,
}

impl DiffReport {
    pub fn failures(&self) -> impl Iterator<Item = &CellDiff> {
        self.cells.iter().filter(|c| matches!(c.outcome, Outcome::Fail(_)))
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn compared(&self) -> usize {
        self.cells.iter().filter(|c| c.outcome != Outcome::Unreferenced).count()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.cells {
            let throw = match c.throw {
                Throw::Old => "old",
                Throw::New => "new",
            };
            let dev = c.max_pp.map_or("-".to_string(), |d| format!("{d:.2} pp"));
            let ent = c.entropy_dev.map_or("-".to_string(), |d| format!("{d:.4} nat"));
            let status = match &c.outcome {
                Outcome::Pass => "ok".to_string(),
                Outcome::Fail(why) => format!("FAIL: {why}"),
                Outcome::Unreferenced => "no reference".to_string(),
            };
            let _ = writeln!(
                out,
                "{} {} {throw}: max dev {dev} (tol {:.2} pp), entropy dev {ent}: {status}",
                c.problem, c.row, c.tolerance_pp
            );
        }
        let failed = self.failures().count();
        let _ = writeln!(out, "{} cells compared, {failed} beyond tolerance", self.compared());
        out
    }
}

fn ref_throw(t: Throw) -> RefThrow {
    match t {
        Throw::Old => RefThrow::Old,
        Throw::New => RefThrow::New,
    }
}

fn is_uniform_row(row: &[f64; FACES]) -> bool {
    row.iter().all(|x| (x - row[0]).abs() < SLACK)
}

pub fn diff(results: &[ProblemResult], reference: &ReferenceTable, tol: &Tolerances) -> DiffReport {
    let mut report = DiffReport::default();
    for p in results {
        let problem = p.id.to_string();
        let table = reference.problem(&problem);
        for row in &p.rows {
            for throw in [Throw::Old, Throw::New] {
                let cell = row.cell(throw);
                let numerical = cell.value().is_some_and(|v| v.numerical);
                let tolerance_pp = if numerical { tol.numerical_pp } else { tol.closed_form_pp };
                let mut d = CellDiff {
                    problem: problem.clone(),
                    row: row.label.clone(),
                    throw,
                    max_pp: None,
                    entropy_dev: None,
                    tolerance_pp,
                    outcome: Outcome::Pass,
                };
                let Some(r) = table.and_then(|t| t.cell(&row.label, ref_throw(throw))) else {
                    d.outcome = Outcome::Unreferenced;
                    report.cells.push(d);
                    continue;
                };
                let expected = match &r.value {
                    RefValue::Percentages(x) => Some(*x),
                    RefValue::Uniform => Some(rounded_percentages(&exdice::Distribution::uniform())),
                    RefValue::Undefined => None,
                };
                d.outcome = match (cell, expected) {
                    (Cell::Undefined, None) => Outcome::Pass,
                    (Cell::Undefined, Some(_)) => Outcome::Fail("computed undefined, published a value".into()),
                    (Cell::Failed(e), _) => Outcome::Fail(format!("evaluation failed: {e}")),
                    (Cell::Value(_), None) => Outcome::Fail("published undefined, computed a value".into()),
                    (Cell::Value(v), Some(expected)) => {
                        let got = rounded_percentages(&v.distribution);
                        let max_pp = got.iter().zip(&expected).map(|(g, e)| (g - e).abs()).fold(0.0, f64::max);
                        d.max_pp = Some(max_pp);
                        let mut problems = Vec::new();
                        if max_pp > tolerance_pp + SLACK {
                            problems.push(format!("{} vs published {}", format_row(&got), format_row(&expected)));
                        }
                        if let Some(e) = r.entropy {
                            let dev = (rounded_entropy(&got) - e.value).abs();
                            d.entropy_dev = Some(dev);
                            let limit = if e.decimals < 3 || is_uniform_row(&expected) {
                                tol.entropy_coarse
                            } else {
                                tol.entropy
                            };
                            if dev > limit + SLACK {
                                problems.push(format!("entropy off by {dev:.4} nat (tol {limit})"));
                            }
                        }
                        if problems.is_empty() {
                            Outcome::Pass
                        } else {
                            Outcome::Fail(problems.join("; "))
                        }
                    }
                };
                report.cells.push(d);
            }
        }
    }
    report
}
