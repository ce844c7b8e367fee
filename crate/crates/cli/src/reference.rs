//! Published table values, one record per cell, embedded at build time.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::problem::ProblemId;

const EMBEDDED: &str = include_str!("../data/reference.csv");

/// Which throw a reference cell describes. Maximum-entropy rows hold for
/// both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RefThrow {
    Old,
    New,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RefValue {
    /// Percentages as printed, not renormalized.
    Percentages([f64; 6]),
    /// Printed in words as the uniform distribution.
    Uniform,
    Undefined,
}

/// A printed entropy and the number of decimals it was printed with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefEntropy {
    pub value: f64,
    pub decimals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefCell {
    pub value: RefValue,
    pub entropy: Option<RefEntropy>,
    pub annotation: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReferenceProblem {
    /// Row label and throw to cell, in file order.
    pub cells: Vec<((String, RefThrow), RefCell)>,
}

impl ReferenceProblem {
    /// The cell for a row and throw. Rows stated for both throws, and the
    /// blanket `all-exchangeable` row of a contradictory problem, match any
    /// throw.
    pub fn cell(&self, row: &str, throw: RefThrow) -> Option<&RefCell> {
        let find =
            |label: &str, t: RefThrow| self.cells.iter().find(|((l, th), _)| l == label && *th == t).map(|(_, c)| c);
        find(row, throw).or_else(|| find(row, RefThrow::Both)).or_else(|| {
            if row == "me" {
                None
            } else {
                find("all-exchangeable", throw)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTable {
    problems: BTreeMap<String, ReferenceProblem>,
    order: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReferenceError {
    #[error("reference data: {0}")]
    Csv(#[from] csv::Error),
    #[error("reference data, record {record}: {detail}")]
    Field { record: usize, detail: String },
}

#[derive(Debug, Deserialize)]
struct Record {
    problem: String,
    row: String,
    throw: String,
    probs: String,
    entropy: String,
    annotation: String,
}

fn parse_value(s: &str) -> Result<RefValue, String> {
    match s {
        "uniform" => Ok(RefValue::Uniform),
        "undefined" => Ok(RefValue::Undefined),
        _ => {
            let parts: Vec<f64> = s
                .split(';')
                .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
                .collect::<Result<_, _>>()?;
            let arr: [f64; 6] = parts.try_into().map_err(|v: Vec<f64>| format!("{} values, expected 6", v.len()))?;
            Ok(RefValue::Percentages(arr))
        }
    }
}

fn parse_entropy(s: &str) -> Result<Option<RefEntropy>, String> {
    if s.is_empty() {
        return Ok(None);
    }
    let value = s.parse::<f64>().map_err(|e| format!("entropy {s:?}: {e}"))?;
    let decimals = s.split_once('.').map_or(0, |(_, frac)| frac.len());
    Ok(Some(RefEntropy { value, decimals }))
}

impl ReferenceTable {
    pub fn embedded() -> Self {
        Self::parse(EMBEDDED).expect("embedded reference data is well formed")
    }

    pub fn parse(text: &str) -> Result<Self, ReferenceError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut problems: BTreeMap<String, ReferenceProblem> = BTreeMap::new();
        let mut order = Vec::new();
        for (i, rec) in reader.deserialize::<Record>().enumerate() {
            let rec = rec?;
            let field = |detail: String| ReferenceError::Field { record: i + 1, detail };
            let throw = match rec.throw.as_str() {
                "old" => RefThrow::Old,
                "new" => RefThrow::New,
                "both" => RefThrow::Both,
                other => return Err(field(format!("throw {other:?}"))),
            };
            rec.problem.parse::<ProblemId>().map_err(|e| field(e.to_string()))?;
            let cell = RefCell {
                value: parse_value(&rec.probs).map_err(field)?,
                entropy: parse_entropy(&rec.entropy).map_err(field)?,
                annotation: (!rec.annotation.is_empty()).then_some(rec.annotation),
            };
            if !problems.contains_key(&rec.problem) {
                order.push(rec.problem.clone());
            }
            problems.entry(rec.problem).or_default().cells.push(((rec.row, throw), cell));
        }
        Ok(ReferenceTable { problems, order })
    }

    pub fn problem(&self, id: &str) -> Option<&ReferenceProblem> {
        self.problems.get(id)
    }

    /// Problem identifiers in table order.
    pub fn problem_ids(&self) -> &[String] {
        &self.order
    }
}
