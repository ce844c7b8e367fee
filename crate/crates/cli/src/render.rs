//! Output: rounded percentage rows in text and markdown, full precision in
//! CSV and JSON.
//!
//! Rounded rows follow the printed tables: each entry is rounded to 0.1 pp,
//! ties to even, and the row is not renormalized. The entropy shown
//! next to a rounded row is computed from the rounded entries.

use exdice::{Distribution, Regime, Throw, FACES};
use serde::{Deserialize, Serialize};

use crate::compute::{Cell, CellValue, ProblemResult, RowResult};

/// Percentage of probability `p`, rounded to one decimal with ties to even.
/// Values within 1e-6 of a tie count as ties, so closed forms such as
/// 5/16 round the same whatever their last bit.
pub fn round_percentage(p: f64) -> f64 {
    let scaled = p * 1000.0;
    let floor = scaled.floor();
    let rounded = if (scaled - floor - 0.5).abs() < 1e-6 {
        if floor % 2.0 == 0.0 {
            floor
        } else {
            floor + 1.0
        }
    } else {
        scaled.round()
    };
    rounded / 10.0
}

pub fn rounded_percentages(d: &Distribution) -> [f64; FACES] {
    d.probs().map(round_percentage)
}

/// Shannon entropy (nats) of a row of rounded percentages, taken as
/// probabilities without renormalization.
pub fn rounded_entropy(row: &[f64; FACES]) -> f64 {
    let h = -row.iter().map(|x| x / 100.0).filter(|r| *r > 0.0).map(|r| r * r.ln()).sum::<f64>();
    // A point mass gives -0.
    h + 0.0
}

pub fn format_row(row: &[f64; FACES]) -> String {
    let parts: Vec<String> = row.iter().map(|x| format!("{x:.1}")).collect();
    format!("({})", parts.join(", "))
}

/// `(p1, ..., p6) % [H=h nat]` as in the tables.
pub fn text_line(d: &Distribution) -> String {
    let row = rounded_percentages(d);
    format!("{} % [H={:.3} nat]", format_row(&row), rounded_entropy(&row))
}

fn cell_text(cell: &Cell) -> (String, String) {
    match cell {
        Cell::Value(v) => {
            let row = rounded_percentages(&v.distribution);
            let mark = if v.converged { "" } else { " (unconverged)" };
            (format!("{}{mark}", format_row(&row)), format!("{:.3}", rounded_entropy(&row)))
        }
        Cell::Undefined => ("undefined".to_string(), String::new()),
        Cell::Failed(e) => (format!("error: {e}"), String::new()),
    }
}

fn method_of(row: &RowResult) -> String {
    let label = |c: &Cell| match c {
        Cell::Value(v) => v.method.clone(),
        Cell::Undefined => "undefined".to_string(),
        Cell::Failed(_) => "failed".to_string(),
    };
    let (o, n) = (label(&row.old), label(&row.new));
    if o == n {
        o
    } else {
        format!("{o}/{n}")
    }
}

fn annotation_of(row: &RowResult) -> Option<String> {
    let mut notes: Vec<String> = Vec::new();
    for c in [&row.old, &row.new] {
        if let Some(a) = c.value().and_then(|v| v.annotation.clone()) {
            if !notes.contains(&a) {
                notes.push(a);
            }
        }
    }
    (!notes.is_empty()).then(|| notes.join("; "))
}

pub fn problem_title(p: &ProblemResult) -> String {
    match p.id.regime {
        Regime::Exact(n) => format!("{} (N = {n}, a = {})", p.id, p.id.average),
        Regime::LargeN => format!("{} (N large, a = {})", p.id, p.id.average),
    }
}

pub fn markdown(problems: &[ProblemResult]) -> String {
    let mut out = String::new();
    for (i, p) in problems.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("## {}\n\n", problem_title(p)));
        out.push_str("| model | param | old (%) | H old | new (%) | H new | method | note |\n");
        out.push_str("|---|---|---|---|---|---|---|---|\n");
        for row in &p.rows {
            let (old, h_old) = cell_text(&row.old);
            let (new, h_new) = cell_text(&row.new);
            out.push_str(&format!(
                "| {} | {} | {old} | {h_old} | {new} | {h_new} | {} | {} |\n",
                row.spec.family_name(),
                row.param.as_deref().unwrap_or(""),
                method_of(row),
                annotation_of(row).unwrap_or_default(),
            ));
        }
    }
    out
}

pub fn csv(problems: &[ProblemResult]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["problem", "model", "param", "throw"];
    let faces = ["p1", "p2", "p3", "p4", "p5", "p6"];
    header.extend(faces);
    header.extend(["entropy", "method", "max_stderr", "annotation"]);
    w.write_record(&header).expect("in-memory write");
    for p in problems {
        for row in &p.rows {
            for (throw, cell) in [("old", &row.old), ("new", &row.new)] {
                let mut rec = vec![
                    p.id.to_string(),
                    row.spec.family_name().to_string(),
                    row.param.clone().unwrap_or_default(),
                    throw.to_string(),
                ];
                match cell {
                    Cell::Value(v) => {
                        rec.extend(v.distribution.probs().iter().map(|x| format!("{}", 100.0 * x)));
                        rec.push(format!("{}", exdice::shannon_entropy(&v.distribution)));
                        rec.push(v.method.clone());
                        rec.push(stderr_max(v).map(|s| format!("{}", 100.0 * s)).unwrap_or_default());
                        rec.push(v.annotation.clone().unwrap_or_default());
                    }
                    Cell::Undefined | Cell::Failed(_) => {
                        rec.extend(std::iter::repeat_n(String::new(), FACES + 1));
                        rec.push(if matches!(cell, Cell::Undefined) { "undefined" } else { "failed" }.to_string());
                        rec.push(String::new());
                        rec.push(match cell {
                            Cell::Failed(e) => e.clone(),
                            _ => String::new(),
                        });
                    }
                }
                w.write_record(&rec).expect("in-memory write");
            }
        }
    }
    String::from_utf8(w.into_inner().expect("flushed")).expect("utf-8")
}

fn stderr_max(v: &CellValue) -> Option<f64> {
    v.stderr.map(|s| s.iter().copied().fold(0.0, f64::max))
}

/// JSON problem identification: `regime` is `N` or `"large"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonProblem {
    pub regime: JsonRegime,
    pub avg: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonRegime {
    N(u32),
    Large(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonCell {
    /// Probabilities at full precision; `null` when undefined.
    pub probs: Option<[f64; FACES]>,
    pub entropy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonStderr {
    pub old: Option<[f64; FACES]>,
    pub new: Option<[f64; FACES]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonRow {
    pub model: String,
    pub param: Option<String>,
    pub old: JsonCell,
    pub new: JsonCell,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<JsonStderr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub converged: bool,
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonDocument {
    pub problem: JsonProblem,
    pub rows: Vec<JsonRow>,
}

fn json_cell(cell: &Cell) -> JsonCell {
    match cell {
        Cell::Value(v) => JsonCell {
            probs: Some(*v.distribution.probs()),
            entropy: Some(exdice::shannon_entropy(&v.distribution)),
            annotation: v.annotation.clone(),
            error: None,
        },
        Cell::Undefined => JsonCell { probs: None, entropy: None, annotation: None, error: None },
        Cell::Failed(e) => JsonCell { probs: None, entropy: None, annotation: None, error: Some(e.clone()) },
    }
}

pub fn json_document(p: &ProblemResult) -> JsonDocument {
    let regime = match p.id.regime {
        Regime::Exact(n) => JsonRegime::N(n),
        Regime::LargeN => JsonRegime::Large("large".to_string()),
    };
    let rows = p
        .rows
        .iter()
        .map(|row| {
            let se = |t: Throw| row.cell(t).value().and_then(|v| v.stderr);
            let stderr = (se(Throw::Old).is_some() || se(Throw::New).is_some())
                .then(|| JsonStderr { old: se(Throw::Old), new: se(Throw::New) });
            let converged = [&row.old, &row.new].iter().all(|c| c.value().is_none_or(|v| v.converged));
            JsonRow {
                model: row.spec.family_name().to_string(),
                param: row.param.clone(),
                old: json_cell(&row.old),
                new: json_cell(&row.new),
                method: method_of(row),
                stderr,
                annotation: annotation_of(row),
                converged,
            }
        })
        .collect();
    JsonDocument { problem: JsonProblem { regime, avg: p.id.average.to_string() }, rows }
}

/// One JSON document per problem, one per line.
pub fn json(problems: &[ProblemResult]) -> String {
    problems.iter().map(|p| serde_json::to_string(&json_document(p)).expect("serializable") + "\n").collect()
}
