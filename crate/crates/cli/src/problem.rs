//! Problems (`n{N}-a{avg}`, `large-a{avg}`) and the rows of their tables.

use std::fmt;
use std::str::FromStr;

use exdice::{Average, Dominance, Regime};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemId {
    pub regime: Regime,
    pub average: Average,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid problem id {0:?} (expected n<N>-a<avg> or large-a<avg>)")]
pub struct ProblemParseError(pub String);

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.regime {
            Regime::Exact(n) => write!(f, "n{n}-a{}", self.average),
            Regime::LargeN => write!(f, "large-a{}", self.average),
        }
    }
}

impl FromStr for ProblemId {
    type Err = ProblemParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ProblemParseError(s.to_string());
        let (head, avg) = s.split_once("-a").ok_or_else(bad)?;
        let average: Average = avg.parse().map_err(|_| bad())?;
        let regime = if head == "large" {
            Regime::LargeN
        } else {
            let n: u32 = head.strip_prefix('n').ok_or_else(bad)?.parse().map_err(|_| bad())?;
            if n == 0 {
                return Err(bad());
            }
            Regime::Exact(n)
        };
        Ok(ProblemId { regime, average })
    }
}

impl ProblemId {
    /// The fifteen tables: N = 1, 2, 6, 12 and large N, each for averages
    /// 6, 5 and 7/2.
    pub fn published_set() -> Vec<ProblemId> {
        let regimes = [Regime::Exact(1), Regime::Exact(2), Regime::Exact(6), Regime::Exact(12), Regime::LargeN];
        let averages = ["6", "5", "7/2"];
        regimes
            .iter()
            .flat_map(|&regime| {
                averages.iter().map(move |a| ProblemId { regime, average: a.parse().expect("valid average") })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowFamily {
    /// Maximum Shannon entropy under the average constraint.
    Maxent,
    Fair,
    Johnson,
    Multiplicity,
}

/// A model parameter, or "large" described by which side dominates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamSpec {
    Value(f64),
    Large(Dominance),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowSpec {
    pub family: RowFamily,
    pub param: Option<ParamSpec>,
}

impl RowSpec {
    pub fn family_name(&self) -> &'static str {
        match self.family {
            RowFamily::Maxent => "me",
            RowFamily::Fair => "fair",
            RowFamily::Johnson => "johnson",
            RowFamily::Multiplicity => "multiplicity",
        }
    }

    /// Parameter as printed: a number, `large`, or at large N `large/...`
    /// naming the dominant side.
    pub fn param_label(&self, regime: Regime) -> Option<String> {
        self.param.map(|p| match (p, regime) {
            (ParamSpec::Value(x), _) => format!("{x}"),
            (ParamSpec::Large(_), Regime::Exact(_)) => "large".to_string(),
            (ParamSpec::Large(Dominance::Parameter), Regime::LargeN) => "large/param-dominates".to_string(),
            (ParamSpec::Large(Dominance::Data), Regime::LargeN) => "large/data-dominates".to_string(),
        })
    }

    /// Row key shared with the reference table, e.g. `johnson:5`.
    pub fn label(&self, regime: Regime) -> String {
        match self.param_label(regime) {
            Some(p) => format!("{}:{p}", self.family_name()),
            None => self.family_name().to_string(),
        }
    }
}

/// Rows of one table: maximum entropy, fair throws, then each family with
/// its parameters followed by the large-parameter rows (one at finite N,
/// one per dominance at large N).
pub fn table_rows(regime: Regime, johnson: &[f64], multiplicity: &[f64], large_rows: bool) -> Vec<RowSpec> {
    let mut rows =
        vec![RowSpec { family: RowFamily::Maxent, param: None }, RowSpec { family: RowFamily::Fair, param: None }];
    for (family, params) in [(RowFamily::Johnson, johnson), (RowFamily::Multiplicity, multiplicity)] {
        rows.extend(params.iter().map(|&x| RowSpec { family, param: Some(ParamSpec::Value(x)) }));
        if large_rows {
            let dominances: &[Dominance] = match regime {
                Regime::Exact(_) => &[Dominance::Parameter],
                Regime::LargeN => &[Dominance::Parameter, Dominance::Data],
            };
            rows.extend(dominances.iter().map(|&d| RowSpec { family, param: Some(ParamSpec::Large(d)) }));
        }
    }
    rows
}
