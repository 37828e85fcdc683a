//! Black-box utilities over paths.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::Path;

/// A scalar design criterion. Implementations must be pure: the same path
/// always yields the same value.
pub trait Utility: Sync {
    fn evaluate(&self, path: &[usize]) -> Result<f64>;
}

impl<F> Utility for F
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    fn evaluate(&self, path: &[usize]) -> Result<f64> {
        Ok(self(path))
    }
}

/// Evaluates `u` and rejects non-finite values.
pub fn evaluate_checked<U: Utility + ?Sized>(u: &U, path: &[usize]) -> Result<f64> {
    let value = u.evaluate(path)?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Evaluation { path: path.to_vec(), value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Maximize,
    #[default]
    Minimize,
}

impl Mode {
    /// Whether `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Mode::Maximize => a > b,
            Mode::Minimize => a < b,
        }
    }

    /// `+1` for ascent, `-1` for descent.
    pub fn sign(self) -> f64 {
        match self {
            Mode::Maximize => 1.0,
            Mode::Minimize => -1.0,
        }
    }

    /// Index of the first extremal value.
    pub fn argbest(self, values: impl IntoIterator<Item = f64>) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in values.into_iter().enumerate() {
            if best.is_none_or(|(_, b)| self.better(v, b)) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| i)
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" | "minimize" => Ok(Mode::Minimize),
            "max" | "maximize" => Ok(Mode::Maximize),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// Utility looked up from a `path,utility` table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UtilityTable {
    values: HashMap<Path, f64>,
}

impl UtilityTable {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Path, f64)>) -> Self {
        Self { values: pairs.into_iter().collect() }
    }

    /// Parses CSV rows `1-2-3,0.25`. Blank lines, `#` lines, and a
    /// `path,utility` header are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.eq_ignore_ascii_case("path,utility") {
                continue;
            }
            let err = |message: String| Error::Parse { line: idx + 1, message };
            let (p, v) = line.split_once(',').ok_or_else(|| err(format!("expected `path,utility`, got {line:?}")))?;
            let path: Path = p.parse().map_err(|e: Error| err(e.to_string()))?;
            let value: f64 = v.trim().parse().map_err(|_| err(format!("invalid utility value {:?}", v.trim())))?;
            if values.insert(path.clone(), value).is_some() {
                return Err(err(format!("duplicate path {path}")));
            }
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, path: &[usize]) -> Option<f64> {
        self.values.get(&Path::new(path.to_vec())).copied()
    }

    /// Rows sorted by path.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<_> = self.values.iter().collect();
        rows.sort_by(|a, b| a.0.cmp(b.0));
        let mut out = String::from("path,utility\n");
        for (p, v) in rows {
            let _ = writeln!(out, "{p},{v:.17e}");
        }
        out
    }
}

impl Utility for UtilityTable {
    fn evaluate(&self, path: &[usize]) -> Result<f64> {
        self.get(path).ok_or_else(|| Error::MissingUtility(path.to_vec()))
    }
}
