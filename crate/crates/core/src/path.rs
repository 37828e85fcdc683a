use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use crate::error::Error;

/// A design: fixed-length sequence of 0-based vertex indices.
///
/// Displays as dash-joined 1-based labels, e.g. `1-2-3`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Path(Vec<usize>);

impl Path {
    pub fn new(nodes: Vec<usize>) -> Self {
        Self(nodes)
    }

    /// Builds a path from 1-based vertex labels.
    pub fn from_labels(labels: &[usize]) -> Self {
        Self(labels.iter().map(|&l| l - 1).collect())
    }

    pub fn nodes(&self) -> &[usize] {
        &self.0
    }

    pub fn into_nodes(self) -> Vec<usize> {
        self.0
    }
}

impl Deref for Path {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for Path {
    fn from(nodes: Vec<usize>) -> Self {
        Self(nodes)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{}", v + 1)?;
        }
        Ok(())
    }
}

impl FromStr for Path {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Parse { line: 0, message: "empty path".into() });
        }
        s.split('-')
            .map(|tok| match tok.trim().parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(Error::Parse { line: 0, message: format!("invalid vertex label {tok:?} in path {s:?}") }),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Path)
    }
}
