use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::navmesh::NavMesh;

/// Tolerance on `sum(lambda) = 1`.
pub const LAG_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LagMode {
    /// Lag weights are policy parameters and receive gradient updates.
    #[default]
    Optimized,
    /// Lag weights follow the normalized harmonic sequence and are never updated.
    FixedHarmonic,
}

impl std::str::FromStr for LagMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "opt" | "optimized" => Ok(Self::Optimized),
            "fixed" | "fixed-harmonic" => Ok(Self::FixedHarmonic),
            other => Err(Error::Config(format!("unknown lag mode {other:?}"))),
        }
    }
}

/// `lambda_i = (1/i) / sum_{m=1..k} 1/m`.
pub fn lag_weights_fixed_harmonic(k: usize) -> Vec<f64> {
    let total: f64 = (1..=k).map(|m| 1.0 / m as f64).sum();
    (1..=k).map(|i| (1.0 / i as f64) / total).collect()
}

/// Policy parameter vector: initial Bernoulli parameters (one per vertex),
/// transition parameters (one per arc id) and optional lag weights.
///
/// The flat layout used for gradients is `initial ++ transition ++ lag_weights`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    initial: Vec<f64>,
    transition: Vec<f64>,
    lag_weights: Option<Vec<f64>>,
    lag_mode: LagMode,
}

impl PolicyParams {
    pub fn new(
        mesh: &NavMesh,
        initial: Vec<f64>,
        transition: Vec<f64>,
        lag_weights: Option<Vec<f64>>,
        lag_mode: LagMode,
    ) -> Result<Self> {
        let params = Self { initial, transition, lag_weights, lag_mode };
        params.validate(mesh)?;
        Ok(params)
    }

    /// Every initial and transition parameter set to `value`, no lag weights.
    pub fn uniform(mesh: &NavMesh, value: f64) -> Result<Self> {
        Self::new(mesh, vec![value; mesh.num_vertices()], vec![value; mesh.num_arcs()], None, LagMode::Optimized)
    }

    /// Attaches lag weights for an order-`k` policy: uniform `1/k` when
    /// optimized, harmonic when fixed.
    pub fn with_default_lags(mut self, k: usize, mode: LagMode) -> Self {
        self.lag_weights = Some(match mode {
            LagMode::Optimized => vec![1.0 / k as f64; k],
            LagMode::FixedHarmonic => lag_weights_fixed_harmonic(k),
        });
        self.lag_mode = mode;
        self
    }

    pub fn with_lag_weights(mut self, weights: Option<Vec<f64>>, mode: LagMode) -> Self {
        self.lag_weights = weights;
        self.lag_mode = mode;
        self
    }

    /// Forces every trajectory to start at `vertex` (`p_j = delta_ij`).
    pub fn with_fixed_start(mut self, vertex: usize) -> Self {
        for (j, p) in self.initial.iter_mut().enumerate() {
            *p = if j == vertex { 1.0 } else { 0.0 };
        }
        self
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    pub fn lag_weights(&self) -> Option<&[f64]> {
        self.lag_weights.as_deref()
    }

    pub fn lag_mode(&self) -> LagMode {
        self.lag_mode
    }

    pub fn num_params(&self) -> usize {
        self.initial.len() + self.transition.len() + self.lag_weights.as_ref().map_or(0, Vec::len)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        out.extend_from_slice(&self.initial);
        out.extend_from_slice(&self.transition);
        if let Some(l) = &self.lag_weights {
            out.extend_from_slice(l);
        }
        out
    }

    /// Rebuilds parameters from a flat vector with this instance's layout.
    pub fn from_flat_like(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.num_params() {
            return Err(Error::Contract(format!(
                "flat parameter vector has length {}, expected {}",
                flat.len(),
                self.num_params()
            )));
        }
        let (initial, rest) = flat.split_at(self.initial.len());
        let (transition, lag) = rest.split_at(self.transition.len());
        Ok(Self {
            initial: initial.to_vec(),
            transition: transition.to_vec(),
            lag_weights: self.lag_weights.as_ref().map(|_| lag.to_vec()),
            lag_mode: self.lag_mode,
        })
    }

    pub fn validate(&self, mesh: &NavMesh) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.initial.len() != mesh.num_vertices() {
            return bad(format!("{} initial parameters for {} vertices", self.initial.len(), mesh.num_vertices()));
        }
        if self.transition.len() != mesh.num_arcs() {
            return bad(format!("{} transition parameters for {} arcs", self.transition.len(), mesh.num_arcs()));
        }
        for (k, &p) in self.initial.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("initial parameter of v{} is {p}, outside [0, 1]", k + 1));
            }
        }
        for (a, &p) in self.transition.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                let (i, j) = mesh.arc(a);
                return bad(format!("transition parameter of arc ({}, {}) is {p}, outside [0, 1]", i + 1, j + 1));
            }
        }
        check_group(&self.initial).map_err(|e| Error::InvalidParams(format!("initial parameters: {e}")))?;
        for v in 0..mesh.num_vertices() {
            let range = mesh.out_arc_ids(v);
            if range.is_empty() {
                continue;
            }
            check_group(&self.transition[range])
                .map_err(|e| Error::InvalidParams(format!("transitions out of v{}: {e}", v + 1)))?;
        }
        if let Some(l) = &self.lag_weights {
            if l.is_empty() {
                return bad("lag weights must not be empty".into());
            }
            if l.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return bad(format!("lag weights must be nonnegative, got {l:?}"));
            }
            let sum: f64 = l.iter().sum();
            if (sum - 1.0).abs() > LAG_SUM_TOL {
                return bad(format!("lag weights sum to {sum}, expected 1"));
            }
        }
        Ok(())
    }

    /// JSON document with 1-based transition endpoints.
    pub fn to_document(&self, mesh: &NavMesh) -> ParamsDocument {
        ParamsDocument {
            initial: self.initial.clone(),
            transitions: self
                .transition
                .iter()
                .enumerate()
                .map(|(a, &value)| {
                    let (from, to) = mesh.arc(a);
                    TransitionEntry { from: from + 1, to: to + 1, value }
                })
                .collect(),
            lag_weights: self.lag_weights.clone(),
            lag_mode: self.lag_mode,
        }
    }

    pub fn from_document(doc: &ParamsDocument, mesh: &NavMesh) -> Result<Self> {
        let mut transition = vec![f64::NAN; mesh.num_arcs()];
        for t in &doc.transitions {
            if t.from == 0 || t.to == 0 {
                return Err(Error::InvalidParams(format!("transition ({}, {}) is not 1-based", t.from, t.to)));
            }
            let a = mesh.arc_id(t.from - 1, t.to - 1).ok_or_else(|| {
                Error::InvalidParams(format!("transition ({}, {}) is not an arc of the mesh", t.from, t.to))
            })?;
            if !transition[a].is_nan() {
                return Err(Error::InvalidParams(format!("transition ({}, {}) listed twice", t.from, t.to)));
            }
            transition[a] = t.value;
        }
        if let Some(a) = transition.iter().position(|x| x.is_nan()) {
            let (i, j) = mesh.arc(a);
            return Err(Error::InvalidParams(format!("missing transition parameter for arc ({}, {})", i + 1, j + 1)));
        }
        Self::new(mesh, doc.initial.clone(), transition, doc.lag_weights.clone(), doc.lag_mode)
    }

    pub fn to_json(&self, mesh: &NavMesh) -> String {
        serde_json::to_string_pretty(&self.to_document(mesh)).expect("parameter document serializes")
    }

    pub fn from_json(text: &str, mesh: &NavMesh) -> Result<Self> {
        let doc: ParamsDocument =
            serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
        Self::from_document(&doc, mesh)
    }
}

/// A group is well defined when it has positive mass, and an exact 1 is the
/// only positive entry.
fn check_group(group: &[f64]) -> std::result::Result<(), String> {
    let positive = group.iter().filter(|&&p| p > 0.0).count();
    if positive == 0 {
        return Err("all parameters are zero".into());
    }
    if positive > 1 && group.contains(&1.0) {
        return Err("a parameter equal to 1 must be the only positive entry".into());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEntry {
    pub from: usize,
    pub to: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsDocument {
    pub initial: Vec<f64>,
    pub transitions: Vec<TransitionEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lag_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub lag_mode: LagMode,
}
