//! Parametric Markov path policies.
//!
//! Three families share the same initial/transition parameterization:
//!
//! * [`PolicyKind::FirstOrder`]: memoryless chain, `P(ζ) = π(ζ1) Π π(ζt+1 | ζt)`.
//! * [`PolicyKind::HigherOrder`]: Raftery mixture, every step past the first
//!   `k - 1` uses `Σ_i λ_i π(ζt+1 | ζt+1-i)` with one-step transitions.
//! * [`PolicyKind::GeneralizedHigherOrder`]: as above, but lag `i` uses the
//!   `i`-step transition probability, summed over explicit mesh walks.

mod inclusion;
mod params;

use std::sync::Arc;

pub use inclusion::{InclusionGroup, CLAMP_EPS};
pub use params::{lag_weights_fixed_harmonic, LagMode, ParamsDocument, PolicyParams, TransitionEntry, LAG_SUM_TOL};

use crate::error::{Error, Result};
use crate::navmesh::{build_reachability, NavMesh, ReachabilityIndex};
use crate::path::Path;

/// Default cap on the number of paths produced by exhaustive enumeration.
pub const DEFAULT_SUPPORT_CAP: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    FirstOrder,
    HigherOrder,
    GeneralizedHigherOrder,
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" | "first-order" => Ok(Self::FirstOrder),
            "higher" | "higher-order" => Ok(Self::HigherOrder),
            "generalized" | "generalized-higher-order" => Ok(Self::GeneralizedHigherOrder),
            other => Err(Error::Config(format!("unknown policy kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::FirstOrder => "first",
            Self::HigherOrder => "higher",
            Self::GeneralizedHigherOrder => "generalized",
        })
    }
}

/// Gradient of `log P(ζ)` with respect to every policy parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPmfGradient {
    pub d_initial: Vec<f64>,
    /// Indexed by arc id.
    pub d_transition: Vec<f64>,
    /// Present for higher-order kinds; all zeros under [`LagMode::FixedHarmonic`].
    pub d_lag: Option<Vec<f64>>,
}

impl LogPmfGradient {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.d_initial.len() + self.d_transition.len() + 4);
        out.extend_from_slice(&self.d_initial);
        out.extend_from_slice(&self.d_transition);
        if let Some(l) = &self.d_lag {
            out.extend_from_slice(l);
        }
        out
    }
}

/// A fully specified path distribution. Immutable: build a new one with
/// [`PathDistribution::with_params`] when parameters change.
#[derive(Debug, Clone)]
pub struct PathDistribution {
    kind: PolicyKind,
    order: usize,
    path_length: usize,
    mesh: Arc<NavMesh>,
    reach: Option<Arc<ReachabilityIndex>>,
    params: PolicyParams,
    lags: Vec<f64>,
    initial: InclusionGroup,
    groups: Vec<Option<InclusionGroup>>,
    arc_prob: Vec<f64>,
    /// Generalized kind only: `multi_step[r - 1][i][n]` is the `r`-step
    /// probability to the `n`-th target of `reach.reach(r, i)`.
    multi_step: Vec<Vec<Vec<f64>>>,
}

impl PathDistribution {
    pub fn first_order(mesh: Arc<NavMesh>, params: PolicyParams, path_length: usize) -> Result<Self> {
        Self::new(PolicyKind::FirstOrder, mesh, params, 1, path_length)
    }

    /// Builds and validates a distribution. For higher-order kinds missing lag
    /// weights are filled in (uniform when optimized, harmonic when fixed).
    pub fn new(
        kind: PolicyKind,
        mesh: Arc<NavMesh>,
        params: PolicyParams,
        order: usize,
        path_length: usize,
    ) -> Result<Self> {
        let reach = match kind {
            PolicyKind::GeneralizedHigherOrder if order >= 1 => Some(Arc::new(build_reachability(&mesh, order)?)),
            _ => None,
        };
        Self::assemble(kind, mesh, reach, params, order, path_length)
    }

    /// Same structure, new parameters. Reuses the reachability index.
    pub fn with_params(&self, params: PolicyParams) -> Result<Self> {
        Self::assemble(self.kind, self.mesh.clone(), self.reach.clone(), params, self.order, self.path_length)
    }

    fn assemble(
        kind: PolicyKind,
        mesh: Arc<NavMesh>,
        reach: Option<Arc<ReachabilityIndex>>,
        mut params: PolicyParams,
        order: usize,
        path_length: usize,
    ) -> Result<Self> {
        if path_length == 0 {
            return Err(Error::Contract("path length must be at least 1".into()));
        }
        if order == 0 {
            return Err(Error::Contract("policy order must be at least 1".into()));
        }
        let lags = match kind {
            PolicyKind::FirstOrder => {
                if order != 1 {
                    return Err(Error::Contract(format!("first-order policy requires order 1, got {order}")));
                }
                if params.lag_weights().is_some() {
                    return Err(Error::Contract("first-order policy takes no lag weights".into()));
                }
                vec![1.0]
            }
            PolicyKind::HigherOrder | PolicyKind::GeneralizedHigherOrder => {
                if path_length <= order {
                    return Err(Error::Contract(format!(
                        "higher-order policy of order {order} requires path length > {order}, got {path_length}"
                    )));
                }
                match params.lag_weights() {
                    None => {
                        let mode = params.lag_mode();
                        params = params.with_default_lags(order, mode);
                    }
                    Some(l) if l.len() != order => {
                        return Err(Error::Contract(format!("{} lag weights for order {order}", l.len())));
                    }
                    Some(l) if params.lag_mode() == LagMode::FixedHarmonic => {
                        let harmonic = lag_weights_fixed_harmonic(order);
                        if l.iter().zip(&harmonic).any(|(a, b)| (a - b).abs() > LAG_SUM_TOL) {
                            return Err(Error::InvalidParams(
                                "fixed-harmonic lag mode requires the normalized harmonic weights".into(),
                            ));
                        }
                    }
                    Some(_) => {}
                }
                params.lag_weights().unwrap().to_vec()
            }
        };
        params.validate(&mesh)?;

        let initial = InclusionGroup::new(params.initial())
            .ok_or_else(|| Error::DegenerateDistribution("all initial parameters are zero".into()))?;
        let groups: Vec<Option<InclusionGroup>> =
            (0..mesh.num_vertices()).map(|v| InclusionGroup::new(&params.transition()[mesh.out_arc_ids(v)])).collect();
        let mut arc_prob = vec![0.0; mesh.num_arcs()];
        for (v, g) in groups.iter().enumerate() {
            if let Some(g) = g {
                arc_prob[mesh.out_arc_ids(v)].copy_from_slice(g.probs());
            }
        }

        let multi_step = match &reach {
            Some(idx) => (1..=order)
                .map(|r| {
                    (0..mesh.num_vertices())
                        .map(|i| {
                            idx.reach(r, i)
                                .iter()
                                .map(|x| x.walks.iter().map(|w| w.iter().map(|&a| arc_prob[a]).product::<f64>()).sum())
                                .collect()
                        })
                        .collect()
                })
                .collect(),
            None => Vec::new(),
        };

        Ok(Self { kind, order, path_length, mesh, reach, params, lags, initial, groups, arc_prob, multi_step })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn path_length(&self) -> usize {
        self.path_length
    }

    pub fn mesh(&self) -> &NavMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> Arc<NavMesh> {
        self.mesh.clone()
    }

    pub fn reachability(&self) -> Option<&ReachabilityIndex> {
        self.reach.as_deref()
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    /// Lag weights in use (`[1.0]` for first order).
    pub fn lags(&self) -> &[f64] {
        &self.lags
    }

    pub fn num_params(&self) -> usize {
        self.params.num_params()
    }

    /// Initial inclusion probabilities `π_i = w_i / Σ w_j`.
    pub fn initial_probabilities(&self) -> &[f64] {
        self.initial.probs()
    }

    /// Transition probabilities out of `from`, aligned with `mesh.out_neighbors(from)`.
    pub fn transition_probabilities(&self, from: usize) -> Result<Vec<(usize, f64)>> {
        match self.groups.get(from) {
            Some(Some(g)) => Ok(self.mesh.out_neighbors(from).iter().copied().zip(g.probs().iter().copied()).collect()),
            Some(None) => Err(Error::DeadEnd { vertex: from }),
            None => Err(Error::Contract(format!("vertex index {from} out of range"))),
        }
    }

    /// One-step probability `π^from_to` (zero without an arc).
    pub fn step_probability(&self, from: usize, to: usize) -> f64 {
        self.mesh.arc_id(from, to).map_or(0.0, |a| self.arc_prob[a])
    }

    /// `r`-step transition probability used by lag `r` of this policy: the
    /// one-step probability for first/higher-order kinds, the `r`-step walk
    /// sum for the generalized kind.
    pub fn lag_probability(&self, r: usize, from: usize, to: usize) -> f64 {
        match self.kind {
            PolicyKind::GeneralizedHigherOrder if r > 1 => {
                let idx = self.reach.as_ref().expect("generalized policy carries reachability");
                match idx.reach(r, from).binary_search_by_key(&to, |x| x.target) {
                    Ok(pos) => self.multi_step[r - 1][from][pos],
                    Err(_) => 0.0,
                }
            }
            _ => self.step_probability(from, to),
        }
    }

    /// Whether step `q` (0-based index of the node being chosen, `q ≥ 1`) uses
    /// the lag mixture rather than a plain first-order transition.
    fn is_mixture_step(&self, q: usize) -> bool {
        self.kind != PolicyKind::FirstOrder && q >= self.order
    }

    fn mixture(&self, path: &[usize], q: usize) -> f64 {
        self.lags
            .iter()
            .enumerate()
            .map(|(i, &lam)| if lam == 0.0 { 0.0 } else { lam * self.lag_probability(i + 1, path[q - i - 1], path[q]) })
            .sum()
    }

    /// Probability of choosing `path[q]` given `path[..q]`.
    fn step_factor(&self, path: &[usize], q: usize) -> f64 {
        if self.is_mixture_step(q) {
            self.mixture(path, q)
        } else {
            self.step_probability(path[q - 1], path[q])
        }
    }

    fn check_path(&self, path: &[usize]) -> Result<()> {
        if path.len() != self.path_length {
            return Err(Error::Contract(format!(
                "path has length {}, distribution expects {}",
                path.len(),
                self.path_length
            )));
        }
        if let Some(&v) = path.iter().find(|&&v| v >= self.mesh.num_vertices()) {
            return Err(Error::Contract(format!("vertex index {v} out of range")));
        }
        Ok(())
    }

    /// Natural log of the PMF; `-inf` outside the support.
    pub fn log_pmf(&self, path: &[usize]) -> Result<f64> {
        self.check_path(path)?;
        let mut lp = self.initial.probs()[path[0]].ln();
        for q in 1..path.len() {
            if lp == f64::NEG_INFINITY {
                break;
            }
            lp += self.step_factor(path, q).ln();
        }
        Ok(lp)
    }

    pub fn pmf(&self, path: &[usize]) -> Result<f64> {
        self.log_pmf(path).map(f64::exp)
    }

    pub fn grad_log_pmf(&self, path: &[usize]) -> Result<LogPmfGradient> {
        self.check_path(path)?;
        let mesh = &*self.mesh;
        let mut d_initial = vec![0.0; mesh.num_vertices()];
        let mut d_transition = vec![0.0; mesh.num_arcs()];
        let mut d_lag = vec![0.0; self.lags.len()];

        if self.initial.probs()[path[0]] <= 0.0 {
            return Err(Error::UndefinedGradient);
        }
        self.initial.add_log_grad(path[0], 1.0, &mut d_initial);

        for q in 1..path.len() {
            let to = path[q];
            if !self.is_mixture_step(q) {
                let from = path[q - 1];
                let a = mesh.arc_id(from, to).ok_or(Error::UndefinedGradient)?;
                if self.arc_prob[a] <= 0.0 {
                    return Err(Error::UndefinedGradient);
                }
                let range = mesh.out_arc_ids(from);
                let chosen = a - range.start;
                self.group(from).add_log_grad(chosen, 1.0, &mut d_transition[range]);
                continue;
            }

            let m = self.mixture(path, q);
            if m <= 0.0 {
                return Err(Error::UndefinedGradient);
            }
            for (i, &lam) in self.lags.iter().enumerate() {
                let r = i + 1;
                let from = path[q - r];
                d_lag[i] += self.lag_probability(r, from, to) / m;
                if lam == 0.0 {
                    continue;
                }
                match self.kind {
                    PolicyKind::GeneralizedHigherOrder if r > 1 => {
                        let idx = self.reach.as_ref().expect("generalized policy carries reachability");
                        for walk in idx.walks(r, from, to) {
                            for (s, &a) in walk.iter().enumerate() {
                                let others: f64 = walk
                                    .iter()
                                    .enumerate()
                                    .filter(|&(t, _)| t != s)
                                    .map(|(_, &b)| self.arc_prob[b])
                                    .product();
                                if others == 0.0 {
                                    continue;
                                }
                                self.add_arc_prob_grad(a, lam * others / m, &mut d_transition);
                            }
                        }
                    }
                    _ => {
                        if let Some(a) = mesh.arc_id(from, to) {
                            self.add_arc_prob_grad(a, lam / m, &mut d_transition);
                        }
                    }
                }
            }
        }

        let d_lag = match self.kind {
            PolicyKind::FirstOrder => None,
            _ if self.params.lag_mode() == LagMode::FixedHarmonic => Some(vec![0.0; self.lags.len()]),
            _ => Some(d_lag),
        };
        Ok(LogPmfGradient { d_initial, d_transition, d_lag })
    }

    fn group(&self, vertex: usize) -> &InclusionGroup {
        self.groups[vertex].as_ref().expect("vertex with a positive-probability arc has a transition group")
    }

    /// Adds `scale * dπ_a / dθ` for the arc `a` into the transition gradient.
    fn add_arc_prob_grad(&self, a: usize, scale: f64, d_transition: &mut [f64]) {
        let (from, _) = self.mesh.arc(a);
        let range = self.mesh.out_arc_ids(from);
        if let Some(g) = &self.groups[from] {
            g.add_prob_grad(a - range.start, scale, &mut d_transition[range]);
        }
    }

    /// Successors of `prefix` admitted by the support-construction rules,
    /// decided from parameters and connectivity rather than probabilities.
    /// Sorted ascending, duplicate-free.
    pub fn admissible_successors(&self, prefix: &[usize]) -> Vec<usize> {
        let mesh = &*self.mesh;
        let params = &self.params;
        let positive_out =
            |v: usize| mesh.out_arc_ids(v).filter(|&a| params.transition()[a] > 0.0).map(move |a| mesh.arc(a).1);
        let q = prefix.len();
        if q == 0 {
            return (0..mesh.num_vertices()).filter(|&v| params.initial()[v] > 0.0).collect();
        }
        if !self.is_mixture_step(q) {
            return positive_out(prefix[q - 1]).collect();
        }
        let mut out = Vec::new();
        for (i, &lam) in self.lags.iter().enumerate() {
            if lam <= 0.0 {
                continue;
            }
            let r = i + 1;
            let from = prefix[q - r];
            match self.kind {
                PolicyKind::GeneralizedHigherOrder => {
                    let idx = self.reach.as_ref().expect("generalized policy carries reachability");
                    for x in idx.reach(r, from) {
                        if x.walks.iter().any(|w| w.iter().all(|&a| params.transition()[a] > 0.0)) {
                            out.push(x.target);
                        }
                    }
                }
                _ => out.extend(positive_out(from)),
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Conditional distribution of the next node given `prefix`, restricted to
    /// entries with positive probability.
    pub fn conditional(&self, prefix: &[usize]) -> Vec<(usize, f64)> {
        let q = prefix.len();
        if q == 0 {
            return self.initial.probs().iter().copied().enumerate().filter(|&(_, p)| p > 0.0).collect();
        }
        if !self.is_mixture_step(q) {
            return match &self.groups[prefix[q - 1]] {
                Some(g) => self
                    .mesh
                    .out_neighbors(prefix[q - 1])
                    .iter()
                    .copied()
                    .zip(g.probs().iter().copied())
                    .filter(|&(_, p)| p > 0.0)
                    .collect(),
                None => Vec::new(),
            };
        }
        let mut acc: Vec<(usize, f64)> = Vec::new();
        for (i, &lam) in self.lags.iter().enumerate() {
            if lam <= 0.0 {
                continue;
            }
            let r = i + 1;
            let from = prefix[q - r];
            let row: Vec<(usize, f64)> = match self.kind {
                PolicyKind::GeneralizedHigherOrder if r > 1 => {
                    let idx = self.reach.as_ref().expect("generalized policy carries reachability");
                    idx.reach(r, from).iter().zip(&self.multi_step[r - 1][from]).map(|(x, &p)| (x.target, p)).collect()
                }
                _ => self.mesh.out_arc_ids(from).map(|a| (self.mesh.arc(a).1, self.arc_prob[a])).collect(),
            };
            for (j, p) in row {
                match acc.binary_search_by_key(&j, |e| e.0) {
                    Ok(pos) => acc[pos].1 += lam * p,
                    Err(pos) => acc.insert(pos, (j, lam * p)),
                }
            }
        }
        acc.retain(|&(_, p)| p > 0.0);
        acc
    }
}

/// Every path with positive probability, exactly once, with its probability.
///
/// Depth-first over an explicit stack; fails once more than `cap` complete
/// paths have been produced.
pub fn enumerate_support(dist: &PathDistribution, cap: usize) -> Result<Vec<(Path, f64)>> {
    let n = dist.path_length();
    let mut out = Vec::new();
    let mut prefix: Vec<usize> = Vec::with_capacity(n);
    // Each frame holds the successors still to try at that depth, reversed.
    let mut stack: Vec<Vec<usize>> = vec![reversed(dist.admissible_successors(&prefix))];
    while let Some(frame) = stack.last_mut() {
        match frame.pop() {
            None => {
                stack.pop();
                prefix.pop();
            }
            Some(v) => {
                prefix.push(v);
                if prefix.len() == n {
                    if out.len() >= cap {
                        return Err(Error::SupportTooLarge { count: out.len() as u128 + 1, cap });
                    }
                    let p = dist.pmf(&prefix)?;
                    out.push((Path::new(prefix.clone()), p));
                    prefix.pop();
                } else {
                    stack.push(reversed(dist.admissible_successors(&prefix)));
                }
            }
        }
    }
    Ok(out)
}

fn reversed(mut v: Vec<usize>) -> Vec<usize> {
    v.reverse();
    v
}
