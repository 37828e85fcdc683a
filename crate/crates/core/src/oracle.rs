//! Exhaustive ground truth for small instances.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::navmesh::NavMesh;
use crate::path::Path;
use crate::policy::{enumerate_support, PathDistribution, DEFAULT_SUPPORT_CAP};
use crate::utility::{evaluate_checked, Mode, Utility};

/// All walks of `n` vertices on `mesh`, in lexicographic order.
pub fn enumerate_feasible_paths(mesh: &NavMesh, n: usize, cap: usize) -> Result<Vec<Path>> {
    if n == 0 {
        return Err(Error::Contract("path length must be at least 1".into()));
    }
    let count = mesh.count_walks(n);
    if count > cap as u128 {
        return Err(Error::SupportTooLarge { count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut prefix: Vec<usize> = Vec::with_capacity(n);
    // Each frame holds the candidates still to try at that depth, reversed.
    let mut stack: Vec<Vec<usize>> = vec![(0..mesh.num_vertices()).rev().collect()];
    while let Some(frame) = stack.last_mut() {
        match frame.pop() {
            None => {
                stack.pop();
                prefix.pop();
            }
            Some(v) => {
                prefix.push(v);
                if prefix.len() == n {
                    out.push(Path::new(prefix.clone()));
                    prefix.pop();
                } else {
                    stack.push(mesh.out_neighbors(v).iter().rev().copied().collect());
                }
            }
        }
    }
    Ok(out)
}

/// `E[U]` summed over the support of `dist`.
pub fn exact_expectation<U: Utility + ?Sized>(dist: &PathDistribution, utility: &U) -> Result<f64> {
    let support = enumerate_support(dist, DEFAULT_SUPPORT_CAP)?;
    let mut total = 0.0;
    for (path, p) in &support {
        total += p * evaluate_checked(utility, path)?;
    }
    Ok(total)
}

/// `∇E[U] = Σ P(ζ) U(ζ) ∇log P(ζ)`, flattened in parameter layout.
pub fn exact_gradient<U: Utility + ?Sized>(dist: &PathDistribution, utility: &U) -> Result<Vec<f64>> {
    let support = enumerate_support(dist, DEFAULT_SUPPORT_CAP)?;
    let mut grad = vec![0.0; dist.num_params()];
    for (path, p) in &support {
        let u = evaluate_checked(utility, path)?;
        let g = dist.grad_log_pmf(path)?.flatten();
        for (acc, x) in grad.iter_mut().zip(g) {
            *acc += p * u * x;
        }
    }
    Ok(grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalOptimum {
    pub best_path: Path,
    pub best_utility: f64,
    /// Every feasible path with its utility, in enumeration order.
    pub evaluations: Vec<(Path, f64)>,
    /// Utilities sorted ascending.
    pub sorted_utilities: Vec<f64>,
}

/// Relative tolerance under which two utilities count as tied when ranking.
/// Designs that are equal in exact arithmetic (e.g. mirror images on a
/// symmetric instance) can differ by a few ulps after factorization.
pub const TIE_RTOL: f64 = 1e-12;

impl GlobalOptimum {
    /// Fraction of evaluated paths better than `value` by more than
    /// [`TIE_RTOL`] relative.
    pub fn fraction_better_than(&self, value: f64, mode: Mode) -> f64 {
        let margin = TIE_RTOL * value.abs().max(f64::MIN_POSITIVE);
        let shifted = value + mode.sign() * margin;
        let better = self.sorted_utilities.iter().filter(|&&u| mode.better(u, shifted)).count();
        better as f64 / self.sorted_utilities.len() as f64
    }
}

/// Evaluates `utility` on every feasible walk and returns the extremal one
/// (first in lexicographic order on ties).
pub fn global_optimum<U: Utility + ?Sized>(
    mesh: &NavMesh,
    n: usize,
    utility: &U,
    mode: Mode,
    cap: usize,
) -> Result<GlobalOptimum> {
    let paths = enumerate_feasible_paths(mesh, n, cap)?;
    let values: Vec<f64> = paths.par_iter().map(|p| evaluate_checked(utility, p)).collect::<Result<_>>()?;
    let best =
        mode.argbest(values.iter().copied()).ok_or_else(|| Error::Contract("mesh has no feasible path".into()))?;
    let mut sorted_utilities = values.clone();
    sorted_utilities.sort_by(f64::total_cmp);
    Ok(GlobalOptimum {
        best_path: paths[best].clone(),
        best_utility: values[best],
        evaluations: paths.into_iter().zip(values).collect(),
        sorted_utilities,
    })
}

/// Extremal walk for a path-sum utility `U(ζ) = Σ_t field[ζ_t]` by dynamic
/// programming over (step, vertex). Independent of enumeration.
pub fn path_sum_optimum(mesh: &NavMesh, n: usize, field: &[f64], mode: Mode) -> Result<(Path, f64)> {
    if n == 0 || field.len() != mesh.num_vertices() {
        return Err(Error::Contract("path-sum optimum needs n >= 1 and one field value per vertex".into()));
    }
    let nv = mesh.num_vertices();
    // value[t][v]: best sum of a walk of t+1 vertices ending at v.
    let mut value = vec![field.to_vec()];
    let mut parent = vec![vec![usize::MAX; nv]];
    for t in 1..n {
        let mut cur = vec![f64::NAN; nv];
        let mut par = vec![usize::MAX; nv];
        for &(i, j) in mesh.arcs() {
            let prev = value[t - 1][i];
            if prev.is_nan() {
                continue;
            }
            let cand = prev + field[j];
            if cur[j].is_nan() || mode.better(cand, cur[j]) {
                cur[j] = cand;
                par[j] = i;
            }
        }
        value.push(cur);
        parent.push(par);
    }
    let last = &value[n - 1];
    let end = mode
        .argbest(last.iter().map(|&x| if x.is_nan() { mode.sign() * f64::NEG_INFINITY } else { x }))
        .filter(|&v| !last[v].is_nan())
        .ok_or_else(|| Error::Contract("mesh has no feasible path".into()))?;
    let mut nodes = vec![end];
    for t in (1..n).rev() {
        nodes.push(parent[t][*nodes.last().unwrap()]);
    }
    nodes.reverse();
    Ok((Path::new(nodes), last[end]))
}

/// Linear-interpolation quantile of ascending-sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        Some(Self {
            count: s.len(),
            min: s[0],
            q1: quantile(&s, 0.25),
            median: quantile(&s, 0.5),
            q3: quantile(&s, 0.75),
            max: s[s.len() - 1],
        })
    }
}

/// `path,utility` rows followed by a `#` summary line. Re-parseable by
/// [`crate::utility::UtilityTable::parse`].
pub fn bruteforce_csv(evaluations: &[(Path, f64)]) -> String {
    let mut out = String::from("path,utility\n");
    for (p, u) in evaluations {
        let _ = writeln!(out, "{p},{u:.17e}");
    }
    let values: Vec<f64> = evaluations.iter().map(|e| e.1).collect();
    if let Some(s) = Summary::of(&values) {
        let _ = writeln!(
            out,
            "# count={} min={:.17e} q1={:.17e} median={:.17e} q3={:.17e} max={:.17e}",
            s.count, s.min, s.q1, s.median, s.q3, s.max
        );
    }
    out
}
