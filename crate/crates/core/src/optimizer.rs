//! Projected stochastic gradient optimization of policy parameters with the
//! variance-minimizing scalar baseline.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::quantile;
use crate::path::Path;
use crate::policy::{LagMode, PathDistribution, PolicyParams, CLAMP_EPS};
use crate::sampler::{sample_paths, RngSeed};
use crate::utility::{evaluate_checked, Mode, Utility};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepSchedule {
    #[default]
    Constant,
    /// `η₀ / √(t + 1)` at 0-based iteration `t`.
    InverseSqrt,
}

impl std::str::FromStr for StepSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "const" | "constant" => Ok(Self::Constant),
            "sqrt" | "inverse-sqrt" => Ok(Self::InverseSqrt),
            other => Err(Error::Config(format!("unknown step schedule {other:?}"))),
        }
    }
}

/// Where the baseline's batches come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineSampling {
    /// The first batch is the gradient sample itself; further batches are fresh.
    /// Costs no extra utility evaluations at `N_b = 1` but correlates `b` with
    /// `ĝ` and `d`, which biases `ĝ - b d` at finite sample size.
    Reuse,
    /// Every batch is drawn independently of the gradient sample; unbiased.
    #[default]
    Independent,
}

impl std::str::FromStr for BaselineSampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reuse" => Ok(Self::Reuse),
            "independent" => Ok(Self::Independent),
            other => Err(Error::Config(format!("unknown baseline sampling {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub mode: Mode,
    pub sample_size: usize,
    /// 0 disables the baseline.
    pub baseline_batches: usize,
    pub baseline_sampling: BaselineSampling,
    pub step_size: f64,
    pub schedule: StepSchedule,
    pub max_iterations: usize,
    pub update_norm_tol: f64,
    pub final_sample_size: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Minimize,
            sample_size: 32,
            baseline_batches: 1,
            baseline_sampling: BaselineSampling::Independent,
            step_size: 0.1,
            schedule: StepSchedule::Constant,
            max_iterations: 300,
            update_norm_tol: 1e-12,
            final_sample_size: 32,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return Err(Error::Config(format!("step size must lie in (0, 1], got {}", self.step_size)));
        }
        if self.sample_size == 0 || self.final_sample_size == 0 {
            return Err(Error::Config("sample sizes must be at least 1".into()));
        }
        if !(self.update_norm_tol > 0.0) {
            return Err(Error::Config(format!("update-norm tolerance must be positive, got {}", self.update_norm_tol)));
        }
        Ok(())
    }

    pub fn step_at(&self, iteration: usize) -> f64 {
        match self.schedule {
            StepSchedule::Constant => self.step_size,
            StepSchedule::InverseSqrt => self.step_size / ((iteration + 1) as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub utilities: Vec<f64>,
    pub baseline: f64,
    /// 2-norm of the baselined direction `ĝ - b d`.
    pub grad_norm: f64,
    pub update_norm: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizerTrace {
    pub records: Vec<IterationRecord>,
}

impl OptimizerTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "iteration,mean_utility,min_utility,q25,median,q75,max_utility,baseline,grad_norm,update_norm,wall_ms\n",
        );
        for r in &self.records {
            let mut s = r.utilities.clone();
            s.sort_by(f64::total_cmp);
            let mean = s.iter().sum::<f64>() / s.len() as f64;
            let _ = writeln!(
                out,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.3}",
                r.iteration,
                mean,
                s[0],
                quantile(&s, 0.25),
                quantile(&s, 0.5),
                quantile(&s, 0.75),
                s[s.len() - 1],
                r.baseline,
                r.grad_norm,
                r.update_norm,
                r.wall_ms
            );
        }
        out
    }

    pub fn median_utility(&self, iteration: usize) -> Option<f64> {
        let r = self.records.iter().find(|r| r.iteration == iteration)?;
        let mut s = r.utilities.clone();
        s.sort_by(f64::total_cmp);
        Some(quantile(&s, 0.5))
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub optimal_params: PolicyParams,
    pub best_path: Path,
    pub best_utility: f64,
    pub final_sample: Vec<(Path, f64)>,
    pub trace: OptimizerTrace,
    /// Stopped on the update-norm tolerance rather than the iteration cap.
    pub converged: bool,
}

/// A failed run together with every iteration completed before the failure.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{error} (after {} iterations)", trace.records.len())]
pub struct OptimizeError {
    pub error: Error,
    pub trace: OptimizerTrace,
}

/// Sample estimates for one batch of paths.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchEstimate {
    pub utilities: Vec<f64>,
    /// `mean U(ζ) ∇log P(ζ)`.
    pub g_hat: Vec<f64>,
    /// `mean ∇log P(ζ)`.
    pub d: Vec<f64>,
}

fn batch_estimate<U: Utility + ?Sized>(dist: &PathDistribution, utility: &U, paths: &[Path]) -> Result<BatchEstimate> {
    if paths.is_empty() {
        return Err(Error::Contract("gradient estimate needs at least one path".into()));
    }
    let per_path: Vec<(f64, Vec<f64>)> = paths
        .par_iter()
        .map(|p| Ok((evaluate_checked(utility, p)?, dist.grad_log_pmf(p)?.flatten())))
        .collect::<Result<_>>()?;
    let np = dist.num_params();
    let mut g_hat = vec![0.0; np];
    let mut d = vec![0.0; np];
    // Sequential reduction keeps results independent of thread count.
    for (u, g) in &per_path {
        for k in 0..np {
            g_hat[k] += u * g[k];
            d[k] += g[k];
        }
    }
    let inv = 1.0 / paths.len() as f64;
    g_hat.iter_mut().chain(d.iter_mut()).for_each(|x| *x *= inv);
    Ok(BatchEstimate { utilities: per_path.into_iter().map(|e| e.0).collect(), g_hat, d })
}

/// `(ĝ, d)` over the given sample.
pub fn stochastic_gradient<U: Utility + ?Sized>(
    dist: &PathDistribution,
    utility: &U,
    paths: &[Path],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let b = batch_estimate(dist, utility, paths)?;
    Ok((b.g_hat, b.d))
}

/// `b = Σ ĝᵢᵀdᵢ / Σ dᵢᵀdᵢ`.
pub fn optimal_baseline(g_hat_batches: &[Vec<f64>], d_batches: &[Vec<f64>]) -> Result<f64> {
    if g_hat_batches.is_empty() || g_hat_batches.len() != d_batches.len() {
        return Err(Error::Contract("baseline needs matching, non-empty batch lists".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (g, d) in g_hat_batches.iter().zip(d_batches) {
        num += dot(g, d);
        den += dot(d, d);
    }
    if den == 0.0 {
        return Err(Error::BaselineUndefined);
    }
    Ok(num / den)
}

/// Scales `step` by the largest `s ≤ 1` keeping `θ + sign·s·step` in `[0, 1]`.
pub fn scaling_projector(theta: &[f64], step: &[f64], sign: f64) -> Vec<f64> {
    let mut s: f64 = 1.0;
    for (&t, &g) in theta.iter().zip(step) {
        let moved = t + sign * g;
        if moved > 1.0 {
            s = s.min((1.0 - t) / g.abs());
        } else if moved < 0.0 {
            s = s.min(t / g.abs());
        }
    }
    step.iter().map(|g| s * g).collect()
}

/// One gradient/baseline evaluation at fixed parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionEstimate {
    pub utilities: Vec<f64>,
    pub g_hat: Vec<f64>,
    pub d: Vec<f64>,
    pub baseline: f64,
    /// `ĝ - b d`.
    pub direction: Vec<f64>,
}

/// Samples `sample_size` paths and forms `ĝ - b d` with `b` estimated from
/// `baseline_batches` batches of the same size (0 sets `b = 0`).
pub fn estimate_direction<U: Utility + ?Sized>(
    dist: &PathDistribution,
    utility: &U,
    sample_size: usize,
    baseline_batches: usize,
    sampling: BaselineSampling,
    seed: RngSeed,
) -> Result<DirectionEstimate> {
    let paths = sample_paths(dist, sample_size, seed.derive(0, 0))?;
    let main = batch_estimate(dist, utility, &paths)?;
    let baseline = if baseline_batches == 0 {
        0.0
    } else {
        let (mut gs, mut ds, fresh_from) = match sampling {
            BaselineSampling::Reuse => (vec![main.g_hat.clone()], vec![main.d.clone()], 1),
            BaselineSampling::Independent => (Vec::new(), Vec::new(), 0),
        };
        for b in fresh_from..baseline_batches {
            let extra = sample_paths(dist, sample_size, seed.derive(1, b as u64))?;
            let est = batch_estimate(dist, utility, &extra)?;
            gs.push(est.g_hat);
            ds.push(est.d);
        }
        match optimal_baseline(&gs, &ds) {
            Ok(b) => b,
            Err(Error::BaselineUndefined) => 0.0,
            Err(e) => return Err(e),
        }
    };
    let direction = main.g_hat.iter().zip(&main.d).map(|(g, d)| g - baseline * d).collect();
    Ok(DirectionEstimate { utilities: main.utilities, g_hat: main.g_hat, d: main.d, baseline, direction })
}

/// Runs projected stochastic gradient ascent (maximize) or descent (minimize)
/// from `dist`'s parameters, then returns the best of a final sample drawn
/// from the optimized policy.
pub fn run<U: Utility + ?Sized>(
    dist: &PathDistribution,
    utility: &U,
    config: &OptimizerConfig,
) -> std::result::Result<OptimizationResult, OptimizeError> {
    let mut trace = OptimizerTrace::default();
    match run_inner(dist, utility, config, &mut trace) {
        Ok((optimal_params, final_sample, converged)) => {
            let best = config.mode.argbest(final_sample.iter().map(|e| e.1)).expect("final sample is non-empty");
            Ok(OptimizationResult {
                optimal_params,
                best_path: final_sample[best].0.clone(),
                best_utility: final_sample[best].1,
                final_sample,
                trace,
                converged,
            })
        }
        Err(error) => Err(OptimizeError { error, trace }),
    }
}

type RunOutput = (PolicyParams, Vec<(Path, f64)>, bool);

fn run_inner<U: Utility + ?Sized>(
    start: &PathDistribution,
    utility: &U,
    config: &OptimizerConfig,
    trace: &mut OptimizerTrace,
) -> Result<RunOutput> {
    config.validate()?;
    let seed = RngSeed(config.seed);
    let sign = config.mode.sign();
    let mut dist = start.clone();
    // Exactly-zero parameters encode disabled starts or arcs and stay fixed.
    let frozen: Vec<bool> = start.params().to_flat().iter().map(|&x| x == 0.0).collect();
    let mut converged = false;

    for it in 0..config.max_iterations {
        let clock = Instant::now();
        let est = estimate_direction(
            &dist,
            utility,
            config.sample_size,
            config.baseline_batches,
            config.baseline_sampling,
            seed.derive(it as u64, 1),
        )?;
        let mut direction = est.direction;
        for (g, &f) in direction.iter_mut().zip(&frozen) {
            if f {
                *g = 0.0;
            }
        }
        let theta = dist.params().to_flat();
        let projected = scaling_projector(&theta, &direction, sign);
        let eta = config.step_at(it);
        let raw: Vec<f64> = theta.iter().zip(&projected).map(|(t, p)| t + sign * eta * p).collect();
        let params = sanitize(dist.params(), &dist, raw)?;
        let update_norm = diff_norm(&params.to_flat(), &theta);
        dist = dist.with_params(params)?;
        trace.records.push(IterationRecord {
            iteration: it,
            utilities: est.utilities,
            baseline: est.baseline,
            grad_norm: dot(&direction, &direction).sqrt(),
            update_norm,
            wall_ms: clock.elapsed().as_secs_f64() * 1e3,
        });
        if update_norm < config.update_norm_tol {
            converged = true;
            break;
        }
    }

    let final_paths = sample_paths(&dist, config.final_sample_size, seed.derive(u64::MAX, 0))?;
    let values: Vec<f64> = final_paths.par_iter().map(|p| evaluate_checked(utility, p)).collect::<Result<_>>()?;
    Ok((dist.params().clone(), final_paths.into_iter().zip(values).collect(), converged))
}

/// Restores the invariants the projector cannot see: rounding outside
/// `[0, 1]`, exact ones sharing a group with other mass, and the lag simplex.
fn sanitize(template: &PolicyParams, dist: &PathDistribution, mut flat: Vec<f64>) -> Result<PolicyParams> {
    for x in flat.iter_mut() {
        *x = x.clamp(0.0, 1.0);
    }
    let mesh = dist.mesh();
    let nv = mesh.num_vertices();
    let fix_group = |g: &mut [f64]| {
        if g.iter().filter(|&&x| x > 0.0).count() > 1 {
            for x in g.iter_mut().filter(|x| **x == 1.0) {
                *x = 1.0 - CLAMP_EPS;
            }
        }
    };
    fix_group(&mut flat[..nv]);
    for v in 0..nv {
        let r = mesh.out_arc_ids(v);
        fix_group(&mut flat[nv + r.start..nv + r.end]);
    }
    if template.lag_weights().is_some() && template.lag_mode() == LagMode::Optimized {
        let lags = &mut flat[nv + mesh.num_arcs()..];
        let sum: f64 = lags.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::Numerical("lag weights collapsed to zero".into()));
        }
        lags.iter_mut().for_each(|x| *x /= sum);
    }
    template.from_flat_like(&flat)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
