use std::path::Path;

use clap::Args;
use pathoed_core::optimizer::{estimate_direction, BaselineSampling};
use pathoed_core::{enumerate_support, sample_paths, Criterion, LagMode, PathDistribution, PolicyKind, RngSeed};

use crate::failure::Failure;
use crate::setup::{load_policy, load_problem, load_utility};
use crate::{MeshArgs, PolicyArgs};

#[derive(Args, Debug, Clone)]
pub struct CheckArgs {
    /// Sampled paths on which finite differences are compared.
    #[arg(long, default_value_t = 20)]
    pub paths: usize,
    /// Finite-difference step (Richardson-extrapolated central differences).
    #[arg(long, default_value_t = 1e-4)]
    pub fd_step: f64,
    /// Largest accepted relative error |a - b| / max(|a|, |b|, 1e-8).
    #[arg(long, default_value_t = 1e-5)]
    pub fd_tol: f64,
    /// Largest accepted score-identity residual.
    #[arg(long, default_value_t = 1e-8)]
    pub score_tol: f64,
    /// Support size above which the score identity is skipped.
    #[arg(long, default_value_t = 1_000_000)]
    pub cap: usize,
    /// Ensemble size for the baseline variance comparison.
    #[arg(long, default_value_t = 32)]
    pub samples: usize,
    /// Replicas for the baseline variance comparison.
    #[arg(long, default_value_t = 64)]
    pub replicas: usize,
}

const REL_FLOOR: f64 = 1e-8;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

pub fn run(
    mesh: &MeshArgs,
    policy: &PolicyArgs,
    args: &CheckArgs,
    utility_table: Option<&Path>,
    criterion: Option<Criterion>,
    seed: u64,
) -> Result<(), Failure> {
    if !(args.fd_step > 0.0 && args.fd_step < 0.5) {
        return Err(Failure::Usage(format!("finite-difference step {} must lie in (0, 0.5)", args.fd_step)));
    }
    let problem = load_problem(mesh, policy.length)?;
    let dist = load_policy(&problem, policy)?;

    let mut outcomes = vec![("finite-differences", finite_differences(&dist, args, seed)?)];
    outcomes.push(("score-identity", score_identity(&dist, args)?));
    if utility_table.is_some() || criterion.is_some() {
        let u = load_utility(&problem, utility_table, criterion.unwrap_or(Criterion::D))?;
        let mut raw = Vec::with_capacity(args.replicas);
        let mut baselined = Vec::with_capacity(args.replicas);
        for r in 0..args.replicas {
            let est = estimate_direction(
                &dist,
                &*u,
                args.samples,
                1,
                BaselineSampling::Independent,
                RngSeed(seed).derive(r as u64, 2),
            )?;
            raw.push(est.g_hat);
            baselined.push(est.direction);
        }
        let (vr, vb) = (total_variance(&raw), total_variance(&baselined));
        let detail = format!("total variance raw {vr:.6e}, baselined {vb:.6e} over {} replicas", args.replicas);
        outcomes.push(("baseline-variance", if vb < vr { Outcome::Pass(detail) } else { Outcome::Fail(detail) }));
    }

    let mut failed = 0;
    for (name, outcome) in &outcomes {
        match outcome {
            Outcome::Pass(d) => println!("PASS  {name}: {d}"),
            Outcome::Skip(d) => println!("SKIP  {name}: {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("FAIL  {name}: {d}");
            }
        }
    }
    if failed > 0 {
        return Err(Failure::Check(format!("{failed} of {} checks failed", outcomes.len())));
    }
    Ok(())
}

/// Compares the analytic gradient with differences of the library log-PMF.
/// Coordinates within one step of 0 or 1 are skipped. Optimized lag weights
/// are perturbed along `e_i - e_1` so they stay on the simplex.
fn finite_differences(dist: &PathDistribution, args: &CheckArgs, seed: u64) -> Result<Outcome, Failure> {
    let h = args.fd_step;
    let theta = dist.params().to_flat();
    let nv = dist.mesh().num_vertices();
    let nit = nv + dist.mesh().num_arcs();
    let free_lags = dist.kind() != PolicyKind::FirstOrder && dist.params().lag_mode() == LagMode::Optimized;

    let mut directions: Vec<(Vec<(usize, f64)>, String)> = Vec::new();
    let interior = |x: f64| x - h > 0.0 && x + h < 1.0;
    for (i, &x) in theta[..nit].iter().enumerate() {
        if interior(x) {
            directions.push((vec![(i, 1.0)], coordinate_name(dist, i)));
        }
    }
    if free_lags {
        for i in nit + 1..theta.len() {
            if interior(theta[i]) && interior(theta[nit]) {
                directions.push((vec![(i, 1.0), (nit, -1.0)], format!("lag {} - lag 1", i - nit + 1)));
            }
        }
    }
    let candidates = if free_lags { theta.len() - 1 } else { nit };
    let skipped = candidates - directions.len();

    let log_pmf_at = |flat: &[f64], path: &[usize]| -> Result<f64, Failure> {
        let params = dist.params().from_flat_like(flat)?;
        Ok(dist.with_params(params)?.log_pmf(path)?)
    };
    let paths = sample_paths(dist, args.paths, RngSeed(seed).derive(0, 3))?;
    // Worst relative error among gaps above the rounding bound, and the
    // largest gap relative to its bound.
    let mut worst = (0.0_f64, String::from("none"));
    let mut worst_gap = 0.0_f64;
    for path in &paths {
        let grad = dist.grad_log_pmf(path)?.flatten();
        // Rounding bound of the extrapolated difference; smaller gaps count as exact.
        let noise = 16.0 * f64::EPSILON * dist.log_pmf(path)?.abs().max(1.0) / h;
        for (dir, name) in &directions {
            let analytic: f64 = dir.iter().map(|&(i, c)| c * grad[i]).sum();
            let central = |step: f64| -> Result<f64, Failure> {
                let shifted = |s: f64| {
                    let mut y = theta.clone();
                    for &(i, c) in dir {
                        y[i] += s * c;
                    }
                    y
                };
                Ok((log_pmf_at(&shifted(step), path)? - log_pmf_at(&shifted(-step), path)?) / (2.0 * step))
            };
            let fd = (4.0 * central(h / 2.0)? - central(h)?) / 3.0;
            let gap = (analytic - fd).abs();
            worst_gap = worst_gap.max(gap / noise);
            let err = if gap <= noise { 0.0 } else { gap / analytic.abs().max(fd.abs()).max(REL_FLOOR) };
            if err > worst.0 || err.is_nan() {
                worst = (err, format!("{name} on path {path}"));
            }
        }
    }
    let detail = format!(
        "{} paths, {} directions ({} skipped at the boundary), largest gap {:.2} x rounding bound, \
         max rel err above the bound {:.3e} at {} (tol {:.1e})",
        paths.len(),
        directions.len(),
        skipped,
        worst_gap,
        worst.0,
        worst.1,
        args.fd_tol
    );
    Ok(if worst.0 <= args.fd_tol { Outcome::Pass(detail) } else { Outcome::Fail(detail) })
}

/// The probability-weighted score vanishes in the initial and transition
/// components. Raw lag partials sum to the number of mixture steps instead,
/// since the mixture has total mass `(Σλ)^(n-k)`.
fn score_identity(dist: &PathDistribution, args: &CheckArgs) -> Result<Outcome, Failure> {
    let support = match enumerate_support(dist, args.cap) {
        Ok(s) => s,
        Err(pathoed_core::Error::SupportTooLarge { .. }) => {
            return Ok(Outcome::Skip(format!("support exceeds {} paths", args.cap)));
        }
        Err(e) => return Err(e.into()),
    };
    let mut total = vec![0.0; dist.num_params()];
    for (path, p) in &support {
        for (acc, g) in total.iter_mut().zip(dist.grad_log_pmf(path)?.flatten()) {
            *acc += p * g;
        }
    }
    let nit = dist.mesh().num_vertices() + dist.mesh().num_arcs();
    let lag_target = match (dist.kind(), dist.params().lag_mode()) {
        (PolicyKind::FirstOrder, _) | (_, LagMode::FixedHarmonic) => 0.0,
        _ => (dist.path_length() - dist.order()) as f64,
    };
    let residual = total[..nit]
        .iter()
        .map(|x| x.abs())
        .chain(total[nit..].iter().map(|x| (x - lag_target).abs()))
        .fold(0.0, f64::max);
    let detail = format!("{} support paths, max residual {:.3e} (tol {:.1e})", support.len(), residual, args.score_tol);
    Ok(if residual <= args.score_tol { Outcome::Pass(detail) } else { Outcome::Fail(detail) })
}

fn coordinate_name(dist: &PathDistribution, i: usize) -> String {
    let nv = dist.mesh().num_vertices();
    if i < nv {
        format!("initial v{}", i + 1)
    } else {
        let (from, to) = dist.mesh().arc(i - nv);
        format!("transition v{}->v{}", from + 1, to + 1)
    }
}

/// Trace of the empirical covariance of the rows.
fn total_variance(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len() as f64;
    if rows.len() < 2 {
        return 0.0;
    }
    (0..rows[0].len())
        .map(|j| {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1.0)
        })
        .sum()
}
