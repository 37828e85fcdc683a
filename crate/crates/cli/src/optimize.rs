use std::path::Path;

use pathoed_core::{run as optimize, Mode, OptimizerConfig};
use serde::Serialize;

use crate::failure::{write_output, Failure};
use crate::setup::{load_policy, load_problem, load_utility};
use crate::{MeshArgs, OptimizerArgs, PolicyArgs, UtilityArgs};

const TRACE_FILE: &str = "trace.csv";
const PARAMS_FILE: &str = "optimal_params.json";
const RESULT_FILE: &str = "result.json";

#[derive(Serialize)]
struct Report<'a> {
    best_path: String,
    best_utility: f64,
    converged: bool,
    iterations: usize,
    mode: &'a str,
    kind: String,
    order: usize,
    path_length: usize,
    seed: u64,
    optimal_params_file: &'a str,
    trace_file: &'a str,
    final_sample: Vec<Scored>,
}

#[derive(Serialize)]
struct Scored {
    path: String,
    utility: f64,
}

pub fn run(
    mesh: &MeshArgs,
    policy: &PolicyArgs,
    utility: &UtilityArgs,
    args: &OptimizerArgs,
    seed: u64,
    out_dir: &Path,
) -> Result<(), Failure> {
    let config = OptimizerConfig {
        mode: utility.mode,
        sample_size: args.samples,
        baseline_batches: args.batches,
        baseline_sampling: args.baseline_sampling,
        step_size: args.step,
        schedule: args.schedule,
        max_iterations: args.max_iters,
        update_norm_tol: args.tol,
        final_sample_size: args.final_samples,
        seed,
    };
    config.validate().map_err(Failure::setup)?;
    let problem = load_problem(mesh, policy.length)?;
    let dist = load_policy(&problem, policy)?;
    let u = load_utility(&problem, utility.utility_table.as_deref(), utility.criterion)?;

    let result = match optimize(&dist, &*u, &config) {
        Ok(r) => r,
        Err(failed) => {
            // Keep whatever progress was made before the failure.
            write_output(&out_dir.join(TRACE_FILE), &failed.trace.to_csv())?;
            let iterations = failed.trace.records.len();
            return Err(Failure::Runtime(format!(
                "optimization failed after {iterations} iterations: {}",
                failed.error
            )));
        }
    };

    write_output(&out_dir.join(TRACE_FILE), &result.trace.to_csv())?;
    write_output(&out_dir.join(PARAMS_FILE), &result.optimal_params.to_json(dist.mesh()))?;
    let report = Report {
        best_path: result.best_path.to_string(),
        best_utility: result.best_utility,
        converged: result.converged,
        iterations: result.trace.records.len(),
        mode: match config.mode {
            Mode::Minimize => "min",
            Mode::Maximize => "max",
        },
        kind: dist.kind().to_string(),
        order: dist.order(),
        path_length: dist.path_length(),
        seed,
        optimal_params_file: PARAMS_FILE,
        trace_file: TRACE_FILE,
        final_sample: result.final_sample.iter().map(|(p, u)| Scored { path: p.to_string(), utility: *u }).collect(),
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_output(&out_dir.join(RESULT_FILE), &json)?;
    println!(
        "best path {} utility {:.17e} after {} iterations{}",
        result.best_path,
        result.best_utility,
        report.iterations,
        if result.converged { " (update norm below tolerance)" } else { "" }
    );
    Ok(())
}
