use std::path::Path;

use pathoed_core::oracle::{bruteforce_csv, global_optimum, Summary};

use crate::failure::{write_output, Failure};
use crate::setup::{load_problem, load_utility, path_length};
use crate::{MeshArgs, UtilityArgs};

pub fn run(
    mesh: &MeshArgs,
    utility: &UtilityArgs,
    length: Option<usize>,
    cap: usize,
    out_dir: &Path,
) -> Result<(), Failure> {
    let problem = load_problem(mesh, length)?;
    let n = path_length(&problem, length)?;
    if n == 0 {
        return Err(Failure::Usage("path length must be at least 1".into()));
    }
    let u = load_utility(&problem, utility.utility_table.as_deref(), utility.criterion)?;
    let best = global_optimum(&problem.mesh, n, &*u, utility.mode, cap)?;
    let file = out_dir.join("bruteforce.csv");
    write_output(&file, &bruteforce_csv(&best.evaluations))?;

    let s = Summary::of(&best.sorted_utilities).expect("global optimum has at least one path");
    println!("wrote {} feasible paths to {}", s.count, file.display());
    println!("best path {} utility {:.17e}", best.best_path, best.best_utility);
    println!("min {:.17e} q1 {:.17e} median {:.17e} q3 {:.17e} max {:.17e}", s.min, s.q1, s.median, s.q3, s.max);
    Ok(())
}
