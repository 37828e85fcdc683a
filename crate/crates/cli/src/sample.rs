use std::fmt::Write;
use std::path::Path;

use pathoed_core::{sample_paths, RngSeed};

use crate::failure::{write_output, Failure};
use crate::setup::{load_policy, load_problem};
use crate::{MeshArgs, PolicyArgs};

pub fn run(mesh: &MeshArgs, policy: &PolicyArgs, count: usize, seed: u64, out_dir: &Path) -> Result<(), Failure> {
    let problem = load_problem(mesh, policy.length)?;
    let dist = load_policy(&problem, policy)?;
    let paths = sample_paths(&dist, count, RngSeed(seed)).map_err(|e| Failure::Runtime(e.to_string()))?;
    let mut out = String::new();
    for p in &paths {
        let logp = dist.log_pmf(p).map_err(|e| Failure::Runtime(e.to_string()))?;
        let _ = writeln!(out, "{p} {logp:.17e}");
    }
    let file = out_dir.join("paths.txt");
    write_output(&file, &out)?;
    println!("wrote {} paths to {}", paths.len(), file.display());
    Ok(())
}
