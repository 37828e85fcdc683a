use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use pathoed_core::fixtures::five_node_example;
use pathoed_core::policy::DEFAULT_SUPPORT_CAP;
use pathoed_core::{enumerate_support, Mode, PathDistribution, PolicyParams, UtilityTable};
use tempfile::TempDir;

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "fixtures", name].iter().collect();
    p.to_string_lossy().into_owned()
}

/// Runs the binary with `cmd` split on whitespace; `@name` tokens expand to
/// fixture paths. `extra` arguments are appended verbatim.
fn pathoed(out: &Path, cmd: &str, extra: &[&str]) -> Output {
    let args = cmd.split_whitespace().map(|t| match t.strip_prefix('@') {
        Some(name) => fixture(name),
        None => t.to_string(),
    });
    Command::new(env!("CARGO_BIN_EXE_pathoed"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn desk_instance(dir: &Path) -> String {
    let file = dir.join("desk.json");
    std::fs::write(&file, r#"{ "holes": [[1, 1, 1, 1]] }"#).unwrap();
    file.to_string_lossy().into_owned()
}

#[test]
fn sample_writes_support_paths_with_log_probabilities() {
    let dir = TempDir::new().unwrap();
    let (mesh, params) = five_node_example();
    let dist = PathDistribution::first_order(Arc::new(mesh), params, 3).unwrap();
    let support = enumerate_support(&dist, DEFAULT_SUPPORT_CAP).unwrap();

    let o = pathoed(
        dir.path(),
        "sample --mesh @five_node.mesh --policy @five_node_params.json --kind first --length 3 --samples 10 --seed 7",
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = read(dir.path(), "paths.txt");
    assert_eq!(text.lines().count(), 10);
    for line in text.lines() {
        let (path, logp) = line.split_once(' ').unwrap();
        let path: pathoed_core::Path = path.parse().unwrap();
        let (_, prob) = support.iter().find(|(p, _)| *p == path).expect("sampled path is in the support");
        assert!((logp.parse::<f64>().unwrap() - prob.ln()).abs() < 1e-12);
    }
}

#[test]
fn sample_count_zero_gives_empty_file() {
    let dir = TempDir::new().unwrap();
    let o = pathoed(dir.path(), "sample --mesh @five_node.mesh --length 3 --samples 0", &[]);
    assert!(o.status.success());
    assert_eq!(read(dir.path(), "paths.txt"), "");
}

#[test]
fn sample_is_deterministic_across_thread_counts() {
    let run = |threads: &str, seed: &str| {
        let dir = TempDir::new().unwrap();
        let o = pathoed(
            dir.path(),
            "sample --grid 3x3 --hole 1,1,1,1 --kind higher --order 2 --length 6 --samples 200",
            &["--seed", seed, "--threads", threads],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        read(dir.path(), "paths.txt")
    };
    let a = run("1", "11");
    assert_eq!(a, run("4", "11"));
    assert_ne!(a, run("1", "12"));
}

#[test]
fn forced_start_from_the_command_line() {
    let dir = TempDir::new().unwrap();
    let o =
        pathoed(dir.path(), "sample --grid 3x4 --kind generalized --order 3 --length 5 --start 6 --samples 500", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(read(dir.path(), "paths.txt").lines().all(|l| l.starts_with("6-")));
}

#[test]
fn unknown_kind_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let o = pathoed(dir.path(), "sample --mesh @five_node.mesh --length 3 --kind fourth", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown policy kind"));
}

#[test]
fn missing_length_and_source_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let o = pathoed(dir.path(), "sample --mesh @five_node.mesh", &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = pathoed(dir.path(), "sample --length 3", &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = pathoed(dir.path(), "sample --grid 3by3 --length 3", &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn optimize_with_constant_utility_barely_moves() {
    let dir = TempDir::new().unwrap();
    let table: String = std::iter::once("path,utility\n".to_string())
        .chain(read(Path::new(&fixture("")), "five_node_utility.csv").lines().skip(1).map(|l| {
            let (p, _) = l.split_once(',').unwrap();
            format!("{p},5\n")
        }))
        .collect();
    let file = dir.path().join("constant.csv");
    std::fs::write(&file, table).unwrap();
    let o = pathoed(
        dir.path(),
        "optimize --mesh @five_node.mesh --length 3 --max-iters 20 --utility-table",
        &[file.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = read(dir.path(), "trace.csv");
    let header: Vec<&str> = trace.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "grad_norm").unwrap();
    assert!(trace.lines().count() >= 2);
    for line in trace.lines().skip(1) {
        let g: f64 = line.split(',').nth(col).unwrap().parse().unwrap();
        assert!(g < 1e-12, "{line}");
    }
}

#[test]
fn optimize_rejects_zero_step() {
    let dir = TempDir::new().unwrap();
    let o = pathoed(
        dir.path(),
        "optimize --mesh @five_node.mesh --length 3 --utility-table @five_node_utility.csv --step 0",
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn optimize_with_incomplete_table_fails_at_runtime_and_flushes_trace() {
    let dir = TempDir::new().unwrap();
    let o =
        pathoed(dir.path(), "optimize --mesh @five_node.mesh --length 4 --utility-table @five_node_utility.csv", &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("utility undefined"));
    assert!(read(dir.path(), "trace.csv").starts_with("iteration,"));
}

#[test]
fn optimize_desk_instance_lands_in_lowest_percentile() {
    let dir = TempDir::new().unwrap();
    let instance = desk_instance(dir.path());
    let o = pathoed(dir.path(), "bruteforce --criterion D --instance", &[&instance]);
    assert!(o.status.success(), "{}", stderr(&o));
    let brute = UtilityTable::parse(&read(dir.path(), "bruteforce.csv")).unwrap();
    assert_eq!(brute.len(), 64);

    let o = pathoed(dir.path(), "optimize --criterion D --instance", &[&instance]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "result.json")).unwrap();
    let best = report["best_utility"].as_f64().unwrap();
    let path: pathoed_core::Path = report["best_path"].as_str().unwrap().parse().unwrap();
    assert_eq!(brute.get(&path), Some(best));

    let mut values: Vec<f64> =
        brute.to_csv().lines().skip(1).map(|l| l.split_once(',').unwrap().1.parse().unwrap()).collect();
    values.sort_by(f64::total_cmp);
    let better = values.iter().filter(|&&v| Mode::Minimize.better(v, best - 1e-12 * best.abs())).count();
    assert!(better as f64 / values.len() as f64 <= 0.01, "{better} of {} paths beat {best}", values.len());

    // Outputs load back through the library.
    let spec = pathoed_core::DeskSpec::from_json(&std::fs::read_to_string(&instance).unwrap()).unwrap();
    let (mesh, _) = pathoed_core::build_desk_instance(&spec).unwrap();
    PolicyParams::from_json(&read(dir.path(), "optimal_params.json"), &mesh).unwrap();
    let iterations = report["iterations"].as_u64().unwrap() as usize;
    assert_eq!(read(dir.path(), "trace.csv").lines().count(), iterations + 1);
}

#[test]
fn bruteforce_counts_feasible_paths() {
    let dir = TempDir::new().unwrap();
    let o =
        pathoed(dir.path(), "bruteforce --mesh @five_node.mesh --length 3 --utility-table @five_node_utility.csv", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(dir.path(), "bruteforce.csv");
    assert_eq!(UtilityTable::parse(&csv).unwrap().len(), 12);
    assert!(stdout(&o).contains("best path 2-3-1"));

    let singles = dir.path().join("singles.csv");
    std::fs::write(&singles, "path,utility\n1,1\n2,2\n3,3\n4,4\n5,5\n").unwrap();
    let o = pathoed(
        dir.path(),
        "bruteforce --mesh @five_node.mesh --length 1 --mode max --utility-table",
        &[singles.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(UtilityTable::parse(&read(dir.path(), "bruteforce.csv")).unwrap().len(), 5);
    assert!(stdout(&o).contains("best path 5 "));
}

#[test]
fn bruteforce_cap_exceeded_reports_count() {
    let dir = TempDir::new().unwrap();
    let o =
        pathoed(dir.path(), "bruteforce --grid 6x6 --length 12 --utility-table @five_node_utility.csv --cap 1000", &[]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("40098720"), "{}", stderr(&o));
}

#[test]
fn gradcheck_passes_on_fixtures() {
    let dir = TempDir::new().unwrap();
    let o = pathoed(dir.path(), "gradcheck --mesh @five_node.mesh --policy @five_node_params.json --length 3 --utility-table @five_node_utility.csv", &[]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let out = stdout(&o);
    for check in ["finite-differences", "score-identity", "baseline-variance"] {
        assert!(out.contains(&format!("PASS  {check}")), "{out}");
    }

    let o = pathoed(
        dir.path(),
        "gradcheck --mesh @five_node.mesh --policy @five_node_params_k2.json --kind generalized --order 2 --length 4",
        &[],
    );
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn gradcheck_reports_failed_checks() {
    let dir = TempDir::new().unwrap();
    // A coarse step leaves truncation error far above the tolerance.
    let o = pathoed(dir.path(), "gradcheck --grid 4x4 --kind higher --order 3 --length 6 --seed 3 --fd-step 0.2", &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL  finite-differences"));
}

#[test]
fn gradcheck_rejects_corrupted_params() {
    let dir = TempDir::new().unwrap();
    let o = pathoed(dir.path(), "gradcheck --mesh @five_node.mesh --policy @corrupted_params.json --length 3", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("1.5"));
}
