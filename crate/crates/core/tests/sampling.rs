use std::collections::HashMap;
use std::sync::Arc;

use pathoed_core::fixtures::five_node_example;
use pathoed_core::policy::DEFAULT_SUPPORT_CAP;
use pathoed_core::{enumerate_support, sample_paths, LagMode, Path, PathDistribution, PolicyKind, RngSeed};

fn counts(paths: &[Path]) -> HashMap<&Path, usize> {
    let mut out = HashMap::new();
    for p in paths {
        *out.entry(p).or_insert(0) += 1;
    }
    out
}

#[test]
fn first_order_frequency_of_fixed_path() {
    let (mesh, params) = five_node_example();
    let d = PathDistribution::first_order(Arc::new(mesh), params, 3).unwrap();
    let draws = 200_000;
    let paths = sample_paths(&d, draws, RngSeed(17)).unwrap();
    let hits = paths.iter().filter(|p| **p == Path::from_labels(&[4, 3, 1])).count();
    let freq = hits as f64 / draws as f64;
    assert!((freq - 12.0 / 60.0).abs() <= 0.005, "freq {freq}");
}

#[test]
fn generalized_order_two_passes_chi_square() {
    let (mesh, params) = five_node_example();
    let params = params.with_default_lags(2, LagMode::Optimized);
    let d = PathDistribution::new(PolicyKind::GeneralizedHigherOrder, Arc::new(mesh), params, 2, 3).unwrap();
    let support = enumerate_support(&d, DEFAULT_SUPPORT_CAP).unwrap();
    assert_eq!(support.len(), 19);

    let draws = 500_000;
    let paths = sample_paths(&d, draws, RngSeed(2024)).unwrap();
    let observed = counts(&paths);
    assert!(observed.keys().all(|p| support.iter().any(|(q, _)| q == *p)));
    let chi2: f64 = support
        .iter()
        .map(|(p, prob)| {
            let expected = prob * draws as f64;
            let o = *observed.get(p).unwrap_or(&0) as f64;
            (o - expected).powi(2) / expected
        })
        .sum();
    // 0.995 quantile of chi-square with 18 degrees of freedom.
    assert!(chi2 < 42.312, "chi2 {chi2}");
}

#[test]
fn every_sample_has_finite_log_pmf() {
    let (mesh, params) = five_node_example();
    let mesh = Arc::new(mesh);
    for (kind, k) in
        [(PolicyKind::FirstOrder, 1), (PolicyKind::HigherOrder, 2), (PolicyKind::GeneralizedHigherOrder, 3)]
    {
        let p = if k == 1 { params.clone() } else { params.clone().with_default_lags(k, LagMode::Optimized) };
        let d = PathDistribution::new(kind, mesh.clone(), p, k, 5).unwrap();
        for path in sample_paths(&d, 5_000, RngSeed(k as u64)).unwrap() {
            assert_eq!(path.len(), 5);
            assert!(d.log_pmf(&path).unwrap().is_finite(), "{kind} {path:?}");
        }
    }
}

#[test]
fn sampling_is_reproducible_and_thread_independent() {
    let (mesh, params) = five_node_example();
    let params = params.with_default_lags(2, LagMode::FixedHarmonic);
    let d = PathDistribution::new(PolicyKind::HigherOrder, Arc::new(mesh), params, 2, 6).unwrap();
    let a = sample_paths(&d, 3_000, RngSeed(5)).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| sample_paths(&d, 3_000, RngSeed(5)).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, sample_paths(&d, 3_000, RngSeed(6)).unwrap());
}
