use nalgebra::{DMatrix, DVector, SymmetricEigen};
use pathoed_core::bayes_utility::power_iteration;
use pathoed_core::oracle::enumerate_feasible_paths;
use pathoed_core::policy::DEFAULT_SUPPORT_CAP;
use pathoed_core::{build_desk_instance, BayesUtility, Criterion, DeskSpec, LinearGaussianModel, Utility};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Random {
    model: LinearGaussianModel,
    num_vertices: usize,
    horizon: usize,
    vertex_to_state: Vec<usize>,
}

fn random_model(seed: u64) -> Random {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(2..=6);
    let nv = rng.gen_range(1..=m + 2);
    let horizon = rng.gen_range(1..=5);
    let propagator = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-0.6..0.6));
    let b = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
    let prior_cov = &b * b.transpose() + DMatrix::identity(m, m) * 0.1;
    let prior_mean = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
    let noise = DMatrix::from_fn(nv, horizon, |_, _| rng.gen_range(0.01..2.0));
    let vertex_to_state: Vec<usize> = (0..nv).map(|_| rng.gen_range(0..m)).collect();
    let f = rng.gen_range(1..=3);
    let model =
        LinearGaussianModel::new(propagator, prior_mean, prior_cov, noise, f, 0.1, vertex_to_state.clone()).unwrap();
    Random { model, num_vertices: nv, horizon, vertex_to_state }
}

fn random_path(seed: u64, nv: usize, len: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    (0..len).map(|_| rng.gen_range(0..nv)).collect()
}

fn symmetric_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    SymmetricEigen::new(m.clone()).eigenvalues
}

/// Covariance form of the Gaussian update, used as an independent route.
fn covariance_form(r: &Random, path: &[usize]) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let model = &r.model;
    let m = model.state_dim();
    let f = DMatrix::from_fn(path.len(), m, |t, j| {
        let power = model.propagator().pow(((t + 1) * model.obs_frequency()) as u32);
        power[(r.vertex_to_state[path[t]], j)]
    });
    let noise = DMatrix::from_diagonal(&DVector::from_fn(path.len(), |t, _| model.noise_variance(path[t], t + 1)));
    let prior = model.prior_cov();
    let gain_inner = (&f * prior * f.transpose() + &noise).try_inverse().unwrap();
    let post = prior - prior * f.transpose() * &gain_inner * &f * prior;
    (post, f, gain_inner)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn posterior_is_symmetric_positive_definite(seed in any::<u64>()) {
        let r = random_model(seed);
        let path = random_path(seed, r.num_vertices, r.horizon);
        let post = r.model.posterior(&path).unwrap();
        prop_assert!((&post.cov - post.cov.transpose()).amax() == 0.0);
        let eig = symmetric_eigenvalues(&post.cov);
        prop_assert!(eig.min() > 0.0);
        let via_eig: f64 = eig.iter().map(|x| x.ln()).sum();
        prop_assert!((via_eig - post.log_det).abs() < 1e-8 * (1.0 + via_eig.abs()));
    }

    #[test]
    fn observations_never_increase_uncertainty(seed in any::<u64>()) {
        let r = random_model(seed);
        let path = random_path(seed, r.num_vertices, r.horizon);
        for criterion in [Criterion::D, Criterion::A, Criterion::E] {
            let mut prev = f64::INFINITY;
            for len in 0..=path.len() {
                let value = r.model.utility(&path[..len], criterion).unwrap();
                prop_assert!(value <= prev + 1e-10 * prev.abs().max(1.0), "{criterion:?}: {value} after {prev}");
                prev = value;
            }
        }
    }

    #[test]
    fn criteria_are_ordered(seed in any::<u64>()) {
        let r = random_model(seed);
        let path = random_path(seed, r.num_vertices, r.horizon);
        let a = r.model.utility(&path, Criterion::A).unwrap();
        let e = r.model.utility(&path, Criterion::E).unwrap();
        let m = r.model.state_dim() as f64;
        prop_assert!(e <= a * (1.0 + 1e-12));
        prop_assert!(a <= m * e * (1.0 + 1e-12));
    }

    #[test]
    fn operator_rows_are_propagator_powers(seed in any::<u64>()) {
        let r = random_model(seed);
        let path = random_path(seed, r.num_vertices, r.horizon);
        let f = r.model.observation_operator(&path).unwrap();
        let (_, reference, _) = covariance_form(&r, &path);
        prop_assert!((&f - &reference).amax() <= 1e-12 * reference.amax().max(1.0));
    }

    #[test]
    fn precision_and_covariance_forms_agree(seed in any::<u64>()) {
        let r = random_model(seed);
        let path = random_path(seed, r.num_vertices, r.horizon);
        let data: Vec<f64> = (0..path.len()).map(|t| (t as f64 * 0.7 + seed as f64 * 1e-19).sin()).collect();
        let post = r.model.posterior_with_data(&path, &data).unwrap();
        let (cov, f, gain_inner) = covariance_form(&r, &path);
        let scale = cov.amax();
        prop_assert!((&post.cov - &cov).amax() <= 1e-7 * scale, "{}", (&post.cov - &cov).amax() / scale);
        let prior_mean = r.model.prior_mean();
        let y = DVector::from_vec(data);
        let mean = prior_mean + r.model.prior_cov() * f.transpose() * gain_inner * (y - &f * prior_mean);
        let got = post.mean.unwrap();
        prop_assert!((&got - &mean).amax() <= 1e-7 * mean.amax().max(1.0));
    }

    #[test]
    fn power_iteration_matches_eigensolver(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=8);
        let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let spd = &b * b.transpose() + DMatrix::identity(n, n) * 0.01;
        let exact = symmetric_eigenvalues(&spd).max();
        let approx = power_iteration(&spd, 1e-12, 1_000_000).unwrap();
        prop_assert!((approx - exact).abs() <= 1e-6 * exact, "{approx} vs {exact}");
    }
}

#[test]
fn desk_criteria_depend_on_visit_order() {
    let spec = DeskSpec { holes: vec![[1, 1, 1, 1]], ..DeskSpec::default() };
    let (mesh, model) = build_desk_instance(&spec).unwrap();
    let paths = enumerate_feasible_paths(&mesh, spec.path_length, DEFAULT_SUPPORT_CAP).unwrap();
    for criterion in [Criterion::D, Criterion::A, Criterion::E] {
        let u = BayesUtility { model: model.clone(), criterion };
        let mut sensitive = 0;
        for p in &paths {
            let reversed: Vec<usize> = p.iter().rev().copied().collect();
            if mesh.has_arc(reversed[0], reversed[1]) {
                let gap = (u.evaluate(p).unwrap() - u.evaluate(&reversed).unwrap()).abs();
                if gap > 1e-8 {
                    sensitive += 1;
                }
            }
        }
        assert!(sensitive > 0, "{criterion:?} ignores observation order");
    }
}

#[test]
fn desk_utility_prefers_observing_over_not() {
    let (mesh, model) = build_desk_instance(&DeskSpec::default()).unwrap();
    let prior = model.utility(&[], Criterion::D).unwrap();
    for v in 0..mesh.num_vertices() {
        assert!(model.utility(&[v], Criterion::D).unwrap() < prior);
    }
}
