//! Test-only reference implementations, written independently of the library
//! internals: dense matrices, matrix powers instead of walk enumeration, and
//! unnormalized lag weights.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use pathoed_core::sampler::sample_one;
use pathoed_core::{LagMode, NavMesh, Path, PathDistribution, PolicyKind, PolicyParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn odds_normalize(params: &[f64]) -> Vec<f64> {
    let w: Vec<f64> = params.iter().map(|&p| p / (1.0 - p)).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// Dense one-step transition matrix.
pub fn dense_transition(mesh: &NavMesh, transition: &[f64]) -> DMatrix<f64> {
    let n = mesh.num_vertices();
    let mut p = DMatrix::zeros(n, n);
    for v in 0..n {
        let ids: Vec<usize> = mesh.out_arc_ids(v).collect();
        if ids.is_empty() {
            continue;
        }
        let vals: Vec<f64> = ids.iter().map(|&a| transition[a]).collect();
        for (&a, pi) in ids.iter().zip(odds_normalize(&vals)) {
            p[(v, mesh.arc(a).1)] = pi;
        }
    }
    p
}

/// Reference PMF. `lags` need not sum to one.
pub fn naive_pmf(
    kind: PolicyKind,
    mesh: &NavMesh,
    initial: &[f64],
    transition: &[f64],
    lags: &[f64],
    path: &[usize],
) -> f64 {
    let p = dense_transition(mesh, transition);
    let k = lags.len();
    let lag_mats: Vec<DMatrix<f64>> = (1..=k)
        .map(|r| match kind {
            PolicyKind::GeneralizedHigherOrder => p.pow(r as u32),
            _ => p.clone(),
        })
        .collect();
    let mut prob = odds_normalize(initial)[path[0]];
    for q in 1..path.len() {
        let factor = if kind == PolicyKind::FirstOrder || q < k {
            p[(path[q - 1], path[q])]
        } else {
            (0..k).map(|i| lags[i] * lag_mats[i][(path[q - 1 - i], path[q])]).sum()
        };
        prob *= factor;
    }
    prob
}

pub fn naive_log_pmf_flat(dist: &PathDistribution, flat: &[f64], path: &[usize]) -> f64 {
    let mesh = dist.mesh();
    let nv = mesh.num_vertices();
    let na = mesh.num_arcs();
    let lags: Vec<f64> = if flat.len() > nv + na { flat[nv + na..].to_vec() } else { vec![1.0] };
    naive_pmf(dist.kind(), mesh, &flat[..nv], &flat[nv..nv + na], &lags, path).ln()
}

/// Random digraph on `nv` vertices: a directed ring plus random chords.
pub fn random_mesh<R: Rng>(rng: &mut R, nv: usize, chord_prob: f64) -> NavMesh {
    let mut arcs: Vec<(usize, usize)> = (0..nv).map(|i| (i, (i + 1) % nv)).collect();
    for i in 0..nv {
        for j in 0..nv {
            if i != j && j != (i + 1) % nv && rng.gen_bool(chord_prob) {
                arcs.push((i, j));
            }
        }
    }
    NavMesh::new(nv, arcs).expect("random mesh is valid")
}

pub struct Instance {
    pub dist: PathDistribution,
    pub path: Path,
}

/// Random mesh, parameters in (0.05, 0.95), random simplex lag weights, and a
/// path drawn from the resulting distribution.
pub fn random_instance(seed: u64, kind: PolicyKind, order: usize, max_vertices: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nv = rng.gen_range(3..=max_vertices);
    let mesh = random_mesh(&mut rng, nv, 0.3);
    let initial: Vec<f64> = (0..nv).map(|_| rng.gen_range(0.05..0.95)).collect();
    let transition: Vec<f64> = (0..mesh.num_arcs()).map(|_| rng.gen_range(0.05..0.95)).collect();
    let lags = match kind {
        PolicyKind::FirstOrder => None,
        _ => {
            let raw: Vec<f64> = (0..order).map(|_| rng.gen_range(0.1..1.0)).collect();
            let s: f64 = raw.iter().sum();
            Some(raw.iter().map(|x| x / s).collect::<Vec<_>>())
        }
    };
    let params = PolicyParams::new(&mesh, initial, transition, lags, LagMode::Optimized).expect("valid params");
    let n = order + 1 + rng.gen_range(0..2);
    let dist = PathDistribution::new(kind, Arc::new(mesh), params, order, n).expect("valid distribution");
    let path = sample_one(&dist, &mut rng).expect("ring meshes have no dead ends");
    Instance { dist, path }
}

/// Central finite differences of `f` around `x` with step `h`.
pub fn central_fd(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut y = x.to_vec();
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let up = f(&y);
        y[i] = x[i] - h;
        let dn = f(&y);
        y[i] = x[i];
        out.push((up - dn) / (2.0 * h));
    }
    out
}

/// Richardson extrapolation of two central differences; error is O(h^4).
pub fn richardson_fd(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let coarse = central_fd(x, h, &f);
    let fine = central_fd(x, h / 2.0, &f);
    fine.iter().zip(&coarse).map(|(a, b)| (4.0 * a - b) / 3.0).collect()
}

pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor)).fold(0.0, f64::max)
}
