//! Linear-Gaussian inverse problem with path-induced observations and the
//! D/A/E design criteria on the posterior covariance.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::navmesh::{build_grid_mesh, CellRect, NavMesh};
use crate::utility::Utility;

const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    /// Log-determinant of the posterior covariance.
    D,
    /// Trace.
    A,
    /// Largest eigenvalue.
    E,
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "D" | "d" => Ok(Self::D),
            "A" | "a" => Ok(Self::A),
            "E" | "e" => Ok(Self::E),
            other => Err(Error::Config(format!("unknown criterion {other:?}, expected D, A, or E"))),
        }
    }
}

/// `x_{s+1} = A x_s`; one observation every `obs_frequency` model steps.
///
/// The observation at path position `t` (1-based) happens at model step
/// `t · f` and reads state entry `vertex_to_state[ζ_t]`.
#[derive(Debug, Clone)]
pub struct LinearGaussianModel {
    propagator: DMatrix<f64>,
    prior_mean: DVector<f64>,
    prior_cov: DMatrix<f64>,
    prior_precision: DMatrix<f64>,
    /// `noise_variance[(v, t - 1)]`.
    noise_variance: DMatrix<f64>,
    obs_frequency: usize,
    dt: f64,
    vertex_to_state: Vec<usize>,
    /// `A^(t f)` for `t = 1..=horizon`.
    powers: Vec<DMatrix<f64>>,
}

impl LinearGaussianModel {
    /// `noise_variance` has one row per vertex and one column per observation
    /// time; its column count is the longest supported path.
    pub fn new(
        propagator: DMatrix<f64>,
        prior_mean: DVector<f64>,
        prior_cov: DMatrix<f64>,
        noise_variance: DMatrix<f64>,
        obs_frequency: usize,
        dt: f64,
        vertex_to_state: Vec<usize>,
    ) -> Result<Self> {
        let m = propagator.nrows();
        if propagator.ncols() != m || prior_cov.shape() != (m, m) || prior_mean.len() != m {
            return Err(Error::Config("propagator, prior mean, and prior covariance dimensions disagree".into()));
        }
        if (&prior_cov - prior_cov.transpose()).amax() > SYMMETRY_TOL {
            return Err(Error::Config("prior covariance is not symmetric".into()));
        }
        if obs_frequency == 0 || !(dt > 0.0) {
            return Err(Error::Config("observation frequency and time step must be positive".into()));
        }
        if noise_variance.nrows() != vertex_to_state.len() {
            return Err(Error::Config("noise table needs one row per vertex".into()));
        }
        if noise_variance.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Config("noise variances must be positive and finite".into()));
        }
        if let Some(&s) = vertex_to_state.iter().find(|&&s| s >= m) {
            return Err(Error::Config(format!("state index {s} out of range for dimension {m}")));
        }
        let chol = Cholesky::new(prior_cov.clone())
            .ok_or_else(|| Error::Numerical("prior covariance is not positive definite".into()))?;
        let prior_precision = symmetrize(chol.inverse());

        let step = propagator.pow(obs_frequency as u32);
        let mut powers = Vec::with_capacity(noise_variance.ncols());
        let mut cur = DMatrix::identity(m, m);
        for _ in 0..noise_variance.ncols() {
            cur = &step * &cur;
            powers.push(cur.clone());
        }

        Ok(Self {
            propagator,
            prior_mean,
            prior_cov,
            prior_precision,
            noise_variance,
            obs_frequency,
            dt,
            vertex_to_state,
            powers,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.propagator.nrows()
    }

    pub fn propagator(&self) -> &DMatrix<f64> {
        &self.propagator
    }

    pub fn prior_cov(&self) -> &DMatrix<f64> {
        &self.prior_cov
    }

    pub fn prior_mean(&self) -> &DVector<f64> {
        &self.prior_mean
    }

    pub fn obs_frequency(&self) -> usize {
        self.obs_frequency
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Longest path the model can observe.
    pub fn horizon(&self) -> usize {
        self.powers.len()
    }

    /// Model time of the observation at 1-based path position `t`.
    pub fn observation_time(&self, t: usize) -> f64 {
        (t * self.obs_frequency) as f64 * self.dt
    }

    pub fn noise_variance(&self, vertex: usize, t: usize) -> f64 {
        self.noise_variance[(vertex, t - 1)]
    }

    fn check_path(&self, path: &[usize]) -> Result<()> {
        if path.len() > self.horizon() {
            return Err(Error::Config(format!(
                "path of length {} exceeds model horizon {}",
                path.len(),
                self.horizon()
            )));
        }
        if let Some(&v) = path.iter().find(|&&v| v >= self.vertex_to_state.len()) {
            return Err(Error::Config(format!("vertex v{} has no state index", v + 1)));
        }
        Ok(())
    }

    /// One row per path node: row `t` of the result is row `state(ζ_t)` of `A^(t f)`.
    pub fn observation_operator(&self, path: &[usize]) -> Result<DMatrix<f64>> {
        self.check_path(path)?;
        let m = self.state_dim();
        Ok(DMatrix::from_fn(path.len(), m, |t, j| self.powers[t][(self.vertex_to_state[path[t]], j)]))
    }

    /// Posterior precision `Fᵀ Γ_noise⁻¹ F + Γ_prior⁻¹`.
    fn posterior_precision(&self, path: &[usize]) -> Result<DMatrix<f64>> {
        let f = self.observation_operator(path)?;
        let mut weighted = f.clone();
        for (t, &v) in path.iter().enumerate() {
            let inv = 1.0 / self.noise_variance(v, t + 1);
            weighted.row_mut(t).scale_mut(inv);
        }
        Ok(symmetrize(f.transpose() * weighted + &self.prior_precision))
    }

    pub fn posterior(&self, path: &[usize]) -> Result<PosteriorSummary> {
        let h = self.posterior_precision(path)?;
        let chol =
            Cholesky::new(h).ok_or_else(|| Error::Numerical("posterior precision factorization failed".into()))?;
        let log_det = -2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(PosteriorSummary { cov: symmetrize(chol.inverse()), log_det, mean: None })
    }

    /// Posterior with mean, given one datum per path node.
    pub fn posterior_with_data(&self, path: &[usize], data: &[f64]) -> Result<PosteriorSummary> {
        if data.len() != path.len() {
            return Err(Error::Contract(format!("{} data values for a path of length {}", data.len(), path.len())));
        }
        let mut post = self.posterior(path)?;
        let f = self.observation_operator(path)?;
        let scaled = DVector::from_iterator(
            data.len(),
            path.iter().enumerate().map(|(t, &v)| data[t] / self.noise_variance(v, t + 1)),
        );
        let rhs = f.transpose() * scaled + &self.prior_precision * &self.prior_mean;
        post.mean = Some(&post.cov * rhs);
        Ok(post)
    }

    pub fn utility(&self, path: &[usize], criterion: Criterion) -> Result<f64> {
        let post = self.posterior(path)?;
        Ok(match criterion {
            Criterion::D => post.log_det,
            Criterion::A => post.cov.trace(),
            Criterion::E => post.max_eigenvalue(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub cov: DMatrix<f64>,
    /// `log det` of `cov`, from the precision factorization.
    pub log_det: f64,
    pub mean: Option<DVector<f64>>,
}

impl PosteriorSummary {
    pub fn max_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.cov.clone()).eigenvalues.max()
    }
}

/// Dominant eigenvalue of a symmetric positive semidefinite matrix, iterated
/// until successive estimates agree to `rel_tol`.
pub fn power_iteration(mat: &DMatrix<f64>, rel_tol: f64, max_iter: usize) -> Result<f64> {
    let n = mat.nrows();
    if n == 0 || mat.ncols() != n {
        return Err(Error::Contract("power iteration needs a non-empty square matrix".into()));
    }
    // A fixed, non-symmetric start vector avoids orthogonality to the top eigenvector in practice.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + i as f64 / n as f64);
    v.normalize_mut();
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = mat * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        v = w / norm;
        if (next - lambda).abs() <= rel_tol * next.abs() {
            return Ok(next);
        }
        lambda = next;
    }
    Err(Error::Numerical(format!("power iteration did not converge in {max_iter} iterations")))
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// A model paired with a criterion, usable wherever a [`Utility`] is expected.
#[derive(Debug, Clone)]
pub struct BayesUtility {
    pub model: LinearGaussianModel,
    pub criterion: Criterion,
}

impl Utility for BayesUtility {
    fn evaluate(&self, path: &[usize]) -> Result<f64> {
        self.model.utility(path, self.criterion)
    }
}

/// Configuration of a small grid instance with diffusion dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeskSpec {
    pub rows: usize,
    pub cols: usize,
    /// Each hole is `[row, col, height, width]`, 0-based.
    pub holes: Vec<[usize; 4]>,
    /// Explicit diffusion coefficient; the propagator is `I - α L` with `L`
    /// the mesh graph Laplacian. Must lie in `[0, 0.25]`.
    pub diffusion: f64,
    pub prior_variance: f64,
    pub prior_length_scale: f64,
    pub prior_nugget: f64,
    /// Noise variance as a fraction of the reference field's maximum absolute
    /// value at each vertex.
    pub noise_fraction: f64,
    pub obs_frequency: usize,
    pub dt: f64,
    pub path_length: usize,
    /// Reference field: `offset + exp(-|x - center|² / (2 width²))`.
    pub source_center: [f64; 2],
    pub source_width: f64,
    pub source_offset: f64,
}

impl Default for DeskSpec {
    fn default() -> Self {
        Self {
            rows: 3,
            cols: 3,
            holes: Vec::new(),
            diffusion: 0.1,
            prior_variance: 1.0,
            prior_length_scale: 0.3,
            prior_nugget: 1e-6,
            noise_fraction: 0.05,
            obs_frequency: 1,
            dt: 0.2,
            path_length: 4,
            source_center: [0.25, 0.75],
            source_width: 0.2,
            source_offset: 0.1,
        }
    }
}

impl DeskSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("instance spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("instance spec: {m}")));
        if !(0.0..=0.25).contains(&self.diffusion) {
            return bad("diffusion must lie in [0, 0.25]");
        }
        if !(self.prior_variance > 0.0) || !(self.prior_length_scale > 0.0) || !(self.prior_nugget >= 0.0) {
            return bad("prior variance and length scale must be positive, nugget nonnegative");
        }
        if !(self.noise_fraction > 0.0) || !(self.source_width > 0.0) || !(self.source_offset > 0.0) {
            return bad("noise fraction, source width, and source offset must be positive");
        }
        if self.obs_frequency == 0 || self.path_length == 0 || !(self.dt > 0.0) {
            return bad("obs_frequency, path_length, and dt must be positive");
        }
        Ok(())
    }
}

/// Builds the grid mesh and a matched model. The state holds one entry per
/// mesh vertex.
pub fn build_desk_instance(spec: &DeskSpec) -> Result<(NavMesh, LinearGaussianModel)> {
    spec.validate()?;
    let holes: Vec<CellRect> =
        spec.holes.iter().map(|h| CellRect { row: h[0], col: h[1], height: h[2], width: h[3] }).collect();
    let mesh = build_grid_mesh(spec.rows, spec.cols, &holes).map_err(|e| Error::Config(e.to_string()))?;
    let m = mesh.num_vertices();
    let coords = mesh.coordinates().expect("grid meshes carry coordinates").to_vec();

    let mut propagator = DMatrix::<f64>::identity(m, m);
    for v in 0..m {
        for &u in mesh.out_neighbors(v) {
            propagator[(v, u)] += spec.diffusion;
            propagator[(v, v)] -= spec.diffusion;
        }
    }

    let sq_dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let ell2 = spec.prior_length_scale * spec.prior_length_scale;
    let prior_cov = DMatrix::from_fn(m, m, |i, j| {
        let k = spec.prior_variance * (-sq_dist(coords[i], coords[j]) / (2.0 * ell2)).exp();
        if i == j {
            k + spec.prior_nugget
        } else {
            k
        }
    });

    let w2 = spec.source_width * spec.source_width;
    let mut state =
        DVector::from_fn(m, |i, _| spec.source_offset + (-sq_dist(coords[i], spec.source_center) / (2.0 * w2)).exp());
    let mut peak = state.abs();
    for _ in 0..spec.path_length * spec.obs_frequency {
        state = &propagator * state;
        peak = peak.zip_map(&state, |a, b| a.max(b.abs()));
    }
    let noise = DMatrix::from_fn(m, spec.path_length, |v, _| spec.noise_fraction * peak[v]);

    let model = LinearGaussianModel::new(
        propagator,
        DVector::zeros(m),
        prior_cov,
        noise,
        spec.obs_frequency,
        spec.dt,
        (0..m).collect(),
    )?;
    Ok((mesh, model))
}
