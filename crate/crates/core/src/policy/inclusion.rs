//! Inclusion-probability groups: a block of Bernoulli parameters turned into
//! a categorical distribution through odds ratios `w = p / (1 - p)`.

/// Parameters strictly inside (0, 1) are clamped to `[EPS, 1 - EPS]` before
/// forming odds ratios.
pub const CLAMP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct InclusionGroup {
    probs: Vec<f64>,
    weights: Vec<f64>,
    /// `1 / (1 - p)^2` for the clamped parameters: the derivative `dw/dp`.
    dweight: Vec<f64>,
    total: f64,
    /// Set when a parameter is exactly 1 and every other parameter is 0.
    forced: Option<usize>,
}

impl InclusionGroup {
    /// Returns `None` when no parameter is positive (the group has no mass).
    pub fn new(params: &[f64]) -> Option<Self> {
        let positive = params.iter().filter(|&&p| p > 0.0).count();
        if positive == 0 {
            return None;
        }
        if positive == 1 {
            if let Some(k) = params.iter().position(|&p| p == 1.0) {
                let mut probs = vec![0.0; params.len()];
                probs[k] = 1.0;
                return Some(Self {
                    probs,
                    weights: vec![0.0; params.len()],
                    dweight: vec![0.0; params.len()],
                    total: f64::INFINITY,
                    forced: Some(k),
                });
            }
        }

        let clamped: Vec<f64> =
            params.iter().map(|&p| if p <= 0.0 { 0.0 } else { p.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS) }).collect();
        let weights: Vec<f64> = clamped.iter().map(|&c| c / (1.0 - c)).collect();
        let dweight = clamped.iter().map(|&c| 1.0 / ((1.0 - c) * (1.0 - c))).collect();
        let total: f64 = weights.iter().sum();
        let probs = weights.iter().map(|&w| w / total).collect();
        Some(Self { probs, weights, dweight, total, forced: None })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn is_forced(&self) -> bool {
        self.forced.is_some()
    }

    /// `out[m] += scale * d log(pi_chosen) / d p_m`.
    ///
    /// `(delta_cm / w_m - 1 / W) / (1 - p_m)^2`; identically zero for a forced group.
    pub fn add_log_grad(&self, chosen: usize, scale: f64, out: &mut [f64]) {
        if self.forced.is_some() {
            return;
        }
        let inv_total = 1.0 / self.total;
        for (m, slot) in out.iter_mut().enumerate() {
            let delta = if m == chosen { 1.0 / self.weights[m] } else { 0.0 };
            *slot += scale * self.dweight[m] * (delta - inv_total);
        }
    }

    /// `out[m] += scale * d pi_chosen / d p_m = scale * (delta_cm - pi_c) / (W (1 - p_m)^2)`.
    ///
    /// Well defined even when `pi_chosen` is zero.
    pub fn add_prob_grad(&self, chosen: usize, scale: f64, out: &mut [f64]) {
        if self.forced.is_some() {
            return;
        }
        let inv_total = 1.0 / self.total;
        let pc = self.probs[chosen];
        for (m, slot) in out.iter_mut().enumerate() {
            let delta = if m == chosen { 1.0 } else { 0.0 };
            *slot += scale * self.dweight[m] * (delta - pc) * inv_total;
        }
    }
}
