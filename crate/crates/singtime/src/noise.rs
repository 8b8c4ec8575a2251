//! Divergence-free transport-noise coefficient families.
//!
//! The concrete family is the standard Kraichnan discretization: for each
//! wavevector `0 < |k| <= k_max` (one representative per `+-k` pair) and each
//! of the `d - 1` polarizations `e` with `e . k = 0`, a cosine and a sine
//! field with amplitude `a_k = amplitude * |k|^-(gamma + d/2)`. The power-law
//! exponent is the surrogate yielding `C^(gamma-)` sample regularity;
//! `gamma = 2/3` mimics the Kolmogorov spectrum.
//!
//! Fields are static in time and immutable after construction.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("spatial dimension must be 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("k_max must be >= 1, got {0}")]
    BadKMax(i64),
    #[error("{0} must be positive, got {1}")]
    NonPositive(&'static str, f64),
    #[error("field already carries Lie gradients (mu_mode = lie)")]
    AlreadyLie,
    #[error("grid size must be a power of two, got {0}")]
    BadGrid(usize),
    #[error("divergence-free invariant violated: mode k = {k:?} has |k . sigma_hat| / |sigma_hat| = {relative:.3e}")]
    DivergenceViolation { k: [i64; 3], relative: f64 },
}

/// Trigonometric phase of a single real mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Cos,
    Sin,
}

/// One real noise field `sigma_n(x) = c * trig(2 pi k . x)` together with its
/// optional Lie gradient `mu_n = grad sigma_n` (a matrix-valued field with the
/// opposite phase; the sign is baked into the stored matrix).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseMode {
    pub k: [i64; 3],
    /// Vector coefficient `c = a_k * e`; only the first `d` entries are used.
    pub coeff: [f64; 3],
    pub phase: Phase,
    /// `mu[i][j] = partial_j sigma_i` coefficient matrix, phase flipped.
    pub mu: Option<[[f64; 3]; 3]>,
}

impl NoiseMode {
    fn k_dot_x(&self, x: &[f64], d: usize) -> f64 {
        (0..d).map(|i| self.k[i] as f64 * x[i]).sum()
    }

    fn trig(&self, theta: f64) -> f64 {
        match self.phase {
            Phase::Cos => theta.cos(),
            Phase::Sin => theta.sin(),
        }
    }

    fn trig_flipped(&self, theta: f64) -> f64 {
        match self.phase {
            Phase::Cos => theta.sin(),
            Phase::Sin => theta.cos(),
        }
    }

    /// `sigma_n(x)`.
    pub fn sigma_at(&self, x: &[f64], d: usize) -> [f64; 3] {
        let v = self.trig(2.0 * PI * self.k_dot_x(x, d));
        [self.coeff[0] * v, self.coeff[1] * v, self.coeff[2] * v]
    }

    /// `mu_n(x)` as a matrix, or zeros when the field carries no gradient.
    pub fn mu_at(&self, x: &[f64], d: usize) -> [[f64; 3]; 3] {
        match &self.mu {
            None => [[0.0; 3]; 3],
            Some(m) => {
                let v = self.trig_flipped(2.0 * PI * self.k_dot_x(x, d));
                let mut out = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        out[i][j] = m[i][j] * v;
                    }
                }
                out
            }
        }
    }

    /// The exact Lie gradient matrix for this mode.
    fn lie_matrix(&self) -> [[f64; 3]; 3] {
        // grad(a cos th) = -2 pi (a x k) sin th; grad(a sin th) = +2 pi (a x k) cos th.
        let sign = match self.phase {
            Phase::Cos => -1.0,
            Phase::Sin => 1.0,
        };
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = sign * 2.0 * PI * self.coeff[i] * self.k[j] as f64;
            }
        }
        m
    }
}

/// Whether the family carries the Lie transport gradients `mu_n = grad sigma_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MuMode {
    None,
    Lie,
}

/// Spectral representation of a `(sigma_n)_n`, `(mu_n)_n` family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseField {
    pub d: usize,
    pub modes: Vec<NoiseMode>,
    /// Target Holder regularity exponent of the family.
    pub gamma: f64,
    pub mu_mode: MuMode,
    /// Certified bound on the discrete `C^gamma(ell^2)` norm estimate.
    pub m_bound: f64,
    pub seed: u64,
    /// Construction provenance: spectral cutoff and amplitude prefactor.
    pub k_max: i64,
    pub amplitude: f64,
    /// Human-readable provenance, e.g. the Kolmogorov-spectrum flag.
    pub label: String,
}

/// Validation report of [`validate`]. The Holder quotient is a
/// finite-difference estimator at dyadic separations, not a proof.
#[derive(Debug, Clone, Serialize)]
pub struct NoiseReport {
    /// `max_x sum_n |sigma_n(x)|^2` over the grid.
    pub sup_l2_sq: f64,
    /// `min_x sum_n |sigma_n(x)|^2`; equals the sup for isotropic families.
    pub inf_l2_sq: f64,
    /// Finite-difference `C^gamma(ell^2)` quotient surrogate.
    pub holder_quotient: f64,
    pub m_bound: f64,
    pub within_bound: bool,
    /// `max_n |k . sigma_hat| / |sigma_hat|`.
    pub divergence_residual: f64,
    /// Spectral-norm residual of `mu_n - grad sigma_n` for Lie fields.
    pub lie_residual: f64,
}

fn norm_sq(v: &[f64; 3]) -> f64 {
    v.iter().map(|c| c * c).sum()
}

/// Seeded Kraichnan family with `mu_n = 0`.
pub fn build_kraichnan(
    d: usize,
    k_max: i64,
    gamma: f64,
    amplitude: f64,
    seed: u64,
) -> Result<NoiseField, NoiseError> {
    if d != 2 && d != 3 {
        return Err(NoiseError::BadDimension(d));
    }
    if k_max < 1 {
        return Err(NoiseError::BadKMax(k_max));
    }
    if !(gamma > 0.0) {
        return Err(NoiseError::NonPositive("gamma", gamma));
    }
    if amplitude < 0.0 {
        return Err(NoiseError::NonPositive("amplitude", amplitude));
    }
    let mut modes = Vec::new();
    for k in half_space_wavevectors(d, k_max) {
        let k_norm = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt();
        let a_k = amplitude * k_norm.powf(-(gamma + d as f64 / 2.0));
        for e in polarizations(d, &k) {
            let coeff = [a_k * e[0], a_k * e[1], a_k * e[2]];
            for phase in [Phase::Cos, Phase::Sin] {
                modes.push(NoiseMode { k, coeff, phase, mu: None });
            }
        }
    }
    let l2_sum: f64 = modes
        .iter()
        .map(|m| norm_sq(&m.coeff))
        .sum::<f64>()
        / 2.0
        * 2.0; // cos^2 + sin^2 pairs sum to one full amplitude each
    let holder_sum: f64 = modes
        .iter()
        .map(|m| {
            let k_norm =
                ((m.k[0] * m.k[0] + m.k[1] * m.k[1] + m.k[2] * m.k[2]) as f64).sqrt();
            norm_sq(&m.coeff) * (2.0 * PI * k_norm).powf(2.0 * gamma)
        })
        .sum();
    let m_bound = l2_sum.sqrt() + holder_sum.sqrt();
    let label = if (gamma - 2.0 / 3.0).abs() < 1e-12 {
        "kraichnan (Kolmogorov-spectrum surrogate, gamma = 2/3)".to_string()
    } else {
        "kraichnan".to_string()
    };
    Ok(NoiseField { d, modes, gamma, mu_mode: MuMode::None, m_bound, seed, k_max, amplitude, label })
}

/// Adds the exact Lie gradients `mu_n = grad sigma_n`, computed in Fourier
/// space (each `sigma_n` is a finite trigonometric polynomial).
pub fn build_lie(base: &NoiseField) -> Result<NoiseField, NoiseError> {
    if base.mu_mode == MuMode::Lie {
        return Err(NoiseError::AlreadyLie);
    }
    let mut field = base.clone();
    for mode in &mut field.modes {
        mode.mu = Some(mode.lie_matrix());
    }
    field.mu_mode = MuMode::Lie;
    field.label = format!("{} + lie transport", base.label);
    Ok(field)
}

/// Wavevectors `0 < |k| <= k_max`, one representative per `{k, -k}` pair
/// (first nonzero coordinate positive), in a fixed deterministic order.
pub fn half_space_wavevectors(d: usize, k_max: i64) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    let range = -k_max..=k_max;
    let zs: Vec<i64> = if d == 3 { range.clone().collect() } else { vec![0] };
    for i in range.clone() {
        for j in range.clone() {
            for &l in &zs {
                let k = [i, j, l];
                let sq = i * i + j * j + l * l;
                if sq == 0 || sq > k_max * k_max {
                    continue;
                }
                let leading = if i != 0 { i } else if j != 0 { j } else { l };
                if leading > 0 {
                    out.push(k);
                }
            }
        }
    }
    out.sort();
    out
}

/// `d - 1` unit polarization vectors orthogonal to `k`.
fn polarizations(d: usize, k: &[i64; 3]) -> Vec<[f64; 3]> {
    let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
    let k_norm = norm_sq(&kf).sqrt();
    if d == 2 {
        vec![[-kf[1] / k_norm, kf[0] / k_norm, 0.0]]
    } else {
        let axis = if k[0] == 0 && k[1] == 0 { [0.0, 1.0, 0.0] } else { [0.0, 0.0, 1.0] };
        let e1 = normalize(cross(&kf, &axis));
        let e2 = normalize(cross(&kf, &e1));
        vec![e1, e2]
    }
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = norm_sq(&v).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Grid evaluation of the family's invariants. Fails hard on a divergence
/// violation; everything else is reported.
pub fn validate(field: &NoiseField, grid_n: usize) -> Result<NoiseReport, NoiseError> {
    if grid_n == 0 || !grid_n.is_power_of_two() {
        return Err(NoiseError::BadGrid(grid_n));
    }
    // (b) spectral divergence: k . coeff must vanish mode-wise.
    let mut divergence_residual: f64 = 0.0;
    for mode in &field.modes {
        let c_norm = norm_sq(&mode.coeff).sqrt();
        if c_norm == 0.0 {
            continue;
        }
        let k_dot: f64 = (0..3).map(|i| mode.k[i] as f64 * mode.coeff[i]).sum();
        let k_norm = ((mode.k.iter().map(|&x| x * x).sum::<i64>()) as f64).sqrt().max(1.0);
        let rel = k_dot.abs() / (c_norm * k_norm);
        divergence_residual = divergence_residual.max(rel);
        if rel >= 1e-12 {
            return Err(NoiseError::DivergenceViolation { k: mode.k, relative: rel });
        }
    }
    // (a) pointwise ell^2 norm and Holder quotient on the grid.
    let d = field.d;
    let h = 1.0 / grid_n as f64;
    let mut sup_l2_sq: f64 = 0.0;
    let mut inf_l2_sq = f64::INFINITY;
    let mut holder_quotient: f64 = 0.0;
    let points: Vec<Vec<f64>> = grid_points(d, grid_n);
    let l2_sq_at = |x: &[f64]| -> f64 {
        field.modes.iter().map(|m| norm_sq(&m.sigma_at(x, d))).sum()
    };
    for x in &points {
        let v = l2_sq_at(x);
        sup_l2_sq = sup_l2_sq.max(v);
        inf_l2_sq = inf_l2_sq.min(v);
        // dyadic separations along each axis
        let mut sep = h;
        while sep <= 0.5 {
            for axis in 0..d {
                let mut y = x.clone();
                y[axis] += sep;
                let diff_sq: f64 = field
                    .modes
                    .iter()
                    .map(|m| {
                        let a = m.sigma_at(x, d);
                        let b = m.sigma_at(&y, d);
                        norm_sq(&[a[0] - b[0], a[1] - b[1], a[2] - b[2]])
                    })
                    .sum();
                holder_quotient = holder_quotient.max(diff_sq.sqrt() / sep.powf(field.gamma));
            }
            sep *= 2.0;
        }
    }
    // (c) Lie residual: stored mu against the exact spectral gradient.
    let mut lie_residual: f64 = 0.0;
    if field.mu_mode == MuMode::Lie {
        for mode in &field.modes {
            let exact = mode.lie_matrix();
            let stored = mode.mu.unwrap_or([[0.0; 3]; 3]);
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    num += (stored[i][j] - exact[i][j]).powi(2);
                    den += exact[i][j].powi(2);
                }
            }
            if den > 0.0 {
                lie_residual = lie_residual.max((num / den).sqrt());
            }
        }
    }
    let within_bound = sup_l2_sq.sqrt() + holder_quotient <= field.m_bound * (1.0 + 1e-9);
    Ok(NoiseReport {
        sup_l2_sq,
        inf_l2_sq,
        holder_quotient,
        m_bound: field.m_bound,
        within_bound,
        divergence_residual,
        lie_residual,
    })
}

fn grid_points(d: usize, n: usize) -> Vec<Vec<f64>> {
    // Full grid in 2-D; a thinned grid in 3-D to keep validation cheap.
    let stride = if d == 3 && n > 16 { n / 16 } else { 1 };
    let axis: Vec<f64> = (0..n).step_by(stride).map(|i| i as f64 / n as f64).collect();
    let mut out = Vec::new();
    if d == 2 {
        for &x in &axis {
            for &y in &axis {
                out.push(vec![x, y]);
            }
        }
    } else {
        for &x in &axis {
            for &y in &axis {
                for &z in &axis {
                    out.push(vec![x, y, z]);
                }
            }
        }
    }
    out
}
