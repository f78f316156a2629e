//! Position-space density matrix from the first and second moments, under a
//! Gaussian closure for all higher moments.
//!
//! `s_qp` is the symmetrized covariance `⟨δx δp + δp δx⟩`, so the covariance
//! matrix is `[[s_qq, s_qp/2], [s_qp/2, s_pp]]`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::EvmState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub q: f64,
    pub p: f64,
    pub s_qq: f64,
    pub s_pp: f64,
    pub s_qp: f64,
    pub hbar: f64,
}

impl MomentSet {
    pub fn coherent(q: f64, p: f64, hbar: f64) -> Self {
        Self {
            q,
            p,
            s_qq: 0.5 * hbar,
            s_pp: 0.5 * hbar,
            s_qp: 0.0,
            hbar,
        }
    }

    pub fn from_state(s: &EvmState, hbar: f64) -> Self {
        Self {
            q: s.q,
            p: s.p,
            s_qq: s.s_qq,
            s_pp: s.s_pp,
            s_qp: s.s_qp,
            hbar,
        }
    }

    /// Determinant of the covariance matrix.
    pub fn covariance_det(&self) -> f64 {
        self.s_qq * self.s_pp - 0.25 * self.s_qp * self.s_qp
    }

    /// `Tr ρ²` of the Gaussian state with these moments.
    pub fn gaussian_purity(&self) -> f64 {
        0.5 * self.hbar / self.covariance_det().sqrt()
    }
}

/// `Tr[ρ e^{iαp} e^{iβx}]` for the Gaussian state with moments `m`.
pub fn characteristic_function(m: &MomentSet, alpha: f64, beta: f64) -> Complex64 {
    let variance = alpha * alpha * m.s_pp + beta * beta * m.s_qq + alpha * beta * m.s_qp;
    let phase = alpha * m.p + beta * m.q + 0.5 * alpha * beta * m.hbar;
    Complex64::from_polar((-0.5 * variance).exp(), phase)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub x: Vec<f64>,
    pub dx: f64,
    /// `rho[(j, k)] ≈ ⟨x_j|ρ|x_k⟩`, Hermitian.
    pub rho: DMatrix<Complex64>,
    /// `max |ρ − ρ†|` before symmetrization.
    pub hermiticity_residual: f64,
    /// `Σ ρ(x,x) dx` before renormalization.
    pub raw_trace: f64,
    /// Factor applied to reach unit trace (1 when none was needed).
    pub renormalization: f64,
}

impl DensityGrid {
    pub fn trace(&self) -> f64 {
        self.rho.diagonal().iter().map(|z| z.re).sum::<f64>() * self.dx
    }

    /// `Tr ρ²` in the continuum normalization.
    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dx * self.dx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionOptions {
    /// Half-width of the β range in units of `1/sqrt(s_qq)`.
    pub beta_extent: f64,
    /// Trace deviations above this are renormalized away.
    pub trace_tol: f64,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        Self {
            beta_extent: 10.0,
            trace_tol: 1e-9,
        }
    }
}

pub fn density_matrix_grid(m: &MomentSet, n: usize, x_span: f64) -> Result<DensityGrid> {
    density_matrix_grid_with(m, n, x_span, ReconstructionOptions::default())
}

/// `⟨x|ρ|x'⟩ = (1/2π) ∫ dβ C((x − x')/ħ, β) e^{−iβx}` on `n` points spanning
/// `x_span` centred on `m.q`, with the β integral done as a uniform sum.
pub fn density_matrix_grid_with(
    m: &MomentSet,
    n: usize,
    x_span: f64,
    opts: ReconstructionOptions,
) -> Result<DensityGrid> {
    if !(m.hbar > 0.0) {
        return Err(Error::Reconstruction("hbar must be positive to reconstruct off-diagonal elements".into()));
    }
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::Reconstruction(format!("grid size {n} is not a power of two")));
    }
    if !(m.s_qq > 0.0 && m.s_pp >= 0.0) {
        return Err(Error::Reconstruction(format!("variances ({}, {}) are not positive", m.s_qq, m.s_pp)));
    }
    let sigma = m.s_qq.sqrt();
    if !(x_span >= 6.0 * sigma) {
        return Err(Error::Reconstruction(format!(
            "x_span {x_span} covers fewer than 6 standard deviations ({sigma})"
        )));
    }

    let dx = x_span / n as f64;
    let x: Vec<f64> = (0..n).map(|j| m.q - 0.5 * x_span + (j as f64 + 0.5) * dx).collect();

    // Aliased copies of the x-profile sit 2π/dβ apart; keep them beyond twice the span.
    let b_max = opts.beta_extent / sigma;
    let mut d_beta = std::f64::consts::PI / (2.0 * x_span);
    let n_beta = ((2.0 * b_max / d_beta).ceil() as usize).next_power_of_two().max(64);
    d_beta = 2.0 * b_max / n_beta as f64;
    let betas: Vec<f64> = (0..n_beta).map(|k| -b_max + (k as f64 + 0.5) * d_beta).collect();

    let mut rho = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        // e^{-iβ x_j} for all β, reused across k
        let phases: Vec<Complex64> = betas.iter().map(|b| Complex64::from_polar(1.0, -b * x[j])).collect();
        for k in 0..n {
            let alpha = (x[j] - x[k]) / m.hbar;
            let mut acc = Complex64::new(0.0, 0.0);
            for (b, ph) in betas.iter().zip(&phases) {
                acc += characteristic_function(m, alpha, *b) * ph;
            }
            rho[(j, k)] = acc * (d_beta / (2.0 * std::f64::consts::PI));
        }
    }

    let mut residual = 0.0f64;
    for j in 0..n {
        for k in j..n {
            let a = rho[(j, k)];
            let b = rho[(k, j)].conj();
            residual = residual.max((a - b).norm());
            let mean = 0.5 * (a + b);
            rho[(j, k)] = mean;
            rho[(k, j)] = mean.conj();
        }
    }

    let raw_trace = rho.diagonal().iter().map(|z| z.re).sum::<f64>() * dx;
    let mut renormalization = 1.0;
    if (raw_trace - 1.0).abs() > opts.trace_tol && raw_trace > 0.0 {
        renormalization = 1.0 / raw_trace;
        rho *= Complex64::new(renormalization, 0.0);
    }

    Ok(DensityGrid {
        x,
        dx,
        rho,
        hermiticity_residual: residual,
        raw_trace,
        renormalization,
    })
}

/// `s_qq·s_pp − (s_qp/2)² − ħ²/4`; negative values mean the truncated moments
/// violate the uncertainty relation.
pub fn heisenberg_defect(s: &EvmState, hbar: f64) -> f64 {
    s.s_qq * s.s_pp - 0.25 * s.s_qp * s.s_qp - 0.25 * hbar * hbar
}

pub fn heisenberg_monitor(orbit: &[EvmState], hbar: f64) -> Vec<f64> {
    orbit.iter().map(|s| heisenberg_defect(s, hbar)).collect()
}
