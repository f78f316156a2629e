//! Physical parameters and the inter-kick evolution matrix.
//!
//! Units are fixed by m = 1, Omega = 1 and a = 1 (the width of the Gaussian
//! kick force), so every quantity here is dimensionless.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical and run parameters of the kicked damped oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Damping rate, `0 < gamma < 1`.
    pub gamma: f64,
    /// Kick period.
    pub tau: f64,
    /// Kick strength.
    pub v0: f64,
    pub hbar: f64,
    pub kbt: f64,
    /// Exponential cutoff frequency of the bath spectrum.
    pub omega_c: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            gamma: 0.03,
            tau: 10.0,
            v0: 0.0,
            hbar: 0.0,
            kbt: 0.0,
            omega_c: 25.0,
        }
    }
}

impl Params {
    /// Classical parameters (no bath fluctuations) at the reference damping and period.
    pub fn classical(v0: f64) -> Self {
        Self {
            v0,
            ..Self::default()
        }
    }

    pub fn quantum(v0: f64, hbar: f64, kbt: f64, omega_c: f64) -> Self {
        Self {
            v0,
            hbar,
            kbt,
            omega_c,
            ..Self::default()
        }
    }

    pub fn with_v0(self, v0: f64) -> Self {
        Self { v0, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidParams(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.gamma >= 1.0 {
            return Err(Error::UnsupportedRegime { gamma: self.gamma });
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::InvalidParams(format!("tau must be positive, got {}", self.tau)));
        }
        if !self.v0.is_finite() {
            return Err(Error::InvalidParams("v0 must be finite".into()));
        }
        if !(self.hbar.is_finite() && self.hbar >= 0.0) {
            return Err(Error::InvalidParams(format!("hbar must be >= 0, got {}", self.hbar)));
        }
        if !(self.kbt.is_finite() && self.kbt >= 0.0) {
            return Err(Error::InvalidParams(format!("kbt must be >= 0, got {}", self.kbt)));
        }
        if (self.hbar > 0.0 || self.kbt > 0.0) && !(self.omega_c.is_finite() && self.omega_c > 0.0) {
            return Err(Error::InvalidParams(format!(
                "omega_c must be positive when the bath fluctuates, got {}",
                self.omega_c
            )));
        }
        Ok(())
    }

    /// True when the bath contributes no fluctuations at all.
    pub fn is_noiseless(&self) -> bool {
        self.hbar == 0.0 && self.kbt == 0.0
    }

    pub fn omega0(&self) -> f64 {
        (1.0 - self.gamma * self.gamma).sqrt()
    }
}

/// Linear propagation of (Q, P) across one damped inter-kick interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TMatrix {
    pub t_qq: f64,
    pub t_qp: f64,
    pub t_pq: f64,
    pub t_pp: f64,
    pub omega0: f64,
    pub gamma: f64,
}

impl TMatrix {
    pub fn det(&self) -> f64 {
        self.t_qq * self.t_pp - self.t_qp * self.t_pq
    }

    pub fn apply(&self, q: f64, p: f64) -> (f64, f64) {
        (
            self.t_qq * q + self.t_qp * p,
            self.t_pq * q + self.t_pp * p,
        )
    }
}

impl Params {
    pub fn t_matrix(&self) -> Result<TMatrix> {
        t_matrix(self.gamma, self.tau)
    }
}

/// Closed-form evolution matrix of `x'' + 2 gamma x' + x = 0` over one period `tau`.
pub fn t_matrix(gamma: f64, tau: f64) -> Result<TMatrix> {
    if gamma >= 1.0 {
        return Err(Error::UnsupportedRegime { gamma });
    }
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParams(format!("gamma must be >= 0, got {gamma}")));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidParams(format!("tau must be positive, got {tau}")));
    }
    let omega0 = (1.0 - gamma * gamma).sqrt();
    let decay = (-gamma * tau).exp();
    let (s, c) = (omega0 * tau).sin_cos();
    Ok(TMatrix {
        t_qq: decay * (c + gamma * s / omega0),
        t_qp: decay * s / omega0,
        t_pq: -decay * (omega0 + gamma * gamma / omega0) * s,
        t_pp: decay * (c - gamma * s / omega0),
        omega0,
        gamma,
    })
}
