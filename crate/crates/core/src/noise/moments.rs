use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::kernels::kernel_triple;
use super::quadrature::{integrate, QuadOptions};
use crate::error::{Error, Result};
use crate::params::Params;

/// Below this value of `ħω / 2k_BT` the coth is replaced by its Laurent series.
const COTH_SERIES_SWITCH: f64 = 1e-4;

/// State-independent base moments of the accumulated random force.
///
/// They are the bare force-weighted integrals (no `1/ω0` prefactor); the
/// `1/ω0²` appears once, in [`combine_moments`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseMoments {
    pub s_ss: f64,
    pub s_cc: f64,
    pub s_sc: f64,
    /// Fingerprint of the parameters the moments were computed for.
    pub params_hash: u64,
    /// Quadrature error estimate (largest component).
    pub abs_error: f64,
    /// Estimate of the truncated `ω > ω_max` contribution.
    pub tail_bound: f64,
}

impl NoiseMoments {
    pub fn zero() -> Self {
        Self {
            s_ss: 0.0,
            s_cc: 0.0,
            s_sc: 0.0,
            params_hash: 0,
            abs_error: 0.0,
            tail_bound: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.s_ss == 0.0 && self.s_cc == 0.0 && self.s_sc == 0.0
    }

    /// Builds moments from raw values (used by tests and by callers that
    /// scan the moment space directly).
    pub fn from_values(s_ss: f64, s_cc: f64, s_sc: f64) -> Self {
        Self {
            s_ss,
            s_cc,
            s_sc,
            ..Self::zero()
        }
    }
}

/// Per-kick noise terms `f·f`, `h·h` and `f·h + h·f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseTerms {
    pub ff: f64,
    pub hh: f64,
    pub fh: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct MomentOptions {
    pub rel_tol: f64,
    /// Upper integration limit in units of `ω_c`.
    pub cutoff_multiple: f64,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            cutoff_multiple: 40.0,
        }
    }
}

/// `ħω coth(ħω / 2k_BT)`, the spectral weight of the symmetrized force correlation.
///
/// Reduces to `2k_BT` for `ħ = 0` and to `ħω` at zero temperature.
pub fn thermal_weight(omega: f64, hbar: f64, kbt: f64) -> f64 {
    if hbar == 0.0 {
        return 2.0 * kbt;
    }
    if kbt == 0.0 {
        return hbar * omega;
    }
    let x = hbar * omega / (2.0 * kbt);
    if x < COTH_SERIES_SWITCH {
        // x coth x = 1 + x²/3 − x⁴/45 + O(x⁶)
        let x2 = x * x;
        2.0 * kbt * (1.0 + x2 / 3.0 - x2 * x2 / 45.0)
    } else if x > 20.0 {
        hbar * omega
    } else {
        hbar * omega / x.tanh()
    }
}

/// The three `ω`-integrands (including the `2γ/π` prefactor and the cutoff factor).
pub fn integrand(params: &Params, omega: f64) -> [f64; 3] {
    let omega0 = params.omega0();
    let k = kernel_triple(omega, omega0, params.gamma, params.tau);
    let w = 2.0 * params.gamma / PI
        * thermal_weight(omega, params.hbar, params.kbt)
        * (-omega / params.omega_c).exp();
    [w * k.g_ss, w * k.g_cc, w * k.g_sc]
}

pub(crate) fn params_fingerprint(params: &Params) -> u64 {
    // FNV-1a over the bit patterns; v0 does not enter the moments.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in [params.gamma, params.tau, params.hbar, params.kbt, params.omega_c] {
        for b in x.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

pub fn base_moments(params: &Params) -> Result<NoiseMoments> {
    base_moments_with(params, MomentOptions::default())
}

pub fn base_moments_with(params: &Params, opts: MomentOptions) -> Result<NoiseMoments> {
    params.validate()?;
    let fingerprint = params_fingerprint(params);
    if params.is_noiseless() {
        return Ok(NoiseMoments {
            params_hash: fingerprint,
            ..NoiseMoments::zero()
        });
    }
    let omega_max = opts.cutoff_multiple * params.omega_c;
    // Start from pieces about one kernel oscillation (2π/τ) wide.
    let period = 2.0 * PI / params.tau;
    let pieces = ((omega_max / period).ceil() as usize).clamp(16, 8192);
    let res = integrate(
        |w| integrand(params, w),
        0.0,
        omega_max,
        pieces,
        QuadOptions {
            rel_tol: opts.rel_tol,
            ..QuadOptions::default()
        },
    )?;
    let [s_ss, s_cc, s_sc] = res.value;
    if !(s_ss.is_finite() && s_cc.is_finite() && s_sc.is_finite()) {
        return Err(Error::QuadratureDiverged {
            achieved: f64::INFINITY,
            requested: opts.rel_tol,
        });
    }
    let edge = integrand(params, omega_max);
    let tail_bound = edge.iter().fold(0.0f64, |m, v| m.max(v.abs())) * params.omega_c;
    Ok(NoiseMoments {
        s_ss,
        s_cc,
        s_sc,
        params_hash: fingerprint,
        abs_error: res.abs_error.iter().fold(0.0f64, |m, v| m.max(*v)),
        tail_bound,
    })
}

/// Combines the base moments with the kick curvature `v2 = V''` into the
/// per-kick noise terms.
pub fn combine_moments(nm: &NoiseMoments, v2: f64, gamma: f64, omega0: f64) -> NoiseTerms {
    let a = gamma + v2;
    let inv = 1.0 / (omega0 * omega0);
    NoiseTerms {
        ff: nm.s_ss * inv,
        hh: (a * a * nm.s_ss + omega0 * omega0 * nm.s_cc - omega0 * a * nm.s_sc) * inv,
        fh: (-2.0 * a * nm.s_ss + omega0 * nm.s_sc) * inv,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn noiseless_moments_vanish() {
        let nm = base_moments(&Params::classical(3.0)).unwrap();
        assert!(nm.is_zero());
    }

    #[test]
    fn coth_switchover_is_continuous() {
        let (hbar, kbt) = (0.3, 0.7);
        let omega_at = |x: f64| x * 2.0 * kbt / hbar;
        for eps in [1e-9, 1e-6] {
            let below = thermal_weight(omega_at(1e-4 * (1.0 - eps)), hbar, kbt);
            let above = thermal_weight(omega_at(1e-4 * (1.0 + eps)), hbar, kbt);
            let expected_gap = (below - above).abs();
            // the weight itself is smooth; the jump is bounded by its slope times the gap
            assert!(expected_gap / below < 1e-10, "{below} vs {above}");
        }
    }

    #[test]
    fn zero_temperature_weight() {
        assert_eq!(thermal_weight(2.0, 0.1, 0.0), 0.2);
        assert_eq!(thermal_weight(2.0, 0.0, 0.05), 0.1);
    }

    #[test]
    fn combination_special_cases() {
        let nm = NoiseMoments::from_values(1.3, 0.7, 0.2);
        let (gamma, omega0) = (0.03, (1.0f64 - 0.0009).sqrt());
        let t = combine_moments(&nm, -gamma, gamma, omega0);
        assert!((t.hh - nm.s_cc).abs() < 1e-15);
        let t2 = combine_moments(&nm, 5.0, gamma, omega0);
        assert_eq!(t.ff, t2.ff);
    }

    #[test]
    fn fingerprint_ignores_kick_strength() {
        let p = Params::quantum(2.0, 1e-3, 1e-3, 25.0);
        assert_eq!(params_fingerprint(&p), params_fingerprint(&p.with_v0(5.0)));
        assert_ne!(params_fingerprint(&p), params_fingerprint(&Params { kbt: 2e-3, ..p }));
    }

    proptest! {
        // h = (−(γ+V'') J_s + ω0 J_c)/ω0 and f = J_s/ω0, expanded by brute force.
        #[test]
        fn combination_matches_symbolic_expansion(
            s_ss in 0.0f64..2.0, s_cc in 0.0f64..2.0, rho in -1.0f64..1.0, v2 in -20.0f64..20.0
        ) {
            let s_sc = 2.0 * rho * (s_ss * s_cc).sqrt();
            let (gamma, omega0) = (0.03, 0.99955);
            let nm = NoiseMoments::from_values(s_ss, s_cc, s_sc);
            let t = combine_moments(&nm, v2, gamma, omega0);
            // bilinear pairing <x,y> on coefficient vectors over (J_s, J_c)
            let pair = |x: [f64; 2], y: [f64; 2]| {
                x[0] * y[0] * s_ss + x[1] * y[1] * s_cc + 0.5 * (x[0] * y[1] + x[1] * y[0]) * s_sc
            };
            let f = [1.0 / omega0, 0.0];
            let h = [-(gamma + v2) / omega0, 1.0];
            let hh = pair(h, h);
            let fh = 2.0 * pair(f, h);
            let ff = pair(f, f);
            prop_assert!((t.hh - hh).abs() <= 1e-12 * (1.0 + hh.abs()));
            prop_assert!((t.fh - fh).abs() <= 1e-12 * (1.0 + fh.abs()));
            prop_assert!((t.ff - ff).abs() <= 1e-12 * (1.0 + ff.abs()));
            prop_assert!(t.hh >= -1e-12 * (1.0 + hh.abs()));
        }
    }
}
