//! Gaussian kick force `V'(x) = -V0 exp(-x^2)` and its derivatives.

use serde::{Deserialize, Serialize};

/// V', V'', V''' of the kick potential at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KickDerivatives {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
}

pub fn kick_derivatives(x: f64, v0: f64) -> KickDerivatives {
    let g = v0 * (-x * x).exp();
    KickDerivatives {
        v1: -g,
        v2: 2.0 * x * g,
        v3: g * (2.0 - 4.0 * x * x),
    }
}

/// Fourth derivative V'''' (the derivative of `v3`), needed by the EVM Jacobian.
pub fn kick_fourth_derivative(x: f64, v0: f64) -> f64 {
    v0 * (-x * x).exp() * (8.0 * x * x * x - 12.0 * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-5;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn origin_values() {
        let k = kick_derivatives(0.0, 3.0);
        assert_eq!((k.v1, k.v2, k.v3), (-3.0, 0.0, 6.0));
    }

    #[test]
    fn decays_far_away() {
        for x in [40.0, -40.0, 1e3] {
            let k = kick_derivatives(x, 5.0);
            assert_eq!(k.v1.abs() + k.v2.abs() + k.v3.abs(), 0.0);
            assert_eq!(kick_fourth_derivative(x, 5.0), 0.0);
        }
    }

    #[test]
    fn derivative_chain_matches_finite_differences() {
        let v0 = 5.0;
        let mut x = -5.0;
        while x <= 5.0 {
            let k = kick_derivatives(x, v0);
            let d2 = central(|y| kick_derivatives(y, v0).v1, x);
            let d3 = central(|y| kick_derivatives(y, v0).v2, x);
            let d4 = central(|y| kick_derivatives(y, v0).v3, x);
            let scale = v0 * (-x * x).exp();
            // relative to the envelope so zero crossings don't blow the ratio up
            assert!((k.v2 - d2).abs() <= 1e-7 * scale.max(k.v2.abs()), "v2 at {x}");
            assert!((k.v3 - d3).abs() <= 1e-7 * scale.max(k.v3.abs()), "v3 at {x}");
            let v4 = kick_fourth_derivative(x, v0);
            assert!((v4 - d4).abs() <= 1e-7 * scale.max(v4.abs()), "v4 at {x}");
            x += 0.05;
        }
    }

    #[test]
    fn point_check_at_0_7() {
        let v0 = 5.0;
        let k = kick_derivatives(0.7, v0);
        let d2 = central(|y| kick_derivatives(y, v0).v1, 0.7);
        let d3 = central(|y| kick_derivatives(y, v0).v2, 0.7);
        assert!(((k.v2 - d2) / k.v2).abs() < 1e-7);
        assert!(((k.v3 - d3) / k.v3).abs() < 1e-7);
    }
}
