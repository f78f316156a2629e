use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Values of the three double-integral kernels at one bath frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelTriple {
    pub g_ss: f64,
    pub g_cc: f64,
    /// The symmetrized cross kernel `G_sc + G_cs`.
    pub g_sc: f64,
}

/// `∫_0^tau exp(z x) dx`, evaluated without cancellation for small `|z tau|`.
fn exp_integral(z: Complex64, tau: f64) -> Complex64 {
    let w = z * tau;
    if w.norm() < 0.5 {
        // (e^w - 1)/w = sum_k w^k/(k+1)!
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for k in 1..30 {
            term *= w / (k as f64 + 1.0);
            sum += term;
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        sum * tau
    } else {
        (w.exp() - 1.0) / z
    }
}

/// Kernels `G_ss`, `G_cc` and `G_sc+cs` at frequency `omega`.
///
/// `cos ω(x−y)` separates into `cos ωx cos ωy + sin ωx sin ωy`, so each double
/// integral over `[0, tau]^2` is a sum of squares (or products) of four
/// one-dimensional damped-trigonometric integrals:
///
/// ```text
/// A_c = ∫ e^{-γx} cos ωx sin ω0x    A_s = ∫ e^{-γx} sin ωx sin ω0x
/// B_c = ∫ e^{-γx} cos ωx cos ω0x    B_s = ∫ e^{-γx} sin ωx cos ω0x
/// ```
///
/// and `G_ss = A_c² + A_s²`, `G_cc = B_c² + B_s²`, `G_sc+cs = 2(A_c B_c + A_s B_s)`.
pub fn kernel_triple(omega: f64, omega0: f64, gamma: f64, tau: f64) -> KernelTriple {
    let damped = |a: f64| exp_integral(Complex64::new(-gamma, a), tau);
    let sum = damped(omega0 + omega);
    let diff = damped(omega0 - omega);

    let a_c = 0.5 * (sum.im + diff.im);
    let a_s = 0.5 * (diff.re - sum.re);
    let b_c = 0.5 * (sum.re + diff.re);
    // sin(ωx)cos(ω0x) = ½[sin((ω+ω0)x) + sin((ω−ω0)x)]; Im φ is odd in the frequency
    let b_s = 0.5 * (sum.im - diff.im);

    KernelTriple {
        g_ss: a_c * a_c + a_s * a_s,
        g_cc: b_c * b_c + b_s * b_s,
        g_sc: 2.0 * (a_c * b_c + a_s * b_s),
    }
}
