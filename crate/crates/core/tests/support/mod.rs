//! Independent reference evaluations shared by the integration tests.
#![allow(dead_code)]

use evmchaos_core::noise::kernel_triple;
use evmchaos_core::{KickedMap, Params};
use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton on P_n.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Adaptive Gauss-Legendre: a panel is accepted when it agrees with the sum of its halves.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, rule: &[(f64, f64)]) -> f64 {
    let panel = |a: f64, b: f64| {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        rule.iter().map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
    };
    fn rec<P: Fn(f64, f64) -> f64>(panel: &P, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (l, r) = (panel(a, m), panel(m, b));
        if depth == 0 || (l + r - whole).abs() <= tol {
            l + r
        } else {
            rec(panel, a, m, l, 0.5 * tol, depth - 1) + rec(panel, m, b, r, 0.5 * tol, depth - 1)
        }
    }
    rec(&panel, a, b, panel(a, b), tol, 30)
}

/// The kernels as literal double integrals of cos ω(x−y) over [0, τ]².
pub fn kernels_2d(omega: f64, omega0: f64, gamma: f64, tau: f64) -> [f64; 3] {
    let env = |x: f64| (-gamma * x).exp();
    let rule = gauss_legendre(10);
    let tol = 1e-13;
    let g = |u: &dyn Fn(f64) -> f64, v: &dyn Fn(f64) -> f64| {
        let inner = |x: f64| adaptive(&|y: f64| env(x) * env(y) * u(x) * v(y) * (omega * (x - y)).cos(), 0.0, tau, tol, &rule);
        adaptive(&inner, 0.0, tau, tol, &rule)
    };
    let s = |x: f64| (omega0 * x).sin();
    let c = |x: f64| (omega0 * x).cos();
    [g(&s, &s), g(&c, &c), g(&s, &c) + g(&c, &s)]
}

/// `ħω coth(ħω / 2kT)` written with tanh, only the exact limits special-cased.
pub fn weight(omega: f64, hbar: f64, kbt: f64) -> f64 {
    if omega == 0.0 || hbar == 0.0 {
        return 2.0 * kbt;
    }
    if kbt == 0.0 {
        return hbar * omega;
    }
    hbar * omega / (hbar * omega / (2.0 * kbt)).tanh()
}

pub fn trapezoid_moments(p: &Params, n: usize) -> [f64; 3] {
    let omega0 = p.omega0();
    let upper = 40.0 * p.omega_c;
    let h = upper / n as f64;
    let mut acc = [0.0; 3];
    for i in 0..=n {
        let w = i as f64 * h;
        let k = kernel_triple(w, omega0, p.gamma, p.tau);
        let f = weight(w, p.hbar, p.kbt) * (-w / p.omega_c).exp();
        let edge = if i == 0 || i == n { 0.5 } else { 1.0 };
        for (a, g) in acc.iter_mut().zip([k.g_ss, k.g_cc, k.g_sc]) {
            *a += edge * f * g;
        }
    }
    acc.map(|a| a * h * 2.0 * p.gamma / std::f64::consts::PI)
}

/// Central differences of the map, step relative to each coordinate.
pub fn fd_jacobian<const N: usize, M: KickedMap<N>>(map: &M, x: &SVector<f64, N>) -> SMatrix<f64, N, N> {
    let mut j = SMatrix::<f64, N, N>::zeros();
    for c in 0..N {
        let h = 1e-6 * x[c].abs().max(1e-3);
        let (mut xp, mut xm) = (*x, *x);
        xp[c] += h;
        xm[c] -= h;
        j.set_column(c, &((map.step(&xp) - map.step(&xm)) / (2.0 * h)));
    }
    j
}

/// Minimum-uncertainty wavefunction with ⟨x⟩ = q, ⟨p⟩ = p and position variance s.
pub fn wavefunction(x: f64, q: f64, p: f64, s: f64, hbar: f64) -> Complex64 {
    let amp = (2.0 * std::f64::consts::PI * s).powf(-0.25) * (-(x - q).powi(2) / (4.0 * s)).exp();
    Complex64::from_polar(amp, p * x / hbar)
}
