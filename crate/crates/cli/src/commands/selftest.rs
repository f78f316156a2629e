//! Fast numerical self-checks. Each check compares an optimized code path
//! with an independent, slower evaluation of the same quantity.

use clap::Args;
use evmchaos_core::lyapunov::LyapunovOptions;
use evmchaos_core::map::KickedMap;
use evmchaos_core::noise::{base_moments, kernel_triple, thermal_weight};
use evmchaos_core::reconstruct::{characteristic_function, density_matrix_grid};
use evmchaos_core::{largest_lyapunov, ClassicalMap, EvmMap, EvmState, MomentSet, Params};
use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Context, Failure};

#[derive(Args, Debug)]
pub struct SelftestArgs {
    /// Seed of the random test points.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

type Check = (&'static str, Result<String, String>);

fn fd_jacobian<const N: usize, M: KickedMap<N>>(map: &M, x: &SVector<f64, N>) -> SMatrix<f64, N, N> {
    let mut j = SMatrix::<f64, N, N>::zeros();
    for c in 0..N {
        let h = 1e-6 * x[c].abs().max(1e-3);
        let mut a = *x;
        let mut b = *x;
        a[c] += h;
        b[c] -= h;
        j.set_column(c, &((map.step(&a) - map.step(&b)) / (2.0 * h)));
    }
    j
}

fn jacobians(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let cmap = ClassicalMap::new(&Params::classical(5.0)).map_err(|e| e.to_string())?;
    let qmap = EvmMap::new(&Params::quantum(3.9, 0.002, 0.004, 25.0)).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x = SVector::<f64, 2>::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let (a, f) = (cmap.jacobian(&x), fd_jacobian(&cmap, &x));
        worst = worst.max((a - f).norm() / a.norm());
        let s = EvmState {
            q: x[0],
            p: x[1],
            s_qq: rng.random_range(1e-4..1e-2),
            s_pp: rng.random_range(1e-4..1e-2),
            s_qp: rng.random_range(-1e-3..1e-3),
        }
        .to_vector();
        let (a, f) = (qmap.jacobian(&s), fd_jacobian(&qmap, &s));
        worst = worst.max((a - f).norm() / a.norm());
    }
    if worst < 1e-5 {
        Ok(format!("max relative difference {worst:.2e}"))
    } else {
        Err(format!("max relative difference {worst:.2e} exceeds 1e-5"))
    }
}

/// Kernels by a composite Simpson rule over the square, n panels per side.
fn kernels(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let gamma: f64 = rng.random_range(0.01..0.2);
        let tau = rng.random_range(1.0..10.0);
        let omega = rng.random_range(0.0..3.0);
        let omega0 = (1.0 - gamma * gamma).sqrt();
        let n = 400;
        let h = tau / n as f64;
        let w = |i: usize| if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let mut acc = [0.0; 3];
        for i in 0..=n {
            let x = i as f64 * h;
            for j in 0..=n {
                let y = j as f64 * h;
                let f = w(i) * w(j) * (-gamma * (x + y)).exp() * (omega * (x - y)).cos();
                let (sx, cx, sy, cy) = ((omega0 * x).sin(), (omega0 * x).cos(), (omega0 * y).sin(), (omega0 * y).cos());
                acc[0] += f * sx * sy;
                acc[1] += f * cx * cy;
                acc[2] += f * (sx * cy + cx * sy);
            }
        }
        let k = kernel_triple(omega, omega0, gamma, tau);
        for (got, a) in [k.g_ss, k.g_cc, k.g_sc].iter().zip(acc) {
            worst = worst.max((got - a * h * h / 9.0).abs());
        }
    }
    if worst < 1e-7 {
        Ok(format!("max absolute difference {worst:.2e}"))
    } else {
        Err(format!("max absolute difference {worst:.2e} exceeds 1e-7"))
    }
}

fn moments() -> Result<String, String> {
    let p = Params::quantum(0.0, 0.002, 0.004, 5.0);
    let nm = base_moments(&p).map_err(|e| e.to_string())?;
    let n = 200_000;
    let h = 40.0 * p.omega_c / n as f64;
    let mut acc = [0.0; 3];
    for i in 0..=n {
        let w = i as f64 * h;
        let k = kernel_triple(w, p.omega0(), p.gamma, p.tau);
        let f = thermal_weight(w, p.hbar, p.kbt) * (-w / p.omega_c).exp() * if i == 0 || i == n { 0.5 } else { 1.0 };
        for (a, g) in acc.iter_mut().zip([k.g_ss, k.g_cc, k.g_sc]) {
            *a += f * g;
        }
    }
    let mut worst = 0.0f64;
    for (got, a) in [nm.s_ss, nm.s_cc, nm.s_sc].iter().zip(acc) {
        let want = a * h * 2.0 * p.gamma / std::f64::consts::PI;
        worst = worst.max(((got - want) / want).abs());
    }
    if worst < 1e-6 {
        Ok(format!("max relative difference {worst:.2e}"))
    } else {
        Err(format!("max relative difference {worst:.2e} exceeds 1e-6"))
    }
}

fn classical_limit() -> Result<String, String> {
    let params = Params::classical(8.0);
    let c = ClassicalMap::new(&params).map_err(|e| e.to_string())?;
    let q = EvmMap::new(&params).map_err(|e| e.to_string())?;
    let mut x = SVector::<f64, 2>::new(0.3, 0.1);
    let mut y = EvmState::classical(0.3, 0.1).to_vector();
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        x = c.step(&x);
        y = q.step(&y);
        worst = worst.max((x[0] - y[0]).abs()).max((x[1] - y[1]).abs());
    }
    let lin = ClassicalMap::new(&Params::classical(0.0)).map_err(|e| e.to_string())?;
    let l = largest_lyapunov(&lin, x, None, LyapunovOptions::default()).lambda;
    let dl = (l + 0.3).abs();
    if worst <= 1e-12 && dl <= 1e-10 {
        Ok(format!("orbit difference {worst:.1e}, |lambda(V0=0) + 0.3| = {dl:.1e}"))
    } else {
        Err(format!("orbit difference {worst:.1e}, |lambda(V0=0) + 0.3| = {dl:.1e}"))
    }
}

fn reconstruction(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let m = MomentSet::coherent(0.4, -0.2, 0.05);
    let g = density_matrix_grid(&m, 128, 12.0 * m.s_qq.sqrt()).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (a, b) = (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
        let lhs = characteristic_function(&m, a, b).conj();
        let rhs = characteristic_function(&m, -a, -b) * Complex64::from_polar(1.0, -a * b * m.hbar);
        worst = worst.max((lhs - rhs).norm());
    }
    let ok = (g.trace() - 1.0).abs() < 1e-6 && g.hermiticity_residual < 1e-8 && g.purity() <= 1.0 + 1e-4 && worst < 1e-12;
    let detail = format!(
        "raw trace {:.9}, hermiticity {:.1e}, purity {:.6}, conjugation identity {worst:.1e}",
        g.raw_trace,
        g.hermiticity_residual,
        g.purity()
    );
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn run(a: SelftestArgs, _ctx: &mut Context) -> Result<(), Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let checks: Vec<Check> = vec![
        ("analytic Jacobians vs finite differences", jacobians(&mut rng)),
        ("closed-form kernels vs 2-D Simpson", kernels(&mut rng)),
        ("bath moments vs dense trapezoid", moments()),
        ("classical limit of the quantum map", classical_limit()),
        ("density-matrix reconstruction", reconstruction(&mut rng)),
    ];
    let mut failed = 0;
    for (name, result) in &checks {
        match result {
            Ok(d) => println!("PASS {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d}");
            }
        }
    }
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} of {} self-checks failed", checks.len())));
    }
    Ok(())
}
