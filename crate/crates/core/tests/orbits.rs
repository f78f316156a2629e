use evmchaos_core::map::iterate;
use evmchaos_core::orbit::{detect_period, iterate_with_monodromy, multipliers, ContinuationOptions, NewtonOptions};
use evmchaos_core::{classify_bifurcation, fixed_point, BifurcationKind, ClassicalMap, EvmMap, EvmState, Params};
use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;

/// Characteristic polynomial coefficients (monic, highest degree first).
fn faddeev_leverrier<const N: usize>(a: &SMatrix<f64, N, N>) -> Vec<f64> {
    let mut coeffs = vec![1.0];
    let mut m = SMatrix::<f64, N, N>::zeros();
    let id = SMatrix::<f64, N, N>::identity();
    for k in 1..=N {
        m = a * m + id * coeffs[k - 1];
        let c = -(a * m).trace() / k as f64;
        coeffs.push(c);
    }
    coeffs
}

fn durand_kerner(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    let eval = |z: Complex64| coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..2000 {
        let prev = roots.clone();
        for i in 0..n {
            let denom = (0..n).filter(|&j| j != i).fold(Complex64::new(1.0, 0.0), |acc, j| acc * (roots[i] - roots[j]));
            let delta = eval(roots[i]) / denom;
            roots[i] -= delta;
        }
        if roots.iter().zip(&prev).all(|(a, b)| (a - b).norm() < 1e-15) {
            break;
        }
    }
    roots
}

fn coherent(q: f64, p: f64, hbar: f64) -> SVector<f64, 5> {
    EvmState::coherent(q, p, hbar).to_vector()
}

#[test]
fn evm_orbit_at_v0_2_is_stable_by_characteristic_polynomial() {
    let params = Params::quantum(2.0, 2e-4, 2e-4, 25.0);
    let map = EvmMap::new(&params).unwrap();
    let x = iterate(&map, coherent(0.3, 0.1, 2e-4), 20_000).unwrap();
    let period = detect_period(&map, &x, 16, 1e-8).expect("periodic attractor");
    let orbit = fixed_point(&map, x, period, NewtonOptions::default()).unwrap();
    assert!(orbit.residual < 1e-11, "residual {}", orbit.residual);

    let (_, mono) = iterate_with_monodromy(&map, &orbit.point, period);
    let oracle = durand_kerner(&faddeev_leverrier(&mono));
    let rho_oracle = oracle.iter().fold(0.0f64, |r, z| r.max(z.norm()));
    let ours = multipliers(&map, &orbit);
    assert!(rho_oracle < 1.0);
    assert!((ours[0].norm() - rho_oracle).abs() < 1e-8);
    for z in &ours {
        let nearest = oracle.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
        assert!(nearest < 1e-7, "{z} not among oracle roots {oracle:?}");
    }
}

#[test]
fn classical_second_bifurcation_is_period_doubling() {
    let map = ClassicalMap::new(&Params::classical(3.8)).unwrap();
    let r = classify_bifurcation(&map, (3.8, 4.0), SVector::<f64, 2>::new(0.3, 0.1), ContinuationOptions::default())
        .unwrap();
    assert_eq!(r.kind, BifurcationKind::PeriodDoubling, "{}", r.diagnostic);
    assert_eq!(r.period, 2);
    assert!(r.bracket_width <= 1e-5);
    let (re, im) = r.multipliers[0];
    assert!(im.abs() < 1e-8 && (re + 1.0).abs() < 1e-3, "lead multiplier {re} {im}");
}

#[test]
fn quantum_loss_of_stability_near_3_9_is_hopf() {
    let params = Params::quantum(3.8, 2e-4, 2e-4, 25.0);
    let map = EvmMap::new(&params).unwrap();
    let r = classify_bifurcation(&map, (3.8, 4.0), coherent(0.3, 0.1, 2e-4), ContinuationOptions::default()).unwrap();
    assert_eq!(r.kind, BifurcationKind::Hopf, "{}", r.diagnostic);
    assert!((3.85..3.95).contains(&r.v0_star), "{}", r.v0_star);
    let (a, b) = (r.multipliers[0], r.multipliers[1]);
    assert!((a.1 + b.1).abs() < 1e-8 && a.1.abs() > 1e-3);
    assert!(((a.0 * a.0 + a.1 * a.1).sqrt() - 1.0).abs() < 1e-3);
}
