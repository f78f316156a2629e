//! Periodic orbits (fixed points of the p-fold map), their Floquet
//! multipliers, and detection of how a stable orbit loses stability.

use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::KickedMap;

/// Imaginary parts below this are treated as a real multiplier.
pub const REAL_MULTIPLIER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicOrbit<const N: usize> {
    /// One point of the orbit.
    pub point: SVector<f64, N>,
    pub period: usize,
    /// ‖M^p(x) − x‖∞ at `point`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-11,
        }
    }
}

/// `M^p(x)` together with the monodromy matrix (product of the one-kick Jacobians).
pub fn iterate_with_monodromy<const N: usize, M: KickedMap<N>>(
    map: &M,
    x: &SVector<f64, N>,
    period: usize,
) -> (SVector<f64, N>, SMatrix<f64, N, N>) {
    let mut y = *x;
    let mut m = SMatrix::<f64, N, N>::identity();
    for _ in 0..period {
        m = map.jacobian(&y) * m;
        y = map.step(&y);
    }
    (y, m)
}

/// Solves `(m − I) dx = f`.
fn newton_step<const N: usize>(m: &SMatrix<f64, N, N>, f: &SVector<f64, N>) -> Option<SVector<f64, N>> {
    let a = DMatrix::from_column_slice(N, N, m.as_slice()) - DMatrix::<f64>::identity(N, N);
    let dx = a.lu().solve(&DVector::from_column_slice(f.as_slice()))?;
    dx.iter().all(|v| v.is_finite()).then(|| SVector::from_column_slice(dx.as_slice()))
}

fn sup_norm<const N: usize>(v: &SVector<f64, N>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Newton iteration for a point with `M^p(x) = x`.
pub fn fixed_point<const N: usize, M: KickedMap<N>>(
    map: &M,
    guess: SVector<f64, N>,
    period: usize,
    opts: NewtonOptions,
) -> Result<PeriodicOrbit<N>> {
    let period = period.max(1);
    let mut x = guess;
    let mut best = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let (y, m) = iterate_with_monodromy(map, &x, period);
        let f = y - x;
        let residual = sup_norm(&f);
        if !residual.is_finite() {
            break;
        }
        best = best.min(residual);
        if residual < opts.tol {
            // One more step usually buys a few extra digits for free.
            let refined = newton_step(&m, &f)
                .map(|dx| x - dx)
                .filter(|xr| {
                    let r = sup_norm(&(iterate_with_monodromy(map, xr, period).0 - xr));
                    r < residual
                });
            let point = refined.unwrap_or(x);
            let residual = sup_norm(&(iterate_with_monodromy(map, &point, period).0 - point));
            return Ok(PeriodicOrbit { point, period, residual });
        }
        let Some(dx) = newton_step(&m, &f) else {
            break;
        };
        x -= dx;
        if map.is_escaped(&x) {
            break;
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: best,
    })
}

pub fn eigenvalues<const N: usize>(m: &SMatrix<f64, N, N>) -> Vec<Complex64> {
    DMatrix::from_column_slice(N, N, m.as_slice())
        .complex_eigenvalues()
        .iter()
        .copied()
        .collect()
}

pub fn spectral_radius(mult: &[Complex64]) -> f64 {
    mult.iter().fold(0.0f64, |r, z| r.max(z.norm()))
}

/// Floquet multipliers of an orbit, sorted by decreasing modulus.
pub fn multipliers<const N: usize, M: KickedMap<N>>(map: &M, orbit: &PeriodicOrbit<N>) -> Vec<Complex64> {
    let (_, m) = iterate_with_monodromy(map, &orbit.point, orbit.period);
    let mut ev = eigenvalues(&m);
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.im.total_cmp(&a.im)));
    ev
}

/// Smallest `p ≤ max_period` with `‖M^p(x) − x‖∞ ≤ tol·max(1, ‖x‖∞)`.
pub fn detect_period<const N: usize, M: KickedMap<N>>(
    map: &M,
    x: &SVector<f64, N>,
    max_period: usize,
    tol: f64,
) -> Option<usize> {
    let scale = sup_norm(x).max(1.0);
    let mut y = *x;
    for p in 1..=max_period {
        y = map.step(&y);
        if sup_norm(&(y - x)) <= tol * scale {
            return Some(p);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BifurcationKind {
    /// A real multiplier crosses −1.
    PeriodDoubling,
    /// A complex-conjugate pair crosses the unit circle.
    Hopf,
    None,
}

impl std::fmt::Display for BifurcationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::PeriodDoubling => "period_doubling",
            Self::Hopf => "hopf",
            Self::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationReport {
    pub kind: BifurcationKind,
    /// Midpoint of the final bracket (NaN when nothing was found).
    pub v0_star: f64,
    pub bracket_width: f64,
    pub period: usize,
    /// Multipliers on the unstable side of the crossing, by decreasing modulus.
    pub multipliers: Vec<(f64, f64)>,
    pub diagnostic: String,
}

#[derive(Debug, Clone, Copy)]
pub struct ContinuationOptions {
    /// Kicks used to settle onto the attractor at the lower bracket end.
    pub settle: usize,
    pub max_period: usize,
    pub period_tol: f64,
    /// Initial continuation steps across the bracket.
    pub steps: usize,
    /// Bisection stops at this bracket width in V0.
    pub tol: f64,
    pub newton: NewtonOptions,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            settle: 20_000,
            max_period: 64,
            period_tol: 1e-6,
            steps: 40,
            tol: 1e-5,
            newton: NewtonOptions::default(),
        }
    }
}

fn classify(mult: &[Complex64]) -> (BifurcationKind, String) {
    let Some(lead) = mult.first() else {
        return (BifurcationKind::None, "no multipliers".into());
    };
    if lead.im.abs() > REAL_MULTIPLIER_TOL {
        let partner = mult
            .iter()
            .skip(1)
            .min_by(|a, b| (**a - lead.conj()).norm().total_cmp(&(**b - lead.conj()).norm()))
            .copied()
            .unwrap_or_default();
        let gap = (partner - lead.conj()).norm();
        if gap <= REAL_MULTIPLIER_TOL {
            (BifurcationKind::Hopf, format!("complex pair {lead} / {partner}"))
        } else {
            (BifurcationKind::None, format!("complex multiplier {lead} without conjugate partner (gap {gap:.2e})"))
        }
    } else if lead.re < 0.0 {
        (BifurcationKind::PeriodDoubling, format!("real multiplier {:.12}", lead.re))
    } else {
        (BifurcationKind::None, format!("real multiplier {:.12} crosses +1 (fold or pitchfork)", lead.re))
    }
}

fn none_report(period: usize, diagnostic: String) -> BifurcationReport {
    BifurcationReport {
        kind: BifurcationKind::None,
        v0_star: f64::NAN,
        bracket_width: f64::NAN,
        period,
        multipliers: Vec::new(),
        diagnostic,
    }
}

/// Follows the stable periodic orbit reached from `start` at the lower end of
/// `bracket` upward in V0 and localizes the first loss of stability.
///
/// Returns `kind = None` (with a diagnostic) when the orbit stays stable up
/// to the upper end or disappears before losing stability.
pub fn classify_bifurcation<const N: usize, M: KickedMap<N>>(
    map: &M,
    bracket: (f64, f64),
    start: SVector<f64, N>,
    opts: ContinuationOptions,
) -> Result<BifurcationReport> {
    let (lo, hi) = bracket;
    if !(lo < hi) {
        return Err(Error::InvalidParams(format!("empty bracket [{lo}, {hi}]")));
    }
    let at_lo = map.at_v0(lo);
    let settled = crate::map::iterate(&at_lo, start, opts.settle).map_err(|kick| Error::Escaped { kick })?;
    let period = detect_period(&at_lo, &settled, opts.max_period, opts.period_tol).ok_or_else(|| {
        Error::NoCrossing {
            lo,
            hi,
            detail: format!("no stable orbit of period <= {} at the lower end", opts.max_period),
        }
    })?;
    let orbit = fixed_point(&at_lo, settled, period, opts.newton)?;
    let rho_lo = spectral_radius(&multipliers(&at_lo, &orbit));
    if rho_lo >= 1.0 {
        return Err(Error::NoCrossing {
            lo,
            hi,
            detail: format!("orbit already unstable at the lower end (max|mu| = {rho_lo})"),
        });
    }

    // continuation with a secant predictor
    let base_step = (hi - lo) / opts.steps.max(1) as f64;
    let mut step = base_step;
    let (mut v, mut x, mut x_prev) = (lo, orbit.point, orbit.point);
    let mut v_prev = lo;
    let unstable = loop {
        if v >= hi {
            return Ok(none_report(period, format!("period-{period} orbit stable across [{lo}, {hi}]")));
        }
        let v_next = (v + step).min(hi);
        let guess = if v > v_prev {
            x + (x - x_prev) * ((v_next - v) / (v - v_prev))
        } else {
            x
        };
        let m = map.at_v0(v_next);
        match fixed_point(&m, guess, period, opts.newton).or_else(|_| fixed_point(&m, x, period, opts.newton)) {
            Ok(o) => {
                let rho = spectral_radius(&multipliers(&m, &o));
                if rho >= 1.0 {
                    break (v_next, o.point);
                }
                (x_prev, v_prev) = (x, v);
                (x, v) = (o.point, v_next);
                step = (step * 1.5).min(base_step);
            }
            Err(_) if step > 1e-9 => step *= 0.25,
            Err(_) => {
                return Ok(none_report(
                    period,
                    format!("period-{period} orbit lost near V0 = {v} (fold)"),
                ))
            }
        }
    };

    // bisection, always correcting from the stable side
    let (mut a, mut b) = (v, unstable.0);
    let (mut xa, mut xb) = (x, unstable.1);
    while b - a > opts.tol {
        let mid = 0.5 * (a + b);
        let m = map.at_v0(mid);
        let guess = xa + (xb - xa) * 0.5;
        let o = fixed_point(&m, guess, period, opts.newton)
            .or_else(|_| fixed_point(&m, xa, period, opts.newton))?;
        if spectral_radius(&multipliers(&m, &o)) >= 1.0 {
            (b, xb) = (mid, o.point);
        } else {
            (a, xa) = (mid, o.point);
        }
    }
    let m = map.at_v0(b);
    let o = fixed_point(&m, xb, period, opts.newton)?;
    let mult = multipliers(&m, &o);
    let (kind, diagnostic) = classify(&mult);
    Ok(BifurcationReport {
        kind,
        v0_star: 0.5 * (a + b),
        bracket_width: b - a,
        period,
        multipliers: mult.iter().map(|z| (z.re, z.im)).collect(),
        diagnostic,
    })
}
