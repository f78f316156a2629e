//! Bifurcation diagrams over initial-condition ensembles, threshold location
//! (loss of orbit stability, onset of chaos) and sweeps of thresholds over the
//! bath parameters.
//!
//! Everything here is sequential and deterministic. Callers that want
//! parallelism distribute grid points themselves and reassemble by index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::lyapunov::{largest_lyapunov, LyapunovEstimate, LyapunovOptions};
use crate::map::{iterate, ClassicalMap, EvmMap, KickedMap};
use crate::orbit::{classify_bifurcation, BifurcationKind, ContinuationOptions};
use crate::params::Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Classical,
    Quantum,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Classical => "classical",
            Self::Quantum => "quantum",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "classical" => Ok(Self::Classical),
            "quantum" => Ok(Self::Quantum),
            other => Err(format!("unknown mode `{other}` (expected classical or quantum)")),
        }
    }
}

/// A map ready to iterate, either the 2-D classical map or the 5-D EVM.
#[derive(Debug, Clone, Copy)]
pub enum Model {
    Classical(ClassicalMap),
    Quantum(EvmMap),
}

impl Model {
    /// Builds the map; for [`Mode::Quantum`] this evaluates the bath moments.
    pub fn new(mode: Mode, params: &Params) -> Result<Self> {
        Ok(match mode {
            Mode::Classical => Self::Classical(ClassicalMap::new(params)?),
            Mode::Quantum => Self::Quantum(EvmMap::new(params)?),
        })
    }

    pub fn mode(&self) -> Mode {
        match self {
            Self::Classical(_) => Mode::Classical,
            Self::Quantum(_) => Mode::Quantum,
        }
    }

    pub fn at_v0(&self, v0: f64) -> Self {
        match self {
            Self::Classical(m) => Self::Classical(m.at_v0(v0)),
            Self::Quantum(m) => Self::Quantum(m.at_v0(v0)),
        }
    }

    /// Post-transient `(Q, P)` pairs, or `None` if the orbit escaped.
    pub fn attractor(&self, q: f64, p: f64, n_transient: usize, n_record: usize) -> Option<Vec<(f64, f64)>> {
        fn run<const N: usize, M: KickedMap<N>>(m: &M, q: f64, p: f64, nt: usize, nr: usize) -> Option<Vec<(f64, f64)>> {
            let mut x = iterate(m, m.initial_state(q, p), nt).ok()?;
            let mut out = Vec::with_capacity(nr);
            for _ in 0..nr {
                x = m.step(&x);
                if m.is_escaped(&x) {
                    return None;
                }
                out.push((x[0], x[1]));
            }
            Some(out)
        }
        match self {
            Self::Classical(m) => run(m, q, p, n_transient, n_record),
            Self::Quantum(m) => run(m, q, p, n_transient, n_record),
        }
    }

    pub fn lyapunov(&self, q: f64, p: f64, opts: LyapunovOptions) -> LyapunovEstimate {
        match self {
            Self::Classical(m) => largest_lyapunov(m, m.initial_state(q, p), None, opts),
            Self::Quantum(m) => largest_lyapunov(m, m.initial_state(q, p), None, opts),
        }
    }
}

/// Post-transient positions of one orbit of a bifurcation diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationRecord {
    pub v0: f64,
    pub ic_index: usize,
    /// Empty when `escaped`.
    pub samples: Vec<f64>,
    pub escaped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagramOptions {
    pub n_ic: usize,
    pub seed: u64,
    pub n_transient: usize,
    pub n_record: usize,
    /// Initial conditions are uniform in `[-ic_range, ic_range]²`.
    pub ic_range: f64,
}

impl Default for DiagramOptions {
    fn default() -> Self {
        Self {
            n_ic: 100,
            seed: 0,
            n_transient: 2000,
            n_record: 100,
            ic_range: 5.0,
        }
    }
}

/// The initial condition `(q, p)` used for grid point `v0_index`, orbit `ic_index`.
///
/// Each pair gets its own ChaCha stream, so the draw does not depend on which
/// other points are computed or in what order.
pub fn initial_condition(seed: u64, v0_index: usize, ic_index: usize, range: f64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((v0_index as u64) << 32) ^ ic_index as u64);
    let q = rng.random_range(-range..=range);
    let p = rng.random_range(-range..=range);
    (q, p)
}

/// All orbits of the diagram at one grid point; `model` must already be at `v0`.
pub fn bifurcation_point(model: &Model, v0_index: usize, opts: &DiagramOptions) -> Vec<BifurcationRecord> {
    (0..opts.n_ic)
        .map(|ic| {
            let (q, p) = initial_condition(opts.seed, v0_index, ic, opts.ic_range);
            match model.attractor(q, p, opts.n_transient, opts.n_record) {
                Some(pts) => BifurcationRecord {
                    v0: model_v0(model),
                    ic_index: ic,
                    samples: pts.into_iter().map(|(q, _)| q).collect(),
                    escaped: false,
                },
                None => BifurcationRecord {
                    v0: model_v0(model),
                    ic_index: ic,
                    samples: Vec::new(),
                    escaped: true,
                },
            }
        })
        .collect()
}

fn model_v0(model: &Model) -> f64 {
    match model {
        Model::Classical(m) => m.v0,
        Model::Quantum(m) => m.v0,
    }
}

pub fn bifurcation_diagram(model: &Model, v0_grid: &[f64], opts: &DiagramOptions) -> Vec<BifurcationRecord> {
    v0_grid
        .iter()
        .enumerate()
        .flat_map(|(i, &v0)| bifurcation_point(&model.at_v0(v0), i, opts))
        .collect()
}

/// Number of distinct values among `samples` when clustered with tolerance `tol`.
pub fn cluster_count(samples: &[f64], tol: f64) -> usize {
    let mut s: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
    s.sort_by(f64::total_cmp);
    let mut count = 0;
    let mut last = f64::NEG_INFINITY;
    for x in s {
        if x - last > tol {
            count += 1;
        }
        last = x;
    }
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    /// First loss of stability of the periodic orbit followed from the bracket's lower end.
    Hopf,
    /// First regular to chaotic transition of the attractor in the bracket.
    Chaos,
}

impl std::fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Hopf => "hopf",
            Self::Chaos => "chaos",
        })
    }
}

impl std::str::FromStr for ThresholdKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "hopf" => Ok(Self::Hopf),
            "chaos" => Ok(Self::Chaos),
            other => Err(format!("unknown threshold kind `{other}` (expected hopf or chaos)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRecord {
    pub kind: ThresholdKind,
    pub v0_star: f64,
    pub bracket_width: f64,
    pub hbar: f64,
    pub kbt: f64,
    pub omega_c: f64,
    /// `(V0, λ)` pairs evaluated while searching (chaos only).
    pub lambda_trace: Vec<(f64, f64)>,
    /// How the orbit lost stability (hopf only).
    pub bifurcation: Option<BifurcationKind>,
    /// The bracket actually searched.
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOptions {
    /// Target bracket width in V0 for chaos thresholds.
    pub tol: f64,
    /// Target bracket width in V0 for stability-loss thresholds.
    pub hopf_tol: f64,
    /// Spacing in V0 of the coarse scan that precedes bisection.
    pub coarse_step: f64,
    /// Consecutive chaotic coarse points needed to accept a transition.
    pub min_chaotic_run: usize,
    pub lyapunov: LyapunovOptions,
    /// λ must clear this margin (plus two standard errors) to count as chaos.
    pub lambda_floor: f64,
    /// Undecided λ estimates are retried with n_iter doubled up to this many times.
    pub max_refinements: u32,
    /// Initial condition for every orbit.
    pub start: (f64, f64),
    /// Half-width of the bracket placed around the previous threshold in a sweep.
    pub warm_margin: f64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            hopf_tol: 1e-5,
            coarse_step: 5e-4,
            min_chaotic_run: 2,
            lyapunov: LyapunovOptions::default(),
            lambda_floor: 1e-3,
            max_refinements: 2,
            start: (0.3, 0.1),
            warm_margin: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Regular,
    Chaotic,
    Escaped,
}

/// Regime of the attractor reached from `opts.start` and the λ estimate used.
///
/// Chaotic when λ − floor > 2·stderr, regular when λ − floor < −2·stderr.
/// In between, n_iter is doubled; estimates still undecided count as regular.
pub fn regime(model: &Model, opts: &ThresholdOptions) -> (Regime, LyapunovEstimate) {
    let mut lopts = opts.lyapunov;
    let mut est = model.lyapunov(opts.start.0, opts.start.1, lopts);
    for attempt in 0..=opts.max_refinements {
        if est.escaped {
            return (Regime::Escaped, est);
        }
        let excess = est.lambda - opts.lambda_floor;
        if excess > 2.0 * est.stderr {
            return (Regime::Chaotic, est);
        }
        if excess < -2.0 * est.stderr || attempt == opts.max_refinements {
            break;
        }
        lopts.n_iter *= 2;
        est = model.lyapunov(opts.start.0, opts.start.1, lopts);
    }
    (Regime::Regular, est)
}

/// Threshold of `kind` for the map described by `mode`/`params` inside `bracket`.
pub fn find_threshold(
    mode: Mode,
    params: &Params,
    kind: ThresholdKind,
    bracket: (f64, f64),
    opts: &ThresholdOptions,
) -> Result<ThresholdRecord> {
    let model = Model::new(mode, params)?;
    find_threshold_in(&model, params, kind, bracket, opts)
}

/// As [`find_threshold`], reusing an already built model.
pub fn find_threshold_in(
    model: &Model,
    params: &Params,
    kind: ThresholdKind,
    bracket: (f64, f64),
    opts: &ThresholdOptions,
) -> Result<ThresholdRecord> {
    let (lo, hi) = bracket;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidParams(format!("bracket [{lo}, {hi}] is empty")));
    }
    let mut record = ThresholdRecord {
        kind,
        v0_star: f64::NAN,
        bracket_width: f64::NAN,
        hbar: params.hbar,
        kbt: params.kbt,
        omega_c: params.omega_c,
        lambda_trace: Vec::new(),
        bifurcation: None,
        bracket,
    };
    match kind {
        ThresholdKind::Hopf => {
            let copts = ContinuationOptions {
                tol: opts.hopf_tol,
                ..ContinuationOptions::default()
            };
            let (q, p) = opts.start;
            let report = match model.at_v0(lo) {
                Model::Classical(m) => classify_bifurcation(&m, bracket, m.initial_state(q, p), copts)?,
                Model::Quantum(m) => classify_bifurcation(&m, bracket, m.initial_state(q, p), copts)?,
            };
            if !report.v0_star.is_finite() {
                return Err(Error::NoCrossing {
                    lo,
                    hi,
                    detail: report.diagnostic,
                });
            }
            record.v0_star = report.v0_star;
            record.bracket_width = report.bracket_width;
            record.bifurcation = Some(report.kind);
        }
        ThresholdKind::Chaos => {
            let n = (((hi - lo) / opts.coarse_step).ceil() as usize).max(1);
            let run_needed = opts.min_chaotic_run.max(1);
            let mut last_regular: Option<f64> = None;
            let mut run: Vec<f64> = Vec::new();
            let mut found = None;
            for i in 0..=n {
                // by index, so the end point is hit exactly
                let v = if i == n { hi } else { lo + (hi - lo) * i as f64 / n as f64 };
                let (r, est) = regime(&model.at_v0(v), opts);
                record.lambda_trace.push((v, est.lambda));
                match r {
                    Regime::Chaotic if last_regular.is_some() => {
                        run.push(v);
                        if run.len() == run_needed || i == n {
                            found = last_regular.map(|a| (a, run[0]));
                            break;
                        }
                    }
                    Regime::Chaotic => {}
                    _ => {
                        last_regular = Some(v);
                        run.clear();
                    }
                }
            }
            let Some((mut a, mut b)) = found else {
                let ends = format!(
                    "no regular-to-chaotic transition; lambda({lo}) = {:.4e}, lambda({hi}) = {:.4e}",
                    record.lambda_trace.first().map_or(f64::NAN, |t| t.1),
                    record.lambda_trace.last().map_or(f64::NAN, |t| t.1),
                );
                return Err(Error::NoCrossing { lo, hi, detail: ends });
            };
            while b - a > opts.tol {
                let mid = 0.5 * (a + b);
                let (r, est) = regime(&model.at_v0(mid), opts);
                record.lambda_trace.push((mid, est.lambda));
                if r == Regime::Chaotic {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            record.v0_star = 0.5 * (a + b);
            record.bracket_width = b - a;
        }
    }
    Ok(record)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Kbt,
    Hbar,
    OmegaC,
}

impl Axis {
    pub fn apply(self, base: &Params, value: f64) -> Params {
        let mut p = *base;
        match self {
            Self::Kbt => p.kbt = value,
            Self::Hbar => p.hbar = value,
            Self::OmegaC => p.omega_c = value,
        }
        p
    }

    pub fn value(self, p: &Params) -> f64 {
        match self {
            Self::Kbt => p.kbt,
            Self::Hbar => p.hbar,
            Self::OmegaC => p.omega_c,
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Kbt => "kbt",
            Self::Hbar => "hbar",
            Self::OmegaC => "omega_c",
        })
    }
}

impl std::str::FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "kbt" => Ok(Self::Kbt),
            "hbar" => Ok(Self::Hbar),
            "omega_c" | "omega-c" => Ok(Self::OmegaC),
            other => Err(format!("unknown axis `{other}` (expected kbt, hbar or omega_c)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub axis_value: f64,
    pub result: std::result::Result<ThresholdRecord, String>,
    /// True when the record came from the bracket around the previous threshold.
    pub warm: bool,
}

/// One threshold per grid value of `axis`, each bracket centred on the
/// previous threshold when possible.
///
/// A warm bracket is accepted only if its lower end is still below the
/// transition; otherwise the point is recomputed in `bracket`. Failures are
/// recorded and the sweep goes on.
pub fn sweep(
    mode: Mode,
    base: &Params,
    axis: Axis,
    grid: &[f64],
    kind: ThresholdKind,
    bracket: (f64, f64),
    opts: &ThresholdOptions,
) -> Vec<SweepPoint> {
    let mut previous: Option<f64> = None;
    grid.iter()
        .enumerate()
        .map(|(index, &value)| {
            let params = axis.apply(base, value);
            let model = match Model::new(mode, &params) {
                Ok(m) => m,
                Err(e) => {
                    return SweepPoint {
                        index,
                        axis_value: value,
                        result: Err(e.to_string()),
                        warm: false,
                    }
                }
            };
            let warm = previous.and_then(|v| {
                let wb = ((v - opts.warm_margin).max(bracket.0), (v + opts.warm_margin).min(bracket.1));
                let rec = find_threshold_in(&model, &params, kind, wb, opts).ok()?;
                warm_is_trustworthy(&rec, wb, opts).then_some(rec)
            });
            let (result, is_warm) = match warm {
                Some(r) => (Ok(r), true),
                None => (find_threshold_in(&model, &params, kind, bracket, opts).map_err(|e| e.to_string()), false),
            };
            if let Ok(r) = &result {
                previous = Some(r.v0_star);
            }
            SweepPoint {
                index,
                axis_value: value,
                result,
                warm: is_warm,
            }
        })
        .collect()
}

fn warm_is_trustworthy(rec: &ThresholdRecord, wb: (f64, f64), opts: &ThresholdOptions) -> bool {
    match rec.kind {
        // the first coarse point must have been the regular side
        ThresholdKind::Chaos => rec.v0_star - wb.0 > opts.tol,
        ThresholdKind::Hopf => rec.v0_star - wb.0 > opts.hopf_tol,
    }
}

/// Reference threshold for the shifts entering [`fit_scaling`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingReference {
    /// Threshold computed at axis value zero.
    Explicit(f64),
    /// Quadratic extrapolation to zero from the two smallest grid values.
    Extrapolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// Two-sided confidence interval for the slope.
    pub ci: (f64, f64),
    pub confidence: f64,
    pub reference_v0: f64,
    pub n: usize,
    pub r_squared: f64,
}

/// Least-squares slope of `log ΔV0` against `log x`, with `ΔV0 = V0*(0) − V0*(x)`.
///
/// `points` are `(x, V0*)` pairs with `x > 0`.
pub fn fit_scaling(points: &[(f64, f64)], reference: ScalingReference, confidence: f64) -> Result<ScalingFit> {
    if points.len() < 5 {
        return Err(Error::ScalingUndefined(format!("need at least 5 thresholds, got {}", points.len())));
    }
    if let Some(&(x, _)) = points.iter().find(|(x, v)| !(*x > 0.0) || !v.is_finite()) {
        return Err(Error::ScalingUndefined(format!("axis value {x} is not positive or threshold is not finite")));
    }
    let reference_v0 = match reference {
        ScalingReference::Explicit(v) => v,
        ScalingReference::Extrapolated => {
            let mut sorted = points.to_vec();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let ((x1, v1), (x2, v2)) = (sorted[0], sorted[1]);
            (x2 * x2 * v1 - x1 * x1 * v2) / (x2 * x2 - x1 * x1)
        }
    };
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(x, v) in points {
        let shift = reference_v0 - v;
        if !(shift > 0.0) {
            return Err(Error::ScalingUndefined(format!(
                "shift {shift:.3e} at axis value {x} is not positive (reference {reference_v0})"
            )));
        }
        xs.push(x.ln());
        ys.push(shift.ln());
    }
    let n = xs.len();
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::ScalingUndefined("all axis values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_stderr = (sse / (nf - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0)
        .map_err(|e| Error::ScalingUndefined(e.to_string()))?
        .inverse_cdf(0.5 + 0.5 * confidence);
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(ScalingFit {
        slope,
        intercept,
        slope_stderr,
        ci: (slope - t * slope_stderr, slope + t * slope_stderr),
        confidence,
        reference_v0,
        n,
        r_squared,
    })
}

/// `(x, V0*)` pairs of the successful sweep points.
pub fn sweep_thresholds(points: &[SweepPoint]) -> Vec<(f64, f64)> {
    points
        .iter()
        .filter_map(|p| p.result.as_ref().ok().map(|r| (p.axis_value, r.v0_star)))
        .collect()
}
