use std::path::PathBuf;

use clap::Args;
use evmchaos_core::scan::{self, sweep_thresholds, SweepPoint, ThresholdOptions};
use evmchaos_core::{find_threshold, fit_scaling, Axis, Params, ScalingReference, ThresholdKind, ThresholdRecord};
use rayon::prelude::*;

use super::OutputArgs;
use crate::config::{output_path, parse_grid, parse_pair, ReferenceChoice, RunConfig};
use crate::output::{num, write_csv};
use crate::{set, Context, Failure};

/// Search settings shared by `threshold`, `sweep` and `scaling`.
#[derive(Args, Debug, Default, Clone)]
pub struct SearchArgs {
    /// V0 bracket `lo:hi`; the first transition above `lo` is reported.
    #[arg(long, value_name = "LO:HI")]
    pub bracket: Option<String>,
    /// Bisection width for the chaos onset.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Bisection width for the loss of orbit stability.
    #[arg(long)]
    pub hopf_tol: Option<f64>,
    /// V0 spacing of the coarse chaos scan.
    #[arg(long)]
    pub coarse_step: Option<f64>,
    #[arg(long)]
    pub q0: Option<f64>,
    #[arg(long)]
    pub p0: Option<f64>,
}

impl SearchArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<(), Failure> {
        let t = &mut cfg.threshold;
        if let Some(b) = &self.bracket {
            t.bracket = parse_pair(b)?;
        }
        set(&mut t.tol, self.tol);
        set(&mut t.hopf_tol, self.hopf_tol);
        set(&mut t.coarse_step, self.coarse_step);
        set(&mut t.q0, self.q0);
        set(&mut t.p0, self.p0);
        Ok(())
    }
}

fn options(cfg: &RunConfig) -> ThresholdOptions {
    let t = &cfg.threshold;
    ThresholdOptions {
        tol: t.tol,
        hopf_tol: t.hopf_tol,
        coarse_step: t.coarse_step,
        start: (t.q0, t.p0),
        warm_margin: cfg.sweep.warm_margin,
        ..ThresholdOptions::default()
    }
}

fn bifurcation_label(r: &ThresholdRecord) -> String {
    r.bifurcation.map(|b| b.to_string()).unwrap_or_default()
}

#[derive(Args, Debug)]
pub struct ThresholdArgs {
    /// hopf or chaos
    #[arg(long)]
    pub kind: Option<ThresholdKind>,
    #[command(flatten)]
    pub search: SearchArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

pub fn threshold(a: ThresholdArgs, ctx: &mut Context) -> Result<(), Failure> {
    set(&mut ctx.config.threshold.kind, a.kind);
    a.search.apply(&mut ctx.config)?;
    let cfg = ctx.config.clone();
    let rec = find_threshold(cfg.mode, &cfg.params, cfg.threshold.kind, cfg.threshold.bracket, &options(&cfg))?;
    let mut notes = vec![format!(
        "bracket: [{}, {}] hbar: {} kbt: {} omega_c: {}",
        num(rec.bracket.0),
        num(rec.bracket.1),
        num(rec.hbar),
        num(rec.kbt),
        num(rec.omega_c)
    )];
    if !rec.lambda_trace.is_empty() {
        let trace: Vec<String> = rec.lambda_trace.iter().map(|(v, l)| format!("{}:{}", num(*v), num(*l))).collect();
        notes.push(format!("lambda_trace: {}", trace.join(" ")));
    }
    let meta = ctx.meta("threshold", notes);
    let row = vec![rec.kind.to_string(), num(rec.v0_star), num(rec.bracket_width), bifurcation_label(&rec)];
    write_csv(output_path(&a.out.output), &meta, &["kind", "v0_star", "bracket_width", "bifurcation"], [row])?;
    Ok(())
}

#[derive(Args, Debug, Default, Clone)]
pub struct AxisArgs {
    /// kbt, hbar or omega_c
    #[arg(long)]
    pub axis: Option<Axis>,
    /// Axis values: `start:stop:step` (inclusive), a comma list or one value.
    #[arg(long)]
    pub grid: Option<String>,
    /// Half-width of the bracket centred on the previous threshold.
    #[arg(long)]
    pub warm_margin: Option<f64>,
    /// Search every point in the full bracket (points then run in parallel).
    #[arg(long)]
    pub cold: bool,
}

impl AxisArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.sweep;
        set(&mut s.axis, self.axis);
        set(&mut s.grid, self.grid.clone());
        set(&mut s.warm_margin, self.warm_margin);
        s.cold |= self.cold;
    }
}

/// Thresholds of `kind` along the configured axis.
fn run_sweep(cfg: &RunConfig, kind: ThresholdKind) -> Result<Vec<SweepPoint>, Failure> {
    let grid = parse_grid(&cfg.sweep.grid)?;
    let opts = options(cfg);
    let (mode, axis, bracket) = (cfg.mode, cfg.sweep.axis, cfg.threshold.bracket);
    for &v in &grid {
        axis.apply(&cfg.params, v).validate()?;
    }
    Ok(if cfg.sweep.cold {
        grid.par_iter()
            .enumerate()
            .map(|(index, &v)| SweepPoint {
                index,
                axis_value: v,
                result: find_threshold(mode, &axis.apply(&cfg.params, v), kind, bracket, &opts).map_err(|e| e.to_string()),
                warm: false,
            })
            .collect()
    } else {
        scan::sweep(mode, &cfg.params, axis, &grid, kind, bracket, &opts)
    })
}

fn point_note(kind: ThresholdKind, p: &SweepPoint) -> String {
    match &p.result {
        Ok(r) => format!(
            "point {} {kind} axis_value={} bracket=[{}, {}] width={} warm={}{}",
            p.index,
            num(p.axis_value),
            num(r.bracket.0),
            num(r.bracket.1),
            num(r.bracket_width),
            p.warm,
            r.bifurcation.map(|b| format!(" bifurcation={b}")).unwrap_or_default()
        ),
        Err(e) => format!("point {} {kind} axis_value={} failed: {e}", p.index, num(p.axis_value)),
    }
}

fn failures(sweeps: &[(ThresholdKind, Vec<SweepPoint>)]) -> Result<(), Failure> {
    let total: usize = sweeps.iter().map(|s| s.1.len()).sum();
    let failed = sweeps.iter().flat_map(|s| &s.1).filter(|p| p.result.is_err()).count();
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} of {total} sweep points failed (see output header)")));
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Threshold kinds, comma separated (default hopf,chaos).
    #[arg(long, value_delimiter = ',')]
    pub kind: Vec<ThresholdKind>,
    #[command(flatten)]
    pub axis: AxisArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

pub fn sweep(a: SweepArgs, ctx: &mut Context) -> Result<(), Failure> {
    if !a.kind.is_empty() {
        ctx.config.sweep.kinds = a.kind;
    }
    a.axis.apply(&mut ctx.config);
    a.search.apply(&mut ctx.config)?;
    let cfg = ctx.config.clone();
    let sweeps: Vec<(ThresholdKind, Vec<SweepPoint>)> = cfg
        .sweep
        .kinds
        .par_iter()
        .map(|&k| run_sweep(&cfg, k).map(|pts| (k, pts)))
        .collect::<Result<_, _>>()?;

    let mut notes = Vec::new();
    let mut rows = Vec::new();
    for (kind, points) in &sweeps {
        for p in points {
            notes.push(point_note(*kind, p));
            let (v, w) = p.result.as_ref().map_or((f64::NAN, f64::NAN), |r| (r.v0_star, r.bracket_width));
            rows.push(vec![num(p.axis_value), kind.to_string(), num(v), num(w)]);
        }
    }
    let meta = ctx.meta("sweep", notes);
    write_csv(output_path(&a.out.output), &meta, &["axis_value", "kind", "v0_star", "bracket_width"], rows)?;
    failures(&sweeps)
}

#[derive(Args, Debug)]
pub struct ScalingArgs {
    /// Threshold kind to fit (default: first configured sweep kind).
    #[arg(long)]
    pub kind: Option<ThresholdKind>,
    /// Shift reference: threshold at axis value 0, or extrapolated from the grid.
    #[arg(long, value_enum)]
    pub reference: Option<ReferenceChoice>,
    /// Use this threshold at axis value 0 instead of computing it.
    #[arg(long)]
    pub reference_v0: Option<f64>,
    #[arg(long)]
    pub confidence: Option<f64>,
    /// Fit an existing sweep CSV instead of running the sweep.
    #[arg(long, value_name = "FILE")]
    pub from: Option<PathBuf>,
    #[command(flatten)]
    pub axis: AxisArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

/// `(axis_value, v0_star)` rows of `kind` from a `sweep` CSV.
fn read_sweep(path: &std::path::Path, kind: ThresholdKind) -> Result<Vec<(f64, f64)>, Failure> {
    let text = std::fs::read_to_string(path)?;
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Failure::Usage(format!("{} has no `{name}` column", path.display())))
    };
    let (ia, ik, iv) = (col("axis_value")?, col("kind")?, col("v0_star")?);
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.get(ik) != Some(&kind.to_string()[..]) {
            continue;
        }
        let parse = |i: usize| {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Failure::Usage(format!("bad number in {}: {:?}", path.display(), rec.get(i))))
        };
        let (x, v) = (parse(ia)?, parse(iv)?);
        if v.is_finite() {
            out.push((x, v));
        }
    }
    Ok(out)
}

pub fn scaling(a: ScalingArgs, ctx: &mut Context) -> Result<(), Failure> {
    if let Some(k) = a.kind {
        ctx.config.sweep.kinds = vec![k];
    }
    set(&mut ctx.config.sweep.reference, a.reference);
    set(&mut ctx.config.sweep.confidence, a.confidence);
    a.axis.apply(&mut ctx.config);
    a.search.apply(&mut ctx.config)?;
    let cfg = ctx.config.clone();
    let kind = *cfg.sweep.kinds.first().ok_or_else(|| Failure::Usage("no threshold kind configured".into()))?;
    let axis = cfg.sweep.axis;

    let explicit_reference = || -> Result<f64, Failure> {
        match a.reference_v0 {
            Some(v) => Ok(v),
            None => {
                let p: Params = axis.apply(&cfg.params, 0.0);
                Ok(find_threshold(cfg.mode, &p, kind, cfg.threshold.bracket, &options(&cfg))?.v0_star)
            }
        }
    };
    let want_explicit = cfg.sweep.reference == ReferenceChoice::Explicit;
    let mut notes = Vec::new();
    let (points, reference_v0, sweep_points) = match &a.from {
        Some(path) => {
            notes.push(format!("source: {}", path.display()));
            let pts = read_sweep(path, kind)?;
            let r = if want_explicit { Some(explicit_reference()?) } else { None };
            (pts, r, None)
        }
        None => {
            let (swept, r) = rayon::join(
                || run_sweep(&cfg, kind),
                || if want_explicit { explicit_reference().map(Some) } else { Ok(None) },
            );
            let swept = swept?;
            (sweep_thresholds(&swept), r?, Some(swept))
        }
    };
    if let Some(sp) = &sweep_points {
        notes.extend(sp.iter().map(|p| point_note(kind, p)));
    }
    let reference = match reference_v0 {
        Some(v) => ScalingReference::Explicit(v),
        None => ScalingReference::Extrapolated,
    };
    let fit = fit_scaling(&points, reference, cfg.sweep.confidence)?;
    notes.push(format!(
        "reference: {} {} at {axis} = 0",
        match reference {
            ScalingReference::Explicit(_) => "explicit",
            ScalingReference::Extrapolated => "extrapolated",
        },
        num(fit.reference_v0)
    ));
    notes.push(format!(
        "fit: slope {} stderr {} ci{} [{}, {}] intercept {} r_squared {} n {}",
        num(fit.slope),
        num(fit.slope_stderr),
        num(fit.confidence),
        num(fit.ci.0),
        num(fit.ci.1),
        num(fit.intercept),
        num(fit.r_squared),
        fit.n
    ));
    if let Some(sp) = &sweep_points {
        let coarse = sp.iter().filter_map(|p| p.result.as_ref().ok()).any(|r| {
            let shift = fit.reference_v0 - r.v0_star;
            shift < 10.0 * r.bracket_width
        });
        if coarse {
            notes.push("warning: some shifts are below 10 bracket widths; tighten --tol or --hopf-tol".into());
        }
    }
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|&(x, v)| vec![num(x), num(v), num(fit.reference_v0 - v)])
        .collect();
    let meta = ctx.meta("scaling", notes);
    write_csv(output_path(&a.out.output), &meta, &["axis_value", "v0_star", "shift"], rows)?;
    eprintln!(
        "slope {:.4} ({:.0}% CI [{:.4}, {:.4}])",
        fit.slope,
        100.0 * fit.confidence,
        fit.ci.0,
        fit.ci.1
    );
    match sweep_points {
        Some(sp) => failures(&[(kind, sp)]),
        None => Ok(()),
    }
}

