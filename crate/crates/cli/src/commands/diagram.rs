use clap::Args;
use evmchaos_core::lyapunov::LyapunovOptions;
use evmchaos_core::map::{EvmMap, KickedMap};
use evmchaos_core::reconstruct::heisenberg_defect;
use evmchaos_core::scan::{bifurcation_point, DiagramOptions};
use evmchaos_core::{EvmState, Mode, Model};
use rayon::prelude::*;

use super::{OutputArgs, SvgArgs};
use crate::config::{output_path, parse_grid, parse_pair};
use crate::output::{flag, num, scatter_svg, write_csv, Scatter};
use crate::{set, Context, Failure};

#[derive(Args, Debug)]
pub struct BifurcationArgs {
    /// V0 grid: `start:stop:step` (inclusive), a comma list or one value.
    #[arg(long)]
    pub v0: Option<String>,
    /// Initial conditions per V0.
    #[arg(long)]
    pub ics: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub transient: Option<usize>,
    /// Samples kept per orbit.
    #[arg(long)]
    pub record: Option<usize>,
    /// Initial conditions are uniform in [-r, r]^2.
    #[arg(long)]
    pub ic_range: Option<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
    #[command(flatten)]
    pub svg: SvgArgs,
}

pub fn bifurcation(a: BifurcationArgs, ctx: &mut Context) -> Result<(), Failure> {
    let b = &mut ctx.config.diagram;
    set(&mut b.v0, a.v0);
    set(&mut b.ics, a.ics);
    set(&mut b.seed, a.seed);
    set(&mut b.transient, a.transient);
    set(&mut b.record, a.record);
    set(&mut b.ic_range, a.ic_range);
    let b = b.clone();
    let grid = parse_grid(&b.v0)?;
    let qrange = a.svg.qrange.as_deref().map(parse_pair).transpose()?;
    let opts = DiagramOptions {
        n_ic: b.ics,
        seed: b.seed,
        n_transient: b.transient,
        n_record: b.record,
        ic_range: b.ic_range,
    };
    let model = Model::new(ctx.config.mode, &ctx.config.params.with_v0(grid[0]))?;
    let records: Vec<_> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &v0)| bifurcation_point(&model.at_v0(v0), i, &opts))
        .collect();

    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut escaped = 0usize;
    for r in records.iter().flatten() {
        if r.escaped {
            escaped += 1;
            rows.push(vec![num(r.v0), r.ic_index.to_string(), String::new(), String::new(), flag(true)]);
            continue;
        }
        for (k, &q) in r.samples.iter().enumerate() {
            rows.push(vec![num(r.v0), r.ic_index.to_string(), k.to_string(), num(q), flag(false)]);
            points.push((r.v0, q));
        }
    }
    let notes = vec![format!("orbits: {} escaped: {escaped}", records.iter().map(Vec::len).sum::<usize>())];
    let meta = ctx.meta("bifurcation", notes);
    write_csv(output_path(&a.out.output), &meta, &["v0", "ic", "sample_idx", "q", "escaped"], rows)?;
    if let Some(path) = &a.svg.svg {
        let svg = scatter_svg(
            &points,
            &Scatter {
                title: &format!("{} bifurcation diagram", ctx.config.mode),
                x_label: "V0",
                y_label: "Q",
                x_range: None,
                y_range: qrange,
            },
        );
        std::fs::write(path, svg)?;
    }
    Ok(())
}

/// CSV columns, CSV rows and the (Q, P) points to plot.
type Rendered = (&'static [&'static str], Vec<Vec<String>>, Vec<(f64, f64)>);

#[derive(Args, Debug)]
pub struct AttractorArgs {
    #[arg(long)]
    pub v0: Option<f64>,
    #[arg(long)]
    pub q0: Option<f64>,
    #[arg(long)]
    pub p0: Option<f64>,
    #[arg(long)]
    pub transient: Option<usize>,
    #[arg(long)]
    pub record: Option<usize>,
    /// Also estimate the largest Lyapunov exponent of the orbit.
    #[arg(long)]
    pub lyapunov: bool,
    #[command(flatten)]
    pub out: OutputArgs,
    #[command(flatten)]
    pub svg: SvgArgs,
    /// P window of the plot, `lo:hi`.
    #[arg(long, value_name = "LO:HI")]
    pub prange: Option<String>,
}

pub fn attractor(a: AttractorArgs, ctx: &mut Context) -> Result<(), Failure> {
    let b = &mut ctx.config.attractor;
    set(&mut b.v0, a.v0);
    set(&mut b.q0, a.q0);
    set(&mut b.p0, a.p0);
    set(&mut b.transient, a.transient);
    set(&mut b.record, a.record);
    let b = b.clone();
    let qrange = a.svg.qrange.as_deref().map(parse_pair).transpose()?;
    let prange = a.prange.as_deref().map(parse_pair).transpose()?;
    let params = ctx.config.params.with_v0(b.v0);

    let (columns, rows, points): Rendered = match ctx.config.mode {
        Mode::Classical => {
            let model = Model::new(Mode::Classical, &params)?;
            let pts = model
                .attractor(b.q0, b.p0, b.transient, b.record)
                .ok_or_else(|| Failure::Runtime(format!("orbit from ({}, {}) escaped at V0 = {}", b.q0, b.p0, b.v0)))?;
            let rows = pts.iter().enumerate().map(|(n, (q, p))| vec![n.to_string(), num(*q), num(*p)]).collect();
            (&["n", "q", "p"], rows, pts)
        }
        Mode::Quantum => {
            let map = EvmMap::new(&params)?;
            let mut x = map.initial_state(b.q0, b.p0);
            for k in 0..b.transient {
                x = map.step(&x);
                if map.is_escaped(&x) {
                    return Err(Failure::Runtime(format!("orbit escaped at kick {k}")));
                }
            }
            let mut rows = Vec::with_capacity(b.record);
            let mut pts = Vec::with_capacity(b.record);
            for n in 0..b.record {
                x = map.step(&x);
                if map.is_escaped(&x) {
                    return Err(Failure::Runtime(format!("orbit escaped at kick {}", b.transient + n)));
                }
                let s = EvmState::from_vector(&x);
                rows.push(vec![
                    n.to_string(),
                    num(s.q),
                    num(s.p),
                    num(s.s_qq),
                    num(s.s_pp),
                    num(s.s_qp),
                    num(heisenberg_defect(&s, map.hbar)),
                ]);
                pts.push((s.q, s.p));
            }
            (&["n", "q", "p", "s_qq", "s_pp", "s_qp", "defect"], rows, pts)
        }
    };

    let mut notes = Vec::new();
    if a.lyapunov {
        let est = Model::new(ctx.config.mode, &params)?.lyapunov(
            b.q0,
            b.p0,
            LyapunovOptions {
                n_transient: b.transient,
                ..LyapunovOptions::default()
            },
        );
        notes.push(format!("lambda: {} stderr: {}", num(est.lambda), num(est.stderr)));
    }
    let meta = ctx.meta("attractor", notes);
    write_csv(output_path(&a.out.output), &meta, columns, rows)?;
    if let Some(path) = &a.svg.svg {
        let svg = scatter_svg(
            &points,
            &Scatter {
                title: &format!("{} attractor, V0 = {}", ctx.config.mode, b.v0),
                x_label: "Q",
                y_label: "P",
                x_range: qrange,
                y_range: prange,
            },
        );
        std::fs::write(path, svg)?;
    }
    Ok(())
}
