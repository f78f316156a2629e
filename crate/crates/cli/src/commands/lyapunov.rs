use clap::Args;
use evmchaos_core::lyapunov::{LyapunovEstimate, LyapunovOptions};
use evmchaos_core::scan::initial_condition;
use evmchaos_core::{Mode, Model};
use rayon::prelude::*;

use super::OutputArgs;
use crate::config::{output_path, parse_grid};
use crate::output::{num, write_csv};
use crate::{set, Context, Failure};

#[derive(Args, Debug)]
pub struct LyapunovArgs {
    /// V0 grid: `start:stop:step` (inclusive), a comma list or one value.
    #[arg(long)]
    pub v0: Option<String>,
    /// Orbits per V0; 1 starts from (q0, p0), more draw seeded random starts.
    #[arg(long)]
    pub ics: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub ic_range: Option<f64>,
    #[arg(long)]
    pub q0: Option<f64>,
    #[arg(long)]
    pub p0: Option<f64>,
    #[arg(long)]
    pub transient: Option<usize>,
    /// Kicks averaged after the transient.
    #[arg(long)]
    pub iter: Option<usize>,
    /// Add the classical exponent from the same starts.
    #[arg(long)]
    pub compare_classical: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

/// Ensemble mean over non-escaped orbits and the stderr of that mean.
fn combine(ests: &[LyapunovEstimate]) -> (f64, f64, f64) {
    let ok: Vec<_> = ests.iter().filter(|e| !e.escaped).collect();
    let escaped_fraction = 1.0 - ok.len() as f64 / ests.len() as f64;
    if ok.is_empty() {
        return (f64::NAN, f64::NAN, escaped_fraction);
    }
    let k = ok.len() as f64;
    let mean = ok.iter().map(|e| e.lambda).sum::<f64>() / k;
    let stderr = ok.iter().map(|e| e.stderr * e.stderr).sum::<f64>().sqrt() / k;
    (mean, stderr, escaped_fraction)
}

pub fn run(a: LyapunovArgs, ctx: &mut Context) -> Result<(), Failure> {
    let b = &mut ctx.config.lyapunov;
    set(&mut b.v0, a.v0);
    set(&mut b.ics, a.ics);
    set(&mut b.seed, a.seed);
    set(&mut b.ic_range, a.ic_range);
    set(&mut b.q0, a.q0);
    set(&mut b.p0, a.p0);
    set(&mut b.transient, a.transient);
    set(&mut b.iter, a.iter);
    b.compare_classical |= a.compare_classical;
    let b = b.clone();
    if b.ics == 0 {
        return Err(Failure::Usage("--ics must be at least 1".into()));
    }
    let grid = parse_grid(&b.v0)?;
    let params = ctx.config.params.with_v0(grid[0]);
    let model = Model::new(ctx.config.mode, &params)?;
    let classical = if b.compare_classical {
        Some(Model::new(Mode::Classical, &params)?)
    } else {
        None
    };
    let opts = LyapunovOptions {
        n_transient: b.transient,
        n_iter: b.iter,
        ..LyapunovOptions::default()
    };
    let start = |i: usize, k: usize| {
        if b.ics == 1 {
            (b.q0, b.p0)
        } else {
            initial_condition(b.seed, i, k, b.ic_range)
        }
    };
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|i| (0..b.ics).map(move |k| (i, k))).collect();
    let results: Vec<(LyapunovEstimate, Option<LyapunovEstimate>)> = jobs
        .par_iter()
        .map(|&(i, k)| {
            let (q, p) = start(i, k);
            let main = model.at_v0(grid[i]).lyapunov(q, p, opts);
            let cl = classical.as_ref().map(|c| c.at_v0(grid[i]).lyapunov(q, p, opts));
            (main, cl)
        })
        .collect();

    let mut rows = Vec::with_capacity(grid.len());
    for (i, chunk) in results.chunks(b.ics).enumerate() {
        let main: Vec<_> = chunk.iter().map(|r| r.0).collect();
        let (l, s, e) = combine(&main);
        let mut row = vec![num(grid[i]), num(l), num(s), num(e)];
        if b.compare_classical {
            let cl: Vec<_> = chunk.iter().filter_map(|r| r.1).collect();
            let (l, s, _) = combine(&cl);
            row.extend([num(l), num(s)]);
        }
        rows.push(row);
    }
    let mut columns = vec!["v0", "lambda", "stderr", "escaped_fraction"];
    if b.compare_classical {
        columns.extend(["classical_lambda", "classical_stderr"]);
    }
    let meta = ctx.meta("lyapunov", Vec::new());
    write_csv(output_path(&a.out.output), &meta, &columns, rows)?;
    Ok(())
}
