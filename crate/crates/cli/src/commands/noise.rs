use clap::Args;
use evmchaos_core::noise::{base_moments, integrand, kernel_triple};
use rayon::prelude::*;

use super::OutputArgs;
use crate::config::{output_path, parse_grid};
use crate::output::{num, write_csv};
use crate::{Context, Failure};

#[derive(Args, Debug)]
pub struct NoiseTableArgs {
    /// Frequency grid of the kernel table.
    #[arg(long)]
    pub omega: Option<String>,
    /// Tabulate the bath moments along kbt, hbar or omega_c instead.
    #[arg(long)]
    pub axis: Option<evmchaos_core::Axis>,
    /// Axis values for `--axis`.
    #[arg(long)]
    pub grid: Option<String>,
    #[command(flatten)]
    pub out: OutputArgs,
}

pub fn run(a: NoiseTableArgs, ctx: &mut Context) -> Result<(), Failure> {
    let b = &mut ctx.config.noise_table;
    if let Some(o) = a.omega {
        b.omega = o;
    }
    if a.axis.is_some() {
        b.axis = a.axis;
    }
    if a.grid.is_some() {
        b.grid = a.grid;
    }
    let b = b.clone();
    let params = ctx.config.params;

    match b.axis {
        None => {
            let omegas = parse_grid(&b.omega)?;
            let omega0 = params.omega0();
            let rows: Vec<Vec<String>> = omegas
                .par_iter()
                .map(|&w| {
                    let k = kernel_triple(w, omega0, params.gamma, params.tau);
                    let f = integrand(&params, w);
                    vec![num(w), num(k.g_ss), num(k.g_cc), num(k.g_sc), num(f[0]), num(f[1]), num(f[2])]
                })
                .collect();
            let meta = ctx.meta("noise-table", Vec::new());
            let columns = ["omega", "g_ss", "g_cc", "g_sc", "integrand_ss", "integrand_cc", "integrand_sc"];
            write_csv(output_path(&a.out.output), &meta, &columns, rows)?;
        }
        Some(axis) => {
            let spec = b.grid.as_deref().ok_or_else(|| Failure::Usage("--axis needs --grid".into()))?;
            let grid = parse_grid(spec)?;
            let rows: Vec<Vec<String>> = grid
                .par_iter()
                .map(|&v| {
                    let p = axis.apply(&params, v);
                    p.validate()?;
                    let m = base_moments(&p)?;
                    Ok(vec![
                        num(p.hbar),
                        num(p.kbt),
                        num(p.omega_c),
                        num(m.s_ss),
                        num(m.s_cc),
                        num(m.s_sc),
                        num(m.abs_error),
                        num(m.tail_bound),
                    ])
                })
                .collect::<Result<_, evmchaos_core::Error>>()?;
            let meta = ctx.meta("noise-table", Vec::new());
            let columns = ["hbar", "kbt", "omega_c", "s_ss", "s_cc", "s_sc", "abs_error", "tail_bound"];
            write_csv(output_path(&a.out.output), &meta, &columns, rows)?;
        }
    }
    Ok(())
}
