use std::path::PathBuf;

use clap::Args;
use evmchaos_core::map::{iterate, EvmMap, KickedMap};
use evmchaos_core::reconstruct::{density_matrix_grid, heisenberg_defect};
use evmchaos_core::{EvmState, MomentSet};

use crate::output::{num, write_csv};
use crate::{set, Context, Failure};

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    /// MomentSet JSON: {"q", "p", "s_qq", "s_pp", "s_qp", "hbar"}.
    #[arg(long, value_name = "FILE", conflicts_with = "kicks")]
    pub moments: Option<PathBuf>,
    /// Evolve a coherent state this many kicks with the quantum map and use its moments.
    #[arg(long)]
    pub kicks: Option<usize>,
    /// Kick strength for `--kicks`.
    #[arg(long)]
    pub v0: Option<f64>,
    #[arg(long, default_value_t = 0.3)]
    pub q0: f64,
    #[arg(long, default_value_t = 0.1)]
    pub p0: f64,
    /// Grid points (a power of two).
    #[arg(long)]
    pub n: Option<usize>,
    /// Position window in standard deviations of Q.
    #[arg(long)]
    pub span_sigmas: Option<f64>,
    /// Writes `<PREFIX>_re.csv` and `<PREFIX>_im.csv`.
    #[arg(long, value_name = "PREFIX", default_value = "rho")]
    pub prefix: String,
}

pub fn run(a: ReconstructArgs, ctx: &mut Context) -> Result<(), Failure> {
    let b = &mut ctx.config.reconstruct;
    set(&mut b.n, a.n);
    set(&mut b.span_sigmas, a.span_sigmas);
    let b = b.clone();

    let mut notes = Vec::new();
    let m: MomentSet = match (&a.moments, a.kicks) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            notes.push(format!("source: {}", path.display()));
            serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("invalid moments {}: {e}", path.display())))?
        }
        (None, Some(kicks)) => {
            let params = ctx.config.params.with_v0(a.v0.unwrap_or(ctx.config.params.v0));
            if !(params.hbar > 0.0) {
                return Err(Failure::Usage("--kicks needs --hbar > 0".into()));
            }
            let map = EvmMap::new(&params)?;
            let x = iterate(&map, map.initial_state(a.q0, a.p0), kicks)
                .map_err(|k| Failure::Runtime(format!("orbit escaped at kick {k}")))?;
            notes.push(format!(
                "source: {kicks} kicks from ({}, {}) at V0 = {}",
                num(a.q0),
                num(a.p0),
                num(map.v0())
            ));
            MomentSet::from_state(&EvmState::from_vector(&x), params.hbar)
        }
        (None, None) => return Err(Failure::Usage("give --moments FILE or --kicks N".into())),
    };

    let span = b.span_sigmas * m.s_qq.max(0.0).sqrt();
    let g = density_matrix_grid(&m, b.n, span)?;
    let state = EvmState {
        q: m.q,
        p: m.p,
        s_qq: m.s_qq,
        s_pp: m.s_pp,
        s_qp: m.s_qp,
    };
    notes.push(format!("moments: {}", serde_json::to_string(&m).expect("moments serialize")));
    notes.push(format!(
        "trace: {} raw_trace: {} renormalization: {} hermiticity_residual: {} purity: {} gaussian_purity: {} heisenberg_defect: {}",
        num(g.trace()),
        num(g.raw_trace),
        num(g.renormalization),
        num(g.hermiticity_residual),
        num(g.purity()),
        num(m.gaussian_purity()),
        num(heisenberg_defect(&state, m.hbar))
    ));

    let mut columns = vec!["x".to_string()];
    columns.extend(g.x.iter().map(|x| num(*x)));
    let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
    for (suffix, part) in [("re", 0), ("im", 1)] {
        let rows = (0..g.x.len()).map(|j| {
            let mut row = vec![num(g.x[j])];
            row.extend((0..g.x.len()).map(|k| {
                let z = g.rho[(j, k)];
                num(if part == 0 { z.re } else { z.im })
            }));
            row
        });
        let meta = ctx.meta("reconstruct", notes.clone());
        let path = PathBuf::from(format!("{}_{suffix}.csv", a.prefix));
        write_csv(Some(&path), &meta, &columns, rows)?;
    }
    Ok(())
}
