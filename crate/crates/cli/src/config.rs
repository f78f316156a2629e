use std::path::{Path, PathBuf};

use evmchaos_core::scan::{Axis, Mode, ThresholdKind};
use evmchaos_core::Params;
use serde::{Deserialize, Serialize};

use crate::Failure;

/// Everything that determines a run's output. Embedded verbatim in every
/// output header, so two runs with equal configs produce equal data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub params: Params,
    pub diagram: DiagramBlock,
    pub attractor: AttractorBlock,
    pub lyapunov: LyapunovBlock,
    pub threshold: ThresholdBlock,
    pub sweep: SweepBlock,
    pub noise_table: NoiseTableBlock,
    pub reconstruct: ReconstructBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagramBlock {
    pub v0: String,
    pub ics: usize,
    pub seed: u64,
    pub transient: usize,
    pub record: usize,
    pub ic_range: f64,
}

impl Default for DiagramBlock {
    fn default() -> Self {
        Self {
            v0: "1:9:0.005".into(),
            ics: 100,
            seed: 0,
            transient: 2000,
            record: 50,
            ic_range: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttractorBlock {
    pub v0: f64,
    pub q0: f64,
    pub p0: f64,
    pub transient: usize,
    pub record: usize,
}

impl Default for AttractorBlock {
    fn default() -> Self {
        Self {
            v0: 8.0,
            q0: 0.3,
            p0: 0.1,
            transient: 2000,
            record: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovBlock {
    pub v0: String,
    /// 1 uses `(q0, p0)`; more draw seeded random initial conditions.
    pub ics: usize,
    pub seed: u64,
    pub ic_range: f64,
    pub q0: f64,
    pub p0: f64,
    pub transient: usize,
    pub iter: usize,
    /// Also report the classical exponent at each V0.
    pub compare_classical: bool,
}

impl Default for LyapunovBlock {
    fn default() -> Self {
        Self {
            v0: "1:9:0.01".into(),
            ics: 1,
            seed: 0,
            ic_range: 5.0,
            q0: 0.3,
            p0: 0.1,
            transient: 2000,
            iter: 20_000,
            compare_classical: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdBlock {
    pub kind: ThresholdKind,
    pub bracket: (f64, f64),
    pub tol: f64,
    pub hopf_tol: f64,
    pub coarse_step: f64,
    pub q0: f64,
    pub p0: f64,
}

impl Default for ThresholdBlock {
    fn default() -> Self {
        Self {
            kind: ThresholdKind::Chaos,
            bracket: (3.7, 4.0),
            tol: 1e-3,
            hopf_tol: 1e-5,
            coarse_step: 5e-4,
            q0: 0.3,
            p0: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    pub axis: Axis,
    pub grid: String,
    /// `scaling` fits the first entry.
    pub kinds: Vec<ThresholdKind>,
    pub warm_margin: f64,
    pub cold: bool,
    /// Scaling reference: `explicit` computes the threshold at axis value 0.
    pub reference: ReferenceChoice,
    pub confidence: f64,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            axis: Axis::Kbt,
            grid: "0.0005,0.002,0.004,0.006,0.008,0.01".into(),
            kinds: vec![ThresholdKind::Hopf, ThresholdKind::Chaos],
            warm_margin: 0.05,
            cold: false,
            reference: ReferenceChoice::Explicit,
            confidence: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceChoice {
    #[default]
    Explicit,
    Extrapolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseTableBlock {
    /// Frequency grid for the kernel table.
    pub omega: String,
    /// When set, tabulate the bath moments along this axis instead.
    pub axis: Option<Axis>,
    pub grid: Option<String>,
}

impl Default for NoiseTableBlock {
    fn default() -> Self {
        Self {
            omega: "0:100:0.25".into(),
            axis: None,
            grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructBlock {
    pub n: usize,
    /// Width of the position window in standard deviations of Q.
    pub span_sigmas: f64,
}

impl Default for ReconstructBlock {
    fn default() -> Self {
        Self {
            n: 256,
            span_sigmas: 12.0,
        }
    }
}

pub fn load(path: Option<&Path>) -> Result<RunConfig, Failure> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("invalid config {}: {e}", path.display())))
}

/// Values of a `start:stop:step` range (inclusive), a comma list, or a single number.
///
/// Range values are computed as `start + i·step` so no error accumulates.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, Failure> {
    let bad = |why: &str| Failure::Usage(format!("bad grid `{spec}`: {why}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("`{s}` is not a number")));
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [one] if one.contains(',') => one.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        [one] => vec![num(one)?],
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || stop < start {
                return Err(bad("need step > 0 and stop >= start"));
            }
            // a relative slack keeps `stop` when (stop-start)/step lands just below an integer
            let n = ((stop - start) / step * (1.0 + 1e-12) + 1e-9).floor() as usize;
            if n > 10_000_000 {
                return Err(bad("more than 10^7 points"));
            }
            (0..=n).map(|i| start + i as f64 * step).collect()
        }
        _ => return Err(bad("expected start:stop:step, a comma list or a number")),
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite value"));
    }
    Ok(values)
}

pub fn parse_pair(spec: &str) -> Result<(f64, f64), Failure> {
    let bad = || Failure::Usage(format!("bad pair `{spec}`: expected `lo:hi` or `lo,hi`"));
    let (a, b) = spec.split_once(':').or_else(|| spec.split_once(',')).ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    Ok((a, b))
}

/// Output destination: a file, or standard output.
pub fn output_path(p: &Option<PathBuf>) -> Option<&Path> {
    p.as_deref().filter(|p| p.as_os_str() != "-")
}
