//! Kicked damped harmonic oscillator: the classical map, its second-order
//! quantum expectation-values map (EVM) driven by a thermal/quantum bath, and
//! the tools used to study how quantization shifts its bifurcations and
//! chaotic thresholds.

// `!(x > 0.0)` rejects NaN together with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kick;
pub mod lyapunov;
pub mod map;
pub mod noise;
pub mod orbit;
pub mod params;
pub mod reconstruct;
pub mod scan;

pub use error::{Error, Result};
pub use kick::{kick_derivatives, KickDerivatives};
pub use lyapunov::{
    classical_jacobian, evm_jacobian, largest_lyapunov, Jacobian, LyapunovEstimate, LyapunovOptions,
};
pub use map::{
    classical_step, quantum_step, ClassicalMap, ClassicalState, EvmMap, EvmState, KickedMap,
    NoiseEvaluation,
};
pub use noise::{base_moments, combine_moments, kernel_triple, KernelTriple, NoiseMoments, NoiseTerms};
pub use params::{t_matrix, Params, TMatrix};
pub use orbit::{classify_bifurcation, fixed_point, BifurcationKind, BifurcationReport, PeriodicOrbit};
pub use scan::{
    find_threshold, fit_scaling, sweep, Axis, BifurcationRecord, Mode, Model, ScalingFit, ScalingReference,
    ThresholdKind, ThresholdOptions, ThresholdRecord,
};
pub use reconstruct::{characteristic_function, density_matrix_grid, heisenberg_monitor, DensityGrid, MomentSet};
