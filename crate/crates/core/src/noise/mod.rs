//! Bath-noise moments accumulated over one inter-kick interval.
//!
//! The random force enters the fluctuation maps only through three
//! state-independent frequency integrals (`s_ss`, `s_cc`, `s_sc`). They are
//! computed once per parameter set from closed-form double-integral kernels
//! and then combined with V'' at every kick.

mod kernels;
mod moments;
pub mod quadrature;

pub use kernels::{kernel_triple, KernelTriple};
pub use moments::{
    base_moments, base_moments_with, combine_moments, integrand, thermal_weight, MomentOptions,
    NoiseMoments, NoiseTerms,
};
