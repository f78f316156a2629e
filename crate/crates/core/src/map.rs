//! The classical kicked map and the five-variable expectation-values map (EVM).

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::kick::kick_derivatives;
use crate::noise::{combine_moments, NoiseMoments};
use crate::params::{Params, TMatrix};
use crate::Result;

/// Orbits with |Q| or |P| beyond this are treated as escaped.
pub const ESCAPE_BOUND: f64 = 1e6;

/// Position/momentum of the classical map just after a kick.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassicalState {
    pub q: f64,
    pub p: f64,
}

/// Means and symmetrized second moments carried by the EVM.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvmState {
    pub q: f64,
    pub p: f64,
    /// ⟨(δQ)²⟩
    pub s_qq: f64,
    /// ⟨(δP)²⟩
    pub s_pp: f64,
    /// ⟨δQδP + δPδQ⟩
    pub s_qp: f64,
}

impl ClassicalState {
    pub fn new(q: f64, p: f64) -> Self {
        Self { q, p }
    }

    pub fn is_escaped(&self) -> bool {
        !(self.q.is_finite() && self.p.is_finite())
            || self.q.abs() > ESCAPE_BOUND
            || self.p.abs() > ESCAPE_BOUND
    }
}

impl EvmState {
    /// Coherent (minimum-uncertainty) initial state centred on `(q, p)`.
    pub fn coherent(q: f64, p: f64, hbar: f64) -> Self {
        Self {
            q,
            p,
            s_qq: 0.5 * hbar,
            s_pp: 0.5 * hbar,
            s_qp: 0.0,
        }
    }

    pub fn classical(q: f64, p: f64) -> Self {
        Self {
            q,
            p,
            ..Self::default()
        }
    }

    pub fn is_escaped(&self) -> bool {
        let finite = [self.q, self.p, self.s_qq, self.s_pp, self.s_qp]
            .iter()
            .all(|v| v.is_finite());
        !finite || self.q.abs() > ESCAPE_BOUND || self.p.abs() > ESCAPE_BOUND
    }

    /// Nonnegative variances; a violation signals a truncation artifact.
    pub fn has_physical_variances(&self) -> bool {
        self.s_qq >= 0.0 && self.s_pp >= 0.0
    }

    pub fn to_vector(&self) -> SVector<f64, 5> {
        SVector::<f64, 5>::new(self.q, self.p, self.s_qq, self.s_pp, self.s_qp)
    }

    pub fn from_vector(v: &SVector<f64, 5>) -> Self {
        Self {
            q: v[0],
            p: v[1],
            s_qq: v[2],
            s_pp: v[3],
            s_qp: v[4],
        }
    }
}

impl From<ClassicalState> for EvmState {
    fn from(c: ClassicalState) -> Self {
        Self::classical(c.q, c.p)
    }
}

/// Where V'' inside the momentum-noise term `h = g − V'' f` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseEvaluation {
    /// At the kick position `Q_{n+1}` (default).
    #[default]
    PostKick,
    /// At the previous position `Q_n`.
    PreKick,
}

pub fn classical_step(state: ClassicalState, t: &TMatrix, v0: f64) -> ClassicalState {
    let q = t.t_qq * state.q + t.t_qp * state.p;
    let k = kick_derivatives(q, v0);
    let p = t.t_pq * state.q + t.t_pp * state.p - k.v1;
    ClassicalState { q, p }
}

pub fn quantum_step(state: EvmState, t: &TMatrix, v0: f64, nm: &NoiseMoments) -> EvmState {
    quantum_step_with(state, t, v0, nm, NoiseEvaluation::PostKick)
}

pub fn quantum_step_with(
    state: EvmState,
    t: &TMatrix,
    v0: f64,
    nm: &NoiseMoments,
    eval: NoiseEvaluation,
) -> EvmState {
    let EvmState { q, p, s_qq, s_pp, s_qp } = state;
    let q1 = t.t_qq * q + t.t_qp * p;
    let k = kick_derivatives(q1, v0);
    let noise_v2 = match eval {
        NoiseEvaluation::PostKick => k.v2,
        NoiseEvaluation::PreKick => kick_derivatives(q, v0).v2,
    };
    let noise = combine_moments(nm, noise_v2, t.gamma, t.omega0);

    let s_qq1 = t.t_qq * t.t_qq * s_qq + t.t_qp * t.t_qp * s_pp + t.t_qq * t.t_qp * s_qp + noise.ff;
    let p1 = t.t_pq * q + t.t_pp * p - k.v1 - 0.5 * k.v3 * s_qq1;

    let r_pq = t.t_pq - k.v2 * t.t_qq;
    let r_pp = t.t_pp - k.v2 * t.t_qp;
    let s_pp1 = r_pq * r_pq * s_qq + r_pp * r_pp * s_pp + r_pq * r_pp * s_qp + noise.hh;
    let s_qp1 = 2.0 * r_pq * t.t_qq * s_qq
        + 2.0 * t.t_qp * r_pp * s_pp
        + (r_pq * t.t_qp + r_pp * t.t_qq) * s_qp
        + noise.fh;

    EvmState {
        q: q1,
        p: p1,
        s_qq: s_qq1,
        s_pp: s_pp1,
        s_qp: s_qp1,
    }
}

/// A one-kick map on an `N`-dimensional state with an analytic Jacobian.
pub trait KickedMap<const N: usize>: Sync {
    fn step(&self, x: &SVector<f64, N>) -> SVector<f64, N>;
    fn jacobian(&self, x: &SVector<f64, N>) -> SMatrix<f64, N, N>;
    fn v0(&self) -> f64;
    /// State with position `q`, momentum `p` and the map's natural initial spread.
    fn initial_state(&self, q: f64, p: f64) -> SVector<f64, N>;
    /// The same map at a different kick strength.
    fn at_v0(&self, v0: f64) -> Self
    where
        Self: Sized;

    fn is_escaped(&self, x: &SVector<f64, N>) -> bool {
        x.iter().any(|v| !v.is_finite()) || x[0].abs() > ESCAPE_BOUND || x[1].abs() > ESCAPE_BOUND
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClassicalMap {
    pub t: TMatrix,
    pub v0: f64,
}

impl ClassicalMap {
    pub fn new(params: &Params) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            t: params.t_matrix()?,
            v0: params.v0,
        })
    }
}

impl KickedMap<2> for ClassicalMap {
    fn step(&self, x: &SVector<f64, 2>) -> SVector<f64, 2> {
        let s = classical_step(ClassicalState::new(x[0], x[1]), &self.t, self.v0);
        SVector::<f64, 2>::new(s.q, s.p)
    }

    fn jacobian(&self, x: &SVector<f64, 2>) -> SMatrix<f64, 2, 2> {
        crate::lyapunov::classical_jacobian(ClassicalState::new(x[0], x[1]), &self.t, self.v0)
    }

    fn v0(&self) -> f64 {
        self.v0
    }

    fn initial_state(&self, q: f64, p: f64) -> SVector<f64, 2> {
        SVector::<f64, 2>::new(q, p)
    }

    fn at_v0(&self, v0: f64) -> Self {
        Self { v0, ..*self }
    }
}

/// The EVM with its noise moments precomputed for one parameter set.
#[derive(Debug, Clone, Copy)]
pub struct EvmMap {
    pub t: TMatrix,
    pub v0: f64,
    pub nm: NoiseMoments,
    pub eval: NoiseEvaluation,
    /// Sets the minimum-uncertainty spread of initial states.
    pub hbar: f64,
}

impl EvmMap {
    /// Computes the base moments for `params` (the expensive part).
    pub fn new(params: &Params) -> Result<Self> {
        let nm = crate::noise::base_moments(params)?;
        Self::with_moments(params, nm)
    }

    pub fn with_moments(params: &Params, nm: NoiseMoments) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            t: params.t_matrix()?,
            v0: params.v0,
            nm,
            eval: NoiseEvaluation::PostKick,
            hbar: params.hbar,
        })
    }

    pub fn with_evaluation(self, eval: NoiseEvaluation) -> Self {
        Self { eval, ..self }
    }
}

impl KickedMap<5> for EvmMap {
    fn step(&self, x: &SVector<f64, 5>) -> SVector<f64, 5> {
        quantum_step_with(EvmState::from_vector(x), &self.t, self.v0, &self.nm, self.eval)
            .to_vector()
    }

    fn jacobian(&self, x: &SVector<f64, 5>) -> SMatrix<f64, 5, 5> {
        crate::lyapunov::evm_jacobian_with(
            EvmState::from_vector(x),
            &self.t,
            self.v0,
            &self.nm,
            self.eval,
        )
    }

    fn v0(&self) -> f64 {
        self.v0
    }

    fn initial_state(&self, q: f64, p: f64) -> SVector<f64, 5> {
        EvmState::coherent(q, p, self.hbar).to_vector()
    }

    fn at_v0(&self, v0: f64) -> Self {
        Self { v0, ..*self }
    }
}

/// Iterates a map `n` times, stopping early on escape.
///
/// Returns the final state, or `Err(kick)` with the kick index at which the
/// orbit escaped.
pub fn iterate<const N: usize, M: KickedMap<N>>(
    map: &M,
    mut x: SVector<f64, N>,
    n: usize,
) -> std::result::Result<SVector<f64, N>, usize> {
    for k in 0..n {
        x = map.step(&x);
        if map.is_escaped(&x) {
            return Err(k + 1);
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::t_matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reference_t() -> TMatrix {
        t_matrix(0.03, 10.0).unwrap()
    }

    #[test]
    fn zero_kick_spirals_to_origin() {
        let t = reference_t();
        let mut s = ClassicalState::new(3.0, -2.0);
        for _ in 0..400 {
            s = classical_step(s, &t, 0.0);
        }
        assert!(s.q.abs() < 1e-40 && s.p.abs() < 1e-40);
    }

    #[test]
    fn noiseless_evm_reproduces_classical_orbit() {
        let t = reference_t();
        let nm = NoiseMoments::zero();
        let mut c = ClassicalState::new(0.4, -1.1);
        let mut e = EvmState::classical(0.4, -1.1);
        for _ in 0..10_000 {
            c = classical_step(c, &t, 4.5);
            e = quantum_step(e, &t, 4.5, &nm);
            assert_eq!((c.q, c.p), (e.q, e.p));
            assert_eq!((e.s_qq, e.s_pp, e.s_qp), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn linear_covariance_propagation() {
        let t = reference_t();
        let nm = NoiseMoments::zero();
        let mut e = EvmState { q: 0.3, p: 0.2, s_qq: 1.0, s_pp: 1.0, s_qp: 0.0 };
        // Σ = [[s_qq, s_qp/2], [s_qp/2, s_pp]]
        let m = nalgebra::Matrix2::new(t.t_qq, t.t_qp, t.t_pq, t.t_pp);
        let mut sigma = nalgebra::Matrix2::new(1.0, 0.0, 0.0, 1.0);
        for _ in 0..20 {
            e = quantum_step(e, &t, 0.0, &nm);
            sigma = m * sigma * m.transpose();
            let scale = sigma.abs().max();
            assert!((e.s_qq - sigma[(0, 0)]).abs() < 1e-12 * scale);
            assert!((e.s_pp - sigma[(1, 1)]).abs() < 1e-12 * scale);
            assert!((e.s_qp - 2.0 * sigma[(0, 1)]).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn kick_keeps_position_continuous() {
        let t = reference_t();
        let nm = NoiseMoments::from_values(1e-3, 2e-3, 1e-4);
        let s = EvmState::coherent(0.5, 0.1, 1e-3);
        let next = quantum_step(s, &t, 4.0, &nm);
        let free = quantum_step(s, &t, 0.0, &nm);
        // the kick only changes momenta
        assert_eq!(next.q, free.q);
        assert_eq!(next.s_qq, free.s_qq);
    }

    #[test]
    fn variances_stay_nonnegative_on_bounded_orbits() {
        let t = reference_t();
        let nm = NoiseMoments::from_values(2e-4, 2e-4, 3e-5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let v0 = rng.random_range(1.0..5.6);
            let mut s = EvmState::coherent(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), 2e-4);
            for _ in 0..3000 {
                s = quantum_step(s, &t, v0, &nm);
                if s.is_escaped() {
                    break;
                }
                assert!(s.has_physical_variances(), "negative variance at v0={v0}: {s:?}");
            }
        }
    }

    #[test]
    fn escape_detection() {
        assert!(EvmState::classical(2e6, 0.0).is_escaped());
        assert!(EvmState { s_pp: f64::NAN, ..EvmState::default() }.is_escaped());
        assert!(!EvmState::classical(1e5, -1e5).is_escaped());
    }
}
