//! Globally adaptive Gauss–Kronrod (7/15) quadrature for small vector integrands.
//!
//! All components share one interval partition. The interval with the largest
//! (scaled) error estimate is bisected until every component meets its
//! tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss 7-point weights on the odd Kronrod nodes (indices 1, 3, 5, 7).
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    /// Absolute floor, as a fraction of the largest component.
    pub floor_fraction: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            floor_fraction: 1e-3,
            max_intervals: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<const N: usize> {
    pub value: [f64; N],
    pub abs_error: [f64; N],
    pub intervals: usize,
}

struct Piece<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
    key: f64,
}

impl<const N: usize> PartialEq for Piece<N> {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl<const N: usize> Eq for Piece<N> {}
impl<const N: usize> PartialOrd for Piece<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Piece<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key)
    }
}

fn gk15<const N: usize, F: Fn(f64) -> [f64; N]>(f: &F, a: f64, b: f64) -> ([f64; N], [f64; N]) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = [0.0; N];
    let mut gauss = [0.0; N];
    let fc = f(center);
    for i in 0..N {
        kronrod[i] = WGK[7] * fc[i];
        gauss[i] = WG[3] * fc[i];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for i in 0..N {
            let s = f1[i] + f2[i];
            kronrod[i] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[i] += WG[j / 2] * s;
            }
        }
    }
    let mut err = [0.0; N];
    for i in 0..N {
        kronrod[i] *= half;
        gauss[i] *= half;
        err[i] = (kronrod[i] - gauss[i]).abs();
    }
    (kronrod, err)
}

/// Integrates `f` over `[a, b]`, starting from `initial_pieces` equal subintervals.
pub fn integrate<const N: usize, F>(
    f: F,
    a: f64,
    b: f64,
    initial_pieces: usize,
    opts: QuadOptions,
) -> Result<QuadResult<N>>
where
    F: Fn(f64) -> [f64; N],
{
    let n0 = initial_pieces.max(1);
    let width = (b - a) / n0 as f64;
    let mut raw = Vec::with_capacity(n0);
    for k in 0..n0 {
        let lo = a + width * k as f64;
        let hi = if k + 1 == n0 { b } else { lo + width };
        let (v, e) = gk15(&f, lo, hi);
        raw.push((lo, hi, v, e));
    }

    let totals = |pieces: &mut dyn Iterator<Item = ([f64; N], [f64; N])>| {
        let mut v = [0.0; N];
        let mut e = [0.0; N];
        for (pv, pe) in pieces {
            for i in 0..N {
                v[i] += pv[i];
                e[i] += pe[i];
            }
        }
        (v, e)
    };
    let (mut value, mut error) = totals(&mut raw.iter().map(|r| (r.2, r.3)));

    let tolerances = |value: &[f64; N]| {
        let scale = value.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut tol = [0.0; N];
        for i in 0..N {
            tol[i] = (opts.rel_tol * value[i].abs()).max(opts.rel_tol * opts.floor_fraction * scale);
        }
        tol
    };
    let key_of = |e: &[f64; N], tol: &[f64; N]| {
        (0..N).fold(0.0f64, |m, i| {
            if tol[i] > 0.0 {
                m.max(e[i] / tol[i])
            } else {
                m.max(e[i] * 1e300)
            }
        })
    };

    let mut tol = tolerances(&value);
    let mut heap: BinaryHeap<Piece<N>> = raw
        .into_iter()
        .map(|(lo, hi, v, e)| Piece {
            a: lo,
            b: hi,
            value: v,
            error: e,
            key: key_of(&e, &tol),
        })
        .collect();

    let converged = |error: &[f64; N], tol: &[f64; N]| (0..N).all(|i| error[i] <= tol[i]);

    let mut rekey_countdown = 64;
    while !converged(&error, &tol) {
        if heap.len() >= opts.max_intervals {
            let achieved = (0..N).fold(0.0f64, |m, i| {
                if value[i] != 0.0 {
                    m.max(error[i] / value[i].abs())
                } else {
                    m
                }
            });
            return Err(Error::QuadratureDiverged {
                achieved,
                requested: opts.rel_tol,
            });
        }
        let worst = heap.pop().expect("heap holds at least one interval");
        let mid = 0.5 * (worst.a + worst.b);
        let (lv, le) = gk15(&f, worst.a, mid);
        let (rv, re) = gk15(&f, mid, worst.b);
        for i in 0..N {
            value[i] += lv[i] + rv[i] - worst.value[i];
            error[i] += le[i] + re[i] - worst.error[i];
        }
        heap.push(Piece { a: worst.a, b: mid, value: lv, error: le, key: key_of(&le, &tol) });
        heap.push(Piece { a: mid, b: worst.b, value: rv, error: re, key: key_of(&re, &tol) });

        // Tolerances drift as the value settles; refresh keys now and then.
        rekey_countdown -= 1;
        if rekey_countdown == 0 {
            rekey_countdown = 64;
            tol = tolerances(&value);
            let pieces: Vec<_> = heap.drain().collect();
            let (v, e) = totals(&mut pieces.iter().map(|p| (p.value, p.error)));
            value = v;
            error = e;
            heap = pieces
                .into_iter()
                .map(|mut p| {
                    p.key = key_of(&p.error, &tol);
                    p
                })
                .collect();
        }
    }

    Ok(QuadResult {
        value,
        abs_error: error,
        intervals: heap.len(),
    })
}
