//! Standard normal primitives with relative accuracy in the upper tail, and
//! the bounded solution `f_z` of the Stein equation
//! `f'(w) − w f(w) = 1{w ≤ z} − Φ(z)`.

use crate::error::{Error, Result};

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Beyond this point the tail underflows long before the Mills ratio does, so
/// the ratio is taken from its continued fraction instead.
const MILLS_CF_THRESHOLD: f64 = 26.0;

/// Stateless collection of normal-distribution functions.
#[derive(Clone, Copy, Debug, Default)]
pub struct NormalKernel;

impl NormalKernel {
    pub fn density(w: f64) -> f64 {
        FRAC_1_SQRT_2PI * (-0.5 * w * w).exp()
    }

    /// `1 − Φ(w)`, never formed by subtraction for positive `w`.
    pub fn upper_tail(w: f64) -> f64 {
        0.5 * libm::erfc(w / std::f64::consts::SQRT_2)
    }

    pub fn cdf(w: f64) -> f64 {
        Self::upper_tail(-w)
    }

    /// `(1 − Φ(w)) / p(w)`.
    pub fn mills_ratio(w: f64) -> f64 {
        if w > MILLS_CF_THRESHOLD {
            mills_continued_fraction(w, 40)
        } else {
            Self::upper_tail(w) / Self::density(w)
        }
    }

    /// `f_z(w)`. Both branches are written through Mills ratios so that the
    /// value stays accurate when `p(w)` underflows.
    pub fn stein_solution(z: f64, w: f64) -> f64 {
        if w <= z {
            // Φ(w)/p(w) = mills(−w)
            Self::upper_tail(z) * Self::mills_ratio(-w)
        } else {
            Self::cdf(z) * Self::mills_ratio(w)
        }
    }

    /// `(1 − Φ(w))/p(w) ≤ max{1/w, √(2π)/2}` for `w > 0`.
    pub fn mills_bound_check(w: f64) -> Result<bool> {
        if !(w > 0.0) {
            return Err(Error::OutOfDomain {
                value: w,
                low: 0.0,
                high: f64::INFINITY,
            });
        }
        Ok(Self::mills_ratio(w) <= (1.0 / w).max(SQRT_2PI / 2.0))
    }

    /// `e^{−z²/2} ≤ √(2π)(1+z)(1−Φ(z))` for `z > 0`.
    pub fn tail_exponential_bound_check(z: f64) -> Result<bool> {
        if !(z > 0.0) {
            return Err(Error::OutOfDomain {
                value: z,
                low: 0.0,
                high: f64::INFINITY,
            });
        }
        // e^{−z²/2} = √(2π) p(z), so this is 1 ≤ (1+z)·mills(z); no underflow
        // for large z
        Ok(1.0 <= (1.0 + z) * Self::mills_ratio(z))
    }

    /// Evaluates every applicable bound on `f_z` at `(z, w)`, with relative
    /// slack `rel_tol` for the places where a bound is attained in the limit.
    ///
    /// The bounds are stated for `z ≥ 0`. For `z < 0` they are applied to the
    /// reflected point, using `f_z(w) = f_{−z}(−w)`.
    pub fn stein_bound_checks(z: f64, w: f64, rel_tol: f64) -> Vec<SteinBoundCheck> {
        let (z, w) = if z < 0.0 { (-z, -w) } else { (z, w) };
        Self::stein_bound_checks_literal(z, w, rel_tol)
    }

    /// The bounds exactly as written, without reflection. Only meaningful for
    /// `z ≥ 0`; for negative `z` the `w > z` pair can fail.
    pub fn stein_bound_checks_literal(z: f64, w: f64, rel_tol: f64) -> Vec<SteinBoundCheck> {
        let f = Self::stein_solution(z, w);
        let wf = (w * f).abs();
        let f = f.abs();
        let mut out = Vec::with_capacity(2);
        let mut push = |bound, value: f64, limit: f64| {
            out.push(SteinBoundCheck {
                bound,
                value,
                limit,
                holds: value <= limit * (1.0 + rel_tol),
            })
        };
        if w < 0.0 {
            let tail = Self::upper_tail(z);
            push(SteinBound::NegativeValue, f, SQRT_2PI / 2.0 * tail);
            push(SteinBound::NegativeScaled, wf, tail);
        }
        if w > z {
            push(SteinBound::AboveValue, f, SQRT_2PI / 2.0 * Self::cdf(z));
            push(SteinBound::AboveScaled, wf, 1.0);
        }
        out
    }
}

/// The four pointwise bounds on the Stein solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SteinBound {
    /// `|f_z(w)| ≤ (√(2π)/2)(1−Φ(z))`, `w < 0`.
    NegativeValue,
    /// `|w f_z(w)| ≤ 1−Φ(z)`, `w < 0`.
    NegativeScaled,
    /// `|f_z(w)| ≤ (√(2π)/2)Φ(z)`, `w > z`.
    AboveValue,
    /// `|w f_z(w)| ≤ 1`, `w > z`.
    AboveScaled,
}

#[derive(Clone, Copy, Debug)]
pub struct SteinBoundCheck {
    pub bound: SteinBound,
    pub value: f64,
    pub limit: f64,
    pub holds: bool,
}

/// Laplace continued fraction for the Mills ratio,
/// `1/(w + 1/(w + 2/(w + 3/(w + …))))`, evaluated bottom-up.
pub fn mills_continued_fraction(w: f64, terms: usize) -> f64 {
    let mut acc = w;
    for k in (1..=terms).rev() {
        acc = w + k as f64 / acc;
    }
    1.0 / acc
}
