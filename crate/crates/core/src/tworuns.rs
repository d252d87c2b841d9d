//! Weighted 2-runs `G = Σ_i a_i ξ_i ξ_{i+1}` over fair bits `ξ_i = (X_i+1)/2`.
//!
//! The coefficient sequence has finite support; indices outside the stored
//! window carry weight zero. `F = (G − E[G])/√Var(G)` is the standardized
//! statistic.

use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::NormalKernel;
use crate::mc::{Rng, Sampler};
use crate::mdp::GammaEnvelope;
use crate::walsh::{RademacherSpace, WalshFunctional};

/// `a_i` for `i = offset, …, offset + values.len() − 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSequence {
    pub offset: i64,
    pub values: Vec<f64>,
}

impl CoefficientSequence {
    pub fn new(offset: i64, values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite coefficient {v}")));
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidInput(
                "coefficient sequence has no nonzero entry".into(),
            ));
        }
        Ok(Self { offset, values })
    }

    /// `a = 1_{1..n}`.
    pub fn indicator(n: usize) -> Result<Self> {
        Self::new(1, vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `a_i`, zero outside the window.
    pub fn get(&self, i: i64) -> f64 {
        let j = i - self.offset;
        if j < 0 {
            return 0.0;
        }
        self.values.get(j as usize).copied().unwrap_or(0.0)
    }

    /// `‖a‖_{ℓ^p}`.
    pub fn norm(&self, p: u32) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.abs().powi(p as i32)).sum();
        s.powf(1.0 / p as f64)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `Σ a_i a_{i+1}`.
    pub fn lag_one(&self) -> f64 {
        self.values.windows(2).map(|w| w[0] * w[1]).sum()
    }
}

/// `Var(G) = (3/16)Σa_i² + (1/8)Σa_i a_{i+1}`.
pub fn variance(coeffs: &CoefficientSequence) -> f64 {
    let sq: f64 = coeffs.values.iter().map(|v| v * v).sum();
    3.0 / 16.0 * sq + coeffs.lag_one() / 8.0
}

/// The two unspecified constants in `γ_n`: the prefactor and the rate in the
/// exponential factor `e^{c z/√Var(G)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaConstants {
    pub big_o: f64,
    pub c_exp: f64,
}

impl Default for GammaConstants {
    fn default() -> Self {
        Self {
            big_o: 1.0,
            c_exp: 1.0,
        }
    }
}

impl GammaConstants {
    pub fn new(big_o: f64, c_exp: f64) -> Result<Self> {
        for (name, v) in [("big_o", big_o), ("c_exp", c_exp)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { big_o, c_exp })
    }
}

/// CLI-facing configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoRunsConfig {
    pub coeffs: CoefficientSequence,
    #[serde(default = "one")]
    pub big_o: f64,
    #[serde(default = "one")]
    pub c_exp: f64,
}

fn one() -> f64 {
    1.0
}

impl TwoRunsConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        CoefficientSequence::new(cfg.coeffs.offset, cfg.coeffs.values.clone())?;
        GammaConstants::new(cfg.big_o, cfg.c_exp)?;
        Ok(cfg)
    }

    pub fn constants(&self) -> GammaConstants {
        GammaConstants {
            big_o: self.big_o,
            c_exp: self.c_exp,
        }
    }
}

/// Sign values on a contiguous index window `start, start+1, …`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignWindow {
    pub start: i64,
    pub signs: Vec<i8>,
}

impl SignWindow {
    pub fn new(start: i64, signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|s| *s != 1 && *s != -1) {
            return Err(Error::InvalidInput("window entries must be ±1".into()));
        }
        Ok(Self { start, signs })
    }

    pub fn get(&self, i: i64) -> Option<f64> {
        let j = i - self.start;
        (j >= 0)
            .then(|| self.signs.get(j as usize).map(|&s| s as f64))
            .flatten()
    }

    fn require(&self, i: i64) -> Result<f64> {
        self.get(i).ok_or_else(|| {
            Error::InvalidInput(format!(
                "sign window [{}, {}) does not cover index {i}",
                self.start,
                self.start + self.signs.len() as i64
            ))
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoRunsModel {
    coeffs: CoefficientSequence,
    var_g: f64,
    c_n: f64,
    norms: [f64; 6],
}

impl TwoRunsModel {
    pub fn new(coeffs: CoefficientSequence) -> Result<Self> {
        let coeffs = CoefficientSequence::new(coeffs.offset, coeffs.values)?;
        let var_g = variance(&coeffs);
        let norms = [1, 2, 3, 4, 5, 6].map(|p| coeffs.norm(p));
        let c_n = norms[3] * norms[3] / var_g;
        Ok(Self {
            coeffs,
            var_g,
            c_n,
            norms,
        })
    }

    pub fn coeffs(&self) -> &CoefficientSequence {
        &self.coeffs
    }

    pub fn var_g(&self) -> f64 {
        self.var_g
    }

    pub fn sd_g(&self) -> f64 {
        self.var_g.sqrt()
    }

    /// `C_n = ‖a‖²_{ℓ⁴}/Var(G)`.
    pub fn c_n(&self) -> f64 {
        self.c_n
    }

    /// `‖a‖_{ℓ^p}` for `p = 1..=6`.
    pub fn norm(&self, p: usize) -> f64 {
        self.norms[p - 1]
    }

    pub fn mean_g(&self) -> f64 {
        self.coeffs.sum() / 4.0
    }

    /// `γ_n(z) = O(1)·e^{c z/√Var(G)}(√z √C_n + (1+√z+z) C_n)`.
    pub fn gamma_n(&self, z: f64, k: GammaConstants) -> Result<f64> {
        if !(z >= 0.0) {
            return Err(Error::OutOfDomain {
                value: z,
                low: 0.0,
                high: f64::INFINITY,
            });
        }
        let c = self.c_n;
        let sz = z.sqrt();
        Ok(k.big_o * self.exp_factor(z, k) * (sz * c.sqrt() + (1.0 + sz + z) * c))
    }

    fn exp_factor(&self, t: f64, k: GammaConstants) -> f64 {
        (k.c_exp * t / self.sd_g()).exp()
    }

    /// `(1+z²) γ_n(z)`, the bound on `|P(F>z)/(1−Φ(z)) − 1|`.
    pub fn bound_rhs(&self, z: f64, k: GammaConstants) -> Result<f64> {
        Ok((1.0 + z * z) * self.gamma_n(z, k)?)
    }

    /// `min{C_n^{−1/5}, C_n^{−1/3}, C_n^{−2/5}, √Var(G)}`.
    pub fn admissible_range(&self) -> f64 {
        let c = self.c_n;
        [c.powf(-0.2), c.powf(-1.0 / 3.0), c.powf(-0.4), self.sd_g()]
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// `(C_{n,1}, C_{n,2}, C_{n,3}, C_{n,4})`
    /// `= (‖a‖₃³/V^{3/2}, ‖a‖₄²/V, ‖a‖₅^{5/2}/V^{5/4}, ‖a‖₆³/V^{3/2})`.
    pub fn norm_constants(&self) -> [f64; 4] {
        let v = self.var_g;
        [
            self.norm(3).powi(3) / v.powf(1.5),
            self.norm(4).powi(2) / v,
            self.norm(5).powf(2.5) / v.powf(1.25),
            self.norm(6).powi(3) / v.powf(1.5),
        ]
    }

    /// The intermediate envelopes written with all four norm constants,
    /// before they are collapsed onto `C_n`.
    pub fn gamma_tilde(&self, t: f64, k: GammaConstants) -> (f64, f64) {
        let [c1, c2, c3, c4] = self.norm_constants();
        let e = k.big_o * self.exp_factor(t, k);
        let st = t.sqrt();
        (
            e * (t * c1 + (1.0 + t) * c2 + st * c3 + t * c4),
            e * (st * c1.sqrt() + t * c1 + (1.0 + t) * c2),
        )
    }

    /// Final choices `γ₁ = C e^{ct}(1+√t+t)C_n`, `γ₂ = C e^{ct}(√t√C_n + (1+t)C_n)`.
    pub fn gammas(&self, t: f64, k: GammaConstants) -> (f64, f64) {
        let c = self.c_n;
        let e = k.big_o * self.exp_factor(t, k);
        let st = t.sqrt();
        (e * (1.0 + st + t) * c, e * (st * c.sqrt() + (1.0 + t) * c))
    }

    /// Envelope on `[0, admissible_range]` for the general engine.
    pub fn envelope(&self, k: GammaConstants) -> Result<GammaEnvelope> {
        let model = self.clone();
        Ok(GammaEnvelope::new(move |t| model.gammas(t, k), self.admissible_range())?
            .with_provenance("big_o", format!("{} (unspecified constant, caller supplied)", k.big_o))
            .with_provenance("c_exp", format!("{} (unspecified constant, caller supplied)", k.c_exp))
            .with_provenance("C_n", format!("{:.16e} (exact)", self.c_n)))
    }

    /// `(D_kF, −D_kL⁻¹F)` at the signs in `x`, from the closed forms
    /// `D_kF = (a_{k−1}(X_{k−1}+1) + a_k(X_{k+1}+1))/(4√V)` and
    /// `−D_kL⁻¹F = (a_{k−1}(X_{k−1}+2) + a_k(X_{k+1}+2))/(8√V)`.
    pub fn exact_operators(&self, k: i64, x: &SignWindow) -> Result<(f64, f64)> {
        let (xl, xr) = (x.require(k - 1)?, x.require(k + 1)?);
        x.require(k)?;
        let (al, ar) = (self.coeffs.get(k - 1), self.coeffs.get(k));
        let s = self.sd_g();
        Ok((
            (al * (xl + 1.0) + ar * (xr + 1.0)) / (4.0 * s),
            (al * (xl + 2.0) + ar * (xr + 2.0)) / (8.0 * s),
        ))
    }

    /// Range of `k` with `a_{k−1}` or `a_k` possibly nonzero.
    fn active_indices(&self) -> std::ops::RangeInclusive<i64> {
        self.coeffs.offset..=self.coeffs.offset + self.coeffs.len() as i64
    }

    /// `⟨DF, −DL⁻¹F⟩` from the expanded display
    /// `(1/(32V)) Σ_k [a_{k−1}²(X²_{k−1}+3X_{k−1}+2) + a_k²(X²_{k+1}+3X_{k+1}+2)
    ///  + a_{k−1}a_k(3X_{k−1}+2X_{k−1}X_{k+1}+3X_{k+1}+4)]`.
    pub fn stein_inner_display(&self, x: &SignWindow) -> Result<f64> {
        let mut acc = 0.0;
        for k in self.active_indices() {
            let (al, ar) = (self.coeffs.get(k - 1), self.coeffs.get(k));
            let xl = if al != 0.0 { x.require(k - 1)? } else { 0.0 };
            let xr = if ar != 0.0 { x.require(k + 1)? } else { 0.0 };
            acc += al * al * (xl * xl + 3.0 * xl + 2.0)
                + ar * ar * (xr * xr + 3.0 * xr + 2.0)
                + al * ar * (3.0 * xl + 2.0 * xl * xr + 3.0 * xr + 4.0);
        }
        Ok(acc / (32.0 * self.var_g))
    }

    /// `Σ_k D_kF·(−D_kL⁻¹F)` summed from [`TwoRunsModel::exact_operators`].
    pub fn stein_inner_from_operators(&self, x: &SignWindow) -> Result<f64> {
        let mut acc = 0.0;
        for k in self.active_indices() {
            if self.coeffs.get(k - 1) == 0.0 && self.coeffs.get(k) == 0.0 {
                continue;
            }
            let (d, m) = self.exact_operators(k, x)?;
            acc += d * m;
        }
        Ok(acc)
    }

    /// `F` as a Walsh functional on the fair coordinates
    /// `X_offset, …, X_{offset+len}` (coordinate `j` is `X_{offset+j}`).
    pub fn walsh_functional(&self) -> Result<WalshFunctional> {
        let n = self.coeffs.len() + 1;
        let space = Arc::new(RademacherSpace::symmetric(n)?);
        let scale = 1.0 / (4.0 * self.sd_g());
        let terms = self.coeffs.values.iter().enumerate().flat_map(|(j, &a)| {
            let (l, r) = (1u64 << j, 1u64 << (j + 1));
            [(l, a * scale), (r, a * scale), (l | r, a * scale)]
        });
        WalshFunctional::from_coeffs(space, terms)
    }

    pub fn sampler(&self) -> TwoRunsSampler {
        TwoRunsSampler::new(self)
    }
}

/// Draws `F` from `len + 1` random bits per replicate, 64 at a time.
#[derive(Clone, Debug)]
pub struct TwoRunsSampler {
    values: Vec<f64>,
    uniform: Option<f64>,
    mean_g: f64,
    inv_sd: f64,
}

impl TwoRunsSampler {
    pub fn new(model: &TwoRunsModel) -> Self {
        let values = model.coeffs.values.clone();
        let uniform = values.iter().all(|&v| v == values[0]).then_some(values[0]);
        Self {
            values,
            uniform,
            mean_g: model.mean_g(),
            inv_sd: 1.0 / model.sd_g(),
        }
    }

    /// `G` for one replicate.
    pub fn draw_g(&self, rng: &mut Rng) -> f64 {
        let m = self.values.len();
        let words = (m + 1).div_ceil(64);
        let mut next = rng.next_u64();
        let mut count = 0u64;
        let mut weighted = 0.0;
        for w in 0..words {
            let cur = next;
            next = if w + 1 < words { rng.next_u64() } else { 0 };
            // bit i of `pairs` is ξ_i ξ_{i+1} for the i-th index of this word
            let mut pairs = cur & ((cur >> 1) | (next << 63));
            let base = w * 64;
            if base + 64 > m {
                let keep = m - base;
                pairs &= if keep >= 64 { u64::MAX } else { (1u64 << keep) - 1 };
            }
            if self.uniform.is_some() {
                count += u64::from(pairs.count_ones());
            } else {
                while pairs != 0 {
                    let i = pairs.trailing_zeros() as usize;
                    weighted += self.values[base + i];
                    pairs &= pairs - 1;
                }
            }
        }
        match self.uniform {
            Some(a) => a * count as f64,
            None => weighted,
        }
    }
}

impl Sampler for TwoRunsSampler {
    fn draw(&self, rng: &mut Rng) -> f64 {
        (self.draw_g(rng) - self.mean_g) * self.inv_sd
    }
}

/// Exact law of the number of adjacent 1-pairs among `n + 1` fair bits, i.e.
/// of `G` for `a = 1_{1..n}`; entry `g` is `P(G = g)`.
pub fn indicator_pmf(n: usize) -> Vec<f64> {
    // state: (pairs so far, last bit)
    let mut end0 = vec![0.0f64; n + 1];
    let mut end1 = vec![0.0f64; n + 1];
    end0[0] = 0.5;
    end1[0] = 0.5;
    for _ in 0..n {
        let mut n0 = vec![0.0f64; n + 1];
        let mut n1 = vec![0.0f64; n + 1];
        for g in 0..=n {
            let (a, b) = (end0[g], end1[g]);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            n0[g] += 0.5 * (a + b);
            n1[g] += 0.5 * a;
            if g < n {
                n1[g + 1] += 0.5 * b;
            }
        }
        end0 = n0;
        end1 = n1;
    }
    end0.iter().zip(&end1).map(|(a, b)| a + b).collect()
}

/// Exact `P(F > z)/(1 − Φ(z))` for `a = 1_{1..n}`.
pub fn indicator_tail_ratio(n: usize, z: f64) -> Result<f64> {
    let model = TwoRunsModel::new(CoefficientSequence::indicator(n)?)?;
    let pmf = indicator_pmf(n);
    let (mean, sd) = (model.mean_g(), model.sd_g());
    let mut tail = crate::numeric::KahanSum::new();
    for (g, p) in pmf.iter().enumerate() {
        if (g as f64 - mean) / sd > z {
            tail.add(*p);
        }
    }
    Ok(tail.value() / NormalKernel::upper_tail(z))
}
