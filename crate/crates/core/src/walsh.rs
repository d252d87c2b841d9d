//! Exact discrete Malliavin calculus on a finite Rademacher space.
//!
//! A square-integrable functional of `X_0, …, X_{n-1}` is stored through its
//! chaos expansion
//!
//! ```text
//! F = Σ_S f(S) · Π_{k∈S} Y_k,      Y_k = (X_k − p_k + q_k) / (2 √(p_k q_k)),
//! ```
//!
//! with subsets `S` encoded as 64-bit masks. The family `{Y_S}` is orthonormal,
//! so the empty-set coefficient is the mean and the remaining squared
//! coefficients sum to the variance. Products re-expand through
//! `Y_k² = 1 + c_k Y_k` with `c_k = (q_k − p_k)/√(p_k q_k)`.
//!
//! Sign vectors are encoded as masks too: bit `k` set means `X_k = +1`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::KahanSum;

pub const DEFAULT_ENUMERATION_CAP: usize = 20;
pub const MAX_COORDINATES: usize = 64;

/// Finite index set with per-coordinate success probabilities.
#[derive(Clone, Debug)]
pub struct RademacherSpace {
    probs: Vec<f64>,
    enumeration_cap: usize,
}

impl PartialEq for RademacherSpace {
    fn eq(&self, other: &Self) -> bool {
        self.probs == other.probs
    }
}

impl RademacherSpace {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptySpace);
        }
        if probs.len() > MAX_COORDINATES {
            return Err(Error::CapExceeded {
                what: "subset bitmask",
                required: probs.len() as u128,
                cap: MAX_COORDINATES as u128,
            });
        }
        for (index, &value) in probs.iter().enumerate() {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::InvalidProbability { index, value });
            }
        }
        Ok(Self {
            probs,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        })
    }

    /// `n` fair coordinates.
    pub fn symmetric(n: usize) -> Result<Self> {
        Self::new(vec![0.5; n])
    }

    pub fn uniform(n: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; n])
    }

    pub fn with_enumeration_cap(mut self, cap: usize) -> Self {
        self.enumeration_cap = cap.min(MAX_COORDINATES - 1);
        self
    }

    pub fn enumeration_cap(&self) -> usize {
        self.enumeration_cap
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn p(&self, k: usize) -> f64 {
        self.probs[k]
    }

    #[inline]
    pub fn q(&self, k: usize) -> f64 {
        1.0 - self.probs[k]
    }

    /// Value of `Y_k` on `X_k = +1`, i.e. `√(q_k/p_k)`.
    #[inline]
    pub fn y_plus(&self, k: usize) -> f64 {
        (self.q(k) / self.p(k)).sqrt()
    }

    /// Value of `Y_k` on `X_k = −1`, i.e. `−√(p_k/q_k)`.
    #[inline]
    pub fn y_minus(&self, k: usize) -> f64 {
        -(self.p(k) / self.q(k)).sqrt()
    }

    #[inline]
    pub fn y(&self, k: usize, plus: bool) -> f64 {
        if plus {
            self.y_plus(k)
        } else {
            self.y_minus(k)
        }
    }

    #[inline]
    pub fn sqrt_pq(&self, k: usize) -> f64 {
        (self.p(k) * self.q(k)).sqrt()
    }

    /// `c_k` in `Y_k² = 1 + c_k Y_k`.
    #[inline]
    pub fn square_coeff(&self, k: usize) -> f64 {
        (self.q(k) - self.p(k)) / self.sqrt_pq(k)
    }

    pub fn full_mask(&self) -> u64 {
        if self.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.len()) - 1
        }
    }

    pub fn contains_mask(&self, mask: u64) -> bool {
        mask & !self.full_mask() == 0
    }

    pub fn check_coordinate(&self, k: usize) -> Result<()> {
        if k < self.len() {
            Ok(())
        } else {
            Err(Error::CoordinateOutOfRange {
                index: k,
                len: self.len(),
            })
        }
    }

    pub fn ensure_enumerable(&self, what: &'static str) -> Result<()> {
        if self.len() > self.enumeration_cap {
            return Err(Error::CapExceeded {
                what,
                required: self.len() as u128,
                cap: self.enumeration_cap as u128,
            });
        }
        Ok(())
    }

    /// Number of sign vectors, `2^n`.
    pub fn state_count(&self) -> usize {
        1usize << self.len()
    }

    /// `P(X = x)` for every sign mask `x`.
    pub fn probabilities(&self) -> Result<Vec<f64>> {
        self.ensure_enumerable("exact enumeration")?;
        let mut table = vec![1.0f64; self.state_count()];
        for k in 0..self.len() {
            let bit = 1usize << k;
            let (p, q) = (self.p(k), self.q(k));
            for (x, w) in table.iter_mut().enumerate() {
                *w *= if x & bit != 0 { p } else { q };
            }
        }
        Ok(table)
    }

    /// Sign vector as `±1` entries for a mask.
    pub fn signs(&self, mask: u64) -> Vec<i8> {
        (0..self.len())
            .map(|k| if mask >> k & 1 == 1 { 1 } else { -1 })
            .collect()
    }

    pub fn mask_from_signs(&self, x: &[i8]) -> Result<u64> {
        if x.len() != self.len() {
            return Err(Error::DimensionMismatch {
                what: "sign vector",
                expected: self.len(),
                actual: x.len(),
            });
        }
        let mut mask = 0u64;
        for (k, &s) in x.iter().enumerate() {
            match s {
                1 => mask |= 1 << k,
                -1 => {}
                other => {
                    return Err(Error::InvalidInput(format!(
                        "sign vector entry {k} is {other}, expected ±1"
                    )))
                }
            }
        }
        Ok(mask)
    }
}

/// Chaos expansion of a functional on a [`RademacherSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct WalshFunctional {
    space: Arc<RademacherSpace>,
    coeffs: BTreeMap<u64, f64>,
}

impl WalshFunctional {
    pub fn zero(space: Arc<RademacherSpace>) -> Self {
        Self {
            space,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(space: Arc<RademacherSpace>, value: f64) -> Self {
        let mut f = Self::zero(space);
        if value != 0.0 {
            f.coeffs.insert(0, value);
        }
        f
    }

    /// The standardized coordinate `Y_k`.
    pub fn coordinate(space: Arc<RademacherSpace>, k: usize) -> Result<Self> {
        space.check_coordinate(k)?;
        Self::monomial(space, 1 << k, 1.0)
    }

    /// `value · Y_S`.
    pub fn monomial(space: Arc<RademacherSpace>, subset: u64, value: f64) -> Result<Self> {
        Self::from_coeffs(space, [(subset, value)])
    }

    /// Builds a functional from `(subset, coefficient)` pairs; repeated subsets
    /// are summed.
    pub fn from_coeffs<I>(space: Arc<RademacherSpace>, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, f64)>,
    {
        let mut coeffs = BTreeMap::new();
        for (subset, value) in terms {
            if !space.contains_mask(subset) {
                return Err(Error::SubsetOutOfRange {
                    key: subset,
                    len: space.len(),
                });
            }
            *coeffs.entry(subset).or_insert(0.0) += value;
        }
        coeffs.retain(|_, v| *v != 0.0);
        Ok(Self { space, coeffs })
    }

    /// Inverse of [`WalshFunctional::values`]: recovers the expansion of the
    /// functional whose value on sign mask `x` is `values[x]`.
    pub fn from_values(space: Arc<RademacherSpace>, values: &[f64]) -> Result<Self> {
        space.ensure_enumerable("dense Walsh transform")?;
        if values.len() != space.state_count() {
            return Err(Error::DimensionMismatch {
                what: "value table",
                expected: space.state_count(),
                actual: values.len(),
            });
        }
        let mut v = values.to_vec();
        for k in 0..space.len() {
            let bit = 1usize << k;
            let (yp, spq) = (space.y_plus(k), space.sqrt_pq(k));
            for i in 0..v.len() {
                if i & bit == 0 {
                    let (minus, plus) = (v[i], v[i | bit]);
                    let slope = (plus - minus) * spq;
                    v[i] = plus - slope * yp;
                    v[i | bit] = slope;
                }
            }
        }
        let coeffs = v
            .into_iter()
            .enumerate()
            .filter(|(_, c)| *c != 0.0)
            .map(|(s, c)| (s as u64, c))
            .collect();
        Ok(Self { space, coeffs })
    }

    /// Builds a functional from a pointwise definition on sign masks.
    pub fn from_fn<F>(space: Arc<RademacherSpace>, f: F) -> Result<Self>
    where
        F: Fn(u64) -> f64,
    {
        space.ensure_enumerable("dense Walsh transform")?;
        let values: Vec<f64> = (0..space.state_count() as u64).map(f).collect();
        Self::from_values(space, &values)
    }

    pub fn space(&self) -> &Arc<RademacherSpace> {
        &self.space
    }

    pub fn coeff(&self, subset: u64) -> f64 {
        self.coeffs.get(&subset).copied().unwrap_or(0.0)
    }

    pub fn coeffs(&self) -> &BTreeMap<u64, f64> {
        &self.coeffs
    }

    pub fn terms(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.coeffs.iter().map(|(&s, &c)| (s, c))
    }

    /// Number of stored (nonzero) coefficients.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.coeffs.keys().map(|s| s.count_ones()).max().unwrap_or(0)
    }

    pub fn mean(&self) -> f64 {
        self.coeff(0)
    }

    pub fn variance(&self) -> f64 {
        self.coeffs
            .iter()
            .filter(|(s, _)| **s != 0)
            .map(|(_, c)| c * c)
            .collect::<KahanSum>()
            .value()
    }

    /// `E[F G]` from the coefficients (orthonormality), no enumeration.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.same_space(other)?;
        Ok(self
            .coeffs
            .iter()
            .filter_map(|(s, a)| other.coeffs.get(s).map(|b| a * b))
            .collect::<KahanSum>()
            .value())
    }

    /// Degree-`m` component, the discrete multiple integral `J_m(f_m)`.
    pub fn chaos(&self, m: u32) -> Self {
        self.filter(|s, _| s.count_ones() == m)
    }

    pub fn is_centered(&self, tol: f64) -> bool {
        self.mean().abs() <= tol
    }

    /// Whether some stored term involves coordinate `k` with `|c| > tol`.
    pub fn depends_on(&self, k: usize, tol: f64) -> bool {
        self.coeffs
            .iter()
            .any(|(s, c)| s >> k & 1 == 1 && c.abs() > tol)
    }

    /// Drops coefficients with `|c| <= tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        self.filter(|_, c| c.abs() > tol)
    }

    fn filter<P: Fn(u64, f64) -> bool>(&self, keep: P) -> Self {
        Self {
            space: self.space.clone(),
            coeffs: self
                .coeffs
                .iter()
                .filter(|(s, c)| keep(**s, **c))
                .map(|(s, c)| (*s, *c))
                .collect(),
        }
    }

    fn map_coeffs<M: Fn(u64, f64) -> f64>(&self, map: M) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(&s, &c)| (s, map(s, c)))
            .filter(|(_, c)| *c != 0.0)
            .collect();
        Self {
            space: self.space.clone(),
            coeffs,
        }
    }

    fn same_space(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.space, &other.space) || self.space == other.space {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map_coeffs(|_, c| c * factor)
    }

    pub fn add_constant(&self, value: f64) -> Self {
        let mut out = self.clone();
        let c = out.coeffs.entry(0).or_insert(0.0);
        *c += value;
        if *c == 0.0 {
            out.coeffs.remove(&0);
        }
        out
    }

    /// `self + factor · other`.
    pub fn axpy(&self, factor: f64, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        let mut coeffs = self.coeffs.clone();
        for (&s, &c) in &other.coeffs {
            *coeffs.entry(s).or_insert(0.0) += factor * c;
        }
        coeffs.retain(|_, v| *v != 0.0);
        Ok(Self {
            space: self.space.clone(),
            coeffs,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// Exact product. Small operands are multiplied term by term with the
    /// `Y_k²` reduction; large ones go through the dense value tables.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        let n = self.space.len();
        let sparse_cost = (self.len() as u128) * (other.len() as u128);
        let dense_cost = if n <= self.space.enumeration_cap() {
            Some((4 * (n as u128 + 1)) << n)
        } else {
            None
        };
        match dense_cost {
            Some(dense) if sparse_cost > dense => self.mul_dense(other),
            _ => Ok(self.mul_sparse(other)),
        }
    }

    fn mul_sparse(&self, other: &Self) -> Self {
        let space = &self.space;
        let mut acc: HashMap<u64, f64> = HashMap::new();
        for (&s, &a) in &self.coeffs {
            for (&t, &b) in &other.coeffs {
                let common = s & t;
                let base = s ^ t;
                let ab = a * b;
                // Y_S Y_T = Y_{S△T} Π_{k∈S∩T} (1 + c_k Y_k)
                let mut sub = common;
                loop {
                    let mut w = ab;
                    let mut rest = sub;
                    while rest != 0 {
                        let k = rest.trailing_zeros() as usize;
                        w *= space.square_coeff(k);
                        rest &= rest - 1;
                    }
                    if w != 0.0 {
                        *acc.entry(base | sub).or_insert(0.0) += w;
                    }
                    if sub == 0 {
                        break;
                    }
                    sub = (sub - 1) & common;
                }
            }
        }
        let coeffs = acc.into_iter().filter(|(_, c)| *c != 0.0).collect();
        Self {
            space: self.space.clone(),
            coeffs,
        }
    }

    fn mul_dense(&self, other: &Self) -> Result<Self> {
        let a = self.values()?;
        let b = other.values()?;
        let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Self::from_values(self.space.clone(), &prod)
    }

    /// Value table over all `2^n` sign masks, by an in-place butterfly in
    /// `O(n 2^n)`.
    pub fn values(&self) -> Result<Vec<f64>> {
        self.space.ensure_enumerable("dense evaluation")?;
        let mut v = vec![0.0f64; self.space.state_count()];
        for (&s, &c) in &self.coeffs {
            v[s as usize] = c;
        }
        for k in 0..self.space.len() {
            let bit = 1usize << k;
            let (yp, ym) = (self.space.y_plus(k), self.space.y_minus(k));
            for i in 0..v.len() {
                if i & bit == 0 {
                    let (a, b) = (v[i], v[i | bit]);
                    if b != 0.0 {
                        v[i] = a + b * ym;
                        v[i | bit] = a + b * yp;
                    } else {
                        v[i | bit] = a;
                    }
                }
            }
        }
        Ok(v)
    }

    /// `F(x)` for a sign mask.
    pub fn evaluate_mask(&self, x: u64) -> f64 {
        let space = &self.space;
        self.coeffs
            .iter()
            .map(|(&s, &c)| {
                let mut term = c;
                let mut rest = s;
                while rest != 0 {
                    let k = rest.trailing_zeros() as usize;
                    term *= space.y(k, x >> k & 1 == 1);
                    rest &= rest - 1;
                }
                term
            })
            .collect::<KahanSum>()
            .value()
    }

    /// `F(x)` for a `±1` sign vector.
    pub fn evaluate(&self, x: &[i8]) -> Result<f64> {
        let mask = self.space.mask_from_signs(x)?;
        Ok(self.evaluate_mask(mask))
    }

    /// `E[F · G]` (or `E[F]` without weight) by enumerating all sign vectors.
    pub fn expectation(&self, weight: Option<&Self>) -> Result<f64> {
        let probs = self.space.probabilities()?;
        let fv = self.values()?;
        let mut acc = KahanSum::new();
        match weight {
            Some(g) => {
                self.same_space(g)?;
                let gv = g.values()?;
                for ((p, f), g) in probs.iter().zip(&fv).zip(&gv) {
                    acc.add(p * f * g);
                }
            }
            None => {
                for (p, f) in probs.iter().zip(&fv) {
                    acc.add(p * f);
                }
            }
        }
        Ok(acc.value())
    }

    /// Discrete gradient `D_k F = √(p_k q_k)(F_k^+ − F_k^−)`. On the chaos
    /// expansion this maps `Y_S ↦ Y_{S∖{k}}` for `k ∈ S` and annihilates the
    /// remaining terms.
    pub fn gradient(&self, k: usize) -> Result<Self> {
        self.space.check_coordinate(k)?;
        let bit = 1u64 << k;
        let coeffs = self
            .coeffs
            .iter()
            .filter(|(s, _)| *s & bit != 0)
            .map(|(s, c)| (s & !bit, *c))
            .collect();
        Ok(Self {
            space: self.space.clone(),
            coeffs,
        })
    }

    pub fn gradient_field(&self) -> CoordinateField {
        let entries = (0..self.space.len())
            .map(|k| self.gradient(k).expect("coordinate in range"))
            .collect();
        CoordinateField {
            space: self.space.clone(),
            entries,
        }
    }

    /// Ornstein–Uhlenbeck generator: degree-`m` chaos scaled by `−m`.
    pub fn ou_operator(&self) -> Self {
        self.map_coeffs(|s, c| -(s.count_ones() as f64) * c)
    }

    /// Pseudo-inverse `L⁻¹`: degree-`m` chaos scaled by `−1/m`, mean dropped.
    pub fn ou_inverse(&self) -> Self {
        self.ou_inverse_flagged().0
    }

    /// [`WalshFunctional::ou_inverse`] plus a flag telling whether a nonzero
    /// mean had to be dropped.
    pub fn ou_inverse_flagged(&self) -> (Self, bool) {
        let dropped = self.mean() != 0.0;
        if dropped {
            log::warn!(
                "L⁻¹ applied to a functional with mean {}; dropping it",
                self.mean()
            );
        }
        let out = self
            .filter(|s, _| s != 0)
            .map_coeffs(|s, c| -c / s.count_ones() as f64);
        (out, dropped)
    }

    /// `⟨DF, −DL⁻¹F⟩ = Σ_k D_kF · (−D_k L⁻¹ F)`.
    pub fn stein_inner(&self) -> Result<Self> {
        let minus_inv = self.ou_inverse().scale(-1.0);
        self.gradient_field().dot(&minus_inv.gradient_field())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&WalshJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: WalshJson = serde_json::from_str(text)?;
        raw.try_into()
    }
}

/// JSON form: `{ "n": .., "probs": [..], "coeffs": { "<mask>": c } }`.
#[derive(Serialize, Deserialize)]
struct WalshJson {
    n: usize,
    probs: Vec<f64>,
    coeffs: BTreeMap<String, f64>,
}

impl From<&WalshFunctional> for WalshJson {
    fn from(f: &WalshFunctional) -> Self {
        Self {
            n: f.space.len(),
            probs: f.space.probs().to_vec(),
            coeffs: f.terms().map(|(s, c)| (s.to_string(), c)).collect(),
        }
    }
}

impl TryFrom<WalshJson> for WalshFunctional {
    type Error = Error;

    fn try_from(raw: WalshJson) -> Result<Self> {
        if raw.n != raw.probs.len() {
            return Err(Error::DimensionMismatch {
                what: "probs",
                expected: raw.n,
                actual: raw.probs.len(),
            });
        }
        let space = Arc::new(RademacherSpace::new(raw.probs)?);
        let mut terms = Vec::with_capacity(raw.coeffs.len());
        for (key, value) in raw.coeffs {
            let mask = key
                .parse::<u64>()
                .map_err(|e| Error::InvalidInput(format!("subset key {key:?}: {e}")))?;
            terms.push((mask, value));
        }
        WalshFunctional::from_coeffs(space, terms)
    }
}

impl Serialize for WalshFunctional {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        WalshJson::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for WalshFunctional {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = WalshJson::deserialize(deserializer)?;
        raw.try_into().map_err(serde::de::Error::custom)
    }
}

/// A vector `u = (u_0, …, u_{n-1})` of functionals, one per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateField {
    space: Arc<RademacherSpace>,
    entries: Vec<WalshFunctional>,
}

impl CoordinateField {
    pub fn new(space: Arc<RademacherSpace>, entries: Vec<WalshFunctional>) -> Result<Self> {
        if entries.len() != space.len() {
            return Err(Error::DimensionMismatch {
                what: "coordinate field",
                expected: space.len(),
                actual: entries.len(),
            });
        }
        if entries.iter().any(|e| **e.space() != *space) {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self { space, entries })
    }

    pub fn from_value_tables(space: Arc<RademacherSpace>, tables: &[Vec<f64>]) -> Result<Self> {
        let entries = tables
            .iter()
            .map(|t| WalshFunctional::from_values(space.clone(), t))
            .collect::<Result<Vec<_>>>()?;
        Self::new(space, entries)
    }

    pub fn space(&self) -> &Arc<RademacherSpace> {
        &self.space
    }

    pub fn entries(&self) -> &[WalshFunctional] {
        &self.entries
    }

    pub fn entry(&self, k: usize) -> &WalshFunctional {
        &self.entries[k]
    }

    /// First coordinate `k` whose entry depends on `X_k` beyond `tol`.
    pub fn first_self_dependence(&self, tol: f64) -> Option<usize> {
        self.entries
            .iter()
            .enumerate()
            .find(|(k, e)| e.depends_on(*k, tol))
            .map(|(k, _)| k)
    }

    pub fn is_privault_admissible(&self, tol: f64) -> bool {
        self.first_self_dependence(tol).is_none()
    }

    /// `δ(u) = Σ_k Y_k u_k`, valid when no `u_k` depends on `X_k`.
    pub fn divergence(&self) -> Result<WalshFunctional> {
        self.divergence_with_tolerance(0.0)
    }

    /// Privault form, treating coefficients up to `tol` on `X_k` in `u_k` as
    /// roundoff (they are dropped before multiplying).
    pub fn divergence_with_tolerance(&self, tol: f64) -> Result<WalshFunctional> {
        if let Some(k) = self.first_self_dependence(tol) {
            return Err(Error::Precondition(format!(
                "u_{k} depends on coordinate {k}; the Σ Y_k u_k form does not apply"
            )));
        }
        let mut out = WalshFunctional::zero(self.space.clone());
        for (k, u) in self.entries.iter().enumerate() {
            let bit = 1u64 << k;
            let shifted = u
                .terms()
                .filter(|(s, _)| s & bit == 0)
                .map(|(s, c)| (s | bit, c));
            let yk_u = WalshFunctional::from_coeffs(self.space.clone(), shifted)?;
            out = out.add(&yk_u)?;
        }
        Ok(out)
    }

    /// Adjoint of the gradient for an arbitrary field:
    /// `δ(u) = Σ_k Y_k E_k[u_k]`, where `E_k` integrates out `X_k`.
    pub fn divergence_general(&self) -> WalshFunctional {
        let mut coeffs: BTreeMap<u64, f64> = BTreeMap::new();
        for (k, u) in self.entries.iter().enumerate() {
            let bit = 1u64 << k;
            for (s, c) in u.terms().filter(|(s, _)| s & bit == 0) {
                *coeffs.entry(s | bit).or_insert(0.0) += c;
            }
        }
        coeffs.retain(|_, c| *c != 0.0);
        WalshFunctional {
            space: self.space.clone(),
            coeffs,
        }
    }

    /// Privault form when admissible (up to `tol`), general adjoint otherwise.
    pub fn divergence_auto(&self, tol: f64) -> WalshFunctional {
        if self.is_privault_admissible(tol) {
            self.divergence_with_tolerance(tol)
                .expect("admissibility checked")
        } else {
            self.divergence_general()
        }
    }

    /// Pointwise scalar product `Σ_k u_k v_k`.
    pub fn dot(&self, other: &Self) -> Result<WalshFunctional> {
        if self.entries.len() != other.entries.len() {
            return Err(Error::DimensionMismatch {
                what: "coordinate field",
                expected: self.entries.len(),
                actual: other.entries.len(),
            });
        }
        let mut out = WalshFunctional::zero(self.space.clone());
        for (u, v) in self.entries.iter().zip(&other.entries) {
            if u.is_empty() || v.is_empty() {
                continue;
            }
            out = out.add(&u.mul(v)?)?;
        }
        Ok(out)
    }

    /// `⟨DF, u⟩`.
    pub fn pair_with_gradient(&self, f: &WalshFunctional) -> Result<WalshFunctional> {
        f.gradient_field().dot(self)
    }
}
