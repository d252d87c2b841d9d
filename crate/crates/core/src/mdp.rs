//! General moderate-deviation bounds driven by a pair of `γ` envelopes.
//!
//! Given nondecreasing `γ₁, γ₂` on `[0, A]` controlling
//! `E[|1 − ⟨DF, −DL⁻¹F⟩| e^{tF}]` and `E[|δ(DF|DL⁻¹F|/√(pq))| e^{tF}]`
//! relative to `E[e^{tF}]`, the relative error of the Gaussian tail is at most
//! `25 e^{d₀}(1+z²)(γ₁(z)+γ₂(z))` on `[0, A₀(d₀)]`, and the moment generating
//! function is at most `exp{(t²/2)(1+γ₁(t)+γ₂(t))}`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::report::Table;
use crate::walsh::{CoordinateField, WalshFunctional};

pub type GammaFn = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

/// Points used to check that an envelope is nonnegative and nondecreasing.
pub const MONOTONE_CHECK_POINTS: usize = 1024;
/// Absolute tolerance of the `A₀` bisection.
pub const A_ZERO_TOL: f64 = 1e-12;
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Clone)]
pub struct GammaEnvelope {
    eval: GammaFn,
    domain_cap: f64,
    provenance: BTreeMap<String, String>,
}

impl fmt::Debug for GammaEnvelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GammaEnvelope")
            .field("domain_cap", &self.domain_cap)
            .field("provenance", &self.provenance)
            .finish_non_exhaustive()
    }
}

impl GammaEnvelope {
    /// Wraps `eval` after checking it on a uniform grid of
    /// [`MONOTONE_CHECK_POINTS`] points in `[0, domain_cap]`.
    pub fn new<F>(eval: F, domain_cap: f64) -> Result<Self>
    where
        F: Fn(f64) -> (f64, f64) + Send + Sync + 'static,
    {
        if !(domain_cap >= 0.0 && domain_cap.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "envelope domain cap must be finite and nonnegative, got {domain_cap}"
            )));
        }
        let env = Self {
            eval: Arc::new(eval),
            domain_cap,
            provenance: BTreeMap::new(),
        };
        env.check_monotone()?;
        Ok(env)
    }

    pub fn constant(g1: f64, g2: f64, domain_cap: f64) -> Result<Self> {
        Self::new(move |_| (g1, g2), domain_cap)
    }

    /// Right-continuous step envelope through `(t_i, γ(t_i))`, made monotone by
    /// a running maximum. At `t` it takes the value at the first grid point
    /// `≥ t`, so it dominates the samples it was built from.
    pub fn step(grid: &[f64], values: &[(f64, f64)]) -> Result<Self> {
        if grid.is_empty() || grid.len() != values.len() {
            return Err(Error::DimensionMismatch {
                what: "envelope table",
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if grid[0] != 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "envelope grid must start at 0 and increase strictly".into(),
            ));
        }
        let mut running = (0.0f64, 0.0f64);
        let table: Vec<(f64, f64)> = values
            .iter()
            .map(|&(a, b)| {
                running = (running.0.max(a), running.1.max(b));
                running
            })
            .collect();
        let ts = grid.to_vec();
        let cap = *ts.last().expect("nonempty grid");
        Self::new(
            move |t| {
                let j = ts.partition_point(|&g| g < t).min(ts.len() - 1);
                table[j]
            },
            cap,
        )
    }

    pub fn with_provenance(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.provenance.insert(key.into(), value.into());
        self
    }

    pub fn provenance(&self) -> &BTreeMap<String, String> {
        &self.provenance
    }

    pub fn domain_cap(&self) -> f64 {
        self.domain_cap
    }

    pub fn eval(&self, t: f64) -> (f64, f64) {
        (self.eval)(t)
    }

    pub fn sum(&self, t: f64) -> f64 {
        let (a, b) = self.eval(t);
        a + b
    }

    fn check_monotone(&self) -> Result<()> {
        let mut prev = (0.0f64, 0.0f64);
        for i in 0..MONOTONE_CHECK_POINTS {
            let t = self.domain_cap * i as f64 / (MONOTONE_CHECK_POINTS - 1) as f64;
            let (a, b) = self.eval(t);
            if !(a >= 0.0 && b >= 0.0) {
                return Err(Error::EnvelopeNotMonotone(format!(
                    "negative or NaN value ({a}, {b}) at t = {t}"
                )));
            }
            let slack = |x: f64| MONOTONE_SLACK * x.abs().max(1.0);
            if i > 0 && (a < prev.0 - slack(prev.0) || b < prev.1 - slack(prev.1)) {
                return Err(Error::EnvelopeNotMonotone(format!(
                    "decrease from ({}, {}) to ({a}, {b}) at t = {t}",
                    prev.0, prev.1
                )));
            }
            prev = (a, b);
        }
        Ok(())
    }

    /// `(t²/2)(γ₁(t)+γ₂(t))`.
    pub fn exponent(&self, t: f64) -> f64 {
        0.5 * t * t * self.sum(t)
    }

    /// `A₀(d₀) = max{0 ≤ t ≤ A : (t²/2)(γ₁+γ₂)(t) ≤ d₀}` by bisection.
    pub fn a_zero(&self, d0: f64) -> Result<f64> {
        if !(d0 >= 0.0) {
            return Err(Error::OutOfDomain {
                value: d0,
                low: 0.0,
                high: f64::INFINITY,
            });
        }
        if self.exponent(self.domain_cap) <= d0 {
            return Ok(self.domain_cap);
        }
        let (mut lo, mut hi) = (0.0, self.domain_cap);
        while hi - lo > A_ZERO_TOL {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.exponent(mid) <= d0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// Full-form bound at `z`, flagged inadmissible outside `[0, A₀(d₀)]`.
    pub fn md_bound(&self, d0: f64, z: f64) -> Result<BoundRow> {
        let a0 = self.a_zero(d0)?;
        Ok(self.md_bound_with_range(d0, a0, z))
    }

    fn md_bound_with_range(&self, d0: f64, a0: f64, z: f64) -> BoundRow {
        let rhs = 25.0 * d0.exp() * (1.0 + z * z) * self.sum(z);
        BoundRow {
            z,
            rhs,
            // A₀ is only known to the bisection tolerance
            admissible: (0.0..=a0 + A_ZERO_TOL).contains(&z),
            d0,
            theorem: TheoremForm::Full,
        }
    }

    /// Short form `25 e^{(z²/2)(γ₁+γ₂)(z)} (1+z²)(γ₁+γ₂)(z)` for `0 ≤ z ≤ A`.
    pub fn md_bound_short(&self, z: f64) -> Result<f64> {
        Ok(self.md_bound_short_row(z)?.rhs)
    }

    pub fn md_bound_short_row(&self, z: f64) -> Result<BoundRow> {
        self.check_domain(z)?;
        let d0 = self.exponent(z);
        let rhs = 25.0 * d0.exp() * (1.0 + z * z) * self.sum(z);
        Ok(BoundRow {
            z,
            rhs,
            admissible: true,
            d0,
            theorem: TheoremForm::Short,
        })
    }

    /// `exp{(t²/2)(1 + γ₁(t) + γ₂(t))}` for `0 ≤ t ≤ A`.
    pub fn mgf_bound(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok((0.5 * t * t * (1.0 + self.sum(t))).exp())
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if (0.0..=self.domain_cap).contains(&t) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                value: t,
                low: 0.0,
                high: self.domain_cap,
            })
        }
    }

    /// Full-form curve on `zs` for a fixed `d₀`.
    pub fn report_full(&self, d0: f64, zs: &[f64]) -> Result<BoundReport> {
        let a0 = self.a_zero(d0)?;
        let rows = zs
            .iter()
            .map(|&z| self.md_bound_with_range(d0, a0, z))
            .collect();
        Ok(self.report(rows, a0, TheoremForm::Full))
    }

    /// Short-form curve; grid points beyond `A` are dropped.
    pub fn report_short(&self, zs: &[f64]) -> BoundReport {
        let rows = zs
            .iter()
            .filter_map(|&z| self.md_bound_short_row(z).ok())
            .collect();
        self.report(rows, self.domain_cap, TheoremForm::Short)
    }

    fn report(&self, rows: Vec<BoundRow>, range_limit: f64, theorem: TheoremForm) -> BoundReport {
        let mut constants = BTreeMap::new();
        constants.insert("A".to_string(), self.domain_cap);
        BoundReport {
            rows,
            constants,
            provenance: self.provenance.clone(),
            range_limit,
            theorem,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TheoremForm {
    Full,
    Short,
}

impl TheoremForm {
    pub fn as_str(self) -> &'static str {
        match self {
            TheoremForm::Full => "full",
            TheoremForm::Short => "short",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(TheoremForm::Full),
            "short" => Ok(TheoremForm::Short),
            other => Err(Error::InvalidInput(format!("unknown theorem form {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundRow {
    pub z: f64,
    pub rhs: f64,
    pub admissible: bool,
    pub d0: f64,
    pub theorem: TheoremForm,
}

impl BoundRow {
    /// The bound says something only when it is at most 1.
    pub fn informative(&self) -> bool {
        self.rhs <= 1.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub rows: Vec<BoundRow>,
    pub constants: BTreeMap<String, f64>,
    pub provenance: BTreeMap<String, String>,
    pub range_limit: f64,
    pub theorem: TheoremForm,
}

pub const BOUND_COLUMNS: [&str; 5] = ["z", "rhs", "admissible", "d0", "theorem"];

impl BoundReport {
    pub fn to_table(&self) -> Table {
        let mut table = Table::new(BOUND_COLUMNS)
            .with_meta("theorem", self.theorem.as_str())
            .with_meta("range_limit", crate::report::format_float(self.range_limit));
        for (k, v) in &self.constants {
            table = table.with_meta(format!("const.{k}"), crate::report::format_float(*v));
        }
        for (k, v) in &self.provenance {
            table = table.with_meta(format!("provenance.{k}"), v);
        }
        for r in &self.rows {
            table
                .push(vec![
                    r.z.into(),
                    r.rhs.into(),
                    r.admissible.into(),
                    r.d0.into(),
                    r.theorem.as_str().into(),
                ])
                .expect("row width matches");
        }
        table
    }

    pub fn from_table(table: &Table) -> Result<Self> {
        if table.columns() != BOUND_COLUMNS {
            return Err(Error::InvalidInput(format!(
                "bound report columns {:?}",
                table.columns()
            )));
        }
        let float = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::InvalidInput(format!("bad float {s:?}")))
        };
        let mut constants = BTreeMap::new();
        let mut provenance = BTreeMap::new();
        for (k, v) in &table.meta {
            if let Some(name) = k.strip_prefix("const.") {
                constants.insert(name.to_string(), float(v)?);
            } else if let Some(name) = k.strip_prefix("provenance.") {
                provenance.insert(name.to_string(), v.clone());
            }
        }
        let theorem = TheoremForm::parse(table.meta.get("theorem").map_or("", String::as_str))?;
        let range_limit = float(table.meta.get("range_limit").map_or("", String::as_str))?;
        let bad = |what: &str| Error::InvalidInput(format!("bound report cell {what}"));
        let rows = table
            .rows()
            .iter()
            .map(|r| {
                Ok(BoundRow {
                    z: r[0].as_f64().ok_or_else(|| bad("z"))?,
                    rhs: r[1].as_f64().ok_or_else(|| bad("rhs"))?,
                    admissible: r[2].as_bool().ok_or_else(|| bad("admissible"))?,
                    d0: r[3].as_f64().ok_or_else(|| bad("d0"))?,
                    theorem: TheoremForm::parse(r[4].as_str().ok_or_else(|| bad("theorem"))?)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            rows,
            constants,
            provenance,
            range_limit,
            theorem,
        })
    }

    pub fn to_csv(&self) -> Result<String> {
        self.to_table().to_csv()
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        Self::from_table(&Table::from_csv(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        self.to_table().to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_table(&Table::from_json(text)?)
    }
}

/// The field `u_k = D_kF · |D_kL⁻¹F| / √(p_k q_k)` whose divergence enters
/// the second condition. `D_kG` never depends on `X_k`, so every entry is
/// exactly free of its own coordinate.
pub fn a2_field(f: &WalshFunctional) -> Result<CoordinateField> {
    let space = f.space().clone();
    let inv = f.ou_inverse();
    let mut tables = Vec::with_capacity(space.len());
    for k in 0..space.len() {
        let df = f.gradient(k)?.values()?;
        let dl = inv.gradient(k)?.values()?;
        let scale = 1.0 / space.sqrt_pq(k);
        tables.push(
            df.iter()
                .zip(&dl)
                .map(|(a, b)| a * b.abs() * scale)
                .collect::<Vec<f64>>(),
        );
    }
    CoordinateField::from_value_tables(space, &tables)
}

/// Exact tables behind the two conditions for one functional, reusable across
/// many `t`.
#[derive(Clone, Debug)]
pub struct GammaProfile {
    probs: Vec<f64>,
    f: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
}

/// Tolerance on `E[F] = 0` and `Var(F) = 1`.
pub const STANDARDIZED_TOL: f64 = 1e-9;

impl GammaProfile {
    pub fn new(f: &WalshFunctional) -> Result<Self> {
        if !f.is_centered(STANDARDIZED_TOL) || (f.variance() - 1.0).abs() > STANDARDIZED_TOL {
            return Err(Error::Precondition(format!(
                "functional must be standardized (mean {}, variance {})",
                f.mean(),
                f.variance()
            )));
        }
        let probs = f.space().probabilities()?;
        let values = f.values()?;
        let a1 = f
            .stein_inner()?
            .values()?
            .into_iter()
            .map(|v| (1.0 - v).abs())
            .collect();
        let delta = a2_field(f)?.divergence_auto(0.0);
        let a2 = delta.values()?.into_iter().map(f64::abs).collect();
        Ok(Self {
            probs,
            f: values,
            a1,
            a2,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// `E[e^{tF}]`.
    pub fn mgf(&self, t: f64) -> f64 {
        self.probs
            .iter()
            .zip(&self.f)
            .map(|(p, f)| p * (t * f).exp())
            .collect::<crate::numeric::KahanSum>()
            .value()
    }

    /// Smallest admissible pointwise `(γ₁(t), γ₂(t))`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let mut den = crate::numeric::KahanSum::new();
        let mut n1 = crate::numeric::KahanSum::new();
        let mut n2 = crate::numeric::KahanSum::new();
        // shift the exponent so large t does not overflow
        let shift = self.f.iter().fold(f64::NEG_INFINITY, |m, &f| m.max(t * f));
        for i in 0..self.f.len() {
            let w = self.probs[i] * (t * self.f[i] - shift).exp();
            den.add(w);
            n1.add(w * self.a1[i]);
            n2.add(w * self.a2[i]);
        }
        (n1.value() / den.value(), n2.value() / den.value())
    }

    /// Exact `P(F > z)`.
    pub fn tail_probability(&self, z: f64) -> f64 {
        self.probs
            .iter()
            .zip(&self.f)
            .filter(|(_, f)| **f > z)
            .map(|(p, _)| *p)
            .collect::<crate::numeric::KahanSum>()
            .value()
    }

    /// Running-max step envelope of the empirical `γ` over `points` equally
    /// spaced grid values in `[0, cap]`.
    pub fn envelope(&self, cap: f64, points: usize) -> Result<GammaEnvelope> {
        let points = points.max(2);
        let grid: Vec<f64> = (0..points)
            .map(|i| cap * i as f64 / (points - 1) as f64)
            .collect();
        let values: Vec<(f64, f64)> = grid.iter().map(|&t| self.at(t)).collect();
        Ok(GammaEnvelope::step(&grid, &values)?
            .with_provenance("gamma", "running maximum of exact conditional ratios"))
    }
}

/// Exact `(γ₁(t), γ₂(t))` ratios for a standardized functional.
pub fn empirical_gamma(f: &WalshFunctional, t: f64) -> Result<(f64, f64)> {
    Ok(GammaProfile::new(f)?.at(t))
}
