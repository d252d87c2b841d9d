use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::factorial;
use crate::report::{format_float, Cell, Table};

use super::catalog::CopyCatalog;
use super::pattern::{check_np, PatternGraph};

/// Everything the subgraph-count bounds need, in one place.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgraphBoundInputs {
    pub label: String,
    pub vertices: usize,
    pub edges: usize,
    pub aut: u64,
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub copies: u64,
    pub psi_min: f64,
    pub sigma2: f64,
    pub d_neighbors: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoremRow {
    pub t: f64,
    pub s: f64,
    pub ln_s: f64,
    pub rhs: f64,
    pub ln_rhs: f64,
    /// `n ≥ 4v²`, under which the variance lower bound and the theorem apply.
    pub certified: bool,
}

impl TheoremRow {
    pub fn informative(&self) -> bool {
        self.rhs <= 1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorollaryRow {
    pub t: f64,
    pub constant: f64,
    pub ln_constant: f64,
    pub rhs: f64,
    pub ln_rhs: f64,
    pub n_condition: bool,
    pub range_condition: bool,
    pub growth_condition: bool,
}

impl CorollaryRow {
    pub fn admissible(&self) -> bool {
        self.n_condition && self.range_condition && self.growth_condition
    }

    pub fn informative(&self) -> bool {
        self.admissible() && self.rhs <= 1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZhangRow {
    pub t: f64,
    /// Piecewise form; `None` at `p = 1/2`, where it is not defined.
    pub piecewise: Option<f64>,
    pub simplified: f64,
    /// Inside the stated range `t ≤ q p^e n² / √Ψ_min` with `(1+t²) b_n ≤ 1`.
    pub in_range: bool,
}

impl SubgraphBoundInputs {
    pub fn from_catalog(cat: &CopyCatalog) -> Result<Self> {
        let g = cat.pattern();
        Ok(Self {
            label: g.label(),
            vertices: g.vertices(),
            edges: g.edge_count(),
            aut: g.aut(),
            n: cat.n(),
            p: cat.p(),
            q: cat.q(),
            copies: cat.len() as u64,
            psi_min: g.psi_min(cat.n(), cat.p())?,
            sigma2: cat.sigma2_exact(),
            d_neighbors: cat.d() as u64,
        })
    }

    /// Inputs with caller-supplied `σ²` and `D`, for hosts too large to
    /// enumerate.
    pub fn from_parts(g: &PatternGraph, n: usize, p: f64, sigma2: f64, d_neighbors: u64) -> Result<Self> {
        check_np(n, p)?;
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidInput(format!("sigma2 must be positive, got {sigma2}")));
        }
        Ok(Self {
            label: g.label(),
            vertices: g.vertices(),
            edges: g.edge_count(),
            aut: g.aut(),
            n,
            p,
            q: 1.0 - p,
            copies: CopyCatalog::closed_form_count(g, n).map_or(u64::MAX, |c| c.min(u64::MAX as u128) as u64),
            psi_min: g.psi_min(n, p)?,
            sigma2,
            d_neighbors,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    fn ln_v_factorial(&self) -> f64 {
        factorial(self.vertices as u64).ln()
    }

    pub fn ln_c_g0(&self) -> f64 {
        let e = self.edges as f64;
        (4.5 + 7.5 * e) * LN_2 + 4.0 * self.ln_v_factorial() + e.ln() - 1.5 * (self.aut as f64).ln()
    }

    pub fn c_g0(&self) -> f64 {
        self.ln_c_g0().exp()
    }

    /// `c_{G₀}` evaluated by direct multiplication, as a cross-check on the
    /// log-space route.
    pub fn c_g0_direct(&self) -> f64 {
        let e = self.edges as f64;
        2f64.powf(4.5 + 7.5 * e) * factorial(self.vertices as u64).powi(4) * e / (self.aut as f64).powf(1.5)
    }

    pub fn c_hat(&self) -> f64 {
        let v = self.vertices as f64;
        2f64.sqrt() * factorial(self.vertices as u64).sqrt() * v * v * self.edges as f64 / (self.aut as f64).sqrt()
    }

    pub fn ln_c_k(&self, k: u32) -> f64 {
        let k = k as f64;
        (k - 1.0) * self.ln_v_factorial() + 0.5 * k * (k - 1.0) * self.edges as f64 * LN_2 - k * (self.aut as f64).ln()
    }

    pub fn c_k(&self, k: u32) -> f64 {
        self.ln_c_k(k).exp()
    }

    pub fn certified(&self) -> bool {
        self.n >= 4 * self.vertices * self.vertices
    }

    /// `q/(2 v! aut) · n^{2v} p^{2e} / Ψ_min`.
    pub fn sigma2_lower_bound(&self) -> f64 {
        let ln = self.q.ln() - LN_2 - self.ln_v_factorial() - (self.aut as f64).ln()
            + 2.0 * self.vertices as f64 * (self.n as f64).ln()
            + 2.0 * self.edges as f64 * self.p.ln()
            - self.psi_min.ln();
        ln.exp()
    }

    fn check_t(t: f64) -> Result<()> {
        if t >= 0.0 {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                value: t,
                low: 0.0,
                high: f64::INFINITY,
            })
        }
    }

    /// `ln s(t)` with `s(t) = (1 + t/min{√Ψ_min, 1}) / √(qΨ_min) · e^{5Dt/σ}`.
    pub fn ln_s(&self, t: f64) -> f64 {
        let m = self.psi_min.sqrt().min(1.0);
        (t / m).ln_1p() - 0.5 * (self.q * self.psi_min).ln() + 5.0 * self.d_neighbors as f64 * t / self.sigma()
    }

    pub fn s(&self, t: f64) -> f64 {
        self.ln_s(t).exp()
    }

    pub fn theorem_bound(&self, t: f64) -> Result<TheoremRow> {
        Self::check_t(t)?;
        let ln_s = self.ln_s(t);
        let s = ln_s.exp();
        let ln_c = self.ln_c_g0();
        let ln_rhs = 50f64.ln() + ln_c + ln_c.exp() * t * t * s + (t * t).ln_1p() + ln_s;
        Ok(TheoremRow {
            t,
            s,
            ln_s,
            rhs: ln_rhs.exp(),
            ln_rhs,
            certified: self.certified(),
        })
    }

    pub fn corollary_t_limit(&self, c1: f64) -> f64 {
        c1 * (self.n as f64).powi(2) * self.p.powi(self.edges as i32) * self.q.sqrt() / self.psi_min.sqrt()
    }

    pub fn ln_corollary_constant(&self, c1: f64, c2: f64) -> f64 {
        let ln_c = self.ln_c_g0();
        100f64.ln() + c1.ln_1p() + ln_c + 5.0 * c1 * self.c_hat() + c2 * ln_c.exp()
    }

    /// `100 (1+c₁) c_{G₀} e^{5c₁ĉ + c₂c}` by direct multiplication; overflows
    /// to infinity for most patterns.
    pub fn corollary_constant_direct(&self, c1: f64, c2: f64) -> f64 {
        let c = self.c_g0_direct();
        100.0 * (1.0 + c1) * c * (5.0 * c1 * self.c_hat() + c2 * c).exp()
    }

    pub fn corollary_bound(&self, t: f64, c1: f64, c2: f64) -> Result<CorollaryRow> {
        Self::check_t(t)?;
        if !(c1 > 0.0 && c2 > 0.0) {
            return Err(Error::InvalidInput(format!("c1 and c2 must be positive, got {c1}, {c2}")));
        }
        let ln_constant = self.ln_corollary_constant(c1, c2);
        let ln_rhs = ln_constant + (t * t * t).ln_1p() - 0.5 * (self.q * self.psi_min).ln();
        Ok(CorollaryRow {
            t,
            constant: ln_constant.exp(),
            ln_constant,
            rhs: ln_rhs.exp(),
            ln_rhs,
            n_condition: self.certified(),
            range_condition: t <= self.corollary_t_limit(c1),
            growth_condition: t * t * self.s(t) <= c2,
        })
    }

    pub fn zhang_bound(&self, t: f64, constant: f64) -> Result<ZhangRow> {
        Self::check_t(t)?;
        let (p, q, psi) = (self.p, self.q, self.psi_min);
        let b_n = if p < 0.5 {
            Some((1.0 + t) / psi.sqrt())
        } else if p > 0.5 {
            Some((1.0 + t / q.sqrt()) / (self.n as f64 * p.sqrt()))
        } else {
            None
        };
        let t_max = q * p.powi(self.edges as i32) * (self.n as f64).powi(2) / psi.sqrt();
        Ok(ZhangRow {
            t,
            piecewise: b_n.map(|b| constant * (1.0 + t * t) * b),
            simplified: 2.0 * constant * (1.0 + t * t) * (1.0 + t / q.sqrt()) / (q * psi).sqrt(),
            in_range: b_n.is_some_and(|b| t <= t_max && (1.0 + t * t) * b <= 1.0),
        })
    }

    /// Simplified comparison rate over the corollary rate,
    /// `2(1+t²)(1+t/√q)/(1+t³)`; both share the factor `1/√(qΨ_min)` and the
    /// constants are left out.
    pub fn rate_ratio(&self, t: f64) -> f64 {
        2.0 * (1.0 + t * t) * (1.0 + t / self.q.sqrt()) / (1.0 + t * t * t)
    }

    /// Rows of [`BOUND_COLUMNS`] for each `t`.
    pub fn bound_rows(&self, ts: &[f64], c1: f64, c2: f64, zhang_c: f64) -> Result<Vec<Vec<Cell>>> {
        let mut rows = Vec::with_capacity(ts.len());
        for &t in ts {
            let th = self.theorem_bound(t)?;
            let co = self.corollary_bound(t, c1, c2)?;
            let zh = self.zhang_bound(t, zhang_c)?;
            let ratio = self.rate_ratio(t);
            rows.push(vec![
                Cell::from(self.n),
                Cell::Float(self.p),
                Cell::Float(t),
                Cell::Float(th.rhs),
                Cell::Float(co.rhs),
                zh.piecewise.map_or(Cell::Empty, Cell::Float),
                Cell::Float(zh.simplified),
                Cell::Bool(th.informative()),
                Cell::Float(th.ln_rhs / std::f64::consts::LN_10),
                Cell::Float(co.ln_rhs / std::f64::consts::LN_10),
                Cell::Bool(co.admissible()),
                Cell::Bool(co.informative()),
                Cell::Bool(th.certified),
                Cell::Float(ratio),
                Cell::Float(ratio * self.q.sqrt()),
                Cell::Float(self.psi_min),
                Cell::Float(self.sigma2),
                Cell::UInt(self.d_neighbors),
            ]);
        }
        Ok(rows)
    }

    /// Constants that describe the instance, for table metadata.
    pub fn meta(&self) -> Vec<(&'static str, String)> {
        vec![
            ("pattern", self.label.clone()),
            ("vertices", self.vertices.to_string()),
            ("edges", self.edges.to_string()),
            ("aut", self.aut.to_string()),
            ("copies", self.copies.to_string()),
            ("c_g0", format_float(self.c_g0())),
            ("c_hat", format_float(self.c_hat())),
            ("sigma2_lower_bound", format_float(self.sigma2_lower_bound())),
        ]
    }

    pub fn bound_table(&self, ts: &[f64], c1: f64, c2: f64, zhang_c: f64) -> Result<Table> {
        let mut table = Table::new(BOUND_COLUMNS);
        for row in self.bound_rows(ts, c1, c2, zhang_c)? {
            table.push(row)?;
        }
        for (k, v) in self.meta() {
            table.meta.insert(k.to_string(), v);
        }
        table.meta.insert("c1".into(), format_float(c1));
        table.meta.insert("c2".into(), format_float(c2));
        table.meta.insert("zhang_c".into(), format!("{} (no known value)", format_float(zhang_c)));
        Ok(table)
    }
}

pub const BOUND_COLUMNS: [&str; 18] = [
    "n",
    "p",
    "t",
    "theorem_rhs",
    "corollary_rhs",
    "zhang_piecewise",
    "zhang_simplified",
    "informative_flag",
    "log10_theorem_rhs",
    "log10_corollary_rhs",
    "corollary_admissible",
    "corollary_informative",
    "certified",
    "rate_ratio",
    "rate_ratio_sqrt_q",
    "psi_min",
    "sigma2",
    "d",
];

#[cfg(test)]
mod tests {
    use super::*;

    fn k3_inputs(n: usize, p: f64) -> SubgraphBoundInputs {
        let cat = CopyCatalog::enumerate(&PatternGraph::complete(3).unwrap(), n, p).unwrap();
        SubgraphBoundInputs::from_catalog(&cat).unwrap()
    }

    #[test]
    fn constants_for_k3() {
        let k = k3_inputs(10, 0.3);
        let expected = 2f64.powi(27) * 1296.0 * 3.0 / 6f64.powf(1.5);
        assert!((k.c_g0() - expected).abs() <= 1e-12 * expected);
        assert!((k.c_g0_direct() - expected).abs() <= 1e-12 * expected);
        assert!((k.c_g0() - 3.55e10).abs() < 0.01e10);
        let c_hat = 2f64.sqrt() * 6f64.sqrt() * 9.0 * 3.0 / 6f64.sqrt();
        assert!((k.c_hat() - c_hat).abs() < 1e-12 * c_hat);
        assert!((k.c_k(1) - 1.0 / 6.0).abs() < 1e-15);
        assert!((k.c_k(2) - 6.0 * 8.0 / 36.0).abs() < 1e-13);
    }

    #[test]
    fn theorem_bound_shape() {
        let k = k3_inputs(36, 0.3);
        let row = k.theorem_bound(0.0).unwrap();
        let at_zero = 50.0 * k.c_g0() / (k.q * k.psi_min).sqrt();
        assert!((row.rhs - at_zero).abs() <= 1e-12 * at_zero);
        assert!(row.certified && !row.informative());
        let mut last = 0.0;
        for i in 0..40 {
            let r = k.theorem_bound(i as f64 * 0.05).unwrap().ln_rhs;
            assert!(r >= last);
            last = r;
        }
        assert!(k.theorem_bound(-0.1).is_err());
        assert!(!k3_inputs(35, 0.3).certified());
    }

    #[test]
    fn corollary_flags_and_constant_routes() {
        let k = k3_inputs(36, 0.3);
        let row = k.corollary_bound(0.0, 1.0, 1.0).unwrap();
        assert!(row.admissible());
        assert!(row.rhs.is_infinite() && row.ln_rhs.is_finite());
        let limit = k.corollary_t_limit(1.0);
        let above = k.corollary_bound(limit * (1.0 + 1e-9), 1.0, 1e12).unwrap();
        assert!(!above.range_condition && !above.admissible());
        let below = k.corollary_bound(limit * (1.0 - 1e-9), 1.0, 1e12).unwrap();
        assert!(below.range_condition);

        let k2 = SubgraphBoundInputs::from_catalog(
            &CopyCatalog::enumerate(&PatternGraph::complete(2).unwrap(), 16, 0.4).unwrap(),
        )
        .unwrap();
        assert!(k2.corollary_constant_direct(1.0, 1.0).is_infinite());
        assert!(k2.ln_corollary_constant(1.0, 1.0) > f64::MAX.ln());
        for c2 in [1e-4, 1e-3, 1e-2] {
            let a = k2.ln_corollary_constant(1.0, c2).exp();
            let b = k2.corollary_constant_direct(1.0, c2);
            assert!((a - b).abs() <= 1e-12 * b, "{a} {b}");
        }
    }

    #[test]
    fn zhang_forms() {
        let low = k3_inputs(20, 0.25);
        for t in [0.0, 0.5, 2.0] {
            let z = low.zhang_bound(t, 1.0).unwrap();
            let b = (1.0 + t) / low.psi_min.sqrt();
            assert!((z.piecewise.unwrap() - (1.0 + t * t) * b).abs() < 1e-15);
            let r = z.simplified / (2.0 * z.piecewise.unwrap());
            assert!((1.0..=2.0).contains(&r), "{r}");
        }
        let high = k3_inputs(20, 0.75);
        assert!((high.psi_min - 400.0 * 0.75).abs() < 1e-12);
        let half = k3_inputs(20, 0.5);
        assert!(half.zhang_bound(1.0, 1.0).unwrap().piecewise.is_none());
    }

    #[test]
    fn rate_ratio_grows_like_inverse_sqrt_q() {
        let a = k3_inputs(36, 0.9);
        let b = k3_inputs(36, 0.99);
        let t = 1.0;
        assert!(b.rate_ratio(t) > a.rate_ratio(t));
        let (sa, sb) = (a.rate_ratio(t) * a.q.sqrt(), b.rate_ratio(t) * b.q.sqrt());
        assert!((sa - sb).abs() / sb < 0.25);
    }

    #[test]
    fn sigma_lower_bound_k3() {
        for p in [0.1, 0.3, 0.5, 0.9] {
            let k = k3_inputs(36, p);
            assert!(k.sigma2 >= k.sigma2_lower_bound(), "p={p}");
        }
    }

    #[test]
    fn table_round_trips() {
        let k = k3_inputs(12, 0.6);
        let table = k.bound_table(&[0.0, 0.5, 1.0], 1.0, 1.0, 1.0).unwrap();
        let back = Table::from_csv(&table.to_csv().unwrap()).unwrap();
        assert_eq!(back, table);
    }
}
