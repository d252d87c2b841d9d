//! Randomized property suites over the exact operators, the Gaussian kernel
//! and the subgraph lemmas. Every case draws from its own RNG stream
//! (`seed`, case index), so results do not depend on evaluation order.

use std::sync::Arc;

use rand::{Rng as _, SeedableRng};
use serde::Serialize;
use serde_json::json;

use crate::error::Result;
use crate::gaussian::NormalKernel;
use crate::mc::Rng;
use crate::numeric::rel_diff;
use crate::report::{Cell, Table};
use crate::subgraph::lemmas::{
    self, CopyPolynomial, EdgeSet, Repetition, CORRELATION_LABELS,
};
use crate::subgraph::{CopyCatalog, PatternGraph};
use crate::walsh::{CoordinateField, RademacherSpace, WalshFunctional};

/// Absolute-or-relative tolerance of the operator identities.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Coefficient tolerance for the closed-form operator comparison.
pub const COEFF_TOL: f64 = 1e-12;

/// Deliberate bug for mutation testing of the suites.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum Fault {
    #[default]
    None,
    /// Flip the sign of `L⁻¹` wherever the suites apply it.
    NegateOuInverse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SuiteConfig {
    pub cases: u64,
    pub seed: u64,
    pub fault: Fault,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            cases: 1000,
            seed: 0,
            fault: Fault::None,
        }
    }
}

impl SuiteConfig {
    pub fn case_rng(&self, stream: u64, case: u64) -> Rng {
        let mut rng = Rng::seed_from_u64(self.seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        rng.set_stream(case);
        rng
    }

    fn ou_inverse(&self, f: &WalshFunctional) -> WalshFunctional {
        let inv = f.ou_inverse();
        match self.fault {
            Fault::None => inv,
            Fault::NegateOuInverse => inv.scale(-1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Counterexample {
    pub property: String,
    pub case: u64,
    pub seed: u64,
    pub detail: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub instances: u64,
    pub failures: u64,
    /// Largest observed error (or `lhs − rhs` for inequalities).
    pub worst: f64,
    pub counterexample: Option<Counterexample>,
}

impl PropertyResult {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            instances: 0,
            failures: 0,
            worst: f64::NEG_INFINITY,
            counterexample: None,
        }
    }

    fn record(&mut self, case: u64, seed: u64, ok: bool, error: f64, detail: impl FnOnce() -> serde_json::Value) {
        self.instances += 1;
        if error > self.worst || self.worst.is_nan() {
            self.worst = error;
        }
        if !ok {
            self.failures += 1;
            if self.counterexample.is_none() {
                self.counterexample = Some(Counterexample {
                    property: self.name.clone(),
                    case,
                    seed,
                    detail: detail(),
                });
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub properties: Vec<PropertyResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(PropertyResult::passed)
    }

    pub fn first_counterexample(&self) -> Option<&Counterexample> {
        self.properties.iter().find_map(|p| p.counterexample.as_ref())
    }

    pub fn property(&self, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn merge(mut self, other: SuiteReport) -> SuiteReport {
        self.suite = format!("{}+{}", self.suite, other.suite);
        self.properties.extend(other.properties);
        self
    }

    pub fn to_table(&self, seed: u64) -> Result<Table> {
        let mut table = Table::new(["property", "instances", "failures", "worst", "passed", "seed"]);
        for p in &self.properties {
            table.push(vec![
                Cell::text(p.name.clone()),
                Cell::UInt(p.instances),
                Cell::UInt(p.failures),
                Cell::Float(p.worst),
                Cell::Bool(p.passed()),
                Cell::UInt(seed),
            ])?;
        }
        table.meta.insert("suite".into(), self.suite.clone());
        Ok(table)
    }
}

pub fn random_space(rng: &mut Rng, n_min: usize, n_max: usize, p_lo: f64, p_hi: f64) -> Arc<RademacherSpace> {
    let n = rng.random_range(n_min..=n_max);
    let probs = (0..n).map(|_| rng.random_range(p_lo..=p_hi)).collect();
    Arc::new(RademacherSpace::new(probs).expect("probabilities drawn inside (0, 1)"))
}

/// Each subset enters with probability `density` (at least one term), with a
/// coefficient uniform on `[−1, 1]`.
pub fn random_functional(rng: &mut Rng, space: &Arc<RademacherSpace>, density: f64) -> WalshFunctional {
    let full = space.full_mask();
    let mut terms: Vec<(u64, f64)> = (0..=full)
        .filter(|_| rng.random_bool(density))
        .map(|s| (s, 0.0))
        .collect();
    if terms.is_empty() {
        terms.push((rng.random_range(0..=full), 0.0));
    }
    for t in &mut terms {
        t.1 = rng.random_range(-1.0..=1.0);
    }
    WalshFunctional::from_coeffs(space.clone(), terms).expect("subsets drawn inside the space")
}

/// Centered, unit-variance functional with at least one non-constant term.
pub fn random_centered_unit(rng: &mut Rng, space: &Arc<RademacherSpace>, density: f64) -> WalshFunctional {
    loop {
        let f = random_functional(rng, space, density);
        let f = f.add_constant(-f.mean());
        let var = f.variance();
        if var > 1e-6 {
            return f.scale(1.0 / var.sqrt());
        }
    }
}

pub fn random_field(rng: &mut Rng, space: &Arc<RademacherSpace>, density: f64) -> CoordinateField {
    let entries = (0..space.len()).map(|_| random_functional(rng, space, density)).collect();
    CoordinateField::new(space.clone(), entries).expect("entries share the space")
}

fn functional_json(f: &WalshFunctional) -> serde_json::Value {
    serde_json::to_value(f).unwrap_or(serde_json::Value::Null)
}

fn max_coeff_diff(a: &WalshFunctional, b: &WalshFunctional) -> f64 {
    a.coeffs()
        .keys()
        .chain(b.coeffs().keys())
        .map(|&s| (a.coeff(s) - b.coeff(s)).abs())
        .fold(0.0, f64::max)
}

const CORE_STREAM: u64 = 1;
const GAUSS_STREAM: u64 = 2;
const LEMMA51_STREAM: u64 = 3;
const LEMMA53_STREAM: u64 = 4;
const LEMMA56_STREAM: u64 = 5;

/// Operator identities on random functionals over spaces with 2 to 10
/// coordinates and `p_k ∈ [0.1, 0.9]`, plus the Gaussian kernel bounds at
/// random points of `[−8, 8]²`.
pub fn core_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    let mut adjoint = PropertyResult::new("E<DF,u> = E[F delta(u)]");
    let mut generator = PropertyResult::new("L = -delta D");
    let mut inverse = PropertyResult::new("L L^-1 F = F (centered F)");
    let mut stein = PropertyResult::new("E<DF,-DL^-1 F> = Var F");
    let seed = config.seed;
    for case in 0..config.cases {
        let mut rng = config.case_rng(CORE_STREAM, case);
        let space = random_space(&mut rng, 2, 10, 0.1, 0.9);
        let density = rng.random_range(0.05..=0.6);
        let f = random_functional(&mut rng, &space, density);
        let u = random_field(&mut rng, &space, density * 0.5);

        let lhs = u.pair_with_gradient(&f)?.mean();
        let rhs = f.expectation(Some(&u.divergence_general()))?;
        let err = rel_diff(lhs, rhs);
        adjoint.record(case, seed, err <= IDENTITY_TOL, err, || {
            json!({"f": functional_json(&f), "lhs": lhs, "rhs": rhs})
        });

        let minus_div = f.gradient_field().divergence_general().scale(-1.0);
        let err = max_coeff_diff(&f.ou_operator(), &minus_div);
        generator.record(case, seed, err <= IDENTITY_TOL, err, || json!({"f": functional_json(&f), "max_coeff_diff": err}));

        let centered = f.add_constant(-f.mean());
        let inv = config.ou_inverse(&centered);
        let err = max_coeff_diff(&inv.ou_operator(), &centered);
        inverse.record(case, seed, err <= IDENTITY_TOL, err, || {
            json!({"f": functional_json(&centered), "max_coeff_diff": err})
        });

        let minus_grad_inv = CoordinateField::new(
            space.clone(),
            inv.gradient_field().entries().iter().map(|e| e.scale(-1.0)).collect(),
        )?;
        let lhs = minus_grad_inv.pair_with_gradient(&centered)?.mean();
        let var = centered.variance();
        let err = rel_diff(lhs, var);
        stein.record(case, seed, err <= IDENTITY_TOL, err, || {
            json!({"f": functional_json(&centered), "lhs": lhs, "variance": var})
        });
    }

    let mut kernel = PropertyResult::new("f_z bounds on [-8,8]^2");
    let mut mills = PropertyResult::new("Mills ratio bound");
    for case in 0..config.cases {
        let mut rng = config.case_rng(GAUSS_STREAM, case);
        let z: f64 = rng.random_range(-8.0..=8.0);
        let w: f64 = rng.random_range(-8.0..=8.0);
        let checks = NormalKernel::stein_bound_checks(z, w, 1e-12);
        let worst = checks.iter().map(|c| c.value - c.limit).fold(f64::NEG_INFINITY, f64::max);
        kernel.record(case, seed, checks.iter().all(|c| c.holds), worst, || {
            json!({"z": z, "w": w, "checks": format!("{checks:?}")})
        });
        let a = w.abs().max(1e-3);
        let ok = NormalKernel::mills_bound_check(a)?;
        let margin = NormalKernel::mills_ratio(a) - (1.0 / a).max(crate::gaussian::SQRT_2PI / 2.0);
        mills.record(case, seed, ok, margin, || json!({"w": a}));
    }

    Ok(SuiteReport {
        suite: "core".into(),
        properties: vec![adjoint, generator, inverse, stein, kernel, mills],
    })
}

/// Subgraph lemma checks: operator formulas against the generic chain, the
/// weight identity, the product-moment inequalities, the connected-copy sums,
/// the moment generating function comparison, the variance and the
/// `U_k` decomposition.
pub fn lemma_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    let seed = config.seed;
    let mut props = Vec::new();

    let mut grad = PropertyResult::new("D_k B_A^c formula");
    let mut ou = PropertyResult::new("-D_k L^-1 B_A^c formula");
    let cases51 = config.cases.min(500);
    for case in 0..cases51 {
        let mut rng = config.case_rng(LEMMA51_STREAM, case);
        let (space, a, k) = random_operator_instance(&mut rng);
        let f = lemmas::centered_product(&space, a)?;
        let g = f.gradient(k)?;
        let o = config.ou_inverse(&f).gradient(k)?.scale(-1.0);
        let eg = max_coeff_diff(&g, &lemmas::lemma51_gradient_walsh(&space, a, k)?);
        let eo = max_coeff_diff(&o, &lemmas::lemma51_ou_walsh(&space, a, k)?);
        let detail = || json!({"edges": space.len(), "p": space.p(0), "A": a, "k": k});
        grad.record(case, seed, eg <= COEFF_TOL, eg, detail);
        ou.record(case, seed, eo <= COEFF_TOL, eo, detail);
    }
    props.push(grad);
    props.push(ou);

    let mut weights = PropertyResult::new("operator weights sum to 1");
    for a in 1..=12usize {
        let exact = lemmas::remark52_weight_sum_exact(a)?;
        let float = lemmas::remark52_weight_sum(a);
        let ok = exact == num_rational::Ratio::from_integer(1) && (float - 1.0).abs() <= 1e-14;
        weights.record(a as u64, seed, ok, (float - 1.0).abs(), || json!({"size": a, "float": float}));
    }
    props.push(weights);

    // The (iii) lower bound is only checked for p ≤ 1/2; above that the
    // third centered moment of a single edge, pq(q − p), is negative.
    let mut corr: Vec<PropertyResult> = CORRELATION_LABELS
        .iter()
        .map(|l| {
            if *l == "(iii) lower" {
                PropertyResult::new("product moments (iii) lower [p <= 1/2]")
            } else {
                PropertyResult::new(&format!("product moments {l}"))
            }
        })
        .collect();
    let cases53 = config.cases.min(2000);
    for case in 0..cases53 {
        let mut rng = config.case_rng(LEMMA53_STREAM, case);
        let inst = random_correlation_instance(&mut rng, 0.1, 0.9);
        let report = lemmas::lemma53_check(inst.sets, &inst.family, inst.p)?;
        for (prop, check) in corr.iter_mut().zip(&report.checks) {
            if check.label == "(iii) lower" && inst.p > 0.5 {
                continue;
            }
            prop.record(case, seed, check.holds, check.lhs - check.rhs, || {
                json!({"sets": inst.sets, "family": inst.family, "p": inst.p, "lhs": check.lhs, "rhs": check.rhs})
            });
        }
    }
    props.extend(corr);

    let mut conn_i = PropertyResult::new("connected-copy sums (i)");
    let mut conn_ii = PropertyResult::new("connected-copy sums (ii)");
    let mut case = 0;
    for g in [PatternGraph::complete(2)?, PatternGraph::complete(3)?] {
        for n in 4..=6 {
            for &p in &[0.1, 0.5, 0.9] {
                let cat = CopyCatalog::enumerate(&g, n, p)?;
                for m in 1..=3 {
                    let r = lemmas::lemma55_check(&cat, m, None, Repetition::Allowed)?;
                    conn_i.record(case, seed, r.holds, r.lhs - r.rhs, || {
                        json!({"pattern": g.label(), "n": n, "p": p, "m": m, "lhs": r.lhs, "rhs": r.rhs})
                    });
                    case += 1;
                }
                for (m, mh) in [(1, 1), (2, 1)] {
                    let r = lemmas::lemma55_check(&cat, m, Some(mh), Repetition::Allowed)?;
                    conn_ii.record(case, seed, r.holds, r.lhs - r.rhs, || {
                        json!({"pattern": g.label(), "n": n, "p": p, "m": m, "m_hat": mh, "lhs": r.lhs, "rhs": r.rhs})
                    });
                    case += 1;
                }
            }
        }
    }
    props.push(conn_i);
    props.push(conn_ii);

    let mut mgf_first = PropertyResult::new("mgf comparison (first)");
    let mut mgf_second = PropertyResult::new("mgf comparison (second)");
    let cases56 = config.cases.min(200);
    for case in 0..cases56 {
        let mut rng = config.case_rng(LEMMA56_STREAM, case);
        let inst = random_mgf_instance(&mut rng)?;
        let r = lemmas::lemma56_check(&inst.catalog, &inst.a1, &inst.a2, &inst.f, inst.t)?;
        let detail = || {
            json!({"pattern": inst.catalog.pattern().label(), "n": inst.catalog.n(), "p": inst.catalog.p(),
                   "a1": inst.a1, "a2": inst.a2, "f": format!("{:?}", inst.f.terms), "t": inst.t, "report": format!("{r:?}")})
        };
        mgf_first.record(case, seed, r.first_holds(), r.first_lhs / r.first_rhs - 1.0, detail);
        mgf_second.record(case, seed, r.second_holds(), r.second_lhs / r.second_rhs - 1.0, detail);
    }
    props.push(mgf_first);
    props.push(mgf_second);

    let mut sigma = PropertyResult::new("sigma^2 equals brute force (n = 4)");
    let mut uk = PropertyResult::new("E[sqrt(pq) sum U_k] = 1");
    let mut case = 0;
    for g in [PatternGraph::complete(2)?, PatternGraph::path(3)?, PatternGraph::complete(3)?] {
        for &p in &[0.2, 0.5, 0.8] {
            let cat = CopyCatalog::enumerate(&g, 4, p)?;
            let exact = cat.sigma2_exact();
            let brute = brute_force_variance(&cat)?;
            let err = (exact - brute).abs();
            sigma.record(case, seed, err <= 1e-12, err, || json!({"pattern": g.label(), "p": p, "exact": exact, "brute": brute}));
            let cat5 = CopyCatalog::enumerate(&g, 5, p)?;
            let e = lemmas::uk_decomposition_expectation(&cat5);
            uk.record(case, seed, (e - 1.0).abs() <= 1e-12, (e - 1.0).abs(), || {
                json!({"pattern": g.label(), "n": 5, "p": p, "value": e})
            });
            case += 1;
        }
    }
    props.push(sigma);
    props.push(uk);

    Ok(SuiteReport {
        suite: "lemmas".into(),
        properties: props,
    })
}

/// Host of 1 to 16 edges with a common `p ∈ [0.1, 0.9]`, a set `A` of 1 to
/// 12 edges and an edge `k`, inside `A` three times out of four.
pub fn random_operator_instance(rng: &mut Rng) -> (Arc<RademacherSpace>, EdgeSet, usize) {
    let size = rng.random_range(1..=12usize);
    let host = rng.random_range(size..=16usize);
    let p = rng.random_range(0.1..=0.9);
    let space = Arc::new(RademacherSpace::uniform(host, p).expect("p drawn inside (0, 1)"));
    let a = random_subset(rng, host, size);
    let members: Vec<usize> = (0..host).filter(|&j| a & (1 << j) != 0).collect();
    let k = if rng.random_bool(0.75) {
        members[rng.random_range(0..members.len())]
    } else {
        rng.random_range(0..host)
    };
    (space, a, k)
}

fn random_subset(rng: &mut Rng, host: usize, size: usize) -> EdgeSet {
    let mut idx: Vec<usize> = (0..host).collect();
    for i in 0..size {
        let j = rng.random_range(i..host);
        idx.swap(i, j);
    }
    idx[..size].iter().fold(0, |m, &j| m | 1 << j)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationInstance {
    pub sets: [EdgeSet; 3],
    pub family: Vec<EdgeSet>,
    pub p: f64,
}

/// Three nonempty edge sets and a family of 1 to 4 sets in a host of at most
/// 14 edges.
pub fn random_correlation_instance(rng: &mut Rng, p_lo: f64, p_hi: f64) -> CorrelationInstance {
    let host = rng.random_range(1..=14usize);
    let draw = |rng: &mut Rng| {
        let size = rng.random_range(1..=host.min(5));
        random_subset(rng, host, size)
    };
    let sets = [draw(rng), draw(rng), draw(rng)];
    let fam_len = rng.random_range(1..=4usize);
    let family = (0..fam_len).map(|_| draw(rng)).collect();
    CorrelationInstance {
        sets,
        family,
        p: rng.random_range(p_lo..=p_hi),
    }
}

pub struct MgfInstance {
    pub catalog: CopyCatalog,
    pub a1: Vec<usize>,
    pub a2: Vec<usize>,
    pub f: CopyPolynomial,
    pub t: f64,
}

/// Random instance on a host of at most 15 edges (`n ≤ 6`).
pub fn random_mgf_instance(rng: &mut Rng) -> Result<MgfInstance> {
    let patterns = [PatternGraph::complete(2)?, PatternGraph::path(3)?, PatternGraph::complete(3)?];
    let g = &patterns[rng.random_range(0..patterns.len())];
    let n = rng.random_range(g.vertices().max(3)..=6usize);
    let p = rng.random_range(0.1..=0.9);
    let catalog = CopyCatalog::enumerate(g, n, p)?;
    let count = catalog.len();
    let pick = |rng: &mut Rng, max: usize| -> Vec<usize> {
        let len = rng.random_range(0..=max.min(count));
        let mut out: Vec<usize> = (0..len).map(|_| rng.random_range(0..count)).collect();
        out.sort_unstable();
        out.dedup();
        out
    };
    let a1 = pick(rng, 3);
    let a2 = pick(rng, 3);
    let mut terms = vec![(rng.random_range(0.0..=1.0), Vec::new())];
    for _ in 0..rng.random_range(0..=3usize) {
        if a2.is_empty() {
            break;
        }
        let len = rng.random_range(1..=a2.len());
        let s: Vec<usize> = (0..len).map(|_| a2[rng.random_range(0..a2.len())]).collect();
        terms.push((rng.random_range(0.0..=2.0), s));
    }
    let t = [0.1, 0.5, 1.0][rng.random_range(0..3)];
    Ok(MgfInstance {
        catalog,
        a1,
        a2,
        f: CopyPolynomial { terms },
        t,
    })
}

/// Variance of the copy count by summing over every host graph.
pub fn brute_force_variance(cat: &CopyCatalog) -> Result<f64> {
    let masks = cat.copy_masks()?;
    let m = cat.host_edge_count() as i32;
    if m > lemmas::MAX_ENUMERATION_EDGES as i32 {
        return Err(crate::Error::CapExceeded {
            what: "exact enumeration (edges)",
            required: m as u128,
            cap: lemmas::MAX_ENUMERATION_EDGES as u128,
        });
    }
    let p = cat.p();
    let mean = cat.mean_count();
    let mut acc = crate::numeric::KahanSum::new();
    for x in 0u64..1 << m {
        let ones = x.count_ones() as i32;
        let w = p.powi(ones) * (1.0 - p).powi(m - ones);
        let c = masks.iter().filter(|&&a| a & x == a).count() as f64 - mean;
        acc.add(w * c * c);
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_suite_passes_and_is_deterministic() {
        let config = SuiteConfig {
            cases: 60,
            seed: 7,
            fault: Fault::None,
        };
        let a = core_suite(&config).unwrap();
        assert!(a.passed(), "{:?}", a.first_counterexample());
        assert_eq!(a.properties[0].instances, 60);
        let b = core_suite(&config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn injected_fault_is_caught() {
        let config = SuiteConfig {
            cases: 20,
            seed: 7,
            fault: Fault::NegateOuInverse,
        };
        let report = core_suite(&config).unwrap();
        assert!(!report.passed());
        let cx = report.first_counterexample().unwrap();
        assert_eq!(cx.property, "L L^-1 F = F (centered F)");
        let lemmas = lemma_suite(&config).unwrap();
        assert!(!lemmas.property("-D_k L^-1 B_A^c formula").unwrap().passed());
    }

    #[test]
    fn lemma_suite_passes() {
        let config = SuiteConfig {
            cases: 40,
            seed: 3,
            fault: Fault::None,
        };
        let report = lemma_suite(&config).unwrap();
        for p in &report.properties {
            assert!(p.passed(), "{} {:?}", p.name, p.counterexample);
            assert!(p.instances > 0, "{}", p.name);
        }
    }

    #[test]
    fn generators_respect_ranges() {
        let config = SuiteConfig::default();
        for case in 0..50 {
            let mut rng = config.case_rng(99, case);
            let space = random_space(&mut rng, 2, 10, 0.1, 0.9);
            assert!((2..=10).contains(&space.len()));
            assert!(space.probs().iter().all(|&p| (0.1..=0.9).contains(&p)));
            let f = random_centered_unit(&mut rng, &space, 0.3);
            assert!(f.mean().abs() < 1e-12 && (f.variance() - 1.0).abs() < 1e-12);
            let inst = random_correlation_instance(&mut rng, 0.1, 0.9);
            let union = inst.sets.iter().chain(&inst.family).fold(0, |m, &s| m | s);
            assert!(union < 1 << 14);
        }
    }
}
