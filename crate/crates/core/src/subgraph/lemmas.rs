//! Executable forms of the auxiliary statements used for subgraph counts.
//! Edge sets are bit masks over host edge indices, so the checkers here are
//! limited to hosts with at most 64 edges.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::numeric::{binomial, binomial_u128, KahanSum};
use crate::walsh::{RademacherSpace, WalshFunctional};

use super::bounds::SubgraphBoundInputs;
use super::catalog::CopyCatalog;

pub type EdgeSet = u64;

/// Relative slack for all inequality checks in this module.
pub const LEMMA_SLACK: f64 = 1e-12;
/// Largest `|A|` for the subset sums of the second operator formula.
pub const MAX_OPERATOR_SET: u32 = 20;
/// Largest number of edges summed over by exact enumeration.
pub const MAX_ENUMERATION_EDGES: u32 = 20;
pub const DEFAULT_TUPLE_CAP: u64 = 10_000_000;

fn bit(k: usize) -> EdgeSet {
    1u64 << k
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability { index: 0, value: p })
    }
}

/// Iterates all submasks of `set`, including `0` and `set`.
fn submasks(set: EdgeSet) -> impl Iterator<Item = EdgeSet> {
    let mut next = Some(set);
    std::iter::from_fn(move || {
        let cur = next?;
        next = (cur != 0).then(|| (cur - 1) & set);
        Some(cur)
    })
}

/// `1 / (|A| · binom(|A|−1, |α|−1))`.
pub fn operator_weight(a: usize, alpha: usize) -> f64 {
    1.0 / (a as f64 * binomial(a as u64 - 1, alpha as u64 - 1))
}

/// `D_k B_A^c` at the configuration `x` (bit set = edge present).
pub fn lemma51_gradient_value(a: EdgeSet, k: usize, x: EdgeSet, p: f64) -> Result<f64> {
    check_p(p)?;
    if a & bit(k) == 0 {
        return Ok(0.0);
    }
    let rest = a & !bit(k);
    Ok(if x & rest == rest { (p * (1.0 - p)).sqrt() } else { 0.0 })
}

/// `−D_k L⁻¹ B_A^c` at `x`, summed over `{k} ⊂ α ⊂ A`.
pub fn lemma51_ou_value(a: EdgeSet, k: usize, x: EdgeSet, p: f64) -> Result<f64> {
    check_p(p)?;
    if a & bit(k) == 0 {
        return Ok(0.0);
    }
    let size = a.count_ones();
    if size > MAX_OPERATOR_SET {
        return Err(Error::CapExceeded {
            what: "operator subset sum (|A|)",
            required: size as u128,
            cap: MAX_OPERATOR_SET as u128,
        });
    }
    let rest = a & !bit(k);
    let mut acc = KahanSum::new();
    for beta in submasks(rest) {
        if x & beta == beta {
            let alpha = beta.count_ones() as usize + 1;
            acc.add(operator_weight(size as usize, alpha) * p.powi((size as usize - alpha) as i32));
        }
    }
    Ok((p * (1.0 - p)).sqrt() * acc.value())
}

pub fn lemma51_operators(a: EdgeSet, k: usize, x: EdgeSet, p: f64) -> Result<(f64, f64)> {
    Ok((lemma51_gradient_value(a, k, x, p)?, lemma51_ou_value(a, k, x, p)?))
}

fn uniform_p(space: &RademacherSpace) -> Result<f64> {
    let p = space.p(0);
    if space.probs().iter().any(|&pk| pk != p) {
        return Err(Error::Precondition("edge indicators need a common p".into()));
    }
    Ok(p)
}

/// `B_S = Π_{k∈S} (p + √(pq) Y_k)` as a Walsh expansion.
pub fn bernoulli_product(space: &Arc<RademacherSpace>, s: EdgeSet) -> Result<WalshFunctional> {
    if !space.contains_mask(s) {
        return Err(Error::SubsetOutOfRange { key: s, len: space.len() });
    }
    let p = uniform_p(space)?;
    let size = s.count_ones() as i32;
    let root = (p * (1.0 - p)).sqrt();
    WalshFunctional::from_coeffs(
        space.clone(),
        submasks(s).map(|beta| {
            let b = beta.count_ones() as i32;
            (beta, p.powi(size - b) * root.powi(b))
        }),
    )
}

/// `B_A^c = B_A − p^{|A|}`, i.e. the expansion without its constant term.
pub fn centered_product(space: &Arc<RademacherSpace>, a: EdgeSet) -> Result<WalshFunctional> {
    let b = bernoulli_product(space, a)?;
    Ok(b.add_constant(-b.mean()))
}

/// Right-hand side of the gradient formula as a Walsh expansion.
pub fn lemma51_gradient_walsh(space: &Arc<RademacherSpace>, a: EdgeSet, k: usize) -> Result<WalshFunctional> {
    space.check_coordinate(k)?;
    if a & bit(k) == 0 {
        return Ok(WalshFunctional::zero(space.clone()));
    }
    let p = uniform_p(space)?;
    Ok(bernoulli_product(space, a & !bit(k))?.scale((p * (1.0 - p)).sqrt()))
}

/// Right-hand side of the `−D_k L⁻¹` formula as a Walsh expansion: each
/// `B_{α∖{k}}` is expanded and the weighted terms are accumulated.
pub fn lemma51_ou_walsh(space: &Arc<RademacherSpace>, a: EdgeSet, k: usize) -> Result<WalshFunctional> {
    space.check_coordinate(k)?;
    if a & bit(k) == 0 {
        return Ok(WalshFunctional::zero(space.clone()));
    }
    if !space.contains_mask(a) {
        return Err(Error::SubsetOutOfRange { key: a, len: space.len() });
    }
    let p = uniform_p(space)?;
    let root = (p * (1.0 - p)).sqrt();
    let size = a.count_ones() as usize;
    let mut coeffs: BTreeMap<EdgeSet, f64> = BTreeMap::new();
    for beta in submasks(a & !bit(k)) {
        let b = beta.count_ones() as i32;
        let alpha = b as usize + 1;
        let w = root * operator_weight(size, alpha) * p.powi((size - alpha) as i32);
        for gamma in submasks(beta) {
            let g = gamma.count_ones() as i32;
            *coeffs.entry(gamma).or_insert(0.0) += w * p.powi(b - g) * root.powi(g);
        }
    }
    WalshFunctional::from_coeffs(space.clone(), coeffs)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorComparison {
    /// Largest coefficient difference between `D_k B_A^c` and its formula.
    pub gradient_diff: f64,
    /// Same for `−D_k L⁻¹ B_A^c`.
    pub ou_diff: f64,
}

fn max_coeff_diff(a: &WalshFunctional, b: &WalshFunctional) -> f64 {
    a.coeffs()
        .keys()
        .chain(b.coeffs().keys())
        .map(|&s| (a.coeff(s) - b.coeff(s)).abs())
        .fold(0.0, f64::max)
}

/// Runs the generic operators on the expansion of `B_A^c` and compares with
/// the closed forms.
pub fn lemma51_generic_comparison(space: &Arc<RademacherSpace>, a: EdgeSet, k: usize) -> Result<OperatorComparison> {
    let f = centered_product(space, a)?;
    let grad = f.gradient(k)?;
    let ou = f.ou_inverse().gradient(k)?.scale(-1.0);
    Ok(OperatorComparison {
        gradient_diff: max_coeff_diff(&grad, &lemma51_gradient_walsh(space, a, k)?),
        ou_diff: max_coeff_diff(&ou, &lemma51_ou_walsh(space, a, k)?),
    })
}

/// Total operator weight over `{k} ⊂ α ⊂ A`, summed subset by subset in
/// exact rational arithmetic.
pub fn remark52_weight_sum_exact(a: usize) -> Result<Ratio<u128>> {
    if a == 0 || a > MAX_OPERATOR_SET as usize {
        return Err(Error::OutOfDomain {
            value: a as f64,
            low: 1.0,
            high: MAX_OPERATOR_SET as f64,
        });
    }
    let mut acc = Ratio::from_integer(0u128);
    for beta in 0u64..1 << (a - 1) {
        let denom = a as u128 * binomial_u128(a as u64 - 1, beta.count_ones() as u64).unwrap_or(u128::MAX);
        acc += Ratio::new(1, denom);
    }
    Ok(acc)
}

pub fn remark52_weight_sum(a: usize) -> f64 {
    (0u64..1 << (a.max(1) - 1))
        .map(|beta| operator_weight(a, beta.count_ones() as usize + 1))
        .collect::<KahanSum>()
        .value()
}

#[derive(Clone, Debug, PartialEq)]
pub struct InequalityCheck {
    pub label: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn new(label: &'static str, lhs: f64, rhs: f64, scale: f64) -> Self {
        Self {
            label,
            lhs,
            rhs,
            holds: lhs <= rhs + LEMMA_SLACK * scale.abs().max(lhs.abs()).max(rhs.abs()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationReport {
    pub checks: Vec<InequalityCheck>,
}

impl CorrelationReport {
    pub fn holds(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn violations(&self) -> impl Iterator<Item = &InequalityCheck> {
        self.checks.iter().filter(|c| !c.holds)
    }

    pub fn check(&self, label: &str) -> Option<&InequalityCheck> {
        self.checks.iter().find(|c| c.label == label)
    }
}

/// Labels of the eight one-sided statements checked by [`lemma53_check`].
pub const CORRELATION_LABELS: [&str; 8] = [
    "(i) lower",
    "(i) upper",
    "(ii) lower",
    "(ii) upper",
    "(iii) lower",
    "(iii) upper",
    "(iv) lower",
    "(iv) upper",
];

/// `E[g(x)]` over all configurations of the edges in `support`, with every
/// other edge irrelevant to `g`.
fn enumerate_expectation(support: EdgeSet, p: f64, g: impl Fn(EdgeSet) -> f64) -> Result<f64> {
    let m = support.count_ones();
    if m > MAX_ENUMERATION_EDGES {
        return Err(Error::CapExceeded {
            what: "exact enumeration (edges)",
            required: m as u128,
            cap: MAX_ENUMERATION_EDGES as u128,
        });
    }
    let q = 1.0 - p;
    let mut acc = KahanSum::new();
    for x in submasks(support) {
        let ones = x.count_ones() as i32;
        acc.add(p.powi(ones) * q.powi(m as i32 - ones) * g(x));
    }
    Ok(acc.value())
}

fn centered(a: EdgeSet, x: EdgeSet, p: f64) -> f64 {
    (x & a == a) as u8 as f64 - p.powi(a.count_ones() as i32)
}

/// Checks the product-moment inequalities for `A₁, A₂, A₃` and the family
/// `{A_i}_{i∈I}` by exact enumeration over the edges involved. Each lower and
/// upper bound is reported separately.
pub fn lemma53_check(sets: [EdgeSet; 3], family: &[EdgeSet], p: f64) -> Result<CorrelationReport> {
    check_p(p)?;
    let [a1, a2, a3] = sets;
    let eb = |s: EdgeSet| p.powi(s.count_ones() as i32);

    let u12 = eb(a1 | a2);
    let prod = eb(a1) * eb(a2);
    let pair = enumerate_expectation(a1 | a2, p, |x| centered(a1, x, p) * centered(a2, x, p))?;
    let u123 = eb(a1 | a2 | a3);
    let triple = enumerate_expectation(a1 | a2 | a3, p, |x| {
        centered(a1, x, p) * centered(a2, x, p) * centered(a3, x, p)
    })?;
    let fam_union = family.iter().fold(0, |m, &a| m | a);
    let abs_prod = enumerate_expectation(fam_union, p, |x| {
        family.iter().map(|&a| centered(a, x, p)).product::<f64>().abs()
    })?;
    let fam_rhs = 2f64.powi(family.len() as i32) * eb(fam_union);

    Ok(CorrelationReport {
        checks: vec![
            InequalityCheck::new(CORRELATION_LABELS[0], 0.0, prod, u12),
            InequalityCheck::new(CORRELATION_LABELS[1], prod, u12, u12),
            InequalityCheck::new(CORRELATION_LABELS[2], 0.0, pair, u12),
            InequalityCheck::new(CORRELATION_LABELS[3], pair, u12, u12),
            InequalityCheck::new(CORRELATION_LABELS[4], 0.0, triple, u123),
            InequalityCheck::new(CORRELATION_LABELS[5], triple, u123, u123),
            InequalityCheck::new(CORRELATION_LABELS[6], 0.0, abs_prod, fam_rhs),
            InequalityCheck::new(CORRELATION_LABELS[7], abs_prod, fam_rhs, fam_rhs),
        ],
    })
}

/// Whether a sequence of connected copies may revisit a copy. A copy is its
/// own neighbour, so the definition read literally allows repeats.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Repetition {
    Distinct,
    Allowed,
}

/// Union edge masks of all connected-copy sequences of length `m`, with
/// multiplicities.
pub fn connected_unions(cat: &CopyCatalog, m: usize, repetition: Repetition, cap: u64) -> Result<HashMap<EdgeSet, u64>> {
    let masks = cat.copy_masks()?;
    let neighbours: Vec<Vec<u32>> = (0..cat.len()).map(|i| cat.neighbours(i)).collect();
    let mut out = HashMap::new();
    let mut seq = Vec::with_capacity(m);
    let mut visited = 0u64;

    #[allow(clippy::too_many_arguments)]
    fn rec(
        m: usize,
        masks: &[EdgeSet],
        neighbours: &[Vec<u32>],
        repetition: Repetition,
        seq: &mut Vec<u32>,
        union: EdgeSet,
        out: &mut HashMap<EdgeSet, u64>,
        visited: &mut u64,
        cap: u64,
    ) -> Result<()> {
        if seq.len() == m {
            *visited += 1;
            if *visited > cap {
                return Err(Error::CapExceeded {
                    what: "connected-copy sequences",
                    required: *visited as u128,
                    cap: cap as u128,
                });
            }
            *out.entry(union).or_insert(0) += 1;
            return Ok(());
        }
        let candidates: Vec<u32> = if seq.is_empty() {
            (0..masks.len() as u32).collect()
        } else {
            let mut c: Vec<u32> = seq.iter().flat_map(|&g| neighbours[g as usize].iter().copied()).collect();
            c.sort_unstable();
            c.dedup();
            c
        };
        for c in candidates {
            if repetition == Repetition::Distinct && seq.contains(&c) {
                continue;
            }
            seq.push(c);
            rec(m, masks, neighbours, repetition, seq, union | masks[c as usize], out, visited, cap)?;
            seq.pop();
        }
        Ok(())
    }

    if m == 0 {
        return Err(Error::InvalidInput("sequence length must be at least 1".into()));
    }
    rec(m, &masks, &neighbours, repetition, &mut seq, 0, &mut out, &mut visited, cap)?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConnectedSumReport {
    pub m: usize,
    pub m_hat: Option<usize>,
    pub repetition: Repetition,
    /// Number of sequences (or pairs of sequences) summed over.
    pub tuples: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Compares the connected-copy sum with its bound: part (i) when `m_hat` is
/// `None`, part (ii) with `m̄ = m + m̂` otherwise.
pub fn lemma55_check(cat: &CopyCatalog, m: usize, m_hat: Option<usize>, repetition: Repetition) -> Result<ConnectedSumReport> {
    let inputs = SubgraphBoundInputs::from_catalog(cat)?;
    let p = cat.p();
    let (v, e) = (inputs.vertices as f64, inputs.edges as f64);
    let nf = cat.n() as f64;
    let psi = inputs.psi_min;
    let first = connected_unions(cat, m, repetition, DEFAULT_TUPLE_CAP)?;

    let (tuples, lhs, total) = match m_hat {
        None => {
            let lhs: KahanSum = first.iter().map(|(&u, &c)| c as f64 * p.powi(u.count_ones() as i32)).collect();
            (first.values().sum::<u64>(), lhs.value(), m)
        }
        Some(mh) => {
            let second = connected_unions(cat, mh, repetition, DEFAULT_TUPLE_CAP)?;
            let mut acc = KahanSum::new();
            for (&a, &ca) in &first {
                for (&b, &cb) in &second {
                    acc.add((ca * cb) as f64 * p.powi((a | b).count_ones() as i32));
                }
            }
            let tuples = first.values().sum::<u64>() * second.values().sum::<u64>();
            (tuples, acc.value(), m + mh)
        }
    };
    let k = total as f64;
    let ln_main = k * v * nf.ln() + k * e * p.ln() + inputs.ln_c_k(total as u32);
    let ln_rhs = match m_hat {
        None => ln_main - (k - 1.0) * psi.ln(),
        Some(_) => ln_main - (k - 2.0) * psi.ln() - psi.min(1.0).ln(),
    };
    let rhs = ln_rhs.exp();
    Ok(ConnectedSumReport {
        m,
        m_hat,
        repetition,
        tuples,
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + LEMMA_SLACK),
    })
}

/// Nonnegative functional `F = Σ_j c_j Π_{Γ∈S_j} B_Γ` with `c_j ≥ 0`; an
/// empty product is the constant 1.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CopyPolynomial {
    pub terms: Vec<(f64, Vec<usize>)>,
}

impl CopyPolynomial {
    pub fn one() -> Self {
        Self {
            terms: vec![(1.0, Vec::new())],
        }
    }

    fn evaluate(&self, present: &[bool]) -> f64 {
        self.terms
            .iter()
            .filter(|(_, s)| s.iter().all(|&g| present[g]))
            .map(|(c, _)| c)
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MgfComparisonReport {
    pub t: f64,
    pub first_lhs: f64,
    pub first_rhs: f64,
    pub second_lhs: f64,
    pub second_rhs: f64,
}

impl MgfComparisonReport {
    pub fn first_holds(&self) -> bool {
        self.first_lhs <= self.first_rhs * (1.0 + LEMMA_SLACK)
    }

    pub fn second_holds(&self) -> bool {
        self.second_lhs <= self.second_rhs * (1.0 + LEMMA_SLACK)
    }

    pub fn holds(&self) -> bool {
        self.first_holds() && self.second_holds()
    }
}

/// Checks both moment-generating-function comparisons exactly, enumerating
/// every configuration of the host edges.
pub fn lemma56_check(
    cat: &CopyCatalog,
    a1: &[usize],
    a2: &[usize],
    f: &CopyPolynomial,
    t: f64,
) -> Result<MgfComparisonReport> {
    if !(t >= 0.0) {
        return Err(Error::OutOfDomain {
            value: t,
            low: 0.0,
            high: f64::INFINITY,
        });
    }
    let count = cat.len();
    if let Some(&bad) = a1.iter().chain(a2).find(|&&g| g >= count) {
        return Err(Error::InvalidInput(format!("copy {bad} outside catalog of {count}")));
    }
    for (c, s) in &f.terms {
        if !(*c >= 0.0) {
            return Err(Error::InvalidInput(format!("F coefficient {c} is negative")));
        }
        if let Some(g) = s.iter().find(|g| !a2.contains(g)) {
            return Err(Error::InvalidInput(format!("F uses copy {g}, which is not in A2")));
        }
    }
    let host = cat.host_edge_count() as u32;
    if host > MAX_ENUMERATION_EDGES {
        return Err(Error::CapExceeded {
            what: "exact enumeration (edges)",
            required: host as u128,
            cap: MAX_ENUMERATION_EDGES as u128,
        });
    }
    let masks = cat.copy_masks()?;
    let p = cat.p();
    let pe = p.powi(cat.pattern().edge_count() as i32);
    let sigma = cat.sigma2_exact().sqrt();
    let mut in_a1 = vec![false; count];
    for &g in a1 {
        in_a1[g] = true;
    }
    let mut hat_a2 = vec![false; count];
    for &g in a2 {
        for j in cat.neighbours(g) {
            hat_a2[j as usize] = true;
        }
    }
    let a1_size = in_a1.iter().filter(|&&b| b).count() as f64;
    let a1_hat_size = (0..count).filter(|&g| in_a1[g] || hat_a2[g]).count() as f64;

    let (mut ef, mut efe, mut ee, mut ew) = (KahanSum::new(), KahanSum::new(), KahanSum::new(), KahanSum::new());
    let mut present = vec![false; count];
    let full = if host == 64 { u64::MAX } else { (1u64 << host) - 1 };
    for x in submasks(full) {
        let ones = x.count_ones() as i32;
        let weight = p.powi(ones) * (1.0 - p).powi(host as i32 - ones);
        let (mut total, mut outside) = (0.0, 0.0);
        for g in 0..count {
            present[g] = masks[g] & x == masks[g];
            let c = present[g] as u8 as f64 - pe;
            total += c;
            if !in_a1[g] {
                outside += c;
            }
        }
        let fx = f.evaluate(&present);
        let e_out = (t / sigma * outside).exp();
        ef.add(weight * fx);
        efe.add(weight * fx * e_out);
        ee.add(weight * e_out);
        ew.add(weight * (t / sigma * total).exp());
    }
    let mgf = ew.value();
    Ok(MgfComparisonReport {
        t,
        first_lhs: efe.value(),
        first_rhs: ef.value() * (t / sigma * a1_hat_size).exp() * mgf,
        second_lhs: ee.value(),
        second_rhs: (t / sigma * a1_size).exp() * mgf,
    })
}

/// Contribution of one `(Γ₁, Γ₂, α)` triple at edge `k`: the weight
/// `p^{e−|α|} / (e·binom(e−1, |α|−1))` and the edge set `(Γ₁ ∪ α) ∖ {k}`.
fn for_each_v_term(cat: &CopyCatalog, mut visit: impl FnMut(f64, &[u32])) {
    let e = cat.pattern().edge_count();
    let p = cat.p();
    let mut edges = Vec::with_capacity(2 * e);
    for k in 0..cat.host_edge_count() {
        let through = cat.copies_with_edge(k);
        for &g1 in through {
            for &g2 in through {
                let others: Vec<u32> = cat.copy(g2 as usize).iter().copied().filter(|&j| j as usize != k).collect();
                for beta in 0u64..1 << others.len() {
                    let alpha = beta.count_ones() as usize + 1;
                    let w = operator_weight(e, alpha) * p.powi((e - alpha) as i32);
                    edges.clear();
                    edges.extend(cat.copy(g1 as usize).iter().copied().filter(|&j| j as usize != k));
                    for (i, &j) in others.iter().enumerate() {
                        if beta & (1 << i) != 0 {
                            edges.push(j);
                        }
                    }
                    edges.sort_unstable();
                    edges.dedup();
                    visit(w, &edges);
                }
            }
        }
    }
}

/// Exact expectation of `√(pq) Σ_k U_k` computed term by term from the
/// `V`-decomposition, using `E[B_S] = p^{|S|}`. Equals `Var(W) = 1`.
pub fn uk_decomposition_expectation(cat: &CopyCatalog) -> f64 {
    let p = cat.p();
    let mut acc = KahanSum::new();
    for_each_v_term(cat, |w, s| acc.add(w * p.powi(s.len() as i32)));
    p * (1.0 - p) / cat.sigma2_exact() * acc.value()
}

/// `√(pq) Σ_k U_k` at the configuration `x`, from the same decomposition.
pub fn uk_decomposition_value(cat: &CopyCatalog, x: EdgeSet) -> f64 {
    let p = cat.p();
    let mut acc = KahanSum::new();
    for_each_v_term(cat, |w, s| {
        if s.iter().all(|&j| x & (1u64 << j) != 0) {
            acc.add(w);
        }
    });
    p * (1.0 - p) / cat.sigma2_exact() * acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subgraph::PatternGraph;

    fn sp(n: usize, p: f64) -> Arc<RademacherSpace> {
        Arc::new(RademacherSpace::uniform(n, p).unwrap())
    }

    #[test]
    fn operator_examples() {
        let p: f64 = 0.3;
        let r = (p * (1.0 - p)).sqrt();
        assert_eq!(lemma51_operators(0b110, 0, 0b111, p).unwrap(), (0.0, 0.0));
        let (g, o) = lemma51_operators(0b1, 0, 0, p).unwrap();
        assert!((g - r).abs() < 1e-15 && (o - r).abs() < 1e-15);
        // A = {0, 1}, k = 0, edge 1 absent: only α = {0} contributes.
        let (g, o) = lemma51_operators(0b11, 0, 0b01, p).unwrap();
        assert_eq!(g, 0.0);
        assert!((o - r * p / 2.0).abs() < 1e-15);
    }

    #[test]
    fn operator_values_match_walsh_forms() {
        let space = sp(5, 0.35);
        let a = 0b10110;
        for k in 0..5 {
            let gw = lemma51_gradient_walsh(&space, a, k).unwrap();
            let ow = lemma51_ou_walsh(&space, a, k).unwrap();
            for x in 0u64..32 {
                let (g, o) = lemma51_operators(a, k, x, 0.35).unwrap();
                assert!((gw.evaluate_mask(x) - g).abs() < 1e-13);
                assert!((ow.evaluate_mask(x) - o).abs() < 1e-13);
                assert!(g >= 0.0 && o >= 0.0);
            }
        }
    }

    #[test]
    fn generic_operators_agree() {
        for &p in &[0.1, 0.5, 0.85] {
            let space = sp(7, p);
            for a in [0b1u64, 0b1011, 0b1111111, 0b1010100] {
                for k in 0..7 {
                    let c = lemma51_generic_comparison(&space, a, k).unwrap();
                    assert!(c.gradient_diff < 1e-12 && c.ou_diff < 1e-12, "{a:b} {k} {c:?}");
                }
            }
        }
    }

    #[test]
    fn centered_product_expansion() {
        let p: f64 = 0.4;
        let space = sp(3, p);
        let f = centered_product(&space, 0b111).unwrap();
        for alpha in 1u64..8 {
            let a = alpha.count_ones() as f64;
            let expected = p.powf(3.0 - a / 2.0) * (1.0 - p).powf(a / 2.0);
            assert!((f.coeff(alpha) - expected).abs() < 1e-15);
        }
        assert_eq!(f.coeff(0), 0.0);
    }

    #[test]
    fn weight_sum_is_one() {
        for a in 1..=12 {
            assert_eq!(remark52_weight_sum_exact(a).unwrap(), Ratio::from_integer(1));
            assert!((remark52_weight_sum(a) - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn correlation_examples() {
        // disjoint sets: the pair moment vanishes
        let r = lemma53_check([0b0011, 0b1100, 0b0001], &[0b1, 0b10], 0.3).unwrap();
        assert!(r.check("(ii) lower").unwrap().rhs.abs() < 1e-15);
        assert!(r.holds());
        let r = lemma53_check([0b1, 0b1, 0b1], &[0b1], 0.3).unwrap();
        let pair = r.check("(ii) upper").unwrap();
        assert!((pair.lhs - 0.21).abs() < 1e-15 && pair.rhs == 0.3);
        assert!(r.holds());
    }

    #[test]
    fn triple_moment_is_negative_above_one_half() {
        // E[(B^c)^3] = pq(q − p) for a single edge
        let r = lemma53_check([0b1, 0b1, 0b1], &[0b1], 0.7).unwrap();
        let lower = r.check("(iii) lower").unwrap();
        assert!((lower.rhs - 0.21 * (0.3 - 0.7)).abs() < 1e-15);
        assert!(!lower.holds);
        assert!(r.violations().all(|c| c.label == "(iii) lower"));
    }

    #[test]
    fn connected_sum_examples() {
        let k3 = PatternGraph::complete(3).unwrap();
        let cat = CopyCatalog::enumerate(&k3, 5, 0.5).unwrap();
        let r = lemma55_check(&cat, 1, None, Repetition::Distinct).unwrap();
        assert!((r.lhs - 1.25).abs() < 1e-15);
        assert!((r.rhs - 125.0 * 0.125 / 6.0).abs() < 1e-12);
        assert!(r.holds);

        let k2 = PatternGraph::complete(2).unwrap();
        let cat = CopyCatalog::enumerate(&k2, 4, 0.4).unwrap();
        let pairs = connected_unions(&cat, 2, Repetition::Allowed, 1000).unwrap();
        assert_eq!(pairs.values().sum::<u64>(), 6);
        let distinct = connected_unions(&cat, 2, Repetition::Distinct, 1000).unwrap();
        assert!(distinct.is_empty());
        let p3 = CopyCatalog::enumerate(&PatternGraph::path(3).unwrap(), 4, 0.4).unwrap();
        let d = p3.d() as u64;
        let pairs = connected_unions(&p3, 2, Repetition::Allowed, 1000).unwrap();
        assert_eq!(pairs.values().sum::<u64>(), p3.len() as u64 * d);
        let distinct = connected_unions(&p3, 2, Repetition::Distinct, 1000).unwrap();
        assert_eq!(distinct.values().sum::<u64>(), p3.len() as u64 * (d - 1));
        assert!(connected_unions(&p3, 3, Repetition::Allowed, 10).unwrap_err().is_cap_exceeded());

        let r = lemma55_check(&cat, 1, Some(1), Repetition::Allowed).unwrap();
        assert_eq!(r.tuples, 36);
        assert!(r.holds);
    }

    #[test]
    fn mgf_comparison_examples() {
        let cat = CopyCatalog::enumerate(&PatternGraph::complete(3).unwrap(), 5, 0.4).unwrap();
        let r = lemma56_check(&cat, &[], &[], &CopyPolynomial::one(), 0.7).unwrap();
        assert!((r.second_lhs - r.second_rhs).abs() <= 1e-13 * r.second_rhs);
        assert!(r.holds());
        let r = lemma56_check(&cat, &[3], &[], &CopyPolynomial::one(), 0.5).unwrap();
        assert!(r.second_holds());
        let f = CopyPolynomial {
            terms: vec![(2.0, vec![1]), (0.5, vec![1, 4])],
        };
        let r = lemma56_check(&cat, &[0, 2], &[1, 4], &f, 1.0).unwrap();
        assert!(r.holds(), "{r:?}");
        assert!(lemma56_check(&cat, &[], &[1], &f, 1.0).is_err());
        assert!(lemma56_check(&cat, &[], &[], &f, -1.0).is_err());
    }

    #[test]
    fn uk_decomposition_has_unit_mean() {
        for g in [PatternGraph::complete(2).unwrap(), PatternGraph::path(3).unwrap(), PatternGraph::complete(3).unwrap()] {
            for &p in &[0.2, 0.6] {
                let cat = CopyCatalog::enumerate(&g, 5, p).unwrap();
                let e = uk_decomposition_expectation(&cat);
                assert!((e - 1.0).abs() < 1e-12, "{} {p}: {e}", g.label());
            }
        }
    }

    #[test]
    fn uk_decomposition_matches_generic_stein_inner() {
        let p = 0.3;
        let cat = CopyCatalog::enumerate(&PatternGraph::complete(3).unwrap(), 4, p).unwrap();
        let space = sp(cat.host_edge_count(), p);
        let sigma = cat.sigma2_exact().sqrt();
        let mut w = WalshFunctional::zero(space.clone());
        for mask in cat.copy_masks().unwrap() {
            w = w.axpy(1.0 / sigma, &centered_product(&space, mask).unwrap()).unwrap();
        }
        assert!((w.variance() - 1.0).abs() < 1e-12);
        let inner = w.stein_inner().unwrap();
        for x in 0u64..1 << cat.host_edge_count() {
            assert!((inner.evaluate_mask(x) - uk_decomposition_value(&cat, x)).abs() < 1e-12);
        }
    }
}
