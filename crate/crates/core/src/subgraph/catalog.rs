use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::numeric::{binomial_u128, KahanSum};

use super::pattern::{check_np, PatternGraph};

pub const DEFAULT_CATALOG_CAP: u128 = 1_000_000;

/// D-symmetry is checked on every copy up to this many copies and on an evenly
/// strided sample beyond.
const SYMMETRY_FULL_CHECK: usize = 200_000;
const SYMMETRY_SAMPLE: usize = 4096;

/// Index of the host edge `{i, j}` in the lexicographic list of `K_n` edges.
pub fn edge_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = (i.min(j), i.max(j));
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// All copies of a pattern in `K_n`, each stored as its sorted list of host
/// edge indices, with the per-edge incidence lists and the overlap statistics
/// needed for `σ²` and `D`.
#[derive(Clone, Debug)]
pub struct CopyCatalog {
    pattern: PatternGraph,
    n: usize,
    p: f64,
    copies: Vec<Vec<u32>>,
    edge_to_copies: Vec<Vec<u32>>,
    d: usize,
    /// `overlaps[s]`: ordered pairs of copies sharing exactly `s` edges.
    overlaps: Vec<u64>,
}

impl CopyCatalog {
    pub fn closed_form_count(pattern: &PatternGraph, n: usize) -> Option<u128> {
        let v = pattern.vertices() as u64;
        let per_set = (1..=v as u128).product::<u128>() / pattern.aut() as u128;
        binomial_u128(n as u64, v)?.checked_mul(per_set)
    }

    pub fn enumerate(pattern: &PatternGraph, n: usize, p: f64) -> Result<Self> {
        Self::enumerate_with_cap(pattern, n, p, DEFAULT_CATALOG_CAP)
    }

    pub fn enumerate_with_cap(pattern: &PatternGraph, n: usize, p: f64, cap: u128) -> Result<Self> {
        check_np(n, p)?;
        let required = Self::closed_form_count(pattern, n).unwrap_or(u128::MAX);
        if required > cap {
            return Err(Error::CapExceeded {
                what: "copy catalog",
                required,
                cap,
            });
        }
        let v = pattern.vertices();
        let host_edges = n * (n.saturating_sub(1)) / 2;
        let mut copies = Vec::with_capacity(required as usize);
        if n >= v {
            let perms = permutations(v);
            let mut combo: Vec<usize> = (0..v).collect();
            loop {
                let mut local = BTreeSet::new();
                for perm in &perms {
                    let mut c: Vec<u32> = pattern
                        .edges()
                        .iter()
                        .map(|&(a, b)| edge_index(n, combo[perm[a]], combo[perm[b]]) as u32)
                        .collect();
                    c.sort_unstable();
                    local.insert(c);
                }
                copies.extend(local);
                if !next_combination(&mut combo, n) {
                    break;
                }
            }
        }
        if copies.len() as u128 != required {
            return Err(Error::Precondition(format!(
                "enumerated {} copies, closed form gives {required}",
                copies.len()
            )));
        }

        let mut edge_to_copies = vec![Vec::new(); host_edges];
        for (i, c) in copies.iter().enumerate() {
            for &k in c {
                edge_to_copies[k as usize].push(i as u32);
            }
        }

        let mut cat = Self {
            pattern: pattern.clone(),
            n,
            p,
            copies,
            edge_to_copies,
            d: 0,
            overlaps: vec![0; pattern.edge_count() + 1],
        };
        cat.compute_overlaps()?;
        Ok(cat)
    }

    fn compute_overlaps(&mut self) -> Result<()> {
        let count = self.copies.len();
        let mut shared = vec![0u32; count];
        let mut touched = Vec::new();
        let mut d = None;
        let step = if count <= SYMMETRY_FULL_CHECK {
            1
        } else {
            count.div_ceil(SYMMETRY_SAMPLE)
        };
        for i in 0..count {
            for &k in &self.copies[i] {
                for &j in &self.edge_to_copies[k as usize] {
                    if shared[j as usize] == 0 {
                        touched.push(j);
                    }
                    shared[j as usize] += 1;
                }
            }
            for &j in &touched {
                self.overlaps[shared[j as usize] as usize] += 1;
                shared[j as usize] = 0;
            }
            if i % step == 0 {
                match d {
                    None => d = Some(touched.len()),
                    Some(d0) if d0 != touched.len() => {
                        return Err(Error::Precondition(format!(
                            "neighbourhood sizes differ: copy 0 has {d0}, copy {i} has {}",
                            touched.len()
                        )))
                    }
                    _ => {}
                }
            }
            touched.clear();
        }
        self.d = d.unwrap_or(0);
        Ok(())
    }

    pub fn pattern(&self) -> &PatternGraph {
        &self.pattern
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    pub fn host_edge_count(&self) -> usize {
        self.edge_to_copies.len()
    }

    pub fn len(&self) -> usize {
        self.copies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.copies.is_empty()
    }

    pub fn copies(&self) -> &[Vec<u32>] {
        &self.copies
    }

    pub fn copy(&self, i: usize) -> &[u32] {
        &self.copies[i]
    }

    /// Copies containing host edge `k`.
    pub fn copies_with_edge(&self, k: usize) -> &[u32] {
        &self.edge_to_copies[k]
    }

    /// Copies sharing at least one edge with copy `i`, including `i` itself,
    /// in increasing order.
    pub fn neighbours(&self, i: usize) -> Vec<u32> {
        let mut out: Vec<u32> = self.copies[i]
            .iter()
            .flat_map(|&k| self.edge_to_copies[k as usize].iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Common size `D` of the neighbourhoods.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn overlap_counts(&self) -> &[u64] {
        &self.overlaps
    }

    /// Edge set of copy `i` as a bit mask; `None` when the host has more than
    /// 64 edges.
    pub fn copy_mask(&self, i: usize) -> Option<u64> {
        (self.host_edge_count() <= 64).then(|| self.copies[i].iter().fold(0u64, |m, &k| m | 1 << k))
    }

    pub fn copy_masks(&self) -> Result<Vec<u64>> {
        if self.host_edge_count() > 64 {
            return Err(Error::CapExceeded {
                what: "edge masks (host edges)",
                required: self.host_edge_count() as u128,
                cap: 64,
            });
        }
        Ok((0..self.len()).map(|i| self.copy_mask(i).unwrap_or(0)).collect())
    }

    /// `E[Σ B_Γ] = |ℳ| p^e`.
    pub fn mean_count(&self) -> f64 {
        self.len() as f64 * self.p.powi(self.pattern.edge_count() as i32)
    }

    /// Exact variance of the copy count: ordered pairs sharing `s ≥ 1` edges
    /// contribute `p^{2e−s} − p^{2e}`, disjoint pairs nothing.
    pub fn sigma2_exact(&self) -> f64 {
        self.sigma2_at(self.p)
    }

    /// Same, at another edge probability (the catalog does not depend on `p`).
    pub fn sigma2_at(&self, p: f64) -> f64 {
        let e = self.pattern.edge_count() as i32;
        let lp = p.ln();
        self.overlaps
            .iter()
            .enumerate()
            .skip(1)
            .map(|(s, &c)| c as f64 * p.powi(2 * e - s as i32) * -(s as f64 * lp).exp_m1())
            .collect::<KahanSum>()
            .value()
    }
}

fn permutations(v: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..v).collect();
    fn rec(i: usize, perm: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == perm.len() {
            out.push(perm.clone());
            return;
        }
        for j in i..perm.len() {
            perm.swap(i, j);
            rec(i + 1, perm, out);
            perm.swap(i, j);
        }
    }
    rec(0, &mut perm, &mut out);
    out
}

fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
