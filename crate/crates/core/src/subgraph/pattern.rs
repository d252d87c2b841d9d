use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest pattern for which automorphisms are enumerated by brute force.
pub const MAX_PATTERN_VERTICES: usize = 10;

/// Edge-subset enumeration for `psi_min` switches to the vertex-subset route
/// above this many pattern edges.
const EDGE_SUBSET_LIMIT: usize = 20;

/// A small simple graph `G₀` without isolated vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternGraph {
    vertices: usize,
    edges: Vec<(usize, usize)>,
    aut: u64,
}

#[derive(Serialize, Deserialize)]
struct PatternJson {
    vertices: usize,
    edges: Vec<[usize; 2]>,
}

impl PatternGraph {
    /// Builds the pattern from an edge list on `0..vertices`. Duplicate edges
    /// are merged, isolated vertices are dropped and the rest relabelled in
    /// increasing order.
    pub fn new(vertices: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut normalized = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u >= vertices || v >= vertices {
                return Err(Error::InvalidInput(format!(
                    "edge ({u}, {v}) references a vertex outside 0..{vertices}"
                )));
            }
            if u == v {
                return Err(Error::InvalidInput(format!("self-loop at vertex {u}")));
            }
            normalized.push((u.min(v), u.max(v)));
        }
        normalized.sort_unstable();
        normalized.dedup();
        if normalized.is_empty() {
            return Err(Error::InvalidInput("pattern must have at least one edge".into()));
        }

        let mut label = vec![usize::MAX; vertices];
        for &(u, v) in &normalized {
            label[u] = 0;
            label[v] = 0;
        }
        let mut next = 0;
        for l in label.iter_mut().filter(|l| **l == 0) {
            *l = next;
            next += 1;
        }
        let edges: Vec<(usize, usize)> = normalized.iter().map(|&(u, v)| (label[u], label[v])).collect();
        if next > MAX_PATTERN_VERTICES {
            return Err(Error::CapExceeded {
                what: "automorphism enumeration (pattern vertices)",
                required: next as u128,
                cap: MAX_PATTERN_VERTICES as u128,
            });
        }
        let mut g = Self {
            vertices: next,
            edges,
            aut: 0,
        };
        g.aut = g.count_automorphisms();
        Ok(g)
    }

    pub fn complete(k: usize) -> Result<Self> {
        let edges: Vec<_> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
        Self::new(k, &edges)
    }

    /// Path on `k` vertices.
    pub fn path(k: usize) -> Result<Self> {
        let edges: Vec<_> = (1..k).map(|i| (i - 1, i)).collect();
        Self::new(k, &edges)
    }

    pub fn cycle(k: usize) -> Result<Self> {
        if k < 3 {
            return Err(Error::InvalidInput(format!("cycle needs at least 3 vertices, got {k}")));
        }
        let edges: Vec<_> = (0..k).map(|i| (i, (i + 1) % k)).collect();
        Self::new(k, &edges)
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn aut(&self) -> u64 {
        self.aut
    }

    fn adjacency(&self) -> Vec<u16> {
        let mut adj = vec![0u16; self.vertices];
        for &(u, v) in &self.edges {
            adj[u] |= 1 << v;
            adj[v] |= 1 << u;
        }
        adj
    }

    fn count_automorphisms(&self) -> u64 {
        let adj = self.adjacency();
        let mut image = vec![usize::MAX; self.vertices];
        let mut used = 0u16;
        fn extend(i: usize, adj: &[u16], image: &mut [usize], used: &mut u16) -> u64 {
            if i == adj.len() {
                return 1;
            }
            let mut total = 0;
            for c in 0..adj.len() {
                if *used & (1 << c) != 0 || adj[c].count_ones() != adj[i].count_ones() {
                    continue;
                }
                let consistent = (0..i).all(|j| {
                    let a = adj[i] & (1 << j) != 0;
                    let b = adj[c] & (1 << image[j]) != 0;
                    a == b
                });
                if consistent {
                    image[i] = c;
                    *used |= 1 << c;
                    total += extend(i + 1, adj, image, used);
                    *used &= !(1 << c);
                }
            }
            total
        }
        extend(0, &adj, &mut image, &mut used)
    }

    /// `(v_H, e_H)` for every nonempty edge subset `H`, where `v_H` counts the
    /// vertices touched by `H`.
    pub fn edge_subset_profiles(&self) -> Result<Vec<(usize, usize)>> {
        let e = self.edges.len();
        if e > EDGE_SUBSET_LIMIT {
            return Err(Error::CapExceeded {
                what: "pattern edge-subset enumeration",
                required: 1u128 << e,
                cap: 1u128 << EDGE_SUBSET_LIMIT,
            });
        }
        Ok((1u64..1 << e)
            .map(|s| {
                let mut touched = 0u16;
                for (i, &(u, v)) in self.edges.iter().enumerate() {
                    if s & (1 << i) != 0 {
                        touched |= (1 << u) | (1 << v);
                    }
                }
                (touched.count_ones() as usize, s.count_ones() as usize)
            })
            .collect())
    }

    /// `min n^{v_H} p^{e_H}` over nonempty edge subsets `H`.
    pub fn psi_min(&self, n: usize, p: f64) -> Result<f64> {
        check_np(n, p)?;
        if self.edges.len() > EDGE_SUBSET_LIMIT {
            return self.psi_min_by_vertex_subsets(n, p);
        }
        let nf = n as f64;
        Ok(self
            .edge_subset_profiles()?
            .into_iter()
            .map(|(v, e)| nf.powi(v as i32) * p.powi(e as i32))
            .fold(f64::INFINITY, f64::min))
    }

    /// Same minimum taken over vertex subsets `U` with at least one induced
    /// edge, using the induced edge count. For fixed touched vertices the
    /// induced subgraph has the most edges, so both minima agree.
    pub fn psi_min_by_vertex_subsets(&self, n: usize, p: f64) -> Result<f64> {
        check_np(n, p)?;
        let nf = n as f64;
        let mut best = f64::INFINITY;
        for u in 1u32..1 << self.vertices {
            let induced = self
                .edges
                .iter()
                .filter(|&&(a, b)| u & (1 << a) != 0 && u & (1 << b) != 0)
                .count();
            if induced > 0 {
                best = best.min(nf.powi(u.count_ones() as i32) * p.powi(induced as i32));
            }
        }
        Ok(best)
    }

    pub fn to_json(&self) -> Result<String> {
        let js = PatternJson {
            vertices: self.vertices,
            edges: self.edges.iter().map(|&(u, v)| [u, v]).collect(),
        };
        Ok(serde_json::to_string(&js)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let js: PatternJson = serde_json::from_str(text)?;
        let edges: Vec<_> = js.edges.iter().map(|e| (e[0], e[1])).collect();
        Self::new(js.vertices, &edges)
    }

    /// Short name for reports: `K3`, `P3`, `C4`, or `v{v}e{e}`.
    pub fn label(&self) -> String {
        let (v, e) = (self.vertices, self.edges.len());
        if e == v * (v - 1) / 2 {
            return format!("K{v}");
        }
        let degrees: Vec<u32> = self.adjacency().iter().map(|a| a.count_ones()).collect();
        if e + 1 == v && degrees.iter().all(|&d| d <= 2) && self.is_connected() {
            return format!("P{v}");
        }
        if e == v && degrees.iter().all(|&d| d == 2) && self.is_connected() {
            return format!("C{v}");
        }
        format!("v{v}e{e}")
    }

    fn is_connected(&self) -> bool {
        let adj = self.adjacency();
        let mut seen = 1u16;
        let mut frontier = 1u16;
        while frontier != 0 {
            let mut next = 0;
            for (i, a) in adj.iter().enumerate() {
                if frontier & (1 << i) != 0 {
                    next |= a;
                }
            }
            frontier = next & !seen;
            seen |= next;
        }
        seen.count_ones() as usize == self.vertices
    }
}

pub(crate) fn check_np(n: usize, p: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidInput("host graph needs at least one vertex".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidProbability { index: 0, value: p });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_aut(g: &PatternGraph) -> u64 {
        // heap's algorithm over all v! permutations
        let v = g.vertices();
        let mut perm: Vec<usize> = (0..v).collect();
        let edges: std::collections::BTreeSet<_> = g.edges().iter().copied().collect();
        let check = |perm: &[usize]| {
            g.edges().iter().all(|&(a, b)| {
                let (x, y) = (perm[a], perm[b]);
                edges.contains(&(x.min(y), x.max(y)))
            })
        };
        let mut count = check(&perm) as u64;
        let mut c = vec![0usize; v];
        let mut i = 0;
        while i < v {
            if c[i] < i {
                if i % 2 == 0 {
                    perm.swap(0, i);
                } else {
                    perm.swap(c[i], i);
                }
                count += check(&perm) as u64;
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        count
    }

    #[test]
    fn automorphism_counts() {
        assert_eq!(PatternGraph::complete(3).unwrap().aut(), 6);
        assert_eq!(PatternGraph::complete(2).unwrap().aut(), 2);
        assert_eq!(PatternGraph::path(3).unwrap().aut(), 2);
        assert_eq!(PatternGraph::cycle(4).unwrap().aut(), 8);
        assert_eq!(PatternGraph::complete(4).unwrap().aut(), 24);
        let star = PatternGraph::new(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        assert_eq!(star.aut(), 6);
        let paw = PatternGraph::new(4, &[(0, 1), (1, 2), (0, 2), (2, 3)]).unwrap();
        for g in [star, paw, PatternGraph::path(5).unwrap(), PatternGraph::cycle(6).unwrap()] {
            assert_eq!(g.aut(), brute_aut(&g), "{g:?}");
        }
    }

    #[test]
    fn isolated_vertices_are_stripped() {
        let g = PatternGraph::new(5, &[(3, 1), (1, 3), (4, 3)]).unwrap();
        assert_eq!(g.vertices(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.label(), "P3");
        assert!(PatternGraph::new(3, &[]).is_err());
        assert!(PatternGraph::new(3, &[(1, 1)]).is_err());
        assert!(PatternGraph::new(3, &[(1, 3)]).is_err());
        assert!(PatternGraph::complete(11).unwrap_err().is_cap_exceeded());
    }

    #[test]
    fn psi_min_examples() {
        let k3 = PatternGraph::complete(3).unwrap();
        assert_eq!(k3.psi_min(5, 0.5).unwrap(), 12.5);
        let k2 = PatternGraph::complete(2).unwrap();
        assert_eq!(k2.psi_min(17, 0.3).unwrap(), 289.0 * 0.3);
        for g in [k3, PatternGraph::cycle(4).unwrap(), PatternGraph::path(4).unwrap()] {
            for &p in &[0.01, 0.2, 0.5, 0.8, 0.999] {
                for n in [4usize, 9, 36] {
                    let a = g.psi_min(n, p).unwrap();
                    let b = g.psi_min_by_vertex_subsets(n, p).unwrap();
                    assert!((a - b).abs() <= 1e-12 * a);
                    let nf = n as f64;
                    let lo = nf * nf * p.powi(g.edge_count() as i32);
                    assert!(lo <= a * (1.0 + 1e-12) && a <= nf * nf * p * (1.0 + 1e-12));
                }
            }
        }
        assert!(PatternGraph::complete(3).unwrap().psi_min(5, 1.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = PatternGraph::from_json(r#"{"vertices": 4, "edges": [[0,1],[1,2],[2,3],[3,0]]}"#).unwrap();
        assert_eq!(g.label(), "C4");
        assert_eq!(PatternGraph::from_json(&g.to_json().unwrap()).unwrap(), g);
    }
}
