use rand::RngCore;

use crate::error::{Error, Result};
use crate::mc::{Rng, Sampler};

use super::catalog::CopyCatalog;

/// Draws the standardized copy count `W = (Σ_Γ B_Γ − |ℳ|p^e)/σ` in `G(n, p)`.
///
/// Each replicate draws the host edges once; copies are grouped by their
/// smallest edge so that only copies whose first edge is present are checked.
#[derive(Clone, Debug)]
pub struct SubgraphSampler {
    host_edges: usize,
    threshold: u64,
    /// `starts[k]..starts[k + 1]` indexes `rest` copies whose smallest edge is `k`.
    starts: Vec<usize>,
    rest: Vec<Vec<u32>>,
    mean: f64,
    inv_sigma: f64,
}

impl SubgraphSampler {
    pub fn new(cat: &CopyCatalog) -> Result<Self> {
        let p = cat.p();
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidProbability { index: 0, value: p });
        }
        let sigma2 = cat.sigma2_exact();
        if !(sigma2 > 0.0) {
            return Err(Error::Precondition("the host contains no copy of the pattern".into()));
        }
        let host_edges = cat.host_edge_count();
        let mut order: Vec<&Vec<u32>> = cat.copies().iter().collect();
        order.sort_by_key(|c| c[0]);
        let mut starts = vec![0usize; host_edges + 1];
        for c in &order {
            starts[c[0] as usize + 1] += 1;
        }
        for k in 0..host_edges {
            starts[k + 1] += starts[k];
        }
        Ok(Self {
            host_edges,
            threshold: (p * 2f64.powi(64)) as u64,
            starts,
            rest: order.iter().map(|c| c[1..].to_vec()).collect(),
            mean: cat.mean_count(),
            inv_sigma: 1.0 / sigma2.sqrt(),
        })
    }

    /// Raw copy count for one replicate.
    pub fn draw_count(&self, rng: &mut Rng) -> u64 {
        let words = self.host_edges.div_ceil(64);
        let mut present = vec![0u64; words];
        for k in 0..self.host_edges {
            if rng.next_u64() < self.threshold {
                present[k / 64] |= 1 << (k % 64);
            }
        }
        let has = |k: u32| present[k as usize / 64] & (1 << (k % 64)) != 0;
        let mut count = 0;
        for k in 0..self.host_edges {
            if !has(k as u32) {
                continue;
            }
            for c in &self.rest[self.starts[k]..self.starts[k + 1]] {
                if c.iter().all(|&j| has(j)) {
                    count += 1;
                }
            }
        }
        count
    }
}

impl Sampler for SubgraphSampler {
    fn draw(&self, rng: &mut Rng) -> f64 {
        (self.draw_count(rng) as f64 - self.mean) * self.inv_sigma
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::{mean_and_variance, McConfig};
    use crate::subgraph::PatternGraph;

    #[test]
    fn standardized_moments() {
        let cat = CopyCatalog::enumerate(&PatternGraph::complete(3).unwrap(), 36, 0.3).unwrap();
        let sampler = SubgraphSampler::new(&cat).unwrap();
        let draws = McConfig::new(100_000, 11).draws(&sampler).unwrap();
        let (mean, var) = mean_and_variance(&draws);
        let se = (1.0 / draws.len() as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean}");
        // sd of the sample variance is about sqrt((kurtosis - 1)/N)
        assert!((var - 1.0).abs() < 3.0 * (3.0 / draws.len() as f64).sqrt(), "var {var}");
    }

    #[test]
    fn counts_match_naive_on_small_host() {
        let cat = CopyCatalog::enumerate(&PatternGraph::cycle(4).unwrap(), 7, 0.5).unwrap();
        let sampler = SubgraphSampler::new(&cat).unwrap();
        let config = McConfig::new(50, 3);
        let mut rng = config.block_rng(0);
        let mut replay = config.block_rng(0);
        for _ in 0..50 {
            let fast = sampler.draw_count(&mut rng);
            let edges: Vec<bool> = (0..cat.host_edge_count()).map(|_| replay.next_u64() < sampler.threshold).collect();
            let naive = cat.copies().iter().filter(|c| c.iter().all(|&j| edges[j as usize])).count() as u64;
            assert_eq!(fast, naive);
        }
    }

    #[test]
    fn degenerate_probability_rejected() {
        assert!(CopyCatalog::enumerate(&PatternGraph::complete(3).unwrap(), 6, 1.0).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let cat = CopyCatalog::enumerate(&PatternGraph::path(3).unwrap(), 10, 0.2).unwrap();
        let sampler = SubgraphSampler::new(&cat).unwrap();
        let a = McConfig::new(5000, 9).with_threads(1).draws(&sampler).unwrap();
        let b = McConfig::new(5000, 9).with_threads(3).draws(&sampler).unwrap();
        assert_eq!(a, b);
    }
}
