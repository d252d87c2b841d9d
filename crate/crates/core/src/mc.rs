//! Reproducible Monte Carlo estimation of tail ratios and moment generating
//! functions.
//!
//! Replicates are cut into fixed-size blocks. Block `b` draws from a ChaCha8
//! stream keyed by `(seed, b)`, and block results are combined in block order,
//! so estimates depend on the seed and sample count but not on the number of
//! threads or on scheduling.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gaussian::NormalKernel;
use crate::numeric::KahanSum;
use crate::report::{Cell, Table};

pub type Rng = ChaCha8Rng;

/// Source of i.i.d. real draws. Implementations hold only immutable state.
pub trait Sampler: Sync {
    fn draw(&self, rng: &mut Rng) -> f64;
}

impl<F: Fn(&mut Rng) -> f64 + Sync> Sampler for F {
    fn draw(&self, rng: &mut Rng) -> f64 {
        self(rng)
    }
}

pub const MIN_TAIL_SAMPLES: u64 = 10_000;
pub const DEGENERATE_HITS: u64 = 30;
/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;
/// Draws with `tF` above this are excluded from the MGF mean and counted.
pub const MGF_OVERFLOW_EXPONENT: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    /// Worker threads; `0` means the global rayon pool.
    pub threads: usize,
    pub block_size: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0,
            threads: 0,
            block_size: 4096,
        }
    }
}

impl McConfig {
    pub fn new(samples: u64, seed: u64) -> Self {
        Self {
            samples,
            seed,
            ..Self::default()
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    fn blocks(&self) -> Vec<(u64, u64)> {
        let size = self.block_size.max(1);
        let count = self.samples.div_ceil(size);
        (0..count)
            .map(|b| (b, size.min(self.samples - b * size)))
            .collect()
    }

    pub fn block_rng(&self, block: u64) -> Rng {
        let mut rng = Rng::seed_from_u64(self.seed);
        rng.set_stream(block);
        rng
    }

    /// Runs `per_block(rng, count)` for every block, in parallel, and returns
    /// the results in block order.
    pub fn run_blocks<T, F>(&self, per_block: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&mut Rng, u64) -> T + Sync,
    {
        let blocks = self.blocks();
        let work = || {
            blocks
                .par_iter()
                .map(|&(b, n)| per_block(&mut self.block_rng(b), n))
                .collect::<Vec<T>>()
        };
        if self.threads == 0 {
            Ok(work())
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(self.threads)
                .build()
                .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
            Ok(pool.install(work))
        }
    }

    /// Collects all draws in replicate order.
    pub fn draws<S: Sampler + ?Sized>(&self, sampler: &S) -> Result<Vec<f64>> {
        let blocks = self.run_blocks(|rng, n| (0..n).map(|_| sampler.draw(rng)).collect::<Vec<f64>>())?;
        Ok(blocks.concat())
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(hits: u64, samples: u64, z: f64) -> (f64, f64) {
    if samples == 0 {
        return (0.0, 1.0);
    }
    let n = samples as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let low = if hits == 0 { 0.0 } else { (centre - half).max(0.0) };
    let high = if hits == samples { 1.0 } else { (centre + half).min(1.0) };
    (low, high)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub z: f64,
    pub samples: u64,
    pub hits: u64,
    pub p_hat: f64,
    /// `p_hat/(1 − Φ(z))`; `None` when there were no hits.
    pub ratio_hat: Option<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
    pub degenerate: bool,
    pub seed: u64,
}

impl TailEstimate {
    pub fn from_counts(z: f64, hits: u64, samples: u64, seed: u64) -> Self {
        let tail = NormalKernel::upper_tail(z);
        let p_hat = hits as f64 / samples as f64;
        let (lo, hi) = wilson_interval(hits, samples, Z_95);
        let ratio_hat = (hits > 0).then(|| p_hat / tail);
        Self {
            z,
            samples,
            hits,
            p_hat,
            ratio_hat,
            ci_low: if hits == 0 { 0.0 } else { lo / tail },
            ci_high: hi / tail,
            degenerate: hits < DEGENERATE_HITS,
            seed,
        }
    }

    /// `|ratio − 1|`, reading a hitless estimate as ratio 0.
    pub fn abs_error(&self) -> f64 {
        (self.ratio_hat.unwrap_or(0.0) - 1.0).abs()
    }

    /// Standard error of the ratio, `√(p̂(1−p̂)/N)/(1 − Φ(z))`.
    pub fn ratio_std_error(&self) -> f64 {
        let n = self.samples as f64;
        (self.p_hat * (1.0 - self.p_hat) / n).sqrt() / NormalKernel::upper_tail(self.z)
    }
}

/// Tail ratios at several thresholds from one set of draws.
pub fn tail_ratios<S: Sampler + ?Sized>(sampler: &S, zs: &[f64], config: &McConfig) -> Result<Vec<TailEstimate>> {
    if config.samples < MIN_TAIL_SAMPLES {
        return Err(Error::Precondition(format!(
            "tail estimation needs at least {MIN_TAIL_SAMPLES} samples, got {}",
            config.samples
        )));
    }
    let counts = config.run_blocks(|rng, n| {
        let mut hits = vec![0u64; zs.len()];
        for _ in 0..n {
            let x = sampler.draw(rng);
            for (h, &z) in hits.iter_mut().zip(zs) {
                *h += u64::from(x > z);
            }
        }
        hits
    })?;
    let mut hits = vec![0u64; zs.len()];
    for block in counts {
        for (h, b) in hits.iter_mut().zip(block) {
            *h += b;
        }
    }
    let out: Vec<TailEstimate> = zs
        .iter()
        .zip(hits)
        .map(|(&z, h)| TailEstimate::from_counts(z, h, config.samples, config.seed))
        .collect();
    for e in out.iter().filter(|e| e.degenerate) {
        log::warn!("tail estimate at z = {} has only {} hits", e.z, e.hits);
    }
    Ok(out)
}

pub fn tail_ratio<S: Sampler + ?Sized>(sampler: &S, z: f64, config: &McConfig) -> Result<TailEstimate> {
    Ok(tail_ratios(sampler, &[z], config)?.remove(0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MgfEstimate {
    pub t: f64,
    pub mean: f64,
    /// Jackknife standard error over blocks.
    pub std_error: f64,
    pub samples: u64,
    pub overflowed: u64,
    pub seed: u64,
}

/// `E[e^{tF}]` with a block jackknife standard error.
pub fn mgf_estimate<S: Sampler + ?Sized>(sampler: &S, t: f64, config: &McConfig) -> Result<MgfEstimate> {
    if config.samples == 0 {
        return Err(Error::Precondition("at least one sample required".into()));
    }
    if t == 0.0 {
        return Ok(MgfEstimate {
            t,
            mean: 1.0,
            std_error: 0.0,
            samples: config.samples,
            overflowed: 0,
            seed: config.seed,
        });
    }
    let blocks = config.run_blocks(|rng, n| {
        let mut sum = KahanSum::new();
        let (mut kept, mut overflowed) = (0u64, 0u64);
        for _ in 0..n {
            let e = t * sampler.draw(rng);
            if e > MGF_OVERFLOW_EXPONENT {
                overflowed += 1;
            } else {
                sum.add(e.exp());
                kept += 1;
            }
        }
        (sum, kept, overflowed)
    })?;
    let mut total = KahanSum::new();
    let (mut kept, mut overflowed) = (0u64, 0u64);
    for (s, k, o) in &blocks {
        total.merge(s);
        kept += k;
        overflowed += o;
    }
    if kept == 0 {
        return Err(Error::Precondition("every MGF draw overflowed".into()));
    }
    let mean = total.value() / kept as f64;
    let std_error = jackknife_se(&blocks, total.value(), kept);
    if overflowed > 0 {
        log::warn!("{overflowed} MGF draws with tF > {MGF_OVERFLOW_EXPONENT} excluded");
    }
    Ok(MgfEstimate {
        t,
        mean,
        std_error,
        samples: config.samples,
        overflowed,
        seed: config.seed,
    })
}

fn jackknife_se(blocks: &[(KahanSum, u64, u64)], total: f64, kept: u64) -> f64 {
    let g = blocks.iter().filter(|b| b.1 > 0).count();
    if g < 2 {
        return f64::NAN;
    }
    let leave_out: Vec<f64> = blocks
        .iter()
        .filter(|b| b.1 > 0 && b.1 < kept)
        .map(|(s, k, _)| (total - s.value()) / (kept - k) as f64)
        .collect();
    let g = leave_out.len() as f64;
    let mean = leave_out.iter().sum::<f64>() / g;
    let ss: f64 = leave_out.iter().map(|v| (v - mean).powi(2)).sum();
    ((g - 1.0) / g * ss).sqrt()
}

/// Sample mean and unbiased variance.
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().copied().collect::<KahanSum>().value() / n;
    let var = xs
        .iter()
        .map(|x| (x - mean).powi(2))
        .collect::<KahanSum>()
        .value()
        / (n - 1.0);
    (mean, var)
}

/// Seed, configuration hash and artifact version attached to stored results.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
}

impl Provenance {
    pub fn new<C: Serialize>(seed: u64, config: &C) -> Result<Self> {
        Ok(Self {
            seed,
            config_hash: config_hash(config)?,
            version: artifact_version(),
        })
    }
}

pub fn artifact_version() -> String {
    format!("rstein-core-{}", env!("CARGO_PKG_VERSION"))
}

/// First 16 hex digits of the SHA-256 of the JSON form of `config`.
pub fn config_hash<C: Serialize>(config: &C) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    let digest = Sha256::digest(&bytes);
    Ok(hex::encode(&digest[..8]))
}

/// Appends estimates to a result store, as CSV (header written once) or as
/// JSON lines, depending on the file extension.
pub fn append_results(path: &Path, estimates: &[TailEstimate], provenance: &Provenance) -> Result<()> {
    let is_json = path.extension().is_some_and(|e| e == "json" || e == "jsonl");
    let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    if is_json {
        for e in estimates {
            let line = serde_json::json!({ "estimate": e, "provenance": provenance });
            writeln!(file, "{line}")?;
        }
        return Ok(());
    }
    let mut table = Table::new([
        "z", "samples", "hits", "p_hat", "ratio_hat", "ci_low", "ci_high", "degenerate", "seed",
        "config_hash", "version",
    ]);
    for e in estimates {
        table.push(vec![
            e.z.into(),
            e.samples.into(),
            e.hits.into(),
            e.p_hat.into(),
            e.ratio_hat.into(),
            e.ci_low.into(),
            e.ci_high.into(),
            e.degenerate.into(),
            Cell::UInt(provenance.seed),
            provenance.config_hash.as_str().into(),
            provenance.version.as_str().into(),
        ])?;
    }
    let text = table.to_csv()?;
    let body = if fresh {
        text.as_str()
    } else {
        text.split_once('\n').map_or("", |(_, rest)| rest)
    };
    file.write_all(body.as_bytes())?;
    Ok(())
}

/// Exact standard normal draws, for self-checks.
pub fn standard_normal(rng: &mut Rng) -> f64 {
    use rand::Rng as _;
    // Box–Muller on two uniforms in (0, 1]
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
