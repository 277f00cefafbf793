use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Number of independent RNG streams a run is split into. Fixed, so results
/// do not depend on how many threads execute the shards.
pub const SHARDS: u64 = 16;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
}

impl Estimate {
    pub fn exact(v: f64) -> Self {
        Self {
            mean: v,
            std_error: 0.0,
            n: 0,
        }
    }

    /// `|self − other|` in units of the pooled standard error.
    pub fn z_against(&self, other: &Estimate) -> f64 {
        z_score(
            self.mean - other.mean,
            (self.std_error.powi(2) + other.std_error.powi(2)).sqrt(),
        )
    }

    pub fn z_against_value(&self, v: f64) -> f64 {
        z_score(self.mean - v, self.std_error)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            mean: self.mean * c,
            std_error: self.std_error * c.abs(),
            n: self.n,
        }
    }
}

fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff.abs() / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Welford running mean/variance, mergeable (Chan et al.).
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64) * (other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn estimate(&self) -> Estimate {
        let se = if self.n > 1 {
            (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean: self.mean,
            std_error: se,
            n: self.n,
        }
    }
}

/// RNG for shard `shard` of the run seeded by `seed`.
pub fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}

fn shard_sizes(n: u64) -> impl Iterator<Item = (u64, u64)> {
    (0..SHARDS).map(move |s| (s, n / SHARDS + u64::from(s < n % SHARDS)))
}

/// Estimates `E[f]` from `n` draws spread over [`SHARDS`] seeded streams.
pub fn estimate<F>(seed: u64, n: u64, f: F) -> Estimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    estimate_many(seed, n, 1, |rng, out| out[0] = f(rng))[0]
}

/// Like [`estimate`] but for `k` quantities computed from the same draw.
pub fn estimate_many<F>(seed: u64, n: u64, k: usize, f: F) -> Vec<Estimate>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let shards: Vec<(u64, u64)> = shard_sizes(n).collect();
    let parts: Vec<Vec<Accumulator>> = shards
        .par_iter()
        .map(|&(s, count)| {
            let mut rng = shard_rng(seed, s);
            let mut acc = vec![Accumulator::default(); k];
            let mut buf = vec![0.0; k];
            for _ in 0..count {
                f(&mut rng, &mut buf);
                for (a, &x) in acc.iter_mut().zip(&buf) {
                    a.push(x);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Accumulator::default(); k];
    for p in &parts {
        for (t, a) in total.iter_mut().zip(p) {
            t.merge(a);
        }
    }
    total.iter().map(Accumulator::estimate).collect()
}

/// Runs `f` once per trial over the sharded streams and collects the
/// results in shard order.
pub fn collect_trials<T, F>(seed: u64, n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    let shards: Vec<(u64, u64)> = shard_sizes(n).collect();
    let parts: Vec<Vec<T>> = shards
        .par_iter()
        .map(|&(s, count)| {
            let mut rng = shard_rng(seed, s);
            (0..count).map(|_| f(&mut rng)).collect()
        })
        .collect();
    parts.into_iter().flatten().collect()
}
