//! Chunked Monte Carlo estimation whose result does not depend on how many
//! workers evaluate the chunks.
//!
//! Replication `k` always draws from counter `stream.counter + k`, each chunk
//! is reduced sequentially, and chunk summaries are merged in chunk order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::{RandomStream, StreamRng};

pub const DEFAULT_CHUNK: usize = 4096;
pub const DEFAULT_SAMPLES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

#[derive(Debug, Clone)]
struct Moments {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(dim: usize) -> Self {
        Self { count: 0.0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    fn push(&mut self, x: &[f64]) {
        self.count += 1.0;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = v - *m;
            *m += delta / self.count;
            *s += delta * (v - *m);
        }
    }

    fn merge(&mut self, other: &Moments) {
        if other.count == 0.0 {
            return;
        }
        let total = self.count + other.count;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * other.count / total;
            self.m2[i] += other.m2[i] + delta * delta * self.count * other.count / total;
        }
        self.count = total;
    }

    fn finish(&self, n: usize) -> Vec<McEstimate> {
        self.mean
            .iter()
            .zip(&self.m2)
            .map(|(&mean, &m2)| {
                let var = if n > 1 { (m2 / (n as f64 - 1.0)).max(0.0) } else { 0.0 };
                McEstimate { mean, stderr: (var / n as f64).sqrt(), n }
            })
            .collect()
    }
}

fn run_chunks<S>(sampler: &S, dim: usize, n: usize, stream: RandomStream, chunk: usize) -> Vec<McEstimate>
where
    S: Fn(&mut StreamRng, &mut [f64]) + Sync,
{
    let chunk = chunk.max(1);
    let chunks = n.div_ceil(chunk);
    let partials: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Moments::new(dim);
            let mut out = vec![0.0; dim];
            for k in c * chunk..((c + 1) * chunk).min(n) {
                let mut rng = stream.at_counter(stream.counter.wrapping_add(k as u64)).rng();
                out.iter_mut().for_each(|x| *x = 0.0);
                sampler(&mut rng, &mut out);
                acc.push(&out);
            }
            acc
        })
        .collect();
    let mut total = Moments::new(dim);
    for p in &partials {
        total.merge(p);
    }
    total.finish(n)
}

fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(job),
        Err(_) => job(),
    }
}

/// Mean and standard error of `sampler` over `n` replications.
pub fn mc_estimate<S>(sampler: S, n: usize, stream: RandomStream, chunk: usize) -> McEstimate
where
    S: Fn(&mut StreamRng) -> f64 + Sync,
{
    run_chunks(&|rng: &mut StreamRng, out: &mut [f64]| out[0] = sampler(rng), 1, n, stream, chunk)[0]
}

pub fn mc_estimate_with_workers<S>(
    sampler: S,
    n: usize,
    stream: RandomStream,
    chunk: usize,
    workers: usize,
) -> McEstimate
where
    S: Fn(&mut StreamRng) -> f64 + Sync + Send,
{
    with_workers(workers, || mc_estimate(sampler, n, stream, chunk))
}

/// Vector-valued variant: the sampler fills `dim` outputs per replication,
/// all estimated from the same draws.
pub fn mc_estimate_vec<S>(sampler: S, dim: usize, n: usize, stream: RandomStream, chunk: usize) -> Vec<McEstimate>
where
    S: Fn(&mut StreamRng, &mut [f64]) + Sync,
{
    run_chunks(&sampler, dim, n, stream, chunk)
}

pub fn mc_estimate_vec_with_workers<S>(
    sampler: S,
    dim: usize,
    n: usize,
    stream: RandomStream,
    chunk: usize,
    workers: usize,
) -> Vec<McEstimate>
where
    S: Fn(&mut StreamRng, &mut [f64]) + Sync + Send,
{
    with_workers(workers, || run_chunks(&sampler, dim, n, stream, chunk))
}
