//! Chunked Monte Carlo means with 3-sigma intervals.

use rayon::prelude::*;
use serde::Serialize;

use crate::stream::{child_stream, RandomStream};
use crate::tolerance::{CI_Z, MC_CHUNK};

/// A Monte Carlo mean and the half-width of its `CI_Z`-sigma interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub half_width: f64,
}

impl McEstimate {
    pub fn exact(value: f64) -> Self {
        Self {
            estimate: value,
            half_width: 0.0,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        (self.estimate - value).abs() <= self.half_width
    }
}

/// Running sums of a vector-valued sample.
#[derive(Debug, Clone)]
pub(crate) struct Moments {
    pub count: usize,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

impl Moments {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            sum: vec![0.0; dim],
            sum_sq: vec![0.0; dim],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.count += 1;
        for ((s, q), v) in self.sum.iter_mut().zip(self.sum_sq.iter_mut()).zip(x) {
            *s += v;
            *q += v * v;
        }
    }

    pub fn merge(mut self, other: &Moments) -> Self {
        self.count += other.count;
        for (s, o) in self.sum.iter_mut().zip(&other.sum) {
            *s += o;
        }
        for (s, o) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *s += o;
        }
        self
    }

    pub fn estimates(&self) -> Vec<McEstimate> {
        let n = self.count as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, q)| {
                let mean = s / n;
                let var = if self.count > 1 {
                    ((q - n * mean * mean) / (n - 1.0)).max(0.0)
                } else {
                    0.0
                };
                McEstimate {
                    estimate: mean,
                    half_width: CI_Z * (var / n).sqrt(),
                }
            })
            .collect()
    }
}

/// Runs `draws` samples of a `dim`-dimensional statistic in chunks of
/// [`MC_CHUNK`]. Chunk `i` uses `child_stream(seed, tag, i)`; chunk results are
/// merged in index order, so the output does not depend on the thread count.
pub(crate) fn chunked_moments<F>(draws: usize, dim: usize, seed: u64, tag: u64, sample: F) -> Moments
where
    F: Fn(&mut RandomStream, &mut [f64]) + Sync,
{
    let chunks = draws.div_ceil(MC_CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = child_stream(seed, tag, c as u64);
            let len = MC_CHUNK.min(draws - c * MC_CHUNK);
            let mut m = Moments::new(dim);
            let mut buf = vec![0.0; dim];
            for _ in 0..len {
                buf.fill(0.0);
                sample(&mut rng, &mut buf);
                m.push(&buf);
            }
            m
        })
        .collect();
    parts
        .iter()
        .fold(Moments::new(dim), |acc, p| acc.merge(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn independent_of_thread_count() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    chunked_moments(20_000, 1, 7, 3, |rng, out| out[0] = rng.random::<f64>())
                        .estimates()[0]
                })
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.half_width.to_bits(), b.half_width.to_bits());
        assert!(a.contains(0.5));
    }

    #[test]
    fn constant_statistic_has_zero_width() {
        let m = chunked_moments(500, 2, 1, 1, |_, out| {
            out[0] = 0.25;
            out[1] = 0.0;
        });
        let e = m.estimates();
        assert_eq!(e[1], McEstimate::exact(0.0));
        assert!((e[0].estimate - 0.25).abs() < 1e-15);
    }
}
