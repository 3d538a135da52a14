// SPDX-License-Identifier: Apache-2.0

//! Inter- and intra-configuration variation of a MIPUF.
//!
//! Work is split per challenge; each challenge gets its own generator seeded
//! from the caller's, so results do not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::Mipuf;
use crate::bits::{Bits, Challenge, ConfigSeed};
use crate::error::{param, Result};
use crate::scalar::Real;

/// Mean normalized Hamming distance plus a histogram of raw distances
/// (`histogram[d]` counts comparisons at distance `d`).
#[derive(Clone, Debug, PartialEq)]
pub struct VariationReport {
    pub mean: f64,
    pub width: usize,
    pub comparisons: u64,
    pub histogram: Vec<u64>,
}

impl VariationReport {
    fn from_histogram(width: usize, histogram: Vec<u64>) -> Self {
        let comparisons: u64 = histogram.iter().sum();
        let total: u64 = histogram.iter().enumerate().map(|(d, &n)| d as u64 * n).sum();
        let mean = if comparisons == 0 {
            0.0
        } else {
            total as f64 / (comparisons as f64 * width as f64)
        };
        VariationReport {
            mean,
            width,
            comparisons,
            histogram,
        }
    }

    /// Mean distance in bits.
    pub fn mean_bits(&self) -> f64 {
        self.mean * self.width as f64
    }
}

fn merge(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    a
}

pub fn inter_config_variation<T: Real, R: Rng + ?Sized>(
    puf: &Mipuf<T>,
    n_configs: usize,
    n_challenges: usize,
    rng: &mut R,
) -> Result<VariationReport> {
    let gammas: Vec<ConfigSeed> = (0..n_configs).map(|_| puf.random_seed(rng)).collect();
    let challenges: Vec<Challenge> = (0..n_challenges)
        .map(|_| Challenge::new(Bits::random(puf.challenge_bits(), rng)))
        .collect();
    inter_config_variation_over(puf, &gammas, &challenges)
}

/// Pairwise distances of noiseless responses over all `gammas` pairs, per challenge.
pub fn inter_config_variation_over<T: Real>(
    puf: &Mipuf<T>,
    gammas: &[ConfigSeed],
    challenges: &[Challenge],
) -> Result<VariationReport> {
    if gammas.len() < 2 {
        return param("inter-configuration variation needs at least two configurations");
    }
    if challenges.is_empty() {
        return param("inter-configuration variation needs at least one challenge");
    }
    let width = puf.response_bits();
    let views = gammas.iter().map(|g| puf.at(g)).collect::<Result<Vec<_>>>()?;
    let views = &views;
    let histogram = challenges
        .par_iter()
        .map(|c| -> Result<Vec<u64>> {
            let responses = views.iter().map(|v| v.respond(c)).collect::<Result<Vec<_>>>()?;
            let mut h = vec![0u64; width + 1];
            for i in 0..responses.len() {
                for j in i + 1..responses.len() {
                    h[responses[i].hamming(&responses[j])] += 1;
                }
            }
            Ok(h)
        })
        .try_reduce(|| vec![0u64; width + 1], |a, b| Ok(merge(a, b)))?;
    Ok(VariationReport::from_histogram(width, histogram))
}

/// Distance between the enrolled (noiseless) response and `n_repeats` noisy
/// re-evaluations, per random challenge, under the active configuration.
pub fn intra_config_variation<T: Real, R: Rng + ?Sized>(
    puf: &Mipuf<T>,
    corrected: bool,
    n_challenges: usize,
    n_repeats: usize,
    rng: &mut R,
) -> Result<VariationReport> {
    if n_repeats < 2 {
        return param("intra-configuration variation needs at least two repeats");
    }
    if n_challenges == 0 {
        return param("intra-configuration variation needs at least one challenge");
    }
    let view = puf.active()?;
    let view = &view;
    let width = puf.response_bits();
    let seeds: Vec<u64> = (0..n_challenges).map(|_| rng.random()).collect();
    let histogram = seeds
        .par_iter()
        .map(|&s| -> Result<Vec<u64>> {
            let mut r = ChaCha8Rng::seed_from_u64(s);
            let c = Challenge::new(Bits::random(puf.challenge_bits(), &mut r));
            let crp = view.enroll(&c, &mut r)?;
            let mut h = vec![0u64; width + 1];
            for _ in 0..n_repeats {
                let out = if corrected {
                    view.evaluate(&c, &crp.helper, true, &mut r)?
                } else {
                    view.evaluate_raw(&c, true, &mut r)?
                };
                h[out.hamming(&crp.response)] += 1;
            }
            Ok(h)
        })
        .try_reduce(|| vec![0u64; width + 1], |a, b| Ok(merge(a, b)))?;
    Ok(VariationReport::from_histogram(width, histogram))
}
