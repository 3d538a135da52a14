// SPDX-License-Identifier: Apache-2.0

//! Arbiter PUFs under the additive linear delay model, and MIPUF nodes made of
//! `m` of them evaluated in parallel on one challenge.
//!
//! A challenge `c` of `n` bits maps to the parity features
//! `φ_j = Π_{i ≥ j} (1 − 2 c_i)` for `j = 1..n` plus a constant `φ_{n+1} = 1`.
//! The response is `1` iff `Σ w_j φ_j + ε > 0`, where the last weight is the
//! arbiter bias and `ε ~ N(0, σ_noise²)` is drawn only for noisy evaluations.
//! An exact zero sum answers `0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::bits::{Bits, Challenge, ResponseWord};
use crate::error::{param, Error, Result};
use crate::scalar::Real;

/// Parity feature vector of `c`, length `c.len() + 1`.
pub fn parity_features<T: Real>(c: &Bits) -> Vec<T> {
    let n = c.len();
    let mut phi = vec![T::one(); n + 1];
    let mut acc = T::one();
    for i in (0..n).rev() {
        if c.get(i) {
            acc = -acc;
        }
        phi[i] = acc;
    }
    phi
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArbiterPufModel<T> {
    /// `n_stages` stage deltas followed by the arbiter bias.
    weights: Vec<T>,
    noise_sigma: T,
}

impl<T: Real> ArbiterPufModel<T> {
    pub fn new(weights: Vec<T>, noise_sigma: T) -> Result<Self> {
        if weights.len() < 2 {
            return param("arbiter PUF needs at least one stage");
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return param("stage deltas must be finite");
        }
        check_sigma(noise_sigma)?;
        Ok(ArbiterPufModel {
            weights,
            noise_sigma,
        })
    }

    /// Draws `n_stages + 1` i.i.d. `N(0, param_sigma²)` delays from a
    /// generator seeded by `seed`.
    pub fn sample(seed: u64, n_stages: usize, param_sigma: f64, noise_sigma: f64) -> Result<Self> {
        if n_stages == 0 {
            return param("n_stages must be at least 1");
        }
        if !(param_sigma > 0.0 && param_sigma.is_finite()) {
            return param(format!("param_sigma must be positive, got {param_sigma}"));
        }
        check_sigma(noise_sigma)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, param_sigma).expect("validated sigma");
        let weights = (0..=n_stages).map(|_| T::of(normal.sample(&mut rng))).collect();
        Ok(ArbiterPufModel {
            weights,
            noise_sigma: T::of(noise_sigma),
        })
    }

    pub fn n_stages(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn noise_sigma(&self) -> T {
        self.noise_sigma
    }

    pub fn set_noise_sigma(&mut self, sigma: f64) -> Result<()> {
        check_sigma(sigma)?;
        self.noise_sigma = T::of(sigma);
        Ok(())
    }

    /// Noise-free delay difference for precomputed features.
    pub fn delay(&self, features: &[T]) -> T {
        debug_assert_eq!(features.len(), self.weights.len());
        self.weights
            .iter()
            .zip(features)
            .map(|(&w, &f)| w * f)
            .sum()
    }

    pub fn eval_features<R: Rng + ?Sized>(&self, features: &[T], noisy: bool, rng: &mut R) -> bool {
        let mut d = self.delay(features);
        if noisy && self.noise_sigma > T::zero() {
            let z: f64 = StandardNormal.sample(rng);
            d = d + self.noise_sigma * T::of(z);
        }
        d > T::zero()
    }

    pub fn eval<R: Rng + ?Sized>(&self, c: &Challenge, noisy: bool, rng: &mut R) -> Result<bool> {
        check_width(c, self.n_stages())?;
        Ok(self.eval_features(&parity_features(c), noisy, rng))
    }
}

fn check_sigma<S: Real>(sigma: S) -> Result<()> {
    if !(sigma >= S::zero() && sigma.is_finite()) {
        return param(format!("noise_sigma must be finite and >= 0, got {sigma}"));
    }
    Ok(())
}

fn check_width(c: &Bits, n_stages: usize) -> Result<()> {
    if c.len() != n_stages {
        return param(format!(
            "challenge has {} bits, PUF expects {n_stages}",
            c.len()
        ));
    }
    Ok(())
}

/// `m` arbiter PUFs sharing one challenge; bit `k` of the output is PUF `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct PufNode<T> {
    pufs: Vec<ArbiterPufModel<T>>,
}

impl<T: Real> PufNode<T> {
    pub fn new(pufs: Vec<ArbiterPufModel<T>>) -> Result<Self> {
        let Some(first) = pufs.first() else {
            return param("a node needs at least one PUF");
        };
        let n = first.n_stages();
        if pufs.iter().any(|p| p.n_stages() != n) {
            return param("all PUFs of a node must share the challenge width");
        }
        Ok(PufNode { pufs })
    }

    /// `m` PUFs whose seeds are drawn from a generator seeded by `seed`.
    pub fn sample(
        seed: u64,
        m: usize,
        n_stages: usize,
        param_sigma: f64,
        noise_sigma: f64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pufs = (0..m)
            .map(|_| ArbiterPufModel::sample(rng.random(), n_stages, param_sigma, noise_sigma))
            .collect::<Result<Vec<_>>>()?;
        PufNode::new(pufs)
    }

    pub fn m(&self) -> usize {
        self.pufs.len()
    }

    pub fn n_stages(&self) -> usize {
        self.pufs[0].n_stages()
    }

    pub fn pufs(&self) -> &[ArbiterPufModel<T>] {
        &self.pufs
    }

    pub fn set_noise_sigma(&mut self, sigma: f64) -> Result<()> {
        self.pufs.iter_mut().try_for_each(|p| p.set_noise_sigma(sigma))
    }

    pub fn eval<R: Rng + ?Sized>(&self, c: &Challenge, noisy: bool, rng: &mut R) -> Result<ResponseWord> {
        check_width(c, self.n_stages())?;
        let phi = parity_features::<T>(c);
        Ok(ResponseWord::new(
            self.pufs
                .iter()
                .map(|p| p.eval_features(&phi, noisy, rng))
                .collect(),
        ))
    }
}

/// Monte-Carlo setup for [`calibrate_noise`].
#[derive(Clone, Debug)]
pub struct NoiseCalibration {
    pub n_stages: usize,
    pub param_sigma: f64,
    /// Evaluations per bisection probe.
    pub samples: usize,
    /// Distinct sampled PUFs the evaluations are spread over.
    pub models: usize,
    pub seed: u64,
}

impl NoiseCalibration {
    pub fn new(n_stages: usize, param_sigma: f64, seed: u64) -> Self {
        NoiseCalibration {
            n_stages,
            param_sigma,
            samples: 100_000,
            models: 16,
            seed,
        }
    }
}

/// Finds the noise sigma whose single-PUF bit-error rate against the
/// noiseless response matches `target_ber`.
///
/// Every probe reuses the same challenges and standard-normal draws, so the
/// estimated error rate is monotone in sigma and bisection converges.
pub fn calibrate_noise(target_ber: f64, cal: &NoiseCalibration) -> Result<f64> {
    if target_ber == 0.0 {
        return Ok(0.0);
    }
    if !(target_ber > 0.0 && target_ber < 0.5) {
        return Err(Error::Calibration(format!(
            "target bit-error rate {target_ber} outside (0, 0.5)"
        )));
    }
    if cal.samples == 0 || cal.models == 0 {
        return param("calibration needs samples and models");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cal.seed);
    let models = (0..cal.models)
        .map(|_| ArbiterPufModel::<f64>::sample(rng.random(), cal.n_stages, cal.param_sigma, 0.0))
        .collect::<Result<Vec<_>>>()?;
    // (|delay|, noise draw) pairs where the noise pushes against the sign.
    let draws: Vec<(f64, f64)> = (0..cal.samples)
        .map(|i| {
            let c = Bits::random(cal.n_stages, &mut rng);
            let d = models[i % models.len()].delay(&parity_features(&c));
            let z: f64 = StandardNormal.sample(&mut rng);
            (d, z)
        })
        .collect();
    let ber = |sigma: f64| {
        let flips = draws
            .iter()
            .filter(|&&(d, z)| (d > 0.0) != (d + sigma * z > 0.0))
            .count();
        flips as f64 / draws.len() as f64
    };

    let mut hi = cal.param_sigma;
    while ber(hi) < target_ber {
        hi *= 2.0;
        if hi > cal.param_sigma * 1e6 {
            return Err(Error::Calibration(format!(
                "bit-error rate {target_ber} not reachable"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ber(mid) < target_ber {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let achieved = ber(hi);
    if (achieved - target_ber).abs() > 0.1 * target_ber {
        return Err(Error::Calibration(format!(
            "achieved {achieved} for target {target_ber}"
        )));
    }
    Ok(hi)
}
