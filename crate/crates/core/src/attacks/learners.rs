// SPDX-License-Identifier: Apache-2.0

//! Logistic regression and a self-adaptive evolution strategy, both over the
//! parity feature map of the challenge.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::dataset::CrpDataset;
use crate::error::{Error, Result};
use crate::puf_core::parity_features;
use crate::scalar::Real;

/// Row-major parity features with one label per row.
#[derive(Clone, Debug)]
pub struct Features<T> {
    dim: usize,
    x: Vec<T>,
    y: Vec<bool>,
}

impl<T: Real> Features<T> {
    pub fn from_rows(ds: &CrpDataset, rows: std::ops::Range<usize>, bit: usize) -> Result<Self> {
        let labels = ds.labels(bit)?;
        let dim = ds.width() + 1;
        let mut x = Vec::with_capacity(rows.len() * dim);
        for c in &ds.challenges()[rows.clone()] {
            x.extend(parity_features::<T>(c));
        }
        Ok(Features {
            dim,
            x,
            y: labels[rows].to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn row(&self, i: usize) -> &[T] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    fn take(&self, n: usize) -> Features<T> {
        let n = n.min(self.len());
        Features {
            dim: self.dim,
            x: self.x[..n * self.dim].to_vec(),
            y: self.y[..n].to_vec(),
        }
    }
}

fn dot<T: Real>(w: &[T], x: &[T]) -> T {
    w.iter().zip(x).map(|(&a, &b)| a * b).sum()
}

/// Fraction of rows where `w · φ > 0` matches the label.
pub fn accuracy<T: Real>(w: &[T], f: &Features<T>) -> f64 {
    if f.is_empty() {
        return 0.0;
    }
    let hits = (0..f.len()).filter(|&i| (dot(w, f.row(i)) > T::zero()) == f.y[i]).count();
    hits as f64 / f.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LrParams {
    fn default() -> Self {
        LrParams {
            learning_rate: 0.05,
            epochs: 200,
            l2: 0.0,
        }
    }
}

/// Stochastic gradient descent on the logistic loss, one shuffled pass per
/// epoch, from a small random start.
pub fn lr_train<T: Real, R: Rng + ?Sized>(train: &Features<T>, p: &LrParams, rng: &mut R) -> Vec<T> {
    let lr = T::of(p.learning_rate);
    let l2 = T::of(p.l2);
    let mut w: Vec<T> = (0..train.dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            T::of(0.01 * z)
        })
        .collect();
    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..p.epochs {
        order.shuffle(rng);
        for &i in &order {
            let x = train.row(i);
            let z = dot(&w, x);
            let prob = T::one() / (T::one() + (-z).exp());
            let target = if train.y[i] { T::one() } else { T::zero() };
            let g = prob - target;
            for (wj, &xj) in w.iter_mut().zip(x) {
                *wj = *wj - lr * (g * xj + l2 * *wj);
            }
        }
    }
    w
}

/// `(μ/μ, λ)` evolution strategy with one self-adapted step size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EsParams {
    pub mu: usize,
    pub lambda: usize,
    pub generations: usize,
    pub sigma0: f64,
    /// Training rows used to score each candidate.
    pub fitness_rows: usize,
}

impl Default for EsParams {
    fn default() -> Self {
        EsParams {
            mu: 10,
            lambda: 40,
            generations: 150,
            sigma0: 1.0,
            fitness_rows: 2000,
        }
    }
}

impl EsParams {
    pub fn validate(&self) -> Result<()> {
        if self.mu == 0 || self.lambda < self.mu || self.fitness_rows == 0 {
            return Err(Error::Parameter(format!(
                "ES needs 1 <= mu <= lambda and scoring rows, got mu={} lambda={}",
                self.mu, self.lambda
            )));
        }
        if !(self.sigma0 >= 0.0 && self.sigma0.is_finite()) {
            return Err(Error::Parameter(format!("sigma0 {} must be finite and >= 0", self.sigma0)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EsOutcome<T> {
    pub initial: Vec<T>,
    /// Best candidate by training fitness over all generations.
    pub best: Vec<T>,
}

pub fn es_train<T: Real, R: Rng + ?Sized>(train: &Features<T>, p: &EsParams, rng: &mut R) -> Result<EsOutcome<T>> {
    p.validate()?;
    let scoring = train.take(p.fitness_rows);
    let dim = train.dim;
    let tau = 1.0 / (dim as f64).sqrt();
    let gauss = |rng: &mut R| -> f64 { StandardNormal.sample(rng) };
    let initial: Vec<T> = (0..dim).map(|_| T::of(gauss(rng))).collect();
    let mut centre = initial.clone();
    let mut sigma = p.sigma0;
    let mut best = (accuracy(&initial, &scoring), initial.clone());
    for _ in 0..p.generations {
        let mut children: Vec<(f64, f64, Vec<T>)> = (0..p.lambda)
            .map(|_| {
                let s = sigma * (tau * gauss(rng)).exp();
                let w: Vec<T> = centre.iter().map(|&c| c + T::of(s * gauss(rng))).collect();
                (accuracy(&w, &scoring), s, w)
            })
            .collect();
        children.sort_by(|a, b| b.0.total_cmp(&a.0));
        children.truncate(p.mu);
        if children[0].0 > best.0 {
            best = (children[0].0, children[0].2.clone());
        }
        let k = T::of(1.0 / p.mu as f64);
        centre = (0..dim)
            .map(|j| children.iter().map(|c| c.2[j]).sum::<T>() * k)
            .collect();
        sigma = (children.iter().map(|c| c.1.max(f64::MIN_POSITIVE).ln()).sum::<f64>() / p.mu as f64).exp();
        if p.sigma0 == 0.0 {
            sigma = 0.0;
        }
    }
    Ok(EsOutcome { initial, best: best.1 })
}

/// Per-run held-out accuracies of one attack on one architecture.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackResult {
    pub architecture: String,
    pub attack: String,
    pub accuracies: Vec<f64>,
    pub best: f64,
}

impl AttackResult {
    pub fn new(architecture: impl Into<String>, attack: impl Into<String>, accuracies: Vec<f64>) -> Self {
        let best = accuracies.iter().copied().fold(0.0, f64::max);
        AttackResult {
            architecture: architecture.into(),
            attack: attack.into(),
            accuracies,
            best,
        }
    }

    pub fn csv_header() -> &'static str {
        "architecture,attack,run,accuracy\n"
    }

    pub fn csv_rows(&self) -> String {
        self.accuracies
            .iter()
            .enumerate()
            .map(|(i, a)| format!("{},{},{i},{a:.6}\n", self.architecture, self.attack))
            .collect()
    }
}

/// Rows held out for testing: a fifth of the data, at least 1,000.
pub fn test_rows(len: usize) -> Result<usize> {
    let n = (len / 5).max(1000);
    if n >= len {
        return Err(Error::Dataset(format!(
            "{len} CRPs cannot hold out 1000 test rows and still train"
        )));
    }
    Ok(n)
}

fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

fn split<T: Real>(ds: &CrpDataset, bit: usize) -> Result<(Features<T>, Features<T>)> {
    let (train, test) = ds.split(test_rows(ds.len())?)?;
    Ok((Features::from_rows(ds, train, bit)?, Features::from_rows(ds, test, bit)?))
}

/// Independent runs in parallel, each with its own generator stream.
pub fn lr_attack<T: Real>(
    ds: &CrpDataset,
    architecture: &str,
    bit: usize,
    runs: usize,
    p: &LrParams,
    seed: u64,
) -> Result<AttackResult> {
    let (train, test) = split::<T>(ds, bit)?;
    let acc: Vec<f64> = (0..runs.max(1))
        .into_par_iter()
        .map(|run| accuracy(&lr_train(&train, p, &mut run_rng(seed, run)), &test))
        .collect();
    Ok(AttackResult::new(architecture, "LR", acc))
}

pub fn es_attack<T: Real>(
    ds: &CrpDataset,
    architecture: &str,
    bit: usize,
    runs: usize,
    p: &EsParams,
    seed: u64,
) -> Result<AttackResult> {
    p.validate()?;
    let (train, test) = split::<T>(ds, bit)?;
    let acc = (0..runs.max(1))
        .into_par_iter()
        .map(|run| es_train(&train, p, &mut run_rng(seed, run)).map(|o| accuracy(&o.best, &test)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(AttackResult::new(architecture, "ES", acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::dataset::collect_crps;
    use crate::puf_core::ArbiterPufModel;

    fn arbiter_data(n: usize) -> CrpDataset {
        let puf = ArbiterPufModel::<f64>::sample(5, 16, 1.0, 0.0).unwrap();
        collect_crps(&puf, n, &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
    }

    #[test]
    fn true_weights_classify_perfectly() {
        let puf = ArbiterPufModel::<f64>::sample(5, 16, 1.0, 0.0).unwrap();
        let ds = arbiter_data(500);
        let f = Features::<f64>::from_rows(&ds, 0..500, 0).unwrap();
        assert_eq!(accuracy(puf.weights(), &f), 1.0);
        let neg: Vec<f64> = puf.weights().iter().map(|w| -w).collect();
        assert_eq!(accuracy(&neg, &f), 0.0);
    }

    #[test]
    fn degenerate_es_keeps_its_initial_hypothesis() {
        let ds = arbiter_data(2000);
        let f = Features::<f64>::from_rows(&ds, 0..2000, 0).unwrap();
        let p = EsParams {
            mu: 1,
            lambda: 1,
            generations: 20,
            sigma0: 0.0,
            fitness_rows: 2000,
        };
        let out = es_train(&f, &p, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(out.best, out.initial);
    }

    #[test]
    fn runs_are_independent_of_thread_count() {
        let ds = arbiter_data(3000);
        let p = LrParams {
            epochs: 5,
            ..LrParams::default()
        };
        let a = lr_attack::<f64>(&ds, "arbiter", 0, 3, &p, 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| lr_attack::<f64>(&ds, "arbiter", 0, 3, &p, 9).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.best, a.accuracies.iter().copied().fold(0.0, f64::max));
    }

    #[test]
    fn small_datasets_cannot_hold_out_enough_rows() {
        assert!(test_rows(1000).is_err());
        assert_eq!(test_rows(10_000).unwrap(), 2000);
        assert_eq!(test_rows(2500).unwrap(), 1000);
    }
}
