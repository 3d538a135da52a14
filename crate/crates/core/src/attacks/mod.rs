// SPDX-License-Identifier: Apache-2.0

//! Modeling attacks on collected CRPs and the effect of reconfiguration on a
//! trained model.

pub mod dataset;
pub mod learners;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mipuf::Mipuf;
use crate::scalar::Real;

pub use dataset::{collect_crps, CrpDataset, CrpRow, CrpSource, MipufAt, UNCONFIGURED};
pub use learners::{
    accuracy, es_attack, es_train, lr_attack, lr_train, test_rows, AttackResult, EsOutcome, EsParams, Features,
    LrParams,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Attack {
    Lr(LrParams),
    Es(EsParams),
}

impl Attack {
    pub fn name(&self) -> &'static str {
        match self {
            Attack::Lr(_) => "LR",
            Attack::Es(_) => "ES",
        }
    }

    /// Trains on `train` and returns the model weights.
    pub fn train<T: Real>(&self, train: &Features<T>, rng: &mut ChaCha8Rng) -> Result<Vec<T>> {
        match self {
            Attack::Lr(p) => Ok(lr_train(train, p, rng)),
            Attack::Es(p) => Ok(es_train(train, p, rng)?.best),
        }
    }
}

/// One training phase followed by a test on the next phase's CRPs.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseResult {
    pub phase: usize,
    pub gamma: String,
    /// Held-out accuracy within the training phase.
    pub holdout: f64,
    /// Accuracy of the same model on the next phase.
    pub stale: f64,
}

/// Trains in phase `i`, optionally reconfigures with a fresh random `γ`, and
/// tests the stale model on phase `i + 1`.
pub fn attack_vs_reconfiguration<T: Real>(
    puf: &Mipuf<T>,
    attack: &Attack,
    bit: usize,
    crps_per_phase: usize,
    phases: usize,
    reconfigure: bool,
    seed: u64,
) -> Result<Vec<PhaseResult>> {
    if phases < 2 {
        return Err(Error::Parameter("reconfiguration study needs at least two phases".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = puf.random_seed(&mut rng);
    let mut data = Vec::with_capacity(phases);
    for i in 0..phases {
        let gamma = if reconfigure && i > 0 { puf.random_seed(&mut rng) } else { first.clone() };
        data.push(collect_crps(&MipufAt::new(puf, &gamma)?, crps_per_phase, &mut rng)?);
    }
    let mut out = Vec::with_capacity(phases - 1);
    for i in 0..phases - 1 {
        let ds = &data[i];
        let (train, test) = ds.split(test_rows(ds.len())?)?;
        let model = attack.train(&Features::<T>::from_rows(ds, train, bit)?, &mut rng)?;
        let next = &data[i + 1];
        out.push(PhaseResult {
            phase: i,
            gamma: ds.gamma().to_string(),
            holdout: accuracy(&model, &Features::from_rows(ds, test, bit)?),
            stale: accuracy(&model, &Features::from_rows(next, 0..next.len(), bit)?),
        });
    }
    Ok(out)
}
