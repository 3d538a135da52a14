// SPDX-License-Identifier: Apache-2.0

//! Simulator of a multistage interconnected PUF (MIPUF) and a group key
//! management protocol built on it, with modeling attacks, a discrete-event
//! network simulator and a closed-form cost model.

pub mod attacks;
pub mod bits;
pub mod codec;
pub mod costmodel;
pub mod error;
pub mod hash;
pub mod interconnect;
pub mod mipuf;
pub mod netsim;
pub mod protocol;
pub mod puf_core;
pub mod scalar;

pub use error::{Error, Result};
pub use mipuf::{Geometry, Mipuf};
pub use puf_core::{ArbiterPufModel, PufNode};
pub use scalar::{CostScalar, Real};

pub type Arbiter = ArbiterPufModel<f64>;
pub type Arbiter32 = ArbiterPufModel<f32>;
pub type Node = PufNode<f64>;
pub type Node32 = PufNode<f32>;
pub type Mipuf64 = Mipuf<f64>;
pub type Mipuf32 = Mipuf<f32>;
pub type Energy = costmodel::EnergyParams<f64>;
/// Exact rational energy accounting.
pub type ExactEnergy = costmodel::EnergyParams<num_rational::Ratio<i64>>;
