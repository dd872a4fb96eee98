//! Detector-atom decomposition of single-channel time series.
//!
//! A decomposer represents a signal as a sum of short learned waveforms
//! ("atoms"), each convolved with a non-negative activation produced by a
//! small causal convolutional "detector". Four variants are provided:
//!
//! - [`BasicDecomposer`]: independent detector-atom pairs.
//! - [`NoiseDecomposer`]: noise and signal estimators trained from noise-event masks.
//! - [`SsvepDecomposer`]: one detector per stimulus class sharing one atom.
//! - [`ErpDecomposer`]: scalar detectors weighting full-length atoms.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below are what the command-line tool uses.

// `!(a >= b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub(crate) mod conv;
pub mod error;
pub mod grad;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod signal;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use grad::{AdamConfig, AdamState, Gradients, NodeId, ParamId, ParamStore, Tape};
pub use model::{
    Architecture, BasicDecomposer, Decompose, Decomposer, Decomposition, ErpDecomposer, ModelConfig, NoiseDecomposer,
    SsvepDecomposer,
};
pub use scalar::Scalar;
pub use signal::{Dataset, LabeledSample, MultiSignal, NoiseMask, Signal};
pub use trainer::{train, TrainConfig, TrainHistory};

pub type Signal64 = Signal<f64>;
pub type Dataset64 = Dataset<f64>;
pub type Decomposer64 = Decomposer<f64>;
pub type Decomposer32 = Decomposer<f32>;
pub type Tape64 = Tape<f64>;
