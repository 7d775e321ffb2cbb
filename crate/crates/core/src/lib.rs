//! Similarity scoring and similarity-monitored diffusion training for
//! multi-axis time series.
//!
//! The crate is organised bottom-up:
//!
//! * [`signal`] — time-domain windows, datasets, splitting and a synthetic
//!   cyclic-activity generator.
//! * [`spectral`] — Hann windowing, STFT/ISTFT and Welch PSD estimation.
//! * [`similarity`] — cosine, Pearson and RMSE scores plus multi-axis
//!   aggregation and score matrices.
//! * [`gak`] — the global alignment kernel, its path-enumeration oracle and
//!   class-optimised sigma calibration.
//! * [`nn`] — a dense network with analytic gradients and Adam.
//! * [`diffusion`] — a DDPM over stacked STFT frames.
//! * [`monitor`] — early-stopping state machines for training and denoising.
//! * [`eval`] — training-set construction, a proxy classifier, macro F1,
//!   leave-one-subject-out orchestration and epoch-reduction reporting.
//!
//! Numerical kernels are generic over [`Real`] (`f32` or `f64`); the
//! diffusion pipeline is fixed to `f64`. Concrete aliases for the common
//! instantiations live at the crate root.

pub mod diffusion;
pub mod error;
pub mod eval;
pub mod gak;
pub mod monitor;
pub mod nn;
pub mod signal;
pub mod similarity;
pub mod spectral;

use std::fmt::{Debug, Display};

pub use error::{Error, Result};

/// Floating-point scalar accepted by the numerical modules.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + rustfft::FftNum
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::iter::Sum
    + Default
    + Debug
    + Display
    + serde::Serialize
    + serde::de::DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; exact for `f64`.
    fn of(v: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(v).expect("f64 is representable")
    }

    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("float converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type TimeWindow = signal::TimeWindow<f64>;
pub type TimeWindowF32 = signal::TimeWindow<f32>;
pub type LabeledWindow = signal::LabeledWindow<f64>;
pub type Dataset = signal::Dataset<f64>;
pub type Spectrogram = spectral::Spectrogram<f64>;
pub type PsdVector = spectral::PsdVector<f64>;
pub type PsdVectorF32 = spectral::PsdVector<f32>;
pub type ScoreMatrix = similarity::ScoreMatrix<f64>;
pub type GakParams = gak::GakParams<f64>;
pub type GakCalibration = gak::GakCalibration<f64>;
pub type DenseNet = nn::DenseNet<f64>;
pub type DenseNetF32 = nn::DenseNet<f32>;
pub type OptimizerState = nn::OptimizerState<f64>;

/// Deterministic RNG for a seed plus a path of stream identifiers, so that
/// independent consumers (training batches, probes, splits) never share a
/// random stream.
pub fn seeded_rng(seed: u64, stream: &[u64]) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

/// The 64-bit seed behind [`seeded_rng`].
pub fn derive_seed(seed: u64, stream: &[u64]) -> u64 {
    let mut state = splitmix64(seed ^ 0x5eed_0f_d1ff_u64);
    for &s in stream {
        state = splitmix64(state ^ splitmix64(s.wrapping_add(0x9e37_79b9)));
    }
    state
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
