//! Audio object extraction from 5.1 mixes.
//!
//! A mask-estimation network splits a 5.1 excerpt into a fixed number of
//! audio objects (mono track plus xy trajectory) and a residual 5.1 bed.
//! Training never compares objects directly: the extracted production is
//! rendered back to one or more speaker layouts by a differentiable
//! amplitude-panning renderer and compared against reference renders.
//!
//! Module map:
//!
//! - [`dsp`]: STFT, mel filterbank, mask broadcast and application, WAV I/O.
//! - [`spatial`]: speaker layouts, constant-power panner with trim, renderer,
//!   de-panner and de-trimmer, all with analytic adjoints.
//! - [`model`]: the U-Net mask estimator and the encoder pipeline.
//! - [`losses`]: magnitude L1 reconstruction over layouts plus seven
//!   regularizers on object behaviour.
//! - [`training`]: Adam and the supervised / unsupervised-fit / fine-tune loops.
//! - [`datagen`]: procedural scenes, reference renders and on-disk eval sets.
//! - [`eval`]: SI-SDR, baselines, ideal binary masks, permutation search and
//!   report aggregation.
//! - [`config`]: the structured-text run configuration.

pub mod config;
pub mod datagen;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod losses;
pub mod model;
mod par;
pub mod production;
pub mod spatial;
pub mod training;

pub use error::{Error, Result};
pub use production::{ObjectProduction, ObjectTrack, ProductionFiles, ProductionGrad};
