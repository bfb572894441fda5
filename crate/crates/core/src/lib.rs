//! Unsourced random access over massive MIMO without outer coding.
//!
//! Every active user splits its `B`-bit message into `L` chunks of `J` bits
//! and sends chunk `l` in slot `l` as one column of a common circulant
//! Gaussian codebook. The receiver decodes each slot independently with a
//! group-sparse HyGAMP solver that also returns MMSE estimates of the users'
//! channel vectors. Because a user's channel barely changes between slots,
//! those estimates are clustered with a Gaussian mixture fitted by EM, and a
//! per-slot Hungarian assignment stitches the chunks back into messages.
//!
//! Module map:
//!
//! * [`codebook`]: partial circulant codebook with FFT-backed products
//! * [`encoder`]: message/chunk conversion and collision bookkeeping
//! * [`channel`]: user placement, pathloss, Rayleigh fading, slot MAC
//! * [`hygamp`]: Bernoulli-Laplacian HyGAMP with nested EM learning
//! * [`clustering`]: GMM-EM, Hungarian solver, constrained stitching
//! * [`harness`]: Monte-Carlo trials, sweeps and result files
//!
//! The `examples/` directory of this crate has one runnable program per
//! capability.

pub mod channel;
pub mod clustering;
pub mod codebook;
pub mod encoder;
mod error;
pub mod harness;
pub mod hygamp;
pub mod special;

pub use error::{Error, Result};

pub use num_complex::Complex64;
