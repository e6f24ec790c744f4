//! Quasi-cyclic LDPC codes, neural min-sum decoding, and training of the
//! decoder weights on frames that plain decoding leaves uncorrected.

pub mod channel;
pub mod code;
pub mod decoder;
pub mod error;
pub mod harness;
pub mod io;
pub mod pipeline;
pub mod presets;
pub mod train;
pub mod weights;

pub use error::{Error, Result};
