//! Trellis-unfolded bit-flipping, min-sum and belief-propagation decoders,
//! their trainable variants, an STT-MRAM read channel with resistance offset,
//! and a raw-BER driven adaptive decoding controller.

pub mod adaptive;
pub mod alist;
pub mod channel;
pub mod code;
pub mod cost;
pub mod decode;
pub mod error;
pub mod graph;
pub mod kind;
pub mod sim;
pub mod tape;
pub mod train;

pub use code::{build_hamming, code_by_name, LinearCode};
pub use error::{Error, Result};
pub use graph::UnfoldedGraph;
pub use kind::{DecoderKind, Family};
