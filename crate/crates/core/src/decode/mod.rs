//! The six decoders on the shared unfolded graph.
//!
//! Sign convention: positive LLR favors bit 0; a soft output of exactly zero
//! decides 0. Every engine checks the input hard decisions first and returns
//! them untouched when they already form a codeword.
//!
//! Op tallies follow the arithmetic of the update rules: a `d`-term
//! accumulation costs `d` additions, sign application is not a
//! multiplication, and the halving/doubling around `tanh`/`atanh` belongs to
//! the tanh-class operation together with its saturation clamp. Termination
//! syndrome checks and hard decisions are control, not decoding arithmetic,
//! and are not tallied.

mod bitflip;
mod bp;
mod minsum;
mod weights;

use crate::cost::OpCounts;
use crate::error::{Error, Result};
use crate::graph::UnfoldedGraph;
use crate::kind::{DecoderKind, Family};

pub use bitflip::decode_bf;
pub use bp::decode_bp;
pub use minsum::decode_ms;
pub use weights::{parse_weights, WeightSet};

pub(crate) use bitflip::decode_bf_scheduled;
pub(crate) use bp::{decode_bp_scheduled, TANH_CLAMP};
pub(crate) use minsum::decode_ms_scheduled;

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    pub word: Vec<u8>,
    /// Syndrome of `word` is zero.
    pub success: bool,
    /// Flips performed (BF family) or message-passing iterations run.
    pub iterations_used: usize,
    /// Syndrome weight after each iteration; length `iterations_used`.
    pub per_iteration_syndrome_weight: Vec<usize>,
    pub op_counts: OpCounts,
}

/// What the channel hands the decoder: detector bits, LLRs, or both.
#[derive(Debug, Clone, Copy, Default)]
pub struct DecoderInput<'a> {
    pub hard: Option<&'a [u8]>,
    pub llr: Option<&'a [f64]>,
}

impl<'a> DecoderInput<'a> {
    pub fn hard(bits: &'a [u8]) -> Self {
        DecoderInput {
            hard: Some(bits),
            llr: None,
        }
    }

    pub fn soft(llr: &'a [f64]) -> Self {
        DecoderInput {
            hard: None,
            llr: Some(llr),
        }
    }

    pub fn both(bits: &'a [u8], llr: &'a [f64]) -> Self {
        DecoderInput {
            hard: Some(bits),
            llr: Some(llr),
        }
    }
}

/// Runs `kind` on `graph` for at most `max_iter` iterations.
pub fn run(
    kind: DecoderKind,
    graph: &UnfoldedGraph,
    input: DecoderInput<'_>,
    weights: &WeightSet,
    max_iter: usize,
) -> Result<DecodeOutcome> {
    dispatch(kind, graph, input, weights, max_iter, |_| true)
}

/// Runs all `graph.iterations()` iterations with termination disabled, for
/// op-count instrumentation. `success` still reports the final syndrome.
pub fn run_full(
    kind: DecoderKind,
    graph: &UnfoldedGraph,
    input: DecoderInput<'_>,
    weights: &WeightSet,
) -> Result<DecodeOutcome> {
    dispatch(kind, graph, input, weights, graph.iterations(), |_| false)
}

fn dispatch(
    kind: DecoderKind,
    graph: &UnfoldedGraph,
    input: DecoderInput<'_>,
    weights: &WeightSet,
    max_iter: usize,
    may_stop: fn(usize) -> bool,
) -> Result<DecodeOutcome> {
    if weights.kind() != kind {
        return Err(Error::param(format!(
            "decoder {kind} given {} weights",
            weights.kind()
        )));
    }
    let llr = || {
        input
            .llr
            .ok_or_else(|| Error::param(format!("{kind} needs channel LLRs")))
    };
    match kind.family() {
        Family::BitFlip => {
            let hard = input
                .hard
                .ok_or_else(|| Error::param(format!("{kind} needs hard detector bits")))?;
            decode_bf_scheduled(graph, hard, weights, max_iter, may_stop)
        }
        Family::MinSum => decode_ms_scheduled(graph, llr()?, weights, max_iter, may_stop),
        Family::BeliefProp => decode_bp_scheduled(graph, llr()?, weights, max_iter, may_stop),
    }
}

pub(crate) fn check_common(
    graph: &UnfoldedGraph,
    len: usize,
    weights: &WeightSet,
    family: Family,
    max_iter: usize,
) -> Result<()> {
    if weights.kind().family() != family {
        return Err(Error::param(format!(
            "{} weights used with the {family:?} engine",
            weights.kind()
        )));
    }
    let n = graph.code().n();
    if len != n {
        return Err(Error::param(format!(
            "input has {len} entries, expected {n}"
        )));
    }
    if max_iter > graph.iterations() {
        return Err(Error::param(format!(
            "max_iter {max_iter} exceeds the graph's {} iterations",
            graph.iterations()
        )));
    }
    weights.check_against(graph)
}

/// Hard decision of a soft output: negative decides 1, zero decides 0.
#[inline]
pub(crate) fn decide(o: f64) -> u8 {
    u8::from(o < 0.0)
}
