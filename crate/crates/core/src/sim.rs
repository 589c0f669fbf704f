//! Monte Carlo BER estimation.
//!
//! Trial `i` draws its codeword and read from the ChaCha stream `i` under the
//! job seed, so any split of the trial range over workers gives the same
//! counts. Counts are reduced by integer addition.

use std::ops::Range;

use rand::Rng;

use crate::channel::{hard_detect_into, llr_into, sample_into, stream_rng, ChannelParams};
use crate::decode::{run, DecoderInput, WeightSet};
use crate::error::{Error, Result};
use crate::graph::UnfoldedGraph;
use crate::kind::DecoderKind;

/// Which channel parameters the LLR computation assumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LlrMode {
    /// True parameters including the offset.
    Genie,
    /// Offset-free nominal parameters.
    Mismatched,
}

impl LlrMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LlrMode::Genie => "genie",
            LlrMode::Mismatched => "mismatched",
        }
    }

    pub fn assumed(self, channel: &ChannelParams) -> ChannelParams {
        match self {
            LlrMode::Genie => *channel,
            LlrMode::Mismatched => channel.nominal(),
        }
    }
}

impl std::str::FromStr for LlrMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "genie" => Ok(LlrMode::Genie),
            "mismatched" => Ok(LlrMode::Mismatched),
            _ => Err(Error::param(format!("unknown llr mode {s:?}"))),
        }
    }
}

/// How trials are spread over threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon work stealing; sequential when built without `parallel`.
    #[default]
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BerCounts {
    pub bit_errors: u64,
    pub raw_bit_errors: u64,
    pub block_errors: u64,
    pub bits: u64,
    pub blocks: u64,
}

impl BerCounts {
    pub fn ber(&self) -> f64 {
        ratio(self.bit_errors, self.bits)
    }

    pub fn raw_ber(&self) -> f64 {
        ratio(self.raw_bit_errors, self.bits)
    }

    pub fn bler(&self) -> f64 {
        ratio(self.block_errors, self.blocks)
    }

    pub fn merge(self, o: BerCounts) -> BerCounts {
        BerCounts {
            bit_errors: self.bit_errors + o.bit_errors,
            raw_bit_errors: self.raw_bit_errors + o.raw_bit_errors,
            block_errors: self.block_errors + o.block_errors,
            bits: self.bits + o.bits,
            blocks: self.blocks + o.blocks,
        }
    }

    /// 95 % Wilson score interval of the bit error rate.
    pub fn ber_interval(&self) -> (f64, f64) {
        wilson_interval(self.bit_errors, self.bits, Z95)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Two-sided 95 % normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let hi = if k as f64 == n {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}

/// One decoder at one channel point.
#[derive(Debug, Clone)]
pub struct BerJob<'a> {
    pub graph: &'a UnfoldedGraph,
    pub kind: DecoderKind,
    pub weights: &'a WeightSet,
    pub channel: ChannelParams,
    pub llr_mode: LlrMode,
    /// Fixed detector threshold for hard-input decoders and raw BER.
    pub x_th: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Random codewords when true, all-zero otherwise.
    pub random_codewords: bool,
}

impl BerJob<'_> {
    fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        if self.weights.kind() != self.kind {
            return Err(Error::param(format!(
                "decoder {} given {} weights",
                self.kind,
                self.weights.kind()
            )));
        }
        self.weights.check_against(self.graph)?;
        if self.max_iter > self.graph.iterations() {
            return Err(Error::param("max_iter exceeds graph iterations"));
        }
        Ok(())
    }

    fn run_chunk(&self, trials: Range<u64>) -> Result<BerCounts> {
        let code = self.graph.code();
        let (n, k) = (code.n(), code.k());
        let assumed = self.llr_mode.assumed(&self.channel);
        let mut msg = vec![0u8; k];
        let mut y = vec![0.0; n];
        let mut hard = vec![0u8; n];
        let mut llr = vec![0.0; n];
        let mut counts = BerCounts::default();
        for i in trials {
            let mut rng = stream_rng(self.seed, i);
            let word = if self.random_codewords {
                msg.iter_mut().for_each(|b| *b = rng.random::<bool>() as u8);
                code.encode(&msg)?
            } else {
                vec![0u8; n]
            };
            sample_into(&self.channel, &word, &mut rng, &mut y);
            hard_detect_into(self.x_th, &y, &mut hard);
            let input = if self.kind.needs_llr() {
                llr_into(&assumed, &y, &mut llr);
                DecoderInput::soft(&llr)
            } else {
                DecoderInput::hard(&hard)
            };
            let out = run(self.kind, self.graph, input, self.weights, self.max_iter)?;
            let errs = out.word.iter().zip(&word).filter(|(a, b)| a != b).count() as u64;
            let raw = hard.iter().zip(&word).filter(|(a, b)| a != b).count() as u64;
            counts.bit_errors += errs;
            counts.raw_bit_errors += raw;
            counts.block_errors += u64::from(errs > 0);
            counts.bits += n as u64;
            counts.blocks += 1;
        }
        Ok(counts)
    }
}

const CHUNK: u64 = 256;

/// Counts over trials `range`.
pub fn run_trials(job: &BerJob<'_>, range: Range<u64>, exec: Execution) -> Result<BerCounts> {
    job.validate()?;
    let chunks: Vec<Range<u64>> = (range.start..range.end)
        .step_by(CHUNK as usize)
        .map(|s| s..(s + CHUNK).min(range.end))
        .collect();
    match exec {
        Execution::Sequential => sequential(job, chunks),
        Execution::Parallel => parallel(job, chunks),
    }
}

fn sequential(job: &BerJob<'_>, chunks: Vec<Range<u64>>) -> Result<BerCounts> {
    chunks.into_iter().try_fold(BerCounts::default(), |acc, c| {
        Ok(acc.merge(job.run_chunk(c)?))
    })
}

#[cfg(feature = "parallel")]
fn parallel(job: &BerJob<'_>, chunks: Vec<Range<u64>>) -> Result<BerCounts> {
    use rayon::prelude::*;
    chunks
        .into_par_iter()
        .map(|c| job.run_chunk(c))
        .try_reduce(BerCounts::default, |a, b| Ok(a.merge(b)))
}

#[cfg(not(feature = "parallel"))]
fn parallel(job: &BerJob<'_>, chunks: Vec<Range<u64>>) -> Result<BerCounts> {
    sequential(job, chunks)
}

pub fn simulate(job: &BerJob<'_>, trials: u64, exec: Execution) -> Result<BerCounts> {
    run_trials(job, 0..trials, exec)
}

/// Keeps doubling the trial count from `min_trials` until the Wilson
/// half-width drops below `rel_half_width` of the BER estimate or
/// `max_trials` is reached. Extra trials continue the same stream sequence.
pub fn simulate_until(
    job: &BerJob<'_>,
    min_trials: u64,
    max_trials: u64,
    rel_half_width: f64,
    exec: Execution,
) -> Result<BerCounts> {
    if min_trials == 0 || max_trials < min_trials {
        return Err(Error::param("need 1 <= min_trials <= max_trials"));
    }
    let mut done = min_trials;
    let mut counts = run_trials(job, 0..done, exec)?;
    loop {
        let (lo, hi) = counts.ber_interval();
        let precise = counts.bit_errors > 0 && 0.5 * (hi - lo) < rel_half_width * counts.ber();
        if precise || done >= max_trials {
            return Ok(counts);
        }
        let next = (2 * done).min(max_trials);
        counts = counts.merge(run_trials(job, done..next, exec)?);
        done = next;
    }
}
