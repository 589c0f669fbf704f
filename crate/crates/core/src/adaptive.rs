//! Raw-BER driven adaptive decoding.
//!
//! Three error-correction levels (bit flipping, offset min-sum, belief
//! propagation) are tried in ascending order. The entry level comes from the
//! estimated raw BER. Within a level the decoder checks the syndrome after
//! every scheduled iteration and stops on success. A level that fails at its
//! last iteration hands over to the next level, which restarts from the
//! channel read. The last level's word is returned whatever its syndrome.

use crate::channel::{
    analytic_raw_ber, hard_detect, llr, nominal_threshold, ChannelParams, ReadBlock,
};
use crate::cost::{trace_cost, CostRatios, OpCounts};
use crate::decode::{
    decode_bf, decode_bp_scheduled, decode_ms_scheduled, DecodeOutcome, WeightSet,
};
use crate::error::{Error, Result};
use crate::graph::UnfoldedGraph;
use crate::kind::{DecoderKind, Family};

/// Default number of reference cells per raw-BER estimate.
pub const DEFAULT_N_REF: usize = 10_000;

/// Spread breakpoints separating the levels.
pub const SPREAD_BREAKPOINTS: (f64, f64) = (0.0445, 0.0685);

#[derive(Debug, Clone)]
pub struct AdaptivePolicy {
    graph: UnfoldedGraph,
    levels: Vec<WeightSet>,
    thresholds: (f64, f64),
    max_iter: usize,
    layer_schedule: Vec<usize>,
    x_th: Option<f64>,
}

impl AdaptivePolicy {
    /// `levels` must hold one bit-flipping, one min-sum and one belief
    /// propagation weight set, in that order. `max_iter` defaults to the
    /// graph's iteration count when `None`.
    pub fn new(
        graph: UnfoldedGraph,
        levels: Vec<WeightSet>,
        thresholds: (f64, f64),
        max_iter: Option<usize>,
    ) -> Result<Self> {
        let order = [Family::BitFlip, Family::MinSum, Family::BeliefProp];
        let families: Vec<Family> = levels.iter().map(|w| w.kind().family()).collect();
        if families != order {
            return Err(Error::param(
                "levels must be one bit-flipping, one min-sum and one belief-propagation decoder, in that order",
            ));
        }
        for w in &levels {
            w.check_against(&graph)?;
        }
        let (p1, p2) = thresholds;
        if !(0.0..=1.0).contains(&p1) || !(0.0..=1.0).contains(&p2) || p1 > p2 {
            return Err(Error::param(format!(
                "raw-BER thresholds ({p1}, {p2}) must be ascending within [0, 1]"
            )));
        }
        let max_iter = max_iter.unwrap_or(graph.iterations());
        if max_iter == 0 || max_iter > graph.iterations() {
            return Err(Error::param(format!(
                "max_iter {max_iter} outside 1..={}",
                graph.iterations()
            )));
        }
        Ok(AdaptivePolicy {
            graph,
            levels,
            thresholds,
            max_iter,
            layer_schedule: (1..=max_iter).collect(),
            x_th: None,
        })
    }

    /// Policy with neutral weights at every level.
    pub fn neutral(graph: UnfoldedGraph, thresholds: (f64, f64)) -> Result<Self> {
        let levels = [DecoderKind::Nbf, DecoderKind::Noms, DecoderKind::Nbp]
            .iter()
            .map(|&k| WeightSet::neutral(k, &graph))
            .collect();
        Self::new(graph, levels, thresholds, None)
    }

    /// Iterations after which the syndrome is checked. The last iteration is
    /// always checked.
    pub fn with_layer_schedule(mut self, mut schedule: Vec<usize>) -> Result<Self> {
        schedule.sort_unstable();
        schedule.dedup();
        if schedule.iter().any(|&t| t == 0 || t > self.max_iter) {
            return Err(Error::param("layer schedule outside 1..=max_iter"));
        }
        self.layer_schedule = schedule;
        Ok(self)
    }

    /// Fixed detector threshold for the bit-flipping level. Without it the
    /// nominal threshold of the assumed channel is used.
    pub fn with_threshold(mut self, x_th: f64) -> Self {
        self.x_th = Some(x_th);
        self
    }

    pub fn graph(&self) -> &UnfoldedGraph {
        &self.graph
    }

    pub fn thresholds(&self) -> (f64, f64) {
        self.thresholds
    }

    pub fn max_iter(&self) -> usize {
        self.max_iter
    }

    pub fn layer_schedule(&self) -> &[usize] {
        &self.layer_schedule
    }

    /// Weight set of level 1, 2 or 3.
    pub fn level(&self, level: usize) -> &WeightSet {
        &self.levels[level - 1]
    }

    pub fn level_kind(&self, level: usize) -> DecoderKind {
        self.levels[level - 1].kind()
    }
}

/// One decoder invocation inside an adaptive decode.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRun {
    pub level: usize,
    pub kind: DecoderKind,
    /// Iterations consumed (flips for bit flipping).
    pub iterations: usize,
    pub max_iter: usize,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveTrace {
    pub entry_level: usize,
    pub runs: Vec<LevelRun>,
    pub final_level: usize,
    pub success: bool,
    pub op_counts: OpCounts,
}

impl AdaptiveTrace {
    /// Builds a trace from level runs, e.g. for forced cost scenarios.
    /// `runs` must be nonempty.
    pub fn from_runs(runs: Vec<LevelRun>) -> Self {
        let first = runs.first().expect("trace needs at least one run");
        let last = runs.last().expect("trace needs at least one run");
        AdaptiveTrace {
            entry_level: first.level,
            final_level: last.level,
            success: last.success,
            op_counts: OpCounts::default(),
            runs,
        }
    }

    /// Latency and energy in bit-flipping units.
    pub fn cost(&self, ratios: &CostRatios) -> (f64, f64) {
        trace_cost(self, ratios)
    }

    /// Levels are consecutive from the entry level.
    pub fn is_monotone(&self) -> bool {
        self.runs
            .iter()
            .enumerate()
            .all(|(i, r)| r.level == self.entry_level + i)
    }
}

/// Entry level for an estimated raw BER: `p ≤ p1` gives 1, `p1 < p ≤ p2`
/// gives 2, anything higher gives 3.
pub fn select_level(policy: &AdaptivePolicy, raw_ber: f64) -> usize {
    let (p1, p2) = policy.thresholds;
    if raw_ber <= p1 {
        1
    } else if raw_ber <= p2 {
        2
    } else {
        3
    }
}

/// Decodes `block` starting at the level chosen by `raw_ber`. Soft levels use
/// LLRs computed from `assumed`; the bit-flipping level uses the fixed
/// detector threshold.
pub fn adaptive_decode(
    policy: &AdaptivePolicy,
    block: &ReadBlock,
    assumed: &ChannelParams,
    raw_ber: f64,
) -> Result<(DecodeOutcome, AdaptiveTrace)> {
    let n = policy.graph.code().n();
    if block.y.len() != n {
        return Err(Error::param(format!(
            "read block has {} cells, code length is {n}",
            block.y.len()
        )));
    }
    let entry = select_level(policy, raw_ber);
    let mut hard: Option<Vec<u8>> = None;
    let mut soft: Option<Vec<f64>> = None;
    let mut runs = Vec::new();
    let mut total = OpCounts::default();
    let schedule = |t: usize| {
        t == 0 || t == policy.max_iter || policy.layer_schedule.binary_search(&t).is_ok()
    };

    let mut level = entry;
    loop {
        let weights = policy.level(level);
        let outcome = match weights.kind().family() {
            Family::BitFlip => {
                if hard.is_none() {
                    let x_th = match policy.x_th {
                        Some(x) => x,
                        None => nominal_threshold(assumed)?,
                    };
                    hard = Some(hard_detect(x_th, &block.y));
                }
                decode_bf(
                    &policy.graph,
                    hard.as_deref().unwrap_or_default(),
                    weights,
                    policy.max_iter,
                )?
            }
            family => {
                if soft.is_none() {
                    assumed.validate()?;
                    soft = Some(llr(assumed, &block.y));
                }
                let l = soft.as_deref().unwrap_or_default();
                if family == Family::MinSum {
                    decode_ms_scheduled(&policy.graph, l, weights, policy.max_iter, schedule)?
                } else {
                    decode_bp_scheduled(&policy.graph, l, weights, policy.max_iter, schedule)?
                }
            }
        };
        total += outcome.op_counts;
        runs.push(LevelRun {
            level,
            kind: weights.kind(),
            iterations: outcome.iterations_used,
            max_iter: policy.max_iter,
            success: outcome.success,
        });
        if outcome.success || level == 3 {
            let mut trace = AdaptiveTrace::from_runs(runs);
            trace.op_counts = total;
            return Ok((outcome, trace));
        }
        level += 1;
    }
}

/// Channel family whose spread is swept: both states share the normalized
/// spread, offsets are fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelFamily {
    pub mu_b: f64,
    pub sigma_b_frac: f64,
}

impl ChannelFamily {
    pub fn nominal() -> Self {
        ChannelFamily {
            mu_b: 0.0,
            sigma_b_frac: 0.0,
        }
    }

    pub fn at(&self, spread: f64) -> ChannelParams {
        ChannelParams::from_spread(spread, self.mu_b, self.sigma_b_frac)
    }
}

/// Converts spread breakpoints into raw-BER thresholds using the offset-free
/// version of `family`. With `x_th = None` each breakpoint uses its own
/// nominal detector threshold.
pub fn calibrate_thresholds(
    family: &ChannelFamily,
    breakpoints: (f64, f64),
    x_th: Option<f64>,
) -> Result<(f64, f64)> {
    let (s1, s2) = breakpoints;
    if !(s1 > 0.0 && s1 <= s2) {
        return Err(Error::param(format!(
            "spread breakpoints ({s1}, {s2}) must be positive and ascending"
        )));
    }
    let at = |s: f64| -> Result<f64> {
        let p = family.at(s).nominal();
        let x = match x_th {
            Some(x) => x,
            None => nominal_threshold(&p)?,
        };
        Ok(analytic_raw_ber(&p, x))
    };
    Ok((at(s1)?, at(s2)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::code_by_name;
    use std::sync::Arc;

    fn policy(name: &str, thresholds: (f64, f64)) -> AdaptivePolicy {
        let g = UnfoldedGraph::unfold(Arc::new(code_by_name(name).unwrap()), 5).unwrap();
        AdaptivePolicy::neutral(g, thresholds).unwrap()
    }

    fn block_from(bits: &[u8]) -> ReadBlock {
        ReadBlock {
            y: bits
                .iter()
                .map(|&b| if b == 0 { 1.0 } else { 2.0 })
                .collect(),
            truth: None,
        }
    }

    #[test]
    fn level_buckets() {
        let p = policy("hamming_7_4", (0.01, 0.02));
        assert_eq!(select_level(&p, 0.0), 1);
        assert_eq!(select_level(&p, 0.01), 1);
        assert_eq!(select_level(&p, 0.015), 2);
        assert_eq!(select_level(&p, 0.02), 2);
        assert_eq!(select_level(&p, 0.3), 3);
    }

    #[test]
    fn rejects_bad_policies() {
        let g = UnfoldedGraph::unfold(Arc::new(code_by_name("hamming_7_4").unwrap()), 5).unwrap();
        assert!(AdaptivePolicy::neutral(g.clone(), (0.2, 0.1)).is_err());
        let swapped = vec![
            WeightSet::neutral(DecoderKind::Noms, &g),
            WeightSet::neutral(DecoderKind::Nbf, &g),
            WeightSet::neutral(DecoderKind::Nbp, &g),
        ];
        assert!(AdaptivePolicy::new(g, swapped, (0.1, 0.2), None).is_err());
    }

    #[test]
    fn noiseless_read_stays_at_level_one() {
        let p = policy("hamming_71_64", (0.01, 0.02));
        let ch = ChannelParams::from_spread(0.03, 0.0, 0.0);
        let (out, trace) = adaptive_decode(&p, &block_from(&[0; 71]), &ch, 0.0).unwrap();
        assert!(out.success);
        assert_eq!(out.iterations_used, 0);
        assert_eq!(trace.runs.len(), 1);
        assert_eq!((trace.entry_level, trace.final_level), (1, 1));
    }

    #[test]
    fn single_error_handled_by_bit_flipping() {
        let p = policy("hamming_71_64", (0.01, 0.02));
        let ch = ChannelParams::from_spread(0.03, 0.0, 0.0);
        let mut bits = vec![0u8; 71];
        bits[17] = 1;
        let (out, trace) = adaptive_decode(&p, &block_from(&bits), &ch, 0.001).unwrap();
        assert_eq!(out.word, vec![0; 71]);
        assert_eq!(trace.runs.len(), 1);
        assert_eq!(trace.runs[0].iterations, 1);
    }

    #[test]
    fn triple_error_escalates() {
        // On (71,64) bit flipping reaches some codeword within a few flips for
        // almost every pattern, so the budget is cut to one iteration and the
        // triple is chosen with a syndrome matching no single column.
        let g = UnfoldedGraph::unfold(Arc::new(code_by_name("hamming_71_64").unwrap()), 5).unwrap();
        let p = AdaptivePolicy::new(
            g.clone(),
            [DecoderKind::Nbf, DecoderKind::Noms, DecoderKind::Nbp]
                .iter()
                .map(|&k| WeightSet::neutral(k, &g))
                .collect(),
            (0.01, 0.02),
            Some(1),
        )
        .unwrap();
        let ch = ChannelParams::from_spread(0.03, 0.0, 0.0);
        let ws = p.level(1);
        let bits = (0..71)
            .flat_map(|a| (a + 1..71).flat_map(move |b| (b + 1..71).map(move |c| [a, b, c])))
            .map(|t| {
                let mut bits = vec![0u8; 71];
                t.iter().for_each(|&v| bits[v] = 1);
                bits
            })
            .find(|bits| !decode_bf(p.graph(), bits, ws, 1).unwrap().success)
            .unwrap();
        let (_, trace) = adaptive_decode(&p, &block_from(&bits), &ch, 0.0).unwrap();
        assert!(trace.runs.len() >= 2, "{trace:?}");
        assert!(!trace.runs[0].success);
        assert_eq!(trace.runs[1].kind, DecoderKind::Noms);
        assert!(trace.is_monotone());
    }

    #[test]
    fn calibrated_thresholds_bracket_five_percent() {
        let fam = ChannelFamily::nominal();
        let (p1, p2) = calibrate_thresholds(&fam, SPREAD_BREAKPOINTS, None).unwrap();
        assert!(0.0 < p1 && p1 < p2 && p2 < 0.5);
        let p = policy("hamming_7_4", (p1, p2));
        let c = fam.at(0.05);
        let est = analytic_raw_ber(&c, nominal_threshold(&c).unwrap());
        assert_eq!(select_level(&p, est), 2);
        let (a, b) = calibrate_thresholds(&fam, (0.05, 0.05), None).unwrap();
        assert_eq!(a, b);
    }
}
