//! Bit flipping on the unfolded graph.
//!
//! Iteration `t`: the variable layer forms the check values
//! `λ_k = Σ_{v∈N(k)} x_v mod 2` (the syndrome); the check layer scores every
//! bit with `ε_v = −Σ_{k∈M(v)} (1 − 2λ_k)·w_{k,v}` and the single highest
//! scoring bit (lowest index on ties) is flipped. With unit weights `ε_v` is
//! the number of unsatisfied minus satisfied checks on `v`.

use super::{check_common, DecodeOutcome, WeightSet};
use crate::cost::OpCounts;
use crate::error::Result;
use crate::graph::UnfoldedGraph;
use crate::kind::Family;

pub fn decode_bf(
    graph: &UnfoldedGraph,
    hard_bits: &[u8],
    weights: &WeightSet,
    max_iter: usize,
) -> Result<DecodeOutcome> {
    decode_bf_scheduled(graph, hard_bits, weights, max_iter, |_| true)
}

/// `may_stop(t)` gates the zero-syndrome stop before flip `t + 1`.
pub(crate) fn decode_bf_scheduled(
    graph: &UnfoldedGraph,
    hard_bits: &[u8],
    weights: &WeightSet,
    max_iter: usize,
    may_stop: impl Fn(usize) -> bool,
) -> Result<DecodeOutcome> {
    check_common(graph, hard_bits.len(), weights, Family::BitFlip, max_iter)?;
    let code = graph.code();
    let n = code.n();
    let num_checks = code.num_checks();

    let mut bits: Vec<u8> = hard_bits.iter().map(|b| b & 1).collect();
    let mut signed = vec![0.0f64; num_checks];
    let mut score = vec![0.0f64; n];
    let mut trace = Vec::new();
    let mut ops = OpCounts::default();
    let mut flips = 0;
    let mut converged = false;

    for t in 1..=max_iter {
        // variable layer: check values
        let mut unsatisfied = 0;
        for (c, s) in signed.iter_mut().enumerate() {
            let mut acc = 0u32;
            for &v in code.check_neighbors(c) {
                acc += u32::from(bits[v]);
                ops.add += 1;
            }
            let lambda = f64::from(acc & 1);
            unsatisfied += (acc & 1) as usize;
            *s = 1.0 - 2.0 * lambda;
            ops.mul += 1;
            ops.add += 1;
        }
        if unsatisfied == 0 && may_stop(t - 1) {
            converged = true;
            break;
        }

        // check layer: flip scores
        let w = weights.iteration(graph, t);
        for (v, eps) in score.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &e in code.var_edges(v) {
                let we = w.map_or(1.0, |w| w[e]);
                if signed[code.edges()[e].check] > 0.0 {
                    acc -= we;
                } else {
                    acc += we;
                }
                ops.add += 1;
            }
            *eps = acc;
        }

        let mut best = 0;
        for v in 1..n {
            ops.cmp += 1;
            if score[v] > score[best] {
                best = v;
            }
        }
        bits[best] ^= 1;
        ops.xor += 1;
        flips += 1;
        trace.push(code.syndrome_weight(&bits));
    }

    let success = converged || code.is_codeword(&bits);
    Ok(DecodeOutcome {
        word: bits,
        success,
        iterations_used: flips,
        per_iteration_syndrome_weight: trace,
        op_counts: ops,
    })
}
