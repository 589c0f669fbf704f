//! Weighted sum-product on the unfolded graph, flooding schedule.
//!
//! Variable layer: `m_{v→c} = w_{c,v}^t·(o_v − m_{c→v})`, where `o_v` is the
//! previous output (`L_v` before the first iteration). Check layer:
//! `m_{c→v} = 2·atanh(Π_{v'∈N(c)∖v} tanh(m_{v'→c}/2))` with the product
//! clamped to `±(1 − 1e−12)`. Output: `o_v = u_v·L_v + Σ_{c∈M(v)} m_{c→v}`
//! with per-variable output weights `u_v` shared by every iteration tap.
//! All weights equal to one is plain belief propagation.

use super::{check_common, decide, DecodeOutcome, WeightSet};
use crate::cost::OpCounts;
use crate::error::Result;
use crate::graph::UnfoldedGraph;
use crate::kind::Family;

pub(crate) const TANH_CLAMP: f64 = 1.0 - 1e-12;

pub fn decode_bp(
    graph: &UnfoldedGraph,
    llr: &[f64],
    weights: &WeightSet,
    max_iter: usize,
) -> Result<DecodeOutcome> {
    decode_bp_scheduled(graph, llr, weights, max_iter, |_| true)
}

/// `check_after(t)` gates the zero-syndrome stop after iteration `t`; `t = 0`
/// is the check on the input hard decisions.
pub(crate) fn decode_bp_scheduled(
    graph: &UnfoldedGraph,
    llr: &[f64],
    weights: &WeightSet,
    max_iter: usize,
    check_after: impl Fn(usize) -> bool,
) -> Result<DecodeOutcome> {
    check_common(graph, llr.len(), weights, Family::BeliefProp, max_iter)?;
    let code = graph.code();
    let edges = code.edges();
    let num_edges = edges.len();

    let mut out: Vec<f64> = llr.to_vec();
    let mut word: Vec<u8> = out.iter().map(|&o| decide(o)).collect();
    let mut ops = OpCounts::default();
    if check_after(0) && code.is_codeword(&word) {
        return Ok(DecodeOutcome {
            word,
            success: true,
            iterations_used: 0,
            per_iteration_syndrome_weight: Vec::new(),
            op_counts: ops,
        });
    }

    let out_weight = weights.output(graph);
    let channel: Vec<f64> = llr
        .iter()
        .enumerate()
        .map(|(v, &l)| {
            ops.mul += 1;
            out_weight.map_or(1.0, |u| u[v]) * l
        })
        .collect();

    let mut to_check = vec![0.0f64; num_edges];
    let mut to_var = vec![0.0f64; num_edges];
    let mut th = vec![0.0f64; num_edges];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut success = false;

    for t in 1..=max_iter {
        // variable layer
        let w = weights.iteration(graph, t);
        for (e, edge) in edges.iter().enumerate() {
            let extrinsic = out[edge.var] - to_var[e];
            ops.add += 1;
            to_check[e] = w.map_or(1.0, |w| w[e]) * extrinsic;
            ops.mul += 1;
        }

        // check layer
        for c in 0..code.num_checks() {
            let range = code.check_edges(c);
            let mut prod = 1.0;
            let mut zeros = 0;
            for e in range.clone() {
                th[e] = (0.5 * to_check[e]).tanh();
                ops.tanh += 1;
                if th[e] == 0.0 {
                    zeros += 1;
                } else {
                    prod *= th[e];
                    ops.mul += 1;
                }
            }
            for e in range {
                let ext = match zeros {
                    0 => {
                        ops.mul += 1;
                        prod / th[e]
                    }
                    1 if th[e] == 0.0 => prod,
                    _ => 0.0,
                };
                to_var[e] = 2.0 * ext.clamp(-TANH_CLAMP, TANH_CLAMP).atanh();
                ops.tanh += 1;
            }
        }

        // output layer
        for (v, o) in out.iter_mut().enumerate() {
            let mut acc = channel[v];
            for &e in code.var_edges(v) {
                acc += to_var[e];
                ops.add += 1;
            }
            *o = acc;
        }
        for (x, &o) in word.iter_mut().zip(&out) {
            *x = decide(o);
        }
        let sw = code.syndrome_weight(&word);
        trace.push(sw);
        iterations = t;
        if sw == 0 && check_after(t) {
            success = true;
            break;
        }
    }
    if !success {
        success = trace.last() == Some(&0);
    }

    Ok(DecodeOutcome {
        word,
        success,
        iterations_used: iterations,
        per_iteration_syndrome_weight: trace,
        op_counts: ops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::code_by_name;
    use crate::kind::DecoderKind;
    use std::sync::Arc;

    fn setup(name: &str, iters: usize) -> UnfoldedGraph {
        UnfoldedGraph::unfold(Arc::new(code_by_name(name).unwrap()), iters).unwrap()
    }

    #[test]
    fn zero_llr_stays_zero() {
        let g = setup("hamming_7_4", 5);
        let out = decode_bp(&g, &[0.0; 7], &WeightSet::neutral(DecoderKind::Bp, &g), 5).unwrap();
        assert_eq!(out.word, vec![0; 7]);
        assert!(out.success);
        assert_eq!(out.iterations_used, 0);
    }

    #[test]
    fn zero_messages_in_product() {
        // one zero LLR on a noisy word: the zero handling path must stay finite
        let g = setup("hamming_7_4", 5);
        let llr = [0.0, -0.4, 1.0, 0.0, 2.0, -1.0, 0.5];
        let out = decode_bp(&g, &llr, &WeightSet::neutral(DecoderKind::Bp, &g), 5).unwrap();
        assert_eq!(out.word.len(), 7);
        assert_eq!(out.per_iteration_syndrome_weight.len(), out.iterations_used);
    }

    #[test]
    fn corrects_single_errors() {
        for name in ["hamming_7_4", "hamming_71_64"] {
            let g = setup(name, 5);
            let ws = WeightSet::neutral(DecoderKind::Bp, &g);
            let cw = vec![0u8; g.code().n()];
            for v in 0..g.code().n() {
                let mut llr = vec![8.0; g.code().n()];
                llr[v] = -0.5;
                let out = decode_bp(&g, &llr, &ws, 5).unwrap();
                assert_eq!(out.word, cw, "{name} error at {v}");
            }
        }
    }

    #[test]
    fn saturated_messages_stay_finite() {
        let g = setup("hamming_7_4", 5);
        let llr = [80.0, -80.0, 80.0, 80.0, -80.0, 80.0, 80.0];
        let out = decode_bp(&g, &llr, &WeightSet::neutral(DecoderKind::Bp, &g), 5).unwrap();
        assert_eq!(out.word.len(), 7);
    }
}
