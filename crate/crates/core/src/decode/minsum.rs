//! Offset min-sum on the unfolded graph, flooding schedule.
//!
//! Variable layer: `m_{v→c} = o_v − m_{c→v}`, where `o_v` is the previous
//! iteration's output (`L_v` before the first iteration), which equals
//! `L_v + Σ_{c'∈M(v)∖c} m_{c'→v}`. Check layer:
//! `m_{c→v} = Π sign(m_{v'→c}) · max(min |m_{v'→c}| − β_{c,v}, 0)` over
//! `v' ∈ N(c)∖v`. Output: `o_v = L_v + Σ_{c∈M(v)} m_{c→v}`.

use super::{check_common, decide, DecodeOutcome, WeightSet};
use crate::cost::OpCounts;
use crate::error::Result;
use crate::graph::UnfoldedGraph;
use crate::kind::Family;

pub fn decode_ms(
    graph: &UnfoldedGraph,
    llr: &[f64],
    weights: &WeightSet,
    max_iter: usize,
) -> Result<DecodeOutcome> {
    decode_ms_scheduled(graph, llr, weights, max_iter, |_| true)
}

/// Smallest and second smallest of `mags` plus the argmin (lowest index on
/// ties). Needs at least two entries.
#[inline]
pub(crate) fn two_min(mags: impl Iterator<Item = f64>, ops: &mut OpCounts) -> (f64, f64, usize) {
    let mut it = mags.enumerate();
    let (_, a0) = it.next().expect("check degree >= 2");
    let (_, a1) = it.next().expect("check degree >= 2");
    ops.cmp += 1;
    let (mut min1, mut min2, mut idx) = if a1 < a0 { (a1, a0, 1) } else { (a0, a1, 0) };
    for (j, a) in it {
        ops.cmp += 1;
        if a < min2 {
            ops.cmp += 1;
            if a < min1 {
                min2 = min1;
                min1 = a;
                idx = j;
            } else {
                min2 = a;
            }
        }
    }
    (min1, min2, idx)
}

/// `check_after(t)` gates the zero-syndrome stop after iteration `t`; `t = 0`
/// is the check on the input hard decisions.
pub(crate) fn decode_ms_scheduled(
    graph: &UnfoldedGraph,
    llr: &[f64],
    weights: &WeightSet,
    max_iter: usize,
    check_after: impl Fn(usize) -> bool,
) -> Result<DecodeOutcome> {
    check_common(graph, llr.len(), weights, Family::MinSum, max_iter)?;
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

    let mut to_check = vec![0.0f64; num_edges];
    let mut to_var = vec![0.0f64; num_edges];
    let mut negative = vec![false; num_edges];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut success = false;

    for t in 1..=max_iter {
        // variable layer
        for (e, edge) in edges.iter().enumerate() {
            to_check[e] = out[edge.var] - to_var[e];
            ops.add += 1;
        }

        // check layer
        let beta = weights.iteration(graph, t);
        for c in 0..code.num_checks() {
            let range = code.check_edges(c);
            let mut parity = false;
            for e in range.clone() {
                negative[e] = to_check[e].is_sign_negative();
                parity ^= negative[e];
                ops.xor += 1;
            }
            let (min1, min2, arg) = two_min(range.clone().map(|e| to_check[e].abs()), &mut ops);
            for (j, e) in range.enumerate() {
                let mag = if j == arg { min2 } else { min1 };
                let mut x = mag - beta.map_or(0.0, |b| b[e]);
                ops.add += 1;
                ops.cmp += 1;
                if x <= 0.0 {
                    x = 0.0;
                }
                let neg = parity ^ negative[e];
                ops.xor += 1;
                to_var[e] = if neg { -x } else { x };
            }
        }

        // output layer
        for (v, o) in out.iter_mut().enumerate() {
            let mut acc = llr[v];
            for &e in code.var_edges(v) {
                acc += to_var[e];
                ops.add += 1;
            }
            *o = acc;
        }
        for (w, &o) in word.iter_mut().zip(&out) {
            *w = decide(o);
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
