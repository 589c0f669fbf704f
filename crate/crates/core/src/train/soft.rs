//! Differentiable forward passes of the trainable decoders.
//!
//! NOMS and NBP follow the message recursions of the hard engines and emit
//! `p_v = sigmoid(−o_v)`, the probability that bit `v` is 1, after every
//! iteration. NBF is relaxed: soft bits `q` start at the detector output, the
//! check values become soft parities `Π(1 − 2q_v)`, the flip becomes a
//! softmax over the scores at temperature `τ`, and each bit is flipped by its
//! flip probability: `q_v ← q_v(1 − p_v) + (1 − q_v)p_v`.

use crate::decode::{DecoderInput, WeightSet, TANH_CLAMP};
use crate::error::{Error, Result};
use crate::graph::UnfoldedGraph;
use crate::kind::{DecoderKind, Family};
use crate::tape::{Tape, Var};

/// Probabilities are clamped to `[P_FLOOR, 1 − P_FLOOR]` inside the loss.
pub const P_FLOOR: f64 = 1e-12;

pub(crate) struct SoftPass {
    pub tape: Tape,
    pub params: Vec<Var>,
    /// Per-iteration probability that each bit is 1.
    pub outputs: Vec<Vec<Var>>,
}

fn ensure_finite(tape: &Tape, vars: &[Var], layer: usize) -> Result<()> {
    match vars.iter().find(|&&v| !tape.value(v).is_finite()) {
        None => Ok(()),
        Some(&v) => Err(Error::Training {
            layer,
            msg: format!("non-finite value {}", tape.value(v)),
        }),
    }
}

pub(crate) fn build(
    kind: DecoderKind,
    graph: &UnfoldedGraph,
    input: DecoderInput<'_>,
    weights: &WeightSet,
    tau: f64,
) -> Result<SoftPass> {
    if !kind.is_neural() {
        return Err(Error::param(format!("{kind} has no trainable parameters")));
    }
    if weights.kind() != kind {
        return Err(Error::param(format!(
            "decoder {kind} given {} weights",
            weights.kind()
        )));
    }
    weights.check_against(graph)?;
    let n = graph.code().n();
    let mut tape = Tape::with_capacity(16 * graph.code().num_edges() * graph.iterations());
    let params: Vec<Var> = weights.values().iter().map(|&w| tape.var(w)).collect();
    let outputs = match kind.family() {
        Family::BitFlip => {
            let hard = input
                .hard
                .ok_or_else(|| Error::param("NBF needs hard detector bits"))?;
            check_len(hard.len(), n)?;
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::param(format!(
                    "softmax temperature {tau} must be positive"
                )));
            }
            bitflip(&mut tape, graph, &params, hard, tau)?
        }
        Family::MinSum => {
            let llr = input.llr.ok_or_else(|| Error::param("NOMS needs LLRs"))?;
            check_len(llr.len(), n)?;
            minsum(&mut tape, graph, &params, llr)?
        }
        Family::BeliefProp => {
            let llr = input.llr.ok_or_else(|| Error::param("NBP needs LLRs"))?;
            check_len(llr.len(), n)?;
            bp(&mut tape, graph, &params, llr)?
        }
    };
    Ok(SoftPass {
        tape,
        params,
        outputs,
    })
}

fn check_len(len: usize, n: usize) -> Result<()> {
    if len == n {
        Ok(())
    } else {
        Err(Error::param(format!(
            "input has {len} entries, expected {n}"
        )))
    }
}

fn bitflip(
    tape: &mut Tape,
    graph: &UnfoldedGraph,
    params: &[Var],
    hard: &[u8],
    tau: f64,
) -> Result<Vec<Vec<Var>>> {
    let code = graph.code();
    let layout = graph.layout(DecoderKind::Nbf);
    let mut q: Vec<Var> = hard
        .iter()
        .map(|&b| tape.constant(f64::from(b & 1)))
        .collect();
    let mut outputs = Vec::with_capacity(graph.iterations());

    for t in 1..=graph.iterations() {
        // variable layer: soft parities 1 − 2λ̃_k = Π (1 − 2q_v)
        let signed_bits: Vec<Var> = q
            .iter()
            .map(|&qv| {
                let s = tape.scale(qv, -2.0);
                tape.add_const(s, 1.0)
            })
            .collect();
        let parity: Vec<Var> = (0..code.num_checks())
            .map(|c| {
                let nb = code.check_neighbors(c);
                nb[1..]
                    .iter()
                    .fold(signed_bits[nb[0]], |acc, &v| tape.mul(acc, signed_bits[v]))
            })
            .collect();
        ensure_finite(tape, &parity, 2 * t - 1)?;

        // check layer: scores, softmax flip distribution, soft flip
        let w = &params[layout.iteration_slots(t)];
        let scores: Vec<Var> = (0..code.n())
            .map(|v| {
                let terms: Vec<Var> = code
                    .var_edges(v)
                    .iter()
                    .map(|&e| tape.mul(parity[code.edges()[e].check], w[e]))
                    .collect();
                let s = tape.sum(&terms);
                tape.scale(s, -1.0 / tau)
            })
            .collect();
        let shift = scores
            .iter()
            .map(|&s| tape.value(s))
            .fold(f64::NEG_INFINITY, f64::max);
        let expd: Vec<Var> = scores
            .iter()
            .map(|&s| {
                let z = tape.add_const(s, -shift);
                tape.exp(z)
            })
            .collect();
        let total = tape.sum(&expd);
        q = q
            .iter()
            .zip(&expd)
            .map(|(&qv, &ev)| {
                let p = tape.div(ev, total);
                let qp = tape.mul(qv, p);
                let both = tape.add(qv, p);
                let twice = tape.scale(qp, 2.0);
                tape.sub(both, twice)
            })
            .collect();
        ensure_finite(tape, &q, 2 * t)?;
        outputs.push(q.clone());
    }
    Ok(outputs)
}

/// Indices of the smallest and second smallest values, lowest index on
/// ties, with the comparison order of the hard engine.
fn two_min_idx(vals: &[f64]) -> (usize, usize) {
    let (mut i1, mut i2) = if vals[1] < vals[0] { (1, 0) } else { (0, 1) };
    for j in 2..vals.len() {
        if vals[j] < vals[i2] {
            if vals[j] < vals[i1] {
                i2 = i1;
                i1 = j;
            } else {
                i2 = j;
            }
        }
    }
    (i1, i2)
}

fn minsum(
    tape: &mut Tape,
    graph: &UnfoldedGraph,
    params: &[Var],
    llr: &[f64],
) -> Result<Vec<Vec<Var>>> {
    let code = graph.code();
    let edges = code.edges();
    let layout = graph.layout(DecoderKind::Noms);
    let channel: Vec<Var> = llr.iter().map(|&l| tape.constant(l)).collect();
    let zero = tape.constant(0.0);
    let mut out = channel.clone();
    let mut to_var = vec![zero; edges.len()];
    let mut to_check = vec![zero; edges.len()];
    let mut outputs = Vec::with_capacity(graph.iterations());

    for t in 1..=graph.iterations() {
        for (e, edge) in edges.iter().enumerate() {
            to_check[e] = tape.sub(out[edge.var], to_var[e]);
        }
        ensure_finite(tape, &to_check, 2 * t - 1)?;

        let beta = &params[layout.iteration_slots(t)];
        for c in 0..code.num_checks() {
            let range = code.check_edges(c);
            let negative: Vec<bool> = range
                .clone()
                .map(|e| tape.value(to_check[e]).is_sign_negative())
                .collect();
            let parity = negative.iter().fold(false, |a, &b| a ^ b);
            let mags: Vec<Var> = range.clone().map(|e| tape.abs(to_check[e])).collect();
            let vals: Vec<f64> = mags.iter().map(|&m| tape.value(m)).collect();
            let (i1, i2) = two_min_idx(&vals);
            tape.record_branch(i1 as u32);
            tape.record_branch(i2 as u32);
            for (j, e) in range.enumerate() {
                let mag = if j == i1 { mags[i2] } else { mags[i1] };
                let shifted = tape.sub(mag, beta[e]);
                let x = tape.relu(shifted);
                to_var[e] = if parity ^ negative[j] { tape.neg(x) } else { x };
            }
        }
        ensure_finite(tape, &to_var, 2 * t)?;

        let probs = output_layer(tape, code, &channel, &to_var, &mut out);
        ensure_finite(tape, &probs, 2 * t)?;
        outputs.push(probs);
    }
    Ok(outputs)
}

fn bp(
    tape: &mut Tape,
    graph: &UnfoldedGraph,
    params: &[Var],
    llr: &[f64],
) -> Result<Vec<Vec<Var>>> {
    let code = graph.code();
    let edges = code.edges();
    let layout = graph.layout(DecoderKind::Nbp);
    let raw: Vec<Var> = llr.iter().map(|&l| tape.constant(l)).collect();
    let u = &params[layout.output.clone()];
    let channel: Vec<Var> = raw.iter().zip(u).map(|(&l, &w)| tape.mul(w, l)).collect();
    let zero = tape.constant(0.0);
    let mut out = raw.clone();
    let mut to_var = vec![zero; edges.len()];
    let mut to_check = vec![zero; edges.len()];
    let mut outputs = Vec::with_capacity(graph.iterations());

    for t in 1..=graph.iterations() {
        let w = &params[layout.iteration_slots(t)];
        for (e, edge) in edges.iter().enumerate() {
            let extrinsic = tape.sub(out[edge.var], to_var[e]);
            to_check[e] = tape.mul(w[e], extrinsic);
        }
        ensure_finite(tape, &to_check, 2 * t - 1)?;

        for c in 0..code.num_checks() {
            let range = code.check_edges(c);
            let th: Vec<Var> = range
                .clone()
                .map(|e| {
                    let half = tape.scale(to_check[e], 0.5);
                    tape.tanh(half)
                })
                .collect();
            let d = th.len();
            // product of all factors except one, by prefix and suffix products
            let mut prefix = Vec::with_capacity(d);
            let mut acc = th[0];
            prefix.push(acc);
            for &x in &th[1..] {
                acc = tape.mul(acc, x);
                prefix.push(acc);
            }
            let mut suffix = vec![th[d - 1]; d];
            for j in (0..d - 1).rev() {
                suffix[j] = tape.mul(th[j], suffix[j + 1]);
            }
            for (j, e) in range.enumerate() {
                let excl = match (j, j + 1 == d) {
                    (0, _) => suffix[1],
                    (_, true) => prefix[d - 2],
                    _ => tape.mul(prefix[j - 1], suffix[j + 1]),
                };
                let clamped = tape.clamp(excl, -TANH_CLAMP, TANH_CLAMP);
                let a = tape.atanh(clamped);
                to_var[e] = tape.scale(a, 2.0);
            }
        }
        ensure_finite(tape, &to_var, 2 * t)?;

        let probs = output_layer(tape, code, &channel, &to_var, &mut out);
        ensure_finite(tape, &probs, 2 * t)?;
        outputs.push(probs);
    }
    Ok(outputs)
}

/// `o_v = channel_v + Σ m_{c→v}`; returns `sigmoid(−o_v)`.
fn output_layer(
    tape: &mut Tape,
    code: &crate::code::LinearCode,
    channel: &[Var],
    to_var: &[Var],
    out: &mut [Var],
) -> Vec<Var> {
    (0..code.n())
        .map(|v| {
            let o = code
                .var_edges(v)
                .iter()
                .fold(channel[v], |acc, &e| tape.add(acc, to_var[e]));
            out[v] = o;
            let neg = tape.neg(o);
            tape.sigmoid(neg)
        })
        .collect()
}

/// Multi-loss on the tape: Σ_t mean_v BCE(p_v^{(t)}, target_v).
pub(crate) fn loss_on_tape(tape: &mut Tape, outputs: &[Vec<Var>], target: &[u8]) -> Var {
    let taps: Vec<Var> = outputs
        .iter()
        .map(|p| {
            let terms: Vec<Var> = p
                .iter()
                .zip(target)
                .map(|(&pv, &tv)| {
                    let pc = tape.clamp(pv, P_FLOOR, 1.0 - P_FLOOR);
                    let prob_of_target = if tv & 1 == 1 {
                        pc
                    } else {
                        let neg = tape.neg(pc);
                        tape.add_const(neg, 1.0)
                    };
                    let ln = tape.ln(prob_of_target);
                    tape.neg(ln)
                })
                .collect();
            let s = tape.sum(&terms);
            tape.scale(s, 1.0 / p.len() as f64)
        })
        .collect();
    tape.sum(&taps)
}
