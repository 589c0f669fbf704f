#![allow(dead_code)]

use std::sync::Arc;

use mram_ecc::channel::{hard_detect, llr, nominal_threshold, sample_read, ChannelParams};
use mram_ecc::decode::{DecoderInput, WeightSet};
use mram_ecc::train::backward;
use mram_ecc::{code_by_name, DecoderKind, UnfoldedGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn graph(name: &str, iters: usize) -> UnfoldedGraph {
    UnfoldedGraph::unfold(Arc::new(code_by_name(name).unwrap()), iters).unwrap()
}

/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Debug, Default, Clone, Copy)]
pub struct FdStats {
    pub checked: usize,
    pub agreeing: usize,
    pub excluded: usize,
    pub worst: f64,
}

impl FdStats {
    pub fn fraction(&self) -> f64 {
        self.agreeing as f64 / self.checked.max(1) as f64
    }
}

pub const FD_STEP: f64 = 1e-4;
pub const FD_TOL: f64 = 1e-3;

/// Central-difference check of `backward` on `samples` random reads with
/// perturbed weights. Coordinates whose ±step evaluations take a different
/// branch of a piecewise operation straddle a kink and are excluded.
pub fn finite_difference_check(
    kind: DecoderKind,
    g: &UnfoldedGraph,
    samples: usize,
    seed: u64,
) -> FdStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let code = g.code();
    let channel = ChannelParams::from_spread(0.12, -0.1, 0.03);
    let x_th = nominal_threshold(&channel).unwrap();
    let mut stats = FdStats::default();
    for s in 0..samples {
        let msg: Vec<u8> = (0..code.k()).map(|_| rng.random::<bool>() as u8).collect();
        let word = code.encode(&msg).unwrap();
        let read = sample_read(&channel, &word, seed.wrapping_mul(1000) + s as u64).unwrap();
        let hard = hard_detect(x_th, &read.y);
        let l = llr(&channel, &read.y);
        let input = DecoderInput::both(&hard, &l);

        let mut ws = WeightSet::neutral(kind, g);
        for w in ws.values_mut() {
            *w += match kind {
                DecoderKind::Noms => rng.random_range(0.0..0.4),
                _ => rng.random_range(-0.3..0.3),
            };
        }
        let base = backward(kind, g, input, &ws, &word, 1.0).unwrap();
        for j in 0..ws.values().len() {
            let eval = |delta: f64| {
                let mut w = ws.clone();
                w.values_mut()[j] += delta;
                backward(kind, g, input, &w, &word, 1.0).unwrap()
            };
            let plus = eval(FD_STEP);
            let minus = eval(-FD_STEP);
            if plus.signature != base.signature || minus.signature != base.signature {
                stats.excluded += 1;
                continue;
            }
            let fd = (plus.loss - minus.loss) / (2.0 * FD_STEP);
            let gj = base.grad[j];
            let rel = (gj - fd).abs() / gj.abs().max(fd.abs()).max(1e-6);
            stats.checked += 1;
            stats.worst = stats.worst.max(rel);
            if rel <= FD_TOL {
                stats.agreeing += 1;
            }
        }
    }
    stats
}

/// Textbook flooding min-sum: every extrinsic sum and minimum is formed
/// directly over the other neighbors.
pub fn reference_min_sum(
    code: &mram_ecc::LinearCode,
    l: &[f64],
    max_iter: usize,
) -> (Vec<u8>, usize, Vec<usize>) {
    reference_flooding(code, l, max_iter, |others| {
        let sign = others.iter().filter(|x| x.is_sign_negative()).count() % 2 == 1;
        let mag = others.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        if sign {
            -mag
        } else {
            mag
        }
    })
}

/// Textbook sum-product with the product taken directly over the other
/// neighbors.
pub fn reference_sum_product(
    code: &mram_ecc::LinearCode,
    l: &[f64],
    max_iter: usize,
) -> (Vec<u8>, usize, Vec<usize>) {
    let clamp = 1.0 - 1e-12;
    reference_flooding(code, l, max_iter, |others| {
        let p: f64 = others.iter().map(|x| (0.5 * x).tanh()).product();
        2.0 * p.clamp(-clamp, clamp).atanh()
    })
}

fn reference_flooding(
    code: &mram_ecc::LinearCode,
    l: &[f64],
    max_iter: usize,
    check_rule: impl Fn(&[f64]) -> f64,
) -> (Vec<u8>, usize, Vec<usize>) {
    let (n, m) = (code.n(), code.num_checks());
    let h = code.h();
    let decide = |o: &[f64]| o.iter().map(|&x| u8::from(x < 0.0)).collect::<Vec<u8>>();
    let mut word = decide(l);
    if code.is_codeword(&word) {
        return (word, 0, Vec::new());
    }
    let mut c2v = vec![vec![0.0f64; n]; m];
    let mut trace = Vec::new();
    for it in 1..=max_iter {
        let mut v2c = vec![vec![0.0f64; n]; m];
        for c in 0..m {
            for v in (0..n).filter(|&v| h[c][v] == 1) {
                let mut s = l[v];
                for c2 in (0..m).filter(|&c2| c2 != c && h[c2][v] == 1) {
                    s += c2v[c2][v];
                }
                v2c[c][v] = s;
            }
        }
        for c in 0..m {
            let nb: Vec<usize> = (0..n).filter(|&v| h[c][v] == 1).collect();
            for &v in &nb {
                let others: Vec<f64> = nb.iter().filter(|&&u| u != v).map(|&u| v2c[c][u]).collect();
                c2v[c][v] = check_rule(&others);
            }
        }
        let o: Vec<f64> = (0..n)
            .map(|v| {
                l[v] + (0..m)
                    .filter(|&c| h[c][v] == 1)
                    .map(|c| c2v[c][v])
                    .sum::<f64>()
            })
            .collect();
        word = decide(&o);
        let sw = code.syndrome_weight(&word);
        trace.push(sw);
        if sw == 0 {
            return (word, it, trace);
        }
    }
    (word, max_iter, trace)
}

/// Read of `word` with every cell at its nominal resistance except `v`,
/// which sits just across the detector threshold on the wrong side.
pub fn single_error_read(word: &[u8], v: usize, channel: &ChannelParams) -> Vec<f64> {
    let x_th = nominal_threshold(channel).unwrap();
    let nudge = 0.01 * (channel.mu1 - channel.mu0);
    word.iter()
        .enumerate()
        .map(|(u, &b)| match (u == v, b) {
            (false, 0) => channel.mu0,
            (false, _) => channel.mu1,
            (true, 0) => x_th + nudge,
            (true, _) => x_th - nudge,
        })
        .collect()
}

/// Textbook single-flip decoder: flip the lowest-index bit with the largest
/// count of unsatisfied minus satisfied checks.
pub fn reference_bit_flip(
    code: &mram_ecc::LinearCode,
    hard: &[u8],
    max_iter: usize,
) -> (Vec<u8>, usize, Vec<usize>) {
    let h = code.h();
    let mut bits = hard.to_vec();
    let mut trace = Vec::new();
    for _ in 0..max_iter {
        let syn = code.syndrome(&bits).unwrap();
        if syn.iter().all(|&s| s == 0) {
            break;
        }
        let score = |v: usize| -> i64 {
            (0..code.num_checks())
                .filter(|&c| h[c][v] == 1)
                .map(|c| if syn[c] == 1 { 1 } else { -1 })
                .sum()
        };
        let mut best = 0;
        for v in 1..code.n() {
            if score(v) > score(best) {
                best = v;
            }
        }
        bits[best] ^= 1;
        trace.push(code.syndrome_weight(&bits));
    }
    let used = trace.len();
    (bits, used, trace)
}

/// Channel-sampled read of a random codeword: (codeword, resistances).
pub fn random_read(
    code: &mram_ecc::LinearCode,
    channel: &ChannelParams,
    seed: u64,
) -> (Vec<u8>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let msg: Vec<u8> = (0..code.k()).map(|_| rng.random::<bool>() as u8).collect();
    let word = code.encode(&msg).unwrap();
    let y = sample_read(channel, &word, rng.random()).unwrap().y;
    (word, y)
}

/// Re-runs the final level of an adaptive decode on its own with the
/// iteration count the trace reports and checks that it reproduces the
/// adaptive result.
pub fn replay_final_level(
    policy: &mram_ecc::adaptive::AdaptivePolicy,
    y: &[f64],
    assumed: &ChannelParams,
    x_th: f64,
    outcome: &mram_ecc::decode::DecodeOutcome,
    trace: &mram_ecc::adaptive::AdaptiveTrace,
) -> bool {
    let last = trace.runs.last().unwrap();
    let hard = hard_detect(x_th, y);
    let l = llr(assumed, y);
    let standalone = mram_ecc::decode::run(
        last.kind,
        policy.graph(),
        DecoderInput::both(&hard, &l),
        policy.level(last.level),
        last.iterations,
    )
    .unwrap();
    standalone.word == outcome.word
        && standalone.iterations_used == last.iterations
        && standalone.success == last.success
        && last.kind == policy.level_kind(trace.final_level)
}
