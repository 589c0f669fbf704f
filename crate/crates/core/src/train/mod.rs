//! Learning weight sets by reverse-mode differentiation through the unfolded
//! graph, with Adam and a loss summed over every iteration's output.

mod adam;
mod soft;

use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{hard_detect, llr, nominal_threshold, sample_into, stream_rng, ChannelParams};
use crate::code::LinearCode;
use crate::decode::{DecoderInput, WeightSet};
use crate::error::{Error, Result};
use crate::graph::UnfoldedGraph;
use crate::kind::DecoderKind;
use crate::sim::{self, BerJob, Execution, LlrMode};
use crate::tape::Tape;

pub use adam::{adam_step, AdamState};
pub use soft::P_FLOOR;

/// Per-iteration soft outputs: the probability that each bit is 1.
pub fn forward_soft(
    kind: DecoderKind,
    graph: &UnfoldedGraph,
    input: DecoderInput<'_>,
    weights: &WeightSet,
    tau: f64,
) -> Result<Vec<Vec<f64>>> {
    let pass = soft::build(kind, graph, input, weights, tau)?;
    Ok(pass
        .outputs
        .iter()
        .map(|p| p.iter().map(|&v| pass.tape.value(v)).collect())
        .collect())
}

/// Sum over iterations of the mean binary cross-entropy against `target`,
/// with probabilities clamped to `[1e−12, 1 − 1e−12]`.
pub fn multi_loss(outputs: &[Vec<f64>], target: &[u8]) -> Result<f64> {
    if outputs.is_empty() {
        return Err(Error::param("multi-loss needs at least one output tap"));
    }
    let mut total = 0.0;
    for p in outputs {
        if p.len() != target.len() {
            return Err(Error::param(format!(
                "output tap has {} entries, target has {}",
                p.len(),
                target.len()
            )));
        }
        let s: f64 = p
            .iter()
            .zip(target)
            .map(|(&pv, &t)| {
                let pc = pv.clamp(P_FLOOR, 1.0 - P_FLOOR);
                if t & 1 == 1 {
                    -pc.ln()
                } else {
                    -(1.0 - pc).ln()
                }
            })
            .sum();
        total += s / p.len() as f64;
    }
    Ok(total)
}

/// Loss, gradient over every weight slot, and the branch signature of the
/// piecewise operations taken on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Backward {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub signature: Vec<u32>,
}

pub fn backward(
    kind: DecoderKind,
    graph: &UnfoldedGraph,
    input: DecoderInput<'_>,
    weights: &WeightSet,
    target: &[u8],
    tau: f64,
) -> Result<Backward> {
    if target.len() != graph.code().n() {
        return Err(Error::param("target length differs from code length"));
    }
    let soft::SoftPass {
        mut tape,
        params,
        outputs,
    } = soft::build(kind, graph, input, weights, tau)?;
    let loss = soft::loss_on_tape(&mut tape, &outputs, target);
    let value = tape.value(loss);
    if !value.is_finite() {
        return Err(Error::Training {
            layer: 2 * graph.iterations(),
            msg: format!("non-finite loss {value}"),
        });
    }
    let adj = tape.gradient(loss);
    let grad: Vec<f64> = params.iter().map(|&p| Tape::adjoint(&adj, p)).collect();
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::Training {
            layer: 0,
            msg: format!("non-finite gradient at slot {i}"),
        });
    }
    Ok(Backward {
        loss: value,
        grad,
        signature: tape.signature().to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub kind: DecoderKind,
    /// Channel generating the training and validation reads. LLRs use the
    /// true parameters.
    pub channel: ChannelParams,
    pub samples_train: usize,
    /// Held-out random codewords used for checkpoint selection.
    pub samples_val: usize,
    /// Codewords for the final test evaluation run by callers.
    pub samples_test: usize,
    pub batch: usize,
    pub lr: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Softmax temperature of the bit-flipping relaxation.
    pub tau: f64,
    pub epochs: usize,
    /// Train on random codewords instead of the all-zero codeword.
    pub random_codewords: bool,
}

impl TrainConfig {
    /// Mini-batch 120, learning rates 3e−6 / 0.1 / 0.05 for NBF / NOMS / NBP,
    /// 4·10⁴ training and 10⁶ test codewords.
    pub fn defaults(kind: DecoderKind, channel: ChannelParams) -> Self {
        let lr = match kind {
            DecoderKind::Nbf | DecoderKind::Bf => 3e-6,
            DecoderKind::Noms | DecoderKind::Ms => 0.1,
            DecoderKind::Nbp | DecoderKind::Bp => 0.05,
        };
        TrainConfig {
            kind,
            channel,
            samples_train: 40_000,
            samples_val: 10_000,
            samples_test: 1_000_000,
            batch: 120,
            lr,
            iterations: 5,
            seed: 0,
            tau: 1.0,
            epochs: 20,
            random_codewords: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.kind.is_neural() {
            return Err(Error::param(format!("{} has nothing to train", self.kind)));
        }
        self.channel.validate()?;
        if self.batch == 0 || self.batch > self.samples_train {
            return Err(Error::param(format!(
                "batch {} must be in 1..={}",
                self.batch, self.samples_train
            )));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::param(format!(
                "learning rate {} must be non-negative",
                self.lr
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::param(format!(
                "temperature {} must be positive",
                self.tau
            )));
        }
        if self.iterations == 0 {
            return Err(Error::param("iterations must be at least 1"));
        }
        if self.samples_val == 0 {
            return Err(Error::param("samples_val must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean multi-loss over the training set.
    pub loss: f64,
    pub val_ber: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were kept (0 is the neutral start).
    pub best_epoch: usize,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss,val_ber\n");
        for r in &self.epochs {
            let _ = writeln!(s, "{},{:?},{:?}", r.epoch, r.loss, r.val_ber);
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub graph: UnfoldedGraph,
    pub weights: WeightSet,
    pub log: TrainLog,
}

struct Sample {
    target: Vec<u8>,
    hard: Vec<u8>,
    llr: Vec<f64>,
}

/// Stream-seed offsets keeping training, validation and shuffling draws apart.
const TRAIN_STREAM: u64 = 0;
const VAL_SEED_TAG: u64 = 0x9e37_79b9_7f4a_7c15;
const SHUFFLE_SEED_TAG: u64 = 0xc2b2_ae3d_27d4_eb4f;

fn training_set(cfg: &TrainConfig, code: &LinearCode) -> Result<Vec<Sample>> {
    let n = code.n();
    let x_th = nominal_threshold(&cfg.channel)?;
    (0..cfg.samples_train as u64)
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, TRAIN_STREAM + i);
            let target = if cfg.random_codewords {
                let msg: Vec<u8> = (0..code.k())
                    .map(|_| rand::Rng::random::<bool>(&mut rng) as u8)
                    .collect();
                code.encode(&msg)?
            } else {
                vec![0u8; n]
            };
            let mut y = vec![0.0; n];
            sample_into(&cfg.channel, &target, &mut rng, &mut y);
            Ok(Sample {
                hard: hard_detect(x_th, &y),
                llr: llr(&cfg.channel, &y),
                target,
            })
        })
        .collect()
}

fn sample_backward(
    cfg: &TrainConfig,
    graph: &UnfoldedGraph,
    weights: &WeightSet,
    s: &Sample,
) -> Result<Backward> {
    backward(
        cfg.kind,
        graph,
        DecoderInput::both(&s.hard, &s.llr),
        weights,
        &s.target,
        cfg.tau,
    )
}

/// Per-sample gradients, summed in index order.
fn batch_gradient(
    cfg: &TrainConfig,
    graph: &UnfoldedGraph,
    weights: &WeightSet,
    batch: &[&Sample],
) -> Result<(f64, Vec<f64>)> {
    #[cfg(feature = "parallel")]
    let parts: Vec<Result<Backward>> = {
        use rayon::prelude::*;
        batch
            .par_iter()
            .map(|s| sample_backward(cfg, graph, weights, s))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<Backward>> = batch
        .iter()
        .map(|s| sample_backward(cfg, graph, weights, s))
        .collect();

    let mut loss = 0.0;
    let mut grad = vec![0.0; weights.values().len()];
    for part in parts {
        let b = part?;
        loss += b.loss;
        grad.iter_mut().zip(&b.grad).for_each(|(g, x)| *g += x);
    }
    let scale = 1.0 / batch.len() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((loss * scale, grad))
}

fn mean_loss(
    cfg: &TrainConfig,
    graph: &UnfoldedGraph,
    weights: &WeightSet,
    data: &[Sample],
) -> Result<f64> {
    let refs: Vec<&Sample> = data.iter().collect();
    let mut total = 0.0;
    for chunk in refs.chunks(cfg.batch) {
        let (l, _) = batch_gradient(cfg, graph, weights, chunk)?;
        total += l * chunk.len() as f64;
    }
    Ok(total / data.len() as f64)
}

/// BER of the hard engine with `weights` on held-out random codewords.
pub fn validation_ber(
    cfg: &TrainConfig,
    graph: &UnfoldedGraph,
    weights: &WeightSet,
) -> Result<f64> {
    let job = BerJob {
        graph,
        kind: cfg.kind,
        weights,
        channel: cfg.channel,
        llr_mode: LlrMode::Genie,
        x_th: nominal_threshold(&cfg.channel)?,
        max_iter: graph.iterations(),
        seed: cfg.seed ^ VAL_SEED_TAG,
        random_codewords: true,
    };
    Ok(sim::simulate(&job, cfg.samples_val as u64, Execution::Parallel)?.ber())
}

/// Trains from neutral weights and returns the weights with the lowest
/// validation BER seen, the neutral start included. Ties keep the earlier
/// epoch.
pub fn train(cfg: &TrainConfig, code: Arc<LinearCode>) -> Result<TrainOutput> {
    cfg.validate()?;
    let graph = UnfoldedGraph::unfold(Arc::clone(&code), cfg.iterations)?;
    let mut weights = WeightSet::neutral(cfg.kind, &graph);
    let data = training_set(cfg, &code)?;

    let mut log = TrainLog::default();
    let loss0 = mean_loss(cfg, &graph, &weights, &data)?;
    let val0 = validation_ber(cfg, &graph, &weights)?;
    log.epochs.push(EpochRecord {
        epoch: 0,
        loss: loss0,
        val_ber: val0,
    });
    let mut best = (val0, weights.clone());

    let mut adam = AdamState::new(weights.values().len());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut shuffler = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_SEED_TAG);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffler);
        let mut loss_sum = 0.0;
        for idx in order.chunks(cfg.batch) {
            let batch: Vec<&Sample> = idx.iter().map(|&i| &data[i]).collect();
            let (loss, grad) = match batch_gradient(cfg, &graph, &weights, &batch) {
                Ok(r) => r,
                Err(Error::Training { .. }) => (f64::NAN, Vec::new()),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    log: log.to_csv(),
                });
            }
            loss_sum += loss * batch.len() as f64;
            adam_step(&mut adam, weights.values_mut(), &grad, cfg.lr)?;
        }
        let val = validation_ber(cfg, &graph, &weights)?;
        log.epochs.push(EpochRecord {
            epoch,
            loss: loss_sum / data.len() as f64,
            val_ber: val,
        });
        if val < best.0 {
            best = (val, weights.clone());
            log.best_epoch = epoch;
        }
    }
    Ok(TrainOutput {
        graph,
        weights: best.1,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::build_hamming;

    fn graph(iters: usize) -> UnfoldedGraph {
        UnfoldedGraph::unfold(Arc::new(build_hamming(3).unwrap()), iters).unwrap()
    }

    #[test]
    fn loss_of_perfect_and_uniform_predictions() {
        let target = [0, 1, 1, 0, 0, 1, 0];
        let perfect: Vec<Vec<f64>> = vec![target.iter().map(|&t| f64::from(t)).collect(); 3];
        assert!(multi_loss(&perfect, &target).unwrap() < 1e-10 * 7.0);
        let half = vec![vec![0.5; 7]; 4];
        assert!((multi_loss(&half, &target).unwrap() - 4.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!(multi_loss(&[], &target).is_err());
        assert!(multi_loss(&[vec![0.5; 6]], &target).is_err());
    }

    #[test]
    fn saturated_nbp_outputs_match_bits() {
        let g = graph(3);
        let target = g.code().encode(&[1, 0, 1, 1]).unwrap();
        let l: Vec<f64> = target
            .iter()
            .map(|&b| if b == 0 { 60.0 } else { -60.0 })
            .collect();
        let ws = WeightSet::neutral(DecoderKind::Nbp, &g);
        let out = forward_soft(DecoderKind::Nbp, &g, DecoderInput::soft(&l), &ws, 1.0).unwrap();
        for tap in &out {
            for (p, &b) in tap.iter().zip(&target) {
                assert!((p - f64::from(b)).abs() < 1e-6);
            }
        }
        let b = backward(
            DecoderKind::Nbp,
            &g,
            DecoderInput::soft(&l),
            &ws,
            &target,
            1.0,
        )
        .unwrap();
        assert!(b.grad.iter().all(|g| g.abs() < 1e-8));
    }

    #[test]
    fn high_temperature_flips_are_uniform() {
        let g = graph(2);
        let ws = WeightSet::neutral(DecoderKind::Nbf, &g);
        let hard = [0u8; 7];
        let out = forward_soft(DecoderKind::Nbf, &g, DecoderInput::hard(&hard), &ws, 1e9).unwrap();
        for q in &out[0] {
            assert!((q - 1.0 / 7.0).abs() < 1e-6);
        }
    }

    #[test]
    fn output_weight_gradient_is_analytic() {
        let g = graph(1);
        let n = 7;
        let mut ws = WeightSet::neutral(DecoderKind::Nbp, &g);
        for (i, w) in ws.values_mut().iter_mut().enumerate() {
            *w = 0.8 + 0.03 * i as f64;
        }
        let l = [1.2, -0.4, 0.9, 2.0, -1.5, 0.3, 0.7];
        let target = [0, 1, 0, 0, 1, 0, 0];
        let input = DecoderInput::soft(&l);
        let p = forward_soft(DecoderKind::Nbp, &g, input, &ws, 1.0).unwrap();
        let b = backward(DecoderKind::Nbp, &g, input, &ws, &target, 1.0).unwrap();
        let out = g.layout(DecoderKind::Nbp).output;
        for v in 0..n {
            let expect = -(p[0][v] - f64::from(target[v])) * l[v] / n as f64;
            assert!((b.grad[out.start + v] - expect).abs() < 1e-12, "bit {v}");
        }
    }

    #[test]
    fn training_error_on_bad_input() {
        let g = graph(2);
        let ws = WeightSet::neutral(DecoderKind::Noms, &g);
        let l = [f64::NAN, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let r = backward(
            DecoderKind::Noms,
            &g,
            DecoderInput::soft(&l),
            &ws,
            &[0; 7],
            1.0,
        );
        assert!(matches!(r, Err(Error::Training { layer: 1, .. })));
        let ws = WeightSet::neutral(DecoderKind::Ms, &g);
        assert!(forward_soft(DecoderKind::Ms, &g, DecoderInput::soft(&l), &ws, 1.0).is_err());
    }

    fn tiny_cfg(kind: DecoderKind, epochs: usize, lr: f64) -> TrainConfig {
        TrainConfig {
            samples_train: 240,
            samples_val: 200,
            samples_test: 200,
            epochs,
            lr,
            iterations: 2,
            seed: 5,
            ..TrainConfig::defaults(kind, ChannelParams::from_spread(0.1, 0.0, 0.0))
        }
    }

    #[test]
    fn zero_epochs_returns_neutral() {
        let code = Arc::new(build_hamming(3).unwrap());
        for kind in [DecoderKind::Nbf, DecoderKind::Noms, DecoderKind::Nbp] {
            let out = train(&tiny_cfg(kind, 0, 0.1), Arc::clone(&code)).unwrap();
            assert_eq!(out.weights, WeightSet::neutral(kind, &out.graph));
            assert_eq!(out.log.epochs.len(), 1);
        }
    }

    #[test]
    fn zero_learning_rate_keeps_neutral() {
        let code = Arc::new(build_hamming(3).unwrap());
        let out = train(&tiny_cfg(DecoderKind::Noms, 2, 0.0), code).unwrap();
        assert_eq!(
            out.weights,
            WeightSet::neutral(DecoderKind::Noms, &out.graph)
        );
        let vals: Vec<f64> = out.log.epochs.iter().map(|r| r.val_ber).collect();
        assert!(vals.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn training_is_deterministic() {
        let code = Arc::new(build_hamming(3).unwrap());
        let cfg = tiny_cfg(DecoderKind::Nbp, 2, 0.05);
        let a = train(&cfg, Arc::clone(&code)).unwrap();
        let b = train(&cfg, code).unwrap();
        assert_eq!(a.weights.to_text(&a.graph), b.weights.to_text(&b.graph));
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn config_validation() {
        let mut cfg = tiny_cfg(DecoderKind::Nbp, 1, 0.05);
        cfg.batch = 1000;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_cfg(DecoderKind::Nbf, 1, 0.05);
        cfg.tau = 0.0;
        assert!(cfg.validate().is_err());
        assert!(tiny_cfg(DecoderKind::Bp, 1, 0.05).validate().is_err());
    }
}
