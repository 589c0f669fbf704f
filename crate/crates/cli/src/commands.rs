use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use mram_ecc::adaptive::{
    adaptive_decode, calibrate_thresholds, AdaptivePolicy, AdaptiveTrace, ChannelFamily,
};
use mram_ecc::alist::to_alist;
use mram_ecc::channel::{
    analytic_raw_ber, estimate_raw_ber, hard_detect, llr, nominal_threshold, sample_read,
    stream_rng, ChannelParams, ReadBlock,
};
use mram_ecc::cost::{
    check_measured_vs_formula, compare_fixed_vs_adaptive, one_read_per_level, CostRatios,
};
use mram_ecc::decode::{run_full, DecoderInput, WeightSet};
use mram_ecc::sim::{simulate, simulate_until, BerJob, Execution, LlrMode};
use mram_ecc::train::TrainConfig;
use mram_ecc::{build_hamming, code_by_name, DecoderKind, Error, UnfoldedGraph};
use rand::Rng;

use crate::config::{parse_kind, parse_llr_mode, Config};
use crate::output::{num, Csv};
use crate::{AdaptiveArgs, Classify, CostArgs, Failure, GenCodeArgs, Outcome, TrainArgs};

fn graph(cfg: &Config) -> Outcome<UnfoldedGraph> {
    let code = cfg.code().config()?;
    UnfoldedGraph::unfold(code, cfg.code.iterations).config()
}

fn load_weights(
    cfg: &Config,
    kind: DecoderKind,
    g: &UnfoldedGraph,
    path: Option<&Path>,
) -> Outcome<WeightSet> {
    match path {
        None => Ok(WeightSet::neutral(kind, g)),
        Some(p) => {
            let p = cfg.resolve(p);
            let ws = WeightSet::load(g, &p)
                .with_context(|| format!("cannot load weights {}", p.display()))
                .config()?;
            if ws.kind() != kind {
                return Err(Failure::Config(anyhow!(
                    "{} holds {} weights, expected {kind}",
                    p.display(),
                    ws.kind()
                )));
            }
            Ok(ws)
        }
    }
}

pub fn ber_sweep(cfg: &Config, seed: u64, out: Option<&Path>) -> Outcome<()> {
    let s = &cfg.ber_sweep;
    if s.spreads.is_empty() || s.decoders.is_empty() {
        return Err(Failure::Config(anyhow!(
            "ber_sweep needs at least one spread and one decoder"
        )));
    }
    if s.trials == 0 || s.max_trials.is_some_and(|m| m < s.trials) {
        return Err(Failure::Config(anyhow!(
            "ber_sweep trials must satisfy 1 <= trials <= max_trials"
        )));
    }
    let g = graph(cfg)?;
    let kinds: Vec<DecoderKind> = s
        .decoders
        .iter()
        .map(|d| parse_kind(d))
        .collect::<Result<_, _>>()
        .config()?;
    let modes: Vec<LlrMode> = s
        .llr_modes
        .iter()
        .map(|m| parse_llr_mode(m))
        .collect::<Result<_, _>>()
        .config()?;
    if modes.is_empty() && kinds.iter().any(|k| k.needs_llr()) {
        return Err(Failure::Config(anyhow!(
            "soft decoders need at least one llr mode"
        )));
    }
    let mut weights = BTreeMap::new();
    for &k in &kinds {
        let path = s
            .weights
            .get(&k.as_str().to_ascii_lowercase())
            .map(|p| p.as_path());
        weights.insert(k, load_weights(cfg, k, &g, path)?);
    }
    for &sp in &s.spreads {
        cfg.channel.at(sp).validate().config()?;
    }

    let mut csv = Csv::new(
        "ber-sweep",
        &[
            "spread",
            "decoder",
            "llr_mode",
            "raw_ber",
            "raw_ber_analytic",
            "ber",
            "block_err",
            "trials",
            "wilson_ci_low",
            "wilson_ci_high",
        ],
    );
    for &spread in &s.spreads {
        let channel = cfg.channel.at(spread);
        let x_th = nominal_threshold(&channel.nominal()).config()?;
        let analytic = analytic_raw_ber(&channel, x_th);
        for &kind in &kinds {
            // hard-input decoders do not see the LLR mode
            let cell_modes: Vec<Option<LlrMode>> = if kind.needs_llr() {
                modes.iter().copied().map(Some).collect()
            } else {
                vec![None]
            };
            for mode in cell_modes {
                let job = BerJob {
                    graph: &g,
                    kind,
                    weights: &weights[&kind],
                    channel,
                    llr_mode: mode.unwrap_or(LlrMode::Genie),
                    x_th,
                    max_iter: g.iterations(),
                    seed,
                    random_codewords: true,
                };
                let counts = match s.max_trials {
                    Some(max) => {
                        simulate_until(&job, s.trials, max, s.rel_half_width, Execution::Parallel)
                    }
                    None => simulate(&job, s.trials, Execution::Parallel),
                }
                .runtime()?;
                let (lo, hi) = counts.ber_interval();
                csv.row(&[
                    num(spread),
                    kind.to_string(),
                    mode.map_or("hard", LlrMode::as_str).to_string(),
                    num(counts.raw_ber()),
                    num(analytic),
                    num(counts.ber()),
                    counts.block_errors.to_string(),
                    counts.blocks.to_string(),
                    num(lo),
                    num(hi),
                ]);
            }
        }
    }
    csv.emit(out).runtime()
}

pub fn train(cfg: &Config, seed: u64, out: Option<&Path>, a: &TrainArgs) -> Outcome<()> {
    let t = &cfg.train;
    let kind = parse_kind(a.kind.as_deref().unwrap_or(&t.kind)).config()?;
    let spread = a.spread.unwrap_or(cfg.channel.spread);
    let mut tc = TrainConfig::defaults(kind, cfg.channel.at(spread));
    tc.samples_train = a.samples_train.unwrap_or(t.samples_train);
    tc.samples_val = a.samples_val.unwrap_or(t.samples_val);
    tc.batch = a.batch.unwrap_or(t.batch);
    if let Some(lr) = a.lr.or(t.lr) {
        tc.lr = lr;
    }
    tc.epochs = a.epochs.unwrap_or(t.epochs);
    tc.tau = a.tau.unwrap_or(t.tau);
    tc.iterations = a.iterations.unwrap_or(cfg.code.iterations);
    tc.random_codewords = t.random_codewords;
    tc.seed = seed;
    tc.validate().config()?;
    let code = cfg.code().config()?;

    let dir = out.unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .runtime()?;
    let log_path = dir.join("train_log.csv");
    let stem = kind.as_str().to_ascii_lowercase();
    match mram_ecc::train::train(&tc, Arc::clone(&code)) {
        Ok(res) => {
            Csv::with_body("train-log", &res.log.to_csv())
                .emit(Some(&log_path))
                .runtime()?;
            let wpath = dir.join(format!("{stem}.weights"));
            res.weights.save(&res.graph, &wpath).runtime()?;
            eprintln!(
                "{kind}: best epoch {} of {}, validation BER {:.3e}; wrote {}",
                res.log.best_epoch,
                tc.epochs,
                res.log.epochs[res.log.best_epoch].val_ber,
                wpath.display()
            );
            Ok(())
        }
        Err(Error::Diverged { epoch, log }) => {
            Csv::with_body("train-log", &log)
                .emit(Some(&log_path))
                .runtime()?;
            Err(Failure::Runtime(anyhow!(
                "training diverged at epoch {epoch}; partial log in {}",
                log_path.display()
            )))
        }
        Err(e) => Err(Failure::Runtime(e.into())),
    }
}

const ADAPTIVE_COLUMNS: [&str; 11] = [
    "scenario",
    "spread",
    "entry_level",
    "reads",
    "success_rate",
    "mean_latency",
    "mean_energy",
    "fixed_latency",
    "fixed_energy",
    "latency_reduction_pct",
    "energy_reduction_pct",
];

fn pct(x: f64) -> String {
    format!("{x:.1}")
}

pub fn adaptive_sim(cfg: &Config, seed: u64, out: Option<&Path>, a: &AdaptiveArgs) -> Outcome<()> {
    let s = &cfg.adaptive;
    if s.scenarios.is_empty() {
        return Err(Failure::Config(anyhow!(
            "adaptive.scenarios is empty; give at least one spread"
        )));
    }
    let ratios = CostRatios::default();
    let mut csv = Csv::new("adaptive-sim", &ADAPTIVE_COLUMNS);

    if a.forced {
        let cases = one_read_per_level(cfg.code.iterations);
        for (i, t) in cases.iter().enumerate() {
            let r = compare_fixed_vs_adaptive(std::slice::from_ref(t), &ratios).runtime()?;
            let spread = s.scenarios.get(i).copied().map_or(String::new(), num);
            push_row(
                &mut csv,
                &format!("case{}", i + 1),
                spread,
                t.entry_level.to_string(),
                1,
                1.0,
                &r,
            );
        }
        let r = compare_fixed_vs_adaptive(&cases, &ratios).runtime()?;
        push_row(
            &mut csv,
            "total",
            String::new(),
            String::new(),
            cases.len() as u64,
            1.0,
            &r,
        );
        eprintln!(
            "adaptive {} / {} latency units vs fixed {} / {}: latency reduction {}%, energy reduction {}%",
            r.adaptive_latency,
            r.adaptive_energy,
            r.fixed_latency,
            r.fixed_energy,
            pct(r.latency_pct),
            pct(r.energy_pct)
        );
        return csv.emit(out).runtime();
    }

    if s.reads == 0 || s.n_ref == 0 {
        return Err(Failure::Config(anyhow!(
            "adaptive.reads and adaptive.n_ref must be at least 1"
        )));
    }
    let g = graph(cfg)?;
    let levels = vec![
        load_weights(cfg, DecoderKind::Nbf, &g, s.nbf.as_deref())?,
        load_weights(cfg, DecoderKind::Noms, &g, s.noms.as_deref())?,
        load_weights(cfg, DecoderKind::Nbp, &g, s.nbp.as_deref())?,
    ];
    let family = ChannelFamily {
        mu_b: cfg.channel.mu_b,
        sigma_b_frac: cfg.channel.sigma_b_frac,
    };
    let thresholds = match s.thresholds {
        Some(t) => t,
        None => calibrate_thresholds(&family, s.breakpoints, None).config()?,
    };
    let policy = AdaptivePolicy::new(g, levels, thresholds, None).config()?;
    let mode = parse_llr_mode(&s.llr_mode).config()?;
    let code = policy.graph().code();

    for (idx, &spread) in s.scenarios.iter().enumerate() {
        let channel = family.at(spread);
        channel.validate().config()?;
        let assumed = mode.assumed(&channel);
        let x_th = nominal_threshold(&channel.nominal()).config()?;
        let mut traces: Vec<AdaptiveTrace> = Vec::with_capacity(s.reads as usize);
        let mut correct = 0u64;
        let mut entries = [0u64; 3];
        for i in 0..s.reads {
            let mut rng = stream_rng(seed, ((idx as u64) << 32) | i);
            let msg: Vec<u8> = (0..code.k()).map(|_| rng.random::<bool>() as u8).collect();
            let word = code.encode(&msg).runtime()?;
            let block: ReadBlock = sample_read(&channel, &word, rng.random()).runtime()?;
            let p_hat = estimate_raw_ber(&channel, x_th, s.n_ref, rng.random()).runtime()?;
            let (outcome, trace) = adaptive_decode(&policy, &block, &assumed, p_hat).runtime()?;
            correct += u64::from(outcome.word == word);
            entries[trace.entry_level - 1] += 1;
            traces.push(trace);
        }
        let r = compare_fixed_vs_adaptive(&traces, &ratios).runtime()?;
        let entry = (0..3)
            .max_by_key(|&l| (entries[l], std::cmp::Reverse(l)))
            .unwrap_or(0)
            + 1;
        push_row(
            &mut csv,
            &format!("s{}", idx + 1),
            num(spread),
            entry.to_string(),
            s.reads,
            correct as f64 / s.reads as f64,
            &r,
        );
    }
    csv.emit(out).runtime()
}

fn push_row(
    csv: &mut Csv,
    name: &str,
    spread: String,
    entry: String,
    reads: u64,
    success: f64,
    r: &mram_ecc::cost::Reduction,
) {
    let n = reads as f64;
    csv.row(&[
        name.to_string(),
        spread,
        entry,
        reads.to_string(),
        num(success),
        num(r.adaptive_latency / n),
        num(r.adaptive_energy / n),
        num(r.fixed_latency / n),
        num(r.fixed_energy / n),
        pct(r.latency_pct),
        pct(r.energy_pct),
    ]);
}

pub fn cost_report(cfg: &Config, seed: u64, out: Option<&Path>, a: &CostArgs) -> Outcome<()> {
    let code = match &a.code {
        Some(name) => Arc::new(code_by_name(name).config()?),
        None => cfg.code().config()?,
    };
    let iterations = a.iterations.unwrap_or(cfg.code.iterations);
    let g = UnfoldedGraph::unfold(Arc::clone(&code), iterations).config()?;
    // noisy enough that every decoder has work on every iteration
    let channel = ChannelParams::from_spread(0.12, 0.0, 0.0);
    let x_th = nominal_threshold(&channel).runtime()?;
    let mut csv = Csv::new(
        "cost-report",
        &[
            "kind", "E", "C", "V", "I", "class", "formula", "approx", "measured", "pass",
        ],
    );
    let mut failures = Vec::new();
    for (i, kind) in DecoderKind::ALL.into_iter().enumerate() {
        let mut rng = stream_rng(seed, i as u64);
        let msg: Vec<u8> = (0..code.k()).map(|_| rng.random::<bool>() as u8).collect();
        let word = code.encode(&msg).runtime()?;
        let y = sample_read(&channel, &word, rng.random()).runtime()?.y;
        let hard = hard_detect(x_th, &y);
        let l = llr(&channel, &y);
        let outcome = run_full(
            kind,
            &g,
            DecoderInput::both(&hard, &l),
            &WeightSet::neutral(kind, &g),
        )
        .runtime()?;
        let report = check_measured_vs_formula(&outcome, kind, &code, iterations).runtime()?;
        for row in &report.rows {
            csv.row(&[
                kind.to_string(),
                code.num_edges().to_string(),
                code.num_checks().to_string(),
                code.n().to_string(),
                iterations.to_string(),
                row.class.to_string(),
                row.formula.to_string(),
                row.approx.to_string(),
                row.measured.to_string(),
                if row.pass { "pass" } else { "fail" }.to_string(),
            ]);
        }
        if let Err(e) = report.ensure() {
            failures.push(e.to_string());
        }
    }
    csv.emit(out).runtime()?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(anyhow!("{}", failures.join("; "))))
    }
}

pub fn gen_code(out: Option<&Path>, a: &GenCodeArgs) -> Outcome<()> {
    let code = match (&a.code, a.hamming) {
        (Some(name), None) => code_by_name(name).config()?,
        (None, Some(m)) => build_hamming(m).config()?,
        (None, None) => code_by_name("hamming_71_64").config()?,
        (Some(_), Some(_)) => {
            return Err(Failure::Config(anyhow!("give either --code or --hamming")))
        }
    };
    let text = to_alist(&code);
    match out {
        Some(p) => std::fs::write(p, text)
            .with_context(|| format!("cannot write {}", p.display()))
            .runtime(),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
