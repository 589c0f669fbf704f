//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use common::{finite_difference_check, graph, random_read, replay_final_level, single_error_read};
use mram_ecc::adaptive::{
    adaptive_decode, calibrate_thresholds, AdaptivePolicy, ChannelFamily, SPREAD_BREAKPOINTS,
};
use mram_ecc::channel::{
    analytic_raw_ber, estimate_raw_ber, hard_detect, llr, nominal_threshold, ChannelParams,
    ReadBlock,
};
use mram_ecc::cost::{
    check_measured_vs_formula, compare_fixed_vs_adaptive, one_read_per_level, CostRatios,
};
use mram_ecc::decode::{run, run_full, DecoderInput, WeightSet};
use mram_ecc::sim::{simulate, BerCounts, BerJob, Execution, LlrMode};
use mram_ecc::train::{train, TrainConfig};
use mram_ecc::{code_by_name, DecoderKind, UnfoldedGraph};

const CODES: [&str; 2] = ["hamming_7_4", "hamming_71_64"];

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn reduction_equivalence() -> Outcome {
    let spreads = [0.04, 0.08, 0.12, 0.16, 0.2];
    let mut iterated = 0;
    for name in CODES {
        let g = graph(name, 5);
        let code = g.code();
        for i in 0..10_000u64 {
            let channel = ChannelParams::from_spread(spreads[i as usize % spreads.len()], 0.0, 0.0);
            let (_, y) = random_read(code, &channel, i);
            let hard = hard_detect(nominal_threshold(&channel).unwrap(), &y);
            let l = llr(&channel, &y);
            let input = DecoderInput::both(&hard, &l);
            for kind in [DecoderKind::Bf, DecoderKind::Ms, DecoderKind::Bp] {
                let a = run(kind, &g, input, &WeightSet::neutral(kind, &g), 5).unwrap();
                let nk = kind.neural();
                let b = run(nk, &g, input, &WeightSet::neutral(nk, &g), 5).unwrap();
                if (&a.word, a.iterations_used, &a.per_iteration_syndrome_weight)
                    != (&b.word, b.iterations_used, &b.per_iteration_syndrome_weight)
                {
                    return Err(format!("{name} read {i}: {kind} and {nk} differ"));
                }
                iterated += usize::from(a.iterations_used > 0);
            }
        }
    }
    Ok(format!(
        "2 x 10^4 reads, 3 pairs identical ({iterated} decodes iterated)"
    ))
}

fn single_error_correction() -> Outcome {
    let channel = ChannelParams::from_spread(0.05, 0.0, 0.0);
    let x_th = nominal_threshold(&channel).unwrap();
    let mut patterns = 0;
    for name in CODES {
        let g = graph(name, 5);
        let code = g.code();
        let mut words = vec![vec![0u8; code.n()]];
        words.extend((0..3).map(|s| random_read(code, &channel, 500 + s).0));
        for word in &words {
            for v in 0..code.n() {
                let y = single_error_read(word, v, &channel);
                let hard = hard_detect(x_th, &y);
                let l = llr(&channel, &y);
                for kind in [DecoderKind::Bf, DecoderKind::Ms, DecoderKind::Bp] {
                    let out = run(
                        kind,
                        &g,
                        DecoderInput::both(&hard, &l),
                        &WeightSet::neutral(kind, &g),
                        5,
                    )
                    .unwrap();
                    if &out.word != word {
                        return Err(format!("{name} {kind}: error at bit {v} not corrected"));
                    }
                }
                patterns += 1;
            }
        }
    }
    Ok(format!(
        "{patterns} single-error reads corrected by BF, MS and BP"
    ))
}

fn gradient_correctness() -> Outcome {
    let g = graph("hamming_7_4", 2);
    let mut parts = Vec::new();
    let mut ok = true;
    for kind in [DecoderKind::Nbf, DecoderKind::Noms, DecoderKind::Nbp] {
        let s = finite_difference_check(kind, &g, 20, 5);
        ok &= s.checked > 0 && s.fraction() >= 0.99;
        parts.push(format!(
            "{kind} {}/{} agree ({} excluded, worst {:.1e})",
            s.agreeing, s.checked, s.excluded, s.worst
        ));
    }
    check(ok, parts.join(", "))
}

fn ber_job<'a>(
    g: &'a UnfoldedGraph,
    kind: DecoderKind,
    ws: &'a WeightSet,
    channel: ChannelParams,
    mode: LlrMode,
    seed: u64,
) -> BerJob<'a> {
    BerJob {
        graph: g,
        kind,
        weights: ws,
        channel,
        llr_mode: mode,
        x_th: nominal_threshold(&channel.nominal()).unwrap(),
        max_iter: g.iterations(),
        seed,
        random_codewords: true,
    }
}

fn fmt_ber(c: &BerCounts) -> String {
    let (lo, hi) = c.ber_interval();
    format!("{:.2e} [{:.2e}, {:.2e}]", c.ber(), lo, hi)
}

fn mismatched_vs_genie() -> Outcome {
    let g = graph("hamming_71_64", 5);
    let channel = ChannelParams::from_spread(0.09, -0.2, 0.03);
    let ws = WeightSet::neutral(DecoderKind::Bp, &g);
    let codewords = 20_000;
    let mis = simulate(
        &ber_job(&g, DecoderKind::Bp, &ws, channel, LlrMode::Mismatched, 4),
        codewords,
        Execution::Parallel,
    )
    .unwrap();
    let gen = simulate(
        &ber_job(&g, DecoderKind::Bp, &ws, channel, LlrMode::Genie, 4),
        codewords,
        Execution::Parallel,
    )
    .unwrap();
    let (_, ghi) = gen.ber_interval();
    let (mlo, _) = mis.ber_interval();
    let in_band = (1e-3..=1e-2).contains(&mis.ber());
    let ok = in_band && mis.bits >= 1_000_000 && gen.ber() < mis.ber() && ghi < mlo;
    check(
        ok,
        format!(
            "spread 9%, {} bits: BP mismatched {} vs genie {}",
            mis.bits,
            fmt_ber(&mis),
            fmt_ber(&gen)
        ),
    )
}

fn trained_no_regression() -> Outcome {
    let code = Arc::new(code_by_name("hamming_71_64").unwrap());
    let channel = ChannelParams::from_spread(0.08, -0.2, 0.03);
    let test_codewords = 100_000;
    let mut parts = Vec::new();
    let mut ok = true;
    for (kind, epochs) in [(DecoderKind::Nbp, 5), (DecoderKind::Noms, 10)] {
        let mut cfg = TrainConfig::defaults(kind, channel);
        cfg.samples_train = 5_000;
        cfg.samples_val = 20_000;
        cfg.epochs = epochs;
        cfg.seed = 3;
        let out = train(&cfg, Arc::clone(&code)).unwrap();
        let std_kind = kind.standard();
        let neutral = WeightSet::neutral(std_kind, &out.graph);
        let base = simulate(
            &ber_job(&out.graph, std_kind, &neutral, channel, LlrMode::Genie, 99),
            test_codewords,
            Execution::Parallel,
        )
        .unwrap();
        let trained = simulate(
            &ber_job(&out.graph, kind, &out.weights, channel, LlrMode::Genie, 99),
            test_codewords,
            Execution::Parallel,
        )
        .unwrap();
        ok &= trained.ber() <= base.ber();
        parts.push(format!(
            "{kind} {:.2e} vs {std_kind} {:.2e} (ratio {:.3}, best epoch {})",
            trained.ber(),
            base.ber(),
            trained.ber() / base.ber(),
            out.log.best_epoch
        ));
    }
    check(ok, parts.join("; "))
}

fn formula_conformance() -> Outcome {
    let channel = ChannelParams::from_spread(0.12, 0.0, 0.0);
    let x_th = nominal_threshold(&channel).unwrap();
    let mut checked = 0;
    for name in CODES {
        let g = graph(name, 5);
        for kind in DecoderKind::ALL {
            let (_, y) = random_read(g.code(), &channel, 600 + checked);
            let hard = hard_detect(x_th, &y);
            let l = llr(&channel, &y);
            let out = run_full(
                kind,
                &g,
                DecoderInput::both(&hard, &l),
                &WeightSet::neutral(kind, &g),
            )
            .unwrap();
            let report =
                check_measured_vs_formula(&out, kind, g.code(), 5).map_err(|e| e.to_string())?;
            report.ensure().map_err(|e| format!("{name}: {e}"))?;
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} decoder/code pairs within the closed forms"
    ))
}

fn adaptive_cost_arithmetic() -> Outcome {
    let r = compare_fixed_vs_adaptive(&one_read_per_level(5), &CostRatios::default()).unwrap();
    let detail = format!(
        "latency {} vs {} ({:.1}% reduction), energy {} vs {} ({:.1}% reduction)",
        r.adaptive_latency,
        r.fixed_latency,
        r.latency_pct,
        r.adaptive_energy,
        r.fixed_energy,
        r.energy_pct
    );
    let ok = (
        r.adaptive_latency,
        r.fixed_latency,
        r.adaptive_energy,
        r.fixed_energy,
    ) == (12.0, 24.0, 9.0, 18.0)
        && format!("{:.1}", r.latency_pct) == "50.0"
        && format!("{:.1}", r.energy_pct) == "50.0";
    check(ok, detail)
}

fn raw_ber_calibration() -> Outcome {
    let n_ref = 100_000;
    let mut parts = Vec::new();
    let mut ok = true;
    let mut z_of = |spread: f64, mu_b: f64, sb: f64| {
        let ch = ChannelParams::from_spread(spread, mu_b, sb);
        let x_th = nominal_threshold(&ch.nominal()).unwrap();
        let p = analytic_raw_ber(&ch, x_th);
        let est = estimate_raw_ber(&ch, x_th, n_ref, 8).unwrap();
        let z = (est - p) / (p * (1.0 - p) / n_ref as f64).sqrt();
        parts.push(format!(
            "{spread}/{mu_b}: {:.3} expected, z={z:+.2}",
            p * n_ref as f64
        ));
        z
    };
    for spread in [0.03, 0.05, 0.07] {
        for (mu_b, sb) in [(0.0, 0.0), (-0.2, 0.03)] {
            ok &= z_of(spread, mu_b, sb).abs() <= 3.0;
        }
    }
    // spreads where the expected error count is large enough for the
    // normal approximation to bite
    for spread in [0.1, 0.12] {
        ok &= z_of(spread, 0.0, 0.0).abs() <= 3.0;
    }
    check(ok, parts.join(", "))
}

fn adaptive_consistency() -> Outcome {
    // thresholds calibrated on the offset-free family; odd reads add the
    // resistance offset and estimate the raw BER from reference cells
    let nominal = ChannelFamily::nominal();
    let offset = ChannelFamily {
        mu_b: -0.2,
        sigma_b_frac: 0.03,
    };
    let thresholds = calibrate_thresholds(&nominal, SPREAD_BREAKPOINTS, None).unwrap();
    let spreads = [0.03, 0.05, 0.07, 0.09, 0.12];
    let mut levels = [0usize; 3];
    for name in CODES {
        let policy = AdaptivePolicy::neutral(graph(name, 5), thresholds).unwrap();
        for i in 0..500u64 {
            let spread = spreads[(i / 2) as usize % spreads.len()];
            let channel = if i % 2 == 0 {
                nominal.at(spread)
            } else {
                offset.at(spread)
            };
            let assumed = channel.nominal();
            let x_th = nominal_threshold(&assumed).unwrap();
            let p_hat = if i % 2 == 0 {
                analytic_raw_ber(&channel, x_th)
            } else {
                estimate_raw_ber(&channel, x_th, 10_000, i).unwrap()
            };
            let (_, y) = random_read(policy.graph().code(), &channel, 900_000 + i);
            let block = ReadBlock {
                y: y.clone(),
                truth: None,
            };
            let (out, trace) = adaptive_decode(&policy, &block, &assumed, p_hat).unwrap();
            if !trace.is_monotone() {
                return Err(format!("{name} read {i}: levels {:?}", trace.runs));
            }
            if !replay_final_level(&policy, &y, &assumed, x_th, &out, &trace) {
                return Err(format!("{name} read {i}: final level does not replay"));
            }
            levels[trace.final_level - 1] += 1;
        }
    }
    Ok(format!("1000 reads consistent, final levels {levels:?}"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("reduction equivalence", reduction_equivalence),
        ("single-error correction", single_error_correction),
        ("gradient correctness", gradient_correctness),
        ("mismatched vs genie LLR", mismatched_vs_genie),
        ("trained no-regression", trained_no_regression),
        ("op-count conformance", formula_conformance),
        ("adaptive cost arithmetic", adaptive_cost_arithmetic),
        ("raw-BER estimator", raw_ber_calibration),
        ("adaptive consistency", adaptive_consistency),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(d) => println!("PASS criterion {}: {name} ({secs:.1}s) {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({secs:.1}s) {d}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
