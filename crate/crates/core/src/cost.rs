//! Operation-count formulas per decoder family and the latency/energy ratio
//! model used to price adaptive decoding traces.
//!
//! Closed forms in `E` (edges), `C` (checks), `V` (variables) and `I`
//! (iterations):
//!
//! | class | NBF        | NOMS   | NBP    |
//! |-------|------------|--------|--------|
//! | add   | ≈ 2EI      | 3EI    | 2EI    |
//! | cmp   | (V − 1)I   | ≈ 2EI  | 0      |
//! | mul   | CI         | 0      | ≈ 3EI  |
//! | xor   | I          | ≈ 2EI  | 0      |
//! | tanh  | 0          | 0      | 2EI    |
//!
//! Standard decoders share the formulas of their neural counterparts.
//! Approximate entries are accepted within ±20 % of the closed form.

use std::fmt;
use std::ops::{Add, AddAssign};

use crate::adaptive::{AdaptiveTrace, LevelRun};
use crate::code::LinearCode;
use crate::decode::DecodeOutcome;
use crate::error::{Error, Result};
use crate::kind::{DecoderKind, Family};

/// Relative band for approximate formula entries.
pub const APPROX_BAND: f64 = 0.20;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct OpCounts {
    pub add: u64,
    pub cmp: u64,
    pub mul: u64,
    pub xor: u64,
    pub tanh: u64,
}

impl OpCounts {
    pub fn get(&self, class: OpClass) -> u64 {
        match class {
            OpClass::Add => self.add,
            OpClass::Cmp => self.cmp,
            OpClass::Mul => self.mul,
            OpClass::Xor => self.xor,
            OpClass::Tanh => self.tanh,
        }
    }
}

impl Add for OpCounts {
    type Output = OpCounts;

    fn add(self, o: OpCounts) -> OpCounts {
        OpCounts {
            add: self.add + o.add,
            cmp: self.cmp + o.cmp,
            mul: self.mul + o.mul,
            xor: self.xor + o.xor,
            tanh: self.tanh + o.tanh,
        }
    }
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, o: OpCounts) {
        *self = *self + o;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpClass {
    Add,
    Cmp,
    Mul,
    Xor,
    Tanh,
}

impl OpClass {
    pub const ALL: [OpClass; 5] = [
        OpClass::Add,
        OpClass::Cmp,
        OpClass::Mul,
        OpClass::Xor,
        OpClass::Tanh,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OpClass::Add => "add",
            OpClass::Cmp => "cmp",
            OpClass::Mul => "mul",
            OpClass::Xor => "xor",
            OpClass::Tanh => "tanh",
        }
    }
}

impl fmt::Display for OpClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormulaTerm {
    pub value: u64,
    /// Marked approximate (≈) in the closed forms.
    pub approx: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpCountFormula {
    pub add: FormulaTerm,
    pub cmp: FormulaTerm,
    pub mul: FormulaTerm,
    pub xor: FormulaTerm,
    pub tanh: FormulaTerm,
}

impl OpCountFormula {
    pub fn get(&self, class: OpClass) -> FormulaTerm {
        match class {
            OpClass::Add => self.add,
            OpClass::Cmp => self.cmp,
            OpClass::Mul => self.mul,
            OpClass::Xor => self.xor,
            OpClass::Tanh => self.tanh,
        }
    }
}

pub fn formula_counts(kind: DecoderKind, code: &LinearCode, iterations: usize) -> OpCountFormula {
    let e = code.num_edges() as u64;
    let c = code.num_checks() as u64;
    let v = code.n() as u64;
    let i = iterations as u64;
    let exact = |value| FormulaTerm {
        value,
        approx: false,
    };
    let approx = |value| FormulaTerm {
        value,
        approx: true,
    };
    match kind.family() {
        Family::BitFlip => OpCountFormula {
            add: approx(2 * e * i),
            cmp: exact((v - 1) * i),
            mul: exact(c * i),
            xor: exact(i),
            tanh: exact(0),
        },
        Family::MinSum => OpCountFormula {
            add: exact(3 * e * i),
            cmp: approx(2 * e * i),
            mul: exact(0),
            xor: approx(2 * e * i),
            tanh: exact(0),
        },
        Family::BeliefProp => OpCountFormula {
            add: exact(2 * e * i),
            cmp: exact(0),
            mul: approx(3 * e * i),
            xor: exact(0),
            tanh: exact(2 * e * i),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConformanceRow {
    pub class: OpClass,
    pub formula: u64,
    pub approx: bool,
    pub measured: u64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConformanceReport {
    pub kind: DecoderKind,
    pub rows: Vec<ConformanceRow>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// Errors with one line per failing class.
    pub fn ensure(&self) -> Result<()> {
        let bad: Vec<String> = self
            .rows
            .iter()
            .filter(|r| !r.pass)
            .map(|r| {
                format!(
                    "{} {}: measured {} vs formula {}{}",
                    self.kind,
                    r.class,
                    r.measured,
                    if r.approx { "≈" } else { "" },
                    r.formula
                )
            })
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Precondition(bad.join("; ")))
        }
    }
}

/// Compares an instrumented decode that ran all `iterations` against the
/// closed forms: exact entries must match, approximate ones must fall within
/// [`APPROX_BAND`].
pub fn check_measured_vs_formula(
    outcome: &DecodeOutcome,
    kind: DecoderKind,
    code: &LinearCode,
    iterations: usize,
) -> Result<ConformanceReport> {
    if outcome.iterations_used != iterations {
        return Err(Error::Precondition(format!(
            "decode ran {} of {iterations} iterations; conformance needs a full run",
            outcome.iterations_used
        )));
    }
    let formula = formula_counts(kind, code, iterations);
    let rows = OpClass::ALL
        .iter()
        .map(|&class| {
            let term = formula.get(class);
            let measured = outcome.op_counts.get(class);
            let pass = if term.approx {
                let f = term.value as f64;
                let m = measured as f64;
                m >= (1.0 - APPROX_BAND) * f && m <= (1.0 + APPROX_BAND) * f
            } else {
                measured == term.value
            };
            ConformanceRow {
                class,
                formula: term.value,
                approx: term.approx,
                measured,
                pass,
            }
        })
        .collect();
    Ok(ConformanceReport { kind, rows })
}

/// Latency and energy of one full-I decode, in units of the bit-flipping
/// decoder. Defaults: NBF 1, NOMS 3, NBP 8 (latency); 1, 2, 6 (energy).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostRatios {
    pub latency: [f64; 3],
    pub energy: [f64; 3],
}

impl Default for CostRatios {
    fn default() -> Self {
        CostRatios {
            latency: [1.0, 3.0, 8.0],
            energy: [1.0, 2.0, 6.0],
        }
    }
}

impl CostRatios {
    fn slot(kind: DecoderKind) -> usize {
        match kind.family() {
            Family::BitFlip => 0,
            Family::MinSum => 1,
            Family::BeliefProp => 2,
        }
    }

    pub fn full_latency(&self, kind: DecoderKind) -> f64 {
        self.latency[Self::slot(kind)]
    }

    pub fn full_energy(&self, kind: DecoderKind) -> f64 {
        self.energy[Self::slot(kind)]
    }
}

/// Latency and energy of an adaptive trace. Each level is charged its full-I
/// cost scaled by the fraction of iterations it consumed; a level that failed
/// is charged in full.
pub fn trace_cost(trace: &AdaptiveTrace, ratios: &CostRatios) -> (f64, f64) {
    trace.runs.iter().fold((0.0, 0.0), |(lat, en), run| {
        let frac = if !run.success || run.max_iter == 0 {
            1.0
        } else {
            run.iterations as f64 / run.max_iter as f64
        };
        (
            lat + frac * ratios.full_latency(run.kind),
            en + frac * ratios.full_energy(run.kind),
        )
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reduction {
    pub adaptive_latency: f64,
    pub adaptive_energy: f64,
    pub fixed_latency: f64,
    pub fixed_energy: f64,
    pub latency_pct: f64,
    pub energy_pct: f64,
}

/// Adaptive cost of `cases` against a fixed NBP decoder running full I on
/// every case.
pub fn compare_fixed_vs_adaptive(
    cases: &[AdaptiveTrace],
    ratios: &CostRatios,
) -> Result<Reduction> {
    if cases.is_empty() {
        return Err(Error::param("no cases to compare"));
    }
    let (lat, en) = cases.iter().fold((0.0, 0.0), |(l, e), t| {
        let (tl, te) = trace_cost(t, ratios);
        (l + tl, e + te)
    });
    let fixed_lat = cases.len() as f64 * ratios.full_latency(DecoderKind::Nbp);
    let fixed_en = cases.len() as f64 * ratios.full_energy(DecoderKind::Nbp);
    Ok(Reduction {
        adaptive_latency: lat,
        adaptive_energy: en,
        fixed_latency: fixed_lat,
        fixed_energy: fixed_en,
        latency_pct: (1.0 - lat / fixed_lat) * 100.0,
        energy_pct: (1.0 - en / fixed_en) * 100.0,
    })
}

/// Three reads that each enter at a different level and succeed there after
/// the full `max_iter` iterations.
pub fn one_read_per_level(max_iter: usize) -> Vec<AdaptiveTrace> {
    [DecoderKind::Nbf, DecoderKind::Noms, DecoderKind::Nbp]
        .into_iter()
        .enumerate()
        .map(|(i, kind)| {
            AdaptiveTrace::from_runs(vec![LevelRun {
                level: i + 1,
                kind,
                iterations: max_iter,
                max_iter,
                success: true,
            }])
        })
        .collect()
}
