//! Experiment configuration file (TOML).
//!
//! Every section is optional; missing fields take the defaults below. Paths
//! are resolved against the directory holding the config file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use mram_ecc::alist::load_alist;
use mram_ecc::channel::ChannelParams;
use mram_ecc::sim::LlrMode;
use mram_ecc::{code_by_name, DecoderKind, LinearCode};
use serde::Deserialize;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "MRAM_ECC_SEED";

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub code: CodeSection,
    pub channel: ChannelSection,
    pub ber_sweep: SweepSection,
    pub train: TrainSection,
    pub adaptive: AdaptiveSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodeSection {
    pub name: String,
    /// Alist file used instead of a named code.
    pub alist: Option<PathBuf>,
    pub iterations: usize,
}

impl Default for CodeSection {
    fn default() -> Self {
        CodeSection {
            name: "hamming_71_64".into(),
            alist: None,
            iterations: 5,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    /// Normalized spread σ₀/μ₀ = σ₁/μ₁ for single-point commands.
    pub spread: f64,
    /// Offset mean in kΩ.
    pub mu_b: f64,
    /// Offset spread as a fraction of μ₁.
    pub sigma_b_frac: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            spread: 0.08,
            mu_b: -0.2,
            sigma_b_frac: 0.03,
        }
    }
}

impl ChannelSection {
    pub fn at(&self, spread: f64) -> ChannelParams {
        ChannelParams::from_spread(spread, self.mu_b, self.sigma_b_frac)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub spreads: Vec<f64>,
    pub decoders: Vec<String>,
    pub llr_modes: Vec<String>,
    /// Codewords per cell, or the starting count when `max_trials` is set.
    pub trials: u64,
    /// Enables auto-escalation up to this many codewords.
    pub max_trials: Option<u64>,
    pub rel_half_width: f64,
    /// Weight files for the neural kinds, keyed by kind name.
    pub weights: std::collections::BTreeMap<String, PathBuf>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            spreads: vec![0.06, 0.07, 0.08, 0.09, 0.1],
            decoders: vec!["bf".into(), "ms".into(), "bp".into()],
            llr_modes: vec!["mismatched".into(), "genie".into()],
            trials: 10_000,
            max_trials: None,
            rel_half_width: 0.2,
            weights: Default::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub kind: String,
    pub samples_train: usize,
    pub samples_val: usize,
    pub batch: usize,
    /// Defaults to the per-kind rate when absent.
    pub lr: Option<f64>,
    pub epochs: usize,
    pub tau: f64,
    pub random_codewords: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            kind: "nbp".into(),
            samples_train: 5_000,
            samples_val: 10_000,
            batch: 120,
            lr: None,
            epochs: 20,
            tau: 1.0,
            random_codewords: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveSection {
    /// Weight files for levels 1 to 3; neutral weights when absent.
    pub nbf: Option<PathBuf>,
    pub noms: Option<PathBuf>,
    pub nbp: Option<PathBuf>,
    /// Raw-BER thresholds; derived from `breakpoints` when absent.
    pub thresholds: Option<(f64, f64)>,
    /// Spread breakpoints between levels.
    pub breakpoints: (f64, f64),
    pub n_ref: usize,
    pub llr_mode: String,
    /// Spreads to simulate, one scenario each.
    pub scenarios: Vec<f64>,
    pub reads: u64,
}

impl Default for AdaptiveSection {
    fn default() -> Self {
        AdaptiveSection {
            nbf: None,
            noms: None,
            nbp: None,
            thresholds: None,
            breakpoints: mram_ecc::adaptive::SPREAD_BREAKPOINTS,
            n_ref: mram_ecc::adaptive::DEFAULT_N_REF,
            llr_mode: "mismatched".into(),
            scenarios: vec![0.0445, 0.0685, 0.0745],
            reads: 1_000,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Config> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: Config =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Seed precedence: command line, then environment, then file, then 1.
    pub fn seed(&self, flag: Option<u64>) -> anyhow::Result<u64> {
        if let Some(s) = flag {
            return Ok(s);
        }
        if let Ok(v) = std::env::var(SEED_ENV) {
            return v
                .trim()
                .parse()
                .with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer"));
        }
        Ok(self.seed.unwrap_or(1))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn code(&self) -> anyhow::Result<Arc<LinearCode>> {
        let code = match &self.code.alist {
            Some(p) => {
                let p = self.resolve(p);
                load_alist(&p).with_context(|| format!("cannot load alist {}", p.display()))?
            }
            None => code_by_name(&self.code.name)?,
        };
        if self.code.iterations == 0 {
            bail!("code.iterations must be at least 1");
        }
        Ok(Arc::new(code))
    }
}

pub fn parse_kind(s: &str) -> anyhow::Result<DecoderKind> {
    Ok(s.parse()?)
}

pub fn parse_llr_mode(s: &str) -> anyhow::Result<LlrMode> {
    Ok(s.parse()?)
}
