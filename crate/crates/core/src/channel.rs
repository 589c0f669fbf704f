//! STT-MRAM read channel with an unknown resistance offset on the high state.
//!
//! A cell storing 0 reads `mu0 + n`, `n ~ N(0, sigma0²)`; a cell storing 1
//! reads `mu1 + n + b`, `n ~ N(0, sigma1²)`, `b ~ N(mu_b, sigma_b²)`. All
//! resistances are in kΩ.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub mu0: f64,
    pub mu1: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub mu_b: f64,
    pub sigma_b: f64,
}

impl ChannelParams {
    /// Nominal low/high resistances of 1 kΩ and 2 kΩ.
    pub const MU0: f64 = 1.0;
    pub const MU1: f64 = 2.0;

    /// Channel with normalized spread `sigma0/mu0 = sigma1/mu1 = spread` around
    /// the nominal resistances, offset mean `mu_b` (kΩ) and offset spread
    /// `sigma_b = sigma_b_frac * mu1`.
    pub fn from_spread(spread: f64, mu_b: f64, sigma_b_frac: f64) -> Self {
        ChannelParams {
            mu0: Self::MU0,
            mu1: Self::MU1,
            sigma0: spread * Self::MU0,
            sigma1: spread * Self::MU1,
            mu_b,
            sigma_b: sigma_b_frac * Self::MU1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.mu0,
            self.mu1,
            self.sigma0,
            self.sigma1,
            self.mu_b,
            self.sigma_b,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::param("channel parameters must be finite"));
        }
        if self.mu0 >= self.mu1 {
            return Err(Error::param("channel requires mu0 < mu1"));
        }
        if self.sigma0 <= 0.0 || self.sigma1 <= 0.0 {
            return Err(Error::param(
                "channel spreads sigma0, sigma1 must be positive",
            ));
        }
        if self.sigma_b < 0.0 {
            return Err(Error::param("offset spread sigma_b must be non-negative"));
        }
        Ok(())
    }

    /// The same channel with the offset removed.
    pub fn nominal(&self) -> Self {
        ChannelParams {
            mu_b: 0.0,
            sigma_b: 0.0,
            ..*self
        }
    }

    pub fn is_nominal(&self) -> bool {
        self.mu_b == 0.0 && self.sigma_b == 0.0
    }

    /// Mean and standard deviation of the 1-state read with the offset folded in.
    pub fn one_state(&self) -> (f64, f64) {
        (
            self.mu1 + self.mu_b,
            (self.sigma1 * self.sigma1 + self.sigma_b * self.sigma_b).sqrt(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadBlock {
    pub y: Vec<f64>,
    pub truth: Option<Vec<u8>>,
}

/// Independent RNG stream `stream` under root seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn sample_read(p: &ChannelParams, bits: &[u8], seed: u64) -> Result<ReadBlock> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = vec![0.0; bits.len()];
    sample_into(p, bits, &mut rng, &mut y);
    Ok(ReadBlock {
        y,
        truth: Some(bits.to_vec()),
    })
}

/// Draws read resistances for `bits` into `out`. Parameters are assumed valid.
pub fn sample_into<R: rand::Rng + ?Sized>(
    p: &ChannelParams,
    bits: &[u8],
    rng: &mut R,
    out: &mut [f64],
) {
    for (y, &b) in out.iter_mut().zip(bits) {
        let z: f64 = StandardNormal.sample(rng);
        *y = if b == 0 {
            p.mu0 + p.sigma0 * z
        } else {
            let zb: f64 = StandardNormal.sample(rng);
            p.mu1 + p.sigma1 * z + p.mu_b + p.sigma_b * zb
        };
    }
}

fn log_normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Per-cell LLR `ln p(y|0) − ln p(y|1)` under the assumed parameters.
/// Passing true parameters gives the genie LLR; passing `nominal()` gives the
/// offset-blind LLR.
pub fn llr(assumed: &ChannelParams, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    llr_into(assumed, y, &mut out);
    out
}

pub fn llr_into(assumed: &ChannelParams, y: &[f64], out: &mut [f64]) {
    let (m1, s1) = assumed.one_state();
    for (l, &yi) in out.iter_mut().zip(y) {
        *l = log_normal_pdf(yi, assumed.mu0, assumed.sigma0) - log_normal_pdf(yi, m1, s1);
    }
}

/// Density-equality point of the two offset-free Gaussians inside
/// `(mu0, mu1)`. Offset fields of `p` are ignored: the sensing threshold is
/// calibrated for the nominal channel and kept fixed.
pub fn nominal_threshold(p: &ChannelParams) -> Result<f64> {
    p.validate()?;
    equal_density_point(p.mu0, p.sigma0, p.mu1, p.sigma1)
}

pub(crate) fn equal_density_point(m0: f64, s0: f64, m1: f64, s1: f64) -> Result<f64> {
    // ln s0 + (x−m0)²/(2 s0²) = ln s1 + (x−m1)²/(2 s1²)
    let a = 0.5 / (s0 * s0) - 0.5 / (s1 * s1);
    let b = m1 / (s1 * s1) - m0 / (s0 * s0);
    let c = 0.5 * m0 * m0 / (s0 * s0) - 0.5 * m1 * m1 / (s1 * s1) + (s0 / s1).ln();
    let inside = |x: f64| x > m0 && x < m1;

    let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    if a.abs() <= 1e-14 * scale {
        let x = -c / b;
        return if inside(x) {
            Ok(x)
        } else {
            Err(Error::Internal(format!(
                "threshold {x} outside ({m0}, {m1})"
            )))
        };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(Error::Internal("densities never cross".to_string()));
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let roots = [q / a, c / q];
    roots
        .into_iter()
        .filter(|x| x.is_finite() && inside(*x))
        .min_by(|x, y| {
            let mid = 0.5 * (m0 + m1);
            (x - mid).abs().total_cmp(&(y - mid).abs())
        })
        .ok_or_else(|| Error::Internal(format!("no density crossing in ({m0}, {m1})")))
}

/// Fixed-threshold detector: `y ≤ x_th` reads as 0.
pub fn hard_detect(x_th: f64, y: &[f64]) -> Vec<u8> {
    y.iter().map(|&v| u8::from(v > x_th)).collect()
}

pub fn hard_detect_into(x_th: f64, y: &[f64], out: &mut [u8]) {
    for (o, &v) in out.iter_mut().zip(y) {
        *o = u8::from(v > x_th);
    }
}

/// Gaussian tail probability `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Closed-form raw BER of the fixed-threshold detector with equiprobable bits.
pub fn analytic_raw_ber(p: &ChannelParams, x_th: f64) -> f64 {
    let (m1, s1) = p.one_state();
    0.5 * q_function((x_th - p.mu0) / p.sigma0) + 0.5 * q_function((m1 - x_th) / s1)
}

/// Raw BER measured on `n_ref` reference cells holding alternating 0/1.
pub fn estimate_raw_ber(p: &ChannelParams, x_th: f64, n_ref: usize, seed: u64) -> Result<f64> {
    if n_ref == 0 {
        return Err(Error::param("n_ref must be at least 1"));
    }
    p.validate()?;
    let bits: Vec<u8> = (0..n_ref).map(|i| (i % 2) as u8).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = vec![0.0; n_ref];
    sample_into(p, &bits, &mut rng, &mut y);
    let errors = y
        .iter()
        .zip(&bits)
        .filter(|(&v, &b)| u8::from(v > x_th) != b)
        .count();
    Ok(errors as f64 / n_ref as f64)
}
