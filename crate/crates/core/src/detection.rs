//! Closed-form energy-detector mathematics.
//!
//! The test statistic is the mean power of `N` samples. Under the Gaussian
//! approximation it is normal with mean `P` and variance `2 P^2 / N`, where
//! `P` is the noise power under H0 and signal plus noise power under H1.
//! Noise uncertainty `rho` widens the H0 power to `rho * sigma^2` and shrinks
//! the H1 noise power to `sigma^2 / rho`; below `rho - 1/rho` no sample count
//! separates the two.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{q_function, q_inverse};

/// Sample counts below this are flagged: the normal approximation of the
/// mean-power statistic is poor for short windows.
pub const GAUSSIAN_APPROX_MIN_SAMPLES: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionTargets {
    p_false_alarm: f64,
    p_detection: f64,
}

impl DetectionTargets {
    pub fn new(p_false_alarm: f64, p_detection: f64) -> Result<Self> {
        for (name, p) in [("p_false_alarm", p_false_alarm), ("p_detection", p_detection)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Domain(format!("{name} must lie in (0, 1), got {p}")));
            }
        }
        if p_detection < p_false_alarm {
            return Err(Error::Domain(format!(
                "p_detection ({p_detection}) below p_false_alarm ({p_false_alarm})"
            )));
        }
        Ok(Self {
            p_false_alarm,
            p_detection,
        })
    }

    pub fn p_false_alarm(&self) -> f64 {
        self.p_false_alarm
    }

    pub fn p_detection(&self) -> f64 {
        self.p_detection
    }

    fn inverse_pair(&self) -> (f64, f64) {
        // both arguments are validated to lie in (0, 1)
        (
            q_inverse(self.p_false_alarm).expect("validated"),
            q_inverse(self.p_detection).expect("validated"),
        )
    }
}

/// Noise uncertainty factor `rho >= 1`; `rho == 1` is stationary noise.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct NoiseUncertainty(f64);

impl NoiseUncertainty {
    pub fn new(rho: f64) -> Result<Self> {
        check_rho(rho)?;
        Ok(Self(rho))
    }

    pub fn rho(self) -> f64 {
        self.0
    }

    pub fn wall(self) -> f64 {
        self.0 - 1.0 / self.0
    }
}

/// Sample count from a closed form. `raw` is the real-valued expression,
/// `count` its ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleCount {
    pub raw: f64,
    pub count: u64,
    /// Both inverse-Q terms vanished (`P_FA = P_D = 0.5`).
    pub degenerate: bool,
    /// Fewer than [`GAUSSIAN_APPROX_MIN_SAMPLES`] samples.
    pub approximation_suspect: bool,
}

impl SampleCount {
    fn from_raw(raw: f64) -> Self {
        Self {
            raw,
            count: raw.ceil() as u64,
            degenerate: raw == 0.0,
            approximation_suspect: raw < GAUSSIAN_APPROX_MIN_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RobustSampleCount {
    Finite(SampleCount),
    /// The SNR is at or below the wall; no finite window reaches the targets.
    Undetectable,
}

impl RobustSampleCount {
    pub fn finite(&self) -> Option<SampleCount> {
        match self {
            RobustSampleCount::Finite(n) => Some(*n),
            RobustSampleCount::Undetectable => None,
        }
    }

    pub fn is_undetectable(&self) -> bool {
        matches!(self, RobustSampleCount::Undetectable)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectabilityVerdict {
    pub snr: f64,
    pub snr_wall: f64,
    pub detectable: bool,
    /// `to_db(snr) - to_db(snr_wall)`, present when both are positive.
    pub margin_db: Option<f64>,
}

fn check_rho(rho: f64) -> Result<()> {
    if rho >= 1.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("noise uncertainty rho must be >= 1, got {rho}")))
    }
}

fn check_variance(sigma_r2: f64) -> Result<()> {
    if sigma_r2 > 0.0 && sigma_r2.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("noise variance must be positive, got {sigma_r2}")))
    }
}

fn check_samples(n_samples: usize) -> Result<()> {
    if n_samples >= 1 {
        Ok(())
    } else {
        Err(Error::Domain("sample count must be at least 1".into()))
    }
}

fn check_signal_power(t_c: f64) -> Result<()> {
    if t_c >= 0.0 && t_c.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("signal power must be >= 0, got {t_c}")))
    }
}

/// Probability that the mean power of `n` samples with true power `power`
/// exceeds `gamma`, under the normal approximation.
fn exceedance(gamma: f64, power: f64, n_samples: usize) -> f64 {
    let spread = (2.0 / n_samples as f64).sqrt() * power;
    q_function((gamma - power) / spread)
}

pub fn p_false_alarm(gamma: f64, sigma_r2: f64, n_samples: usize) -> Result<f64> {
    check_variance(sigma_r2)?;
    check_samples(n_samples)?;
    Ok(exceedance(gamma, sigma_r2, n_samples))
}

pub fn p_detection(gamma: f64, t_c: f64, sigma_r2: f64, n_samples: usize) -> Result<f64> {
    check_variance(sigma_r2)?;
    check_signal_power(t_c)?;
    check_samples(n_samples)?;
    Ok(exceedance(gamma, t_c + sigma_r2, n_samples))
}

/// Worst-case false-alarm probability: the noise power sits at `rho * sigma_r2`.
pub fn p_false_alarm_robust(gamma: f64, sigma_r2: f64, n_samples: usize, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    p_false_alarm(gamma, rho * sigma_r2, n_samples)
}

/// Worst-case detection probability: the noise power sits at `sigma_r2 / rho`.
pub fn p_detection_robust(
    gamma: f64,
    t_c: f64,
    sigma_r2: f64,
    n_samples: usize,
    rho: f64,
) -> Result<f64> {
    check_rho(rho)?;
    p_detection(gamma, t_c, sigma_r2 / rho, n_samples)
}

/// Threshold giving false-alarm probability `p_fa` for noise power `sigma_r2`.
pub fn threshold_for_false_alarm(p_fa: f64, sigma_r2: f64, n_samples: usize) -> Result<f64> {
    check_variance(sigma_r2)?;
    check_samples(n_samples)?;
    let a = q_inverse(p_fa)?;
    Ok(sigma_r2 * (1.0 + a * (2.0 / n_samples as f64).sqrt()))
}

/// Threshold giving worst-case false-alarm probability `p_fa` under
/// uncertainty `rho` around nominal power `sigma_r2`.
pub fn threshold_for_false_alarm_robust(
    p_fa: f64,
    sigma_r2: f64,
    n_samples: usize,
    rho: f64,
) -> Result<f64> {
    check_rho(rho)?;
    threshold_for_false_alarm(p_fa, rho * sigma_r2, n_samples)
}

fn check_snr(snr: f64) -> Result<()> {
    if snr > 0.0 && snr.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("SNR must be positive, got {snr}")))
    }
}

/// Window length reaching `targets` with known noise power:
/// `2 [Qinv(P_FA) - Qinv(P_D)(1 + SNR)]^2 / SNR^2`.
pub fn required_samples_stationary(targets: &DetectionTargets, snr: f64) -> Result<SampleCount> {
    check_snr(snr)?;
    let (a, b) = targets.inverse_pair();
    let numerator = a - b * (1.0 + snr);
    Ok(SampleCount::from_raw(2.0 * numerator * numerator / (snr * snr)))
}

/// Low-SNR window length under noise uncertainty:
/// `2 [Qinv(P_FA) - Qinv(P_D)]^2 / [SNR - (rho - 1/rho)]^2`.
///
/// Returns [`RobustSampleCount::Undetectable`] at or below the wall.
pub fn required_samples_robust(
    targets: &DetectionTargets,
    snr: f64,
    rho: f64,
) -> Result<RobustSampleCount> {
    check_snr(snr)?;
    let wall = snr_wall(rho)?;
    if snr <= wall {
        return Ok(RobustSampleCount::Undetectable);
    }
    let (a, b) = targets.inverse_pair();
    let margin = snr - wall;
    Ok(RobustSampleCount::Finite(SampleCount::from_raw(
        2.0 * (a - b) * (a - b) / (margin * margin),
    )))
}

/// Window length under noise uncertainty without the low-SNR simplification.
///
/// Eliminating the threshold from the worst-case false-alarm and detection
/// probabilities gives
/// `2 [rho Qinv(P_FA) - Qinv(P_D)(SNR + 1/rho)]^2 / [SNR - (rho - 1/rho)]^2`,
/// which equals the stationary count at `rho = 1` and the low-SNR robust
/// count as `SNR -> 0, rho -> 1`.
pub fn required_samples_robust_exact(
    targets: &DetectionTargets,
    snr: f64,
    rho: f64,
) -> Result<RobustSampleCount> {
    check_snr(snr)?;
    let wall = snr_wall(rho)?;
    if snr <= wall {
        return Ok(RobustSampleCount::Undetectable);
    }
    let (a, b) = targets.inverse_pair();
    let numerator = a * rho - b * (snr + 1.0 / rho);
    let margin = snr - wall;
    Ok(RobustSampleCount::Finite(SampleCount::from_raw(
        2.0 * numerator * numerator / (margin * margin),
    )))
}

/// The SNR-wall `rho - 1/rho` (linear).
pub fn snr_wall(rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(rho - 1.0 / rho)
}

/// Linear SNR `t_c / sigma_r2`.
pub fn snr(t_c: f64, sigma_r2: f64) -> Result<f64> {
    check_signal_power(t_c)?;
    check_variance(sigma_r2)?;
    Ok(t_c / sigma_r2)
}

/// Detectable iff `snr > snr_wall`; equality is not detectable.
pub fn decide_detectable(snr: f64, snr_wall: f64) -> DetectabilityVerdict {
    let margin_db = if snr > 0.0 && snr_wall > 0.0 {
        Some(10.0 * snr.log10() - 10.0 * snr_wall.log10())
    } else {
        None
    };
    DetectabilityVerdict {
        snr,
        snr_wall,
        detectable: snr > snr_wall,
        margin_db,
    }
}

pub fn to_db(x: f64) -> Result<f64> {
    if x > 0.0 {
        Ok(10.0 * x.log10())
    } else {
        Err(Error::Domain(format!("cannot express {x} in dB")))
    }
}

/// Like [`to_db`] but maps zero to negative infinity. Used for result rows
/// where a zero wall or zero SNR is a legitimate value.
pub fn to_db_lossy(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
