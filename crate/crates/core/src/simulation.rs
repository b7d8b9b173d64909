//! Synthetic signals and Monte Carlo runs of the energy detector.
//!
//! Randomness comes from ChaCha8 keyed by `seed`. Every Monte Carlo trial
//! draws from its own ChaCha stream, selected by trial index and hypothesis,
//! so serial and parallel runs produce identical numbers.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{
    p_detection, p_false_alarm, required_samples_stationary, threshold_for_false_alarm,
    DetectionTargets,
};
use crate::error::{Error, Result};
use crate::estimation::EvokedPotential;
use crate::filters::{design_butterworth_bandpass, Recording};
use crate::pipeline::{Dataset, P300Reference};

/// ChaCha8 generator for `(seed, stream)`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub variance: f64,
}

/// Segment-wise variances tiling `[0, len)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceProfile {
    segments: Vec<Segment>,
}

impl VarianceProfile {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let mut next = 0;
        for s in &segments {
            if s.start != next || s.end <= s.start {
                return Err(Error::InvalidInput(format!(
                    "segments must tile contiguously from 0; got {}..{} after {next}",
                    s.start, s.end
                )));
            }
            if !(s.variance >= 0.0 && s.variance.is_finite()) {
                return Err(Error::Domain(format!("negative or non-finite variance {}", s.variance)));
            }
            next = s.end;
        }
        if segments.is_empty() {
            return Err(Error::InvalidInput("empty variance profile".into()));
        }
        Ok(Self { segments })
    }

    pub fn uniform(variance: f64, len: usize) -> Result<Self> {
        Self::new(vec![Segment { start: 0, end: len, variance }])
    }

    /// Consecutive segments with the given `(length, variance)` pairs.
    pub fn from_lengths(parts: &[(usize, f64)]) -> Result<Self> {
        let mut start = 0;
        let segments = parts
            .iter()
            .map(|&(len, variance)| {
                let s = Segment { start, end: start + len, variance };
                start += len;
                s
            })
            .collect();
        Self::new(segments)
    }

    pub fn len(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn variance_at(&self, i: usize) -> Option<f64> {
        self.segments
            .iter()
            .find(|s| s.start <= i && i < s.end)
            .map(|s| s.variance)
    }
}

/// Independent zero-mean Gaussian samples with segment-wise variance.
pub fn generate_piecewise_gaussian(profile: &VarianceProfile, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    if profile.len() != n_samples {
        return Err(Error::InvalidInput(format!(
            "profile covers {} samples, requested {n_samples}",
            profile.len()
        )));
    }
    let mut rng = rng_for(seed, 0);
    let mut out = Vec::with_capacity(n_samples);
    for s in profile.segments() {
        let sd = s.variance.sqrt();
        for _ in s.start..s.end {
            let z: f64 = StandardNormal.sample(&mut rng);
            out.push(sd * z);
        }
    }
    Ok(out)
}

/// Raised-cosine pulse of `width` samples (rounded up to even) peaking at
/// `amplitude` in the middle.
pub fn raised_cosine_pulse(amplitude: f64, width: usize) -> Vec<f64> {
    let w = (width.max(2) + 1) & !1;
    (0..=w)
        .map(|k| amplitude * 0.5 * (1.0 - (2.0 * PI * k as f64 / w as f64).cos()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConsciousSignal {
    Sinusoid { freq_hz: f64, amplitude: f64 },
    /// Raised-cosine pulse whose peak sits `latency_ms` after the onset.
    P300Template { amplitude: f64, latency_ms: f64, width_ms: f64 },
}

impl ConsciousSignal {
    pub fn p300(amplitude: f64) -> Self {
        ConsciousSignal::P300Template {
            amplitude,
            latency_ms: 300.0,
            width_ms: 200.0,
        }
    }

    /// Signal power: mean power for a sinusoid, peak power for a pulse.
    pub fn power(&self) -> f64 {
        match *self {
            ConsciousSignal::Sinusoid { amplitude, .. } => amplitude * amplitude / 2.0,
            ConsciousSignal::P300Template { amplitude, .. } => amplitude * amplitude,
        }
    }

    /// Samples of the signal starting at its onset, `length` long for a
    /// sinusoid and pulse-long for a template.
    fn render(&self, length: usize, sample_rate_hz: f64) -> Result<Vec<f64>> {
        match *self {
            ConsciousSignal::Sinusoid { freq_hz, amplitude } => Ok((0..length)
                .map(|i| amplitude * (2.0 * PI * freq_hz * i as f64 / sample_rate_hz).sin())
                .collect()),
            ConsciousSignal::P300Template { amplitude, latency_ms, width_ms } => {
                let width = (width_ms * sample_rate_hz / 1000.0).round() as usize;
                let pulse = raised_cosine_pulse(amplitude, width);
                let peak = (latency_ms * sample_rate_hz / 1000.0).round() as usize;
                let half = pulse.len() / 2;
                if peak < half {
                    return Err(Error::InvalidInput(format!(
                        "latency {latency_ms} ms is shorter than half the pulse width"
                    )));
                }
                let mut out = vec![0.0; peak - half];
                out.extend(pulse);
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub onset: usize,
    /// Sinusoid duration in samples; ignored by templates.
    pub length: usize,
}

/// `composed = artefact + background + conscious`, all in µV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticComposition {
    pub conscious: Vec<f64>,
    pub background: Vec<f64>,
    pub artefact: Vec<f64>,
    pub composed: Vec<f64>,
    pub profile: Option<VarianceProfile>,
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl SyntheticComposition {
    pub fn new(
        background: Vec<f64>,
        artefact: Vec<f64>,
        profile: Option<VarianceProfile>,
        sample_rate_hz: f64,
        seed: u64,
    ) -> Result<Self> {
        if background.len() != artefact.len() {
            return Err(Error::InvalidInput(format!(
                "background has {} samples, artefact {}",
                background.len(),
                artefact.len()
            )));
        }
        if let Some(p) = &profile {
            if p.len() != background.len() {
                return Err(Error::InvalidInput("variance profile length differs from signal".into()));
            }
        }
        let composed = background.iter().zip(&artefact).map(|(b, a)| a + b).collect();
        Ok(Self {
            conscious: vec![0.0; background.len()],
            background,
            artefact,
            composed,
            profile,
            sample_rate_hz,
            seed,
        })
    }

    /// Noise `r = a + b`.
    pub fn noise(&self) -> Vec<f64> {
        self.background.iter().zip(&self.artefact).map(|(b, a)| a + b).collect()
    }

    pub fn len(&self) -> usize {
        self.composed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.composed.is_empty()
    }
}

/// Adds a conscious component to a composition.
pub fn embed_conscious_signal(
    mut composition: SyntheticComposition,
    signal: ConsciousSignal,
    placement: Placement,
) -> Result<SyntheticComposition> {
    let rendered = signal.render(placement.length, composition.sample_rate_hz)?;
    let end = placement.onset + rendered.len();
    if end > composition.len() {
        return Err(Error::InvalidInput(format!(
            "signal spans samples {}..{end}, composition has {}",
            placement.onset,
            composition.len()
        )));
    }
    for (i, v) in rendered.into_iter().enumerate() {
        composition.conscious[placement.onset + i] += v;
    }
    composition.composed = composition
        .noise()
        .iter()
        .zip(&composition.conscious)
        .map(|(r, c)| r + c)
        .collect();
    Ok(composition)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HypothesisCase {
    /// Noise only.
    H0,
    /// Noise plus a zero-mean Gaussian conscious component of power
    /// `signal_power`.
    H1 { signal_power: f64 },
}

impl HypothesisCase {
    fn stream_tag(&self) -> u64 {
        match self {
            HypothesisCase::H0 => 0,
            HypothesisCase::H1 { .. } => 1 << 62,
        }
    }

    fn signal_power(&self) -> f64 {
        match *self {
            HypothesisCase::H0 => 0.0,
            HypothesisCase::H1 { signal_power } => signal_power,
        }
    }
}

/// Mean-power statistic of `trials` independent windows of `window_n`
/// samples, the noise having power `noise_power`.
pub fn simulate_statistics(
    case: HypothesisCase,
    window_n: usize,
    trials: usize,
    noise_power: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if window_n == 0 || trials == 0 {
        return Err(Error::InvalidInput("window length and trial count must be positive".into()));
    }
    if !(noise_power >= 0.0) {
        return Err(Error::Domain(format!("noise power must be >= 0, got {noise_power}")));
    }
    let signal_power = case.signal_power();
    if !(signal_power >= 0.0) {
        return Err(Error::Domain(format!("signal power must be >= 0, got {signal_power}")));
    }
    // c and r are independent zero-mean Gaussians, so c + r is drawn as one
    // Gaussian with the summed variance.
    let sd = (noise_power + signal_power).sqrt();
    let tag = case.stream_tag();
    Ok((0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng_for(seed, tag | trial);
            let mut sum = 0.0;
            for _ in 0..window_n {
                let z: f64 = StandardNormal.sample(&mut rng);
                let d = sd * z;
                sum += d * d;
            }
            sum / window_n as f64
        })
        .collect())
}

/// Fraction of statistics strictly above `gamma`.
pub fn exceedance_rate(statistics: &[f64], gamma: f64) -> f64 {
    statistics.iter().filter(|&&t| t > gamma).count() as f64 / statistics.len() as f64
}

fn binomial_stderr(rate: f64, trials: usize) -> f64 {
    (rate * (1.0 - rate) / trials as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRate {
    pub case: HypothesisCase,
    pub trials: usize,
    pub gamma: f64,
    pub window_n: usize,
    pub rate: f64,
    pub std_error: f64,
}

/// Empirical probability that the detector fires under `case`.
pub fn simulate_detector(
    case: HypothesisCase,
    gamma: f64,
    window_n: usize,
    trials: usize,
    sigma2: f64,
    seed: u64,
) -> Result<EmpiricalRate> {
    let stats = simulate_statistics(case, window_n, trials, sigma2, seed)?;
    let rate = exceedance_rate(&stats, gamma);
    Ok(EmpiricalRate {
        case,
        trials,
        gamma,
        window_n,
        rate,
        std_error: binomial_stderr(rate, trials),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRates {
    pub trials: usize,
    pub gamma: f64,
    pub window_n: usize,
    pub false_alarm_rate: f64,
    pub detection_rate: f64,
    pub false_alarm_stderr: f64,
    pub detection_stderr: f64,
}

/// False-alarm and detection rates at one threshold. Noise power may differ
/// between the hypotheses (worst-case pairs use `rho * sigma^2` under H0 and
/// `sigma^2 / rho` under H1).
pub fn simulate_operating_point(
    gamma: f64,
    window_n: usize,
    trials: usize,
    noise_power_h0: f64,
    noise_power_h1: f64,
    signal_power: f64,
    seed: u64,
) -> Result<EmpiricalRates> {
    let h0 = simulate_detector(HypothesisCase::H0, gamma, window_n, trials, noise_power_h0, seed)?;
    let h1 = simulate_detector(
        HypothesisCase::H1 { signal_power },
        gamma,
        window_n,
        trials,
        noise_power_h1,
        seed,
    )?;
    Ok(EmpiricalRates {
        trials,
        gamma,
        window_n,
        false_alarm_rate: h0.rate,
        detection_rate: h1.rate,
        false_alarm_stderr: h0.std_error,
        detection_stderr: h1.std_error,
    })
}

/// Means of the statistic under the worst-case hypothesis pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub snr: f64,
    pub rho: f64,
    pub snr_wall: f64,
    pub window_n: usize,
    /// `rho * sigma^2`
    pub h0_mean: f64,
    /// `T(c) + sigma^2 / rho`
    pub h1_mean: f64,
    pub h0_std: f64,
    pub h1_std: f64,
    /// Whether the worst-case H1 mean exceeds the worst-case H0 mean. When it
    /// does not, no window length can separate the hypotheses.
    pub separable: bool,
}

pub fn worst_case_separation(snr: f64, rho: f64, sigma2_nominal: f64, window_n: usize) -> Result<SeparationReport> {
    let wall = crate::detection::snr_wall(rho)?;
    if !(sigma2_nominal > 0.0) || !(snr >= 0.0) || window_n == 0 {
        return Err(Error::Domain("separation needs snr >= 0, sigma2 > 0, N >= 1".into()));
    }
    let h0_mean = rho * sigma2_nominal;
    let h1_mean = snr * sigma2_nominal + sigma2_nominal / rho;
    let spread = (2.0 / window_n as f64).sqrt();
    Ok(SeparationReport {
        snr,
        rho,
        snr_wall: wall,
        window_n,
        h0_mean,
        h1_mean,
        h0_std: spread * h0_mean,
        h1_std: spread * h1_mean,
        separable: h1_mean > h0_mean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub gamma: f64,
    pub false_alarm_rate: f64,
    pub detection_rate: f64,
}

/// `points` thresholds spaced evenly across the pooled range of both
/// statistic samples.
pub fn gamma_sweep(h0: &[f64], h1: &[f64], points: usize) -> Vec<f64> {
    let (lo, hi) = h0
        .iter()
        .chain(h1)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if points < 2 || !(hi > lo) {
        return vec![lo; points.max(1)];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

pub fn empirical_roc(h0: &[f64], h1: &[f64], gammas: &[f64]) -> Vec<RocPoint> {
    gammas
        .iter()
        .map(|&gamma| RocPoint {
            gamma,
            false_alarm_rate: exceedance_rate(h0, gamma),
            detection_rate: exceedance_rate(h1, gamma),
        })
        .collect()
}

/// First operating point meeting both targets, if any.
pub fn meeting_point(roc: &[RocPoint], targets: &DetectionTargets) -> Option<RocPoint> {
    roc.iter()
        .find(|p| p.false_alarm_rate <= targets.p_false_alarm() && p.detection_rate >= targets.p_detection())
        .copied()
}

/// One analytic-versus-empirical comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub label: String,
    pub window_n: usize,
    pub sigma2: f64,
    pub gamma: f64,
    pub analytic: f64,
    pub empirical: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks the false-alarm and detection formulas against simulation over a
/// small grid, plus the stationary sample count at `P_FA = 0.1`,
/// `P_D = 0.9`, 0 dB.
pub fn validation_suite(trials: usize, seed: u64) -> Result<Vec<ValidationRow>> {
    const TOLERANCE: f64 = 0.02;
    let mut rows = Vec::new();
    let mut push = |label: String, window_n, sigma2, gamma, analytic: f64, empirical: f64| {
        rows.push(ValidationRow {
            label,
            window_n,
            sigma2,
            gamma,
            analytic,
            empirical,
            tolerance: TOLERANCE,
            pass: (analytic - empirical).abs() <= TOLERANCE,
        });
    };
    // the Gaussian model of the statistic is within 0.01 of the chi-square
    // law on this grid
    let mut cell = 0u64;
    for &n in &[128usize, 512] {
        for &sigma2 in &[1.0, 4.0] {
            let gamma = threshold_for_false_alarm(0.1, sigma2, n)?;
            let t_c = 0.25 * sigma2;
            cell += 1;
            let rates = simulate_operating_point(gamma, n, trials, sigma2, sigma2, t_c, seed.wrapping_add(cell))?;
            push("p_fa".into(), n, sigma2, gamma, p_false_alarm(gamma, sigma2, n)?, rates.false_alarm_rate);
            push("p_d".into(), n, sigma2, gamma, p_detection(gamma, t_c, sigma2, n)?, rates.detection_rate);
        }
    }
    let targets = DetectionTargets::new(0.1, 0.9)?;
    let n = required_samples_stationary(&targets, 1.0)?.count as usize;
    let gamma = threshold_for_false_alarm(0.1, 1.0, n)?;
    let rates = simulate_operating_point(gamma, n, trials, 1.0, 1.0, 1.0, seed)?;
    push("n_stationary_p_fa".into(), n, 1.0, gamma, p_false_alarm(gamma, 1.0, n)?, rates.false_alarm_rate);
    push("n_stationary_p_d".into(), n, 1.0, gamma, p_detection(gamma, 1.0, 1.0, n)?, rates.detection_rate);
    Ok(rows)
}

/// Parameters of a synthetic cohort: stationary background with an alpha
/// rhythm, plus muscle-artefact bursts confined to a high band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub subjects: usize,
    pub tasks: Vec<String>,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    /// White background variance (µV²).
    pub background_variance: f64,
    /// Amplitude of the ongoing 10 Hz rhythm (µV).
    pub alpha_amplitude: f64,
    /// Artefact band (Hz).
    pub artefact_band: (f64, f64),
    /// Variance of the band-limited artefact during a burst (µV²).
    pub artefact_variance: f64,
    /// Burst on/off period (s); bursts occupy the second half of each period.
    pub burst_period_s: f64,
    /// Amplitude of the 10 Hz evoked burst in the reference (µV).
    pub reference_amplitude: f64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            subjects: 6,
            tasks: vec!["word_search".into(), "reading".into()],
            sample_rate_hz: 250.0,
            duration_s: 40.0,
            background_variance: 1.0,
            alpha_amplitude: 4.0,
            artefact_band: (30.0, 60.0),
            artefact_variance: 400.0,
            burst_period_s: 8.0,
            reference_amplitude: 6.0,
        }
    }
}

/// Builds a dataset from `spec`. Subject `k` uses seed `seed + k`.
///
/// The reference is a 10 Hz evoked burst, so it passes every scenario while
/// the artefact bursts are removed only by the bandpass scenarios.
pub fn synthetic_cohort(spec: &CohortSpec, seed: u64) -> Result<Dataset> {
    let fs = spec.sample_rate_hz;
    let n = (spec.duration_s * fs).round() as usize;
    let period = (spec.burst_period_s * fs).round() as usize;
    if period < 2 || n < period {
        return Err(Error::Config("cohort burst period must fit in the recording".into()));
    }
    let artefact_filter = design_butterworth_bandpass(spec.artefact_band.0, spec.artefact_band.1, fs)?;
    // unit-variance white noise through the band filter keeps roughly this
    // fraction of its power
    let band_gain = {
        let lo = spec.artefact_band.0 / fs;
        let hi = spec.artefact_band.1 / fs;
        2.0 * (hi - lo)
    };

    let mut recordings = Vec::new();
    let mut references = BTreeMap::new();
    for k in 0..spec.subjects {
        let subject = format!("s{:02}", k + 1);
        let subject_seed = seed.wrapping_add(k as u64);
        for (t, task) in spec.tasks.iter().enumerate() {
            let task_seed = subject_seed.wrapping_mul(1_000_003).wrapping_add(t as u64);
            let background = generate_piecewise_gaussian(
                &VarianceProfile::uniform(spec.background_variance, n)?,
                n,
                task_seed,
            )?;
            let phase = (task_seed % 628) as f64 / 100.0;
            let alpha: Vec<f64> = (0..n)
                .map(|i| spec.alpha_amplitude * (2.0 * PI * 10.0 * i as f64 / fs + phase).sin())
                .collect();
            let raw_artefact = generate_piecewise_gaussian(
                &VarianceProfile::uniform(spec.artefact_variance / band_gain, n)?,
                n,
                task_seed ^ 0xA5A5_A5A5,
            )?;
            let band_limited = artefact_filter.filter(&raw_artefact);
            let artefact: Vec<f64> = band_limited
                .iter()
                .enumerate()
                .map(|(i, v)| if i % period >= period / 2 { *v } else { 0.0 })
                .collect();
            let samples: Vec<f64> = background
                .iter()
                .zip(&alpha)
                .zip(&artefact)
                .map(|((b, a), e)| b + a + e)
                .collect();
            recordings.push(Recording::new(samples, fs)?.with_labels(&subject, task, "Cz"));
        }

        let pre = (0.2 * fs).round() as usize;
        let epoch = (1.0 * fs).round() as usize;
        let burst_onset = pre + (0.1 * fs).round() as usize;
        let burst_len = (0.5 * fs).round() as usize;
        let mut waveform = vec![0.0; epoch];
        for i in 0..burst_len {
            let taper = (PI * i as f64 / burst_len as f64).sin();
            waveform[burst_onset + i] =
                spec.reference_amplitude * taper * (2.0 * PI * 10.0 * i as f64 / fs).sin();
        }
        references.insert(
            subject,
            P300Reference::Evoked(EvokedPotential::from_waveform(waveform, fs, pre)?),
        );
    }
    Ok(Dataset {
        recordings,
        references,
        exclusions: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{mean_power, noise_profile, peak_signal_power, PeakWindow};
    use approx::assert_relative_eq;

    #[test]
    fn profile_validation() {
        assert!(VarianceProfile::new(vec![]).is_err());
        assert!(VarianceProfile::new(vec![Segment { start: 1, end: 4, variance: 1.0 }]).is_err());
        assert!(VarianceProfile::from_lengths(&[(3, 1.0), (2, -1.0)]).is_err());
        let p = VarianceProfile::from_lengths(&[(3, 1.0), (2, 4.0)]).unwrap();
        assert_eq!(p.len(), 5);
        assert_eq!(p.variance_at(3), Some(4.0));
        assert_eq!(p.variance_at(5), None);
        assert!(generate_piecewise_gaussian(&p, 6, 1).is_err());
    }

    #[test]
    fn zero_variance_gives_zero_signal() {
        let p = VarianceProfile::uniform(0.0, 1000).unwrap();
        assert!(generate_piecewise_gaussian(&p, 1000, 3).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_variance_law_of_large_numbers() {
        let n = 1_000_000;
        let x = generate_piecewise_gaussian(&VarianceProfile::uniform(1.0, n).unwrap(), n, 11).unwrap();
        let mean = x.iter().sum::<f64>() / n as f64;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() < 0.01, "variance {var}");
    }

    #[test]
    fn two_segments_recover_rho() {
        let n = 200_000;
        let p = VarianceProfile::from_lengths(&[(n / 2, 1.0), (n / 2, 4.0)]).unwrap();
        let x = generate_piecewise_gaussian(&p, n, 5).unwrap();
        // long windows keep the sampling spread of each window small
        let profile = noise_profile(&x, 20_000).unwrap();
        assert!((profile.rho - 2.0).abs() < 0.1, "rho {}", profile.rho);
    }

    #[test]
    fn seeds_reproduce() {
        let p = VarianceProfile::uniform(2.0, 100).unwrap();
        assert_eq!(
            generate_piecewise_gaussian(&p, 100, 9).unwrap(),
            generate_piecewise_gaussian(&p, 100, 9).unwrap()
        );
        assert_ne!(
            generate_piecewise_gaussian(&p, 100, 9).unwrap(),
            generate_piecewise_gaussian(&p, 100, 10).unwrap()
        );
    }

    fn quiet(n: usize) -> SyntheticComposition {
        SyntheticComposition::new(vec![0.5; n], vec![0.25; n], None, 250.0, 0).unwrap()
    }

    #[test]
    fn embedding_examples() {
        let base = quiet(500);
        let same = embed_conscious_signal(
            base.clone(),
            ConsciousSignal::Sinusoid { freq_hz: 10.0, amplitude: 0.0 },
            Placement { onset: 0, length: 500 },
        )
        .unwrap();
        assert_eq!(same.composed, base.composed);

        let s = ConsciousSignal::Sinusoid { freq_hz: 10.0, amplitude: 2f64.sqrt() };
        assert_relative_eq!(s.power(), 1.0, max_relative = 1e-15);
        let c = embed_conscious_signal(
            SyntheticComposition::new(vec![0.0; 500], vec![0.0; 500], None, 250.0, 0).unwrap(),
            s,
            Placement { onset: 0, length: 500 },
        )
        .unwrap();
        assert_relative_eq!(mean_power(&c.conscious).unwrap(), 1.0, max_relative = 1e-9);
        for i in 0..500 {
            assert_eq!(c.composed[i], c.background[i] + c.artefact[i] + c.conscious[i]);
        }

        assert!(embed_conscious_signal(base, s, Placement { onset: 400, length: 200 }).is_err());
    }

    #[test]
    fn template_peak_power_on_noiseless_composition() {
        let fs = 250.0;
        let pre = 50;
        let comp = SyntheticComposition::new(vec![0.0; 250], vec![0.0; 250], None, fs, 0).unwrap();
        let c = embed_conscious_signal(comp, ConsciousSignal::p300(5.0), Placement { onset: pre, length: 0 })
            .unwrap();
        let ep = EvokedPotential::from_waveform(c.composed, fs, pre).unwrap();
        let est = peak_signal_power(&ep, &PeakWindow::default(), 0.4).unwrap();
        assert_relative_eq!(est.t_time, 25.0, max_relative = 1e-12);
        assert_eq!(ConsciousSignal::p300(5.0).power(), 25.0);
    }

    #[test]
    fn extreme_thresholds() {
        let r = simulate_operating_point(0.0, 16, 500, 1.0, 1.0, 1.0, 3).unwrap();
        assert_eq!((r.false_alarm_rate, r.detection_rate), (1.0, 1.0));
        let r = simulate_operating_point(1e6, 16, 500, 1.0, 1.0, 1.0, 3).unwrap();
        assert_eq!((r.false_alarm_rate, r.detection_rate), (0.0, 0.0));
    }

    #[test]
    fn false_alarm_matches_formula() {
        // at N = 1000 the chi-square tail sits 0.0016 above the Gaussian one
        let n = 1000;
        let gamma = threshold_for_false_alarm(0.1, 1.0, n).unwrap();
        let r = simulate_detector(HypothesisCase::H0, gamma, n, 20_000, 1.0, 42).unwrap();
        assert!((r.rate - 0.1).abs() < 0.008, "rate {}", r.rate);
        assert!(r.std_error <= (0.25f64 / 20_000.0).sqrt());
    }

    #[test]
    fn simulation_is_bit_reproducible() {
        let a = simulate_statistics(HypothesisCase::H1 { signal_power: 0.3 }, 64, 2000, 1.0, 77).unwrap();
        let b = simulate_statistics(HypothesisCase::H1 { signal_power: 0.3 }, 64, 2000, 1.0, 77).unwrap();
        assert_eq!(a, b);
        // a single trial is the same whatever else runs alongside it
        let c = simulate_statistics(HypothesisCase::H1 { signal_power: 0.3 }, 64, 10, 1.0, 77).unwrap();
        assert_eq!(&a[..10], &c[..]);
    }

    #[test]
    fn separation_examples() {
        let rho = 1.4;
        let wall = rho - 1.0 / rho;
        let at = worst_case_separation(wall, rho, 2.0, 100).unwrap();
        assert_relative_eq!(at.h0_mean, at.h1_mean, max_relative = 1e-14);
        for rho in [1.1, 2.0, 5.0] {
            let w = rho - 1.0 / rho;
            assert!(worst_case_separation(2.0 * w, rho, 1.0, 10).unwrap().separable);
            assert!(!worst_case_separation(0.5 * w, rho, 1.0, 10).unwrap().separable);
        }
        assert!(worst_case_separation(1.0, 0.9, 1.0, 10).is_err());
    }

    #[test]
    fn roc_sweep_shape() {
        let h0 = [1.0, 2.0, 3.0];
        let h1 = [2.0, 4.0, 6.0];
        let g = gamma_sweep(&h0, &h1, 6);
        assert_eq!(g.first(), Some(&1.0));
        assert_eq!(g.last(), Some(&6.0));
        let roc = empirical_roc(&h0, &h1, &g);
        assert_eq!(roc[0].false_alarm_rate, 2.0 / 3.0);
        let t = DetectionTargets::new(0.1, 0.6).unwrap();
        let p = meeting_point(&roc, &t).unwrap();
        assert_eq!(p.false_alarm_rate, 0.0);
        assert!(p.detection_rate >= 0.6);
    }

    #[test]
    fn cohort_shapes() {
        let spec = CohortSpec { subjects: 2, duration_s: 10.0, burst_period_s: 4.0, ..Default::default() };
        let d = synthetic_cohort(&spec, 1).unwrap();
        assert_eq!(d.recordings.len(), 4);
        assert_eq!(d.references.len(), 2);
        assert_eq!(d.recordings[0].len(), 2500);
        assert_eq!(d, synthetic_cohort(&spec, 1).unwrap());
    }
}
