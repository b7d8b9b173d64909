//! Estimating powers and variances from data.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Windowed variances below this (µV²) count as a dead channel.
pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-12;
pub const DEFAULT_REDUCTION_FRACTION: f64 = 0.40;

/// Mean power `(1/N) sum x[n]^2`.
pub fn mean_power(signal: &[f64]) -> Result<f64> {
    if signal.is_empty() {
        return Err(Error::InvalidInput("mean power of an empty signal".into()));
    }
    Ok(signal.iter().map(|v| v * v).sum::<f64>() / signal.len() as f64)
}

/// Mean power of every window `[n, n + tau)`, for `n` in `0..=len - tau`.
///
/// The signal is cut into aligned blocks of `tau` samples. Any window covers
/// a suffix of one block and a prefix of the next, so its sum of squares is
/// one suffix sum plus one prefix sum. Only non-negative terms are ever
/// added, which keeps every window within a few ulps of a direct sum
/// regardless of the signal's dynamic range.
pub fn sliding_window_power(signal: &[f64], tau: usize) -> Result<Vec<f64>> {
    let len = signal.len();
    if tau < 2 || tau > len {
        return Err(Error::Config(format!(
            "window length {tau} must satisfy 2 <= tau <= {len}"
        )));
    }
    let squares: Vec<f64> = signal.iter().map(|v| v * v).collect();

    // prefix[i]: sum of squares from the start of i's block through i
    // suffix[i]: sum of squares from i through the end of i's block
    let mut prefix = vec![0.0; len];
    let mut suffix = vec![0.0; len];
    for block in (0..len).step_by(tau) {
        let end = (block + tau).min(len);
        let mut acc = 0.0;
        for i in block..end {
            acc += squares[i];
            prefix[i] = acc;
        }
        acc = 0.0;
        for i in (block..end).rev() {
            acc += squares[i];
            suffix[i] = acc;
        }
    }

    let scale = 1.0 / tau as f64;
    Ok((0..=len - tau)
        .map(|n| {
            let last = n + tau - 1;
            let sum = if n % tau == 0 {
                suffix[n]
            } else {
                suffix[n] + prefix[last]
            };
            sum * scale
        })
        .collect())
}

/// Noise uncertainty measured from sliding-window variance extrema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub sigma2_min: f64,
    pub sigma2_max: f64,
    /// Geometric mean of the extrema, so that `min = nominal / rho` and
    /// `max = rho * nominal`.
    pub sigma2_nominal: f64,
    /// `sqrt(sigma2_max / sigma2_min)`.
    pub rho: f64,
    pub window_samples: usize,
    pub window_positions: usize,
}

impl NoiseProfile {
    pub fn snr_wall(&self) -> f64 {
        self.rho - 1.0 / self.rho
    }
}

pub fn noise_profile(signal: &[f64], tau: usize) -> Result<NoiseProfile> {
    noise_profile_with_floor(signal, tau, DEFAULT_VARIANCE_FLOOR)
}

pub fn noise_profile_with_floor(signal: &[f64], tau: usize, floor: f64) -> Result<NoiseProfile> {
    let windows = sliding_window_power(signal, tau)?;
    let (min, max) = windows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(min > floor) {
        return Err(Error::DegenerateNoise {
            sigma2_min: min,
            floor,
        });
    }
    Ok(NoiseProfile {
        sigma2_min: min,
        sigma2_max: max,
        sigma2_nominal: (min * max).sqrt(),
        rho: (max / min).sqrt(),
        window_samples: tau,
        window_positions: windows.len(),
    })
}

/// Power of the whole (already filtered and trimmed) recording, used as the
/// noise variance in the SNR.
pub fn noise_variance_global(signal: &[f64]) -> Result<f64> {
    mean_power(signal)
}

/// Stimulus-locked average. `waveform[0]` is `pre_stimulus_samples` before
/// the stimulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvokedPotential {
    pub waveform: Vec<f64>,
    pub trials: usize,
    pub sample_rate_hz: f64,
    pub pre_stimulus_samples: usize,
}

impl EvokedPotential {
    /// Wraps an already averaged (or synthetic) waveform.
    pub fn from_waveform(waveform: Vec<f64>, sample_rate_hz: f64, pre_stimulus_samples: usize) -> Result<Self> {
        evoked_average(&[waveform], sample_rate_hz, pre_stimulus_samples)
    }

    pub fn len(&self) -> usize {
        self.waveform.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waveform.is_empty()
    }
}

/// Pointwise mean across equal-length epochs.
pub fn evoked_average<T: AsRef<[f64]>>(
    trials: &[T],
    sample_rate_hz: f64,
    pre_stimulus_samples: usize,
) -> Result<EvokedPotential> {
    let first = trials
        .first()
        .ok_or_else(|| Error::InvalidInput("evoked average needs at least one trial".into()))?
        .as_ref();
    let len = first.len();
    if len == 0 {
        return Err(Error::InvalidInput("empty epoch".into()));
    }
    if pre_stimulus_samples >= len {
        return Err(Error::InvalidInput(format!(
            "pre-stimulus length {pre_stimulus_samples} leaves no post-stimulus samples in a {len}-sample epoch"
        )));
    }
    if !(sample_rate_hz > 0.0) {
        return Err(Error::Config(format!("sample rate must be positive, got {sample_rate_hz}")));
    }
    let mut sum = vec![0.0; len];
    for (i, t) in trials.iter().enumerate() {
        let t = t.as_ref();
        if t.len() != len {
            return Err(Error::InvalidInput(format!(
                "ragged trials: trial {i} has {} samples, expected {len}",
                t.len()
            )));
        }
        sum.iter_mut().zip(t).for_each(|(s, v)| *s += v);
    }
    let n = trials.len() as f64;
    Ok(EvokedPotential {
        waveform: sum.into_iter().map(|s| s / n).collect(),
        trials: trials.len(),
        sample_rate_hz,
        pre_stimulus_samples,
    })
}

/// Cuts `[t - pre, t + post)` around each trigger index. Triggers too close
/// to either end of the signal are skipped.
pub fn slice_epochs(signal: &[f64], triggers: &[usize], pre: usize, post: usize) -> Vec<Vec<f64>> {
    triggers
        .iter()
        .filter(|&&t| t >= pre && t + post <= signal.len())
        .map(|&t| signal[t - pre..t + post].to_vec())
        .collect()
}

/// Post-stimulus interval searched for the peak, and the pre-stimulus span
/// used for baseline correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeakWindow {
    pub start_ms: f64,
    pub end_ms: f64,
    pub baseline_ms: f64,
}

impl Default for PeakWindow {
    fn default() -> Self {
        Self {
            start_ms: 250.0,
            end_ms: 500.0,
            baseline_ms: 200.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalPowerEstimate {
    /// Peak absolute deviation after baseline correction (µV).
    pub c_max: f64,
    /// `c_max^2` (µV²).
    pub t_time: f64,
    /// `t_time * (1 - reduction_fraction)` (µV²).
    pub t_freq: f64,
    pub reduction_fraction: f64,
    /// Index into the evoked waveform where the peak sits.
    pub peak_index: usize,
}

impl SignalPowerEstimate {
    pub fn from_peak(c_max: f64, reduction_fraction: f64, peak_index: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&reduction_fraction) {
            return Err(Error::Config(format!(
                "reduction fraction must lie in [0, 1), got {reduction_fraction}"
            )));
        }
        let t_time = c_max * c_max;
        Ok(Self {
            c_max,
            t_time,
            t_freq: t_time - t_time * reduction_fraction,
            reduction_fraction,
            peak_index,
        })
    }
}

/// Peak conscious-signal power from an evoked potential.
///
/// The baseline is the mean over up to `baseline_ms` before the stimulus
/// (none if the epoch has no pre-stimulus part). Polarity is ignored.
pub fn peak_signal_power(
    ep: &EvokedPotential,
    window: &PeakWindow,
    reduction_fraction: f64,
) -> Result<SignalPowerEstimate> {
    let to_samples = |ms: f64| (ms * ep.sample_rate_hz / 1000.0).round();
    if !(window.start_ms >= 0.0 && window.end_ms >= window.start_ms) {
        return Err(Error::Config(format!(
            "peak window {}..{} ms is empty",
            window.start_ms, window.end_ms
        )));
    }
    let start = ep.pre_stimulus_samples + to_samples(window.start_ms) as usize;
    let end = ep.pre_stimulus_samples + to_samples(window.end_ms) as usize;
    if end >= ep.waveform.len() {
        return Err(Error::InvalidInput(format!(
            "peak window ends at sample {end} beyond the {}-sample epoch",
            ep.waveform.len()
        )));
    }
    let baseline_len = (to_samples(window.baseline_ms.max(0.0)) as usize).min(ep.pre_stimulus_samples);
    let baseline = if baseline_len == 0 {
        0.0
    } else {
        let span = &ep.waveform[ep.pre_stimulus_samples - baseline_len..ep.pre_stimulus_samples];
        span.iter().sum::<f64>() / baseline_len as f64
    };
    let (peak_index, c_max) = (start..=end)
        .map(|i| (i, (ep.waveform[i] - baseline).abs()))
        .fold((start, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    SignalPowerEstimate::from_peak(c_max, reduction_fraction, peak_index)
}

/// DFT of a real window, `X[k] = sum d[n] exp(-j 2 pi k n / N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub coefficients: Vec<Complex64>,
    pub sample_rate_hz: f64,
}

impl Spectrum {
    pub fn of(signal: &[f64], sample_rate_hz: f64) -> Result<Self> {
        if signal.is_empty() {
            return Err(Error::InvalidInput("spectrum of an empty signal".into()));
        }
        let mut buf: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
        Ok(Self {
            coefficients: buf,
            sample_rate_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Frequency of bin `k`; bins above `N/2` are reported as negative
    /// frequencies.
    pub fn bin_frequency(&self, k: usize) -> f64 {
        let n = self.len();
        let k = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        k * self.sample_rate_hz / n as f64
    }

    pub fn frequencies_hz(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.bin_frequency(k)).collect()
    }

    /// Periodogram power summed over bins with `|f|` in `[lo_hz, hi_hz]`,
    /// normalized so that the full band sums to the mean power.
    pub fn power_in_band(&self, lo_hz: f64, hi_hz: f64) -> f64 {
        let n = self.len() as f64;
        self.coefficients
            .iter()
            .enumerate()
            .filter(|&(k, _)| {
                let f = self.bin_frequency(k).abs();
                f >= lo_hz && f <= hi_hz
            })
            .map(|(_, x)| x.norm_sqr())
            .sum::<f64>()
            / (n * n)
    }

    pub fn total_power(&self) -> f64 {
        let n = self.len() as f64;
        self.coefficients.iter().map(|x| x.norm_sqr()).sum::<f64>() / (n * n)
    }
}

/// Mean power of `signal` carried by frequencies in `[lo_hz, hi_hz]`.
pub fn band_power(signal: &[f64], lo_hz: f64, hi_hz: f64, sample_rate_hz: f64) -> Result<f64> {
    if !(sample_rate_hz > 0.0) {
        return Err(Error::Config(format!("sample rate must be positive, got {sample_rate_hz}")));
    }
    if !(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < sample_rate_hz / 2.0) {
        return Err(Error::Config(format!(
            "band {lo_hz}..{hi_hz} Hz must lie inside (0, {}) Hz",
            sample_rate_hz / 2.0
        )));
    }
    Ok(Spectrum::of(signal, sample_rate_hz)?.power_in_band(lo_hz, hi_hz))
}
