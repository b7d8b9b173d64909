//! Causal pre-processing chains.
//!
//! Every filter here is a cascade of second-order sections designed with the
//! bilinear transform (frequency pre-warped), plus the first-difference
//! operator. Chains run sample by sample with zero initial state.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 250.0;
pub const DEFAULT_DC_CUTOFF_HZ: f64 = 0.5;
pub const DEFAULT_NOTCH_CENTER_HZ: f64 = 50.0;
pub const DEFAULT_NOTCH_BANDWIDTH_HZ: f64 = 4.0;

/// Normalized second-order section:
/// `y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiquadCoeffs {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl BiquadCoeffs {
    /// Validated constructor: coefficients must be finite and both poles
    /// strictly inside the unit circle.
    pub fn new(b0: f64, b1: f64, b2: f64, a1: f64, a2: f64) -> Result<Self> {
        let c = Self { b0, b1, b2, a1, a2 };
        if ![b0, b1, b2, a1, a2].iter().all(|v| v.is_finite()) {
            return Err(Error::Config(format!("non-finite biquad coefficients {c:?}")));
        }
        if !c.is_stable() {
            return Err(Error::Config(format!(
                "unstable biquad: pole radius {}",
                c.max_pole_radius()
            )));
        }
        Ok(c)
    }

    /// Roots of `z^2 + a1 z + a2`.
    pub fn poles(&self) -> [Complex64; 2] {
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        let a1 = Complex64::new(self.a1, 0.0);
        [(-a1 + disc) / 2.0, (-a1 - disc) / 2.0]
    }

    pub fn max_pole_radius(&self) -> f64 {
        let [p, q] = self.poles();
        p.norm().max(q.norm())
    }

    pub fn is_stable(&self) -> bool {
        self.max_pole_radius() < 1.0
    }

    /// Complex response at normalized angular frequency `omega` (rad/sample).
    pub fn response(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        (self.b0 + self.b1 * z1 + self.b2 * z2) / (1.0 + self.a1 * z1 + self.a2 * z2)
    }
}

/// What a cascade of sections implements; kept for metadata and for
/// structural checks on scenario chains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SectionRole {
    ButterworthBandpass { lo_hz: f64, hi_hz: f64 },
    DcRemoval { cutoff_hz: f64 },
    PowerlineNotch { center_hz: f64, bandwidth_hz: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum Stage {
    Biquads {
        role: SectionRole,
        sections: Vec<BiquadCoeffs>,
    },
    /// `y[n] = x[n] - x[n-1]` with `x[-1] = 0`.
    FirstDifference,
    PassThrough,
}

impl Stage {
    pub fn role(&self) -> Option<SectionRole> {
        match self {
            Stage::Biquads { role, .. } => Some(*role),
            _ => None,
        }
    }

    fn response(&self, omega: f64) -> Complex64 {
        match self {
            Stage::Biquads { sections, .. } => sections
                .iter()
                .map(|s| s.response(omega))
                .product(),
            Stage::FirstDifference => Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -omega),
            Stage::PassThrough => Complex64::new(1.0, 0.0),
        }
    }
}

/// The four pre-processing scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// DC removal and powerline notch only.
    A,
    /// First difference, DC removal, notch.
    B,
    /// 8-18 Hz Butterworth bandpass, DC removal, notch.
    C,
    /// 8-12 Hz Butterworth bandpass, DC removal, notch.
    D,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::A, Scenario::B, Scenario::C, Scenario::D];

    pub fn bandpass(self) -> Option<(f64, f64)> {
        match self {
            Scenario::C => Some((8.0, 18.0)),
            Scenario::D => Some((8.0, 12.0)),
            _ => None,
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Scenario::A => "wideband energy detector",
            Scenario::B => "differentiator",
            Scenario::C => "bandpass 8-18 Hz",
            Scenario::D => "bandpass 8-12 Hz",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self {
            Scenario::A => "A",
            Scenario::B => "B",
            Scenario::C => "C",
            Scenario::D => "D",
        };
        f.write_str(tag)
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Scenario::A),
            "B" | "b" => Ok(Scenario::B),
            "C" | "c" => Ok(Scenario::C),
            "D" | "d" => Ok(Scenario::D),
            other => Err(Error::Config(format!("unknown scenario tag {other:?}"))),
        }
    }
}

/// Parameters of the DC-removal and notch stages shared by all scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSettings {
    pub dc_cutoff_hz: f64,
    pub notch_center_hz: f64,
    pub notch_bandwidth_hz: f64,
}

impl Default for FilterSettings {
    fn default() -> Self {
        Self {
            dc_cutoff_hz: DEFAULT_DC_CUTOFF_HZ,
            notch_center_hz: DEFAULT_NOTCH_CENTER_HZ,
            notch_bandwidth_hz: DEFAULT_NOTCH_BANDWIDTH_HZ,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterChain {
    pub sample_rate_hz: f64,
    pub scenario: Option<Scenario>,
    pub stages: Vec<Stage>,
}

impl FilterChain {
    pub fn new(sample_rate_hz: f64, stages: Vec<Stage>) -> Result<Self> {
        check_rate(sample_rate_hz)?;
        Ok(Self {
            sample_rate_hz,
            scenario: None,
            stages,
        })
    }

    /// Appends the stages of `other`, which must share the sample rate.
    pub fn then(mut self, other: FilterChain) -> Result<Self> {
        check_same_rate(self.sample_rate_hz, other.sample_rate_hz)?;
        self.stages.extend(other.stages);
        Ok(self)
    }

    /// Complex response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let omega = 2.0 * PI * freq_hz / self.sample_rate_hz;
        self.stages.iter().map(|s| s.response(omega)).product()
    }

    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm()
    }

    pub fn magnitude_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.magnitude(freq_hz).log10()
    }

    pub fn bandpass_edges(&self) -> Option<(f64, f64)> {
        self.stages.iter().find_map(|s| match s.role() {
            Some(SectionRole::ButterworthBandpass { lo_hz, hi_hz }) => Some((lo_hz, hi_hz)),
            _ => None,
        })
    }

    pub fn processor(&self) -> ChainProcessor<'_> {
        ChainProcessor::new(self)
    }

    /// Filters a whole signal from zero initial state.
    pub fn filter(&self, signal: &[f64]) -> Vec<f64> {
        let mut p = self.processor();
        signal.iter().map(|&x| p.process(x)).collect()
    }
}

/// Per-call filter state; feeds one sample at a time.
pub struct ChainProcessor<'a> {
    chain: &'a FilterChain,
    // two transposed direct-form II registers per section, or one previous
    // input for the first-difference stage
    state: Vec<[f64; 2]>,
}

impl<'a> ChainProcessor<'a> {
    fn new(chain: &'a FilterChain) -> Self {
        let slots = chain
            .stages
            .iter()
            .map(|s| match s {
                Stage::Biquads { sections, .. } => sections.len(),
                _ => 1,
            })
            .sum();
        Self {
            chain,
            state: vec![[0.0; 2]; slots],
        }
    }

    pub fn process(&mut self, x: f64) -> f64 {
        let mut v = x;
        let mut slot = 0;
        for stage in &self.chain.stages {
            match stage {
                Stage::Biquads { sections, .. } => {
                    for c in sections {
                        let s = &mut self.state[slot];
                        let y = c.b0 * v + s[0];
                        s[0] = c.b1 * v - c.a1 * y + s[1];
                        s[1] = c.b2 * v - c.a2 * y;
                        v = y;
                        slot += 1;
                    }
                }
                Stage::FirstDifference => {
                    let s = &mut self.state[slot];
                    let y = v - s[0];
                    s[0] = v;
                    v = y;
                    slot += 1;
                }
                Stage::PassThrough => slot += 1,
            }
        }
        v
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|s| *s = [0.0; 2]);
    }
}

/// A uniformly sampled single-channel recording. Samples are in microvolts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    pub subject: String,
    pub task: String,
    pub channel: String,
}

impl Recording {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        check_rate(sample_rate_hz)?;
        if samples.is_empty() {
            return Err(Error::InvalidInput("recording has no samples".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "recording sample {i} is not finite ({})",
                samples[i]
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            subject: String::new(),
            task: String::new(),
            channel: String::new(),
        })
    }

    pub fn with_labels(
        mut self,
        subject: impl Into<String>,
        task: impl Into<String>,
        channel: impl Into<String>,
    ) -> Self {
        self.subject = subject.into();
        self.task = task.into();
        self.channel = channel.into();
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Number of whole samples spanning `seconds`.
    pub fn samples_for(&self, seconds: f64) -> usize {
        (seconds * self.sample_rate_hz).round() as usize
    }
}

fn check_rate(sample_rate_hz: f64) -> Result<()> {
    if sample_rate_hz > 0.0 && sample_rate_hz.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("sample rate must be positive, got {sample_rate_hz}")))
    }
}

fn check_same_rate(chain_hz: f64, recording_hz: f64) -> Result<()> {
    if (chain_hz - recording_hz).abs() <= 1e-9 * chain_hz.abs().max(recording_hz.abs()) {
        Ok(())
    } else {
        Err(Error::SampleRateMismatch {
            chain_hz,
            recording_hz,
        })
    }
}

fn check_below_nyquist(name: &str, freq_hz: f64, sample_rate_hz: f64) -> Result<()> {
    check_rate(sample_rate_hz)?;
    if freq_hz > 0.0 && freq_hz < sample_rate_hz / 2.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{name} {freq_hz} Hz must lie in (0, {}) Hz",
            sample_rate_hz / 2.0
        )))
    }
}

fn prewarp(freq_hz: f64, sample_rate_hz: f64) -> f64 {
    2.0 * sample_rate_hz * (PI * freq_hz / sample_rate_hz).tan()
}

fn bilinear(s: Complex64, sample_rate_hz: f64) -> Complex64 {
    let k = 2.0 * sample_rate_hz;
    (k + s) / (k - s)
}

/// 2nd-order Butterworth bandpass: a second-order lowpass prototype mapped to
/// a band (four poles, two sections), digitized by the pre-warped bilinear
/// transform. Each section carries zeros at DC and Nyquist and is scaled to
/// unit gain at the band center.
pub fn design_butterworth_bandpass(lo_hz: f64, hi_hz: f64, sample_rate_hz: f64) -> Result<FilterChain> {
    check_below_nyquist("lower band edge", lo_hz, sample_rate_hz)?;
    check_below_nyquist("upper band edge", hi_hz, sample_rate_hz)?;
    if lo_hz >= hi_hz {
        return Err(Error::Config(format!(
            "band edges must satisfy lo < hi, got {lo_hz} >= {hi_hz}"
        )));
    }
    let w_lo = prewarp(lo_hz, sample_rate_hz);
    let w_hi = prewarp(hi_hz, sample_rate_hz);
    let center2 = w_lo * w_hi;
    let bandwidth = w_hi - w_lo;
    let omega_center = 2.0 * (center2.sqrt() / (2.0 * sample_rate_hz)).atan();

    // upper-half-plane pole of the 2nd-order Butterworth prototype
    let proto = Complex64::from_polar(1.0, 3.0 * PI / 4.0);
    let pb = proto * bandwidth;
    let root = (pb * pb - 4.0 * center2).sqrt();
    let analog = [(pb + root) / 2.0, (pb - root) / 2.0];

    let mut sections = Vec::with_capacity(2);
    for s in analog {
        let z = bilinear(s, sample_rate_hz);
        let a1 = -2.0 * z.re;
        let a2 = z.norm_sqr();
        let unscaled = BiquadCoeffs { b0: 1.0, b1: 0.0, b2: -1.0, a1, a2 };
        let g = 1.0 / unscaled.response(omega_center).norm();
        sections.push(BiquadCoeffs::new(g, 0.0, -g, a1, a2)?);
    }
    FilterChain::new(
        sample_rate_hz,
        vec![Stage::Biquads {
            role: SectionRole::ButterworthBandpass { lo_hz, hi_hz },
            sections,
        }],
    )
}

/// 2nd-order Butterworth highpass with double zero at DC.
pub fn design_dc_removal(cutoff_hz: f64, sample_rate_hz: f64) -> Result<FilterChain> {
    check_below_nyquist("DC-removal cutoff", cutoff_hz, sample_rate_hz)?;
    let w0 = 2.0 * PI * cutoff_hz / sample_rate_hz;
    let (sin, cos) = w0.sin_cos();
    let alpha = sin * FRAC_1_SQRT_2; // sin / (2Q), Q = 1/sqrt(2)
    let a0 = 1.0 + alpha;
    let b = (1.0 + cos) / 2.0 / a0;
    let section = BiquadCoeffs::new(b, -2.0 * b, b, -2.0 * cos / a0, (1.0 - alpha) / a0)?;
    FilterChain::new(
        sample_rate_hz,
        vec![Stage::Biquads {
            role: SectionRole::DcRemoval { cutoff_hz },
            sections: vec![section],
        }],
    )
}

/// Powerline notch with the default 4 Hz (-3 dB) stop bandwidth.
pub fn design_powerline_notch(center_hz: f64, sample_rate_hz: f64) -> Result<FilterChain> {
    design_notch(center_hz, DEFAULT_NOTCH_BANDWIDTH_HZ, sample_rate_hz)
}

/// Second-order IIR notch: zeros on the unit circle at `center_hz`, -3 dB
/// points `bandwidth_hz` apart.
pub fn design_notch(center_hz: f64, bandwidth_hz: f64, sample_rate_hz: f64) -> Result<FilterChain> {
    check_below_nyquist("notch center", center_hz, sample_rate_hz)?;
    if !(bandwidth_hz > 0.0 && bandwidth_hz < sample_rate_hz / 2.0) {
        return Err(Error::Config(format!("invalid notch bandwidth {bandwidth_hz} Hz")));
    }
    let w0 = 2.0 * PI * center_hz / sample_rate_hz;
    let bw = 2.0 * PI * bandwidth_hz / sample_rate_hz;
    let gain = 1.0 / (1.0 + (bw / 2.0).tan());
    let cos = w0.cos();
    let section = BiquadCoeffs::new(gain, -2.0 * gain * cos, gain, -2.0 * gain * cos, 2.0 * gain - 1.0)?;
    FilterChain::new(
        sample_rate_hz,
        vec![Stage::Biquads {
            role: SectionRole::PowerlineNotch {
                center_hz,
                bandwidth_hz,
            },
            sections: vec![section],
        }],
    )
}

/// `y[n] = x[n] - x[n-1]`, `x[-1] = 0`.
pub fn first_difference(signal: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    signal
        .iter()
        .map(|&x| {
            let y = x - prev;
            prev = x;
            y
        })
        .collect()
}

/// Scenario chain with default DC-removal and notch settings.
pub fn scenario_chain(scenario: Scenario, sample_rate_hz: f64) -> Result<FilterChain> {
    scenario_chain_with(scenario, sample_rate_hz, &FilterSettings::default())
}

/// Builds the chain of a scenario: the scenario-specific front stage
/// (bandpass or differentiator, if any), then DC removal, then the notch.
pub fn scenario_chain_with(
    scenario: Scenario,
    sample_rate_hz: f64,
    settings: &FilterSettings,
) -> Result<FilterChain> {
    let mut chain = match scenario {
        Scenario::A => FilterChain::new(sample_rate_hz, Vec::new())?,
        Scenario::B => FilterChain::new(sample_rate_hz, vec![Stage::FirstDifference])?,
        Scenario::C | Scenario::D => {
            let (lo, hi) = scenario.bandpass().expect("bandpass scenario");
            design_butterworth_bandpass(lo, hi, sample_rate_hz)?
        }
    };
    chain = chain
        .then(design_dc_removal(settings.dc_cutoff_hz, sample_rate_hz)?)?
        .then(design_notch(
            settings.notch_center_hz,
            settings.notch_bandwidth_hz,
            sample_rate_hz,
        )?)?;
    chain.scenario = Some(scenario);
    Ok(chain)
}

/// Filters a recording; metadata is carried over unchanged.
pub fn apply_chain(chain: &FilterChain, recording: &Recording) -> Result<Recording> {
    check_same_rate(chain.sample_rate_hz, recording.sample_rate_hz)?;
    Ok(Recording {
        samples: chain.filter(&recording.samples),
        ..recording.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn db(x: f64) -> f64 {
        20.0 * x.log10()
    }

    /// Independent frequency-response oracle: steady-state amplitude of a
    /// long sinusoid pushed through the chain in the time domain.
    fn sinusoid_gain(chain: &FilterChain, freq_hz: f64) -> f64 {
        let fs = chain.sample_rate_hz;
        let n = (60.0 * fs) as usize;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * freq_hz * i as f64 / fs).sin()).collect();
        let y = chain.filter(&x);
        let tail = &y[n / 2..];
        (2.0 * tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt()
    }

    #[test]
    fn bandpass_zeros_at_dc_and_nyquist() {
        let c = design_butterworth_bandpass(8.0, 12.0, 250.0).unwrap();
        assert!(c.magnitude(0.0) < 1e-12);
        assert!(c.magnitude(125.0) < 1e-12);
    }

    #[test]
    fn bandpass_center_and_stopband() {
        for fs in [125.0, 250.0, 500.0] {
            let c = design_butterworth_bandpass(8.0, 12.0, fs).unwrap();
            let center = (8.0f64 * 12.0).sqrt();
            assert!(db(c.magnitude(center)).abs() < 1.0, "fs={fs}");
            assert!(db(sinusoid_gain(&c, center)).abs() < 1.0);
            let wide = design_butterworth_bandpass(8.0, 18.0, fs).unwrap();
            assert!(db(wide.magnitude(50.0)) < -20.0, "fs={fs}");
            assert!(db(sinusoid_gain(&wide, 50.0)) < -20.0);
        }
    }

    #[test]
    fn bandpass_edges_are_3db() {
        let c = design_butterworth_bandpass(8.0, 18.0, 250.0).unwrap();
        assert_relative_eq!(db(c.magnitude(8.0)), -3.0103, epsilon = 1e-3);
        assert_relative_eq!(db(c.magnitude(18.0)), -3.0103, epsilon = 1e-3);
    }

    #[test]
    fn bandpass_rejects_bad_edges() {
        assert!(design_butterworth_bandpass(12.0, 8.0, 250.0).is_err());
        assert!(design_butterworth_bandpass(0.0, 8.0, 250.0).is_err());
        assert!(design_butterworth_bandpass(8.0, 125.0, 250.0).is_err());
        assert!(design_butterworth_bandpass(8.0, 8.0, 250.0).is_err());
    }

    #[test]
    fn dc_removal_response() {
        for fs in [125.0, 250.0, 500.0] {
            let c = design_dc_removal(0.5, fs).unwrap();
            assert!(c.magnitude(0.0) < 1e-12);
            assert!(db(c.magnitude(10.0)).abs() < 0.5);
            assert!(db(c.magnitude(0.5)) >= -3.0103 - 1e-6);
            for f in [1.0, 5.0, 30.0, fs / 2.0 - 1.0] {
                assert!(db(c.magnitude(f)) > -3.0, "fs={fs} f={f}");
            }
        }
        assert!(design_dc_removal(0.0, 250.0).is_err());
        assert!(design_dc_removal(200.0, 250.0).is_err());
    }

    #[test]
    fn dc_removal_kills_constant_and_decays() {
        let c = design_dc_removal(0.5, 250.0).unwrap();
        let y = c.filter(&vec![1.0; 20_000]);
        assert!(y.last().unwrap().abs() < 1e-6);

        let mut impulse = vec![0.0; 20_000];
        impulse[0] = 1.0;
        let h = c.filter(&impulse);
        let energy: f64 = h.iter().map(|v| v * v).sum();
        assert!(energy.is_finite());
        assert!(h[19_000..].iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn notch_response() {
        for fs in [125.0, 250.0, 500.0] {
            let c = design_powerline_notch(50.0, fs).unwrap();
            assert!(db(c.magnitude(50.0)) < -20.0);
            for f in [25.0, 70.0] {
                if f < fs / 2.0 {
                    assert!(db(c.magnitude(f)).abs() <= 1.0, "fs={fs} f={f}");
                }
            }
            assert!(db(c.magnitude(10.0)).abs() < 1.0);
            // -3 dB points are 4 Hz apart
            let upper = (0..4000)
                .map(|i| 50.0 + i as f64 * 0.001)
                .find(|&f| db(c.magnitude(f)) > -3.0103)
                .unwrap();
            let lower = (0..4000)
                .map(|i| 50.0 - i as f64 * 0.001)
                .find(|&f| db(c.magnitude(f)) > -3.0103)
                .unwrap();
            assert!((upper - lower - 4.0).abs() < 0.05, "fs={fs}: {}", upper - lower);
        }
    }

    #[test]
    fn notch_sinusoids() {
        let c = design_powerline_notch(50.0, 250.0).unwrap();
        assert!(sinusoid_gain(&c, 50.0) < 0.1);
        assert!(db(sinusoid_gain(&c, 10.0)).abs() < 1.0);
        assert!(c.filter(&[0.0; 100]).iter().all(|&v| v == 0.0));
        assert!(design_powerline_notch(130.0, 250.0).is_err());
    }

    #[test]
    fn first_difference_examples() {
        assert_eq!(first_difference(&[1.0, 0.0, 0.0]), vec![1.0, -1.0, 0.0]);
        assert_eq!(first_difference(&[2.5, 2.5, 2.5]), vec![2.5, 0.0, 0.0]);
        assert_eq!(first_difference(&[0.0, 1.0, 2.0, 3.0]), vec![0.0, 1.0, 1.0, 1.0]);
        let stage = FilterChain::new(250.0, vec![Stage::FirstDifference]).unwrap();
        assert_eq!(stage.filter(&[0.0, 1.0, 2.0, 3.0]), vec![0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn scenario_structure() {
        let roles = |s| -> Vec<Option<SectionRole>> {
            scenario_chain(s, 250.0).unwrap().stages.iter().map(Stage::role).collect()
        };
        let dc = Some(SectionRole::DcRemoval { cutoff_hz: 0.5 });
        let notch = Some(SectionRole::PowerlineNotch { center_hz: 50.0, bandwidth_hz: 4.0 });
        assert_eq!(roles(Scenario::A), vec![dc, notch]);
        let b = scenario_chain(Scenario::B, 250.0).unwrap();
        assert_eq!(b.stages.len(), 3);
        assert_eq!(b.stages[0], Stage::FirstDifference);
        assert_eq!(
            roles(Scenario::C),
            vec![Some(SectionRole::ButterworthBandpass { lo_hz: 8.0, hi_hz: 18.0 }), dc, notch]
        );
        assert_eq!(
            roles(Scenario::D),
            vec![Some(SectionRole::ButterworthBandpass { lo_hz: 8.0, hi_hz: 12.0 }), dc, notch]
        );
        assert_eq!(scenario_chain(Scenario::A, 250.0).unwrap().bandpass_edges(), None);
        assert_eq!(scenario_chain(Scenario::D, 250.0).unwrap().scenario, Some(Scenario::D));
    }

    #[test]
    fn scenario_parse() {
        assert_eq!("C".parse::<Scenario>().unwrap(), Scenario::C);
        assert_eq!("d".parse::<Scenario>().unwrap(), Scenario::D);
        assert!("E".parse::<Scenario>().is_err());
    }

    #[test]
    fn every_scenario_chain_is_stable() {
        for fs in [125.0, 250.0, 500.0] {
            for s in Scenario::ALL {
                for stage in scenario_chain(s, fs).unwrap().stages {
                    if let Stage::Biquads { sections, .. } = stage {
                        assert!(sections.iter().all(|c| c.max_pole_radius() < 1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn unstable_coefficients_rejected() {
        assert!(BiquadCoeffs::new(1.0, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(BiquadCoeffs::new(1.0, 0.0, 0.0, -2.1, 1.05).is_err());
        assert!(BiquadCoeffs::new(f64::NAN, 0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn apply_checks_rate() {
        let chain = scenario_chain(Scenario::A, 250.0).unwrap();
        let rec = Recording::new(vec![0.0; 10], 500.0).unwrap();
        assert!(matches!(apply_chain(&chain, &rec), Err(Error::SampleRateMismatch { .. })));
        let rec = Recording::new(vec![0.0; 10], 250.0).unwrap().with_labels("s1", "read", "cz");
        let out = apply_chain(&chain, &rec).unwrap();
        assert_eq!(out.samples, vec![0.0; 10]);
        assert_eq!(out.task, "read");
    }

    #[test]
    fn recording_validation() {
        assert!(Recording::new(vec![], 250.0).is_err());
        assert!(Recording::new(vec![1.0, f64::NAN], 250.0).is_err());
        assert!(Recording::new(vec![1.0], 0.0).is_err());
    }

    #[test]
    fn processor_matches_batch_and_resets() {
        let chain = scenario_chain(Scenario::C, 250.0).unwrap();
        let x: Vec<f64> = (0..500).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let batch = chain.filter(&x);
        let mut p = chain.processor();
        let streamed: Vec<f64> = x.iter().map(|&v| p.process(v)).collect();
        assert_eq!(batch, streamed);
        p.reset();
        assert_eq!(p.process(x[0]), batch[0]);
    }

    proptest! {
        #[test]
        fn chains_are_linear(
            x in prop::collection::vec(-100.0f64..100.0, 64..256),
            seed in 0u64..1000,
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
            which in 0usize..4,
        ) {
            let chain = scenario_chain(Scenario::ALL[which], 250.0).unwrap();
            let y: Vec<f64> = x.iter().enumerate()
                .map(|(i, _)| (((i as u64 + seed) * 2_654_435_761) % 1000) as f64 / 10.0 - 50.0)
                .collect();
            let mixed: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
            let fx = chain.filter(&x);
            let fy = chain.filter(&y);
            let fm = chain.filter(&mixed);
            let scale = fx.iter().chain(&fy).fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..x.len() {
                let expected = alpha * fx[i] + beta * fy[i];
                prop_assert!((fm[i] - expected).abs() <= 1e-9 * scale * (alpha.abs() + beta.abs() + 1.0));
            }
        }

        #[test]
        fn chains_are_causal(
            x in prop::collection::vec(-10.0f64..10.0, 2..200),
            cut in 1usize..200,
            which in 0usize..4,
        ) {
            let k = cut.min(x.len());
            let chain = scenario_chain(Scenario::ALL[which], 250.0).unwrap();
            let full = chain.filter(&x);
            let head = chain.filter(&x[..k]);
            prop_assert_eq!(&full[..k], &head[..]);
        }
    }

    #[test]
    fn doubling_input_doubles_output() {
        let chain = scenario_chain(Scenario::B, 250.0).unwrap();
        let x: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin() * 20.0).collect();
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        for (a, b) in chain.filter(&x).iter().zip(chain.filter(&x2)) {
            assert!((2.0 * a - b).abs() <= 1e-9 * b.abs().max(1e-12));
        }
    }
}
