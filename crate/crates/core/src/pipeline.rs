//! Per-recording verdicts, per-task significance tests, and study runs.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{decide_detectable, snr as snr_ratio, to_db_lossy};
use crate::error::{Error, Result};
use crate::estimation::{
    evoked_average, noise_profile_with_floor, noise_variance_global, peak_signal_power,
    slice_epochs, EvokedPotential, PeakWindow, DEFAULT_REDUCTION_FRACTION,
    DEFAULT_VARIANCE_FLOOR,
};
use crate::filters::{apply_chain, scenario_chain_with, FilterChain, FilterSettings, Recording, Scenario};
use crate::special::t_tail;

/// Which conscious-signal power enters the SNR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainMode {
    /// Peak power of the evoked potential, `c_max^2`.
    Time,
    /// Peak power after the assumed conscious reduction.
    Frequency,
}

impl DomainMode {
    /// Frequency-domain power for the bandpass scenarios, time-domain otherwise.
    pub fn default_for(scenario: Scenario) -> Self {
        match scenario {
            Scenario::A | Scenario::B => DomainMode::Time,
            Scenario::C | Scenario::D => DomainMode::Frequency,
        }
    }
}

impl std::fmt::Display for DomainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DomainMode::Time => "time",
            DomainMode::Frequency => "frequency",
        })
    }
}

impl std::str::FromStr for DomainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time" => Ok(DomainMode::Time),
            "frequency" => Ok(DomainMode::Frequency),
            other => Err(Error::Config(format!("unknown domain mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    /// Sliding-window length in seconds.
    pub tau_s: f64,
    pub reduction_fraction: f64,
    pub alpha: f64,
    pub peak_window: PeakWindow,
    /// Epoch span after each trigger when averaging a P300 recording.
    pub epoch_post_ms: f64,
    pub filter: FilterSettings,
    /// Leading span dropped from the filtered recording (startup transient).
    pub discard_start_s: f64,
    /// Overrides [`DomainMode::default_for`] when set.
    pub domain_mode: Option<DomainMode>,
    pub variance_floor: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            tau_s: 1.0,
            reduction_fraction: DEFAULT_REDUCTION_FRACTION,
            alpha: 0.05,
            peak_window: PeakWindow::default(),
            epoch_post_ms: 800.0,
            filter: FilterSettings::default(),
            discard_start_s: 1.0,
            domain_mode: None,
            variance_floor: DEFAULT_VARIANCE_FLOOR,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_s > 0.0) {
            return Err(Error::Config(format!("tau must be positive, got {} s", self.tau_s)));
        }
        if !(0.0..1.0).contains(&self.reduction_fraction) {
            return Err(Error::Config(format!(
                "reduction fraction must lie in [0, 1), got {}",
                self.reduction_fraction
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.discard_start_s >= 0.0) {
            return Err(Error::Config("discard span must be non-negative".into()));
        }
        if !(self.variance_floor >= 0.0) {
            return Err(Error::Config("variance floor must be non-negative".into()));
        }
        if !(self.epoch_post_ms > self.peak_window.end_ms) {
            return Err(Error::Config(format!(
                "epoch ({} ms) must extend past the peak window end ({} ms)",
                self.epoch_post_ms, self.peak_window.end_ms
            )));
        }
        Ok(())
    }

    pub fn mode_for(&self, scenario: Scenario) -> DomainMode {
        self.domain_mode.unwrap_or_else(|| DomainMode::default_for(scenario))
    }
}

/// Source of a subject's conscious-signal estimate.
#[derive(Debug, Clone, PartialEq)]
pub enum P300Reference {
    /// An unfiltered averaged waveform; the scenario chain is run over it.
    Evoked(EvokedPotential),
    /// A raw stimulus recording; it is filtered whole, then epoched at the
    /// triggers and averaged.
    Recording { recording: Recording, triggers: Vec<usize> },
}

impl P300Reference {
    /// The evoked potential as seen through `chain`.
    pub fn filtered_evoked(&self, chain: &FilterChain, config: &AnalysisConfig) -> Result<EvokedPotential> {
        match self {
            P300Reference::Evoked(ep) => {
                if (chain.sample_rate_hz - ep.sample_rate_hz).abs() > 1e-9 * chain.sample_rate_hz {
                    return Err(Error::SampleRateMismatch {
                        chain_hz: chain.sample_rate_hz,
                        recording_hz: ep.sample_rate_hz,
                    });
                }
                Ok(EvokedPotential {
                    waveform: chain.filter(&ep.waveform),
                    ..ep.clone()
                })
            }
            P300Reference::Recording { recording, triggers } => {
                let filtered = apply_chain(chain, recording)?;
                let fs = recording.sample_rate_hz;
                let pre = (config.peak_window.baseline_ms * fs / 1000.0).round() as usize;
                let post = (config.epoch_post_ms * fs / 1000.0).round() as usize;
                let epochs = slice_epochs(&filtered.samples, triggers, pre, post);
                if epochs.is_empty() {
                    return Err(Error::InsufficientData(format!(
                        "no complete P300 epochs among {} triggers",
                        triggers.len()
                    )));
                }
                evoked_average(&epochs, fs, pre)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityFlag {
    /// `rho == 1`: the windowed variance never changed.
    StationaryNoise,
    /// Fewer window positions than samples per window.
    FewWindowPositions,
    /// The evoked reference averages fewer than ten trials.
    FewReferenceTrials,
}

impl QualityFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            QualityFlag::StationaryNoise => "stationary_noise",
            QualityFlag::FewWindowPositions => "few_window_positions",
            QualityFlag::FewReferenceTrials => "few_reference_trials",
        }
    }
}

impl std::str::FromStr for QualityFlag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stationary_noise" => Ok(QualityFlag::StationaryNoise),
            "few_window_positions" => Ok(QualityFlag::FewWindowPositions),
            "few_reference_trials" => Ok(QualityFlag::FewReferenceTrials),
            other => Err(Error::InvalidInput(format!("unknown quality flag {other:?}"))),
        }
    }
}

/// One recording analysed under one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub subject: String,
    pub task: String,
    pub channel: String,
    pub scenario: Scenario,
    pub domain_mode: DomainMode,
    pub snr_linear: f64,
    pub snr_db: f64,
    pub wall_linear: f64,
    pub wall_db: f64,
    pub rho: f64,
    pub sigma2_min: f64,
    pub sigma2_max: f64,
    pub sigma2_nominal: f64,
    /// Mean power of the whole filtered recording, the SNR denominator.
    pub sigma2_global: f64,
    pub t_time: f64,
    pub t_freq: f64,
    pub c_max: f64,
    pub tau_samples: usize,
    pub detectable: bool,
    pub flags: Vec<QualityFlag>,
}

impl AnalysisResult {
    pub fn margin_db(&self) -> f64 {
        self.snr_db - self.wall_db
    }
}

/// Runs the three-step procedure on one recording: wall from the filtered
/// recording's variance extrema, SNR from the filtered reference peak over
/// the recording's mean power, and the comparison.
pub fn analyze_recording(
    recording: &Recording,
    reference: &P300Reference,
    scenario: Scenario,
    config: &AnalysisConfig,
) -> Result<AnalysisResult> {
    config.validate()?;
    let fs = recording.sample_rate_hz;
    let chain = scenario_chain_with(scenario, fs, &config.filter)?;
    let filtered = apply_chain(&chain, recording)?;

    let discard = recording.samples_for(config.discard_start_s);
    let tau = recording.samples_for(config.tau_s);
    if discard + tau > filtered.samples.len() {
        return Err(Error::InsufficientData(format!(
            "{} samples cannot cover a {discard}-sample discard plus a {tau}-sample window",
            filtered.samples.len()
        )));
    }
    let d = &filtered.samples[discard..];

    let profile = noise_profile_with_floor(d, tau, config.variance_floor)?;
    let sigma2_global = noise_variance_global(d)?;
    if !(sigma2_global > config.variance_floor) {
        return Err(Error::DegenerateNoise {
            sigma2_min: sigma2_global,
            floor: config.variance_floor,
        });
    }

    let ep = reference.filtered_evoked(&chain, config)?;
    let power = peak_signal_power(&ep, &config.peak_window, config.reduction_fraction)?;
    let mode = config.mode_for(scenario);
    let t_c = match mode {
        DomainMode::Time => power.t_time,
        DomainMode::Frequency => power.t_freq,
    };
    let snr = snr_ratio(t_c, sigma2_global)?;
    let wall = profile.snr_wall();
    let verdict = decide_detectable(snr, wall);

    let mut flags = Vec::new();
    if profile.rho == 1.0 {
        flags.push(QualityFlag::StationaryNoise);
    }
    if profile.window_positions < tau {
        flags.push(QualityFlag::FewWindowPositions);
    }
    if ep.trials < 10 {
        if let P300Reference::Recording { .. } = reference {
            flags.push(QualityFlag::FewReferenceTrials);
        }
    }

    Ok(AnalysisResult {
        subject: recording.subject.clone(),
        task: recording.task.clone(),
        channel: recording.channel.clone(),
        scenario,
        domain_mode: mode,
        snr_linear: snr,
        snr_db: to_db_lossy(snr),
        wall_linear: wall,
        wall_db: to_db_lossy(wall),
        rho: profile.rho,
        sigma2_min: profile.sigma2_min,
        sigma2_max: profile.sigma2_max,
        sigma2_nominal: profile.sigma2_nominal,
        sigma2_global,
        t_time: power.t_time,
        t_freq: power.t_freq,
        c_max: power.c_max,
        tau_samples: tau,
        detectable: verdict.detectable,
        flags,
    })
}

/// One-sided paired t-test of `snr_db - wall_db > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub n: usize,
    pub dof: usize,
    pub mean_difference_db: f64,
    pub sd_difference_db: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub significant: bool,
    /// All differences were identical; `t` is infinite (or zero) by limit.
    pub zero_variance: bool,
}

/// One-sided one-sample t-test of `mean(differences) > 0`.
///
/// Differences are summed in sorted order so the outcome does not depend on
/// the order subjects were listed in.
pub fn paired_t_test(differences: &[f64], alpha: f64) -> Result<TTest> {
    let n = differences.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "t-test needs at least 2 subjects, got {n}"
        )));
    }
    if let Some(v) = differences.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite difference {v}")));
    }
    let mut sorted = differences.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let mut deviations: Vec<f64> = sorted.iter().map(|v| (v - mean) * (v - mean)).collect();
    deviations.sort_by(f64::total_cmp);
    let sd = (deviations.iter().sum::<f64>() / (n - 1) as f64).sqrt();
    let dof = n - 1;
    let zero_variance = sorted.first() == sorted.last();
    let (t, p) = if zero_variance {
        match mean.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Greater) => (f64::INFINITY, 0.0),
            Some(std::cmp::Ordering::Less) => (f64::NEG_INFINITY, 1.0),
            _ => (0.0, 0.5),
        }
    } else {
        let t = mean / (sd / (n as f64).sqrt());
        (t, t_tail(t, dof as f64)?)
    };
    Ok(TTest {
        n,
        dof,
        mean_difference_db: mean,
        sd_difference_db: sd,
        t_statistic: t,
        p_value: p,
        significant: p < alpha,
        zero_variance,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub subject: String,
    pub task: String,
    pub scenario: Option<Scenario>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task: String,
    pub scenario: Scenario,
    pub results: Vec<AnalysisResult>,
    pub mean_snr_db: f64,
    pub mean_wall_db: f64,
    pub detectable_count: usize,
    pub alpha: f64,
    /// `None` when fewer than two subjects had usable differences.
    pub test: Option<TTest>,
    /// Subjects dropped from this cell, with reasons.
    pub excluded: Vec<Exclusion>,
}

impl TaskSummary {
    pub fn significant(&self) -> bool {
        self.test.map_or(false, |t| t.significant)
    }

    pub fn n(&self) -> usize {
        self.results.len()
    }
}

fn finite_mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

/// Aggregates one task under one scenario and tests whether the SNR lies
/// significantly above the wall across subjects.
///
/// Rows with a non-finite dB difference (a zero wall or zero SNR) cannot
/// enter the t-test; they stay in `results` but are listed in `excluded`.
pub fn summarize_task(results: &[AnalysisResult], alpha: f64) -> Result<TaskSummary> {
    let first = results
        .first()
        .ok_or_else(|| Error::InsufficientData("no results to summarize".into()))?;
    if let Some(other) = results
        .iter()
        .find(|r| r.task != first.task || r.scenario != first.scenario)
    {
        return Err(Error::InvalidInput(format!(
            "mixed cells: {}/{} and {}/{}",
            first.task, first.scenario, other.task, other.scenario
        )));
    }
    let mut excluded = Vec::new();
    let mut differences = Vec::new();
    for r in results {
        let d = r.margin_db();
        if d.is_finite() {
            differences.push(d);
        } else {
            excluded.push(Exclusion {
                subject: r.subject.clone(),
                task: r.task.clone(),
                scenario: Some(r.scenario),
                reason: format!("non-finite dB difference (snr {} dB, wall {} dB)", r.snr_db, r.wall_db),
            });
        }
    }
    let test = paired_t_test(&differences, alpha)?;
    Ok(TaskSummary {
        task: first.task.clone(),
        scenario: first.scenario,
        results: results.to_vec(),
        mean_snr_db: finite_mean(results.iter().map(|r| r.snr_db)),
        mean_wall_db: finite_mean(results.iter().map(|r| r.wall_db)),
        detectable_count: results.iter().filter(|r| r.detectable).count(),
        alpha,
        test: Some(test),
        excluded,
    })
}

/// A recording of one subject performing one task.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub recordings: Vec<Recording>,
    /// Conscious-signal reference per subject id.
    pub references: BTreeMap<String, P300Reference>,
    /// Recordings dropped before analysis (ingestion failures, manifest exclusions).
    pub exclusions: Vec<Exclusion>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutcome {
    pub summaries: Vec<TaskSummary>,
    /// Every result row, in dataset order then scenario order.
    pub results: Vec<AnalysisResult>,
    pub exclusions: Vec<Exclusion>,
}

/// Analyses every recording under every scenario and summarizes each
/// task x scenario cell. Per-recording failures become exclusions.
pub fn run_study(dataset: &Dataset, scenarios: &[Scenario], config: &AnalysisConfig) -> Result<StudyOutcome> {
    config.validate()?;
    let jobs: Vec<(&Recording, Scenario)> = dataset
        .recordings
        .iter()
        .flat_map(|r| scenarios.iter().map(move |&s| (r, s)))
        .collect();

    let outcomes: Vec<std::result::Result<AnalysisResult, Exclusion>> = jobs
        .par_iter()
        .map(|&(rec, scenario)| {
            let exclusion = |reason: String| Exclusion {
                subject: rec.subject.clone(),
                task: rec.task.clone(),
                scenario: Some(scenario),
                reason,
            };
            let reference = dataset
                .references
                .get(&rec.subject)
                .ok_or_else(|| exclusion("missing P300 reference".into()))?;
            analyze_recording(rec, reference, scenario, config).map_err(|e| exclusion(e.to_string()))
        })
        .collect();

    let mut results = Vec::new();
    let mut exclusions = dataset.exclusions.clone();
    for o in outcomes {
        match o {
            Ok(r) => results.push(r),
            Err(e) => exclusions.push(e),
        }
    }

    // tasks in order of first appearance
    let mut tasks: Vec<&str> = Vec::new();
    for r in &dataset.recordings {
        if !tasks.contains(&r.task.as_str()) {
            tasks.push(&r.task);
        }
    }

    let mut summaries = Vec::with_capacity(tasks.len() * scenarios.len());
    for task in &tasks {
        for &scenario in scenarios {
            let cell: Vec<AnalysisResult> = results
                .iter()
                .filter(|r| r.task == *task && r.scenario == scenario)
                .cloned()
                .collect();
            let cell_exclusions: Vec<Exclusion> = exclusions
                .iter()
                .filter(|e| e.task == *task && e.scenario.map_or(true, |s| s == scenario))
                .cloned()
                .collect();
            let summary = match summarize_task(&cell, config.alpha) {
                Ok(mut s) => {
                    s.excluded.extend(cell_exclusions);
                    s
                }
                Err(Error::InsufficientData(_)) => TaskSummary {
                    task: task.to_string(),
                    scenario,
                    mean_snr_db: finite_mean(cell.iter().map(|r| r.snr_db)),
                    mean_wall_db: finite_mean(cell.iter().map(|r| r.wall_db)),
                    detectable_count: cell.iter().filter(|r| r.detectable).count(),
                    results: cell,
                    alpha: config.alpha,
                    test: None,
                    excluded: cell_exclusions,
                },
                Err(e) => return Err(e),
            };
            summaries.push(summary);
        }
    }

    Ok(StudyOutcome {
        summaries,
        results,
        exclusions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn result_row(subject: &str, snr_db: f64, wall_db: f64) -> AnalysisResult {
        AnalysisResult {
            subject: subject.into(),
            task: "sudoku".into(),
            channel: "cz".into(),
            scenario: Scenario::C,
            domain_mode: DomainMode::Frequency,
            snr_linear: 10f64.powf(snr_db / 10.0),
            snr_db,
            wall_linear: 10f64.powf(wall_db / 10.0),
            wall_db,
            rho: 1.5,
            sigma2_min: 1.0,
            sigma2_max: 2.25,
            sigma2_nominal: 1.5,
            sigma2_global: 1.6,
            t_time: 1.0,
            t_freq: 0.6,
            c_max: 1.0,
            tau_samples: 250,
            detectable: snr_db > wall_db,
            flags: vec![],
        }
    }

    #[test]
    fn t_test_examples() {
        let t = paired_t_test(&[0.0, 0.0, 0.0], 0.05).unwrap();
        assert_eq!((t.t_statistic, t.p_value, t.significant), (0.0, 0.5, false));

        let t = paired_t_test(&[3.0, 3.0, 3.0], 0.05).unwrap();
        assert!(t.zero_variance && t.significant);
        assert_eq!(t.p_value, 0.0);

        let t = paired_t_test(&[1.0, 2.0, 0.5, 1.5], 0.05).unwrap();
        assert_relative_eq!(t.t_statistic, 3.872_983_346_207_417, max_relative = 1e-12);
        assert_eq!(t.dof, 3);
        assert!(t.significant);

        assert!(matches!(paired_t_test(&[1.0], 0.05), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn summary_rejects_mixed_cells() {
        let mut b = result_row("s2", 1.0, 0.0);
        b.task = "reading".into();
        assert!(summarize_task(&[result_row("s1", 1.0, 0.0), b], 0.05).is_err());
        assert!(summarize_task(&[], 0.05).is_err());
    }

    #[test]
    fn summary_excludes_infinite_differences() {
        let rows = vec![
            result_row("s1", 2.0, 1.0),
            result_row("s2", 3.0, 1.5),
            result_row("s3", 2.0, f64::NEG_INFINITY),
        ];
        let s = summarize_task(&rows, 0.05).unwrap();
        assert_eq!(s.test.unwrap().n, 2);
        assert_eq!(s.excluded.len(), 1);
        assert_eq!(s.n(), 3);
    }

    #[test]
    fn config_validation() {
        assert!(AnalysisConfig::default().validate().is_ok());
        let bad = AnalysisConfig { reduction_fraction: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = AnalysisConfig { tau_s: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = AnalysisConfig { alpha: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn domain_defaults() {
        assert_eq!(DomainMode::default_for(Scenario::A), DomainMode::Time);
        assert_eq!(DomainMode::default_for(Scenario::B), DomainMode::Time);
        assert_eq!(DomainMode::default_for(Scenario::C), DomainMode::Frequency);
        assert_eq!(DomainMode::default_for(Scenario::D), DomainMode::Frequency);
        let cfg = AnalysisConfig { domain_mode: Some(DomainMode::Time), ..Default::default() };
        assert_eq!(cfg.mode_for(Scenario::D), DomainMode::Time);
    }

    proptest! {
        #[test]
        fn summary_is_permutation_invariant(
            diffs in prop::collection::vec(-5.0f64..5.0, 2..12),
            rotation in 0usize..12,
        ) {
            let rows: Vec<AnalysisResult> = diffs.iter().enumerate()
                .map(|(i, d)| result_row(&format!("s{i}"), d + 1.0, 1.0))
                .collect();
            let mut shuffled = rows.clone();
            shuffled.rotate_left(rotation % rows.len());
            shuffled.reverse();
            let a = summarize_task(&rows, 0.05).unwrap();
            let b = summarize_task(&shuffled, 0.05).unwrap();
            prop_assert_eq!(a.test, b.test);
            prop_assert_eq!(a.mean_snr_db, b.mean_snr_db);
        }
    }
}
