//! Detectability analysis for recordings contaminated by non-stationary noise.
//!
//! The toolkit estimates the noise uncertainty of a filtered recording from
//! sliding-window variance extrema, derives the SNR-wall `rho - 1/rho`, and
//! compares it against the signal-to-noise ratio obtained from an evoked
//! potential. A Monte Carlo simulator checks the closed-form detection
//! probabilities of the energy detector against empirical rates.
//!
//! Module map:
//!
//! * [`filters`]: causal biquad chains for the four pre-processing scenarios.
//! * [`detection`]: Gaussian tail functions, false-alarm/detection
//!   probabilities, sample counts and the SNR-wall.
//! * [`estimation`]: mean power, sliding-window variance, noise profile,
//!   evoked averaging, peak power and band power.
//! * [`pipeline`]: per-recording verdicts, per-task t-tests and study runs.
//! * [`simulation`]: synthetic signals and Monte Carlo detector runs.
//! * [`io`]: ingestion, configuration, result files and SVG charts.

pub mod detection;
pub mod error;
pub mod estimation;
pub mod filters;
pub mod io;
pub mod pipeline;
pub mod simulation;
pub mod special;

pub use detection::{
    decide_detectable, from_db, p_detection, p_detection_robust, p_false_alarm,
    p_false_alarm_robust, required_samples_robust, required_samples_robust_exact,
    required_samples_stationary, snr, snr_wall, to_db, DetectabilityVerdict, DetectionTargets,
    NoiseUncertainty, RobustSampleCount, SampleCount,
};
pub use error::{Error, Result};
pub use estimation::{EvokedPotential, NoiseProfile, SignalPowerEstimate, Spectrum};
pub use filters::{BiquadCoeffs, FilterChain, FilterSettings, Recording, Scenario, Stage};
pub use pipeline::{AnalysisConfig, AnalysisResult, DomainMode, TaskSummary};
pub use special::{q_function, q_inverse, t_tail};
