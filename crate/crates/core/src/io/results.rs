use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::SCHEMA_VERSION;
use crate::error::{Error, Result};
use crate::filters::{scenario_chain_with, FilterChain, Scenario};
use crate::pipeline::{AnalysisResult, Exclusion, TaskSummary, TTest};

pub const RESULT_COLUMNS: [&str; 21] = [
    "schema_version",
    "subject",
    "task",
    "channel",
    "scenario",
    "domain_mode",
    "snr_linear",
    "snr_db",
    "wall_linear",
    "wall_db",
    "rho",
    "sigma2_min",
    "sigma2_max",
    "sigma2_nominal",
    "sigma2_global",
    "t_time",
    "t_freq",
    "c_max",
    "tau_samples",
    "detectable",
    "flags",
];

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// `results.csv` -> `results.json`.
pub fn companion_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Cell summary as stored in the companion JSON; per-recording rows live in
/// the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub task: String,
    pub scenario: Scenario,
    pub n: usize,
    pub mean_snr_db: f64,
    pub mean_wall_db: f64,
    pub detectable_count: usize,
    pub test: Option<TTest>,
    pub excluded: Vec<Exclusion>,
}

impl From<&TaskSummary> for SummaryRecord {
    fn from(s: &TaskSummary) -> Self {
        Self {
            task: s.task.clone(),
            scenario: s.scenario,
            n: s.n(),
            mean_snr_db: s.mean_snr_db,
            mean_wall_db: s.mean_wall_db,
            detectable_count: s.detectable_count,
            test: s.test,
            excluded: s.excluded.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsMetadata {
    pub schema_version: u32,
    pub config: RunConfig,
    /// Chains actually used, one per scenario and sample rate.
    pub chains: Vec<FilterChain>,
    pub summaries: Vec<SummaryRecord>,
    pub exclusions: Vec<Exclusion>,
}

impl ResultsMetadata {
    pub fn new(
        config: &RunConfig,
        sample_rates_hz: &[f64],
        summaries: &[TaskSummary],
        exclusions: &[Exclusion],
    ) -> Result<Self> {
        let mut rates: Vec<f64> = sample_rates_hz.to_vec();
        rates.sort_by(f64::total_cmp);
        rates.dedup();
        let mut chains = Vec::new();
        for &scenario in &config.scenarios {
            for &fs in &rates {
                chains.push(scenario_chain_with(scenario, fs, &config.analysis.filter)?);
            }
        }
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            config: config.clone(),
            chains,
            summaries: summaries.iter().map(SummaryRecord::from).collect(),
            exclusions: exclusions.to_vec(),
        })
    }
}

fn row(r: &AnalysisResult) -> Vec<String> {
    let flags: Vec<&str> = r.flags.iter().map(|f| f.as_str()).collect();
    // f64 Display prints the shortest string that parses back to the same
    // value, including inf and NaN
    vec![
        SCHEMA_VERSION.to_string(),
        r.subject.clone(),
        r.task.clone(),
        r.channel.clone(),
        r.scenario.to_string(),
        r.domain_mode.to_string(),
        r.snr_linear.to_string(),
        r.snr_db.to_string(),
        r.wall_linear.to_string(),
        r.wall_db.to_string(),
        r.rho.to_string(),
        r.sigma2_min.to_string(),
        r.sigma2_max.to_string(),
        r.sigma2_nominal.to_string(),
        r.sigma2_global.to_string(),
        r.t_time.to_string(),
        r.t_freq.to_string(),
        r.c_max.to_string(),
        r.tau_samples.to_string(),
        r.detectable.to_string(),
        flags.join(";"),
    ]
}

/// Writes one CSV row per result and, when `metadata` is given, the
/// companion JSON next to it.
pub fn write_results(results: &[AnalysisResult], path: impl AsRef<Path>, metadata: Option<&ResultsMetadata>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(RESULT_COLUMNS).map_err(|e| csv_err(path, e))?;
    for r in results {
        w.write_record(row(r)).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    if let Some(meta) = metadata {
        let json_path = companion_path(path);
        let file = File::create(&json_path).map_err(|e| Error::io(&json_path, e))?;
        serde_json::to_writer_pretty(file, meta).map_err(|source| Error::Json {
            path: json_path.clone(),
            source,
        })?;
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(path: &Path, line: usize, name: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("column {name}: cannot parse {raw:?}"),
    })
}

/// Reads a CSV written by [`write_results`].
pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<AnalysisResult>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let header = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(RESULT_COLUMNS) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "unexpected results header".into(),
        });
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let get = |i: usize| &record[i];
        let version: u32 = parse(path, line, "schema_version", get(0))?;
        if version != SCHEMA_VERSION {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("schema version {version} is not supported"),
            });
        }
        let f = |i: usize| parse::<f64>(path, line, RESULT_COLUMNS[i], get(i));
        let flags = if get(20).is_empty() {
            Vec::new()
        } else {
            get(20)
                .split(';')
                .map(|s| parse(path, line, "flags", s))
                .collect::<Result<_>>()?
        };
        out.push(AnalysisResult {
            subject: get(1).to_string(),
            task: get(2).to_string(),
            channel: get(3).to_string(),
            scenario: parse(path, line, "scenario", get(4))?,
            domain_mode: parse(path, line, "domain_mode", get(5))?,
            snr_linear: f(6)?,
            snr_db: f(7)?,
            wall_linear: f(8)?,
            wall_db: f(9)?,
            rho: f(10)?,
            sigma2_min: f(11)?,
            sigma2_max: f(12)?,
            sigma2_nominal: f(13)?,
            sigma2_global: f(14)?,
            t_time: f(15)?,
            t_freq: f(16)?,
            c_max: f(17)?,
            tau_samples: parse(path, line, "tau_samples", get(18))?,
            detectable: parse(path, line, "detectable", get(19))?,
            flags,
        });
    }
    Ok(out)
}

/// One row per task x scenario cell.
pub fn write_summaries(summaries: &[TaskSummary], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "schema_version",
        "task",
        "scenario",
        "n",
        "mean_snr_db",
        "mean_wall_db",
        "detectable_count",
        "t_statistic",
        "p_value",
        "significant",
        "excluded",
    ])
    .map_err(|e| csv_err(path, e))?;
    for s in summaries {
        let (t, p) = s
            .test
            .map_or((String::new(), String::new()), |t| (t.t_statistic.to_string(), t.p_value.to_string()));
        w.write_record([
            SCHEMA_VERSION.to_string(),
            s.task.clone(),
            s.scenario.to_string(),
            s.n().to_string(),
            s.mean_snr_db.to_string(),
            s.mean_wall_db.to_string(),
            s.detectable_count.to_string(),
            t,
            p,
            s.significant().to_string(),
            s.excluded.len().to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
