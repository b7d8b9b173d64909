//! File formats: recording ingestion, run configuration, dataset manifests,
//! result tables and the summary chart.

mod chart;
mod config;
mod ingest;
mod manifest;
mod results;

pub use chart::{chart_svg, render_chart, AXIS_MAX_DB, AXIS_MIN_DB};
pub use config::{load_config, RunConfig};
pub use ingest::{load_recording, load_triggers, rising_edges, Column, ColumnMap, LoadedRecording, Units};
pub use manifest::{DatasetManifest, EntryKind, ManifestEntry, ManifestExclusion};
pub use results::{
    companion_path, read_results, write_results, write_summaries, ResultsMetadata, RESULT_COLUMNS,
};

/// Version stamped into every CSV row and JSON document this crate writes.
pub const SCHEMA_VERSION: u32 = 1;
