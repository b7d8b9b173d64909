use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ingest::{load_recording, load_triggers, ColumnMap, Units};
use crate::error::{Error, Result};
use crate::pipeline::{Dataset, Exclusion, P300Reference};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    /// A task recording to analyse.
    #[default]
    Task,
    /// A stimulus recording whose evoked average is the subject's reference.
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject: String,
    #[serde(default)]
    pub task: String,
    #[serde(default = "default_channel")]
    pub channel: String,
    #[serde(default)]
    pub kind: EntryKind,
    /// Relative to the manifest root.
    pub file: PathBuf,
    #[serde(default)]
    pub columns: ColumnMap,
    /// Falls back to the manifest-wide rate.
    #[serde(default)]
    pub sample_rate_hz: Option<f64>,
    #[serde(default)]
    pub units: Option<Units>,
    /// Trigger indices in a separate file, for references without a trigger
    /// column.
    #[serde(default)]
    pub trigger_file: Option<PathBuf>,
}

fn default_channel() -> String {
    "ch1".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestExclusion {
    pub subject: String,
    /// `None` excludes every recording of the subject.
    #[serde(default)]
    pub task: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// Base directory of entry files; relative roots resolve against the
    /// manifest's own directory.
    #[serde(default)]
    pub root: PathBuf,
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub units: Units,
    pub entries: Vec<ManifestEntry>,
    #[serde(default)]
    pub exclusions: Vec<ManifestExclusion>,
}

fn default_rate() -> f64 {
    crate::filters::DEFAULT_SAMPLE_RATE_HZ
}

impl DatasetManifest {
    /// Reads a manifest and resolves its root against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: DatasetManifest = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if manifest.root.is_relative() {
            let base = path.parent().unwrap_or_else(|| Path::new("."));
            manifest.root = base.join(&manifest.root);
        }
        Ok(manifest)
    }

    fn resolve(&self, file: &Path) -> PathBuf {
        self.root.join(file)
    }

    fn excluded(&self, entry: &ManifestEntry) -> Option<&ManifestExclusion> {
        self.exclusions.iter().find(|x| {
            x.subject == entry.subject
                && match (&x.task, entry.kind) {
                    (None, _) => true,
                    (Some(t), EntryKind::Task) => *t == entry.task,
                    (Some(_), EntryKind::Reference) => false,
                }
        })
    }

    /// Files exist, task entries are unique per subject/task/channel and each
    /// subject has at most one reference.
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::Config("manifest sample rate must be positive".into()));
        }
        let mut seen = BTreeSet::new();
        let mut references = BTreeSet::new();
        for e in &self.entries {
            for file in std::iter::once(&e.file).chain(e.trigger_file.as_ref()) {
                let full = self.resolve(file);
                if !full.is_file() {
                    return Err(Error::Config(format!(
                        "manifest entry {}/{}: file {} does not exist",
                        e.subject,
                        e.task,
                        full.display()
                    )));
                }
            }
            match e.kind {
                EntryKind::Task => {
                    if e.task.is_empty() {
                        return Err(Error::Config(format!("task entry for {} has no task label", e.subject)));
                    }
                    if !seen.insert((&e.subject, &e.task, &e.channel)) {
                        return Err(Error::Config(format!(
                            "duplicate entry for subject {} task {} channel {}",
                            e.subject, e.task, e.channel
                        )));
                    }
                }
                EntryKind::Reference => {
                    if !references.insert(&e.subject) {
                        return Err(Error::Config(format!("subject {} has two references", e.subject)));
                    }
                }
            }
            if let Some(rate) = e.sample_rate_hz {
                if !(rate > 0.0) {
                    return Err(Error::Config(format!("entry {}/{} has sample rate {rate}", e.subject, e.task)));
                }
            }
        }
        Ok(())
    }

    /// Validates, then ingests every entry. Excluded entries are skipped with
    /// an audit record; entries that fail to load become exclusions too.
    pub fn load_dataset(&self) -> Result<Dataset> {
        self.validate()?;
        let mut exclusions = Vec::new();
        let mut active = Vec::new();
        for e in &self.entries {
            match self.excluded(e) {
                Some(x) => exclusions.push(Exclusion {
                    subject: e.subject.clone(),
                    task: e.task.clone(),
                    scenario: None,
                    reason: x.reason.clone(),
                }),
                None => active.push(e),
            }
        }

        enum Loaded {
            Task(crate::filters::Recording),
            Reference(String, P300Reference),
        }
        let loaded: Vec<std::result::Result<Loaded, Exclusion>> = active
            .par_iter()
            .map(|e| {
                let fail = |err: Error| Exclusion {
                    subject: e.subject.clone(),
                    task: e.task.clone(),
                    scenario: None,
                    reason: err.to_string(),
                };
                let rate = e.sample_rate_hz.unwrap_or(self.sample_rate_hz);
                let units = e.units.unwrap_or(self.units);
                let mut file = load_recording(self.resolve(&e.file), &e.columns, rate, units).map_err(fail)?;
                file.recording = file.recording.with_labels(&e.subject, &e.task, &e.channel);
                match e.kind {
                    EntryKind::Task => Ok(Loaded::Task(file.recording)),
                    EntryKind::Reference => {
                        let triggers = match &e.trigger_file {
                            Some(t) => load_triggers(self.resolve(t)).map_err(fail)?,
                            None => file.triggers,
                        };
                        if triggers.is_empty() {
                            return Err(fail(Error::InvalidInput("reference has no triggers".into())));
                        }
                        Ok(Loaded::Reference(
                            e.subject.clone(),
                            P300Reference::Recording {
                                recording: file.recording,
                                triggers,
                            },
                        ))
                    }
                }
            })
            .collect();

        let mut recordings = Vec::new();
        let mut references = BTreeMap::new();
        for l in loaded {
            match l {
                Ok(Loaded::Task(r)) => recordings.push(r),
                Ok(Loaded::Reference(s, r)) => {
                    references.insert(s, r);
                }
                Err(x) => exclusions.push(x),
            }
        }
        Ok(Dataset {
            recordings,
            references,
            exclusions,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let data = "0\t0.000001\n0\t-0.000001\n0\t0.000002\n0\t0.0\n";
        std::fs::write(dir.path().join("a.tsv"), data).unwrap();
        std::fs::write(dir.path().join("b.tsv"), data).unwrap();
        std::fs::write(dir.path().join("bad.tsv"), "0\t1\n0\tx\n").unwrap();
        std::fs::write(dir.path().join("p.tsv"), "0\t0\t0\t0\n0\t1e-6\t0\t1\n0\t0\t0\t0\n").unwrap();
        let manifest = r#"{
            "entries": [
                {"subject": "s1", "task": "reading", "file": "a.tsv"},
                {"subject": "s1", "task": "sudoku", "file": "bad.tsv"},
                {"subject": "s2", "task": "reading", "file": "b.tsv"},
                {"subject": "s1", "kind": "reference", "file": "p.tsv", "columns": {"sample": 1, "trigger": 3}}
            ],
            "exclusions": [{"subject": "s2", "reason": "electrode displaced"}]
        }"#;
        let path = dir.path().join("m.json");
        std::fs::write(&path, manifest).unwrap();
        (dir, path)
    }

    #[test]
    fn loads_with_exclusions() {
        let (_dir, path) = fixture();
        let m = DatasetManifest::load(&path).unwrap();
        let d = m.load_dataset().unwrap();
        assert_eq!(d.recordings.len(), 1);
        assert_eq!(d.recordings[0].subject, "s1");
        assert!((d.recordings[0].samples[2] - 2.0).abs() < 1e-9);
        assert_eq!(d.exclusions.len(), 2);
        assert!(d.exclusions.iter().any(|x| x.reason == "electrode displaced"));
        assert!(d.exclusions.iter().any(|x| x.task == "sudoku" && x.reason.contains(":2:")));
        match &d.references["s1"] {
            P300Reference::Recording { triggers, .. } => assert_eq!(triggers, &vec![1]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation_failures() {
        let (dir, path) = fixture();
        let mut m = DatasetManifest::load(&path).unwrap();
        m.entries[2].subject = "s1".into();
        assert!(m.validate().is_err(), "duplicate subject/task");
        let mut m = DatasetManifest::load(&path).unwrap();
        m.entries[0].file = "missing.tsv".into();
        assert!(m.validate().is_err());
        let mut m = DatasetManifest::load(&path).unwrap();
        let mut extra = m.entries[3].clone();
        extra.file = "a.tsv".into();
        m.entries.push(extra);
        assert!(m.validate().is_err(), "second reference");
        drop(dir);
    }
}
