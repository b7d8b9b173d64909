use std::fmt::Write as _;
use std::path::Path;

use bciwall::filters::Scenario;
use bciwall::io::{chart_svg, read_results, render_chart, write_results, DatasetManifest, ResultsMetadata, RunConfig};
use bciwall::pipeline::{run_study, AnalysisConfig};
use bciwall::simulation::{
    embed_conscious_signal, generate_piecewise_gaussian, synthetic_cohort, CohortSpec, ConsciousSignal, Placement,
    SyntheticComposition, VarianceProfile,
};

#[test]
fn cohort_snr_orders_by_band() {
    let d = synthetic_cohort(&CohortSpec::default(), 99).unwrap();
    let out = run_study(&d, &Scenario::ALL, &AnalysisConfig::default()).unwrap();
    assert!(out.exclusions.is_empty());
    assert_eq!(out.summaries.len(), 2 * 4);
    for rec in &d.recordings {
        let snr = |s: Scenario| {
            out.results
                .iter()
                .find(|r| r.subject == rec.subject && r.task == rec.task && r.scenario == s)
                .unwrap()
                .snr_db
        };
        assert!(snr(Scenario::D) >= snr(Scenario::C), "{}", rec.subject);
        assert!(snr(Scenario::C) >= snr(Scenario::A), "{}", rec.subject);
    }
    for s in &out.summaries {
        match s.scenario {
            Scenario::A => assert_eq!(s.detectable_count, 0),
            Scenario::D => {
                assert_eq!(s.detectable_count, 6);
                assert!(s.significant());
            }
            _ => {}
        }
    }
}

fn write_tsv(path: &Path, samples_uv: &[f64], triggers: &[usize]) {
    let mut body = String::from("time\tch1\tch2\ttrigger\n");
    for (i, v) in samples_uv.iter().enumerate() {
        let t = triggers.iter().any(|&o| i >= o && i < o + 10) as u8;
        writeln!(body, "{}\t{:e}\t0\t{}", i as f64 / 250.0, v * 1e-6, t).unwrap();
    }
    std::fs::write(path, body).unwrap();
}

/// Two subjects with two tasks each plus a P300 stimulus recording.
fn two_subject_fixture(dir: &Path) -> std::path::PathBuf {
    let spec = CohortSpec {
        subjects: 2,
        duration_s: 24.0,
        burst_period_s: 6.0,
        ..CohortSpec::default()
    };
    let cohort = synthetic_cohort(&spec, 5).unwrap();
    let mut entries = Vec::new();
    for r in &cohort.recordings {
        let name = format!("{}_{}.tsv", r.subject, r.task);
        write_tsv(&dir.join(&name), &r.samples, &[]);
        entries.push(format!(r#"{{"subject": "{}", "task": "{}", "file": "{name}"}}"#, r.subject, r.task));
    }
    for (k, subject) in ["s01", "s02"].iter().enumerate() {
        let fs = 250.0;
        // stimuli 7 to 13 s apart
        let mut triggers = vec![500usize];
        for i in 0..7 {
            let gap = fs as usize * (7 + (i + k) % 7);
            triggers.push(triggers.last().unwrap() + gap);
        }
        let n = triggers.last().unwrap() + 2000;
        let bg = generate_piecewise_gaussian(&VarianceProfile::uniform(1.0, n).unwrap(), n, 40 + k as u64).unwrap();
        let mut comp = SyntheticComposition::new(bg, vec![0.0; n], None, fs, 0).unwrap();
        for &t in &triggers {
            comp = embed_conscious_signal(comp, ConsciousSignal::p300(8.0), Placement { onset: t, length: 0 }).unwrap();
        }
        let name = format!("{subject}_p300.tsv");
        write_tsv(&dir.join(&name), &comp.composed, &triggers);
        entries.push(format!(
            r#"{{"subject": "{subject}", "kind": "reference", "file": "{name}", "columns": {{"sample": 1, "trigger": 3}}}}"#
        ));
    }
    let manifest = format!(r#"{{"entries": [{}]}}"#, entries.join(",\n"));
    let path = dir.join("manifest.json");
    std::fs::write(&path, manifest).unwrap();
    path
}

#[test]
fn manifest_study_writes_results_and_chart() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = DatasetManifest::load(two_subject_fixture(dir.path())).unwrap();
    let dataset = manifest.load_dataset().unwrap();
    assert_eq!(dataset.recordings.len(), 4);
    assert_eq!(dataset.references.len(), 2);

    let config = RunConfig::default();
    let out = run_study(&dataset, &config.scenarios, &config.analysis).unwrap();
    assert!(out.exclusions.is_empty(), "{:?}", out.exclusions);
    assert_eq!(out.results.len(), 16);
    for r in &out.results {
        // the stimulus recording holds only eight trials
        assert!(r.flags.iter().any(|f| f.as_str() == "few_reference_trials"));
        assert!(r.t_time > 0.0);
    }

    let csv = dir.path().join("results.csv");
    let meta = ResultsMetadata::new(&config, &[250.0], &out.summaries, &out.exclusions).unwrap();
    write_results(&out.results, &csv, Some(&meta)).unwrap();
    let back = read_results(&csv).unwrap();
    assert_eq!(back.len(), out.results.len());
    for (a, b) in back.iter().zip(&out.results) {
        for (x, y) in [(a.snr_db, b.snr_db), (a.wall_db, b.wall_db), (a.rho, b.rho), (a.t_freq, b.t_freq)] {
            assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }

    let svg = dir.path().join("chart.svg");
    render_chart(&out.summaries, &svg).unwrap();
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches(r#"class="panel""#).count(), 4);
    assert_eq!(text, chart_svg(&out.summaries).unwrap());
}

#[test]
fn study_is_deterministic() {
    let d = synthetic_cohort(&CohortSpec { subjects: 3, ..CohortSpec::default() }, 1).unwrap();
    let a = run_study(&d, &[Scenario::B, Scenario::C], &AnalysisConfig::default()).unwrap();
    let b = run_study(&d, &[Scenario::B, Scenario::C], &AnalysisConfig::default()).unwrap();
    assert_eq!(a, b);
}
