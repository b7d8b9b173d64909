use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use bciwall::estimation::noise_profile_with_floor;
use bciwall::filters::{apply_chain, scenario_chain_with};
use bciwall::io::{
    load_config, load_recording, load_triggers, render_chart, write_results, write_summaries, ColumnMap,
    DatasetManifest, ResultsMetadata, RunConfig,
};
use bciwall::pipeline::{analyze_recording, run_study, AnalysisResult, P300Reference, TaskSummary};
use bciwall::simulation::{validation_suite, worst_case_separation};
use bciwall::{snr_wall, to_db};

use crate::{parse_column, Cli, Command, InputArgs, Overrides};

fn resolve_config(path: Option<&Path>, o: &Overrides) -> Result<RunConfig> {
    let mut c = match path {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    let a = &mut c.analysis;
    if let Some(v) = o.tau {
        a.tau_s = v;
    }
    if let Some(v) = o.alpha {
        a.alpha = v;
    }
    if let Some(v) = o.reduction_fraction {
        a.reduction_fraction = v;
    }
    if let Some(v) = o.discard {
        a.discard_start_s = v;
    }
    if let Some(v) = o.domain_mode {
        a.domain_mode = Some(v.into());
    }
    if let Some(v) = o.dc_cutoff {
        a.filter.dc_cutoff_hz = v;
    }
    if let Some(v) = o.notch_center {
        a.filter.notch_center_hz = v;
    }
    if let Some(v) = o.notch_bandwidth {
        a.filter.notch_bandwidth_hz = v;
    }
    if let Some(v) = &o.scenarios {
        c.scenarios = v.clone();
    }
    if let Some(v) = o.seed {
        c.seed = v;
    }
    c.validate()?;
    Ok(c)
}

pub fn run(cli: Cli) -> Result<()> {
    let config = resolve_config(cli.config.as_deref(), &cli.overrides)?;
    match cli.command {
        Command::Filter { input, scenario, out } => filter(&input, scenario, out.as_deref(), &config),
        Command::Wall { input, scenario } => wall(&input, scenario, &config),
        Command::Analyze {
            input,
            reference,
            reference_column,
            trigger_column,
            trigger_file,
            out,
        } => {
            let map = ColumnMap {
                sample: parse_column(&reference_column),
                trigger: trigger_file.is_none().then(|| parse_column(&trigger_column)),
                ..ColumnMap::default()
            };
            let loaded = load_recording(&reference, &map, input.sample_rate, input.units())?;
            let triggers = match &trigger_file {
                Some(t) => load_triggers(t)?,
                None => loaded.triggers,
            };
            if triggers.is_empty() {
                bail!("{}: reference has no triggers", reference.display());
            }
            let reference = P300Reference::Recording {
                recording: loaded.recording,
                triggers,
            };
            analyze(&input, &reference, out.as_deref(), &config)
        }
        Command::Study { manifest, out_dir } => study(&manifest, &out_dir, &config),
        Command::Simulate { trials } => simulate(trials.unwrap_or(config.trials), config.seed),
    }
}

fn load(input: &InputArgs) -> Result<bciwall::Recording> {
    let loaded = load_recording(&input.file, &input.column_map(), input.sample_rate, input.units())?;
    let name = input
        .file
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(loaded.recording.with_labels("", name, "ch1"))
}

fn filter(input: &InputArgs, scenario: bciwall::Scenario, out: Option<&Path>, config: &RunConfig) -> Result<()> {
    let rec = load(input)?;
    let chain = scenario_chain_with(scenario, rec.sample_rate_hz, &config.analysis.filter)?;
    let filtered = apply_chain(&chain, &rec)?;
    let mut text = String::from("index,time_s,filtered_uv\n");
    for (i, v) in filtered.samples.iter().enumerate() {
        writeln!(text, "{i},{},{v}", i as f64 / rec.sample_rate_hz)?;
    }
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn wall(input: &InputArgs, scenario: Option<bciwall::Scenario>, config: &RunConfig) -> Result<()> {
    let rec = load(input)?;
    let samples = match scenario {
        Some(s) => {
            let chain = scenario_chain_with(s, rec.sample_rate_hz, &config.analysis.filter)?;
            let filtered = apply_chain(&chain, &rec)?;
            let discard = rec.samples_for(config.analysis.discard_start_s).min(filtered.len());
            filtered.samples[discard..].to_vec()
        }
        None => rec.samples.clone(),
    };
    let tau = rec.samples_for(config.analysis.tau_s);
    let p = noise_profile_with_floor(&samples, tau, config.analysis.variance_floor)?;
    let wall = snr_wall(p.rho)?;
    let wall_db = if wall > 0.0 { to_db(wall)? } else { f64::NEG_INFINITY };
    println!("tau_samples       {}", p.window_samples);
    println!("window_positions  {}", p.window_positions);
    println!("sigma2_min        {:.6} uV^2", p.sigma2_min);
    println!("sigma2_max        {:.6} uV^2", p.sigma2_max);
    println!("sigma2_nominal    {:.6} uV^2", p.sigma2_nominal);
    println!("rho               {:.6}", p.rho);
    println!("snr_wall          {wall:.6}");
    println!("snr_wall_db       {wall_db:.3}");
    Ok(())
}

fn print_results(results: &[AnalysisResult]) {
    println!(
        "{:<10} {:<14} {:>3} {:>9} {:>9} {:>9} {:>8} {:>10}",
        "subject", "task", "sc", "mode", "snr_db", "wall_db", "rho", "detectable"
    );
    for r in results {
        println!(
            "{:<10} {:<14} {:>3} {:>9} {:>9.3} {:>9.3} {:>8.4} {:>10}",
            r.subject,
            r.task,
            r.scenario,
            r.domain_mode,
            r.snr_db,
            r.wall_db,
            r.rho,
            if r.detectable { "yes" } else { "no" }
        );
    }
}

fn analyze(input: &InputArgs, reference: &P300Reference, out: Option<&Path>, config: &RunConfig) -> Result<()> {
    let rec = load(input)?;
    let mut results = Vec::new();
    for &scenario in &config.scenarios {
        results.push(analyze_recording(&rec, reference, scenario, &config.analysis)?);
    }
    print_results(&results);
    if let Some(p) = out {
        let meta = ResultsMetadata::new(config, &[rec.sample_rate_hz], &[], &[])?;
        write_results(&results, p, Some(&meta))?;
    }
    Ok(())
}

fn print_summaries(summaries: &[TaskSummary]) {
    println!(
        "{:<14} {:>3} {:>3} {:>10} {:>10} {:>6} {:>8} {:>8} {:>6}",
        "task", "sc", "n", "snr_db", "wall_db", "det", "t", "p", "sig"
    );
    for s in summaries {
        let (t, p) = s
            .test
            .map_or(("-".to_string(), "-".to_string()), |t| {
                (format!("{:.3}", t.t_statistic), format!("{:.4}", t.p_value))
            });
        println!(
            "{:<14} {:>3} {:>3} {:>10.3} {:>10.3} {:>6} {:>8} {:>8} {:>6}",
            s.task,
            s.scenario,
            s.n(),
            s.mean_snr_db,
            s.mean_wall_db,
            format!("{}/{}", s.detectable_count, s.n()),
            t,
            p,
            if s.significant() { "yes" } else { "no" }
        );
    }
}

fn study(manifest_path: &Path, out_dir: &Path, config: &RunConfig) -> Result<()> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let dataset = manifest.load_dataset()?;
    if dataset.recordings.is_empty() {
        bail!("{}: no recordings left to analyse", manifest_path.display());
    }
    let outcome = run_study(&dataset, &config.scenarios, &config.analysis)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let rates: Vec<f64> = dataset.recordings.iter().map(|r| r.sample_rate_hz).collect();
    let meta = ResultsMetadata::new(config, &rates, &outcome.summaries, &outcome.exclusions)?;
    write_results(&outcome.results, out_dir.join("results.csv"), Some(&meta))?;
    write_summaries(&outcome.summaries, out_dir.join("summaries.csv"))?;
    render_chart(&outcome.summaries, out_dir.join("chart.svg"))?;

    print_summaries(&outcome.summaries);
    for x in &outcome.exclusions {
        let scenario = x.scenario.map_or_else(|| "-".to_string(), |s| s.to_string());
        println!("excluded {} {} {}: {}", x.subject, x.task, scenario, x.reason);
    }
    println!("wrote {}", out_dir.display());
    Ok(())
}

fn simulate(trials: usize, seed: u64) -> Result<()> {
    println!("trials {trials} seed {seed}");
    println!(
        "{:<18} {:>6} {:>7} {:>9} {:>9} {:>9} {:>9} {:>5}",
        "check", "N", "sigma2", "gamma", "analytic", "empirical", "abs_diff", "ok"
    );
    let rows = validation_suite(trials, seed)?;
    for r in &rows {
        println!(
            "{:<18} {:>6} {:>7.2} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {:>5}",
            r.label,
            r.window_n,
            r.sigma2,
            r.gamma,
            r.analytic,
            r.empirical,
            (r.analytic - r.empirical).abs(),
            if r.pass { "yes" } else { "NO" }
        );
    }
    println!();
    println!("worst-case separation at rho = 2 (wall 1.5)");
    for snr in [0.75, 1.5, 3.0] {
        let s = worst_case_separation(snr, 2.0, 1.0, 1000)?;
        println!(
            "snr {:>5.2}: H0 mean {:.4}, H1 mean {:.4}, separable {}",
            snr,
            s.h0_mean,
            s.h1_mean,
            if s.separable { "yes" } else { "no" }
        );
    }
    if rows.iter().any(|r| !r.pass) {
        bail!("some simulated rates fall outside the tolerance");
    }
    Ok(())
}
