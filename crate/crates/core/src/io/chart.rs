use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::filters::Scenario;
use crate::pipeline::TaskSummary;

pub const AXIS_MIN_DB: f64 = -15.0;
pub const AXIS_MAX_DB: f64 = 15.0;

const WIDTH: f64 = 720.0;
const LEFT: f64 = 170.0;
const RIGHT: f64 = 690.0;
const ROW: f64 = 26.0;
const PANEL_HEAD: f64 = 34.0;
const PANEL_FOOT: f64 = 34.0;
const TOP: f64 = 40.0;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn x_of(db: f64) -> f64 {
    LEFT + (db - AXIS_MIN_DB) / (AXIS_MAX_DB - AXIS_MIN_DB) * (RIGHT - LEFT)
}

/// Clamped x position and whether the value overflowed (-1 low, 1 high).
fn place(db: f64) -> (f64, i8) {
    if db > AXIS_MAX_DB {
        (x_of(AXIS_MAX_DB), 1)
    } else if db < AXIS_MIN_DB {
        (x_of(AXIS_MIN_DB), -1)
    } else {
        (x_of(db), 0)
    }
}

fn marker(svg: &mut String, class: &str, db: f64, y: f64) {
    if db.is_nan() {
        return;
    }
    let (x, over) = place(db);
    match class {
        "snr" => writeln!(svg, r#"<circle class="snr" cx="{x:.1}" cy="{y:.1}" r="5"/>"#),
        _ => writeln!(
            svg,
            r#"<rect class="wall" x="{:.1}" y="{:.1}" width="9" height="9"/>"#,
            x - 4.5,
            y - 4.5
        ),
    }
    .unwrap();
    if over != 0 {
        let dir = over as f64;
        let tip = x + dir * 14.0;
        let base = x + dir * 7.0;
        writeln!(
            svg,
            r#"<polygon class="overflow" points="{base:.1},{:.1} {tip:.1},{y:.1} {base:.1},{:.1}"/>"#,
            y - 5.0,
            y + 5.0
        )
        .unwrap();
    }
}

/// SVG text of the summary chart: one panel per scenario, one row per task
/// with the mean SNR (circle) and mean SNR-wall (square) in dB.
pub fn chart_svg(summaries: &[TaskSummary]) -> Result<String> {
    if summaries.is_empty() {
        return Err(Error::InvalidInput("chart needs at least one summary".into()));
    }
    let mut scenarios: Vec<Scenario> = summaries.iter().map(|s| s.scenario).collect();
    scenarios.sort();
    scenarios.dedup();

    let panels: Vec<(Scenario, Vec<&TaskSummary>)> = scenarios
        .iter()
        .map(|&sc| (sc, summaries.iter().filter(|s| s.scenario == sc).collect()))
        .collect();
    let height = TOP
        + panels
            .iter()
            .map(|(_, rows)| PANEL_HEAD + ROW * rows.len() as f64 + PANEL_FOOT)
            .sum::<f64>();

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    svg.push_str(
        "<style>.snr,.legend-snr{fill:#1f5fbf}.wall,.legend-wall{fill:#d04a02}.overflow{fill:#555}.axis{stroke:#333}.grid{stroke:#ccc}.zero{stroke:#888;stroke-dasharray:4 3}</style>\n",
    );
    writeln!(
        svg,
        r#"<g class="legend"><circle cx="{LEFT}" cy="16" r="5" class="legend-snr"/><text x="{}" y="20">mean SNR (dB)</text><rect x="{}" y="11.5" width="9" height="9" class="legend-wall"/><text x="{}" y="20">mean SNR-wall (dB)</text></g>"#,
        LEFT + 10.0,
        LEFT + 130.0,
        LEFT + 145.0
    )
    .unwrap();

    let mut y0 = TOP;
    for (scenario, rows) in &panels {
        writeln!(svg, r#"<g class="panel" data-scenario="{scenario}">"#).unwrap();
        writeln!(
            svg,
            r#"<text x="10" y="{:.1}" font-weight="bold">Scenario {scenario}: {}</text>"#,
            y0 + 18.0,
            escape(scenario.describe())
        )
        .unwrap();
        let top = y0 + PANEL_HEAD;
        let bottom = top + ROW * rows.len() as f64;
        let mut db = AXIS_MIN_DB;
        while db <= AXIS_MAX_DB {
            let x = x_of(db);
            let class = if db == 0.0 { "zero" } else { "grid" };
            writeln!(svg, r#"<line class="{class}" x1="{x:.1}" y1="{top:.1}" x2="{x:.1}" y2="{bottom:.1}"/>"#).unwrap();
            writeln!(
                svg,
                r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{db}</text>"#,
                bottom + 16.0
            )
            .unwrap();
            db += 5.0;
        }
        writeln!(
            svg,
            r#"<line class="axis" x1="{LEFT}" y1="{bottom:.1}" x2="{RIGHT}" y2="{bottom:.1}"/>"#
        )
        .unwrap();
        for (i, s) in rows.iter().enumerate() {
            let y = top + ROW * (i as f64 + 0.5);
            writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                LEFT - 12.0,
                y + 4.0,
                escape(&s.task)
            )
            .unwrap();
            if !s.mean_snr_db.is_nan() && !s.mean_wall_db.is_nan() {
                let (a, _) = place(s.mean_snr_db);
                let (b, _) = place(s.mean_wall_db);
                writeln!(svg, r#"<line class="grid" x1="{a:.1}" y1="{y:.1}" x2="{b:.1}" y2="{y:.1}"/>"#).unwrap();
            }
            marker(&mut svg, "wall", s.mean_wall_db, y);
            marker(&mut svg, "snr", s.mean_snr_db, y);
        }
        svg.push_str("</g>\n");
        y0 = bottom + PANEL_FOOT;
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn render_chart(summaries: &[TaskSummary], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let svg = chart_svg(summaries)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
