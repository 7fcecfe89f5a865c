//! Static SVG rendering of trace files: log-scale state norms per
//! controller, per-step hypothesis movement, and the true-model switch
//! signal. Written directly, no display dependency; a convenience view,
//! never load-bearing.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::csvio::{read_trace, ParsedTrace};

const WIDTH: f64 = 900.0;
const PANEL_HEIGHT: f64 = 200.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 30.0;
const PANEL_GAP: f64 = 40.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

struct Panel {
    top: f64,
    y_min: f64,
    y_max: f64,
    title: String,
}

impl Panel {
    fn map(&self, t: f64, horizon: f64, y: f64) -> (f64, f64) {
        let x = MARGIN_LEFT + (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) * t / horizon.max(1.0);
        let span = (self.y_max - self.y_min).max(1e-12);
        let yy = self.top + PANEL_HEIGHT * (1.0 - (y - self.y_min) / span);
        (x, yy)
    }
}

fn polyline(panel: &Panel, horizon: f64, ys: &[f64], color: &str) -> String {
    let mut pts = String::new();
    for (t, &y) in ys.iter().enumerate() {
        let (x, yy) = panel.map(t as f64, horizon, y);
        let _ = write!(pts, "{x:.2},{yy:.2} ");
    }
    format!(
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.4\" points=\"{}\"/>\n",
        pts.trim_end()
    )
}

fn panel_frame(svg: &mut String, panel: &Panel) {
    let _ = write!(
        svg,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n",
        MARGIN_LEFT,
        panel.top,
        WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        PANEL_HEIGHT
    );
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" font-family=\"sans-serif\">{}</text>\n",
        MARGIN_LEFT,
        panel.top - 8.0,
        panel.title
    );
    for (frac, value) in [(0.0, panel.y_max), (1.0, panel.y_min)] {
        let y = panel.top + PANEL_HEIGHT * frac;
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" font-family=\"sans-serif\" text-anchor=\"end\">{:.2}</text>\n",
            MARGIN_LEFT - 6.0,
            y + 4.0,
            value
        );
    }
}

fn label_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().trim_start_matches("trace_").to_string())
        .unwrap_or_else(|| path.display().to_string())
}

/// Renders the traces into one SVG file with three stacked panels.
pub fn emit_plot(trace_paths: &[PathBuf], out: &Path) -> Result<()> {
    if trace_paths.is_empty() {
        bail!("no trace files given");
    }
    let mut traces: Vec<(String, ParsedTrace)> = Vec::new();
    for p in trace_paths {
        traces.push((label_of(p), read_trace(p)?));
    }
    let horizon = traces[0].1.horizon();
    for (label, t) in &traces {
        if t.horizon() != horizon {
            bail!(
                "trace `{label}` has horizon {}, expected {horizon}: traces must share a horizon",
                t.horizon()
            );
        }
    }

    // Panel 1: log10 of the state norm (floored to keep zeros plottable).
    let log_norm = |t: &ParsedTrace| -> Vec<f64> {
        t.norm_x.iter().map(|&v| v.max(1e-16).log10()).collect()
    };
    let all_logs: Vec<Vec<f64>> = traces.iter().map(|(_, t)| log_norm(t)).collect();
    let (mut lo1, mut hi1) = (f64::INFINITY, f64::NEG_INFINITY);
    for ys in &all_logs {
        for &y in ys {
            lo1 = lo1.min(y);
            hi1 = hi1.max(y);
        }
    }
    let pad1 = 0.05 * (hi1 - lo1).max(1.0);

    let (mut lo2, mut hi2) = (0.0f64, f64::NEG_INFINITY);
    for (_, t) in &traces {
        for &y in &t.hyp_step {
            lo2 = lo2.min(y);
            hi2 = hi2.max(y);
        }
    }
    if !hi2.is_finite() || hi2 <= 0.0 {
        hi2 = 1.0;
    }

    let max_mode = traces
        .iter()
        .flat_map(|(_, t)| t.mode.iter().copied())
        .max()
        .unwrap_or(0);

    let panels = [
        Panel {
            top: MARGIN_TOP,
            y_min: lo1 - pad1,
            y_max: hi1 + pad1,
            title: "state norm, log10 |x_t|".into(),
        },
        Panel {
            top: MARGIN_TOP + PANEL_HEIGHT + PANEL_GAP,
            y_min: 0.0,
            y_max: hi2 * 1.05,
            title: "hypothesis movement |θ̂_t − θ̂_{t−1}|_F".into(),
        },
        Panel {
            top: MARGIN_TOP + 2.0 * (PANEL_HEIGHT + PANEL_GAP),
            y_min: -0.2,
            y_max: max_mode as f64 + 0.2,
            title: "true model switches (mode index)".into(),
        },
    ];

    let height = MARGIN_TOP + 3.0 * PANEL_HEIGHT + 2.0 * PANEL_GAP + 40.0;
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for panel in &panels {
        panel_frame(&mut svg, panel);
    }

    for (i, (label, trace)) in traces.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        svg.push_str(&polyline(&panels[0], horizon as f64, &all_logs[i], color));
        svg.push_str(&polyline(&panels[1], horizon as f64, &trace.hyp_step, color));
        let modes: Vec<f64> = trace.mode.iter().map(|&m| m as f64).collect();
        svg.push_str(&polyline(&panels[2], horizon as f64, &modes, color));
        let ly = MARGIN_TOP + 16.0 * i as f64 + 10.0;
        let _ = write!(
            svg,
            "<line x1=\"{0}\" y1=\"{ly}\" x2=\"{1}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n<text x=\"{2}\" y=\"{3}\" font-size=\"12\" font-family=\"sans-serif\">{label}</text>\n",
            WIDTH - MARGIN_RIGHT + 10.0,
            WIDTH - MARGIN_RIGHT + 34.0,
            WIDTH - MARGIN_RIGHT + 40.0,
            ly + 4.0
        );
    }
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\"middle\">t</text>\n</svg>\n",
        MARGIN_LEFT + (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / 2.0,
        height - 10.0
    );

    fs::write(out, svg).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}
