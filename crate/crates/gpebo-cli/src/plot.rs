//! Static SVG transient plots from a simulation-mode trace.
//!
//! One run yields 1 + 4n + n figures: `fig01` overlays all parameter
//! estimates; the next 4n figures show one parameter error each; the last n
//! show the state-estimate errors. Error figures carry dashed guide lines at
//! the ±0.05 convergence band. Files are self-contained SVG with no external
//! assets, and rendering is deterministic: byte-identical inputs give
//! byte-identical files.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use gpebo::observer::{error_series, ObserverError, TraceRecord};
use gpebo::plant::TrueParameters;

/// Convergence band drawn on error figures.
pub const ERROR_BAND: f64 = 0.05;

const WIDTH: f64 = 840.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 42.0;
const MARGIN_B: f64 = 54.0;
/// Polylines are decimated to roughly this many points.
const MAX_POINTS: usize = 2000;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// Errors from figure rendering.
#[derive(Debug)]
pub enum PlotError {
    /// Fewer than two nodes: no range to draw. Increase T.
    DegenerateRange {
        nodes: usize,
    },
    Observer(ObserverError),
    Io {
        path: PathBuf,
        source: io::Error,
    },
}

impl fmt::Display for PlotError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlotError::DegenerateRange { nodes } => write!(
                f,
                "trace has {nodes} node(s); need at least 2 to plot a transient — increase T"
            ),
            PlotError::Observer(e) => write!(f, "{e}"),
            PlotError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for PlotError {}

impl From<ObserverError> for PlotError {
    fn from(e: ObserverError) -> Self {
        PlotError::Observer(e)
    }
}

/// Renders the full figure set into `out_dir`, returning the file paths in
/// figure order.
pub fn render_plots(
    trace: &[TraceRecord],
    truth: &TrueParameters,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, PlotError> {
    if trace.len() < 2 {
        return Err(PlotError::DegenerateRange { nodes: trace.len() });
    }
    let series = error_series(trace, truth)?;
    let n = truth.x0.len();
    let dim4 = 4 * n;
    let t: Vec<f64> = trace.iter().map(|r| r.t).collect();

    let mut paths = Vec::with_capacity(1 + dim4 + n);
    let mut fig = 0_usize;
    let mut emit = |svg: String| -> Result<(), PlotError> {
        fig += 1;
        let path = out_dir.join(format!("fig{fig:02}.svg"));
        fs::write(&path, svg).map_err(|source| PlotError::Io {
            path: path.clone(),
            source,
        })?;
        paths.push(path);
        Ok(())
    };

    // fig01: every parameter estimate overlaid
    let estimates: Vec<Vec<f64>> = (0..dim4)
        .map(|i| trace.iter().map(|r| r.theta_hat[i]).collect())
        .collect();
    let labels: Vec<String> = (1..=dim4).map(|i| format!("theta_hat_{i}")).collect();
    emit(chart(
        "Parameter estimates",
        "t [s]",
        "theta_hat_i(t)",
        &t,
        &estimates,
        &labels,
        None,
    ))?;

    // one error figure per parameter
    for i in 0..dim4 {
        emit(chart(
            &format!("Parameter error {}", i + 1),
            "t [s]",
            &format!("theta_hat_{0} - theta_{0}", i + 1),
            &t,
            std::slice::from_ref(&series.theta[i]),
            std::slice::from_ref(&labels[i]),
            Some(ERROR_BAND),
        ))?;
    }

    // one error figure per state component
    for j in 0..n {
        emit(chart(
            &format!("State estimate error {}", j + 1),
            "t [s]",
            &format!("xhat_{0} - x_{0}", j + 1),
            &t,
            std::slice::from_ref(&series.state[j]),
            &[format!("xhat_{0} - x_{0}", j + 1)],
            Some(ERROR_BAND),
        ))?;
    }

    Ok(paths)
}

fn chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    t: &[f64],
    series: &[Vec<f64>],
    labels: &[impl AsRef<str>],
    band: Option<f64>,
) -> String {
    let t_min = t[0];
    let t_max = t[t.len() - 1];
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for &v in s {
            y_min = y_min.min(v);
            y_max = y_max.max(v);
        }
    }
    if let Some(b) = band {
        // keep the band visible even when the curve hugs zero
        y_min = y_min.min(-1.2 * b);
        y_max = y_max.max(1.2 * b);
    }
    if !(y_max - y_min).is_finite() || y_max - y_min < 1e-12 {
        y_min -= 1.0;
        y_max += 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    let (y_min, y_max) = (y_min - pad, y_max + pad);

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = move |tv: f64| MARGIN_L + (tv - t_min) / (t_max - t_min) * plot_w;
    let sy = move |yv: f64| MARGIN_T + (y_max - yv) / (y_max - y_min) * plot_h;

    let mut svg = String::with_capacity(64 * 1024);
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"Menlo, monospace\" font-size=\"13\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n\
         <text x=\"{tx}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{title}</text>\n",
        tx = WIDTH / 2.0,
        title = escape(title),
    );

    // axes frame
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>"
    );

    // ticks
    for i in 0..=6 {
        let tv = t_min + (t_max - t_min) * i as f64 / 6.0;
        let x = sx(tv);
        let _ = write!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{y0:.2}\" x2=\"{x:.2}\" y2=\"{y1:.2}\" stroke=\"#333333\"/>\n\
             <text x=\"{x:.2}\" y=\"{ty:.2}\" text-anchor=\"middle\">{label}</text>\n",
            y0 = MARGIN_T + plot_h,
            y1 = MARGIN_T + plot_h + 6.0,
            ty = MARGIN_T + plot_h + 22.0,
            label = tick_label(tv),
        );
    }
    for i in 0..=5 {
        let yv = y_min + (y_max - y_min) * i as f64 / 5.0;
        let y = sy(yv);
        let _ = write!(
            svg,
            "<line x1=\"{x0:.2}\" y1=\"{y:.2}\" x2=\"{x1:.2}\" y2=\"{y:.2}\" stroke=\"#333333\"/>\n\
             <text x=\"{tx:.2}\" y=\"{ty:.2}\" text-anchor=\"end\">{label}</text>\n",
            x0 = MARGIN_L - 6.0,
            x1 = MARGIN_L,
            tx = MARGIN_L - 10.0,
            ty = y + 4.0,
            label = tick_label(yv),
        );
    }

    // axis labels
    let _ = write!(
        svg,
        "<text x=\"{cx:.2}\" y=\"{by:.2}\" text-anchor=\"middle\">{xl}</text>\n\
         <text x=\"18\" y=\"{cy:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {cy:.2})\">{yl}</text>\n",
        cx = MARGIN_L + plot_w / 2.0,
        by = HEIGHT - 14.0,
        cy = MARGIN_T + plot_h / 2.0,
        xl = escape(x_label),
        yl = escape(y_label),
    );

    // acceptance band guides
    if let Some(b) = band {
        for level in [b, -b] {
            let y = sy(level);
            let _ = writeln!(
                svg,
                "<line class=\"band\" x1=\"{x0:.2}\" y1=\"{y:.2}\" x2=\"{x1:.2}\" y2=\"{y:.2}\" \
                 stroke=\"#999999\" stroke-dasharray=\"6 4\"/>",
                x0 = MARGIN_L,
                x1 = MARGIN_L + plot_w,
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{x:.2}\" y=\"{y:.2}\" fill=\"#777777\">±{b}</text>",
            x = MARGIN_L + 8.0,
            y = sy(band.unwrap()) - 5.0,
        );
    }

    // zero line when it is in range
    if y_min < 0.0 && y_max > 0.0 {
        let y = sy(0.0);
        let _ = writeln!(
            svg,
            "<line x1=\"{x0:.2}\" y1=\"{y:.2}\" x2=\"{x1:.2}\" y2=\"{y:.2}\" \
             stroke=\"#cccccc\"/>",
            x0 = MARGIN_L,
            x1 = MARGIN_L + plot_w,
        );
    }

    // curves, decimated but always keeping the final node
    let stride = (t.len() / MAX_POINTS).max(1);
    for (idx, s) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let mut points = String::new();
        let mut i = 0;
        while i < t.len() {
            let _ = write!(points, "{:.2},{:.2} ", sx(t[i]), sy(s[i]));
            i += stride;
        }
        if (t.len() - 1) % stride != 0 {
            let last = t.len() - 1;
            let _ = write!(points, "{:.2},{:.2} ", sx(t[last]), sy(s[last]));
        }
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{points}\"/>"
        );
    }

    // legend for multi-series figures
    if series.len() > 1 {
        for (idx, label) in labels.iter().enumerate() {
            let color = PALETTE[idx % PALETTE.len()];
            let y = MARGIN_T + 16.0 + 16.0 * idx as f64;
            let _ = write!(
                svg,
                "<line x1=\"{x0:.2}\" y1=\"{y:.2}\" x2=\"{x1:.2}\" y2=\"{y:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
                 <text x=\"{tx:.2}\" y=\"{ty:.2}\">{label}</text>\n",
                x0 = MARGIN_L + plot_w - 150.0,
                x1 = MARGIN_L + plot_w - 126.0,
                tx = MARGIN_L + plot_w - 120.0,
                ty = y + 4.0,
                label = escape(label.as_ref()),
            );
        }
    }

    svg.push_str("</svg>\n");
    svg
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if a >= 1e4 || a < 1e-3 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
