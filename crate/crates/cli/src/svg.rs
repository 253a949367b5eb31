//! Deterministic static SVG rendering of confidence bands and series.
//!
//! No timestamps, random ids, or external resources: the same inputs always
//! produce the same bytes, and coordinates are rounded to 0.01 px. When
//! several bands are overlaid they paint in argument order, so the last
//! band (the treatment) sits on top of the first (the baseline).

use vbpbb::resample::BandEstimate;
use vbpbb::series::TimeSeries;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const PLOT_WIDTH: f64 = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
const PLOT_HEIGHT: f64 = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;

pub struct BandStyle {
    pub fill: &'static str,
    pub line: &'static str,
    pub opacity: f64,
    pub label: &'static str,
}

pub const GSBB_STYLE: BandStyle = BandStyle {
    fill: "#d62728",
    line: "#7f1d1d",
    opacity: 0.35,
    label: "gsbb",
};

pub const VBPBB_STYLE: BandStyle = BandStyle {
    fill: "#1f77b4",
    line: "#123f5e",
    opacity: 0.45,
    label: "vbpbb",
};

fn coord(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r:.2}")
}

fn escape_xml(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// A tick step of 1, 2, or 5 times a power of ten covering roughly
/// `range / slots`.
fn nice_step(range: f64, slots: f64) -> f64 {
    let raw = (range / slots).max(f64::MIN_POSITIVE);
    let power = 10f64.powf(raw.log10().floor());
    for multiple in [1.0, 2.0, 5.0, 10.0] {
        if multiple * power >= raw {
            return multiple * power;
        }
    }
    10.0 * power
}

struct Frame {
    y_min: f64,
    y_max: f64,
    x_max: f64,
}

impl Frame {
    fn x(&self, i: f64) -> f64 {
        if self.x_max == 0.0 {
            MARGIN_LEFT + PLOT_WIDTH / 2.0
        } else {
            MARGIN_LEFT + i / self.x_max * PLOT_WIDTH
        }
    }

    fn y(&self, v: f64) -> f64 {
        MARGIN_TOP + (self.y_max - v) / (self.y_max - self.y_min) * PLOT_HEIGHT
    }
}

fn document_open(title: &str) -> String {
    format!(
        concat!(
            r#"<svg version="1.1" width="{w}" height="{h}" "#,
            r#"xmlns="http://www.w3.org/2000/svg">"#,
            "\n",
            r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#,
            "\n",
            r##"<text x="{tx}" y="24" font-family="monospace" font-size="16" fill="#222">{title}</text>"##,
            "\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        tx = MARGIN_LEFT,
        title = escape_xml(title),
    )
}

fn axes_and_grid(
    out: &mut String,
    frame: &Frame,
    x_labels: &[(f64, String)],
) {
    out.push_str(&format!(
        r##"<line class="axis" x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="#444" stroke-width="1"/>"##,
        l = coord(MARGIN_LEFT),
        r = coord(WIDTH - MARGIN_RIGHT),
        b = coord(HEIGHT - MARGIN_BOTTOM),
    ));
    out.push('\n');
    out.push_str(&format!(
        r##"<line class="axis" x1="{l}" y1="{t}" x2="{l}" y2="{b}" stroke="#444" stroke-width="1"/>"##,
        l = coord(MARGIN_LEFT),
        t = coord(MARGIN_TOP),
        b = coord(HEIGHT - MARGIN_BOTTOM),
    ));
    out.push('\n');

    let step = nice_step(frame.y_max - frame.y_min, 5.0);
    let mut tick = (frame.y_min / step).ceil() * step;
    while tick <= frame.y_max + 1e-12 {
        let y = coord(frame.y(tick));
        let value = (tick / step).round() * step; // snap away fp residue
        out.push_str(&format!(
            concat!(
                r##"<line class="grid" x1="{l}" y1="{y}" x2="{r}" y2="{y}" stroke="#ddd" stroke-width="0.5"/>"##,
                "\n",
                r##"<text class="ytick" x="{tx}" y="{y}" font-family="monospace" font-size="11" fill="#444" text-anchor="end">{v}</text>"##,
                "\n"
            ),
            l = coord(MARGIN_LEFT),
            r = coord(WIDTH - MARGIN_RIGHT),
            y = y,
            tx = coord(MARGIN_LEFT - 6.0),
            v = format_tick(value),
        ));
        tick += step;
    }

    for (i, label) in x_labels {
        let x = coord(frame.x(*i));
        out.push_str(&format!(
            concat!(
                r##"<line class="xtick" x1="{x}" y1="{b}" x2="{x}" y2="{b2}" stroke="#444" stroke-width="1"/>"##,
                "\n",
                r##"<text x="{x}" y="{ty}" font-family="monospace" font-size="11" fill="#444" text-anchor="middle">{label}</text>"##,
                "\n"
            ),
            x = x,
            b = coord(HEIGHT - MARGIN_BOTTOM),
            b2 = coord(HEIGHT - MARGIN_BOTTOM + 5.0),
            ty = coord(HEIGHT - MARGIN_BOTTOM + 20.0),
            label = escape_xml(label),
        ));
    }
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let formatted = format!("{v:.6}");
    let trimmed = formatted.trim_end_matches('0').trim_end_matches('.');
    trimmed.to_string()
}

fn zero_line(out: &mut String, frame: &Frame) {
    if frame.y_min <= 0.0 && frame.y_max >= 0.0 {
        out.push_str(&format!(
            r##"<line class="zero-line" x1="{l}" y1="{y}" x2="{r}" y2="{y}" stroke="#000" stroke-width="1" stroke-dasharray="4 3"/>"##,
            l = coord(MARGIN_LEFT),
            r = coord(WIDTH - MARGIN_RIGHT),
            y = coord(frame.y(0.0)),
        ));
        out.push('\n');
    }
}

/// Contiguous runs of indices where `missing` is false.
fn present_runs(missing: &[bool]) -> Vec<std::ops::Range<usize>> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &m) in missing.iter().enumerate() {
        match (m, start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                runs.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(s..missing.len());
    }
    runs
}

/// Render one or more bands over a single period: shaded quantile envelope,
/// point-estimate line, zero reference line, calendar-labeled x axis.
pub fn render_band_svg(title: &str, bands: &[(&BandEstimate, &BandStyle)]) -> String {
    let period = bands.first().map(|(b, _)| b.period).unwrap_or(1);
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (band, _) in bands {
        for phase in 0..band.period {
            if !band.missing[phase] {
                y_min = y_min.min(band.lower[phase]);
                y_max = y_max.max(band.upper[phase]);
            }
        }
    }
    if !y_min.is_finite() {
        y_min = -1.0;
        y_max = 1.0;
    }
    y_min = y_min.min(0.0);
    y_max = y_max.max(0.0);
    let pad = ((y_max - y_min) * 0.05).max(1e-9);
    let frame = Frame {
        y_min: y_min - pad,
        y_max: y_max + pad,
        x_max: (period - 1).max(1) as f64,
    };

    let anchor = bands.first().map(|(b, _)| b.anchor_date);
    let ticks = 6.min(period);
    let x_labels: Vec<(f64, String)> = (0..ticks)
        .map(|i| {
            let phase = if ticks == 1 {
                0
            } else {
                i * (period - 1) / (ticks - 1)
            };
            // Month-of-year labels so seasonal peaks read off directly.
            let label = anchor
                .map(|a| (a + chrono::Days::new(phase as u64)).format("%b %d").to_string())
                .unwrap_or_else(|| phase.to_string());
            (phase as f64, label)
        })
        .collect();

    let mut out = document_open(title);
    axes_and_grid(&mut out, &frame, &x_labels);
    zero_line(&mut out, &frame);

    for (band, style) in bands {
        for run in present_runs(&band.missing) {
            let mut d = String::new();
            for (count, phase) in run.clone().enumerate() {
                let verb = if count == 0 { 'M' } else { 'L' };
                d.push_str(&format!(
                    "{verb}{} {} ",
                    coord(frame.x(phase as f64)),
                    coord(frame.y(band.upper[phase]))
                ));
            }
            for phase in run.clone().rev() {
                d.push_str(&format!(
                    "L{} {} ",
                    coord(frame.x(phase as f64)),
                    coord(frame.y(band.lower[phase]))
                ));
            }
            d.push('Z');
            out.push_str(&format!(
                r#"<path class="band band-{label}" d="{d}" fill="{fill}" fill-opacity="{opacity}" stroke="none"/>"#,
                label = style.label,
                d = d,
                fill = style.fill,
                opacity = style.opacity,
            ));
            out.push('\n');
        }
        for run in present_runs(&band.missing) {
            let mut d = String::new();
            for (count, phase) in run.clone().enumerate() {
                let verb = if count == 0 { 'M' } else { 'L' };
                d.push_str(&format!(
                    "{verb}{} {} ",
                    coord(frame.x(phase as f64)),
                    coord(frame.y(band.point[phase]))
                ));
            }
            out.push_str(&format!(
                r#"<path class="point-line point-{label}" d="{d}" fill="none" stroke="{line}" stroke-width="1.5"/>"#,
                label = style.label,
                d = d.trim_end(),
                line = style.line,
            ));
            out.push('\n');
        }
    }

    // Legend, painted in band order.
    for (slot, (_, style)) in bands.iter().enumerate() {
        let y = MARGIN_TOP + 10.0 + 18.0 * slot as f64;
        out.push_str(&format!(
            concat!(
                r#"<rect x="{x}" y="{y}" width="12" height="12" fill="{fill}" fill-opacity="{opacity}"/>"#,
                "\n",
                r##"<text x="{tx}" y="{ty}" font-family="monospace" font-size="12" fill="#222">{label}</text>"##,
                "\n"
            ),
            x = coord(MARGIN_LEFT + 8.0),
            y = coord(y),
            fill = style.fill,
            opacity = style.opacity,
            tx = coord(MARGIN_LEFT + 26.0),
            ty = coord(y + 10.0),
            label = style.label,
        ));
    }

    out.push_str("</svg>\n");
    out
}

/// Render a whole series as a line plot with calendar-labeled x axis;
/// missing stretches break the line.
pub fn render_series_svg(title: &str, series: &TimeSeries) -> String {
    let n = series.len();
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for i in 0..n {
        if let Some(v) = series.value_at(i) {
            y_min = y_min.min(v);
            y_max = y_max.max(v);
        }
    }
    if !y_min.is_finite() {
        y_min = -1.0;
        y_max = 1.0;
    }
    y_min = y_min.min(0.0);
    y_max = y_max.max(0.0);
    let pad = ((y_max - y_min) * 0.05).max(1e-9);
    let frame = Frame {
        y_min: y_min - pad,
        y_max: y_max + pad,
        x_max: (n - 1).max(1) as f64,
    };

    let ticks = 6.min(n);
    let x_labels: Vec<(f64, String)> = (0..ticks)
        .map(|i| {
            let index = if ticks == 1 { 0 } else { i * (n - 1) / (ticks - 1) };
            (index as f64, series.date_at(index).to_string())
        })
        .collect();

    let mut out = document_open(title);
    axes_and_grid(&mut out, &frame, &x_labels);
    zero_line(&mut out, &frame);

    for run in present_runs(series.missing()) {
        let mut d = String::new();
        for (count, i) in run.enumerate() {
            let verb = if count == 0 { 'M' } else { 'L' };
            d.push_str(&format!(
                "{verb}{} {} ",
                coord(frame.x(i as f64)),
                coord(frame.y(series.values()[i]))
            ));
        }
        out.push_str(&format!(
            r##"<path class="series-line" d="{d}" fill="none" stroke="#333" stroke-width="1"/>"##,
            d = d.trim_end(),
        ));
        out.push('\n');
    }

    out.push_str("</svg>\n");
    out
}
