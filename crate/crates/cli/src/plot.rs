//! Self-contained SVG figures from per-epoch rows.
//!
//! Output is a pure function of the input rows; numbers are printed with a
//! fixed precision so equal inputs give byte-identical documents.

use std::fmt::Write as _;
use std::str::FromStr;

use ofgnss_core::geodesy::{ecef_to_enu, geodetic_to_ecef};
use ofgnss_core::GeodeticCoord;
use thiserror::Error;

use crate::records::RecordRow;

pub const TRUTH_COLOR: &str = "yellow";
pub const ESTIMATE_COLOR: &str = "blue";
const FLAG_COLOR: &str = "red";

const WIDTH: f64 = 640.0;
const PANEL_HEIGHT: f64 = 360.0;
const TRACE_PANEL_HEIGHT: f64 = 220.0;
const MARGIN_LEFT: f64 = 90.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;
const TICKS: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("nothing to plot")]
    EmptyInput,
    #[error("bad coordinates in row {index}: {reason}")]
    BadCoordinate { index: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    GroundTrack,
    ErrorVsTime,
    NisVsTime,
    /// Latitude, longitude and altitude against time in three stacked panels.
    Traces,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [Self::GroundTrack, Self::ErrorVsTime, Self::NisVsTime, Self::Traces];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::GroundTrack => "ground_track",
            Self::ErrorVsTime => "error_vs_time",
            Self::NisVsTime => "nis_vs_time",
            Self::Traces => "traces",
        }
    }
}

impl FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown plot kind `{s}` (expected ground_track, error_vs_time, nis_vs_time or traces)"))
    }
}

#[derive(Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let (lo, hi) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Self { lo, hi }.widened()
    }

    fn widened(self) -> Self {
        if self.hi > self.lo {
            self
        } else {
            let pad = (self.lo.abs() * 1e-6).max(0.5);
            Self {
                lo: self.lo - pad,
                hi: self.hi + pad,
            }
        }
    }

    fn span(&self) -> f64 {
        self.hi - self.lo
    }

    fn centred(&self, span: f64) -> Self {
        let mid = 0.5 * (self.lo + self.hi);
        Self {
            lo: mid - 0.5 * span,
            hi: mid + 0.5 * span,
        }
    }

    fn tick_decimals(&self) -> usize {
        let step = self.span() / (TICKS - 1) as f64;
        (-step.log10().floor() + 1.0).clamp(0.0, 9.0) as usize
    }
}

struct Panel {
    x: Range,
    y: Range,
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

impl Panel {
    fn new(x: Range, y: Range, top: f64, height: f64) -> Self {
        Self {
            x,
            y,
            left: MARGIN_LEFT,
            top: top + MARGIN_TOP,
            width: WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
            height: height - MARGIN_TOP - MARGIN_BOTTOM,
        }
    }

    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.lo) / self.x.span() * self.width
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y.lo) / self.y.span() * self.height
    }

    fn axes(&self, svg: &mut String, title: &str, x_label: &str, y_label: &str) {
        let (l, t, b) = (self.left, self.top, self.top + self.height);
        let _ = writeln!(
            svg,
            r#"<rect x="{l:.3}" y="{t:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="black"/>"#,
            self.width, self.height
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="middle" font-size="14">{title}</text>"#,
            l + 0.5 * self.width,
            t - 10.0
        );
        let (xd, yd) = (self.x.tick_decimals(), self.y.tick_decimals());
        for k in 0..TICKS {
            let f = k as f64 / (TICKS - 1) as f64;
            let xv = self.x.lo + f * self.x.span();
            let yv = self.y.lo + f * self.y.span();
            let (x, y) = (self.px(xv), self.py(yv));
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.3}" y1="{b:.3}" x2="{x:.3}" y2="{:.3}" stroke="black"/>"#,
                b + 5.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{x:.3}" y="{:.3}" text-anchor="middle" font-size="11">{xv:.xd$}</text>"#,
                b + 18.0
            );
            let _ = writeln!(
                svg,
                r#"<line x1="{:.3}" y1="{y:.3}" x2="{l:.3}" y2="{y:.3}" stroke="black"/>"#,
                l - 5.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.3}" y="{:.3}" text-anchor="end" font-size="11">{yv:.yd$}</text>"#,
                l - 8.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="middle" font-size="12">{x_label}</text>"#,
            l + 0.5 * self.width,
            b + 38.0
        );
        let (yx, yy) = (l - 75.0, t + 0.5 * self.height);
        let _ = writeln!(
            svg,
            r#"<text x="{yx:.3}" y="{yy:.3}" text-anchor="middle" font-size="12" transform="rotate(-90 {yx:.3} {yy:.3})">{y_label}</text>"#
        );
    }

    fn polyline(&self, svg: &mut String, points: impl IntoIterator<Item = (f64, f64)>, color: &str, id: &str) {
        let mut coords = String::new();
        for (i, (x, y)) in points.into_iter().enumerate() {
            if i > 0 {
                coords.push(' ');
            }
            let _ = write!(coords, "{:.3},{:.3}", self.px(x), self.py(y));
        }
        let _ = writeln!(
            svg,
            r#"<polyline id="{id}" points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>"#
        );
    }

    fn legend(&self, svg: &mut String, entries: &[(&str, &str)]) {
        for (k, (color, label)) in entries.iter().enumerate() {
            let x = self.left + self.width - 130.0;
            let y = self.top + 15.0 + 16.0 * k as f64;
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.3}" y1="{y:.3}" x2="{:.3}" y2="{y:.3}" stroke="{color}" stroke-width="3"/>"#,
                x + 20.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.3}" y="{:.3}" font-size="11">{label}</text>"#,
                x + 26.0,
                y + 4.0
            );
        }
    }
}

fn document(height: f64, body: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {WIDTH:.0} {height:.0}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

fn geodetic(index: usize, lat: f64, lon: f64, alt: f64) -> Result<GeodeticCoord, PlotError> {
    GeodeticCoord::from_degrees(lat, lon, alt).map_err(|e| PlotError::BadCoordinate {
        index,
        reason: e.to_string(),
    })
}

fn ground_track(rows: &[RecordRow]) -> Result<String, PlotError> {
    let r0 = &rows[0];
    let origin = geodetic(0, r0.truth_lat, r0.truth_lon, r0.truth_alt)?;
    let mut truth = Vec::with_capacity(rows.len());
    let mut est = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let t = ecef_to_enu(&geodetic_to_ecef(&geodetic(i, r.truth_lat, r.truth_lon, r.truth_alt)?), &origin);
        let e = ecef_to_enu(&geodetic_to_ecef(&geodetic(i, r.est_lat, r.est_lon, r.est_alt)?), &origin);
        truth.push((t.east, t.north));
        est.push((e.east, e.north));
    }
    let all = || truth.iter().chain(&est);
    let mut x = Range::of(all().map(|p| p.0));
    let mut y = Range::of(all().map(|p| p.1));
    // Equal metres per pixel on both axes.
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = PANEL_HEIGHT * 1.5 - MARGIN_TOP - MARGIN_BOTTOM;
    let scale = (x.span() / plot_w).max(y.span() / plot_h);
    x = x.centred(scale * plot_w);
    y = y.centred(scale * plot_h);

    let panel = Panel::new(x, y, 0.0, PANEL_HEIGHT * 1.5);
    let mut body = String::new();
    panel.axes(&mut body, "ground track", "east (m)", "north (m)");
    panel.polyline(&mut body, truth, TRUTH_COLOR, "truth");
    panel.polyline(&mut body, est, ESTIMATE_COLOR, "estimate");
    panel.legend(&mut body, &[(TRUTH_COLOR, "truth"), (ESTIMATE_COLOR, "estimate")]);
    Ok(document(PANEL_HEIGHT * 1.5, &body))
}

fn error_vs_time(rows: &[RecordRow]) -> String {
    let duration = rows.iter().map(|r| r.epoch).fold(0.0, f64::max);
    let x = Range { lo: 0.0, hi: duration }.widened();
    let y = Range {
        lo: 0.0,
        hi: rows
            .iter()
            .map(|r| r.horizontal_error().max(r.err_up.abs()))
            .fold(0.0, f64::max),
    }
    .widened();
    let panel = Panel::new(x, Range { lo: y.lo.max(0.0), ..y }, 0.0, PANEL_HEIGHT);
    let mut body = String::new();
    panel.axes(&mut body, "position error", "time (s)", "error (m)");
    panel.polyline(&mut body, rows.iter().map(|r| (r.epoch, r.horizontal_error())), ESTIMATE_COLOR, "horizontal");
    panel.polyline(&mut body, rows.iter().map(|r| (r.epoch, r.err_up.abs())), "gray", "vertical");
    panel.legend(&mut body, &[(ESTIMATE_COLOR, "horizontal"), ("gray", "vertical |up|")]);
    document(PANEL_HEIGHT, &body)
}

fn nis_vs_time(rows: &[RecordRow]) -> String {
    let duration = rows.iter().map(|r| r.epoch).fold(0.0, f64::max);
    let x = Range { lo: 0.0, hi: duration }.widened();
    let y = Range {
        lo: 0.0,
        hi: rows.iter().map(|r| r.nis).fold(0.0, f64::max),
    }
    .widened();
    let panel = Panel::new(x, Range { lo: y.lo.max(0.0), ..y }, 0.0, PANEL_HEIGHT);
    let mut body = String::new();
    panel.axes(&mut body, "normalized innovation squared", "time (s)", "NIS");
    panel.polyline(&mut body, rows.iter().map(|r| (r.epoch, r.nis)), ESTIMATE_COLOR, "nis");
    for r in rows.iter().filter(|r| r.flagged) {
        let _ = writeln!(
            body,
            r#"<circle class="flagged" cx="{:.3}" cy="{:.3}" r="3" fill="{FLAG_COLOR}"/>"#,
            panel.px(r.epoch),
            panel.py(r.nis)
        );
    }
    panel.legend(&mut body, &[(ESTIMATE_COLOR, "NIS"), (FLAG_COLOR, "flagged")]);
    document(PANEL_HEIGHT, &body)
}

fn traces(rows: &[RecordRow]) -> String {
    let duration = rows.iter().map(|r| r.epoch).fold(0.0, f64::max);
    let x = Range { lo: 0.0, hi: duration }.widened();
    type Pick = fn(&RecordRow) -> (f64, f64);
    let panels: [(&str, &str, Pick); 3] = [
        ("latitude", "lat (deg)", |r| (r.truth_lat, r.est_lat)),
        ("longitude", "lon (deg)", |r| (r.truth_lon, r.est_lon)),
        ("altitude", "alt (m)", |r| (r.truth_alt, r.est_alt)),
    ];
    let mut body = String::new();
    for (k, (title, label, pick)) in panels.into_iter().enumerate() {
        let y = Range::of(rows.iter().flat_map(|r| {
            let (a, b) = pick(r);
            [a, b]
        }));
        let panel = Panel::new(x, y, k as f64 * TRACE_PANEL_HEIGHT, TRACE_PANEL_HEIGHT);
        let _ = writeln!(body, r#"<g class="panel" id="{title}">"#);
        panel.axes(&mut body, title, "time (s)", label);
        panel.polyline(&mut body, rows.iter().map(|r| (r.epoch, pick(r).0)), TRUTH_COLOR, &format!("{title}-truth"));
        panel.polyline(&mut body, rows.iter().map(|r| (r.epoch, pick(r).1)), ESTIMATE_COLOR, &format!("{title}-estimate"));
        if k == 0 {
            panel.legend(&mut body, &[(TRUTH_COLOR, "truth"), (ESTIMATE_COLOR, "estimate")]);
        }
        body.push_str("</g>\n");
    }
    document(3.0 * TRACE_PANEL_HEIGHT, &body)
}

pub fn emit_plot(rows: &[RecordRow], kind: PlotKind) -> Result<String, PlotError> {
    if rows.is_empty() {
        return Err(PlotError::EmptyInput);
    }
    match kind {
        PlotKind::GroundTrack => ground_track(rows),
        PlotKind::ErrorVsTime => Ok(error_vs_time(rows)),
        PlotKind::NisVsTime => Ok(nis_vs_time(rows)),
        PlotKind::Traces => Ok(traces(rows)),
    }
}
