//! Plain SVG charts: ranked attribution bars and top-k curves.
//!
//! Output is a pure function of the inputs, so regenerated figures are
//! byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::attribution::{AttributionReport, BaselineTag};
use crate::error::{Error, Result};
use crate::evaluation::CURVES_HEADER;

const WIDTH: f64 = 720.0;
const FONT: &str = "font-family=\"sans-serif\" font-size=\"12\"";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveMetric {
    Accuracy,
    Z,
}

impl CurveMetric {
    fn axis_label(self) -> &'static str {
        match self {
            CurveMetric::Accuracy => "test accuracy",
            CurveMetric::Z => "Z = S/sqrt(S+B)",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub baseline: BaselineTag,
    pub k: usize,
    pub accuracy: f64,
    pub z_score: f64,
    pub seed: u64,
}

impl CurvePoint {
    fn value(&self, metric: CurveMetric) -> f64 {
        match metric {
            CurveMetric::Accuracy => self.accuracy,
            CurveMetric::Z => self.z_score,
        }
    }
}

fn color(tag: BaselineTag) -> &'static str {
    match tag {
        BaselineTag::Zero => "#1f77b4",
        BaselineTag::BackgroundUniform => "#d62728",
        BaselineTag::BackgroundWeighted => "#2ca02c",
    }
}

pub fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn svg_open(out: &mut String, height: f64) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\">"
    );
    let _ = writeln!(out, "<rect width=\"{WIDTH}\" height=\"{height}\" fill=\"white\"/>");
}

/// Horizontal signed bars for the `top_n` highest-ranked features.
pub fn ranking_svg(report: &AttributionReport, top_n: usize) -> Result<String> {
    report.validate()?;
    if top_n == 0 || top_n > report.ranking.len() {
        return Err(Error::Argument(format!(
            "top_n = {top_n} outside 1..={}",
            report.ranking.len()
        )));
    }
    let shown = &report.ranking[..top_n];
    let bar_h = 18.0;
    let top = 40.0;
    let height = top + bar_h * top_n as f64 + 40.0;
    let label_w = 130.0;
    let plot_w = WIDTH - label_w - 40.0;
    let max_abs = shown
        .iter()
        .map(|&i| report.scores[i].abs())
        .fold(0.0_f64, f64::max);
    let scale = if max_abs > 0.0 { plot_w / 2.0 / max_abs } else { 0.0 };
    let zero_x = label_w + plot_w / 2.0;

    let mut out = String::new();
    svg_open(&mut out, height);
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"20\" {FONT} text-anchor=\"middle\">Top {top_n} features, baseline {}</text>",
        WIDTH / 2.0,
        escape_xml(report.baseline_tag.label())
    );
    for (row, &i) in shown.iter().enumerate() {
        let y = top + bar_h * row as f64;
        let s = report.scores[i];
        let w = s.abs() * scale;
        let x = if s >= 0.0 { zero_x } else { zero_x - w };
        let fill = if s >= 0.0 { "#d62728" } else { "#1f77b4" };
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" {FONT} text-anchor=\"end\">{}</text>",
            label_w - 6.0,
            y + bar_h * 0.7,
            escape_xml(&report.feature_names[i])
        );
        let _ = writeln!(
            out,
            "<rect class=\"bar\" x=\"{x:.3}\" y=\"{:.1}\" width=\"{w:.3}\" height=\"{:.1}\" fill=\"{fill}\"><title>{} {s:e}</title></rect>",
            y + 2.0,
            bar_h - 4.0,
            escape_xml(&report.feature_names[i])
        );
    }
    let _ = writeln!(
        out,
        "<line x1=\"{zero_x:.1}\" y1=\"{:.1}\" x2=\"{zero_x:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        top - 4.0,
        top + bar_h * top_n as f64 + 4.0
    );
    let _ = writeln!(
        out,
        "<text x=\"{zero_x:.1}\" y=\"{:.1}\" {FONT} text-anchor=\"middle\">mean signed attribution (max |score| {max_abs:.3e})</text>",
        height - 12.0
    );
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render_ranking(report: &AttributionReport, top_n: usize, path: &Path) -> Result<()> {
    let svg = ranking_svg(report, top_n)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

/// Parses a curves CSV as written by [`crate::evaluation::save_curves`].
pub fn parse_curves(text: &str) -> Result<Vec<CurvePoint>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut records = rdr.records();
    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(csv_err(1, 1, e.to_string())),
        None => return Err(Error::Data("curves file is empty".into())),
    };
    let want: Vec<&str> = CURVES_HEADER.split(',').collect();
    if header.iter().collect::<Vec<_>>() != want {
        return Err(csv_err(1, 1, format!("expected header {CURVES_HEADER}")));
    }
    let mut points = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| csv_err(row, 1, e.to_string()))?;
        if rec.len() != want.len() {
            return Err(csv_err(row, rec.len().min(want.len()) + 1, "wrong number of fields".into()));
        }
        let baseline: BaselineTag = rec[0].parse().map_err(|_| csv_err(row, 1, format!("unknown baseline {}", &rec[0])))?;
        let k: usize = rec[1].parse().map_err(|_| csv_err(row, 2, format!("bad k {}", &rec[1])))?;
        let num = |col: usize| -> Result<f64> {
            let v: f64 = rec[col]
                .parse()
                .map_err(|_| csv_err(row, col + 1, format!("bad number {}", &rec[col])))?;
            if !v.is_finite() {
                return Err(csv_err(row, col + 1, format!("non-finite value {}", &rec[col])));
            }
            Ok(v)
        };
        let accuracy = num(2)?;
        let z_score = num(3)?;
        let seed: u64 = rec[4].parse().map_err(|_| csv_err(row, 5, format!("bad seed {}", &rec[4])))?;
        points.push(CurvePoint {
            baseline,
            k,
            accuracy,
            z_score,
            seed,
        });
    }
    if points.is_empty() {
        return Err(Error::Data("curves file has no data rows".into()));
    }
    Ok(points)
}

fn csv_err(row: usize, col: usize, msg: String) -> Error {
    Error::Csv { row, col, msg }
}

/// One polyline per baseline (legend order B0, Bbg, Bbgw), k on the x axis.
pub fn curves_svg(points: &[CurvePoint], metric: CurveMetric) -> Result<String> {
    if points.is_empty() {
        return Err(Error::Data("no curve points to plot".into()));
    }
    if let Some((i, _)) = points.iter().enumerate().find(|(_, p)| !p.value(metric).is_finite()) {
        return Err(Error::Data(format!("non-finite value at data row {}", i + 1)));
    }
    let height = 420.0;
    let (left, right, top, bottom) = (70.0, WIDTH - 130.0, 40.0, height - 50.0);
    let k_min = points.iter().map(|p| p.k).min().unwrap_or(1) as f64;
    let k_max = points.iter().map(|p| p.k).max().unwrap_or(1) as f64;
    let mut v_min = points.iter().map(|p| p.value(metric)).fold(f64::INFINITY, f64::min);
    let mut v_max = points.iter().map(|p| p.value(metric)).fold(f64::NEG_INFINITY, f64::max);
    if v_max - v_min < 1e-9 {
        v_min -= 0.5;
        v_max += 0.5;
    } else {
        let pad = 0.05 * (v_max - v_min);
        v_min -= pad;
        v_max += pad;
    }
    let sx = |k: f64| {
        if k_max > k_min {
            left + (k - k_min) / (k_max - k_min) * (right - left)
        } else {
            (left + right) / 2.0
        }
    };
    let sy = |v: f64| bottom - (v - v_min) / (v_max - v_min) * (bottom - top);

    let mut out = String::new();
    svg_open(&mut out, height);
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"20\" {FONT} text-anchor=\"middle\">{} vs number of top-ranked features</text>",
        WIDTH / 2.0,
        escape_xml(metric.axis_label())
    );
    let _ = writeln!(
        out,
        "<path d=\"M{left} {top} L{left} {bottom} L{right} {bottom}\" fill=\"none\" stroke=\"black\"/>"
    );
    for i in 0..=4 {
        let v = v_min + (v_max - v_min) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" {FONT} text-anchor=\"end\">{v:.3}</text>",
            left - 6.0,
            sy(v) + 4.0
        );
    }
    let mut ks: Vec<usize> = points.iter().map(|p| p.k).collect();
    ks.sort_unstable();
    ks.dedup();
    for &k in &ks {
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" {FONT} text-anchor=\"middle\">{k}</text>",
            sx(k as f64),
            bottom + 16.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" {FONT} text-anchor=\"middle\">k</text>",
        (left + right) / 2.0,
        height - 10.0
    );

    let mut legend_row = 0;
    for tag in BaselineTag::ALL {
        let mut series: Vec<&CurvePoint> = points.iter().filter(|p| p.baseline == tag).collect();
        if series.is_empty() {
            continue;
        }
        series.sort_by_key(|p| p.k);
        let c = color(tag);
        if series.len() > 1 {
            let coords: Vec<String> = series
                .iter()
                .map(|p| format!("{:.2},{:.2}", sx(p.k as f64), sy(p.value(metric))))
                .collect();
            let _ = writeln!(
                out,
                "<polyline class=\"curve\" data-baseline=\"{}\" points=\"{}\" fill=\"none\" stroke=\"{c}\" stroke-width=\"2\"/>",
                tag.label(),
                coords.join(" ")
            );
        }
        for p in &series {
            let _ = writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{c}\"/>",
                sx(p.k as f64),
                sy(p.value(metric))
            );
        }
        let ly = top + 10.0 + 20.0 * legend_row as f64;
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{c}\" stroke-width=\"2\"/>",
            right + 15.0,
            right + 40.0
        );
        let _ = writeln!(
            out,
            "<text class=\"legend\" x=\"{:.1}\" y=\"{:.1}\" {FONT}>{}</text>",
            right + 46.0,
            ly + 4.0,
            tag.label()
        );
        legend_row += 1;
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render_curves(curves_csv: &Path, metric: CurveMetric, path: &Path) -> Result<()> {
    if !curves_csv.exists() {
        return Err(Error::MissingInput(curves_csv.to_path_buf()));
    }
    let text = fs::read_to_string(curves_csv).map_err(|e| Error::io(curves_csv, e))?;
    let svg = curves_svg(&parse_curves(&text)?, metric)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}
