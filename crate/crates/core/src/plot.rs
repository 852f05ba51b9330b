//! Static SVG figures: radius-scaled embedding scatter plots and a dated
//! anomaly timeline. Output is deterministic, with marks written in
//! doc_id order.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use thiserror::Error;

use crate::anomaly::AnomalyReport;
use crate::corpus::date_from_id;
use crate::features::FeatureMatrix;
use crate::tsne::Embedding;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];
const FLAGGED_COLOR: &str = "#d62728";
const NORMAL_COLOR: &str = "#4c72b0";

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("document `{0}` is in the embedding but not in the feature matrix")]
    MissingFeatures(String),
    #[error("embedding has {embedding} documents, feature matrix has {features}")]
    CountMismatch { embedding: usize, features: usize },
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("nothing to plot")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColorBy {
    Year,
    /// doc_ids drawn in the flagged color.
    Flags(BTreeSet<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterSpec {
    pub radius_feature: String,
    pub radius_range: (f64, f64),
    pub color_by: ColorBy,
    pub width: f64,
    pub height: f64,
    pub title: Option<String>,
}

impl ScatterSpec {
    pub fn new(radius_feature: impl Into<String>) -> Self {
        ScatterSpec {
            radius_feature: radius_feature.into(),
            radius_range: (3.0, 18.0),
            color_by: ColorBy::Year,
            width: 720.0,
            height: 720.0,
            title: None,
        }
    }
}

/// Linear map of `value` from `[lo, hi]` onto `range`; the midpoint when
/// the domain is empty.
pub fn scale_radius(value: f64, lo: f64, hi: f64, range: (f64, f64)) -> f64 {
    if hi > lo {
        range.0 + (value - lo) / (hi - lo) * (range.1 - range.0)
    } else {
        0.5 * (range.0 + range.1)
    }
}

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

fn header(out: &mut String, width: f64, height: f64, title: Option<&str>) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#);
    if let Some(t) = title {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
            width / 2.0,
            escape(t)
        );
    }
}

fn axis_map(values: impl Iterator<Item = f64> + Clone, lo_px: f64, hi_px: f64) -> impl Fn(f64) -> f64 {
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    move |v| {
        if hi > lo {
            lo_px + (v - lo) / (hi - lo) * (hi_px - lo_px)
        } else {
            0.5 * (lo_px + hi_px)
        }
    }
}

/// Renders the embedding with one circle per document, sized by the raw
/// value of `spec.radius_feature`.
pub fn render_scatter(embedding: &Embedding, features: &FeatureMatrix, spec: &ScatterSpec) -> Result<String, PlotError> {
    if embedding.doc_ids.is_empty() {
        return Err(PlotError::Empty);
    }
    if embedding.doc_ids.len() != features.nrows() {
        return Err(PlotError::CountMismatch {
            embedding: embedding.doc_ids.len(),
            features: features.nrows(),
        });
    }
    let col = features
        .column_index(&spec.radius_feature)
        .ok_or_else(|| PlotError::UnknownFeature(spec.radius_feature.clone()))?;
    let row_of: HashMap<&str, usize> = features.doc_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let values = embedding
        .doc_ids
        .iter()
        .map(|id| {
            row_of
                .get(id.as_str())
                .map(|&r| features.values[[r, col]])
                .ok_or_else(|| PlotError::MissingFeatures(id.clone()))
        })
        .collect::<Result<Vec<f64>, _>>()?;

    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let margin = spec.radius_range.1 + 12.0;
    let top = if spec.title.is_some() { margin + 20.0 } else { margin };
    let xs = embedding.y.column(0);
    let ys = embedding.y.column(1);
    let map_x = axis_map(xs.iter().copied(), margin, spec.width - margin);
    // screen y grows downward
    let map_y = axis_map(ys.iter().copied(), spec.height - margin, top);

    let years: BTreeSet<i32> = embedding.doc_ids.iter().filter_map(|id| date_from_id(id)).map(|d| d.year()).collect();
    let year_index: HashMap<i32, usize> = years.iter().enumerate().map(|(i, &y)| (y, i)).collect();

    let mut order: Vec<usize> = (0..embedding.doc_ids.len()).collect();
    order.sort_by(|&a, &b| embedding.doc_ids[a].cmp(&embedding.doc_ids[b]));

    let mut out = String::new();
    header(&mut out, spec.width, spec.height, spec.title.as_deref());
    let _ = writeln!(out, r#"<g id="points" stroke="black" stroke-width="0.5" fill-opacity="0.6">"#);
    for i in order {
        let id = &embedding.doc_ids[i];
        let (class, color) = match &spec.color_by {
            ColorBy::Year => {
                let c = date_from_id(id)
                    .and_then(|d| year_index.get(&d.year()))
                    .map_or(PALETTE[7], |&k| PALETTE[k % PALETTE.len()]);
                ("point", c)
            }
            ColorBy::Flags(flagged) if flagged.contains(id) => ("flagged", FLAGGED_COLOR),
            ColorBy::Flags(_) => ("point", NORMAL_COLOR),
        };
        let r = scale_radius(values[i], lo, hi, spec.radius_range);
        let _ = writeln!(
            out,
            r#"<circle class="{class}" cx="{:.3}" cy="{:.3}" r="{:.3}" fill="{color}"><title>{}: {}</title></circle>"#,
            map_x(xs[i]),
            map_y(ys[i]),
            r,
            escape(id),
            values[i]
        );
    }
    out.push_str("</g>\n");

    if spec.color_by == ColorBy::Year && !years.is_empty() {
        out.push_str(r#"<g id="legend" font-family="sans-serif" font-size="11">"#);
        out.push('\n');
        for (k, year) in years.iter().enumerate() {
            let y = 16.0 + 14.0 * k as f64;
            let _ = writeln!(
                out,
                r#"<circle cx="{:.1}" cy="{y:.1}" r="4" fill="{}"/><text x="{:.1}" y="{:.1}">{year}</text>"#,
                spec.width - 60.0,
                PALETTE[k % PALETTE.len()],
                spec.width - 50.0,
                y + 4.0
            );
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn scatter_svg(embedding: &Embedding, features: &FeatureMatrix, spec: &ScatterSpec, out: &Path) -> Result<(), PlotError> {
    fs::write(out, render_scatter(embedding, features, spec)?)?;
    Ok(())
}

fn day_number(d: NaiveDate) -> f64 {
    f64::from(d.num_days_from_ce())
}

/// Renders one mark per document along a date axis, with flagged
/// documents drawn larger and in red, plus a gridline at each new year.
pub fn render_timeline(report: &AnomalyReport) -> Result<String, PlotError> {
    let n = report.doc_ids.len();
    if n == 0 {
        return Err(PlotError::Empty);
    }
    let (width, height) = (900.0, 300.0);
    let (left, right, top, bottom) = (40.0, width - 40.0, 40.0, height - 50.0);
    let first = *report.dates.iter().min().expect("non-empty");
    let last = *report.dates.iter().max().expect("non-empty");
    let map_x = axis_map(report.dates.iter().map(|&d| day_number(d)), left, right);
    let map_y = axis_map(report.scores.iter().copied(), bottom - 10.0, top + 10.0);

    let mut out = String::new();
    header(&mut out, width, height, Some(&format!("{} anomalies by date", report.method)));
    let _ = writeln!(out, r##"<g id="grid" stroke="#cccccc" font-family="sans-serif" font-size="11">"##);
    let _ = writeln!(out, r##"<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="#333333"/>"##);
    if first < last {
        for year in first.year()..=last.year() + 1 {
            let jan1 = NaiveDate::from_ymd_opt(year, 1, 1).expect("valid date");
            if jan1 < first || jan1 > last {
                continue;
            }
            let x = map_x(day_number(jan1));
            let _ = writeln!(
                out,
                r#"<line class="year" x1="{x:.3}" y1="{top}" x2="{x:.3}" y2="{bottom}"/><text x="{x:.3}" y="{:.1}" text-anchor="middle" stroke="none">{year}</text>"#,
                bottom + 16.0
            );
        }
    } else {
        let x = map_x(day_number(first));
        let _ = writeln!(
            out,
            r#"<text x="{x:.3}" y="{:.1}" text-anchor="middle" stroke="none">{}</text>"#,
            bottom + 16.0,
            first.year()
        );
    }
    out.push_str("</g>\n");

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| report.doc_ids[a].cmp(&report.doc_ids[b]));
    out.push_str("<g id=\"marks\">\n");
    for i in order {
        let (class, color, r) = if report.flags[i] {
            ("flagged", FLAGGED_COLOR, 6.0)
        } else {
            ("normal", "#9a9a9a", 3.0)
        };
        let _ = writeln!(
            out,
            r#"<circle class="{class}" cx="{:.3}" cy="{:.3}" r="{r}" fill="{color}"><title>{} ({}): {}</title></circle>"#,
            map_x(day_number(report.dates[i])),
            map_y(report.scores[i]),
            escape(&report.doc_ids[i]),
            report.dates[i].format("%Y-%m-%d"),
            report.scores[i]
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

pub fn timeline_svg(report: &AnomalyReport, out: &Path) -> Result<(), PlotError> {
    fs::write(out, render_timeline(report)?)?;
    Ok(())
}
