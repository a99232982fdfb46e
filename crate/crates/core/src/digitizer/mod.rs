//! Cycle-graph digitization: strip plot objects, calibrate the axes, split
//! data lines by color, trace them column by column and drop Coulombic
//! efficiency curves.

mod annotation;
mod calibrate;
mod ce;
mod cluster;
mod detect;
mod image;
mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::GraphMetadata;

pub use annotation::{AxisId, LegendEntry, ObjectBox, ObjectKind, PixelBox, PlotAnnotation, Tick};
pub use calibrate::{calibrate_axes, AxisMap, AxisMaps};
pub use ce::{is_ce_label, looks_like_ce, remove_ce};
pub use cluster::{
    dbscan_weighted, multi_run_fraction, rgb_distance, rgb_f, separate_pixels, separate_series, PixelCluster,
};
pub use detect::{AnnotationFileDetector, Detector, RuleBasedDetector};
pub use image::{PlotImage, Rgb, WHITE};
pub use trace::{trace_series, Axis, CycleSeries};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DigitizeError {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),
    #[error("detector unavailable: {0}")]
    DetectorUnavailable(String),
    #[error("no axis frame found")]
    NoAxesFound,
    #[error("ticks on {axis:?} do not determine a scale")]
    DegenerateTicks { axis: AxisId },
    #[error("ticks on {axis:?} are not linear (residual {residual:.2} px)")]
    NonLinearAxis { axis: AxisId, residual: f64 },
    #[error("series not separable by color: {0}")]
    ColorAmbiguity(String),
    #[error("no data pixels")]
    NoDataPixels,
    #[error("too few points to trace ({0})")]
    TooFewPoints(usize),
    #[error("series attributed to a right axis the plot does not have")]
    MissingRightAxis,
    #[error("io: {0}")]
    Io(String),
}

/// A graph excluded from the database, with the reason.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("unextractable: {cause}")]
pub struct Unextractable {
    pub cause: DigitizeError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DigitizerConfig {
    /// DBSCAN neighborhood radius in RGB space.
    pub eps: f64,
    pub min_pts: usize,
    /// Pixels whose darkest channel is at least this are background.
    pub background_min: u8,
    pub min_cluster_pixels: usize,
    /// Line colors closer than this make the graph unextractable.
    pub ambiguity_threshold: f64,
    pub multi_run_gap: u32,
    pub multi_run_fraction: f64,
    pub ce_burn_in: u32,
    pub ce_band: [f64; 2],
    pub ce_fraction: f64,
    /// Farthest a cluster color may be from a legend swatch to take its label.
    pub legend_match_distance: f64,
}

impl Default for DigitizerConfig {
    fn default() -> Self {
        Self {
            eps: 24.0,
            min_pts: 12,
            background_min: 245,
            min_cluster_pixels: 20,
            ambiguity_threshold: 40.0,
            multi_run_gap: 3,
            multi_run_fraction: 0.25,
            ce_burn_in: 5,
            ce_band: [95.0, 101.0],
            ce_fraction: 0.9,
            legend_match_distance: 80.0,
        }
    }
}

/// Sets every pixel inside any annotated box to white.
pub fn strip_objects(image: &PlotImage, annotation: &PlotAnnotation) -> PlotImage {
    let mut out = image.clone();
    for b in &annotation.object_boxes {
        let r = b.bounds;
        for y in r.y0..r.y1.min(image.height()) {
            for x in r.x0..r.x1.min(image.width()) {
                out.set(x, y, WHITE);
            }
        }
    }
    out
}

/// Legend label per cluster: greedy nearest swatch within the match
/// distance, each label used once; the rest are numbered.
fn label_clusters(clusters: &[PixelCluster], legend: &[LegendEntry], cfg: &DigitizerConfig) -> Vec<String> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (ci, c) in clusters.iter().enumerate() {
        for (li, l) in legend.iter().enumerate() {
            let d = rgb_distance(c.rgb, rgb_f(l.rgb));
            if d <= cfg.legend_match_distance {
                pairs.push((d, ci, li));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut labels: Vec<Option<String>> = vec![None; clusters.len()];
    let mut used = vec![false; legend.len()];
    for (_, ci, li) in pairs {
        if labels[ci].is_none() && !used[li] {
            labels[ci] = Some(legend[li].label.clone());
            used[li] = true;
        }
    }
    labels.into_iter().enumerate().map(|(i, l)| l.unwrap_or_else(|| format!("series_{}", i + 1))).collect()
}

/// strip → calibrate → separate → trace → remove CE.
pub fn digitize(
    image: &PlotImage,
    annotation: &PlotAnnotation,
    cfg: &DigitizerConfig,
) -> Result<Vec<CycleSeries>, Unextractable> {
    let fail = |cause| Unextractable { cause };
    annotation.validate(image.width(), image.height()).map_err(fail)?;
    let maps = calibrate_axes(annotation).map_err(fail)?;
    let legend = &annotation.legend_entries;
    for (i, a) in legend.iter().enumerate() {
        for b in &legend[i + 1..] {
            let d = rgb_distance(rgb_f(a.rgb), rgb_f(b.rgb));
            if d < cfg.ambiguity_threshold {
                return Err(fail(DigitizeError::ColorAmbiguity(format!(
                    "legend entries {:?} and {:?} share a color ({d:.1} apart)",
                    a.label, b.label
                ))));
            }
        }
    }
    let stripped = strip_objects(image, annotation);
    let clusters = separate_series(&stripped, annotation.plot_area, cfg).map_err(fail)?;
    let labels = label_clusters(&clusters, legend, cfg);

    let mut traced = Vec::new();
    let mut last_err = None;
    for (c, label) in clusters.iter().zip(&labels) {
        match trace_series(c, &maps, Axis::Left, label) {
            Ok(s) => traced.push(s),
            Err(e) => {
                log::debug!("cluster {label}: {e}");
                last_err = Some(e);
            }
        }
    }
    if traced.is_empty() {
        return Err(fail(last_err.unwrap_or(DigitizeError::NoDataPixels)));
    }
    Ok(remove_ce(traced, Some(&maps), annotation.right_axis_present, cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub label: String,
    pub points: Vec<(u32, f64)>,
}

/// Per-graph output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSeriesFile {
    pub doi: String,
    pub figure: String,
    pub panel: String,
    pub series: Vec<SeriesRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unextractable: Option<String>,
}

impl GraphSeriesFile {
    pub fn new(meta: &GraphMetadata, outcome: &Result<Vec<CycleSeries>, Unextractable>) -> Self {
        let (series, unextractable) = match outcome {
            Ok(s) => {
                (s.iter().map(|s| SeriesRecord { label: s.label.clone(), points: s.points.clone() }).collect(), None)
            }
            Err(e) => (Vec::new(), Some(e.cause.to_string())),
        };
        Self {
            doi: meta.doi.clone(),
            figure: meta.figure_id.clone(),
            panel: meta.panel_label.clone(),
            series,
            unextractable,
        }
    }

    pub fn graph(&self) -> GraphMetadata {
        GraphMetadata::new(&self.doi, &self.figure, &self.panel)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("series file serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxed(kind: ObjectKind, x0: u32, y0: u32, x1: u32, y1: u32) -> ObjectBox {
        ObjectBox { kind, bounds: PixelBox { x0, y0, x1, y1 } }
    }

    fn noisy_image() -> PlotImage {
        let mut img = PlotImage::blank(80, 70).unwrap();
        for y in 0..70 {
            for x in 0..80 {
                img.set(x, y, [(x * 3) as u8, (y * 3) as u8, ((x + y) % 256) as u8]);
            }
        }
        img
    }

    #[test]
    fn strip_masks_only_boxes() {
        let img = noisy_image();
        let ann = PlotAnnotation {
            object_boxes: vec![boxed(ObjectKind::Text, 10, 10, 20, 15), boxed(ObjectKind::Arrow, 15, 12, 30, 20)],
            ..Default::default()
        };
        let out = strip_objects(&img, &ann);
        for y in 0..70 {
            for x in 0..80 {
                let inside = ann.object_boxes.iter().any(|b| b.bounds.contains(x, y));
                if inside {
                    assert_eq!(out.get(x, y), WHITE);
                } else {
                    assert_eq!(out.get(x, y), img.get(x, y));
                }
            }
        }
        assert_eq!(strip_objects(&out, &ann), out);
        assert_eq!(strip_objects(&img, &PlotAnnotation::default()), img);
    }
}
