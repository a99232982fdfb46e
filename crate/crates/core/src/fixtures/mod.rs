//! Deterministic cycle-plot renderer. Each fixture yields an image, an exact
//! annotation and the series it was drawn from, which makes it the
//! digitizer's ground truth.

mod render;
mod suites;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digitizer::{Axis, CycleSeries, PlotAnnotation, PlotImage, Rgb};

pub use render::render_fixture;
pub use suites::{ambiguous_suite, ce_suite, named_suite, standard_suite, CE_COLOR, PALETTE, SUITE_NAMES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FixtureError {
    #[error("invalid fixture spec: {0}")]
    SpecInvalid(String),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub label: String,
    pub rgb: Rgb,
    pub points: Vec<(u32, f64)>,
    #[serde(default)]
    pub axis: Axis,
    /// Listed in the legend.
    #[serde(default = "yes")]
    pub in_legend: bool,
}

fn yes() -> bool {
    true
}

/// Coulombic efficiency curve drawn against the right axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeOverlay {
    /// Legend label; `None` leaves the curve out of the legend.
    pub label: Option<String>,
    pub rgb: Rgb,
    pub points: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegendPosition {
    /// In a free corner of the plot area, else above it.
    Inside,
    Above,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub series: Vec<SeriesSpec>,
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub y_right_range: Option<[f64; 2]>,
    pub x_ticks: usize,
    pub y_ticks: usize,
    pub legend: LegendPosition,
    pub ce_overlay: Option<CeOverlay>,
    /// 1-pixel half-tone fringe around every line.
    pub anti_alias: bool,
    /// A text blob inside the plot area, removed by stripping.
    pub inset_text: bool,
    pub seed: u64,
}

impl FixtureSpec {
    pub fn validate(&self) -> Result<(), FixtureError> {
        let bad = |m: String| Err(FixtureError::SpecInvalid(m));
        if self.width < 160 || self.height < 120 {
            return bad(format!("{}x{} too small", self.width, self.height));
        }
        let ranges = [Some(self.x_range), Some(self.y_range), self.y_right_range];
        for r in ranges.into_iter().flatten() {
            if !(r[0].is_finite() && r[1].is_finite() && r[1] > r[0]) {
                return bad(format!("range {r:?} must be finite and increasing"));
            }
        }
        if self.x_ticks < 2 || self.y_ticks < 2 {
            return bad("at least two ticks per axis".into());
        }
        if self.series.is_empty() {
            return bad("no series".into());
        }
        let right_needed = self.ce_overlay.is_some() || self.series.iter().any(|s| s.axis == Axis::Right);
        if right_needed && self.y_right_range.is_none() {
            return bad("right-axis content without a right range".into());
        }
        let curves = self
            .series
            .iter()
            .map(|s| (&s.label, &s.points, s.axis))
            .chain(self.ce_overlay.iter().map(|c| (&self.name, &c.points, Axis::Right)));
        for (label, points, axis) in curves {
            if points.len() < 2 {
                return bad(format!("{label}: fewer than 2 points"));
            }
            if points.windows(2).any(|w| w[1].0 <= w[0].0) || points[0].0 == 0 {
                return bad(format!("{label}: cycles must be positive and strictly increasing"));
            }
            let yr = if axis == Axis::Right { self.y_right_range.unwrap() } else { self.y_range };
            for &(c, v) in points {
                if !(c as f64 >= self.x_range[0] && c as f64 <= self.x_range[1] && v >= yr[0] && v <= yr[1]) {
                    return bad(format!("{label}: point ({c}, {v}) outside the axes"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSeries {
    #[serde(flatten)]
    pub series: CycleSeries,
    pub ce: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFixture {
    pub image: PlotImage,
    pub annotation: PlotAnnotation,
    pub truth: Vec<TruthSeries>,
}

impl RenderedFixture {
    /// Capacity series the digitizer should return.
    pub fn capacity_truth(&self) -> impl Iterator<Item = &CycleSeries> {
        self.truth.iter().filter(|t| !t.ce).map(|t| &t.series)
    }

    /// Writes `<name>.png`, `<name>.annotation.json` and `<name>.truth.json`.
    pub fn write(&self, dir: &Path, name: &str) -> Result<(), FixtureError> {
        let io = |e: String| FixtureError::Io(e);
        std::fs::create_dir_all(dir).map_err(|e| io(e.to_string()))?;
        self.image.save(&dir.join(format!("{name}.png"))).map_err(|e| io(e.to_string()))?;
        std::fs::write(dir.join(format!("{name}.annotation.json")), self.annotation.to_json())
            .map_err(|e| io(e.to_string()))?;
        let truth = serde_json::to_string_pretty(&self.truth).expect("truth serializes");
        std::fs::write(dir.join(format!("{name}.truth.json")), truth).map_err(|e| io(e.to_string()))
    }
}

/// Reads the truth file written next to a fixture image.
pub fn load_truth(path: &Path) -> Result<Vec<TruthSeries>, FixtureError> {
    let src = std::fs::read_to_string(path).map_err(|e| FixtureError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&src).map_err(|e| FixtureError::Io(format!("{}: {e}", path.display())))
}
