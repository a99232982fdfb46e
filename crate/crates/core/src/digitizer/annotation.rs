use serde::{Deserialize, Serialize};

use super::image::Rgb;
use super::DigitizeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Text,
    Legend,
    Marker,
    Arrow,
    AxisTick,
    AxisLabel,
}

/// Pixel box, half-open: columns `x0..x1`, rows `y0..y1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl PixelBox {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn is_empty(&self) -> bool {
        self.x0 >= self.x1 || self.y0 >= self.y1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectBox {
    pub kind: ObjectKind,
    #[serde(flatten)]
    pub bounds: PixelBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisId {
    X,
    YLeft,
    YRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tick {
    pub axis: AxisId,
    /// Column for the x axis, row for y axes; fractional positions allowed.
    pub pixel: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub label: String,
    pub rgb: Rgb,
}

/// Object boxes, axis ticks and legend of one plot.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlotAnnotation {
    #[serde(default)]
    pub object_boxes: Vec<ObjectBox>,
    #[serde(default)]
    pub tick_values: Vec<Tick>,
    #[serde(default)]
    pub legend_entries: Vec<LegendEntry>,
    #[serde(default)]
    pub right_axis_present: bool,
    /// Region inside the axis frame; the whole image when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot_area: Option<PixelBox>,
}

impl PlotAnnotation {
    pub fn ticks(&self, axis: AxisId) -> impl Iterator<Item = &Tick> {
        self.tick_values.iter().filter(move |t| t.axis == axis)
    }

    /// Checks box bounds and, for every axis the plot uses, that there are at
    /// least two ticks with values strictly monotone in pixel order.
    pub fn validate(&self, width: u32, height: u32) -> Result<(), DigitizeError> {
        let invalid = |m: String| Err(DigitizeError::InvalidAnnotation(m));
        let boxes = self.object_boxes.iter().map(|b| b.bounds).chain(self.plot_area);
        for b in boxes {
            if b.x1 > width || b.y1 > height || b.x0 > b.x1 || b.y0 > b.y1 {
                return invalid(format!("box {b:?} outside {width}x{height}"));
            }
        }
        let mut axes = vec![AxisId::X, AxisId::YLeft];
        if self.right_axis_present {
            axes.push(AxisId::YRight);
        }
        for axis in axes {
            let mut ticks: Vec<&Tick> = self.ticks(axis).collect();
            if ticks.len() < 2 {
                return invalid(format!("{axis:?} has {} tick(s), need 2", ticks.len()));
            }
            if ticks.iter().any(|t| !t.pixel.is_finite() || !t.value.is_finite()) {
                return invalid(format!("{axis:?} has a non-finite tick"));
            }
            ticks.sort_by(|a, b| a.pixel.total_cmp(&b.pixel));
            let increasing = ticks.windows(2).all(|w| w[1].value > w[0].value);
            let decreasing = ticks.windows(2).all(|w| w[1].value < w[0].value);
            if !increasing && !decreasing {
                return invalid(format!("{axis:?} tick values are not strictly monotone"));
            }
        }
        Ok(())
    }

    pub fn from_json(src: &str) -> Result<Self, DigitizeError> {
        serde_json::from_str(src).map_err(|e| DigitizeError::InvalidAnnotation(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("annotation serializes")
    }
}
