use serde::{Deserialize, Serialize};

use super::annotation::{AxisId, PlotAnnotation, Tick};
use super::DigitizeError;

/// Linear pixel→value map: `value = slope * pixel + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisMap {
    pub slope: f64,
    pub intercept: f64,
}

impl AxisMap {
    pub fn value(&self, pixel: f64) -> f64 {
        self.slope * pixel + self.intercept
    }

    pub fn pixel(&self, value: f64) -> f64 {
        (value - self.intercept) / self.slope
    }

    /// Least-squares fit through the ticks. The fit must reproduce every
    /// tick to within `max_residual_px` pixels.
    pub fn fit(axis: AxisId, ticks: &[Tick], max_residual_px: f64) -> Result<Self, DigitizeError> {
        if ticks.len() < 2 {
            return Err(DigitizeError::DegenerateTicks { axis });
        }
        let n = ticks.len() as f64;
        let mp = ticks.iter().map(|t| t.pixel).sum::<f64>() / n;
        let mv = ticks.iter().map(|t| t.value).sum::<f64>() / n;
        let sxx: f64 = ticks.iter().map(|t| (t.pixel - mp).powi(2)).sum();
        let sxy: f64 = ticks.iter().map(|t| (t.pixel - mp) * (t.value - mv)).sum();
        let span = ticks.iter().map(|t| t.pixel).fold(f64::NEG_INFINITY, f64::max)
            - ticks.iter().map(|t| t.pixel).fold(f64::INFINITY, f64::min);
        if span.is_nan() || span <= 1e-9 || sxy == 0.0 {
            return Err(DigitizeError::DegenerateTicks { axis });
        }
        let slope = sxy / sxx;
        let map = AxisMap { slope, intercept: mv - slope * mp };
        let residual = ticks.iter().map(|t| (map.pixel(t.value) - t.pixel).abs()).fold(0.0, f64::max);
        if residual >= max_residual_px {
            return Err(DigitizeError::NonLinearAxis { axis, residual });
        }
        Ok(map)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisMaps {
    pub x: AxisMap,
    pub y_left: AxisMap,
    pub y_right: Option<AxisMap>,
}

/// Fits pixel→data maps for the x axis, the left y axis and, when present,
/// the right y axis.
pub fn calibrate_axes(annotation: &PlotAnnotation) -> Result<AxisMaps, DigitizeError> {
    const MAX_RESIDUAL_PX: f64 = 0.5;
    let fit = |axis| {
        let ticks: Vec<Tick> = annotation.ticks(axis).copied().collect();
        AxisMap::fit(axis, &ticks, MAX_RESIDUAL_PX)
    };
    Ok(AxisMaps {
        x: fit(AxisId::X)?,
        y_left: fit(AxisId::YLeft)?,
        y_right: if annotation.right_axis_present { Some(fit(AxisId::YRight)?) } else { None },
    })
}
