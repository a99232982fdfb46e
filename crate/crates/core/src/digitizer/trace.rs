use serde::{Deserialize, Serialize};

use super::calibrate::{AxisMap, AxisMaps};
use super::cluster::PixelCluster;
use super::DigitizeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    #[default]
    Left,
    Right,
}

/// Capacity per cycle for one curve. Cycles strictly increase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSeries {
    pub label: String,
    /// `(cycle, specific capacity in mAh/g)`.
    pub points: Vec<(u32, f64)>,
    #[serde(default)]
    pub axis: Axis,
}

impl CycleSeries {
    pub fn value_at(&self, cycle: u32) -> Option<f64> {
        self.points.binary_search_by_key(&cycle, |p| p.0).ok().map(|i| self.points[i].1)
    }

    pub fn max_cycle(&self) -> Option<u32> {
        self.points.last().map(|p| p.0)
    }
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median row per occupied column, mapped through the chosen y axis; x is
/// rounded to the nearest cycle and repeated cycles collapse to their median.
pub fn trace_series(
    cluster: &PixelCluster,
    maps: &AxisMaps,
    axis: Axis,
    label: &str,
) -> Result<CycleSeries, DigitizeError> {
    let y_map: AxisMap = match axis {
        Axis::Left => maps.y_left,
        Axis::Right => maps.y_right.ok_or(DigitizeError::MissingRightAxis)?,
    };
    let mut per_cycle: Vec<(u32, f64)> = Vec::new();
    for col in cluster.pixels.chunk_by(|a, b| a.0 == b.0) {
        let mut rows: Vec<f64> = col.iter().map(|p| p.1 as f64).collect();
        let row = median(&mut rows);
        let cycle = maps.x.value(col[0].0 as f64).round();
        if cycle < 1.0 || cycle > u32::MAX as f64 {
            continue;
        }
        per_cycle.push((cycle as u32, y_map.value(row).max(0.0)));
    }
    per_cycle.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let points: Vec<(u32, f64)> = per_cycle
        .chunk_by(|a, b| a.0 == b.0)
        .map(|g| {
            let mut vals: Vec<f64> = g.iter().map(|p| p.1).collect();
            (g[0].0, median(&mut vals))
        })
        .collect();
    if points.len() < 2 {
        return Err(DigitizeError::TooFewPoints(points.len()));
    }
    Ok(CycleSeries { label: label.to_string(), points, axis })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn maps() -> AxisMaps {
        // 10 px per cycle from column 0 = cycle 0; rows 0..=200 map 200..=0
        AxisMaps {
            x: AxisMap { slope: 0.1, intercept: 0.0 },
            y_left: AxisMap { slope: -1.0, intercept: 200.0 },
            y_right: None,
        }
    }

    #[test]
    fn flat_line_traces_flat() {
        let pixels: Vec<_> = (5..505).flat_map(|x| [(x, 80), (x, 81)]).collect();
        let s = trace_series(&PixelCluster { rgb: [0.0; 3], pixels }, &maps(), Axis::Left, "a").unwrap();
        assert_eq!(s.points.first().unwrap().0, 1);
        assert_eq!(s.points.last().unwrap().0, 50);
        assert!(s.points.iter().all(|p| (p.1 - 119.5).abs() < 1e-9));
    }

    #[test]
    fn single_pixel_is_too_few() {
        let c = PixelCluster { rgb: [0.0; 3], pixels: vec![(20, 20)] };
        assert_eq!(trace_series(&c, &maps(), Axis::Left, "a"), Err(DigitizeError::TooFewPoints(1)));
    }

    #[test]
    fn right_axis_requires_map() {
        let c = PixelCluster { rgb: [0.0; 3], pixels: vec![(20, 20), (30, 20)] };
        assert_eq!(trace_series(&c, &maps(), Axis::Right, "a"), Err(DigitizeError::MissingRightAxis));
    }
}
