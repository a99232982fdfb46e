use std::sync::LazyLock;

use regex::Regex;

use super::calibrate::AxisMaps;
use super::trace::{Axis, CycleSeries};
use super::DigitizerConfig;

static CE_LABEL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)coulombic|efficiency|\bce\b").unwrap());

pub fn is_ce_label(label: &str) -> bool {
    CE_LABEL.is_match(label)
}

/// Values of `series` read on the right-axis scale.
fn on_right_scale(series: &CycleSeries, maps: &AxisMaps) -> Option<Vec<f64>> {
    let right = maps.y_right?;
    Some(match series.axis {
        Axis::Right => series.points.iter().map(|p| p.1).collect(),
        Axis::Left => series.points.iter().map(|p| right.value(maps.y_left.pixel(p.1))).collect(),
    })
}

/// Whether a series without a CE label looks like a Coulombic efficiency
/// trace: past the burn-in cycles, nearly all of it sits in the band around
/// 100% on the right axis, and it never spans more than the band.
pub fn looks_like_ce(series: &CycleSeries, maps: &AxisMaps, cfg: &DigitizerConfig) -> bool {
    let Some(values) = on_right_scale(series, maps) else {
        return false;
    };
    let tail: Vec<f64> =
        series.points.iter().zip(values).filter(|(p, _)| p.0 > cfg.ce_burn_in).map(|(_, v)| v).collect();
    if tail.is_empty() {
        return false;
    }
    let inside = tail.iter().filter(|v| (cfg.ce_band[0]..=cfg.ce_band[1]).contains(*v)).count();
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    inside as f64 >= cfg.ce_fraction * tail.len() as f64 && hi - lo <= cfg.ce_band[1] - cfg.ce_band[0]
}

/// Drops Coulombic-efficiency series: by legend label first, then, when the
/// plot has a right axis, by the band rule.
pub fn remove_ce(
    series: Vec<CycleSeries>,
    maps: Option<&AxisMaps>,
    right_axis_present: bool,
    cfg: &DigitizerConfig,
) -> Vec<CycleSeries> {
    series
        .into_iter()
        .filter(|s| {
            if is_ce_label(&s.label) {
                return false;
            }
            match maps {
                Some(m) if right_axis_present => !looks_like_ce(s, m, cfg),
                _ => true,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digitizer::calibrate::AxisMap;

    fn maps() -> AxisMaps {
        // left 0..200 and right 0..120 over the same 300 rows
        AxisMaps {
            x: AxisMap { slope: 1.0, intercept: 0.0 },
            y_left: AxisMap { slope: -200.0 / 300.0, intercept: 200.0 },
            y_right: Some(AxisMap { slope: -120.0 / 300.0, intercept: 120.0 }),
        }
    }

    fn series(label: &str, values: impl Fn(u32) -> f64) -> CycleSeries {
        CycleSeries { label: label.into(), points: (1..=60).map(|c| (c, values(c))).collect(), axis: Axis::Left }
    }

    #[test]
    fn labels() {
        assert!(is_ce_label("Coulombic Efficiency"));
        assert!(is_ce_label("CE (%)"));
        assert!(!is_ce_label("LHCE"));
        assert!(!is_ce_label("Capacity"));
    }

    #[test]
    fn flat_right_axis_series_removed() {
        let cfg = DigitizerConfig::default();
        let m = maps();
        // 99.8 % on the right axis, read on the left scale
        let left_of = |v: f64| m.y_left.value(m.y_right.unwrap().pixel(v));
        let ce = series("series_1", |c| if c <= 3 { left_of(90.0) } else { left_of(99.8) });
        let cap = series("series_2", |c| 150.0 - c as f64);
        let kept = remove_ce(vec![ce, cap.clone()], Some(&m), true, &cfg);
        assert_eq!(kept, vec![cap]);
    }

    #[test]
    fn identity_without_right_axis_or_label() {
        let cfg = DigitizerConfig::default();
        let s = vec![series("a", |_| 166.0), series("b", |c| 100.0 - c as f64)];
        assert_eq!(remove_ce(s.clone(), Some(&maps()), false, &cfg), s);
    }
}
