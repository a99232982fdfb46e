//! Cycle-life quantities derived from a digitized capacity series.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::StandardizeError;
use crate::digitizer::CycleSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    /// Fraction of the initial capacity below which the cell has reached
    /// end of life.
    pub threshold: f64,
    /// Largest distance from a target cycle to either bracketing neighbor
    /// for interpolation.
    pub window: u32,
    /// When set, the initial capacity is the maximum over the first this
    /// many recorded cycles (activation spikes).
    pub activation_cycles: Option<usize>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { threshold: 0.8, window: 5, activation_cycles: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleMetrics {
    /// mAh/g
    pub initial_capacity: f64,
    pub capacity_at: BTreeMap<u32, Option<f64>>,
    pub max_cycle: u32,
    pub eol_cycle: Option<u32>,
    pub stable_at: BTreeMap<u32, bool>,
}

/// Capacity at `cycle`: the recorded point, else linear interpolation
/// between neighbors no more than `window` cycles away.
pub fn capacity_at(points: &[(u32, f64)], cycle: u32, window: u32) -> Option<f64> {
    match points.binary_search_by_key(&cycle, |p| p.0) {
        Ok(i) => Some(points[i].1),
        Err(i) if i > 0 && i < points.len() => {
            let (x0, y0) = points[i - 1];
            let (x1, y1) = points[i];
            if cycle - x0 > window || x1 - cycle > window {
                return None;
            }
            let t = f64::from(cycle - x0) / f64::from(x1 - x0);
            Some(y0 + t * (y1 - y0))
        }
        Err(_) => None,
    }
}

/// `below` with a relative tolerance so a value at exactly the threshold
/// counts as retained.
fn below(value: f64, limit: f64) -> bool {
    value < limit - 1e-12 * limit.abs()
}

pub fn derive_cycle_metrics(
    series: &CycleSeries,
    targets: &[u32],
    cfg: &MetricsConfig,
) -> Result<CycleMetrics, StandardizeError> {
    let mut points = series.points.clone();
    points.sort_by_key(|p| p.0);
    points.dedup_by_key(|p| p.0);
    if points.len() < 2 {
        return Err(StandardizeError::SeriesTooShort(points.len()));
    }
    // index of the point that defines the initial capacity; fade is
    // measured from there on
    let start = match cfg.activation_cycles {
        Some(k) if k > 1 => {
            (0..k.min(points.len())).max_by(|&a, &b| points[a].1.total_cmp(&points[b].1).then(b.cmp(&a))).unwrap()
        }
        _ => 0,
    };
    let initial_capacity = points[start].1;
    let limit = cfg.threshold * initial_capacity;
    let max_cycle = points.last().unwrap().0;
    let eol_cycle = points[start..].iter().find(|p| below(p.1, limit)).map(|p| p.0);

    let mut capacity = BTreeMap::new();
    let mut stable_at = BTreeMap::new();
    for &n in targets {
        let cap = capacity_at(&points, n, cfg.window).map(|c| c.max(0.0));
        let stable = max_cycle >= n && eol_cycle.is_none_or(|e| e > n) && cap.is_none_or(|c| !below(c, limit));
        capacity.insert(n, cap);
        stable_at.insert(n, stable);
    }
    Ok(CycleMetrics { initial_capacity, capacity_at: capacity, max_cycle, eol_cycle, stable_at })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digitizer::Axis;
    use proptest::prelude::*;

    fn series(points: &[(u32, f64)]) -> CycleSeries {
        CycleSeries { label: "s".into(), points: points.to_vec(), axis: Axis::Left }
    }

    fn metrics(points: &[(u32, f64)], targets: &[u32]) -> CycleMetrics {
        derive_cycle_metrics(&series(points), targets, &MetricsConfig::default()).unwrap()
    }

    #[test]
    fn threshold_forced() {
        let m = metrics(&[(1, 100.0), (2, 90.0), (3, 79.0)], &[3]);
        assert_eq!(m.initial_capacity, 100.0);
        assert_eq!(m.eol_cycle, Some(3));
        assert!(!m.stable_at[&3]);
    }

    #[test]
    fn short_series_is_unstable_at_later_targets() {
        let pts: Vec<(u32, f64)> = (1..=150).map(|c| (c, 200.0 - 0.1 * f64::from(c))).collect();
        let m = metrics(&pts, &[100, 200]);
        assert_eq!(m.capacity_at[&200], None);
        assert!(!m.stable_at[&200]);
        assert!(m.stable_at[&100]);
        assert_eq!(m.max_cycle, 150);
    }

    #[test]
    fn interpolation_and_window() {
        let m = metrics(&[(1, 520.0), (98, 500.0), (102, 480.0)], &[100]);
        assert!((m.capacity_at[&100].unwrap() - 490.0).abs() < 1e-12);
        let m = metrics(&[(1, 520.0), (90, 500.0), (110, 480.0)], &[100]);
        assert_eq!(m.capacity_at[&100], None);
    }

    #[test]
    fn exact_threshold_is_stable() {
        let m = metrics(&[(1, 100.0), (50, 80.0), (100, 80.0)], &[100]);
        assert_eq!(m.eol_cycle, None);
        assert!(m.stable_at[&100]);
    }

    #[test]
    fn activation_option() {
        let cfg = MetricsConfig { activation_cycles: Some(5), ..Default::default() };
        let m = derive_cycle_metrics(&series(&[(1, 90.0), (2, 120.0), (3, 118.0), (10, 95.0)]), &[10], &cfg).unwrap();
        assert_eq!(m.initial_capacity, 120.0);
        assert_eq!(m.eol_cycle, Some(10));
    }

    #[test]
    fn too_short() {
        let r = derive_cycle_metrics(&series(&[(1, 100.0)]), &[100], &MetricsConfig::default());
        assert_eq!(r, Err(StandardizeError::SeriesTooShort(1)));
    }

    fn arb_points() -> impl Strategy<Value = Vec<(u32, f64)>> {
        prop::collection::btree_map(1u32..400, 0.0f64..300.0, 2..60).prop_map(|m| m.into_iter().collect())
    }

    proptest! {
        #[test]
        fn cross_field_consistency(pts in arb_points(), targets in prop::collection::vec(1u32..400, 1..5)) {
            let m = metrics(&pts, &targets);
            if let Some(e) = m.eol_cycle { prop_assert!(e <= m.max_cycle); }
            for (&n, &stable) in &m.stable_at {
                if stable { prop_assert!(m.eol_cycle.is_none_or(|e| e > n)); }
                if m.max_cycle < n { prop_assert!(!stable); }
            }
            prop_assert!(m.capacity_at.values().flatten().all(|c| *c >= 0.0));
        }

        #[test]
        fn appending_after_eol_keeps_eol(pts in arb_points(), extra in prop::collection::vec(0.0f64..300.0, 1..20)) {
            let m = metrics(&pts, &[]);
            prop_assume!(m.eol_cycle.is_some());
            let mut longer = pts.clone();
            let last = longer.last().unwrap().0;
            longer.extend(extra.iter().enumerate().map(|(i, v)| (last + 1 + i as u32, *v)));
            prop_assert_eq!(metrics(&longer, &[]).eol_cycle, m.eol_cycle);
        }
    }
}
