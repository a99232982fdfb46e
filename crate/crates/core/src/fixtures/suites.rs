//! Named fixture suites generated from a seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CeOverlay, FixtureSpec, LegendPosition, SeriesSpec};
use crate::digitizer::{Axis, Rgb};

/// Line colors chosen so that no color sits on another's blend toward white.
pub const PALETTE: [Rgb; 8] = [
    [0, 0, 0],
    [220, 30, 30],
    [30, 60, 220],
    [20, 150, 40],
    [240, 140, 0],
    [140, 40, 170],
    [0, 150, 150],
    [150, 80, 20],
];

pub const CE_COLOR: Rgb = [230, 0, 230];

pub const SUITE_NAMES: [&str; 4] = ["standard", "ce", "ambiguous", "all"];

const LABELS: [&str; 8] = ["Baseline", "Coated", "HCE", "LHCE", "Bare Li", "Cell A", "Cell B", "Control"];

pub fn nice_ceil(v: f64) -> f64 {
    let k = 10f64.powf(v.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0].into_iter().map(|m| m * k).find(|x| *x >= v).unwrap_or(10.0 * k)
}

fn capacity_curve(rng: &mut ChaCha8Rng, initial: f64, last: u32, jitter: f64) -> Vec<(u32, f64)> {
    let kind = rng.random_range(0..4);
    let end_retention = rng.random_range(0.45..0.97);
    let knee = rng.random_range(0.4..0.8) * last as f64;
    (1..=last)
        .map(|c| {
            let t = (c - 1) as f64 / (last - 1).max(1) as f64;
            let r = match kind {
                0 => 1.0 - (1.0 - end_retention) * t,
                1 => end_retention.powf(t),
                2 => {
                    let c = c as f64;
                    if c < knee {
                        1.0 - 0.05 * c / knee
                    } else {
                        0.95 - (0.95 - end_retention) * (c - knee) / (last as f64 - knee)
                    }
                }
                _ => {
                    // activation over the first cycles, then slow fade
                    let act = 0.85 + 0.15 * (1.0 - (-(c as f64) / 3.0).exp());
                    act * (1.0 - (1.0 - end_retention) * 0.5 * t)
                }
            };
            (c, (initial * r + rng.random_range(-jitter..=jitter)).max(0.0))
        })
        .collect()
}

fn separated(a: &[(u32, f64)], b: &[(u32, f64)], min_gap: f64) -> bool {
    let common: Vec<f64> =
        a.iter().filter_map(|&(c, v)| b.iter().find(|p| p.0 == c).map(|p| (p.1 - v).abs())).collect();
    let close = common.iter().filter(|d| **d < min_gap).count();
    close as f64 <= 0.03 * common.len() as f64
}

fn ce_curve(rng: &mut ChaCha8Rng, last: u32) -> Vec<(u32, f64)> {
    let first = rng.random_range(85.0..92.0);
    let plateau = rng.random_range(99.3..99.9);
    (1..=last)
        .map(|c| {
            let v = if c == 1 {
                first
            } else {
                plateau - (plateau - first) * (-(c as f64 - 1.0) * 1.5).exp() + rng.random_range(-0.08..0.08)
            };
            (c, v.min(100.0))
        })
        .collect()
}

fn random_spec(name: String, seed: u64, with_ce: bool, ce_label: Option<&str>) -> FixtureSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = rng.random_range(560..=720);
    let height = rng.random_range(420..=520);
    let n = rng.random_range(1..=4usize);
    let mut colors = PALETTE.to_vec();
    colors.shuffle(&mut rng);
    let mut labels = LABELS.to_vec();
    labels.shuffle(&mut rng);
    let max_cycle = rng.random_range(20..=200u32);
    let scale = [150.0, 200.0, 800.0, 1200.0][rng.random_range(0..4)];
    let margin = if with_ce { 1.45 } else { 1.25 };

    let mut series: Vec<SeriesSpec> = Vec::new();
    let mut attempts = 0;
    while series.len() < n {
        attempts += 1;
        let last = if series.is_empty() { max_cycle } else { max_cycle - rng.random_range(0..=max_cycle / 4) };
        let initial = scale * rng.random_range(0.6..1.0);
        let pts = capacity_curve(&mut rng, initial, last.max(5), 0.003 * scale);
        let gap = 0.04 * scale * margin;
        if attempts > 200 || series.iter().all(|s| separated(&s.points, &pts, gap)) {
            if attempts > 200 {
                break;
            }
            series.push(SeriesSpec {
                label: labels[series.len()].to_string(),
                rgb: colors[series.len()],
                points: pts,
                axis: Axis::Left,
                in_legend: true,
            });
        }
    }
    let peak = series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).fold(0.0, f64::max);
    let ce_overlay = with_ce.then(|| CeOverlay {
        label: ce_label.map(str::to_string),
        rgb: CE_COLOR,
        points: ce_curve(&mut rng, max_cycle),
    });
    FixtureSpec {
        name,
        width,
        height,
        series,
        x_range: [0.0, nice_ceil(max_cycle as f64)],
        y_range: [0.0, nice_ceil(peak * margin)],
        y_right_range: with_ce.then_some([0.0, 110.0]),
        x_ticks: rng.random_range(5..=6),
        y_ticks: if with_ce { 6 } else { rng.random_range(5..=6) },
        legend: if rng.random_bool(0.75) { LegendPosition::Inside } else { LegendPosition::Above },
        ce_overlay,
        anti_alias: seed.is_multiple_of(2),
        inset_text: seed.is_multiple_of(3),
        seed,
    }
}

/// Plots with one to four well separated capacity curves.
pub fn standard_suite(count: usize, seed: u64) -> Vec<FixtureSpec> {
    (0..count).map(|i| random_spec(format!("standard_{i:03}"), seed.wrapping_add(i as u64), false, None)).collect()
}

/// Capacity curves with a Coulombic efficiency overlay on a right axis;
/// every other one leaves the efficiency curve out of the legend.
pub fn ce_suite(count: usize, seed: u64) -> Vec<FixtureSpec> {
    (0..count)
        .map(|i| {
            let label = [Some("Coulombic efficiency"), None][i % 2];
            random_spec(format!("ce_{i:03}"), seed.wrapping_add(1000 + i as u64), true, label)
        })
        .collect()
}

/// Two curves told apart only by marker shape (same color) or by colors
/// a few units apart. All should be rejected as ambiguous.
pub fn ambiguous_suite(count: usize, seed: u64) -> Vec<FixtureSpec> {
    (0..count)
        .map(|i| {
            let mut spec = random_spec(format!("ambiguous_{i:03}"), seed.wrapping_add(2000 + i as u64), false, None);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(3000 + i as u64));
            let base = spec.series[0].clone();
            let top = spec.y_range[1];
            let second: Vec<(u32, f64)> = base.points.iter().map(|&(c, v)| (c, (v * 0.55).min(top))).collect();
            let rgb = if i % 2 == 0 {
                base.rgb
            } else {
                // 8 units away in RGB space
                let k = rng.random_range(0..3);
                let mut c = base.rgb;
                c[k] = if c[k] >= 8 { c[k] - 8 } else { c[k] + 8 };
                c
            };
            spec.series = vec![
                base,
                SeriesSpec { label: "Second".into(), rgb, points: second, axis: Axis::Left, in_legend: true },
            ];
            if i % 3 == 2 {
                spec.legend = LegendPosition::None;
            }
            spec
        })
        .collect()
}

pub fn named_suite(name: &str, seed: u64) -> Option<Vec<FixtureSpec>> {
    Some(match name {
        "standard" => standard_suite(50, seed),
        "ce" => ce_suite(10, seed),
        "ambiguous" => ambiguous_suite(6, seed),
        "all" => {
            let mut v = standard_suite(50, seed);
            v.extend(ce_suite(10, seed));
            v.extend(ambiguous_suite(6, seed));
            v
        }
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nice_numbers() {
        assert_eq!(nice_ceil(187.0), 200.0);
        assert_eq!(nice_ceil(1200.0), 2000.0);
        assert_eq!(nice_ceil(230.0), 250.0);
        assert_eq!(nice_ceil(50.0), 50.0);
    }

    #[test]
    fn palette_is_well_separated() {
        for (i, a) in PALETTE.iter().chain([&CE_COLOR]).enumerate() {
            for b in PALETTE.iter().chain([&CE_COLOR]).skip(i + 1) {
                let d: f64 = (0..3).map(|k| (a[k] as f64 - b[k] as f64).powi(2)).sum::<f64>().sqrt();
                assert!(d > 80.0, "{a:?} {b:?}");
            }
        }
    }

    #[test]
    fn suites_are_valid() {
        for s in named_suite("all", 11).unwrap() {
            s.validate().unwrap_or_else(|e| panic!("{}: {e}", s.name));
        }
    }
}
