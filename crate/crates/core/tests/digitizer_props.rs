use std::collections::BTreeMap;

use cellmine_core::digitizer::*;
use cellmine_core::fixtures::{render_fixture, standard_suite, FixtureSpec, LegendPosition};
use proptest::prelude::*;

/// Pixel-level DBSCAN with an all-pairs neighbor scan; independent of the
/// weighted color implementation.
fn brute_force_cluster_count(points: &[Rgb], eps: f64, min_pts: usize) -> usize {
    let n = points.len();
    let near = |i: usize, j: usize| {
        let d2: f64 = (0..3).map(|k| (points[i][k] as f64 - points[j][k] as f64).powi(2)).sum();
        d2 <= eps * eps
    };
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();
    let mut label = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if !core[s] || label[s] {
            continue;
        }
        label[s] = true;
        let mut stack = vec![s];
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if !label[j] && near(i, j) {
                    label[j] = true;
                    if core[j] {
                        stack.push(j);
                    }
                }
            }
        }
        count += 1;
    }
    count
}

fn small_spec(i: usize) -> FixtureSpec {
    let mut s = standard_suite(12, 500)[i].clone();
    s.width = 200;
    s.height = 150;
    s.legend = LegendPosition::None;
    s.inset_text = false;
    s
}

fn foreground(image: &PlotImage, area: PixelBox, cfg: &DigitizerConfig) -> Vec<(u32, u32, Rgb)> {
    let mut out = Vec::new();
    for y in area.y0..area.y1 {
        for x in area.x0..area.x1 {
            let c = image.get(x, y);
            if *c.iter().min().unwrap() < cfg.background_min {
                out.push((x, y, c));
            }
        }
    }
    out
}

#[test]
fn cluster_count_matches_brute_force_on_small_fixtures() {
    let cfg = DigitizerConfig::default();
    for i in 0..12 {
        let r = render_fixture(&small_spec(i)).unwrap();
        let px = foreground(&r.image, r.annotation.plot_area.unwrap(), &cfg);
        assert!(px.len() <= 10_000);
        let mut weights: BTreeMap<Rgb, usize> = BTreeMap::new();
        for p in &px {
            *weights.entry(p.2).or_default() += 1;
        }
        let colors: Vec<(Rgb, usize)> = weights.into_iter().collect();
        let fast = dbscan_weighted(&colors, cfg.eps, cfg.min_pts).into_iter().flatten().max().map_or(0, |m| m + 1);
        let colors_only: Vec<Rgb> = px.iter().map(|p| p.2).collect();
        assert_eq!(fast, brute_force_cluster_count(&colors_only, cfg.eps, cfg.min_pts), "fixture {i}");
    }
}

#[test]
fn rule_based_detector_finds_ticks() {
    for spec in standard_suite(5, 9) {
        let mut spec = spec;
        spec.x_ticks = 5;
        let r = render_fixture(&spec).unwrap();
        let found = RuleBasedDetector::default().detect(&r.image).unwrap();
        let a = found.plot_area.unwrap();
        let x_ticks =
            found.object_boxes.iter().filter(|b| b.kind == ObjectKind::AxisTick && b.bounds.y0 >= a.y1).count();
        assert!(x_ticks >= 4, "{}: {x_ticks}", spec.name);
        assert_eq!(found.plot_area, r.annotation.plot_area);
    }
}

#[test]
fn annotation_loader_returns_file_contents() {
    let dir = tempfile::tempdir().unwrap();
    let r = render_fixture(&small_spec(0)).unwrap();
    let meta = cellmine_core::corpus::GraphMetadata::new("10.5555/x", "Fig. 2", "b");
    std::fs::write(dir.path().join(format!("{}.annotation.json", meta.file_stem())), r.annotation.to_json()).unwrap();
    let mut img = r.image.clone();
    img.provenance = Some(meta);
    let det = AnnotationFileDetector { dir: dir.path().into() };
    assert_eq!(det.detect(&img).unwrap(), r.annotation);
    img.provenance = Some(cellmine_core::corpus::GraphMetadata::new("10.5555/x", "Fig. 3", ""));
    assert!(matches!(det.detect(&img), Err(DigitizeError::DetectorUnavailable(_))));
}

fn sorted_memberships(clusters: &[PixelCluster]) -> Vec<Vec<(u32, u32)>> {
    let mut m: Vec<Vec<(u32, u32)>> = clusters.iter().map(|c| c.pixels.clone()).collect();
    m.sort();
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn strip_touches_only_boxes(boxes in prop::collection::vec((0u32..120, 0u32..90, 1u32..40, 1u32..40), 0..6), seed in 0u64..1000) {
        let mut img = PlotImage::blank(120, 90).unwrap();
        for y in 0..90 {
            for x in 0..120 {
                let v = (x as u64 * 31 + y as u64 * 17 + seed) % 256;
                img.set(x, y, [v as u8, (v * 7 % 256) as u8, (v * 13 % 256) as u8]);
            }
        }
        let ann = PlotAnnotation {
            object_boxes: boxes.iter().map(|&(x, y, w, h)| ObjectBox {
                kind: ObjectKind::Text,
                bounds: PixelBox { x0: x, y0: y, x1: (x + w).min(120), y1: (y + h).min(90) },
            }).collect(),
            ..Default::default()
        };
        let out = strip_objects(&img, &ann);
        for y in 0..90 {
            for x in 0..120 {
                let inside = ann.object_boxes.iter().any(|b| b.bounds.contains(x, y));
                prop_assert_eq!(out.get(x, y), if inside { WHITE } else { img.get(x, y) });
            }
        }
    }

    #[test]
    fn separation_ignores_pixel_order(i in 0usize..12, shuffle_seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let cfg = DigitizerConfig::default();
        let r = render_fixture(&small_spec(i)).unwrap();
        let mut px = foreground(&r.image, r.annotation.plot_area.unwrap(), &cfg);
        let a = separate_pixels(&px, &cfg);
        px.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(shuffle_seed));
        prop_assert_eq!(a, separate_pixels(&px, &cfg));
    }

    #[test]
    fn separation_follows_translation(i in 0usize..12, dx in 0u32..40, dy in 0u32..40) {
        let cfg = DigitizerConfig::default();
        let r = render_fixture(&small_spec(i)).unwrap();
        let area = r.annotation.plot_area.unwrap();
        let moved = r.image.translated(dx, dy);
        let moved_area = PixelBox { x0: area.x0 + dx, y0: area.y0 + dy, x1: area.x1 + dx, y1: area.y1 + dy };
        let a = separate_series(&r.image, Some(area), &cfg).unwrap();
        let b = separate_series(&moved, Some(moved_area), &cfg).unwrap();
        let shifted: Vec<PixelCluster> = a.iter().map(|c| PixelCluster {
            rgb: c.rgb,
            pixels: c.pixels.iter().map(|&(x, y)| (x + dx, y + dy)).collect(),
        }).collect();
        prop_assert_eq!(sorted_memberships(&shifted), sorted_memberships(&b));
    }

    #[test]
    fn ce_rule_never_drops_wide_series(values in prop::collection::vec(0.0f64..120.0, 8..60), label_idx in 0usize..3) {
        let cfg = DigitizerConfig::default();
        let maps = AxisMaps {
            x: AxisMap { slope: 1.0, intercept: 0.0 },
            y_left: AxisMap { slope: -0.5, intercept: 200.0 },
            y_right: Some(AxisMap { slope: -0.3, intercept: 120.0 }),
        };
        let s = CycleSeries {
            label: ["series_1", "Cell A", "LHCE"][label_idx].into(),
            points: values.iter().enumerate().map(|(i, v)| (i as u32 + 1, *v)).collect(),
            axis: Axis::Left,
        };
        let right: Vec<f64> = s.points.iter().filter(|p| p.0 > cfg.ce_burn_in)
            .map(|p| maps.y_right.unwrap().value(maps.y_left.pixel(p.1))).collect();
        let span = right.iter().copied().fold(f64::NEG_INFINITY, f64::max) - right.iter().copied().fold(f64::INFINITY, f64::min);
        let kept = remove_ce(vec![s.clone()], Some(&maps), true, &cfg);
        if span > cfg.ce_band[1] - cfg.ce_band[0] {
            prop_assert_eq!(kept, vec![s]);
        }
    }
}
