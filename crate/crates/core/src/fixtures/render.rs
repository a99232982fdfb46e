use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FixtureError, FixtureSpec, LegendPosition, RenderedFixture, TruthSeries};
use crate::digitizer::{
    Axis, AxisId, CycleSeries, LegendEntry, ObjectBox, ObjectKind, PixelBox, PlotAnnotation, PlotImage, Rgb, Tick,
    WHITE,
};

const FRAME: Rgb = [0, 0, 0];
const INK: Rgb = [60, 60, 60];
const PAD: f64 = 4.0;
const LINE_HALF_WIDTH: f64 = 1.0;
const FRINGE_HALF_WIDTH: f64 = 2.0;
const ENTRY_H: u32 = 12;
const SWATCH_W: u32 = 18;

struct Layout {
    area: PixelBox,
    x: [f64; 2],
    y: [f64; 2],
    y_right: Option<[f64; 2]>,
}

impl Layout {
    fn new(spec: &FixtureSpec, extra_top: u32) -> Self {
        let right = if spec.y_right_range.is_some() { 64 } else { 20 };
        Layout {
            area: PixelBox { x0: 64, y0: 16 + extra_top, x1: spec.width - right, y1: spec.height - 48 },
            x: spec.x_range,
            y: spec.y_range,
            y_right: spec.y_right_range,
        }
    }

    fn x_px(&self, v: f64) -> f64 {
        let (a, b) = (self.area.x0 as f64 + PAD, (self.area.x1 - 1) as f64 - PAD);
        a + (v - self.x[0]) / (self.x[1] - self.x[0]) * (b - a)
    }

    fn y_px(&self, v: f64, axis: Axis) -> f64 {
        let r = match axis {
            Axis::Left => self.y,
            Axis::Right => self.y_right.expect("validated"),
        };
        let (bottom, top) = ((self.area.y1 - 1) as f64 - PAD, self.area.y0 as f64 + PAD);
        bottom - (v - r[0]) / (r[1] - r[0]) * (bottom - top)
    }
}

struct Curve {
    rgb: Rgb,
    /// Distance from each plot-area pixel to the polyline.
    dist: Vec<f64>,
}

fn seg_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) };
    ((p.0 - a.0 - t * dx).powi(2) + (p.1 - a.1 - t * dy).powi(2)).sqrt()
}

fn trace_curve(layout: &Layout, points: &[(u32, f64)], axis: Axis, rgb: Rgb) -> Curve {
    let a = layout.area;
    let (w, h) = (a.x1 - a.x0, a.y1 - a.y0);
    let mut dist = vec![f64::INFINITY; (w * h) as usize];
    let px: Vec<(f64, f64)> = points.iter().map(|&(c, v)| (layout.x_px(c as f64), layout.y_px(v, axis))).collect();
    for s in px.windows(2) {
        let (p, q) = (s[0], s[1]);
        let reach = FRINGE_HALF_WIDTH + 1.0;
        let xs = ((p.0.min(q.0) - reach).floor().max(a.x0 as f64) as u32)
            ..=((p.0.max(q.0) + reach).ceil().min((a.x1 - 1) as f64) as u32);
        let ys = ((p.1.min(q.1) - reach).floor().max(a.y0 as f64) as u32)
            ..=((p.1.max(q.1) + reach).ceil().min((a.y1 - 1) as f64) as u32);
        for y in ys {
            for x in xs.clone() {
                let d = seg_distance((x as f64, y as f64), p, q);
                let i = ((y - a.y0) * w + (x - a.x0)) as usize;
                if d < dist[i] {
                    dist[i] = d;
                }
            }
        }
    }
    Curve { rgb, dist }
}

fn fill(img: &mut PlotImage, b: PixelBox, rgb: Rgb) {
    for y in b.y0..b.y1 {
        for x in b.x0..b.x1 {
            img.set(x, y, rgb);
        }
    }
}

fn blend_white(c: Rgb) -> Rgb {
    c.map(|v| (v as u16 + 255).div_ceil(2) as u8)
}

/// Whether `b`, grown by a margin, stays clear of every curve and of `taken`.
fn is_free(layout: &Layout, curves: &[Curve], b: PixelBox, taken: &[PixelBox]) -> bool {
    let a = layout.area;
    let m = 3;
    let g = PixelBox {
        x0: b.x0.saturating_sub(m).max(a.x0),
        y0: b.y0.saturating_sub(m).max(a.y0),
        x1: (b.x1 + m).min(a.x1),
        y1: (b.y1 + m).min(a.y1),
    };
    let overlaps = |o: &PixelBox| g.x0 < o.x1 && o.x0 < g.x1 && g.y0 < o.y1 && o.y0 < g.y1;
    if taken.iter().any(overlaps) {
        return false;
    }
    let w = a.x1 - a.x0;
    (g.y0..g.y1).all(|y| {
        (g.x0..g.x1).all(|x| {
            let i = ((y - a.y0) * w + (x - a.x0)) as usize;
            curves.iter().all(|c| c.dist[i] > FRINGE_HALF_WIDTH)
        })
    })
}

fn corners(area: PixelBox, w: u32, h: u32) -> [PixelBox; 4] {
    let o = 8;
    let (l, r, t, b) = (area.x0 + o, area.x1 - o - w, area.y0 + o, area.y1 - o - h);
    [
        PixelBox { x0: r, y0: t, x1: r + w, y1: t + h },
        PixelBox { x0: r, y0: b, x1: r + w, y1: b + h },
        PixelBox { x0: l, y0: t, x1: l + w, y1: t + h },
        PixelBox { x0: l, y0: b, x1: l + w, y1: b + h },
    ]
}

fn blob_width(rng: &mut ChaCha8Rng, chars: usize) -> u32 {
    5 * chars as u32 + rng.random_range(0..4)
}

fn value_chars(v: f64) -> usize {
    let s = format!("{}", (v * 100.0).round() / 100.0);
    s.len()
}

/// Renders the plot described by `spec`. Same spec, same pixels.
pub fn render_fixture(spec: &FixtureSpec) -> Result<RenderedFixture, FixtureError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut legend: Vec<LegendEntry> = spec
        .series
        .iter()
        .filter(|s| s.in_legend)
        .map(|s| LegendEntry { label: s.label.clone(), rgb: s.rgb })
        .collect();
    if let Some(ce) = &spec.ce_overlay {
        if let Some(l) = &ce.label {
            legend.push(LegendEntry { label: l.clone(), rgb: ce.rgb });
        }
    }
    let label_w: Vec<u32> = legend.iter().map(|e| blob_width(&mut rng, e.label.chars().count().min(10))).collect();
    let legend_w = 4 + SWATCH_W + 4 + label_w.iter().copied().max().unwrap_or(0) + 4;
    let legend_h = 4 + ENTRY_H * legend.len() as u32;

    let curves_for = |layout: &Layout| -> Vec<Curve> {
        let mut cs: Vec<Curve> = spec.series.iter().map(|s| trace_curve(layout, &s.points, s.axis, s.rgb)).collect();
        if let Some(ce) = &spec.ce_overlay {
            cs.push(trace_curve(layout, &ce.points, Axis::Right, ce.rgb));
        }
        cs
    };

    let mut layout = Layout::new(spec, 0);
    let mut curves = curves_for(&layout);
    let mut legend_box = None;
    if !legend.is_empty() && spec.legend != LegendPosition::None {
        if spec.legend == LegendPosition::Inside {
            legend_box =
                corners(layout.area, legend_w, legend_h).into_iter().find(|b| is_free(&layout, &curves, *b, &[]));
        }
        if legend_box.is_none() {
            layout = Layout::new(spec, legend_h + 4);
            curves = curves_for(&layout);
            let x0 = layout.area.x0;
            legend_box = Some(PixelBox { x0, y0: 8, x1: x0 + legend_w, y1: 8 + legend_h });
        }
    }
    let area = layout.area;
    let mut img = PlotImage::blank(spec.width, spec.height).map_err(|e| FixtureError::SpecInvalid(e.to_string()))?;
    let mut boxes = Vec::new();

    // frame
    fill(&mut img, PixelBox { x0: area.x0 - 1, y0: area.y0 - 1, x1: area.x1 + 1, y1: area.y0 }, FRAME);
    fill(&mut img, PixelBox { x0: area.x0 - 1, y0: area.y1, x1: area.x1 + 1, y1: area.y1 + 1 }, FRAME);
    fill(&mut img, PixelBox { x0: area.x0 - 1, y0: area.y0 - 1, x1: area.x0, y1: area.y1 + 1 }, FRAME);
    fill(&mut img, PixelBox { x0: area.x1, y0: area.y0 - 1, x1: area.x1 + 1, y1: area.y1 + 1 }, FRAME);

    // data lines, then their fringes on still-white pixels
    let w = area.x1 - area.x0;
    for c in &curves {
        for (i, d) in c.dist.iter().enumerate() {
            if *d <= LINE_HALF_WIDTH {
                img.set(area.x0 + i as u32 % w, area.y0 + i as u32 / w, c.rgb);
            }
        }
    }
    if spec.anti_alias {
        for c in &curves {
            let fringe = blend_white(c.rgb);
            for (i, d) in c.dist.iter().enumerate() {
                let (x, y) = (area.x0 + i as u32 % w, area.y0 + i as u32 / w);
                if *d > LINE_HALF_WIDTH && *d <= FRINGE_HALF_WIDTH && img.get(x, y) == WHITE {
                    img.set(x, y, fringe);
                }
            }
        }
    }

    // ticks and their label blobs
    let mut ticks = Vec::new();
    let spaced = |r: [f64; 2], n: usize| -> Vec<f64> {
        (0..n).map(|k| r[0] + (r[1] - r[0]) * k as f64 / (n - 1) as f64).collect()
    };
    for v in spaced(spec.x_range, spec.x_ticks) {
        let p = layout.x_px(v);
        ticks.push(Tick { axis: AxisId::X, pixel: p, value: v });
        let col = p.round() as u32;
        let stub = PixelBox { x0: col, y0: area.y1 + 1, x1: col + 1, y1: area.y1 + 6 };
        let bw = blob_width(&mut rng, value_chars(v));
        let label =
            PixelBox { x0: col.saturating_sub(bw / 2), y0: area.y1 + 10, x1: col - bw / 2 + bw, y1: area.y1 + 17 };
        for (b, kind) in [(stub, ObjectKind::AxisTick), (label, ObjectKind::Text)] {
            fill(&mut img, b, if kind == ObjectKind::AxisTick { FRAME } else { INK });
            boxes.push(ObjectBox { kind, bounds: b });
        }
    }
    let y_axes = [(AxisId::YLeft, Axis::Left, Some(spec.y_range)), (AxisId::YRight, Axis::Right, spec.y_right_range)];
    for (id, axis, range) in y_axes {
        let Some(range) = range else { continue };
        for v in spaced(range, spec.y_ticks) {
            let p = layout.y_px(v, axis);
            ticks.push(Tick { axis: id, pixel: p, value: v });
            let row = p.round() as u32;
            let bw = blob_width(&mut rng, value_chars(v));
            let (stub, label) = match axis {
                Axis::Left => (
                    PixelBox { x0: area.x0 - 6, y0: row, x1: area.x0 - 1, y1: row + 1 },
                    PixelBox { x0: area.x0 - 10 - bw, y0: row - 3, x1: area.x0 - 10, y1: row + 4 },
                ),
                Axis::Right => (
                    PixelBox { x0: area.x1 + 1, y0: row, x1: area.x1 + 6, y1: row + 1 },
                    PixelBox { x0: area.x1 + 10, y0: row - 3, x1: area.x1 + 10 + bw, y1: row + 4 },
                ),
            };
            fill(&mut img, stub, FRAME);
            fill(&mut img, label, INK);
            boxes.push(ObjectBox { kind: ObjectKind::AxisTick, bounds: stub });
            boxes.push(ObjectBox { kind: ObjectKind::Text, bounds: label });
        }
    }

    // axis titles
    let mid_x = (area.x0 + area.x1) / 2;
    let mid_y = (area.y0 + area.y1) / 2;
    let mut titles = vec![
        PixelBox { x0: mid_x - 30, y0: spec.height - 16, x1: mid_x + 30, y1: spec.height - 8 },
        PixelBox { x0: 6, y0: mid_y - 30, x1: 14, y1: mid_y + 30 },
    ];
    if spec.y_right_range.is_some() {
        titles.push(PixelBox { x0: spec.width - 14, y0: mid_y - 30, x1: spec.width - 6, y1: mid_y + 30 });
    }
    for b in titles {
        fill(&mut img, b, INK);
        boxes.push(ObjectBox { kind: ObjectKind::AxisLabel, bounds: b });
    }

    // legend
    let mut taken = Vec::new();
    if let Some(lb) = legend_box {
        for (k, (e, bw)) in legend.iter().zip(&label_w).enumerate() {
            let y = lb.y0 + 4 + ENTRY_H * k as u32 + ENTRY_H / 2 - 1;
            fill(&mut img, PixelBox { x0: lb.x0 + 4, y0: y, x1: lb.x0 + 4 + SWATCH_W, y1: y + 2 }, e.rgb);
            let lx = lb.x0 + 8 + SWATCH_W;
            fill(&mut img, PixelBox { x0: lx, y0: y - 2, x1: lx + bw, y1: y + 4 }, INK);
        }
        boxes.push(ObjectBox { kind: ObjectKind::Legend, bounds: lb });
        taken.push(lb);
    }
    if spec.inset_text {
        let (tw, th) = (blob_width(&mut rng, 8), 8);
        if let Some(b) = corners(area, tw, th).into_iter().find(|b| is_free(&layout, &curves, *b, &taken)) {
            fill(&mut img, b, INK);
            boxes.push(ObjectBox { kind: ObjectKind::Text, bounds: b });
        }
    }

    let mut truth: Vec<TruthSeries> = spec
        .series
        .iter()
        .map(|s| TruthSeries {
            series: CycleSeries { label: s.label.clone(), points: s.points.clone(), axis: s.axis },
            ce: false,
        })
        .collect();
    if let Some(ce) = &spec.ce_overlay {
        truth.push(TruthSeries {
            series: CycleSeries {
                label: ce.label.clone().unwrap_or_else(|| "ce".into()),
                points: ce.points.clone(),
                axis: Axis::Right,
            },
            ce: true,
        });
    }

    Ok(RenderedFixture {
        image: img,
        annotation: PlotAnnotation {
            object_boxes: boxes,
            tick_values: ticks,
            legend_entries: legend,
            right_axis_present: spec.y_right_range.is_some(),
            plot_area: Some(area),
        },
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::SeriesSpec;

    fn flat_spec() -> FixtureSpec {
        FixtureSpec {
            name: "flat".into(),
            width: 400,
            height: 300,
            series: vec![SeriesSpec {
                label: "A".into(),
                rgb: [220, 30, 30],
                points: (1..=50).map(|c| (c, 120.0)).collect(),
                axis: Axis::Left,
                in_legend: true,
            }],
            x_range: [0.0, 50.0],
            y_range: [0.0, 200.0],
            y_right_range: None,
            x_ticks: 6,
            y_ticks: 5,
            legend: LegendPosition::None,
            ce_overlay: None,
            anti_alias: false,
            inset_text: false,
            seed: 1,
        }
    }

    #[test]
    fn flat_series_is_a_two_row_band() {
        let r = render_fixture(&flat_spec()).unwrap();
        let a = r.annotation.plot_area.unwrap();
        let mut rows = std::collections::BTreeSet::new();
        for y in a.y0..a.y1 {
            for x in a.x0..a.x1 {
                if r.image.get(x, y) != WHITE {
                    rows.insert(y);
                }
            }
        }
        assert_eq!(rows.len(), 2);
        let (r0, r1) = (*rows.first().unwrap(), *rows.last().unwrap());
        assert_eq!(r1, r0 + 1);
    }

    #[test]
    fn deterministic() {
        let mut spec = flat_spec();
        spec.anti_alias = true;
        spec.legend = LegendPosition::Inside;
        spec.inset_text = true;
        assert_eq!(render_fixture(&spec).unwrap(), render_fixture(&spec).unwrap());
    }

    #[test]
    fn ticks_calibrate_exactly() {
        let r = render_fixture(&flat_spec()).unwrap();
        let maps = crate::digitizer::calibrate_axes(&r.annotation).unwrap();
        for t in &r.annotation.tick_values {
            let m = if t.axis == AxisId::X { maps.x } else { maps.y_left };
            assert!((m.value(t.pixel) - t.value).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_specs() {
        let mut s = flat_spec();
        s.y_range = [5.0, 5.0];
        assert!(matches!(render_fixture(&s), Err(FixtureError::SpecInvalid(_))));
        let mut s = flat_spec();
        s.series[0].points[3].1 = 500.0;
        assert!(render_fixture(&s).is_err());
    }
}
