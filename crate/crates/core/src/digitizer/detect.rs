//! Object detectors. The annotation loader reads sidecar files; the rule
//! baseline finds the axis frame, tick stubs and text blobs from the pixels.

use std::path::PathBuf;

use super::annotation::{ObjectBox, ObjectKind, PixelBox, PlotAnnotation};
use super::image::{PlotImage, Rgb};
use super::DigitizeError;

pub trait Detector: Send + Sync {
    fn detect(&self, image: &PlotImage) -> Result<PlotAnnotation, DigitizeError>;
}

/// Reads `<dir>/<graph file stem>.annotation.json` for the image's provenance.
#[derive(Debug, Clone)]
pub struct AnnotationFileDetector {
    pub dir: PathBuf,
}

impl AnnotationFileDetector {
    pub fn path_for(&self, image: &PlotImage) -> Option<PathBuf> {
        let meta = image.provenance.as_ref()?;
        Some(self.dir.join(format!("{}.annotation.json", meta.file_stem())))
    }
}

impl Detector for AnnotationFileDetector {
    fn detect(&self, image: &PlotImage) -> Result<PlotAnnotation, DigitizeError> {
        let path =
            self.path_for(image).ok_or_else(|| DigitizeError::DetectorUnavailable("image has no provenance".into()))?;
        let src = std::fs::read_to_string(&path)
            .map_err(|e| DigitizeError::DetectorUnavailable(format!("{}: {e}", path.display())))?;
        PlotAnnotation::from_json(&src)
    }
}

/// Heuristic detector. It cannot read tick values, so the annotation it
/// returns carries boxes and the plot area but no tick values.
#[derive(Debug, Clone)]
pub struct RuleBasedDetector {
    /// Brightest channel value that still counts as dark ink.
    pub dark_max: u8,
    /// Minimum frame line length as a fraction of the image side.
    pub min_frame_fraction: f64,
    pub max_tick_len: u32,
}

impl Default for RuleBasedDetector {
    fn default() -> Self {
        Self { dark_max: 110, min_frame_fraction: 0.5, max_tick_len: 10 }
    }
}

impl RuleBasedDetector {
    fn dark(&self, c: Rgb) -> bool {
        let (lo, hi) = (*c.iter().min().unwrap(), *c.iter().max().unwrap());
        hi <= self.dark_max && hi - lo <= 40
    }

    fn longest_run(&self, cells: impl Iterator<Item = Rgb>) -> (u32, u32) {
        let (mut best, mut best_start, mut cur, mut start) = (0, 0, 0, 0);
        for (i, c) in cells.enumerate() {
            if self.dark(c) {
                if cur == 0 {
                    start = i as u32;
                }
                cur += 1;
                if cur > best {
                    best = cur;
                    best_start = start;
                }
            } else {
                cur = 0;
            }
        }
        (best_start, best)
    }
}

/// Indices with a qualifying run, grouped into bands of adjacent indices.
fn bands(flags: &[bool]) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < flags.len() {
        if flags[i] {
            let s = i;
            while i < flags.len() && flags[i] {
                i += 1;
            }
            out.push((s as u32, i as u32));
        } else {
            i += 1;
        }
    }
    out
}

impl Detector for RuleBasedDetector {
    fn detect(&self, image: &PlotImage) -> Result<PlotAnnotation, DigitizeError> {
        let (w, h) = (image.width(), image.height());
        let row_runs: Vec<(u32, u32)> = (0..h).map(|y| self.longest_run((0..w).map(|x| image.get(x, y)))).collect();
        let col_runs: Vec<(u32, u32)> = (0..w).map(|x| self.longest_run((0..h).map(|y| image.get(x, y)))).collect();
        let min_h = (self.min_frame_fraction * w as f64) as u32;
        let min_v = (self.min_frame_fraction * h as f64) as u32;
        let hbands = bands(&row_runs.iter().map(|r| r.1 >= min_h).collect::<Vec<_>>());
        let vbands = bands(&col_runs.iter().map(|r| r.1 >= min_v).collect::<Vec<_>>());
        let (Some(&bottom), Some(&left)) = (hbands.last(), vbands.first()) else {
            return Err(DigitizeError::NoAxesFound);
        };
        let top = hbands.first().filter(|b| b.1 + 10 < bottom.0).copied();
        let right = vbands.last().filter(|b| b.0 > left.1 + 10).copied();

        let x_run = row_runs[bottom.0 as usize];
        let y_run = col_runs[left.0 as usize];
        let area = PixelBox {
            x0: left.1,
            y0: top.map_or(y_run.0, |t| t.1),
            x1: right.map_or(x_run.0 + x_run.1, |r| r.0),
            y1: bottom.0,
        };
        let frame = PixelBox {
            x0: left.0,
            y0: top.map_or(y_run.0, |t| t.0),
            x1: right.map_or(x_run.0 + x_run.1, |r| r.1),
            y1: bottom.1,
        };

        let mut boxes = Vec::new();
        let mut tick_pixels = vec![false; (w * h) as usize];
        // x ticks hang below the frame, y ticks stick out to the left and right
        let stubs = |along: std::ops::Range<u32>, at: &dyn Fn(u32, u32) -> Option<Rgb>| -> Vec<(u32, u32, u32)> {
            let mut found = Vec::new();
            let mut run: Option<(u32, u32)> = None;
            let len_at =
                |i: u32| (0..=self.max_tick_len).take_while(|&d| at(i, d).is_some_and(|c| self.dark(c))).count() as u32;
            for i in along.clone().chain([along.end]) {
                let len = if i < along.end { len_at(i) } else { 0 };
                let stub = len >= 2 && len <= self.max_tick_len;
                match (stub, run) {
                    (true, None) => run = Some((i, len)),
                    (true, Some((s, l))) => run = Some((s, l.max(len))),
                    (false, Some((s, l))) => {
                        if i - s <= 3 {
                            found.push((s, i, l));
                        }
                        run = None;
                    }
                    (false, None) => {}
                }
            }
            found
        };
        let below = |x: u32, d: u32| {
            let y = frame.y1 + d;
            (y < h).then(|| image.get(x, y))
        };
        for (s, e, l) in stubs(area.x0..area.x1, &below) {
            boxes.push(PixelBox { x0: s, y0: frame.y1, x1: e, y1: frame.y1 + l });
        }
        let leftward = |y: u32, d: u32| frame.x0.checked_sub(d + 1).map(|x| image.get(x, y));
        for (s, e, l) in stubs(area.y0..area.y1, &leftward) {
            boxes.push(PixelBox { x0: frame.x0 - l, y0: s, x1: frame.x0, y1: e });
        }
        let mut right_axis_present = false;
        if right.is_some() {
            let rightward = |y: u32, d: u32| {
                let x = frame.x1 + d;
                (x < w).then(|| image.get(x, y))
            };
            for (s, e, l) in stubs(area.y0..area.y1, &rightward) {
                right_axis_present = true;
                boxes.push(PixelBox { x0: frame.x1, y0: s, x1: frame.x1 + l, y1: e });
            }
        }
        for b in &boxes {
            for y in b.y0..b.y1 {
                for x in b.x0..b.x1 {
                    tick_pixels[(y * w + x) as usize] = true;
                }
            }
        }
        let mut objects: Vec<ObjectBox> =
            boxes.into_iter().map(|bounds| ObjectBox { kind: ObjectKind::AxisTick, bounds }).collect();

        // text blobs: ink outside the frame that is not a tick stub
        let mut seen = vec![false; (w * h) as usize];
        for y in 0..h {
            for x in 0..w {
                let i = (y * w + x) as usize;
                if seen[i] || tick_pixels[i] || frame.contains(x, y) || image.get(x, y).iter().min().unwrap() >= &245 {
                    continue;
                }
                let mut b = PixelBox { x0: x, y0: y, x1: x + 1, y1: y + 1 };
                let mut stack = vec![(x, y)];
                seen[i] = true;
                while let Some((cx, cy)) = stack.pop() {
                    b.x0 = b.x0.min(cx);
                    b.y0 = b.y0.min(cy);
                    b.x1 = b.x1.max(cx + 1);
                    b.y1 = b.y1.max(cy + 1);
                    for (dx, dy) in [(-1i64, -1i64), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)] {
                        let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let (nx, ny) = (nx as u32, ny as u32);
                        let j = (ny * w + nx) as usize;
                        if !seen[j]
                            && !tick_pixels[j]
                            && !frame.contains(nx, ny)
                            && image.get(nx, ny).iter().min().unwrap() < &245
                        {
                            seen[j] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
                objects.push(ObjectBox { kind: ObjectKind::Text, bounds: b });
            }
        }

        Ok(PlotAnnotation {
            object_boxes: objects,
            tick_values: Vec::new(),
            legend_entries: Vec::new(),
            right_axis_present,
            plot_area: Some(area),
        })
    }
}
