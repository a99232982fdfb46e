//! Color separation: DBSCAN over RGB vectors, anti-alias fringe folding and
//! the ambiguity checks that mark a graph unextractable.

use std::collections::{BTreeMap, HashMap, VecDeque};

use super::annotation::PixelBox;
use super::image::{PlotImage, Rgb};
use super::{DigitizeError, DigitizerConfig};

/// Pixels of one data line and the mean color of its core.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelCluster {
    pub rgb: [f64; 3],
    /// `(x, y)` sorted by column then row.
    pub pixels: Vec<(u32, u32)>,
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

pub fn rgb_f(c: Rgb) -> [f64; 3] {
    [c[0] as f64, c[1] as f64, c[2] as f64]
}

pub fn rgb_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    dist2(a, b).sqrt()
}

/// Distance from `p` to the segment running from `c` to white, and the
/// position along it (0 at `c`, 1 at white).
fn to_white_segment(p: [f64; 3], c: [f64; 3]) -> (f64, f64) {
    let d = [255.0 - c[0], 255.0 - c[1], 255.0 - c[2]];
    let len2: f64 = d.iter().map(|v| v * v).sum();
    if len2 == 0.0 {
        return (dist2(p, c).sqrt(), 0.0);
    }
    let t = ((0..3).map(|i| (p[i] - c[i]) * d[i]).sum::<f64>() / len2).clamp(0.0, 1.0);
    let q = [c[0] + t * d[0], c[1] + t * d[1], c[2] + t * d[2]];
    (dist2(p, q).sqrt(), t)
}

/// DBSCAN over distinct colors, each weighted by how many pixels carry it.
/// A color is core when the total weight within `eps` (itself included)
/// reaches `min_pts`, which makes this equal to pixel-level DBSCAN.
/// Returns the cluster index of every color, `None` for noise. Clusters are
/// numbered in order of their first core color.
pub fn dbscan_weighted(colors: &[(Rgb, usize)], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let cell = eps.max(1.0);
    let key = |c: Rgb| -> [i32; 3] { [0, 1, 2].map(|i| (c[i] as f64 / cell).floor() as i32) };
    let mut grid: HashMap<[i32; 3], Vec<usize>> = HashMap::new();
    for (i, (c, _)) in colors.iter().enumerate() {
        grid.entry(key(*c)).or_default().push(i);
    }
    let eps2 = eps * eps;
    let neighbors = |i: usize| -> Vec<usize> {
        let k = key(colors[i].0);
        let p = rgb_f(colors[i].0);
        let mut out = Vec::new();
        for dr in -1..=1 {
            for dg in -1..=1 {
                for db in -1..=1 {
                    if let Some(ids) = grid.get(&[k[0] + dr, k[1] + dg, k[2] + db]) {
                        out.extend(ids.iter().copied().filter(|&j| dist2(p, rgb_f(colors[j].0)) <= eps2));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    };

    let core: Vec<bool> =
        (0..colors.len()).map(|i| neighbors(i).iter().map(|&j| colors[j].1).sum::<usize>() >= min_pts).collect();
    let mut labels = vec![None; colors.len()];
    let mut next = 0;
    for start in 0..colors.len() {
        if !core[start] || labels[start].is_some() {
            continue;
        }
        let id = next;
        next += 1;
        labels[start] = Some(id);
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in neighbors(i) {
                if labels[j].is_none() {
                    labels[j] = Some(id);
                    if core[j] {
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    labels
}

struct Group {
    core_rgb: [f64; 3],
    colors: Vec<usize>,
    weight: usize,
}

/// Clusters foreground pixels by color. Pixel order does not matter.
pub fn separate_pixels(pixels: &[(u32, u32, Rgb)], cfg: &DigitizerConfig) -> Result<Vec<PixelCluster>, DigitizeError> {
    let mut by_color: BTreeMap<Rgb, Vec<(u32, u32)>> = BTreeMap::new();
    for &(x, y, c) in pixels {
        if c.iter().min().copied().unwrap_or(255) < cfg.background_min {
            by_color.entry(c).or_default().push((x, y));
        }
    }
    if by_color.is_empty() {
        return Err(DigitizeError::NoDataPixels);
    }
    let colors: Vec<(Rgb, usize)> = by_color.iter().map(|(c, p)| (*c, p.len())).collect();
    let labels = dbscan_weighted(&colors, cfg.eps, cfg.min_pts);

    let n_clusters = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Group> =
        (0..n_clusters).map(|_| Group { core_rgb: [0.0; 3], colors: Vec::new(), weight: 0 }).collect();
    let mut noise = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        match l {
            Some(id) => {
                let g = &mut groups[*id];
                g.colors.push(i);
                g.weight += colors[i].1;
            }
            None => noise.push(i),
        }
    }
    for g in &mut groups {
        let mut sum = [0.0; 3];
        for &i in &g.colors {
            let c = rgb_f(colors[i].0);
            for k in 0..3 {
                sum[k] += c[k] * colors[i].1 as f64;
            }
        }
        g.core_rgb = sum.map(|s| s / g.weight as f64);
    }

    // Fold anti-alias fringes: a lighter cluster lying on another cluster's
    // blend-to-white segment belongs to that cluster.
    let brightness = |c: [f64; 3]| c[0] + c[1] + c[2];
    let mut parent: Vec<usize> = (0..groups.len()).collect();
    for b in 0..groups.len() {
        let pb = groups[b].core_rgb;
        let best = (0..groups.len())
            .filter(|&a| a != b && brightness(groups[a].core_rgb) < brightness(pb))
            .filter(|&a| rgb_distance(pb, groups[a].core_rgb) > cfg.eps)
            .map(|a| (to_white_segment(pb, groups[a].core_rgb).0, a))
            .filter(|(d, _)| *d <= cfg.eps)
            .min_by(|x, y| x.0.total_cmp(&y.0).then(groups[y.1].weight.cmp(&groups[x.1].weight)));
        if let Some((_, a)) = best {
            parent[b] = a;
        }
    }
    let root = |mut i: usize| {
        // parents are strictly darker, so this terminates
        while parent[i] != i {
            i = parent[i];
        }
        i
    };
    let roots: Vec<usize> = (0..groups.len()).filter(|&i| parent[i] == i).collect();
    let mut members: BTreeMap<usize, Vec<usize>> = roots.iter().map(|&r| (r, Vec::new())).collect();
    for (g, group) in groups.iter().enumerate() {
        members.get_mut(&root(g)).unwrap().extend(&group.colors);
    }
    for i in noise {
        let p = rgb_f(colors[i].0);
        let nearest = roots
            .iter()
            .map(|&r| (to_white_segment(p, groups[r].core_rgb).0, r))
            .filter(|(d, _)| *d <= cfg.eps)
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        if let Some((_, r)) = nearest {
            members.get_mut(&r).unwrap().push(i);
        }
    }

    let mut clusters: Vec<PixelCluster> = members
        .into_iter()
        .map(|(r, cs)| {
            let mut pixels: Vec<(u32, u32)> = cs.iter().flat_map(|&i| by_color[&colors[i].0].iter().copied()).collect();
            pixels.sort_unstable();
            PixelCluster { rgb: groups[r].core_rgb, pixels }
        })
        .filter(|c| c.pixels.len() >= cfg.min_cluster_pixels)
        .collect();
    if clusters.is_empty() {
        return Err(DigitizeError::NoDataPixels);
    }
    clusters.sort_by(|a, b| b.pixels.len().cmp(&a.pixels.len()).then_with(|| a.rgb.partial_cmp(&b.rgb).unwrap()));

    for (i, a) in clusters.iter().enumerate() {
        for b in &clusters[i + 1..] {
            let d = rgb_distance(a.rgb, b.rgb);
            if d < cfg.ambiguity_threshold {
                return Err(DigitizeError::ColorAmbiguity(format!(
                    "line colors {:.0?} and {:.0?} are {d:.1} apart",
                    a.rgb, b.rgb
                )));
            }
        }
        let f = multi_run_fraction(&a.pixels, cfg.multi_run_gap);
        if f >= cfg.multi_run_fraction {
            return Err(DigitizeError::ColorAmbiguity(format!(
                "color {:.0?} draws separate lines in {:.0}% of columns",
                a.rgb,
                100.0 * f
            )));
        }
    }
    Ok(clusters)
}

/// Fraction of occupied columns holding two or more vertical runs separated
/// by more than `gap` pixels. `pixels` must be sorted by column then row.
pub fn multi_run_fraction(pixels: &[(u32, u32)], gap: u32) -> f64 {
    let mut columns = 0usize;
    let mut multi = 0usize;
    for col in pixels.chunk_by(|a, b| a.0 == b.0) {
        columns += 1;
        if col.windows(2).any(|w| w[1].1 - w[0].1 > gap + 1) {
            multi += 1;
        }
    }
    if columns == 0 {
        0.0
    } else {
        multi as f64 / columns as f64
    }
}

/// Separates the foreground of `image` inside `region` into line clusters.
pub fn separate_series(
    image: &PlotImage,
    region: Option<PixelBox>,
    cfg: &DigitizerConfig,
) -> Result<Vec<PixelCluster>, DigitizeError> {
    let r = region.unwrap_or(PixelBox { x0: 0, y0: 0, x1: image.width(), y1: image.height() });
    let mut pixels = Vec::new();
    for y in r.y0..r.y1.min(image.height()) {
        for x in r.x0..r.x1.min(image.width()) {
            pixels.push((x, y, image.get(x, y)));
        }
    }
    separate_pixels(&pixels, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Textbook pixel-level DBSCAN with an all-pairs neighbor scan.
    pub(crate) fn brute_force_cluster_count(points: &[Rgb], eps: f64, min_pts: usize) -> usize {
        let n = points.len();
        let near = |i: usize, j: usize| rgb_distance(rgb_f(points[i]), rgb_f(points[j])) <= eps;
        let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        for s in 0..n {
            if !core[s] || label[s] != usize::MAX {
                continue;
            }
            label[s] = count;
            let mut stack = vec![s];
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    if label[j] == usize::MAX && near(i, j) {
                        label[j] = count;
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

    fn weighted(points: &[Rgb]) -> Vec<(Rgb, usize)> {
        let mut m: BTreeMap<Rgb, usize> = BTreeMap::new();
        for p in points {
            *m.entry(*p).or_default() += 1;
        }
        m.into_iter().collect()
    }

    #[test]
    fn weighted_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for round in 0..20 {
            let centers: Vec<Rgb> = (0..rng.random_range(1..5)).map(|_| rng.random()).collect();
            let mut pts = Vec::new();
            for _ in 0..600 {
                let c = centers[rng.random_range(0..centers.len())];
                let spread = 1 + round % 20;
                pts.push(c.map(|v| (v as i32 + rng.random_range(-spread..=spread)).clamp(0, 255) as u8));
            }
            let w = weighted(&pts);
            let labels = dbscan_weighted(&w, 24.0, 12);
            let fast = labels.iter().flatten().max().map_or(0, |m| m + 1);
            assert_eq!(fast, brute_force_cluster_count(&pts, 24.0, 12), "round {round}");
        }
    }

    fn cfg() -> DigitizerConfig {
        DigitizerConfig::default()
    }

    fn line(color: Rgb, row: u32, cols: std::ops::Range<u32>) -> Vec<(u32, u32, Rgb)> {
        cols.flat_map(|x| [(x, row, color), (x, row + 1, color)]).collect()
    }

    #[test]
    fn red_and_blue_lines() {
        let mut px = line([255, 0, 0], 10, 0..100);
        px.extend(line([0, 0, 255], 40, 0..100));
        let cs = separate_pixels(&px, &cfg()).unwrap();
        assert_eq!(cs.len(), 2);
        let mut rgbs: Vec<_> = cs.iter().map(|c| c.rgb).collect();
        rgbs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(rgbs, vec![[0.0, 0.0, 255.0], [255.0, 0.0, 0.0]]);
    }

    #[test]
    fn fringe_folds_into_its_line() {
        let mut px = line([0, 0, 255], 20, 0..100);
        px.extend((0..100).flat_map(|x| [(x, 19, [128, 128, 255]), (x, 22, [128, 128, 255])]));
        let cs = separate_pixels(&px, &cfg()).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].pixels.len(), 400);
        assert_eq!(cs[0].rgb, [0.0, 0.0, 255.0]);
    }

    #[test]
    fn near_identical_colors_are_ambiguous() {
        let mut px = line([200, 30, 30], 10, 0..100);
        px.extend(line([205, 36, 34], 50, 0..100));
        assert!(matches!(separate_pixels(&px, &cfg()), Err(DigitizeError::ColorAmbiguity(_))));
        let mut px = line([200, 30, 30], 10, 0..100);
        px.extend(line([200, 60, 50], 50, 0..100));
        assert!(matches!(separate_pixels(&px, &cfg()), Err(DigitizeError::ColorAmbiguity(_))));
    }

    #[test]
    fn empty_foreground() {
        let px = vec![(0, 0, [250, 250, 250])];
        assert_eq!(separate_pixels(&px, &cfg()), Err(DigitizeError::NoDataPixels));
    }

    #[test]
    fn run_fraction() {
        let px = vec![(0, 1), (0, 2), (0, 9), (1, 1), (1, 3)];
        assert_eq!(multi_run_fraction(&px, 3), 0.5);
    }
}
