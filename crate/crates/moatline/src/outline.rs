//! From merged edge raster to measurable vector outlines: binarize,
//! clean, label, trace, measure, export.

use std::collections::HashMap;
use std::path::Path;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geo::GeoRef;
use crate::raster::Raster;

/// Row-major boolean mask with raster dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BitMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut mask = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    mask.set(x, y, true);
                }
            }
        }
        mask
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = value;
    }

    /// In-bounds check plus lookup, false outside.
    #[inline]
    pub fn get_checked(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64
            && self.get(x as u32, y as u32)
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// 0.0 / 1.0 raster view, for writing mask artifacts.
    pub fn to_raster(&self) -> Raster {
        Raster::new(
            self.width,
            self.height,
            self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
    }
}

/// Threshold selection for [`binarize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMethod {
    /// Foreground where `v >= level`.
    Fixed(f64),
    /// Otsu's between-class-variance maximum over a 256-bin histogram.
    Otsu,
}

/// Otsu threshold level in `[0, 1]`, or `None` when the histogram is
/// degenerate (single occupied bin).
pub fn otsu_level(r: &Raster) -> Option<f64> {
    let mut hist = [0u64; 256];
    for &v in r.data() {
        hist[crate::raster::quantize_u8(v) as usize] += 1;
    }
    let total = r.data().len() as f64;
    let total_sum: f64 = hist.iter().enumerate().map(|(i, &n)| i as f64 * n as f64).sum();

    let mut best_t = None;
    let mut best_variance = 0.0;
    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    for t in 0..255usize {
        w0 += hist[t] as f64;
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (total_sum - sum0) / w1;
        let variance = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if variance > best_variance {
            best_variance = variance;
            best_t = Some(t);
        }
    }
    best_t.map(|t| (t as f64 + 0.5) / 255.0)
}

/// Thresholds a raster in `[0, 1]` into a mask. A degenerate Otsu
/// histogram (constant image) yields all background.
pub fn binarize(r: &Raster, method: ThresholdMethod) -> BitMask {
    let level = match method {
        ThresholdMethod::Fixed(level) => level,
        ThresholdMethod::Otsu => match otsu_level(r) {
            Some(level) => level,
            None => return BitMask::new(r.width(), r.height()),
        },
    };
    BitMask::from_fn(r.width(), r.height(), |x, y| r.get(x, y) >= level)
}

/// Morphological operation kind for [`morph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphOp {
    /// Erode then dilate: removes speckle smaller than the disc.
    Open,
    /// Dilate then erode: bridges gaps smaller than the disc.
    Close,
}

/// Opening/closing with a disc structuring element of the given radius.
/// Samples outside the image count as background.
pub fn morph(m: &BitMask, op: MorphOp, radius: u32) -> BitMask {
    assert!(radius >= 1, "structuring element radius must be >= 1");
    let mut offsets = Vec::new();
    let r = radius as i64;
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                offsets.push((dx, dy));
            }
        }
    }
    let dilate = |m: &BitMask| {
        BitMask::from_fn(m.width(), m.height(), |x, y| {
            offsets
                .iter()
                .any(|&(dx, dy)| m.get_checked(x as i64 + dx, y as i64 + dy))
        })
    };
    let erode = |m: &BitMask| {
        BitMask::from_fn(m.width(), m.height(), |x, y| {
            offsets
                .iter()
                .all(|&(dx, dy)| m.get_checked(x as i64 + dx, y as i64 + dy))
        })
    };
    match op {
        MorphOp::Open => dilate(&erode(m)),
        MorphOp::Close => erode(&dilate(m)),
    }
}

/// Per-component statistics, recomputable from the label grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentStats {
    pub label: u32,
    pub pixel_count: usize,
    /// Inclusive pixel-index bounds (x0, y0, x1, y1).
    pub bbox: (u32, u32, u32, u32),
    /// Mean of member pixel centers, in continuous pixel coordinates.
    pub centroid: (f64, f64),
    /// First member in row-major scan order (topmost, then leftmost).
    pub first_pixel: (u32, u32),
}

/// Dense 8-connected labeling: 0 = background, labels 1..=N ordered by
/// first-scan encounter.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    width: u32,
    height: u32,
    labels: Vec<u32>,
    stats: Vec<ComponentStats>,
}

impl LabelMap {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn label(&self, x: u32, y: u32) -> u32 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn component_count(&self) -> usize {
        self.stats.len()
    }

    pub fn stats(&self) -> &[ComponentStats] {
        &self.stats
    }

    #[inline]
    fn is_label(&self, x: i64, y: i64, target: u32) -> bool {
        x >= 0
            && y >= 0
            && x < self.width as i64
            && y < self.height as i64
            && self.label(x as u32, y as u32) == target
    }
}

/// 8-connected component labeling by breadth-first scan.
pub fn connected_components(m: &BitMask) -> LabelMap {
    let (w, h) = (m.width(), m.height());
    let mut labels = vec![0u32; w as usize * h as usize];
    let mut stats = Vec::new();
    let mut queue: Vec<(u32, u32)> = Vec::new();
    let idx = |x: u32, y: u32| y as usize * w as usize + x as usize;

    for y in 0..h {
        for x in 0..w {
            if !m.get(x, y) || labels[idx(x, y)] != 0 {
                continue;
            }
            let label = stats.len() as u32 + 1;
            labels[idx(x, y)] = label;
            queue.push((x, y));
            let mut count = 0usize;
            let mut sum = (0.0f64, 0.0f64);
            let mut bbox = (x, y, x, y);
            while let Some((cx, cy)) = queue.pop() {
                count += 1;
                sum.0 += cx as f64;
                sum.1 += cy as f64;
                bbox.0 = bbox.0.min(cx);
                bbox.1 = bbox.1.min(cy);
                bbox.2 = bbox.2.max(cx);
                bbox.3 = bbox.3.max(cy);
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let (nx, ny) = (nx as u32, ny as u32);
                        if m.get(nx, ny) && labels[idx(nx, ny)] == 0 {
                            labels[idx(nx, ny)] = label;
                            queue.push((nx, ny));
                        }
                    }
                }
            }
            stats.push(ComponentStats {
                label,
                pixel_count: count,
                bbox,
                centroid: (sum.0 / count as f64 + 0.5, sum.1 / count as f64 + 0.5),
                first_pixel: (x, y),
            });
        }
    }
    LabelMap {
        width: w,
        height: h,
        labels,
        stats,
    }
}

/// Closed outer boundary of one component, in pixel-corner coordinates
/// (pixel `(i, j)` spans `[i, i+1] x [j, j+1]`). First vertex equals the
/// last; orientation is counterclockwise on screen.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelRing {
    pub label: u32,
    pub vertices: Vec<(f64, f64)>,
    pub pixel_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Heading {
    East,
    South,
    West,
    North,
}

impl Heading {
    fn delta(self) -> (i64, i64) {
        match self {
            Heading::East => (1, 0),
            Heading::South => (0, 1),
            Heading::West => (-1, 0),
            Heading::North => (0, -1),
        }
    }

    fn left(self) -> Heading {
        match self {
            Heading::East => Heading::North,
            Heading::North => Heading::West,
            Heading::West => Heading::South,
            Heading::South => Heading::East,
        }
    }

    fn right(self) -> Heading {
        match self {
            Heading::East => Heading::South,
            Heading::South => Heading::West,
            Heading::West => Heading::North,
            Heading::North => Heading::East,
        }
    }

    /// Pixels diagonally ahead of a corner, relative to travel heading.
    fn ahead_pixels(self, corner: (i64, i64)) -> ((i64, i64), (i64, i64)) {
        let (cx, cy) = corner;
        match self {
            Heading::East => ((cx, cy - 1), (cx, cy)),
            Heading::South => ((cx, cy), (cx - 1, cy)),
            Heading::West => ((cx - 1, cy), (cx - 1, cy - 1)),
            Heading::North => ((cx - 1, cy - 1), (cx, cy - 1)),
        }
    }
}

/// Traces the outer boundary ring of every component with at least
/// `min_area` pixels, walking the cracks between foreground and
/// background with the component kept on the left. Diagonal-only necks
/// stay in one ring (8-connectivity).
pub fn trace_contours(lm: &LabelMap, min_area: usize) -> Vec<PixelRing> {
    lm.stats()
        .iter()
        .filter(|s| s.pixel_count >= min_area)
        .map(|s| PixelRing {
            label: s.label,
            vertices: trace_single(lm, s),
            pixel_count: s.pixel_count,
        })
        .collect()
}

fn trace_single(lm: &LabelMap, stats: &ComponentStats) -> Vec<(f64, f64)> {
    let target = stats.label;
    let (fx, fy) = stats.first_pixel;
    // The first-scan pixel is on the topmost row, so its upper edge is
    // boundary; walking west along it keeps the component on the left.
    let start = ((fx as i64 + 1, fy as i64), Heading::West);
    let mut ring: Vec<(f64, f64)> = Vec::new();
    let (mut corner, mut heading) = start;
    // A directed crack is visited at most once per cycle.
    let step_cap = 8 * (lm.width() as usize + 2) * (lm.height() as usize + 2);
    for _ in 0..step_cap {
        let (dx, dy) = heading.delta();
        let next = (corner.0 + dx, corner.1 + dy);
        let (ahead_left, ahead_right) = heading.ahead_pixels(next);
        let new_heading = if lm.is_label(ahead_right.0, ahead_right.1, target) {
            heading.right()
        } else if lm.is_label(ahead_left.0, ahead_left.1, target) {
            heading
        } else {
            heading.left()
        };
        if new_heading != heading {
            ring.push((next.0 as f64, next.1 as f64));
        }
        corner = next;
        heading = new_heading;
        if (corner, heading) == start {
            break;
        }
    }
    // Rotate so the ring starts at its first emitted turn, then close it.
    if let Some(&first) = ring.first() {
        ring.push(first);
    }
    ring
}

/// A traced outline with geographic ring and metric measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct SitePolygon {
    pub label: u32,
    /// Closed pixel-corner ring (first = last).
    pub ring_px: Vec<(f64, f64)>,
    /// The same ring as (lon, lat) pairs.
    pub ring_lonlat: Vec<(f64, f64)>,
    pub area_m2: f64,
    pub perimeter_m: f64,
    /// Longest vertex-pair distance ("600 m long").
    pub extent_m: f64,
    /// Minimal caliper width ("500 m wide").
    pub width_m: f64,
    pub centroid_px: (f64, f64),
    pub pixel_count: usize,
}

/// Signed shoelace sum in raster coordinates (negative for rings that
/// run counterclockwise on screen, y pointing down).
fn shoelace_signed(ring: &[(f64, f64)]) -> f64 {
    let mut acc = 0.0;
    for pair in ring.windows(2) {
        let (x0, y0) = pair[0];
        let (x1, y1) = pair[1];
        acc += x0 * y1 - x1 * y0;
    }
    acc / 2.0
}

/// Enclosed pixel area of a closed ring.
pub fn ring_pixel_area(ring: &[(f64, f64)]) -> f64 {
    shoelace_signed(ring).abs()
}

fn ring_centroid(ring: &[(f64, f64)]) -> (f64, f64) {
    let a = shoelace_signed(ring);
    if a.abs() < 1e-12 {
        // Degenerate ring: fall back to the vertex mean.
        let n = (ring.len() - 1).max(1) as f64;
        let (sx, sy) = ring[..ring.len() - 1]
            .iter()
            .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x, sy + y));
        return (sx / n, sy / n);
    }
    let mut cx = 0.0;
    let mut cy = 0.0;
    for pair in ring.windows(2) {
        let (x0, y0) = pair[0];
        let (x1, y1) = pair[1];
        let cross = x0 * y1 - x1 * y0;
        cx += (x0 + x1) * cross;
        cy += (y0 + y1) * cross;
    }
    (cx / (6.0 * a), cy / (6.0 * a))
}

fn perimeter_px(ring: &[(f64, f64)]) -> f64 {
    ring.windows(2)
        .map(|p| (p[1].0 - p[0].0).hypot(p[1].1 - p[0].1))
        .sum()
}

/// Andrew monotone-chain convex hull (input order irrelevant).
fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let chain = |iter: &mut dyn Iterator<Item = (f64, f64)>| {
        let mut half: Vec<(f64, f64)> = Vec::new();
        for p in iter {
            while half.len() >= 2 && cross(half[half.len() - 2], half[half.len() - 1], p) <= 0.0 {
                half.pop();
            }
            half.push(p);
        }
        half.pop();
        half
    };
    let mut hull = chain(&mut pts.iter().copied());
    hull.extend(chain(&mut pts.iter().rev().copied()));
    hull
}

/// Longest vertex-pair distance and minimal caliper width, in pixels.
fn caliper_extents(ring: &[(f64, f64)]) -> (f64, f64) {
    let hull = convex_hull(&ring[..ring.len().saturating_sub(1).max(1)]);
    if hull.len() < 2 {
        return (0.0, 0.0);
    }
    let mut max_extent = 0.0f64;
    for i in 0..hull.len() {
        for j in i + 1..hull.len() {
            let d = (hull[i].0 - hull[j].0).hypot(hull[i].1 - hull[j].1);
            max_extent = max_extent.max(d);
        }
    }
    if hull.len() < 3 {
        return (max_extent, 0.0);
    }
    let mut min_width = f64::INFINITY;
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        if len < 1e-12 {
            continue;
        }
        let mut farthest = 0.0f64;
        for &p in &hull {
            let dist = ((b.0 - a.0) * (a.1 - p.1) - (a.0 - p.0) * (b.1 - a.1)).abs() / len;
            farthest = farthest.max(dist);
        }
        min_width = min_width.min(farthest);
    }
    (max_extent, min_width)
}

/// Attaches geographic rings and metric measurements to traced rings.
/// The scale is the ground resolution at each ring's centroid latitude.
pub fn measure_polygons(rings: &[PixelRing], g: &GeoRef) -> Result<Vec<SitePolygon>> {
    let mut out = Vec::with_capacity(rings.len());
    for ring in rings {
        let centroid = ring_centroid(&ring.vertices);
        let res = g.resolution_at(centroid.0, centroid.1)?;
        let mut ring_lonlat = Vec::with_capacity(ring.vertices.len());
        for &(x, y) in &ring.vertices {
            let (lat, lon) = g.pixel_to_latlon(x, y)?;
            ring_lonlat.push((lon, lat));
        }
        let (extent_px, width_px) = caliper_extents(&ring.vertices);
        out.push(SitePolygon {
            label: ring.label,
            ring_px: ring.vertices.clone(),
            ring_lonlat,
            area_m2: ring_pixel_area(&ring.vertices) * res * res,
            perimeter_m: perimeter_px(&ring.vertices) * res,
            extent_m: extent_px * res,
            width_m: width_px * res,
            centroid_px: centroid,
            pixel_count: ring.pixel_count,
        });
    }
    Ok(out)
}

fn round7(v: f64) -> f64 {
    (v * 1e7).round() / 1e7
}

/// GeoJSON FeatureCollection of measured polygons: [lon, lat] WGS84
/// coordinates rounded to 7 decimals, sorted object keys, one Polygon
/// feature per site. Output is byte-deterministic for identical input.
pub fn geojson_string(polys: &[SitePolygon]) -> String {
    let features: Vec<Value> = polys
        .iter()
        .map(|p| {
            let ring: Vec<Value> = p
                .ring_lonlat
                .iter()
                .map(|&(lon, lat)| json!([round7(lon), round7(lat)]))
                .collect();
            json!({
                "type": "Feature",
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [ring],
                },
                "properties": {
                    "label": p.label,
                    "area_m2": p.area_m2,
                    "perimeter_m": p.perimeter_m,
                    "extent_m": p.extent_m,
                },
            })
        })
        .collect();
    let collection = json!({
        "type": "FeatureCollection",
        "features": features,
    });
    serde_json::to_string(&collection).expect("geojson serialization cannot fail")
}

/// Writes [`geojson_string`] to a file.
pub fn export_geojson(polys: &[SitePolygon], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, geojson_string(polys)).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Recomputes label statistics from the grid (test support; also used
/// by the acceptance suite to validate stats consistency).
pub fn recompute_stats(lm: &LabelMap) -> Vec<ComponentStats> {
    let mut by_label: HashMap<u32, (usize, (f64, f64), (u32, u32, u32, u32), (u32, u32))> =
        HashMap::new();
    for y in 0..lm.height() {
        for x in 0..lm.width() {
            let label = lm.label(x, y);
            if label == 0 {
                continue;
            }
            let entry = by_label
                .entry(label)
                .or_insert((0, (0.0, 0.0), (x, y, x, y), (x, y)));
            entry.0 += 1;
            entry.1 .0 += x as f64;
            entry.1 .1 += y as f64;
            entry.2 .0 = entry.2 .0.min(x);
            entry.2 .1 = entry.2 .1.min(y);
            entry.2 .2 = entry.2 .2.max(x);
            entry.2 .3 = entry.2 .3.max(y);
        }
    }
    let mut stats: Vec<ComponentStats> = by_label
        .into_iter()
        .map(|(label, (count, sum, bbox, first))| ComponentStats {
            label,
            pixel_count: count,
            bbox,
            centroid: (sum.0 / count as f64 + 0.5, sum.1 / count as f64 + 0.5),
            first_pixel: first,
        })
        .collect();
    stats.sort_by_key(|s| s.label);
    stats
}
