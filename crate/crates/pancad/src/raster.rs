//! Rasterization: label masks, majority voting, and a fixed filter pyramid.
//!
//! Strokes are disk-swept: a pixel belongs to an entity when its center lies
//! within half the line width of the entity's point set. Pixel (0,0) sits at
//! the extent's min corner with rows growing along +y; pixel centers are at
//! `origin + (col + 0.5, row + 0.5) / scale`.
//!
//! The pyramid replaces a learned CNN backbone at this scale with a fixed
//! bank over the binary rasterization: occupancy, the two gradients of the
//! Euclidean distance transform, four oriented 7-tap line responses, and the
//! normalized distance transform itself — 8 channels, average-pooled into a
//! 4-level pyramid by default.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{ClassId, Label};
use crate::drawing::Drawing;
use crate::geometry::{
    normalize_angle, point_segment_distance, sample_points, BoundingBox, Entity, Point2,
};

pub const DEFAULT_PIXEL_CAP: u64 = 100_000_000;
pub const DEFAULT_LINE_WIDTH_PX: f64 = 5.0;
/// Channel count of the fixed filter bank.
pub const PYRAMID_CHANNELS: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum RasterError {
    #[error("canvas needs {required} px, over the cap of {cap}")]
    CanvasTooLarge { required: u64, cap: u64 },
    #[error("cannot rasterize {classes} classes into 8-bit codes")]
    TooManyClasses { classes: usize },
}

/// Per-pixel class codes over the drawing extent: 0 is background, class `c`
/// stores as `c + 1`.
#[derive(Debug)]
pub struct LabelMask {
    width: usize,
    height: usize,
    scale: f64,
    origin: Point2,
    data: Vec<u8>,
}

fn canvas_dims(extent: &BoundingBox, scale: f64, cap: u64) -> Result<(usize, usize), RasterError> {
    let width = ((extent.width() * scale).ceil() as u64).max(1);
    let height = ((extent.height() * scale).ceil() as u64).max(1);
    if width * height > cap {
        return Err(RasterError::CanvasTooLarge { required: width * height, cap });
    }
    Ok((width as usize, height as usize))
}

/// Stroke primitives an entity decomposes into for painting.
enum Prim {
    Seg(Point2, Point2),
    Arc { center: Point2, radius: f64, start: f64, sweep: f64 },
    Ring { center: Point2, radius: f64 },
}

fn primitives(e: &Entity) -> Vec<Prim> {
    match e {
        Entity::Segment { start, end } => vec![Prim::Seg(*start, *end)],
        Entity::Circle { center, radius } => vec![Prim::Ring { center: *center, radius: *radius }],
        Entity::Arc { center, radius, start_angle, end_angle } => vec![Prim::Arc {
            center: *center,
            radius: *radius,
            start: *start_angle,
            sweep: Entity::arc_sweep(*start_angle, *end_angle),
        }],
        Entity::Polyline { vertices } => {
            vertices.windows(2).map(|w| Prim::Seg(w[0], w[1])).collect()
        }
    }
}

fn prim_distance(p: Point2, prim: &Prim) -> f64 {
    match prim {
        Prim::Seg(a, b) => point_segment_distance(p, *a, *b),
        Prim::Ring { center, radius } => (p.distance(*center) - radius).abs(),
        Prim::Arc { center, radius, start, sweep } => {
            let theta = normalize_angle((p.y - center.y).atan2(p.x - center.x));
            let rel = (theta - start).rem_euclid(std::f64::consts::TAU);
            if rel <= *sweep {
                (p.distance(*center) - radius).abs()
            } else {
                let at = |a: f64| {
                    Point2::new(center.x + radius * a.cos(), center.y + radius * a.sin())
                };
                p.distance(at(*start)).min(p.distance(at(start + sweep)))
            }
        }
    }
}

fn prim_bbox(prim: &Prim) -> BoundingBox {
    match prim {
        Prim::Seg(a, b) => BoundingBox::of_points([*a, *b]),
        Prim::Ring { center, radius } | Prim::Arc { center, radius, .. } => BoundingBox::new(
            center.x - radius,
            center.y - radius,
            center.x + radius,
            center.y + radius,
        ),
    }
}

/// Paint `code` over every pixel whose center is within `radius_mm` of the
/// entity.
fn paint(
    data: &mut [u8],
    width: usize,
    height: usize,
    origin: Point2,
    scale: f64,
    e: &Entity,
    radius_mm: f64,
    code: u8,
) {
    for prim in primitives(e) {
        let b = prim_bbox(&prim).inflate(radius_mm);
        let col_lo = (((b.min_x - origin.x) * scale - 0.5).floor() as i64).max(0) as usize;
        let row_lo = (((b.min_y - origin.y) * scale - 0.5).floor() as i64).max(0) as usize;
        let col_hi = ((((b.max_x - origin.x) * scale - 0.5).ceil() as i64) + 1)
            .clamp(0, width as i64) as usize;
        let row_hi = ((((b.max_y - origin.y) * scale - 0.5).ceil() as i64) + 1)
            .clamp(0, height as i64) as usize;
        for row in row_lo..row_hi {
            let cy = origin.y + (row as f64 + 0.5) / scale;
            for col in col_lo..col_hi {
                let cx = origin.x + (col as f64 + 0.5) / scale;
                if prim_distance(Point2::new(cx, cy), &prim) <= radius_mm {
                    data[row * width + col] = code;
                }
            }
        }
    }
}

impl LabelMask {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    pub fn code_at(&self, col: usize, row: usize) -> u8 {
        self.data[row * self.width + col]
    }

    /// Class stored at the pixel containing `p`; background off canvas. A
    /// point exactly on the max edge belongs to the last pixel.
    pub fn sample(&self, p: Point2) -> Label {
        let u = (p.x - self.origin.x) * self.scale;
        let v = (p.y - self.origin.y) * self.scale;
        if u < 0.0 || v < 0.0 || u > self.width as f64 || v > self.height as f64 {
            return Label::Background;
        }
        let col = (u as usize).min(self.width - 1);
        let row = (v as usize).min(self.height - 1);
        match self.data[row * self.width + col] {
            0 => Label::Background,
            c => Label::Class(c as ClassId - 1),
        }
    }

    /// Binary PGM (P5), class codes as gray levels.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }
}

pub fn render_label_mask(
    d: &Drawing,
    scale: f64,
    line_width_px: f64,
) -> Result<LabelMask, RasterError> {
    render_label_mask_capped(d, scale, line_width_px, DEFAULT_PIXEL_CAP)
}

/// Render every labeled entity in record order (later records overwrite).
pub fn render_label_mask_capped(
    d: &Drawing,
    scale: f64,
    line_width_px: f64,
    pixel_cap: u64,
) -> Result<LabelMask, RasterError> {
    if d.catalog.len() >= u8::MAX as usize {
        return Err(RasterError::TooManyClasses { classes: d.catalog.len() });
    }
    let (width, height) = canvas_dims(&d.extent, scale, pixel_cap)?;
    let origin = Point2::new(d.extent.min_x, d.extent.min_y);
    let mut data = vec![0u8; width * height];
    let radius_mm = line_width_px / 2.0 / scale;
    for r in &d.records {
        let Label::Class(c) = r.label else { continue };
        paint(&mut data, width, height, origin, scale, &r.entity, radius_mm, c as u8 + 1);
    }
    Ok(LabelMask { width, height, scale, origin, data })
}

pub const VOTE_SAMPLES: usize = 32;

/// Majority vote per entity over `n_samples` mask reads. Background wins only
/// when every sample reads background; ties go to the smallest class index.
pub fn vote_entity_labels(mask: &LabelMask, d: &Drawing, n_samples: usize) -> Vec<Label> {
    d.records
        .iter()
        .map(|r| {
            let mut counts = vec![0usize; d.catalog.len()];
            for p in sample_points(&r.entity, n_samples) {
                if let Label::Class(c) = mask.sample(p) {
                    if c < counts.len() {
                        counts[c] += 1;
                    }
                }
            }
            match counts.iter().enumerate().max_by_key(|&(i, &c)| (c, std::cmp::Reverse(i))) {
                Some((best, &n)) if n > 0 => Label::Class(best),
                _ => Label::Background,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyramidConfig {
    /// Pixels per mm of the base level.
    pub scale: f64,
    /// Number of pyramid levels, each 2x coarser than the last.
    pub levels: usize,
    pub line_width_px: f64,
    pub pixel_cap: u64,
}

impl Default for PyramidConfig {
    fn default() -> Self {
        PyramidConfig {
            scale: 0.05,
            levels: 4,
            line_width_px: DEFAULT_LINE_WIDTH_PX,
            pixel_cap: DEFAULT_PIXEL_CAP,
        }
    }
}

pub struct FeatureLevel {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    data: Vec<f32>,
}

impl FeatureLevel {
    #[inline]
    pub fn at(&self, col: usize, row: usize, ch: usize) -> f32 {
        self.data[(row * self.width + col) * self.channels + ch]
    }
}

/// Multi-resolution feature maps over a drawing, aligned to drawing space.
pub struct FeaturePyramid {
    origin: Point2,
    base_scale: f64,
    levels: Vec<FeatureLevel>,
}

/// Squared Euclidean distance transform along one dimension (lower envelope
/// of parabolas). `f` is the input cost per cell, `d` the output.
fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64))
                / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        d[q] = dq * dq + f[v[k]];
    }
}

/// Exact Euclidean distance (in pixels) to the nearest set pixel.
fn distance_transform(occ: &[u8], width: usize, height: usize) -> Vec<f64> {
    const FAR: f64 = 1e18;
    let mut dist: Vec<f64> = occ.iter().map(|&o| if o != 0 { 0.0 } else { FAR }).collect();
    let n = width.max(height);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    for row in 0..height {
        let s = &mut dist[row * width..(row + 1) * width];
        f[..width].copy_from_slice(s);
        edt_1d(&f[..width], &mut d[..width], &mut v[..width], &mut z[..width + 1]);
        s.copy_from_slice(&d[..width]);
    }
    for col in 0..width {
        for row in 0..height {
            f[row] = dist[row * width + col];
        }
        edt_1d(&f[..height], &mut d[..height], &mut v[..height], &mut z[..height + 1]);
        for row in 0..height {
            dist[row * width + col] = d[row].sqrt();
        }
    }
    dist
}

/// The four oriented line responses: mean occupancy over a 7-pixel line at
/// 0, 45, 90, and 135 degrees. Out-of-bounds taps read empty.
fn oriented_responses(occ: &[u8], width: usize, height: usize) -> [Vec<f32>; 4] {
    let dirs: [(i64, i64); 4] = [(1, 0), (1, 1), (0, 1), (-1, 1)];
    let mut out: [Vec<f32>; 4] = std::array::from_fn(|_| vec![0.0f32; width * height]);
    for (o, (dx, dy)) in dirs.iter().enumerate() {
        let plane = &mut out[o];
        for row in 0..height {
            for col in 0..width {
                let mut acc = 0u32;
                for t in -3i64..=3 {
                    let c = col as i64 + t * dx;
                    let r = row as i64 + t * dy;
                    if c >= 0 && (c as usize) < width && r >= 0 && (r as usize) < height {
                        acc += occ[r as usize * width + c as usize] as u32;
                    }
                }
                plane[row * width + col] = acc as f32 / 7.0;
            }
        }
    }
    out
}

/// Build the fixed filter bank over the binary rasterization of *all*
/// entities (labels play no role here), then average-pool into a pyramid.
pub fn build_feature_pyramid(d: &Drawing, cfg: &PyramidConfig) -> Result<FeaturePyramid, RasterError> {
    assert!(cfg.levels >= 1, "need at least one pyramid level");
    let (width, height) = canvas_dims(&d.extent, cfg.scale, cfg.pixel_cap)?;
    let origin = Point2::new(d.extent.min_x, d.extent.min_y);
    let mut occ = vec![0u8; width * height];
    let radius_mm = cfg.line_width_px / 2.0 / cfg.scale;
    for r in &d.records {
        paint(&mut occ, width, height, origin, cfg.scale, &r.entity, radius_mm, 1);
    }

    let dt = distance_transform(&occ, width, height);
    let diag = ((width * width + height * height) as f64).sqrt();
    let mut base = vec![0.0f32; width * height * PYRAMID_CHANNELS];
    let oriented = oriented_responses(&occ, width, height);
    for row in 0..height {
        for col in 0..width {
            let i = row * width + col;
            // Central differences of the EDT, one-sided at borders; the EDT
            // is 1-Lipschitz so these land in [-1, 1].
            let xl = dt[row * width + col.saturating_sub(1)];
            let xr = dt[row * width + (col + 1).min(width - 1)];
            let gx = (xr - xl) / ((col + 1).min(width - 1) - col.saturating_sub(1)).max(1) as f64;
            let yl = dt[row.saturating_sub(1) * width + col];
            let yr = dt[(row + 1).min(height - 1) * width + col];
            let gy = (yr - yl) / ((row + 1).min(height - 1) - row.saturating_sub(1)).max(1) as f64;
            let px = &mut base[i * PYRAMID_CHANNELS..(i + 1) * PYRAMID_CHANNELS];
            px[0] = occ[i] as f32;
            px[1] = gx as f32;
            px[2] = gy as f32;
            px[3] = oriented[0][i];
            px[4] = oriented[1][i];
            px[5] = oriented[2][i];
            px[6] = oriented[3][i];
            px[7] = (dt[i] / diag) as f32;
        }
    }

    let mut levels = vec![FeatureLevel { width, height, channels: PYRAMID_CHANNELS, data: base }];
    for _ in 1..cfg.levels {
        let prev = levels.last().unwrap();
        let (pw, ph) = (prev.width, prev.height);
        let w2 = pw.div_ceil(2);
        let h2 = ph.div_ceil(2);
        let mut data = vec![0.0f32; w2 * h2 * PYRAMID_CHANNELS];
        for row in 0..h2 {
            for col in 0..w2 {
                for ch in 0..PYRAMID_CHANNELS {
                    let mut acc = 0.0f32;
                    let mut cnt = 0u32;
                    for (sr, sc) in [(2 * row, 2 * col), (2 * row, 2 * col + 1), (2 * row + 1, 2 * col), (2 * row + 1, 2 * col + 1)] {
                        if sr < ph && sc < pw {
                            acc += prev.at(sc, sr, ch);
                            cnt += 1;
                        }
                    }
                    data[(row * w2 + col) * PYRAMID_CHANNELS + ch] = acc / cnt as f32;
                }
            }
        }
        levels.push(FeatureLevel { width: w2, height: h2, channels: PYRAMID_CHANNELS, data });
    }
    Ok(FeaturePyramid { origin, base_scale: cfg.scale, levels })
}

impl FeaturePyramid {
    pub fn levels(&self) -> &[FeatureLevel] {
        &self.levels
    }

    /// Total feature dimension of a fetch: levels x channels.
    pub fn feature_dim(&self) -> usize {
        self.levels.iter().map(|l| l.channels).sum()
    }

    /// Bilinear read of every level at a drawing-space point, clamped to the
    /// canvas, concatenated level by level.
    pub fn fetch(&self, p: Point2) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.feature_dim());
        for (l, level) in self.levels.iter().enumerate() {
            let scale = self.base_scale / (1u64 << l) as f64;
            let u = ((p.x - self.origin.x) * scale - 0.5).clamp(0.0, (level.width - 1) as f64);
            let v = ((p.y - self.origin.y) * scale - 0.5).clamp(0.0, (level.height - 1) as f64);
            let c0 = u.floor() as usize;
            let r0 = v.floor() as usize;
            let c1 = (c0 + 1).min(level.width - 1);
            let r1 = (r0 + 1).min(level.height - 1);
            let fu = u - c0 as f64;
            let fv = v - r0 as f64;
            for ch in 0..level.channels {
                let v00 = level.at(c0, r0, ch) as f64;
                let v10 = level.at(c1, r0, ch) as f64;
                let v01 = level.at(c0, r1, ch) as f64;
                let v11 = level.at(c1, r1, ch) as f64;
                out.push(
                    v00 * (1.0 - fu) * (1.0 - fv)
                        + v10 * fu * (1.0 - fv)
                        + v01 * (1.0 - fu) * fv
                        + v11 * fu * fv,
                );
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::LabelCatalog;
    use crate::drawing::EntityRecord;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seg(x1: f64, y1: f64, x2: f64, y2: f64) -> Entity {
        Entity::segment(Point2::new(x1, y1), Point2::new(x2, y2))
    }

    fn canvas_drawing(records: Vec<EntityRecord>) -> Drawing {
        // Fixed 100x100 mm extent so masks are 100x100 px at scale 1.
        Drawing::with_extent(
            "m",
            LabelCatalog::small(),
            records,
            BoundingBox::new(0.0, 0.0, 100.0, 100.0),
        )
        .unwrap()
    }

    #[test]
    fn empty_drawing_renders_all_background() {
        let d = canvas_drawing(vec![]);
        let m = render_label_mask(&d, 1.0, 5.0).unwrap();
        assert_eq!(m.width(), 100);
        assert_eq!(m.height(), 100);
        assert!((0..100).all(|r| (0..100).all(|c| m.code_at(c, r) == 0)));
    }

    #[test]
    fn background_entities_leave_no_ink() {
        let d = canvas_drawing(vec![EntityRecord::background(seg(10.0, 50.0, 90.0, 50.0))]);
        let m = render_label_mask(&d, 1.0, 5.0).unwrap();
        assert!(m.data.iter().all(|&c| c == 0));
    }

    #[test]
    fn horizontal_segment_paints_five_pixel_band() {
        let cat = LabelCatalog::small();
        let wall = Label::Class(cat.id_of("wall").unwrap());
        // y = 50.5 sits exactly on the center of pixel row 50.
        let d = canvas_drawing(vec![EntityRecord::new(seg(20.0, 50.5, 80.0, 50.5), wall, 0)]);
        let m = render_label_mask(&d, 1.0, 5.0).unwrap();
        let col = 50; // interior column
        let painted: Vec<usize> = (0..100).filter(|&r| m.code_at(col, r) != 0).collect();
        assert_eq!(painted, vec![48, 49, 50, 51, 52]);
    }

    #[test]
    fn later_records_overwrite_at_crossings() {
        let cat = LabelCatalog::small();
        let wall = Label::Class(cat.id_of("wall").unwrap());
        let door = Label::Class(cat.id_of("door").unwrap());
        let d = canvas_drawing(vec![
            EntityRecord::new(seg(10.0, 50.5, 90.0, 50.5), wall, 0),
            EntityRecord::new(seg(50.5, 10.0, 50.5, 90.0), door, 1),
        ]);
        let m = render_label_mask(&d, 1.0, 5.0).unwrap();
        // At the crossing the later (door) record wins.
        assert_eq!(m.sample(Point2::new(50.5, 50.5)), door);
        assert_eq!(m.sample(Point2::new(20.0, 50.5)), wall);
    }

    #[test]
    fn mask_matches_per_pixel_distance_oracle() {
        let cat = LabelCatalog::small();
        let wall = Label::Class(cat.id_of("wall").unwrap());
        let door = Label::Class(cat.id_of("door").unwrap());
        let entities = vec![
            EntityRecord::new(seg(10.0, 20.0, 90.0, 30.0), wall, 0),
            EntityRecord::new(Entity::circle(Point2::new(50.0, 50.0), 20.0), door, 1),
            EntityRecord::new(
                Entity::arc(Point2::new(30.0, 70.0), 15.0, 0.5, 2.5),
                door,
                2,
            ),
        ];
        let d = canvas_drawing(entities.clone());
        let m = render_label_mask(&d, 1.0, 5.0).unwrap();
        for row in 0..100 {
            for col in 0..100 {
                let p = Point2::new(col as f64 + 0.5, row as f64 + 0.5);
                // Last record within stroke radius wins.
                let mut expect = 0u8;
                for r in &entities {
                    let within = primitives(&r.entity)
                        .iter()
                        .any(|pr| prim_distance(p, pr) <= 2.5);
                    if within {
                        expect = r.label.class_id().unwrap() as u8 + 1;
                    }
                }
                assert_eq!(m.code_at(col, row), expect, "pixel ({col},{row})");
            }
        }
    }

    #[test]
    fn vote_recovers_uniform_region() {
        let cat = LabelCatalog::small();
        let wall = Label::Class(cat.id_of("wall").unwrap());
        let d = canvas_drawing(vec![EntityRecord::new(seg(20.0, 50.5, 80.0, 50.5), wall, 0)]);
        let m = render_label_mask(&d, 1.0, 5.0).unwrap();
        assert_eq!(vote_entity_labels(&m, &d, 32), vec![wall]);
    }

    #[test]
    fn vote_majority_with_counting_oracle() {
        let cat = LabelCatalog::small();
        // Paint the left 60% of the band as class 2, right 40% as class 4.
        let d = canvas_drawing(vec![EntityRecord::background(seg(0.16, 50.5, 99.84, 50.5))]);
        let mut m = render_label_mask(&d, 1.0, 5.0).unwrap();
        for col in 0..100 {
            let code = if col < 60 { 3 } else { 5 };
            for row in 0..100 {
                m.data[row * 100 + col] = code;
            }
        }
        // 32 samples along the segment: 19 land left of x=60, 13 right.
        let votes = vote_entity_labels(&m, &d, 32);
        assert_eq!(votes, vec![Label::Class(2)]);
        assert_eq!(cat.name(2), "door");
    }

    #[test]
    fn vote_tie_breaks_to_smaller_class() {
        let d = canvas_drawing(vec![EntityRecord::background(seg(0.16, 50.5, 99.84, 50.5))]);
        let mut m = render_label_mask(&d, 1.0, 5.0).unwrap();
        for col in 0..100 {
            let code = if col < 50 { 5 } else { 2 };
            for row in 0..100 {
                m.data[row * 100 + col] = code;
            }
        }
        let votes = vote_entity_labels(&m, &d, 32);
        assert_eq!(votes, vec![Label::Class(1)]);
    }

    #[test]
    fn off_canvas_entity_votes_background() {
        let cat = LabelCatalog::small();
        let wall = Label::Class(cat.id_of("wall").unwrap());
        let inside = EntityRecord::new(seg(20.0, 50.5, 80.0, 50.5), wall, 0);
        let d = canvas_drawing(vec![inside]);
        let m = render_label_mask(&d, 1.0, 5.0).unwrap();
        let mut far = d.clone();
        far.records[0].entity = seg(-500.0, 50.0, -400.0, 50.0);
        assert_eq!(vote_entity_labels(&m, &far, 32), vec![Label::Background]);
    }

    #[test]
    fn canvas_cap_is_enforced() {
        let d = canvas_drawing(vec![]);
        match render_label_mask_capped(&d, 1.0, 5.0, 5_000) {
            Err(RasterError::CanvasTooLarge { required, cap }) => {
                assert_eq!(required, 10_000);
                assert_eq!(cap, 5_000);
            }
            other => panic!("expected CanvasTooLarge, got {other:?}"),
        }
    }

    #[test]
    fn pgm_has_header_and_payload() {
        let d = canvas_drawing(vec![]);
        let m = render_label_mask(&d, 0.1, 5.0).unwrap();
        let pgm = m.to_pgm();
        assert!(pgm.starts_with(b"P5\n10 10\n255\n"));
        assert_eq!(pgm.len(), 13 + 100);
    }

    fn pyramid_config(levels: usize) -> PyramidConfig {
        PyramidConfig { scale: 1.0, levels, line_width_px: 5.0, pixel_cap: DEFAULT_PIXEL_CAP }
    }

    #[test]
    fn pyramid_shapes_halve_with_ceiling() {
        let d = canvas_drawing(vec![EntityRecord::background(seg(10.0, 10.0, 90.0, 90.0))]);
        let p = build_feature_pyramid(&d, &pyramid_config(4)).unwrap();
        let dims: Vec<(usize, usize)> =
            p.levels().iter().map(|l| (l.width, l.height)).collect();
        assert_eq!(dims, vec![(100, 100), (50, 50), (25, 25), (13, 13)]);
        assert_eq!(p.feature_dim(), 32);
    }

    #[test]
    fn occupancy_channel_matches_mask_ink() {
        let d = canvas_drawing(vec![EntityRecord::background(seg(20.0, 50.5, 80.0, 50.5))]);
        let p = build_feature_pyramid(&d, &pyramid_config(1)).unwrap();
        let l = &p.levels()[0];
        // Occupancy ignores labels: the background segment still leaves ink.
        assert_eq!(l.at(50, 50, 0), 1.0);
        assert_eq!(l.at(50, 10, 0), 0.0);
    }

    #[test]
    fn distance_transform_matches_brute_force_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (w, h) = (rng.gen_range(1..24), rng.gen_range(1..24));
            let occ: Vec<u8> =
                (0..w * h).map(|_| u8::from(rng.gen_bool(0.2))).collect();
            let dt = distance_transform(&occ, w, h);
            for row in 0..h {
                for col in 0..w {
                    let mut best = f64::INFINITY;
                    for r2 in 0..h {
                        for c2 in 0..w {
                            if occ[r2 * w + c2] != 0 {
                                let dx = col as f64 - c2 as f64;
                                let dy = row as f64 - r2 as f64;
                                best = best.min((dx * dx + dy * dy).sqrt());
                            }
                        }
                    }
                    let got = dt[row * w + col];
                    if best.is_infinite() {
                        assert!(got > 1e8, "empty mask should read far");
                    } else {
                        assert!((got - best).abs() < 1e-9, "({col},{row}): {got} vs {best}");
                    }
                }
            }
        }
    }

    #[test]
    fn bilinear_fetch_on_constant_map_is_constant() {
        let d = canvas_drawing(vec![]);
        let p = build_feature_pyramid(&d, &pyramid_config(2)).unwrap();
        // Channel 0 (occupancy) is identically 0 on an empty drawing.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let q = Point2::new(rng.gen_range(-20.0..120.0), rng.gen_range(-20.0..120.0));
            let f = p.fetch(q);
            assert_eq!(f.len(), 16);
            assert_eq!(f[0], 0.0);
            assert_eq!(f[8], 0.0);
        }
    }

    #[test]
    fn bilinear_fetch_center_of_2x2_averages_corners() {
        // Build a 2x2 single-channel map by hand and fetch dead center.
        let level = FeatureLevel {
            width: 2,
            height: 2,
            channels: 1,
            data: vec![0.0, 1.0, 2.0, 3.0],
        };
        let p = FeaturePyramid {
            origin: Point2::new(0.0, 0.0),
            base_scale: 1.0,
            levels: vec![level],
        };
        let f = p.fetch(Point2::new(1.0, 1.0));
        assert_eq!(f, vec![1.5]);
    }

    #[test]
    fn bilinear_fetch_hits_grid_values_exactly() {
        let level = FeatureLevel {
            width: 3,
            height: 2,
            channels: 1,
            data: vec![5.0, 6.0, 7.0, 8.0, 9.0, 10.0],
        };
        let p = FeaturePyramid {
            origin: Point2::new(0.0, 0.0),
            base_scale: 1.0,
            levels: vec![level],
        };
        // Pixel centers are at (col + 0.5, row + 0.5).
        assert_eq!(p.fetch(Point2::new(0.5, 0.5)), vec![5.0]);
        assert_eq!(p.fetch(Point2::new(2.5, 1.5)), vec![10.0]);
        // Clamped far outside: nearest corner value.
        assert_eq!(p.fetch(Point2::new(-100.0, -100.0)), vec![5.0]);
        assert_eq!(p.fetch(Point2::new(100.0, 100.0)), vec![10.0]);
    }

    #[test]
    fn gradient_channels_stay_unit_bounded() {
        let d = canvas_drawing(vec![
            EntityRecord::background(seg(20.0, 20.0, 80.0, 20.0)),
            EntityRecord::background(Entity::circle(Point2::new(50.0, 60.0), 15.0)),
        ]);
        let p = build_feature_pyramid(&d, &pyramid_config(1)).unwrap();
        let l = &p.levels()[0];
        for row in 0..l.height {
            for col in 0..l.width {
                for ch in [1, 2] {
                    let g = l.at(col, row, ch);
                    assert!((-1.0..=1.0).contains(&g), "({col},{row},{ch}) = {g}");
                }
            }
        }
    }
}
