//! Deterministic synthetic floor plans: parametric wall grids with door,
//! window, parking, and furniture motifs, fully labeled for training and
//! evaluation runs.
//!
//! A block is a fixed 20 m x 20 m square. The bottom strip holds a parking
//! comb; the rest is an `nx x ny` room grid whose walls are parallel segment
//! pairs around grid centerlines. Motifs attach to room edges (doors on the
//! south edge, windows on the north edge) or to quarter-point slots inside
//! rooms (furniture and the remaining thing classes as parametric glyphs).
//! With `overlap_free` set, wall runs are carved around openings and
//! distinct-class ink keeps >= 40 mm of separation, so a render/vote round
//! trip recovers labels almost perfectly.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{ClassId, Label, LabelCatalog};
use crate::drawing::{gt_instance_boxes, Drawing, EntityRecord, InstanceBox};
use crate::geometry::{BoundingBox, Entity, Point2};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible config: {reason}")]
    InfeasibleConfig { reason: String },
}

/// Block side length in mm.
pub const BLOCK_MM: f64 = 20_000.0;

// Outer wall centerline inset from the block edge.
const MARGIN: f64 = 1_000.0;
// Centerline separating the parking strip from the room grid.
const SEP_Y: f64 = 5_500.0;
const DOOR_OPENING: f64 = 900.0;
const WINDOW_OPENING: f64 = 1_000.0;
// Openings keep this much edge between themselves and room corners, which
// also clears the perpendicular wall's faces (half thickness <= 250).
const EDGE_CLEARANCE: f64 = 160.0;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    /// Room grid dimensions inside the block.
    pub rooms_x: usize,
    pub rooms_y: usize,
    /// Wall pair separation in mm.
    pub wall_thickness: f64,
    /// Probability that a room gets a door on its south edge.
    pub door_density: f64,
    /// Probability that a room gets a window on its north edge.
    pub window_density: f64,
    /// Scales the parking stall count.
    pub parking_density: f64,
    /// Probability that a room gets an extra slot motif.
    pub furniture_density: f64,
    /// Classes to emit; every class present here appears at least once.
    pub catalog: LabelCatalog,
    /// Carve wall openings and keep distinct-class ink separated.
    pub overlap_free: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            rooms_x: 3,
            rooms_y: 2,
            wall_thickness: 240.0,
            door_density: 0.6,
            window_density: 0.5,
            parking_density: 0.5,
            furniture_density: 0.5,
            catalog: LabelCatalog::small(),
            overlap_free: true,
        }
    }
}

/// How a class is realized geometrically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Wall,
    Parking,
    Door,
    Window,
    Slot,
}

fn family(name: &str) -> Family {
    match name {
        "wall" => Family::Wall,
        "parking" => Family::Parking,
        "door" | "single_door" => Family::Door,
        "window" => Family::Window,
        _ => Family::Slot,
    }
}

struct RoomGrid {
    nx: usize,
    ny: usize,
    rw: f64,
    rh: f64,
}

impl RoomGrid {
    fn of(cfg: &SynthConfig) -> Self {
        let nx = cfg.rooms_x;
        let ny = cfg.rooms_y;
        let rw = (BLOCK_MM - 2.0 * MARGIN) / nx as f64;
        let rh = (BLOCK_MM - MARGIN - SEP_Y) / ny as f64;
        RoomGrid { nx, ny, rw, rh }
    }

    fn rooms(&self) -> usize {
        self.nx * self.ny
    }

    /// South-west corner of room (ix, iy) on wall centerlines.
    fn origin(&self, room: usize) -> (f64, f64) {
        let (ix, iy) = (room % self.nx, room / self.nx);
        (MARGIN + ix as f64 * self.rw, SEP_Y + iy as f64 * self.rh)
    }

    /// Center of quarter slot 0..4 (NE, NW, SE, SW).
    fn slot_center(&self, room: usize, slot: usize) -> Point2 {
        let (ox, oy) = self.origin(room);
        let sx = if slot % 2 == 0 { 0.75 } else { 0.25 };
        let sy = if slot < 2 { 0.75 } else { 0.25 };
        Point2::new(ox + sx * self.rw, oy + sy * self.rh)
    }

    /// Largest half-extent a slot motif may occupy.
    fn slot_reach(&self) -> f64 {
        self.rw.min(self.rh) / 4.0 - 200.0
    }
}

#[derive(Debug, Clone, Copy)]
struct EdgeMotif {
    room: usize,
    class: ClassId,
}

#[derive(Debug, Clone, Copy)]
struct SlotMotif {
    room: usize,
    slot: usize,
    class: ClassId,
}

struct Plan {
    doors: Vec<EdgeMotif>,
    windows: Vec<EdgeMotif>,
    slots: Vec<SlotMotif>,
    parking_teeth: usize,
}

fn infeasible(reason: impl Into<String>) -> SynthError {
    SynthError::InfeasibleConfig { reason: reason.into() }
}

fn validate(cfg: &SynthConfig) -> Result<(), SynthError> {
    if cfg.rooms_x == 0 || cfg.rooms_y == 0 {
        return Err(infeasible("room grid is empty"));
    }
    for (name, d) in [
        ("door", cfg.door_density),
        ("window", cfg.window_density),
        ("parking", cfg.parking_density),
        ("furniture", cfg.furniture_density),
    ] {
        if !(0.0..=1.0).contains(&d) {
            return Err(infeasible(format!("{name} density {d} outside [0, 1]")));
        }
    }
    if !(100.0..=500.0).contains(&cfg.wall_thickness) {
        return Err(infeasible(format!(
            "wall thickness {} outside [100, 500] mm",
            cfg.wall_thickness
        )));
    }
    if cfg.catalog.id_of("wall").is_none() {
        return Err(infeasible("catalog must include a wall class"));
    }
    let grid = RoomGrid::of(cfg);
    // A door at the 1/4 point and a window at the 3/4 point must both clear
    // the corners: 0.25 rw - 500 >= clearance.
    if grid.rw < 4.0 * (WINDOW_OPENING / 2.0 + EDGE_CLEARANCE) {
        return Err(infeasible("rooms too narrow for door and window openings"));
    }
    if grid.rh < 1_200.0 {
        return Err(infeasible("rooms too shallow for motif clearance"));
    }
    Ok(())
}

/// Decide every motif before emitting geometry, so wall carving knows all
/// openings up front. Random draws happen in one fixed order: door coins,
/// window coins, then furniture coin+class per room.
fn plan(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Plan, SynthError> {
    let grid = RoomGrid::of(cfg);
    let catalog = &cfg.catalog;
    let mut door_classes = Vec::new();
    let mut window_classes = Vec::new();
    let mut slot_classes = Vec::new();
    for c in 0..catalog.len() {
        match family(catalog.name(c)) {
            Family::Door => door_classes.push(c),
            Family::Window => window_classes.push(c),
            Family::Slot => slot_classes.push(c),
            Family::Wall | Family::Parking => {}
        }
    }
    if door_classes.len() > grid.rooms() || window_classes.len() > grid.rooms() {
        return Err(infeasible("more edge classes than rooms"));
    }

    // Forced edge motifs: one per door/window class, rooms in ascending order.
    let mut doors: Vec<EdgeMotif> =
        door_classes.iter().enumerate().map(|(r, &c)| EdgeMotif { room: r, class: c }).collect();
    let mut windows: Vec<EdgeMotif> =
        window_classes.iter().enumerate().map(|(r, &c)| EdgeMotif { room: r, class: c }).collect();

    // Density pass over the remaining rooms.
    if !door_classes.is_empty() {
        for room in door_classes.len()..grid.rooms() {
            if rng.gen_bool(cfg.door_density) {
                let class = door_classes[room % door_classes.len()];
                doors.push(EdgeMotif { room, class });
            }
        }
    }
    if !window_classes.is_empty() {
        for room in window_classes.len()..grid.rooms() {
            if rng.gen_bool(cfg.window_density) {
                let class = window_classes[room % window_classes.len()];
                windows.push(EdgeMotif { room, class });
            }
        }
    }

    // Slot occupancy: the SW slot of a doored room is reserved for the leaf
    // swing, everything else is free.
    let mut taken = vec![[false; 4]; grid.rooms()];
    for d in &doors {
        taken[d.room][3] = true;
    }
    let mut slots = Vec::new();
    // Forced glyphs spread slot-major so rooms fill evenly.
    let mut order = Vec::new();
    for s in 0..4 {
        for room in 0..grid.rooms() {
            order.push((room, s));
        }
    }
    let mut next = 0usize;
    for &class in &slot_classes {
        while next < order.len() && taken[order[next].0][order[next].1] {
            next += 1;
        }
        let Some(&(room, slot)) = order.get(next) else {
            return Err(infeasible(format!(
                "not enough motif slots for {} classes",
                slot_classes.len()
            )));
        };
        taken[room][slot] = true;
        slots.push(SlotMotif { room, slot, class });
    }
    if !slot_classes.is_empty() {
        for room in 0..grid.rooms() {
            if rng.gen_bool(cfg.furniture_density) {
                let class = slot_classes[rng.gen_range(0..slot_classes.len())];
                if let Some(slot) = (0..4).find(|&s| !taken[room][s]) {
                    taken[room][slot] = true;
                    slots.push(SlotMotif { room, slot, class });
                }
            }
        }
    }

    let parking_teeth = 2 + (cfg.parking_density * 10.0).round() as usize;
    Ok(Plan { doors, windows, slots, parking_teeth })
}

fn seg(x1: f64, y1: f64, x2: f64, y2: f64) -> Entity {
    Entity::segment(Point2::new(x1, y1), Point2::new(x2, y2))
}

/// Split [a, b] around the given open intervals.
fn carve(a: f64, b: f64, mut openings: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    openings.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut out = Vec::new();
    let mut cur = a;
    for (o1, o2) in openings {
        if o1 > cur {
            out.push((cur, o1));
        }
        cur = cur.max(o2);
    }
    if cur < b {
        out.push((cur, b));
    }
    out
}

/// Door opening interval on the south edge of a room, in absolute x.
fn door_span(grid: &RoomGrid, room: usize) -> (f64, f64) {
    let (ox, _) = grid.origin(room);
    let cx = ox + 0.25 * grid.rw;
    (cx - DOOR_OPENING / 2.0, cx + DOOR_OPENING / 2.0)
}

/// Window opening interval on the north edge of a room, in absolute x.
fn window_span(grid: &RoomGrid, room: usize) -> (f64, f64) {
    let (ox, _) = grid.origin(room);
    let cx = ox + 0.75 * grid.rw;
    (cx - WINDOW_OPENING / 2.0, cx + WINDOW_OPENING / 2.0)
}

fn glyph_entities(class: ClassId, center: Point2, reach: f64) -> Vec<Entity> {
    let c = class;
    let wobble = 0.7 + 0.3 * ((c * 7) % 11) as f64 / 10.0;
    let r = 300f64.min(reach) * wobble;
    let sides = 3 + c % 5;
    let phi = c as f64 * 0.37;
    let ring = |radius: f64, phase: f64| {
        let mut vs: Vec<Point2> = (0..sides)
            .map(|i| {
                let a = phase + TAU * i as f64 / sides as f64;
                Point2::new(center.x + radius * a.cos(), center.y + radius * a.sin())
            })
            .collect();
        vs.push(vs[0]);
        Entity::polyline(vs)
    };
    let mut out = vec![ring(r, phi)];
    match c % 3 {
        0 => out.push(Entity::circle(center, 0.45 * r)),
        1 => {
            let a = phi + 0.3;
            out.push(seg(
                center.x + r * a.cos(),
                center.y + r * a.sin(),
                center.x - r * a.cos(),
                center.y - r * a.sin(),
            ));
        }
        _ => out.push(ring(0.5 * r, phi + PI / sides as f64)),
    }
    out
}

fn slot_entities(cfg: &SynthConfig, grid: &RoomGrid, m: &SlotMotif) -> Vec<Entity> {
    let center = grid.slot_center(m.room, m.slot);
    let reach = grid.slot_reach();
    if cfg.catalog.name(m.class) == "table" {
        let h = 400f64.min(reach);
        let (x1, y1, x2, y2) = (center.x - h, center.y - h, center.x + h, center.y + h);
        vec![
            seg(x1, y1, x2, y1),
            seg(x2, y1, x2, y2),
            seg(x2, y2, x1, y2),
            seg(x1, y2, x1, y1),
        ]
    } else {
        glyph_entities(m.class, center, reach)
    }
}

/// Generate one fully labeled block. Identical configs produce identical
/// drawings; the drawing id encodes the seed.
pub fn generate_floorplan(cfg: &SynthConfig) -> Result<Drawing, SynthError> {
    validate(cfg)?;
    let grid = RoomGrid::of(cfg);
    let catalog = &cfg.catalog;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let plan = plan(cfg, &mut rng)?;

    let wall = catalog.id_of("wall").expect("validated");
    let t2 = cfg.wall_thickness / 2.0;
    let lo = MARGIN;
    let hi = BLOCK_MM - MARGIN;
    let mut records = Vec::new();
    let wall_pair = |records: &mut Vec<EntityRecord>,
                         horizontal: bool,
                         c: f64,
                         a: f64,
                         b: f64| {
        for off in [-t2, t2] {
            let e = if horizontal {
                seg(a, c + off, b, c + off)
            } else {
                seg(c + off, a, c + off, b)
            };
            records.push(EntityRecord::new(e, Label::Class(wall), 0));
        }
    };

    // Horizontal wall lines: block bottom, then the room grid rows from the
    // separator up. Openings are carved only in overlap-free mode.
    let mut h_lines = vec![(MARGIN, Vec::new())];
    for j in 0..=grid.ny {
        let y = SEP_Y + j as f64 * grid.rh;
        let mut openings = Vec::new();
        if cfg.overlap_free {
            for d in plan.doors.iter().filter(|d| d.room / grid.nx == j) {
                openings.push(door_span(&grid, d.room));
            }
            for w in plan.windows.iter().filter(|w| w.room / grid.nx + 1 == j) {
                openings.push(window_span(&grid, w.room));
            }
        }
        h_lines.push((y, openings));
    }
    for (y, openings) in h_lines {
        for (a, b) in carve(lo, hi, openings) {
            wall_pair(&mut records, true, y, a, b);
        }
    }
    // Vertical wall lines: full-height outer sides, room-height interior.
    wall_pair(&mut records, false, lo, lo, hi);
    wall_pair(&mut records, false, hi, lo, hi);
    for i in 1..grid.nx {
        let x = MARGIN + i as f64 * grid.rw;
        wall_pair(&mut records, false, x, SEP_Y, hi);
    }

    if let Some(parking) = catalog.id_of("parking") {
        let mut put = |e: Entity| records.push(EntityRecord::new(e, Label::Class(parking), 0));
        put(seg(2_000.0, 1_500.0, 18_000.0, 1_500.0));
        let n = plan.parking_teeth;
        for k in 0..n {
            let x = 2_000.0 + 16_000.0 * k as f64 / (n - 1) as f64;
            put(seg(x, 1_500.0, x, 4_500.0));
        }
    }

    let mut z = 0u32;
    let mut motif = |records: &mut Vec<EntityRecord>, class: ClassId, entities: Vec<Entity>| {
        z += 1;
        for e in entities {
            records.push(EntityRecord::new(e, Label::Class(class), z));
        }
    };
    for d in &plan.doors {
        let (_, oy) = grid.origin(d.room);
        let (hx, _) = door_span(&grid, d.room);
        let leaf = seg(hx, oy, hx, oy + DOOR_OPENING);
        let swing = Entity::arc(Point2::new(hx, oy), DOOR_OPENING, 0.0, PI / 2.0);
        motif(&mut records, d.class, vec![leaf, swing]);
    }
    for w in &plan.windows {
        let (_, oy) = grid.origin(w.room);
        let yc = oy + grid.rh;
        let (x1, x2) = window_span(&grid, w.room);
        let spread = 80f64.min(t2 - 40.0);
        let lines =
            [-spread, 0.0, spread].map(|dy| seg(x1, yc + dy, x2, yc + dy)).to_vec();
        motif(&mut records, w.class, lines);
    }
    for m in &plan.slots {
        motif(&mut records, m.class, slot_entities(cfg, &grid, m));
    }

    let extent = BoundingBox::new(0.0, 0.0, BLOCK_MM, BLOCK_MM);
    let id = format!("synth-{:08x}", cfg.seed);
    Ok(Drawing::with_extent(id, catalog.clone(), records, extent).expect("motifs stay in block"))
}

/// Label flips and box corruption for controlled metric inputs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Probability an entity label flips to a uniformly random other class.
    pub flip_p: f64,
    /// Box corner jitter amplitude in mm; 0 leaves boxes and scores intact.
    pub box_jitter_mm: f64,
    /// Probability a ground-truth box is dropped.
    pub box_drop_q: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { flip_p: 0.0, box_jitter_mm: 0.0, box_drop_q: 0.0 }
    }
}

fn noise_seed(seed: u64, id: &str) -> u64 {
    // FNV-1a over the seed bytes then the id, so distinct drawings decouple.
    let mut h = 0xcbf29ce484222325u64;
    for b in seed.to_le_bytes().into_iter().chain(id.bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Corrupt a labeled drawing into a synthetic prediction: per-entity label
/// flips plus jittered, score-shuffled, possibly dropped ground-truth boxes.
/// Deterministic per (seed, drawing id).
pub fn corrupt_prediction(
    d: &Drawing,
    noise: &NoiseConfig,
    seed: u64,
) -> (Vec<Label>, Vec<InstanceBox>) {
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed(seed, &d.id));
    let n_classes = d.catalog.len();
    let labels = d
        .records
        .iter()
        .map(|r| {
            if noise.flip_p > 0.0 && rng.gen_bool(noise.flip_p) {
                let skip = r.label.class_id();
                let mut pick = rng.gen_range(0..n_classes - skip.map_or(0, |_| 1));
                if let Some(s) = skip {
                    if pick >= s {
                        pick += 1;
                    }
                }
                Label::Class(pick)
            } else {
                r.label
            }
        })
        .collect();

    let mut boxes = Vec::new();
    for mut b in gt_instance_boxes(d) {
        if noise.box_drop_q > 0.0 && rng.gen_bool(noise.box_drop_q) {
            continue;
        }
        if noise.box_jitter_mm > 0.0 {
            let j = noise.box_jitter_mm;
            let dx = rng.gen_range(-j..j);
            let dy = rng.gen_range(-j..j);
            b.bbox = BoundingBox::new(
                b.bbox.min_x + dx,
                b.bbox.min_y + dy,
                b.bbox.max_x + dx,
                b.bbox.max_y + dy,
            );
            b.score = rng.gen_range(0.7..1.0);
        }
        boxes.push(b);
    }
    (labels, boxes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drawing::group_symbols;
    use crate::geometry::{arc_length, entity_distance, Entity};
    use crate::graph::{build_graph, connected, GraphConfig};
    use crate::io::drawing_to_string;
    use crate::metrics::{semantic_scores, PanopticScores};
    use crate::panoptic::{assemble_panoptic, prediction_to_drawing};
    use crate::raster::{render_label_mask, vote_entity_labels};

    #[test]
    fn same_seed_reproduces_identical_drawings() {
        let cfg = SynthConfig { seed: 9, ..SynthConfig::default() };
        let a = generate_floorplan(&cfg).unwrap();
        let b = generate_floorplan(&cfg).unwrap();
        assert_eq!(drawing_to_string(&a), drawing_to_string(&b));
        let c = generate_floorplan(&SynthConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(drawing_to_string(&a), drawing_to_string(&c));
    }

    #[test]
    fn door_symbols_are_segment_plus_quarter_arc() {
        let d = generate_floorplan(&SynthConfig::default()).unwrap();
        let door = d.catalog.id_of("door").unwrap();
        let doors: Vec<_> =
            group_symbols(&d).into_iter().filter(|s| s.class == door).collect();
        assert!(!doors.is_empty());
        for s in doors {
            assert_eq!(s.entities.len(), 2);
            let mut kinds = [false; 2];
            for &i in &s.entities {
                match &d.records[i].entity {
                    Entity::Segment { .. } => kinds[0] = true,
                    Entity::Arc { radius, .. } => {
                        kinds[1] = true;
                        let quarter = TAU / 4.0 * radius;
                        assert!((arc_length(&d.records[i].entity) - quarter).abs() < 1e-9);
                    }
                    other => panic!("unexpected door entity {other:?}"),
                }
            }
            assert_eq!(kinds, [true, true]);
        }
    }

    #[test]
    fn every_configured_class_appears() {
        // Even with all densities at zero, forced placement covers the
        // catalog.
        let cfg = SynthConfig {
            door_density: 0.0,
            window_density: 0.0,
            parking_density: 0.0,
            furniture_density: 0.0,
            ..SynthConfig::default()
        };
        let d = generate_floorplan(&cfg).unwrap();
        for c in 0..d.catalog.len() {
            let n = d.records.iter().filter(|r| r.label == Label::Class(c)).count();
            assert!(n >= 1, "class {} missing", d.catalog.name(c));
        }
    }

    #[test]
    fn full_catalog_mode_covers_thirty_classes() {
        let cfg = SynthConfig {
            rooms_x: 4,
            rooms_y: 3,
            door_density: 0.0,
            catalog: LabelCatalog::full(),
            ..SynthConfig::default()
        };
        let d = generate_floorplan(&cfg).unwrap();
        assert_eq!(d.catalog.len(), 30);
        for c in 0..d.catalog.len() {
            let n = d.records.iter().filter(|r| r.label == Label::Class(c)).count();
            assert!(n >= 1, "class {} missing", d.catalog.name(c));
        }
        // The canonical door motif lands on the single_door class.
        let sd = d.catalog.id_of("single_door").unwrap();
        let sym = group_symbols(&d).into_iter().find(|s| s.class == sd).unwrap();
        assert_eq!(sym.entities.len(), 2);
    }

    #[test]
    fn wall_pairs_connect_only_via_the_parallel_rule() {
        let d = generate_floorplan(&SynthConfig::default()).unwrap();
        // First two records are the faces of the bottom boundary wall.
        let a = &d.records[0].entity;
        let b = &d.records[1].entity;
        assert!((entity_distance(a, b) - 240.0).abs() < 1e-9);
        let cfg = GraphConfig::default();
        assert!(connected(a, b, &cfg));
        // Same pair without the parallel boost: 240 >= epsilon, no edge.
        assert!(!connected(a, b, &GraphConfig { eta: 1.0, ..cfg.clone() }));
        // And anything beyond epsilon / eta = 500 stays apart even when
        // parallel.
        let far = Entity::segment(Point2::new(1_000.0, 2_000.0), Point2::new(19_000.0, 2_000.0));
        assert!(!connected(b, &far, &cfg));
    }

    #[test]
    fn infeasible_configs_are_rejected() {
        let bad = [
            SynthConfig { rooms_x: 0, ..SynthConfig::default() },
            SynthConfig { door_density: 1.5, ..SynthConfig::default() },
            SynthConfig { wall_thickness: 40.0, ..SynthConfig::default() },
            SynthConfig { rooms_x: 8, ..SynthConfig::default() },
            SynthConfig { rooms_y: 14, ..SynthConfig::default() },
            SynthConfig { rooms_x: 1, rooms_y: 1, catalog: LabelCatalog::full(), ..SynthConfig::default() },
        ];
        for cfg in bad {
            assert!(
                matches!(generate_floorplan(&cfg), Err(SynthError::InfeasibleConfig { .. })),
                "{cfg:?} should be infeasible"
            );
        }
    }

    #[test]
    fn zero_noise_is_identity_and_scores_perfectly() {
        let d = generate_floorplan(&SynthConfig { seed: 3, ..SynthConfig::default() }).unwrap();
        let (labels, boxes) = corrupt_prediction(&d, &NoiseConfig::default(), 7);
        assert_eq!(labels, d.labels());
        assert_eq!(boxes, gt_instance_boxes(&d));
        let pred = assemble_panoptic(&d, &labels, &boxes).unwrap();
        let pd = prediction_to_drawing(&d, &pred);
        let mut scores = PanopticScores::default();
        scores.add_drawing(&group_symbols(&pd), &group_symbols(&d), &d);
        let pooled = scores.pooled();
        assert_eq!((pooled.pq(), pooled.sq(), pooled.rq()), (1.0, 1.0, 1.0));
        assert_eq!(scores.macro_pq(), 1.0);
    }

    #[test]
    fn full_flip_zeroes_semantic_f1() {
        let d = generate_floorplan(&SynthConfig { seed: 4, ..SynthConfig::default() }).unwrap();
        let noise = NoiseConfig { flip_p: 1.0, ..NoiseConfig::default() };
        let (labels, _) = corrupt_prediction(&d, &noise, 1);
        assert!(labels.iter().zip(d.labels()).all(|(a, b)| *a != b));
        let s = semantic_scores(&labels, &d.labels(), &d).unwrap();
        assert_eq!(s.micro_f1(), 0.0);
        assert_eq!(s.micro_weighted_f1(), 0.0);
    }

    #[test]
    fn flip_fraction_tracks_the_flip_probability() {
        // Two dense blocks pool well over a thousand entities; at p = 0.1 the
        // flipped fraction should land within about three standard deviations.
        let mut flipped = 0usize;
        let mut total = 0usize;
        for seed in [1, 2] {
            let cfg = SynthConfig {
                seed,
                rooms_x: 6,
                rooms_y: 8,
                door_density: 1.0,
                window_density: 1.0,
                furniture_density: 1.0,
                ..SynthConfig::default()
            };
            let d = generate_floorplan(&cfg).unwrap();
            let noise = NoiseConfig { flip_p: 0.1, ..NoiseConfig::default() };
            let (labels, _) = corrupt_prediction(&d, &noise, 11);
            flipped += labels.iter().zip(d.labels()).filter(|(a, b)| **a != *b).count();
            total += labels.len();
        }
        assert!(total >= 1_000, "only {total} entities");
        let frac = flipped as f64 / total as f64;
        assert!((0.07..=0.13).contains(&frac), "flip fraction {frac}");
    }

    #[test]
    fn dropped_and_jittered_boxes() {
        let d = generate_floorplan(&SynthConfig { seed: 5, ..SynthConfig::default() }).unwrap();
        let gt = gt_instance_boxes(&d);
        let noise = NoiseConfig { box_drop_q: 1.0, ..NoiseConfig::default() };
        assert!(corrupt_prediction(&d, &noise, 2).1.is_empty());
        let noise = NoiseConfig { box_jitter_mm: 50.0, ..NoiseConfig::default() };
        let (_, boxes) = corrupt_prediction(&d, &noise, 2);
        assert_eq!(boxes.len(), gt.len());
        for (b, g) in boxes.iter().zip(&gt) {
            assert_eq!(b.class, g.class);
            let dx = b.bbox.min_x - g.bbox.min_x;
            assert!((b.bbox.max_x - g.bbox.max_x - dx).abs() < 1e-9, "rigid shift");
            assert!(dx.abs() <= 50.0);
            assert!((0.7..1.0).contains(&b.score));
        }
    }

    fn assert_entities_close(a: &Entity, b: &Entity, tol: f64) {
        let close = |p: Point2, q: Point2| (p.x - q.x).abs() <= tol && (p.y - q.y).abs() <= tol;
        match (a, b) {
            (Entity::Segment { start: s1, end: e1 }, Entity::Segment { start: s2, end: e2 }) => {
                assert!(close(*s1, *s2) && close(*e1, *e2), "{a:?} vs {b:?}");
            }
            (
                Entity::Arc { center: c1, radius: r1, start_angle: a1, end_angle: b1 },
                Entity::Arc { center: c2, radius: r2, start_angle: a2, end_angle: b2 },
            ) => {
                assert!(
                    close(*c1, *c2)
                        && (r1 - r2).abs() <= tol
                        && (a1 - a2).abs() <= tol
                        && (b1 - b2).abs() <= tol,
                    "{a:?} vs {b:?}"
                );
            }
            (
                Entity::Circle { center: c1, radius: r1 },
                Entity::Circle { center: c2, radius: r2 },
            ) => {
                assert!(close(*c1, *c2) && (r1 - r2).abs() <= tol, "{a:?} vs {b:?}");
            }
            (Entity::Polyline { vertices: v1 }, Entity::Polyline { vertices: v2 }) => {
                assert_eq!(v1.len(), v2.len());
                for (p, q) in v1.iter().zip(v2) {
                    assert!(close(*p, *q), "{a:?} vs {b:?}");
                }
            }
            _ => panic!("entity kind changed: {a:?} vs {b:?}"),
        }
    }

    #[test]
    fn generated_drawings_round_trip_both_formats() {
        for seed in 0..4 {
            let d = generate_floorplan(&SynthConfig { seed, ..SynthConfig::default() }).unwrap();
            let text = drawing_to_string(&d);
            let back = crate::io::drawing_from_str(&text).unwrap();
            assert_eq!(drawing_to_string(&back), text);

            // DXF carries geometry only; labels come back empty.
            let import = crate::dxf::parse(&crate::dxf::write(&d)).unwrap();
            assert_eq!(import.skipped, 0);
            assert_eq!(import.drawing.records.len(), d.records.len());
            for (a, b) in import.drawing.records.iter().zip(&d.records) {
                assert_entities_close(&a.entity, &b.entity, 1e-6);
            }
        }
    }

    #[test]
    fn overlap_free_blocks_vote_back_their_labels() {
        // Coarse smoke check of separability; the full-resolution round trip
        // runs in the acceptance suite.
        let d = generate_floorplan(&SynthConfig { seed: 6, ..SynthConfig::default() }).unwrap();
        let mask = render_label_mask(&d, 0.3, 5.0).unwrap();
        let votes = vote_entity_labels(&mask, &d, 32);
        let hits =
            votes.iter().zip(d.labels()).filter(|(v, g)| **v == *g).count();
        let rate = hits as f64 / votes.len() as f64;
        assert!(rate >= 0.97, "recovered {rate}");
    }

    #[test]
    fn degree_bound_holds_on_generated_blocks() {
        for seed in [0, 1] {
            let d = generate_floorplan(&SynthConfig { seed, ..SynthConfig::default() }).unwrap();
            let g = build_graph(&d, &GraphConfig::default());
            assert!(g.max_degree() <= 3);
            assert!(g.edges().len() > d.records.len() / 4, "graph should be well connected");
        }
    }
}
