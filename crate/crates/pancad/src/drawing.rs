//! Labeled drawings: entity records, symbol grouping, and ground-truth
//! detection boxes.
//!
//! A *symbol* is the instance-level unit of the panoptic task: the set of
//! entity indices sharing one (class, instance) assignment. Stuff classes
//! (walls, parking) form at most one symbol per class; thing entities with
//! instance 0 belong to no symbol at all.

use crate::catalog::{ClassId, Label, LabelCatalog};
use crate::geometry::{entity_bbox, BoundingBox, Entity};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DrawingError {
    #[error("record {index}: {source}")]
    BadEntity {
        index: usize,
        source: crate::geometry::GeometryError,
    },
    #[error("record {index}: class id {class} outside catalog of {len} classes")]
    BadLabel { index: usize, class: ClassId, len: usize },
    #[error("extent does not contain entity {index}")]
    ExtentTooSmall { index: usize },
}

/// One entity with its semantic label and instance index. Instance indices
/// are 1-based; 0 means "no instance" and is forced for stuff and background.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityRecord {
    pub entity: Entity,
    pub label: Label,
    pub instance: u32,
}

impl EntityRecord {
    pub fn new(entity: Entity, label: Label, instance: u32) -> Self {
        EntityRecord { entity, label, instance }
    }

    pub fn background(entity: Entity) -> Self {
        EntityRecord { entity, label: Label::Background, instance: 0 }
    }
}

/// A drawing: id, catalog, entity records, and the extent box containing all
/// entity geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Drawing {
    pub id: String,
    pub catalog: LabelCatalog,
    pub records: Vec<EntityRecord>,
    pub extent: BoundingBox,
}

impl Drawing {
    /// Build a drawing, computing the extent as the union of entity boxes.
    pub fn new(
        id: impl Into<String>,
        catalog: LabelCatalog,
        records: Vec<EntityRecord>,
    ) -> Result<Self, DrawingError> {
        let extent = records
            .iter()
            .map(|r| entity_bbox(&r.entity))
            .reduce(BoundingBox::union)
            .unwrap_or(BoundingBox::new(0.0, 0.0, 0.0, 0.0));
        Drawing::with_extent(id, catalog, records, extent)
    }

    /// Build a drawing with an explicit extent, which must contain every
    /// entity's bounding box.
    pub fn with_extent(
        id: impl Into<String>,
        catalog: LabelCatalog,
        mut records: Vec<EntityRecord>,
        extent: BoundingBox,
    ) -> Result<Self, DrawingError> {
        for (index, r) in records.iter_mut().enumerate() {
            r.entity
                .validate()
                .map_err(|source| DrawingError::BadEntity { index, source })?;
            if let Label::Class(c) = r.label {
                if c >= catalog.len() {
                    return Err(DrawingError::BadLabel { index, class: c, len: catalog.len() });
                }
                if catalog.is_stuff(c) {
                    r.instance = 0;
                }
            } else {
                r.instance = 0;
            }
            if !extent.contains_box(&entity_bbox(&r.entity)) {
                return Err(DrawingError::ExtentTooSmall { index });
            }
        }
        Ok(Drawing { id: id.into(), catalog, records, extent })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Copy of this drawing with labels and instances replaced; geometry and
    /// catalog stay shared. Lengths must match.
    pub fn with_assignments(&self, assignments: &[(Label, u32)]) -> Drawing {
        assert_eq!(assignments.len(), self.records.len());
        let records = self
            .records
            .iter()
            .zip(assignments)
            .map(|(r, &(label, instance))| EntityRecord::new(r.entity.clone(), label, instance))
            .collect();
        Drawing::with_extent(self.id.clone(), self.catalog.clone(), records, self.extent)
            .expect("geometry unchanged")
    }
}

/// Instance-level unit: the entity indices sharing one (class, instance)
/// assignment. `instance` is 0 for stuff symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    pub class: ClassId,
    pub instance: u32,
    pub entities: Vec<usize>,
}

/// How stuff entities collapse into symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StuffGrouping {
    /// One symbol per stuff class per drawing (the scoring convention).
    #[default]
    PerClass,
    /// One symbol per (stuff class, instance index); lets callers keep
    /// region-level stuff annotations apart if their data carries them.
    PerInstance,
}

/// Group entities into symbols. Background entities and thing entities with
/// instance 0 are skipped; output is sorted by (class, instance).
pub fn group_symbols(d: &Drawing) -> Vec<Symbol> {
    group_symbols_with(d, StuffGrouping::PerClass)
}

pub fn group_symbols_with(d: &Drawing, stuff: StuffGrouping) -> Vec<Symbol> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(ClassId, u32), Vec<usize>> = BTreeMap::new();
    for (i, r) in d.records.iter().enumerate() {
        let Label::Class(c) = r.label else { continue };
        if d.catalog.is_stuff(c) {
            let key = match stuff {
                StuffGrouping::PerClass => (c, 0),
                StuffGrouping::PerInstance => (c, r.instance),
            };
            groups.entry(key).or_default().push(i);
        } else if r.instance > 0 {
            groups.entry((c, r.instance)).or_default().push(i);
        }
    }
    groups
        .into_iter()
        .map(|((class, instance), entities)| Symbol { class, instance, entities })
        .collect()
}

/// An axis-aligned detection box with class and confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceBox {
    pub class: ClassId,
    pub bbox: BoundingBox,
    pub score: f64,
}

/// Ground-truth boxes: one per thing symbol, the union of its members' entity
/// boxes, confidence 1. Stuff produces no boxes. Order follows
/// [`group_symbols`].
pub fn gt_instance_boxes(d: &Drawing) -> Vec<InstanceBox> {
    group_symbols(d)
        .into_iter()
        .filter(|s| d.catalog.is_thing(s.class))
        .map(|s| {
            let bbox = s
                .entities
                .iter()
                .map(|&i| entity_bbox(&d.records[i].entity))
                .reduce(BoundingBox::union)
                .expect("symbol has members");
            InstanceBox { class: s.class, bbox, score: 1.0 }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    fn seg(x1: f64, y1: f64, x2: f64, y2: f64) -> Entity {
        Entity::segment(Point2::new(x1, y1), Point2::new(x2, y2))
    }

    fn small_drawing(records: Vec<EntityRecord>) -> Drawing {
        Drawing::new("t", LabelCatalog::small(), records).unwrap()
    }

    #[test]
    fn three_entities_one_instance_form_one_symbol() {
        let cat = LabelCatalog::small();
        let door = Label::Class(cat.id_of("door").unwrap());
        let d = small_drawing(vec![
            EntityRecord::new(seg(0.0, 0.0, 1.0, 0.0), door, 1),
            EntityRecord::new(seg(1.0, 0.0, 1.0, 1.0), door, 1),
            EntityRecord::new(seg(1.0, 1.0, 0.0, 1.0), door, 1),
        ]);
        let syms = group_symbols(&d);
        assert_eq!(syms.len(), 1);
        assert_eq!(syms[0].entities, vec![0, 1, 2]);
    }

    #[test]
    fn mixed_drawing_groups_into_three_symbols() {
        let cat = LabelCatalog::small();
        let door = Label::Class(cat.id_of("door").unwrap());
        let wall = Label::Class(cat.id_of("wall").unwrap());
        let d = small_drawing(vec![
            EntityRecord::new(seg(0.0, 0.0, 1.0, 0.0), door, 1),
            EntityRecord::new(seg(2.0, 0.0, 3.0, 0.0), door, 2),
            EntityRecord::new(seg(0.0, 5.0, 9.0, 5.0), wall, 0),
            EntityRecord::background(seg(4.0, 4.0, 5.0, 5.0)),
        ]);
        let syms = group_symbols(&d);
        assert_eq!(syms.len(), 3);
        // Sorted by (class, instance): wall is class 0 in the small catalog.
        assert_eq!(syms[0].class, cat.id_of("wall").unwrap());
        assert_eq!(syms[1].instance, 1);
        assert_eq!(syms[2].instance, 2);
    }

    #[test]
    fn stuff_collapses_per_class_regardless_of_instance() {
        let cat = LabelCatalog::small();
        let wall = Label::Class(cat.id_of("wall").unwrap());
        // Construction forces stuff instances to 0 anyway; two wall records
        // always merge into one symbol under the default grouping.
        let d = small_drawing(vec![
            EntityRecord::new(seg(0.0, 0.0, 1.0, 0.0), wall, 3),
            EntityRecord::new(seg(0.0, 9.0, 1.0, 9.0), wall, 8),
        ]);
        assert_eq!(group_symbols(&d).len(), 1);
        assert_eq!(group_symbols_with(&d, StuffGrouping::PerInstance).len(), 1);
        assert!(d.records.iter().all(|r| r.instance == 0));
    }

    #[test]
    fn unboxed_things_form_no_symbol() {
        let cat = LabelCatalog::small();
        let door = Label::Class(cat.id_of("door").unwrap());
        let d = small_drawing(vec![EntityRecord::new(seg(0.0, 0.0, 1.0, 0.0), door, 0)]);
        assert!(group_symbols(&d).is_empty());
    }

    #[test]
    fn gt_boxes_cover_symbol_members() {
        let cat = LabelCatalog::small();
        let door = Label::Class(cat.id_of("door").unwrap());
        let wall = Label::Class(cat.id_of("wall").unwrap());
        let d = small_drawing(vec![
            EntityRecord::new(seg(0.0, 0.0, 0.0, 900.0), door, 1),
            EntityRecord::new(
                Entity::arc(Point2::new(0.0, 0.0), 900.0, 0.0, std::f64::consts::FRAC_PI_2),
                door,
                1,
            ),
            EntityRecord::new(seg(-5000.0, 0.0, 5000.0, 0.0), wall, 0),
        ]);
        let boxes = gt_instance_boxes(&d);
        assert_eq!(boxes.len(), 1, "stuff yields no boxes");
        let b = &boxes[0].bbox;
        assert!((b.min_x - 0.0).abs() < 1e-1);
        assert!((b.min_y - 0.0).abs() < 1e-1);
        assert!((b.max_x - 900.0).abs() < 1e-1);
        assert!((b.max_y - 900.0).abs() < 1e-1);
        assert_eq!(boxes[0].score, 1.0);
    }

    #[test]
    fn wall_only_drawing_has_no_boxes() {
        let cat = LabelCatalog::small();
        let wall = Label::Class(cat.id_of("wall").unwrap());
        let d = small_drawing(vec![EntityRecord::new(seg(0.0, 0.0, 1.0, 0.0), wall, 0)]);
        assert!(gt_instance_boxes(&d).is_empty());
    }

    #[test]
    fn construction_rejects_bad_labels_and_degenerate_geometry() {
        let cat = LabelCatalog::small();
        let bad_label = Drawing::new(
            "t",
            cat.clone(),
            vec![EntityRecord::new(seg(0.0, 0.0, 1.0, 0.0), Label::Class(99), 1)],
        );
        assert!(matches!(bad_label, Err(DrawingError::BadLabel { class: 99, .. })));
        let bad_geom = Drawing::new(
            "t",
            cat,
            vec![EntityRecord::background(seg(1.0, 1.0, 1.0, 1.0))],
        );
        assert!(matches!(bad_geom, Err(DrawingError::BadEntity { .. })));
    }

    #[test]
    fn explicit_extent_must_cover_entities() {
        let r = Drawing::with_extent(
            "t",
            LabelCatalog::small(),
            vec![EntityRecord::background(seg(0.0, 0.0, 10.0, 0.0))],
            BoundingBox::new(0.0, 0.0, 5.0, 5.0),
        );
        assert!(matches!(r, Err(DrawingError::ExtentTooSmall { index: 0 })));
    }
}
