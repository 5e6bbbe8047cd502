//! Fusion of per-entity semantic predictions with detection boxes into a
//! full panoptic labeling: every entity ends up with a (label, instance)
//! pair.
//!
//! Stuff entities keep instance 0. Boxes claim thing entities in descending
//! confidence order; a box captures the still-unassigned entities of its own
//! class whose sampled points lie at least half inside it, and each
//! capturing box mints a fresh dense instance id.

use thiserror::Error;

use crate::catalog::Label;
use crate::drawing::{Drawing, InstanceBox};
use crate::geometry::sample_points;

#[derive(Debug, Error, PartialEq)]
pub enum PanopticError {
    #[error("box class {class} is not a thing class of the catalog")]
    UnknownClass { class: usize },
}

/// What happens to thing-labeled entities no box captured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnboxedPolicy {
    /// Keep the semantic label with instance 0 (no instance symbol formed).
    #[default]
    KeepSemantic,
    /// Demote the entity to background.
    Demote,
}

/// Per-entity (label, instance) assignment, aligned with the drawing's
/// record order.
#[derive(Debug, Clone, PartialEq)]
pub struct PanopticPrediction {
    pub assignments: Vec<(Label, u32)>,
}

pub const BOX_MEMBERSHIP_SAMPLES: usize = 32;

pub fn assemble_panoptic(
    d: &Drawing,
    entity_labels: &[Label],
    boxes: &[InstanceBox],
) -> Result<PanopticPrediction, PanopticError> {
    assemble_panoptic_with(d, entity_labels, boxes, UnboxedPolicy::KeepSemantic)
}

pub fn assemble_panoptic_with(
    d: &Drawing,
    entity_labels: &[Label],
    boxes: &[InstanceBox],
    policy: UnboxedPolicy,
) -> Result<PanopticPrediction, PanopticError> {
    assert_eq!(entity_labels.len(), d.records.len(), "one label per entity");
    for b in boxes {
        if b.class >= d.catalog.len() || d.catalog.is_stuff(b.class) {
            return Err(PanopticError::UnknownClass { class: b.class });
        }
    }
    // Stable order: descending confidence, input order on ties.
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| boxes[b].score.partial_cmp(&boxes[a].score).unwrap());

    let mut assignments: Vec<(Label, u32)> =
        entity_labels.iter().map(|&l| (l, 0u32)).collect();
    let mut taken = vec![false; d.records.len()];
    let mut next_z = 1u32;
    for &bi in &order {
        let b = &boxes[bi];
        let mut captured = Vec::new();
        for (i, rec) in d.records.iter().enumerate() {
            if taken[i] || entity_labels[i] != Label::Class(b.class) {
                continue;
            }
            let pts = sample_points(&rec.entity, BOX_MEMBERSHIP_SAMPLES);
            let inside = pts.iter().filter(|p| b.bbox.contains(**p)).count();
            if inside * 2 >= pts.len() {
                captured.push(i);
            }
        }
        // Ids stay dense: an empty box mints nothing.
        if captured.is_empty() {
            continue;
        }
        for i in captured {
            taken[i] = true;
            assignments[i].1 = next_z;
        }
        next_z += 1;
    }
    if policy == UnboxedPolicy::Demote {
        for (i, a) in assignments.iter_mut().enumerate() {
            if let Label::Class(c) = a.0 {
                if d.catalog.is_thing(c) && !taken[i] {
                    a.0 = Label::Background;
                }
            }
        }
    }
    Ok(PanopticPrediction { assignments })
}

/// Re-attach a prediction to the drawing's geometry, producing a drawing
/// that serializes in the ordinary format.
pub fn prediction_to_drawing(d: &Drawing, pred: &PanopticPrediction) -> Drawing {
    d.with_assignments(&pred.assignments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::LabelCatalog;
    use crate::drawing::{group_symbols, gt_instance_boxes, EntityRecord};
    use crate::geometry::{BoundingBox, Entity, Point2};

    fn seg(x1: f64, y1: f64, x2: f64, y2: f64) -> Entity {
        Entity::segment(Point2::new(x1, y1), Point2::new(x2, y2))
    }

    /// wall stuff + two door symbols (2 entities each) + one stray table.
    fn scene() -> Drawing {
        let cat = LabelCatalog::small();
        let wall = Label::Class(cat.id_of("wall").unwrap());
        let door = Label::Class(cat.id_of("door").unwrap());
        let table = Label::Class(cat.id_of("table").unwrap());
        let recs = vec![
            EntityRecord::new(seg(0.0, -500.0, 9000.0, -500.0), wall, 0),
            EntityRecord::new(seg(0.0, 0.0, 0.0, 900.0), door, 1),
            EntityRecord::new(Entity::arc(Point2::new(0.0, 0.0), 900.0, 0.0, 1.5), door, 1),
            EntityRecord::new(seg(5000.0, 0.0, 5000.0, 900.0), door, 2),
            EntityRecord::new(
                Entity::arc(Point2::new(5000.0, 0.0), 900.0, 0.0, 1.5),
                door,
                2,
            ),
            EntityRecord::new(seg(8000.0, 0.0, 8800.0, 0.0), table, 1),
        ];
        Drawing::new("scene", cat, recs).unwrap()
    }

    #[test]
    fn no_boxes_gives_everything_instance_zero() {
        let d = scene();
        let labels = d.labels();
        let p = assemble_panoptic(&d, &labels, &[]).unwrap();
        assert!(p.assignments.iter().all(|&(_, z)| z == 0));
        assert_eq!(p.assignments[0].0, labels[0]);
    }

    #[test]
    fn one_box_groups_its_entities_under_one_fresh_id() {
        let d = scene();
        let labels = d.labels();
        let door = d.catalog.id_of("door").unwrap();
        let boxes = vec![InstanceBox {
            class: door,
            bbox: BoundingBox::new(-950.0, -950.0, 950.0, 950.0),
            score: 0.9,
        }];
        let p = assemble_panoptic(&d, &labels, &boxes).unwrap();
        assert_eq!(p.assignments[1], (Label::Class(door), 1));
        assert_eq!(p.assignments[2], (Label::Class(door), 1));
        // The far door and the table stay unboxed at z = 0.
        assert_eq!(p.assignments[3].1, 0);
        assert_eq!(p.assignments[5].1, 0);
    }

    #[test]
    fn higher_confidence_box_wins_contested_entities() {
        let d = scene();
        let labels = d.labels();
        let door = d.catalog.id_of("door").unwrap();
        let wide = BoundingBox::new(-950.0, -950.0, 950.0, 950.0);
        let boxes = vec![
            InstanceBox { class: door, bbox: wide, score: 0.3 },
            InstanceBox { class: door, bbox: wide, score: 0.8 },
        ];
        let p = assemble_panoptic(&d, &labels, &boxes).unwrap();
        // The 0.8 box runs first and takes both entities; the 0.3 box then
        // captures nothing and mints no id.
        assert_eq!(p.assignments[1].1, 1);
        assert_eq!(p.assignments[2].1, 1);
        let max_z = p.assignments.iter().map(|a| a.1).max().unwrap();
        assert_eq!(max_z, 1);
    }

    #[test]
    fn instance_ids_are_dense_in_confidence_order() {
        let d = scene();
        let labels = d.labels();
        let door = d.catalog.id_of("door").unwrap();
        let boxes = vec![
            InstanceBox {
                class: door,
                bbox: BoundingBox::new(4050.0, -950.0, 5950.0, 950.0),
                score: 0.5,
            },
            // Captures nothing: far away from any door entity.
            InstanceBox {
                class: door,
                bbox: BoundingBox::new(-9000.0, -9000.0, -8000.0, -8000.0),
                score: 0.7,
            },
            InstanceBox {
                class: door,
                bbox: BoundingBox::new(-950.0, -950.0, 950.0, 950.0),
                score: 0.9,
            },
        ];
        let p = assemble_panoptic(&d, &labels, &boxes).unwrap();
        // 0.9 box takes the near door as 1; the empty 0.7 box skips; 0.5
        // takes the far door as 2.
        assert_eq!(p.assignments[1].1, 1);
        assert_eq!(p.assignments[3].1, 2);
    }

    #[test]
    fn class_mismatch_blocks_capture() {
        let d = scene();
        let labels = d.labels();
        let window = d.catalog.id_of("window").unwrap();
        let boxes = vec![InstanceBox {
            class: window,
            bbox: BoundingBox::new(-950.0, -950.0, 950.0, 950.0),
            score: 0.9,
        }];
        let p = assemble_panoptic(&d, &labels, &boxes).unwrap();
        assert!(p.assignments.iter().all(|&(_, z)| z == 0));
    }

    #[test]
    fn stuff_box_class_is_rejected() {
        let d = scene();
        let labels = d.labels();
        let wall = d.catalog.id_of("wall").unwrap();
        let boxes = vec![InstanceBox {
            class: wall,
            bbox: BoundingBox::new(0.0, 0.0, 1.0, 1.0),
            score: 0.9,
        }];
        assert_eq!(
            assemble_panoptic(&d, &labels, &boxes),
            Err(PanopticError::UnknownClass { class: wall })
        );
    }

    #[test]
    fn half_inside_rule_is_inclusive() {
        let cat = LabelCatalog::small();
        let door = Label::Class(cat.id_of("door").unwrap());
        // 32 samples at t = k/31 along x ∈ [0, 3100]: exactly 16 of them
        // (k ≤ 15, x ≤ 1500) fall inside a box ending at x = 1500.
        let d = Drawing::new(
            "h",
            cat,
            vec![EntityRecord::new(seg(0.0, 0.0, 3100.0, 0.0), door, 1)],
        )
        .unwrap();
        let labels = d.labels();
        let door_id = match door {
            Label::Class(c) => c,
            Label::Background => unreachable!(),
        };
        let capture = vec![InstanceBox {
            class: door_id,
            bbox: BoundingBox::new(-10.0, -10.0, 1500.0, 10.0),
            score: 0.9,
        }];
        let p = assemble_panoptic(&d, &labels, &capture).unwrap();
        assert_eq!(p.assignments[0].1, 1);
        // One sample fewer inside (box ends at 1490 < x_15 = 1500) misses.
        let miss = vec![InstanceBox {
            class: door_id,
            bbox: BoundingBox::new(-10.0, -10.0, 1490.0, 10.0),
            score: 0.9,
        }];
        let p = assemble_panoptic(&d, &labels, &miss).unwrap();
        assert_eq!(p.assignments[0].1, 0);
    }

    #[test]
    fn demote_policy_backgrounds_unboxed_things() {
        let d = scene();
        let labels = d.labels();
        let p = assemble_panoptic_with(&d, &labels, &[], UnboxedPolicy::Demote).unwrap();
        // Stuff survives, every thing entity is dropped to background.
        assert_eq!(p.assignments[0].0, labels[0]);
        assert!(p.assignments[1..].iter().all(|&(l, _)| l == Label::Background));
    }

    #[test]
    fn gt_boxes_round_trip_the_gt_partition() {
        let d = scene();
        let labels = d.labels();
        let boxes = gt_instance_boxes(&d);
        let p = assemble_panoptic(&d, &labels, &boxes).unwrap();
        let rebuilt = prediction_to_drawing(&d, &p);
        let got = group_symbols(&rebuilt);
        let want = group_symbols(&d);
        assert_eq!(got.len(), want.len());
        // Same partition into entity sets per class; instance ids may be
        // renumbered.
        let key = |s: &crate::drawing::Symbol| (s.class, s.entities.clone());
        let mut a: Vec<_> = got.iter().map(key).collect();
        let mut b: Vec<_> = want.iter().map(key).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }
}
