//! File formats: JSON-lines drawing files and detection box files.
//!
//! A drawing file holds one JSON object per line. The first line is a header
//! `{"id", "extent", "classes", "stuff"}`; every following line is one entity
//! `{"kind", ...geometry (mm), "label", "instance"}`. Labels are class names
//! or `"background"`. Serialization uses shortest-round-trip floats, so
//! `load(save(d)) == d` exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::LabelCatalog;
use crate::drawing::{Drawing, EntityRecord, InstanceBox};
use crate::geometry::{BoundingBox, Entity, Point2};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unknown class name {0:?}")]
    UnknownClass(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, reason: impl Into<String>) -> FormatError {
    FormatError::Parse { line, reason: reason.into() }
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    id: String,
    extent: [f64; 4],
    classes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stuff: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum EntityLine {
    Segment { start: [f64; 2], end: [f64; 2], label: String, instance: u32 },
    Arc {
        center: [f64; 2],
        radius: f64,
        start_angle: f64,
        end_angle: f64,
        label: String,
        instance: u32,
    },
    Circle { center: [f64; 2], radius: f64, label: String, instance: u32 },
    Polyline { vertices: Vec<[f64; 2]>, label: String, instance: u32 },
}

fn pt(xy: [f64; 2]) -> Point2 {
    Point2::new(xy[0], xy[1])
}

fn xy(p: Point2) -> [f64; 2] {
    [p.x, p.y]
}

impl EntityLine {
    fn from_record(r: &EntityRecord, catalog: &LabelCatalog) -> Self {
        let label = catalog.label_name(r.label).to_string();
        let instance = r.instance;
        match &r.entity {
            Entity::Segment { start, end } => {
                EntityLine::Segment { start: xy(*start), end: xy(*end), label, instance }
            }
            Entity::Arc { center, radius, start_angle, end_angle } => EntityLine::Arc {
                center: xy(*center),
                radius: *radius,
                start_angle: *start_angle,
                end_angle: *end_angle,
                label,
                instance,
            },
            Entity::Circle { center, radius } => {
                EntityLine::Circle { center: xy(*center), radius: *radius, label, instance }
            }
            Entity::Polyline { vertices } => EntityLine::Polyline {
                vertices: vertices.iter().map(|p| xy(*p)).collect(),
                label,
                instance,
            },
        }
    }

    fn into_record(self, catalog: &LabelCatalog) -> Result<EntityRecord, FormatError> {
        let (entity, label, instance) = match self {
            EntityLine::Segment { start, end, label, instance } => {
                (Entity::segment(pt(start), pt(end)), label, instance)
            }
            EntityLine::Arc { center, radius, start_angle, end_angle, label, instance } => {
                (Entity::arc(pt(center), radius, start_angle, end_angle), label, instance)
            }
            EntityLine::Circle { center, radius, label, instance } => {
                (Entity::circle(pt(center), radius), label, instance)
            }
            EntityLine::Polyline { vertices, label, instance } => {
                (Entity::polyline(vertices.into_iter().map(pt).collect()), label, instance)
            }
        };
        let label = catalog
            .parse_label(&label)
            .ok_or(FormatError::UnknownClass(label))?;
        Ok(EntityRecord::new(entity, label, instance))
    }
}

/// Serialize a drawing to the JSON-lines format.
pub fn drawing_to_string(d: &Drawing) -> String {
    let header = HeaderLine {
        id: d.id.clone(),
        extent: [d.extent.min_x, d.extent.min_y, d.extent.max_x, d.extent.max_y],
        classes: d.catalog.names().to_vec(),
        stuff: Some(d.catalog.stuff_names()),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for r in &d.records {
        out.push_str(&serde_json::to_string(&EntityLine::from_record(r, &d.catalog)).unwrap());
        out.push('\n');
    }
    out
}

/// Parse the JSON-lines format. Line numbers in errors are 1-based.
pub fn drawing_from_str(text: &str) -> Result<Drawing, FormatError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (n, header) = lines.next().ok_or(parse_err(1, "empty drawing file"))?;
    let header: HeaderLine =
        serde_json::from_str(header).map_err(|e| parse_err(n + 1, format!("bad header: {e}")))?;
    let catalog = match &header.stuff {
        Some(stuff) => {
            let stuff: Vec<&str> = stuff.iter().map(String::as_str).collect();
            LabelCatalog::new(header.classes.clone(), &stuff)
        }
        None => LabelCatalog::with_default_stuff(header.classes.clone()),
    }
    .map_err(|e| parse_err(n + 1, e.to_string()))?;

    let mut records = Vec::new();
    for (n, line) in lines {
        let parsed: EntityLine = serde_json::from_str(line)
            .map_err(|e| parse_err(n + 1, format!("bad entity: {e}")))?;
        let record = parsed.into_record(&catalog)?;
        record
            .entity
            .validate()
            .map_err(|e| parse_err(n + 1, e.to_string()))?;
        records.push(record);
    }
    let [x0, y0, x1, y1] = header.extent;
    Drawing::with_extent(header.id, catalog, records, BoundingBox::new(x0, y0, x1, y1))
        .map_err(|e| FormatError::Invalid(e.to_string()))
}

pub fn save_drawing(d: &Drawing, path: impl AsRef<Path>) -> Result<(), FormatError> {
    fs::write(path, drawing_to_string(d))?;
    Ok(())
}

pub fn load_drawing(path: impl AsRef<Path>) -> Result<Drawing, FormatError> {
    drawing_from_str(&fs::read_to_string(path)?)
}

#[derive(Serialize, Deserialize)]
struct BoxLine {
    class: String,
    bbox: [f64; 4],
    score: f64,
}

/// Serialize detection boxes as a JSON array of `{"class","bbox","score"}`.
pub fn boxes_to_string(boxes: &[InstanceBox], catalog: &LabelCatalog) -> String {
    let lines: Vec<BoxLine> = boxes
        .iter()
        .map(|b| BoxLine {
            class: catalog.name(b.class).to_string(),
            bbox: [b.bbox.min_x, b.bbox.min_y, b.bbox.max_x, b.bbox.max_y],
            score: b.score,
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&lines).expect("boxes serialize");
    s.push('\n');
    s
}

pub fn boxes_from_str(text: &str, catalog: &LabelCatalog) -> Result<Vec<InstanceBox>, FormatError> {
    let lines: Vec<BoxLine> =
        serde_json::from_str(text).map_err(|e| parse_err(1, format!("bad box file: {e}")))?;
    lines
        .into_iter()
        .map(|b| {
            let class = catalog
                .id_of(&b.class)
                .ok_or(FormatError::UnknownClass(b.class))?;
            let [x0, y0, x1, y1] = b.bbox;
            Ok(InstanceBox { class, bbox: BoundingBox::new(x0, y0, x1, y1), score: b.score })
        })
        .collect()
}

pub fn save_boxes(
    boxes: &[InstanceBox],
    catalog: &LabelCatalog,
    path: impl AsRef<Path>,
) -> Result<(), FormatError> {
    fs::write(path, boxes_to_string(boxes, catalog))?;
    Ok(())
}

pub fn load_boxes(
    path: impl AsRef<Path>,
    catalog: &LabelCatalog,
) -> Result<Vec<InstanceBox>, FormatError> {
    boxes_from_str(&fs::read_to_string(path)?, catalog)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Label;

    fn seg(x1: f64, y1: f64, x2: f64, y2: f64) -> Entity {
        Entity::segment(Point2::new(x1, y1), Point2::new(x2, y2))
    }

    fn one_door_drawing() -> Drawing {
        let cat = LabelCatalog::small();
        let door = Label::Class(cat.id_of("door").unwrap());
        Drawing::new(
            "d0",
            cat,
            vec![EntityRecord::new(seg(0.0, 0.0, 0.0, 900.0), door, 1)],
        )
        .unwrap()
    }

    #[test]
    fn single_entity_round_trip_is_identity() {
        let d = one_door_drawing();
        let text = drawing_to_string(&d);
        let back = drawing_from_str(&text).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn mixed_entities_round_trip_with_awkward_floats() {
        let cat = LabelCatalog::small();
        let wall = Label::Class(cat.id_of("wall").unwrap());
        let d = Drawing::new(
            "floats",
            cat,
            vec![
                EntityRecord::new(seg(0.1, 0.2, 1.0 / 3.0, 123456.789), wall, 0),
                EntityRecord::new(
                    Entity::arc(Point2::new(-0.0, 2.5e-7), 900.0, 0.1, 6.2),
                    Label::Background,
                    0,
                ),
                EntityRecord::new(Entity::circle(Point2::new(5.0, 5.0), f64::MIN_POSITIVE), Label::Background, 0),
                EntityRecord::new(
                    Entity::polyline(vec![
                        Point2::new(0.0, 0.0),
                        Point2::new(std::f64::consts::PI, 1e-300),
                        Point2::new(4.0, 4.0),
                    ]),
                    Label::Background,
                    0,
                ),
            ],
        )
        .unwrap();
        let back = drawing_from_str(&drawing_to_string(&d)).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn unknown_class_is_reported() {
        let text = concat!(
            r#"{"id":"x","extent":[0,0,1,1],"classes":["wall"],"stuff":["wall"]}"#,
            "\n",
            r#"{"kind":"segment","start":[0,0],"end":[1,0],"label":"dragon","instance":0}"#,
            "\n"
        );
        match drawing_from_str(text) {
            Err(FormatError::UnknownClass(c)) => assert_eq!(c, "dragon"),
            other => panic!("expected UnknownClass, got {other:?}"),
        }
    }

    #[test]
    fn malformed_entity_reports_line_number() {
        let text = concat!(
            r#"{"id":"x","extent":[0,0,1,1],"classes":["wall"],"stuff":["wall"]}"#,
            "\n",
            r#"{"kind":"segment","start":[0,0]}"#,
            "\n"
        );
        match drawing_from_str(text) {
            Err(FormatError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected Parse error, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_geometry_rejected_with_line() {
        let text = concat!(
            r#"{"id":"x","extent":[0,0,1,1],"classes":["wall"],"stuff":["wall"]}"#,
            "\n",
            r#"{"kind":"segment","start":[1,1],"end":[1,1],"label":"wall","instance":0}"#,
            "\n"
        );
        assert!(matches!(drawing_from_str(text), Err(FormatError::Parse { line: 2, .. })));
    }

    #[test]
    fn files_without_stuff_field_use_wall_parking_convention() {
        let text = concat!(
            r#"{"id":"x","extent":[0,0,10,10],"classes":["wall","door"]}"#,
            "\n",
            r#"{"kind":"segment","start":[0,0],"end":[1,0],"label":"wall","instance":0}"#,
            "\n"
        );
        let d = drawing_from_str(text).unwrap();
        assert!(d.catalog.is_stuff(d.catalog.id_of("wall").unwrap()));
        assert!(d.catalog.is_thing(d.catalog.id_of("door").unwrap()));
    }

    #[test]
    fn box_file_round_trip() {
        let cat = LabelCatalog::small();
        let boxes = vec![
            InstanceBox {
                class: cat.id_of("door").unwrap(),
                bbox: BoundingBox::new(0.0, 0.0, 900.0, 900.0),
                score: 0.875,
            },
            InstanceBox {
                class: cat.id_of("table").unwrap(),
                bbox: BoundingBox::new(-1.5, 2.0, 3.25, 4.0),
                score: 1.0,
            },
        ];
        let text = boxes_to_string(&boxes, &cat);
        let back = boxes_from_str(&text, &cat).unwrap();
        assert_eq!(back, boxes);
    }

    #[test]
    fn box_file_with_unknown_class_errors() {
        let cat = LabelCatalog::small();
        let text = r#"[{"class":"pool","bbox":[0,0,1,1],"score":0.5}]"#;
        assert!(matches!(boxes_from_str(text, &cat), Err(FormatError::UnknownClass(_))));
    }
}
