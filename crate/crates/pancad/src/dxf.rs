//! Minimal DXF reader/writer for the entity subset this crate works with.
//!
//! DXF is a sequence of (group code, value) line pairs. We walk the ENTITIES
//! section and pick up LINE, CIRCLE, ARC, and LWPOLYLINE; anything else is
//! counted and skipped. Imported entities carry no labels — DXF layers are
//! not a label source here — so every record comes back as background.
//! Angles are degrees in DXF and radians in memory.

use std::path::Path;

use crate::catalog::LabelCatalog;
use crate::drawing::{Drawing, EntityRecord};
use crate::geometry::{Entity, Point2};
use crate::io::FormatError;

/// Result of a DXF import: the drawing plus how many unsupported entities
/// were skipped.
#[derive(Debug)]
pub struct DxfImport {
    pub drawing: Drawing,
    pub skipped: usize,
}

struct PairReader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    /// One-pair lookahead so entity parsers can stop at the next `0` code.
    peeked: Option<Option<(usize, i32, &'a str)>>,
}

impl<'a> PairReader<'a> {
    fn new(text: &'a str) -> Self {
        PairReader { lines: text.lines().enumerate(), peeked: None }
    }

    fn next_pair(&mut self) -> Result<Option<(usize, i32, &'a str)>, FormatError> {
        if let Some(p) = self.peeked.take() {
            return Ok(p);
        }
        let Some((n, code_line)) = self.lines.next() else {
            return Ok(None);
        };
        let code: i32 = code_line.trim().parse().map_err(|_| FormatError::Parse {
            line: n + 1,
            reason: format!("expected group code, got {:?}", code_line.trim()),
        })?;
        let Some((vn, value)) = self.lines.next() else {
            return Err(FormatError::Parse { line: n + 1, reason: "dangling group code".into() });
        };
        Ok(Some((vn + 1, code, value.trim())))
    }

    fn peek(&mut self) -> Result<Option<(usize, i32, &'a str)>, FormatError> {
        if self.peeked.is_none() {
            self.peeked = Some(self.next_pair()?);
        }
        Ok(self.peeked.clone().unwrap())
    }
}

fn parse_f64(line: usize, value: &str) -> Result<f64, FormatError> {
    value.parse().map_err(|_| FormatError::Parse {
        line,
        reason: format!("expected number, got {value:?}"),
    })
}

/// Codes collected for one entity, keyed by group code; repeated codes (the
/// LWPOLYLINE vertex stream) keep their order.
struct EntityCodes {
    pairs: Vec<(usize, i32, String)>,
}

impl EntityCodes {
    fn one(&self, code: i32, what: &str, at: usize) -> Result<f64, FormatError> {
        match self.pairs.iter().find(|(_, c, _)| *c == code) {
            Some((line, _, v)) => parse_f64(*line, v),
            None => Err(FormatError::Parse {
                line: at,
                reason: format!("{what} missing group {code}"),
            }),
        }
    }

    fn all(&self, code: i32) -> Result<Vec<f64>, FormatError> {
        self.pairs
            .iter()
            .filter(|(_, c, _)| *c == code)
            .map(|(line, _, v)| parse_f64(*line, v))
            .collect()
    }
}

fn read_entity_codes(r: &mut PairReader) -> Result<EntityCodes, FormatError> {
    let mut pairs = Vec::new();
    while let Some((line, code, value)) = r.peek()? {
        if code == 0 {
            break;
        }
        r.next_pair()?;
        pairs.push((line, code, value.to_string()));
    }
    Ok(EntityCodes { pairs })
}

fn build_entity(name: &str, at: usize, codes: &EntityCodes) -> Result<Option<Entity>, FormatError> {
    let e = match name {
        "LINE" => Entity::segment(
            Point2::new(codes.one(10, "LINE", at)?, codes.one(20, "LINE", at)?),
            Point2::new(codes.one(11, "LINE", at)?, codes.one(21, "LINE", at)?),
        ),
        "CIRCLE" => Entity::circle(
            Point2::new(codes.one(10, "CIRCLE", at)?, codes.one(20, "CIRCLE", at)?),
            codes.one(40, "CIRCLE", at)?,
        ),
        "ARC" => Entity::arc(
            Point2::new(codes.one(10, "ARC", at)?, codes.one(20, "ARC", at)?),
            codes.one(40, "ARC", at)?,
            codes.one(50, "ARC", at)?.to_radians(),
            codes.one(51, "ARC", at)?.to_radians(),
        ),
        "LWPOLYLINE" => {
            let xs = codes.all(10)?;
            let ys = codes.all(20)?;
            if xs.len() != ys.len() {
                return Err(FormatError::Parse {
                    line: at,
                    reason: "LWPOLYLINE has mismatched 10/20 counts".into(),
                });
            }
            let mut vertices: Vec<Point2> =
                xs.into_iter().zip(ys).map(|(x, y)| Point2::new(x, y)).collect();
            let closed = codes
                .pairs
                .iter()
                .find(|(_, c, _)| *c == 70)
                .map(|(line, _, v)| -> Result<bool, FormatError> {
                    Ok((parse_f64(*line, v)? as i64) & 1 == 1)
                })
                .transpose()?
                .unwrap_or(false);
            if closed {
                if let Some(&first) = vertices.first() {
                    vertices.push(first);
                }
            }
            Entity::polyline(vertices)
        }
        _ => return Ok(None),
    };
    e.validate().map_err(|err| FormatError::Parse { line: at, reason: err.to_string() })?;
    Ok(Some(e))
}

/// Parse the supported DXF subset into an unlabeled drawing. All records are
/// background with the full catalog attached; unsupported entity types bump
/// `skipped`.
pub fn parse(text: &str) -> Result<DxfImport, FormatError> {
    let mut reader = PairReader::new(text);
    let mut records = Vec::new();
    let mut skipped = 0usize;
    let mut in_entities = false;

    while let Some((line, code, value)) = reader.next_pair()? {
        match (code, value) {
            (0, "SECTION") => {
                if let Some((_, 2, name)) = reader.peek()? {
                    let in_now = name == "ENTITIES";
                    reader.next_pair()?;
                    in_entities = in_now;
                }
            }
            (0, "ENDSEC") | (0, "EOF") => in_entities = false,
            (0, name) if in_entities => {
                let codes = read_entity_codes(&mut reader)?;
                match build_entity(name, line, &codes)? {
                    Some(e) => records.push(EntityRecord::background(e)),
                    None => skipped += 1,
                }
            }
            _ => {}
        }
    }

    let drawing = Drawing::new("dxf-import", LabelCatalog::full(), records)
        .map_err(|e| FormatError::Invalid(e.to_string()))?;
    Ok(DxfImport { drawing, skipped })
}

pub fn parse_file(path: impl AsRef<Path>) -> Result<DxfImport, FormatError> {
    parse(&std::fs::read_to_string(path)?)
}

fn push_pair(out: &mut String, code: i32, value: impl std::fmt::Display) {
    out.push_str(&format!("{code}\n{value}\n"));
}

/// Write the drawing's geometry as a DXF ENTITIES section. Labels are not
/// representable in the subset and are dropped; polylines become open
/// LWPOLYLINEs (closure stays an explicit repeated vertex).
pub fn write(d: &Drawing) -> String {
    let mut out = String::new();
    push_pair(&mut out, 0, "SECTION");
    push_pair(&mut out, 2, "ENTITIES");
    for r in &d.records {
        match &r.entity {
            Entity::Segment { start, end } => {
                push_pair(&mut out, 0, "LINE");
                push_pair(&mut out, 8, 0);
                push_pair(&mut out, 10, start.x);
                push_pair(&mut out, 20, start.y);
                push_pair(&mut out, 11, end.x);
                push_pair(&mut out, 21, end.y);
            }
            Entity::Circle { center, radius } => {
                push_pair(&mut out, 0, "CIRCLE");
                push_pair(&mut out, 8, 0);
                push_pair(&mut out, 10, center.x);
                push_pair(&mut out, 20, center.y);
                push_pair(&mut out, 40, radius);
            }
            Entity::Arc { center, radius, start_angle, end_angle } => {
                push_pair(&mut out, 0, "ARC");
                push_pair(&mut out, 8, 0);
                push_pair(&mut out, 10, center.x);
                push_pair(&mut out, 20, center.y);
                push_pair(&mut out, 40, radius);
                push_pair(&mut out, 50, start_angle.to_degrees());
                push_pair(&mut out, 51, end_angle.to_degrees());
            }
            Entity::Polyline { vertices } => {
                push_pair(&mut out, 0, "LWPOLYLINE");
                push_pair(&mut out, 8, 0);
                push_pair(&mut out, 90, vertices.len());
                push_pair(&mut out, 70, 0);
                for v in vertices {
                    push_pair(&mut out, 10, v.x);
                    push_pair(&mut out, 20, v.y);
                }
            }
        }
    }
    push_pair(&mut out, 0, "ENDSEC");
    push_pair(&mut out, 0, "EOF");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Label;
    use crate::geometry::arc_length;

    #[test]
    fn minimal_line_entity() {
        let text = "0\nSECTION\n2\nENTITIES\n0\nLINE\n10\n1.5\n20\n2.5\n11\n4.5\n21\n6.5\n0\nENDSEC\n0\nEOF\n";
        let imp = parse(text).unwrap();
        assert_eq!(imp.skipped, 0);
        assert_eq!(imp.drawing.len(), 1);
        let r = &imp.drawing.records[0];
        assert_eq!(r.label, Label::Background);
        assert_eq!(
            r.entity,
            Entity::segment(Point2::new(1.5, 2.5), Point2::new(4.5, 6.5))
        );
    }

    #[test]
    fn empty_entities_section() {
        let imp = parse("0\nSECTION\n2\nENTITIES\n0\nENDSEC\n0\nEOF\n").unwrap();
        assert!(imp.drawing.is_empty());
        assert_eq!(imp.skipped, 0);
    }

    #[test]
    fn unsupported_entity_is_counted_not_fatal() {
        let text = "0\nSECTION\n2\nENTITIES\n0\nTEXT\n10\n0\n20\n0\n1\nhello\n0\nENDSEC\n0\nEOF\n";
        let imp = parse(text).unwrap();
        assert!(imp.drawing.is_empty());
        assert_eq!(imp.skipped, 1);
    }

    #[test]
    fn arc_angles_convert_from_degrees() {
        let text =
            "0\nSECTION\n2\nENTITIES\n0\nARC\n10\n0\n20\n0\n40\n2\n50\n0\n51\n90\n0\nENDSEC\n0\nEOF\n";
        let imp = parse(text).unwrap();
        let e = &imp.drawing.records[0].entity;
        assert!((arc_length(e) - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn closed_lwpolyline_repeats_first_vertex() {
        let text = "0\nSECTION\n2\nENTITIES\n0\nLWPOLYLINE\n90\n3\n70\n1\n10\n0\n20\n0\n10\n4\n20\n0\n10\n4\n20\n3\n0\nENDSEC\n0\nEOF\n";
        let imp = parse(text).unwrap();
        match &imp.drawing.records[0].entity {
            Entity::Polyline { vertices } => {
                assert_eq!(vertices.len(), 4);
                assert_eq!(vertices[0], vertices[3]);
            }
            other => panic!("expected polyline, got {other:?}"),
        }
    }

    #[test]
    fn dangling_group_code_is_a_parse_error() {
        let text = "0\nSECTION\n2\nENTITIES\n0\nLINE\n10\n";
        assert!(matches!(parse(text), Err(FormatError::Parse { .. })));
    }

    #[test]
    fn non_numeric_coordinate_is_a_parse_error() {
        let text = "0\nSECTION\n2\nENTITIES\n0\nLINE\n10\nabc\n20\n0\n11\n1\n21\n1\n0\nENDSEC\n0\nEOF\n";
        match parse(text) {
            Err(FormatError::Parse { reason, .. }) => assert!(reason.contains("abc")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_required_group_is_reported() {
        let text = "0\nSECTION\n2\nENTITIES\n0\nLINE\n10\n0\n20\n0\n0\nENDSEC\n0\nEOF\n";
        match parse(text) {
            Err(FormatError::Parse { reason, .. }) => assert!(reason.contains("missing group 11")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn entities_outside_the_entities_section_are_ignored() {
        let text = "0\nSECTION\n2\nHEADER\n0\nLINE\n10\n0\n20\n0\n11\n1\n21\n1\n0\nENDSEC\n0\nSECTION\n2\nENTITIES\n0\nENDSEC\n0\nEOF\n";
        let imp = parse(text).unwrap();
        assert!(imp.drawing.is_empty());
        assert_eq!(imp.skipped, 0);
    }

    #[test]
    fn write_then_parse_round_trips_geometry() {
        let cat = LabelCatalog::full();
        let d = Drawing::new(
            "rt",
            cat,
            vec![
                EntityRecord::background(Entity::segment(
                    Point2::new(0.25, -1.75),
                    Point2::new(1000.0 / 3.0, 42.0),
                )),
                EntityRecord::background(Entity::circle(Point2::new(5.5, 6.5), 123.456)),
                EntityRecord::background(Entity::arc(Point2::new(1.0, 2.0), 900.0, 0.3, 2.7)),
                EntityRecord::background(Entity::polyline(vec![
                    Point2::new(0.0, 0.0),
                    Point2::new(10.0, 0.0),
                    Point2::new(10.0, 10.0),
                ])),
            ],
        )
        .unwrap();
        let back = parse(&write(&d)).unwrap();
        assert_eq!(back.skipped, 0);
        assert_eq!(back.drawing.len(), d.len());
        for (a, b) in d.records.iter().zip(&back.drawing.records) {
            // Segment/circle/polyline coordinates survive exactly; arc angles
            // go through a degree conversion, so compare sampled geometry.
            let pa = crate::geometry::sample_points(&a.entity, 16);
            let pb = crate::geometry::sample_points(&b.entity, 16);
            for (p, q) in pa.iter().zip(&pb) {
                assert!(p.distance(*q) < 1e-6, "{p:?} vs {q:?}");
            }
        }
    }
}
