//! Evaluation mathematics: arc-length symbol IoU, unique matching,
//! panoptic PQ/SQ/RQ, semantic F1 and length-weighted F1, COCO-style
//! detection AP, and the combined score report.
//!
//! All length weights are ln(1 + L) with L in millimeters; every report
//! records that convention. Accumulators merge associatively and are always
//! folded in a fixed (input) order, so results are independent of how work
//! was parallelized.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::json;
use thiserror::Error;

use crate::catalog::{ClassId, Label, LabelCatalog};
use crate::drawing::{Drawing, InstanceBox, Symbol};
use crate::geometry::{arc_length, BoundingBox};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("label sequences differ in length: {pred} predicted vs {gt} ground truth")]
    LengthMismatch { pred: usize, gt: usize },
}

/// Log-length weight of one entity.
fn entity_weight(d: &Drawing, idx: usize) -> f64 {
    (1.0 + arc_length(&d.records[idx].entity)).ln()
}

/// Arc-length IoU between two symbols of the same drawing: the log-length
/// mass of the shared entity indices over the mass of the union. Identical
/// sets give exactly 1, disjoint sets exactly 0.
pub fn symbol_iou(a: &Symbol, b: &Symbol, d: &Drawing) -> f64 {
    let sa: std::collections::BTreeSet<usize> = a.entities.iter().copied().collect();
    let sb: std::collections::BTreeSet<usize> = b.entities.iter().copied().collect();
    let mut shared = 0.0;
    let mut union = 0.0;
    let mut any_shared = false;
    // One sorted sweep keeps summation order identical for both masses, so
    // equal sets divide to exactly 1.
    for &i in sa.union(&sb) {
        let w = entity_weight(d, i);
        union += w;
        if sa.contains(&i) && sb.contains(&i) {
            shared += w;
            any_shared = true;
        }
    }
    if !any_shared {
        return 0.0;
    }
    if shared == union {
        return 1.0;
    }
    shared / union
}

/// Unique matching between predicted and ground-truth symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// (pred index, gt index, IoU) triples; labels equal and IoU > 0.5.
    pub tp: Vec<(usize, usize, f64)>,
    /// Unmatched prediction indices.
    pub fp: Vec<usize>,
    /// Unmatched ground-truth indices.
    pub fn_: Vec<usize>,
}

/// All (pred, gt) pairs with equal class and IoU strictly above 0.5. Such
/// pairs are automatically a one-to-one matching: two symbols can overlap a
/// third by > half its mass only once.
pub fn match_symbols(preds: &[Symbol], gts: &[Symbol], d: &Drawing) -> MatchResult {
    let mut tp = Vec::new();
    let mut pred_used = vec![false; preds.len()];
    let mut gt_used = vec![false; gts.len()];
    for (pi, p) in preds.iter().enumerate() {
        for (gi, g) in gts.iter().enumerate() {
            if p.class != g.class {
                continue;
            }
            let iou = symbol_iou(p, g, d);
            if iou > 0.5 {
                debug_assert!(!pred_used[pi] && !gt_used[gi], "IoU > 0.5 must be unique");
                pred_used[pi] = true;
                gt_used[gi] = true;
                tp.push((pi, gi, iou));
            }
        }
    }
    let fp = (0..preds.len()).filter(|&i| !pred_used[i]).collect();
    let fn_ = (0..gts.len()).filter(|&i| !gt_used[i]).collect();
    MatchResult { tp, fp, fn_ }
}

/// Per-class panoptic tallies.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassPanoptic {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub iou_sum: f64,
}

impl ClassPanoptic {
    pub fn rq(&self) -> f64 {
        let denom = self.tp as f64 + 0.5 * (self.fp + self.fn_) as f64;
        if denom == 0.0 {
            0.0
        } else {
            self.tp as f64 / denom
        }
    }

    /// Mean matched IoU; 0 when nothing matched.
    pub fn sq(&self) -> f64 {
        if self.tp == 0 {
            0.0
        } else {
            self.iou_sum / self.tp as f64
        }
    }

    pub fn pq(&self) -> f64 {
        self.rq() * self.sq()
    }

    fn absorb(&mut self, other: &ClassPanoptic) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.iou_sum += other.iou_sum;
    }
}

/// Accumulating panoptic scores over one or more drawings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PanopticScores {
    per_class: BTreeMap<ClassId, ClassPanoptic>,
}

impl PanopticScores {
    pub fn add(&mut self, m: &MatchResult, preds: &[Symbol], gts: &[Symbol]) {
        for &(pi, gi, iou) in &m.tp {
            debug_assert_eq!(preds[pi].class, gts[gi].class);
            let c = self.per_class.entry(gts[gi].class).or_default();
            c.tp += 1;
            c.iou_sum += iou;
        }
        for &pi in &m.fp {
            self.per_class.entry(preds[pi].class).or_default().fp += 1;
        }
        for &gi in &m.fn_ {
            self.per_class.entry(gts[gi].class).or_default().fn_ += 1;
        }
    }

    pub fn add_drawing(&mut self, preds: &[Symbol], gts: &[Symbol], d: &Drawing) {
        let m = match_symbols(preds, gts, d);
        self.add(&m, preds, gts);
    }

    pub fn merge(&mut self, other: &PanopticScores) {
        for (class, tally) in &other.per_class {
            self.per_class.entry(*class).or_default().absorb(tally);
        }
    }

    pub fn class_scores(&self) -> &BTreeMap<ClassId, ClassPanoptic> {
        &self.per_class
    }

    /// Global counts pooled over classes.
    pub fn pooled(&self) -> ClassPanoptic {
        let mut all = ClassPanoptic::default();
        for tally in self.per_class.values() {
            all.absorb(tally);
        }
        all
    }

    fn present(&self) -> impl Iterator<Item = &ClassPanoptic> {
        self.per_class.values().filter(|c| c.tp + c.fn_ > 0)
    }

    /// Mean per-class PQ over classes present in the ground truth — the
    /// headline aggregate.
    pub fn macro_pq(&self) -> f64 {
        mean(self.present().map(ClassPanoptic::pq))
    }

    pub fn macro_sq(&self) -> f64 {
        mean(self.present().map(|c| c.sq()))
    }

    pub fn macro_rq(&self) -> f64 {
        mean(self.present().map(|c| c.rq()))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Per-class semantic tallies: entity counts and log-length masses.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassSemantic {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tp_mass: f64,
    pub fp_mass: f64,
    pub fn_mass: f64,
}

fn f1_of(tp: f64, fp: f64, fn_: f64) -> f64 {
    let denom = tp + 0.5 * (fp + fn_);
    if denom == 0.0 {
        0.0
    } else {
        tp / denom
    }
}

impl ClassSemantic {
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    pub fn f1(&self) -> f64 {
        f1_of(self.tp as f64, self.fp as f64, self.fn_ as f64)
    }

    pub fn weighted_f1(&self) -> f64 {
        f1_of(self.tp_mass, self.fp_mass, self.fn_mass)
    }

    fn absorb(&mut self, other: &ClassSemantic) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tp_mass += other.tp_mass;
        self.fp_mass += other.fp_mass;
        self.fn_mass += other.fn_mass;
    }
}

/// Accumulating per-entity semantic scores. Background is not a class row:
/// a background-involved mistake counts only on its non-background side.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SemanticScores {
    per_class: BTreeMap<ClassId, ClassSemantic>,
}

impl SemanticScores {
    pub fn add(&mut self, pred: &[Label], gt: &[Label], d: &Drawing) -> Result<(), MetricsError> {
        if pred.len() != gt.len() {
            return Err(MetricsError::LengthMismatch { pred: pred.len(), gt: gt.len() });
        }
        for (i, (&p, &g)) in pred.iter().zip(gt).enumerate() {
            let w = entity_weight(d, i);
            match (g, p) {
                (Label::Class(gc), Label::Class(pc)) if gc == pc => {
                    let c = self.per_class.entry(gc).or_default();
                    c.tp += 1;
                    c.tp_mass += w;
                }
                (Label::Class(gc), Label::Class(pc)) => {
                    let c = self.per_class.entry(gc).or_default();
                    c.fn_ += 1;
                    c.fn_mass += w;
                    let c = self.per_class.entry(pc).or_default();
                    c.fp += 1;
                    c.fp_mass += w;
                }
                (Label::Class(gc), Label::Background) => {
                    let c = self.per_class.entry(gc).or_default();
                    c.fn_ += 1;
                    c.fn_mass += w;
                }
                (Label::Background, Label::Class(pc)) => {
                    let c = self.per_class.entry(pc).or_default();
                    c.fp += 1;
                    c.fp_mass += w;
                }
                (Label::Background, Label::Background) => {}
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &SemanticScores) {
        for (class, tally) in &other.per_class {
            self.per_class.entry(*class).or_default().absorb(tally);
        }
    }

    pub fn class_scores(&self) -> &BTreeMap<ClassId, ClassSemantic> {
        &self.per_class
    }

    fn totals(&self) -> ClassSemantic {
        let mut t = ClassSemantic::default();
        for tally in self.per_class.values() {
            t.absorb(tally);
        }
        t
    }

    /// Micro F1 over all class rows together.
    pub fn micro_f1(&self) -> f64 {
        self.totals().f1()
    }

    pub fn micro_weighted_f1(&self) -> f64 {
        self.totals().weighted_f1()
    }
}

pub fn semantic_scores(pred: &[Label], gt: &[Label], d: &Drawing) -> Result<SemanticScores, MetricsError> {
    let mut s = SemanticScores::default();
    s.add(pred, gt, d)?;
    Ok(s)
}

/// Axis-aligned box IoU. Two identical degenerate boxes count as a perfect
/// match; otherwise zero union means zero overlap.
pub fn box_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    inter / union
}

/// One box tagged with the drawing it belongs to; matching never crosses
/// drawings.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionItem {
    pub drawing: String,
    pub item: InstanceBox,
}

pub const IOU_THRESHOLDS: [f64; 10] =
    [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

/// Per-class APs at the ten COCO thresholds. Classes with no ground truth
/// are excluded entirely.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionScores {
    per_class: BTreeMap<ClassId, [f64; 10]>,
}

impl DetectionScores {
    pub fn class_ap(&self) -> &BTreeMap<ClassId, [f64; 10]> {
        &self.per_class
    }

    fn mean_at(&self, thr: usize) -> f64 {
        mean(self.per_class.values().map(|a| a[thr]))
    }

    pub fn ap50(&self) -> f64 {
        self.mean_at(0)
    }

    pub fn ap75(&self) -> f64 {
        self.mean_at(5)
    }

    /// Mean AP over classes and all ten thresholds.
    pub fn map(&self) -> f64 {
        mean(self.per_class.values().map(|a| a.iter().sum::<f64>() / a.len() as f64))
    }

    /// Mean over classes at one threshold, for per-class reporting.
    pub fn class_map(&self, class: ClassId) -> Option<f64> {
        self.per_class.get(&class).map(|a| a.iter().sum::<f64>() / a.len() as f64)
    }
}

/// COCO-style AP: preds sorted by descending score (stable), greedy-matched
/// per drawing to the highest-IoU unmatched GT at or above the threshold,
/// then 101-point interpolated precision averaging.
pub fn detection_ap(preds: &[DetectionItem], gts: &[DetectionItem]) -> DetectionScores {
    let classes: std::collections::BTreeSet<ClassId> =
        gts.iter().map(|g| g.item.class).collect();
    let mut scores = DetectionScores::default();
    for &class in &classes {
        let gt_idx: Vec<usize> =
            (0..gts.len()).filter(|&i| gts[i].item.class == class).collect();
        let mut pred_idx: Vec<usize> =
            (0..preds.len()).filter(|&i| preds[i].item.class == class).collect();
        pred_idx.sort_by(|&a, &b| {
            preds[b].item.score.partial_cmp(&preds[a].item.score).unwrap()
        });
        let mut aps = [0.0f64; 10];
        for (ti, &tau) in IOU_THRESHOLDS.iter().enumerate() {
            let mut matched = vec![false; gt_idx.len()];
            let mut flags = Vec::with_capacity(pred_idx.len());
            for &pi in &pred_idx {
                let mut best: Option<(usize, f64)> = None;
                for (k, &gi) in gt_idx.iter().enumerate() {
                    if matched[k] || gts[gi].drawing != preds[pi].drawing {
                        continue;
                    }
                    let iou = box_iou(&preds[pi].item.bbox, &gts[gi].item.bbox);
                    if iou >= tau && best.map_or(true, |(_, b)| iou > b) {
                        best = Some((k, iou));
                    }
                }
                match best {
                    Some((k, _)) => {
                        matched[k] = true;
                        flags.push(true);
                    }
                    None => flags.push(false),
                }
            }
            aps[ti] = interpolated_ap(&flags, gt_idx.len());
        }
        scores.per_class.insert(class, aps);
    }
    scores
}

/// 101-point interpolation over the cumulative TP/FP sequence.
fn interpolated_ap(flags: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut points = Vec::with_capacity(flags.len());
    let mut tp = 0usize;
    for (k, &hit) in flags.iter().enumerate() {
        if hit {
            tp += 1;
        }
        let recall = tp as f64 / n_gt as f64;
        let precision = tp as f64 / (k + 1) as f64;
        points.push((recall, precision));
    }
    let mut total = 0.0;
    for i in 0..=100 {
        let r = i as f64 / 100.0;
        let p = points
            .iter()
            .filter(|&&(rec, _)| rec >= r)
            .map(|&(_, prec)| prec)
            .fold(0.0, f64::max);
        total += p;
    }
    total / 101.0
}

pub const HISTOGRAM_BINS: usize = 50;
/// Logarithmic bin range: 1 mm to 100 m.
pub const HISTOGRAM_MIN_MM: f64 = 1.0;
pub const HISTOGRAM_MAX_MM: f64 = 100_000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LengthHistogram {
    pub counts: [usize; HISTOGRAM_BINS],
}

impl LengthHistogram {
    /// [low, high) edges of one bin in mm.
    pub fn bin_edges(bin: usize) -> (f64, f64) {
        let step = (HISTOGRAM_MAX_MM / HISTOGRAM_MIN_MM).ln() / HISTOGRAM_BINS as f64;
        (
            HISTOGRAM_MIN_MM * (step * bin as f64).exp(),
            HISTOGRAM_MIN_MM * (step * (bin + 1) as f64).exp(),
        )
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Entity-length histogram over log-spaced bins; lengths outside the range
/// clamp into the end bins so the total is conserved.
pub fn length_histogram(drawings: &[Drawing]) -> LengthHistogram {
    let step = (HISTOGRAM_MAX_MM / HISTOGRAM_MIN_MM).ln() / HISTOGRAM_BINS as f64;
    let mut counts = [0usize; HISTOGRAM_BINS];
    for d in drawings {
        for r in &d.records {
            let len = arc_length(&r.entity);
            let bin = if len <= HISTOGRAM_MIN_MM {
                0
            } else {
                (((len / HISTOGRAM_MIN_MM).ln() / step) as usize).min(HISTOGRAM_BINS - 1)
            };
            counts[bin] += 1;
        }
    }
    LengthHistogram { counts }
}

fn fmt4(v: f64) -> String {
    format!("{v:.4}")
}

/// JSON score report. Only the sections that were computed appear; the
/// weighting convention is always recorded.
pub fn report_json(
    catalog: &LabelCatalog,
    semantic: Option<&SemanticScores>,
    detection: Option<&DetectionScores>,
    panoptic: Option<&PanopticScores>,
) -> String {
    let mut per_class = serde_json::Map::new();
    for id in 0..catalog.len() {
        let mut row = serde_json::Map::new();
        if let Some(s) = semantic {
            if let Some(c) = s.class_scores().get(&id) {
                row.insert("f1".into(), json!(c.f1()));
                row.insert("weighted_f1".into(), json!(c.weighted_f1()));
            }
        }
        if let Some(det) = detection {
            if let Some(ap) = det.class_map(id) {
                row.insert("ap".into(), json!(ap));
            }
        }
        if let Some(p) = panoptic {
            if let Some(c) = p.class_scores().get(&id) {
                row.insert("pq".into(), json!(c.pq()));
                row.insert("sq".into(), json!(c.sq()));
                row.insert("rq".into(), json!(c.rq()));
            }
        }
        if !row.is_empty() {
            per_class.insert(catalog.name(id).to_string(), serde_json::Value::Object(row));
        }
    }
    let mut totals = serde_json::Map::new();
    if let Some(s) = semantic {
        totals.insert("f1".into(), json!(s.micro_f1()));
        totals.insert("weighted_f1".into(), json!(s.micro_weighted_f1()));
    }
    if let Some(det) = detection {
        totals.insert("ap50".into(), json!(det.ap50()));
        totals.insert("ap75".into(), json!(det.ap75()));
        totals.insert("map".into(), json!(det.map()));
    }
    if let Some(p) = panoptic {
        let pooled = p.pooled();
        totals.insert(
            "panoptic_pooled".into(),
            json!({"pq": pooled.pq(), "sq": pooled.sq(), "rq": pooled.rq(),
                   "tp": pooled.tp, "fp": pooled.fp, "fn": pooled.fn_}),
        );
        totals.insert(
            "panoptic_macro".into(),
            json!({"pq": p.macro_pq(), "sq": p.macro_sq(), "rq": p.macro_rq()}),
        );
    }
    let report = json!({
        "length_weight": "ln(1 + length_mm)",
        "per_class": per_class,
        "totals": totals,
    });
    let mut s = serde_json::to_string_pretty(&report).unwrap();
    s.push('\n');
    s
}

/// Aligned text table, one row per class plus a totals row: class, wF1,
/// mAP, PQ, SQ, RQ. Sections that were not computed show "-".
pub fn report_table(
    catalog: &LabelCatalog,
    semantic: Option<&SemanticScores>,
    detection: Option<&DetectionScores>,
    panoptic: Option<&PanopticScores>,
) -> String {
    let name_w = catalog
        .names()
        .iter()
        .map(|n| n.len())
        .max()
        .unwrap_or(5)
        .max("class".len())
        .max("total".len());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:name_w$}  {:>8}  {:>8}  {:>8}  {:>8}  {:>8}",
        "class", "wF1", "mAP", "PQ", "SQ", "RQ"
    );
    let dash = "-".to_string();
    let row = |name: &str, cells: [Option<String>; 5], out: &mut String| {
        let c: Vec<String> =
            cells.into_iter().map(|v| v.unwrap_or_else(|| dash.clone())).collect();
        let _ = writeln!(
            out,
            "{name:name_w$}  {:>8}  {:>8}  {:>8}  {:>8}  {:>8}",
            c[0], c[1], c[2], c[3], c[4]
        );
    };
    for id in 0..catalog.len() {
        let wf1 = semantic
            .and_then(|s| s.class_scores().get(&id).map(|c| fmt4(c.weighted_f1())));
        let ap = detection.and_then(|det| det.class_map(id).map(fmt4));
        let (pq, sq, rq) = match panoptic.and_then(|p| p.class_scores().get(&id)) {
            Some(c) => (Some(fmt4(c.pq())), Some(fmt4(c.sq())), Some(fmt4(c.rq()))),
            None => (None, None, None),
        };
        if wf1.is_none() && ap.is_none() && pq.is_none() {
            continue;
        }
        row(catalog.name(id), [wf1, ap, pq, sq, rq], &mut out);
    }
    let wf1 = semantic.map(|s| fmt4(s.micro_weighted_f1()));
    let ap = detection.map(|det| fmt4(det.map()));
    let (pq, sq, rq) = match panoptic {
        Some(p) => (
            Some(fmt4(p.macro_pq())),
            Some(fmt4(p.macro_sq())),
            Some(fmt4(p.macro_rq())),
        ),
        None => (None, None, None),
    };
    row("total", [wf1, ap, pq, sq, rq], &mut out);
    out
}
