//! Panoptic symbol spotting on vector-graphics floor plans.
//!
//! CAD drawings are lists of geometric entities (segments, arcs, circles,
//! polylines) rather than pixel images. This crate assigns every entity a
//! semantic label and an instance index — "panoptic symbol spotting" — and
//! scores the result with arc-length-weighted panoptic quality, semantic F1,
//! and COCO-style detection mAP.
//!
//! The pieces, bottom up:
//!
//! * [`geometry`] — entity primitives and the distance/sampling kernel.
//! * [`catalog`] + [`drawing`] — label catalogs, labeled drawings, symbols.
//! * [`io`] — JSON-lines drawing files and detection box files.
//! * [`dxf`] — a small DXF reader/writer for the entity subset.
//! * [`graph`] — proximity graph over entities (parallel-wall aware).
//! * [`raster`] — label masks, majority voting, and a fixed filter pyramid
//!   that stands in for a CNN backbone at this scale.
//! * [`gcn`] — a three-layer graph convolution head with a cosine classifier,
//!   margin softmax loss, hand-written gradients, and Adam + cosine schedule.
//! * [`panoptic`] — merges entity labels with detection boxes into instances.
//! * [`metrics`] — panoptic / semantic / detection scoring and reports.
//! * [`synth`] — deterministic synthetic floor-plan generator.
//! * [`cli`] — the `pancad` command-line tool built from the above.
//!
//! Each capability has a runnable example:
//!
//! ```text
//! cargo run --release --example generate_floorplans
//! cargo run --release --example parse_dxf
//! cargo run --release --example build_entity_graph
//! cargo run --release --example rasterize_and_vote
//! cargo run --release --example train_classifier
//! cargo run --release --example panoptic_pipeline
//! cargo run --release --example evaluate_metrics
//! ```
//!
//! All randomness is seeded and all file outputs are byte-stable, so every
//! pipeline here can be re-run bit-for-bit.

pub mod catalog;
pub mod cli;
pub mod drawing;
pub mod dxf;
pub mod gcn;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod panoptic;
pub mod raster;
pub mod synth;

pub use catalog::{ClassId, Label, LabelCatalog};
pub use drawing::{Drawing, EntityRecord, InstanceBox, Symbol};
pub use geometry::{BoundingBox, Entity, Point2};
