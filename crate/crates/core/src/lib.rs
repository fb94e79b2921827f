//! Egocentric deictic grounding: a ray-pruned, verifier-scored grounding
//! chain plus the evaluation harness around it.
//!
//! Modules, bottom-up:
//!
//! - [`geometry`]: boxes, rays, quantized anchors, slab intersection, IoU,
//!   coordinate-mode conversion.
//! - [`schema`]: dataset document, validated samples, per-task test cases.
//! - [`synth`]: seeded procedural pointing scenes with exact ground truth.
//! - [`parsing`]: box and answer extraction from model text.
//! - [`scorers`]: direction estimators, semantic verifiers, prompt templates.
//! - [`pipeline`]: the grounding chain and the direct-prompting baseline.
//! - [`eval`]: task runners, metrics, run records and overlays.

pub mod eval;
pub mod geometry;
pub mod parsing;
pub mod pipeline;
pub mod schema;
pub mod scorers;
pub mod synth;

pub use geometry::{BBox2D, CoordinateMode, Point2, Ray2D, SpatialAnchor, Vec2};
pub use pipeline::{GroundingOutcome, ReasoningTrace, SvCotConfig};
pub use schema::{Annotation, Sample, TaskKind, TestCase};
