//! The grounding chain: direction estimate, virtual ray from the hand,
//! ray-based candidate pruning, semantic verification and thresholded
//! resolution with explicit rejection.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    centroid, convert_mode, ray_box_intersect, sanitize, BBox2D, CoordinateMode, Ray2D,
};
use crate::parsing::{extract_bbox, normalize_answer, ParseOutcome};
use crate::schema::{Annotation, TaskKind, TestCase, HAND_ANN_ID};
use crate::scorers::{
    render_prompt, ChatClient, DirectionEstimate, DirectionEstimator, PromptTemplate,
    ScorerError, SemanticScore, Verifier,
};

pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("direction estimation failed: {0}")]
    Direction(ScorerError),
    #[error("verification failed: {0}")]
    Verifier(ScorerError),
    #[error("scores do not align with the pruned candidates")]
    Misaligned,
    #[error("sample has no hand annotation")]
    MissingHand,
    #[error("cannot build the pointing ray: {0}")]
    Ray(String),
    #[error("prompt rendering failed: {0}")]
    Prompt(ScorerError),
    #[error("inference failed: {0}")]
    Infer(ScorerError),
}

/// Where the pointing ray starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayOrigin {
    /// Centroid of the hand box.
    #[default]
    Centroid,
    /// Fingertip keypoint when available, centroid otherwise.
    Fingertip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvCotConfig {
    pub tau: f64,
    /// Half-angle in radians; 0 tests the exact ray only.
    pub cone_half_angle: f64,
    pub origin: RayOrigin,
}

impl Default for SvCotConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            cone_half_angle: 0.0,
            origin: RayOrigin::Centroid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedCandidate {
    pub ann_id: String,
    pub bbox: BBox2D,
    pub t_entry: f64,
    pub t_exit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum GroundingOutcome {
    Accept { ann_id: String, bbox: BBox2D },
    Reject,
}

impl GroundingOutcome {
    pub fn ann_id(&self) -> Option<&str> {
        match self {
            GroundingOutcome::Accept { ann_id, .. } => Some(ann_id),
            GroundingOutcome::Reject => None,
        }
    }

    pub fn bbox(&self) -> Option<&BBox2D> {
        match self {
            GroundingOutcome::Accept { bbox, .. } => Some(bbox),
            GroundingOutcome::Reject => None,
        }
    }
}

/// Materialized reasoning of one case. `direction` and `ray` are absent for
/// language-only grounding, where no hand is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub direction: Option<DirectionEstimate>,
    pub ray: Option<Ray2D>,
    pub query: String,
    pub pruned: Vec<PrunedCandidate>,
    pub scores: Vec<SemanticScore>,
    pub decision: GroundingOutcome,
}

fn candidate_order(a: &PrunedCandidate, b: &PrunedCandidate) -> Ordering {
    a.t_entry
        .total_cmp(&b.t_entry)
        .then_with(|| a.bbox.area().total_cmp(&b.bbox.area()))
        .then_with(|| a.ann_id.cmp(&b.ann_id))
}

/// Keeps the non-hand candidates hit by the forward ray, or by either
/// boundary ray of a cone when `cone_half_angle > 0`, nearest first.
pub fn prune_candidates(
    ray: &Ray2D,
    candidates: &[Annotation],
    hand_ann_id: &str,
    cone_half_angle: f64,
) -> Vec<PrunedCandidate> {
    let mut rays = vec![*ray];
    if cone_half_angle > 0.0 {
        rays.push(ray.rotated(cone_half_angle));
        rays.push(ray.rotated(-cone_half_angle));
    }
    let mut out: Vec<PrunedCandidate> = candidates
        .iter()
        .filter(|a| !a.is_hand && a.ann_id != hand_ann_id)
        .filter_map(|a| {
            let hits = rays.iter().filter_map(|r| ray_box_intersect(r, &a.bbox));
            let (t_entry, t_exit) = hits.fold(None, |acc: Option<(f64, f64)>, h| match acc {
                None => Some((h.t_entry, h.t_exit)),
                Some((e, x)) => Some((e.min(h.t_entry), x.max(h.t_exit))),
            })?;
            Some(PrunedCandidate {
                ann_id: a.ann_id.clone(),
                bbox: a.bbox,
                t_entry,
                t_exit,
            })
        })
        .collect();
    out.sort_by(candidate_order);
    out
}

/// Accepts the best-scoring candidate if its score reaches `tau`.
/// Ties go to the smaller `t_entry`, then smaller area, then `ann_id`.
pub fn resolve(
    pruned: &[PrunedCandidate],
    scores: &[SemanticScore],
    tau: f64,
) -> Result<GroundingOutcome, PipelineError> {
    if pruned.len() != scores.len()
        || pruned
            .iter()
            .zip(scores)
            .any(|(p, s)| p.ann_id != s.candidate_ann_id || s.score.is_nan())
    {
        return Err(PipelineError::Misaligned);
    }
    let best = pruned.iter().zip(scores).min_by(|(pa, sa), (pb, sb)| {
        sb.score
            .total_cmp(&sa.score)
            .then_with(|| candidate_order(pa, pb))
    });
    Ok(match best {
        Some((p, s)) if s.score >= tau => GroundingOutcome::Accept {
            ann_id: p.ann_id.clone(),
            bbox: p.bbox,
        },
        _ => GroundingOutcome::Reject,
    })
}

/// Runs the full chain on one case.
///
/// EDG verifies against the referent; POG and D-VQA use an empty query so
/// every candidate gets the verifier's pure-pointing score. D-REC has no
/// hand input: every object is a candidate and only the referent decides.
pub fn run_svcot(
    case: &TestCase,
    direction: &DirectionEstimator,
    verifier: &dyn Verifier,
    config: &SvCotConfig,
) -> Result<(GroundingOutcome, ReasoningTrace), PipelineError> {
    let sample = &case.sample;
    let query = case.query().to_string();

    let (estimate, ray, pruned) = if case.task == TaskKind::DRec {
        let mut pruned: Vec<PrunedCandidate> = sample
            .objects()
            .map(|a| PrunedCandidate {
                ann_id: a.ann_id.clone(),
                bbox: a.bbox,
                t_entry: 0.0,
                t_exit: 0.0,
            })
            .collect();
        pruned.sort_by(candidate_order);
        (None, None, pruned)
    } else {
        let hand = sample.hand().ok_or(PipelineError::MissingHand)?;
        let estimate = direction.estimate(sample).map_err(PipelineError::Direction)?;
        let origin = match (config.origin, hand.keypoints) {
            (RayOrigin::Fingertip, Some(k)) => k.fingertip,
            _ => centroid(&hand.bbox),
        };
        let ray = Ray2D::new(origin, estimate.direction).map_err(|e| PipelineError::Ray(e.to_string()))?;
        let pruned = prune_candidates(&ray, &sample.annotations, HAND_ANN_ID, config.cone_half_angle);
        (Some(estimate), Some(ray), pruned)
    };

    let refs: Vec<&Annotation> = pruned
        .iter()
        .filter_map(|p| sample.annotation(&p.ann_id))
        .collect();
    let scores = verifier
        .verify(sample, &refs, &query)
        .map_err(PipelineError::Verifier)?;
    let decision = resolve(&pruned, &scores, config.tau)?;
    let trace = ReasoningTrace {
        direction: estimate,
        ray,
        query,
        pruned,
        scores,
        decision: decision.clone(),
    };
    Ok((decision, trace))
}

/// Result of one direct baseline call.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectOutput {
    pub prompt: String,
    pub raw_text: String,
    /// Box parse, for localization tasks.
    pub parse: Option<ParseOutcome>,
    /// Parsed box converted to absolute pixels and sanitized; `None` when
    /// parsing failed or the box is degenerate.
    pub pred_abs: Option<BBox2D>,
    /// Normalized answer, for D-VQA.
    pub answer: Option<String>,
}

/// Prompts a hosted model with a task template and parses its answer.
pub fn run_direct(
    case: &TestCase,
    template: &PromptTemplate,
    client: &ChatClient,
    image_root: Option<&Path>,
) -> Result<DirectOutput, PipelineError> {
    let sample = &case.sample;
    let hand = sample.hand().map(|h| h.bbox);
    let prompt = render_prompt(template, case, hand.as_ref()).map_err(PipelineError::Prompt)?;
    let image = image_root.map(|r| r.join(&sample.image_ref));
    let raw_text = client
        .complete(&prompt, image.as_deref())
        .map_err(PipelineError::Infer)?;
    Ok(interpret_direct(case, template.coordinate_mode, prompt, raw_text))
}

/// Turns raw model text into a direct-engine output.
pub fn interpret_direct(
    case: &TestCase,
    declared_mode: CoordinateMode,
    prompt: String,
    raw_text: String,
) -> DirectOutput {
    if case.task == TaskKind::DVqa {
        return DirectOutput {
            answer: Some(normalize_answer(&raw_text)),
            prompt,
            raw_text,
            parse: None,
            pred_abs: None,
        };
    }
    let (w, h) = case.sample.dims();
    let parse = extract_bbox(&raw_text, declared_mode);
    let pred_abs = parse
        .result
        .and_then(|b| convert_mode(&b, CoordinateMode::Absolute, w, h).ok())
        .and_then(|b| sanitize(&b, w, h));
    DirectOutput {
        prompt,
        raw_text,
        parse: Some(parse),
        pred_abs,
        answer: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point2, Vec2};

    fn ray(dx: f64, dy: f64) -> Ray2D {
        Ray2D::new(Point2::new(0.0, 0.0), Vec2::new(dx, dy)).unwrap()
    }

    fn boxes() -> Vec<Annotation> {
        vec![
            Annotation::object("C", BBox2D::new(5.0, 5.0, 6.0, 6.0), "x"),
            Annotation::object("B", BBox2D::new(10.0, -1.0, 11.0, 1.0), "x"),
            Annotation::object("A", BBox2D::new(5.0, -1.0, 6.0, 1.0), "x"),
        ]
    }

    fn score(id: &str, s: f64) -> SemanticScore {
        SemanticScore {
            candidate_ann_id: id.into(),
            score: s,
        }
    }

    #[test]
    fn prunes_and_orders_by_entry() {
        let p = prune_candidates(&ray(1.0, 0.0), &boxes(), HAND_ANN_ID, 0.0);
        let ids: Vec<_> = p.iter().map(|c| (c.ann_id.as_str(), c.t_entry)).collect();
        assert_eq!(ids, [("A", 5.0), ("B", 10.0)]);
    }

    #[test]
    fn hand_is_never_a_candidate() {
        let hand = Annotation::hand(BBox2D::new(-1.0, -1.0, 1.0, 1.0));
        assert!(prune_candidates(&ray(1.0, 0.0), &[hand], HAND_ANN_ID, 0.0).is_empty());
    }

    #[test]
    fn cone_boundary_reaches_off_axis_box() {
        // Boundary ray hits C=[5,5,6,6] for half-angles in [atan(5/6), atan(6/5)].
        let narrow = prune_candidates(&ray(1.0, 0.0), &boxes(), HAND_ANN_ID, 0.6);
        assert!(narrow.iter().all(|c| c.ann_id != "C"));
        let wide = prune_candidates(&ray(1.0, 0.0), &boxes(), HAND_ANN_ID, std::f64::consts::FRAC_PI_4);
        let c = wide.iter().find(|c| c.ann_id == "C").unwrap();
        assert!((c.t_entry - 50f64.sqrt()).abs() < 1e-9);
        let lo = (5.0f64 / 6.0).atan();
        assert!(prune_candidates(&ray(1.0, 0.0), &boxes(), HAND_ANN_ID, lo + 1e-9)
            .iter()
            .any(|c| c.ann_id == "C"));
        assert!(!prune_candidates(&ray(1.0, 0.0), &boxes(), HAND_ANN_ID, lo - 1e-6)
            .iter()
            .any(|c| c.ann_id == "C"));
    }

    #[test]
    fn resolve_examples() {
        let p = prune_candidates(&ray(1.0, 0.0), &boxes(), HAND_ANN_ID, 0.0);
        let out = resolve(&p, &[score("A", 0.8), score("B", 0.6)], 0.5).unwrap();
        assert_eq!(out.ann_id(), Some("A"));
        let out = resolve(&p, &[score("A", 0.3), score("B", 0.2)], 0.5).unwrap();
        assert_eq!(out, GroundingOutcome::Reject);
        let out = resolve(&p, &[score("A", 0.7), score("B", 0.7)], 0.5).unwrap();
        assert_eq!(out.ann_id(), Some("A"));
        let out = resolve(&p, &[score("A", 0.6), score("B", 0.7)], 0.5).unwrap();
        assert_eq!(out.ann_id(), Some("B"));
        assert_eq!(resolve(&[], &[], 0.0).unwrap(), GroundingOutcome::Reject);
    }

    #[test]
    fn resolve_tie_breaks_on_area_then_id() {
        let mk = |id: &str, b: BBox2D| PrunedCandidate {
            ann_id: id.into(),
            bbox: b,
            t_entry: 1.0,
            t_exit: 2.0,
        };
        let big = mk("a", BBox2D::new(0.0, 0.0, 4.0, 4.0));
        let small = mk("b", BBox2D::new(0.0, 0.0, 2.0, 2.0));
        let out = resolve(&[big.clone(), small], &[score("a", 0.5), score("b", 0.5)], 0.5).unwrap();
        assert_eq!(out.ann_id(), Some("b"));
        let twin = mk("c", BBox2D::new(0.0, 0.0, 4.0, 4.0));
        let out = resolve(&[twin, big], &[score("c", 0.5), score("a", 0.5)], 0.5).unwrap();
        assert_eq!(out.ann_id(), Some("a"));
    }

    #[test]
    fn resolve_rejects_misaligned_scores() {
        let p = prune_candidates(&ray(1.0, 0.0), &boxes(), HAND_ANN_ID, 0.0);
        assert_eq!(resolve(&p, &[score("A", 0.8)], 0.5), Err(PipelineError::Misaligned));
        assert_eq!(
            resolve(&p, &[score("B", 0.8), score("A", 0.8)], 0.5),
            Err(PipelineError::Misaligned)
        );
    }
}
