//! The two model-dependent capabilities of the grounding chain: pointing
//! direction estimation and semantic verification of candidates, with
//! deterministic local implementations and hosted-model backends.

mod prompts;
mod remote;

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use prompts::{
    format_box, render_prompt, required_slots, PromptTemplate, TemplateRegistry, HAND_SLOT,
    QUESTION_SLOT, REFERENT_SLOT,
};
pub use remote::{ChatClient, EndpointConfig, ENV_API_BASE, ENV_API_KEY};

use crate::geometry::{anchor_tokens, Vec2};
use crate::parsing::first_json_object;
use crate::schema::{Annotation, Sample};

/// Score given to every candidate when the query carries no content words.
pub const PURE_DEIXIS_SCORE: f64 = 0.5;

/// Query words ignored by the token-overlap verifier.
pub const STOPWORDS: [&str; 9] = ["the", "a", "an", "this", "that", "one", "is", "of", "on"];

/// Number of spatial bins used when boxes are described to a model.
pub const ANCHOR_BINS: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScorerError {
    #[error("sample has no hand annotation")]
    MissingHand,
    #[error("sample has no ground-truth direction")]
    MissingGtDirection,
    #[error("hand annotation has no keypoints")]
    MissingKeypoints,
    #[error("keypoints coincide; direction undefined")]
    DegenerateKeypoints,
    #[error("remote strategy requested without an endpoint")]
    NoEndpoint,
    #[error("inference failed: {0}")]
    InferException(String),
    #[error("no value for placeholder {0}")]
    MissingPlaceholder(&'static str),
    #[error("template error: {0}")]
    Template(String),
}

impl ScorerError {
    /// Whether the failure came from talking to a hosted model.
    pub fn is_infer_exception(&self) -> bool {
        matches!(self, ScorerError::InferException(_) | ScorerError::NoEndpoint)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionProvenance {
    FixtureGt,
    KeypointHeuristic,
    RemoteModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionStrategy {
    FixtureGt,
    KeypointHeuristic,
    Remote,
}

impl FromStr for DirectionStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixture_gt" => Ok(Self::FixtureGt),
            "keypoint_heuristic" => Ok(Self::KeypointHeuristic),
            "remote" => Ok(Self::Remote),
            _ => Err(format!(
                "unknown direction strategy `{s}` (expected fixture_gt, keypoint_heuristic or remote)"
            )),
        }
    }
}

impl fmt::Display for DirectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::FixtureGt => "fixture_gt",
            Self::KeypointHeuristic => "keypoint_heuristic",
            Self::Remote => "remote",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionEstimate {
    pub direction: Vec2,
    pub confidence: f64,
    pub provenance: DirectionProvenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticScore {
    pub candidate_ann_id: String,
    pub score: f64,
}

/// Direction estimation backed by a strategy and, for `Remote`, a client.
#[derive(Debug, Clone)]
pub struct DirectionEstimator {
    pub strategy: DirectionStrategy,
    client: Option<ChatClient>,
    image_root: Option<PathBuf>,
}

impl DirectionEstimator {
    pub fn local(strategy: DirectionStrategy) -> Self {
        Self {
            strategy,
            client: None,
            image_root: None,
        }
    }

    pub fn remote(client: ChatClient, image_root: Option<PathBuf>) -> Self {
        Self {
            strategy: DirectionStrategy::Remote,
            client: Some(client),
            image_root,
        }
    }

    pub fn estimate(&self, sample: &Sample) -> Result<DirectionEstimate, ScorerError> {
        match self.strategy {
            DirectionStrategy::Remote => {
                let client = self.client.as_ref().ok_or(ScorerError::NoEndpoint)?;
                remote_direction(client, sample, self.image_root.as_deref())
            }
            s => estimate_direction(sample, s),
        }
    }
}

/// Local direction estimate. `Remote` needs a client; see
/// [`DirectionEstimator::remote`].
pub fn estimate_direction(
    sample: &Sample,
    strategy: DirectionStrategy,
) -> Result<DirectionEstimate, ScorerError> {
    let hand = sample.hand().ok_or(ScorerError::MissingHand)?;
    match strategy {
        DirectionStrategy::FixtureGt => {
            let d = sample.gt_direction.ok_or(ScorerError::MissingGtDirection)?;
            Ok(DirectionEstimate {
                direction: d.normalized().ok_or(ScorerError::MissingGtDirection)?,
                confidence: 1.0,
                provenance: DirectionProvenance::FixtureGt,
            })
        }
        DirectionStrategy::KeypointHeuristic => {
            let k = hand.keypoints.ok_or(ScorerError::MissingKeypoints)?;
            let d = (k.fingertip - k.wrist)
                .normalized()
                .ok_or(ScorerError::DegenerateKeypoints)?;
            Ok(DirectionEstimate {
                direction: d,
                confidence: 1.0,
                provenance: DirectionProvenance::KeypointHeuristic,
            })
        }
        DirectionStrategy::Remote => Err(ScorerError::NoEndpoint),
    }
}

fn remote_direction(
    client: &ChatClient,
    sample: &Sample,
    image_root: Option<&Path>,
) -> Result<DirectionEstimate, ScorerError> {
    let hand = sample.hand().ok_or(ScorerError::MissingHand)?;
    let (w, h) = sample.dims();
    let anchor = anchor_tokens(&hand.bbox, w, h, ANCHOR_BINS)
        .map_err(|e| ScorerError::InferException(e.to_string()))?;
    let prompt = format!(
        "You are given an egocentric (first-person) image where a visible hand/finger is \
         pointing to an object. Hand bbox as spatial anchor tokens ({ANCHOR_BINS} bins per axis): \
         {anchor}. Estimate the 2-D pointing direction of the finger in image coordinates \
         (x to the right, y downward). Return ONLY one JSON object in this format: \
         {{\"direction\": [dx, dy], \"confidence\": c}}."
    );
    let image = image_root.map(|r| r.join(&sample.image_ref));
    let text = client.complete(&prompt, image.as_deref())?;
    parse_direction(&text)
}

fn parse_direction(text: &str) -> Result<DirectionEstimate, ScorerError> {
    first_json_object(text, |obj| {
        let arr = obj.get("direction")?.as_array()?;
        if arr.len() != 2 {
            return None;
        }
        let d = Vec2::new(arr[0].as_f64()?, arr[1].as_f64()?).normalized()?;
        let confidence = obj
            .get("confidence")
            .and_then(|c| c.as_f64())
            .map_or(1.0, |c| c.clamp(0.0, 1.0));
        Some(DirectionEstimate {
            direction: d,
            confidence,
            provenance: DirectionProvenance::RemoteModel,
        })
    })
    .ok_or_else(|| ScorerError::InferException(format!("no direction in response: {text:?}")))
}

/// Semantic consistency scoring of candidates against a query.
pub trait Verifier: Send + Sync {
    /// Short identifier used in run metadata and output paths.
    fn id(&self) -> &str;

    /// One score in `[0, 1]` per candidate, in input order.
    fn verify(
        &self,
        sample: &Sample,
        candidates: &[&Annotation],
        query: &str,
    ) -> Result<Vec<SemanticScore>, ScorerError>;
}

fn tokens(text: &str) -> BTreeSet<String> {
    crate::parsing::normalize_answer(text)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Content words of a query.
pub fn query_tokens(query: &str) -> BTreeSet<String> {
    let mut t = tokens(query);
    t.retain(|w| !STOPWORDS.contains(&w.as_str()));
    t
}

/// Category and attribute words of a candidate.
pub fn candidate_tokens(candidate: &Annotation) -> BTreeSet<String> {
    let mut t = tokens(&candidate.category_name);
    if let Some(a) = &candidate.attributes {
        t.extend(tokens(a));
    }
    t
}

pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Token-overlap stand-in for a model's semantic score. A query with no
/// content words scores [`PURE_DEIXIS_SCORE`].
pub fn mock_verify(candidate: &Annotation, query: &str) -> SemanticScore {
    let q = query_tokens(query);
    let score = if q.is_empty() {
        PURE_DEIXIS_SCORE
    } else {
        jaccard(&q, &candidate_tokens(candidate))
    };
    SemanticScore {
        candidate_ann_id: candidate.ann_id.clone(),
        score,
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MockVerifier;

impl Verifier for MockVerifier {
    fn id(&self) -> &str {
        "mock"
    }

    fn verify(
        &self,
        _sample: &Sample,
        candidates: &[&Annotation],
        query: &str,
    ) -> Result<Vec<SemanticScore>, ScorerError> {
        Ok(candidates.iter().map(|c| mock_verify(c, query)).collect())
    }
}

/// Hosted-model verifier: all candidates are scored in one request.
#[derive(Debug, Clone)]
pub struct RemoteVerifier {
    client: ChatClient,
    image_root: Option<PathBuf>,
    id: String,
}

impl RemoteVerifier {
    pub fn new(client: ChatClient, image_root: Option<PathBuf>) -> Self {
        let id = format!("remote-{}", client.config().model);
        Self {
            client,
            image_root,
            id,
        }
    }
}

impl Verifier for RemoteVerifier {
    fn id(&self) -> &str {
        &self.id
    }

    fn verify(
        &self,
        sample: &Sample,
        candidates: &[&Annotation],
        query: &str,
    ) -> Result<Vec<SemanticScore>, ScorerError> {
        remote_verify(&self.client, sample, self.image_root.as_deref(), candidates, query)
    }
}

/// Text of the verification request for a candidate list.
pub fn verification_prompt(
    sample: &Sample,
    candidates: &[&Annotation],
    query: &str,
) -> Result<String, ScorerError> {
    let (w, h) = sample.dims();
    let anchor = |a: &Annotation| {
        anchor_tokens(&a.bbox, w, h, ANCHOR_BINS)
            .map(|t| t.to_string())
            .map_err(|e| ScorerError::InferException(e.to_string()))
    };
    let mut p = String::from(
        "You are given an egocentric (first-person) image where a visible hand/finger is \
         pointing to an object. ",
    );
    if let Some(hand) = sample.hand() {
        p.push_str(&format!("Hand bbox: {}. ", anchor(hand)?));
    }
    p.push_str(&format!(
        "Candidate regions along the pointing ray ({ANCHOR_BINS} bins per axis):\n"
    ));
    for (i, c) in candidates.iter().enumerate() {
        p.push_str(&format!("{}. {}\n", i + 1, anchor(c)?));
    }
    if query.trim().is_empty() {
        p.push_str("No reference text is given; rate how likely each candidate is the pointed object. ");
    } else {
        p.push_str(&format!("Underspecified reference: {query}. "));
        p.push_str("Rate how well each candidate matches the reference. ");
    }
    p.push_str(&format!(
        "Return ONLY one JSON object in this format: {{\"scores\": [s1, ..., s{}]}} with one \
         number in [0, 1] per candidate, in order.",
        candidates.len()
    ));
    Ok(p)
}

pub fn remote_verify(
    client: &ChatClient,
    sample: &Sample,
    image_root: Option<&Path>,
    candidates: &[&Annotation],
    query: &str,
) -> Result<Vec<SemanticScore>, ScorerError> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let prompt = verification_prompt(sample, candidates, query)?;
    let image = image_root.map(|r| r.join(&sample.image_ref));
    let text = client.complete(&prompt, image.as_deref())?;
    parse_scores(&text, candidates)
}

fn parse_scores(text: &str, candidates: &[&Annotation]) -> Result<Vec<SemanticScore>, ScorerError> {
    let values = first_json_object(text, |obj| {
        let arr = obj.get("scores")?.as_array()?;
        if arr.len() != candidates.len() {
            return None;
        }
        arr.iter().map(|v| v.as_f64()).collect::<Option<Vec<f64>>>()
    })
    .ok_or_else(|| ScorerError::InferException(format!("unparseable scores: {text:?}")))?;
    Ok(candidates
        .iter()
        .zip(values)
        .map(|(c, s)| SemanticScore {
            candidate_ann_id: c.ann_id.clone(),
            score: s.clamp(0.0, 1.0),
        })
        .collect())
}
