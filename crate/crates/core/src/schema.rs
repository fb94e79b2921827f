//! Dataset data model: on-disk document, validated samples, and expansion
//! of samples into per-task test cases.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BBox2D, CoordinateMode, Point2, Vec2};

/// `ann_id` reserved for the pointing hand.
pub const HAND_ANN_ID: &str = "anno_hand";
/// Question used for D-VQA cases when the sample carries none.
pub const DEFAULT_QUESTION: &str = "what is this?";
/// Referent used for EDG cases on negative samples that carry none.
pub const DEFAULT_NEGATIVE_REFERENT: &str = "this one";

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed dataset document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("cannot split an empty sample list")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "EDG")]
    Edg,
    #[serde(rename = "D-REC")]
    DRec,
    #[serde(rename = "POG")]
    Pog,
    #[serde(rename = "D-VQA")]
    DVqa,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [TaskKind::Edg, TaskKind::DRec, TaskKind::Pog, TaskKind::DVqa];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Edg => "EDG",
            TaskKind::DRec => "D-REC",
            TaskKind::Pog => "POG",
            TaskKind::DVqa => "D-VQA",
        }
    }

    /// Short lowercase name used in file paths and CLI flags.
    pub fn slug(self) -> &'static str {
        match self {
            TaskKind::Edg => "edg",
            TaskKind::DRec => "drec",
            TaskKind::Pog => "pog",
            TaskKind::DVqa => "dvqa",
        }
    }

    /// Whether the task is scored by box IoU (as opposed to answer matching).
    pub fn is_localization(self) -> bool {
        !matches!(self, TaskKind::DVqa)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "edg" => Ok(TaskKind::Edg),
            "drec" | "rec" => Ok(TaskKind::DRec),
            "pog" => Ok(TaskKind::Pog),
            "dvqa" | "vqa" => Ok(TaskKind::DVqa),
            _ => Err(format!("unknown task `{s}` (expected edg, drec, pog or dvqa)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Real,
    Synthetic,
    Edited,
}

/// Optional hand keypoints used by the keypoint direction heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandKeypoints {
    pub wrist: Point2,
    pub fingertip: Point2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub ann_id: String,
    pub bbox: BBox2D,
    pub category_name: String,
    pub is_hand: bool,
    pub underspecified_referents: Vec<String>,
    pub attributes: Option<String>,
    pub keypoints: Option<HandKeypoints>,
}

impl Annotation {
    /// An object annotation with an absolute box.
    pub fn object(ann_id: impl Into<String>, bbox: BBox2D, category: impl Into<String>) -> Self {
        Self {
            ann_id: ann_id.into(),
            bbox,
            category_name: category.into(),
            is_hand: false,
            underspecified_referents: Vec::new(),
            attributes: None,
            keypoints: None,
        }
    }

    pub fn hand(bbox: BBox2D) -> Self {
        Self {
            ann_id: HAND_ANN_ID.to_string(),
            bbox,
            category_name: "hand".to_string(),
            is_hand: true,
            underspecified_referents: Vec::new(),
            attributes: None,
            keypoints: None,
        }
    }

    pub fn with_attributes(mut self, attributes: impl Into<String>) -> Self {
        self.attributes = Some(attributes.into());
        self
    }

    pub fn with_referents<I, S>(mut self, referents: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.underspecified_referents = referents.into_iter().map(Into::into).collect();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub sample_id: String,
    pub image_ref: String,
    pub width: u32,
    pub height: u32,
    pub annotations: Vec<Annotation>,
    /// `None` marks a negative sample.
    pub gt_target_ann_id: Option<String>,
    pub gt_direction: Option<Vec2>,
    pub split: Split,
    pub source: Source,
    pub question: Option<String>,
    /// Referents for EDG cases on negative samples.
    pub negative_referents: Vec<String>,
}

impl Sample {
    pub fn hand(&self) -> Option<&Annotation> {
        self.annotations.iter().find(|a| a.is_hand)
    }

    pub fn target(&self) -> Option<&Annotation> {
        let id = self.gt_target_ann_id.as_deref()?;
        self.annotation(id)
    }

    pub fn annotation(&self, ann_id: &str) -> Option<&Annotation> {
        self.annotations.iter().find(|a| a.ann_id == ann_id)
    }

    /// Non-hand annotations.
    pub fn objects(&self) -> impl Iterator<Item = &Annotation> {
        self.annotations.iter().filter(|a| !a.is_hand)
    }

    pub fn is_negative(&self) -> bool {
        self.gt_target_ann_id.is_none()
    }

    pub fn dims(&self) -> (f64, f64) {
        (f64::from(self.width), f64::from(self.height))
    }

    /// Uniformly scales image size, boxes, keypoints; direction is unchanged.
    /// Intended for invariance tests; dimensions are rounded to pixels.
    pub fn scaled(&self, factor: f64) -> Sample {
        let mut s = self.clone();
        s.width = (f64::from(self.width) * factor).round() as u32;
        s.height = (f64::from(self.height) * factor).round() as u32;
        for a in &mut s.annotations {
            a.bbox = a.bbox.scaled(factor);
            if let Some(k) = &mut a.keypoints {
                k.wrist = k.wrist * factor;
                k.fingertip = k.fingertip * factor;
            }
        }
        s
    }
}

/// One unit of evaluation: a sample paired with the input of one task.
#[derive(Debug, Clone)]
pub struct TestCase {
    pub sample: Arc<Sample>,
    pub task: TaskKind,
    pub referent: Option<String>,
    pub question: Option<String>,
    pub case_id: String,
}

impl TestCase {
    /// Textual query the verifier compares candidates against.
    pub fn query(&self) -> &str {
        match self.task {
            TaskKind::Edg | TaskKind::DRec => self.referent.as_deref().unwrap_or(""),
            TaskKind::Pog | TaskKind::DVqa => "",
        }
    }
}

/// Per-case reasons a sample is not evaluated, named after the run-record
/// vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    MissingTarget,
    MissingHandBbox,
}

impl SkipReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::MissingTarget => "missing_target",
            SkipReason::MissingHandBbox => "missing_hand_bbox",
        }
    }
}

#[derive(Debug, Clone)]
pub enum CaseEntry {
    Case(TestCase),
    Skipped {
        case_id: String,
        sample_id: String,
        reason: SkipReason,
    },
}

impl CaseEntry {
    pub fn case_id(&self) -> &str {
        match self {
            CaseEntry::Case(c) => &c.case_id,
            CaseEntry::Skipped { case_id, .. } => case_id,
        }
    }
}

/// Ordered expansion result; skipped entries keep their slot so that
/// `--start/--end` ranges are stable.
#[derive(Debug, Clone, Default)]
pub struct Expansion {
    pub entries: Vec<CaseEntry>,
}

impl Expansion {
    pub fn cases(&self) -> impl Iterator<Item = &TestCase> {
        self.entries.iter().filter_map(|e| match e {
            CaseEntry::Case(c) => Some(c),
            CaseEntry::Skipped { .. } => None,
        })
    }

    pub fn skip_counts(&self) -> BTreeMap<SkipReason, usize> {
        let mut counts = BTreeMap::new();
        for e in &self.entries {
            if let CaseEntry::Skipped { reason, .. } = e {
                *counts.entry(*reason).or_insert(0) += 1;
            }
        }
        counts
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn case_id(sample: &Sample, index: usize) -> String {
    format!("{}#{}", sample.sample_id, index)
}

/// Expands samples into test cases for one task, in sample order.
pub fn expand_cases(samples: &[Arc<Sample>], task: TaskKind) -> Expansion {
    let mut entries = Vec::new();
    for sample in samples {
        let skip = |reason| CaseEntry::Skipped {
            case_id: case_id(sample, 0),
            sample_id: sample.sample_id.clone(),
            reason,
        };
        let needs_hand = !matches!(task, TaskKind::DRec);
        if needs_hand && sample.hand().is_none() {
            entries.push(skip(SkipReason::MissingHandBbox));
            continue;
        }
        let target = sample.target();
        let make = |index: usize, referent: Option<String>, question: Option<String>| {
            CaseEntry::Case(TestCase {
                sample: Arc::clone(sample),
                task,
                referent,
                question,
                case_id: case_id(sample, index),
            })
        };
        match task {
            TaskKind::Edg | TaskKind::DRec => match target {
                Some(t) => {
                    for (i, r) in t.underspecified_referents.iter().enumerate() {
                        entries.push(make(i, Some(r.clone()), None));
                    }
                }
                None if task == TaskKind::Edg => {
                    if sample.negative_referents.is_empty() {
                        entries.push(make(0, Some(DEFAULT_NEGATIVE_REFERENT.to_string()), None));
                    } else {
                        for (i, r) in sample.negative_referents.iter().enumerate() {
                            entries.push(make(i, Some(r.clone()), None));
                        }
                    }
                }
                None => entries.push(skip(SkipReason::MissingTarget)),
            },
            TaskKind::Pog => entries.push(make(0, None, None)),
            TaskKind::DVqa => {
                if target.is_none() {
                    entries.push(skip(SkipReason::MissingTarget));
                } else {
                    let q = sample
                        .question
                        .clone()
                        .unwrap_or_else(|| DEFAULT_QUESTION.to_string());
                    entries.push(make(0, None, Some(q)));
                }
            }
        }
    }
    Expansion { entries }
}

// ---------------------------------------------------------------------------
// On-disk document

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub id: String,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    pub split: Split,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    /// Only meaningful on negative samples.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub underspecified_referent: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationEntry {
    pub ann_id: String,
    pub image_id: String,
    /// `[x1, y1, x2, y2]` in absolute pixels.
    pub bbox: [f64; 4],
    #[serde(default)]
    pub category_name: String,
    #[serde(default)]
    pub underspecified_referent: Vec<String>,
    #[serde(default)]
    pub is_target: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributes: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints: Option<HandKeypoints>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetMeta {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub gt_direction: BTreeMap<String, [f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetFile {
    pub images: Vec<ImageEntry>,
    pub annotations: Vec<AnnotationEntry>,
    #[serde(default)]
    pub meta: DatasetMeta,
}

impl DatasetFile {
    pub fn from_samples(samples: &[Sample]) -> Self {
        let mut doc = DatasetFile::default();
        for s in samples {
            doc.images.push(ImageEntry {
                id: s.sample_id.clone(),
                file_name: s.image_ref.clone(),
                width: s.width,
                height: s.height,
                split: s.split,
                source: s.source,
                question: s.question.clone(),
                underspecified_referent: s.negative_referents.clone(),
            });
            for a in &s.annotations {
                doc.annotations.push(AnnotationEntry {
                    ann_id: a.ann_id.clone(),
                    image_id: s.sample_id.clone(),
                    bbox: a.bbox.xyxy(),
                    category_name: a.category_name.clone(),
                    underspecified_referent: a.underspecified_referents.clone(),
                    is_target: s.gt_target_ann_id.as_deref() == Some(a.ann_id.as_str()),
                    attributes: a.attributes.clone(),
                    keypoints: a.keypoints,
                });
            }
            if let Some(d) = s.gt_direction {
                doc.meta.gt_direction.insert(s.sample_id.clone(), d.into());
            }
        }
        doc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    /// No `anno_hand`; the sample is kept and skipped by hand-dependent tasks.
    MissingHand,
    DuplicateHand,
    EmptyCategory,
    DegenerateBox,
    TargetIsHand,
    MultipleTargets,
    DuplicateAnnId,
    DuplicateImageId,
    UnknownImage,
    InvalidSize,
    BadDirection,
}

impl IssueKind {
    /// Issues that leave the sample usable.
    pub fn is_soft(self) -> bool {
        matches!(self, IssueKind::MissingHand)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IssueKind::MissingHand => "missing_hand",
            IssueKind::DuplicateHand => "duplicate_hand",
            IssueKind::EmptyCategory => "empty_category",
            IssueKind::DegenerateBox => "degenerate_box",
            IssueKind::TargetIsHand => "target_is_hand",
            IssueKind::MultipleTargets => "multiple_targets",
            IssueKind::DuplicateAnnId => "duplicate_ann_id",
            IssueKind::DuplicateImageId => "duplicate_image_id",
            IssueKind::UnknownImage => "unknown_image",
            IssueKind::InvalidSize => "invalid_size",
            IssueKind::BadDirection => "bad_direction",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub sample_id: String,
    pub kind: IssueKind,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedDataset {
    pub samples: Vec<Arc<Sample>>,
    pub issues: Vec<ValidationIssue>,
    /// Samples removed because of a hard issue.
    pub rejected: usize,
}

impl LoadedDataset {
    pub fn issue_counts(&self) -> BTreeMap<IssueKind, usize> {
        let mut m = BTreeMap::new();
        for i in &self.issues {
            *m.entry(i.kind).or_insert(0) += 1;
        }
        m
    }
}

pub fn load_dataset(path: &Path) -> Result<LoadedDataset, SchemaError> {
    let text = fs::read_to_string(path).map_err(|source| SchemaError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<LoadedDataset, SchemaError> {
    let doc: DatasetFile = serde_json::from_str(text)?;
    Ok(validate(doc))
}

pub fn write_dataset(path: &Path, samples: &[Sample]) -> Result<(), SchemaError> {
    let doc = DatasetFile::from_samples(samples);
    let text = serde_json::to_string_pretty(&doc)?;
    fs::write(path, text).map_err(|source| SchemaError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Builds samples from a document, collecting every invariant violation.
pub fn validate(doc: DatasetFile) -> LoadedDataset {
    let mut out = LoadedDataset::default();
    let issue = |out: &mut LoadedDataset, id: &str, kind, message: String| {
        out.issues.push(ValidationIssue {
            sample_id: id.to_string(),
            kind,
            message,
        })
    };

    let mut by_image: BTreeMap<&str, Vec<&AnnotationEntry>> = BTreeMap::new();
    let image_ids: BTreeSet<&str> = doc.images.iter().map(|i| i.id.as_str()).collect();
    for a in &doc.annotations {
        if image_ids.contains(a.image_id.as_str()) {
            by_image.entry(a.image_id.as_str()).or_default().push(a);
        } else {
            issue(
                &mut out,
                &a.image_id,
                IssueKind::UnknownImage,
                format!("annotation `{}` references unknown image", a.ann_id),
            );
        }
    }

    let mut seen_images = BTreeSet::new();
    for img in &doc.images {
        let id = img.id.as_str();
        let mut hard = false;
        if !seen_images.insert(id) {
            issue(&mut out, id, IssueKind::DuplicateImageId, "image id repeated".into());
            out.rejected += 1;
            continue;
        }
        if img.width == 0 || img.height == 0 {
            issue(
                &mut out,
                id,
                IssueKind::InvalidSize,
                format!("image size {}x{}", img.width, img.height),
            );
            hard = true;
        }
        let anns = by_image.get(id).map(Vec::as_slice).unwrap_or(&[]);
        let mut seen_ann = BTreeSet::new();
        let mut annotations = Vec::with_capacity(anns.len());
        let mut targets = Vec::new();
        let mut hands = 0usize;
        for a in anns {
            if !seen_ann.insert(a.ann_id.as_str()) {
                issue(
                    &mut out,
                    id,
                    IssueKind::DuplicateAnnId,
                    format!("ann_id `{}` repeated", a.ann_id),
                );
                hard = true;
            }
            let is_hand = a.ann_id == HAND_ANN_ID;
            let bbox = BBox2D::from_xyxy(a.bbox, CoordinateMode::Absolute);
            if !bbox.is_finite() || bbox.width() < 0.0 || bbox.height() < 0.0 {
                issue(
                    &mut out,
                    id,
                    IssueKind::DegenerateBox,
                    format!("ann_id `{}` has box {bbox}", a.ann_id),
                );
                hard = true;
            }
            if is_hand {
                hands += 1;
            } else if a.category_name.trim().is_empty() {
                issue(
                    &mut out,
                    id,
                    IssueKind::EmptyCategory,
                    format!("ann_id `{}` has no category_name", a.ann_id),
                );
                hard = true;
            }
            if a.is_target {
                if is_hand {
                    issue(&mut out, id, IssueKind::TargetIsHand, "hand marked as target".into());
                    hard = true;
                } else {
                    targets.push(a.ann_id.clone());
                }
            }
            annotations.push(Annotation {
                ann_id: a.ann_id.clone(),
                bbox,
                category_name: if is_hand && a.category_name.is_empty() {
                    "hand".to_string()
                } else {
                    a.category_name.clone()
                },
                is_hand,
                underspecified_referents: if is_hand {
                    Vec::new()
                } else {
                    a.underspecified_referent.clone()
                },
                attributes: a.attributes.clone(),
                keypoints: a.keypoints,
            });
        }
        match hands {
            0 => issue(&mut out, id, IssueKind::MissingHand, "no anno_hand annotation".into()),
            1 => {}
            n => {
                issue(&mut out, id, IssueKind::DuplicateHand, format!("{n} hand annotations"));
                hard = true;
            }
        }
        if targets.len() > 1 {
            issue(
                &mut out,
                id,
                IssueKind::MultipleTargets,
                format!("targets {targets:?}"),
            );
            hard = true;
        }
        let gt_direction = match doc.meta.gt_direction.get(id) {
            Some(d) => {
                let v = Vec2::from(*d);
                if v.is_unit() {
                    Some(v)
                } else {
                    issue(
                        &mut out,
                        id,
                        IssueKind::BadDirection,
                        format!("gt_direction {d:?} is not a unit vector"),
                    );
                    hard = true;
                    None
                }
            }
            None => None,
        };
        if hard {
            out.rejected += 1;
            continue;
        }
        out.samples.push(Arc::new(Sample {
            sample_id: img.id.clone(),
            image_ref: img.file_name.clone(),
            width: img.width,
            height: img.height,
            annotations,
            gt_target_ann_id: targets.pop(),
            gt_direction,
            split: img.split,
            source: img.source,
            question: img.question.clone(),
            negative_referents: img.underspecified_referent.clone(),
        }));
    }
    out
}

// ---------------------------------------------------------------------------
// Splits

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Mixed,
    DomainAdaptive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSets<'a> {
    pub train: Vec<&'a Sample>,
    pub val: Vec<&'a Sample>,
    pub test: Vec<&'a Sample>,
}

/// Seeded train/val/test partition.
///
/// `Mixed` shuffles everything and cuts at 7:2:1. `DomainAdaptive` sends
/// every `real` sample to test and cuts the rest 7:2 into train/val.
pub fn split_dataset<'a, S>(
    samples: &'a [S],
    mode: SplitMode,
    seed: u64,
) -> Result<SplitSets<'a>, SchemaError>
where
    S: AsRef<Sample>,
{
    if samples.is_empty() {
        return Err(SchemaError::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<&Sample> = samples.iter().map(AsRef::as_ref).collect();
    match mode {
        SplitMode::Mixed => {
            let mut pool = all;
            pool.shuffle(&mut rng);
            let n = pool.len();
            let n_train = n * 7 / 10;
            let n_val = n * 2 / 10;
            let test = pool.split_off(n_train + n_val);
            let val = pool.split_off(n_train);
            Ok(SplitSets { train: pool, val, test })
        }
        SplitMode::DomainAdaptive => {
            let (test, mut rest): (Vec<&Sample>, Vec<&Sample>) =
                all.into_iter().partition(|s| s.source == Source::Real);
            rest.shuffle(&mut rng);
            let n_train = rest.len() * 7 / 9;
            let val = rest.split_off(n_train);
            Ok(SplitSets { train: rest, val, test })
        }
    }
}

impl AsRef<Sample> for Sample {
    fn as_ref(&self) -> &Sample {
        self
    }
}
