use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::geometry::{convert_mode, BBox2D, CoordinateMode};
use crate::pipeline::ReasoningTrace;
use crate::schema::{Sample, SkipReason, TaskKind};

pub const METADATA_FILE: &str = "metadata.json";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const VISUALIZE_DIR: &str = "visualize";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorTag {
    MissingTarget,
    MissingHandBbox,
    ParseFailed,
    InferException,
}

impl ErrorTag {
    pub const ALL: [ErrorTag; 4] = [
        ErrorTag::MissingTarget,
        ErrorTag::MissingHandBbox,
        ErrorTag::ParseFailed,
        ErrorTag::InferException,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorTag::MissingTarget => "missing_target",
            ErrorTag::MissingHandBbox => "missing_hand_bbox",
            ErrorTag::ParseFailed => "parse_failed",
            ErrorTag::InferException => "infer_exception",
        }
    }
}

impl From<SkipReason> for ErrorTag {
    fn from(r: SkipReason) -> Self {
        match r {
            SkipReason::MissingTarget => ErrorTag::MissingTarget,
            SkipReason::MissingHandBbox => ErrorTag::MissingHandBbox,
        }
    }
}

/// A box stored in absolute pixels and in `relative_1` form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordBox {
    pub absolute: [f64; 4],
    pub relative: [f64; 4],
}

impl RecordBox {
    pub fn new(abs: &BBox2D, sample: &Sample) -> Self {
        let (w, h) = sample.dims();
        let rel = convert_mode(abs, CoordinateMode::Relative1, w, h)
            .map(|b| b.xyxy())
            .unwrap_or([0.0; 4]);
        Self {
            absolute: abs.xyxy(),
            relative: rel,
        }
    }

    pub fn bbox(&self) -> BBox2D {
        BBox2D::from_xyxy(self.absolute, CoordinateMode::Absolute)
    }
}

/// Per-case result line of `records.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    /// Position in the task's case expansion.
    pub index: usize,
    pub case_id: String,
    pub sample_id: String,
    pub task: TaskKind,
    pub negative: bool,
    pub referent: Option<String>,
    pub question: Option<String>,
    pub gt_ann_id: Option<String>,
    pub gt_box: Option<RecordBox>,
    pub hand_box: Option<[f64; 4]>,
    pub pred_ann_id: Option<String>,
    pub pred_box: Option<RecordBox>,
    /// Prediction as the model expressed it, before conversion.
    pub pred_box_raw: Option<BBox2D>,
    pub iou: Option<f64>,
    pub answer_pred: Option<String>,
    pub answer_gt: Option<String>,
    pub error_tag: Option<ErrorTag>,
    pub error_message: Option<String>,
    pub prompt: String,
    pub raw_output: String,
    pub trace: Option<ReasoningTrace>,
}

impl EvalRecord {
    pub fn empty(case_id: &str, sample_id: &str, task: TaskKind) -> Self {
        Self {
            index: 0,
            case_id: case_id.to_string(),
            sample_id: sample_id.to_string(),
            task,
            negative: false,
            referent: None,
            question: None,
            gt_ann_id: None,
            gt_box: None,
            hand_box: None,
            pred_ann_id: None,
            pred_box: None,
            pred_box_raw: None,
            iou: None,
            answer_pred: None,
            answer_gt: None,
            error_tag: None,
            error_message: None,
            prompt: String::new(),
            raw_output: String::new(),
            trace: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCase {
    pub index: usize,
    pub case_id: String,
    pub sample_id: String,
    pub reason: ErrorTag,
}

/// Settings recorded alongside a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub engine: String,
    pub direction: Option<String>,
    pub verifier: Option<String>,
    pub model_family: Option<String>,
    pub tau: Option<f64>,
    pub cone_half_angle: Option<f64>,
    pub seed: u64,
    pub start: usize,
    pub end: i64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub scorer: String,
    pub task: TaskKind,
    pub data_path: String,
    pub coordinate_mode: CoordinateMode,
    /// Cases in the evaluated range, skipped ones included.
    pub sample_count: usize,
    pub records_emitted: usize,
    /// Cases left out of the records for a missing hand or target.
    pub hard_skipped: usize,
    pub parsed_ok: usize,
    pub valid_iou: usize,
    /// Count per error tag; every tag is present.
    pub errors: BTreeMap<ErrorTag, usize>,
    pub skipped: Vec<SkippedCase>,
    pub config: ConfigSnapshot,
    pub timestamp: String,
}

impl RunMetadata {
    /// `parsed_ok + parse_failed + infer_exception + missing_*` must equal
    /// `sample_count`, and `sample_count = records_emitted + hard_skipped`.
    pub fn reconciles(&self) -> bool {
        let tagged: usize = self.errors.values().sum();
        self.parsed_ok + tagged == self.sample_count
            && self.records_emitted + self.hard_skipped == self.sample_count
            && self.parsed_ok <= self.sample_count
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), EvalError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| EvalError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, EvalError> {
    let text = fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads every complete line of a records file. A truncated final line
/// (from an interrupted run) is ignored; any other bad line is an error.
pub fn read_records(path: &Path) -> Result<Vec<EvalRecord>, EvalError> {
    let file = File::open(path).map_err(|e| EvalError::io(path, e))?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(|e| EvalError::io(path, e))?;
    let mut out = Vec::with_capacity(lines.len());
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if i == last => break,
            Err(e) => {
                return Err(EvalError::CorruptRecords {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}
