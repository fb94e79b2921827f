//! Task runners, per-case records, run metadata and metrics.

mod metrics;
mod overlay;
mod records;
mod runner;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use metrics::{
    classification_metrics, compute_report, iou_avg, precision_at_tau, rejection_accuracy,
    threshold_key, ClassificationMetrics, MetricsReport, IOU_THRESHOLDS,
};
pub use overlay::{overlay_stem, render_overlays, OverlayColors, RenderSummary};
pub use records::{
    read_json, read_records, write_json, ConfigSnapshot, ErrorTag, EvalRecord, RecordBox,
    RunMetadata, SkippedCase, METADATA_FILE, RECORDS_FILE, REPORT_FILE, VISUALIZE_DIR,
};
pub use runner::{
    evaluate_case, report_json, run_task, score_run_dir, Engine, RunOptions, RunOutput,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}:{line}: unreadable record: {message}")]
    CorruptRecords {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("no records to average over")]
    EmptyDenominator,
    #[error("{preds} predictions for {gts} ground-truth labels")]
    LengthMismatch { preds: usize, gts: usize },
    #[error("invalid range: start {start}, end {end}")]
    InvalidRange { start: usize, end: i64 },
    #[error("record references unknown sample {0}")]
    UnknownSample(String),
    #[error("existing run in {dir} was produced for task {found}, not {expected}")]
    ResumeMismatch {
        dir: PathBuf,
        found: String,
        expected: String,
    },
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl EvalError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        EvalError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
