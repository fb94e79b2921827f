use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use super::metrics::{compute_report, MetricsReport};
use super::records::{
    read_json, read_records, write_json, ConfigSnapshot, ErrorTag, EvalRecord, RecordBox,
    RunMetadata, SkippedCase, METADATA_FILE, RECORDS_FILE, REPORT_FILE,
};
use super::EvalError;
use crate::geometry::{iou, CoordinateMode};
use crate::parsing::normalize_answer;
use crate::pipeline::{run_direct, run_svcot, SvCotConfig};
use crate::schema::{expand_cases, CaseEntry, Sample, TaskKind, TestCase};
use crate::scorers::{ChatClient, DirectionEstimator, PromptTemplate, Verifier};

/// How each case is answered.
#[derive(Clone, Copy)]
pub enum Engine<'a> {
    SvCot {
        direction: &'a DirectionEstimator,
        verifier: &'a dyn Verifier,
        config: SvCotConfig,
    },
    Direct {
        template: &'a PromptTemplate,
        client: &'a ChatClient,
        image_root: Option<&'a Path>,
    },
}

impl Engine<'_> {
    pub fn scorer_id(&self) -> String {
        match self {
            Engine::SvCot { verifier, .. } => format!("svcot-{}", verifier.id()),
            Engine::Direct { template, .. } => format!("direct-{}", template.model_family),
        }
    }

    fn coordinate_mode(&self) -> CoordinateMode {
        match self {
            Engine::SvCot { .. } => CoordinateMode::Absolute,
            Engine::Direct { template, .. } => template.coordinate_mode,
        }
    }

    fn snapshot(&self, opts: &RunOptions) -> ConfigSnapshot {
        let mut snap = ConfigSnapshot {
            engine: String::new(),
            direction: None,
            verifier: None,
            model_family: None,
            tau: None,
            cone_half_angle: None,
            seed: opts.seed,
            start: opts.start,
            end: opts.end,
            workers: opts.workers,
        };
        match self {
            Engine::SvCot {
                direction,
                verifier,
                config,
            } => {
                snap.engine = "svcot".into();
                snap.direction = Some(direction.strategy.to_string());
                snap.verifier = Some(verifier.id().to_string());
                snap.tau = Some(config.tau);
                snap.cone_half_angle = Some(config.cone_half_angle);
            }
            Engine::Direct { template, .. } => {
                snap.engine = "direct".into();
                snap.model_family = Some(template.model_family.clone());
            }
        }
        snap
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub start: usize,
    /// Exclusive end index; `-1` runs to the end of the expansion.
    pub end: i64,
    pub workers: usize,
    /// Keep complete records already in the output directory and only run
    /// the missing cases.
    pub resume: bool,
    pub seed: u64,
    pub data_path: String,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            start: 0,
            end: -1,
            workers: 1,
            resume: false,
            seed: 0,
            data_path: String::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub metadata: RunMetadata,
    pub report: MetricsReport,
    pub records: Vec<EvalRecord>,
}

/// Canonical serialized form of a report, shared by `run` and `score`.
pub fn report_json(report: &MetricsReport) -> Result<String, EvalError> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

fn resolve_range(len: usize, start: usize, end: i64) -> Result<(usize, usize), EvalError> {
    let stop = if end < 0 {
        if end != -1 {
            return Err(EvalError::InvalidRange { start, end });
        }
        len
    } else {
        (end as usize).min(len)
    };
    if end >= 0 && start > end as usize {
        return Err(EvalError::InvalidRange { start, end });
    }
    Ok((start.min(stop), stop))
}

fn base_record(case: &TestCase, index: usize) -> EvalRecord {
    let sample = &case.sample;
    let mut r = EvalRecord::empty(&case.case_id, &sample.sample_id, case.task);
    r.index = index;
    r.negative = sample.is_negative();
    r.referent = case.referent.clone();
    r.question = case.question.clone();
    r.hand_box = sample.hand().map(|h| h.bbox.xyxy());
    if let Some(t) = sample.target() {
        r.gt_ann_id = Some(t.ann_id.clone());
        r.gt_box = Some(RecordBox::new(&t.bbox, sample));
        if case.task == TaskKind::DVqa {
            r.answer_gt = Some(normalize_answer(&t.category_name));
        }
    }
    r
}

fn fill_iou(r: &mut EvalRecord) {
    r.iou = match (&r.gt_box, &r.pred_box) {
        (Some(g), Some(p)) => Some(iou(&g.bbox(), &p.bbox())),
        _ => None,
    };
}

/// Answers one case. Engine failures become tagged records.
pub fn evaluate_case(case: &TestCase, index: usize, engine: &Engine) -> EvalRecord {
    let mut r = base_record(case, index);
    let sample = &case.sample;
    match engine {
        Engine::SvCot {
            direction,
            verifier,
            config,
        } => {
            r.prompt = case.query().to_string();
            match run_svcot(case, direction, *verifier, config) {
                Ok((outcome, trace)) => {
                    r.raw_output = serde_json::to_string(&outcome).unwrap_or_default();
                    if let (Some(id), Some(b)) = (outcome.ann_id(), outcome.bbox()) {
                        r.pred_ann_id = Some(id.to_string());
                        if case.task == TaskKind::DVqa {
                            r.answer_pred = sample
                                .annotation(id)
                                .map(|a| normalize_answer(&a.category_name));
                        } else {
                            r.pred_box_raw = Some(*b);
                            r.pred_box = Some(RecordBox::new(b, sample));
                        }
                    }
                    r.trace = Some(trace);
                }
                Err(e) => {
                    r.error_tag = Some(ErrorTag::InferException);
                    r.error_message = Some(e.to_string());
                }
            }
        }
        Engine::Direct {
            template,
            client,
            image_root,
        } => match run_direct(case, template, client, *image_root) {
            Ok(out) => {
                r.prompt = out.prompt;
                r.raw_output = out.raw_text;
                if case.task == TaskKind::DVqa {
                    r.answer_pred = out.answer;
                } else if let Some(parse) = out.parse {
                    match parse.result {
                        Some(raw) => {
                            r.pred_box_raw = Some(raw);
                            r.pred_box = out.pred_abs.map(|b| RecordBox::new(&b, sample));
                        }
                        None => {
                            r.error_tag = Some(ErrorTag::ParseFailed);
                            r.error_message = Some("no bounding box found in model output".into());
                        }
                    }
                }
            }
            Err(e) => {
                r.error_tag = Some(ErrorTag::InferException);
                r.error_message = Some(e.to_string());
            }
        },
    }
    fill_iou(&mut r);
    r
}

/// Maps `f` over `items` on up to `workers` threads, preserving order.
fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    thread::scope(|s| {
        for _ in 0..workers.min(items.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let out = f(&items[i]);
                *slots[i].lock().expect("result slot poisoned") = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .expect("result slot poisoned")
                .expect("every slot filled")
        })
        .collect()
}

fn write_records(path: &Path, records: &[EvalRecord], append: bool) -> Result<(), EvalError> {
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)
        .map_err(|e| EvalError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| EvalError::io(path, e))?;
    }
    w.flush().map_err(|e| EvalError::io(path, e))
}

fn previous_records(
    dir: &Path,
    task: TaskKind,
    range: (usize, usize),
) -> Result<Vec<EvalRecord>, EvalError> {
    let path = dir.join(RECORDS_FILE);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let records = read_records(&path)?;
    if let Some(other) = records.iter().find(|r| r.task != task) {
        return Err(EvalError::ResumeMismatch {
            dir: dir.to_path_buf(),
            found: other.task.to_string(),
            expected: task.to_string(),
        });
    }
    let mut seen = BTreeSet::new();
    Ok(records
        .into_iter()
        .filter(|r| (range.0..range.1).contains(&r.index) && seen.insert(r.index))
        .collect())
}

const CHUNK_PER_WORKER: usize = 16;

/// Expands `samples` for `task`, answers cases `start..end` with `engine`
/// and writes `metadata.json`, `records.jsonl` and `report.json` to `dir`.
///
/// Records are appended in index order as each chunk completes, so an
/// interrupted run can be resumed. Per-case failures are recorded and never
/// abort the run.
pub fn run_task(
    samples: &[Arc<Sample>],
    task: TaskKind,
    engine: &Engine,
    opts: &RunOptions,
    dir: &Path,
) -> Result<RunOutput, EvalError> {
    fs::create_dir_all(dir).map_err(|e| EvalError::io(dir, e))?;
    let expansion = expand_cases(samples, task);
    let range = resolve_range(expansion.len(), opts.start, opts.end)?;
    let records_path = dir.join(RECORDS_FILE);

    let kept = if opts.resume {
        previous_records(dir, task, range)?
    } else {
        Vec::new()
    };
    let done: BTreeSet<usize> = kept.iter().map(|r| r.index).collect();
    write_records(&records_path, &kept, false)?;

    let mut skipped = Vec::new();
    let mut pending: Vec<(usize, &TestCase)> = Vec::new();
    for (index, entry) in expansion.entries.iter().enumerate().take(range.1).skip(range.0) {
        match entry {
            CaseEntry::Case(c) if !done.contains(&index) => pending.push((index, c)),
            CaseEntry::Case(_) => {}
            CaseEntry::Skipped {
                case_id,
                sample_id,
                reason,
            } => skipped.push(SkippedCase {
                index,
                case_id: case_id.clone(),
                sample_id: sample_id.clone(),
                reason: (*reason).into(),
            }),
        }
    }

    let workers = opts.workers.max(1);
    let mut fresh = Vec::with_capacity(pending.len());
    for chunk in pending.chunks(workers * CHUNK_PER_WORKER) {
        let out = parallel_map(chunk, workers, |(i, c)| evaluate_case(c, *i, engine));
        write_records(&records_path, &out, true)?;
        fresh.extend(out);
    }

    let mut records = kept;
    let resumed = !records.is_empty();
    records.extend(fresh);
    if resumed {
        records.sort_by_key(|r| r.index);
        write_records(&records_path, &records, false)?;
    }

    let metadata = build_metadata(engine, task, opts, &records, skipped);
    write_json(&dir.join(METADATA_FILE), &metadata)?;

    // Score from what is on disk so that `score` reproduces it exactly.
    let on_disk = read_records(&records_path)?;
    let report = compute_report(task, &on_disk);
    let report_path = dir.join(REPORT_FILE);
    fs::write(&report_path, report_json(&report)?).map_err(|e| EvalError::io(&report_path, e))?;

    Ok(RunOutput {
        dir: dir.to_path_buf(),
        metadata,
        report,
        records: on_disk,
    })
}

fn build_metadata(
    engine: &Engine,
    task: TaskKind,
    opts: &RunOptions,
    records: &[EvalRecord],
    skipped: Vec<SkippedCase>,
) -> RunMetadata {
    let mut errors: BTreeMap<ErrorTag, usize> = ErrorTag::ALL.iter().map(|t| (*t, 0)).collect();
    for s in &skipped {
        *errors.entry(s.reason).or_insert(0) += 1;
    }
    for r in records {
        if let Some(tag) = r.error_tag {
            *errors.entry(tag).or_insert(0) += 1;
        }
    }
    RunMetadata {
        scorer: engine.scorer_id(),
        task,
        data_path: opts.data_path.clone(),
        coordinate_mode: engine.coordinate_mode(),
        sample_count: records.len() + skipped.len(),
        records_emitted: records.len(),
        hard_skipped: skipped.len(),
        parsed_ok: records.iter().filter(|r| r.error_tag.is_none()).count(),
        valid_iou: records.iter().filter(|r| r.iou.is_some()).count(),
        errors,
        skipped,
        config: engine.snapshot(opts),
        timestamp: chrono::Utc::now().to_rfc3339(),
    }
}

/// Recomputes the report of a finished run from its records. Returns the
/// report and its canonical serialization.
pub fn score_run_dir(dir: &Path) -> Result<(MetricsReport, String), EvalError> {
    let metadata: RunMetadata = read_json(&dir.join(METADATA_FILE))?;
    let records = read_records(&dir.join(RECORDS_FILE))?;
    let report = compute_report(metadata.task, &records);
    let text = report_json(&report)?;
    Ok((report, text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(resolve_range(30, 10, 20).unwrap(), (10, 20));
        assert_eq!(resolve_range(30, 0, -1).unwrap(), (0, 30));
        assert_eq!(resolve_range(30, 25, 100).unwrap(), (25, 30));
        assert_eq!(resolve_range(30, 40, -1).unwrap(), (30, 30));
        assert!(resolve_range(30, 20, 10).is_err());
        assert!(resolve_range(30, 0, -2).is_err());
    }

    #[test]
    fn parallel_map_keeps_order() {
        let items: Vec<usize> = (0..200).collect();
        let out = parallel_map(&items, 7, |x| x * 3);
        assert_eq!(out, items.iter().map(|x| x * 3).collect::<Vec<_>>());
    }
}
