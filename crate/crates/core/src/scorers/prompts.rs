//! Task prompt templates for hosted-model baselines.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ScorerError;
use crate::geometry::{convert_mode, BBox2D, CoordinateMode};
use crate::schema::{TaskKind, TestCase};

pub const REFERENT_SLOT: &str = "{underspecified_referent}";
pub const HAND_SLOT: &str = "{hand_input}";
pub const QUESTION_SLOT: &str = "{question}";

const SLOTS: [&str; 3] = [REFERENT_SLOT, HAND_SLOT, QUESTION_SLOT];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub task: TaskKind,
    pub model_family: String,
    pub coordinate_mode: CoordinateMode,
    pub template: String,
}

/// Placeholders a task's template must contain exactly once.
pub fn required_slots(task: TaskKind) -> &'static [&'static str] {
    match task {
        TaskKind::Edg => &[HAND_SLOT, REFERENT_SLOT],
        TaskKind::DRec => &[REFERENT_SLOT],
        TaskKind::Pog => &[HAND_SLOT],
        TaskKind::DVqa => &[HAND_SLOT, QUESTION_SLOT],
    }
}

impl PromptTemplate {
    pub fn new(
        task: TaskKind,
        model_family: impl Into<String>,
        coordinate_mode: CoordinateMode,
        template: impl Into<String>,
    ) -> Result<Self, ScorerError> {
        let t = Self {
            task,
            model_family: model_family.into(),
            coordinate_mode,
            template: template.into(),
        };
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<(), ScorerError> {
        let required = required_slots(self.task);
        for slot in SLOTS {
            let n = self.template.matches(slot).count();
            let want = usize::from(required.contains(&slot));
            if n != want {
                return Err(ScorerError::Template(format!(
                    "{} template for `{}` has {n} occurrences of {slot}, expected {want}",
                    self.task, self.model_family
                )));
            }
        }
        Ok(())
    }
}

/// Formats a box as `[x1, y1, x2, y2]`: integers for absolute and
/// relative-1000, three decimals for relative-1.
pub fn format_box(bbox: &BBox2D) -> String {
    let c = bbox.xyxy();
    match bbox.mode {
        CoordinateMode::Relative1 => {
            format!("[{:.3}, {:.3}, {:.3}, {:.3}]", c[0], c[1], c[2], c[3])
        }
        _ => format!(
            "[{}, {}, {}, {}]",
            c[0].round() as i64,
            c[1].round() as i64,
            c[2].round() as i64,
            c[3].round() as i64
        ),
    }
}

/// Substitutes the case's referent, question and hand box into the template.
/// The hand box is absolute and is re-expressed in the template's mode.
pub fn render_prompt(
    template: &PromptTemplate,
    case: &TestCase,
    hand_box: Option<&BBox2D>,
) -> Result<String, ScorerError> {
    let mut out = template.template.clone();
    for &slot in required_slots(template.task) {
        let value = match slot {
            REFERENT_SLOT => case
                .referent
                .clone()
                .ok_or(ScorerError::MissingPlaceholder(REFERENT_SLOT))?,
            QUESTION_SLOT => case
                .question
                .clone()
                .ok_or(ScorerError::MissingPlaceholder(QUESTION_SLOT))?,
            _ => {
                let hand = hand_box.ok_or(ScorerError::MissingPlaceholder(HAND_SLOT))?;
                let (w, h) = case.sample.dims();
                let converted = convert_mode(hand, template.coordinate_mode, w, h)
                    .map_err(|e| ScorerError::Template(e.to_string()))?;
                format_box(&converted)
            }
        };
        out = out.replacen(slot, &value, 1);
    }
    Ok(out)
}

/// Templates keyed by task and model family.
#[derive(Debug, Clone, Default)]
pub struct TemplateRegistry {
    templates: BTreeMap<(TaskKind, String), PromptTemplate>,
}

macro_rules! builtin {
    ($($file:literal),* $(,)?) => {
        &[$(($file, include_str!(concat!("../../templates/", $file)))),*]
    };
}

const BUILTIN: &[(&str, &str)] = builtin![
    "drec__groundinggpt__relative_1.txt",
    "drec__qwen3-vl__relative_1000.txt",
    "drec__internvl-3.5__relative_1000.txt",
    "drec__llava-onevision__relative_1.txt",
    "drec__ferret__relative_1000.txt",
    "drec__deepseek-vl2__relative_1000.txt",
    "pog__groundinggpt__relative_1.txt",
    "pog__qwen3-vl__relative_1000.txt",
    "pog__internvl-3.5__relative_1000.txt",
    "pog__llava-onevision__relative_1.txt",
    "pog__ferret__relative_1000.txt",
    "pog__deepseek-vl2__relative_1000.txt",
    "edg__qwen3-vl__relative_1000.txt",
    "dvqa__qwen3-vl__relative_1000.txt",
];

/// Parses `<task>__<family>__<mode>.txt`.
fn parse_file_name(name: &str) -> Result<(TaskKind, String, CoordinateMode), ScorerError> {
    let stem = name.strip_suffix(".txt").unwrap_or(name);
    let parts: Vec<&str> = stem.split("__").collect();
    let [task, family, mode] = parts.as_slice() else {
        return Err(ScorerError::Template(format!(
            "template file `{name}` is not named <task>__<family>__<mode>.txt"
        )));
    };
    let task = task.parse().map_err(ScorerError::Template)?;
    let mode = mode.parse().map_err(ScorerError::Template)?;
    Ok((task, family.to_string(), mode))
}

impl TemplateRegistry {
    /// The shipped templates.
    pub fn builtin() -> Self {
        let mut reg = Self::default();
        for (name, text) in BUILTIN {
            let (task, family, mode) = parse_file_name(name).expect("builtin template name");
            let t = PromptTemplate::new(task, family, mode, text.trim_end_matches('\n'))
                .expect("builtin template is well-formed");
            reg.insert(t);
        }
        reg
    }

    /// Loads every `*.txt` file of a directory, overriding existing entries.
    pub fn load_dir(&mut self, dir: &Path) -> Result<usize, ScorerError> {
        let entries = fs::read_dir(dir).map_err(|e| ScorerError::Template(e.to_string()))?;
        let mut paths: Vec<_> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        paths.sort();
        for p in &paths {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let (task, family, mode) = parse_file_name(name)?;
            let text = fs::read_to_string(p).map_err(|e| ScorerError::Template(e.to_string()))?;
            self.insert(PromptTemplate::new(task, family, mode, text.trim_end_matches('\n'))?);
        }
        Ok(paths.len())
    }

    pub fn insert(&mut self, t: PromptTemplate) {
        self.templates.insert((t.task, t.model_family.clone()), t);
    }

    pub fn get(&self, task: TaskKind, family: &str) -> Option<&PromptTemplate> {
        self.templates.get(&(task, family.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &PromptTemplate> {
        self.templates.values()
    }
}
