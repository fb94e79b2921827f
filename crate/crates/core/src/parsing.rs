//! Box and answer extraction from free-form model output.
//!
//! Boxes are looked for in two tiers: first a JSON object carrying a
//! `bbox_2d` key with four numbers, then a bare bracketed list of four
//! numbers. The first match in each tier wins.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::geometry::{BBox2D, CoordinateMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseFailure {
    ParseFailed,
}

/// Which tier produced a box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseSource {
    Json,
    List,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub result: Option<BBox2D>,
    pub source: Option<ParseSource>,
    pub failure_reason: Option<ParseFailure>,
    pub raw_text: String,
}

impl ParseOutcome {
    pub fn is_ok(&self) -> bool {
        self.result.is_some()
    }
}

const NUM: &str = r"([+-]?(?:\d+(?:\.\d*)?|\.\d+))";

static LIST_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"\[\s*{NUM}\s*,\s*{NUM}\s*,\s*{NUM}\s*,\s*{NUM}\s*\]"))
        .expect("list pattern compiles")
});

/// Extracts the first box from `text`, interpreting numbers in
/// `declared_mode`. Never panics; failure is reported in the outcome.
pub fn extract_bbox(text: &str, declared_mode: CoordinateMode) -> ParseOutcome {
    let (result, source) = match json_bbox(text) {
        Some(c) => (Some(c), Some(ParseSource::Json)),
        None => match list_bbox(text) {
            Some(c) => (Some(c), Some(ParseSource::List)),
            None => (None, None),
        },
    };
    ParseOutcome {
        result: result.map(|c| BBox2D::from_xyxy(c, declared_mode)),
        source,
        failure_reason: result.is_none().then_some(ParseFailure::ParseFailed),
        raw_text: text.to_string(),
    }
}

/// First well-formed JSON object, at any `{` offset, whose top level maps
/// `bbox_2d` to four finite numbers.
fn json_bbox(text: &str) -> Option<[f64; 4]> {
    first_json_object(text, |obj| {
        let arr = obj.get("bbox_2d")?.as_array()?;
        four_numbers(arr)
    })
}

/// Scans every `{` in order, parses the longest JSON value starting there,
/// and returns the first one `pick` accepts.
pub(crate) fn first_json_object<T>(
    text: &str,
    mut pick: impl FnMut(&serde_json::Map<String, Value>) -> Option<T>,
) -> Option<T> {
    for (offset, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[offset..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(obj))) = stream.next() {
            if let Some(found) = pick(&obj) {
                return Some(found);
            }
        }
    }
    None
}

pub(crate) fn four_numbers(arr: &[Value]) -> Option<[f64; 4]> {
    if arr.len() != 4 {
        return None;
    }
    let mut out = [0.0; 4];
    for (slot, v) in out.iter_mut().zip(arr) {
        let n = v.as_f64()?;
        if !n.is_finite() {
            return None;
        }
        *slot = n;
    }
    Some(out)
}

fn list_bbox(text: &str) -> Option<[f64; 4]> {
    let caps = LIST_RE.captures(text)?;
    let mut out = [0.0f64; 4];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = caps.get(i + 1)?.as_str().parse().ok()?;
        if !slot.is_finite() {
            return None;
        }
    }
    Some(out)
}

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Lowercases, strips punctuation, collapses whitespace and drops leading
/// articles.
pub fn normalize_answer(text: &str) -> String {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    let mut words: &[&str] = &cleaned.split_whitespace().collect::<Vec<_>>();
    while let Some((first, rest)) = words.split_first() {
        if ARTICLES.contains(first) {
            words = rest;
        } else {
            break;
        }
    }
    words.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs(text: &str) -> ParseOutcome {
        extract_bbox(text, CoordinateMode::Absolute)
    }

    #[test]
    fn json_format_parses() {
        let o = abs(r#"{"bbox_2d": [12, 34, 56, 78]}"#);
        assert_eq!(o.result.unwrap().xyxy(), [12.0, 34.0, 56.0, 78.0]);
        assert_eq!(o.source, Some(ParseSource::Json));
        assert!(o.failure_reason.is_none());
    }

    #[test]
    fn list_fallback_parses() {
        let o = abs("The target is at [1, 2, 3, 4].");
        assert_eq!(o.result.unwrap().xyxy(), [1.0, 2.0, 3.0, 4.0]);
        assert_eq!(o.source, Some(ParseSource::List));
    }

    #[test]
    fn prose_fails() {
        let o = abs("I cannot find it.");
        assert!(o.result.is_none());
        assert_eq!(o.failure_reason, Some(ParseFailure::ParseFailed));
        assert_eq!(o.raw_text, "I cannot find it.");
    }

    #[test]
    fn json_wins_over_earlier_list() {
        let o = abs(r#"maybe [9, 9, 9, 9] but {"bbox_2d": [1, 2, 3, 4]}"#);
        assert_eq!(o.result.unwrap().xyxy(), [1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn declared_mode_is_attached() {
        let o = extract_bbox("[0.1, 0.2, 0.3, 0.4]", CoordinateMode::Relative1);
        assert_eq!(o.result.unwrap().mode, CoordinateMode::Relative1);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_answer("A Cup."), "cup");
        assert_eq!(normalize_answer("  the  RED   cup "), "red cup");
        assert_eq!(normalize_answer("cup"), "cup");
        assert_eq!(normalize_answer(""), "");
        assert_eq!(normalize_answer("The a an"), "");
        assert_eq!(normalize_answer("cell-phone"), "cell phone");
    }
}
