//! Locates a JSON object inside free-form model text.
//!
//! Cascade: whole-string parse, then fenced code blocks, then a scan for the
//! first balanced `{...}` literal that parses. Only the first candidate is
//! returned; later candidates are counted but ignored.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractionMethod {
    Direct,
    FencedBlock,
    FirstObjectScan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub object: Map<String, Value>,
    pub method: ExtractionMethod,
    pub repairs: Vec<String>,
    /// Further candidate objects found after the one returned.
    pub ignored_objects: usize,
}

pub fn extract_object(raw: &str) -> Option<Extracted> {
    let text = raw.trim_start_matches('\u{feff}').trim();

    if let Some((object, repairs)) = parse_object(text) {
        return Some(Extracted { object, method: ExtractionMethod::Direct, repairs, ignored_objects: 0 });
    }

    let mut fenced = fenced_blocks(text)
        .into_iter()
        .filter_map(|block| parse_object(block.trim()));
    if let Some((object, repairs)) = fenced.next() {
        let ignored_objects = fenced.count();
        return Some(Extracted { object, method: ExtractionMethod::FencedBlock, repairs, ignored_objects });
    }

    let mut scanned = ObjectScan::new(text);
    let (object, repairs) = scanned.next()?;
    let ignored_objects = scanned.count();
    Some(Extracted { object, method: ExtractionMethod::FirstObjectScan, repairs, ignored_objects })
}

/// Parses `s` as a JSON object, retrying once with trailing commas removed.
fn parse_object(s: &str) -> Option<(Map<String, Value>, Vec<String>)> {
    if !s.starts_with('{') {
        return None;
    }
    if let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(s) {
        return Some((obj, Vec::new()));
    }
    let repaired = strip_trailing_commas(s)?;
    match serde_json::from_str::<Value>(&repaired) {
        Ok(Value::Object(obj)) => Some((obj, vec!["removed trailing commas".to_string()])),
        _ => None,
    }
}

/// Removes commas that directly precede `]` or `}` outside string literals.
/// Returns `None` when nothing changed.
fn strip_trailing_commas(s: &str) -> Option<String> {
    let bytes = s.as_bytes();
    let mut out = String::with_capacity(s.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut changed = false;
    for (i, ch) in s.char_indices() {
        if in_string {
            if escaped {
                escaped = false;
            } else if ch == '\\' {
                escaped = true;
            } else if ch == '"' {
                in_string = false;
            }
            out.push(ch);
            continue;
        }
        match ch {
            '"' => {
                in_string = true;
                out.push(ch);
            }
            ',' => {
                let next = bytes[i + 1..].iter().find(|b| !b.is_ascii_whitespace());
                if matches!(next, Some(b']') | Some(b'}')) {
                    changed = true;
                } else {
                    out.push(ch);
                }
            }
            _ => out.push(ch),
        }
    }
    changed.then_some(out)
}

/// Contents of ``` fenced blocks, with any info string (e.g. `json`) dropped.
fn fenced_blocks(text: &str) -> Vec<&str> {
    let mut blocks = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let Some(close) = after.find("```") else { break };
        let mut body = &after[..close];
        if let Some(nl) = body.find('\n') {
            let info = body[..nl].trim();
            if !info.starts_with('{') {
                body = &body[nl + 1..];
            }
        } else {
            let trimmed = body.trim_start();
            if !trimmed.starts_with('{') {
                // e.g. ```json{...}``` on one line
                body = trimmed.trim_start_matches(|c: char| c.is_ascii_alphanumeric());
            }
        }
        blocks.push(body);
        rest = &after[close + 3..];
    }
    blocks
}

/// Iterator over balanced `{...}` spans that parse as JSON objects.
struct ObjectScan<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> ObjectScan<'a> {
    fn new(text: &'a str) -> Self {
        Self { text, pos: 0 }
    }
}

impl Iterator for ObjectScan<'_> {
    type Item = (Map<String, Value>, Vec<String>);

    fn next(&mut self) -> Option<Self::Item> {
        while let Some(offset) = self.text[self.pos..].find('{') {
            let start = self.pos + offset;
            if let Some(end) = balanced_end(self.text, start) {
                if let Some(parsed) = parse_object(&self.text[start..=end]) {
                    self.pos = end + 1;
                    return Some(parsed);
                }
            }
            self.pos = start + 1;
        }
        self.pos = self.text.len();
        None
    }
}

/// Byte index of the `}` closing the brace at `start`, string-aware.
fn balanced_end(text: &str, start: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}
