//! Student, teacher and generator prompt construction.
//!
//! Template text lives in `templates/prompts.toml`; this module only
//! assembles it. All builders are pure.

use std::fmt::Write as _;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::backend::ChatMessage;
use crate::extract::{extract_object, ExtractionMethod};
use crate::iteration::{FeedbackWindow, ParseOutcome};
use crate::task::Task;
use crate::world::{Point, WorldMap};

/// Fixed string present in every student system message.
pub const OUTPUT_CONTRACT_MARKER: &str = "OUTPUT CONTRACT:";

#[derive(Debug, Deserialize)]
pub(crate) struct Templates {
    pub version: u32,
    pub student: StudentTemplates,
    pub teacher: TeacherTemplates,
    pub generator: GeneratorTemplates,
}

#[derive(Debug, Deserialize)]
pub(crate) struct StudentTemplates {
    pub system: String,
    pub task_header: String,
    pub environment_header: String,
    pub landmarks_header: String,
    pub grid_header: String,
    pub hints_header: String,
}

#[derive(Debug, Deserialize)]
pub(crate) struct TeacherTemplates {
    pub system: String,
    pub task_header: String,
    pub feedback_header: String,
    pub no_attempts: String,
    pub instruction: String,
}

#[derive(Debug, Deserialize)]
pub(crate) struct GeneratorTemplates {
    pub system: String,
    pub examples_header: String,
    pub needs_header: String,
    pub feedback_header: String,
    pub no_feedback: String,
}

pub(crate) fn templates() -> &'static Templates {
    static TEMPLATES: OnceLock<Templates> = OnceLock::new();
    TEMPLATES.get_or_init(|| {
        toml::from_str(include_str!("../templates/prompts.toml")).expect("bundled prompt templates parse")
    })
}

pub fn template_version() -> u32 {
    templates().version
}

/// How much of the map the student sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvMode {
    FullMap,
    LandmarksOnly,
    /// Only for fine-tuned students that have internalized the map.
    Omitted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub messages: Vec<ChatMessage>,
    pub env_mode: EnvMode,
    pub hint_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TeacherDirective {
    pub hints: Vec<String>,
    pub rationale: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("environment can only be omitted for fine-tuned students")]
    OmittedEnvNotFineTuned,
}

pub(crate) fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn fmt_point(p: &Point) -> String {
    format!("({}, {})", fmt_num(p.x), fmt_num(p.y))
}

pub(crate) fn fmt_points(points: &[Point]) -> String {
    let inner: Vec<String> = points.iter().map(fmt_point).collect();
    format!("[{}]", inner.join(", "))
}

/// One line per landmark, sorted by name: `name (x, y) [k=v ...]`.
pub fn render_landmarks(map: &WorldMap) -> String {
    let mut out = String::new();
    for lm in map.landmarks_sorted() {
        out.push_str(&lm.name);
        out.push(' ');
        out.push_str(&fmt_point(&lm.position));
        if !lm.attributes.is_empty() {
            let attrs: Vec<String> = lm.attributes.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = write!(out, " [{}]", attrs.join(" "));
        }
        out.push('\n');
    }
    out
}

fn render_environment(map: &WorldMap, mode: EnvMode) -> Option<String> {
    let t = &templates().student;
    let mut out = String::new();
    match mode {
        EnvMode::Omitted => return None,
        EnvMode::LandmarksOnly | EnvMode::FullMap => {
            let _ = writeln!(
                out,
                "map {}: resolution {} m per cell, origin {}",
                map.id(),
                fmt_num(map.resolution()),
                fmt_point(&map.origin())
            );
            let _ = writeln!(out, "{}", t.landmarks_header);
            out.push_str(&render_landmarks(map));
        }
    }
    if mode == EnvMode::FullMap {
        let _ = writeln!(out, "{}", t.grid_header);
        for row in map.grid_rows() {
            let _ = writeln!(out, "{row}");
        }
    }
    Some(out)
}

pub fn build_student_prompt(
    task: &Task,
    map: &WorldMap,
    mode: EnvMode,
    directive: &TeacherDirective,
    fine_tuned: bool,
) -> Result<PromptBundle, PromptError> {
    if mode == EnvMode::Omitted && !fine_tuned {
        return Err(PromptError::OmittedEnvNotFineTuned);
    }
    let t = &templates().student;
    let mut user = format!("{}\n{}\n", t.task_header, task.text.trim_end());
    if let Some(env) = render_environment(map, mode) {
        let _ = write!(user, "\n{}\n{}", t.environment_header, env);
    }
    if !directive.hints.is_empty() {
        let _ = writeln!(user, "\n{}", t.hints_header);
        for hint in &directive.hints {
            let _ = writeln!(user, "- {hint}");
        }
    }
    Ok(PromptBundle {
        messages: vec![ChatMessage::system(t.system.trim()), ChatMessage::user(user)],
        env_mode: mode,
        hint_count: directive.hints.len(),
    })
}

pub fn build_teacher_prompt(task: &Task, window: &FeedbackWindow<'_>) -> PromptBundle {
    let t = &templates().teacher;
    let mut user = format!(
        "{}\nid: {}\ninstruction: {}\nexpected number of goals: {}\n\n{}\n",
        t.task_header,
        task.id,
        task.text.trim_end(),
        task.num_goals,
        t.feedback_header
    );
    if window.records.is_empty() {
        let _ = writeln!(user, "{}", t.no_attempts);
    }
    for rec in &window.records {
        let predicted = match &rec.parsed {
            ParseOutcome::Ok(out) => fmt_points(&out.positions),
            ParseOutcome::Error(e) => format!("unusable output ({e})"),
        };
        let ne = rec.ne.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
        let _ = writeln!(
            user,
            "- iteration {} | task {} | outcome {} | predicted {} | expected {} | ne {}",
            rec.iteration,
            rec.task_id,
            if rec.success { "SUCCEEDED" } else { "FAILED" },
            predicted,
            fmt_points(&task.goals),
            ne
        );
    }
    let _ = write!(user, "\n{}\n", t.instruction);
    PromptBundle {
        messages: vec![ChatMessage::system(t.system.trim()), ChatMessage::user(user)],
        env_mode: EnvMode::Omitted,
        hint_count: 0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedDirective {
    pub directive: TeacherDirective,
    /// `None` when the reply held no usable structured object.
    pub method: Option<ExtractionMethod>,
    pub degraded: bool,
}

/// Reads a `{hints, rationale}` reply. Never fails: unstructured replies
/// become a single hint holding the whole text.
pub fn parse_teacher_directive(raw: &str) -> ParsedDirective {
    if let Some(extracted) = extract_object(raw) {
        let hints = match extracted.object.get("hints") {
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::String(s) => Some(s.clone()),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>(),
            _ => None,
        };
        if let Some(hints) = hints {
            let rationale = extracted.object.get("rationale").and_then(Value::as_str).unwrap_or("").to_string();
            return ParsedDirective {
                directive: TeacherDirective { hints, rationale },
                method: Some(extracted.method),
                degraded: false,
            };
        }
    }
    let text = raw.trim();
    let hints = if text.is_empty() { Vec::new() } else { vec![text.to_string()] };
    ParsedDirective {
        directive: TeacherDirective { hints, rationale: String::new() },
        method: None,
        degraded: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iteration::AttemptRecord;
    use crate::output::ModelOutput;
    use crate::world::load_world;

    fn map() -> WorldMap {
        let doc = r#"{"id":"clinic","resolution_m":1.0,"origin":[0,0],"grid":["....","....","..#."],
            "landmarks":[{"name":"ward","x":3.5,"y":0.5,"attributes":{"type":"room","floor":"1"}},
                         {"name":"atrium","x":0.5,"y":1.5}]}"#;
        load_world(doc.as_bytes()).unwrap()
    }

    fn task() -> Task {
        Task::new("t1", "Go to the ward, then the atrium.", "clinic", vec![Point::new(3.5, 0.5), Point::new(0.5, 1.5)])
            .unwrap()
    }

    fn attempt(iteration: u32, success: bool, predicted: Point) -> AttemptRecord {
        AttemptRecord {
            parsed: ParseOutcome::Ok(ModelOutput { explanation: String::new(), positions: vec![predicted] }),
            success,
            ..AttemptRecord::empty(iteration, "t1")
        }
    }

    #[test]
    fn templates_are_consistent() {
        let t = templates();
        assert!(t.student.system.contains(OUTPUT_CONTRACT_MARKER));
        assert_eq!(t.student.hints_header, crate::backend::DEFAULT_FEEDBACK_MARKER);
    }

    #[test]
    fn landmarks_only_renders_sorted_lines() {
        let bundle =
            build_student_prompt(&task(), &map(), EnvMode::LandmarksOnly, &TeacherDirective::default(), false)
                .unwrap();
        assert_eq!(bundle.messages.len(), 2);
        assert!(bundle.messages[0].content.contains(OUTPUT_CONTRACT_MARKER));
        let user = &bundle.messages[1].content;
        let atrium = user.find("atrium (0.5, 1.5)\n").unwrap();
        let ward = user.find("ward (3.5, 0.5) [floor=1 type=room]\n").unwrap();
        assert!(atrium < ward);
        assert!(!user.contains("..#."));
    }

    #[test]
    fn full_map_includes_grid() {
        let bundle =
            build_student_prompt(&task(), &map(), EnvMode::FullMap, &TeacherDirective::default(), false).unwrap();
        assert!(bundle.messages[1].content.contains("..#.\n"));
    }

    #[test]
    fn omitted_env_requires_fine_tuned() {
        let directive = TeacherDirective { hints: vec!["two stops".into()], rationale: String::new() };
        assert_eq!(
            build_student_prompt(&task(), &map(), EnvMode::Omitted, &directive, false),
            Err(PromptError::OmittedEnvNotFineTuned)
        );
        let bundle = build_student_prompt(&task(), &map(), EnvMode::Omitted, &directive, true).unwrap();
        let user = &bundle.messages[1].content;
        assert!(user.contains("Go to the ward, then the atrium."));
        assert!(user.contains("two stops"));
        assert!(!user.contains("(3.5, 0.5)"));
    }

    #[test]
    fn hints_are_verbatim_and_last() {
        let directive = TeacherDirective {
            hints: vec!["Output exactly 2 points.".into(), "The ward comes first.".into()],
            rationale: "count".into(),
        };
        let bundle =
            build_student_prompt(&task(), &map(), EnvMode::LandmarksOnly, &directive, false).unwrap();
        assert_eq!(bundle.hint_count, 2);
        let user = &bundle.messages[1].content;
        let task_at = user.find("Go to the ward").unwrap();
        let env_at = user.find("## Environment").unwrap();
        let h1 = user.find("- Output exactly 2 points.").unwrap();
        let h2 = user.find("- The ward comes first.").unwrap();
        assert!(task_at < env_at && env_at < h1 && h1 < h2);
    }

    #[test]
    fn prompts_are_pure() {
        let directive = TeacherDirective { hints: vec!["h".into()], rationale: String::new() };
        let a = build_student_prompt(&task(), &map(), EnvMode::FullMap, &directive, false).unwrap();
        let b = build_student_prompt(&task(), &map(), EnvMode::FullMap, &directive, false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn teacher_prompt_window_rendering() {
        let empty = FeedbackWindow { records: vec![] };
        let bundle = build_teacher_prompt(&task(), &empty);
        assert!(bundle.messages[1].content.contains("no prior attempts"));

        let t = Task::new("t1", "Go to the cart.", "clinic", vec![Point::new(3.0, 4.0)]).unwrap();
        let rec = attempt(1, false, Point::new(1.0, 1.0));
        let bundle = build_teacher_prompt(&t, &FeedbackWindow { records: vec![&rec] });
        let user = &bundle.messages[1].content;
        assert!(user.contains("(1.0, 1.0)"));
        assert!(user.contains("(3.0, 4.0)"));
        assert!(user.contains("task t1 | outcome FAILED"));
        assert!(!user.contains("no prior attempts"));
    }

    #[test]
    fn directive_parsing() {
        let p = parse_teacher_directive(r#"{"hints":["output exactly 2 points"],"rationale":"count mismatch"}"#);
        assert_eq!(p.directive.hints, vec!["output exactly 2 points".to_string()]);
        assert_eq!(p.directive.rationale, "count mismatch");
        assert_eq!(p.method, Some(ExtractionMethod::Direct));
        assert!(!p.degraded);

        let prose = "The student should visit the ward first.";
        let p = parse_teacher_directive(prose);
        assert_eq!(p.directive.hints, vec![prose.to_string()]);
        assert!(p.degraded);

        let fenced = "Here:\n```json\n{\"hints\":[\"a\",\"b\"],\"rationale\":\"r\"}\n```";
        let p = parse_teacher_directive(fenced);
        assert_eq!(p.directive.hints.len(), 2);
        assert_eq!(p.method, Some(ExtractionMethod::FencedBlock));

        let p = parse_teacher_directive(r#"{"hints":"not a list"}"#);
        assert!(p.degraded);
        assert_eq!(p.directive.hints.len(), 1);

        let p = parse_teacher_directive("   ");
        assert!(p.degraded && p.directive.hints.is_empty());
    }
}
