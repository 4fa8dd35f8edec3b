//! Decoding of model answers into executable commands and function-progress
//! records, plus resolution of named widgets against the current page.
//!
//! The answer grammar is deliberately loose. A clause is `Label: value`,
//! labels are matched case-insensitively, and a value is either quoted
//! (`"..."`, `'...'`, curly quotes or backticks) or runs up to the end of the
//! clause (`.`/`,`/`;` followed by whitespace, a newline, or the next label).
//! Inside double quotes `\"` and `\\` are escapes; other backslashes are kept.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gui::{GuiPage, WidgetAction, WidgetInfo};
use crate::tokenize::{normalize_name, tokenize_identifier};

/// Synthetic widget name standing for the keyboard's enter key.
pub const IME_ENTER: &str = "__ime_enter";

/// Names (normalized) accepted as a default submit button.
pub const SUBMIT_NAMES: [&str; 7] = ["submit", "ok", "done", "save", "add", "confirm", "next"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnswerError {
    #[error("answer does not follow the output template")]
    UnparseableAnswer,
    #[error("answer has no function/status pair")]
    MissingFunctionAnswer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScrollDirection {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operation {
    Click,
    DoubleClick,
    LongPress,
    Scroll(ScrollDirection),
}

impl Operation {
    pub const ALL: [Operation; 5] = [
        Operation::Click,
        Operation::DoubleClick,
        Operation::LongPress,
        Operation::Scroll(ScrollDirection::Up),
        Operation::Scroll(ScrollDirection::Down),
    ];

    /// Label used in answers and prompts.
    pub fn label(self) -> &'static str {
        match self {
            Operation::Click => "Click",
            Operation::DoubleClick => "Double-click",
            Operation::LongPress => "Long press",
            Operation::Scroll(ScrollDirection::Up) => "Scroll up",
            Operation::Scroll(ScrollDirection::Down) => "Scroll down",
        }
    }

    /// Recognizes an operation phrase. Scroll without a direction is down.
    pub fn from_phrase(raw: &str) -> Option<Self> {
        let norm: String = raw
            .to_lowercase()
            .chars()
            .map(|c| if c == '-' || c == '_' { ' ' } else { c })
            .collect();
        let norm = norm.split_whitespace().collect::<Vec<_>>().join(" ");
        let words: Vec<&str> = norm.split(' ').collect();
        match words.as_slice() {
            ["double", "click" | "tap", ..] | ["doubleclick" | "doubletap", ..] => Some(Self::DoubleClick),
            ["long", "press" | "click" | "tap", ..] | ["longpress" | "longclick", ..] => Some(Self::LongPress),
            ["click" | "tap" | "press", ..] => Some(Self::Click),
            ["scroll" | "swipe", rest @ ..] => {
                if rest.contains(&"up") {
                    Some(Self::Scroll(ScrollDirection::Up))
                } else {
                    Some(Self::Scroll(ScrollDirection::Down))
                }
            }
            _ => None,
        }
    }

    fn wire_name(self) -> &'static str {
        match self {
            Operation::Click => "click",
            Operation::DoubleClick => "double_click",
            Operation::LongPress => "long_press",
            Operation::Scroll(_) => "scroll",
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ActionRepr", into = "ActionRepr")]
pub struct ActionCommand {
    pub operation: Operation,
    pub widget_name: String,
}

impl ActionCommand {
    pub fn new(operation: Operation, widget_name: impl Into<String>) -> Self {
        Self { operation, widget_name: widget_name.into() }
    }
}

#[derive(Serialize, Deserialize)]
struct ActionRepr {
    op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    direction: Option<ScrollDirection>,
    widget: String,
}

impl From<ActionCommand> for ActionRepr {
    fn from(a: ActionCommand) -> Self {
        let direction = match a.operation {
            Operation::Scroll(d) => Some(d),
            _ => None,
        };
        Self { op: a.operation.wire_name().to_string(), direction, widget: a.widget_name }
    }
}

impl TryFrom<ActionRepr> for ActionCommand {
    type Error = String;

    fn try_from(r: ActionRepr) -> Result<Self, String> {
        let operation = match r.op.as_str() {
            "click" => Operation::Click,
            "double_click" => Operation::DoubleClick,
            "long_press" => Operation::LongPress,
            "scroll" => Operation::Scroll(r.direction.unwrap_or(ScrollDirection::Down)),
            other => return Err(format!("unknown operation {other:?}")),
        };
        if r.widget.is_empty() {
            return Err("empty widget name".to_string());
        }
        Ok(Self { operation, widget_name: r.widget })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InputEntry {
    #[serde(rename = "widget")]
    pub widget_name: String,
    pub content: String,
}

impl InputEntry {
    pub fn new(widget_name: impl Into<String>, content: impl Into<String>) -> Self {
        Self { widget_name: widget_name.into(), content: content.into() }
    }
}

/// A directly executable UI command.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExecutiveCommand {
    Action(ActionCommand),
    #[serde(rename = "input")]
    TextInput { entries: Vec<InputEntry>, submit: ActionCommand },
}

impl ExecutiveCommand {
    pub fn action(operation: Operation, widget_name: impl Into<String>) -> Self {
        Self::Action(ActionCommand::new(operation, widget_name))
    }

    pub fn click(widget_name: impl Into<String>) -> Self {
        Self::action(Operation::Click, widget_name)
    }

    /// The action that is finally performed (the submit for text input).
    pub fn final_action(&self) -> &ActionCommand {
        match self {
            Self::Action(a) => a,
            Self::TextInput { submit, .. } => submit,
        }
    }

    /// Every widget name the command touches, entries before submit.
    pub fn widget_names(&self) -> Vec<&str> {
        match self {
            Self::Action(a) => vec![a.widget_name.as_str()],
            Self::TextInput { entries, submit } => entries
                .iter()
                .map(|e| e.widget_name.as_str())
                .chain(std::iter::once(submit.widget_name.as_str()))
                .collect(),
        }
    }

    /// Short human form used in the memory prompt.
    pub fn describe(&self) -> String {
        let action = |a: &ActionCommand| format!("\"{}\" the \"{}\"", a.operation, a.widget_name);
        match self {
            Self::Action(a) => action(a),
            Self::TextInput { entries, submit } => {
                let inputs: Vec<String> = entries
                    .iter()
                    .map(|e| format!("\"{}\" into \"{}\"", e.content, e.widget_name))
                    .collect();
                format!("Input {}, then {}", inputs.join(", "), action(submit))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FunctionStatus {
    Yes,
    No,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionAnswer {
    pub function_name: String,
    pub is_new_or_done: FunctionStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MatchMethod {
    Exact,
    Normalized,
    Substring,
    TokenOverlap,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidgetMatch<'a> {
    pub resolved: Option<&'a WidgetInfo>,
    pub method: MatchMethod,
}

// ---------------------------------------------------------------------------
// Rendering

fn quote(value: &str) -> String {
    let mut out = String::with_capacity(value.len() + 2);
    out.push('"');
    for c in value.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn render_action(a: &ActionCommand) -> String {
    format!("Operation: {}. Widget: {}.", quote(a.operation.label()), quote(&a.widget_name))
}

/// Canonical template text for a command; [`parse_action_answer`] and
/// [`parse_input_answer`] invert it exactly.
pub fn render_command(command: &ExecutiveCommand) -> String {
    match command {
        ExecutiveCommand::Action(a) => render_action(a),
        ExecutiveCommand::TextInput { entries, submit } => {
            let mut parts: Vec<String> = entries
                .iter()
                .map(|e| format!("Widget: {}. Input: {}.", quote(&e.widget_name), quote(&e.content)))
                .collect();
            parts.push(render_action(submit));
            parts.join(" ")
        }
    }
}

pub fn render_function_answer(answer: &FunctionAnswer) -> String {
    let status = match answer.is_new_or_done {
        FunctionStatus::Yes => "Yes",
        FunctionStatus::No => "No",
    };
    format!("Function: {}. Status: {status}.", quote(&answer.function_name))
}

// ---------------------------------------------------------------------------
// Lexing

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Label {
    Operation,
    Widget,
    Input,
    Function,
    Status,
}

static LABEL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(operation|action|widget|input|content|function|status)\s*:").unwrap()
});

static BARE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^\s*(?:[-*]\s*|\d+[.)]\s*)?(double[- ]?click|double[- ]tap|long[- ]?press|long[- ]click|click|tap|scroll(?:\s+(?:up|down))?)\b\s*(?:on\s+|the\s+)*(.*)$",
    )
    .unwrap()
});

fn label_of(word: &str) -> Label {
    match word.to_ascii_lowercase().as_str() {
        "operation" | "action" => Label::Operation,
        "widget" => Label::Widget,
        "input" | "content" => Label::Input,
        "function" => Label::Function,
        _ => Label::Status,
    }
}

fn closing_quote(open: char) -> Option<char> {
    match open {
        '"' => Some('"'),
        '\'' => Some('\''),
        '`' => Some('`'),
        '\u{201c}' => Some('\u{201d}'),
        '\u{2018}' => Some('\u{2019}'),
        '\u{201e}' => Some('\u{201c}'),
        _ => None,
    }
}

/// Reads a quoted value starting at the opening quote. Returns the value and
/// the byte offset just past the closing quote, or `None` if unterminated.
fn read_quoted(text: &str, start: usize, open: char) -> Option<(String, usize)> {
    let close = closing_quote(open)?;
    let body_start = start + open.len_utf8();
    let mut out = String::new();
    let mut chars = text[body_start..].char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if open == '"' && c == '\\' {
            if let Some(&(_, n)) = chars.peek() {
                if n == '"' || n == '\\' {
                    out.push(n);
                    chars.next();
                    continue;
                }
            }
            out.push(c);
        } else if c == close {
            return Some((out, body_start + i + c.len_utf8()));
        } else {
            out.push(c);
        }
    }
    None
}

/// End of an unquoted value: newline, clause punctuation followed by
/// whitespace or end of text, or `limit` (the next label).
fn unquoted_end(text: &str, start: usize, limit: usize) -> usize {
    let slice = &text[start..limit];
    let mut iter = slice.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        match c {
            '\n' | '\r' => return start + i,
            '.' | ',' | ';' => {
                let next = iter.peek().map(|&(_, n)| n);
                if next.is_none_or(char::is_whitespace) {
                    return start + i;
                }
            }
            _ => {}
        }
    }
    limit
}

fn clean_unquoted(raw: &str) -> String {
    raw.trim().trim_matches(|c| c == '*' || c == '`').trim().to_string()
}

fn lex(text: &str) -> Vec<(Label, String)> {
    let mut tokens = Vec::new();
    let mut pos = 0;
    while let Some(m) = LABEL_RE.captures_at(text, pos) {
        let whole = m.get(0).unwrap();
        let label = label_of(&m[1]);
        let mut vstart = whole.end();
        while let Some(c) = text[vstart..].chars().next() {
            if c == ' ' || c == '\t' || c == '*' {
                vstart += c.len_utf8();
            } else {
                break;
            }
        }
        let first = text[vstart..].chars().next();
        let quoted = first.and_then(|q| read_quoted(text, vstart, q));
        let (value, end) = match quoted {
            Some(v) => v,
            None => {
                let next_label = LABEL_RE.find_at(text, vstart).map_or(text.len(), |n| n.start());
                let end = unquoted_end(text, vstart, next_label);
                (clean_unquoted(&text[vstart..end]), end)
            }
        };
        tokens.push((label, value));
        pos = end.max(whole.end());
        if pos >= text.len() {
            break;
        }
    }
    tokens
}

#[derive(Debug, Default)]
struct Clauses {
    actions: Vec<ActionCommand>,
    entries: Vec<InputEntry>,
}

fn pair_up(tokens: &[(Label, String)]) -> Clauses {
    let mut out = Clauses::default();
    let entry = |widget: &String, content: &String, out: &mut Clauses| {
        if !widget.is_empty() {
            out.entries.push(InputEntry::new(widget.clone(), content.clone()));
        }
    };
    let action = |op: &String, widget: &String, out: &mut Clauses| {
        if let Some(operation) = Operation::from_phrase(op).filter(|_| !widget.is_empty()) {
            out.actions.push(ActionCommand::new(operation, widget.clone()));
        }
    };
    let mut i = 0;
    while i < tokens.len() {
        let (label, value) = &tokens[i];
        let step = match (label, tokens.get(i + 1)) {
            (Label::Widget, Some((Label::Input, content))) => {
                entry(value, content, &mut out);
                2
            }
            (Label::Input, Some((Label::Widget, widget))) => {
                entry(widget, value, &mut out);
                2
            }
            (Label::Operation, Some((Label::Widget, widget))) => {
                action(value, widget, &mut out);
                2
            }
            (Label::Widget, Some((Label::Operation, op))) => {
                action(op, value, &mut out);
                2
            }
            _ => 1,
        };
        i += step;
    }
    out
}

/// `Click "Add"` / `long press the device row` at the start of a line.
fn bare_actions(text: &str) -> Vec<ActionCommand> {
    let mut out = Vec::new();
    for line in text.lines() {
        let Some(c) = BARE_RE.captures(line) else { continue };
        let Some(operation) = Operation::from_phrase(&c[1]) else { continue };
        let rest = c[2].trim_start();
        let widget = match rest.chars().next().and_then(|q| read_quoted(rest, 0, q)) {
            Some((v, _)) => v,
            None => {
                let end = unquoted_end(rest, 0, rest.len());
                clean_unquoted(&rest[..end])
            }
        };
        if !widget.is_empty() {
            out.push(ActionCommand::new(operation, widget));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Parsing

/// Parses a general-action answer such as `Operation: "Click". Widget: "ADD INCOME".`
pub fn parse_action_answer(answer: &str) -> Result<ExecutiveCommand, AnswerError> {
    let clauses = pair_up(&lex(answer));
    clauses
        .actions
        .into_iter()
        .next()
        .or_else(|| bare_actions(answer).into_iter().next())
        .map(ExecutiveCommand::Action)
        .ok_or(AnswerError::UnparseableAnswer)
}

/// Parses a text-input answer: ordered `Widget: .. Input: ..` pairs, then an
/// optional trailing `Operation: .. Widget: ..` submit. Without a submit the
/// default from [`default_submit`] is used.
pub fn parse_input_answer(answer: &str, page: Option<&GuiPage>) -> Result<ExecutiveCommand, AnswerError> {
    let clauses = pair_up(&lex(answer));
    if clauses.entries.is_empty() {
        return Err(AnswerError::UnparseableAnswer);
    }
    let submit = clauses.actions.into_iter().last().unwrap_or_else(|| default_submit(page));
    Ok(ExecutiveCommand::TextInput { entries: clauses.entries, submit })
}

/// Parses the `Function: "..". Status: Yes|No` pair.
pub fn parse_function_answer(answer: &str) -> Result<FunctionAnswer, AnswerError> {
    let tokens = lex(answer);
    for pair in tokens.windows(2) {
        let [(Label::Function, name), (Label::Status, status)] = pair else { continue };
        if name.is_empty() {
            continue;
        }
        let status = status.to_lowercase();
        let first = status.split_whitespace().next().unwrap_or("");
        let first = first.trim_matches(|c: char| !c.is_alphanumeric());
        let is_new_or_done = match first {
            "yes" | "true" | "finished" | "completed" | "complete" | "done" => FunctionStatus::Yes,
            "no" | "false" | "testing" | "ongoing" | "unfinished" | "in" => FunctionStatus::No,
            _ => continue,
        };
        return Ok(FunctionAnswer { function_name: name.clone(), is_new_or_done });
    }
    Err(AnswerError::MissingFunctionAnswer)
}

/// Submit used when an input answer has no trailing action: the first
/// clickable widget named like a submit button, else the enter key.
pub fn default_submit(page: Option<&GuiPage>) -> ActionCommand {
    page.and_then(|p| {
        p.widgets.iter().find(|w| {
            w.action == WidgetAction::Click && SUBMIT_NAMES.contains(&normalize_name(&w.display_name).as_str())
        })
    })
    .map(|w| ActionCommand::new(Operation::Click, w.display_name.clone()))
    .unwrap_or_else(|| ActionCommand::new(Operation::Click, IME_ENTER))
}

// ---------------------------------------------------------------------------
// Widget resolution

fn lower_tokens(s: &str) -> Vec<String> {
    let mut t: Vec<String> = tokenize_identifier(s).into_iter().map(|t| t.to_lowercase()).collect();
    t.sort();
    t.dedup();
    t
}

fn jaccard(a: &[String], b: &[String]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let inter = a.iter().filter(|t| b.contains(t)).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

fn normalized_fields(w: &WidgetInfo) -> Vec<String> {
    [Some(&w.display_name), w.widget_text.as_ref(), w.widget_id.as_ref()]
        .into_iter()
        .flatten()
        .map(|s| normalize_name(s))
        .collect()
}

/// Resolves `name` against the page with no visit information.
pub fn match_widget<'a>(name: &str, page: &'a GuiPage) -> WidgetMatch<'a> {
    match_widget_with(name, page, |_| 0)
}

/// Resolves `name` through the stages exact, normalized, substring and
/// token overlap (Jaccard >= 0.5). The first stage with any hit wins; within
/// a stage the best score wins, then fewer prior visits, then reading order.
pub fn match_widget_with<'a>(
    name: &str,
    page: &'a GuiPage,
    visits: impl Fn(&WidgetInfo) -> u32,
) -> WidgetMatch<'a> {
    let name = name.trim();
    let none = WidgetMatch { resolved: None, method: MatchMethod::None };
    if name.is_empty() {
        return none;
    }
    let norm = normalize_name(name);
    let name_tokens = lower_tokens(name);

    type Scorer<'s> = Box<dyn Fn(&WidgetInfo) -> Option<f64> + 's>;
    let stages: [(MatchMethod, Scorer); 4] = [
        (MatchMethod::Exact, Box::new(|w: &WidgetInfo| (w.display_name == name).then_some(1.0))),
        (
            MatchMethod::Normalized,
            Box::new(|w: &WidgetInfo| normalized_fields(w).contains(&norm).then_some(1.0)),
        ),
        (
            MatchMethod::Substring,
            Box::new(|w: &WidgetInfo| {
                normalized_fields(w)
                    .iter()
                    .filter(|f| {
                        let shorter = f.chars().count().min(norm.chars().count());
                        shorter >= 2 && (f.contains(norm.as_str()) || norm.contains(f.as_str()))
                    })
                    .map(|f| f.chars().count().min(norm.chars().count()) as f64)
                    .reduce(f64::max)
            }),
        ),
        (
            MatchMethod::TokenOverlap,
            Box::new(|w: &WidgetInfo| {
                [Some(&w.display_name), w.widget_id.as_ref()]
                    .into_iter()
                    .flatten()
                    .map(|f| jaccard(&name_tokens, &lower_tokens(f)))
                    .filter(|j| *j >= 0.5)
                    .reduce(f64::max)
            }),
        ),
    ];

    for (method, score) in &stages {
        let best = page
            .widgets
            .iter()
            .enumerate()
            .filter_map(|(i, w)| score(w).map(|s| (s, visits(w), i, w)))
            .min_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        if let Some((_, _, _, w)) = best {
            return WidgetMatch { resolved: Some(w), method: *method };
        }
    }
    none
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gui::{Bounds, WidgetCategory};
    use proptest::prelude::*;

    fn widget(name: &str, action: WidgetAction, y: i32) -> WidgetInfo {
        WidgetInfo {
            display_name: name.to_string(),
            widget_text: Some(name.to_string()),
            widget_id: None,
            category: if action == WidgetAction::Input { WidgetCategory::EditText } else { WidgetCategory::Button },
            action,
            nearby: vec![],
            bounds: Bounds::new(0, y, 100, y + 50),
        }
    }

    fn page(names: &[&str]) -> GuiPage {
        let widgets = names
            .iter()
            .enumerate()
            .map(|(i, n)| widget(n, WidgetAction::Click, i as i32 * 100))
            .collect();
        GuiPage::new("Main", widgets, 2000)
    }

    #[test]
    fn action_template_example() {
        let cmd = parse_action_answer("Operation: \"Click\". Widget: \"ADD INCOME\".").unwrap();
        assert_eq!(cmd, ExecutiveCommand::click("ADD INCOME"));
    }

    #[test]
    fn tolerant_action_grammar() {
        let cmd = parse_action_answer("operation: long press. widget: 'device row'").unwrap();
        assert_eq!(cmd, ExecutiveCommand::action(Operation::LongPress, "device row"));
        let cmd = parse_action_answer("Function: \"Add income\". Status: Yes.\nOperation: \u{201c}Double-click\u{201d}\nWidget: Income").unwrap();
        assert_eq!(cmd, ExecutiveCommand::action(Operation::DoubleClick, "Income"));
        let cmd = parse_action_answer("Operation: \"Scroll\". Widget: \"list\".").unwrap();
        assert_eq!(cmd, ExecutiveCommand::action(Operation::Scroll(ScrollDirection::Down), "list"));
        let cmd = parse_action_answer("Operation: scroll up, Widget: list").unwrap();
        assert_eq!(cmd, ExecutiveCommand::action(Operation::Scroll(ScrollDirection::Up), "list"));
    }

    #[test]
    fn bare_action_lines() {
        assert_eq!(parse_action_answer("Click Add").unwrap(), ExecutiveCommand::click("Add"));
        assert_eq!(parse_action_answer("Sure.\nlong press the \"Smart Plug\".").unwrap(),
            ExecutiveCommand::action(Operation::LongPress, "Smart Plug"));
    }

    #[test]
    fn free_text_is_unparseable() {
        assert_eq!(parse_action_answer("I think you should maybe go back."), Err(AnswerError::UnparseableAnswer));
        assert_eq!(parse_action_answer(""), Err(AnswerError::UnparseableAnswer));
        assert_eq!(parse_action_answer("Operation: \"Fly\". Widget: \"x\"."), Err(AnswerError::UnparseableAnswer));
    }

    #[test]
    fn input_template_example() {
        let answer = "Widget: \"Price\". Input: \"3500\". Widget: \"Title\". Input: \"salary\". Widget: \"Category\". Input: \"personal\". Operation: \"Click\". Widget: \"Submit\".";
        let cmd = parse_input_answer(answer, None).unwrap();
        assert_eq!(
            cmd,
            ExecutiveCommand::TextInput {
                entries: vec![
                    InputEntry::new("Price", "3500"),
                    InputEntry::new("Title", "salary"),
                    InputEntry::new("Category", "personal"),
                ],
                submit: ActionCommand::new(Operation::Click, "Submit"),
            }
        );
    }

    #[test]
    fn input_without_submit_uses_default() {
        let cmd = parse_input_answer("Widget: \"Search\". Input: \"flights\".", None).unwrap();
        assert_eq!(
            cmd,
            ExecutiveCommand::TextInput {
                entries: vec![InputEntry::new("Search", "flights")],
                submit: ActionCommand::new(Operation::Click, IME_ENTER),
            }
        );
        let p = page(&["Cancel", "OK", "Save"]);
        let ExecutiveCommand::TextInput { submit, .. } = parse_input_answer("Widget: Search. Input: flights.", Some(&p)).unwrap() else {
            panic!()
        };
        assert_eq!(submit.widget_name, "OK");
        assert_eq!(parse_input_answer("", None), Err(AnswerError::UnparseableAnswer));
    }

    #[test]
    fn function_answers() {
        assert_eq!(
            parse_function_answer("Function: \"Add income\". Status: Yes.").unwrap(),
            FunctionAnswer { function_name: "Add income".into(), is_new_or_done: FunctionStatus::Yes }
        );
        assert_eq!(
            parse_function_answer("function: \"Add income\". status: no.").unwrap().is_new_or_done,
            FunctionStatus::No
        );
        assert_eq!(
            parse_function_answer("Operation: \"Click\". Widget: \"Add\"."),
            Err(AnswerError::MissingFunctionAnswer)
        );
    }

    #[test]
    fn widget_matching_stages() {
        let p = page(&["Add Income", "Submit", "Delete", "btn_income_total"]);
        let m = match_widget("Add Income", &p);
        assert_eq!((m.method, m.resolved.unwrap().display_name.as_str()), (MatchMethod::Exact, "Add Income"));
        let m = match_widget("ADD INCOME", &p);
        assert_eq!((m.method, m.resolved.unwrap().display_name.as_str()), (MatchMethod::Normalized, "Add Income"));
        let m = match_widget("Submit button", &p);
        assert_eq!((m.method, m.resolved.unwrap().display_name.as_str()), (MatchMethod::Substring, "Submit"));
        let m = match_widget("incomeTotal", &p);
        assert_eq!(m.method, MatchMethod::TokenOverlap);
        assert_eq!(m.resolved.unwrap().display_name, "btn_income_total");
        let m = match_widget("Exchange", &p);
        assert_eq!(m, WidgetMatch { resolved: None, method: MatchMethod::None });
    }

    #[test]
    fn ties_prefer_fewer_visits_then_reading_order() {
        let p = page(&["Delete", "Delete"]);
        let first = match_widget("delete", &p).resolved.unwrap() as *const _;
        assert_eq!(first, &p.widgets[0] as *const _);
        let m = match_widget_with("delete", &p, |w| if std::ptr::eq(w, &p.widgets[0]) { 3 } else { 1 });
        assert!(std::ptr::eq(m.resolved.unwrap(), &p.widgets[1]));
    }

    #[test]
    fn command_json_is_canonical() {
        let json = serde_json::to_value(ExecutiveCommand::click("Add")).unwrap();
        assert_eq!(json, serde_json::json!({"kind":"action","op":"click","widget":"Add"}));
        let input = ExecutiveCommand::TextInput {
            entries: vec![InputEntry::new("Price", "3500")],
            submit: ActionCommand::new(Operation::Click, "Submit"),
        };
        assert_eq!(
            serde_json::to_value(&input).unwrap(),
            serde_json::json!({"kind":"input","entries":[{"widget":"Price","content":"3500"}],"submit":{"op":"click","widget":"Submit"}})
        );
        let scroll: ExecutiveCommand =
            serde_json::from_str(r#"{"kind":"action","op":"scroll","direction":"up","widget":"list"}"#).unwrap();
        assert_eq!(scroll, ExecutiveCommand::action(Operation::Scroll(ScrollDirection::Up), "list"));
        assert!(serde_json::from_str::<ExecutiveCommand>(r#"{"kind":"action","op":"fly","widget":"x"}"#).is_err());
    }

    #[test]
    fn escaped_quotes_round_trip() {
        let cmd = ExecutiveCommand::click("say \"hi\" \\ bye");
        assert_eq!(parse_action_answer(&render_command(&cmd)).unwrap(), cmd);
    }

    fn arb_operation() -> impl Strategy<Value = Operation> {
        prop::sample::select(Operation::ALL.to_vec())
    }

    fn arb_command() -> impl Strategy<Value = ExecutiveCommand> {
        let name = "[^\\x00-\\x1f]{1,16}".prop_filter("non-blank", |s: &String| !s.trim().is_empty());
        let action = (arb_operation(), name.clone()).prop_map(|(op, w)| ActionCommand::new(op, w)).boxed();
        prop_oneof![
            action.clone().prop_map(ExecutiveCommand::Action),
            (prop::collection::vec((name, "[^\\x00-\\x1f]{0,16}"), 1..4), action).prop_map(|(entries, submit)| {
                ExecutiveCommand::TextInput {
                    entries: entries.into_iter().map(|(w, c)| InputEntry::new(w, c)).collect(),
                    submit,
                }
            }),
        ]
    }

    proptest! {
        #[test]
        fn parse_inverts_render(cmd in arb_command()) {
            let text = render_command(&cmd);
            let parsed = match &cmd {
                ExecutiveCommand::Action(_) => parse_action_answer(&text),
                ExecutiveCommand::TextInput { .. } => parse_input_answer(&text, None),
            };
            prop_assert_eq!(parsed, Ok(cmd.clone()));
            let json = serde_json::to_string(&cmd).unwrap();
            prop_assert_eq!(serde_json::from_str::<ExecutiveCommand>(&json).unwrap(), cmd);
        }

        #[test]
        fn parsers_are_total(text in "\\PC{0,200}") {
            let _ = parse_action_answer(&text);
            let _ = parse_input_answer(&text, None);
            let _ = parse_function_answer(&text);
        }

        #[test]
        fn exact_stage_wins(names in prop::collection::vec("[A-Za-z ]{1,10}", 1..8), pick in any::<prop::sample::Index>()) {
            let names: Vec<&str> = names.iter().map(String::as_str).filter(|n| !n.trim().is_empty()).collect();
            prop_assume!(!names.is_empty());
            let p = page(&names);
            let target = pick.get(&names).trim();
            let exact = p.widgets.iter().any(|w| w.display_name == target);
            let m = match_widget(target, &p);
            if exact {
                prop_assert_eq!(m.method, MatchMethod::Exact);
            }
            prop_assert_eq!(m, match_widget(target, &p));
        }
    }
}
