//! Deterministic stand-in for a chat model, for offline runs and tests.
//!
//! The oracle reads only the prompt text. It picks the least-visited
//! operable widget of the current page and fills input pages with
//! plausible per-field contents.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{LazyLock, Mutex};

use regex::Regex;

use super::{ChatBackend, ChatRequest, LlmError};
use crate::answer::{
    render_command, render_function_answer, ActionCommand, ExecutiveCommand, FunctionAnswer, FunctionStatus,
    InputEntry, Operation, ScrollDirection, IME_ENTER, SUBMIT_NAMES,
};
use crate::tokenize::{humanize_identifier, normalize_name, tokenize_identifier};

static CURRENT_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"The current page is "([^"]*)""#).unwrap());
static DESCRIPTOR_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#""([^"]+)" is ([A-Za-z][A-Za-z0-9_]*) which can be (clicked|input)"#).unwrap());
static FAILED_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"There is no "([^"]*)" on the current page"#).unwrap());
static STEP_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"Latest \d+[a-z]{2} step tested the "([^"]*)" page\. The following widgets with visits time of this page have been tested: (.*?)\. The following"#).unwrap()
});
static VISIT_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#""Widget: (.*?), Visits:(\d+)""#).unwrap());

/// What a backend can learn from a rendered prompt.
#[derive(Debug, Default, Clone, PartialEq)]
pub(crate) struct PromptView {
    pub activity: Option<String>,
    /// (name, is_input) in listing order.
    pub widgets: Vec<(String, bool)>,
    pub failed: Option<String>,
    /// activity -> normalized widget -> visits, from the history section.
    pub snapshots: BTreeMap<String, BTreeMap<String, u32>>,
}

impl PromptView {
    pub fn parse(prompt: &str) -> Self {
        let context = prompt.lines().next().unwrap_or("");
        let mut view = PromptView {
            activity: CURRENT_RE.captures(context).map(|c| c[1].to_string()),
            failed: FAILED_RE.captures(context).map(|c| c[1].to_string()),
            ..Self::default()
        };
        for c in DESCRIPTOR_RE.captures_iter(context) {
            let name = c[1].to_string();
            if !view.widgets.iter().any(|(n, _)| *n == name) {
                view.widgets.push((name, &c[3] == "input"));
            }
        }
        for c in STEP_RE.captures_iter(prompt) {
            let page = view.snapshots.entry(c[1].to_string()).or_default();
            for v in VISIT_RE.captures_iter(&c[2]) {
                let n: u32 = v[2].parse().unwrap_or(0);
                let slot = page.entry(normalize_name(&v[1])).or_insert(0);
                *slot = (*slot).max(n);
            }
        }
        view
    }

    pub fn clickables(&self) -> impl Iterator<Item = &str> {
        self.widgets.iter().filter(|(n, input)| !input && Some(n) != self.failed.as_ref()).map(|(n, _)| n.as_str())
    }

    pub fn inputs(&self) -> impl Iterator<Item = &str> {
        self.widgets.iter().filter(|(_, input)| *input).map(|(n, _)| n.as_str())
    }
}

const EMAIL: &[&str] = &["email", "mail"];
const PASSWORD: &[&str] = &["password", "passcode", "pwd"];
const DATE: &[&str] = &["date", "birthday", "dob", "deadline"];
const TIME: &[&str] = &["time", "clock"];
const MONEY: &[&str] = &["price", "amount", "income", "cost", "salary", "balance", "budget", "money", "expense", "fee"];
const COUNT: &[&str] = &["sets", "reps", "count", "quantity", "qty", "times", "number", "servings"];
const NUMERIC: &[&str] = &[
    "age", "weight", "height", "minutes", "duration", "distance", "calories", "level", "rate", "percent",
    "temperature", "days", "hours", "limit", "pin", "zip", "phone", "year", "goal", "threshold", "power",
];

/// Plausible content for an input field, chosen from the field name.
pub fn generate_content(field: &str) -> String {
    let tokens: Vec<String> = tokenize_identifier(field).into_iter().map(|t| t.to_lowercase()).collect();
    let has = |words: &[&str]| tokens.iter().any(|t| words.contains(&t.as_str()));
    if has(EMAIL) {
        "tester@example.com".into()
    } else if has(PASSWORD) {
        "Passw0rd!".into()
    } else if has(DATE) {
        "2023-05-01".into()
    } else if has(TIME) {
        "08:30".into()
    } else if has(MONEY) {
        "3500".into()
    } else if has(COUNT) {
        "3".into()
    } else if has(NUMERIC) {
        "42".into()
    } else {
        tokens.last().cloned().unwrap_or_else(|| "text".into())
    }
}

/// Per-widget operation cycle, indexed by prior visits.
const OPERATION_CYCLE: [Operation; 4] =
    [Operation::Click, Operation::LongPress, Operation::Click, Operation::DoubleClick];

#[derive(Debug, Default)]
struct OracleState {
    visits: BTreeMap<(String, String), u32>,
    /// (activity, listing) -> widgets a scroll from that listing revealed.
    scrolls: BTreeMap<(String, BTreeSet<String>), BTreeSet<String>>,
    /// The scroll awaiting its outcome.
    pending_scroll: Option<(String, BTreeSet<String>)>,
    last_activity: Option<String>,
}

/// Stateful heuristic answerer. Use one instance per session.
#[derive(Debug, Default)]
pub struct HeuristicOracle {
    state: Mutex<OracleState>,
}

impl HeuristicOracle {
    pub fn new() -> Self {
        Self::default()
    }

    fn answer(&self, prompt: &str) -> String {
        let view = PromptView::parse(prompt);
        let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
        let activity = view
            .activity
            .clone()
            .or_else(|| state.last_activity.clone())
            .unwrap_or_else(|| "Unknown".to_string());
        state.last_activity = Some(activity.clone());

        let count = |state: &OracleState, name: &str| {
            let key = normalize_name(name);
            let own = state.visits.get(&(activity.clone(), key.clone())).copied().unwrap_or(0);
            let seen = view.snapshots.get(&activity).and_then(|m| m.get(&key)).copied().unwrap_or(0);
            own.max(seen)
        };
        let bump = |state: &mut OracleState, name: &str| {
            let seen = count(state, name);
            state.visits.insert((activity.clone(), normalize_name(name)), seen + 1);
        };

        let clickables: Vec<&str> = view.clickables().collect();
        let inputs: Vec<&str> = view.inputs().collect();
        let listing: BTreeSet<String> = clickables.iter().map(|n| normalize_name(n)).collect();
        if let Some((from_activity, from_listing)) = state.pending_scroll.take() {
            let revealed = if from_activity == activity {
                listing.difference(&from_listing).cloned().collect()
            } else {
                BTreeSet::new()
            };
            state.scrolls.insert((from_activity, from_listing), revealed);
        }

        let command = if !inputs.is_empty() {
            let submit = clickables
                .iter()
                .enumerate()
                .min_by_key(|(i, n)| {
                    let submit_like = SUBMIT_NAMES.contains(&normalize_name(n).as_str());
                    (count(&state, n), !submit_like, *i)
                })
                .map_or(IME_ENTER, |(_, n)| n);
            let entries: Vec<InputEntry> = inputs.iter().map(|f| InputEntry::new(*f, generate_content(f))).collect();
            for f in &inputs {
                bump(&mut state, f);
            }
            if submit != IME_ENTER {
                bump(&mut state, submit);
            }
            Some(ExecutiveCommand::TextInput { entries, submit: ActionCommand::new(Operation::Click, submit) })
        } else if clickables.is_empty() {
            None
        } else {
            let all_seen = clickables.iter().all(|n| count(&state, n) > 0);
            // scroll once per listing, and again while it keeps paying off
            let scroll_key = (activity.clone(), listing.clone());
            let worth_scrolling = match state.scrolls.get(&scroll_key) {
                None => true,
                Some(revealed) => revealed.iter().any(|n| count(&state, n) == 0),
            };
            if all_seen && worth_scrolling {
                state.pending_scroll = Some(scroll_key);
                let target = clickables[0];
                bump(&mut state, target);
                Some(ExecutiveCommand::action(Operation::Scroll(ScrollDirection::Down), target))
            } else {
                let (_, target) = clickables.iter().enumerate().min_by_key(|(i, n)| (count(&state, n), *i)).unwrap();
                let op = OPERATION_CYCLE[count(&state, target) as usize % OPERATION_CYCLE.len()];
                bump(&mut state, target);
                Some(ExecutiveCommand::action(op, *target))
            }
        };

        let done = clickables.iter().all(|n| count(&state, n) > 0);
        let function = FunctionAnswer {
            function_name: {
                let h = humanize_identifier(&activity);
                if h.is_empty() { activity.clone() } else { h }
            },
            is_new_or_done: if done { FunctionStatus::Yes } else { FunctionStatus::No },
        };
        match command {
            Some(c) => format!("{}\n{}", render_function_answer(&function), render_command(&c)),
            None => format!("{}\nThere is nothing to operate on this page.", render_function_answer(&function)),
        }
    }
}

impl ChatBackend for HeuristicOracle {
    fn chat(&self, request: &ChatRequest) -> Result<String, LlmError> {
        request.validate()?;
        Ok(self.answer(request.last_user_message()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answer::{parse_action_answer, parse_function_answer, parse_input_answer};
    use crate::device::ExecResult;
    use crate::gui::{AppInfo, Bounds, GuiContext, GuiPage, WidgetAction, WidgetCategory, WidgetInfo};
    use crate::llm::{frame_request, RequestSettings};
    use crate::memory::Memorizer;
    use crate::prompt::{assemble_query, PromptConfig, QueryKind, QueryOptions};
    use proptest::prelude::*;

    fn widget(name: &str, category: WidgetCategory, y: i32) -> WidgetInfo {
        let action = match category {
            WidgetCategory::EditText => WidgetAction::Input,
            WidgetCategory::TextView => WidgetAction::NonInteractive,
            _ => WidgetAction::Click,
        };
        WidgetInfo {
            display_name: name.into(),
            widget_text: Some(name.into()),
            widget_id: None,
            category,
            action,
            nearby: vec!["label".into()],
            bounds: Bounds::new(0, y, 100, y + 50),
        }
    }

    fn ctx(widgets: Vec<WidgetInfo>) -> GuiContext {
        let app = AppInfo::new("Money Tracker", ["Main".to_string(), "Income".to_string()]).unwrap();
        let activity = if widgets.iter().any(|w| w.category == WidgetCategory::EditText) { "Income" } else { "Main" };
        GuiContext::new(app, GuiPage::new(activity, widgets, 2000))
    }

    fn ask(oracle: &HeuristicOracle, c: &GuiContext, mem: &Memorizer, kind: QueryKind) -> String {
        let doc = assemble_query(c, mem, &kind, &PromptConfig::default(), &QueryOptions::default()).unwrap();
        oracle.chat(&frame_request(&doc, &[], &RequestSettings::default())).unwrap()
    }

    #[test]
    fn picks_least_visited_from_history() {
        let c = ctx(vec![widget("Add", WidgetCategory::Button, 0), widget("Delete", WidgetCategory::Button, 100)]);
        let mut mem = Memorizer::new();
        for _ in 0..2 {
            mem.record_step("Main", &ExecutiveCommand::click("Add"), &ExecResult::NoEffect, &c.page);
        }
        let answer = ask(&HeuristicOracle::new(), &c, &mem, QueryKind::Test);
        assert_eq!(parse_action_answer(&answer).unwrap(), ExecutiveCommand::click("Delete"));
    }

    #[test]
    fn input_page_answer_shape() {
        let c = ctx(vec![
            widget("Price", WidgetCategory::EditText, 0),
            widget("Title", WidgetCategory::EditText, 100),
            widget("Cancel", WidgetCategory::Button, 200),
            widget("Submit", WidgetCategory::Button, 300),
        ]);
        let answer = ask(&HeuristicOracle::new(), &c, &Memorizer::new(), QueryKind::Start);
        assert!(answer.contains("Widget: \"Price\". Input: \"3500\"."), "{answer}");
        let cmd = parse_input_answer(&answer, Some(&c.page)).unwrap();
        let ExecutiveCommand::TextInput { entries, submit } = cmd else { panic!() };
        assert_eq!(entries, [InputEntry::new("Price", "3500"), InputEntry::new("Title", "title")]);
        assert_eq!(submit, ActionCommand::new(Operation::Click, "Submit"));
        assert_eq!(parse_function_answer(&answer).unwrap().function_name, "Income");
    }

    #[test]
    fn cycles_operations_and_scrolls_once() {
        let c = ctx(vec![widget("Add", WidgetCategory::Button, 0)]);
        let oracle = HeuristicOracle::new();
        let mem = Memorizer::new();
        let ops: Vec<Operation> = (0..6)
            .map(|_| match parse_action_answer(&ask(&oracle, &c, &mem, QueryKind::Test)).unwrap() {
                ExecutiveCommand::Action(a) => a.operation,
                _ => unreachable!(),
            })
            .collect();
        let down = Operation::Scroll(ScrollDirection::Down);
        assert_eq!(ops, [Operation::Click, down, Operation::Click, Operation::DoubleClick, Operation::Click, Operation::LongPress]);
    }

    #[test]
    fn feedback_avoids_failed_widget() {
        let c = ctx(vec![widget("Add", WidgetCategory::Button, 0), widget("Delete", WidgetCategory::Button, 100)]);
        let answer = ask(&HeuristicOracle::new(), &c, &Memorizer::new(), QueryKind::Feedback { failed_widget: "Add".into() });
        assert_eq!(parse_action_answer(&answer).unwrap(), ExecutiveCommand::click("Delete"));
    }

    #[test]
    fn content_table() {
        for (field, want) in [
            ("Price", "3500"),
            ("incomeAmount", "3500"),
            ("Sets", "3"),
            ("Reps", "3"),
            ("Body weight", "42"),
            ("Start date", "2023-05-01"),
            ("Alarm time", "08:30"),
            ("Email", "tester@example.com"),
            ("Confirm password", "Passw0rd!"),
            ("Category", "category"),
            ("---", "text"),
        ] {
            assert_eq!(generate_content(field), want, "{field}");
        }
    }

    fn arb_widget() -> impl Strategy<Value = (String, u8)> {
        ("[A-Za-z][A-Za-z0-9 _.,:!?-]{0,14}", 0u8..3)
    }

    proptest! {
        #[test]
        fn answers_always_parse(ws in prop::collection::vec(arb_widget(), 1..10), steps in 0usize..8, feedback in any::<bool>()) {
            let cats = [WidgetCategory::Button, WidgetCategory::EditText, WidgetCategory::TextView];
            let widgets: Vec<WidgetInfo> = ws.iter().enumerate()
                .map(|(i, (n, c))| widget(n.trim(), cats[*c as usize].clone(), i as i32 * 100))
                .filter(|w| !w.display_name.is_empty())
                .collect();
            let c = ctx(widgets);
            prop_assume!(c.page.interactive().any(|w| w.action == WidgetAction::Click) || c.page.has_edit_text());
            let oracle = HeuristicOracle::new();
            let mut mem = Memorizer::new();
            for i in 0..steps {
                let w = &c.page.widgets[i % c.page.widgets.len()];
                mem.record_step(&c.page.activity_name, &ExecutiveCommand::click(w.display_name.clone()), &ExecResult::NoEffect, &c.page);
            }
            let kind = if feedback { QueryKind::Feedback { failed_widget: "zz".into() } } else { QueryKind::Test };
            let answer = ask(&oracle, &c, &mem, kind);
            if c.page.has_edit_text() {
                prop_assert!(parse_input_answer(&answer, Some(&c.page)).is_ok(), "{}", answer);
            } else {
                prop_assert!(parse_action_answer(&answer).is_ok(), "{}", answer);
            }
            prop_assert!(parse_function_answer(&answer).is_ok());
        }
    }
}
