//! Prompt rendering: GUI-context patterns, the functionality-aware memory
//! prompt and the question patterns, assembled into one document per query.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::ResultKind;
use crate::gui::{GuiContext, GuiPage, WidgetAction, WidgetCategory, WidgetInfo};
use crate::memory::{Memorizer, StepRecord, DEFAULT_RECENT_STEPS};

pub const TEST_PREFIX: &str = "We successfully did the above operation.";
pub const STALL_HINT: &str = "The page did not change recently; consider a different widget or scroll.";
pub const FUNCTION_QUESTION: &str =
    "What is the functions currently being tested? Are we testing a new function? (<Function name> + <Status>)";
pub const ACTION_QUESTION: &str =
    "What operation is required? (<Operation>[click / double-click / long press / scroll]+<Widget Name>)";
pub const INPUT_QUESTION: &str = "Please generate the input text in sequence, and the operation after input. (<Widget name>+<Input Content>, ...) and provided (<Operation[click]>+<Widget name>)";
pub const ACTION_DEMONSTRATION: &str =
    "For example: Function: \"Add income\". Status: Yes. Operation: \"Click\". Widget: \"ADD INCOME\".";
pub const INPUT_DEMONSTRATION: &str = "For example: Function: \"Add income\". Status: No. Widget: \"Price\". Input: \"3500\". Widget: \"Title\". Input: \"salary\". Widget: \"Category\". Input: \"personal\". Operation: \"Click\". Widget: \"Submit\".";

pub const FUNCTIONS_HEADER: &str = "List of tested functions:";
pub const PATH_HEADER: &str = "Path of tested activities:";
pub const HISTORY_HEADER: &str = "History of latest tested pages and operations:";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("prompt needs ~{estimated} tokens after truncation, budget is {budget}")]
    PromptTooLarge { estimated: usize, budget: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SectionKind {
    StartContext,
    TestContext,
    FeedbackContext,
    MemoryFunctions,
    MemoryActivities,
    MemoryRecentSteps,
    FunctionQuestion,
    ActionQuestion,
    InputQuestion,
}

impl SectionKind {
    pub fn is_context(self) -> bool {
        matches!(self, Self::StartContext | Self::TestContext | Self::FeedbackContext)
    }

    pub fn is_memory(self) -> bool {
        matches!(self, Self::MemoryFunctions | Self::MemoryActivities | Self::MemoryRecentSteps)
    }

    pub fn is_operation_question(self) -> bool {
        matches!(self, Self::ActionQuestion | Self::InputQuestion)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub kind: SectionKind,
    pub text: String,
}

impl Section {
    fn new(kind: SectionKind, text: String) -> Self {
        Self { kind, text }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptDocument {
    pub sections: Vec<Section>,
    pub rendered: String,
}

impl PromptDocument {
    pub fn new(sections: Vec<Section>) -> Self {
        let rendered = sections.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join("\n");
        Self { sections, rendered }
    }

    pub fn kinds(&self) -> Vec<SectionKind> {
        self.sections.iter().map(|s| s.kind).collect()
    }

    pub fn section(&self, kind: SectionKind) -> Option<&Section> {
        self.sections.iter().find(|s| s.kind == kind)
    }

    /// Exactly one context, exactly one operation question, and a function
    /// question whenever memory is present.
    pub fn is_well_formed(&self) -> bool {
        let count = |pred: fn(SectionKind) -> bool| self.sections.iter().filter(|s| pred(s.kind)).count();
        let has_function_q = self.sections.iter().any(|s| s.kind == SectionKind::FunctionQuestion);
        count(SectionKind::is_context) == 1
            && count(SectionKind::is_operation_question) == 1
            && (count(SectionKind::is_memory) == 0 || has_function_q)
    }

    pub fn estimated_tokens(&self) -> usize {
        estimate_tokens(&self.rendered)
    }
}

/// Four characters per token, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueryKind {
    Start,
    Test,
    Feedback { failed_widget: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptConfig {
    pub token_budget: usize,
    pub max_widgets: usize,
    pub recent_steps: usize,
    pub demonstrations: bool,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self { token_budget: 3000, max_widgets: 40, recent_steps: DEFAULT_RECENT_STEPS, demonstrations: true }
    }
}

/// InputQuestion iff the page has an EditText.
pub fn select_question_pattern(page: &GuiPage) -> SectionKind {
    if page.has_edit_text() {
        SectionKind::InputQuestion
    } else {
        SectionKind::ActionQuestion
    }
}

fn quoted_list<'a>(items: impl IntoIterator<Item = &'a str>) -> String {
    items.into_iter().map(|s| format!("\"{s}\"")).collect::<Vec<_>>().join(", ")
}

fn action_phrase(action: WidgetAction) -> &'static str {
    match action {
        WidgetAction::Click => "clicked",
        WidgetAction::Input => "input",
        WidgetAction::NonInteractive => "read",
    }
}

fn describe_widget(w: &WidgetInfo) -> String {
    let category = match &w.category {
        WidgetCategory::Other(_) if w.action == WidgetAction::Input => "EditText".to_string(),
        c => c.to_string(),
    };
    let mut out = format!("\"{}\" is {category} which can be {}", w.display_name, action_phrase(w.action));
    if !w.nearby.is_empty() {
        out.push_str(&format!(" and its nearby widget is \"{}\"", w.nearby_text()));
    }
    out
}

/// Pattern 1: app name and declared activities.
pub fn render_app_pattern(ctx: &GuiContext) -> String {
    format!(
        "We want to test \"{}\" App. It has the following activities, including {}.",
        ctx.app.app_name,
        quoted_list(ctx.app.activities.iter().map(String::as_str))
    )
}

/// Pattern 2: page overview with upper/lower positions.
pub fn render_page_pattern(page: &GuiPage, widgets: &[&WidgetInfo]) -> String {
    let keep = |names: &[String]| -> String {
        names
            .iter()
            .filter(|n| widgets.iter().any(|w| &w.display_name == *n))
            .map(String::as_str)
            .collect::<Vec<_>>()
            .join(", ")
    };
    format!(
        "The current page is \"{}\", it has {}. The upper part of the app is \"{}\", the lower part of the app is \"{}\".",
        page.activity_name,
        quoted_list(widgets.iter().map(|w| w.display_name.as_str())),
        keep(&page.upper),
        keep(&page.lower)
    )
}

/// Pattern 3: operable widgets with category, action and nearby text.
pub fn render_widget_pattern(widgets: &[&WidgetInfo]) -> String {
    let operable: Vec<&WidgetInfo> = widgets.iter().copied().filter(|w| w.is_interactive()).collect();
    if operable.is_empty() {
        return "There are no widgets which can be operated.".to_string();
    }
    format!(
        "The widgets which can be operated are {}. {}.",
        quoted_list(operable.iter().map(|w| w.display_name.as_str())),
        operable.iter().map(|w| describe_widget(w)).collect::<Vec<_>>().join(", ")
    )
}

/// The widgets a prompt shows: the `cap` least-visited ones (reading order
/// breaks ties), listed in reading order.
pub fn retained_widgets(page: &GuiPage, cap: usize, visits: impl Fn(&WidgetInfo) -> u32) -> Vec<&WidgetInfo> {
    let mut ranked: Vec<usize> = (0..page.widgets.len()).collect();
    ranked.sort_by_key(|&i| (visits(&page.widgets[i]), i));
    ranked.truncate(cap);
    ranked.sort_unstable();
    ranked.into_iter().map(|i| &page.widgets[i]).collect()
}

/// Renders the context section for one query kind.
pub fn render_gui_context(
    ctx: &GuiContext,
    kind: &QueryKind,
    seed_functions: &[String],
    widgets: &[&WidgetInfo],
    stall_hint: bool,
) -> Vec<Section> {
    let p2 = || render_page_pattern(&ctx.page, widgets);
    let p3 = render_widget_pattern(widgets);
    let section = match kind {
        QueryKind::Start => {
            let mut parts = vec![render_app_pattern(ctx)];
            if !seed_functions.is_empty() {
                parts.push(format!(
                    "The app may have these functions: {}.",
                    quoted_list(seed_functions.iter().map(String::as_str))
                ));
            }
            parts.push(p2());
            parts.push(p3);
            Section::new(SectionKind::StartContext, parts.join(" "))
        }
        QueryKind::Test => {
            let mut parts = vec![TEST_PREFIX.to_string(), p2(), p3];
            if stall_hint {
                parts.push(STALL_HINT.to_string());
            }
            Section::new(SectionKind::TestContext, parts.join(" "))
        }
        QueryKind::Feedback { failed_widget } => Section::new(
            SectionKind::FeedbackContext,
            format!("Sorry. {} {p3}", feedback_sentence(failed_widget)),
        ),
    };
    vec![section]
}

/// The testing-feedback question for a widget that is not on the page.
pub fn feedback_sentence(failed_widget: &str) -> String {
    format!("There is no \"{failed_widget}\" on the current page, please reselect.")
}

fn ordinal(n: usize) -> String {
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

fn render_step(label: usize, step: &StepRecord) -> String {
    let widgets = if step.page_widget_visits.is_empty() {
        "none".to_string()
    } else {
        step.page_widget_visits
            .iter()
            .map(|v| format!("\"Widget: {}, Visits:{}\"", v.widget_name, v.visits))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let outcome = match (step.result_kind, step.caused_transition) {
        (ResultKind::Crash, _) => "The following executive command crashed the app",
        (_, true) => "The following executive command achieve the page transition",
        (_, false) => "The following executive command kept the same page",
    };
    format!(
        "Latest {} step tested the \"{}\" page. The following widgets with visits time of this page have been tested: {widgets}. {outcome}: {}.",
        ordinal(label),
        step.activity_name,
        step.command.describe()
    )
}

fn with_header(header: &str, body: String) -> String {
    if body.is_empty() {
        header.to_string()
    } else {
        format!("{header} {body}")
    }
}

/// Renders the three memory sections. `k` bounds the recent-step window.
pub fn render_memory_prompt(mem: &Memorizer, k: usize) -> Vec<Section> {
    let functions = mem
        .functions
        .iter()
        .enumerate()
        .map(|(i, f)| format!("\"Function{}: {}. Visits: {}. Status: {}\"", i + 1, f.name, f.visits, f.status.label()))
        .collect::<Vec<_>>()
        .join(", ");
    let path = mem
        .activity_path
        .iter()
        .map(|e| format!("\"Activity: {}. Visits: {}\"", e.activity_name, e.visits))
        .collect::<Vec<_>>()
        .join(", ");
    let steps = mem.latest_steps(k);
    let history = steps
        .iter()
        .enumerate()
        .map(|(i, s)| render_step(steps.len() - i, s))
        .collect::<Vec<_>>()
        .join(" ");
    let dotted = |s: String| if s.is_empty() { s } else { s + "." };
    vec![
        Section::new(SectionKind::MemoryFunctions, with_header(FUNCTIONS_HEADER, dotted(functions))),
        Section::new(SectionKind::MemoryActivities, with_header(PATH_HEADER, dotted(path))),
        Section::new(SectionKind::MemoryRecentSteps, with_header(HISTORY_HEADER, history)),
    ]
}

/// The function question followed by the operation question `pattern`.
pub fn render_questions(pattern: SectionKind, demonstrations: bool) -> Vec<Section> {
    let (template, demo) = match pattern {
        SectionKind::InputQuestion => (INPUT_QUESTION, INPUT_DEMONSTRATION),
        _ => (ACTION_QUESTION, ACTION_DEMONSTRATION),
    };
    let kind = if pattern == SectionKind::InputQuestion { pattern } else { SectionKind::ActionQuestion };
    let text = if demonstrations { format!("{template}\n{demo}") } else { template.to_string() };
    vec![Section::new(SectionKind::FunctionQuestion, FUNCTION_QUESTION.to_string()), Section::new(kind, text)]
}

/// Per-query inputs that are not part of the GUI context or memory.
#[derive(Debug, Clone, Default)]
pub struct QueryOptions {
    pub stall_hint: bool,
}

/// Assembles the full prompt: context, memory, function question,
/// operation question.
///
/// Over budget, the oldest recent steps are dropped first, then widgets
/// are trimmed from the tail of the listing. Questions are never removed.
pub fn assemble_query(
    ctx: &GuiContext,
    mem: &Memorizer,
    kind: &QueryKind,
    config: &PromptConfig,
    options: &QueryOptions,
) -> Result<PromptDocument, PromptError> {
    let activity = &ctx.page.activity_name;
    let visits = |w: &WidgetInfo| mem.widget_visit_count(activity, &w.identity_key());
    let mut widgets = retained_widgets(&ctx.page, config.max_widgets, visits);
    let mut k = config.recent_steps.min(mem.steps.len());
    let questions = render_questions(select_question_pattern(&ctx.page), config.demonstrations);

    loop {
        let mut sections =
            render_gui_context(ctx, kind, &mem.seed_functions, &widgets, options.stall_hint);
        sections.extend(render_memory_prompt(mem, k));
        sections.extend(questions.iter().cloned());
        let doc = PromptDocument::new(sections);
        let estimated = doc.estimated_tokens();
        if estimated <= config.token_budget {
            return Ok(doc);
        }
        if k > 0 {
            k -= 1;
        } else if !widgets.is_empty() {
            widgets.pop();
        } else {
            return Err(PromptError::PromptTooLarge { estimated, budget: config.token_budget });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answer::{ExecutiveCommand, FunctionAnswer, FunctionStatus};
    use crate::device::ExecResult;
    use crate::gui::{AppInfo, Bounds};
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
            nearby: vec![],
            bounds: Bounds::new(0, y, 1080, y + 100),
        }
    }

    fn ctx(widgets: Vec<WidgetInfo>) -> GuiContext {
        let app = AppInfo::new("Money tracker", ["Main", "AddAccount", "Import", "Setting"].map(String::from)).unwrap();
        GuiContext::new(app, GuiPage::new("Main", widgets, 2000))
    }

    fn main_ctx() -> GuiContext {
        ctx(vec![
            widget("Welcome", WidgetCategory::TextView, 100),
            widget("Add", WidgetCategory::Button, 300),
            widget("Delete", WidgetCategory::Button, 1500),
        ])
    }

    #[test]
    fn question_selection() {
        assert_eq!(select_question_pattern(&main_ctx().page), SectionKind::ActionQuestion);
        let c = ctx(vec![widget("Price", WidgetCategory::EditText, 0)]);
        assert_eq!(select_question_pattern(&c.page), SectionKind::InputQuestion);
        assert_eq!(select_question_pattern(&GuiPage::new("E", vec![], 100)), SectionKind::ActionQuestion);
    }

    #[test]
    fn start_context_text() {
        let c = main_ctx();
        let ws: Vec<&WidgetInfo> = c.page.widgets.iter().collect();
        let s = &render_gui_context(&c, &QueryKind::Start, &[], &ws, false)[0];
        assert_eq!(
            s.text,
            "We want to test \"Money tracker\" App. It has the following activities, including \"Main\", \"AddAccount\", \"Import\", \"Setting\". \
The current page is \"Main\", it has \"Welcome\", \"Add\", \"Delete\". The upper part of the app is \"Welcome, Add\", the lower part of the app is \"Delete\". \
The widgets which can be operated are \"Add\", \"Delete\". \"Add\" is Button which can be clicked, \"Delete\" is Button which can be clicked."
        );
    }

    #[test]
    fn feedback_context_is_widget_block_only() {
        let c = main_ctx();
        let ws: Vec<&WidgetInfo> = c.page.widgets.iter().collect();
        let s = &render_gui_context(&c, &QueryKind::Feedback { failed_widget: "Exchange".into() }, &[], &ws, false)[0];
        assert!(s.text.starts_with("Sorry. There is no \"Exchange\" on the current page, please reselect. The widgets which can be operated are"));
        assert!(!s.text.contains("The current page is"));
    }

    #[test]
    fn memory_examples() {
        let mut mem = Memorizer::new();
        let secs = render_memory_prompt(&mem, 5);
        assert_eq!(secs.iter().map(|s| s.text.as_str()).collect::<Vec<_>>(), [FUNCTIONS_HEADER, PATH_HEADER, HISTORY_HEADER]);
        for (name, answers) in [("Add your income", 3), ("Delete information", 2)] {
            for _ in 0..answers {
                mem.update_function(&FunctionAnswer { function_name: name.into(), is_new_or_done: FunctionStatus::Yes });
            }
        }
        assert_eq!(
            render_memory_prompt(&mem, 5)[0].text,
            "List of tested functions: \"Function1: Add your income. Visits: 3. Status: Finished\", \"Function2: Delete information. Visits: 2. Status: Finished\"."
        );
    }

    #[test]
    fn ordinals() {
        let got: Vec<String> = [1, 2, 3, 4, 5, 11, 12, 13, 21, 22].into_iter().map(ordinal).collect();
        assert_eq!(got, ["1st", "2nd", "3rd", "4th", "5th", "11th", "12th", "13th", "21st", "22nd"]);
    }

    #[test]
    fn start_with_empty_memory_has_six_sections() {
        let doc = assemble_query(&main_ctx(), &Memorizer::new(), &QueryKind::Start, &PromptConfig::default(), &QueryOptions::default()).unwrap();
        assert_eq!(
            doc.kinds(),
            [
                SectionKind::StartContext,
                SectionKind::MemoryFunctions,
                SectionKind::MemoryActivities,
                SectionKind::MemoryRecentSteps,
                SectionKind::FunctionQuestion,
                SectionKind::ActionQuestion
            ]
        );
        assert!(doc.is_well_formed());
    }

    #[test]
    fn widget_cap_keeps_least_visited_in_reading_order() {
        let c = ctx((0..6).map(|i| widget(&format!("w{i}"), WidgetCategory::Button, i * 100)).collect());
        let visits = |w: &WidgetInfo| if w.display_name == "w1" || w.display_name == "w4" { 5 } else { 0 };
        let kept: Vec<_> = retained_widgets(&c.page, 4, visits).iter().map(|w| w.display_name.clone()).collect();
        assert_eq!(kept, ["w0", "w2", "w3", "w5"]);
    }

    fn populated(steps: usize) -> Memorizer {
        let mut mem = Memorizer::new();
        let page = main_ctx().page;
        for i in 0..steps {
            let act = if i % 3 == 0 { "Main" } else { "AddAccount" };
            mem.record_step(act, &ExecutiveCommand::click(if i % 2 == 0 { "Add" } else { "Delete" }), &ExecResult::NoEffect, &page);
        }
        mem
    }

    #[test]
    fn truncation_drops_steps_then_widgets_but_never_questions() {
        let mem = populated(9);
        let c = main_ctx();
        let full = assemble_query(&c, &mem, &QueryKind::Test, &PromptConfig::default(), &QueryOptions::default()).unwrap();
        assert_eq!(full.rendered.matches("Latest ").count(), 5);
        let tight = PromptConfig { token_budget: full.estimated_tokens() - 1, ..PromptConfig::default() };
        let doc = assemble_query(&c, &mem, &QueryKind::Test, &tight, &QueryOptions::default()).unwrap();
        assert_eq!(doc.rendered.matches("Latest ").count(), 4);
        assert!(doc.rendered.contains("\"Delete\""));

        let memless = assemble_query(&c, &mem, &QueryKind::Test, &PromptConfig { recent_steps: 0, ..PromptConfig::default() }, &QueryOptions::default()).unwrap();
        let tighter = PromptConfig { token_budget: memless.estimated_tokens() - 1, ..PromptConfig::default() };
        let doc = assemble_query(&c, &mem, &QueryKind::Test, &tighter, &QueryOptions::default()).unwrap();
        assert!(!doc.rendered.contains("Latest "));
        assert!(!doc.rendered.contains("\"Delete\""));
        assert!(doc.section(SectionKind::ActionQuestion).is_some());

        let impossible = PromptConfig { token_budget: 10, ..PromptConfig::default() };
        assert!(matches!(
            assemble_query(&c, &mem, &QueryKind::Test, &impossible, &QueryOptions::default()),
            Err(PromptError::PromptTooLarge { .. })
        ));
    }

    proptest! {
        #[test]
        fn documents_are_well_formed(steps in 0usize..20, edit in any::<bool>(), kind in 0u8..3, hint in any::<bool>()) {
            let mut ws = vec![widget("Add", WidgetCategory::Button, 0), widget("Delete", WidgetCategory::Button, 900)];
            if edit {
                ws.push(widget("Price", WidgetCategory::EditText, 1500));
            }
            let c = ctx(ws);
            let mem = populated(steps);
            let kind = match kind { 0 => QueryKind::Start, 1 => QueryKind::Test, _ => QueryKind::Feedback { failed_widget: "X".into() } };
            let doc = assemble_query(&c, &mem, &kind, &PromptConfig::default(), &QueryOptions { stall_hint: hint }).unwrap();
            prop_assert!(doc.is_well_formed());
            prop_assert_eq!(doc.section(SectionKind::InputQuestion).is_some(), edit);
            let window = doc.section(SectionKind::MemoryRecentSteps).unwrap().text.matches("Latest ").count();
            prop_assert_eq!(window, steps.min(5));
            let last = doc.sections.last().unwrap().kind;
            prop_assert!(last.is_operation_question());
        }
    }
}
