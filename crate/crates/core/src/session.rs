//! The exploration loop: extract context, prompt, parse, resolve, execute,
//! remember. Feedback and reformat retries happen inside a step; crashes
//! restart the app and keep the memory.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer::{
    match_widget_with, parse_action_answer, parse_function_answer, parse_input_answer, ActionCommand,
    ExecutiveCommand, FunctionAnswer, MatchMethod, Operation, ScrollDirection, IME_ENTER,
};
use crate::device::{Driver, ExecResult, ResultKind};
use crate::gui::{parse_view_hierarchy, AppInfo, GuiContext, GuiPage, WidgetAction, WidgetInfo};
use crate::llm::{frame_request, ChatBackend, LlmError, RequestSettings};
use crate::memory::{widget_key, Memorizer, DEFAULT_RECENT_STEPS};
use crate::prompt::{assemble_query, PromptConfig, QueryKind, QueryOptions};
use crate::tokenize::normalize_name;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Appended to the prompt when an answer did not follow the template.
pub const REFORMAT_NOTE: &str = "Your previous answer did not follow the output template. Answer only in the form: Function: \"<Function name>\". Status: <Yes/No>. Operation: \"<Operation>\". Widget: \"<Widget name>\". For text input give Widget: \"<Widget name>\". Input: \"<Input content>\". pairs before the operation.";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SessionError {
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
}

mod duration_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
        match d {
            Some(d) => s.serialize_some(&d.as_secs_f64()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        let secs: Option<f64> = Option::deserialize(d)?;
        secs.map(|s| Duration::try_from_secs_f64(s).map_err(serde::de::Error::custom)).transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub max_steps: usize,
    #[serde(with = "duration_secs")]
    pub max_wall_clock: Option<Duration>,
    pub k_recent: usize,
    pub max_feedback_retries: usize,
    pub max_reformat_retries: usize,
    pub seed: u64,
    pub prompt: PromptConfig,
    pub request: RequestSettings,
    /// Send earlier prompt/answer turns with every query.
    pub resend_history: bool,
    /// Consecutive steps without a page change before the stall hint.
    pub stall_threshold: usize,
    #[serde(with = "duration_secs")]
    pub rate_limit_pause: Option<Duration>,
    pub max_rate_limit_waits: usize,
    pub stop_on_full_coverage: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            max_steps: 200,
            max_wall_clock: Some(Duration::from_secs(3600)),
            k_recent: DEFAULT_RECENT_STEPS,
            max_feedback_retries: 3,
            max_reformat_retries: 1,
            seed: 0,
            prompt: PromptConfig::default(),
            request: RequestSettings::default(),
            resend_history: false,
            stall_threshold: 8,
            rate_limit_pause: Some(Duration::from_secs(5)),
            max_rate_limit_waits: 5,
            stop_on_full_coverage: true,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        if self.max_steps == 0 {
            return Err(SessionError::InvalidConfig("max_steps must be at least 1".into()));
        }
        if self.k_recent == 0 {
            return Err(SessionError::InvalidConfig("k_recent must be at least 1".into()));
        }
        if !(0.0..=2.0).contains(&self.request.temperature) {
            return Err(SessionError::InvalidConfig("temperature must be within [0, 2]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminationReason {
    StepBudget,
    TimeBudget,
    BackendExhausted,
    DriverGone,
    FullCoverage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugRecord {
    pub crash_message: String,
    pub activity: String,
    /// Final action of the crashing command, e.g. `Long press "Smart Plug"`.
    pub trigger: String,
    /// Every command executed since the last restart, the crashing one last.
    pub reproducing_command_sequence: Vec<ExecutiveCommand>,
    pub step_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub step: usize,
    pub activity_coverage: f64,
    pub activities_covered: usize,
    pub widgets_covered: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeKind {
    Start,
    Test,
    Feedback,
    Reformat,
}

/// One prompt/answer pair of a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub kind: ExchangeKind,
    pub prompt: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub schema_version: u32,
    pub step: usize,
    pub activity: String,
    /// All exchanges of the step in order; the last one produced the command
    /// unless `fallback` is set.
    pub exchanges: Vec<Exchange>,
    pub retries: usize,
    pub command: ExecutiveCommand,
    pub match_method: Option<MatchMethod>,
    pub fallback: bool,
    pub result: ResultKind,
    pub detail: Option<String>,
    pub next_activity: String,
    pub restarted: bool,
    pub coverage: f64,
    pub function: Option<FunctionAnswer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub schema_version: u32,
    pub app_name: String,
    pub declared_activities: Vec<String>,
    pub steps_executed: usize,
    pub activities_covered: Vec<String>,
    /// Visited activities that the manifest does not declare.
    pub discovered_activities: Vec<String>,
    /// `activity::widget-key` pairs that received at least one operation.
    pub widgets_covered: Vec<String>,
    pub activity_coverage: f64,
    pub bugs: Vec<BugRecord>,
    pub termination_reason: TerminationReason,
    pub coverage_series: Vec<CoveragePoint>,
    pub fallback_steps: usize,
    pub feedback_prompts: usize,
    pub backend_calls: usize,
    pub memory: Memorizer,
    #[serde(skip)]
    pub trace: Vec<TraceEntry>,
    #[serde(skip)]
    pub elapsed: Duration,
}

/// Fraction of declared activities that were visited.
pub fn compute_coverage(visited: &BTreeSet<String>, app: &AppInfo) -> f64 {
    if app.activities.is_empty() {
        return 0.0;
    }
    let hit = app.activities.iter().filter(|a| visited.contains(*a)).count();
    hit as f64 / app.activities.len() as f64
}

struct Decision {
    command: ExecutiveCommand,
    method: Option<MatchMethod>,
    fallback: bool,
    exchanges: Vec<Exchange>,
    function: Option<FunctionAnswer>,
}

enum Resolution {
    Resolved(ExecutiveCommand, MatchMethod),
    Missing(String),
}

fn resolve(command: &ExecutiveCommand, page: &GuiPage, visits: &dyn Fn(&WidgetInfo) -> u32) -> Resolution {
    let mut worst = MatchMethod::Exact;
    let mut one = |name: &str| -> Result<String, String> {
        if name == IME_ENTER {
            return Ok(name.to_string());
        }
        let m = match_widget_with(name, page, visits);
        match m.resolved {
            Some(w) => {
                worst = worst.max(m.method);
                Ok(w.display_name.clone())
            }
            None => Err(name.to_string()),
        }
    };
    let resolved = match command {
        ExecutiveCommand::Action(a) => {
            one(&a.widget_name).map(|w| ExecutiveCommand::Action(ActionCommand::new(a.operation, w)))
        }
        ExecutiveCommand::TextInput { entries, submit } => {
            let mut out = Vec::with_capacity(entries.len());
            let mut failed = None;
            for e in entries {
                match one(&e.widget_name) {
                    Ok(w) => out.push(crate::answer::InputEntry::new(w, e.content.clone())),
                    Err(n) => {
                        failed = Some(n);
                        break;
                    }
                }
            }
            match failed {
                Some(n) => Err(n),
                None => one(&submit.widget_name).map(|w| ExecutiveCommand::TextInput {
                    entries: out,
                    submit: ActionCommand::new(submit.operation, w),
                }),
            }
        }
    };
    match resolved {
        Ok(c) => Resolution::Resolved(c, worst),
        Err(n) => Resolution::Missing(n),
    }
}

/// Parses with the parser that fits the page first, then the other one.
fn parse_any(answer: &str, page: &GuiPage) -> Option<ExecutiveCommand> {
    let input = || parse_input_answer(answer, Some(page)).ok();
    let action = || parse_action_answer(answer).ok();
    if page.has_edit_text() {
        input().or_else(action)
    } else {
        action().or_else(input)
    }
}

struct Session<'a, D: Driver + ?Sized, B: ChatBackend + ?Sized> {
    driver: &'a mut D,
    backend: &'a B,
    config: &'a SessionConfig,
    mem: Memorizer,
    rng: ChaCha8Rng,
    history: Vec<(String, String)>,
    backend_calls: usize,
    feedback_prompts: usize,
}

enum Interrupt {
    BackendExhausted,
}

impl<D: Driver + ?Sized, B: ChatBackend + ?Sized> Session<'_, D, B> {
    fn ask(&mut self, prompt: String) -> Result<String, Interrupt> {
        let doc = crate::prompt::PromptDocument {
            sections: Vec::new(),
            rendered: prompt,
        };
        let history: &[(String, String)] = if self.config.resend_history { &self.history } else { &[] };
        let request = frame_request(&doc, history, &self.config.request);
        let mut waits = 0;
        loop {
            self.backend_calls += 1;
            match self.backend.chat(&request) {
                Ok(answer) => {
                    if self.config.resend_history {
                        self.history.push((doc.rendered.clone(), answer.clone()));
                    }
                    return Ok(answer);
                }
                Err(LlmError::RateLimited) if waits < self.config.max_rate_limit_waits => {
                    waits += 1;
                    if let Some(p) = self.config.rate_limit_pause {
                        std::thread::sleep(p);
                    }
                }
                Err(_) => return Err(Interrupt::BackendExhausted),
            }
        }
    }

    fn fallback(&mut self, page: &GuiPage) -> ExecutiveCommand {
        let visits = |w: &WidgetInfo| self.mem.widget_visit_count(&page.activity_name, &w.identity_key());
        let clickable: Vec<&WidgetInfo> = page.widgets.iter().filter(|w| w.action == WidgetAction::Click).collect();
        let pool: Vec<&WidgetInfo> = if clickable.is_empty() { page.interactive().collect() } else { clickable };
        let Some(least) = pool.iter().map(|w| visits(w)).min() else {
            let target = page.widgets.first().map_or(IME_ENTER.to_string(), |w| w.display_name.clone());
            return ExecutiveCommand::action(Operation::Scroll(ScrollDirection::Down), target);
        };
        let ties: Vec<&&WidgetInfo> = pool.iter().filter(|w| visits(w) == least).collect();
        let pick = ties.choose(&mut self.rng).expect("non-empty tie set");
        ExecutiveCommand::click(pick.display_name.clone())
    }

    fn decide(&mut self, ctx: &GuiContext, initial: QueryKind, stalled: bool) -> Result<Decision, Interrupt> {
        let mut kind = initial;
        let mut exchanges = Vec::new();
        let mut feedback_rounds = 0;
        let mut reformat_rounds = 0;
        let mut reformat = false;
        let mut function = None;
        let page = &ctx.page;

        loop {
            let options = QueryOptions { stall_hint: stalled && kind == QueryKind::Test };
            let prompt_cfg = PromptConfig { recent_steps: self.config.k_recent, ..self.config.prompt.clone() };
            let doc = match assemble_query(ctx, &self.mem, &kind, &prompt_cfg, &options) {
                Ok(doc) => doc,
                Err(_) => break,
            };
            let (exchange_kind, prompt) = if reformat {
                (ExchangeKind::Reformat, format!("{}\n{REFORMAT_NOTE}", doc.rendered))
            } else {
                let k = match kind {
                    QueryKind::Start => ExchangeKind::Start,
                    QueryKind::Test => ExchangeKind::Test,
                    QueryKind::Feedback { .. } => ExchangeKind::Feedback,
                };
                (k, doc.rendered)
            };
            if exchange_kind == ExchangeKind::Feedback {
                self.feedback_prompts += 1;
            }
            let answer = self.ask(prompt.clone())?;
            exchanges.push(Exchange { kind: exchange_kind, prompt, answer: answer.clone() });
            if let Ok(f) = parse_function_answer(&answer) {
                function = Some(f);
            }

            let Some(command) = parse_any(&answer, page) else {
                if reformat_rounds < self.config.max_reformat_retries {
                    reformat_rounds += 1;
                    reformat = true;
                    continue;
                }
                break;
            };
            reformat = false;
            let activity = page.activity_name.clone();
            let visits = |w: &WidgetInfo| self.mem.widget_visit_count(&activity, &w.identity_key());
            match resolve(&command, page, &visits) {
                Resolution::Resolved(command, method) => {
                    return Ok(Decision { command, method: Some(method), fallback: false, exchanges, function });
                }
                Resolution::Missing(name) => {
                    if feedback_rounds < self.config.max_feedback_retries {
                        feedback_rounds += 1;
                        kind = QueryKind::Feedback { failed_widget: name };
                        continue;
                    }
                    break;
                }
            }
        }
        let command = self.fallback(page);
        Ok(Decision { command, method: None, fallback: true, exchanges, function })
    }
}

fn full_coverage(
    app: &AppInfo,
    visited: &BTreeSet<String>,
    seen: &BTreeMap<String, BTreeSet<String>>,
    mem: &Memorizer,
) -> bool {
    app.activities.iter().all(|a| visited.contains(a))
        && seen.iter().all(|(act, keys)| keys.iter().all(|k| mem.widget_visit_count(act, k) > 0))
}

/// Runs one exploration session until a termination condition holds.
/// Device loss and backend exhaustion end the session with a report; only
/// an invalid configuration is an error.
pub fn run_session<D: Driver + ?Sized, B: ChatBackend + ?Sized>(
    driver: &mut D,
    backend: &B,
    app: &AppInfo,
    description: &str,
    config: &SessionConfig,
) -> Result<SessionReport, SessionError> {
    config.validate()?;
    let started = Instant::now();
    let mut session = Session {
        driver,
        backend,
        config,
        mem: Memorizer::new(),
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        history: Vec::new(),
        backend_calls: 0,
        feedback_prompts: 0,
    };
    session.mem.seed_function_list(description, &app.activities);

    let mut visited: BTreeSet<String> = BTreeSet::new();
    let mut discovered: BTreeSet<String> = BTreeSet::new();
    let mut widgets_covered: BTreeSet<String> = BTreeSet::new();
    let mut seen_interactive: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut bugs: Vec<BugRecord> = Vec::new();
    let mut bug_keys: BTreeSet<(String, String)> = BTreeSet::new();
    let mut trace: Vec<TraceEntry> = Vec::new();
    let mut series: Vec<CoveragePoint> = Vec::new();
    let mut since_restart: Vec<ExecutiveCommand> = Vec::new();
    let mut pending_feedback: Option<String> = None;
    let mut no_change_streak = 0usize;
    let mut fallback_steps = 0usize;
    let mut first_query = true;
    let mut step = 0usize;

    let observe = |page: &GuiPage,
                       visited: &mut BTreeSet<String>,
                       discovered: &mut BTreeSet<String>,
                       seen: &mut BTreeMap<String, BTreeSet<String>>| {
        if app.declares(&page.activity_name) {
            visited.insert(page.activity_name.clone());
        } else {
            discovered.insert(page.activity_name.clone());
        }
        let keys = seen.entry(page.activity_name.clone()).or_default();
        for w in page.interactive() {
            keys.insert(w.identity_key());
        }
    };

    let termination = if session.driver.restart().is_err() {
        TerminationReason::DriverGone
    } else {
        loop {
            if step >= config.max_steps {
                break TerminationReason::StepBudget;
            }
            if config.max_wall_clock.is_some_and(|limit| started.elapsed() >= limit) {
                break TerminationReason::TimeBudget;
            }
            let Ok((activity, xml)) = session.driver.current_page() else {
                break TerminationReason::DriverGone;
            };
            let Ok(page) = parse_view_hierarchy(&xml, &activity) else {
                break TerminationReason::DriverGone;
            };
            observe(&page, &mut visited, &mut discovered, &mut seen_interactive);
            if series.is_empty() {
                series.push(CoveragePoint {
                    step: 0,
                    activity_coverage: compute_coverage(&visited, app),
                    activities_covered: visited.len(),
                    widgets_covered: 0,
                });
                if config.stop_on_full_coverage && full_coverage(app, &visited, &seen_interactive, &session.mem) {
                    break TerminationReason::FullCoverage;
                }
            }

            let kind = match (first_query, pending_feedback.take()) {
                (true, _) => QueryKind::Start,
                (false, Some(w)) => QueryKind::Feedback { failed_widget: w },
                (false, None) => QueryKind::Test,
            };
            first_query = false;
            let ctx = GuiContext::new(app.clone(), page.clone());
            let stalled = no_change_streak >= config.stall_threshold;
            let Ok(decision) = session.decide(&ctx, kind, stalled) else {
                break TerminationReason::BackendExhausted;
            };

            let Ok(result) = session.driver.execute(&decision.command) else {
                break TerminationReason::DriverGone;
            };
            step += 1;
            since_restart.push(decision.command.clone());
            if decision.fallback {
                fallback_steps += 1;
            }

            let mut restarted = false;
            let mut detail = None;
            match &result {
                ExecResult::InvalidTarget(w) => {
                    pending_feedback = Some(w.clone());
                    detail = Some(w.clone());
                }
                other => {
                    session.mem.record_step(&activity, &decision.command, other, &page);
                    for name in decision.command.widget_names() {
                        widgets_covered.insert(format!("{activity}::{}", widget_key(&page, name)));
                    }
                    if let Some(f) = &decision.function {
                        session.mem.update_function(f);
                    }
                }
            }
            match &result {
                ExecResult::Ok(next) if next.activity_name != activity => no_change_streak = 0,
                _ => no_change_streak += 1,
            }
            if let ExecResult::Ok(next) = &result {
                observe(next, &mut visited, &mut discovered, &mut seen_interactive);
            }
            if let ExecResult::Crash(message) = &result {
                detail = Some(message.clone());
                let last = decision.command.final_action();
                let trigger = format!("{} \"{}\"", last.operation, last.widget_name);
                if bug_keys.insert((activity.clone(), format!("{}|{}", last.operation, normalize_name(&last.widget_name)))) {
                    bugs.push(BugRecord {
                        crash_message: message.clone(),
                        activity: activity.clone(),
                        trigger,
                        reproducing_command_sequence: since_restart.clone(),
                        step_index: step,
                    });
                }
                if session.driver.restart().is_err() {
                    break TerminationReason::DriverGone;
                }
                since_restart.clear();
                restarted = true;
            }

            let coverage = compute_coverage(&visited, app);
            let next_activity = match &result {
                ExecResult::Ok(next) => next.activity_name.clone(),
                ExecResult::Crash(_) => String::new(),
                _ => activity.clone(),
            };
            let Decision { command, method, fallback, exchanges, function } = decision;
            trace.push(TraceEntry {
                schema_version: REPORT_SCHEMA_VERSION,
                step,
                activity,
                retries: exchanges.len().saturating_sub(1),
                exchanges,
                command,
                match_method: method,
                fallback,
                result: result.kind(),
                detail,
                next_activity,
                restarted,
                coverage,
                function,
            });
            series.push(CoveragePoint {
                step,
                activity_coverage: coverage,
                activities_covered: visited.len(),
                widgets_covered: widgets_covered.len(),
            });
            if config.stop_on_full_coverage && full_coverage(app, &visited, &seen_interactive, &session.mem) {
                break TerminationReason::FullCoverage;
            }
        }
    };

    // crash entries have no successor page until the next observation
    let mut fill = String::new();
    for entry in trace.iter_mut().rev() {
        if entry.result == ResultKind::Crash {
            entry.next_activity = if fill.is_empty() { entry.activity.clone() } else { fill.clone() };
        }
        fill = entry.activity.clone();
    }

    Ok(SessionReport {
        schema_version: REPORT_SCHEMA_VERSION,
        app_name: app.app_name.clone(),
        declared_activities: app.activities.clone(),
        steps_executed: step,
        activity_coverage: compute_coverage(&visited, app),
        activities_covered: visited.into_iter().collect(),
        discovered_activities: discovered.into_iter().collect(),
        widgets_covered: widgets_covered.into_iter().collect(),
        bugs,
        termination_reason: termination,
        coverage_series: series,
        fallback_steps,
        feedback_prompts: session.feedback_prompts,
        backend_calls: session.backend_calls,
        memory: session.mem,
        trace,
        elapsed: started.elapsed(),
    })
}
