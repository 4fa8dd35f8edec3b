//! Declarative synthetic apps: pages of widget templates, guarded
//! transitions, crash rules and integer counters.
//!
//! Models are JSON documents with `schema_version: 1`. Loading is eager:
//! every reference (page, widget, counter, environment key) is checked
//! before a model is handed out.

use std::collections::{BTreeMap, BTreeSet};

use regex::Regex;
use serde::Deserialize;
use thiserror::Error;

use crate::answer::{Operation, ScrollDirection, IME_ENTER};
use crate::gui::{AppInfo, WidgetCategory};
use crate::tokenize::normalize_name;

pub const SCHEMA_VERSION: u32 = 1;

/// Page height used when a template does not give one.
pub const DEFAULT_PAGE_HEIGHT: i32 = 1920;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("dangling reference at {path}: {message}")]
    DanglingReference { path: String, message: String },
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::SchemaViolation { path: path.into(), message: message.into() }
}

fn dangling(path: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::DanglingReference { path: path.into(), message: message.into() }
}

// ---------------------------------------------------------------------------
// Raw document

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    schema_version: u32,
    app: RawApp,
    #[serde(default)]
    description: String,
    start_page: String,
    pages: BTreeMap<String, RawPage>,
    #[serde(default)]
    transitions: Vec<RawTransition>,
    #[serde(default)]
    crash_rules: Vec<RawCrash>,
    #[serde(default)]
    counters: BTreeMap<String, i64>,
    #[serde(default)]
    environment: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawApp {
    app_name: String,
    activities: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPage {
    #[serde(default)]
    height: Option<i32>,
    widgets: Vec<RawWidget>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWidget {
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    hint: Option<String>,
    #[serde(default)]
    id: Option<String>,
    #[serde(default = "default_class")]
    class: String,
    #[serde(default)]
    clickable: Option<bool>,
    #[serde(default)]
    group: Option<String>,
    #[serde(default)]
    hidden_until_scroll: bool,
    #[serde(default)]
    visible_if: Option<RawGuard>,
}

fn default_class() -> String {
    "Button".to_string()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrigger {
    op: TriggerOp,
    widget: String,
    #[serde(default)]
    direction: Option<ScrollDirection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransition {
    from: String,
    trigger: RawTrigger,
    #[serde(default)]
    guard: Option<RawGuard>,
    #[serde(default)]
    to: Option<String>,
    #[serde(default)]
    effects: Vec<CounterEffect>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCrash {
    page: String,
    trigger: RawTrigger,
    #[serde(default)]
    guard: Option<RawGuard>,
    message: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum RawGuard {
    NonEmpty(String),
    Numeric(String),
    Regex { field: String, pattern: String },
    InSet { field: String, values: Vec<String> },
    FieldsEqual(String, String),
    CounterAtLeast { counter: String, value: i64 },
    CounterAtMost { counter: String, value: i64 },
    CounterEquals { counter: String, value: i64 },
    EnvEquals { key: String, value: String },
    All(Vec<RawGuard>),
    Any(Vec<RawGuard>),
    Not(Box<RawGuard>),
}

// ---------------------------------------------------------------------------
// Validated model

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerOp {
    Click,
    DoubleClick,
    LongPress,
    Scroll,
    Any,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trigger {
    pub op: TriggerOp,
    /// Normalized widget display name.
    pub widget: String,
    pub direction: Option<ScrollDirection>,
}

impl Trigger {
    pub fn matches(&self, operation: Operation, widget: &str) -> bool {
        let op_ok = match (self.op, operation) {
            (TriggerOp::Any, _) => true,
            (TriggerOp::Click, Operation::Click)
            | (TriggerOp::DoubleClick, Operation::DoubleClick)
            | (TriggerOp::LongPress, Operation::LongPress) => true,
            (TriggerOp::Scroll, Operation::Scroll(d)) => self.direction.is_none_or(|want| want == d),
            _ => false,
        };
        op_ok && self.widget == normalize_name(widget)
    }
}

/// Declarative predicate over the current input fields, counters and
/// environment. Field names are normalized widget display names.
#[derive(Debug, Clone)]
pub enum Guard {
    NonEmpty(String),
    Numeric(String),
    Regex { field: String, pattern: Regex },
    InSet { field: String, values: Vec<String> },
    /// Both fields are non-empty and equal.
    FieldsEqual(String, String),
    CounterAtLeast { counter: String, value: i64 },
    CounterAtMost { counter: String, value: i64 },
    CounterEquals { counter: String, value: i64 },
    EnvEquals { key: String, value: String },
    All(Vec<Guard>),
    Any(Vec<Guard>),
    Not(Box<Guard>),
}

/// Read-only view the guards are evaluated against.
pub struct GuardScope<'a> {
    pub fields: &'a BTreeMap<String, String>,
    pub counters: &'a BTreeMap<String, i64>,
    pub environment: &'a BTreeMap<String, String>,
}

impl Guard {
    pub fn holds(&self, scope: &GuardScope) -> bool {
        let field = |name: &str| scope.fields.get(name).map(String::as_str).unwrap_or("");
        let counter = |name: &str| scope.counters.get(name).copied().unwrap_or(0);
        match self {
            Guard::NonEmpty(f) => !field(f).trim().is_empty(),
            Guard::Numeric(f) => {
                let v = field(f).trim();
                !v.is_empty() && v.parse::<f64>().is_ok_and(f64::is_finite)
            }
            Guard::Regex { field: f, pattern } => pattern.is_match(field(f)),
            Guard::InSet { field: f, values } => values.iter().any(|v| v == field(f).trim()),
            Guard::FieldsEqual(a, b) => !field(a).is_empty() && field(a) == field(b),
            Guard::CounterAtLeast { counter: c, value } => counter(c) >= *value,
            Guard::CounterAtMost { counter: c, value } => counter(c) <= *value,
            Guard::CounterEquals { counter: c, value } => counter(c) == *value,
            Guard::EnvEquals { key, value } => scope.environment.get(key) == Some(value),
            Guard::All(gs) => gs.iter().all(|g| g.holds(scope)),
            Guard::Any(gs) => gs.iter().any(|g| g.holds(scope)),
            Guard::Not(g) => !g.holds(scope),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterEffect {
    pub counter: String,
    #[serde(default)]
    pub add: Option<i64>,
    #[serde(default)]
    pub set: Option<i64>,
}

impl CounterEffect {
    pub fn apply(&self, counters: &mut BTreeMap<String, i64>) {
        let slot = counters.entry(self.counter.clone()).or_insert(0);
        if let Some(v) = self.set {
            *slot = v;
        }
        if let Some(d) = self.add {
            *slot = slot.saturating_add(d);
        }
    }
}

#[derive(Debug, Clone)]
pub struct WidgetTemplate {
    pub text: Option<String>,
    pub hint: Option<String>,
    pub id: Option<String>,
    /// Fully qualified Android class name.
    pub class: String,
    pub clickable: bool,
    pub group: Option<String>,
    pub hidden_until_scroll: bool,
    pub visible_if: Option<Guard>,
}

impl WidgetTemplate {
    /// Name the hierarchy parser will give this widget.
    pub fn display_name(&self) -> Option<&str> {
        self.text.as_deref().or(self.hint.as_deref()).or(self.id.as_deref())
    }

    pub fn is_edit_text(&self) -> bool {
        WidgetCategory::from_class(&self.class) == WidgetCategory::EditText
    }

    pub fn is_interactive(&self) -> bool {
        self.clickable || self.is_edit_text()
    }
}

#[derive(Debug, Clone)]
pub struct PageTemplate {
    pub height: i32,
    pub widgets: Vec<WidgetTemplate>,
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub from: String,
    pub trigger: Trigger,
    pub guard: Option<Guard>,
    /// `None` keeps the current page (state-only transition).
    pub to: Option<String>,
    pub effects: Vec<CounterEffect>,
}

#[derive(Debug, Clone)]
pub struct CrashRule {
    pub page: String,
    pub trigger: Trigger,
    pub guard: Option<Guard>,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct AppModel {
    pub app_info: AppInfo,
    pub description: String,
    pub start_page: String,
    pub pages: BTreeMap<String, PageTemplate>,
    pub transitions: Vec<Transition>,
    pub crash_rules: Vec<CrashRule>,
    pub counters: BTreeMap<String, i64>,
    pub environment: BTreeMap<String, String>,
}

impl AppModel {
    /// Pages reachable from the start page along transitions, ignoring
    /// guards. Every page the simulator can serve is in this set.
    pub fn reachable_pages(&self) -> BTreeSet<String> {
        let mut seen = BTreeSet::from([self.start_page.clone()]);
        let mut frontier = vec![self.start_page.clone()];
        while let Some(page) = frontier.pop() {
            for t in self.transitions.iter().filter(|t| t.from == page) {
                if let Some(to) = &t.to {
                    if seen.insert(to.clone()) {
                        frontier.push(to.clone());
                    }
                }
            }
        }
        seen
    }
}

fn qualify_class(class: &str) -> String {
    let class = class.trim();
    if class.contains('.') {
        class.to_string()
    } else {
        format!("android.widget.{class}")
    }
}

fn non_blank(s: Option<String>) -> Option<String> {
    s.map(|s| s.trim().to_string()).filter(|s| !s.is_empty())
}

struct Checker<'a> {
    pages: &'a BTreeMap<String, RawPage>,
    counters: &'a BTreeMap<String, i64>,
    environment: &'a BTreeMap<String, String>,
}

impl Checker<'_> {
    fn page_has_widget(&self, page: &str, name: &str) -> bool {
        let norm = normalize_name(name);
        self.pages[page].widgets.iter().any(|w| {
            let display = non_blank(w.text.clone()).or(non_blank(w.hint.clone())).or(non_blank(w.id.clone()));
            display.is_some_and(|d| normalize_name(&d) == norm)
        })
    }

    fn page(&self, path: &str, name: &str) -> Result<(), ModelError> {
        if self.pages.contains_key(name) {
            Ok(())
        } else {
            Err(dangling(path, format!("unknown page {name:?}")))
        }
    }

    fn trigger(&self, path: &str, page: &str, raw: &RawTrigger) -> Result<Trigger, ModelError> {
        if raw.direction.is_some() && raw.op != TriggerOp::Scroll {
            return Err(schema(format!("{path}.direction"), "direction is only valid for scroll"));
        }
        if raw.widget != IME_ENTER && !self.page_has_widget(page, &raw.widget) {
            return Err(dangling(format!("{path}.widget"), format!("no widget {:?} on page {page:?}", raw.widget)));
        }
        Ok(Trigger { op: raw.op, widget: normalize_name(&raw.widget), direction: raw.direction })
    }

    fn guard(&self, path: &str, page: &str, raw: &RawGuard) -> Result<Guard, ModelError> {
        let field = |f: &String| -> Result<String, ModelError> {
            if self.page_has_widget(page, f) {
                Ok(normalize_name(f))
            } else {
                Err(dangling(path, format!("no input field {f:?} on page {page:?}")))
            }
        };
        let counter = |c: &String| -> Result<String, ModelError> {
            if self.counters.contains_key(c) {
                Ok(c.clone())
            } else {
                Err(dangling(path, format!("undeclared counter {c:?}")))
            }
        };
        let list = |gs: &[RawGuard]| -> Result<Vec<Guard>, ModelError> {
            gs.iter().enumerate().map(|(i, g)| self.guard(&format!("{path}[{i}]"), page, g)).collect()
        };
        Ok(match raw {
            RawGuard::NonEmpty(f) => Guard::NonEmpty(field(f)?),
            RawGuard::Numeric(f) => Guard::Numeric(field(f)?),
            RawGuard::Regex { field: f, pattern } => Guard::Regex {
                field: field(f)?,
                pattern: Regex::new(pattern).map_err(|e| schema(format!("{path}.pattern"), e.to_string()))?,
            },
            RawGuard::InSet { field: f, values } => Guard::InSet { field: field(f)?, values: values.clone() },
            RawGuard::FieldsEqual(a, b) => Guard::FieldsEqual(field(a)?, field(b)?),
            RawGuard::CounterAtLeast { counter: c, value } => Guard::CounterAtLeast { counter: counter(c)?, value: *value },
            RawGuard::CounterAtMost { counter: c, value } => Guard::CounterAtMost { counter: counter(c)?, value: *value },
            RawGuard::CounterEquals { counter: c, value } => Guard::CounterEquals { counter: counter(c)?, value: *value },
            RawGuard::EnvEquals { key, value } => {
                if !self.environment.contains_key(key) {
                    return Err(dangling(path, format!("undeclared environment key {key:?}")));
                }
                Guard::EnvEquals { key: key.clone(), value: value.clone() }
            }
            RawGuard::All(gs) => Guard::All(list(gs)?),
            RawGuard::Any(gs) => Guard::Any(list(gs)?),
            RawGuard::Not(g) => Guard::Not(Box::new(self.guard(path, page, g)?)),
        })
    }

    fn effects(&self, path: &str, effects: &[CounterEffect]) -> Result<(), ModelError> {
        for (i, e) in effects.iter().enumerate() {
            let p = format!("{path}.effects[{i}]");
            if !self.counters.contains_key(&e.counter) {
                return Err(dangling(p, format!("undeclared counter {:?}", e.counter)));
            }
            if e.add.is_some() == e.set.is_some() {
                return Err(schema(p, "exactly one of add/set is required"));
            }
        }
        Ok(())
    }
}

/// Parses and validates an app-model document.
pub fn load_app_model(document: &str) -> Result<AppModel, ModelError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let raw: RawModel = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        schema(if path.is_empty() { "$".to_string() } else { path }, e.into_inner().to_string())
    })?;

    if raw.schema_version != SCHEMA_VERSION {
        return Err(schema("schema_version", format!("unsupported version {}", raw.schema_version)));
    }
    let app_info = AppInfo::new(&raw.app.app_name, raw.app.activities.iter().cloned())
        .map_err(|e| schema("app", e.to_string()))?;
    if !raw.pages.contains_key(&raw.start_page) {
        return Err(schema("start_page", format!("{:?} is not a page", raw.start_page)));
    }

    let checker = Checker { pages: &raw.pages, counters: &raw.counters, environment: &raw.environment };

    let mut pages = BTreeMap::new();
    for (name, page) in &raw.pages {
        let height = page.height.unwrap_or(DEFAULT_PAGE_HEIGHT);
        if height < 400 {
            return Err(schema(format!("pages.{name}.height"), "page height must be at least 400"));
        }
        let mut widgets = Vec::new();
        for (i, w) in page.widgets.iter().enumerate() {
            let path = format!("pages.{name}.widgets[{i}]");
            let class = qualify_class(&w.class);
            let category = WidgetCategory::from_class(&class);
            let template = WidgetTemplate {
                text: non_blank(w.text.clone()),
                hint: non_blank(w.hint.clone()),
                id: non_blank(w.id.clone()),
                clickable: w.clickable.unwrap_or(!matches!(category, WidgetCategory::TextView | WidgetCategory::ImageView)),
                class,
                group: w.group.clone(),
                hidden_until_scroll: w.hidden_until_scroll,
                visible_if: w.visible_if.as_ref().map(|g| checker.guard(&format!("{path}.visible_if"), name, g)).transpose()?,
            };
            if template.display_name().is_none() {
                return Err(schema(path, "widget needs text, hint or id"));
            }
            widgets.push(template);
        }
        if widgets.is_empty() {
            return Err(schema(format!("pages.{name}.widgets"), "page has no widgets"));
        }
        pages.insert(name.clone(), PageTemplate { height, widgets });
    }

    let mut transitions = Vec::new();
    for (i, t) in raw.transitions.iter().enumerate() {
        let path = format!("transitions[{i}]");
        checker.page(&format!("{path}.from"), &t.from)?;
        if let Some(to) = &t.to {
            checker.page(&format!("{path}.to"), to)?;
        }
        checker.effects(&path, &t.effects)?;
        transitions.push(Transition {
            from: t.from.clone(),
            trigger: checker.trigger(&format!("{path}.trigger"), &t.from, &t.trigger)?,
            guard: t.guard.as_ref().map(|g| checker.guard(&format!("{path}.guard"), &t.from, g)).transpose()?,
            to: t.to.clone(),
            effects: t.effects.clone(),
        });
    }

    let mut crash_rules = Vec::new();
    for (i, c) in raw.crash_rules.iter().enumerate() {
        let path = format!("crash_rules[{i}]");
        checker.page(&format!("{path}.page"), &c.page)?;
        if c.message.trim().is_empty() {
            return Err(schema(format!("{path}.message"), "crash message must be non-empty"));
        }
        crash_rules.push(CrashRule {
            page: c.page.clone(),
            trigger: checker.trigger(&format!("{path}.trigger"), &c.page, &c.trigger)?,
            guard: c.guard.as_ref().map(|g| checker.guard(&format!("{path}.guard"), &c.page, g)).transpose()?,
            message: c.message.clone(),
        });
    }

    Ok(AppModel {
        app_info,
        description: raw.description,
        start_page: raw.start_page,
        pages,
        transitions,
        crash_rules,
        counters: raw.counters,
        environment: raw.environment,
    })
}
