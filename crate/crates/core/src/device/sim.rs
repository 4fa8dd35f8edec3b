//! Deterministic simulator over an [`AppModel`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use super::model::{AppModel, GuardScope, WidgetTemplate};
use super::{DeviceError, Driver, ExecResult};
use crate::answer::{ActionCommand, ExecutiveCommand, Operation, IME_ENTER};
use crate::gui::{parse_view_hierarchy, GuiPage};
use crate::tokenize::normalize_name;

const SCREEN_WIDTH: i32 = 1080;
const FIRST_ROW_TOP: i32 = 160;
const MAX_ROW_HEIGHT: i32 = 160;

/// Executes commands against an app model.
///
/// Order of evaluation for an action on the current page:
/// 1. the target must be a visible widget (or the enter key), else `InvalidTarget`;
/// 2. the first crash rule whose trigger and guard match wins and resets the app;
/// 3. otherwise the first matching transition fires, clearing input fields;
/// 4. otherwise a scroll reveals `hidden_until_scroll` widgets;
/// 5. otherwise `NoEffect`.
#[derive(Debug, Clone)]
pub struct Simulator {
    model: Arc<AppModel>,
    page: String,
    counters: BTreeMap<String, i64>,
    fields: BTreeMap<String, String>,
    revealed: bool,
}

fn escape_attr(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\n' => out.push_str("&#10;"),
            c => out.push(c),
        }
    }
    out
}

fn package_of(app_name: &str) -> String {
    let slug: String = app_name.chars().filter(char::is_ascii_alphanumeric).collect::<String>().to_lowercase();
    format!("com.example.{}", if slug.is_empty() { "app" } else { &slug })
}

impl Simulator {
    pub fn new(model: Arc<AppModel>) -> Self {
        let mut sim = Self {
            page: model.start_page.clone(),
            counters: model.counters.clone(),
            fields: BTreeMap::new(),
            revealed: false,
            model,
        };
        sim.reset();
        sim
    }

    pub fn model(&self) -> &AppModel {
        &self.model
    }

    pub fn activity(&self) -> &str {
        &self.page
    }

    pub fn counters(&self) -> &BTreeMap<String, i64> {
        &self.counters
    }

    /// Typed field values keyed by normalized field name.
    pub fn fields(&self) -> &BTreeMap<String, String> {
        &self.fields
    }

    fn reset(&mut self) {
        self.page = self.model.start_page.clone();
        self.counters = self.model.counters.clone();
        self.fields.clear();
        self.revealed = false;
    }

    fn scope(&self) -> GuardScope<'_> {
        GuardScope { fields: &self.fields, counters: &self.counters, environment: &self.model.environment }
    }

    fn visible_widgets(&self) -> Vec<&WidgetTemplate> {
        let scope = self.scope();
        self.model.pages[&self.page]
            .widgets
            .iter()
            .filter(|w| !w.hidden_until_scroll || self.revealed)
            .filter(|w| w.visible_if.as_ref().is_none_or(|g| g.holds(&scope)))
            .collect()
    }

    fn find_visible(&self, name: &str) -> Option<&WidgetTemplate> {
        let norm = normalize_name(name);
        self.visible_widgets()
            .into_iter()
            .find(|w| w.display_name().is_some_and(|d| normalize_name(d) == norm))
    }

    /// Renders the current page as a view-hierarchy dump. Ungrouped widgets
    /// take one row each; consecutive widgets sharing a group share a row
    /// inside a container node.
    pub fn render_hierarchy(&self) -> String {
        let height = self.model.pages[&self.page].height;
        let package = package_of(&self.model.app_info.app_name);

        let mut rows: Vec<Vec<&WidgetTemplate>> = Vec::new();
        for w in self.visible_widgets() {
            match rows.last_mut() {
                Some(row) if w.group.is_some() && row[0].group == w.group => row.push(w),
                _ => rows.push(vec![w]),
            }
        }
        let row_height = if rows.is_empty() {
            MAX_ROW_HEIGHT
        } else {
            MAX_ROW_HEIGHT.min((height - FIRST_ROW_TOP) / rows.len() as i32)
        };

        let mut xml = String::new();
        let _ = write!(
            xml,
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<hierarchy rotation=\"0\" height=\"{height}\">\n  <node index=\"0\" text=\"\" resource-id=\"\" class=\"android.widget.FrameLayout\" clickable=\"false\" bounds=\"[0,0][{SCREEN_WIDTH},{height}]\">\n"
        );
        for (r, row) in rows.iter().enumerate() {
            let top = FIRST_ROW_TOP + r as i32 * row_height;
            let bottom = top + row_height;
            let grouped = row[0].group.is_some();
            let indent = if grouped { "      " } else { "    " };
            if grouped {
                let _ = writeln!(
                    xml,
                    "    <node index=\"{r}\" text=\"\" resource-id=\"\" class=\"android.widget.LinearLayout\" clickable=\"false\" bounds=\"[0,{top}][{SCREEN_WIDTH},{bottom}]\">"
                );
            }
            let cell = SCREEN_WIDTH / row.len() as i32;
            for (c, w) in row.iter().enumerate() {
                let left = c as i32 * cell;
                let right = if c + 1 == row.len() { SCREEN_WIDTH } else { left + cell };
                let id = w.id.as_ref().map(|id| format!("{package}:id/{id}")).unwrap_or_default();
                let index = if grouped { c } else { r };
                let _ = writeln!(
                    xml,
                    "{indent}<node index=\"{index}\" text=\"{}\" hint-text=\"{}\" resource-id=\"{}\" class=\"{}\" clickable=\"{}\" bounds=\"[{left},{top}][{right},{bottom}]\"/>",
                    escape_attr(w.text.as_deref().unwrap_or("")),
                    escape_attr(w.hint.as_deref().unwrap_or("")),
                    escape_attr(&id),
                    escape_attr(&w.class),
                    w.clickable,
                );
            }
            if grouped {
                xml.push_str("    </node>\n");
            }
        }
        xml.push_str("  </node>\n</hierarchy>\n");
        xml
    }

    /// The current page as the GUI model sees it.
    pub fn gui_page(&self) -> GuiPage {
        parse_view_hierarchy(&self.render_hierarchy(), &self.page)
            .expect("simulator pages always render to a non-empty, well-formed hierarchy")
    }

    fn perform(&mut self, action: &ActionCommand) -> ExecResult {
        let name = action.widget_name.as_str();
        if name != IME_ENTER && self.find_visible(name).is_none() {
            return ExecResult::InvalidTarget(name.to_string());
        }
        let op = action.operation;
        let model = Arc::clone(&self.model);

        let crash = model.crash_rules.iter().find(|c| {
            c.page == self.page
                && c.trigger.matches(op, name)
                && c.guard.as_ref().is_none_or(|g| g.holds(&self.scope()))
        });
        if let Some(rule) = crash {
            self.reset();
            return ExecResult::Crash(rule.message.clone());
        }

        let transition = model.transitions.iter().find(|t| {
            t.from == self.page
                && t.trigger.matches(op, name)
                && t.guard.as_ref().is_none_or(|g| g.holds(&self.scope()))
        });
        if let Some(t) = transition {
            for e in &t.effects {
                e.apply(&mut self.counters);
            }
            if let Some(to) = &t.to {
                self.page = to.clone();
            }
            self.fields.clear();
            self.revealed = false;
            return ExecResult::Ok(self.gui_page());
        }

        let has_hidden = model.pages[&self.page].widgets.iter().any(|w| w.hidden_until_scroll);
        if matches!(op, Operation::Scroll(_)) && has_hidden && !self.revealed {
            self.revealed = true;
            return ExecResult::Ok(self.gui_page());
        }
        ExecResult::NoEffect
    }

    /// Executes a command. Infallible; the `Driver` impl wraps it.
    pub fn step(&mut self, command: &ExecutiveCommand) -> ExecResult {
        match command {
            ExecutiveCommand::Action(a) => self.perform(a),
            ExecutiveCommand::TextInput { entries, submit } => {
                let mut keys = Vec::with_capacity(entries.len());
                for e in entries {
                    match self.find_visible(&e.widget_name) {
                        Some(w) if w.is_edit_text() => keys.push(normalize_name(w.display_name().unwrap_or(""))),
                        _ => return ExecResult::InvalidTarget(e.widget_name.clone()),
                    }
                }
                for (key, e) in keys.into_iter().zip(entries) {
                    self.fields.insert(key, e.content.clone());
                }
                self.perform(submit)
            }
        }
    }
}

impl Driver for Simulator {
    fn current_page(&mut self) -> Result<(String, String), DeviceError> {
        Ok((self.page.clone(), self.render_hierarchy()))
    }

    fn execute(&mut self, command: &ExecutiveCommand) -> Result<ExecResult, DeviceError> {
        Ok(self.step(command))
    }

    fn restart(&mut self) -> Result<(), DeviceError> {
        self.reset();
        Ok(())
    }
}
