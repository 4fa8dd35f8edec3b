//! Testing sequence memorizer: the cumulative record of tested functions,
//! the merged activity path, per-page widget visit counts and the step log.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::answer::{ExecutiveCommand, FunctionAnswer, FunctionStatus};
use crate::device::{ExecResult, ResultKind};
use crate::gui::GuiPage;
use crate::tokenize::{humanize_identifier, normalize_name};

/// Number of latest steps rendered into the memory prompt.
pub const DEFAULT_RECENT_STEPS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WidgetVisit {
    pub widget_name: String,
    pub visits: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub activity_name: String,
    /// Visited widgets of the page right after this step, in reading order.
    pub page_widget_visits: Vec<WidgetVisit>,
    pub command: ExecutiveCommand,
    pub result_kind: ResultKind,
    pub caused_transition: bool,
    /// Identity keys credited with a visit by this step.
    pub targets: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FunctionState {
    Testing,
    Finished,
}

impl FunctionState {
    pub fn label(self) -> &'static str {
        match self {
            FunctionState::Testing => "Testing",
            FunctionState::Finished => "Finished",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionRecord {
    pub name: String,
    pub visits: u32,
    pub status: FunctionState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityPathEntry {
    pub activity_name: String,
    /// Cumulative visits of the activity at the time this entry last grew.
    pub visits: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Memorizer {
    pub functions: Vec<FunctionRecord>,
    pub activity_path: Vec<ActivityPathEntry>,
    pub activity_visits: BTreeMap<String, u32>,
    /// activity -> widget identity key -> visits
    pub widget_visits: BTreeMap<String, BTreeMap<String, u32>>,
    pub steps: Vec<StepRecord>,
    pub seed_functions: Vec<String>,
}

/// Identity key of the widget a command names on `page`: the matching
/// widget's key, or the normalized name when it is not on the page.
pub fn widget_key(page: &GuiPage, name: &str) -> String {
    let norm = normalize_name(name);
    page.find(name)
        .or_else(|| page.widgets.iter().find(|w| normalize_name(&w.display_name) == norm))
        .map_or(norm, |w| w.identity_key())
}

impl Memorizer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn widget_visit_count(&self, activity: &str, key: &str) -> u32 {
        self.widget_visits.get(activity).and_then(|m| m.get(key)).copied().unwrap_or(0)
    }

    /// Records an executed command. `page` is the page the command ran on.
    /// Commands rejected with `InvalidTarget` are not recorded.
    pub fn record_step(&mut self, activity: &str, command: &ExecutiveCommand, result: &ExecResult, page: &GuiPage) {
        let result_kind = result.kind();
        if result_kind == ResultKind::InvalidTarget {
            return;
        }

        let targets: Vec<String> = command.widget_names().into_iter().map(|n| widget_key(page, n)).collect();
        let per_page = self.widget_visits.entry(activity.to_string()).or_default();
        for key in &targets {
            *per_page.entry(key.clone()).or_insert(0) += 1;
        }

        let mut seen = Vec::new();
        let page_widget_visits = page
            .widgets
            .iter()
            .filter_map(|w| {
                let key = w.identity_key();
                let visits = per_page.get(&key).copied().unwrap_or(0);
                if visits == 0 || seen.contains(&key) {
                    return None;
                }
                seen.push(key);
                Some(WidgetVisit { widget_name: w.display_name.clone(), visits })
            })
            .collect();

        let total = self.activity_visits.entry(activity.to_string()).or_insert(0);
        *total += 1;
        let total = *total;
        match self.activity_path.last_mut() {
            Some(last) if last.activity_name == activity => last.visits = total,
            _ => self.activity_path.push(ActivityPathEntry { activity_name: activity.to_string(), visits: total }),
        }

        let caused_transition = matches!(result, ExecResult::Ok(next) if next.activity_name != activity);
        let index = self.steps.last().map_or(1, |s| s.index + 1);
        self.steps.push(StepRecord {
            index,
            activity_name: activity.to_string(),
            page_widget_visits,
            command: command.clone(),
            result_kind,
            caused_transition,
            targets,
        });
    }

    /// Upserts a function by normalized name and counts the visit.
    pub fn update_function(&mut self, answer: &FunctionAnswer) {
        let status = match answer.is_new_or_done {
            FunctionStatus::Yes => FunctionState::Finished,
            FunctionStatus::No => FunctionState::Testing,
        };
        let key = normalize_name(&answer.function_name);
        match self.functions.iter_mut().find(|f| normalize_name(&f.name) == key) {
            Some(f) => {
                f.visits += 1;
                f.status = status;
            }
            None => self.functions.push(FunctionRecord {
                name: answer.function_name.trim().to_string(),
                visits: 1,
                status,
            }),
        }
    }

    /// The last `min(k, len)` steps, oldest first.
    pub fn latest_steps(&self, k: usize) -> &[StepRecord] {
        &self.steps[self.steps.len().saturating_sub(k)..]
    }

    /// Seeds the candidate function list from description sentences and
    /// humanized activity names, de-duplicated by normalized form.
    pub fn seed_function_list(&mut self, description: &str, activities: &[String]) {
        let sentences = description
            .split(['.', '!', '?', ';', '\n'])
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string);
        let names = activities.iter().map(|a| humanize_identifier(a)).filter(|s| !s.is_empty());
        for candidate in sentences.chain(names) {
            let norm = normalize_name(&candidate);
            if !self.seed_functions.iter().any(|s| normalize_name(s) == norm) {
                self.seed_functions.push(candidate);
            }
        }
    }
}
