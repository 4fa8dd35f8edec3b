//! Trace persistence, replay against the simulator, bug reproduction and
//! corpus-level summaries.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::device::{AppModel, Driver, ExecResult, ResultKind, Simulator};
use crate::memory::Memorizer;
use crate::session::{BugRecord, SessionReport, TerminationReason, TraceEntry};

pub fn write_trace_jsonl<W: Write>(mut out: W, trace: &[TraceEntry]) -> std::io::Result<()> {
    for entry in trace {
        serde_json::to_writer(&mut out, entry)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a JSON-lines trace. Errors name the 1-based line.
pub fn read_trace_jsonl<R: BufRead>(input: R) -> Result<Vec<TraceEntry>, String> {
    let mut entries = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| format!("line {}: {e}", i + 1))?;
        if line.trim().is_empty() {
            continue;
        }
        entries.push(serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?);
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReplayMismatch {
    pub step: usize,
    pub expected_activity: String,
    pub actual_activity: String,
    pub expected: ResultKind,
    pub actual: ResultKind,
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub steps: usize,
    pub mismatches: Vec<ReplayMismatch>,
    /// Memory rebuilt from the replayed steps and the traced function answers.
    pub memory: Memorizer,
}

impl ReplayOutcome {
    pub fn is_faithful(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Replays the traced commands on a fresh simulator, restarting wherever
/// the session restarted.
pub fn replay_trace(model: Arc<AppModel>, trace: &[TraceEntry]) -> ReplayOutcome {
    let mut sim = Simulator::new(model.clone());
    let mut memory = Memorizer::new();
    memory.seed_function_list(&model.description, &model.app_info.activities);
    let mut mismatches = Vec::new();
    for entry in trace {
        let activity = sim.activity().to_string();
        let page = sim.gui_page();
        let result = sim.step(&entry.command);
        if result.kind() != entry.result || activity != entry.activity {
            mismatches.push(ReplayMismatch {
                step: entry.step,
                expected_activity: entry.activity.clone(),
                actual_activity: activity.clone(),
                expected: entry.result,
                actual: result.kind(),
            });
        }
        if !matches!(result, ExecResult::InvalidTarget(_)) {
            memory.record_step(&activity, &entry.command, &result, &page);
            if let Some(f) = &entry.function {
                memory.update_function(f);
            }
        }
        if entry.restarted {
            let _ = Driver::restart(&mut sim);
        }
    }
    ReplayOutcome { steps: trace.len(), mismatches, memory }
}

/// True when the recorded sequence crashes a fresh simulator on its last
/// command, with the recorded message, and not before.
pub fn reproduce_bug(model: Arc<AppModel>, bug: &BugRecord) -> bool {
    let mut sim = Simulator::new(model);
    let n = bug.reproducing_command_sequence.len();
    for (i, command) in bug.reproducing_command_sequence.iter().enumerate() {
        match sim.step(command) {
            ExecResult::Crash(message) => return i + 1 == n && message == bug.crash_message,
            _ if i + 1 == n => return false,
            _ => {}
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppSummary {
    pub app_name: String,
    pub activity_coverage: f64,
    pub activities_covered: usize,
    pub activities_declared: usize,
    pub bugs: usize,
    pub steps: usize,
    pub termination_reason: TerminationReason,
    pub wall_clock_secs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub apps: Vec<AppSummary>,
    pub mean_activity_coverage: f64,
    pub mean_steps: f64,
    pub total_bugs: usize,
}

/// Aggregates reports. Wall clock is only known for in-process reports.
pub fn summarize(reports: &[SessionReport]) -> CorpusSummary {
    let apps: Vec<AppSummary> = reports
        .iter()
        .map(|r| AppSummary {
            app_name: r.app_name.clone(),
            activity_coverage: r.activity_coverage,
            activities_covered: r.activities_covered.len(),
            activities_declared: r.declared_activities.len(),
            bugs: r.bugs.len(),
            steps: r.steps_executed,
            termination_reason: r.termination_reason,
            wall_clock_secs: (!r.elapsed.is_zero()).then_some(r.elapsed.as_secs_f64()),
        })
        .collect();
    let n = apps.len().max(1) as f64;
    CorpusSummary {
        mean_activity_coverage: apps.iter().map(|a| a.activity_coverage).sum::<f64>() / n,
        mean_steps: apps.iter().map(|a| a.steps as f64).sum::<f64>() / n,
        total_bugs: apps.iter().map(|a| a.bugs).sum(),
        apps,
    }
}

/// Coverage-over-steps series as CSV.
pub fn emit_coverage_series(report: &SessionReport) -> String {
    let mut out = String::from("step,activity_coverage,activities_covered,widgets_covered\n");
    for p in &report.coverage_series {
        out.push_str(&format!("{},{:.4},{},{}\n", p.step, p.activity_coverage, p.activities_covered, p.widgets_covered));
    }
    out
}
