//! Fixtures shared by the integration suites.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use guidroid::answer::{ActionCommand, ExecutiveCommand, FunctionAnswer, FunctionStatus, InputEntry, Operation};
use guidroid::device::{load_app_model, AppModel, Simulator};
use guidroid::gui::GuiContext;
use guidroid::llm::ChatBackend;
use guidroid::memory::Memorizer;
use guidroid::session::{run_session, SessionConfig, SessionReport};

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn load_model(name: &str) -> Arc<AppModel> {
    let path = corpus_dir().join(format!("{name}.json"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    Arc::new(load_app_model(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display())))
}

/// Every corpus model, sorted by file stem.
pub fn corpus() -> Vec<(String, Arc<AppModel>)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let stem = p.file_stem().unwrap().to_string_lossy().to_string();
            (stem.clone(), load_model(&stem))
        })
        .collect()
}

pub fn corpus_config(seed: u64) -> SessionConfig {
    SessionConfig { max_steps: 200, seed, rate_limit_pause: None, max_wall_clock: None, ..SessionConfig::default() }
}

pub fn run_on_model(model: &Arc<AppModel>, backend: &dyn ChatBackend, config: &SessionConfig) -> SessionReport {
    let mut sim = Simulator::new(model.clone());
    run_session(&mut sim, backend, &model.app_info, &model.description, config).expect("valid config")
}

/// The six-step Money tracker history used by the memory goldens: add an
/// income, open and leave the exchange page, then open the account form.
pub fn money_tracker_history() -> (Arc<AppModel>, Simulator, Memorizer) {
    let model = load_model("money_tracker");
    let mut sim = Simulator::new(model.clone());
    let mut mem = Memorizer::new();
    mem.seed_function_list(&model.description, &model.app_info.activities);
    let script = [
        (ExecutiveCommand::click("Income"), "Add your income", FunctionStatus::No),
        (
            ExecutiveCommand::TextInput {
                entries: vec![
                    InputEntry::new("Price", "3500"),
                    InputEntry::new("Title", "salary"),
                    InputEntry::new("Category", "personal"),
                ],
                submit: ActionCommand::new(Operation::Click, "Submit"),
            },
            "Add your income",
            FunctionStatus::Yes,
        ),
        (ExecutiveCommand::click("Exchange"), "Exchange", FunctionStatus::No),
        (ExecutiveCommand::click("Add exchange"), "Exchange", FunctionStatus::No),
        (ExecutiveCommand::click("Cancel"), "Exchange", FunctionStatus::Yes),
        (ExecutiveCommand::click("Add"), "Add account", FunctionStatus::No),
    ];
    for (command, function, status) in script {
        let page = sim.gui_page();
        let activity = sim.activity().to_string();
        let result = sim.step(&command);
        mem.record_step(&activity, &command, &result, &page);
        mem.update_function(&FunctionAnswer { function_name: function.into(), is_new_or_done: status });
    }
    (model, sim, mem)
}

pub fn context_of(model: &AppModel, sim: &Simulator) -> GuiContext {
    GuiContext::new(model.app_info.clone(), sim.gui_page())
}

/// Folds typographic and backtick quotes to plain double quotes.
pub fn fold_quotes(text: &str) -> String {
    text.replace("``", "\"")
        .replace("''", "\"")
        .chars()
        .map(|c| match c {
            '\u{201c}' | '\u{201d}' | '\u{2018}' | '\u{2019}' => '"',
            c => c,
        })
        .collect()
}
