//! Layered run settings: flags and environment (via clap), then an optional
//! TOML file, then built-in defaults.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, ValueEnum};
use guidroid::llm::DEFAULT_API_KEY_ENV;
use guidroid::session::SessionConfig;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Scripted,
    Oracle,
    Random,
}

/// Options shared by flag and environment. Every field is optional so the
/// file and defaults can fill the gaps.
#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    #[arg(long, env = "GUIDROID_BACKEND", value_enum)]
    pub backend: Option<BackendKind>,
    /// Base URL of an OpenAI-compatible API.
    #[arg(long, env = "GUIDROID_ENDPOINT")]
    pub endpoint: Option<String>,
    #[arg(long, env = "GUIDROID_MODEL_NAME")]
    pub model_name: Option<String>,
    /// JSON array (sequential) or object (keyed) of canned answers.
    #[arg(long, env = "GUIDROID_SCRIPT")]
    pub script: Option<PathBuf>,
    #[arg(long, env = "GUIDROID_MAX_STEPS")]
    pub max_steps: Option<usize>,
    /// Wall-clock budget per session; 0 disables it.
    #[arg(long, env = "GUIDROID_MAX_MINUTES")]
    pub max_minutes: Option<f64>,
    #[arg(long, env = "GUIDROID_K_RECENT")]
    pub k_recent: Option<usize>,
    /// Feedback rounds before falling back.
    #[arg(long, env = "GUIDROID_RETRIES")]
    pub retries: Option<usize>,
    #[arg(long, env = "GUIDROID_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "GUIDROID_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, env = "GUIDROID_PARALLEL")]
    pub parallel: Option<usize>,
    #[arg(long, env = "GUIDROID_TEMPERATURE")]
    pub temperature: Option<f64>,
    /// Environment variable holding the API key.
    #[arg(long, env = "GUIDROID_API_KEY_ENV")]
    pub api_key_env: Option<String>,
}

/// The TOML file shape. Keys mirror the long flag names with underscores.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    backend: Option<BackendKind>,
    endpoint: Option<String>,
    model_name: Option<String>,
    script: Option<PathBuf>,
    max_steps: Option<usize>,
    max_minutes: Option<f64>,
    k_recent: Option<usize>,
    retries: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    parallel: Option<usize>,
    temperature: Option<f64>,
    api_key_env: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub backend: BackendKind,
    pub endpoint: Option<String>,
    pub script: Option<PathBuf>,
    pub out: PathBuf,
    pub parallel: usize,
    pub api_key_env: String,
    pub session: SessionConfig,
}

impl Settings {
    pub fn resolve(flags: RunFlags, file: FileConfig) -> Result<Self, String> {
        let mut session = SessionConfig::default();
        if let Some(n) = flags.max_steps.or(file.max_steps) {
            session.max_steps = n;
        }
        if let Some(m) = flags.max_minutes.or(file.max_minutes) {
            if !m.is_finite() || m < 0.0 {
                return Err(format!("max-minutes must be a non-negative number, got {m}"));
            }
            session.max_wall_clock = (m > 0.0).then(|| Duration::from_secs_f64(m * 60.0));
        }
        if let Some(k) = flags.k_recent.or(file.k_recent) {
            session.k_recent = k;
            session.prompt.recent_steps = k;
        }
        if let Some(r) = flags.retries.or(file.retries) {
            session.max_feedback_retries = r;
        }
        if let Some(s) = flags.seed.or(file.seed) {
            session.seed = s;
        }
        if let Some(t) = flags.temperature.or(file.temperature) {
            session.request.temperature = t;
        }
        if let Some(name) = flags.model_name.or(file.model_name) {
            session.request.model_name = name;
        }
        session.validate().map_err(|e| e.to_string())?;

        let backend = flags.backend.or(file.backend).unwrap_or(BackendKind::Oracle);
        let endpoint = flags.endpoint.or(file.endpoint);
        let script = flags.script.or(file.script);
        match backend {
            BackendKind::Http if endpoint.is_none() => return Err("the http backend needs --endpoint".into()),
            BackendKind::Scripted if script.is_none() => return Err("the scripted backend needs --script".into()),
            _ => {}
        }
        let parallel = flags.parallel.or(file.parallel).unwrap_or(1);
        if parallel == 0 {
            return Err("parallel must be at least 1".into());
        }
        Ok(Self {
            backend,
            endpoint,
            script,
            out: flags.out.or(file.out).unwrap_or_else(|| PathBuf::from("results")),
            parallel,
            api_key_env: flags.api_key_env.or(file.api_key_env).unwrap_or_else(|| DEFAULT_API_KEY_ENV.to_string()),
            session,
        })
    }
}
