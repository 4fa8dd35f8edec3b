//! Driver abstraction over app execution: the synthetic-app simulator and a
//! JSON-lines bridge to external device adapters.

mod bridge;
mod model;
mod sim;

pub use bridge::{serve_bridge, BridgeDriver};
pub use model::{
    load_app_model, AppModel, CounterEffect, CrashRule, Guard, ModelError, PageTemplate, Transition, Trigger,
    TriggerOp, WidgetTemplate, SCHEMA_VERSION,
};
pub use sim::Simulator;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer::ExecutiveCommand;
use crate::gui::GuiPage;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DeviceError {
    #[error("device peer closed the connection")]
    DeviceGone,
    #[error("bridge protocol error: {0}")]
    Protocol(String),
}

/// Outcome of executing one command.
#[derive(Debug, Clone, PartialEq)]
pub enum ExecResult {
    Ok(GuiPage),
    NoEffect,
    Crash(String),
    InvalidTarget(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultKind {
    Ok,
    NoEffect,
    Crash,
    InvalidTarget,
}

impl ResultKind {
    pub fn name(self) -> &'static str {
        match self {
            ResultKind::Ok => "ok",
            ResultKind::NoEffect => "no_effect",
            ResultKind::Crash => "crash",
            ResultKind::InvalidTarget => "invalid_target",
        }
    }
}

impl ExecResult {
    pub fn kind(&self) -> ResultKind {
        match self {
            ExecResult::Ok(_) => ResultKind::Ok,
            ExecResult::NoEffect => ResultKind::NoEffect,
            ExecResult::Crash(_) => ResultKind::Crash,
            ExecResult::InvalidTarget(_) => ResultKind::InvalidTarget,
        }
    }
}

/// A device session. One driver belongs to exactly one exploration session.
pub trait Driver: Send {
    /// Current activity name and its view-hierarchy dump.
    fn current_page(&mut self) -> Result<(String, String), DeviceError>;
    fn execute(&mut self, command: &ExecutiveCommand) -> Result<ExecResult, DeviceError>;
    /// Returns the app to its start page with fresh state.
    fn restart(&mut self) -> Result<(), DeviceError>;
}

impl<D: Driver + ?Sized> Driver for Box<D> {
    fn current_page(&mut self) -> Result<(String, String), DeviceError> {
        (**self).current_page()
    }
    fn execute(&mut self, command: &ExecutiveCommand) -> Result<ExecResult, DeviceError> {
        (**self).execute(command)
    }
    fn restart(&mut self) -> Result<(), DeviceError> {
        (**self).restart()
    }
}
