//! LLM-driven GUI exploration.
//!
//! Each step extracts the GUI context of the page under test, renders it
//! together with the functionality-aware testing memory into a prompt,
//! decodes the model's answer into an executable command, runs it on a
//! device and records the outcome.

pub mod answer;
pub mod device;
pub mod gui;
pub mod llm;
pub mod memory;
pub mod prompt;
pub mod report;
pub mod session;
pub mod tokenize;
