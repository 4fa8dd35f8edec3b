//! Uniform-random baseline: picks any operable widget and any operation,
//! and types random strings into input fields.

use std::sync::Mutex;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracle::PromptView;
use super::{ChatBackend, ChatRequest, LlmError};
use crate::answer::{render_command, ActionCommand, ExecutiveCommand, InputEntry, Operation, IME_ENTER};

#[derive(Debug)]
pub struct RandomBackend {
    rng: Mutex<ChaCha8Rng>,
}

impl RandomBackend {
    pub fn new(seed: u64) -> Self {
        Self { rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)) }
    }
}

fn random_text(rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(1..=6);
    if rng.random_bool(0.5) {
        (0..len).map(|_| char::from(b'0' + rng.random_range(0..10u8))).collect()
    } else {
        (0..len).map(|_| char::from(b'a' + rng.random_range(0..26u8))).collect()
    }
}

impl ChatBackend for RandomBackend {
    fn chat(&self, request: &ChatRequest) -> Result<String, LlmError> {
        request.validate()?;
        let view = PromptView::parse(request.last_user_message());
        let mut rng = self.rng.lock().unwrap_or_else(|e| e.into_inner());
        let rng = &mut *rng;
        let clickables: Vec<&str> = view.clickables().collect();
        let inputs: Vec<&str> = view.inputs().collect();
        let op = *Operation::ALL.choose(rng).expect("non-empty");

        let command = if !inputs.is_empty() {
            let entries = inputs.iter().map(|f| InputEntry::new(*f, random_text(rng))).collect();
            let submit = clickables.choose(rng).copied().unwrap_or(IME_ENTER);
            ExecutiveCommand::TextInput { entries, submit: ActionCommand::new(op, submit) }
        } else {
            match clickables.choose(rng) {
                Some(w) => ExecutiveCommand::action(op, *w),
                None => return Ok("Nothing to do.".to_string()),
            }
        };
        Ok(render_command(&command))
    }
}
