use std::cell::Cell;

use serde_json::Value;

use super::ErrorKind;
use crate::llm::ChatClient;
use crate::prompts::PromptSet;

/// Strict parse of the whole (whitespace-trimmed) text.
pub fn parse_strict(text: &str) -> Option<Value> {
    serde_json::from_str(text.trim()).ok()
}

/// Repair calls still allowed for one query.
#[derive(Debug)]
pub struct RepairBudget(Cell<u32>);

impl RepairBudget {
    pub fn new(calls: u32) -> Self {
        Self(Cell::new(calls))
    }

    fn take(&self) -> bool {
        let left = self.0.get();
        if left == 0 {
            return false;
        }
        self.0.set(left - 1);
        true
    }
}

/// One LLM call asking to rewrite `raw` as JSON; the answer must parse strictly.
pub fn repair_json(raw: &str, llm: &dyn ChatClient, prompts: &PromptSet) -> Result<Value, ErrorKind> {
    let messages = prompts.conversation(&prompts.repair, &[("raw", raw)]);
    let repaired = llm.send(&messages)?;
    parse_strict(&repaired).ok_or(ErrorKind::RepairFailed {
        raw: raw.to_owned(),
        repaired,
    })
}

/// Strict parse, falling back to a repair call while the budget allows.
pub(crate) fn parse_or_repair(
    raw: &str,
    llm: &dyn ChatClient,
    prompts: &PromptSet,
    budget: &RepairBudget,
) -> Result<Value, ErrorKind> {
    if let Some(v) = parse_strict(raw) {
        return Ok(v);
    }
    if !budget.take() {
        return Err(ErrorKind::RepairFailed {
            raw: raw.to_owned(),
            repaired: String::new(),
        });
    }
    repair_json(raw, llm, prompts)
}
