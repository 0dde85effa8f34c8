//! Prompt templates. The defaults ship as text files in `prompts/` and may be
//! replaced wholesale from the pipeline config.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::llm::ChatMessage;

pub const PROMPT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSet {
    pub system: String,
    pub room_tag: String,
    pub location_tag: String,
    pub select_layer: String,
    pub select_targets: String,
    pub ground: String,
    pub repair: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self {
            system: include_str!("../prompts/system.txt").trim_end().to_owned(),
            room_tag: include_str!("../prompts/room_tag.txt").trim_end().to_owned(),
            location_tag: include_str!("../prompts/location_tag.txt").trim_end().to_owned(),
            select_layer: include_str!("../prompts/select_layer.txt").trim_end().to_owned(),
            select_targets: include_str!("../prompts/select_targets.txt").trim_end().to_owned(),
            ground: include_str!("../prompts/ground.txt").trim_end().to_owned(),
            repair: include_str!("../prompts/repair.txt").trim_end().to_owned(),
        }
    }
}

impl PromptSet {
    /// System message plus the rendered user message.
    pub fn conversation(&self, template: &str, vars: &[(&str, &str)]) -> Vec<ChatMessage> {
        vec![
            ChatMessage::system(self.system.clone()),
            ChatMessage::user(render(template, vars)),
        ]
    }

    /// SHA-256 of every template, keyed by name.
    pub fn digests(&self) -> BTreeMap<String, String> {
        [
            ("system", &self.system),
            ("room_tag", &self.room_tag),
            ("location_tag", &self.location_tag),
            ("select_layer", &self.select_layer),
            ("select_targets", &self.select_targets),
            ("ground", &self.ground),
            ("repair", &self.repair),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), hex::encode(Sha256::digest(v.as_bytes()))))
        .collect()
    }
}

/// Substitutes `{name}` placeholders in one pass; other braces are literal.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    'outer: while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        for (name, value) in vars {
            let key_len = name.len() + 2;
            if tail.len() >= key_len && &tail[1..key_len - 1] == *name && tail.as_bytes()[key_len - 1] == b'}' {
                out.push_str(value);
                rest = &tail[key_len..];
                continue 'outer;
            }
        }
        out.push('{');
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}
