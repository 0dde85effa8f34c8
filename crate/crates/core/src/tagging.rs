//! Free-form type tags for rooms and locations, asked of the LLM with the
//! tags of their contents.

use crate::llm::ChatClient;
use crate::prompts::PromptSet;

pub const UNKNOWN_ROOM: &str = "unknown room";
pub const UNKNOWN_LOCATION: &str = "unknown location";

/// Content listing used in tag prompts: sorted, de-duplicated, one per line.
pub fn content_listing(contents: &[String]) -> String {
    let mut tags: Vec<&str> = contents.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    tags.sort_unstable();
    tags.dedup();
    tags.iter().map(|t| format!("- {t}")).collect::<Vec<_>>().join("\n")
}

/// First non-empty line, trimmed, without surrounding quotes or a final period.
pub fn normalize_tag(raw: &str) -> String {
    let line = raw.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let line = line.trim_matches(|c| c == '"' || c == '\'' || c == '`').trim();
    line.strip_suffix('.').unwrap_or(line).trim().to_owned()
}

pub(crate) fn ask_tag(
    template: &str,
    contents: &[String],
    fallback: &str,
    llm: &dyn ChatClient,
    prompts: &PromptSet,
) -> String {
    let listing = content_listing(contents);
    if listing.is_empty() {
        return fallback.to_owned();
    }
    let messages = prompts.conversation(template, &[("contents", &listing)]);
    match llm.send(&messages) {
        Ok(text) => {
            let tag = normalize_tag(&text);
            if tag.is_empty() {
                log::warn!("empty tag response; using {fallback:?}");
                fallback.to_owned()
            } else {
                tag
            }
        }
        Err(e) => {
            log::warn!("tagging failed ({e}); using {fallback:?}");
            fallback.to_owned()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization() {
        assert_eq!(normalize_tag("  kitchen \n"), "kitchen");
        assert_eq!(normalize_tag("\n\"living room.\"\nbecause"), "living room");
        assert_eq!(normalize_tag("   "), "");
    }

    #[test]
    fn listing_is_canonical() {
        let c = vec!["sofa".to_string(), "pouf".into(), "sofa".into(), " ".into()];
        assert_eq!(content_listing(&c), "- pouf\n- sofa");
    }
}
