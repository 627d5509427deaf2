//! Prompt templates with `{{name}}` placeholders.
//!
//! The defaults are compiled in from `prompts/*.txt`; a directory holding
//! files of the same names overrides them.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("template references unknown placeholder {{{{{0}}}}}")]
    Unbound(String),
    #[error("unterminated placeholder in template")]
    Unterminated,
    #[error("cannot read template {0}: {1}")]
    Io(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub storyteller: String,
    pub cinematographer: String,
    pub judge: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self {
            storyteller: include_str!("../prompts/storyteller.txt").to_string(),
            cinematographer: include_str!("../prompts/cinematographer.txt").to_string(),
            judge: include_str!("../prompts/judge.txt").to_string(),
        }
    }
}

impl PromptSet {
    /// Loads `storyteller.txt`, `cinematographer.txt` and `judge.txt` from
    /// `dir`, keeping the default for any file that is absent.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut set = Self::default();
        for (name, slot) in [
            ("storyteller.txt", &mut set.storyteller),
            ("cinematographer.txt", &mut set.cinematographer),
            ("judge.txt", &mut set.judge),
        ] {
            let path = dir.join(name);
            if path.exists() {
                *slot = std::fs::read_to_string(&path)
                    .map_err(|e| PromptError::Io(path.display().to_string(), e.to_string()))?;
            }
        }
        Ok(set)
    }
}

/// Substitutes every `{{name}}` in `template`. Unknown names are an error.
pub fn render(template: &str, vars: &BTreeMap<&str, String>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or(PromptError::Unterminated)?;
        let name = after[..end].trim();
        let value = vars.get(name).ok_or_else(|| PromptError::Unbound(name.to_string()))?;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitutes_named_placeholders() {
        let vars = BTreeMap::from([("who", "world".to_string())]);
        assert_eq!(render("hello {{ who }}!", &vars).unwrap(), "hello world!");
    }

    #[test]
    fn unbound_and_unterminated() {
        let vars = BTreeMap::new();
        assert_eq!(render("{{x}}", &vars), Err(PromptError::Unbound("x".into())));
        assert_eq!(render("{{x", &vars), Err(PromptError::Unterminated));
    }

    #[test]
    fn defaults_render_with_expected_names() {
        let set = PromptSet::default();
        let vars: BTreeMap<&str, String> = [
            "genre",
            "shot_count",
            "movements",
            "subject_count",
            "dynamicity",
            "init",
            "location",
            "lighting",
            "movement",
            "screenplay",
            "genres",
        ]
        .into_iter()
        .map(|k| (k, "v".to_string()))
        .collect();
        for t in [&set.storyteller, &set.cinematographer, &set.judge] {
            render(t, &vars).unwrap();
        }
    }
}
