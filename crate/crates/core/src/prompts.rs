//! Prompt templates.
//!
//! Templates are plain UTF-8 text with `{{name}}` placeholders and
//! `{{! ... }}` comments (stripped at render time, may span lines). The
//! English and Japanese sets are compiled in; a directory with the same
//! file names overrides them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template `{template}` references unknown placeholder `{name}`")]
    MissingValue { template: String, name: String },
    #[error("template `{template}` has an unterminated `{{{{` at byte {offset}")]
    Unterminated { template: String, offset: usize },
    #[error("reading template {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    #[default]
    En,
    Ja,
}

impl Language {
    pub fn code(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Ja => "ja",
        }
    }
}

impl std::str::FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "en" => Ok(Language::En),
            "ja" => Ok(Language::Ja),
            other => Err(format!("unknown language `{other}` (expected en or ja)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TemplateKind {
    Polarity,
    Stage1,
    Stage2,
    Stage3,
    Retry,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 5] = [
        TemplateKind::Polarity,
        TemplateKind::Stage1,
        TemplateKind::Stage2,
        TemplateKind::Stage3,
        TemplateKind::Retry,
    ];

    pub fn file_stem(self) -> &'static str {
        match self {
            TemplateKind::Polarity => "polarity",
            TemplateKind::Stage1 => "stage1",
            TemplateKind::Stage2 => "stage2",
            TemplateKind::Stage3 => "stage3",
            TemplateKind::Retry => "retry",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    id: String,
    source: String,
}

impl Template {
    pub fn new(id: impl Into<String>, source: impl Into<String>) -> Self {
        Template {
            id: id.into(),
            source: source.into(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Substitute every placeholder. Values are inserted verbatim.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.source.len());
        let mut rest = self.source.as_str();
        let mut offset = 0;
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            let end = after.find("}}").ok_or_else(|| TemplateError::Unterminated {
                template: self.id.clone(),
                offset: offset + start,
            })?;
            let inner = &after[..end];
            let consumed = start + 2 + end + 2;
            if inner.starts_with('!') {
                // drop the comment and the newline that ends its line
                let tail = &rest[consumed..];
                let skip = usize::from(tail.starts_with('\n'));
                offset += consumed + skip;
                rest = &tail[skip..];
                continue;
            }
            let name = inner.trim();
            let value = values
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| TemplateError::MissingValue {
                    template: self.id.clone(),
                    name: name.to_string(),
                })?;
            out.push_str(value);
            offset += consumed;
            rest = &rest[consumed..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

/// One language's full template set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    language: Language,
    templates: BTreeMap<TemplateKind, Template>,
}

impl PromptSet {
    pub fn builtin(language: Language) -> Self {
        let sources: [&str; 5] = match language {
            Language::En => [
                include_str!("../assets/prompts/en/polarity.txt"),
                include_str!("../assets/prompts/en/stage1.txt"),
                include_str!("../assets/prompts/en/stage2.txt"),
                include_str!("../assets/prompts/en/stage3.txt"),
                include_str!("../assets/prompts/en/retry.txt"),
            ],
            Language::Ja => [
                include_str!("../assets/prompts/ja/polarity.txt"),
                include_str!("../assets/prompts/ja/stage1.txt"),
                include_str!("../assets/prompts/ja/stage2.txt"),
                include_str!("../assets/prompts/ja/stage3.txt"),
                include_str!("../assets/prompts/ja/retry.txt"),
            ],
        };
        let templates = TemplateKind::ALL
            .iter()
            .zip(sources)
            .map(|(&kind, src)| (kind, Template::new(template_id(language, kind), src)))
            .collect();
        PromptSet {
            language,
            templates,
        }
    }

    /// Built-in set with any `<stem>.txt` found in `dir` taking precedence.
    pub fn load(language: Language, dir: Option<&Path>) -> Result<Self, TemplateError> {
        let mut set = Self::builtin(language);
        if let Some(dir) = dir {
            for kind in TemplateKind::ALL {
                let path = dir.join(format!("{}.txt", kind.file_stem()));
                if path.exists() {
                    let source = std::fs::read_to_string(&path).map_err(|source| {
                        TemplateError::Io {
                            path: path.display().to_string(),
                            source,
                        }
                    })?;
                    set.templates
                        .insert(kind, Template::new(template_id(language, kind), source));
                }
            }
        }
        Ok(set)
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn get(&self, kind: TemplateKind) -> &Template {
        &self.templates[&kind]
    }

    /// Append the retry note to an already rendered prompt. `attempt` is
    /// numbered from 1 so each retry is a distinct request.
    pub fn with_retry_note(
        &self,
        prompt: &str,
        attempt: u32,
        problems: &[String],
    ) -> Result<String, TemplateError> {
        let list = problems
            .iter()
            .map(|p| format!("- {p}"))
            .collect::<Vec<_>>()
            .join("\n");
        let note = self.get(TemplateKind::Retry).render(&[("attempt", &attempt.to_string()), ("problems", &list)])?;
        Ok(format!("{prompt}{note}"))
    }
}

fn template_id(language: Language, kind: TemplateKind) -> String {
    format!("{}/{}", language.code(), kind.file_stem())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_substitutes_and_strips_comments() {
        let t = Template::new("t", "a {{x}} b\n{{! note }}\nc {{ y }}");
        assert_eq!(t.render(&[("x", "1"), ("y", "2")]).unwrap(), "a 1 b\nc 2");
    }

    #[test]
    fn missing_placeholder_errors() {
        let t = Template::new("t", "{{text}}");
        assert!(matches!(t.render(&[]), Err(TemplateError::MissingValue { .. })));
    }

    #[test]
    fn unterminated_errors() {
        let t = Template::new("t", "abc {{text");
        assert!(matches!(
            t.render(&[("text", "x")]),
            Err(TemplateError::Unterminated { offset: 4, .. })
        ));
    }

    #[test]
    fn values_are_not_reexpanded() {
        let t = Template::new("t", "{{text}}");
        assert_eq!(t.render(&[("text", "{{edges}}")]).unwrap(), "{{edges}}");
    }

    #[test]
    fn builtin_sets_render() {
        for lang in [Language::En, Language::Ja] {
            let set = PromptSet::builtin(lang);
            let vals = [
                ("text", "T"),
                ("edges", "E"),
                ("statement1", "S1"),
                ("statement2", "S2"),
                ("problems", "P"),
                ("attempt", "1"),
            ];
            for kind in TemplateKind::ALL {
                let out = set.get(kind).render(&vals).unwrap();
                assert!(!out.contains("{{"), "{lang:?} {kind:?}");
            }
            assert_eq!(set.get(TemplateKind::Stage1).id(), format!("{}/stage1", lang.code()));
        }
    }

    #[test]
    fn directory_override() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("polarity.txt"), "Score: {{text}}").unwrap();
        let set = PromptSet::load(Language::En, Some(dir.path())).unwrap();
        assert_eq!(
            set.get(TemplateKind::Polarity).render(&[("text", "x")]).unwrap(),
            "Score: x"
        );
        assert_eq!(set.get(TemplateKind::Stage1), PromptSet::builtin(Language::En).get(TemplateKind::Stage1));
    }
}
