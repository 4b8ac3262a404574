//! Prompt template store with named `{placeholder}` substitution.
//!
//! Templates are plain text files; lines starting with `#` are comments and
//! are stripped at load time. Three operator-fill skeletons ship embedded:
//! `slides_qa`, `web_qa`, and `rationale`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::AnnotatorError;

#[derive(Debug, Clone, Default)]
pub struct TemplateStore {
    templates: BTreeMap<String, String>,
}

impl TemplateStore {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The embedded skeleton templates.
    pub fn builtin() -> Self {
        let mut store = Self::default();
        store.insert("slides_qa", include_str!("../templates/slides_qa.txt"));
        store.insert("web_qa", include_str!("../templates/web_qa.txt"));
        store.insert("rationale", include_str!("../templates/rationale.txt"));
        store
    }

    /// Load every `*.txt` in a directory as a template named by file stem.
    /// Loaded templates shadow builtins of the same name.
    pub fn load_dir(&mut self, dir: impl AsRef<Path>) -> Result<usize, AnnotatorError> {
        let mut loaded = 0;
        let mut entries: Vec<_> = fs::read_dir(dir)?
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "txt"))
            .collect();
        entries.sort();
        for path in entries {
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            self.insert(stem, &fs::read_to_string(&path)?);
            loaded += 1;
        }
        Ok(loaded)
    }

    pub fn insert(&mut self, id: impl Into<String>, raw: &str) {
        self.templates.insert(id.into(), strip_comments(raw));
    }

    pub fn contains(&self, id: &str) -> bool {
        self.templates.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    /// Fill a template. Every `{name}` must be bound by `vars`.
    pub fn render(
        &self,
        id: &str,
        vars: &BTreeMap<String, String>,
    ) -> Result<String, AnnotatorError> {
        let template = self
            .templates
            .get(id)
            .ok_or_else(|| AnnotatorError::Template(format!("unknown template {id:?}")))?;
        let mut out = template.clone();
        for (key, value) in vars {
            out = out.replace(&format!("{{{key}}}"), value);
        }
        if let Some(name) = unbound_placeholder(&out) {
            return Err(AnnotatorError::Template(format!(
                "template {id:?} has unbound placeholder {{{name}}}"
            )));
        }
        Ok(out)
    }
}

fn strip_comments(raw: &str) -> String {
    raw.lines()
        .filter(|line| !line.trim_start().starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
        .trim()
        .to_string()
}

/// First `{identifier}` left in the text, if any.
fn unbound_placeholder(text: &str) -> Option<String> {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let end = text[i + 1..].find('}').map(|e| i + 1 + e)?;
            let name = &text[i + 1..end];
            if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Some(name.to_string());
            }
            i = end + 1;
        } else {
            i += 1;
        }
    }
    None
}
