//! Prompt templates and rendering.
//!
//! Template files carry a small front-matter header:
//!
//! ```text
//! ---
//! id: 2
//! task: judge
//! language: en
//! with_context: false
//! ---
//! Is the Bavarian term 'term_bar' ... of 'term_de' ...
//! ```
//!
//! The body runs to the end of the file, minus one trailing newline.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::outcome::Task;

pub const TERM_DIALECT: &str = "term_bar";
pub const TERM_STANDARD: &str = "term_de";
pub const CONTEXT_SLOT: &str = "####";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    De,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::De => "de",
        }
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "en" => Ok(Language::En),
            "de" => Ok(Language::De),
            other => Err(Error::Validation(format!(
                "unknown prompt language `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: u32,
    pub task: Task,
    pub language: Language,
    pub with_context: bool,
    pub body: String,
}

/// A prompt variant: language and whether a usage example is included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variant {
    pub language: Language,
    pub context: bool,
}

impl Variant {
    pub const BASE: Variant = Variant {
        language: Language::En,
        context: false,
    };
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.language.as_str())?;
        if self.context {
            f.write_str("+ctx")?;
        }
        Ok(())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (lang, context) = match s.strip_suffix("+ctx") {
            Some(l) => (l, true),
            None => (s, false),
        };
        Ok(Variant {
            language: lang.parse()?,
            context,
        })
    }
}

impl PromptTemplate {
    pub fn variant(&self) -> Variant {
        Variant {
            language: self.language,
            context: self.with_context,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |what: &str| {
            Err(Error::Validation(format!(
                "template {} ({} {}{}): {what}",
                self.id,
                self.task,
                self.language.as_str(),
                if self.with_context { " +ctx" } else { "" }
            )))
        };
        if !self.body.contains(TERM_DIALECT) {
            return fail("missing `term_bar` placeholder");
        }
        match self.task {
            Task::Judge if !self.body.contains(TERM_STANDARD) => {
                return fail("missing `term_de` placeholder")
            }
            Task::Translate if self.body.contains(TERM_STANDARD) => {
                return fail("translation template must not contain `term_de`")
            }
            _ => {}
        }
        match (self.with_context, self.body.contains(CONTEXT_SLOT)) {
            (true, false) => fail("context template lacks `####` slot"),
            (false, true) => fail("`####` slot in a template without context"),
            _ => Ok(()),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let rest = text
            .strip_prefix("---\n")
            .ok_or_else(|| Error::parse(1, "template must start with `---`"))?;
        let end = rest
            .find("\n---\n")
            .ok_or_else(|| Error::parse(1, "unterminated front matter"))?;
        let (header, body) = (&rest[..end], &rest[end + 5..]);
        let (mut id, mut task, mut language, mut with_context) = (None, None, None, None);
        for (i, line) in header.lines().enumerate() {
            let line_no = i + 2;
            let (key, value) = line.split_once(':').ok_or_else(|| {
                Error::parse(line_no, format!("expected `key: value`, got `{line}`"))
            })?;
            let value = value.trim();
            match key.trim() {
                "id" => {
                    id = Some(
                        value
                            .parse::<u32>()
                            .map_err(|e| Error::parse(line_no, e.to_string()))?,
                    )
                }
                "task" => task = Some(value.parse::<Task>()?),
                "language" => language = Some(value.parse::<Language>()?),
                "with_context" => {
                    with_context = Some(
                        value
                            .parse::<bool>()
                            .map_err(|e| Error::parse(line_no, e.to_string()))?,
                    )
                }
                other => return Err(Error::parse(line_no, format!("unknown key `{other}`"))),
            }
        }
        let missing = |k: &str| Error::parse(1, format!("front matter lacks `{k}`"));
        let template = PromptTemplate {
            id: id.ok_or_else(|| missing("id"))?,
            task: task.ok_or_else(|| missing("task"))?,
            language: language.unwrap_or(Language::En),
            with_context: with_context.unwrap_or(false),
            body: body.strip_suffix('\n').unwrap_or(body).to_string(),
        };
        template.validate()?;
        Ok(template)
    }
}

/// All templates found under a directory (recursively, `*.txt`).
#[derive(Debug, Clone, Default)]
pub struct PromptPool {
    templates: Vec<PromptTemplate>,
}

pub fn load_prompt_pool(dir: impl AsRef<Path>) -> Result<PromptPool> {
    let mut files = Vec::new();
    collect_txt(dir.as_ref(), &mut files)?;
    files.sort();
    let mut templates = Vec::new();
    for path in files {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
        let t = PromptTemplate::parse(&text).map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
            Error::Parse { line, message } => Error::Parse {
                line,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })?;
        templates.push(t);
    }
    PromptPool::new(templates)
}

fn collect_txt(dir: &Path, out: &mut Vec<std::path::PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| Error::file(dir, e))? {
        let path = entry?.path();
        if path.is_dir() {
            collect_txt(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "txt") {
            out.push(path);
        }
    }
    Ok(())
}

impl PromptPool {
    pub fn new(mut templates: Vec<PromptTemplate>) -> Result<Self> {
        templates.sort_by_key(|t| (t.task.as_str(), t.id, t.language, t.with_context));
        for pair in templates.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.task == b.task && a.id == b.id && a.variant() == b.variant() {
                return Err(Error::Validation(format!(
                    "duplicate template {} {} {}",
                    a.task,
                    a.id,
                    a.variant()
                )));
            }
        }
        Ok(PromptPool { templates })
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// The English, context-free pool for `task`, ordered by id.
    pub fn base(&self, task: Task) -> Vec<&PromptTemplate> {
        self.templates
            .iter()
            .filter(|t| t.task == task && t.variant() == Variant::BASE)
            .collect()
    }

    pub fn get(&self, task: Task, id: u32, variant: Variant) -> Option<&PromptTemplate> {
        self.templates
            .iter()
            .find(|t| t.task == task && t.id == id && t.variant() == variant)
    }
}

/// Substitutes the placeholders in one left-to-right pass, so substituted
/// text is never re-scanned.
pub fn render_prompt(
    template: &PromptTemplate,
    lemma: &str,
    term: &str,
    context: Option<&str>,
) -> Result<String> {
    let context = match (template.with_context, context) {
        (true, Some(c)) => Some(c),
        (true, None) => {
            return Err(Error::Validation(format!(
                "template {} needs a usage context",
                template.id
            )))
        }
        (false, _) => None,
    };
    let body = template.body.as_str();
    let mut out = String::with_capacity(body.len() + 64);
    let mut rest = body;
    while !rest.is_empty() {
        if let Some(r) = rest.strip_prefix(TERM_DIALECT) {
            out.push_str(term);
            rest = r;
        } else if let Some(r) = rest
            .strip_prefix(TERM_STANDARD)
            .filter(|_| template.task == Task::Judge)
        {
            out.push_str(lemma);
            rest = r;
        } else if let Some((r, c)) = rest.strip_prefix(CONTEXT_SLOT).zip(context) {
            out.push_str(c);
            rest = r;
        } else {
            let c = rest.chars().next().unwrap();
            out.push(c);
            rest = &rest[c.len_utf8()..];
        }
    }
    Ok(out)
}
