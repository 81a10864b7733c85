use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Judge,
    Translate,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Judge => "judge",
            Task::Translate => "translate",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "judge" | "judgment" => Ok(Task::Judge),
            "translate" | "translation" => Ok(Task::Translate),
            other => Err(Error::Validation(format!("unknown task `{other}`"))),
        }
    }
}

/// Marker written for outputs that broke the format contract.
pub const IF_ERROR: &str = "IF_ERROR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JudgmentOutcome {
    Label(Label),
    IfError,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TranslationOutcome {
    Word(String),
    IfError,
}

impl JudgmentOutcome {
    pub fn as_str(&self) -> &str {
        match self {
            JudgmentOutcome::Label(l) => l.as_str(),
            JudgmentOutcome::IfError => IF_ERROR,
        }
    }

    pub fn from_outcome_str(s: &str) -> Result<Self> {
        if s == IF_ERROR {
            Ok(JudgmentOutcome::IfError)
        } else {
            s.parse().map(JudgmentOutcome::Label)
        }
    }
}

impl TranslationOutcome {
    pub fn as_str(&self) -> &str {
        match self {
            TranslationOutcome::Word(w) => w,
            TranslationOutcome::IfError => IF_ERROR,
        }
    }

    pub fn from_outcome_str(s: &str) -> Self {
        if s == IF_ERROR {
            TranslationOutcome::IfError
        } else {
            TranslationOutcome::Word(s.to_string())
        }
    }
}
