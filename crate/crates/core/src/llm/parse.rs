//! Deterministic parsing of raw model replies.
//!
//! Anything that does not fit the contract becomes `IF_ERROR`; the parser
//! never guesses.

use crate::dataset::Label;
use crate::outcome::{JudgmentOutcome, TranslationOutcome};

/// Bumped whenever parsing rules change, so cached raw replies can be re-parsed.
pub const PARSER_VERSION: u32 = 1;

const QUOTES: &[char] = &['"', '\'', '`', '“', '”', '‘', '’', '«', '»', '„'];
const TRAILING: &[char] = &['.', ',', '!', '?', ';', ':'];

fn strip_quotes(s: &str) -> &str {
    let mut s = s;
    loop {
        let mut chars = s.chars();
        match (chars.next(), chars.next_back()) {
            (Some(a), Some(b)) if QUOTES.contains(&a) && QUOTES.contains(&b) => {
                s = chars.as_str().trim()
            }
            _ => return s,
        }
    }
}

fn strip_one_trailing<'a>(s: &'a str, set: &[char]) -> &'a str {
    match s.chars().next_back() {
        Some(c) if set.contains(&c) => s[..s.len() - c.len_utf8()].trim_end(),
        _ => s,
    }
}

/// Trims, drops one trailing mark, then surrounding quotes. A mark inside
/// the quotes is dropped only when quotes were actually removed.
fn unwrap_reply<'a>(raw: &'a str, marks: &[char]) -> &'a str {
    let s = strip_one_trailing(raw.trim(), marks);
    let q = strip_quotes(s);
    if q.len() == s.len() {
        s
    } else {
        strip_one_trailing(q, marks)
    }
}

/// A judgment reply with the raw text it was parsed from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedJudgment {
    pub outcome: JudgmentOutcome,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedTranslation {
    pub outcome: TranslationOutcome,
    pub raw: String,
}

pub fn parse_judgment(raw: &str) -> ParsedJudgment {
    ParsedJudgment {
        outcome: judgment_outcome(raw),
        raw: raw.to_string(),
    }
}

pub fn parse_translation(raw: &str) -> ParsedTranslation {
    ParsedTranslation {
        outcome: translation_outcome(raw),
        raw: raw.to_string(),
    }
}

/// Accepts exactly one of `yes`, `inflected`, `no` (any case), optionally
/// quoted and followed by one punctuation mark.
pub fn judgment_outcome(raw: &str) -> JudgmentOutcome {
    let s = unwrap_reply(raw, TRAILING);
    match s.to_lowercase().as_str() {
        "yes" => JudgmentOutcome::Label(Label::Yes),
        "inflected" => JudgmentOutcome::Label(Label::Inflected),
        "no" => JudgmentOutcome::Label(Label::No),
        _ => JudgmentOutcome::IfError,
    }
}

/// Accepts a single whitespace-free token, optionally quoted and followed
/// by a period.
pub fn translation_outcome(raw: &str) -> TranslationOutcome {
    let s = unwrap_reply(raw, &['.']);
    if s.is_empty() || s.chars().any(char::is_whitespace) || s.chars().all(|c| !c.is_alphanumeric())
    {
        TranslationOutcome::IfError
    } else {
        TranslationOutcome::Word(s.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use JudgmentOutcome::{IfError, Label as L};

    #[test]
    fn judgment_cases() {
        let cases = [
            ("yes", L(Label::Yes)),
            ("Yes", L(Label::Yes)),
            ("YES.", L(Label::Yes)),
            ("  no\n", L(Label::No)),
            ("'no'", L(Label::No)),
            ("\"inflected\"", L(Label::Inflected)),
            ("Inflected!", L(Label::Inflected)),
            ("“yes”", L(Label::Yes)),
            ("'yes'.", L(Label::Yes)),
            ("no,", L(Label::No)),
            ("Yes, it is.", IfError),
            ("yes no", IfError),
            ("maybe", IfError),
            ("The term is a dialectal variant, so yes", IfError),
            ("", IfError),
            ("The answer is yes", IfError),
            ("inflect", IfError),
            ("yes..", IfError),
            ("ja", IfError),
            ("'yes", IfError),
            ("- yes", IfError),
            ("no\n\nExplanation: different", IfError),
        ];
        for (raw, want) in cases {
            assert_eq!(parse_judgment(raw).outcome, want, "{raw:?}");
        }
    }

    #[test]
    fn translation_cases() {
        let w = |s: &str| TranslationOutcome::Word(s.into());
        let cases = [
            ("Haus", w("Haus")),
            (" Haus.\n", w("Haus")),
            ("'zweisprachig'", w("zweisprachig")),
            ("„Mädchen“", w("Mädchen")),
            ("Bundes-Land", w("Bundes-Land")),
            ("das Haus", TranslationOutcome::IfError),
            ("", TranslationOutcome::IfError),
            ("...", TranslationOutcome::IfError),
            ("Haus\nHaus", TranslationOutcome::IfError),
            ("Überprüfung", w("Überprüfung")),
            (
                "Die Übersetzung ist Überprüfung",
                TranslationOutcome::IfError,
            ),
        ];
        for (raw, want) in cases {
            assert_eq!(parse_translation(raw).outcome, want, "{raw:?}");
        }
    }

    proptest::proptest! {
        #[test]
        fn clean_token_is_fixed_point(w in "[A-Za-zÄÖÜäöüß][A-Za-zÄÖÜäöüß0-9-]{0,15}") {
            proptest::prop_assert_eq!(translation_outcome(&w), TranslationOutcome::Word(w.clone()));
        }

        #[test]
        fn judgment_is_label_or_if_error(raw in "\\PC{0,30}") {
            match judgment_outcome(&raw) {
                JudgmentOutcome::Label(l) => proptest::prop_assert!(Label::ALL.contains(&l)),
                JudgmentOutcome::IfError => {}
            }
        }
    }
}
