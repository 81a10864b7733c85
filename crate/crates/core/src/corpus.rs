//! Ingestion of the two monolingual corpora.
//!
//! The standard-language side arrives pre-tagged in a three-column format
//! (`surface<TAB>lemma<TAB>upos`, blank line between sentences, `#` comments).
//! The dialect side is raw text, either one sentence per line or plain
//! extracted wiki text that still needs sentence splitting.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Universal POS tag set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Upos {
    Adj,
    Adp,
    Adv,
    Aux,
    Cconj,
    Det,
    Intj,
    Noun,
    Num,
    Part,
    Pron,
    Propn,
    Punct,
    Sconj,
    Sym,
    Verb,
    X,
}

impl Upos {
    pub const ALL: [Upos; 17] = [
        Upos::Adj,
        Upos::Adp,
        Upos::Adv,
        Upos::Aux,
        Upos::Cconj,
        Upos::Det,
        Upos::Intj,
        Upos::Noun,
        Upos::Num,
        Upos::Part,
        Upos::Pron,
        Upos::Propn,
        Upos::Punct,
        Upos::Sconj,
        Upos::Sym,
        Upos::Verb,
        Upos::X,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Upos::Adj => "ADJ",
            Upos::Adp => "ADP",
            Upos::Adv => "ADV",
            Upos::Aux => "AUX",
            Upos::Cconj => "CCONJ",
            Upos::Det => "DET",
            Upos::Intj => "INTJ",
            Upos::Noun => "NOUN",
            Upos::Num => "NUM",
            Upos::Part => "PART",
            Upos::Pron => "PRON",
            Upos::Propn => "PROPN",
            Upos::Punct => "PUNCT",
            Upos::Sconj => "SCONJ",
            Upos::Sym => "SYM",
            Upos::Verb => "VERB",
            Upos::X => "X",
        }
    }

    /// Rank used to break ties when picking a lemma's most frequent tag.
    /// Lower wins: NOUN, PROPN, VERB, ADJ, ADV, then the rest alphabetically.
    pub fn tie_rank(self) -> u8 {
        match self {
            Upos::Noun => 0,
            Upos::Propn => 1,
            Upos::Verb => 2,
            Upos::Adj => 3,
            Upos::Adv => 4,
            // ALL is alphabetical, so the index keeps the remaining tags ordered.
            other => 5 + Upos::ALL.iter().position(|&t| t == other).unwrap() as u8,
        }
    }
}

impl fmt::Display for Upos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Upos {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Upos::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// Location of a sentence inside a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SentenceRef {
    pub doc_id: String,
    pub sentence_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub doc_id: String,
    pub sentence_index: usize,
    pub text: String,
}

impl SentenceRecord {
    pub fn sentence_ref(&self) -> SentenceRef {
        SentenceRef {
            doc_id: self.doc_id.clone(),
            sentence_index: self.sentence_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedToken {
    pub surface: String,
    pub lemma: String,
    pub upos: Upos,
    pub sentence_ref: SentenceRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DialectFormat {
    /// One sentence per line.
    #[default]
    PlainLines,
    /// Plain text extracted from a wiki dump. `<doc id="...">` / `</doc>`
    /// lines delimit documents; paragraphs are split into sentences.
    WikiExtract,
}

impl FromStr for DialectFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "plain-lines" => Ok(DialectFormat::PlainLines),
            "wiki-extract" => Ok(DialectFormat::WikiExtract),
            other => Err(format!("unknown dialect corpus format `{other}`")),
        }
    }
}

/// Reads one line at a time, tracking byte offsets so decode errors can be
/// located precisely.
struct LineReader<R> {
    inner: R,
    offset: usize,
    line_no: usize,
    buf: Vec<u8>,
}

impl<R: BufRead> LineReader<R> {
    fn new(inner: R) -> Self {
        LineReader {
            inner,
            offset: 0,
            line_no: 0,
            buf: Vec::new(),
        }
    }

    /// Next line without its terminator, with its 1-based line number.
    fn next_line(&mut self) -> Option<Result<(usize, String)>> {
        self.buf.clear();
        let start = self.offset;
        match self.inner.read_until(b'\n', &mut self.buf) {
            Ok(0) => return None,
            Ok(n) => self.offset += n,
            Err(e) => return Some(Err(e.into())),
        }
        self.line_no += 1;
        let mut bytes = &self.buf[..];
        if let Some(rest) = bytes.strip_suffix(b"\n") {
            bytes = rest;
        }
        if let Some(rest) = bytes.strip_suffix(b"\r") {
            bytes = rest;
        }
        match std::str::from_utf8(bytes) {
            Ok(s) => Some(Ok((self.line_no, s.to_string()))),
            Err(e) => Some(Err(Error::Decode {
                offset: start + e.valid_up_to(),
            })),
        }
    }
}

/// Streaming reader over a raw dialect corpus.
pub struct DialectReader<R> {
    lines: LineReader<R>,
    format: DialectFormat,
    doc_id: String,
    default_doc: String,
    next_index: usize,
    pending: std::collections::VecDeque<String>,
    failed: bool,
}

/// Ingests a dialect corpus. `source_name` is the document id used for text
/// outside any `<doc>` block (and for every sentence in plain-lines mode).
pub fn ingest_dialect_corpus<R: BufRead>(
    source: R,
    format: DialectFormat,
    source_name: &str,
) -> DialectReader<R> {
    DialectReader {
        lines: LineReader::new(source),
        format,
        doc_id: source_name.to_string(),
        default_doc: source_name.to_string(),
        next_index: 0,
        pending: Default::default(),
        failed: false,
    }
}

impl<R: BufRead> Iterator for DialectReader<R> {
    type Item = Result<SentenceRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(text) = self.pending.pop_front() {
                let record = SentenceRecord {
                    doc_id: self.doc_id.clone(),
                    sentence_index: self.next_index,
                    text,
                };
                self.next_index += 1;
                return Some(Ok(record));
            }
            if self.failed {
                return None;
            }
            let line = match self.lines.next_line()? {
                Ok((_, line)) => line,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            };
            match self.format {
                DialectFormat::PlainLines => {
                    let trimmed = line.trim();
                    if !trimmed.is_empty() {
                        self.pending.push_back(trimmed.to_string());
                    }
                }
                DialectFormat::WikiExtract => {
                    let trimmed = line.trim();
                    if let Some(id) = parse_doc_open(trimmed) {
                        self.doc_id = id;
                        self.next_index = 0;
                    } else if trimmed == "</doc>" {
                        self.doc_id = self.default_doc.clone();
                        self.next_index = 0;
                    } else {
                        self.pending.extend(split_sentences(trimmed));
                    }
                }
            }
        }
    }
}

fn parse_doc_open(line: &str) -> Option<String> {
    let rest = line.strip_prefix("<doc")?;
    if !rest.ends_with('>') {
        return None;
    }
    let start = rest.find("id=\"")? + 4;
    let len = rest[start..].find('"')?;
    Some(rest[start..start + len].to_string())
}

fn opens_sentence(c: char) -> bool {
    c.is_uppercase()
        || matches!(
            c,
            '"' | '\'' | '(' | '[' | '„' | '‚' | '«' | '»' | '“' | '‘'
        )
}

/// Splits a paragraph after `.`, `!` or `?` when followed by whitespace and
/// an uppercase letter or opening quote/bracket.
pub fn split_sentences(paragraph: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = paragraph.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut j = i + 1;
            while j < chars.len() && chars[j].1.is_whitespace() {
                j += 1;
            }
            if j > i + 1 && j < chars.len() && opens_sentence(chars[j].1) {
                let end = pos + c.len_utf8();
                let sentence = paragraph[start..end].trim();
                if !sentence.is_empty() {
                    out.push(sentence.to_string());
                }
                start = chars[j].0;
                i = j;
                continue;
            }
        }
        i += 1;
    }
    let tail = paragraph[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

/// A parsed tagged corpus: the token stream plus the sentences it forms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaggedCorpus {
    pub tokens: Vec<TaggedToken>,
    /// Sentence text is the surfaces joined by single spaces.
    pub sentences: Vec<SentenceRecord>,
}

/// Streaming reader over the three-column tagged format.
///
/// A `# newdoc id = X` comment starts document `X`; other comments are
/// skipped. Without one, tokens belong to the document named at
/// construction.
pub struct TaggedReader<R> {
    lines: LineReader<R>,
    doc_id: String,
    sentence_index: usize,
    in_sentence: bool,
    failed: bool,
}

pub fn ingest_tagged_corpus<R: BufRead>(source: R, source_name: &str) -> TaggedReader<R> {
    TaggedReader {
        lines: LineReader::new(source),
        doc_id: source_name.to_string(),
        sentence_index: 0,
        in_sentence: false,
        failed: false,
    }
}

/// Reads a whole tagged corpus and rebuilds its sentence list.
pub fn read_tagged_corpus<R: BufRead>(source: R, source_name: &str) -> Result<TaggedCorpus> {
    let mut corpus = TaggedCorpus::default();
    let mut current: Option<(SentenceRef, Vec<String>)> = None;
    for token in ingest_tagged_corpus(source, source_name) {
        let token = token?;
        match &mut current {
            Some((sref, words)) if *sref == token.sentence_ref => words.push(token.surface.clone()),
            _ => {
                if let Some((sref, words)) = current.take() {
                    corpus.sentences.push(SentenceRecord {
                        doc_id: sref.doc_id,
                        sentence_index: sref.sentence_index,
                        text: words.join(" "),
                    });
                }
                current = Some((token.sentence_ref.clone(), vec![token.surface.clone()]));
            }
        }
        corpus.tokens.push(token);
    }
    if let Some((sref, words)) = current {
        corpus.sentences.push(SentenceRecord {
            doc_id: sref.doc_id,
            sentence_index: sref.sentence_index,
            text: words.join(" "),
        });
    }
    Ok(corpus)
}

impl<R: BufRead> Iterator for TaggedReader<R> {
    type Item = Result<TaggedToken>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let (line_no, line) = match self.lines.next_line()? {
                Ok(l) => l,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            };
            if line.trim().is_empty() {
                if self.in_sentence {
                    self.sentence_index += 1;
                    self.in_sentence = false;
                }
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(id) = comment.trim().strip_prefix("newdoc id =") {
                    self.doc_id = id.trim().to_string();
                    self.sentence_index = 0;
                    self.in_sentence = false;
                }
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                self.failed = true;
                return Some(Err(Error::parse(
                    line_no,
                    format!("expected 3 tab-separated columns, found {}", cols.len()),
                )));
            }
            let (surface, lemma, tag) = (cols[0].trim(), cols[1].trim(), cols[2].trim());
            if surface.is_empty() || lemma.is_empty() {
                self.failed = true;
                return Some(Err(Error::parse(line_no, "empty surface or lemma")));
            }
            let upos = match tag.parse::<Upos>() {
                Ok(t) => t,
                Err(tag) => {
                    self.failed = true;
                    return Some(Err(Error::UnknownPos { line: line_no, tag }));
                }
            };
            self.in_sentence = true;
            return Some(Ok(TaggedToken {
                surface: surface.to_string(),
                lemma: lemma.to_string(),
                upos,
                sentence_ref: SentenceRef {
                    doc_id: self.doc_id.clone(),
                    sentence_index: self.sentence_index,
                },
            }));
        }
    }
}

/// Writes tokens back out in the column format. A `# newdoc id` line is
/// emitted at every document change so that re-parsing yields the same refs.
pub fn write_tagged_corpus<W: Write>(mut out: W, tokens: &[TaggedToken]) -> Result<()> {
    let mut prev: Option<&SentenceRef> = None;
    for token in tokens {
        let sref = &token.sentence_ref;
        match prev {
            Some(p) if p.doc_id == sref.doc_id => {
                if p.sentence_index != sref.sentence_index {
                    // Skipped sentence indices need extra breaks to round-trip.
                    for _ in p.sentence_index..sref.sentence_index {
                        writeln!(out)?;
                    }
                }
            }
            _ => {
                if prev.is_some() {
                    writeln!(out)?;
                }
                writeln!(out, "# newdoc id = {}", sref.doc_id)?;
                for _ in 0..sref.sentence_index {
                    writeln!(out)?;
                }
            }
        }
        writeln!(out, "{}\t{}\t{}", token.surface, token.lemma, token.upos)?;
        prev = Some(sref);
    }
    Ok(())
}

fn is_word_char(c: char) -> bool {
    c.is_alphabetic() || is_combining_mark(c)
}

fn is_combining_mark(c: char) -> bool {
    matches!(c as u32,
        0x0300..=0x036F | 0x1AB0..=0x1AFF | 0x1DC0..=0x1DFF | 0x20D0..=0x20FF | 0xFE20..=0xFE2F)
}

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '\'' | '’' | '‐')
}

/// Token spans as `(start, end)` char offsets into `sentence`.
///
/// A token is a maximal run of letters; a hyphen or apostrophe is kept when
/// it sits between two letters.
pub fn token_spans(sentence: &str) -> Vec<(usize, usize)> {
    let chars: Vec<char> = sentence.chars().collect();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !is_word_char(chars[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() {
            if is_word_char(chars[i]) {
                i += 1;
            } else if is_joiner(chars[i])
                && i + 1 < chars.len()
                && is_word_char(chars[i + 1])
                && i > start
            {
                i += 1;
            } else {
                break;
            }
        }
        spans.push((start, i));
    }
    spans
}

pub fn tokenize(sentence: &str) -> Vec<String> {
    let chars: Vec<char> = sentence.chars().collect();
    token_spans(sentence)
        .into_iter()
        .map(|(s, e)| chars[s..e].iter().collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dialect(text: &str, format: DialectFormat) -> Vec<SentenceRecord> {
        ingest_dialect_corpus(text.as_bytes(), format, "d")
            .collect::<Result<_>>()
            .unwrap()
    }

    #[test]
    fn plain_lines_one_sentence_per_line() {
        let recs = dialect("I bin do.\nMia san mia.", DialectFormat::PlainLines);
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].text, "Mia san mia.");
        assert_eq!(recs[1].sentence_index, 1);
    }

    #[test]
    fn empty_source_is_empty_stream() {
        assert!(dialect("", DialectFormat::PlainLines).is_empty());
        assert!(dialect("\n\n  \n", DialectFormat::WikiExtract).is_empty());
    }

    #[test]
    fn decode_error_reports_offset() {
        let bytes = b"gut\nsch\xc3\x28n\n";
        let err = ingest_dialect_corpus(&bytes[..], DialectFormat::PlainLines, "d")
            .collect::<Result<Vec<_>>>()
            .unwrap_err();
        assert!(matches!(err, Error::Decode { offset: 7 }), "{err:?}");
    }

    #[test]
    fn wiki_extract_splits_and_tracks_documents() {
        let text = "<doc id=\"7\" url=\"x\" title=\"Minga\">\nMinga\n\nDe Stod is groß. Do gibts vui Leit! „Sche“ is des? ja.\n</doc>\n<doc id=\"8\">\nZwoate Seitn.\n</doc>";
        let recs = dialect(text, DialectFormat::WikiExtract);
        let texts: Vec<_> = recs.iter().map(|r| r.text.as_str()).collect();
        assert_eq!(
            texts,
            [
                "Minga",
                "De Stod is groß.",
                "Do gibts vui Leit!",
                "„Sche“ is des? ja.",
                "Zwoate Seitn."
            ]
        );
        assert_eq!(recs[3].doc_id, "7");
        assert_eq!(recs[3].sentence_index, 3);
        assert_eq!(recs[4].doc_id, "8");
        assert_eq!(recs[4].sentence_index, 0);
    }

    #[test]
    fn tagged_line_maps_fields() {
        let toks: Vec<_> = ingest_tagged_corpus("Häuser\tHaus\tNOUN\n".as_bytes(), "t")
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(toks[0].surface, "Häuser");
        assert_eq!(toks[0].lemma, "Haus");
        assert_eq!(toks[0].upos, Upos::Noun);
    }

    #[test]
    fn blank_lines_advance_sentence_index() {
        let src = "# sent\nDas\tder\tDET\nHaus\tHaus\tNOUN\n\n\nEs\tes\tPRON\n";
        let toks: Vec<_> = ingest_tagged_corpus(src.as_bytes(), "t")
            .collect::<Result<_>>()
            .unwrap();
        let idx: Vec<_> = toks.iter().map(|t| t.sentence_ref.sentence_index).collect();
        assert_eq!(idx, [0, 0, 1]);
    }

    #[test]
    fn wrong_column_count_names_line() {
        let src = "Das\tder\tDET\nHaus\tNOUN\n";
        let err = ingest_tagged_corpus(src.as_bytes(), "t")
            .collect::<Result<Vec<_>>>()
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn unknown_tag_is_named() {
        let src = "Haus\tHaus\tNN\n";
        let err = ingest_tagged_corpus(src.as_bytes(), "t")
            .collect::<Result<Vec<_>>>()
            .unwrap_err();
        match err {
            Error::UnknownPos { line, tag } => {
                assert_eq!(line, 1);
                assert_eq!(tag, "NN");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tokenize_rules() {
        assert_eq!(tokenize("d'Wiesn is schee!"), ["d'Wiesn", "is", "schee"]);
        assert_eq!(tokenize("1984 woa a Joar"), ["woa", "a", "Joar"]);
        assert_eq!(tokenize("Αθήνα heißt Athen"), ["Αθήνα", "heißt", "Athen"]);
        assert_eq!(
            tokenize("Baden-Württemberg -- 'Zitat'"),
            ["Baden-Württemberg", "Zitat"]
        );
        assert_eq!(tokenize("abc123def"), ["abc", "def"]);
        assert!(tokenize("12, 13 ...").is_empty());
    }

    #[test]
    fn pos_tie_rank_order() {
        let mut tags = Upos::ALL.to_vec();
        tags.sort_by_key(|t| t.tie_rank());
        let names: Vec<_> = tags.iter().map(|t| t.as_str()).collect();
        assert_eq!(&names[..6], ["NOUN", "PROPN", "VERB", "ADJ", "ADV", "ADP"]);
        assert_eq!(names.last(), Some(&"X"));
    }
}
