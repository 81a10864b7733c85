//! Standard-lemma and dialect-term vocabularies.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, SentenceRecord, TaggedToken, Upos};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaEntry {
    pub lemma: String,
    pub pos_max: Upos,
    pub freq: u64,
    pub pos_counts: BTreeMap<Upos, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialectTermEntry {
    pub surface: String,
    pub freq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Cap on the standard vocabulary.
    pub n: usize,
    /// Neighbors per lemma.
    pub k: usize,
    /// Usage contexts per term.
    pub c: usize,
    /// Context characters on each side of a term.
    pub window: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n: 10_000,
            k: 10,
            c: 3,
            window: 50,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.window == 0 {
            return Err(Error::Config("n, k and window must be positive".into()));
        }
        Ok(())
    }
}

/// Per-lemma POS counts. Shards can be counted independently and merged.
#[derive(Debug, Clone, Default)]
pub struct LemmaCounts {
    counts: HashMap<String, BTreeMap<Upos, u64>>,
}

impl LemmaCounts {
    pub fn add(&mut self, token: &TaggedToken) {
        *self
            .counts
            .entry(token.lemma.clone())
            .or_default()
            .entry(token.upos)
            .or_insert(0) += 1;
    }

    pub fn merge(&mut self, other: LemmaCounts) {
        for (lemma, pos) in other.counts {
            let slot = self.counts.entry(lemma).or_default();
            for (tag, n) in pos {
                *slot.entry(tag).or_insert(0) += n;
            }
        }
    }

    pub fn into_entries(self, n: usize) -> Vec<LemmaEntry> {
        let mut entries: Vec<LemmaEntry> = self
            .counts
            .into_iter()
            .map(|(lemma, pos_counts)| {
                let freq = pos_counts.values().sum();
                let pos_max = pos_max(&pos_counts);
                LemmaEntry {
                    lemma,
                    pos_max,
                    freq,
                    pos_counts,
                }
            })
            .collect();
        entries.sort_by(|a, b| b.freq.cmp(&a.freq).then_with(|| a.lemma.cmp(&b.lemma)));
        entries.truncate(n);
        entries
    }
}

fn pos_max(counts: &BTreeMap<Upos, u64>) -> Upos {
    counts
        .iter()
        .max_by(|(ta, na), (tb, nb)| na.cmp(nb).then_with(|| tb.tie_rank().cmp(&ta.tie_rank())))
        .map(|(t, _)| *t)
        .expect("lemma with no POS counts")
}

/// Unique lemmas by descending frequency (ties lexicographic), truncated to `n`.
pub fn build_standard_vocab<I>(tokens: I, n: usize) -> Vec<LemmaEntry>
where
    I: IntoIterator<Item = TaggedToken>,
{
    let mut counts = LemmaCounts::default();
    for token in tokens {
        counts.add(&token);
    }
    counts.into_entries(n)
}

/// Surface-form counts over a dialect corpus. Mergeable like [`LemmaCounts`].
#[derive(Debug, Clone, Default)]
pub struct TermCounts {
    counts: HashMap<String, u64>,
}

impl TermCounts {
    pub fn add_sentence(&mut self, text: &str) {
        for token in tokenize(text) {
            *self.counts.entry(token).or_insert(0) += 1;
        }
    }

    pub fn merge(&mut self, other: TermCounts) {
        for (term, n) in other.counts {
            *self.counts.entry(term).or_insert(0) += n;
        }
    }

    /// Entries sorted by descending frequency, then surface.
    pub fn into_entries(self) -> Vec<DialectTermEntry> {
        let mut entries: Vec<_> = self
            .counts
            .into_iter()
            .map(|(surface, freq)| DialectTermEntry { surface, freq })
            .collect();
        entries.sort_by(|a, b| b.freq.cmp(&a.freq).then_with(|| a.surface.cmp(&b.surface)));
        entries
    }
}

pub fn build_dialect_vocab<'a, I>(sentences: I) -> Vec<DialectTermEntry>
where
    I: IntoIterator<Item = &'a SentenceRecord>,
{
    let mut counts = TermCounts::default();
    for s in sentences {
        counts.add_sentence(&s.text);
    }
    counts.into_entries()
}

/// Drops dialect terms that are themselves standard lemmas. With
/// `fold_case`, the comparison ignores case.
pub fn filter_shared(
    dialect: Vec<DialectTermEntry>,
    standard_lemmas: &HashSet<String>,
    fold_case: bool,
) -> Vec<DialectTermEntry> {
    if fold_case {
        let folded: HashSet<String> = standard_lemmas.iter().map(|s| s.to_lowercase()).collect();
        dialect
            .into_iter()
            .filter(|e| !folded.contains(&e.surface.to_lowercase()))
            .collect()
    } else {
        dialect
            .into_iter()
            .filter(|e| !standard_lemmas.contains(&e.surface))
            .collect()
    }
}

pub fn write_standard_tsv<W: Write>(mut out: W, entries: &[LemmaEntry]) -> Result<()> {
    writeln!(out, "lemma\tpos_max\tfreq")?;
    for e in entries {
        writeln!(out, "{}\t{}\t{}", e.lemma, e.pos_max, e.freq)?;
    }
    Ok(())
}

pub fn write_dialect_tsv<W: Write>(mut out: W, entries: &[DialectTermEntry]) -> Result<()> {
    writeln!(out, "surface\tfreq")?;
    for e in entries {
        writeln!(out, "{}\t{}", e.surface, e.freq)?;
    }
    Ok(())
}

fn tsv_rows<R: BufRead>(source: R, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rows = Vec::new();
    let width = header.split('\t').count();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if i == 0 {
            if line != header {
                return Err(Error::parse(line_no, format!("expected header `{header}`")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let cols: Vec<String> = line.split('\t').map(str::to_string).collect();
        if cols.len() != width {
            return Err(Error::parse(
                line_no,
                format!("expected {width} columns, found {}", cols.len()),
            ));
        }
        rows.push((line_no, cols));
    }
    Ok(rows)
}

fn parse_freq(line: usize, s: &str) -> Result<u64> {
    match s.parse::<u64>() {
        Ok(f) if f > 0 => Ok(f),
        _ => Err(Error::parse(line, format!("invalid frequency `{s}`"))),
    }
}

/// Reads the standard vocabulary export. Only the dominant tag survives the
/// round trip, so `pos_counts` holds a single entry.
pub fn read_standard_tsv<R: BufRead>(source: R) -> Result<Vec<LemmaEntry>> {
    tsv_rows(source, "lemma\tpos_max\tfreq")?
        .into_iter()
        .map(|(line, cols)| {
            let pos_max: Upos = cols[1]
                .parse()
                .map_err(|tag| Error::UnknownPos { line, tag })?;
            let freq = parse_freq(line, &cols[2])?;
            Ok(LemmaEntry {
                lemma: cols[0].clone(),
                pos_max,
                freq,
                pos_counts: BTreeMap::from([(pos_max, freq)]),
            })
        })
        .collect()
}

pub fn read_dialect_tsv<R: BufRead>(source: R) -> Result<Vec<DialectTermEntry>> {
    tsv_rows(source, "surface\tfreq")?
        .into_iter()
        .map(|(line, cols)| {
            Ok(DialectTermEntry {
                surface: cols[0].clone(),
                freq: parse_freq(line, &cols[1])?,
            })
        })
        .collect()
}
