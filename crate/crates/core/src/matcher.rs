//! Candidate extraction: the k lexically closest dialect terms for every
//! standard lemma, with usage contexts cut from the dialect corpus.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{token_spans, SentenceRecord, SentenceRef, Upos};
use crate::error::{Error, Result};
use crate::index::{build_index, knn, IndexKind, NeighborIndex};
use crate::vocab::{DialectTermEntry, LemmaEntry, PipelineConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub lemma: String,
    pub pos_max: Upos,
    pub term: String,
    pub distance: usize,
    pub rank: usize,
    pub term_freq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageContext {
    pub term: String,
    pub snippet: String,
    pub source: SentenceRef,
}

/// Token occurrences in a dialect corpus, for whole-token context lookup.
pub struct CorpusIndex {
    sentences: Vec<SentenceRecord>,
    /// term -> (sentence position, start char, end char), in corpus order.
    occurrences: HashMap<String, Vec<(usize, usize, usize)>>,
}

impl CorpusIndex {
    pub fn new(sentences: Vec<SentenceRecord>) -> Self {
        let mut occurrences: HashMap<String, Vec<(usize, usize, usize)>> = HashMap::new();
        for (pos, s) in sentences.iter().enumerate() {
            let chars: Vec<char> = s.text.chars().collect();
            for (start, end) in token_spans(&s.text) {
                let token: String = chars[start..end].iter().collect();
                occurrences
                    .entry(token)
                    .or_default()
                    .push((pos, start, end));
            }
        }
        CorpusIndex {
            sentences,
            occurrences,
        }
    }

    pub fn sentences(&self) -> &[SentenceRecord] {
        &self.sentences
    }
}

/// Up to `c` contexts for `term`, first occurrences first. Each snippet is
/// the term plus at most `window` chars on either side, clipped to its
/// sentence.
pub fn extract_contexts(
    term: &str,
    corpus: &CorpusIndex,
    c: usize,
    window: usize,
) -> Vec<UsageContext> {
    let Some(occ) = corpus.occurrences.get(term) else {
        return Vec::new();
    };
    occ.iter()
        .take(c)
        .map(|&(pos, start, end)| {
            let sentence = &corpus.sentences[pos];
            let from = start.saturating_sub(window);
            let snippet: String = sentence
                .text
                .chars()
                .skip(from)
                .take(end + window - from)
                .collect();
            UsageContext {
                term: term.to_string(),
                snippet,
                source: sentence.sentence_ref(),
            }
        })
        .collect()
}

/// Per-lemma generator, derived from the global seed and the lemma so that
/// results do not depend on the order lemmas are processed in.
pub fn lemma_rng(seed: u64, lemma: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(lemma.as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoredCandidate {
    pub pair: CandidatePair,
    pub contexts: Vec<UsageContext>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateRow {
    pub lemma: LemmaEntry,
    pub candidates: Vec<ScoredCandidate>,
    /// Fewer than k terms were available.
    pub short: bool,
}

pub fn build_candidate_table(
    standard: &[LemmaEntry],
    dialect: &[DialectTermEntry],
    corpus: &CorpusIndex,
    config: &PipelineConfig,
    index_kind: IndexKind,
) -> Result<Vec<CandidateRow>> {
    config.validate()?;
    let index = build_index(dialect, index_kind)?;
    match_with_index(standard, index.as_ref(), corpus, config)
}

pub fn match_with_index(
    standard: &[LemmaEntry],
    index: &dyn NeighborIndex,
    corpus: &CorpusIndex,
    config: &PipelineConfig,
) -> Result<Vec<CandidateRow>> {
    standard
        .par_iter()
        .map(|entry| {
            let mut rng = lemma_rng(config.seed, &entry.lemma);
            let result = knn(&entry.lemma, index, config.k, &mut rng)?;
            let candidates = result
                .neighbors
                .into_iter()
                .map(|n| {
                    if n.distance == 0 {
                        return Err(Error::Pipeline(format!(
                            "dialect term `{}` equals lemma `{}`; filter shared tokens first",
                            n.term, entry.lemma
                        )));
                    }
                    let contexts = extract_contexts(&n.term, corpus, config.c, config.window);
                    Ok(ScoredCandidate {
                        pair: CandidatePair {
                            lemma: entry.lemma.clone(),
                            pos_max: entry.pos_max,
                            term: n.term,
                            distance: n.distance,
                            rank: n.rank,
                            term_freq: n.term_freq,
                        },
                        contexts,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CandidateRow {
                lemma: entry.clone(),
                candidates,
                short: result.short,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextRecord {
    pub snippet: String,
    pub doc_id: String,
    pub sentence_index: usize,
}

/// One line of the candidate table export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub lemma: String,
    pub pos_max: Upos,
    pub lemma_freq: u64,
    pub term: String,
    pub term_freq: u64,
    pub distance: usize,
    pub rank: usize,
    pub contexts: Vec<ContextRecord>,
}

impl CandidateRecord {
    pub fn from_row(row: &CandidateRow, cand: &ScoredCandidate) -> Self {
        CandidateRecord {
            lemma: cand.pair.lemma.clone(),
            pos_max: cand.pair.pos_max,
            lemma_freq: row.lemma.freq,
            term: cand.pair.term.clone(),
            term_freq: cand.pair.term_freq,
            distance: cand.pair.distance,
            rank: cand.pair.rank,
            contexts: cand
                .contexts
                .iter()
                .map(|c| ContextRecord {
                    snippet: c.snippet.clone(),
                    doc_id: c.source.doc_id.clone(),
                    sentence_index: c.source.sentence_index,
                })
                .collect(),
        }
    }
}

pub fn write_candidates_jsonl<W: Write>(mut out: W, rows: &[CandidateRow]) -> Result<()> {
    for row in rows {
        for cand in &row.candidates {
            serde_json::to_writer(&mut out, &CandidateRecord::from_row(row, cand))?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn read_candidates_jsonl<R: BufRead>(source: R) -> Result<Vec<CandidateRecord>> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}
