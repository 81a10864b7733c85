//! The candidate-generation chain: vocabularies, shared-token filtering and
//! nearest-neighbor matching with usage contexts.

use std::collections::HashSet;

use crate::corpus::{SentenceRecord, TaggedToken};
use crate::error::Result;
use crate::index::IndexKind;
use crate::matcher::{build_candidate_table, CandidateRow, CorpusIndex};
use crate::vocab::{
    build_dialect_vocab, build_standard_vocab, filter_shared, DialectTermEntry, LemmaEntry,
    PipelineConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MatchOptions {
    pub index: IndexKind,
    /// Compare shared tokens case-insensitively.
    pub fold_case_filter: bool,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub standard: Vec<LemmaEntry>,
    /// Dialect vocabulary after removing tokens shared with `standard`.
    pub dialect: Vec<DialectTermEntry>,
    /// Dialect tokens removed by the shared-token filter.
    pub shared_removed: usize,
    pub rows: Vec<CandidateRow>,
}

/// Dialect vocabulary minus the standard lemmas.
pub fn shared_filtered_dialect(
    standard: &[LemmaEntry],
    sentences: &[SentenceRecord],
    fold_case: bool,
) -> (Vec<DialectTermEntry>, usize) {
    let lemmas: HashSet<String> = standard.iter().map(|e| e.lemma.clone()).collect();
    let all = build_dialect_vocab(sentences);
    let before = all.len();
    let kept = filter_shared(all, &lemmas, fold_case);
    let removed = before - kept.len();
    (kept, removed)
}

pub fn run_pipeline(
    tokens: Vec<TaggedToken>,
    sentences: Vec<SentenceRecord>,
    config: &PipelineConfig,
    options: MatchOptions,
) -> Result<PipelineOutput> {
    config.validate()?;
    let standard = build_standard_vocab(tokens, config.n);
    let (dialect, shared_removed) =
        shared_filtered_dialect(&standard, &sentences, options.fold_case_filter);
    let corpus = CorpusIndex::new(sentences);
    let rows = build_candidate_table(&standard, &dialect, &corpus, config, options.index)?;
    Ok(PipelineOutput {
        standard,
        dialect,
        shared_removed,
        rows,
    })
}
