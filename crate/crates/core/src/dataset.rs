//! Annotation storage, gold adjudication, agreement, splitting and the
//! final variation dictionary.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{SentenceRef, Upos};
use crate::error::{Error, Result};
use crate::journal::open_journal;
use crate::matcher::{CandidateRecord, UsageContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Yes,
    Inflected,
    No,
}

impl Label {
    /// Fixed class order, also the tie-break order for classifiers.
    pub const ALL: [Label; 3] = [Label::Yes, Label::Inflected, Label::No];

    pub fn index(self) -> usize {
        match self {
            Label::Yes => 0,
            Label::Inflected => 1,
            Label::No => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Yes => "yes",
            Label::Inflected => "inflected",
            Label::No => "no",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "yes" => Ok(Label::Yes),
            "inflected" => Ok(Label::Inflected),
            "no" => Ok(Label::No),
            other => Err(Error::Validation(format!("invalid label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gold {
    /// Not adjudicated yet.
    #[default]
    Pending,
    /// Annotators disagreed without a strict majority.
    Unresolved,
    Label(Label),
}

impl Gold {
    pub fn label(self) -> Option<Label> {
        match self {
            Gold::Label(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gold::Pending => "",
            Gold::Unresolved => "unresolved",
            Gold::Label(l) => l.as_str(),
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "" => Ok(Gold::Pending),
            "unresolved" => Ok(Gold::Unresolved),
            other => other.parse().map(Gold::Label),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Dev,
    Test,
    #[default]
    Unassigned,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Dev => "dev",
            Split::Test => "test",
            Split::Unassigned => "",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            "" | "unassigned" => Ok(Split::Unassigned),
            other => Err(Error::Validation(format!("invalid split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub pair_id: String,
    pub annotator_id: String,
    pub label: Label,
    pub ts: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetItem {
    pub pair_id: String,
    pub lemma: String,
    pub pos_max: Upos,
    pub term: String,
    pub distance: usize,
    pub contexts: Vec<UsageContext>,
    pub gold: Gold,
    pub split: Split,
}

/// Stable id of the `rank`-th candidate of the `row`-th lemma.
pub fn pair_id(row: usize, rank: usize) -> String {
    format!("P{row:06}-{rank:02}")
}

/// Dataset items from a candidate export, one per line, with ids derived
/// from lemma order and rank.
pub fn items_from_candidates(records: &[CandidateRecord]) -> Vec<DatasetItem> {
    let mut row = 0;
    let mut prev: Option<&str> = None;
    records
        .iter()
        .map(|r| {
            if let Some(p) = prev {
                if p != r.lemma {
                    row += 1;
                }
            }
            prev = Some(&r.lemma);
            DatasetItem {
                pair_id: pair_id(row, r.rank),
                lemma: r.lemma.clone(),
                pos_max: r.pos_max,
                term: r.term.clone(),
                distance: r.distance,
                contexts: r
                    .contexts
                    .iter()
                    .map(|c| UsageContext {
                        term: r.term.clone(),
                        snippet: c.snippet.clone(),
                        source: SentenceRef {
                            doc_id: c.doc_id.clone(),
                            sentence_index: c.sentence_index,
                        },
                    })
                    .collect(),
                gold: Gold::Pending,
                split: Split::Unassigned,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ack {
    Created,
    Replaced,
}

/// Annotation state backed by an append-only JSONL log. Replaying the log
/// rebuilds the state; a later record for the same (pair, annotator)
/// replaces the earlier one.
pub struct AnnotationStore {
    known: HashSet<String>,
    labels: BTreeMap<(String, String), AnnotationRecord>,
    log: Option<(PathBuf, File)>,
    log_records: usize,
}

impl AnnotationStore {
    pub fn in_memory<I: IntoIterator<Item = String>>(pair_ids: I) -> Self {
        AnnotationStore {
            known: pair_ids.into_iter().collect(),
            labels: BTreeMap::new(),
            log: None,
            log_records: 0,
        }
    }

    /// Opens (or creates) the log at `path` and replays it.
    pub fn open<I: IntoIterator<Item = String>>(
        pair_ids: I,
        path: impl AsRef<Path>,
    ) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut store = Self::in_memory(pair_ids);
        let (records, file) = open_journal::<AnnotationRecord>(&path)?;
        for rec in records {
            store.apply(rec)?;
            store.log_records += 1;
        }
        store.log = Some((path, file));
        Ok(store)
    }

    fn apply(&mut self, rec: AnnotationRecord) -> Result<Ack> {
        if !self.known.contains(&rec.pair_id) {
            return Err(Error::NotFound(rec.pair_id));
        }
        let key = (rec.pair_id.clone(), rec.annotator_id.clone());
        Ok(match self.labels.insert(key, rec) {
            Some(_) => Ack::Replaced,
            None => Ack::Created,
        })
    }

    /// Validates and durably appends a record before acknowledging it.
    pub fn record_annotation(&mut self, rec: AnnotationRecord) -> Result<Ack> {
        if !self.known.contains(&rec.pair_id) {
            return Err(Error::NotFound(rec.pair_id));
        }
        if rec.annotator_id.trim().is_empty() {
            return Err(Error::Validation("annotator id must not be empty".into()));
        }
        if let Some((_, file)) = &mut self.log {
            let mut line = serde_json::to_vec(&rec)?;
            line.push(b'\n');
            file.write_all(&line)?;
            file.sync_data()?;
            self.log_records += 1;
        }
        self.apply(rec)
    }

    pub fn contains_pair(&self, pair_id: &str) -> bool {
        self.known.contains(pair_id)
    }

    pub fn log_path(&self) -> Option<&Path> {
        self.log.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn records(&self) -> impl Iterator<Item = &AnnotationRecord> {
        self.labels.values()
    }

    pub fn label_of(&self, pair_id: &str, annotator: &str) -> Option<Label> {
        self.labels
            .get(&(pair_id.to_string(), annotator.to_string()))
            .map(|r| r.label)
    }

    /// Labels per pair, ordered by annotator id.
    pub fn labels_by_pair(&self) -> BTreeMap<&str, Vec<Label>> {
        let mut out: BTreeMap<&str, Vec<Label>> = BTreeMap::new();
        for ((pair, _), rec) in &self.labels {
            out.entry(pair.as_str()).or_default().push(rec.label);
        }
        out
    }

    pub fn progress(&self) -> Progress {
        let mut p = Progress::default();
        for rec in self.labels.values() {
            p.total += 1;
            let entry = p.per_annotator.entry(rec.annotator_id.clone()).or_default();
            entry.total += 1;
            *entry.per_label.entry(rec.label).or_insert(0) += 1;
            *p.per_label.entry(rec.label).or_insert(0) += 1;
        }
        p.pairs_labeled = self.labels_by_pair().len();
        p.pairs_total = self.known.len();
        p
    }

    /// Fleiss' kappa over the pairs carrying the largest number of
    /// annotations seen on any pair (at least two).
    pub fn agreement(&self) -> Option<Agreement> {
        let by_pair = self.labels_by_pair();
        let raters = by_pair.values().map(Vec::len).max()?;
        if raters < 2 {
            return None;
        }
        let matrix: Vec<Vec<Label>> = by_pair
            .into_values()
            .filter(|l| l.len() == raters)
            .collect();
        let items = matrix.len();
        Some(Agreement {
            items,
            raters,
            kappa: fleiss_kappa(&matrix).ok(),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AnnotatorProgress {
    pub total: usize,
    pub per_label: BTreeMap<Label, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Progress {
    pub total: usize,
    pub pairs_labeled: usize,
    pub pairs_total: usize,
    pub per_label: BTreeMap<Label, usize>,
    pub per_annotator: BTreeMap<String, AnnotatorProgress>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agreement {
    pub items: usize,
    pub raters: usize,
    /// `None` when kappa is undefined for the current matrix.
    pub kappa: Option<f64>,
}

/// Strict-majority gold label; `Unresolved` when no label has more than
/// half of the votes.
pub fn adjudicate(labels: &[Label]) -> Gold {
    if labels.is_empty() {
        return Gold::Pending;
    }
    let mut counts = [0usize; 3];
    for l in labels {
        counts[l.index()] += 1;
    }
    Label::ALL
        .into_iter()
        .find(|l| 2 * counts[l.index()] > labels.len())
        .map_or(Gold::Unresolved, Gold::Label)
}

/// Sets `gold` on every item from the store's current labels.
pub fn adjudicate_items(items: &mut [DatasetItem], store: &AnnotationStore) {
    let by_pair = store.labels_by_pair();
    for item in items {
        item.gold = by_pair
            .get(item.pair_id.as_str())
            .map_or(Gold::Pending, |l| adjudicate(l));
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KappaError {
    #[error("no items")]
    Empty,
    #[error("item {item} has {found} ratings, expected {expected}")]
    Ragged {
        item: usize,
        found: usize,
        expected: usize,
    },
    #[error("at least two raters per item are required")]
    TooFewRaters,
    #[error("kappa is undefined when every rating falls in one category")]
    Undefined,
}

/// Fleiss' kappa from per-item category counts. Every row must sum to the
/// same number of raters.
pub fn fleiss_kappa_counts(counts: &[Vec<usize>]) -> std::result::Result<f64, KappaError> {
    let first = counts.first().ok_or(KappaError::Empty)?;
    let raters: usize = first.iter().sum();
    if raters < 2 {
        return Err(KappaError::TooFewRaters);
    }
    let categories = first.len();
    let mut totals = vec![0usize; categories];
    let mut p_bar = 0.0;
    for (i, row) in counts.iter().enumerate() {
        let r: usize = row.iter().sum();
        if r != raters || row.len() != categories {
            return Err(KappaError::Ragged {
                item: i,
                found: r,
                expected: raters,
            });
        }
        let agree: usize = row.iter().map(|&n| n * n.saturating_sub(1)).sum();
        p_bar += agree as f64 / (raters * (raters - 1)) as f64;
        for (t, &n) in totals.iter_mut().zip(row) {
            *t += n;
        }
    }
    let n_items = counts.len() as f64;
    p_bar /= n_items;
    let all = n_items * raters as f64;
    let p_e: f64 = totals.iter().map(|&t| (t as f64 / all).powi(2)).sum();
    if (1.0 - p_e).abs() < f64::EPSILON {
        return Err(KappaError::Undefined);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Fleiss' kappa over items × raters labels.
pub fn fleiss_kappa(matrix: &[Vec<Label>]) -> std::result::Result<f64, KappaError> {
    let counts: Vec<Vec<usize>> = matrix
        .iter()
        .map(|labels| {
            let mut c = vec![0usize; 3];
            for l in labels {
                c[l.index()] += 1;
            }
            c
        })
        .collect();
    fleiss_kappa_counts(&counts)
}

/// Marks exactly `dev_size` items as dev, drawn uniformly under `seed`;
/// the rest become test.
pub fn split_dev_test(items: &mut [DatasetItem], dev_size: usize, seed: u64) -> Result<()> {
    if dev_size == 0 || items.len() <= dev_size {
        return Err(Error::Config(format!(
            "dev size {dev_size} needs more than {} items",
            items.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dev: HashSet<usize> = sample(&mut rng, items.len(), dev_size)
        .into_iter()
        .collect();
    for (i, item) in items.iter_mut().enumerate() {
        item.split = if dev.contains(&i) {
            Split::Dev
        } else {
            Split::Test
        };
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictionaryEntry {
    pub translations: Vec<String>,
    pub inflected_forms: Vec<String>,
}

pub type VariationDictionary = BTreeMap<String, DictionaryEntry>;

/// Collects `yes` items as translations and `inflected` items as inflected
/// forms. A term is listed once per lemma; its first gold label decides.
pub fn compile_dictionary(items: &[DatasetItem]) -> VariationDictionary {
    let mut dict = VariationDictionary::new();
    for item in items {
        let Some(label) = item.gold.label() else {
            continue;
        };
        if label == Label::No {
            continue;
        }
        let entry = dict.entry(item.lemma.clone()).or_default();
        if entry.translations.contains(&item.term) || entry.inflected_forms.contains(&item.term) {
            continue;
        }
        match label {
            Label::Yes => entry.translations.push(item.term.clone()),
            Label::Inflected => entry.inflected_forms.push(item.term.clone()),
            Label::No => unreachable!(),
        }
    }
    dict
}

/// The translation task uses the gold `yes` items.
pub fn translation_slice(items: &[DatasetItem]) -> Vec<&DatasetItem> {
    items
        .iter()
        .filter(|i| i.gold == Gold::Label(Label::Yes))
        .collect()
}

pub const TSV_HEADER: [&str; 10] = [
    "pair_id",
    "lemma",
    "pos_max",
    "term",
    "distance",
    "gold",
    "split",
    "context_1",
    "context_2",
    "context_3",
];

pub fn write_dataset_tsv<W: Write>(out: W, items: &[DatasetItem]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(out);
    w.write_record(TSV_HEADER)?;
    for item in items {
        let distance = item.distance.to_string();
        let mut row = vec![
            item.pair_id.as_str(),
            item.lemma.as_str(),
            item.pos_max.as_str(),
            item.term.as_str(),
            distance.as_str(),
            item.gold.as_str(),
            item.split.as_str(),
        ];
        for i in 0..3 {
            row.push(item.contexts.get(i).map_or("", |c| c.snippet.as_str()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_line(e: &csv::Error) -> usize {
    e.position().map_or(0, |p| p.line() as usize)
}

/// Reads a dataset TSV. Context sources are not part of the schema, so the
/// loaded contexts carry an empty document id.
pub fn read_dataset_tsv<R: Read>(source: R) -> Result<Vec<DatasetItem>> {
    let mut r = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    let headers = r
        .headers()
        .map_err(|e| Error::parse(csv_line(&e), e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != TSV_HEADER {
        return Err(Error::parse(
            1,
            format!("expected header {}", TSV_HEADER.join("\t")),
        ));
    }
    let mut items = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::parse(csv_line(&e), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        items.push(item_from_fields(line, &rec.iter().collect::<Vec<_>>())?);
    }
    Ok(items)
}

fn item_from_fields(line: usize, f: &[&str]) -> Result<DatasetItem> {
    let bad = |msg: String| Error::parse(line, msg);
    if f.len() != TSV_HEADER.len() {
        return Err(bad(format!(
            "expected {} fields, found {}",
            TSV_HEADER.len(),
            f.len()
        )));
    }
    if f[0].is_empty() {
        return Err(bad("empty pair_id".into()));
    }
    let pos_max: Upos = f[2]
        .parse()
        .map_err(|tag| Error::UnknownPos { line, tag })?;
    let distance = f[4]
        .parse()
        .map_err(|_| bad(format!("invalid distance `{}`", f[4])))?;
    let gold = Gold::parse(f[5]).map_err(|e| bad(e.to_string()))?;
    let split = Split::parse(f[6]).map_err(|e| bad(e.to_string()))?;
    let contexts = f[7..]
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| UsageContext {
            term: f[3].to_string(),
            snippet: s.to_string(),
            source: SentenceRef {
                doc_id: String::new(),
                sentence_index: 0,
            },
        })
        .collect();
    Ok(DatasetItem {
        pair_id: f[0].to_string(),
        lemma: f[1].to_string(),
        pos_max,
        term: f[3].to_string(),
        distance,
        contexts,
        gold,
        split,
    })
}

#[derive(Deserialize)]
struct JsonItem {
    pair_id: String,
    lemma: String,
    pos_max: String,
    term: String,
    distance: usize,
    #[serde(default)]
    gold: String,
    #[serde(default)]
    split: String,
    #[serde(default)]
    contexts: Vec<String>,
}

/// Loads a released dataset file: the TSV schema, or JSONL objects with the
/// same field names (`contexts` as a list of snippets).
pub fn load_released_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetItem>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    let is_jsonl = matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("jsonl" | "json")
    );
    if !is_jsonl {
        return read_dataset_tsv(file);
    }
    let mut items = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let j: JsonItem =
            serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        let distance = j.distance.to_string();
        let mut fields = vec![
            j.pair_id.as_str(),
            j.lemma.as_str(),
            j.pos_max.as_str(),
            j.term.as_str(),
            distance.as_str(),
            j.gold.as_str(),
            j.split.as_str(),
        ];
        for k in 0..3 {
            fields.push(j.contexts.get(k).map_or("", String::as_str));
        }
        items.push(item_from_fields(i + 1, &fields)?);
    }
    Ok(items)
}

/// Gold label counts per POS.
pub fn label_counts_by_pos(items: &[DatasetItem]) -> BTreeMap<Upos, [usize; 3]> {
    let mut out: BTreeMap<Upos, [usize; 3]> = BTreeMap::new();
    for item in items {
        if let Some(l) = item.gold.label() {
            out.entry(item.pos_max).or_default()[l.index()] += 1;
        }
    }
    out
}

pub fn label_totals(items: &[DatasetItem]) -> [usize; 3] {
    let mut t = [0; 3];
    for item in items {
        if let Some(l) = item.gold.label() {
            t[l.index()] += 1;
        }
    }
    t
}

/// Index from pair id to item position.
pub fn index_by_pair(items: &[DatasetItem]) -> HashMap<&str, usize> {
    items
        .iter()
        .enumerate()
        .map(|(i, it)| (it.pair_id.as_str(), i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use Label::*;

    fn item(id: &str, lemma: &str, term: &str, gold: Gold) -> DatasetItem {
        DatasetItem {
            pair_id: id.into(),
            lemma: lemma.into(),
            pos_max: Upos::Adj,
            term: term.into(),
            distance: crate::distance::levenshtein(lemma, term),
            contexts: Vec::new(),
            gold,
            split: Split::Unassigned,
        }
    }

    fn rec(pair: &str, who: &str, label: Label) -> AnnotationRecord {
        AnnotationRecord {
            pair_id: pair.into(),
            annotator_id: who.into(),
            label,
            ts: Utc::now(),
        }
    }

    #[test]
    fn adjudication_rule() {
        assert_eq!(adjudicate(&[Yes, Yes, No]), Gold::Label(Yes));
        assert_eq!(adjudicate(&[Yes, Inflected, No]), Gold::Unresolved);
        assert_eq!(adjudicate(&[Inflected]), Gold::Label(Inflected));
        assert_eq!(adjudicate(&[Yes, No]), Gold::Unresolved);
    }

    #[test]
    fn store_overwrites_and_rejects_unknown() {
        let mut store = AnnotationStore::in_memory(["p1".to_string()]);
        assert_eq!(
            store.record_annotation(rec("p1", "a", Yes)).unwrap(),
            Ack::Created
        );
        assert_eq!(store.progress().total, 1);
        assert_eq!(
            store.record_annotation(rec("p1", "a", No)).unwrap(),
            Ack::Replaced
        );
        assert_eq!(store.progress().total, 1);
        assert_eq!(store.label_of("p1", "a"), Some(No));
        assert!(matches!(
            store.record_annotation(rec("zz", "a", No)),
            Err(Error::NotFound(_))
        ));
    }

    #[test]
    fn log_replay_restores_state() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("ann.jsonl");
        let ids = || ["p1".to_string(), "p2".to_string()];
        {
            let mut store = AnnotationStore::open(ids(), &log).unwrap();
            store.record_annotation(rec("p1", "a", Yes)).unwrap();
            store.record_annotation(rec("p2", "a", No)).unwrap();
            store.record_annotation(rec("p1", "a", Inflected)).unwrap();
        }
        let store = AnnotationStore::open(ids(), &log).unwrap();
        assert_eq!(store.label_of("p1", "a"), Some(Inflected));
        assert_eq!(store.label_of("p2", "a"), Some(No));
        assert_eq!(store.progress().total, 2);
    }

    /// Direct evaluation of the textbook definitions.
    fn kappa_oracle(m: &[Vec<usize>]) -> f64 {
        let n = m.len() as f64;
        let r = m[0].iter().sum::<usize>() as f64;
        let k = m[0].len();
        let p_j: Vec<f64> = (0..k)
            .map(|j| m.iter().map(|row| row[j] as f64).sum::<f64>() / (n * r))
            .collect();
        let p_i: Vec<f64> = m
            .iter()
            .map(|row| (row.iter().map(|&x| (x * x) as f64).sum::<f64>() - r) / (r * (r - 1.0)))
            .collect();
        let p_bar = p_i.iter().sum::<f64>() / n;
        let p_e = p_j.iter().map(|p| p * p).sum::<f64>();
        (p_bar - p_e) / (1.0 - p_e)
    }

    #[test]
    fn kappa_against_formula() {
        let m = vec![vec![3, 0, 0], vec![1, 2, 0], vec![0, 1, 2], vec![0, 0, 3]];
        let expected = kappa_oracle(&m);
        assert_abs_diff_eq!(fleiss_kappa_counts(&m).unwrap(), expected, epsilon = 1e-12);
        // Hand value: P̄ = (1 + 1/3 + 1/3 + 1)/4 = 2/3, p = (1/3, 1/4, 5/12).
        let p_e: f64 = (1.0f64 / 9.0) + (1.0 / 16.0) + (25.0 / 144.0);
        assert_abs_diff_eq!(expected, (2.0 / 3.0 - p_e) / (1.0 - p_e), epsilon = 1e-12);
    }

    #[test]
    fn kappa_edge_cases() {
        let perfect = vec![vec![Yes, Yes], vec![No, No], vec![Inflected, Inflected]];
        assert_abs_diff_eq!(fleiss_kappa(&perfect).unwrap(), 1.0, epsilon = 1e-12);
        let single = vec![vec![No, No, No], vec![No, No, No]];
        assert_eq!(fleiss_kappa(&single), Err(KappaError::Undefined));
        assert_eq!(fleiss_kappa(&[vec![Yes]]), Err(KappaError::TooFewRaters));
        assert!(matches!(
            fleiss_kappa(&[vec![Yes, No], vec![Yes]]),
            Err(KappaError::Ragged { .. })
        ));
        assert_eq!(fleiss_kappa(&[]), Err(KappaError::Empty));
    }

    fn many(n: usize) -> Vec<DatasetItem> {
        (0..n)
            .map(|i| item(&pair_id(i, 1), "a", "b", Gold::Pending))
            .collect()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let mut a = many(1000);
        split_dev_test(&mut a, 300, 42).unwrap();
        assert_eq!(a.iter().filter(|i| i.split == Split::Dev).count(), 300);
        assert_eq!(a.iter().filter(|i| i.split == Split::Test).count(), 700);
        let mut b = many(1000);
        split_dev_test(&mut b, 300, 42).unwrap();
        assert_eq!(a, b);
        let mut c = many(300);
        assert!(matches!(
            split_dev_test(&mut c, 300, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn dictionary_from_example_pairs() {
        let items = vec![
            item("1", "zweisprachig", "zwaasprochig", Gold::Label(Yes)),
            item("2", "zweisprachig", "zwaspråchig", Gold::Label(Yes)),
            item("3", "zweisprachig", "zwoasprachign", Gold::Label(Inflected)),
            item("4", "zweisprachig", "dreisprochige", Gold::Label(No)),
        ];
        let dict = compile_dictionary(&items);
        let e = &dict["zweisprachig"];
        assert_eq!(e.translations, ["zwaasprochig", "zwaspråchig"]);
        assert_eq!(e.inflected_forms, ["zwoasprachign"]);

        let all_no = vec![
            item("1", "a", "b", Gold::Label(No)),
            item("2", "a", "c", Gold::Unresolved),
        ];
        assert!(compile_dictionary(&all_no).is_empty());
    }

    #[test]
    fn tsv_round_trip_with_awkward_snippets() {
        let mut it = item("P000000-01", "dazwischen", "dozwischn", Gold::Label(Yes));
        it.split = Split::Dev;
        it.contexts = vec![UsageContext {
            term: "dozwischn".into(),
            snippet: "er sogt \"dozwischn\"\tglei".into(),
            source: SentenceRef {
                doc_id: String::new(),
                sentence_index: 0,
            },
        }];
        let mut buf = Vec::new();
        write_dataset_tsv(
            &mut buf,
            &[it.clone(), item("P000000-02", "a", "b", Gold::Unresolved)],
        )
        .unwrap();
        let back = read_dataset_tsv(&buf[..]).unwrap();
        assert_eq!(back[0], it);
        assert_eq!(back[1].gold, Gold::Unresolved);
    }

    #[test]
    fn truncated_tsv_reports_line() {
        let src = format!(
            "{}\nP1\tHaus\tNOUN\tHaisl\t2\tyes\ttest\t\t\t\nP2\tHaus\tNOUN\n",
            TSV_HEADER.join("\t")
        );
        match read_dataset_tsv(src.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
