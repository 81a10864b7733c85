//! Scoring for both tasks: per-class precision/recall/F1, macro-F1,
//! translation accuracy, instruction-following error rates, confusion
//! matrices, and breakdowns by POS and by Levenshtein distance.
//!
//! Every figure is computed from integer counts, so reordering the input
//! items cannot change a report.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use crate::corpus::Upos;
use crate::dataset::{DatasetItem, Label};
use crate::error::{Error, Result};
use crate::outcome::{JudgmentOutcome, Task, TranslationOutcome};

/// How instruction-following errors enter the classification counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IfErrorPolicy {
    /// An IF error is a wrong answer for its gold class and is not counted
    /// as a prediction of any class.
    #[default]
    Separate,
    /// An IF error counts as a prediction of `no`.
    AsNo,
}

impl FromStr for IfErrorPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "separate" => Ok(IfErrorPolicy::Separate),
            "as-no" => Ok(IfErrorPolicy::AsNo),
            other => Err(Error::Validation(format!(
                "unknown IF-error policy `{other}`"
            ))),
        }
    }
}

/// Predicted × actual counts over yes, inflected, no, plus an IF-error row.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 3]; 3],
    pub if_error_counts: [usize; 3],
}

impl ConfusionMatrix {
    pub fn add(&mut self, predicted: JudgmentOutcome, actual: Label) {
        match predicted {
            JudgmentOutcome::Label(p) => self.counts[p.index()][actual.index()] += 1,
            JudgmentOutcome::IfError => self.if_error_counts[actual.index()] += 1,
        }
    }

    pub fn gold_totals(&self) -> [usize; 3] {
        let mut t = self.if_error_counts;
        for row in &self.counts {
            for (a, &n) in row.iter().enumerate() {
                t[a] += n;
            }
        }
        t
    }

    pub fn total(&self) -> usize {
        self.gold_totals().iter().sum()
    }

    /// Counts as used for P/R/F1 under `policy`.
    pub fn effective(&self, policy: IfErrorPolicy) -> [[usize; 3]; 3] {
        let mut c = self.counts;
        if policy == IfErrorPolicy::AsNo {
            for a in 0..3 {
                c[Label::No.index()][a] += self.if_error_counts[a];
            }
        }
        c
    }

    /// Rows yes, inflected, no, IF error; each column is the percentage of
    /// that gold class receiving the row's prediction.
    pub fn column_percentages(&self) -> [[f64; 3]; 4] {
        let totals = self.gold_totals();
        let mut out = [[0.0; 3]; 4];
        for a in 0..3 {
            if totals[a] == 0 {
                continue;
            }
            let t = totals[a] as f64;
            for p in 0..3 {
                out[p][a] = 100.0 * self.counts[p][a] as f64 / t;
            }
            out[3][a] = 100.0 * self.if_error_counts[a] as f64 / t;
        }
        out
    }

    pub fn class_scores(&self, policy: IfErrorPolicy) -> [ClassScores; 3] {
        let c = self.effective(policy);
        let gold = self.gold_totals();
        Label::ALL.map(|l| {
            let k = l.index();
            let tp = c[k][k];
            let predicted: usize = c[k].iter().sum();
            ClassScores::from_counts(tp, predicted, gold[k])
        })
    }

    /// Diagonal over all items (IF errors are never correct).
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        (0..3).map(|k| self.counts[k][k]).sum::<usize>() as f64 / total as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

impl ClassScores {
    /// Empty denominators give 0, and so does F1 when P + R = 0.
    pub fn from_counts(tp: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassScores {
            precision,
            recall,
            f1,
            support: gold,
        }
    }
}

pub fn macro_f1(scores: &[ClassScores; 3]) -> f64 {
    scores.iter().map(|s| s.f1).sum::<f64>() / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grouping {
    Pos,
    Ld,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: String,
    pub items: usize,
    pub metric: f64,
    pub if_errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub system: String,
    pub task: Task,
    pub items: usize,
    /// Macro-F1 (judgment) or accuracy (translation) over all items.
    pub overall: f64,
    /// Unweighted mean of the per-POS metric.
    pub per_pos_mean: f64,
    pub if_error_rate: f64,
    pub if_errors: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_class: Option<[ClassScores; 3]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub confusion: Option<ConfusionMatrix>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub if_policy: Option<IfErrorPolicy>,
    /// Case-folded translation accuracy. Diagnostic only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lenient_accuracy: Option<f64>,
    pub per_pos: Vec<GroupRow>,
    pub per_ld: Vec<GroupRow>,
    /// Hash of the sorted pair ids the report covers.
    pub item_set: String,
}

fn item_fingerprint<'a>(ids: impl Iterator<Item = &'a str>) -> String {
    let mut ids: Vec<&str> = ids.collect();
    ids.sort_unstable();
    let mut h = Sha256::new();
    for id in ids {
        h.update(id.as_bytes());
        h.update([0]);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn labeled(items: &[DatasetItem]) -> impl Iterator<Item = (&DatasetItem, Label)> {
    items.iter().filter_map(|i| i.gold.label().map(|l| (i, l)))
}

fn lookup<'a, T>(
    predictions: &'a HashMap<String, T>,
    items: &[&DatasetItem],
) -> Result<Vec<&'a T>> {
    let mut missing = Vec::new();
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        match predictions.get(&item.pair_id) {
            Some(p) => out.push(p),
            None => missing.push(item.pair_id.clone()),
        }
    }
    if missing.is_empty() {
        Ok(out)
    } else {
        Err(Error::MissingPredictions(missing))
    }
}

fn pos_key(pos: Upos) -> String {
    pos.as_str().to_string()
}

fn sort_groups(rows: &mut [GroupRow], by_ld: bool) {
    if by_ld {
        rows.sort_by_key(|r| r.group.parse::<usize>().unwrap_or(usize::MAX));
    } else {
        rows.sort_by(|a, b| b.items.cmp(&a.items).then_with(|| a.group.cmp(&b.group)));
    }
}

/// Scores judgment predictions against the gold-labeled items.
pub fn score_judgment(
    system: &str,
    predictions: &HashMap<String, JudgmentOutcome>,
    items: &[DatasetItem],
    policy: IfErrorPolicy,
) -> Result<EvaluationReport> {
    let gold: Vec<(&DatasetItem, Label)> = labeled(items).collect();
    let refs: Vec<&DatasetItem> = gold.iter().map(|(i, _)| *i).collect();
    let preds = lookup(predictions, &refs)?;
    let pairs: Vec<(&DatasetItem, Label, JudgmentOutcome)> = gold
        .iter()
        .zip(preds)
        .map(|(&(i, l), &p)| (i, l, p))
        .collect();

    let matrix = confusion(pairs.iter().map(|&(_, l, p)| (p, l)));
    let per_class = matrix.class_scores(policy);
    let per_pos = group_judgment(&pairs, Grouping::Pos, policy);
    let per_ld = group_judgment(&pairs, Grouping::Ld, policy);
    let if_errors: usize = matrix.if_error_counts.iter().sum();
    let n = pairs.len();
    Ok(EvaluationReport {
        system: system.to_string(),
        task: Task::Judge,
        items: n,
        overall: macro_f1(&per_class),
        per_pos_mean: mean_metric(&per_pos),
        if_error_rate: rate(if_errors, n),
        if_errors,
        per_class: Some(per_class),
        confusion: Some(matrix),
        if_policy: Some(policy),
        lenient_accuracy: None,
        per_pos,
        per_ld,
        item_set: item_fingerprint(refs.iter().map(|i| i.pair_id.as_str())),
    })
}

fn rate(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn mean_metric(rows: &[GroupRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().map(|r| r.metric).sum::<f64>() / rows.len() as f64
}

pub fn confusion(pairs: impl IntoIterator<Item = (JudgmentOutcome, Label)>) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::default();
    for (p, a) in pairs {
        m.add(p, a);
    }
    m
}

/// Judgment metric per group. POS groups get macro-F1; LD groups get
/// accuracy over the items whose gold label is not `no`.
pub fn group_judgment(
    pairs: &[(&DatasetItem, Label, JudgmentOutcome)],
    grouping: Grouping,
    policy: IfErrorPolicy,
) -> Vec<GroupRow> {
    let mut groups: BTreeMap<String, (ConfusionMatrix, usize)> = BTreeMap::new();
    for &(item, gold, pred) in pairs {
        let key = match grouping {
            Grouping::Pos => pos_key(item.pos_max),
            Grouping::Ld => {
                if gold == Label::No {
                    continue;
                }
                item.distance.to_string()
            }
        };
        let slot = groups.entry(key).or_default();
        slot.0.add(pred, gold);
        slot.1 += usize::from(pred == JudgmentOutcome::IfError);
    }
    let mut rows: Vec<GroupRow> = groups
        .into_iter()
        .map(|(group, (m, if_errors))| GroupRow {
            items: m.total(),
            metric: match grouping {
                Grouping::Pos => macro_f1(&m.class_scores(policy)),
                Grouping::Ld => m.accuracy(),
            },
            group,
            if_errors,
        })
        .collect();
    sort_groups(&mut rows, grouping == Grouping::Ld);
    rows
}

/// Exact match after NFC normalization.
pub fn translation_matches(output: &str, reference: &str) -> bool {
    output.nfc().eq(reference.nfc())
}

fn lenient_match(output: &str, reference: &str) -> bool {
    output.nfc().collect::<String>().to_lowercase()
        == reference.nfc().collect::<String>().to_lowercase()
}

/// Scores translations of the given items against their lemmas.
pub fn score_translation(
    system: &str,
    predictions: &HashMap<String, TranslationOutcome>,
    items: &[&DatasetItem],
) -> Result<EvaluationReport> {
    let preds = lookup(predictions, items)?;
    let mut correct = 0;
    let mut lenient = 0;
    let mut if_errors = 0;
    let mut by_pos: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    let mut by_ld: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for (item, pred) in items.iter().zip(preds) {
        let (ok, soft, err) = match pred {
            TranslationOutcome::Word(w) => (
                translation_matches(w, &item.lemma),
                lenient_match(w, &item.lemma),
                false,
            ),
            TranslationOutcome::IfError => (false, false, true),
        };
        correct += usize::from(ok);
        lenient += usize::from(soft);
        if_errors += usize::from(err);
        for (map, key) in [
            (&mut by_pos, pos_key(item.pos_max)),
            (&mut by_ld, item.distance.to_string()),
        ] {
            let slot = map.entry(key).or_default();
            slot.0 += 1;
            slot.1 += usize::from(ok);
            slot.2 += usize::from(err);
        }
    }
    let to_rows = |m: BTreeMap<String, (usize, usize, usize)>, by_ld: bool| {
        let mut rows: Vec<GroupRow> = m
            .into_iter()
            .map(|(group, (n, c, e))| GroupRow {
                group,
                items: n,
                metric: rate(c, n),
                if_errors: e,
            })
            .collect();
        sort_groups(&mut rows, by_ld);
        rows
    };
    let per_pos = to_rows(by_pos, false);
    let per_ld = to_rows(by_ld, true);
    let n = items.len();
    Ok(EvaluationReport {
        system: system.to_string(),
        task: Task::Translate,
        items: n,
        overall: rate(correct, n),
        per_pos_mean: mean_metric(&per_pos),
        if_error_rate: rate(if_errors, n),
        if_errors,
        per_class: None,
        confusion: None,
        if_policy: None,
        lenient_accuracy: Some(rate(lenient, n)),
        per_pos,
        per_ld,
        item_set: item_fingerprint(items.iter().map(|i| i.pair_id.as_str())),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub group: String,
    pub base: f64,
    pub compare: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub base_system: String,
    pub compare_system: String,
    pub task: Task,
    pub delta_metric: f64,
    pub delta_per_pos_mean: f64,
    pub delta_if_error_rate: f64,
    pub per_pos: Vec<DeltaRow>,
}

/// `compare − base` for the overall metric, the POS mean, the IF-error rate
/// and every POS present in both reports.
pub fn delta_report(base: &EvaluationReport, compare: &EvaluationReport) -> Result<DeltaReport> {
    if base.task != compare.task || base.item_set != compare.item_set {
        return Err(Error::MismatchedItems);
    }
    let theirs: HashMap<&str, f64> = compare
        .per_pos
        .iter()
        .map(|r| (r.group.as_str(), r.metric))
        .collect();
    let per_pos = base
        .per_pos
        .iter()
        .filter_map(|r| {
            theirs.get(r.group.as_str()).map(|&c| DeltaRow {
                group: r.group.clone(),
                base: r.metric,
                compare: c,
                delta: c - r.metric,
            })
        })
        .collect();
    Ok(DeltaReport {
        base_system: base.system.clone(),
        compare_system: compare.system.clone(),
        task: base.task,
        delta_metric: compare.overall - base.overall,
        delta_per_pos_mean: compare.per_pos_mean - base.per_pos_mean,
        delta_if_error_rate: compare.if_error_rate - base.if_error_rate,
        per_pos,
    })
}

/// Count of gold labels per distance.
pub fn ld_histogram(items: &[DatasetItem]) -> BTreeMap<usize, [usize; 3]> {
    let mut out: BTreeMap<usize, [usize; 3]> = BTreeMap::new();
    for (item, l) in labeled(items) {
        out.entry(item.distance).or_default()[l.index()] += 1;
    }
    out
}

pub fn groups_csv(rows: &[GroupRow], key: &str) -> String {
    let mut s = format!("{key},items,metric,if_errors\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.6},{}",
            csv_field(&r.group),
            r.items,
            r.metric,
            r.if_errors
        );
    }
    s
}

pub fn deltas_csv(reports: &[DeltaReport]) -> String {
    let mut s =
        String::from("base,compare,task,delta_metric,delta_per_pos_mean,delta_if_error_rate\n");
    for d in reports {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{:.6},{:.6}",
            csv_field(&d.base_system),
            csv_field(&d.compare_system),
            d.task,
            d.delta_metric,
            d.delta_per_pos_mean,
            d.delta_if_error_rate
        );
    }
    s
}

pub fn ld_histogram_csv(hist: &BTreeMap<usize, [usize; 3]>) -> String {
    let mut s = String::from("distance,yes,inflected,no\n");
    for (d, c) in hist {
        let _ = writeln!(s, "{d},{},{},{}", c[0], c[1], c[2]);
    }
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Aligned plain-text rendering.
pub fn render_text(report: &EvaluationReport) -> String {
    let mut s = String::new();
    let metric = match report.task {
        Task::Judge => "macro-F1",
        Task::Translate => "accuracy",
    };
    let _ = writeln!(
        s,
        "system: {}   task: {}   items: {}",
        report.system, report.task, report.items
    );
    let _ = writeln!(s, "{metric} (all items): {:.3}", report.overall);
    let _ = writeln!(s, "{metric} (mean over POS): {:.3}", report.per_pos_mean);
    let _ = writeln!(
        s,
        "IF error rate: {:.2}% ({})",
        100.0 * report.if_error_rate,
        report.if_errors
    );
    if let Some(l) = report.lenient_accuracy {
        let _ = writeln!(s, "lenient accuracy (diagnostic): {l:.3}");
    }
    if let Some(pc) = &report.per_class {
        let _ = writeln!(
            s,
            "\n{:<10} {:>9} {:>9} {:>9} {:>8}",
            "class", "precision", "recall", "F1", "support"
        );
        for (l, c) in Label::ALL.iter().zip(pc) {
            let _ = writeln!(
                s,
                "{:<10} {:>9.3} {:>9.3} {:>9.3} {:>8}",
                l, c.precision, c.recall, c.f1, c.support
            );
        }
    }
    if let Some(m) = &report.confusion {
        let pct = m.column_percentages();
        let _ = writeln!(
            s,
            "\n{:<10} {:>9} {:>9} {:>9}   (column %, actual)",
            "predicted", "yes", "inflected", "no"
        );
        for (name, row) in ["yes", "inflected", "no", "IF error"].iter().zip(pct) {
            let _ = writeln!(
                s,
                "{:<10} {:>8.2}% {:>8.2}% {:>8.2}%",
                name, row[0], row[1], row[2]
            );
        }
    }
    for (title, rows) in [("POS", &report.per_pos), ("LD", &report.per_ld)] {
        let _ = writeln!(s, "\n{:<8} {:>7} {:>8} {:>6}", title, "items", metric, "IF");
        for r in rows {
            let _ = writeln!(
                s,
                "{:<8} {:>7} {:>8.3} {:>6}",
                r.group, r.items, r.metric, r.if_errors
            );
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Gold, Split};
    use JudgmentOutcome::IfError;
    use Label::*;

    fn item(id: usize, pos: Upos, distance: usize, gold: Label) -> DatasetItem {
        DatasetItem {
            pair_id: format!("p{id}"),
            lemma: "dazwischen".into(),
            pos_max: pos,
            term: "dozwischn".into(),
            distance,
            contexts: Vec::new(),
            gold: Gold::Label(gold),
            split: Split::Test,
        }
    }

    fn preds(
        items: &[DatasetItem],
        f: impl Fn(&DatasetItem) -> JudgmentOutcome,
    ) -> HashMap<String, JudgmentOutcome> {
        items.iter().map(|i| (i.pair_id.clone(), f(i))).collect()
    }

    fn fixture() -> Vec<DatasetItem> {
        let golds = [Yes, Yes, Inflected, No, No, No, Yes, Inflected, No];
        golds
            .iter()
            .enumerate()
            .map(|(i, &g)| {
                item(
                    i,
                    if i % 2 == 0 { Upos::Noun } else { Upos::Verb },
                    1 + i % 3,
                    g,
                )
            })
            .collect()
    }

    #[test]
    fn perfect_predictions() {
        let items = fixture();
        let p = preds(&items, |i| JudgmentOutcome::Label(i.gold.label().unwrap()));
        let r = score_judgment("oracle", &p, &items, IfErrorPolicy::Separate).unwrap();
        assert_eq!(r.overall, 1.0);
        let pct = r.confusion.unwrap().column_percentages();
        for a in 0..3 {
            for p in 0..3 {
                assert_eq!(pct[p][a], if p == a { 100.0 } else { 0.0 });
            }
            assert_eq!(pct[3][a], 0.0);
        }
    }

    #[test]
    fn all_if_errors_map_to_no_under_as_no() {
        let items = fixture();
        let p = preds(&items, |_| IfError);
        let r = score_judgment("broken", &p, &items, IfErrorPolicy::AsNo).unwrap();
        assert_eq!(r.if_error_rate, 1.0);
        let pc = r.per_class.unwrap();
        // 4 of 9 gold are `no`: P = 4/9, R = 1.
        let f1_no = 2.0 * (4.0 / 9.0) / (4.0 / 9.0 + 1.0);
        assert!((pc[2].f1 - f1_no).abs() < 1e-12);
        assert_eq!(pc[0].f1, 0.0);
        assert!((r.overall - f1_no / 3.0).abs() < 1e-12);

        let sep = score_judgment("broken", &p, &items, IfErrorPolicy::Separate).unwrap();
        assert_eq!(sep.overall, 0.0);
        assert_eq!(sep.if_error_rate, 1.0);
    }

    #[test]
    fn all_no_predictor_fills_no_row() {
        let items = fixture();
        let p = preds(&items, |_| JudgmentOutcome::Label(No));
        let m = score_judgment("majority", &p, &items, IfErrorPolicy::Separate)
            .unwrap()
            .confusion
            .unwrap();
        let pct = m.column_percentages();
        assert_eq!(pct[2], [100.0; 3]);
    }

    #[test]
    fn percentages_by_hand() {
        let mut m = ConfusionMatrix::default();
        // yes column: 3 yes, 1 no; inflected column: 2 inflected, 1 IF, 1 yes
        for (p, a) in [
            (JudgmentOutcome::Label(Yes), Yes),
            (JudgmentOutcome::Label(Yes), Yes),
            (JudgmentOutcome::Label(Yes), Yes),
            (JudgmentOutcome::Label(No), Yes),
            (JudgmentOutcome::Label(Inflected), Inflected),
            (JudgmentOutcome::Label(Inflected), Inflected),
            (IfError, Inflected),
            (JudgmentOutcome::Label(Yes), Inflected),
        ] {
            m.add(p, a);
        }
        let pct = m.column_percentages();
        assert_eq!(pct[0][0], 75.0);
        assert_eq!(pct[2][0], 25.0);
        assert_eq!(pct[1][1], 50.0);
        assert_eq!(pct[3][1], 25.0);
        assert_eq!(pct[0][1], 25.0);
        assert_eq!(pct[0][2], 0.0);
        assert_eq!(m.gold_totals(), [4, 4, 0]);
    }

    #[test]
    fn missing_prediction_lists_ids() {
        let items = fixture();
        let mut p = preds(&items, |_| JudgmentOutcome::Label(No));
        p.remove("p3");
        match score_judgment("x", &p, &items, IfErrorPolicy::Separate) {
            Err(Error::MissingPredictions(ids)) => assert_eq!(ids, ["p3"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_pos_row_equals_overall() {
        let items: Vec<_> = fixture()
            .into_iter()
            .map(|mut i| {
                i.pos_max = Upos::Adv;
                i
            })
            .collect();
        let p = preds(&items, |i| {
            if i.distance == 1 {
                JudgmentOutcome::Label(Yes)
            } else {
                JudgmentOutcome::Label(No)
            }
        });
        let r = score_judgment("ld", &p, &items, IfErrorPolicy::Separate).unwrap();
        assert_eq!(r.per_pos.len(), 1);
        assert_eq!(r.per_pos[0].metric, r.overall);
        assert_eq!(r.per_pos_mean, r.overall);
    }

    #[test]
    fn ld_groups_drop_gold_no() {
        // Only gold-yes items: accuracy per LD = share predicted yes.
        let items: Vec<_> = (0..6)
            .map(|i| item(i, Upos::Noun, 1 + i / 3, Yes))
            .collect();
        let p = preds(&items, |i| {
            if i.pair_id == "p0" || i.pair_id == "p3" || i.pair_id == "p4" {
                JudgmentOutcome::Label(Yes)
            } else {
                JudgmentOutcome::Label(No)
            }
        });
        let r = score_judgment("x", &p, &items, IfErrorPolicy::Separate).unwrap();
        let ld: Vec<_> = r
            .per_ld
            .iter()
            .map(|g| (g.group.as_str(), g.items, g.metric))
            .collect();
        assert_eq!(ld, [("1", 3, 1.0 / 3.0), ("2", 3, 2.0 / 3.0)]);

        let mut with_no = items.clone();
        with_no.push(item(99, Upos::Noun, 7, No));
        let mut p2 = p.clone();
        p2.insert("p99".into(), JudgmentOutcome::Label(No));
        let r2 = score_judgment("x", &p2, &with_no, IfErrorPolicy::Separate).unwrap();
        assert!(r2.per_ld.iter().all(|g| g.group != "7"));
    }

    #[test]
    fn pos_never_right_has_zero_row() {
        let items = vec![item(0, Upos::Noun, 1, Yes), item(1, Upos::Verb, 1, Yes)];
        let p: HashMap<_, _> = [
            ("p0".to_string(), JudgmentOutcome::Label(Yes)),
            ("p1".to_string(), JudgmentOutcome::Label(No)),
        ]
        .into();
        let r = score_judgment("x", &p, &items, IfErrorPolicy::Separate).unwrap();
        let verb = r.per_pos.iter().find(|g| g.group == "VERB").unwrap();
        assert_eq!(verb.metric, 0.0);
    }

    fn titem(id: usize, lemma: &str) -> DatasetItem {
        DatasetItem {
            lemma: lemma.into(),
            ..item(id, Upos::Adj, 2, Yes)
        }
    }

    #[test]
    fn translation_exact_match_policy() {
        let items = [
            titem(0, "dazwischen"),
            titem(1, "geographisch"),
            titem(2, "Haus"),
        ];
        let refs: Vec<&DatasetItem> = items.iter().collect();
        let p: HashMap<String, TranslationOutcome> = [
            (
                "p0".to_string(),
                TranslationOutcome::Word("dazwischen".into()),
            ),
            (
                "p1".to_string(),
                TranslationOutcome::Word("geografisch".into()),
            ),
            ("p2".to_string(), TranslationOutcome::IfError),
        ]
        .into();
        let r = score_translation("x", &p, &refs).unwrap();
        assert!((r.overall - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.if_errors, 1);
        assert!(translation_matches("u\u{0308}ber", "über"));
        assert!(!translation_matches("haus", "Haus"));
    }

    #[test]
    fn delta_cases() {
        let items = fixture();
        let a = score_judgment(
            "a",
            &preds(&items, |_| JudgmentOutcome::Label(No)),
            &items,
            IfErrorPolicy::Separate,
        )
        .unwrap();
        let same = delta_report(&a, &a).unwrap();
        assert_eq!(same.delta_metric, 0.0);
        assert_eq!(same.delta_if_error_rate, 0.0);
        let mut b = a.clone();
        b.overall += 0.1;
        assert!((delta_report(&a, &b).unwrap().delta_metric - 0.1).abs() < 1e-12);
        let mut other = a.clone();
        other.item_set = "different".into();
        assert!(matches!(
            delta_report(&a, &other),
            Err(Error::MismatchedItems)
        ));
    }
}
