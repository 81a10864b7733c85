//! Running prompts over dataset items with a persistent response cache,
//! and choosing the best prompt on the development split.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use crate::dataset::{translation_slice, DatasetItem};
use crate::error::{Error, Result};
use crate::journal::open_journal;
use crate::metrics::{score_judgment, score_translation, IfErrorPolicy};
use crate::outcome::{JudgmentOutcome, Task, TranslationOutcome};

use super::client::ChatClient;
use super::parse::{judgment_outcome, translation_outcome};
use super::prompt::{render_prompt, PromptTemplate};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheKey {
    pub task: Task,
    pub model: String,
    pub template_id: u32,
    pub pair_id: String,
    pub variant: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CacheLine {
    #[serde(flatten)]
    key: CacheKey,
    raw: String,
    latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CachedResponse {
    pub raw: String,
    pub latency_ms: u64,
}

/// Raw replies keyed by (task, model, template, pair, variant). Only raw
/// text is stored; outcomes are always re-derived by the current parser.
#[derive(Debug, Default)]
pub struct ResponseCache {
    entries: HashMap<CacheKey, CachedResponse>,
    file: Option<(PathBuf, BufWriter<File>)>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads an existing cache file (if any) and appends new entries to it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (lines, file) = open_journal::<CacheLine>(path)?;
        let entries = lines
            .into_iter()
            .map(|l| {
                (
                    l.key,
                    CachedResponse {
                        raw: l.raw,
                        latency_ms: l.latency_ms,
                    },
                )
            })
            .collect();
        Ok(ResponseCache {
            entries,
            file: Some((path.to_path_buf(), BufWriter::new(file))),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &CacheKey) -> Option<&CachedResponse> {
        self.entries.get(key)
    }

    pub fn insert(&mut self, key: CacheKey, value: CachedResponse) -> Result<()> {
        if let Some((_, w)) = &mut self.file {
            let line = CacheLine {
                key: key.clone(),
                raw: value.raw.clone(),
                latency_ms: value.latency_ms,
            };
            serde_json::to_writer(&mut *w, &line)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        self.entries.insert(key, value);
        Ok(())
    }
}

/// One line of a predictions file. `raw` and `outcome` are null for items
/// still pending after transport errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub pair_id: String,
    pub model: String,
    pub template_id: u32,
    pub variant: String,
    pub raw: Option<String>,
    pub outcome: Option<String>,
    pub latency_ms: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Partial,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub predictions: Vec<Prediction>,
    pub status: RunStatus,
    pub pending: Vec<(String, String)>,
    pub if_errors: usize,
    pub cache_hits: usize,
    pub network_calls: usize,
}

fn outcome_of(task: Task, raw: &str) -> String {
    match task {
        Task::Judge => judgment_outcome(raw).as_str().to_string(),
        Task::Translate => translation_outcome(raw).as_str().to_string(),
    }
}

/// Queries `template` for every item, in item order. Cached replies are
/// reused without touching the network.
pub async fn run_task(
    task: Task,
    items: &[&DatasetItem],
    template: &PromptTemplate,
    client: &ChatClient,
    cache: &mut ResponseCache,
) -> Result<RunOutput> {
    if template.task != task {
        return Err(Error::Validation(format!(
            "template {} is a {} template, not {task}",
            template.id, template.task
        )));
    }
    let model = client.config().model_name.clone();
    let variant = template.variant().to_string();
    let calls_before = client.network_calls();

    let mut jobs = Vec::with_capacity(items.len());
    for item in items {
        let key = CacheKey {
            task,
            model: model.clone(),
            template_id: template.id,
            pair_id: item.pair_id.clone(),
            variant: variant.clone(),
        };
        let cached = cache.get(&key).cloned();
        let prompt = if cached.is_some() {
            None
        } else {
            let context = item.contexts.first().map(|c| c.snippet.as_str());
            if template.with_context && context.is_none() {
                return Err(Error::Validation(format!(
                    "pair {} has no usage context",
                    item.pair_id
                )));
            }
            Some(render_prompt(template, &item.lemma, &item.term, context)?)
        };
        jobs.push((key, cached, prompt));
    }

    let concurrency = client.config().concurrency.max(1);
    let mut results = stream::iter(jobs)
        .map(|(key, cached, prompt)| async move {
            match (cached, prompt) {
                (Some(c), _) => (key, Ok(c), true),
                (None, Some(p)) => {
                    let start = Instant::now();
                    let r = client.complete(&p, task).await.map(|raw| CachedResponse {
                        raw,
                        latency_ms: start.elapsed().as_millis() as u64,
                    });
                    (key, r, false)
                }
                (None, None) => unreachable!("uncached job without prompt"),
            }
        })
        .buffered(concurrency);

    let mut out = RunOutput {
        predictions: Vec::with_capacity(items.len()),
        status: RunStatus::Complete,
        pending: Vec::new(),
        if_errors: 0,
        cache_hits: 0,
        network_calls: 0,
    };
    while let Some((key, result, hit)) = results.next().await {
        match result {
            Ok(resp) => {
                if hit {
                    out.cache_hits += 1;
                } else {
                    cache.insert(key.clone(), resp.clone())?;
                }
                let outcome = outcome_of(task, &resp.raw);
                if outcome == crate::outcome::IF_ERROR {
                    out.if_errors += 1;
                }
                out.predictions.push(Prediction {
                    pair_id: key.pair_id,
                    model: key.model,
                    template_id: key.template_id,
                    variant: key.variant,
                    raw: Some(resp.raw),
                    outcome: Some(outcome),
                    latency_ms: Some(resp.latency_ms),
                });
            }
            Err(e @ (Error::Transport(_) | Error::Protocol(_))) => {
                out.pending.push((key.pair_id.clone(), e.to_string()));
                out.predictions.push(Prediction {
                    pair_id: key.pair_id,
                    model: key.model,
                    template_id: key.template_id,
                    variant: key.variant,
                    raw: None,
                    outcome: None,
                    latency_ms: None,
                });
            }
            Err(e) => return Err(e),
        }
    }
    if !out.pending.is_empty() {
        out.status = RunStatus::Partial;
    }
    out.network_calls = client.network_calls() - calls_before;
    Ok(out)
}

pub fn write_predictions_jsonl<W: Write>(mut out: W, predictions: &[Prediction]) -> Result<()> {
    for p in predictions {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_predictions_jsonl<R: BufRead>(source: R) -> Result<Vec<Prediction>> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?);
    }
    Ok(out)
}

/// Judgment outcomes by pair id, re-parsed from the stored raw text.
/// Pending predictions are left out.
pub fn judgment_map(predictions: &[Prediction]) -> HashMap<String, JudgmentOutcome> {
    predictions
        .iter()
        .filter_map(|p| {
            p.raw
                .as_deref()
                .map(|raw| (p.pair_id.clone(), judgment_outcome(raw)))
        })
        .collect()
}

pub fn translation_map(predictions: &[Prediction]) -> HashMap<String, TranslationOutcome> {
    predictions
        .iter()
        .filter_map(|p| {
            p.raw
                .as_deref()
                .map(|raw| (p.pair_id.clone(), translation_outcome(raw)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateScore {
    pub template_id: u32,
    pub score: f64,
    pub if_errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSelection {
    pub task: Task,
    pub model: String,
    pub best_id: u32,
    pub scores: Vec<TemplateScore>,
}

/// Highest score wins; ties go to the lowest id.
pub fn select_from_scores(scores: &[TemplateScore]) -> Option<u32> {
    scores
        .iter()
        .max_by(|a, b| {
            a.score
                .total_cmp(&b.score)
                .then_with(|| b.template_id.cmp(&a.template_id))
        })
        .map(|s| s.template_id)
}

/// Scores every template on `dev` (macro-F1 for judgment, accuracy on the
/// gold-`yes` items for translation) and returns the argmax.
pub async fn select_best_prompt(
    pool: &[&PromptTemplate],
    dev: &[DatasetItem],
    client: &ChatClient,
    task: Task,
    cache: &mut ResponseCache,
) -> Result<PromptSelection> {
    if pool.is_empty() {
        return Err(Error::Validation(format!("empty {task} prompt pool")));
    }
    let labeled: Vec<DatasetItem> = dev
        .iter()
        .filter(|i| i.gold.label().is_some())
        .cloned()
        .collect();
    let targets: Vec<&DatasetItem> = match task {
        Task::Judge => labeled.iter().collect(),
        Task::Translate => translation_slice(&labeled),
    };
    if targets.is_empty() {
        return Err(Error::Validation("no labeled development items".into()));
    }
    let mut scores = Vec::with_capacity(pool.len());
    let mut pending = 0;
    for template in pool {
        let run = run_task(task, &targets, template, client, cache).await?;
        if run.status == RunStatus::Partial {
            pending += run.pending.len();
            continue;
        }
        let report = match task {
            Task::Judge => score_judgment(
                "dev",
                &judgment_map(&run.predictions),
                &labeled,
                IfErrorPolicy::default(),
            )?,
            Task::Translate => {
                score_translation("dev", &translation_map(&run.predictions), &targets)?
            }
        };
        scores.push(TemplateScore {
            template_id: template.id,
            score: report.overall,
            if_errors: report.if_errors,
        });
    }
    if pending > 0 {
        return Err(Error::Partial {
            pending,
            resume: cache
                .path()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "<in-memory cache>".into()),
        });
    }
    let best_id = select_from_scores(&scores).expect("non-empty pool");
    Ok(PromptSelection {
        task,
        model: client.config().model_name.clone(),
        best_id,
        scores,
    })
}
