//! Prompt-based evaluation of language models.

pub mod client;
pub mod parse;
pub mod prompt;
pub mod runner;

pub use client::{ChatClient, ModelEndpointConfig, MAX_OUTPUT_TOKENS};
pub use parse::{
    judgment_outcome, parse_judgment, parse_translation, translation_outcome, ParsedJudgment,
    ParsedTranslation, PARSER_VERSION,
};
pub use prompt::{load_prompt_pool, render_prompt, Language, PromptPool, PromptTemplate, Variant};
pub use runner::{
    judgment_map, read_predictions_jsonl, run_task, select_best_prompt, select_from_scores,
    translation_map, write_predictions_jsonl, CacheKey, CachedResponse, Prediction,
    PromptSelection, ResponseCache, RunOutput, RunStatus, TemplateScore,
};
