//! Answer-correctness comparators and per-candidate score aggregation.
//!
//! A comparator scores how well a candidate-derived answer matches the
//! gold answer. Lexical comparators (exact match, token F1, chrF) are pure;
//! the LLM judge asks a model for a 1-5 rating. Each comparator-native
//! value is normalized into [0, 1] and a candidate's quality score is the
//! mean over its question set.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{DecodingConfig, Gateway, GatewayError, ModelSpec, PromptRequest};
use crate::qa::{AnswerRecord, PassageRole};
use crate::qag::QuestionSet;
use crate::textnorm;

/// Selectable comparator, as it appears in configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ComparatorKind {
    Exact,
    TokenF1,
    Chrf,
    LlmJudge { judge_model: String },
}

impl ComparatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            ComparatorKind::Exact => "exact",
            ComparatorKind::TokenF1 => "token-f1",
            ComparatorKind::Chrf => "chrf",
            ComparatorKind::LlmJudge { .. } => "llm-judge",
        }
    }
}

/// One comparison outcome on the comparator's native scale plus its
/// normalization into [0, 1].
///
/// Normalization per comparator: exact stays {0, 1}; token F1 is already
/// in [0, 1]; chrF divides by 100; the 1-5 judge scale maps linearly via
/// (s - 1) / 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessScore {
    pub raw: f64,
    pub normalized: f64,
}

/// Aggregate quality of one candidate on one question set sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub instance_id: String,
    pub candidate_id: String,
    pub sample_index: u32,
    pub comparator: String,
    pub per_question: Vec<CorrectnessScore>,
    /// Arithmetic mean of the normalized per-question scores.
    pub aggregate: f64,
}

#[derive(Debug, Error)]
pub enum CorrectnessError {
    #[error("instance `{instance_id}`: question set is empty")]
    EmptyQuestionSet { instance_id: String },
    #[error(
        "instance `{instance_id}`: answer counts diverge (questions {questions}, candidate {candidate}, gold {gold})"
    )]
    AnswerCountMismatch {
        instance_id: String,
        questions: usize,
        candidate: usize,
        gold: usize,
    },
    #[error("judge completion contains no integer: {completion:?}")]
    JudgeNoInteger { completion: String },
    #[error("judge score {value} outside 1..=5")]
    JudgeOutOfRange { value: i64 },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// 1 iff the two strings are equal after normalization (NFKC, casefold,
/// edge punctuation stripped, whitespace collapsed).
pub fn exact_match(hyp: &str, gold: &str) -> f64 {
    if textnorm::answer_norm(hyp) == textnorm::answer_norm(gold) {
        1.0
    } else {
        0.0
    }
}

fn token_counts(text: &str) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for token in textnorm::answer_norm(text).split_whitespace() {
        *counts.entry(token.to_string()).or_insert(0) += 1;
    }
    counts
}

/// Bag-of-tokens F1 over whitespace tokens of the normalized strings.
///
/// Both empty scores 1; exactly one empty scores 0.
pub fn token_f1(hyp: &str, gold: &str) -> f64 {
    let hyp_counts = token_counts(hyp);
    let gold_counts = token_counts(gold);
    let hyp_total: usize = hyp_counts.values().sum();
    let gold_total: usize = gold_counts.values().sum();
    if hyp_total == 0 && gold_total == 0 {
        return 1.0;
    }
    if hyp_total == 0 || gold_total == 0 {
        return 0.0;
    }
    let common: usize = hyp_counts
        .iter()
        .map(|(token, &count)| count.min(*gold_counts.get(token).unwrap_or(&0)))
        .sum();
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / hyp_total as f64;
    let recall = common as f64 / gold_total as f64;
    2.0 * precision * recall / (precision + recall)
}

const CHRF_MAX_ORDER: usize = 6;
const CHRF_BETA: f64 = 2.0;

fn ngram_counts(chars: &[char], order: usize) -> HashMap<&[char], usize> {
    let mut counts = HashMap::new();
    if chars.len() >= order {
        for window in chars.windows(order) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Character n-gram F-score in [0, 100].
///
/// Orders 1..=6 over the whitespace-stripped strings; precision and recall
/// are averaged uniformly over orders where either side has an n-gram;
/// F = (1+β²)PR / (β²P + R) with β = 2, 0 when P + R = 0. Two empty
/// strings score 100. Not symmetric: β = 2 weights recall of `gold`.
pub fn chrf(hyp: &str, gold: &str) -> f64 {
    let hyp_chars: Vec<char> = hyp.chars().filter(|c| !c.is_whitespace()).collect();
    let gold_chars: Vec<char> = gold.chars().filter(|c| !c.is_whitespace()).collect();
    if hyp_chars.is_empty() && gold_chars.is_empty() {
        return 100.0;
    }

    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut active_orders = 0usize;
    for order in 1..=CHRF_MAX_ORDER {
        let hyp_grams = ngram_counts(&hyp_chars, order);
        let gold_grams = ngram_counts(&gold_chars, order);
        let hyp_total: usize = hyp_grams.values().sum();
        let gold_total: usize = gold_grams.values().sum();
        if hyp_total == 0 && gold_total == 0 {
            continue;
        }
        active_orders += 1;
        let matching: usize = hyp_grams
            .iter()
            .map(|(gram, &count)| count.min(*gold_grams.get(gram).unwrap_or(&0)))
            .sum();
        if hyp_total > 0 {
            precision_sum += matching as f64 / hyp_total as f64;
        }
        if gold_total > 0 {
            recall_sum += matching as f64 / gold_total as f64;
        }
    }
    if active_orders == 0 {
        return 100.0;
    }
    let precision = precision_sum / active_orders as f64;
    let recall = recall_sum / active_orders as f64;
    if precision + recall == 0.0 {
        return 0.0;
    }
    let beta_sq = CHRF_BETA * CHRF_BETA;
    100.0 * (1.0 + beta_sq) * precision * recall / (beta_sq * precision + recall)
}

pub const JUDGE_SYSTEM_MESSAGE: &str =
    "You are an impartial judge of answer correctness for reading comprehension questions.";

/// Build the 1-5 rating prompt for the judge model.
pub fn build_judge_prompt(
    context: &str,
    question: &str,
    gold: &str,
    hyp: &str,
    model: &ModelSpec,
) -> PromptRequest {
    let user = format!(
        "Given the context, the question, and the reference answer, rate how well the \
         candidate answer matches the reference answer on a scale from 1 to 5, where 1 \
         means completely incorrect and 5 means fully correct and equivalent in meaning. \
         Respond with a single integer from 1 to 5.\n\n\
         ###\nContext: {context}\n###\nQuestion: {question}\n###\nReference Answer: {gold}\n\
         ###\nCandidate Answer: {hyp}\n###\nScore:"
    );
    PromptRequest::new(model, JUDGE_SYSTEM_MESSAGE, user)
}

fn parse_first_integer(text: &str) -> Option<i64> {
    let digits: String = text
        .chars()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect();
    digits.parse().ok()
}

/// Ask the judge model to rate a candidate answer against the gold answer
/// on a 1-5 scale; the first integer token of the completion is the score.
///
/// Out-of-range scores are surfaced as errors, never clamped.
pub fn judge_correctness(
    gateway: &Gateway,
    context: &str,
    question: &str,
    gold: &str,
    hyp: &str,
    model: &ModelSpec,
    decoding: &DecodingConfig,
) -> Result<u8, CorrectnessError> {
    let request = build_judge_prompt(context, question, gold, hyp, model);
    let completion = gateway.complete(&request, decoding)?;
    let value = parse_first_integer(&completion.text).ok_or(CorrectnessError::JudgeNoInteger {
        completion: completion.text.clone(),
    })?;
    if !(1..=5).contains(&value) {
        return Err(CorrectnessError::JudgeOutOfRange { value });
    }
    Ok(value as u8)
}

/// Per-question inputs a comparator may use beyond the two answers.
#[derive(Debug, Clone, Copy)]
pub struct ComparisonContext<'a> {
    /// The ground-truth passage the gold answer came from.
    pub context: &'a str,
    pub question: &'a str,
}

/// A pluggable answer-similarity function.
pub trait AnswerComparator: Send + Sync {
    fn name(&self) -> &str;

    fn compare(
        &self,
        ctx: &ComparisonContext<'_>,
        hyp: &str,
        gold: &str,
    ) -> Result<CorrectnessScore, CorrectnessError>;
}

struct LexicalComparator {
    kind: ComparatorKind,
}

impl AnswerComparator for LexicalComparator {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn compare(
        &self,
        _ctx: &ComparisonContext<'_>,
        hyp: &str,
        gold: &str,
    ) -> Result<CorrectnessScore, CorrectnessError> {
        let (raw, normalized) = match self.kind {
            ComparatorKind::Exact => {
                let v = exact_match(hyp, gold);
                (v, v)
            }
            ComparatorKind::TokenF1 => {
                let v = token_f1(hyp, gold);
                (v, v)
            }
            ComparatorKind::Chrf => {
                let v = chrf(hyp, gold);
                (v, v / 100.0)
            }
            ComparatorKind::LlmJudge { .. } => unreachable!("judge uses its own comparator"),
        };
        Ok(CorrectnessScore { raw, normalized })
    }
}

struct JudgeComparator {
    gateway: Arc<Gateway>,
    model: ModelSpec,
    decoding: DecodingConfig,
}

impl AnswerComparator for JudgeComparator {
    fn name(&self) -> &str {
        "llm-judge"
    }

    fn compare(
        &self,
        ctx: &ComparisonContext<'_>,
        hyp: &str,
        gold: &str,
    ) -> Result<CorrectnessScore, CorrectnessError> {
        let score = judge_correctness(
            &self.gateway,
            ctx.context,
            ctx.question,
            gold,
            hyp,
            &self.model,
            &self.decoding,
        )?;
        Ok(CorrectnessScore {
            raw: f64::from(score),
            normalized: (f64::from(score) - 1.0) / 4.0,
        })
    }
}

/// Instantiate a comparator. The judge needs a gateway; lexical kinds
/// ignore it.
pub fn build_comparator(
    kind: &ComparatorKind,
    gateway: Option<Arc<Gateway>>,
) -> Result<Box<dyn AnswerComparator>, GatewayError> {
    match kind {
        ComparatorKind::LlmJudge { judge_model } => {
            let gateway = gateway.ok_or_else(|| {
                GatewayError::NotConfigured("llm-judge comparator needs a gateway".into())
            })?;
            let model = gateway.model_spec(judge_model.clone());
            Ok(Box::new(JudgeComparator {
                gateway,
                model,
                decoding: DecodingConfig::greedy(),
            }))
        }
        other => Ok(Box::new(LexicalComparator { kind: other.clone() })),
    }
}

/// Score one candidate against the gold answers over a question set.
///
/// `gold_answers` must be the regenerated ones, one per question, in
/// question order; likewise `candidate_answers`. The aggregate is the mean
/// normalized score.
pub fn score_candidate(
    question_set: &QuestionSet,
    candidate_answers: &[AnswerRecord],
    gold_answers: &[AnswerRecord],
    comparator: &dyn AnswerComparator,
    grounding_text: &str,
) -> Result<CandidateScore, CorrectnessError> {
    if question_set.pairs.is_empty() {
        return Err(CorrectnessError::EmptyQuestionSet {
            instance_id: question_set.instance_id.clone(),
        });
    }
    if candidate_answers.len() != question_set.pairs.len()
        || gold_answers.len() != question_set.pairs.len()
    {
        return Err(CorrectnessError::AnswerCountMismatch {
            instance_id: question_set.instance_id.clone(),
            questions: question_set.pairs.len(),
            candidate: candidate_answers.len(),
            gold: gold_answers.len(),
        });
    }

    let candidate_id = candidate_answers
        .iter()
        .find_map(|a| match &a.passage_role {
            PassageRole::Candidate { id } => Some(id.clone()),
            PassageRole::GroundTruth => None,
        })
        .unwrap_or_default();

    let mut per_question = Vec::with_capacity(question_set.pairs.len());
    for (idx, pair) in question_set.pairs.iter().enumerate() {
        let ctx = ComparisonContext {
            context: grounding_text,
            question: &pair.question,
        };
        let score = comparator.compare(
            &ctx,
            &candidate_answers[idx].answer_text,
            &gold_answers[idx].answer_text,
        )?;
        per_question.push(score);
    }
    let aggregate =
        per_question.iter().map(|s| s.normalized).sum::<f64>() / per_question.len() as f64;

    Ok(CandidateScore {
        instance_id: question_set.instance_id.clone(),
        candidate_id,
        sample_index: question_set.sample_index,
        comparator: comparator.name().to_string(),
        per_question,
        aggregate,
    })
}
