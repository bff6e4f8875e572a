//! Question-answer generation: prompt construction for the
//! grounding/conditioning variants, completion parsing into question-answer
//! pairs, and multi-sample generation.
//!
//! Questions probe the ground-truth text (source and/or reference);
//! candidate-aware variants additionally show the candidate translations so
//! generation can target their likely errors. Questions and answers are
//! always requested in English.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;
use thiserror::Error;

use crate::data::{Candidate, EvalInstance};
use crate::gateway::{DecodingConfig, Gateway, GatewayError, ModelSpec, PromptRequest};

/// Which ground-truth text anchors question generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grounding {
    /// Reference-free (quality estimation): only the source is shown.
    SourceOnly,
    ReferenceOnly,
    SourceAndReference,
}

impl Grounding {
    pub fn needs_reference(&self) -> bool {
        !matches!(self, Grounding::SourceOnly)
    }
}

/// Whether and how candidates enter the generation prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conditioning {
    /// Candidate-agnostic: questions generated in isolation.
    None,
    /// All candidate translations shown.
    AllCandidates,
    /// One target candidate shown at a time.
    SingleCandidate,
}

/// Order in which candidates are listed in candidate-aware prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CandidateOrder {
    DatasetOrder,
    /// Preference-labeled best candidate first.
    BestFirst,
    /// Preference-labeled worst candidate first.
    WorstFirst,
    Random { seed: u64 },
}

/// Full specification of one question-generation setting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QagMode {
    pub grounding: Grounding,
    pub conditioning: Conditioning,
    pub candidate_order: CandidateOrder,
    /// Required iff `conditioning` is `SingleCandidate`.
    #[serde(default)]
    pub target_candidate: Option<String>,
}

impl QagMode {
    pub fn candidate_agnostic(grounding: Grounding) -> Self {
        Self {
            grounding,
            conditioning: Conditioning::None,
            candidate_order: CandidateOrder::DatasetOrder,
            target_candidate: None,
        }
    }

    pub fn candidate_aware(grounding: Grounding, candidate_order: CandidateOrder) -> Self {
        Self {
            grounding,
            conditioning: Conditioning::AllCandidates,
            candidate_order,
            target_candidate: None,
        }
    }
}

/// One generated question with its answers.
///
/// `qag_answer` is what the generation model proposed; it anchors the
/// question in the text but is not what scoring compares against.
/// `regenerated_answer` is the QA model's answer over the ground truth,
/// filled in by the answering stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: String,
    pub qag_answer: String,
    #[serde(default)]
    pub regenerated_answer: Option<String>,
}

/// All pairs parsed from one completion for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionSet {
    pub instance_id: String,
    pub mode: QagMode,
    pub sample_index: u32,
    pub pairs: Vec<QaPair>,
    pub raw_completion: String,
    pub decoding: DecodingConfig,
}

/// Non-fatal oddity encountered while parsing a completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseWarning {
    pub message: String,
}

#[derive(Debug, Error)]
pub enum QagError {
    #[error("instance `{instance_id}`: grounding requires a reference but none is present")]
    MissingReference { instance_id: String },
    #[error("instance `{instance_id}`: unknown target candidate `{candidate_id}`")]
    UnknownTargetCandidate {
        instance_id: String,
        candidate_id: String,
    },
    #[error("single-candidate conditioning requires a target candidate id")]
    MissingTargetCandidate,
    #[error("greedy decoding admits exactly one sample, got n_samples={n_samples}")]
    GreedyMultiSample { n_samples: u32 },
    #[error("n_samples must be at least 1")]
    ZeroSamples,
    #[error("instance `{instance_id}`: no sample produced any question-answer pair")]
    AllSamplesEmpty { instance_id: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

pub const QAG_SYSTEM_MESSAGE: &str =
    "You are an expert teacher tasked with designing reading comprehension questions.";

/// Candidates in the order the prompt should list them.
///
/// Falls back to dataset order (second value `true`) when a best/worst
/// ordering is requested but the instance carries no preference label.
pub fn ordered_candidates<'a>(
    instance: &'a EvalInstance,
    order: CandidateOrder,
) -> (Vec<&'a Candidate>, bool) {
    let dataset_order: Vec<&Candidate> = instance.candidates.iter().collect();
    match order {
        CandidateOrder::DatasetOrder => (dataset_order, false),
        CandidateOrder::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut shuffled = dataset_order;
            shuffled.shuffle(&mut rng);
            (shuffled, false)
        }
        CandidateOrder::BestFirst | CandidateOrder::WorstFirst => {
            let Some(pref) = &instance.preference else {
                return (dataset_order, true);
            };
            let lead = if matches!(order, CandidateOrder::BestFirst) {
                pref.best()
            } else {
                pref.worst()
            };
            let mut ordered: Vec<&Candidate> = Vec::with_capacity(dataset_order.len());
            if let Some(first) = instance.candidate(lead) {
                ordered.push(first);
            }
            for cand in &dataset_order {
                if cand.id != lead {
                    ordered.push(cand);
                }
            }
            (ordered, false)
        }
    }
}

/// Build the generation prompt for an instance under a mode.
///
/// Reference groundings use the template with `Source Passage` /
/// `Reference Passage` blocks; source-only uses the `Original Passage`
/// variant. Candidate-aware modes append an `Alternative Passages` block
/// and ask for errors "in the alternatives".
pub fn build_qag_prompt(
    instance: &EvalInstance,
    mode: &QagMode,
    model: &ModelSpec,
) -> Result<PromptRequest, QagError> {
    if mode.grounding.needs_reference() && instance.reference_text.is_none() {
        return Err(QagError::MissingReference {
            instance_id: instance.id.clone(),
        });
    }

    let shown: Option<Vec<&Candidate>> = match mode.conditioning {
        Conditioning::None => None,
        Conditioning::AllCandidates => Some(ordered_candidates(instance, mode.candidate_order).0),
        Conditioning::SingleCandidate => {
            let target = mode
                .target_candidate
                .as_deref()
                .ok_or(QagError::MissingTargetCandidate)?;
            let cand = instance
                .candidate(target)
                .ok_or_else(|| QagError::UnknownTargetCandidate {
                    instance_id: instance.id.clone(),
                    candidate_id: target.to_string(),
                })?;
            Some(vec![cand])
        }
    };

    let aware_phrase = if shown.is_some() {
        " in the alternatives"
    } else {
        ""
    };

    let mut user = String::new();
    match mode.grounding {
        Grounding::SourceOnly => {
            user.push_str(&format!(
                "Generate question-answer pairs to verify translation accuracy. Each answer \
                 should be a key phrase, concept, or entity from the original passage that is \
                 important in context and could help detect potential errors or mistranslations{aware_phrase}.\n\n\
                 The questions and answers must be strictly in English while ensuring that the \
                 meaning of the answer is preserved. The questions should be diverse and cover \
                 different aspects of the passage. Answer in the format:\n\n\
                 Q: <question1>\nA: <answer1>\nQ: <question2>\nA: <answer2>\n\n\
                 Original Passage: {}\n",
                instance.source_text
            ));
        }
        Grounding::ReferenceOnly | Grounding::SourceAndReference => {
            let anchor = if mode.grounding == Grounding::SourceAndReference {
                "(source or reference)"
            } else {
                "(reference)"
            };
            user.push_str(&format!(
                "Generate question-answer pairs to verify translation accuracy. Each answer \
                 should be a key phrase, concept, or entity from the original passage {anchor} \
                 that is important in context and could help detect potential errors or \
                 mistranslations{aware_phrase}.\n\n\
                 The questions and answers must be in English while preserving meaning. \
                 Questions should be diverse and cover different aspects of the passage.\n\n\
                 Q: <question1>\nA: <answer1>\nQ: <question2>\nA: <answer2>\n\n"
            ));
            if mode.grounding == Grounding::SourceAndReference {
                user.push_str(&format!("Source Passage: {}\n", instance.source_text));
            }
            user.push_str(&format!(
                "Reference Passage: {}\n",
                instance.reference_text.as_deref().unwrap_or_default()
            ));
        }
    }

    if let Some(candidates) = &shown {
        user.push_str("Alternative Passages:\n");
        for (i, cand) in candidates.iter().enumerate() {
            user.push_str(&format!("{}. {}\n", i + 1, cand.text));
        }
    }
    user.push_str("Question-Answer Pairs:");

    Ok(PromptRequest::new(model, QAG_SYSTEM_MESSAGE, user))
}

fn q_marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?mi)^[ \t]*(?:[-*•][ \t]*)?(?:\d{1,3}[.)][ \t]*)?[*_#]*[ \t]*q[*_]*[ \t]*:")
            .expect("static regex")
    })
}

fn a_marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\ba[*_]*[ \t]*:").expect("static regex"))
}

fn clean_segment(raw: &str) -> String {
    let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_matches(|c| matches!(c, '*' | '_' | '`' | '~'))
        .trim()
        .to_string()
}

/// Extract question-answer pairs from a raw completion.
///
/// A pair is a line-anchored `Q:` marker (optionally list-numbered or
/// emphasized) capturing up to the next `A:` marker, whose text runs to
/// the next `Q:` marker or end of input. Markdown emphasis is stripped
/// from segment edges and internal newlines collapse to spaces. Questions
/// without answers are dropped with a warning; unparseable text yields an
/// empty list plus a warning, never an error.
pub fn parse_qa_pairs(text: &str) -> (Vec<QaPair>, Vec<ParseWarning>) {
    let mut pairs = Vec::new();
    let mut warnings = Vec::new();
    let mut warn = |message: String| warnings.push(ParseWarning { message });

    let q_spans: Vec<(usize, usize)> = q_marker().find_iter(text).map(|m| (m.start(), m.end())).collect();
    if q_spans.is_empty() {
        if !text.trim().is_empty() {
            warn("no question-answer markers found in completion".to_string());
        }
        return (pairs, warnings);
    }

    for (i, &(_, q_end)) in q_spans.iter().enumerate() {
        let region_end = q_spans.get(i + 1).map(|&(s, _)| s).unwrap_or(text.len());
        let region = &text[q_end..region_end];
        let Some(a) = a_marker().find(region) else {
            warn(format!(
                "question without an answer dropped: {:?}",
                clean_segment(region)
            ));
            continue;
        };
        let question = clean_segment(&region[..a.start()]);
        let answer = clean_segment(&region[a.end()..]);
        if question.is_empty() || answer.is_empty() {
            warn(format!(
                "pair with empty question or answer dropped (question {question:?}, answer {answer:?})"
            ));
            continue;
        }
        pairs.push(QaPair {
            question,
            qag_answer: answer,
            regenerated_answer: None,
        });
    }

    (pairs, warnings)
}

/// Render pairs back into the `Q:`/`A:` exchange format.
pub fn render_qa_pairs(pairs: &[QaPair]) -> String {
    let mut out = String::new();
    for pair in pairs {
        out.push_str(&format!("Q: {}\nA: {}\n", pair.question, pair.qag_answer));
    }
    out
}

/// Seed for the i-th sample so each sample owns a distinct cache key.
fn sample_decoding(base: &DecodingConfig, n_samples: u32, index: u32) -> DecodingConfig {
    if n_samples <= 1 {
        return base.clone();
    }
    let seed = base.seed.unwrap_or(0) + u64::from(index);
    base.clone().with_seed(Some(seed))
}

/// Generate `n_samples` question sets for one instance.
///
/// Greedy decoding admits exactly one sample. Samples that parse to zero
/// pairs are kept (and logged); if every sample is empty the instance
/// fails.
pub fn generate_questions(
    gateway: &Gateway,
    instance: &EvalInstance,
    mode: &QagMode,
    model: &ModelSpec,
    decoding: &DecodingConfig,
    n_samples: u32,
    max_questions: Option<usize>,
) -> Result<Vec<QuestionSet>, QagError> {
    if n_samples == 0 {
        return Err(QagError::ZeroSamples);
    }
    if decoding.is_greedy() && n_samples > 1 {
        return Err(QagError::GreedyMultiSample { n_samples });
    }
    if matches!(mode.candidate_order, CandidateOrder::BestFirst | CandidateOrder::WorstFirst)
        && mode.conditioning == Conditioning::AllCandidates
        && instance.preference.is_none()
    {
        log::warn!(
            "instance `{}` has no preference label; falling back to dataset order",
            instance.id
        );
    }

    let request = build_qag_prompt(instance, mode, model)?;
    let mut sets = Vec::with_capacity(n_samples as usize);
    for index in 0..n_samples {
        let sample_dec = sample_decoding(decoding, n_samples, index);
        let completion = gateway.complete(&request, &sample_dec)?;
        let (mut pairs, warnings) = parse_qa_pairs(&completion.text);
        for w in &warnings {
            log::warn!("instance `{}` sample {index}: {}", instance.id, w.message);
        }
        if let Some(cap) = max_questions {
            if pairs.len() > cap {
                log::warn!(
                    "instance `{}` sample {index}: truncating {} pairs to max_questions={cap}",
                    instance.id,
                    pairs.len()
                );
                pairs.truncate(cap);
            }
        }
        if pairs.is_empty() {
            log::warn!("instance `{}` sample {index}: zero pairs parsed", instance.id);
        }
        sets.push(QuestionSet {
            instance_id: instance.id.clone(),
            mode: mode.clone(),
            sample_index: index,
            pairs,
            raw_completion: completion.text,
            decoding: sample_dec,
        });
    }

    if sets.iter().all(|s| s.pairs.is_empty()) {
        return Err(QagError::AllSamplesEmpty {
            instance_id: instance.id.clone(),
        });
    }
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PreferenceLabel;
    use crate::gateway::BackendId;
    use std::collections::BTreeMap;

    fn spec() -> ModelSpec {
        ModelSpec::new("qag-model", BackendId::Scripted)
    }

    fn instance() -> EvalInstance {
        EvalInstance {
            id: "i1".into(),
            source_text: "Die rote Tür blieb verschlossen.".into(),
            source_lang: "de".into(),
            reference_text: Some("The red door stayed locked.".into()),
            reference_lang: Some("en".into()),
            candidates: vec![
                Candidate {
                    id: "sysA".into(),
                    text: "The red door stayed locked.".into(),
                    error_spans: vec![],
                },
                Candidate {
                    id: "sysB".into(),
                    text: "The crimson gate remained open.".into(),
                    error_spans: vec![],
                },
            ],
            preference: Some(PreferenceLabel::Pairwise {
                better: "sysA".into(),
                worse: "sysB".into(),
            }),
            metadata: BTreeMap::new(),
        }
    }

    #[test]
    fn reference_based_agnostic_prompt_blocks() {
        let mode = QagMode::candidate_agnostic(Grounding::SourceAndReference);
        let req = build_qag_prompt(&instance(), &mode, &spec()).unwrap();
        assert!(req.user_message.contains("Source Passage:"));
        assert!(req.user_message.contains("Reference Passage:"));
        assert!(!req.user_message.contains("Alternative Passages:"));
        assert!(!req.user_message.contains("in the alternatives"));
        assert!(req.user_message.ends_with("Question-Answer Pairs:"));
        assert_eq!(req.system_message, QAG_SYSTEM_MESSAGE);
    }

    #[test]
    fn qe_aware_prompt_blocks() {
        let mode = QagMode::candidate_aware(Grounding::SourceOnly, CandidateOrder::DatasetOrder);
        let req = build_qag_prompt(&instance(), &mode, &spec()).unwrap();
        assert!(req.user_message.contains("Original Passage:"));
        assert!(!req.user_message.contains("Source Passage:"));
        assert!(!req.user_message.contains("Reference Passage:"));
        assert!(req.user_message.contains("Alternative Passages:"));
        assert!(req.user_message.contains("in the alternatives"));
    }

    #[test]
    fn block_presence_is_a_pure_function_of_mode() {
        let inst = instance();
        for grounding in [
            Grounding::SourceOnly,
            Grounding::ReferenceOnly,
            Grounding::SourceAndReference,
        ] {
            for conditioning in [
                Conditioning::None,
                Conditioning::AllCandidates,
                Conditioning::SingleCandidate,
            ] {
                let mode = QagMode {
                    grounding,
                    conditioning,
                    candidate_order: CandidateOrder::DatasetOrder,
                    target_candidate: matches!(conditioning, Conditioning::SingleCandidate)
                        .then(|| "sysA".to_string()),
                };
                let req = build_qag_prompt(&inst, &mode, &spec()).unwrap();
                let text = &req.user_message;
                assert_eq!(
                    text.contains("Original Passage:"),
                    grounding == Grounding::SourceOnly
                );
                assert_eq!(
                    text.contains("Source Passage:"),
                    grounding == Grounding::SourceAndReference
                );
                assert_eq!(
                    text.contains("Reference Passage:"),
                    grounding != Grounding::SourceOnly
                );
                let aware = conditioning != Conditioning::None;
                assert_eq!(text.contains("Alternative Passages:"), aware);
                assert_eq!(text.contains("in the alternatives"), aware);
            }
        }
    }

    #[test]
    fn best_first_puts_preferred_candidate_first() {
        let mode = QagMode::candidate_aware(Grounding::SourceAndReference, CandidateOrder::BestFirst);
        let req = build_qag_prompt(&instance(), &mode, &spec()).unwrap();
        let alts = req.user_message.split("Alternative Passages:").nth(1).unwrap();
        assert!(alts.contains("1. The red door stayed locked."));
        assert!(alts.contains("2. The crimson gate remained open."));

        let mode = QagMode::candidate_aware(Grounding::SourceAndReference, CandidateOrder::WorstFirst);
        let req = build_qag_prompt(&instance(), &mode, &spec()).unwrap();
        let alts = req.user_message.split("Alternative Passages:").nth(1).unwrap();
        assert!(alts.contains("1. The crimson gate remained open."));
    }

    #[test]
    fn reordering_changes_only_the_alternatives_block() {
        let make = |order| {
            let mode = QagMode::candidate_aware(Grounding::SourceAndReference, order);
            build_qag_prompt(&instance(), &mode, &spec()).unwrap().user_message
        };
        let a = make(CandidateOrder::BestFirst);
        let b = make(CandidateOrder::WorstFirst);
        let head = |s: &str| s.split("Alternative Passages:").next().unwrap().to_string();
        assert_eq!(head(&a), head(&b));
        assert_ne!(a, b);
    }

    #[test]
    fn missing_reference_and_unknown_target_error() {
        let mut inst = instance();
        inst.reference_text = None;
        let mode = QagMode::candidate_agnostic(Grounding::SourceAndReference);
        assert!(matches!(
            build_qag_prompt(&inst, &mode, &spec()),
            Err(QagError::MissingReference { .. })
        ));

        let mode = QagMode {
            grounding: Grounding::SourceOnly,
            conditioning: Conditioning::SingleCandidate,
            candidate_order: CandidateOrder::DatasetOrder,
            target_candidate: Some("ghost".into()),
        };
        assert!(matches!(
            build_qag_prompt(&instance(), &mode, &spec()),
            Err(QagError::UnknownTargetCandidate { .. })
        ));
    }

    #[test]
    fn ordering_without_preference_falls_back() {
        let mut inst = instance();
        inst.preference = None;
        let (ordered, fell_back) = ordered_candidates(&inst, CandidateOrder::BestFirst);
        assert!(fell_back);
        assert_eq!(ordered[0].id, "sysA");
    }

    #[test]
    fn random_ordering_is_seed_deterministic() {
        let inst = instance();
        let (a, _) = ordered_candidates(&inst, CandidateOrder::Random { seed: 7 });
        let (b, _) = ordered_candidates(&inst, CandidateOrder::Random { seed: 7 });
        let ids = |v: &[&Candidate]| v.iter().map(|c| c.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a), ids(&b));
    }

    #[test]
    fn parse_single_pair() {
        let (pairs, warnings) = parse_qa_pairs("Q: Who left?\nA: Mira");
        assert!(warnings.is_empty());
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].question, "Who left?");
        assert_eq!(pairs[0].qag_answer, "Mira");
    }

    #[test]
    fn parse_numbered_and_inline_pairs() {
        // Hand-parse: "1. Q:" opens, the inline "A:" splits, next "Q:" line opens again.
        let (pairs, warnings) = parse_qa_pairs("1. Q: A? A: B\nQ: C?\nA: D");
        assert!(warnings.is_empty());
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].question, "A?");
        assert_eq!(pairs[0].qag_answer, "B");
        assert_eq!(pairs[1].question, "C?");
        assert_eq!(pairs[1].qag_answer, "D");
    }

    #[test]
    fn parse_markerless_text_warns() {
        let (pairs, warnings) = parse_qa_pairs("There are no pairs here.");
        assert!(pairs.is_empty());
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn trailing_question_is_dropped_with_warning() {
        let (pairs, warnings) = parse_qa_pairs("Q: Who? A: Mira\nQ: Dangling?");
        assert_eq!(pairs.len(), 1);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].message.contains("without an answer"));
    }

    #[test]
    fn markdown_emphasis_and_newlines_are_cleaned() {
        let (pairs, _) = parse_qa_pairs("**Q:** What\nhappened *here*?\n**A:** _the fall_");
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].question, "What happened *here*?");
        assert_eq!(pairs[0].qag_answer, "the fall");
    }

    #[test]
    fn parse_is_idempotent_on_rendered_output() {
        let (pairs, _) = parse_qa_pairs("1. Q: Who left? A: Mira\n2. Q: What door? A: the red one");
        let rendered = render_qa_pairs(&pairs);
        let (reparsed, warnings) = parse_qa_pairs(&rendered);
        assert!(warnings.is_empty());
        assert_eq!(pairs, reparsed);
    }

    #[test]
    fn generate_respects_greedy_sample_precondition() {
        let gateway = Gateway::new(
            Box::new(crate::gateway::ScriptedBackend::constant("Q: q? A: a")),
            None,
        );
        let mode = QagMode::candidate_agnostic(Grounding::SourceAndReference);
        let err = generate_questions(
            &gateway,
            &instance(),
            &mode,
            &spec(),
            &DecodingConfig::greedy(),
            3,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, QagError::GreedyMultiSample { n_samples: 3 }));
    }

    #[test]
    fn generate_parses_scripted_completion() {
        let gateway = Gateway::new(
            Box::new(crate::gateway::ScriptedBackend::constant(
                "Q: Who stayed? A: the door\nQ: What color? A: red",
            )),
            None,
        );
        let mode = QagMode::candidate_agnostic(Grounding::SourceAndReference);
        let sets = generate_questions(
            &gateway,
            &instance(),
            &mode,
            &spec(),
            &DecodingConfig::greedy(),
            1,
            None,
        )
        .unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].pairs.len(), 2);
        assert_eq!(sets[0].sample_index, 0);
    }

    #[test]
    fn generate_errors_when_all_samples_empty() {
        let gateway = Gateway::new(
            Box::new(crate::gateway::ScriptedBackend::constant("no markers at all")),
            None,
        );
        let mode = QagMode::candidate_agnostic(Grounding::SourceAndReference);
        let err = generate_questions(
            &gateway,
            &instance(),
            &mode,
            &spec(),
            &DecodingConfig::greedy(),
            1,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, QagError::AllSamplesEmpty { .. }));
    }

    #[test]
    fn sampling_gives_each_sample_its_own_seed() {
        let base = DecodingConfig::sampling();
        let d0 = sample_decoding(&base, 5, 0);
        let d4 = sample_decoding(&base, 5, 4);
        assert_eq!(d0.seed, Some(0));
        assert_eq!(d4.seed, Some(4));
        let single = sample_decoding(&DecodingConfig::greedy(), 1, 0);
        assert_eq!(single.seed, None);
    }

    #[test]
    fn max_questions_truncates() {
        let gateway = Gateway::new(
            Box::new(crate::gateway::ScriptedBackend::constant(
                "Q: one? A: 1\nQ: two? A: 2\nQ: three? A: 3",
            )),
            None,
        );
        let mode = QagMode::candidate_agnostic(Grounding::SourceAndReference);
        let sets = generate_questions(
            &gateway,
            &instance(),
            &mode,
            &spec(),
            &DecodingConfig::greedy(),
            1,
            Some(2),
        )
        .unwrap();
        assert_eq!(sets[0].pairs.len(), 2);
    }
}
