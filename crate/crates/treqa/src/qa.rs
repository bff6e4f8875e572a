//! Question answering over passages: extractive prompting for English
//! passages, crosslingual prompting otherwise, and regeneration of gold
//! answers from the ground-truth text.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{is_english_tag, EvalInstance};
use crate::gateway::{DecodingConfig, Gateway, GatewayError, ModelSpec, PromptRequest};
use crate::qag::QuestionSet;
use crate::textnorm;

/// How the QA model is prompted, decided by the passage language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QaStyle {
    /// English passage: demand a verbatim span.
    MonolingualExtractive,
    /// Non-English passage: demand a concise English answer.
    Crosslingual,
}

impl QaStyle {
    pub fn for_language(lang: &str) -> Self {
        if is_english_tag(lang) {
            QaStyle::MonolingualExtractive
        } else {
            QaStyle::Crosslingual
        }
    }
}

/// Which passage an answer was extracted from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "kebab-case")]
pub enum PassageRole {
    /// The ground-truth text (source or reference).
    GroundTruth,
    Candidate { id: String },
}

/// A passage with its language tag.
#[derive(Debug, Clone, Copy)]
pub struct Passage<'a> {
    pub text: &'a str,
    pub lang: &'a str,
}

/// One QA-model answer, addressed by instance, sample, question, and role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub instance_id: String,
    pub sample_index: u32,
    pub question_index: u32,
    #[serde(flatten)]
    pub passage_role: PassageRole,
    pub answer_text: String,
    pub style: QaStyle,
    /// Extractive style only: the answer was not found verbatim in the
    /// passage (after normalization). Recorded, never filtered on.
    pub extractive_violation: bool,
}

/// Which ground-truth text regenerated gold answers come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GoldGrounding {
    Source,
    Reference,
}

#[derive(Debug, Error)]
pub enum QaError {
    #[error("style {style:?} does not match passage language `{lang}`")]
    StyleMismatch { style: QaStyle, lang: String },
    #[error("instance `{instance_id}`: grounding text `{grounding:?}` is absent")]
    MissingGrounding {
        instance_id: String,
        grounding: GoldGrounding,
    },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

pub const QA_SYSTEM_MESSAGE: &str =
    "You are a helpful AI assistant skilled in extractive question answering.";

/// Build the answering prompt for one (passage, question) pair.
pub fn build_qa_prompt(
    passage: Passage<'_>,
    question: &str,
    style: QaStyle,
    model: &ModelSpec,
) -> Result<PromptRequest, QaError> {
    if style != QaStyle::for_language(passage.lang) {
        return Err(QaError::StyleMismatch {
            style,
            lang: passage.lang.to_string(),
        });
    }
    let instruction = match style {
        QaStyle::MonolingualExtractive => {
            "Given the following passage and question, extract the exact answer from the \
             passage. The answer should be a short span found verbatim in the passage."
        }
        QaStyle::Crosslingual => {
            "Given the following passage and question, return the answer in English using \
             only the information from the passage. The answer should be concise and \
             faithful to the original content."
        }
    };
    let user = format!(
        "{instruction}\n\n###\nPassage: {}\n###\nQuestion: {}\n###\nAnswer:",
        passage.text, question
    );
    Ok(PromptRequest::new(model, QA_SYSTEM_MESSAGE, user))
}

fn strip_answer_echo(completion: &str) -> &str {
    let trimmed = completion.trim();
    let lower = trimmed.to_lowercase();
    if let Some(rest) = lower.strip_prefix("answer:") {
        let offset = trimmed.len() - rest.len();
        trimmed[offset..].trim()
    } else {
        trimmed
    }
}

/// Answer one question against one passage.
///
/// The completion is trimmed and a leading `Answer:` echo stripped. Under
/// the extractive style the normalized answer must appear in the
/// normalized passage, otherwise the record is flagged. Empty completions
/// yield an empty answer, kept for scoring.
pub fn answer_question(
    gateway: &Gateway,
    passage: Passage<'_>,
    question: &str,
    style: QaStyle,
    model: &ModelSpec,
    decoding: &DecodingConfig,
) -> Result<(String, bool), QaError> {
    let request = build_qa_prompt(passage, question, style, model)?;
    let completion = gateway.complete(&request, decoding)?;
    let answer = strip_answer_echo(&completion.text).to_string();
    let extractive_violation = style == QaStyle::MonolingualExtractive
        && !answer.is_empty()
        && !textnorm::fold(passage.text).contains(&textnorm::fold(&answer));
    if answer.is_empty() {
        log::warn!("empty answer for question {question:?}");
    }
    Ok((answer, extractive_violation))
}

/// Resolve the grounding passage of an instance.
pub fn grounding_passage<'a>(
    instance: &'a EvalInstance,
    grounding: GoldGrounding,
) -> Result<Passage<'a>, QaError> {
    match grounding {
        GoldGrounding::Source => Ok(Passage {
            text: &instance.source_text,
            lang: &instance.source_lang,
        }),
        GoldGrounding::Reference => match &instance.reference_text {
            Some(text) => Ok(Passage {
                text,
                lang: instance.reference_lang.as_deref().unwrap_or("en"),
            }),
            None => Err(QaError::MissingGrounding {
                instance_id: instance.id.clone(),
                grounding,
            }),
        },
    }
}

/// Fill `regenerated_answer` for every pair by answering each question
/// against the ground-truth text with the QA model.
///
/// The original generation answers are preserved for analysis; scoring
/// uses only the regenerated ones afterwards.
pub fn regenerate_gold_answers(
    gateway: &Gateway,
    question_set: &QuestionSet,
    instance: &EvalInstance,
    grounding: GoldGrounding,
    model: &ModelSpec,
    decoding: &DecodingConfig,
) -> Result<QuestionSet, QaError> {
    let passage = grounding_passage(instance, grounding)?;
    let style = QaStyle::for_language(passage.lang);
    let mut updated = question_set.clone();
    for pair in &mut updated.pairs {
        let (answer, _) = answer_question(gateway, passage, &pair.question, style, model, decoding)?;
        pair.regenerated_answer = Some(answer);
    }
    Ok(updated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{BackendId, ScriptedBackend};
    use crate::qag::{QaPair, QagMode, Grounding};
    use std::collections::BTreeMap;

    fn spec() -> ModelSpec {
        ModelSpec::new("qa-model", BackendId::Scripted)
    }

    #[test]
    fn style_routing_by_language() {
        assert_eq!(QaStyle::for_language("en"), QaStyle::MonolingualExtractive);
        assert_eq!(QaStyle::for_language("en-GB"), QaStyle::MonolingualExtractive);
        assert_eq!(QaStyle::for_language("ja"), QaStyle::Crosslingual);
    }

    #[test]
    fn monolingual_prompt_wording() {
        let passage = Passage { text: "Mira opened the red door.", lang: "en" };
        let req = build_qa_prompt(passage, "Who opened the door?", QaStyle::MonolingualExtractive, &spec()).unwrap();
        assert!(req.user_message.contains("found verbatim in the passage"));
        assert!(req.user_message.contains("###\nPassage: Mira opened the red door."));
        assert!(req.user_message.ends_with("Answer:"));
        assert!(req.system_message.contains("skilled in extractive question answering"));
    }

    #[test]
    fn crosslingual_prompt_wording() {
        let passage = Passage { text: "ミラは赤い扉を開けた。", lang: "ja" };
        let req = build_qa_prompt(passage, "Who opened the door?", QaStyle::Crosslingual, &spec()).unwrap();
        assert!(req.user_message.contains("return the answer in English"));
    }

    #[test]
    fn style_language_mismatch_errors() {
        let passage = Passage { text: "Mira opened the red door.", lang: "en" };
        assert!(matches!(
            build_qa_prompt(passage, "q?", QaStyle::Crosslingual, &spec()),
            Err(QaError::StyleMismatch { .. })
        ));
        let passage = Passage { text: "ミラ", lang: "ja" };
        assert!(matches!(
            build_qa_prompt(passage, "q?", QaStyle::MonolingualExtractive, &spec()),
            Err(QaError::StyleMismatch { .. })
        ));
    }

    #[test]
    fn extractive_violation_flagging() {
        let passage = Passage { text: "Mira opened the red door.", lang: "en" };
        let gw = Gateway::new(Box::new(ScriptedBackend::constant("the RED door")), None);
        let (answer, violation) =
            answer_question(&gw, passage, "What?", QaStyle::MonolingualExtractive, &spec(), &DecodingConfig::greedy()).unwrap();
        assert_eq!(answer, "the RED door");
        assert!(!violation, "normalized substring should pass");

        let gw = Gateway::new(Box::new(ScriptedBackend::constant("a blue window")), None);
        let (_, violation) =
            answer_question(&gw, passage, "What?", QaStyle::MonolingualExtractive, &spec(), &DecodingConfig::greedy()).unwrap();
        assert!(violation);
    }

    #[test]
    fn crosslingual_never_flags_violation() {
        let passage = Passage { text: "ミラは赤い扉を開けた。", lang: "ja" };
        let gw = Gateway::new(Box::new(ScriptedBackend::constant("the red door")), None);
        let (_, violation) =
            answer_question(&gw, passage, "What?", QaStyle::Crosslingual, &spec(), &DecodingConfig::greedy()).unwrap();
        assert!(!violation);
    }

    #[test]
    fn answer_echo_is_stripped() {
        assert_eq!(strip_answer_echo("Answer: Mira"), "Mira");
        assert_eq!(strip_answer_echo("  ANSWER:  the door \n"), "the door");
        assert_eq!(strip_answer_echo("Mira answered."), "Mira answered.");
    }

    fn instance() -> EvalInstance {
        EvalInstance {
            id: "i1".into(),
            source_text: "Mira otworzyła czerwone drzwi.".into(),
            source_lang: "pl".into(),
            reference_text: Some("Mira opened the red door.".into()),
            reference_lang: Some("en".into()),
            candidates: vec![crate::data::Candidate {
                id: "sysA".into(),
                text: "Mira opened a door.".into(),
                error_spans: vec![],
            }],
            preference: None,
            metadata: BTreeMap::new(),
        }
    }

    fn question_set() -> QuestionSet {
        QuestionSet {
            instance_id: "i1".into(),
            mode: QagMode::candidate_agnostic(Grounding::SourceAndReference),
            sample_index: 0,
            pairs: vec![QaPair {
                question: "Who opened the door?".into(),
                qag_answer: "Mira (from generation)".into(),
                regenerated_answer: None,
            }],
            raw_completion: String::new(),
            decoding: DecodingConfig::greedy(),
        }
    }

    #[test]
    fn regeneration_fills_answers_and_keeps_originals() {
        let gw = Gateway::new(Box::new(ScriptedBackend::constant("Mira")), None);
        let updated = regenerate_gold_answers(
            &gw,
            &question_set(),
            &instance(),
            GoldGrounding::Reference,
            &spec(),
            &DecodingConfig::greedy(),
        )
        .unwrap();
        assert_eq!(updated.pairs[0].regenerated_answer.as_deref(), Some("Mira"));
        assert_eq!(updated.pairs[0].qag_answer, "Mira (from generation)");
    }

    #[test]
    fn regeneration_routes_style_by_grounding_language() {
        // Polish source → crosslingual prompt; English reference → extractive.
        let gw = Gateway::new(
            Box::new(ScriptedBackend::with_program(|req, _| {
                if req.user_message.contains("return the answer in English") {
                    Some("cross".to_string())
                } else if req.user_message.contains("found verbatim") {
                    Some("mono".to_string())
                } else {
                    None
                }
            })),
            None,
        );
        let via_source = regenerate_gold_answers(
            &gw, &question_set(), &instance(), GoldGrounding::Source, &spec(), &DecodingConfig::greedy(),
        )
        .unwrap();
        assert_eq!(via_source.pairs[0].regenerated_answer.as_deref(), Some("cross"));
        let via_reference = regenerate_gold_answers(
            &gw, &question_set(), &instance(), GoldGrounding::Reference, &spec(), &DecodingConfig::greedy(),
        )
        .unwrap();
        assert_eq!(via_reference.pairs[0].regenerated_answer.as_deref(), Some("mono"));
    }

    #[test]
    fn missing_grounding_errors() {
        let mut inst = instance();
        inst.reference_text = None;
        let gw = Gateway::new(Box::new(ScriptedBackend::constant("x")), None);
        assert!(matches!(
            regenerate_gold_answers(&gw, &question_set(), &inst, GoldGrounding::Reference, &spec(), &DecodingConfig::greedy()),
            Err(QaError::MissingGrounding { .. })
        ));
    }
}
