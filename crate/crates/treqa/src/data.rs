//! Evaluation data model: passages, candidate translations, expert
//! preferences, and error-span annotations, plus line-delimited JSON
//! loading with validation.
//!
//! One instance is a source passage with an optional reference translation
//! and one or more candidate translations to rank. Candidates may carry
//! expert-annotated error spans; instances may carry a pairwise or
//! total-order expert preference. All types are immutable after
//! construction and cheap to share across threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Whether a BCP-47 tag denotes English (primary subtag `en`).
pub fn is_english_tag(tag: &str) -> bool {
    let primary = tag.split(['-', '_']).next().unwrap_or("");
    primary.eq_ignore_ascii_case("en")
}

/// How a dataset is meant to be evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalType {
    /// Every instance carries a reference translation.
    ReferenceBased,
    /// Scoring may rely on the source text only.
    ReferenceFree,
}

impl fmt::Display for EvalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalType::ReferenceBased => write!(f, "reference-based"),
            EvalType::ReferenceFree => write!(f, "reference-free"),
        }
    }
}

/// Severity of an annotated error span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Minor,
    Major,
    Critical,
}

/// An expert-annotated erroneous substring of a candidate translation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorSpan {
    /// The erroneous text, as annotated.
    pub text: String,
    #[serde(default)]
    pub severity: Option<Severity>,
    #[serde(default)]
    pub category: Option<String>,
    /// Optional `[start, end)` character offsets into the candidate text.
    #[serde(default)]
    pub char_range: Option<(usize, usize)>,
}

/// One system's translation of the source passage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    /// System name; unique within its instance.
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub error_spans: Vec<ErrorSpan>,
}

/// An expert preference over the candidates of one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PreferenceLabel {
    /// `better` was preferred over `worse`.
    Pairwise { better: String, worse: String },
    /// Candidates ranked best to worst.
    TotalOrder { ranking: Vec<String> },
}

impl PreferenceLabel {
    /// Candidate ids named by this label, best first where defined.
    pub fn named_ids(&self) -> Vec<&str> {
        match self {
            PreferenceLabel::Pairwise { better, worse } => vec![better, worse],
            PreferenceLabel::TotalOrder { ranking } => {
                ranking.iter().map(String::as_str).collect()
            }
        }
    }

    /// The best-ranked candidate id.
    pub fn best(&self) -> &str {
        match self {
            PreferenceLabel::Pairwise { better, .. } => better,
            PreferenceLabel::TotalOrder { ranking } => &ranking[0],
        }
    }

    /// The worst-ranked candidate id.
    pub fn worst(&self) -> &str {
        match self {
            PreferenceLabel::Pairwise { worse, .. } => worse,
            PreferenceLabel::TotalOrder { ranking } => {
                ranking.last().map(String::as_str).unwrap_or("")
            }
        }
    }
}

/// One source passage with its reference, candidates, and annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalInstance {
    pub id: String,
    #[serde(rename = "source")]
    pub source_text: String,
    pub source_lang: String,
    #[serde(rename = "reference", default)]
    pub reference_text: Option<String>,
    #[serde(default)]
    pub reference_lang: Option<String>,
    pub candidates: Vec<Candidate>,
    #[serde(default)]
    pub preference: Option<PreferenceLabel>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl EvalInstance {
    pub fn candidate(&self, id: &str) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.id == id)
    }

    /// Language of the candidate translations, when known.
    ///
    /// Candidates carry no language tag of their own; the `target_lang`
    /// metadata key wins, then the reference language.
    pub fn candidate_language(&self) -> Option<&str> {
        self.metadata
            .get("target_lang")
            .map(String::as_str)
            .or(self.reference_lang.as_deref())
    }

    /// Total number of annotated error spans across all candidates.
    pub fn error_span_count(&self) -> usize {
        self.candidates.iter().map(|c| c.error_spans.len()).sum()
    }
}

/// A named collection of instances under one evaluation regime.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub eval_type: EvalType,
    pub instances: Vec<EvalInstance>,
}

impl Dataset {
    pub fn instance(&self, id: &str) -> Option<&EvalInstance> {
        self.instances.iter().find(|i| i.id == id)
    }
}

/// One violated invariant, addressed by the field that breaks it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

/// Every invariant an instance violates; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.field, v.message))
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed instance record: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: duplicate instance id `{id}`")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
    },
    #[error("{path}:{line}: instance `{id}` has no reference but eval type is reference-based")]
    MissingReference {
        path: PathBuf,
        line: usize,
        id: String,
    },
    #[error("{path}:{line}: instance `{id}` violates invariants: {report}")]
    InvalidInstance {
        path: PathBuf,
        line: usize,
        id: String,
        report: ValidationReport,
    },
}

/// Check every type invariant of an instance.
///
/// Violations are data, not failures; they come back sorted by field path
/// so reports are deterministic.
pub fn validate_instance(instance: &EvalInstance) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |field: String, message: String| violations.push(Violation { field, message });

    if instance.source_text.trim().is_empty() {
        push(
            "source_text".into(),
            "source text is empty after trimming".into(),
        );
    }
    if instance.candidates.is_empty() {
        push("candidates".into(), "candidate list is empty".into());
    }

    let mut seen_ids = BTreeSet::new();
    for (i, cand) in instance.candidates.iter().enumerate() {
        if !seen_ids.insert(cand.id.as_str()) {
            push(
                format!("candidates[{i}].id"),
                format!("duplicate candidate id `{}`", cand.id),
            );
        }
        if cand.text.is_empty() {
            push(format!("candidates[{i}].text"), "candidate text is empty".into());
        }
        for (j, span) in cand.error_spans.iter().enumerate() {
            if span.text.is_empty() {
                push(
                    format!("candidates[{i}].error_spans[{j}].text"),
                    "error span text is empty".into(),
                );
            }
            if let Some((start, end)) = span.char_range {
                let slice: String = cand
                    .text
                    .chars()
                    .skip(start)
                    .take(end.saturating_sub(start))
                    .collect();
                if start > end || slice != span.text {
                    push(
                        format!("candidates[{i}].error_spans[{j}].char_range"),
                        format!(
                            "range [{start}, {end}) does not slice the candidate text to the span text"
                        ),
                    );
                }
            }
        }
    }

    if let Some(pref) = &instance.preference {
        match pref {
            PreferenceLabel::Pairwise { better, worse } => {
                if better == worse {
                    push(
                        "preference".into(),
                        format!("pairwise preference names `{better}` on both sides"),
                    );
                }
                for id in [better, worse] {
                    if instance.candidate(id).is_none() {
                        push(
                            "preference".into(),
                            format!("preference names unknown candidate `{id}`"),
                        );
                    }
                }
            }
            PreferenceLabel::TotalOrder { ranking } => {
                let ranked: BTreeSet<&str> = ranking.iter().map(String::as_str).collect();
                let present: BTreeSet<&str> =
                    instance.candidates.iter().map(|c| c.id.as_str()).collect();
                if ranked.len() != ranking.len() || ranked != present {
                    push(
                        "preference".into(),
                        "total-order ranking is not a permutation of the candidate ids".into(),
                    );
                }
            }
        }
    }

    violations.sort_by(|a, b| (&a.field, &a.message).cmp(&(&b.field, &b.message)));
    ValidationReport { violations }
}

/// Load a line-delimited dataset, validating every instance.
///
/// The dataset name is the file stem. Blank lines are skipped; line numbers
/// in errors are 1-based and count blank lines.
pub fn load_dataset(path: &Path, eval_type: EvalType) -> Result<Dataset, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());

    let mut instances: Vec<EvalInstance> = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let instance: EvalInstance =
            serde_json::from_str(&line).map_err(|e| DataError::Malformed {
                path: path.to_path_buf(),
                line: line_no,
                message: e.to_string(),
            })?;
        if seen.insert(instance.id.clone(), line_no).is_some() {
            return Err(DataError::DuplicateId {
                path: path.to_path_buf(),
                line: line_no,
                id: instance.id,
            });
        }
        if eval_type == EvalType::ReferenceBased && instance.reference_text.is_none() {
            return Err(DataError::MissingReference {
                path: path.to_path_buf(),
                line: line_no,
                id: instance.id,
            });
        }
        let report = validate_instance(&instance);
        if !report.is_valid() {
            return Err(DataError::InvalidInstance {
                path: path.to_path_buf(),
                line: line_no,
                id: instance.id,
                report,
            });
        }
        instances.push(instance);
    }

    Ok(Dataset {
        name,
        eval_type,
        instances,
    })
}

/// Write a dataset back out as one JSON record per line.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<(), DataError> {
    let file = File::create(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut writer = BufWriter::new(file);
    for instance in &dataset.instances {
        let line = serde_json::to_string(instance).expect("instance serializes");
        writeln!(writer, "{line}").map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    writer.flush().map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn candidate(id: &str, text: &str) -> Candidate {
        Candidate {
            id: id.to_string(),
            text: text.to_string(),
            error_spans: Vec::new(),
        }
    }

    fn instance() -> EvalInstance {
        EvalInstance {
            id: "i1".into(),
            source_text: "Mira otworzyła czerwone drzwi.".into(),
            source_lang: "pl".into(),
            reference_text: Some("Mira opened the red door.".into()),
            reference_lang: Some("en".into()),
            candidates: vec![
                candidate("sysA", "Mira opened the red door."),
                candidate("sysB", "Mira opened a crimson gate."),
            ],
            preference: Some(PreferenceLabel::Pairwise {
                better: "sysA".into(),
                worse: "sysB".into(),
            }),
            metadata: BTreeMap::new(),
        }
    }

    #[test]
    fn valid_instance_yields_empty_report() {
        assert!(validate_instance(&instance()).is_valid());
    }

    #[test]
    fn empty_candidates_is_one_violation() {
        let mut inst = instance();
        inst.candidates.clear();
        inst.preference = None;
        let report = validate_instance(&inst);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].field, "candidates");
    }

    #[test]
    fn char_range_mismatch_is_detected() {
        let mut inst = instance();
        inst.candidates[1].error_spans.push(ErrorSpan {
            text: "crimson gate".into(),
            severity: Some(Severity::Major),
            category: Some("mistranslation".into()),
            char_range: Some((0, 12)),
        });
        let report = validate_instance(&inst);
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0].field.contains("char_range"));

        // Correct offsets: "crimson gate" starts at char 13 of "Mira opened a crimson gate."
        inst.candidates[1].error_spans[0].char_range = Some((14, 26));
        assert!(validate_instance(&inst).is_valid());
    }

    #[test]
    fn preference_naming_unknown_candidate_is_violation() {
        let mut inst = instance();
        inst.preference = Some(PreferenceLabel::Pairwise {
            better: "ghost".into(),
            worse: "sysB".into(),
        });
        let report = validate_instance(&inst);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].field, "preference");
    }

    #[test]
    fn total_order_must_be_permutation() {
        let mut inst = instance();
        inst.preference = Some(PreferenceLabel::TotalOrder {
            ranking: vec!["sysA".into()],
        });
        assert!(!validate_instance(&inst).is_valid());
        inst.preference = Some(PreferenceLabel::TotalOrder {
            ranking: vec!["sysB".into(), "sysA".into()],
        });
        assert!(validate_instance(&inst).is_valid());
    }

    #[test]
    fn english_tag_detection() {
        assert!(is_english_tag("en"));
        assert!(is_english_tag("EN-us"));
        assert!(is_english_tag("en_GB"));
        assert!(!is_english_tag("enm"));
        assert!(!is_english_tag("pl"));
        assert!(!is_english_tag(""));
    }
}
