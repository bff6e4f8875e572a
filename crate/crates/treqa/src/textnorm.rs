//! Text normalization shared by answer comparison, substring checks, and
//! coverage analysis.
//!
//! Input texts are stored exactly as loaded; normalization happens only
//! inside comparisons, so the exact variant used matters. Three are used:
//! [`fold`] (NFKC + lowercase + whitespace collapse) for containment checks,
//! [`answer_norm`] (additionally trims edge punctuation) for answer
//! equality and token overlap, and [`word_count`] for length statistics.

use unicode_normalization::UnicodeNormalization;

/// NFKC-normalize a string.
pub fn nfkc(text: &str) -> String {
    text.nfkc().collect()
}

/// NFKC, lowercase, and collapse all whitespace runs to single spaces.
///
/// This is the normalization behind substring containment: the extractive
/// answer check and error-span coverage.
pub fn fold(text: &str) -> String {
    collapse_whitespace(&nfkc(text).to_lowercase())
}

/// [`fold`] plus stripping punctuation from both edges of the string.
///
/// Used for exact-match and token-F1 comparison of short answers, where a
/// trailing period or surrounding quotes should not count against a match.
pub fn answer_norm(text: &str) -> String {
    let folded = fold(text);
    folded
        .trim_matches(|c: char| !c.is_alphanumeric() && !c.is_whitespace())
        .trim()
        .to_string()
}

/// Whitespace tokens of the NFKC-normalized text.
pub fn word_count(text: &str) -> usize {
    nfkc(text).split_whitespace().count()
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
