//! Canonical diagnosis labels.
//!
//! Two diagnoses are the same diagnosis exactly when their canonical forms
//! are byte-identical. Canonicalization is NFKC normalization, lowercasing,
//! whitespace collapsing and removal of trailing `.,;:!`, followed by an
//! optional exact lookup in a [`SynonymTable`]. There is no fuzzy matching.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use core::fmt;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::CoreError;

const TERMINAL_PUNCTUATION: &[char] = &['.', ',', ';', ':', '!'];

/// A diagnosis label in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(String);

impl Label {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Label {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

fn normalize_once(raw: &str) -> String {
    let folded: String = if raw.is_ascii() { raw.to_ascii_lowercase() } else { raw.nfkc().collect::<String>().to_lowercase() };
    let mut out = String::with_capacity(folded.len());
    for word in folded.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    let trimmed = out.trim_end_matches(|c: char| TERMINAL_PUNCTUATION.contains(&c) || c.is_whitespace());
    trimmed.to_string()
}

/// Normalizes `raw` to a fixed point of [`normalize_once`].
///
/// Lowercasing can take a string out of NFKC (and NFKC can expose new
/// whitespace), so the pass is repeated until it stops changing the text.
fn normalize(raw: &str) -> String {
    let mut current = normalize_once(raw);
    // ASCII text is already NFKC and lowercases to ASCII: one pass is final.
    if raw.is_ascii() {
        return current;
    }
    loop {
        let next = normalize_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

/// Canonicalizes a raw diagnosis string without a synonym table.
pub fn canonicalize_label(raw: &str) -> Result<Label, CoreError> {
    let normalized = normalize(raw);
    if normalized.is_empty() {
        return Err(CoreError::EmptyLabel);
    }
    Ok(Label(normalized))
}

/// Exact-entry mapping from normalized variants to a preferred form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymTable {
    entries: BTreeMap<String, String>,
}

impl SynonymTable {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a table from `(variant, preferred)` pairs, normalizing both sides.
    pub fn from_pairs<I, A, B>(pairs: I) -> Result<Self, CoreError>
    where
        I: IntoIterator<Item = (A, B)>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let mut entries = BTreeMap::new();
        for (idx, (variant, preferred)) in pairs.into_iter().enumerate() {
            let line = idx + 1;
            let variant = normalize(variant.as_ref());
            let preferred = normalize(preferred.as_ref());
            if variant.is_empty() || preferred.is_empty() {
                return Err(CoreError::SynonymTable { line, reason: "empty entry".into() });
            }
            if variant != preferred {
                entries.insert(variant, preferred);
            }
        }
        let table = Self { entries };
        table.check_no_chains()?;
        Ok(table)
    }

    /// Parses the newline-delimited `variant<TAB>preferred` file format.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, CoreError> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let record = raw_line.strip_suffix('\r').unwrap_or(raw_line);
            if record.trim().is_empty() || record.starts_with('#') {
                continue;
            }
            let Some((variant, preferred)) = record.split_once('\t') else {
                return Err(CoreError::SynonymTable { line, reason: "expected variant<TAB>preferred".into() });
            };
            if preferred.contains('\t') {
                return Err(CoreError::SynonymTable { line, reason: "more than two fields".into() });
            }
            let variant = normalize(variant);
            let preferred = normalize(preferred);
            if variant.is_empty() || preferred.is_empty() {
                return Err(CoreError::SynonymTable { line, reason: "empty entry".into() });
            }
            if let Some(existing) = entries.get(&variant) {
                if existing != &preferred {
                    return Err(CoreError::SynonymTable { line, reason: "conflicting duplicate variant".into() });
                }
            }
            if variant != preferred {
                entries.insert(variant, preferred);
            }
        }
        let table = Self { entries };
        table.check_no_chains()?;
        Ok(table)
    }

    fn check_no_chains(&self) -> Result<(), CoreError> {
        for preferred in self.entries.values() {
            if self.entries.contains_key(preferred) {
                return Err(CoreError::SynonymTable {
                    line: 0,
                    reason: alloc::format!("preferred form {preferred:?} is itself a variant"),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Canonicalizes `raw` and then applies the table.
    pub fn canonicalize(&self, raw: &str) -> Result<Label, CoreError> {
        let Label(normalized) = canonicalize_label(raw)?;
        match self.entries.get(&normalized) {
            Some(preferred) => Ok(Label(preferred.clone())),
            None => Ok(Label(normalized)),
        }
    }

    /// Serializes back to the file format, sorted by variant.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for (variant, preferred) in &self.entries {
            out.push_str(variant);
            out.push('\t');
            out.push_str(preferred);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalizes_spacing_case_and_trailing_punctuation() {
        assert_eq!(canonicalize_label("  Acute  Pancreatitis.").unwrap().as_str(), "acute pancreatitis");
        assert_eq!(canonicalize_label("acute pancreatitis").unwrap().as_str(), "acute pancreatitis");
        assert_eq!(canonicalize_label("Sepsis!;:,").unwrap().as_str(), "sepsis");
        assert_eq!(canonicalize_label("Aortic\tdissection \n").unwrap().as_str(), "aortic dissection");
    }

    #[test]
    fn interior_punctuation_is_kept() {
        assert_eq!(canonicalize_label("S.T.E.M.I.").unwrap().as_str(), "s.t.e.m.i");
        assert_eq!(canonicalize_label("type-2 MI").unwrap().as_str(), "type-2 mi");
    }

    #[test]
    fn compatibility_forms_fold() {
        // fullwidth letters and the "ﬁ" ligature
        assert_eq!(canonicalize_label("ＳＥＰＳＩＳ").unwrap().as_str(), "sepsis");
        assert_eq!(canonicalize_label("ﬁbrillation").unwrap().as_str(), "fibrillation");
    }

    #[test]
    fn empty_after_normalization_is_rejected() {
        assert_eq!(canonicalize_label(""), Err(CoreError::EmptyLabel));
        assert_eq!(canonicalize_label("  ..!  "), Err(CoreError::EmptyLabel));
    }

    #[test]
    fn synonym_lookup_happens_after_normalization() {
        let table = SynonymTable::parse("mi\tmyocardial infarction\n").unwrap();
        assert_eq!(table.canonicalize("MI").unwrap().as_str(), "myocardial infarction");
        assert_eq!(table.canonicalize(" M I ").unwrap().as_str(), "m i");
        assert_eq!(table.canonicalize("myocardial infarction").unwrap().as_str(), "myocardial infarction");
    }

    #[test]
    fn synonym_file_errors_carry_line_numbers() {
        let err = SynonymTable::parse("# header\nmi\tmyocardial infarction\nbroken line\n").unwrap_err();
        assert_eq!(err, CoreError::SynonymTable { line: 3, reason: "expected variant<TAB>preferred".into() });
        assert!(SynonymTable::parse("a\tb\nb\tc\n").is_err());
        assert!(SynonymTable::parse("a\tb\na\tc\n").is_err());
    }

    #[test]
    fn synonym_file_round_trips() {
        let table = SynonymTable::parse("MI\tMyocardial Infarction\nPE\tpulmonary embolism\n").unwrap();
        assert_eq!(table.to_file_string(), "mi\tmyocardial infarction\npe\tpulmonary embolism\n");
        assert_eq!(SynonymTable::parse(&table.to_file_string()).unwrap(), table);
    }

    proptest! {
        #[test]
        fn canonicalization_is_idempotent(raw in any::<String>()) {
            if let Ok(first) = canonicalize_label(&raw) {
                let second = canonicalize_label(first.as_str()).unwrap();
                prop_assert_eq!(&first, &second);
                prop_assert_eq!(canonicalize_label(&raw).unwrap(), first);
            }
        }

        #[test]
        fn canonicalization_with_table_is_idempotent(raw in "[A-Za-z .!]{0,12}") {
            let table = SynonymTable::parse("mi\tmyocardial infarction\na\tb\n").unwrap();
            if let Ok(first) = table.canonicalize(&raw) {
                prop_assert_eq!(table.canonicalize(first.as_str()).unwrap(), first);
            }
        }

        #[test]
        fn canonical_forms_have_no_edge_noise(raw in any::<String>()) {
            if let Ok(label) = canonicalize_label(&raw) {
                let s = label.as_str();
                prop_assert!(!s.starts_with(char::is_whitespace));
                prop_assert!(!s.ends_with(|c: char| c.is_whitespace() || TERMINAL_PUNCTUATION.contains(&c)));
                prop_assert!(!s.contains("  "));
            }
        }
    }
}
