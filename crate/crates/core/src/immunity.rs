//! Immunity of a composition policy to a fixed attack dictionary.
//!
//! A policy is immune to a dictionary when no guess in the dictionary
//! satisfies the policy: an attacker replaying that exact list can never
//! hit a compliant password. Otherwise the policy is vulnerable, and the
//! verdict carries every compliant guess as a witness.

use std::io::{self, BufRead};
use std::path::Path;

use crate::policy::PolicyPredicate;

#[derive(Debug, thiserror::Error)]
pub enum ImmunityError {
    #[error("attack dictionary {path}: {source}")]
    Io { path: String, source: io::Error },
}

/// A deduplicated, sorted list of attacker guesses.
///
/// The file format is one guess per line. The two-character sequence
/// `\0` (backslash, zero) on a line by itself denotes the empty password,
/// since a genuinely blank line would be invisible; blank lines are
/// skipped. Trailing carriage returns are stripped, everything else is
/// taken verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackDictionary {
    name: String,
    guesses: Vec<String>,
}

impl AttackDictionary {
    pub fn from_guesses(name: impl Into<String>, guesses: impl IntoIterator<Item = String>) -> AttackDictionary {
        let mut guesses: Vec<String> = guesses.into_iter().collect();
        guesses.sort_unstable();
        guesses.dedup();
        AttackDictionary { name: name.into(), guesses }
    }

    pub fn from_reader(name: impl Into<String>, reader: impl BufRead) -> io::Result<AttackDictionary> {
        let mut guesses = Vec::new();
        for line in reader.lines() {
            let mut line = line?;
            if line.ends_with('\r') {
                line.pop();
            }
            if line.is_empty() {
                continue;
            }
            if line == "\\0" {
                line.clear();
            }
            guesses.push(line);
        }
        Ok(AttackDictionary::from_guesses(name, guesses))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<AttackDictionary, ImmunityError> {
        let path = path.as_ref();
        let name = path
            .file_stem()
            .map(|stem| stem.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let file = std::fs::File::open(path)
            .map_err(|source| ImmunityError::Io { path: path.display().to_string(), source })?;
        AttackDictionary::from_reader(name, io::BufReader::new(file))
            .map_err(|source| ImmunityError::Io { path: path.display().to_string(), source })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn guesses(&self) -> &[String] {
        &self.guesses
    }

    pub fn len(&self) -> usize {
        self.guesses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.guesses.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImmunityVerdict {
    Immune,
    /// The policy admits these guesses, listed in sorted order.
    Vulnerable { witnesses: Vec<String> },
}

impl ImmunityVerdict {
    pub fn is_immune(&self) -> bool {
        matches!(self, ImmunityVerdict::Immune)
    }
}

/// Checks every guess in the dictionary against the policy.
pub fn check_immunity(dictionary: &AttackDictionary, policy: &PolicyPredicate) -> ImmunityVerdict {
    let witnesses: Vec<String> = dictionary
        .guesses
        .iter()
        .filter(|guess| policy.evaluate(guess))
        .cloned()
        .collect();
    if witnesses.is_empty() {
        ImmunityVerdict::Immune
    } else {
        ImmunityVerdict::Vulnerable { witnesses }
    }
}
