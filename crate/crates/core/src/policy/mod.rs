//! Password composition policies as predicates over passwords.
//!
//! A policy is a boolean combination of primitive requirements (length,
//! character classes, word counts, dictionary and blacklist checks). The
//! built-in catalog covers the 28 studied policies; arbitrary policies can
//! be written in a small infix expression language (see [`expr`]).

mod expr;
mod wordlist;

pub use expr::{parse_expression, parse_policy_file};
pub use wordlist::Wordlist;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::corpus::{kahan_sum, Distribution, PasswordProbability};

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("unknown policy {name:?} (valid catalog names: {})", PolicyCatalog::NAMES.join(", "))]
    UnknownPolicy { name: String },
    #[error("policy {policy:?} performs a dictionary check but no wordlist is configured")]
    WordlistRequired { policy: String },
    #[error("policy rejects every password in the distribution's support")]
    EmptyPermittedSupport,
    #[error("unknown software config schema {tag:?} (expected \"length-digits\" or \"blacklist\")")]
    UnknownSchema { tag: String },
    #[error("policy expression, column {column}: {message}")]
    ExpressionSyntax { column: usize, message: String },
    #[error("policy file line {line}: {message}")]
    PolicyFileFormat { line: usize, message: String },
    #[error("policy name {name:?} is already defined")]
    DuplicateDefinition { name: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The four character classes of composition rules. Symbols are every
/// printable ASCII character that is not a letter or digit, space included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CharClass {
    Upper,
    Lower,
    Digit,
    Symbol,
}

impl CharClass {
    pub fn of(c: char) -> Option<CharClass> {
        if c.is_ascii_uppercase() {
            Some(CharClass::Upper)
        } else if c.is_ascii_lowercase() {
            Some(CharClass::Lower)
        } else if c.is_ascii_digit() {
            Some(CharClass::Digit)
        } else if c == ' ' || c.is_ascii_graphic() {
            Some(CharClass::Symbol)
        } else {
            None
        }
    }
}

impl fmt::Display for CharClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CharClass::Upper => "upper",
            CharClass::Lower => "lower",
            CharClass::Digit => "digit",
            CharClass::Symbol => "symbol",
        })
    }
}

/// An exact-match set of prohibited passwords.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Blacklist {
    passwords: BTreeSet<String>,
}

impl Blacklist {
    pub fn from_passwords(passwords: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Blacklist { passwords: passwords.into_iter().map(Into::into).collect() }
    }

    pub fn contains(&self, password: &str) -> bool {
        self.passwords.contains(password)
    }

    pub fn len(&self) -> usize {
        self.passwords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passwords.is_empty()
    }
}

/// A composition policy: a predicate over passwords.
///
/// Evaluation is pure and total for any string. Length counts characters;
/// characters outside printable ASCII belong to no class (cleansing removes
/// such passwords from corpora anyway).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyPredicate {
    /// Password length is at least `n` characters.
    MinLength(usize),
    /// At least `n` decimal digits.
    MinDigits(usize),
    /// At least `k` distinct character classes are present.
    MinClassCount(usize),
    /// At least one character of the class.
    RequiresClass(CharClass),
    /// At least `m` words, where a word is a maximal run of letters.
    MinWordCount(usize),
    /// The password's letters, case folded, do not spell a dictionary word.
    NotInDictionary(Arc<Wordlist>),
    /// The password is not one of an exact set of prohibited strings.
    NotInBlacklist(Arc<Blacklist>),
    And(Box<PolicyPredicate>, Box<PolicyPredicate>),
    Or(Box<PolicyPredicate>, Box<PolicyPredicate>),
    Not(Box<PolicyPredicate>),
}

fn count_letter_runs(password: &str) -> usize {
    let mut runs = 0;
    let mut in_run = false;
    for c in password.chars() {
        if c.is_ascii_alphabetic() {
            if !in_run {
                runs += 1;
                in_run = true;
            }
        } else {
            in_run = false;
        }
    }
    runs
}

fn dictionary_residue(password: &str) -> String {
    password
        .chars()
        .filter(char::is_ascii_alphabetic)
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

impl PolicyPredicate {
    pub fn evaluate(&self, password: &str) -> bool {
        match self {
            PolicyPredicate::MinLength(n) => password.chars().count() >= *n,
            PolicyPredicate::MinDigits(n) => {
                password.chars().filter(char::is_ascii_digit).count() >= *n
            }
            PolicyPredicate::MinClassCount(k) => {
                let mut present = [false; 4];
                for c in password.chars() {
                    if let Some(class) = CharClass::of(c) {
                        present[class as usize] = true;
                    }
                }
                present.iter().filter(|p| **p).count() >= *k
            }
            PolicyPredicate::RequiresClass(class) => {
                password.chars().any(|c| CharClass::of(c) == Some(*class))
            }
            PolicyPredicate::MinWordCount(m) => count_letter_runs(password) >= *m,
            PolicyPredicate::NotInDictionary(wordlist) => {
                !wordlist.contains(&dictionary_residue(password))
            }
            PolicyPredicate::NotInBlacklist(blacklist) => !blacklist.contains(password),
            PolicyPredicate::And(a, b) => a.evaluate(password) && b.evaluate(password),
            PolicyPredicate::Or(a, b) => a.evaluate(password) || b.evaluate(password),
            PolicyPredicate::Not(a) => !a.evaluate(password),
        }
    }

    pub fn and(self, other: PolicyPredicate) -> PolicyPredicate {
        PolicyPredicate::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: PolicyPredicate) -> PolicyPredicate {
        PolicyPredicate::Or(Box::new(self), Box::new(other))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> PolicyPredicate {
        PolicyPredicate::Not(Box::new(self))
    }

    /// Left fold of conjuncts; the empty conjunction accepts everything.
    pub fn conjunction(terms: impl IntoIterator<Item = PolicyPredicate>) -> PolicyPredicate {
        let mut terms = terms.into_iter();
        match terms.next() {
            None => PolicyPredicate::MinLength(0),
            Some(first) => terms.fold(first, PolicyPredicate::and),
        }
    }
}

/// Configuration tuples observed in deployed password software, normalized
/// into [`PolicyPredicate`]s by [`normalize`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SoftwareConfigTuple {
    /// Schema carrying a minimum length and a minimum digit count.
    LengthAndDigits { min_length: usize, min_digits: usize },
    /// Schema carrying a set of prohibited passwords.
    ProhibitedPasswords { passwords: Vec<String> },
}

impl SoftwareConfigTuple {
    /// Parses `length-digits(l, d)` or `blacklist(w1, w2, ...)`.
    pub fn parse(spec: &str) -> Result<SoftwareConfigTuple, PolicyError> {
        let spec = spec.trim();
        let (tag, rest) = spec.split_once('(').ok_or_else(|| PolicyError::UnknownSchema {
            tag: spec.to_string(),
        })?;
        let args = rest.strip_suffix(')').ok_or_else(|| PolicyError::UnknownSchema {
            tag: spec.to_string(),
        })?;
        match tag.trim() {
            "length-digits" => {
                let parts: Vec<&str> = args.split(',').map(str::trim).collect();
                if parts.len() != 2 {
                    return Err(PolicyError::UnknownSchema { tag: spec.to_string() });
                }
                let min_length = parts[0]
                    .parse()
                    .map_err(|_| PolicyError::UnknownSchema { tag: spec.to_string() })?;
                let min_digits = parts[1]
                    .parse()
                    .map_err(|_| PolicyError::UnknownSchema { tag: spec.to_string() })?;
                Ok(SoftwareConfigTuple::LengthAndDigits { min_length, min_digits })
            }
            "blacklist" => {
                let passwords = if args.trim().is_empty() {
                    Vec::new()
                } else {
                    args.split(',').map(|w| w.trim().to_string()).collect()
                };
                Ok(SoftwareConfigTuple::ProhibitedPasswords { passwords })
            }
            other => Err(PolicyError::UnknownSchema { tag: other.to_string() }),
        }
    }
}

/// Maps a software configuration tuple to its equivalent predicate, a
/// conjunction over primitives.
pub fn normalize(tuple: &SoftwareConfigTuple) -> PolicyPredicate {
    match tuple {
        SoftwareConfigTuple::LengthAndDigits { min_length, min_digits } => {
            PolicyPredicate::MinLength(*min_length).and(PolicyPredicate::MinDigits(*min_digits))
        }
        SoftwareConfigTuple::ProhibitedPasswords { passwords } => PolicyPredicate::NotInBlacklist(
            Arc::new(Blacklist::from_passwords(passwords.iter().cloned())),
        ),
    }
}

/// The built-in policy catalog. Dictionary-checking policies (`dictionary8`,
/// `comp8`) need a wordlist, supplied at construction.
#[derive(Debug, Clone, Default)]
pub struct PolicyCatalog {
    wordlist: Option<Arc<Wordlist>>,
}

impl PolicyCatalog {
    /// The 28 catalog policy names.
    pub const NAMES: [&'static str; 28] = [
        "basic7", "basic8", "basic9", "basic10", "basic12", "basic14", "basic16", "basic20",
        "digit7", "digit8", "digit9", "digit10", "upper7", "upper8", "upper9", "upper10",
        "symbol7", "symbol8", "symbol9", "symbol10", "2word12", "2word16", "2class12", "2class16",
        "3class12", "3class16", "dictionary8", "comp8",
    ];

    pub fn new() -> Self {
        PolicyCatalog { wordlist: None }
    }

    pub fn with_wordlist(wordlist: Arc<Wordlist>) -> Self {
        PolicyCatalog { wordlist: Some(wordlist) }
    }

    pub fn wordlist(&self) -> Option<&Arc<Wordlist>> {
        self.wordlist.as_ref()
    }

    fn dictionary_check(&self, policy: &str) -> Result<PolicyPredicate, PolicyError> {
        match &self.wordlist {
            Some(wordlist) => Ok(PolicyPredicate::NotInDictionary(Arc::clone(wordlist))),
            None => Err(PolicyError::WordlistRequired { policy: policy.to_string() }),
        }
    }

    /// Resolves a catalog name to its predicate.
    pub fn builtin(&self, name: &str) -> Result<PolicyPredicate, PolicyError> {
        if !Self::NAMES.contains(&name) {
            return Err(PolicyError::UnknownPolicy { name: name.to_string() });
        }
        let length_after = |prefix: &str| -> usize {
            name.strip_prefix(prefix).and_then(|n| n.parse().ok()).expect("catalog name")
        };
        Ok(if name.starts_with("basic") {
            PolicyPredicate::MinLength(length_after("basic"))
        } else if name.starts_with("digit") {
            PolicyPredicate::MinLength(length_after("digit"))
                .and(PolicyPredicate::RequiresClass(CharClass::Digit))
        } else if name.starts_with("upper") {
            PolicyPredicate::MinLength(length_after("upper"))
                .and(PolicyPredicate::RequiresClass(CharClass::Upper))
        } else if name.starts_with("symbol") {
            PolicyPredicate::MinLength(length_after("symbol"))
                .and(PolicyPredicate::RequiresClass(CharClass::Symbol))
        } else if let Some(rest) = name.strip_prefix("2word") {
            PolicyPredicate::MinLength(rest.parse().expect("catalog name"))
                .and(PolicyPredicate::MinWordCount(2))
        } else if let Some(rest) = name.strip_prefix("2class") {
            PolicyPredicate::MinLength(rest.parse().expect("catalog name"))
                .and(PolicyPredicate::MinClassCount(2))
        } else if let Some(rest) = name.strip_prefix("3class") {
            PolicyPredicate::MinLength(rest.parse().expect("catalog name"))
                .and(PolicyPredicate::MinClassCount(3))
        } else if name == "dictionary8" {
            PolicyPredicate::MinLength(8).and(self.dictionary_check(name)?)
        } else {
            // comp8: dictionary8 plus all four character classes.
            PolicyPredicate::conjunction([
                PolicyPredicate::MinLength(8),
                self.dictionary_check(name)?,
                PolicyPredicate::RequiresClass(CharClass::Upper),
                PolicyPredicate::RequiresClass(CharClass::Lower),
                PolicyPredicate::RequiresClass(CharClass::Digit),
                PolicyPredicate::RequiresClass(CharClass::Symbol),
            ])
        })
    }

    /// Resolves a policy spec: a user-defined name, a catalog name, or an
    /// inline expression such as `minlen(6)`.
    pub fn resolve(
        &self,
        spec: &str,
        defined: &std::collections::HashMap<String, PolicyPredicate>,
    ) -> Result<PolicyPredicate, PolicyError> {
        if let Some(predicate) = defined.get(spec.trim()) {
            return Ok(predicate.clone());
        }
        if Self::NAMES.contains(&spec.trim()) {
            return self.builtin(spec.trim());
        }
        parse_expression(spec, self, defined)
    }
}

/// A distribution restricted to the passwords a policy permits.
#[derive(Debug, Clone)]
pub struct FilteredDistribution {
    /// Permitted records, still carrying their original ranks.
    pub permitted: Vec<PasswordProbability>,
    /// Probability mass of the rejected passwords.
    pub surplus: f64,
    /// Probability mass of the whole distribution before filtering.
    pub total: f64,
}

/// Splits a distribution under a policy into the permitted records and the
/// displaced probability mass (the surplus).
pub fn filter_distribution(
    phi: &PolicyPredicate,
    d: &Distribution,
) -> Result<FilteredDistribution, PolicyError> {
    let mut permitted = Vec::new();
    let mut rejected = Vec::new();
    for record in d.records() {
        if phi.evaluate(&record.password) {
            permitted.push(record.clone());
        } else {
            rejected.push(record.probability);
        }
    }
    if permitted.is_empty() {
        return Err(PolicyError::EmptyPermittedSupport);
    }
    let surplus = kahan_sum(rejected.into_iter());
    let total = kahan_sum(d.records().iter().map(|r| r.probability));
    Ok(FilteredDistribution { permitted, surplus, total })
}
