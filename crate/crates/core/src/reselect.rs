//! Reselection behaviours: how the probability mass displaced by a policy
//! is redistributed over the permitted passwords.
//!
//! Four built-in macrobehaviours model how a population might re-pick
//! passwords when a policy bans their first choice:
//!
//! * **convergent** — everyone piles onto the most popular permitted
//!   password;
//! * **proportional** — mass is spread in proportion to existing
//!   popularity (each permitted probability is divided by `1 - surplus`);
//! * **extraneous** — displaced users invent passwords from outside the
//!   corpus: `round(surplus * magnitude)` fresh compliant passwords are
//!   appended, sharing the surplus equally;
//! * **null** — the surplus is split evenly across the permitted support.
//!
//! Custom behaviours plug in through [`ReselectionPlugin`]. Every output —
//! plugin outputs included — is re-validated against the full
//! [`Distribution`] invariants.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CorpusError, Distribution};
use crate::policy::{filter_distribution, PolicyError, PolicyPredicate};

#[derive(Debug, thiserror::Error)]
pub enum ReselectError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("surplus {surplus} leaves no probability mass to rescale")]
    DegenerateSurplus { surplus: f64 },
    #[error("fresh password generation exhausted after {generated} of {needed} passwords")]
    FreshExhausted { needed: usize, generated: usize },
    #[error("reselection plugin {name:?} failed: {message}")]
    PluginFailed { name: String, message: String },
    #[error("reselection plugin {name:?} returned an invalid distribution: {source}")]
    PluginInvalid { name: String, source: CorpusError },
}

/// A pluggable reselection behaviour. The plugin receives the total
/// probability mass before filtering, the displaced surplus, and the
/// permitted records (with their original ranks), and returns the full
/// `(password, probability)` support of the reselected distribution.
pub trait ReselectionPlugin: Send + Sync {
    fn name(&self) -> &str;
    fn reselect(
        &self,
        total: f64,
        surplus: f64,
        permitted: &[crate::corpus::PasswordProbability],
    ) -> Result<Vec<(String, f64)>, String>;
}

/// A reselection behaviour: one of the four built-ins or a named plugin.
#[derive(Clone)]
pub enum ReselectionMode {
    Convergent,
    Proportional,
    Extraneous,
    Null,
    Plugin(Arc<dyn ReselectionPlugin>),
}

impl ReselectionMode {
    pub const BUILTIN_NAMES: [&'static str; 4] =
        ["convergent", "proportional", "extraneous", "null"];

    pub fn name(&self) -> &str {
        match self {
            ReselectionMode::Convergent => "convergent",
            ReselectionMode::Proportional => "proportional",
            ReselectionMode::Extraneous => "extraneous",
            ReselectionMode::Null => "null",
            ReselectionMode::Plugin(plugin) => plugin.name(),
        }
    }

    pub fn from_name(name: &str) -> Option<ReselectionMode> {
        match name {
            "convergent" => Some(ReselectionMode::Convergent),
            "proportional" => Some(ReselectionMode::Proportional),
            "extraneous" => Some(ReselectionMode::Extraneous),
            "null" => Some(ReselectionMode::Null),
            _ => None,
        }
    }
}

impl fmt::Debug for ReselectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ReselectionMode({})", self.name())
    }
}

/// Deterministic source of fresh policy-compliant passwords for the
/// extraneous behaviour.
///
/// Candidates are drawn from the seeded generator at non-decreasing
/// lengths over the alphabet (printable ASCII by default); a length is
/// abandoned once a run of probes yields nothing new, so policies with
/// long minimum lengths are reached quickly. Generated passwords satisfy
/// the policy, avoid the existing support, and are pairwise distinct.
pub struct FreshPasswordSource {
    alphabet: Vec<u8>,
    rng: ChaCha8Rng,
    max_length: usize,
    probes_per_length: u32,
}

impl FreshPasswordSource {
    pub fn new(seed: u64) -> Self {
        Self::with_alphabet(seed, (0x20u8..=0x7e).map(char::from).collect::<String>().as_str())
    }

    pub fn with_alphabet(seed: u64, alphabet: &str) -> Self {
        let mut bytes: Vec<u8> = alphabet.bytes().collect();
        bytes.sort_unstable();
        bytes.dedup();
        assert!(!bytes.is_empty(), "fresh password alphabet must be non-empty");
        FreshPasswordSource {
            alphabet: bytes,
            rng: ChaCha8Rng::seed_from_u64(seed),
            max_length: 64,
            probes_per_length: 512,
        }
    }

    /// Generates `n` distinct passwords satisfying `phi`, none of which
    /// appear in `taken`.
    pub fn generate(
        &mut self,
        phi: &PolicyPredicate,
        taken: &HashSet<&str>,
        n: usize,
    ) -> Result<Vec<String>, ReselectError> {
        let mut out: Vec<String> = Vec::with_capacity(n);
        let mut emitted: HashSet<String> = HashSet::with_capacity(n);
        let mut length = 1usize;
        let mut consecutive_failures = 0u32;
        let mut candidate = String::new();
        while out.len() < n {
            if consecutive_failures >= self.probes_per_length {
                length += 1;
                consecutive_failures = 0;
                if length > self.max_length {
                    return Err(ReselectError::FreshExhausted {
                        needed: n,
                        generated: out.len(),
                    });
                }
            }
            candidate.clear();
            for _ in 0..length {
                let index = self.rng.gen_range(0..self.alphabet.len());
                candidate.push(self.alphabet[index] as char);
            }
            if phi.evaluate(&candidate)
                && !taken.contains(candidate.as_str())
                && !emitted.contains(candidate.as_str())
            {
                emitted.insert(candidate.clone());
                out.push(candidate.clone());
                consecutive_failures = 0;
            } else {
                consecutive_failures += 1;
            }
        }
        Ok(out)
    }
}

fn permitted_pairs(filtered: &crate::policy::FilteredDistribution) -> Vec<(String, f64)> {
    filtered.permitted.iter().map(|r| (r.password.clone(), r.probability)).collect()
}

/// Convergent reselection: the entire surplus accrues to the most probable
/// permitted password (ties broken by lowest original rank).
pub fn reselect_convergent(
    d: &Distribution,
    phi: &PolicyPredicate,
) -> Result<Distribution, ReselectError> {
    let filtered = filter_distribution(phi, d)?;
    let mut pairs = permitted_pairs(&filtered);
    // Records arrive in rank order, so the first permitted record is the
    // maximum; any probability tie resolves to the lowest rank.
    pairs[0].1 += filtered.surplus;
    Ok(Distribution::from_probabilities(pairs, d.magnitude())?)
}

/// Proportional reselection: permitted probabilities are rescaled by the
/// surviving mass, preserving their relative proportions.
pub fn reselect_proportional(
    d: &Distribution,
    phi: &PolicyPredicate,
) -> Result<Distribution, ReselectError> {
    let filtered = filter_distribution(phi, d)?;
    let mut pairs = permitted_pairs(&filtered);
    if filtered.surplus != 0.0 {
        let divisor = filtered.total - filtered.surplus;
        if divisor <= 0.0 {
            return Err(ReselectError::DegenerateSurplus { surplus: filtered.surplus });
        }
        for pair in &mut pairs {
            pair.1 /= divisor;
        }
    }
    Ok(Distribution::from_probabilities(pairs, d.magnitude())?)
}

/// Extraneous reselection: `round(surplus * magnitude)` fresh compliant
/// passwords from outside the support absorb the surplus in equal shares.
pub fn reselect_extraneous(
    d: &Distribution,
    phi: &PolicyPredicate,
    source: &mut FreshPasswordSource,
) -> Result<Distribution, ReselectError> {
    let filtered = filter_distribution(phi, d)?;
    let mut pairs = permitted_pairs(&filtered);
    let fresh_count = (filtered.surplus * d.magnitude() as f64).round_ties_even();
    let fresh_count = if fresh_count > 0.0 { fresh_count as usize } else { 0 };
    if fresh_count > 0 {
        let taken: HashSet<&str> = d.records().iter().map(|r| r.password.as_str()).collect();
        let fresh = source.generate(phi, &taken, fresh_count)?;
        // surplus / n, which is 1/magnitude whenever surplus * magnitude is
        // integral; dividing the actual surplus keeps total mass at exactly 1
        // even when the rounding is inexact.
        let share = filtered.surplus / fresh_count as f64;
        pairs.extend(fresh.into_iter().map(|password| (password, share)));
    }
    Ok(Distribution::from_probabilities(pairs, d.magnitude())?)
}

/// Null reselection: the surplus is divided evenly across the permitted
/// support.
pub fn reselect_null(
    d: &Distribution,
    phi: &PolicyPredicate,
) -> Result<Distribution, ReselectError> {
    let filtered = filter_distribution(phi, d)?;
    let mut pairs = permitted_pairs(&filtered);
    let share = filtered.surplus / pairs.len() as f64;
    for pair in &mut pairs {
        pair.1 += share;
    }
    Ok(Distribution::from_probabilities(pairs, d.magnitude())?)
}

/// Applies a reselection behaviour. `fresh_seed` seeds the fresh password
/// source for the extraneous behaviour; the other built-ins ignore it.
pub fn apply(
    d: &Distribution,
    phi: &PolicyPredicate,
    mode: &ReselectionMode,
    fresh_seed: u64,
) -> Result<Distribution, ReselectError> {
    match mode {
        ReselectionMode::Convergent => reselect_convergent(d, phi),
        ReselectionMode::Proportional => reselect_proportional(d, phi),
        ReselectionMode::Extraneous => {
            let mut source = FreshPasswordSource::new(fresh_seed);
            reselect_extraneous(d, phi, &mut source)
        }
        ReselectionMode::Null => reselect_null(d, phi),
        ReselectionMode::Plugin(plugin) => {
            let filtered = filter_distribution(phi, d)?;
            let pairs = plugin
                .reselect(filtered.total, filtered.surplus, &filtered.permitted)
                .map_err(|message| ReselectError::PluginFailed {
                    name: plugin.name().to_string(),
                    message,
                })?;
            Distribution::from_probabilities(pairs, d.magnitude()).map_err(|source| {
                ReselectError::PluginInvalid { name: plugin.name().to_string(), source }
            })
        }
    }
}
