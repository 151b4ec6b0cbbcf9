//! Corpus ingestion: frequency records, cleansing, and rank-ordered
//! probability distributions.
//!
//! Two input formats are understood: a frequency list
//! (`<count><TAB><password>` per line) and a raw list (one password per
//! line, occurrences counted during aggregation). Cleansing drops records
//! that violate the corpus origin policy or contain non-printable or
//! non-ASCII characters; malformed lines are counted but never abort a run.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{self, BufRead, Write};

use crate::policy::PolicyPredicate;

/// Absolute tolerance for "the probabilities of a distribution sum to one".
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Compensated (Neumaier) summation, so conservation checks stay well inside
/// [`MASS_TOLERANCE`] even for very large supports.
pub(crate) fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("corpus is empty after aggregation and cleansing")]
    EmptyCorpus,
    #[error("record for {password:?} has zero frequency")]
    ZeroFrequency { password: String },
    #[error("total corpus frequency overflows a 64-bit counter")]
    FrequencyOverflow,
    #[error("distribution magnitude must be at least 1")]
    InvalidMagnitude,
    #[error("password {password:?} appears more than once in the support")]
    DuplicatePassword { password: String },
    #[error("password {password:?} has non-positive probability {probability}")]
    NonPositiveProbability { password: String, probability: f64 },
    #[error("probabilities sum to {sum}, not 1 within {MASS_TOLERANCE:e}")]
    MassNotConserved { sum: f64 },
    #[error("distribution file carries no magnitude header and none was supplied")]
    MissingMagnitude,
    #[error("distribution file line {line}: {message}")]
    FileFormat { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A password together with the number of times it occurred in the corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyRecord {
    pub password: String,
    pub frequency: u64,
}

impl FrequencyRecord {
    pub fn new(password: impl Into<String>, frequency: u64) -> Self {
        FrequencyRecord { password: password.into(), frequency }
    }
}

/// Total frequency of a record set. The empty set has magnitude zero.
pub fn magnitude(records: &[FrequencyRecord]) -> u64 {
    records
        .iter()
        .try_fold(0u64, |acc, r| acc.checked_add(r.frequency))
        .expect("total corpus frequency overflows a 64-bit counter")
}

/// One row of a [`Distribution`]: a password, its probability, and its
/// 1-based rank (rank 1 is the most probable password).
#[derive(Debug, Clone, PartialEq)]
pub struct PasswordProbability {
    pub password: String,
    pub probability: f64,
    pub rank: usize,
}

/// A rank-ordered probability distribution over a set of unique passwords.
///
/// Invariants, enforced on every construction path:
/// * the support is non-empty and free of duplicates;
/// * every probability is finite and strictly positive;
/// * probabilities sum to 1 within [`MASS_TOLERANCE`];
/// * records are ordered by descending probability, ties broken by
///   lexicographic password order, and carry ranks `1..=support_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    records: Vec<PasswordProbability>,
    magnitude: u64,
}

impl Distribution {
    /// Builds a distribution from frequency records, summing duplicates.
    pub fn from_frequencies(
        records: impl IntoIterator<Item = FrequencyRecord>,
    ) -> Result<Distribution, CorpusError> {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for record in records {
            if record.frequency == 0 {
                return Err(CorpusError::ZeroFrequency { password: record.password });
            }
            let slot = counts.entry(record.password).or_insert(0);
            *slot = slot.checked_add(record.frequency).ok_or(CorpusError::FrequencyOverflow)?;
        }
        Self::from_counts(counts)
    }

    pub(crate) fn from_counts(counts: HashMap<String, u64>) -> Result<Distribution, CorpusError> {
        let total = counts
            .values()
            .try_fold(0u64, |acc, f| acc.checked_add(*f))
            .ok_or(CorpusError::FrequencyOverflow)?;
        if total == 0 {
            return Err(CorpusError::EmptyCorpus);
        }
        let mut pairs: Vec<(String, u64)> = counts.into_iter().collect();
        pairs.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let records = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (password, frequency))| PasswordProbability {
                password,
                probability: frequency as f64 / total as f64,
                rank: i + 1,
            })
            .collect();
        Ok(Distribution { records, magnitude: total })
    }

    /// Builds a distribution from explicit probabilities, re-ranking and
    /// validating every invariant. This is the gate every reselection
    /// behaviour — plugins included — passes through.
    pub fn from_probabilities(
        pairs: Vec<(String, f64)>,
        magnitude: u64,
    ) -> Result<Distribution, CorpusError> {
        if pairs.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        if magnitude == 0 {
            return Err(CorpusError::InvalidMagnitude);
        }
        let mut seen: HashSet<&str> = HashSet::with_capacity(pairs.len());
        for (password, probability) in &pairs {
            if !seen.insert(password.as_str()) {
                return Err(CorpusError::DuplicatePassword { password: password.clone() });
            }
            if !probability.is_finite() || *probability <= 0.0 {
                return Err(CorpusError::NonPositiveProbability {
                    password: password.clone(),
                    probability: *probability,
                });
            }
        }
        let sum = kahan_sum(pairs.iter().map(|(_, p)| *p));
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(CorpusError::MassNotConserved { sum });
        }
        let mut pairs = pairs;
        pairs.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let records = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (password, probability))| PasswordProbability {
                password,
                probability,
                rank: i + 1,
            })
            .collect();
        Ok(Distribution { records, magnitude })
    }

    /// Records in rank order (rank 1 first).
    pub fn records(&self) -> &[PasswordProbability] {
        &self.records
    }

    /// Total frequency of the corpus the distribution was derived from.
    pub fn magnitude(&self) -> u64 {
        self.magnitude
    }

    /// Number of unique passwords in the support.
    pub fn support_size(&self) -> usize {
        self.records.len()
    }
}

/// Counters describing what cleansing kept and dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CleanseReport {
    pub kept: u64,
    pub kept_frequency: u64,
    pub removed_by_policy: u64,
    pub removed_by_policy_frequency: u64,
    pub removed_non_ascii: u64,
    pub removed_non_ascii_frequency: u64,
    pub malformed_lines: u64,
}

impl CleanseReport {
    pub fn removed_records(&self) -> u64 {
        self.removed_by_policy + self.removed_non_ascii
    }

    pub fn removed_frequency(&self) -> u64 {
        self.removed_by_policy_frequency + self.removed_non_ascii_frequency
    }

    pub fn merge(&mut self, other: &CleanseReport) {
        self.kept += other.kept;
        self.kept_frequency += other.kept_frequency;
        self.removed_by_policy += other.removed_by_policy;
        self.removed_by_policy_frequency += other.removed_by_policy_frequency;
        self.removed_non_ascii += other.removed_non_ascii;
        self.removed_non_ascii_frequency += other.removed_non_ascii_frequency;
        self.malformed_lines += other.malformed_lines;
    }
}

impl fmt::Display for CleanseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cleanse summary")?;
        writeln!(f, "  kept:              {} records (frequency {})", self.kept, self.kept_frequency)?;
        writeln!(
            f,
            "  removed by policy: {} records (frequency {})",
            self.removed_by_policy, self.removed_by_policy_frequency
        )?;
        writeln!(
            f,
            "  removed non-ascii: {} records (frequency {})",
            self.removed_non_ascii, self.removed_non_ascii_frequency
        )?;
        write!(f, "  malformed lines:   {}", self.malformed_lines)
    }
}

fn is_printable_ascii(s: &str) -> bool {
    s.bytes().all(|b| (0x20..=0x7e).contains(&b))
}

/// Streaming cleanse filter: admits records that satisfy the corpus origin
/// policy and consist solely of printable ASCII, tallying everything else.
///
/// The origin-policy check runs first, so a record failing both tests is
/// counted as removed-by-policy.
pub struct Cleanser<'p> {
    origin: &'p PolicyPredicate,
    report: CleanseReport,
}

impl<'p> Cleanser<'p> {
    pub fn new(origin: &'p PolicyPredicate) -> Self {
        Cleanser { origin, report: CleanseReport::default() }
    }

    pub fn admit(&mut self, record: FrequencyRecord) -> Option<FrequencyRecord> {
        if !self.origin.evaluate(&record.password) {
            self.report.removed_by_policy += 1;
            self.report.removed_by_policy_frequency += record.frequency;
            None
        } else if !is_printable_ascii(&record.password) {
            self.report.removed_non_ascii += 1;
            self.report.removed_non_ascii_frequency += record.frequency;
            None
        } else {
            self.report.kept += 1;
            self.report.kept_frequency += record.frequency;
            Some(record)
        }
    }

    pub fn record_malformed(&mut self) {
        self.report.malformed_lines += 1;
    }

    pub fn report(&self) -> &CleanseReport {
        &self.report
    }

    pub fn into_report(self) -> CleanseReport {
        self.report
    }
}

/// Cleanses an in-memory record set in one call. Idempotent: running the
/// kept records through again changes nothing.
pub fn cleanse(
    records: impl IntoIterator<Item = FrequencyRecord>,
    origin: &PolicyPredicate,
) -> (Vec<FrequencyRecord>, CleanseReport) {
    let mut cleanser = Cleanser::new(origin);
    let kept = records.into_iter().filter_map(|r| cleanser.admit(r)).collect();
    (kept, cleanser.into_report())
}

/// On-disk corpus formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// `<count><TAB><password>` per line; the password is the remainder of
    /// the line verbatim and may contain spaces.
    FrequencyList,
    /// One password per line, counted during aggregation.
    RawList,
}

impl std::str::FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "freq" => Ok(CorpusFormat::FrequencyList),
            "raw" => Ok(CorpusFormat::RawList),
            other => Err(format!("unknown corpus format {other:?} (expected \"freq\" or \"raw\")")),
        }
    }
}

/// Why a frequency-list line could not be parsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MalformedLine {
    MissingSeparator,
    InvalidCount,
    ZeroCount,
}

/// Parses one frequency-list line. The count must be a positive integer;
/// everything after the first tab is the password, verbatim.
pub fn parse_frequency_line(line: &str) -> Result<FrequencyRecord, MalformedLine> {
    let (count, password) = line.split_once('\t').ok_or(MalformedLine::MissingSeparator)?;
    let frequency: u64 = count.parse().map_err(|_| MalformedLine::InvalidCount)?;
    if frequency == 0 {
        return Err(MalformedLine::ZeroCount);
    }
    Ok(FrequencyRecord::new(password, frequency))
}

/// Aggregates cleansed records into per-password counts. Builders for
/// separate input shards can be merged before the final distribution is
/// built.
#[derive(Debug, Default)]
pub struct CorpusBuilder {
    counts: HashMap<String, u64>,
}

impl CorpusBuilder {
    pub fn new() -> Self {
        CorpusBuilder::default()
    }

    pub fn add(&mut self, record: FrequencyRecord) {
        *self.counts.entry(record.password).or_insert(0) += record.frequency;
    }

    pub fn merge(&mut self, other: CorpusBuilder) {
        for (password, frequency) in other.counts {
            *self.counts.entry(password).or_insert(0) += frequency;
        }
    }

    pub fn unique_passwords(&self) -> usize {
        self.counts.len()
    }

    pub fn into_distribution(self) -> Result<Distribution, CorpusError> {
        Distribution::from_counts(self.counts)
    }
}

/// Streams one corpus source through cleansing into a builder. Lines are
/// processed one at a time; only the per-password aggregate is kept in
/// memory. A trailing carriage return is stripped so CRLF corpora behave
/// like LF ones. In raw format an empty line counts as the empty password.
pub fn stream_records<R: BufRead>(
    reader: R,
    format: CorpusFormat,
    cleanser: &mut Cleanser<'_>,
    builder: &mut CorpusBuilder,
) -> io::Result<()> {
    for line in reader.lines() {
        let mut line = line?;
        if line.ends_with('\r') {
            line.pop();
        }
        match format {
            CorpusFormat::FrequencyList => match parse_frequency_line(&line) {
                Ok(record) => {
                    if let Some(kept) = cleanser.admit(record) {
                        builder.add(kept);
                    }
                }
                Err(_) => cleanser.record_malformed(),
            },
            CorpusFormat::RawList => {
                if let Some(kept) = cleanser.admit(FrequencyRecord::new(line, 1)) {
                    builder.add(kept);
                }
            }
        }
    }
    Ok(())
}

/// Placeholder written in place of a freshly generated password, so emitted
/// files never present invented strings as real credentials.
fn fresh_placeholder(index: usize) -> String {
    format!("<fresh:{index:06}>")
}

/// Writes a distribution as `<rank><TAB><probability><TAB><password>` rows
/// under `# key=value` header lines. Passwords in `masked` (freshly
/// generated ones) are replaced by opaque placeholders, numbered in rank
/// order.
pub fn write_distribution_file<W: Write>(
    mut w: W,
    d: &Distribution,
    masked: Option<&HashSet<String>>,
    metadata: &[(&str, &str)],
) -> io::Result<()> {
    writeln!(w, "# magnitude={}", d.magnitude())?;
    writeln!(w, "# support={}", d.support_size())?;
    for (key, value) in metadata {
        writeln!(w, "# {key}={value}")?;
    }
    let mut masked_seen = 0usize;
    for record in d.records() {
        let is_masked = masked.is_some_and(|m| m.contains(&record.password));
        if is_masked {
            masked_seen += 1;
            writeln!(w, "{}\t{}\t{}", record.rank, record.probability, fresh_placeholder(masked_seen))?;
        } else {
            writeln!(w, "{}\t{}\t{}", record.rank, record.probability, record.password)?;
        }
    }
    Ok(())
}

/// A parsed distribution file: rows in rank order plus any headers.
#[derive(Debug, Clone)]
pub struct DistributionFile {
    pub magnitude: Option<u64>,
    pub metadata: BTreeMap<String, String>,
    /// `(password, probability)` in rank order.
    pub rows: Vec<(String, f64)>,
}

impl DistributionFile {
    /// Rebuilds a full [`Distribution`]; the magnitude comes from the
    /// override if given, else the file header.
    pub fn into_distribution(self, magnitude: Option<u64>) -> Result<Distribution, CorpusError> {
        let magnitude = magnitude.or(self.magnitude).ok_or(CorpusError::MissingMagnitude)?;
        Distribution::from_probabilities(self.rows, magnitude)
    }
}

/// Reads the format written by [`write_distribution_file`]. Ranks must run
/// `1..=n` in order and probabilities must never increase with rank.
pub fn read_distribution_file<R: BufRead>(reader: R) -> Result<DistributionFile, CorpusError> {
    let mut file = DistributionFile { magnitude: None, metadata: BTreeMap::new(), rows: Vec::new() };
    let mut previous_probability = f64::INFINITY;
    for (index, line) in reader.lines().enumerate() {
        let line_number = index + 1;
        let mut line = line?;
        if line.ends_with('\r') {
            line.pop();
        }
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            if let Some((key, value)) = header.trim().split_once('=') {
                if key == "magnitude" {
                    file.magnitude = Some(value.parse().map_err(|_| CorpusError::FileFormat {
                        line: line_number,
                        message: format!("invalid magnitude {value:?}"),
                    })?);
                } else {
                    file.metadata.insert(key.to_string(), value.to_string());
                }
            }
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let (rank, probability, password) = match (parts.next(), parts.next(), parts.next()) {
            (Some(r), Some(p), Some(w)) => (r, p, w),
            _ => {
                return Err(CorpusError::FileFormat {
                    line: line_number,
                    message: "expected <rank>\\t<probability>\\t<password>".to_string(),
                })
            }
        };
        let rank: usize = rank.parse().map_err(|_| CorpusError::FileFormat {
            line: line_number,
            message: format!("invalid rank {rank:?}"),
        })?;
        if rank != file.rows.len() + 1 {
            return Err(CorpusError::FileFormat {
                line: line_number,
                message: format!("rank {rank} out of order (expected {})", file.rows.len() + 1),
            });
        }
        let probability: f64 = probability.parse().map_err(|_| CorpusError::FileFormat {
            line: line_number,
            message: format!("invalid probability {probability:?}"),
        })?;
        if probability > previous_probability {
            return Err(CorpusError::FileFormat {
                line: line_number,
                message: format!("probability increases at rank {rank}"),
            });
        }
        previous_probability = probability;
        file.rows.push((password.to_string(), probability));
    }
    Ok(file)
}
