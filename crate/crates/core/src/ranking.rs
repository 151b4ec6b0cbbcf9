//! Ranking policies by fitted exponent, and scoring a ranking against a
//! reference.
//!
//! Policies are ordered best-first by how close their fitted alpha is to
//! zero. When two alphas are exactly equal the policy names break the tie
//! in descending order. Agreement with a reference ranking is summarized
//! by the mean per-policy rank distance (the `mprd=` line in reports) and
//! by Pearson correlation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, BufRead};
use std::path::Path;

use crate::powerlaw::FittedCurve;

#[derive(Debug, thiserror::Error)]
pub enum RankError {
    #[error("no curves to rank")]
    EmptyInput,
    #[error("curves mix provenance: expected {expected}, found {found}")]
    MixedProvenance { expected: String, found: String },
    #[error("policy {policy} appears more than once")]
    DuplicatePolicy { policy: String },
    #[error("policy {policy} has no reference rank")]
    MissingReference { policy: String },
    #[error("series lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 points to correlate, got {count}")]
    TooFewPoints { count: usize },
    #[error("correlation is undefined for a constant series")]
    ZeroVariance,
    #[error("reference file line {line}: {message}")]
    ReferenceFormat { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One policy's position in a ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RankRow {
    pub policy: String,
    pub reference_rank: Option<u32>,
    /// 1 is best (alpha closest to zero).
    pub computed_rank: u32,
    pub alpha: f64,
}

impl RankRow {
    /// Absolute difference between reference and computed rank, when a
    /// reference exists.
    pub fn distance(&self) -> Option<f64> {
        self.reference_rank
            .map(|reference| (reference as f64 - self.computed_rank as f64).abs())
    }
}

/// A full ranking of one dataset/mode cell, rows in computed-rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub dataset: String,
    pub mode: String,
    pub rows: Vec<RankRow>,
}

/// Ranks curves best-first by |alpha|. All curves must come from the same
/// dataset and reselection mode, one per policy. Exactly equal magnitudes
/// fall back to policy name, descending. Reference ranks are attached per
/// policy where `reference` provides them.
pub fn rank_by_alpha(
    curves: &[FittedCurve],
    reference: &BTreeMap<String, u32>,
) -> Result<RankTable, RankError> {
    let first = curves.first().ok_or(RankError::EmptyInput)?;
    let provenance = |c: &FittedCurve| format!("{}/{}", c.dataset, c.mode);
    let expected = provenance(first);
    let mut seen = std::collections::BTreeSet::new();
    for curve in curves {
        let found = provenance(curve);
        if found != expected {
            return Err(RankError::MixedProvenance { expected, found });
        }
        if !seen.insert(curve.policy.as_str()) {
            return Err(RankError::DuplicatePolicy { policy: curve.policy.clone() });
        }
    }
    let mut order: Vec<&FittedCurve> = curves.iter().collect();
    order.sort_by(|a, b| {
        a.alpha
            .abs()
            .total_cmp(&b.alpha.abs())
            .then_with(|| b.policy.cmp(&a.policy))
    });
    let rows = order
        .iter()
        .enumerate()
        .map(|(index, curve)| RankRow {
            policy: curve.policy.clone(),
            reference_rank: reference.get(&curve.policy).copied(),
            computed_rank: index as u32 + 1,
            alpha: curve.alpha,
        })
        .collect();
    Ok(RankTable { dataset: first.dataset.clone(), mode: first.mode.clone(), rows })
}

/// Mean absolute difference between reference and computed ranks across
/// all rows. Every row must carry a reference rank.
pub fn mean_rank_distance(table: &RankTable) -> Result<f64, RankError> {
    let mut total = 0.0;
    for row in &table.rows {
        total += row
            .distance()
            .ok_or_else(|| RankError::MissingReference { policy: row.policy.clone() })?;
    }
    Ok(total / table.rows.len() as f64)
}

/// Pearson correlation coefficient of two equal-length series.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, RankError> {
    if xs.len() != ys.len() {
        return Err(RankError::LengthMismatch { left: xs.len(), right: ys.len() });
    }
    if xs.len() < 2 {
        return Err(RankError::TooFewPoints { count: xs.len() });
    }
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - x_mean) * (x - x_mean);
        syy += (y - y_mean) * (y - y_mean);
        sxy += (x - x_mean) * (y - y_mean);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(RankError::ZeroVariance);
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Renders a ranking as an aligned text table. Rows appear in computed
/// order; absent reference ranks and distances print as `-`. When every
/// row has a reference, a trailing `mprd=` line reports the mean rank
/// distance.
pub fn render_rank_report(table: &RankTable) -> String {
    const HEADERS: [&str; 5] = ["Policy", "Reference", "Computed", "alpha", "Distance"];
    let cells: Vec<[String; 5]> = table
        .rows
        .iter()
        .map(|row| {
            [
                row.policy.clone(),
                row.reference_rank.map_or("-".to_string(), |r| r.to_string()),
                row.computed_rank.to_string(),
                row.alpha.to_string(),
                row.distance().map_or("-".to_string(), |d| d.to_string()),
            ]
        })
        .collect();
    let mut widths = HEADERS.map(str::len);
    for row in &cells {
        for (width, cell) in widths.iter_mut().zip(row) {
            *width = (*width).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut write_row = |fields: [&str; 5]| {
        let line: Vec<String> = fields
            .iter()
            .zip(widths)
            .map(|(field, width)| format!("{field:<width$}"))
            .collect();
        let _ = writeln!(out, "{}", line.join(" | ").trim_end());
    };
    write_row(HEADERS);
    for row in &cells {
        write_row([&row[0], &row[1], &row[2], &row[3], &row[4]]);
    }
    if let Ok(mprd) = mean_rank_distance(table) {
        let _ = writeln!(out, "mprd={mprd}");
    }
    out
}

/// Loads a reference ranking file: one `policy rank` pair per line,
/// whitespace separated. Blank lines and lines starting with `#` are
/// skipped.
pub fn read_reference_ranks(path: impl AsRef<Path>) -> Result<BTreeMap<String, u32>, RankError> {
    let file = std::fs::File::open(path)?;
    parse_reference_ranks(io::BufReader::new(file))
}

pub fn parse_reference_ranks(reader: impl BufRead) -> Result<BTreeMap<String, u32>, RankError> {
    let mut ranks = BTreeMap::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        let number = index + 1;
        let fail = |message: String| Err(RankError::ReferenceFormat { line: number, message });
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let policy = parts.next().expect("non-empty trimmed line has a token");
        let Some(rank_text) = parts.next() else {
            return fail(format!("expected \"policy rank\", got {trimmed:?}"));
        };
        if let Some(extra) = parts.next() {
            return fail(format!("unexpected trailing field {extra:?}"));
        }
        let rank: u32 = match rank_text.parse() {
            Ok(rank) => rank,
            Err(_) => return fail(format!("invalid rank {rank_text:?}")),
        };
        if rank == 0 {
            return fail("ranks start at 1".to_string());
        }
        if ranks.insert(policy.to_string(), rank).is_some() {
            return fail(format!("policy {policy} listed twice"));
        }
    }
    Ok(ranks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(policy: &str, alpha: f64) -> FittedCurve {
        FittedCurve {
            dataset: "toy".into(),
            policy: policy.into(),
            mode: "proportional".into(),
            coefficient: 0.5,
            alpha,
            magnitude: 31,
            support_size: 5,
            residual: 0.0,
        }
    }

    fn refs(pairs: &[(&str, u32)]) -> BTreeMap<String, u32> {
        pairs.iter().map(|&(p, r)| (p.to_string(), r)).collect()
    }

    #[test]
    fn ranks_by_distance_from_zero() {
        let curves = [curve("b", -0.3), curve("a", -0.1), curve("c", 0.2)];
        let table = rank_by_alpha(&curves, &BTreeMap::new()).unwrap();
        let order: Vec<&str> = table.rows.iter().map(|r| r.policy.as_str()).collect();
        assert_eq!(order, ["a", "c", "b"]);
        let ranks: Vec<u32> = table.rows.iter().map(|r| r.computed_rank).collect();
        assert_eq!(ranks, [1, 2, 3]);
    }

    #[test]
    fn exact_ties_fall_back_to_name_descending() {
        let curves = [
            curve("basic20", -0.15048415667),
            curve("comp8", -0.15048415667),
            curve("basic16", -0.1),
        ];
        let table = rank_by_alpha(&curves, &BTreeMap::new()).unwrap();
        let order: Vec<&str> = table.rows.iter().map(|r| r.policy.as_str()).collect();
        assert_eq!(order, ["basic16", "comp8", "basic20"]);
    }

    #[test]
    fn near_ties_are_not_ties_when_sorting() {
        let close = -0.5 + 1e-13;
        let curves = [curve("aaa", close), curve("zzz", -0.5)];
        let table = rank_by_alpha(&curves, &BTreeMap::new()).unwrap();
        assert_eq!(table.rows[0].policy, "aaa");
        assert_eq!(table.rows[1].policy, "zzz");
    }

    #[test]
    fn distances_and_mean_against_a_reference() {
        let curves = [curve("a", -0.1), curve("b", -0.3), curve("c", -0.2)];
        let reference = refs(&[("a", 2), ("b", 3), ("c", 1)]);
        let table = rank_by_alpha(&curves, &reference).unwrap();
        // Computed: a=1, c=2, b=3. Distances: 1, 1, 0.
        let distances: Vec<f64> = table.rows.iter().map(|r| r.distance().unwrap()).collect();
        assert_eq!(distances, [1.0, 1.0, 0.0]);
        let mprd = mean_rank_distance(&table).unwrap();
        assert!((mprd - 2.0 / 3.0).abs() <= 1e-12);
    }

    #[test]
    fn missing_reference_rows_have_no_distance() {
        let curves = [curve("a", -0.1), curve("b", -0.3)];
        let table = rank_by_alpha(&curves, &refs(&[("a", 1)])).unwrap();
        assert_eq!(table.rows[0].distance(), Some(0.0));
        assert_eq!(table.rows[1].distance(), None);
        assert!(matches!(
            mean_rank_distance(&table),
            Err(RankError::MissingReference { .. })
        ));
    }

    #[test]
    fn input_validation() {
        assert!(matches!(rank_by_alpha(&[], &BTreeMap::new()), Err(RankError::EmptyInput)));
        let mut other = curve("b", -0.2);
        other.dataset = "different".into();
        assert!(matches!(
            rank_by_alpha(&[curve("a", -0.1), other], &BTreeMap::new()),
            Err(RankError::MixedProvenance { .. })
        ));
        assert!(matches!(
            rank_by_alpha(&[curve("a", -0.1), curve("a", -0.2)], &BTreeMap::new()),
            Err(RankError::DuplicatePolicy { .. })
        ));
    }

    #[test]
    fn pearson_known_values() {
        let xs = [1.0, 2.0, 3.0];
        assert!((pearson(&xs, &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() <= 1e-12);
        assert!((pearson(&xs, &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() <= 1e-12);
        let r = pearson(&xs, &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - (27.0f64 / 28.0).sqrt()).abs() <= 1e-12);
    }

    #[test]
    fn pearson_is_invariant_under_positive_affine_maps() {
        let xs = [1.0, 4.0, 2.0, 8.0, 5.0];
        let ys = [0.3, -0.2, 0.1, -0.5, 0.0];
        let base = pearson(&xs, &ys).unwrap();
        let shifted: Vec<f64> = xs.iter().map(|x| 3.5 * x - 2.0).collect();
        assert!((pearson(&shifted, &ys).unwrap() - base).abs() <= 1e-12);
        let flipped: Vec<f64> = ys.iter().map(|y| -2.0 * y).collect();
        assert!((pearson(&xs, &flipped).unwrap() + base).abs() <= 1e-12);
    }

    #[test]
    fn pearson_rejects_bad_series() {
        assert!(matches!(
            pearson(&[1.0], &[1.0]),
            Err(RankError::TooFewPoints { count: 1 })
        ));
        assert!(matches!(
            pearson(&[1.0, 2.0], &[1.0]),
            Err(RankError::LengthMismatch { left: 2, right: 1 })
        ));
        assert!(matches!(
            pearson(&[1.0, 1.0], &[1.0, 2.0]),
            Err(RankError::ZeroVariance)
        ));
    }

    #[test]
    fn report_layout() {
        let curves = [curve("a", -0.1), curve("b", -0.25)];
        let table = rank_by_alpha(&curves, &refs(&[("a", 1), ("b", 2)])).unwrap();
        let report = render_rank_report(&table);
        let lines: Vec<&str> = report.lines().collect();
        assert_eq!(lines.len(), 4);
        let header: Vec<&str> = lines[0].split('|').map(str::trim).collect();
        assert_eq!(header, ["Policy", "Reference", "Computed", "alpha", "Distance"]);
        let row_a: Vec<&str> = lines[1].split('|').map(str::trim).collect();
        assert_eq!(row_a, ["a", "1", "1", "-0.1", "0"]);
        let row_b: Vec<&str> = lines[2].split('|').map(str::trim).collect();
        assert_eq!(row_b, ["b", "2", "2", "-0.25", "0"]);
        assert_eq!(lines[3], "mprd=0");
    }

    #[test]
    fn report_uses_dashes_without_reference() {
        let curves = [curve("a", -0.1), curve("b", -0.25)];
        let table = rank_by_alpha(&curves, &BTreeMap::new()).unwrap();
        let report = render_rank_report(&table);
        assert!(!report.contains("mprd="));
        let row: Vec<&str> = report.lines().nth(1).unwrap().split('|').map(str::trim).collect();
        assert_eq!(row, ["a", "-", "1", "-0.1", "-"]);
    }

    #[test]
    fn reference_file_parsing() {
        let text = "# reference ranking\n3class16 1\nbasic20\t2\n\n  2word16   3\n";
        let ranks = parse_reference_ranks(text.as_bytes()).unwrap();
        assert_eq!(ranks, refs(&[("3class16", 1), ("basic20", 2), ("2word16", 3)]));
        let dup = "a 1\na 2\n";
        assert!(matches!(
            parse_reference_ranks(dup.as_bytes()),
            Err(RankError::ReferenceFormat { line: 2, .. })
        ));
        assert!(parse_reference_ranks("a zero\n".as_bytes()).is_err());
        assert!(parse_reference_ranks("a 0\n".as_bytes()).is_err());
        assert!(parse_reference_ranks("a 1 extra\n".as_bytes()).is_err());
        assert!(parse_reference_ranks("lonely\n".as_bytes()).is_err());
    }
}
