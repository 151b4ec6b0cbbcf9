//! Power-law fitting over rank/probability data, and the on-disk equation
//! file format.
//!
//! A fitted curve `p(rank) = a * rank^alpha` summarizes a distribution in
//! two numbers. The exponent alpha is the uniformity measure: a perfectly
//! uniform distribution fits alpha = 0, and steeper (more negative) alpha
//! means a more skewed — more guessable — distribution.

use std::cmp::Ordering;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Distribution;

/// Two fitted exponents within this distance of each other compare as ties.
pub const ALPHA_TIE_EPSILON: f64 = 1e-12;

/// Version written into equation files. Readers accept this version or
/// newer, ignoring fields they do not know.
pub const EQUATION_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FitError {
    #[error("distribution has support {support}, need at least 2 ranks to fit")]
    DegenerateDistribution { support: usize },
    #[error("need at least 2 sample points to fit, got {count}")]
    TooFewPoints { count: usize },
    #[error("rank 0 in sample points (ranks start at 1)")]
    ZeroRank,
    #[error("sample point at rank {rank} has non-positive probability {probability}")]
    NonPositiveProbability { rank: usize, probability: f64 },
    #[error("sample points share a single rank; the fit is underdetermined")]
    DegenerateFit,
    #[error("invalid fitted curve: {message}")]
    InvalidCurve { message: String },
    #[error("equation file version {version} is not supported")]
    UnsupportedVersion { version: u32 },
    #[error("failed to parse equation file {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("equation file {path}: {source}")]
    Io { path: String, source: io::Error },
}

/// Samples a distribution at exponentially spaced ranks 1, 2, 4, 8, ...
/// capped by the support size, returning `(rank, probability)` points.
pub fn exponential_sample(d: &Distribution) -> Result<Vec<(usize, f64)>, FitError> {
    let support = d.support_size();
    if support < 2 {
        return Err(FitError::DegenerateDistribution { support });
    }
    let mut points = Vec::new();
    let mut rank = 1usize;
    while rank <= support {
        points.push((rank, d.records()[rank - 1].probability));
        rank = match rank.checked_mul(2) {
            Some(next) => next,
            None => break,
        };
    }
    Ok(points)
}

/// A bare power-law fit, before provenance metadata is attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    /// The coefficient `a` in `p = a * rank^alpha`.
    pub coefficient: f64,
    /// The exponent.
    pub alpha: f64,
    /// Sum of squared residuals in log-log space.
    pub residual: f64,
}

/// Ordinary least squares on `(ln rank, ln probability)`: the slope is
/// alpha and `exp(intercept)` is the coefficient.
pub fn fit_power_law(points: &[(usize, f64)]) -> Result<PowerLawFit, FitError> {
    if points.len() < 2 {
        return Err(FitError::TooFewPoints { count: points.len() });
    }
    for &(rank, probability) in points {
        if rank == 0 {
            return Err(FitError::ZeroRank);
        }
        if !probability.is_finite() || probability <= 0.0 {
            return Err(FitError::NonPositiveProbability { rank, probability });
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(rank, _)| (rank as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, p)| p.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - x_mean) * (x - x_mean);
        sxy += (x - x_mean) * (y - y_mean);
    }
    if sxx == 0.0 {
        return Err(FitError::DegenerateFit);
    }
    let alpha = sxy / sxx;
    let intercept = y_mean - alpha * x_mean;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + alpha * x);
            e * e
        })
        .sum();
    Ok(PowerLawFit { coefficient: intercept.exp(), alpha, residual })
}

/// A power-law fit together with the provenance of the distribution it was
/// fitted to. This is the unit of exchange between the fitting pipeline,
/// ranking, and scripts.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedCurve {
    pub dataset: String,
    pub policy: String,
    pub mode: String,
    /// The coefficient `a` in `p = a * rank^alpha`.
    pub coefficient: f64,
    pub alpha: f64,
    /// Total frequency of the source corpus.
    pub magnitude: u64,
    /// Unique passwords in the fitted distribution.
    pub support_size: u64,
    /// Sum of squared residuals of the fit, in log-log space.
    pub residual: f64,
}

impl FittedCurve {
    pub fn from_fit(
        fit: PowerLawFit,
        dataset: impl Into<String>,
        policy: impl Into<String>,
        mode: impl Into<String>,
        magnitude: u64,
        support_size: u64,
    ) -> FittedCurve {
        FittedCurve {
            dataset: dataset.into(),
            policy: policy.into(),
            mode: mode.into(),
            coefficient: fit.coefficient,
            alpha: fit.alpha,
            magnitude,
            support_size,
            residual: fit.residual,
        }
    }

    /// The fitted probability at a rank.
    pub fn evaluate(&self, rank: usize) -> f64 {
        self.coefficient * (rank as f64).powf(self.alpha)
    }

    fn validate(&self) -> Result<(), FitError> {
        let fail = |message: String| Err(FitError::InvalidCurve { message });
        if !(self.coefficient.is_finite() && self.coefficient > 0.0) {
            return fail(format!("coefficient a = {} must be finite and positive", self.coefficient));
        }
        if !self.alpha.is_finite() {
            return fail(format!("alpha = {} must be finite", self.alpha));
        }
        if !(self.residual.is_finite() && self.residual >= 0.0) {
            return fail(format!("residual = {} must be finite and non-negative", self.residual));
        }
        if self.magnitude == 0 {
            return fail("magnitude must be at least 1".to_string());
        }
        if self.support_size == 0 {
            return fail("support_size must be at least 1".to_string());
        }
        Ok(())
    }
}

/// Compares two curves by uniformity: `Less` means the first curve is more
/// uniform (its alpha is closer to zero), so sorting ascending under this
/// comparator puts the best policy first. Alphas within
/// [`ALPHA_TIE_EPSILON`] of each other compare `Equal`.
pub fn compare_uniformity(c1: &FittedCurve, c2: &FittedCurve) -> Ordering {
    let m1 = c1.alpha.abs();
    let m2 = c2.alpha.abs();
    if (m1 - m2).abs() <= ALPHA_TIE_EPSILON {
        Ordering::Equal
    } else {
        m1.total_cmp(&m2)
    }
}

#[derive(Serialize, Deserialize)]
struct EquationFile {
    version: u32,
    dataset: String,
    policy: String,
    mode: String,
    a: f64,
    alpha: f64,
    magnitude: u64,
    support_size: u64,
    residual: f64,
}

/// Renders a curve as equation-file JSON. Floating-point values use the
/// shortest representation that parses back to the identical bits, so a
/// write/read round trip is lossless.
pub fn equation_to_json(curve: &FittedCurve) -> Result<String, FitError> {
    curve.validate()?;
    let file = EquationFile {
        version: EQUATION_FORMAT_VERSION,
        dataset: curve.dataset.clone(),
        policy: curve.policy.clone(),
        mode: curve.mode.clone(),
        a: curve.coefficient,
        alpha: curve.alpha,
        magnitude: curve.magnitude,
        support_size: curve.support_size,
        residual: curve.residual,
    };
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|source| FitError::Parse { path: "<memory>".to_string(), source })?;
    text.push('\n');
    Ok(text)
}

/// Parses equation-file JSON. Unknown fields are ignored for forward
/// compatibility; missing required fields are errors.
pub fn equation_from_json(text: &str, origin: &str) -> Result<FittedCurve, FitError> {
    let file: EquationFile = serde_json::from_str(text)
        .map_err(|source| FitError::Parse { path: origin.to_string(), source })?;
    if file.version < 1 {
        return Err(FitError::UnsupportedVersion { version: file.version });
    }
    let curve = FittedCurve {
        dataset: file.dataset,
        policy: file.policy,
        mode: file.mode,
        coefficient: file.a,
        alpha: file.alpha,
        magnitude: file.magnitude,
        support_size: file.support_size,
        residual: file.residual,
    };
    curve.validate()?;
    Ok(curve)
}

/// Writes an equation file atomically: the content lands in a sibling
/// temporary file which is then renamed over the target, so readers never
/// observe a partial file.
pub fn write_equation_file(curve: &FittedCurve, path: impl AsRef<Path>) -> Result<(), FitError> {
    let path = path.as_ref();
    let text = equation_to_json(curve)?;
    let display = path.display().to_string();
    let mut temp = path.as_os_str().to_owned();
    temp.push(".tmp");
    let temp = std::path::PathBuf::from(temp);
    let io_err = |source: io::Error| FitError::Io { path: display.clone(), source };
    let mut file = std::fs::File::create(&temp).map_err(io_err)?;
    file.write_all(text.as_bytes()).map_err(io_err)?;
    drop(file);
    std::fs::rename(&temp, path).map_err(io_err)?;
    Ok(())
}

pub fn read_equation_file(path: impl AsRef<Path>) -> Result<FittedCurve, FitError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|source| FitError::Io { path: display.clone(), source })?;
    equation_from_json(&text, &display)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Distribution, FrequencyRecord};

    fn toy() -> Distribution {
        Distribution::from_frequencies(vec![
            FrequencyRecord::new("P1", 16),
            FrequencyRecord::new("P2", 8),
            FrequencyRecord::new("P3", 4),
            FrequencyRecord::new("P4", 2),
            FrequencyRecord::new("P5", 1),
        ])
        .unwrap()
    }

    fn curve(alpha: f64) -> FittedCurve {
        FittedCurve {
            dataset: "d".into(),
            policy: "p".into(),
            mode: "m".into(),
            coefficient: 0.5,
            alpha,
            magnitude: 100,
            support_size: 10,
            residual: 0.0,
        }
    }

    #[test]
    fn exponential_sample_keeps_power_of_two_ranks() {
        let points = exponential_sample(&toy()).unwrap();
        let ranks: Vec<usize> = points.iter().map(|p| p.0).collect();
        assert_eq!(ranks, [1, 2, 4]);
        let ten: Vec<FrequencyRecord> =
            (0..10).map(|i| FrequencyRecord::new(format!("pw{i}"), 10 - i)).collect();
        let d = Distribution::from_frequencies(ten).unwrap();
        let ranks: Vec<usize> = exponential_sample(&d).unwrap().iter().map(|p| p.0).collect();
        assert_eq!(ranks, [1, 2, 4, 8]);
    }

    #[test]
    fn single_record_distribution_cannot_be_sampled() {
        let d = Distribution::from_frequencies(vec![FrequencyRecord::new("only", 3)]).unwrap();
        assert!(matches!(
            exponential_sample(&d),
            Err(FitError::DegenerateDistribution { support: 1 })
        ));
    }

    #[test]
    fn two_point_fit_is_exact() {
        let fit = fit_power_law(&[(1, 0.5), (2, 0.25)]).unwrap();
        assert!((fit.alpha + 1.0).abs() <= 1e-12);
        assert!((fit.coefficient - 0.5).abs() <= 1e-12);
        assert!(fit.residual.abs() <= 1e-24);
    }

    #[test]
    fn exact_power_law_is_recovered() {
        for (a, alpha) in [(0.5, -0.3), (0.02, -1.25), (1.0, -2.0)] {
            let points: Vec<(usize, f64)> =
                (1..=100).map(|r| (r, a * (r as f64).powf(alpha))).collect();
            let fit = fit_power_law(&points).unwrap();
            assert!((fit.alpha - alpha).abs() <= 1e-9, "alpha {alpha}: got {}", fit.alpha);
            assert!((fit.coefficient - a).abs() <= 1e-9);
            // Exponential subsampling changes nothing when the data is exact.
            let sampled: Vec<(usize, f64)> =
                points.iter().copied().filter(|&(r, _)| r.is_power_of_two()).collect();
            let sampled_fit = fit_power_law(&sampled).unwrap();
            assert!((sampled_fit.alpha - fit.alpha).abs() <= 1e-9);
        }
    }

    #[test]
    fn uniform_distribution_fits_alpha_zero() {
        let points: Vec<(usize, f64)> = (1..=64).map(|r| (r, 0.1)).collect();
        let fit = fit_power_law(&points).unwrap();
        assert!(fit.alpha.abs() <= 1e-12);
    }

    #[test]
    fn residual_matches_manual_computation() {
        let points = [(1, 0.6), (2, 0.3), (4, 0.1)];
        let fit = fit_power_law(&points).unwrap();
        assert!(fit.residual > 0.0);
        let xs: Vec<f64> = points.iter().map(|&(r, _)| (r as f64).ln()).collect();
        let ys: Vec<f64> = points.iter().map(|&(_, p)| p.ln()).collect();
        let intercept = fit.coefficient.ln();
        let manual: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - (intercept + fit.alpha * x)).powi(2))
            .sum();
        assert!((fit.residual - manual).abs() <= 1e-12);
    }

    #[test]
    fn moving_mass_toward_rank_one_steepens_alpha() {
        let before = fit_power_law(&[(1, 0.5), (2, 0.3), (4, 0.2)]).unwrap();
        let after = fit_power_law(&[(1, 0.6), (2, 0.2), (4, 0.2)]).unwrap();
        assert!(after.alpha < before.alpha);
    }

    #[test]
    fn scaling_probabilities_changes_only_the_coefficient() {
        let points: Vec<(usize, f64)> = vec![(1, 0.5), (2, 0.3), (4, 0.15), (8, 0.05)];
        let scaled: Vec<(usize, f64)> = points.iter().map(|&(r, p)| (r, 3.0 * p)).collect();
        let fit = fit_power_law(&points).unwrap();
        let scaled_fit = fit_power_law(&scaled).unwrap();
        assert!((fit.alpha - scaled_fit.alpha).abs() <= 1e-12);
        assert!((scaled_fit.coefficient - 3.0 * fit.coefficient).abs() <= 1e-12);
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        assert!(matches!(fit_power_law(&[(1, 0.5)]), Err(FitError::TooFewPoints { count: 1 })));
        assert!(matches!(
            fit_power_law(&[(1, 0.5), (1, 0.4)]),
            Err(FitError::DegenerateFit)
        ));
        assert!(matches!(
            fit_power_law(&[(1, 0.5), (2, 0.0)]),
            Err(FitError::NonPositiveProbability { rank: 2, .. })
        ));
        assert!(matches!(fit_power_law(&[(0, 0.5), (2, 0.2)]), Err(FitError::ZeroRank)));
    }

    #[test]
    fn compare_uniformity_prefers_alpha_closest_to_zero() {
        assert_eq!(compare_uniformity(&curve(-0.15), &curve(-0.4795)), Ordering::Less);
        assert_eq!(compare_uniformity(&curve(-0.4795), &curve(-0.15)), Ordering::Greater);
        assert_eq!(compare_uniformity(&curve(-0.05134), &curve(-0.05134)), Ordering::Equal);
        assert_eq!(
            compare_uniformity(&curve(-0.05134), &curve(-0.05134 - 5e-13)),
            Ordering::Equal
        );
        // Sign does not matter; only distance from zero does.
        assert_eq!(compare_uniformity(&curve(0.1), &curve(-0.2)), Ordering::Less);
    }

    #[test]
    fn equation_file_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("yahoo-3class16-proportional.eqn.json");
        let original = FittedCurve {
            dataset: "yahoo".into(),
            policy: "3class16".into(),
            mode: "proportional".into(),
            coefficient: 0.012345678901234567,
            alpha: -0.15000000183,
            magnitude: 69301337,
            support_size: 474,
            residual: 0.0012345,
        };
        write_equation_file(&original, &path).unwrap();
        let loaded = read_equation_file(&path).unwrap();
        assert_eq!(loaded, original);
        assert_eq!(loaded.alpha.to_bits(), original.alpha.to_bits());
        assert_eq!(loaded.coefficient.to_bits(), original.coefficient.to_bits());
        assert!(!dir.path().join("yahoo-3class16-proportional.eqn.json.tmp").exists());
    }

    #[test]
    fn unknown_fields_are_ignored_but_missing_fields_are_not() {
        let ok = r#"{
            "version": 3,
            "dataset": "d", "policy": "p", "mode": "m",
            "a": 0.5, "alpha": -0.25,
            "magnitude": 10, "support_size": 5, "residual": 0.0,
            "a_future_field": {"nested": true}
        }"#;
        let curve = equation_from_json(ok, "test").unwrap();
        assert_eq!(curve.alpha, -0.25);
        let missing_alpha = r#"{
            "version": 1,
            "dataset": "d", "policy": "p", "mode": "m",
            "a": 0.5, "magnitude": 10, "support_size": 5, "residual": 0.0
        }"#;
        let err = equation_from_json(missing_alpha, "test").unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");
    }

    #[test]
    fn corrupt_and_invalid_files_are_rejected() {
        match equation_from_json("{not json", "somewhere.eqn.json") {
            Err(FitError::Parse { path, .. }) => assert_eq!(path, "somewhere.eqn.json"),
            other => panic!("unexpected: {other:?}"),
        }
        let zero_version = r#"{
            "version": 0, "dataset": "d", "policy": "p", "mode": "m",
            "a": 0.5, "alpha": -0.25, "magnitude": 10, "support_size": 5, "residual": 0.0
        }"#;
        assert!(matches!(
            equation_from_json(zero_version, "test"),
            Err(FitError::UnsupportedVersion { version: 0 })
        ));
        let mut bad = curve(-0.5);
        bad.coefficient = -1.0;
        assert!(matches!(
            equation_to_json(&bad),
            Err(FitError::InvalidCurve { .. })
        ));
        let mut nan = curve(-0.5);
        nan.alpha = f64::NAN;
        assert!(equation_to_json(&nan).is_err());
    }

    #[test]
    fn sample_then_fit_the_toy_distribution() {
        let points = exponential_sample(&toy()).unwrap();
        assert_eq!(points.len(), 3);
        let fit = fit_power_law(&points).unwrap();
        // Sampled log points (0, ln 16), (ln 2, ln 8), (2 ln 2, ln 2) (all
        // minus ln 31): equally spaced xs with segment slopes -1 and -2,
        // so the least-squares slope is exactly -1.5.
        assert!((fit.alpha + 1.5).abs() <= 1e-9);
        assert!((fit.coefficient - 2f64.powf(25.0 / 6.0) / 31.0).abs() <= 1e-9);
        assert!(fit.residual > 0.0);
        let curve = FittedCurve::from_fit(fit, "toy", "none", "none", 31, 5);
        assert!((curve.evaluate(1) - curve.coefficient).abs() <= 1e-12);
    }
}
