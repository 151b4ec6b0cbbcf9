//! End-to-end orchestration: one corpus in, a grid of equation files, rank
//! reports, and a manifest out.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use pcprank_core::corpus::{write_distribution_file, CorpusFormat, Distribution};
use pcprank_core::policy::{parse_policy_file, PolicyCatalog, PolicyPredicate, Wordlist};
use pcprank_core::powerlaw::{
    exponential_sample, fit_power_law, write_equation_file, FittedCurve,
};
use pcprank_core::ranking::{read_reference_ranks, render_rank_report, rank_by_alpha};
use pcprank_core::reselect::{apply, ReselectionMode};

use crate::ingest::{effective_jobs, ingest_file, IngestOutcome};

pub const MANIFEST_VERSION: u32 = 1;

/// Everything one pipeline run needs. Field-by-field mirror of the
/// `pipeline` subcommand flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset_path: PathBuf,
    pub format: CorpusFormat,
    /// Name stamped into artifacts; file stem when `None`.
    pub dataset_name: Option<String>,
    pub origin: String,
    pub policies: Vec<String>,
    /// Empty means all four built-in modes.
    pub modes: Vec<String>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub wordlist: Option<PathBuf>,
    pub policy_file: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub jobs: usize,
    pub write_distributions: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestCell {
    pub policy: String,
    pub mode: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equation_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distribution_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_size: Option<u64>,
}

/// The run index written as `manifest.json`. Contains no timestamps or
/// absolute paths, so identical configurations produce byte-identical
/// manifests.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub version: u32,
    pub dataset: String,
    pub origin: String,
    pub seed: u64,
    pub magnitude: u64,
    pub support_size: u64,
    pub cleanse: BTreeMap<String, u64>,
    pub cells: Vec<ManifestCell>,
    pub rank_reports: Vec<String>,
}

fn fnv1a(seed: u64, parts: [&str; 3]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    let eat = |hash: &mut u64, bytes: &[u8]| {
        for &byte in bytes {
            *hash ^= byte as u64;
            *hash = hash.wrapping_mul(PRIME);
        }
    };
    eat(&mut hash, &seed.to_le_bytes());
    for part in parts {
        eat(&mut hash, part.as_bytes());
        eat(&mut hash, &[0]);
    }
    hash
}

/// The fresh-password seed for one (policy, mode) cell: derived, not
/// shared, so cells stay independent of grid order and of each other.
pub fn cell_seed(seed: u64, dataset: &str, policy: &str, mode: &str) -> u64 {
    fnv1a(seed, [dataset, policy, mode])
}

pub struct ResolvedPolicies {
    pub catalog: PolicyCatalog,
    pub defined: HashMap<String, PolicyPredicate>,
}

/// Builds the catalog (with optional wordlist) and any file-defined
/// policies; shared by every subcommand that takes policy names.
pub fn resolve_policy_environment(
    wordlist: &Option<PathBuf>,
    policy_file: &Option<PathBuf>,
) -> Result<ResolvedPolicies> {
    let catalog = match wordlist {
        Some(path) => {
            let words = Wordlist::load(path)
                .with_context(|| format!("loading wordlist {}", path.display()))?;
            PolicyCatalog::with_wordlist(words.into())
        }
        None => PolicyCatalog::new(),
    };
    let defined = match policy_file {
        Some(path) => {
            let source = std::fs::read_to_string(path)
                .with_context(|| format!("reading policy file {}", path.display()))?;
            parse_policy_file(&source, &catalog)
                .with_context(|| format!("parsing policy file {}", path.display()))?
                .into_iter()
                .collect()
        }
        None => HashMap::new(),
    };
    Ok(ResolvedPolicies { catalog, defined })
}

impl ResolvedPolicies {
    pub fn resolve(&self, spec: &str) -> Result<PolicyPredicate> {
        self.catalog
            .resolve(spec, &self.defined)
            .with_context(|| format!("resolving policy {spec:?}"))
    }
}

fn artifact_name(dataset: &str, policy: &str, mode: &str, suffix: &str) -> String {
    format!("{dataset}-{policy}-{mode}{suffix}")
}

struct CellResult {
    manifest: ManifestCell,
    curve: Option<FittedCurve>,
}

/// The run-wide inputs every cell shares.
struct CellContext<'a> {
    distribution: &'a Distribution,
    dataset: &'a str,
    seed: u64,
    out_dir: &'a Path,
    write_distributions: bool,
}

fn run_cell(
    context: &CellContext<'_>,
    policy_name: &str,
    phi: &PolicyPredicate,
    mode_name: &str,
    mode: &ReselectionMode,
) -> CellResult {
    let CellContext { distribution, dataset, seed, out_dir, write_distributions } = *context;
    let mut cell = ManifestCell {
        policy: policy_name.to_string(),
        mode: mode_name.to_string(),
        status: "error".to_string(),
        error: None,
        equation_file: None,
        distribution_file: None,
        alpha: None,
        support_size: None,
    };
    let fresh_seed = cell_seed(seed, dataset, policy_name, mode_name);
    let outcome: Result<FittedCurve> = (|| {
        let reselected = apply(distribution, phi, mode, fresh_seed)?;
        let points = exponential_sample(&reselected)?;
        let fit = fit_power_law(&points)?;
        let curve = FittedCurve::from_fit(
            fit,
            dataset,
            policy_name,
            mode_name,
            reselected.magnitude(),
            reselected.support_size() as u64,
        );
        let equation_file = artifact_name(dataset, policy_name, mode_name, ".eqn.json");
        write_equation_file(&curve, out_dir.join(&equation_file))?;
        cell.equation_file = Some(equation_file);
        if write_distributions {
            let original: HashSet<&str> =
                distribution.records().iter().map(|r| r.password.as_str()).collect();
            let fresh: HashSet<String> = reselected
                .records()
                .iter()
                .filter(|r| !original.contains(r.password.as_str()))
                .map(|r| r.password.clone())
                .collect();
            let distribution_file = artifact_name(dataset, policy_name, mode_name, ".dist.tsv");
            let file = std::fs::File::create(out_dir.join(&distribution_file))?;
            write_distribution_file(
                std::io::BufWriter::new(file),
                &reselected,
                Some(&fresh),
                &[("dataset", dataset), ("policy", policy_name), ("mode", mode_name)],
            )?;
            cell.distribution_file = Some(distribution_file);
        }
        Ok(curve)
    })();
    match outcome {
        Ok(curve) => {
            cell.status = "ok".to_string();
            cell.alpha = Some(curve.alpha);
            cell.support_size = Some(curve.support_size);
            CellResult { manifest: cell, curve: Some(curve) }
        }
        Err(error) => {
            cell.error = Some(format!("{error:#}"));
            CellResult { manifest: cell, curve: None }
        }
    }
}

fn cleanse_counts(outcome: &IngestOutcome) -> BTreeMap<String, u64> {
    let report = &outcome.report;
    BTreeMap::from([
        ("kept".to_string(), report.kept),
        ("kept_frequency".to_string(), report.kept_frequency),
        ("removed_by_policy".to_string(), report.removed_by_policy),
        ("removed_by_policy_frequency".to_string(), report.removed_by_policy_frequency),
        ("removed_non_ascii".to_string(), report.removed_non_ascii),
        ("removed_non_ascii_frequency".to_string(), report.removed_non_ascii_frequency),
        ("malformed_lines".to_string(), report.malformed_lines),
    ])
}

/// Runs the whole grid. Configuration problems (unknown policy or mode,
/// unwritable output directory, unreadable corpus) fail before any cell
/// work; errors inside a cell are recorded in the manifest and leave every
/// other cell untouched.
pub fn cmd_pipeline(config: &RunConfig) -> Result<Manifest> {
    if config.policies.is_empty() {
        bail!("at least one --policy is required");
    }
    let mode_names: Vec<String> = if config.modes.is_empty() {
        ReselectionMode::BUILTIN_NAMES.iter().map(|name| name.to_string()).collect()
    } else {
        config.modes.clone()
    };
    let modes: Vec<ReselectionMode> = mode_names
        .iter()
        .map(|name| {
            ReselectionMode::from_name(name).ok_or_else(|| {
                anyhow::anyhow!(
                    "unknown reselection mode {name:?} (expected one of {})",
                    ReselectionMode::BUILTIN_NAMES.join(", ")
                )
            })
        })
        .collect::<Result<_, _>>()?;

    let environment =
        resolve_policy_environment(&config.wordlist, &config.policy_file)?;
    let origin = environment.resolve(&config.origin)?;
    let policies: Vec<(String, PolicyPredicate)> = config
        .policies
        .iter()
        .map(|name| Ok((name.clone(), environment.resolve(name)?)))
        .collect::<Result<_>>()?;
    let reference = match &config.reference {
        Some(path) => read_reference_ranks(path)
            .with_context(|| format!("reading reference ranking {}", path.display()))?,
        None => BTreeMap::new(),
    };

    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating output directory {}", config.out_dir.display()))?;
    let probe = config.out_dir.join(".pcprank-probe");
    std::fs::write(&probe, b"probe")
        .and_then(|()| std::fs::remove_file(&probe))
        .with_context(|| format!("output directory {} is not writable", config.out_dir.display()))?;

    let dataset_name = match &config.dataset_name {
        Some(name) => name.clone(),
        None => config
            .dataset_path
            .file_stem()
            .map(|stem| stem.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string()),
    };

    let ingested = ingest_file(&config.dataset_path, config.format, &origin, config.jobs)?;
    let distribution = &ingested.distribution;

    let grid: Vec<(usize, usize)> = (0..policies.len())
        .flat_map(|p| (0..modes.len()).map(move |m| (p, m)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(effective_jobs(config.jobs))
        .build()
        .context("building worker pool")?;
    let context = CellContext {
        distribution,
        dataset: &dataset_name,
        seed: config.seed,
        out_dir: &config.out_dir,
        write_distributions: config.write_distributions,
    };
    let results: Vec<CellResult> = pool.install(|| {
        use rayon::prelude::*;
        grid.par_iter()
            .map(|&(p, m)| {
                run_cell(&context, &policies[p].0, &policies[p].1, &mode_names[m], &modes[m])
            })
            .collect()
    });

    let mut cells = Vec::with_capacity(results.len());
    let mut curves: Vec<FittedCurve> = Vec::new();
    for result in results {
        cells.push(result.manifest);
        curves.extend(result.curve);
    }

    let mut rank_reports = Vec::new();
    for mode_name in &mode_names {
        let mode_curves: Vec<FittedCurve> =
            curves.iter().filter(|c| &c.mode == mode_name).cloned().collect();
        if mode_curves.is_empty() {
            continue;
        }
        let table = rank_by_alpha(&mode_curves, &reference)?;
        let report_file = format!("rank-{mode_name}.txt");
        std::fs::write(config.out_dir.join(&report_file), render_rank_report(&table))
            .with_context(|| format!("writing {report_file}"))?;
        rank_reports.push(report_file);
    }

    let manifest = Manifest {
        version: MANIFEST_VERSION,
        dataset: dataset_name,
        origin: config.origin.clone(),
        seed: config.seed,
        magnitude: distribution.magnitude(),
        support_size: distribution.support_size() as u64,
        cleanse: cleanse_counts(&ingested),
        cells,
        rank_reports,
    };
    let text = serde_json::to_string_pretty(&manifest).context("encoding manifest")? + "\n";
    let manifest_path = config.out_dir.join("manifest.json");
    let temporary = config.out_dir.join("manifest.json.tmp");
    std::fs::write(&temporary, text)
        .and_then(|()| std::fs::rename(&temporary, &manifest_path))
        .with_context(|| format!("writing {}", manifest_path.display()))?;
    Ok(manifest)
}
