//! The single-shot subcommands: ingest, fit, rank, immunity, corr,
//! plotdata.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

use pcprank_core::corpus::{
    read_distribution_file, write_distribution_file, DistributionFile,
};
use pcprank_core::immunity::{check_immunity, AttackDictionary, ImmunityVerdict};
use pcprank_core::pacpal::{
    interpret, FileResolver, InterpretReport, PacpalError, Program, ReportItem,
};
use pcprank_core::powerlaw::{
    equation_to_json, exponential_sample, fit_power_law, read_equation_file, write_equation_file,
    FittedCurve,
};
use pcprank_core::ranking::pearson;

use crate::args::{
    CorrArgs, FitArgs, ImmunityArgs, IngestArgs, PlotdataArgs, RankArgs,
};
use crate::ingest::ingest_file;
use crate::pipeline::resolve_policy_environment;

fn write_output(out: &Option<std::path::PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)
            .with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(content.as_bytes()).context("writing stdout")
        }
    }
}

pub fn cmd_ingest(args: &IngestArgs) -> Result<()> {
    let environment = resolve_policy_environment(&args.wordlist, &args.policy_file)?;
    let origin = environment.resolve(&args.origin)?;
    let outcome = ingest_file(&args.dataset, args.format, &origin, args.jobs)?;
    let mut content = Vec::new();
    write_distribution_file(&mut content, &outcome.distribution, None, &[])
        .context("encoding distribution")?;
    let content = String::from_utf8(content).expect("distribution files are ASCII");
    write_output(&args.out, &content)?;
    eprintln!("{}", outcome.report);
    Ok(())
}

fn read_distribution(path: &Path) -> Result<DistributionFile> {
    let file = std::fs::File::open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    read_distribution_file(BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let file = read_distribution(&args.input)?;
    let metadata = file.metadata.clone();
    let name = |flag: &Option<String>, key: &str| {
        flag.clone()
            .or_else(|| metadata.get(key).cloned())
            .unwrap_or_else(|| "unknown".to_string())
    };
    let dataset = name(&args.dataset, "dataset");
    let policy = name(&args.policy, "policy");
    let mode = name(&args.mode, "mode");
    let distribution = file.into_distribution(args.magnitude)?;
    let points = exponential_sample(&distribution)?;
    let fit = fit_power_law(&points)?;
    let curve = FittedCurve::from_fit(
        fit,
        dataset,
        policy,
        mode,
        distribution.magnitude(),
        distribution.support_size() as u64,
    );
    match &args.out {
        Some(path) => write_equation_file(&curve, path)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", equation_to_json(&curve)?),
    }
    Ok(())
}

/// Renders assertions and rankings in statement order. Rankings list
/// worst-to-best unless `best_first` flips the display.
pub fn render_report(report: &InterpretReport, best_first: bool) -> String {
    let mut out = String::new();
    for item in &report.items {
        match item {
            ReportItem::Assertion(assertion) => {
                let verdict = if assertion.passed { "PASS" } else { "FAIL" };
                let _ = writeln!(
                    out,
                    "assert {} better {}: {verdict} (alpha {} vs {})",
                    assertion.lhs, assertion.rhs, assertion.lhs_alpha, assertion.rhs_alpha
                );
            }
            ReportItem::Ranking(ranking) => {
                let direction = if best_first { "best to worst" } else { "worst to best" };
                let _ = writeln!(out, "rank {} ({direction}):", ranking.group);
                let mut entries: Vec<_> = ranking.entries.iter().collect();
                if best_first {
                    entries.reverse();
                }
                for (position, entry) in entries.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "  {}. {} alpha={}",
                        position + 1,
                        entry.display,
                        entry.alpha
                    );
                }
            }
        }
    }
    out
}

/// Exit status contract: 0 all assertions pass, 1 any assertion fails,
/// 2 parse or runtime error.
pub fn cmd_rank(args: &RankArgs) -> i32 {
    let source = match std::fs::read_to_string(&args.script) {
        Ok(source) => source,
        Err(error) => {
            eprintln!("error: cannot read {}: {error}", args.script.display());
            return 2;
        }
    };
    let program = match Program::parse(&source) {
        Ok(program) => program,
        Err(error @ PacpalError::Parse { .. }) | Err(error @ PacpalError::Runtime { .. }) => {
            eprintln!("error: {error}");
            return 2;
        }
    };
    let base = match &args.base {
        Some(base) => base.clone(),
        None => args
            .script
            .parent()
            .filter(|parent| !parent.as_os_str().is_empty())
            .unwrap_or_else(|| Path::new("."))
            .to_path_buf(),
    };
    let resolver = FileResolver::new(base);
    let report = match interpret(&program, &resolver) {
        Ok(report) => report,
        Err(error) => {
            eprintln!("error: {error}");
            return 2;
        }
    };
    print!("{}", render_report(&report, args.best_first));
    if report.all_assertions_passed() {
        0
    } else {
        1
    }
}

pub fn cmd_immunity(args: &ImmunityArgs) -> Result<()> {
    let environment = resolve_policy_environment(&args.wordlist, &args.policy_file)?;
    let policies: Vec<_> = args
        .policies
        .iter()
        .map(|name| Ok((name.clone(), environment.resolve(name)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut out = String::new();
    for dict_path in &args.dicts {
        let dictionary = AttackDictionary::load(dict_path)?;
        for (name, phi) in &policies {
            match check_immunity(&dictionary, phi) {
                ImmunityVerdict::Immune => {
                    let _ = writeln!(out, "{} {name}: immune", dictionary.name());
                }
                ImmunityVerdict::Vulnerable { witnesses } => {
                    let plural = if witnesses.len() == 1 { "witness" } else { "witnesses" };
                    let _ = writeln!(
                        out,
                        "{} {name}: vulnerable ({} {plural})",
                        dictionary.name(),
                        witnesses.len()
                    );
                    for witness in &witnesses {
                        let _ = writeln!(out, "  {witness}");
                    }
                }
            }
        }
    }
    print!("{out}");
    Ok(())
}

pub fn cmd_corr(args: &CorrArgs) -> Result<()> {
    let reference = parse_reference_values(&args.reference)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut seen = BTreeMap::new();
    for path in &args.equations {
        let curve = read_equation_file(path)?;
        if let Some(previous) = seen.insert(curve.policy.clone(), path.clone()) {
            bail!(
                "policy {} appears in both {} and {}",
                curve.policy,
                previous.display(),
                path.display()
            );
        }
        let Some(&value) = reference.get(&curve.policy) else {
            bail!("policy {} has no value in {}", curve.policy, args.reference.display());
        };
        xs.push(value);
        ys.push(curve.alpha);
    }
    let r = pearson(&xs, &ys)?;
    println!("pearson={r}");
    Ok(())
}

/// Reads `policy value` lines, `#` comments and blank lines skipped. The
/// value may be any float (reference ranks, cracked percentages, ...).
fn parse_reference_values(path: &Path) -> Result<BTreeMap<String, f64>> {
    let content = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut values = BTreeMap::new();
    for (index, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fail = |message: String| {
            anyhow::anyhow!("{} line {}: {message}", path.display(), index + 1)
        };
        let mut parts = line.split_whitespace();
        let policy = parts.next().expect("non-empty line");
        let value_text =
            parts.next().ok_or_else(|| fail("expected \"policy value\"".to_string()))?;
        if let Some(extra) = parts.next() {
            return Err(fail(format!("unexpected trailing field {extra:?}")));
        }
        let value: f64 = value_text
            .parse()
            .map_err(|_| fail(format!("invalid value {value_text:?}")))?;
        if values.insert(policy.to_string(), value).is_some() {
            return Err(fail(format!("policy {policy} listed twice")));
        }
    }
    Ok(values)
}

pub fn cmd_plotdata(args: &PlotdataArgs) -> Result<()> {
    let mut out = String::new();
    match (&args.dist, &args.eqn) {
        (Some(dist_path), None) => {
            let file = read_distribution(dist_path)?;
            for (index, (_, probability)) in file.rows.iter().enumerate() {
                let _ = writeln!(out, "{}\t{}", index + 1, probability);
            }
        }
        (Some(dist_path), Some(eqn_path)) => {
            let file = read_distribution(dist_path)?;
            let curve = read_equation_file(eqn_path)?;
            for (index, (_, probability)) in file.rows.iter().enumerate() {
                let rank = index + 1;
                let _ = writeln!(out, "{rank}\t{probability}\t{}", curve.evaluate(rank));
            }
        }
        (None, Some(eqn_path)) => {
            let curve = read_equation_file(eqn_path)?;
            let mut rank = 1usize;
            while rank as u64 <= curve.support_size {
                let _ = writeln!(out, "{rank}\t{}", curve.evaluate(rank));
                match rank.checked_mul(2) {
                    Some(next) => rank = next,
                    None => break,
                }
            }
        }
        (None, None) => bail!("provide --dist and/or --eqn"),
    }
    write_output(&args.out, &out)
}
