//! Command-line surface, one subcommand per pipeline stage.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pcprank_core::corpus::CorpusFormat;

#[derive(Debug, Parser)]
#[command(
    name = "pcprank",
    version,
    about = "Rank password composition policies by the uniformity of the distributions they induce"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cleanse a corpus and emit its rank/probability distribution.
    Ingest(IngestArgs),
    /// Run the full policy x mode grid over one corpus.
    Pipeline(PipelineArgs),
    /// Fit a power law to a distribution file and emit an equation file.
    Fit(FitArgs),
    /// Execute a ranking script against equation files.
    Rank(RankArgs),
    /// Check policies for immunity to attack dictionaries.
    Immunity(ImmunityArgs),
    /// Pearson correlation between a reference column and fitted alphas.
    Corr(CorrArgs),
    /// Columnar plot data from a distribution and/or an equation file.
    Plotdata(PlotdataArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Corpus file to read.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Corpus layout: "freq" (count<TAB>password) or "raw" (one password
    /// per line).
    #[arg(long, default_value = "freq")]
    pub format: CorpusFormat,
    /// Origin policy of the corpus: catalog name or expression.
    #[arg(long, default_value = "minlen(0)")]
    pub origin: String,
    /// Wordlist backing dictionary-based policies.
    #[arg(long)]
    pub wordlist: Option<PathBuf>,
    /// Extra policy definitions, one `name = expression` per line.
    #[arg(long)]
    pub policy_file: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the available processors.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Corpus file to read.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "freq")]
    pub format: CorpusFormat,
    /// Dataset name stamped into artifacts; defaults to the file stem.
    #[arg(long)]
    pub name: Option<String>,
    /// Origin policy of the corpus.
    #[arg(long, default_value = "minlen(0)")]
    pub origin: String,
    /// Target policy, repeatable.
    #[arg(long = "policy", required = true)]
    pub policies: Vec<String>,
    /// Reselection mode, repeatable; defaults to all four built-in modes.
    #[arg(long = "mode")]
    pub modes: Vec<String>,
    /// Output directory for equation files, reports, and the manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for the fresh-password generator.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub wordlist: Option<PathBuf>,
    #[arg(long)]
    pub policy_file: Option<PathBuf>,
    /// Reference ranking file (`policy rank` lines) to score against.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Worker threads; defaults to the available processors.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Also write each cell's reselected distribution file.
    #[arg(long)]
    pub write_distributions: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Distribution file as written by `ingest` or `pipeline`.
    pub input: PathBuf,
    /// Equation file to write; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Provenance names stamped into the equation file; default to the
    /// input file's metadata headers.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub mode: Option<String>,
    /// Overrides the corpus magnitude header.
    #[arg(long)]
    pub magnitude: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Script to execute.
    pub script: PathBuf,
    /// Directory equation paths resolve against; defaults to the script's
    /// directory.
    #[arg(long)]
    pub base: Option<PathBuf>,
    /// Print rankings best-first instead of the default worst-first.
    #[arg(long)]
    pub best_first: bool,
}

#[derive(Debug, Args)]
pub struct ImmunityArgs {
    /// Attack dictionary file, repeatable.
    #[arg(long = "dict", required = true)]
    pub dicts: Vec<PathBuf>,
    /// Policy to check, repeatable.
    #[arg(long = "policy", required = true)]
    pub policies: Vec<String>,
    #[arg(long)]
    pub wordlist: Option<PathBuf>,
    #[arg(long)]
    pub policy_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorrArgs {
    /// Reference file of `policy value` lines.
    #[arg(long)]
    pub reference: PathBuf,
    /// Equation files, one per policy.
    #[arg(required = true)]
    pub equations: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotdataArgs {
    /// Distribution file providing observed (rank, probability) rows.
    #[arg(long)]
    pub dist: Option<PathBuf>,
    /// Equation file providing the fitted curve.
    #[arg(long)]
    pub eqn: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
