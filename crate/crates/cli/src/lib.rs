//! Library surface of the `pcprank` binary, split so integration tests can
//! drive subcommands without spawning processes.

pub mod args;
pub mod commands;
pub mod ingest;
pub mod pipeline;

use args::{Cli, Command, PipelineArgs};
use pipeline::RunConfig;

impl From<&PipelineArgs> for RunConfig {
    fn from(args: &PipelineArgs) -> RunConfig {
        RunConfig {
            dataset_path: args.dataset.clone(),
            format: args.format,
            dataset_name: args.name.clone(),
            origin: args.origin.clone(),
            policies: args.policies.clone(),
            modes: args.modes.clone(),
            out_dir: args.out.clone(),
            seed: args.seed,
            wordlist: args.wordlist.clone(),
            policy_file: args.policy_file.clone(),
            reference: args.reference.clone(),
            jobs: args.jobs,
            write_distributions: args.write_distributions,
        }
    }
}

/// Dispatches a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Rank(args) => return commands::cmd_rank(args),
        Command::Ingest(args) => commands::cmd_ingest(args),
        Command::Pipeline(args) => {
            pipeline::cmd_pipeline(&RunConfig::from(args)).map(|manifest| {
                let produced =
                    manifest.cells.iter().filter(|cell| cell.status == "ok").count();
                eprintln!(
                    "pipeline: {produced}/{} cells ok, {} rank reports, manifest.json written",
                    manifest.cells.len(),
                    manifest.rank_reports.len()
                );
            })
        }
        Command::Fit(args) => commands::cmd_fit(args),
        Command::Immunity(args) => commands::cmd_immunity(args),
        Command::Corr(args) => commands::cmd_corr(args),
        Command::Plotdata(args) => commands::cmd_plotdata(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(error) => {
            eprintln!("error: {error:#}");
            1
        }
    }
}
