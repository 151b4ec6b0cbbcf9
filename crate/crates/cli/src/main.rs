use clap::Parser;

fn main() {
    let cli = pcprank_cli::args::Cli::parse();
    std::process::exit(pcprank_cli::run(cli));
}
