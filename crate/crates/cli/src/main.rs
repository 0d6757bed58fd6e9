//! `dgap`: batch front end for domain-gap evaluation and gated adaptation.
//!
//! Exit codes: 0 success, 1 filesystem error, 2 invalid input.

mod commands;
mod error;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use domain_gap::analysis::KlDirection;

use settings::PolicyFlags;

#[derive(Parser)]
#[command(name = "dgap", version, about = "Domain-gap metrics and gap-gated adaptation simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure the gap between two snapshot directories.
    Gap {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[command(flatten)]
        policy: PolicyFlags,
        /// key=value file; flags take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the gating pipeline over an ordered list of target domains.
    Simulate {
        #[arg(long)]
        source: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        targets: Vec<PathBuf>,
        /// Gaps strictly below this are skipped [default: 0.02].
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        policy: PolicyFlags,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the pipeline once per threshold.
    Sweep {
        #[arg(long)]
        source: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        targets: Vec<PathBuf>,
        /// Comma-separated, e.g. 0.001,0.005,0.04.
        #[arg(long)]
        thresholds: String,
        #[command(flatten)]
        policy: PolicyFlags,
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSON table.
        #[arg(long)]
        out: PathBuf,
        /// threshold,total_cost,adapt_count text table [default: OUT with .csv extension].
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Write one snapshot directory per phase of a drifting scenario.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a per-domain gap series with AP discrepancies.
    Correlate {
        /// CSV with header domain_id,gap.
        #[arg(long)]
        gaps: PathBuf,
        /// CSV with header domain_id,ap; must include the source row.
        #[arg(long)]
        aps: PathBuf,
        /// Domain id of the source row in the AP file [default: source].
        #[arg(long)]
        source_id: Option<String>,
        /// ap-gap: KL(AP discrepancy || gap); gap-ap: the reverse [default: ap-gap].
        #[arg(long)]
        kl_direction: Option<KlDirection>,
        /// Smoothing added to every bin before normalising [default: 1e-10].
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gap {
            source,
            target,
            policy,
            config,
            out,
        } => commands::gap(source, target, policy, config.as_deref(), out),
        Command::Simulate {
            source,
            targets,
            threshold,
            policy,
            config,
            out,
        } => commands::simulate(source, targets, *threshold, policy, config.as_deref(), out),
        Command::Sweep {
            source,
            targets,
            thresholds,
            policy,
            config,
            out,
            table,
        } => commands::sweep(source, targets, thresholds, policy, config.as_deref(), out, table.as_deref()),
        Command::Synth { config, out } => commands::synth(config, out),
        Command::Correlate {
            gaps,
            aps,
            source_id,
            kl_direction,
            epsilon,
            config,
            out,
        } => commands::correlate_cmd(
            gaps,
            aps,
            source_id.clone(),
            *kl_direction,
            *epsilon,
            config.as_deref(),
            out,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dgap: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
