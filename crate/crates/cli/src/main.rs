use clap::{Parser, Subcommand};
use fsn_cli::commands::{self, AttackArgs, EvalArgs, FeaturesExportArgs, SweepArgs, SynthArgs, TrainArgs};

/// Minimal parameter modifications that force chosen misclassifications
/// while keeping anchor predictions, test accuracy, and everything else in
/// place.
#[derive(Parser)]
#[command(name = "fsn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a dense victim classifier and write an FSNM model file.
    Train(TrainArgs),
    /// Compute a parameter modification for sampled or explicit targets.
    Attack(AttackArgs),
    /// Apply a delta file to a model and measure the damage on a dataset.
    Eval(EvalArgs),
    /// Run an experiment grid and write one CSV row per cell.
    Sweep(SweepArgs),
    /// Push a raw dataset through a frozen model prefix and write FSNF.
    FeaturesExport(FeaturesExportArgs),
    /// Generate the deterministic synthetic dataset.
    Synth(SynthArgs),
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Train(args) => commands::cmd_train(args),
        Command::Attack(args) => commands::cmd_attack(args),
        Command::Eval(args) => commands::cmd_eval(args),
        Command::Sweep(args) => commands::cmd_sweep(args),
        Command::FeaturesExport(args) => commands::cmd_features_export(args),
        Command::Synth(args) => commands::cmd_synth(args),
    }
}
