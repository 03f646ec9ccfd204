use std::fs::File;
use std::io::BufWriter;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mixq_cli::{cmd_analytic, cmd_attack, cmd_compare, cmd_simulate, summary, write_rows, RunArgs};

#[derive(Parser)]
#[command(name = "mixq", version, about = "Delay, load and attack experiments on (n, k) mixes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic mean delay and per-queue load.
    Analytic(RunArgs),
    /// Simulated delay distribution and load, one row per replication.
    Simulate(RunArgs),
    /// Run an attack on simulated traces, one row per replication.
    Attack(RunArgs),
    /// Simulation averaged over replications beside the analytic prediction.
    Compare(RunArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args, cmd): (&str, &RunArgs, fn(&_) -> _) = match &cli.command {
        Command::Analytic(a) => ("analytic", a, cmd_analytic),
        Command::Simulate(a) => ("simulate", a, cmd_simulate),
        Command::Attack(a) => ("attack", a, cmd_attack),
        Command::Compare(a) => ("compare", a, cmd_compare),
    };
    let rows = match args.resolve().and_then(|cfg| cmd(&cfg)) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let path = args.out_path(name);
    let written = File::create(&path)
        .map_err(|e| e.to_string())
        .and_then(|f| write_rows(BufWriter::new(f), &rows).map_err(|e| e.to_string()));
    if let Err(e) = written {
        eprintln!("error: cannot write {}: {e}", path.display());
        return ExitCode::FAILURE;
    }
    print!("{}", summary(&rows));
    eprintln!("wrote {} rows to {}", rows.len(), path.display());
    ExitCode::SUCCESS
}
