//! `dynrmst` command-line interface.
//!
//! Every option can also come from a flat TOML file given with `--config`;
//! command-line values win. Outputs embed the resolved options.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{
    CrmstArgs, EvaluateArgs, FitArgs, KmArgs, McArgs, PredictArgs, SimulateArgs, TestArgs,
};

#[derive(Debug, Parser)]
#[command(name = "dynrmst", version, about = "Dynamic restricted mean survival time analysis")]
struct Cli {
    /// TOML file with default values for any option (flat `key = value` pairs).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "DYNRMST_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Kaplan-Meier curve restarted at a landmark, per group.
    Km(KmArgs),
    /// Conditional RMST estimates with pseudo-observation standard errors.
    Crmst(CrmstArgs),
    /// Two-sample test of the conditional RMST difference.
    Test(TestArgs),
    /// Fit a landmark super model and save it as JSON.
    Fit(FitArgs),
    /// Individual predictions from a saved model.
    Predict(PredictArgs),
    /// Train on one dataset, score dynamic and static predictions on another.
    Evaluate(EvaluateArgs),
    /// Simulate a two-arm scenario or a joint-model cohort.
    Simulate(SimulateArgs),
    /// Monte Carlo experiments.
    Mc(McArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
