use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pitspec::cli::{self, AutocorrelogramArgs, CliError, TestArgs};
use pitspec::models::DEFAULT_BURNIN;
use pitspec::{Execution, Norm, StatisticSpec};

#[derive(Parser)]
#[command(name = "pitspec", version, about = "Specification tests for GARCH-type conditional distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Null model: garch11-n, garch11-t5, ar1-garch11-n or ar1-garch11-t5.
    #[arg(long, default_value = "garch11-n")]
    model: String,
    /// Use the unstandardized Student-t innovation for the -t5 models.
    #[arg(long)]
    raw_t: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads; 1 runs sequentially. Defaults to all cores.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Bootstrap p-values for a set of statistics.
    Test {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Comma-separated statistics, e.g. cvm1,adj:1,adj:5,ks1,mdj:1,mdj:5.
        #[arg(long, value_delimiter = ',')]
        stats: Vec<StatisticSpec>,
        #[arg(long = "B", default_value_t = 199)]
        b: usize,
        /// Output prefix; writes <out>.json and <out>.txt.
        #[arg(long, default_value = "pitspec-test")]
        out: PathBuf,
    },
    /// Marginal and lag-j statistics with bootstrap critical values.
    Autocorrelogram {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value = "cvm")]
        norm: Norm,
        #[arg(long = "B", default_value_t = 199)]
        b: usize,
        /// Output path; writes <out>.svg and <out>.csv.
        #[arg(long, default_value = "autocorrelogram")]
        out: PathBuf,
    },
    /// Simulate a series from a model at given parameters.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated parameters: mean const, [AR], variance const, ARCH, GARCH.
        #[arg(long, allow_hyphen_values = true)]
        params: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_BURNIN)]
        burnin: usize,
        #[arg(long, default_value = "simulated.csv")]
        out: PathBuf,
    },
    /// Maximum likelihood estimates with standard errors.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "estimate.json")]
        out: PathBuf,
    },
    /// Run a Monte Carlo size/power experiment from a plan file.
    Mc {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value = "power.csv")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Test { data, common, stats, b, out } => {
            let table = cli::cmd_test(&TestArgs {
                data,
                model: common.model,
                raw_t: common.raw_t,
                statistics: stats,
                b,
                seed: common.seed,
                execution: Execution::from_workers(common.workers),
                out,
            })?;
            print!("{table}");
        }
        Command::Autocorrelogram { data, common, k, norm, b, out } => {
            let res = cli::cmd_autocorrelogram(&AutocorrelogramArgs {
                data,
                model: common.model,
                raw_t: common.raw_t,
                k,
                norm,
                b,
                seed: common.seed,
                execution: Execution::from_workers(common.workers),
                out,
            })?;
            print!("{}", cli::autocorrelogram_csv(&res));
        }
        Command::Simulate { common, params, n, burnin, out } => {
            cli::cmd_simulate(&common.model, common.raw_t, &params, n, common.seed, burnin, &out)?;
        }
        Command::Estimate { data, common, out } => {
            let table = cli::cmd_estimate(&data, &common.model, common.raw_t, common.seed, &out)?;
            print!("{table}");
        }
        Command::Mc { plan, workers, out } => {
            let rows = cli::cmd_mc(&plan, &out, Execution::from_workers(workers))?;
            println!("wrote {rows} rows to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pitspec: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
