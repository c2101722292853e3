mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gridcascade::StrategyKind;

/// Cascading-failure search on DC grids guided by a graph convolutional network.
#[derive(Parser, Debug)]
#[command(name = "gridcascade", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Case file path, or `builtin:toy4` / `builtin:rts79`.
    #[arg(long, default_value = "builtin:rts79")]
    pub case: String,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Relay threshold as a multiple of the branch limit.
    #[arg(long, default_value_t = gridcascade::DEFAULT_BETA)]
    pub beta: f64,
    /// Maximum number of random outages per cascade path.
    #[arg(long = "R", default_value_t = 2)]
    pub max_outages: usize,
}

#[derive(Args, Debug, Clone)]
pub struct HyperArgs {
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.005)]
    pub lr: f64,
    #[arg(long = "k-hops", default_value_t = 3)]
    pub k_hops: usize,
    #[arg(long, default_value_t = 16)]
    pub f1: usize,
    #[arg(long, default_value_t = 4)]
    pub f2: usize,
    /// Loss weight of the shedding class relative to the normal class.
    #[arg(long = "w-ratio", default_value_t = 20.0)]
    pub w_ratio: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Label random load scenarios and write a training dataset.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Random load draws; on RTS-79 each yields 39 samples at R=2.
        #[arg(long, default_value_t = 206)]
        scenarios: usize,
        /// Global load multiplier applied on top of the per-bus draw.
        #[arg(long = "load-scale", default_value_t = 1.1)]
        load_scale: f64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Train the classifier on a dataset.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        hyper: HyperArgs,
        /// Defaults to `<out>/dataset.jsonl`.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Run the online search with one or more branch orderings.
    Search {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "rand,pfw,lodf,gcn")]
        strategies: Vec<StrategyKind>,
        /// Maximum search attempts per strategy.
        #[arg(long)]
        budget: Option<usize>,
        /// Required by the gcn strategy; defaults to `<out>/model.json` when it exists.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long = "load-scale", default_value_t = 1.1)]
        load_scale: f64,
    },
    /// Explain the shedding prediction for one branch.
    Explain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        branch: usize,
        /// Random outages applied before explaining, e.g. `3,10`.
        #[arg(long, value_delimiter = ',')]
        outages: Vec<usize>,
        #[arg(long = "load-scale", default_value_t = 1.1)]
        load_scale: f64,
    },
    /// Confusion matrix and indexes of a model on a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate {
            common,
            scenarios,
            load_scale,
            jobs,
        } => commands::generate(&common, scenarios, load_scale, jobs),
        Command::Train { common, hyper, dataset } => commands::train(&common, &hyper, dataset),
        Command::Search {
            common,
            strategies,
            budget,
            model,
            load_scale,
        } => commands::search(&common, &strategies, budget, model, load_scale),
        Command::Explain {
            common,
            model,
            branch,
            outages,
            load_scale,
        } => commands::explain(&common, model, branch, &outages, load_scale),
        Command::Eval { common, model, dataset } => commands::eval(&common, model, dataset),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.code())
        }
    }
}
