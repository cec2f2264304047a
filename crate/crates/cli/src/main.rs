use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wbic_core::estimators::inverse_temperature_wbic;
use wbic_core::experiment::{
    DataSection, DataSource, EstimatorKind, Experiment, ExperimentConfig, ModelKind, ModelSection, THREADS_ENV,
};
use wbic_core::{oracles, Error};

/// Replicated WBIC / adjusted-WBIC marginal likelihood experiments.
#[derive(Debug, Parser)]
#[command(name = "wbic", version, after_help = after_help())]
struct Cli {
    /// Log progress (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

fn after_help() -> String {
    format!(
        "Exit codes: 0 success, 1 config error, 2 data error, 3 sampler failure.\n\
         Set {THREADS_ENV} to override the number of worker threads."
    )
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Override the output directory from the config.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Parse a config and check it (including the data) without sampling.
    Validate { config: PathBuf },
    /// Print the closed-form reference values for a dataset.
    Oracle {
        /// normal_mean, linreg_m1, linreg_m2 or linreg.
        model: String,
        /// CSV with a header row.
        data: PathBuf,
        /// Observation column (normal_mean; defaults to the only column).
        #[arg(long)]
        column: Option<String>,
        /// Regression covariate column.
        #[arg(long)]
        covariate: Option<String>,
        /// Regression response column.
        #[arg(long)]
        response: Option<String>,
        /// Normal-mean prior mean.
        #[arg(long, allow_hyphen_values = true)]
        prior_mean: Option<f64>,
        /// Normal-mean prior variance.
        #[arg(long)]
        prior_var: Option<f64>,
    },
}

fn run(config: PathBuf, output: Option<PathBuf>) -> Result<(), Error> {
    let mut config = ExperimentConfig::from_path(&config)?;
    if let Some(out) = output {
        config.experiment.output_path = Some(std::env::current_dir().map(|d| d.join(&out)).unwrap_or(out));
    }
    let experiment = Experiment::prepare(config)?;
    let report = experiment.run()?;
    print!("{}", report.summary_table());
    if let Some(dir) = experiment.write_outputs(&report)? {
        log::info!("wrote {}", dir.display());
        println!("\noutputs written to {}", dir.display());
    }
    Ok(())
}

fn validate(config: PathBuf) -> Result<(), Error> {
    let config = ExperimentConfig::from_path(&config)?;
    let experiment = Experiment::prepare(config)?;
    let c = experiment.config();
    let estimators: Vec<&str> = c.estimator_set().iter().map(|e| e.as_str()).collect();
    println!("ok: model {}, n = {}, {} replicates", c.model.name, experiment.n_obs(), c.replicates());
    println!("estimators: {}", estimators.join(", "));
    println!("config hash: {}", c.hash());
    Ok(())
}

struct OracleArgs {
    model: String,
    data: PathBuf,
    column: Option<String>,
    covariate: Option<String>,
    response: Option<String>,
    prior_mean: Option<f64>,
    prior_var: Option<f64>,
}

fn oracle(args: OracleArgs) -> Result<(), Error> {
    let kind = ModelKind::parse(&args.model)?;
    if !kind.has_exact_oracle() {
        return Err(Error::Config(format!("no exact oracle exists for model {kind}")));
    }
    let mut model = ModelSection::named(kind);
    model.prior_mean = args.prior_mean;
    model.prior_var = args.prior_var;
    let mut data = DataSection::of(DataSource::Csv);
    data.path = Some(args.data);
    data.column = args.column;
    data.covariate = args.covariate;
    data.response = args.response;
    let mut config = ExperimentConfig::new(model, data);
    config.estimators.compute = vec![EstimatorKind::Exact];
    let experiment = Experiment::prepare(config)?;
    let dataset = experiment.fixed_data().expect("csv data is fixed");
    let n = dataset.n();
    println!("model\t{kind}");
    println!("n\t{n}");
    let exact = experiment.exact(dataset)?.expect("oracle exists");
    println!("log_marginal_likelihood\t{exact:.17e}");
    if kind == ModelKind::NormalMean {
        let (m, v) = (args.prior_mean.unwrap_or(0.0), args.prior_var.unwrap_or(1.0));
        let xs: Vec<f64> = dataset.rows().map(|r| r[0]).collect();
        let tw = inverse_temperature_wbic(n)?;
        let xbar = xs.iter().sum::<f64>() / n as f64;
        let s2 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum::<f64>() / (n as f64 - 1.0);
        println!("t_w\t{tw:.17e}");
        println!("wbic\t{:.17e}", oracles::normal_mean_wbic_analytic(&xs, m, v)?);
        println!("nu_hat\t{:.17e}", oracles::normal_mean_nu_hat_closed_form(tw, n, xbar, s2, m, v));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are config errors; --help and --version succeed
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Run { config, output } => run(config, output),
        Command::Validate { config } => validate(config),
        Command::Oracle { model, data, column, covariate, response, prior_mean, prior_var } => {
            oracle(OracleArgs { model, data, column, covariate, response, prior_mean, prior_var })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
