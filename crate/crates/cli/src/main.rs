use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pvdisagg::Error;
use pvdisagg_cli::commands::{self, Context, Outcome};
use pvdisagg_cli::config::ScenarioConfig;

/// Behind-the-meter PV disaggregation from net load and sparse irradiance.
#[derive(Parser)]
#[command(name = "pvdisagg", version)]
struct Cli {
    /// Overrides the seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Scenario and calibration settings (key = value with sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario: irradiance, PV, masked and net load.
    Simulate,
    /// Fit the spatial kernel to a window of irradiance data.
    FitGp {
        #[arg(long)]
        irradiance: PathBuf,
        #[arg(long)]
        sites: Option<PathBuf>,
        /// Kernel file with the initial guess.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        window_s: Option<f64>,
    },
    /// Predict fleet PV from the observed sites only.
    PredictPv {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        irradiance: PathBuf,
        #[arg(long)]
        sites: Option<PathBuf>,
        #[arg(long)]
        plant: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        observed: Option<Vec<String>>,
        /// Window used for the per-site κ means.
        #[arg(long)]
        history_s: Option<f64>,
    },
    /// Rough OU-with-jumps estimate from a load series.
    EstimateOu {
        #[arg(long)]
        load: PathBuf,
    },
    /// Recover the masked load model from net load and PV.
    Disaggregate {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        pv: Option<PathBuf>,
        #[arg(long)]
        irradiance: Option<PathBuf>,
        #[arg(long)]
        kernel: Option<PathBuf>,
        #[arg(long)]
        sites: Option<PathBuf>,
        #[arg(long)]
        plant: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        observed: Option<Vec<String>>,
        /// Parameter file replacing the rough estimate as prior.
        #[arg(long)]
        prior: Option<PathBuf>,
        /// Masked load to score the envelope against.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        calibration_s: Option<f64>,
        #[arg(long)]
        horizon_s: Option<f64>,
    },
    /// Error metrics and parameter-error table.
    Evaluate {
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        envelope: Option<PathBuf>,
        /// File with an `[ou]` section, e.g. truth.txt from simulate.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Disaggregation report with `[rough]` and `[calibrated]`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Block-average a series by an integer factor.
    Downsample {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        factor: usize,
    },
}

fn run(cli: Cli) -> pvdisagg::Result<Outcome> {
    let mut config = match &cli.config {
        Some(p) => ScenarioConfig::from_file(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    let ctx = Context::new(config, cli.out_dir)?;
    match &cli.command {
        Command::Simulate => commands::simulate(&ctx),
        Command::FitGp {
            irradiance,
            sites,
            init,
            window_s,
        } => commands::fit_gp_cmd(
            &ctx,
            &commands::FitGpArgs {
                irradiance,
                sites: sites.as_deref(),
                init: init.as_deref(),
                window_s: *window_s,
            },
        ),
        Command::PredictPv {
            kernel,
            irradiance,
            sites,
            plant,
            observed,
            history_s,
        } => commands::predict_pv_cmd(
            &ctx,
            &commands::PredictPvArgs {
                kernel,
                irradiance,
                sites: sites.as_deref(),
                plant: plant.as_deref(),
                observed: observed.clone(),
                history_s: *history_s,
            },
        ),
        Command::EstimateOu { load } => commands::estimate_ou_cmd(&ctx, load),
        Command::Disaggregate {
            net,
            pv,
            irradiance,
            kernel,
            sites,
            plant,
            observed,
            prior,
            truth,
            calibration_s,
            horizon_s,
        } => commands::disaggregate_cmd(
            &ctx,
            &commands::DisaggregateArgs {
                net,
                pv: pv.as_deref(),
                irradiance: irradiance.as_deref(),
                kernel: kernel.as_deref(),
                sites: sites.as_deref(),
                plant: plant.as_deref(),
                observed: observed.clone(),
                prior: prior.as_deref(),
                truth: truth.as_deref(),
                calibration_s: *calibration_s,
                horizon_s: *horizon_s,
            },
        ),
        Command::Evaluate {
            pred,
            truth,
            envelope,
            reference,
            report,
        } => commands::evaluate_cmd(
            &ctx,
            &commands::EvaluateArgs {
                pred: pred.as_deref(),
                truth,
                envelope: envelope.as_deref(),
                reference: reference.as_deref(),
                report: report.as_deref(),
            },
        ),
        Command::Downsample { input, factor } => commands::downsample_cmd(&ctx, input, *factor),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Parse { .. } | Error::Io { .. } => 2,
        Error::NumericFailure(_) | Error::EstimationFailure(_) => 3,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            for l in &out.lines {
                println!("{l}");
            }
            if out.budget_exhausted {
                ExitCode::from(4)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
