use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use longcast::harness::{
    generate_switching_dataset, longterm_check_rows, run_bound_sweep, run_figure1, run_longterm, run_regression,
    BoundSweepConfig, Figure1Config, LongtermRunConfig, SeriesKind, SweepReport,
};
use longcast::regret::{excess_loss_bound, regret_bound, BOUND_SLACK};
use longcast::{Result, SubstitutionRule};

#[derive(Parser)]
#[command(name = "longcast", version, about = "Long-term forecast aggregation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the delayed-feedback aggregator on a synthetic or adversarial series.
    SimulateLongterm(LongtermArgs),
    /// Run the smoothing regressor on a switching linear dataset.
    SimulateRegression(RegressionArgs),
    /// Regret traces of selected experts, the bound curve and the baseline.
    ReplicateFigure1(RegressionArgs),
    /// Check every regret bound over a grid of runs.
    VerifyBounds(SweepArgs),
}

#[derive(Args)]
struct Common {
    /// JSON config; flags given on the command line override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    bound: Option<f64>,
    #[arg(long, value_parser = ["vovk", "mean"])]
    subst: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn rule(&self) -> Result<Option<SubstitutionRule>> {
        self.subst.as_deref().map(str::parse).transpose()
    }
}

#[derive(Args)]
struct LongtermArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// Number of real experts.
    #[arg(long)]
    experts: Option<usize>,
    #[arg(long, value_parser = ["synthetic", "adversarial"])]
    series: Option<String>,
}

#[derive(Args)]
struct RegressionArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    segments: Option<usize>,
    /// Noise standard deviation.
    #[arg(long)]
    noise: Option<f64>,
    /// Signal dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Birth times of the traced experts, comma separated.
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<u64>>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Replace the grid of horizons.
    #[arg(long, value_delimiter = ',')]
    horizon: Option<Vec<usize>>,
    /// Replace the grid of run lengths.
    #[arg(long, value_delimiter = ',')]
    steps: Option<Vec<usize>>,
    /// Replace the grid of expert counts.
    #[arg(long, value_delimiter = ',')]
    experts: Option<Vec<usize>>,
    /// Seeds per configuration.
    #[arg(long)]
    seeds: Option<u64>,
}

fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => Ok(serde_json::from_reader(io::BufReader::new(File::open(p)?))?),
        None => Ok(T::default()),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn longterm_config(args: &LongtermArgs) -> Result<LongtermRunConfig> {
    let c = &args.common;
    let mut config: LongtermRunConfig = load(c.config.as_deref())?;
    if let Some(v) = c.eta {
        config.eta = Some(v);
    }
    if let Some(v) = c.bound {
        config.bound = v;
    }
    if let Some(v) = c.rule()? {
        config.rule = v;
    }
    if let Some(v) = c.seed {
        config.seed = v;
    }
    if let Some(v) = args.horizon {
        config.horizon = v;
    }
    if let Some(v) = args.steps {
        config.steps = v;
    }
    if let Some(v) = args.experts {
        config.n_experts = v;
    }
    if let Some(v) = &args.series {
        config.series = if v == "adversarial" { SeriesKind::Adversarial } else { SeriesKind::Synthetic };
    }
    Ok(config)
}

fn figure1_config(args: &RegressionArgs) -> Result<Figure1Config> {
    let c = &args.common;
    let mut config: Figure1Config = load(c.config.as_deref())?;
    if let Some(v) = c.eta {
        config.run.eta = Some(v);
    }
    if let Some(v) = c.bound {
        config.run.bound = v;
        config.dataset.bound = v;
    }
    if let Some(v) = c.rule()? {
        config.run.rule = v;
    }
    if let Some(v) = c.seed {
        config.dataset.seed = v;
    }
    if let Some(v) = args.window {
        config.run.window = v;
    }
    if let Some(v) = args.sigma {
        config.run.sigma = v;
    }
    if let Some(v) = args.steps {
        config.dataset.steps = v;
    }
    if let Some(v) = args.segments {
        config.dataset.segments = v;
    }
    if let Some(v) = args.noise {
        config.dataset.noise_std = Some(v);
    }
    if let Some(v) = args.dim {
        config.dataset.dim = v;
    }
    if let Some(v) = &args.taus {
        config.taus = Some(v.clone());
    }
    Ok(config)
}

fn sweep_config(args: &SweepArgs) -> Result<BoundSweepConfig> {
    let c = &args.common;
    let mut config: BoundSweepConfig = load(c.config.as_deref())?;
    if let Some(v) = c.eta {
        config.eta = Some(v);
    }
    if let Some(v) = c.bound {
        config.bound = v;
    }
    if let Some(v) = c.rule()? {
        config.rule = v;
    }
    if let Some(v) = c.seed {
        config.base_seed = v;
    }
    if let Some(v) = &args.horizon {
        config.horizons = v.clone();
    }
    if let Some(v) = &args.steps {
        config.steps = v.clone();
    }
    if let Some(v) = &args.experts {
        config.n_experts = v.clone();
    }
    if let Some(v) = args.seeds {
        config.seeds = v;
    }
    Ok(config)
}

fn report_failures(report: &SweepReport) {
    for row in report.failures() {
        eprintln!(
            "FAIL {} seed {} {}: lhs {} rhs {} slack {}",
            row.config_id, row.seed, row.check_name, row.lhs, row.rhs, row.slack
        );
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::SimulateLongterm(args) => {
            let config = longterm_config(&args)?;
            let run = run_longterm(&config)?;
            run.write_csv(output(args.common.out.as_deref())?)?;
            let rows = longterm_check_rows(&run)?;
            let report = SweepReport { rows, runs: 1 };
            report_failures(&report);
            let last = run.ledger.steps().last().map_or(0.0, |s| s.peak_excess);
            let bound = excess_loss_bound(config.n_experts, config.steps as u64, config.horizon, run.eta).unwrap_or(0.0);
            eprintln!(
                "T={} d={} N={}: loss {:.6}, final peak excess {:.6} vs bound {:.6}",
                config.steps,
                config.horizon,
                config.n_experts,
                run.ledger.algorithm_loss(),
                last,
                bound
            );
            Ok(report.all_passed())
        }
        Command::SimulateRegression(args) => {
            let config = figure1_config(&args)?;
            let data = generate_switching_dataset(&config.dataset)?;
            let run = run_regression(&config.run, &data, &[])?;
            let mut out = csv::Writer::from_writer(output(args.common.out.as_deref())?);
            out.write_record(["t", "y", "prediction", "loss_alg", "peak_regret", "bound"])?;
            for (i, y) in data.ys.iter().enumerate() {
                let t = i as u64 + 1;
                out.write_record([
                    t.to_string(),
                    y.to_string(),
                    run.predictions[i].to_string(),
                    run.losses[i].to_string(),
                    run.peak_regret[i].to_string(),
                    regret_bound(t, run.eta).to_string(),
                ])?;
            }
            out.flush()?;
            eprintln!(
                "T={}: loss {:.6}, final peak regret {:.6} vs bound {:.6}",
                data.len(),
                run.algorithm_loss(),
                run.peak_regret.last().copied().unwrap_or(0.0),
                regret_bound(data.len() as u64, run.eta)
            );
            Ok(run.regret_check.passed && run.mixloss_excess <= BOUND_SLACK)
        }
        Command::ReplicateFigure1(args) => {
            let config = figure1_config(&args)?;
            let result = run_figure1(&config)?;
            result.write_csv(output(args.common.out.as_deref())?)?;
            eprintln!(
                "traces for tau = {:?}; loss {:.6}, hindsight baseline {:.6}, final bound {:.6}",
                result.taus,
                result.algorithm_loss,
                result.baseline_loss,
                result.rows.last().map_or(0.0, |r| r.bound)
            );
            Ok(result.regret_check.passed && result.traces_below_bound())
        }
        Command::VerifyBounds(args) => {
            let config = sweep_config(&args)?;
            let report = run_bound_sweep(&config)?;
            report.write_csv(output(args.common.out.as_deref())?)?;
            report_failures(&report);
            eprintln!(
                "{} runs, {} checks, {} failed",
                report.runs,
                report.rows.len(),
                report.failures().count()
            );
            Ok(report.all_passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
