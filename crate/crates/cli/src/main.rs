use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use partkrls::harness::config::LocalKernel;
use partkrls::harness::experiment::local_specs;
use partkrls::harness::io::{read_dataset, write_dataset};
use partkrls::harness::report::{digest_rows, emit_task, emit_timing, read_rows};
use partkrls::harness::{
    emit_improved_report, emit_report, run_improved_bound_experiment, run_rate_experiment,
    run_timing_benchmark, AnyModel, Estimator, ExperimentConfig, ExperimentKind, ModelRecord,
    TaskConfig, DEFAULT_TIMING_REPEATS,
};
use partkrls::krls::{fit_krls, Predictor};
use partkrls::localized::{fit_distributed_average, fit_localized, fit_localized_nystrom};
use partkrls::nystrom::fit_nystrom;
use partkrls::partition::build_grid_partition;
use partkrls::seeding::derive_seed;
use partkrls::synth::{gen_inputs, sample_labels};
use partkrls::{BoxDomain, Error, KernelFamily, KernelSpec};

#[derive(Parser)]
#[command(
    name = "partkrls",
    version,
    about = "Partitioned kernel regularized least squares"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a labelled sample from a synthetic task.
    Synth {
        /// Task description, or an experiment config whose task is used.
        #[arg(long)]
        task: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV with columns x0.. and y.
        #[arg(long)]
        out: PathBuf,
        /// Directory receiving task.json with every expansion coefficient.
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Write noise-free targets instead of noisy labels.
        #[arg(long)]
        clean: bool,
    },
    /// Train an estimator on a CSV dataset and save the model.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        estimator: Estimator,
        /// gaussian:H, laplacian:H, brownian or polynomial:D:C
        #[arg(long)]
        kernel: KernelFamily,
        #[arg(long)]
        lambda: f64,
        /// Cells per input dimension (one value applies to every dimension).
        #[arg(long, value_delimiter = ',', default_value = "1")]
        cells: Vec<usize>,
        /// Landmarks per fit.
        #[arg(long)]
        landmarks: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Restrict the kernel to each cell box.
        #[arg(long)]
        anchored: bool,
        /// Lower corner of the input domain (default: all zeros).
        #[arg(long, value_delimiter = ',')]
        lo: Vec<f64>,
        /// Upper corner of the input domain (default: all ones).
        #[arg(long, value_delimiter = ',')]
        hi: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a saved model at the points of a CSV file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        points: PathBuf,
        /// Output CSV with the input columns and the prediction as y.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a rate or improved-bound experiment from a config file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the output directory of the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Median fit times per estimator and sample size.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TIMING_REPEATS)]
        repeats: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Summarize a rows CSV.
    Report {
        #[arg(long)]
        rows: PathBuf,
    },
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::IllConditioned { .. }
            | Error::NotSymmetric { .. }
            | Error::EigenFailure
            | Error::Cell { .. } => Failure::Numerical(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn load_task(path: &Path) -> Result<TaskConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    match serde_json::from_str::<TaskConfig>(&text) {
        Ok(task) => Ok(task),
        Err(_) => Ok(ExperimentConfig::from_json(&text)?.task),
    }
}

fn synth(
    task: &Path,
    n: usize,
    seed: u64,
    out: &Path,
    dump: Option<&Path>,
    clean: bool,
) -> Outcome {
    let task = load_task(task)?.build()?;
    info!("truncation sup error {:.3e}", task.truncation_sup_error);
    let xs = gen_inputs(&task, n, derive_seed(seed, &[1]));
    let y = if clean {
        xs.iter()
            .map(|x| task.f_rho(x))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        sample_labels(&task, &xs, derive_seed(seed, &[2]))?
    };
    write_dataset(out, &xs, Some(&y))?;
    if let Some(dir) = dump {
        emit_task(&task, dir)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn fit(
    data: &Path,
    estimator: Estimator,
    family: KernelFamily,
    lambda: f64,
    cells: Vec<usize>,
    landmarks: Option<usize>,
    seed: u64,
    anchored: bool,
    lo: Vec<f64>,
    hi: Vec<f64>,
    out: &Path,
) -> Outcome {
    let dataset = read_dataset(data)?;
    let y = dataset
        .y
        .ok_or_else(|| Failure::Config(format!("{} has no y column", data.display())))?;
    let xs = dataset.xs;
    let d = xs.dim();
    let lo = if lo.is_empty() { vec![0.0; d] } else { lo };
    let hi = if hi.is_empty() { vec![1.0; d] } else { hi };
    let domain = BoxDomain::new(lo, hi)?;
    let kernel = KernelSpec::new(family, domain.clone())?;
    let cells = if cells.len() == 1 {
        vec![cells[0]; d]
    } else {
        cells
    };
    let partition = build_grid_partition(domain, cells)?;
    let m = partition.num_cells();
    let need_landmarks = || {
        landmarks.ok_or_else(|| Failure::Config(format!("--landmarks is required for {estimator}")))
    };
    let mode = if anchored {
        LocalKernel::Anchored
    } else {
        LocalKernel::Shared
    };
    let model = match estimator {
        Estimator::Krls => AnyModel::Krls(fit_krls(&xs, &y, lambda, &kernel)?),
        Estimator::Nystrom => AnyModel::Nystrom(fit_nystrom(
            &xs,
            &y,
            lambda,
            need_landmarks()?,
            seed,
            &kernel,
        )?),
        Estimator::Localized => {
            let specs = local_specs(&kernel, &partition, mode)?;
            AnyModel::Localized(fit_localized(&xs, &y, &partition, lambda, &specs)?)
        }
        Estimator::LocalizedNystrom => {
            let specs = local_specs(&kernel, &partition, mode)?;
            AnyModel::LocalizedNystrom(fit_localized_nystrom(
                &xs,
                &y,
                &partition,
                lambda,
                need_landmarks()?,
                seed,
                &specs,
            )?)
        }
        Estimator::DistributedAvg => {
            AnyModel::DistributedAvg(fit_distributed_average(&xs, &y, m, lambda, &kernel, seed)?)
        }
    };
    ModelRecord::new(model).save(out)?;
    Ok(())
}

fn predict(model: &Path, points: &Path, out: &Path) -> Outcome {
    let record = ModelRecord::load(model)?;
    let xs = read_dataset(points)?.xs;
    let values = record.model.predict_many(&xs)?;
    write_dataset(out, &xs, Some(&values))?;
    Ok(())
}

fn experiment(config: &Path, output: Option<PathBuf>) -> Outcome {
    let config = ExperimentConfig::load(config)?;
    let dir = output.unwrap_or_else(|| config.output.clone());
    let task = config.task.build()?;
    emit_task(&task, &dir)?;
    let failures = match config.experiment {
        ExperimentKind::Rate => {
            let report = run_rate_experiment(&config)?;
            emit_report(&report, &dir)?;
            for s in &report.summary.estimators {
                match s.fit {
                    Some(fit) => println!(
                        "{}: slope {:.4} ± {:.4}",
                        s.estimator, fit.slope, fit.stderr
                    ),
                    None => println!("{}: no slope", s.estimator),
                }
            }
            println!(
                "theoretical exponent {:.4}",
                report.summary.theoretical_exponent
            );
            report.summary.failures
        }
        ExperimentKind::ImprovedBound => {
            let report = run_improved_bound_experiment(&config)?;
            emit_improved_report(&report, &dir)?;
            for c in &report.comparisons {
                println!(
                    "{} n={}: high {:.4e} low {:.4e} z {:.2}",
                    c.estimator, c.n, c.mean_high, c.mean_low, c.z
                );
            }
            report.high.summary.failures + report.low.summary.failures
        }
    };
    println!("results in {}", dir.display());
    if failures > 0 {
        return Err(Failure::Numerical(format!("{failures} fits failed")));
    }
    Ok(())
}

fn bench(config: &Path, repeats: usize, output: Option<PathBuf>) -> Outcome {
    let config = ExperimentConfig::load(config)?;
    let dir = output.unwrap_or_else(|| config.output.clone());
    let table = run_timing_benchmark(&config, repeats)?;
    emit_timing(&table, &dir)?;
    for row in &table.rows {
        println!(
            "{} n={}: median {:.4}s",
            row.estimator, row.n, row.median_seconds
        );
    }
    for s in &table.scaling {
        if let Some(fit) = s.fit {
            println!("{}: time exponent {:.3}", s.estimator, fit.slope);
        }
    }
    Ok(())
}

fn report(rows: &Path) -> Outcome {
    let rows = read_rows(rows)?;
    let digest = digest_rows(&rows);
    println!(
        "{}",
        serde_json::to_string_pretty(&digest).map_err(Error::from)?
    );
    if digest.failures > 0 {
        return Err(Failure::Numerical(format!(
            "{} rows failed",
            digest.failures
        )));
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Synth {
            task,
            n,
            seed,
            out,
            dump,
            clean,
        } => synth(&task, n, seed, &out, dump.as_deref(), clean),
        Command::Fit {
            data,
            estimator,
            kernel,
            lambda,
            cells,
            landmarks,
            seed,
            anchored,
            lo,
            hi,
            out,
        } => fit(
            &data, estimator, kernel, lambda, cells, landmarks, seed, anchored, lo, hi, &out,
        ),
        Command::Predict { model, points, out } => predict(&model, &points, &out),
        Command::Experiment { config, output } => experiment(&config, output),
        Command::Bench {
            config,
            repeats,
            output,
        } => bench(&config, repeats, output),
        Command::Report { rows } => report(&rows),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}
