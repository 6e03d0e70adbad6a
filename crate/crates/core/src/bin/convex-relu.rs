use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use convex_relu::arrangement::{enumerate_patterns, EnumerationMode, PatternSet};
use convex_relu::complexity::{covering_exponent_probe, gaussian_bound, gaussian_complexity_mc};
use convex_relu::convex_solver::{assemble, solve, SolverConfig};
use convex_relu::harness::{
    fit_ntk, format_sweep_csv, gen_synthetic, rate_sweep, read_sweep_csv, select_patterns, slopes_by_method,
    ExperimentConfig, PatternPolicy,
};
use convex_relu::io::{
    read_dataset_csv, read_json, read_model, read_table, write_column_csv, write_dataset_csv,
    write_json, write_model, PatternFile, SolutionFile,
};
use convex_relu::network::{mse, reconstruct_default, truncate};
use convex_relu::{Dataset, Error, Result};

#[derive(Parser)]
#[command(name = "convex-relu", version, about = "Convex training of path-norm regularized two-layer ReLU networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Sampled,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate activation patterns of a data matrix.
    Patterns {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "exact")]
        mode: Mode,
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Target column to drop; other columns are features.
        #[arg(long, default_value = "y")]
        label: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the convex program and write the solution (and optionally the network).
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        lambda: f64,
        #[arg(long = "lambda-tilde", default_value_t = 1e-10)]
        lambda_tilde: f64,
        /// Pattern JSON from `patterns`, or `auto`.
        #[arg(long, default_value = "auto")]
        patterns: String,
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        /// Absolute and feasibility tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long = "max-iters")]
        max_iters: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the reconstructed network here.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Evaluate a saved network on a CSV of inputs.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        truncate: Option<f64>,
        /// Column dropped from the inputs if present.
        #[arg(long, default_value = "y")]
        label: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Kernel ridge regression with the NTK; writes test predictions.
    NtkFit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        lambda: f64,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Capacity diagnostics.
    Complexity {
        #[command(subcommand)]
        which: ComplexityCommand,
    },
    /// Run a path-norm vs NTK rate sweep from a TOML or JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic single-ReLU dataset.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit log-log slopes of median test MSE from a sweep CSV.
    Slope {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum ComplexityCommand {
    /// Monte-Carlo Gaussian complexity surrogates vs the closed-form bound.
    Gauss {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "y")]
        label: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy-packing probe of the metric entropy exponent.
    Entropy {
        #[arg(long)]
        dim: usize,
        #[arg(long, num_args = 1.., default_values_t = [0.4, 0.2, 0.1, 0.05])]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long, default_value_t = 5000)]
        neurons: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Features of a CSV, dropping `label` if that column exists.
fn read_features(path: &Path, label: &str) -> Result<Dataset> {
    Dataset::unlabeled(read_table(path)?.features(label))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Patterns {
            data,
            mode,
            budget,
            seed,
            label,
            out,
        } => {
            let data = read_features(&data, &label)?;
            let mode = match mode {
                Mode::Exact => EnumerationMode::Exact,
                Mode::Sampled => EnumerationMode::Sampled,
            };
            let set = enumerate_patterns(&data, mode, budget, seed)?;
            write_json(&out, &PatternFile::new(&set, data.d()))?;
            eprintln!("{} patterns ({mode}), rank {}", set.len(), set.rank);
        }
        Command::Fit {
            data,
            lambda,
            lambda_tilde,
            patterns,
            budget,
            tol,
            max_iters,
            seed,
            label,
            out,
            model,
        } => {
            let data = read_dataset_csv(&data, label.as_deref())?;
            let set = if patterns == "auto" {
                select_patterns(&data, PatternPolicy::Auto, budget, seed)?
            } else {
                let file: PatternFile = read_json(Path::new(&patterns))?;
                PatternSet::from_masks(&data, file.masks()?)?
            };
            let mut config = SolverConfig {
                seed,
                ..SolverConfig::default()
            };
            if let Some(t) = tol {
                config.abs_tol = t;
                config.feasibility_tol = t;
            }
            if let Some(m) = max_iters {
                config.max_iters = m;
            }
            let program = assemble(&data, &set, lambda, lambda_tilde)?;
            let (solution, diagnostics) = solve(&program, &config)?;
            write_json(&out, &SolutionFile::new(&program, &solution, &config, &diagnostics))?;
            let net = reconstruct_default(&solution, &program);
            if let Some(path) = model {
                write_model(&path, &net)?;
            }
            eprintln!(
                "{} after {} iterations, objective {:.6e}, width {}, train mse {:.3e}",
                diagnostics.status,
                diagnostics.iterations,
                diagnostics.objective,
                net.width(),
                mse(&net.forward(data.x())?, data.y())?
            );
        }
        Command::Predict {
            model,
            data,
            truncate: bound,
            label,
            out,
        } => {
            let net = read_model(&model)?;
            let data = read_features(&data, &label)?;
            let mut pred = net.forward(data.x())?;
            if let Some(b) = bound {
                pred = truncate(&pred, b)?;
            }
            write_column_csv(&out, "prediction", &pred)?;
        }
        Command::NtkFit {
            data,
            lambda,
            test,
            label,
            out,
        } => {
            let train = read_dataset_csv(&data, label.as_deref())?;
            let table = read_table(&test)?;
            let label_name = label.unwrap_or_else(|| "y".into());
            let labelled = table.column_index(&label_name).is_some();
            let test = if labelled {
                table.into_dataset(Some(&label_name))?
            } else {
                Dataset::unlabeled(table.features(&label_name))?
            };
            let (train_pred, test_pred) = fit_ntk(&train, &test, lambda)?;
            write_column_csv(&out, "prediction", &test_pred)?;
            eprintln!("train mse {:.3e}", mse(&train_pred, train.y())?);
            if labelled {
                eprintln!("test mse {:.3e}", mse(&test_pred, test.y())?);
            }
        }
        Command::Complexity { which } => match which {
            ComplexityCommand::Gauss {
                data,
                radius,
                trials,
                seed,
                label,
                out,
            } => {
                let data = read_features(&data, &label)?;
                let (upper, lower) = gaussian_complexity_mc(&data, radius, trials, seed)?;
                let bound = gaussian_bound(radius, data.d(), data.n());
                let mut text = String::from("kind,mean,stderr,trials,seed,bound\n");
                for e in [&upper, &lower] {
                    let kind = serde_json::to_value(e.kind)?;
                    text += &format!(
                        "{},{},{},{},{},{}\n",
                        kind.as_str().unwrap_or_default(),
                        e.mean,
                        e.stderr,
                        e.trials,
                        e.seed,
                        bound
                    );
                }
                emit(&text, out.as_deref())?;
            }
            ComplexityCommand::Entropy {
                dim,
                eps,
                points,
                neurons,
                seed,
                out,
            } => {
                let probe = covering_exponent_probe(dim, &eps, points, neurons, seed)?;
                let mut text = String::from("eps,count\n");
                for row in &probe.rows {
                    text += &format!("{},{}\n", row.eps, row.count);
                }
                emit(&text, out.as_deref())?;
                eprintln!(
                    "fitted slope {:.4}, entropy exponent 2d/(d+2) = {:.4}",
                    probe.slope, probe.exponent
                );
            }
        },
        Command::Sweep { config, out } => {
            let mut config = ExperimentConfig::from_path(&config)?;
            if out.is_some() {
                config.output = out;
            }
            let records = rate_sweep(&config)?;
            let failed = records.iter().filter(|r| r.is_failed()).count();
            match &config.output {
                Some(path) => eprintln!("{} records ({failed} failed) -> {}", records.len(), path.display()),
                None => print!("{}", format_sweep_csv(&records)),
            }
        }
        Command::Gen { n, d, seed, out } => {
            let synthetic = gen_synthetic(n, d, seed)?;
            write_dataset_csv(&out, &synthetic.data)?;
            let w: Vec<String> = synthetic.target.w_star.iter().map(|v| v.to_string()).collect();
            eprintln!("w* = [{}]", w.join(", "));
        }
        Command::Slope { input } => {
            let records = read_sweep_csv(&input)?;
            println!("method,slope");
            for (method, slope) in slopes_by_method(&records) {
                match slope {
                    Ok(s) => println!("{method},{s}"),
                    Err(e) => eprintln!("{method}: {e}"),
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Parse { .. } | Error::MissingLabel(_) = e {
                return ExitCode::from(2);
            }
            ExitCode::FAILURE
        }
    }
}
