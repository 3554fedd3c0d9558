//! `gmm-diag` command line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error, 3 fit failure.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gmm_diag::bench::{parse_thread_list, run_bench};
use gmm_diag::io::{load_csv, save_csv, write_csv};
use gmm_diag::parallel::default_threads;
use gmm_diag::{AssignMode, Dataset, DistKind, FitConfig, GmmError, GmmModel, SeedMode, SynthSpec, Workers};

#[derive(Parser)]
#[command(name = "gmm-diag", version, about = "Diagonal-covariance Gaussian mixture models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct FitArgs {
    /// Number of gaussians.
    #[arg(long)]
    gaussians: usize,
    /// Distance used for seeding and k-means.
    #[arg(long, value_enum, default_value = "maha")]
    dist: Dist,
    #[arg(long, value_enum, default_value = "random-subset")]
    seed_mode: Seed,
    #[arg(long, default_value_t = 10)]
    km_iters: usize,
    #[arg(long, default_value_t = 5)]
    em_iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    var_floor: f64,
    /// Relative likelihood gain below which EM stops.
    #[arg(long, default_value_t = 1e-10)]
    em_rel_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print one line per k-means/EM iteration to stderr.
    #[arg(long)]
    print_progress: bool,
}

impl FitArgs {
    fn config(&self, threads: usize) -> FitConfig {
        FitConfig {
            n_gaus: self.gaussians,
            dist: match self.dist {
                Dist::Eucl => DistKind::Eucl,
                Dist::Maha => DistKind::Maha,
            },
            seed_mode: match self.seed_mode {
                Seed::KeepExisting => SeedMode::KeepExisting,
                Seed::StaticSubset => SeedMode::StaticSubset,
                Seed::RandomSubset => SeedMode::RandomSubset,
                Seed::StaticSpread => SeedMode::StaticSpread,
                Seed::RandomSpread => SeedMode::RandomSpread,
            },
            km_iter: self.km_iters,
            em_iter: self.em_iters,
            var_floor: self.var_floor,
            n_threads: threads,
            rng_seed: self.seed,
            em_rel_tol: self.em_rel_tol,
            print_mode: self.print_progress,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a CSV dataset and write it to a model file.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Starting model, required with --seed-mode keep-existing.
        #[arg(long)]
        init_model: Option<PathBuf>,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, default_value_t = default_threads())]
        threads: usize,
    },
    /// Print the average log-likelihood of a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Score against this gaussian alone.
        #[arg(long)]
        gaussian: Option<usize>,
        #[arg(long, default_value_t = default_threads())]
        threads: usize,
    },
    /// Print the closest gaussian of each sample, one per line.
    Assign {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "prob")]
        mode: Mode,
        #[arg(long, default_value_t = default_threads())]
        threads: usize,
    },
    /// Print `g,count,frac` for each gaussian.
    Hist {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "prob")]
        mode: Mode,
        #[arg(long, default_value_t = default_threads())]
        threads: usize,
    },
    /// Draw samples from a model file.
    Generate {
        #[arg(long)]
        model: PathBuf,
        #[arg(short = 'n', long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write a synthetic CSV dataset.
    Synth {
        #[arg(long, value_enum, conflicts_with = "spec")]
        preset: Option<Preset>,
        /// JSON mixture description.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(short = 'n', long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dimensionality of the `clusters` preset.
        #[arg(long, default_value_t = 32)]
        dims: usize,
        /// Number of clusters of the `clusters` preset.
        #[arg(long, default_value_t = 20)]
        clusters: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Time identical fits over a list of thread counts; prints `threads,seconds,speedup`.
    Bench {
        #[arg(long, conflicts_with = "preset")]
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Samples drawn from the preset.
        #[arg(short = 'n', long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 32)]
        dims: usize,
        #[arg(long, default_value_t = 20)]
        clusters: usize,
        #[arg(long, default_value = "1,2,4")]
        threads_list: String,
        #[command(flatten)]
        fit: FitArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Dist {
    Eucl,
    Maha,
}

#[derive(Clone, Copy, ValueEnum)]
enum Seed {
    KeepExisting,
    StaticSubset,
    RandomSubset,
    StaticSpread,
    RandomSpread,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Eucl,
    Prob,
}

impl From<Mode> for AssignMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Eucl => AssignMode::EuclDist,
            Mode::Prob => AssignMode::ProbDist,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Two 5-d unit-variance clusters, weighted 2:1.
    Fig1,
    /// Equally weighted random clusters (`--dims`, `--clusters`).
    Clusters,
}

fn preset_data(preset: Preset, n: usize, seed: u64, dims: usize, clusters: usize) -> gmm_diag::Result<Dataset> {
    let spec = match preset {
        Preset::Fig1 => SynthSpec::two_cluster(),
        Preset::Clusters => SynthSpec::random_clusters(dims, clusters, seed)?,
    };
    Ok(spec.sample(n, seed)?.0)
}

fn write_dataset(data: &Dataset, output: Option<&PathBuf>) -> gmm_diag::Result<()> {
    match output {
        Some(path) => save_csv(data, path),
        None => write_csv(data, io::stdout().lock()),
    }
}

fn run(cli: Cli) -> gmm_diag::Result<()> {
    let mut out = io::stdout().lock();
    let out_err = |e: io::Error| GmmError::Io {
        path: "<stdout>".into(),
        source: e,
    };
    match cli.command {
        Command::Fit {
            input,
            output,
            init_model,
            fit,
            threads,
        } => {
            let data = load_csv(&input)?;
            let config = fit.config(threads);
            let mut model = match (&init_model, config.seed_mode) {
                (Some(path), SeedMode::KeepExisting) => GmmModel::load(path)?,
                (None, SeedMode::KeepExisting) => {
                    return Err(GmmError::InvalidArgument(
                        "--seed-mode keep-existing requires --init-model".into(),
                    ))
                }
                (Some(_), _) => {
                    return Err(GmmError::InvalidArgument(
                        "--init-model is only used with --seed-mode keep-existing".into(),
                    ))
                }
                (None, _) => GmmModel::reset(data.n_dims(), config.n_gaus.max(1))?,
            };
            let report = model.learn(&data, &config)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            model.save(&output)?;
            let avg = match report.final_avg_log_p() {
                Some(v) => v,
                None => model.avg_log_p_with(&data, &Workers::new(threads)?)?,
            };
            writeln!(out, "avg_log_p {avg:.16e}").map_err(out_err)?;
            writeln!(out, "iterations km={} em={}", report.km_iterations, report.em_iterations).map_err(out_err)?;
            writeln!(out, "seconds km={:.6} em={:.6}", report.km_seconds, report.em_seconds).map_err(out_err)?;
        }
        Command::Eval {
            model,
            input,
            gaussian,
            threads,
        } => {
            let model = GmmModel::load(&model)?;
            let data = load_csv(&input)?;
            let avg = match gaussian {
                Some(g) => model.avg_log_p_comp(&data, g)?,
                None => model.avg_log_p_with(&data, &Workers::new(threads)?)?,
            };
            writeln!(out, "{avg:.16e}").map_err(out_err)?;
        }
        Command::Assign {
            model,
            input,
            mode,
            threads,
        } => {
            let model = GmmModel::load(&model)?;
            let data = load_csv(&input)?;
            let ids = model.assign_batch_with(&data, mode.into(), &Workers::new(threads)?)?;
            let mut buf = io::BufWriter::new(out);
            for g in ids {
                writeln!(buf, "{g}").map_err(out_err)?;
            }
            buf.flush().map_err(out_err)?;
        }
        Command::Hist {
            model,
            input,
            mode,
            threads,
        } => {
            let model = GmmModel::load(&model)?;
            let data = load_csv(&input)?;
            let ids = model.assign_batch_with(&data, mode.into(), &Workers::new(threads)?)?;
            let mut counts = vec![0usize; model.n_gaus()];
            ids.iter().for_each(|&g| counts[g] += 1);
            let n = data.n_samples() as f64;
            for (g, c) in counts.iter().enumerate() {
                writeln!(out, "{g},{c},{:.16e}", *c as f64 / n).map_err(out_err)?;
            }
        }
        Command::Generate {
            model,
            n,
            seed,
            output,
        } => {
            let data = GmmModel::load(&model)?.generate(n, seed)?;
            write_dataset(&data, output.as_ref())?;
        }
        Command::Synth {
            preset,
            spec,
            n,
            seed,
            dims,
            clusters,
            output,
        } => {
            let data = match (preset, spec) {
                (Some(p), None) => preset_data(p, n, seed, dims, clusters)?,
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| GmmError::Io { path, source: e })?;
                    SynthSpec::from_json(&text)?.sample(n, seed)?.0
                }
                _ => return Err(GmmError::InvalidArgument("give exactly one of --preset or --spec".into())),
            };
            write_dataset(&data, output.as_ref())?;
        }
        Command::Bench {
            input,
            preset,
            n,
            dims,
            clusters,
            threads_list,
            fit,
        } => {
            let threads = parse_thread_list(&threads_list)?;
            let data = match (input, preset) {
                (Some(path), None) => load_csv(&path)?,
                (None, p) => preset_data(p.unwrap_or(Preset::Clusters), n, fit.seed, dims, clusters)?,
                _ => unreachable!("clap rejects --input with --preset"),
            };
            let rows = run_bench(&data, &fit.config(1), &threads)?;
            writeln!(out, "threads,seconds,speedup").map_err(out_err)?;
            for r in &rows {
                writeln!(out, "{},{:.6},{:.4}", r.threads, r.seconds, r.speedup).map_err(out_err)?;
                eprintln!(
                    "threads {:>3}  kmeans share {:>5.1}%  final avg_log_p {:.16e}",
                    r.threads,
                    100.0 * r.km_share(),
                    r.final_avg_log_p
                );
            }
            if rows.windows(2).any(|w| w[0].final_avg_log_p.to_bits() != w[1].final_avg_log_p.to_bits()) {
                eprintln!("warning: final log-likelihood differs between thread counts");
            }
        }
    }
    Ok(())
}

fn exit_code(e: &GmmError) -> u8 {
    match e {
        GmmError::InvalidArgument(_) => 1,
        e if e.is_fit_failure() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
