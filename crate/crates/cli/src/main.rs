//! Batch front-end: simulate mixed noise, restore cubes, evaluate quality,
//! and dump mean profiles. Exit codes are a stable scripting contract:
//! 0 success, 2 usage, 3 I/O or file-format failure, 4 data validation
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use hsirestore::io::{self, Dtype, IoError};
use hsirestore::report::{self, RunReport};
use hsirestore_core::solver::{self, auto_ranks};
use hsirestore_core::{metrics, noise, ModelKind, NoiseSpec, ProfileAxis, SolverConfig, TVWeights};

#[derive(Parser)]
#[command(name = "hsirestore", version, about = "Mixed-noise hyperspectral cube restoration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corrupt a clean cube with one of the six mixed-noise cases.
    Simulate {
        /// Path stem of the clean input cube (reads <stem>.json + <stem>.bin).
        #[arg(long)]
        input: PathBuf,
        /// Noise case, 1..=6.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6))]
        case: u8,
        /// RNG seed.
        #[arg(long)]
        seed: u64,
        /// Path stem for the noisy cube; masks and the noise spec JSON are
        /// written next to it.
        #[arg(long)]
        output: PathBuf,
        /// Gaussian level override, as a standard deviation.
        #[arg(long)]
        sigma: Option<f64>,
        /// Impulse fraction override.
        #[arg(long)]
        impulse: Option<f64>,
        /// Deadline band window "a:b" (0-based, inclusive).
        #[arg(long, value_parser = parse_band_range)]
        deadline_bands: Option<(usize, usize)>,
        /// Stripe band window "a:b" (0-based, inclusive).
        #[arg(long, value_parser = parse_band_range)]
        stripe_bands: Option<(usize, usize)>,
    },
    /// Restore a noisy cube.
    Restore {
        #[arg(long)]
        input: PathBuf,
        /// Path stem for the restored cube; the sparse component and the run
        /// report are written next to it.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = ModelArg::Approx)]
        model: ModelArg,
        /// Multilinear rank "r1,r2,r3", or "auto" for (0.8h, 0.8w, 10).
        #[arg(long, default_value = "auto", value_parser = parse_ranks)]
        ranks: RanksArg,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long, default_value_t = 10.0)]
        lambda_c: f64,
        #[arg(long, default_value_t = 100.0)]
        beta: f64,
        /// TV weights "w1,w2,w3" (spectral, horizontal, vertical).
        #[arg(long, default_value = "1,1,1", value_parser = parse_weights)]
        weights: (f64, f64, f64),
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
    },
    /// Compare a test cube against a reference and write a metrics table.
    Evaluate {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// CSV output path.
        #[arg(long)]
        out: PathBuf,
        /// Also write <out>.json.
        #[arg(long)]
        json: bool,
    },
    /// Write the mean profile of one band as CSV.
    Profile {
        #[arg(long)]
        input: PathBuf,
        /// Band index, 0-based.
        #[arg(long)]
        band: usize,
        #[arg(long, value_enum)]
        axis: AxisArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    General,
    Approx,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Horizontal,
    Vertical,
}

#[derive(Clone, Copy)]
enum RanksArg {
    Auto,
    Explicit(usize, usize, usize),
}

fn parse_band_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected \"a:b\", got {s:?}"))?;
    let lo: usize = a.trim().parse().map_err(|e| format!("bad start {a:?}: {e}"))?;
    let hi: usize = b.trim().parse().map_err(|e| format!("bad end {b:?}: {e}"))?;
    if lo > hi {
        return Err(format!("start {lo} exceeds end {hi}"));
    }
    Ok((lo, hi))
}

fn parse_ranks(s: &str) -> Result<RanksArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(RanksArg::Auto);
    }
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected \"r1,r2,r3\" or \"auto\", got {s:?}"));
    }
    let mut r = [0usize; 3];
    for (dst, part) in r.iter_mut().zip(&parts) {
        *dst = part
            .trim()
            .parse()
            .map_err(|e| format!("bad rank {part:?}: {e}"))?;
    }
    Ok(RanksArg::Explicit(r[0], r[1], r[2]))
}

fn parse_weights(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected \"w1,w2,w3\", got {s:?}"));
    }
    let mut w = [0f64; 3];
    for (dst, part) in w.iter_mut().zip(&parts) {
        *dst = part
            .trim()
            .parse()
            .map_err(|e| format!("bad weight {part:?}: {e}"))?;
    }
    Ok((w[0], w[1], w[2]))
}

enum CliError {
    Usage(String),
    Io(IoError),
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Data(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => write!(f, "{m}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Io(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            input,
            case,
            seed,
            output,
            sigma,
            impulse,
            deadline_bands,
            stripe_bands,
        } => {
            let (clean, _) = io::read_cube(&input)?;
            let spec = NoiseSpec {
                case_id: case,
                seed,
                gaussian_sigma: sigma,
                impulse_fraction: impulse,
                deadline_band_range: deadline_bands,
                stripe_band_range: stripe_bands,
            };
            let (noisy, masks) =
                noise::apply_noise(&clean, &spec).map_err(|e| CliError::Data(e.to_string()))?;
            io::write_cube(&output, &noisy, Dtype::F64)?;
            io::write_cube(
                &report::stem_with_suffix(&output, ".impulse"),
                &masks.impulse,
                Dtype::F64,
            )?;
            io::write_cube(
                &report::stem_with_suffix(&output, ".deadline"),
                &masks.deadline,
                Dtype::F64,
            )?;
            io::write_cube(
                &report::stem_with_suffix(&output, ".stripe"),
                &masks.stripe,
                Dtype::F64,
            )?;
            report::write_json(
                &report::stem_with_suffix(&output, ".noisespec.json"),
                &spec,
            )?;
            Ok(())
        }
        Command::Restore {
            input,
            output,
            model,
            ranks,
            tau,
            lambda_c,
            beta,
            weights,
            eps,
            max_iter,
        } => {
            let (noisy, _) = io::read_cube(&input)?;
            if !noisy.all_finite() {
                return Err(CliError::Data(
                    "input cube contains non-finite samples".into(),
                ));
            }
            let ranks = match ranks {
                RanksArg::Auto => auto_ranks(noisy.shape()),
                RanksArg::Explicit(r1, r2, r3) => (r1, r2, r3),
            };
            let mut cfg = SolverConfig::new(ranks);
            cfg.model = match model {
                ModelArg::General => ModelKind::General,
                ModelArg::Approx => ModelKind::Approximate,
            };
            cfg.tau = tau;
            cfg.lambda_c = lambda_c;
            cfg.beta = beta;
            cfg.weights = TVWeights::new(weights.0, weights.1, weights.2)
                .map_err(|e| CliError::Data(e.to_string()))?;
            cfg.eps = eps;
            cfg.max_iter = max_iter;
            cfg.validate(noisy.shape())
                .map_err(|e| CliError::Data(e.to_string()))?;

            let start = Instant::now();
            let result =
                solver::restore(&noisy, &cfg).map_err(|e| CliError::Data(e.to_string()))?;
            let wall_seconds = start.elapsed().as_secs_f64();

            io::write_cube(&output, &result.restored, Dtype::F64)?;
            io::write_cube(
                &report::stem_with_suffix(&output, ".sparse"),
                &result.sparse,
                Dtype::F64,
            )?;
            if cfg.model == ModelKind::General {
                io::write_cube(
                    &report::stem_with_suffix(&output, ".gaussian"),
                    &result.gaussian,
                    Dtype::F64,
                )?;
            }
            let run_report = RunReport {
                tool_version: env!("CARGO_PKG_VERSION").to_owned(),
                config: cfg,
                input_shape: noisy.shape(),
                iterations: result.iterations,
                converged: result.converged,
                rel_change_history: result.rel_change_history,
                wall_seconds,
            };
            report::write_json(&report::stem_with_suffix(&output, ".report.json"), &run_report)?;
            Ok(())
        }
        Command::Evaluate {
            reference,
            test,
            out,
            json,
        } => {
            let (ref_cube, _) = io::read_cube(&reference)?;
            let (test_cube, _) = io::read_cube(&test)?;
            let metrics_report = metrics::evaluate(&ref_cube, &test_cube, 1.0)
                .map_err(|e| CliError::Data(e.to_string()))?;
            report::write_metrics_csv(&out, &metrics_report)?;
            if json {
                let mut json_path = out.clone().into_os_string();
                json_path.push(".json");
                report::write_json(&PathBuf::from(json_path), &metrics_report)?;
            }
            println!(
                "MPSNR={:.4} dB MSSIM={:.6} ERGAS={:.4}",
                metrics_report.mpsnr, metrics_report.mssim, metrics_report.ergas
            );
            Ok(())
        }
        Command::Profile {
            input,
            band,
            axis,
            out,
        } => {
            let (cube, _) = io::read_cube(&input)?;
            if band >= cube.bands() {
                return Err(CliError::Usage(format!(
                    "--band {band} out of range for {} bands",
                    cube.bands()
                )));
            }
            let axis = match axis {
                AxisArg::Horizontal => ProfileAxis::Horizontal,
                AxisArg::Vertical => ProfileAxis::Vertical,
            };
            let profile = metrics::mean_profile(&cube, band, axis)
                .map_err(|e| CliError::Data(e.to_string()))?;
            std::fs::write(&out, report::profile_to_csv(&profile)).map_err(|source| {
                CliError::Io(IoError::Io {
                    path: out.clone(),
                    source,
                })
            })?;
            Ok(())
        }
    }
}
