use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use lmq::bounds::{minimax_lower_bound, upper_bound, BoundParams};
use lmq::codes::{CodeConfig, CodeKind, CodeRegistry, DesignMatrix};
use lmq::frames::FrameKind;
use lmq::nn::{quantize_net, TwoLayerNet};
use lmq::simkit::{emit_csv, emit_svg, run_experiment, ExperimentConfig};
use lmq::{io, Error, Result};

#[derive(Parser)]
#[command(name = "lmq", version, about = "Quantize linear models under a bit budget")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the minimax lower bound, or a code's guarantee with --code.
    #[command(allow_negative_numbers = true)]
    Bound {
        #[arg(long = "B", default_value_t = f64::INFINITY)]
        bits: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        c: f64,
        #[arg(long = "sigma-min")]
        sigma_min: f64,
        #[arg(long = "sigma-max")]
        sigma_max: f64,
        /// Infinite-budget limit (ignores --B).
        #[arg(long)]
        limit: bool,
        /// naive, rcm, dq or ndq.
        #[arg(long)]
        code: Option<CodeKind>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long = "k-upper")]
        k_upper: Option<f64>,
    },
    /// Run a Monte-Carlo experiment described by a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long = "log-y")]
        log_y: bool,
        /// Master seed; overrides the config's.
        #[arg(long)]
        seed: u64,
    },
    /// Quantize one observation vector with a learning code.
    Quantize {
        #[arg(long)]
        code: String,
        /// Observation vector X (text vector file).
        #[arg(long = "in")]
        input: PathBuf,
        /// Design matrix W (text matrix file); identity when omitted.
        #[arg(long = "W")]
        design: Option<PathBuf>,
        #[arg(long = "B")]
        bits: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long)]
        frame: Option<FrameKind>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write θ̃ (text vector file).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quantize a two-layer ReLU network.
    Nn {
        #[arg(long)]
        net: PathBuf,
        #[arg(long = "B")]
        bits: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        report: PathBuf,
        /// Where to write the quantized network.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bound { bits, sigma, c, sigma_min, sigma_max, limit, code, d, lambda, k_upper } => {
            let bits = if limit { f64::INFINITY } else { bits };
            let mut p = BoundParams::new(bits, sigma, c, sigma_min, sigma_max);
            p.d = d;
            p.lambda = lambda;
            p.k_upper = k_upper;
            let value = match code {
                Some(kind) => upper_bound(kind, &p)?,
                None => minimax_lower_bound(&p)?,
            };
            println!("{value}");
        }
        Command::Simulate { config, out, svg, log_y, seed } => {
            let mut cfg = ExperimentConfig::from_json(&std::fs::read_to_string(&config)?)?;
            cfg.master_seed = seed;
            let curve = run_experiment(&cfg)?;
            emit_csv(&curve, &out)?;
            if let Some(path) = svg {
                emit_svg(&curve, &path, log_y)?;
            }
        }
        Command::Quantize { code, input, design, bits, c, sigma, lambda, frame, seed, out } => {
            let x = io::read_vector(&input)?;
            let dm = match design {
                Some(path) => DesignMatrix::from_matrix(io::read_matrix(&path)?)?,
                None => DesignMatrix::identity(x.len())?,
            };
            if dm.n() != x.len() {
                return Err(Error::DimensionMismatch { expected: dm.n(), actual: x.len() });
            }
            let mut cfg = CodeConfig::new(bits, c, sigma).with_seed(seed);
            cfg.lambda = lambda;
            cfg.frame_kind = frame;
            let code = CodeRegistry::with_builtin().build(&code, &cfg, dm.d())?;
            let result = code.quantize(&x, &dm)?;
            if let Some(path) = out {
                io::write_vector(&path, &result.theta_tilde)?;
            }
            let summary = json!({
                "code": code.kind().name(),
                "direction_bits": result.direction_bits,
                "magnitude_bits": result.magnitude_bits,
                "total_bits": result.total_bits,
                "btilde_sq": result.btilde_sq,
                "scaling": result.scaling,
                "zero_observation": result.zero_observation,
                "theta_tilde": result.theta_tilde,
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Nn { net, bits, seed, report, out } => {
            let net = TwoLayerNet::load(&net)?;
            let (quantized, summary) = quantize_net(&net, bits, seed)?;
            std::fs::write(&report, serde_json::to_string_pretty(&summary)?)?;
            if let Some(path) = out {
                quantized.save(&path)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_numerical() { 3 } else { 2 })
        }
    }
}
