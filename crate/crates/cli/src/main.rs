use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

/// Tensor pooling with eigenvalue power normalization.
///
/// Exit codes: 0 pass, 1 verification failure, 2 input error, 3 domain
/// violation, 4 degenerate spectrum.
#[derive(Debug, Parser)]
#[command(name = "hotpn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pool a feature CSV into an order-r HOTP1 tensor.
    Pool {
        features: PathBuf,
        #[arg(short, long, default_value_t = 2)]
        order: usize,
        /// Subtract the column mean before pooling.
        #[arg(long)]
        center: bool,
        /// Ignore a `weight` column if present.
        #[arg(long)]
        unweighted: bool,
        #[arg(short = 'O', long)]
        out: PathBuf,
    },
    /// Apply EPN to an order-2 or order-3 HOTP1 tensor.
    Epn {
        tensor: PathBuf,
        /// Operator as `kind:param`, e.g. `sigme:4`, `maxexp:20`, `grassmann:3`.
        #[arg(long, value_parser = commands::parse_spec)]
        spec: hotpn::PnSpec,
        /// Divide the spectrum by the sum of absolute eigenvalues first.
        #[arg(long)]
        normalize: bool,
        #[arg(short = 'O', long)]
        out: PathBuf,
    },
    /// Distance between two HOTP1 tensors.
    Distance {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value_t = Metric::Tpe)]
        metric: Metric,
        /// Operator used by the tpe metric.
        #[arg(long, value_parser = commands::parse_spec, default_value = "sigme:4")]
        spec: hotpn::PnSpec,
        #[arg(long)]
        normalize: bool,
    },
    /// Certify a bound or residual on a grid; prints a JSON report.
    Verify {
        #[arg(long, value_enum)]
        theorem: Theorem,
        /// η values (comma separated) for 2, gaps and combined.
        #[arg(long, value_delimiter = ',')]
        eta: Vec<f64>,
        /// t values (comma separated) for 3.
        #[arg(long, value_delimiter = ',')]
        t: Vec<f64>,
        /// λ grid step.
        #[arg(long, default_value_t = hotpn::analysis::DEFAULT_STEP)]
        step: f64,
        /// Parametrize the upper-bounding operator from s·t instead of t.
        #[arg(long, default_value_t = 1.0)]
        t_scale: f64,
        /// Write grid CSVs here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Check an analytic gradient against finite differences.
    Gradcheck {
        #[arg(long)]
        op: String,
        #[arg(long, default_value_t = 5)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Operator for `epn_vjp`.
        #[arg(long, value_parser = commands::parse_spec)]
        spec: Option<hotpn::PnSpec>,
    },
    /// Emit figure data as two-column CSVs.
    Figure {
        #[arg(long, value_enum)]
        which: Figure,
        #[arg(short = 'O', long)]
        out_dir: PathBuf,
        #[arg(long)]
        svg: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// η for fig1 (MaxExp power) and fig4b (trials).
        #[arg(long)]
        eta: Option<f64>,
        /// Spectrum samples for fig1.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        /// Grid points for fig2 and fig4b.
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
    /// Count-sketch every row of a feature CSV.
    Sketch {
        features: PathBuf,
        #[arg(long)]
        dprime: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Reuse a plan JSON instead of `--dprime`/`--seed`.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(short = 'O', long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Metric {
    Tpe,
    Frobenius,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Theorem {
    #[value(name = "2")]
    MaxExp,
    #[value(name = "3")]
    Gamma,
    #[value(name = "4")]
    OdeMaxExp,
    #[value(name = "5")]
    OdeGamma,
    Gaps,
    Combined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Figure {
    Fig1,
    Fig2,
    Fig4b,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Pool {
            features,
            order,
            center,
            unweighted,
            out,
        } => commands::pool(&features, order, center, unweighted, &out),
        Command::Epn {
            tensor,
            spec,
            normalize,
            out,
        } => commands::epn(&tensor, &spec, normalize, &out),
        Command::Distance {
            a,
            b,
            metric,
            spec,
            normalize,
        } => commands::distance(&a, &b, (metric == Metric::Tpe).then_some(&spec), normalize),
        Command::Verify {
            theorem,
            eta,
            t,
            step,
            t_scale,
            out_dir,
        } => {
            let which = match theorem {
                Theorem::MaxExp => commands::VerifyTarget::MaxExp,
                Theorem::Gamma => commands::VerifyTarget::Gamma,
                Theorem::OdeMaxExp => commands::VerifyTarget::OdeMaxExp,
                Theorem::OdeGamma => commands::VerifyTarget::OdeGamma,
                Theorem::Gaps => commands::VerifyTarget::Gaps,
                Theorem::Combined => commands::VerifyTarget::Combined,
            };
            commands::verify(which, &eta, &t, step, t_scale, out_dir.as_deref())
        }
        Command::Gradcheck { op, d, seed, spec } => commands::gradcheck(&op, d, seed, spec.as_ref()),
        Command::Figure {
            which,
            out_dir,
            svg,
            seed,
            eta,
            samples,
            bins,
            points,
        } => {
            let opts = commands::FigureOptions {
                seed,
                eta,
                samples,
                bins,
                points,
                svg,
            };
            match which {
                Figure::Fig1 => commands::fig1(&out_dir, &opts),
                Figure::Fig2 => commands::fig2(&out_dir, &opts),
                Figure::Fig4b => commands::fig4b(&out_dir, &opts),
            }
        }
        Command::Sketch {
            features,
            dprime,
            seed,
            plan,
            out,
        } => commands::sketch(&features, dprime, seed, plan.as_deref(), &out),
    };
    match result {
        Ok(commands::Outcome::Pass) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
