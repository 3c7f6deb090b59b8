//! `baflow`: runs the flow, spectral and model experiments and writes their
//! data with a checksummed manifest.

mod cmd;
mod config;
mod error;
mod output;

use clap::{Parser, Subcommand};

use crate::cmd::{dynamics, ext, gaussian, models, verify, Outcome};
use crate::config::GlobalArgs;
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "baflow", version, about = "Blahut-Arimoto gradient-flow laboratory")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the flow and export the trajectory.
    Flow(dynamics::FlowParams),
    /// Iterate the BA map to a certified fixed point.
    FixedPoint(dynamics::FixedPointParams),
    /// Check the exact chi-square dissipation identity along a trajectory.
    DissipationCheck(dynamics::DissipationParams),
    /// Gram-kernel and relaxation spectra at the fixed point.
    Spectrum(dynamics::SpectrumParams),
    /// Compare the BA linearization with the Fisher-Rao gradient flow.
    FrCompare(dynamics::FrCompareParams),
    /// Gaussian source with quadratic distortion.
    #[command(subcommand)]
    Gaussian(GaussianCommand),
    /// Solvable finite models.
    #[command(subcommand)]
    Model(ModelCommand),
    /// Water-filling over parallel Gaussian channels.
    Mimo(ext::MimoParams),
    /// Gaussian coding with decoder side information.
    Wz(ext::WzParams),
    /// Run the acceptance suite.
    VerifyAll(verify::VerifyParams),
}

#[derive(Subcommand)]
enum GaussianCommand {
    /// Variance phase portraits.
    Phase(gaussian::PhaseParams),
    /// Hermite eigenvalues and the relaxation time.
    Spectrum(gaussian::SpectrumParams),
    /// Compare a discretized Gaussian problem with the exact reduction.
    GridCheck(gaussian::GridCheckParams),
    /// Constants of the uniform second-moment bound.
    MomentBound(gaussian::MomentBoundParams),
}

#[derive(Subcommand)]
enum ModelCommand {
    /// Two-point gap surface.
    TwoPoint(models::TwoPointParams),
    /// Reduced three-cluster spectrum.
    ThreeCluster(models::ThreeClusterParams),
    /// Three-cluster convergence run with the bound line.
    TwoScale(models::TwoScaleParams),
}

fn dispatch(cli: Cli) -> CliResult<Outcome> {
    let loaded = config::load(&cli.global)?;
    if let Some(jobs) = loaded.global.jobs {
        if jobs == 0 {
            return Err(CliError::Validation("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    let g = &loaded.global;
    let file = loaded.params.as_ref();
    match cli.command {
        Command::Flow(p) => dynamics::flow(g, &config::layer(&p, file, "params")?),
        Command::FixedPoint(p) => dynamics::fixed_point(g, &config::layer(&p, file, "params")?),
        Command::DissipationCheck(p) => dynamics::dissipation_check(g, &config::layer(&p, file, "params")?),
        Command::Spectrum(p) => dynamics::spectrum(g, &config::layer(&p, file, "params")?),
        Command::FrCompare(p) => dynamics::fr_compare(g, &config::layer(&p, file, "params")?),
        Command::Gaussian(GaussianCommand::Phase(p)) => gaussian::phase(g, &config::layer(&p, file, "params")?),
        Command::Gaussian(GaussianCommand::Spectrum(p)) => gaussian::spectrum(g, &config::layer(&p, file, "params")?),
        Command::Gaussian(GaussianCommand::GridCheck(p)) => gaussian::grid_check(g, &config::layer(&p, file, "params")?),
        Command::Gaussian(GaussianCommand::MomentBound(p)) => {
            gaussian::moment_bound(g, &config::layer(&p, file, "params")?)
        }
        Command::Model(ModelCommand::TwoPoint(p)) => models::two_point(g, &config::layer(&p, file, "params")?),
        Command::Model(ModelCommand::ThreeCluster(p)) => models::three_cluster(g, &config::layer(&p, file, "params")?),
        Command::Model(ModelCommand::TwoScale(p)) => models::two_scale(g, &config::layer(&p, file, "params")?),
        Command::Mimo(p) => ext::mimo(g, &config::layer(&p, file, "params")?),
        Command::Wz(p) => ext::wz(g, &config::layer(&p, file, "params")?),
        Command::VerifyAll(p) => verify::verify_all(g, &config::layer(&p, file, "params")?),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match dispatch(cli) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            println!("manifest: {}", outcome.manifest.display());
            if !outcome.failed.is_empty() {
                let err = CliError::numerical(outcome.failed.join(", "), "tolerance exceeded");
                eprintln!("baflow: {err}");
                std::process::exit(err.exit_code());
            }
        }
        Err(e) => {
            eprintln!("baflow: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
