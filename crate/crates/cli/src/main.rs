//! `nett` command line: runs one pipeline stage per invocation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nett_core::harness::{self, RunConfig};
use nett_core::NettError;

#[derive(Parser)]
#[command(name = "nett", version, about = "NETT reconstruction experiments for masked photoacoustic tomography")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overrides `run.out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Use `(A^T A - s I)^{-1}` in the backward step.
    #[arg(long, global = true)]
    paper_sign: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Assemble, mask and truncate the forward operator.
    BuildOperator,
    /// Generate training pairs, test phantoms and the out-of-distribution phantom.
    GenPhantoms,
    /// Train the regularizer network.
    Train,
    /// NETT reconstructions of the test phantoms at every noise level.
    Reconstruct,
    /// Mean MSE of NETT, post-processing and pseudo-inverse per noise level.
    NoiseSweep,
    /// Compare all methods on the out-of-distribution phantom.
    OodCompare,
    /// Convergence-rate experiment and discretization ladder.
    RateStudy,
}

/// 2 for configuration errors, 3 for numerical failures, 1 otherwise.
fn exit_code(err: &NettError) -> u8 {
    match err {
        e if e.is_config_error() => 2,
        NettError::InsufficientPoints { .. } => 2,
        NettError::NonFinite(_)
        | NettError::SvdFailed
        | NettError::OperatorAnnihilated { .. }
        | NettError::SamplingFailure { .. } => 3,
        _ => 1,
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, NettError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.training.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if cli.paper_sign {
        cfg.solver.paper_sign = true;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), NettError> {
    let cfg = load_config(cli)?;
    match cli.command {
        Command::BuildOperator => println!("{}", harness::cmd_build_operator(&cfg)?),
        Command::GenPhantoms => {
            let c = harness::cmd_gen_phantoms(&cfg)?;
            println!("{} training pairs, {} test phantoms", c.train, c.test);
        }
        Command::Train => {
            let log = harness::cmd_train(&cfg)?;
            if let Some(last) = log.last() {
                println!(
                    "epoch {}: train loss {:e}, holdout loss {:e}",
                    last.epoch, last.train_loss, last.holdout_loss
                );
            }
        }
        Command::Reconstruct => {
            let rec = harness::cmd_reconstruct(&cfg)?;
            for (k, errs) in rec.mse.iter().enumerate() {
                let mean = errs.iter().sum::<f64>() / errs.len() as f64;
                println!("sigma {}: mean NETT MSE {mean:e}", cfg.experiment.noise_levels[k]);
            }
        }
        Command::NoiseSweep => {
            println!("sigma,alpha,nett,post,pinv");
            for r in harness::cmd_noise_sweep(&cfg)? {
                println!("{},{},{:e},{:e},{:e}", r.sigma, r.alpha, r.mse_nett, r.mse_post, r.mse_pinv);
            }
        }
        Command::OodCompare => {
            println!("method,sigma,mse,residual");
            for r in harness::cmd_ood_compare(&cfg)?.rows {
                println!("{},{},{:e},{:e}", r.method, r.sigma, r.mse, r.residual);
            }
        }
        Command::RateStudy => print!("{}", harness::cmd_rate_study(&cfg)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&NettError::Config { line: 3, message: "x".into() }), 2);
        assert_eq!(exit_code(&NettError::InvalidParameter("x".into())), 2);
        assert_eq!(exit_code(&NettError::InsufficientPoints { needed: 3, got: 1 }), 2);
        assert_eq!(exit_code(&NettError::NonFinite("x".into())), 3);
        assert_eq!(exit_code(&NettError::SamplingFailure { level: 16, bound: 1.0 }), 3);
        assert_eq!(exit_code(&NettError::MissingArtifact("x".into())), 1);
    }

    #[test]
    fn cli_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
