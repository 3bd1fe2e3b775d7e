use std::path::PathBuf;
use std::process::ExitCode;

use besov_dirichlet::experiments::listing;
use besov_dirichlet::{execute, Flags, Selector, EXIT_CONFIG};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "besov-dirichlet",
    version,
    about = "Besov-space estimate laboratory for the discrete Dirichlet Laplacian"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; its keys override the flags below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (falls back to BESOV_OUT, then ./besov-out).
    #[arg(long, global = true, env = "BESOV_OUT")]
    out: Option<PathBuf>,
    /// Ensemble seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Partition-of-unity deviation over the spectral range.
    CheckPartition,
    /// Computed spectrum against the closed form.
    CheckEigen,
    /// Block reconstruction error on the ensemble.
    CheckReconstruction,
    /// Block kernel norms against brute force, probes and witness.
    CheckKernelNorm,
    /// Normalised norms of H^alpha times blocks and low-passes.
    ScanBernstein,
    /// Normalised gradient norms of blocks, low-passes or heat flow.
    ScanGradient,
    /// Paraproduct split residual and term bounds.
    CheckParaproduct,
    /// Off-diagonal contributions for k - j < -2.
    ScanCaseB,
    /// Leibniz residual under grid refinement.
    CheckLeibniz,
    /// Homogeneous bilinear ratio per s.
    ScanBilinear,
    /// Inhomogeneous bilinear ratio per s.
    ScanBilinearInhom,
    /// Large-regularity chain on heat-evolved data.
    ProbeAppendixA,
    /// Besov norms of H + V against H.
    ScanSchrodinger,
    /// Every experiment in registry order.
    All,
    /// Print the selectors with descriptions and anchors.
    List,
}

impl Command {
    fn selector(&self) -> Option<Selector> {
        let name = match self {
            Command::List => return None,
            Command::All => return Some(Selector::All),
            Command::CheckPartition => "check-partition",
            Command::CheckEigen => "check-eigen",
            Command::CheckReconstruction => "check-reconstruction",
            Command::CheckKernelNorm => "check-kernel-norm",
            Command::ScanBernstein => "scan-bernstein",
            Command::ScanGradient => "scan-gradient",
            Command::CheckParaproduct => "check-paraproduct",
            Command::ScanCaseB => "scan-case-b",
            Command::CheckLeibniz => "check-leibniz",
            Command::ScanBilinear => "scan-bilinear",
            Command::ScanBilinearInhom => "scan-bilinear-inhom",
            Command::ProbeAppendixA => "probe-appendix-a",
            Command::ScanSchrodinger => "scan-schrodinger",
        };
        Some(Selector::One(name.to_string()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let Some(selector) = cli.command.selector() else {
        print!("{}", listing());
        return ExitCode::SUCCESS;
    };
    let Some(config) = cli.config else {
        eprintln!("error: --config <path> is required for this subcommand");
        return ExitCode::from(EXIT_CONFIG);
    };
    let flags = Flags {
        out: cli.out,
        seed: cli.seed,
    };
    match execute(&selector, &config, &flags, cli.threads) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
