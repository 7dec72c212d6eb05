use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, bail};
use clap::{Args, Parser, Subcommand};

use nematic::analysis::spectrum::stokes_oracle;
use nematic::analysis::{Block, SpectrumMethod, assemble_linearization, spectrum};
use nematic::harness::{RunOptions, ScenarioConfig, ScenarioKind, refinement_study, run_scenario};

#[derive(Parser)]
#[command(name = "nematic", version, about = "Nematic liquid-crystal flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write diagnostics.csv and summary.jsonl.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
        snapshots: bool,
    },
    /// Refinement study; writes refinement.csv.
    Refine {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Eigenvalues of the linearization at the configured grid.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "full-diag")]
        block: BlockArg,
        #[arg(long, default_value = "auto")]
        method: MethodArg,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Steady director flow from the configured initial director.
    Steady {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum BlockArg {
    Stokes,
    Neumann,
    FullDiag,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MethodArg {
    Auto,
    Dense,
    Inverse,
}

fn load(common: &Common) -> anyhow::Result<ScenarioConfig> {
    let mut cfg =
        ScenarioConfig::load(&common.config).with_context(|| format!("loading {}", common.config.display()))?;
    if let Some(seed) = common.seed {
        cfg.scenario.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(common: &Common) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn print_verdicts(summary: &nematic::harness::RunSummary) {
    for (name, v) in &summary.verdicts {
        println!("{:<18} {:?}  measured {:.3e}  threshold {:.3e}", name, v.status, v.measured, v.threshold);
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    std::fs::create_dir_all(path.parent().unwrap_or(Path::new(".")))?;
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { common, snapshots } => {
            let cfg = load(&common)?;
            let dir = out_dir(&common);
            let opts = RunOptions { out_dir: Some(dir.clone()), snapshots, analysis: true };
            let summary = run_scenario(&cfg, &opts)?;
            println!("{} steps to t = {:.6}, E = {:.6e}, {:.1}s", summary.steps, summary.t_final, summary.final_energy, summary.wall_time);
            print_verdicts(&summary);
            println!("outputs in {}", dir.display());
            Ok(summary.all_passed())
        }
        Command::Refine { common, levels } => {
            let cfg = load(&common)?;
            let dir = out_dir(&common);
            let table = refinement_study(&cfg, levels)?;
            std::fs::create_dir_all(&dir)?;
            table.write_csv(&dir.join("refinement.csv"))?;
            print!("{}", table.to_csv());
            Ok(true)
        }
        Command::Spectrum { common, block, method, k } => {
            let cfg = load(&common)?;
            let grid = cfg.grid()?;
            let block = match block {
                BlockArg::Stokes => Block::Stokes,
                BlockArg::Neumann => Block::NeumannLaplacian,
                BlockArg::FullDiag => Block::FullDiag,
            };
            let method = match method {
                MethodArg::Auto => SpectrumMethod::Auto,
                MethodArg::Dense => SpectrumMethod::Dense,
                MethodArg::Inverse => SpectrumMethod::InverseIteration,
            };
            let op = assemble_linearization(&grid, &cfg.params, block)?;
            let report = spectrum(&op, k.unwrap_or(cfg.scenario.spectrum_k), 1e-8, method)?;
            println!("kernel dim {}  gap {:.10e}", report.kernel_dim, report.gap);
            for (i, ev) in report.eigenvalues.iter().enumerate() {
                println!("{i:>4} {ev:.12e}");
            }
            if matches!(block, Block::Stokes) {
                let oracle = stokes_oracle(grid.lx(), grid.ly(), &cfg.params)?;
                println!("stokes oracle (extrapolated) {:.10e}", oracle.extrapolated);
            }
            if let Some(dir) = &common.out {
                write_json(&dir.join("spectrum.json"), &report)?;
            }
            Ok(true)
        }
        Command::Steady { common } => {
            let cfg = load(&common)?;
            if cfg.scenario.kind != ScenarioKind::SteadyNlevp {
                bail!("steady needs a steady_nlevp config, got {:?}", cfg.scenario.kind);
            }
            let dir = out_dir(&common);
            let summary = run_scenario(&cfg, &RunOptions::to_dir(&dir))?;
            println!(
                "{} iterations, max |grad d| = {:.3e}",
                summary.steady_iterations.unwrap_or(0),
                summary.steady_max_gradient.unwrap_or(0.0)
            );
            print_verdicts(&summary);
            Ok(summary.all_passed())
        }
    }
}
