use clap::Parser;
use cutmesh_cli::config::{parse_rank_flag, RunConfig};
use cutmesh_cli::{execute, run_experiment, CliOverrides};
use std::path::PathBuf;
use std::process::ExitCode;

/// Immersed finite element preprocessor: tessellates a structured
/// background mesh against implicit geometries and emits enriched
/// integration clusters.
#[derive(Parser, Debug)]
#[command(name = "cutmesh", version, about)]
struct Args {
    /// Run configuration file (TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Rank grid, e.g. 2x2 (overrides the config).
    #[arg(long, value_name = "RXxRY[xRZ]")]
    ranks: Option<String>,

    /// Write the foreground mesh as legacy VTK.
    #[arg(long, value_name = "PATH")]
    export_mesh: Option<PathBuf>,

    /// Write the cluster dump.
    #[arg(long, value_name = "PATH")]
    export_clusters: Option<PathBuf>,

    /// Run a built-in experiment instead of a configured pipeline:
    /// multibeam | brickwall | ghost | scaling.
    #[arg(long, value_name = "NAME")]
    experiment: Option<String>,

    /// Random seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,

    /// Print the stage plan without executing.
    #[arg(long)]
    dry_run: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(args: Args) -> cutmesh::Result<String> {
    if let Some(name) = &args.experiment {
        return run_experiment(name, args.seed.unwrap_or(7));
    }
    let config_path = args.config.ok_or_else(|| {
        cutmesh::Error::config("either --config or --experiment is required")
    })?;
    let cfg = RunConfig::load(&config_path)?;
    let base_dir = config_path
        .parent()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    let overrides = CliOverrides {
        ranks: args.ranks.as_deref().map(parse_rank_flag).transpose()?,
        seed: args.seed,
        export_mesh: args.export_mesh,
        export_clusters: args.export_clusters,
        dry_run: args.dry_run,
    };
    execute(&cfg, &base_dir, &overrides)
}
