use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lhs_core::config::{RunConfig, Settings};
use lhs_core::engine::sweep::{distance_profile, drop_radius_sweep, hcg_sweep};
use lhs_core::engine::SweepTable;
use lhs_core::linkchar::{build_threshold_set, load_threshold_set};
use lhs_core::{Error, Result};

/// Local and hyper-local multicast simulator.
#[derive(Parser)]
#[command(name = "lhs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate link curves and cache the 1% BLER thresholds.
    Linkchar {
        #[command(flatten)]
        common: Common,
        /// Recompute even when a matching cache exists.
        #[arg(long)]
        force: bool,
    },
    /// Run the system-level simulation for one scheme.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Parameter sweeps.
    Sweep {
        #[arg(value_enum)]
        kind: SweepKind,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Hcg,
    Distance,
    DropRadius,
}

#[derive(Args)]
struct Common {
    /// `key = value` config file layered over the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    iterations: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for a in &self.set {
            cfg.apply_assignment(a)?;
        }
        for (key, v) in [
            ("run.scheme", &self.scheme),
            ("run.iterations", &self.iterations),
            ("run.seed", &self.seed),
        ] {
            if let Some(v) = v {
                cfg.set(key, v)?;
            }
        }
        if let Some(out) = &self.out {
            cfg.set("run.out_dir", &out.to_string_lossy())?;
        }
        Ok(cfg)
    }
}

fn write_output(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

fn with_metadata(mut table: SweepTable, cfg: &RunConfig, s: &Settings, sweep: &str) -> SweepTable {
    let mut meta = vec![
        ("sweep".to_string(), sweep.to_string()),
        ("seed".to_string(), s.seed.to_string()),
        ("iterations".to_string(), s.iterations.to_string()),
    ];
    meta.extend(cfg.metadata());
    table.metadata = meta;
    table
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Linkchar { common, force } => {
            let cfg = common.resolve()?;
            let s = cfg.settings()?;
            if let Some(dir) = s.cache.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            let ch = build_threshold_set(&s.linkchar, &s.cache, force)?;
            println!(
                "{} {} (hash {})",
                if ch.cache_hit { "cache hit" } else { "wrote" },
                ch.cache_path.display(),
                ch.table.config_hash
            );
            println!("alpha,layer,snr_db_at_{}", s.linkchar.target_bler);
            for (a, l, v) in &ch.thresholds.entries {
                println!("{a},{l},{v:.3}");
            }
            println!("cqi_subgroup_threshold_db,{:.3}", ch.thresholds.cqi_subgroup_threshold);
        }
        Command::Run { common } => {
            let cfg = common.resolve()?;
            let s = cfg.settings()?;
            let sim = s.simulator(load_threshold_set(&s.linkchar, &s.cache)?)?;
            let mut report = sim.run(s.scheme, s.iterations, s.seed)?;
            report.metadata.extend(cfg.metadata());
            let path = write_output(&s.out_dir, &format!("run_{}.txt", s.scheme), &report.to_table())?;
            println!("{}", path.display());
        }
        Command::Sweep { kind, common } => {
            let cfg = common.resolve()?;
            let s = cfg.settings()?;
            let sim = s.simulator(load_threshold_set(&s.linkchar, &s.cache)?)?;
            let (name, table) = match kind {
                SweepKind::Hcg => ("hcg", hcg_sweep(&sim, s.iterations, s.seed)?.1),
                SweepKind::Distance => ("distance", distance_profile(&sim, s.iterations, s.seed)?.to_table()),
                SweepKind::DropRadius => ("drop_radius", drop_radius_sweep(&sim, s.iterations, s.seed)?.1),
            };
            let table = with_metadata(table, &cfg, &s, name);
            let path = write_output(&s.out_dir, &format!("sweep_{name}.txt"), &table.to_table())?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::MissingCache { .. }) {
                eprintln!("hint: run `lhs linkchar` with the same config to build the cache");
            }
            ExitCode::FAILURE
        }
    }
}
