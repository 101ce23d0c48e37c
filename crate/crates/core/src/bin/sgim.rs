use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use sgim_core::batch::{
    aggregate, cell_name, load_cell, run_batch, summarize, write_aggregate, write_final, write_tables, CellSummary,
    EVALUATIONS_FILE, SUMMARY_FILE,
};
use sgim_core::config::{Config, Profile, Variant};
use sgim_core::error::{Error, Result};
use sgim_core::eval::{evaluate, read_evaluations};
use sgim_core::learner::{Environment, Learner};
use sgim_core::teachers::{generate_action_demos, write_demos, write_transfer_lump};

#[derive(Parser)]
#[command(name = "sgim", version, about = "Hierarchical curiosity-driven learner on a simulated interactive table")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration file (TOML); profile defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Profile: simulation, physical or left-arm.
    #[arg(long)]
    profile: Option<Profile>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Seeds, e.g. "0-9" or "1,4,7".
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<Seeds>,
    /// Comma-separated variants, e.g. "SGIM-PB,IM-PB".
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<Variant>>,
    /// Iterations per run.
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (variant, seed) cell; completed cells are skipped.
    Run(Common),
    /// Re-evaluate the stored memory of a completed cell against its testbench.
    Evaluate {
        /// Cell directory.
        cell: PathBuf,
    },
    /// Recompute every cell's tables and the aggregate files from raw logs.
    Analyze {
        /// Batch output directory.
        output: PathBuf,
    },
    /// Generate the action-teacher demonstration file.
    GenTeachers {
        #[command(flatten)]
        common: Common,
        /// Destination file (JSONL).
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract a transfer lump from a completed cell, or from a fresh SGIM-PB run.
    GenTransferLump {
        #[command(flatten)]
        common: Common,
        /// Completed cell directory to extract the procedures from.
        #[arg(long)]
        from: Option<PathBuf>,
        /// Seed of the fresh run when --from is absent.
        #[arg(long, default_value_t = 100)]
        seed: u64,
        /// Destination file (JSONL).
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> std::result::Result<Seeds, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once('-') {
            let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range '{part}'"))?;
            let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range '{part}'"))?;
            if a > b {
                return Err(format!("empty seed range '{part}'"));
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| format!("bad seed '{part}'"))?);
        }
    }
    if out.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(Seeds(out))
}

fn build_config(c: &Common) -> Result<Config> {
    let mut config = match (&c.config, c.profile) {
        (Some(path), profile) => {
            let mut cfg = Config::load(path)?;
            if let Some(p) = profile {
                if p != cfg.profile {
                    let base = Config::for_profile(p);
                    cfg.profile = p;
                    cfg.arm = base.arm;
                    cfg.table = base.table;
                    cfg.variants = base.variants;
                }
            }
            cfg
        }
        (None, profile) => Config::for_profile(profile.unwrap_or(Profile::Simulation)),
    };
    if let Some(o) = &c.output {
        config.output = o.clone();
    }
    if let Some(s) = &c.seeds {
        config.seeds = s.0.clone();
    }
    if let Some(v) = &c.variants {
        config.variants = v.clone();
    }
    if let Some(n) = c.iterations {
        config.iterations = n;
    }
    config.validate()?;
    Ok(config)
}

fn print_summaries(cells: &[CellSummary]) {
    println!("{:<12} {:>6} {:>10} {:>10}", "variant", "seed", "global", "reach34");
    for c in cells {
        println!(
            "{:<12} {:>6} {:>10.4} {:>10.3}",
            c.variant.to_string(),
            c.seed,
            c.final_evaluation.global,
            c.reach_complex
        );
    }
}

fn run(common: &Common) -> Result<()> {
    let config = build_config(common)?;
    log::info!(
        "{} profile: {} variants x {} seeds, {} iterations into {}",
        config.profile,
        config.variants.len(),
        config.seeds.len(),
        config.iterations,
        config.output.display()
    );
    let report = run_batch(&config)?;
    print_summaries(&report.cells);
    Ok(())
}

fn evaluate_cell(cell: &Path) -> Result<()> {
    let (env, memory, _) = load_cell(cell)?;
    let iteration = read_evaluations(&cell.join(EVALUATIONS_FILE))
        .ok()
        .and_then(|e| e.last().map(|s| s.iteration))
        .unwrap_or(0);
    let snap = evaluate(&memory, &env.testbench, iteration, env.config.interest.d_thres);
    println!("{}", serde_json::to_string_pretty(&snap)?);
    Ok(())
}

fn analyze(output: &Path) -> Result<()> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(output)
        .map_err(|e| Error::io(output, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(SUMMARY_FILE).exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::config("output", format!("no completed cells in {}", output.display())));
    }
    let mut cells = dirs
        .par_iter()
        .map(|dir| {
            let (env, memory, episodes) = load_cell(dir)?;
            write_tables(dir, &env, &memory, &episodes)?;
            let evals = read_evaluations(&dir.join(EVALUATIONS_FILE))?;
            let last = evals
                .last()
                .ok_or_else(|| Error::config("evaluations", format!("{} has no evaluations", dir.display())))?;
            let variant = env.config.variants[0];
            let seed = env.config.seeds[0];
            Ok(summarize(variant, seed, &env, &memory, last))
        })
        .collect::<Result<Vec<_>>>()?;
    cells.sort_by_key(|c| (c.variant, c.seed));
    write_final(&output.join(sgim_core::batch::FINAL_FILE), &cells)?;
    let mut variants: Vec<Variant> = cells.iter().map(|c| c.variant).collect();
    variants.dedup();
    let mut rows = Vec::new();
    for v in variants {
        let seeds: Vec<u64> = cells.iter().filter(|c| c.variant == v).map(|c| c.seed).collect();
        rows.extend(aggregate(output, &[v], &seeds)?);
    }
    write_aggregate(&output.join(sgim_core::batch::AGGREGATE_FILE), &rows)?;
    print_summaries(&cells);
    Ok(())
}

fn gen_teachers(common: &Common, out: &Path) -> Result<()> {
    let config = build_config(common)?;
    let world = config.world();
    let demos = generate_action_demos(&world, config.profile, config.teacher_seed)?;
    write_demos(out, &demos)?;
    println!("wrote {} demonstrations to {}", demos.len(), out.display());
    Ok(())
}

fn gen_transfer_lump(common: &Common, from: Option<&Path>, seed: u64, out: &Path) -> Result<()> {
    let records = match from {
        Some(cell) => {
            let (_, memory, _) = load_cell(cell)?;
            memory.procedures().iter().filter(|p| !p.transferred).cloned().collect::<Vec<_>>()
        }
        None => {
            let mut config = build_config(common)?;
            config.transfer_lump = None;
            let env = Environment::prepare(&config)?;
            let mut learner = Learner::new(&env, Variant::SgimPb, seed);
            log::info!("running {} for the lump", cell_name(Variant::SgimPb, seed));
            learner.run(config.iterations, config.iterations.max(1), &env.testbench, |_| Ok(()))?;
            learner.memory().procedures().to_vec()
        }
    };
    write_transfer_lump(out, &records)?;
    println!("wrote {} procedure records to {}", records.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(common) => run(common),
        Command::Evaluate { cell } => evaluate_cell(cell),
        Command::Analyze { output } => analyze(output),
        Command::GenTeachers { common, out } => gen_teachers(common, out),
        Command::GenTransferLump { common, from, seed, out } => gen_transfer_lump(common, from.as_deref(), *seed, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
