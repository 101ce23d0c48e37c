//! Batch runs over variants and seeds: one resumable output directory per
//! cell and an aggregate comparison recomputed from the cells' files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Config, Variant};
use crate::error::{Error, Result};
use crate::eval::{
    action_length_table, learning_procedure_usage, procedure_usage_table, reach_fraction, read_evaluations,
    strategy_task_counts, write_choices, write_evaluations, write_lengths, write_usage, EvaluationSnapshot,
};
use crate::learner::{EpisodeLog, Environment, Learner};
use crate::memory::{write_line, Memory};
use crate::outcome::{write_testbench_csv, SubspaceId, SUBSPACES};

pub const CONFIG_FILE: &str = "config.toml";
pub const EPISODES_FILE: &str = "episodes.jsonl";
pub const EVALUATIONS_FILE: &str = "evaluations.csv";
pub const USAGE_FILE: &str = "procedure_usage.csv";
pub const LENGTHS_FILE: &str = "action_lengths.csv";
pub const CHOICES_FILE: &str = "choices.csv";
pub const MEMORY_FILE: &str = "memory.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TESTBENCH_FILE: &str = "testbench.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const FINAL_FILE: &str = "final.csv";

/// Radius used for the complex-subspace coverage figure.
pub const REACH_RADIUS: f64 = 0.5;

/// Subspaces whose coverage is reported in the cell summaries.
pub const COMPLEX: [SubspaceId; 2] = [SubspaceId::BOTH, SubspaceId::BURST];

pub fn cell_name(variant: Variant, seed: u64) -> String {
    format!("{variant}_seed{seed}")
}

/// Final state of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub variant: Variant,
    pub seed: u64,
    pub iterations: usize,
    pub final_evaluation: EvaluationSnapshot,
    /// Fraction of complex-subspace testbench goals within the reach radius.
    pub reach_complex: f64,
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| Error::io(path, e))
}

/// Configuration of a single cell, written next to its outputs.
pub fn cell_config(config: &Config, variant: Variant, seed: u64) -> Config {
    Config {
        variants: vec![variant],
        seeds: vec![seed],
        ..config.clone()
    }
}

pub fn read_episodes(path: &Path) -> Result<Vec<EpisodeLog>> {
    let file = io(path, File::open(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = io(path, line)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Writes the analysis tables of a cell from its memory and episode log.
pub fn write_tables(dir: &Path, env: &Environment, memory: &Memory, episodes: &[EpisodeLog]) -> Result<()> {
    let test = procedure_usage_table(memory, &env.testbench);
    let learning = learning_procedure_usage(episodes);
    write_usage(&dir.join(USAGE_FILE), &[("test", &test), ("learning", &learning)])?;
    write_lengths(&dir.join(LENGTHS_FILE), &action_length_table(memory, &env.testbench))?;
    write_choices(
        &dir.join(CHOICES_FILE),
        &strategy_task_counts(episodes, env.config.choice_window),
    )
}

pub fn summarize(variant: Variant, seed: u64, env: &Environment, memory: &Memory, last: &EvaluationSnapshot) -> CellSummary {
    CellSummary {
        variant,
        seed,
        iterations: last.iteration,
        final_evaluation: last.clone(),
        reach_complex: reach_fraction(memory, &env.testbench, &COMPLEX, REACH_RADIUS),
    }
}

/// Runs one cell into `dir`, or loads its summary if the cell already
/// completed. The summary file is written last and marks completion.
pub fn run_cell(env: &Environment, variant: Variant, seed: u64, dir: &Path) -> Result<CellSummary> {
    let summary_path = dir.join(SUMMARY_FILE);
    if summary_path.exists() {
        let text = io(&summary_path, std::fs::read_to_string(&summary_path))?;
        return Ok(serde_json::from_str(&text)?);
    }
    io(dir, std::fs::create_dir_all(dir))?;
    let cfg_path = dir.join(CONFIG_FILE);
    io(&cfg_path, std::fs::write(&cfg_path, cell_config(&env.config, variant, seed).to_toml()))?;

    let log_path = dir.join(EPISODES_FILE);
    let mut log = BufWriter::new(io(&log_path, File::create(&log_path))?);
    let mut learner = Learner::new(env, variant, seed);
    let out = learner.run(env.config.iterations, env.config.eval_every, &env.testbench, |e| {
        write_line(&mut log, &log_path, e)
    })?;
    io(&log_path, log.flush())?;

    write_evaluations(&dir.join(EVALUATIONS_FILE), &out.evaluations)?;
    write_tables(dir, env, learner.memory(), &out.episodes)?;
    learner.memory().dump(&dir.join(MEMORY_FILE))?;
    let summary = summarize(variant, seed, env, learner.memory(), out.evaluations.last().expect("one evaluation"));
    let tmp = dir.join("summary.json.tmp");
    io(&tmp, std::fs::write(&tmp, serde_json::to_string_pretty(&summary)?))?;
    io(&summary_path, std::fs::rename(&tmp, &summary_path))?;
    Ok(summary)
}

/// Result of a batch: every cell's summary in (variant, seed) order.
#[derive(Debug, Clone)]
pub struct BatchReport {
    pub output: PathBuf,
    pub cells: Vec<CellSummary>,
}

impl BatchReport {
    pub fn cells_of(&self, variant: Variant) -> impl Iterator<Item = &CellSummary> {
        self.cells.iter().filter(move |c| c.variant == variant)
    }

    pub fn dir_of(&self, variant: Variant, seed: u64) -> PathBuf {
        self.output.join(cell_name(variant, seed))
    }
}

/// Runs every (variant, seed) cell of `config` in parallel, skipping cells
/// that already completed, then writes the aggregate tables.
pub fn run_batch(config: &Config) -> Result<BatchReport> {
    let env = Environment::prepare(config)?;
    run_batch_in(&env)
}

pub fn run_batch_in(env: &Environment) -> Result<BatchReport> {
    let config = &env.config;
    let output = config.output.clone();
    io(&output, std::fs::create_dir_all(&output))?;
    let batch_cfg = output.join(CONFIG_FILE);
    io(&batch_cfg, std::fs::write(&batch_cfg, config.to_toml()))?;
    write_testbench_csv(&output.join(TESTBENCH_FILE), &env.testbench)?;

    let jobs: Vec<(Variant, u64)> = config
        .variants
        .iter()
        .flat_map(|v| config.seeds.iter().map(move |s| (*v, *s)))
        .collect();
    let mut cells = jobs
        .par_iter()
        .map(|(v, s)| {
            let dir = output.join(cell_name(*v, *s));
            let r = run_cell(env, *v, *s, &dir);
            if let Ok(c) = &r {
                log::info!("{} done: global error {:.4}", cell_name(*v, *s), c.final_evaluation.global);
            }
            r
        })
        .collect::<Result<Vec<_>>>()?;
    cells.sort_by_key(|c| (c.variant, c.seed));
    write_final(&output.join(FINAL_FILE), &cells)?;
    let mut variants = config.variants.clone();
    variants.sort();
    variants.dedup();
    let rows = aggregate(&output, &variants, &config.seeds)?;
    write_aggregate(&output.join(AGGREGATE_FILE), &rows)?;
    Ok(BatchReport { output, cells })
}

pub const FINAL_COLUMNS: [&str; 11] = [
    "variant", "seed", "iteration", "global", "e0", "e1", "e2", "e3", "e4", "e5", "reach_complex",
];

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_final(path: &Path, cells: &[CellSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(FINAL_COLUMNS)?;
    for c in cells {
        let e = &c.final_evaluation;
        let mut row = vec![
            c.variant.to_string(),
            c.seed.to_string(),
            e.iteration.to_string(),
            e.global.to_string(),
        ];
        row.extend(e.per_subspace.iter().map(|x| fmt_opt(*x)));
        row.push(c.reach_complex.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Median and quartiles (linear interpolation between order statistics).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

/// One learning-curve point across the seeds of a variant.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub variant: Variant,
    pub iteration: usize,
    pub seeds: usize,
    pub median_global: f64,
    pub q1_global: f64,
    pub q3_global: f64,
    pub median_per_subspace: [Option<f64>; SUBSPACES],
}

/// Recomputes the per-variant learning curves from the cells' evaluation
/// files.
pub fn aggregate(output: &Path, variants: &[Variant], seeds: &[u64]) -> Result<Vec<AggregateRow>> {
    let mut rows = Vec::new();
    for v in variants {
        let curves = seeds
            .iter()
            .map(|s| read_evaluations(&output.join(cell_name(*v, *s)).join(EVALUATIONS_FILE)))
            .collect::<Result<Vec<_>>>()?;
        let Some(first) = curves.first() else { continue };
        for (i, snap) in first.iter().enumerate() {
            let at: Vec<&EvaluationSnapshot> = curves.iter().filter_map(|c| c.get(i)).collect();
            if at.iter().any(|s| s.iteration != snap.iteration) {
                return Err(Error::config(
                    "evaluations",
                    format!("{v}: evaluation schedules differ between seeds"),
                ));
            }
            let mut g: Vec<f64> = at.iter().map(|s| s.global).collect();
            g.sort_by(f64::total_cmp);
            let mut per = [None; SUBSPACES];
            for (k, p) in per.iter_mut().enumerate() {
                let vals: Vec<f64> = at.iter().filter_map(|s| s.per_subspace[k]).collect();
                if !vals.is_empty() {
                    *p = Some(median(&vals));
                }
            }
            rows.push(AggregateRow {
                variant: *v,
                iteration: snap.iteration,
                seeds: at.len(),
                median_global: quantile(&g, 0.5),
                q1_global: quantile(&g, 0.25),
                q3_global: quantile(&g, 0.75),
                median_per_subspace: per,
            });
        }
    }
    Ok(rows)
}

pub const AGGREGATE_COLUMNS: [&str; 12] = [
    "variant",
    "iteration",
    "seeds",
    "median_global",
    "q1_global",
    "q3_global",
    "median_e0",
    "median_e1",
    "median_e2",
    "median_e3",
    "median_e4",
    "median_e5",
];

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(AGGREGATE_COLUMNS)?;
    for r in rows {
        let mut row = vec![
            r.variant.to_string(),
            r.iteration.to_string(),
            r.seeds.to_string(),
            r.median_global.to_string(),
            r.q1_global.to_string(),
            r.q3_global.to_string(),
        ];
        row.extend(r.median_per_subspace.iter().map(|x| fmt_opt(*x)));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reloads a completed cell: its configuration, environment, memory and
/// episode log.
pub fn load_cell(dir: &Path) -> Result<(Environment, Memory, Vec<EpisodeLog>)> {
    let config = Config::load(&dir.join(CONFIG_FILE))?;
    let env = Environment::prepare(&config)?;
    let memory = Memory::load(&dir.join(MEMORY_FILE), env.world.spaces.clone(), config.memory_params())?;
    let episodes = read_episodes(&dir.join(EPISODES_FILE))?;
    Ok((env, memory, episodes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }
}
