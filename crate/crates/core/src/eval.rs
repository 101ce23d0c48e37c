//! Evaluation protocol and analysis tables: testbench errors, procedure
//! usage, resolved action lengths and strategy choices over time, with
//! their CSV forms.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::EpisodeLog;
use crate::memory::Memory;
use crate::outcome::{Outcome, SubspaceId, SUBSPACES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSnapshot {
    pub iteration: usize,
    /// Unweighted mean of the per-subspace errors.
    pub global: f64,
    /// Mean error per subspace; `None` for subspaces absent from the testbench.
    pub per_subspace: [Option<f64>; SUBSPACES],
    /// Number of indexed (action, outcome) pairs.
    pub memory_size: usize,
}

/// Distance from each goal to the nearest outcome reached in its subspace
/// (`d_thres` when none), averaged per subspace and then across subspaces.
/// Transferred procedure records are never consulted.
pub fn evaluate(memory: &Memory, testbench: &[Outcome], iteration: usize, d_thres: f64) -> EvaluationSnapshot {
    let mut sums = [0.0; SUBSPACES];
    let mut counts = [0usize; SUBSPACES];
    for g in testbench {
        let d = memory.nearest_outcome_distance(g).unwrap_or(d_thres).min(d_thres);
        sums[g.space.index()] += d;
        counts[g.space.index()] += 1;
    }
    let mut per_subspace = [None; SUBSPACES];
    let mut total = 0.0;
    let mut n = 0;
    for i in 0..SUBSPACES {
        if counts[i] > 0 {
            let m = sums[i] / counts[i] as f64;
            per_subspace[i] = Some(m);
            total += m;
            n += 1;
        }
    }
    EvaluationSnapshot {
        iteration,
        global: if n > 0 { total / n as f64 } else { d_thres },
        per_subspace,
        memory_size: memory.action_count(),
    }
}

/// Fraction of the goals of `spaces` whose nearest reached outcome lies
/// within `radius`.
pub fn reach_fraction(memory: &Memory, testbench: &[Outcome], spaces: &[SubspaceId], radius: f64) -> f64 {
    let goals: Vec<&Outcome> = testbench.iter().filter(|g| spaces.contains(&g.space)).collect();
    if goals.is_empty() {
        return 0.0;
    }
    let hit = goals
        .iter()
        .filter(|g| memory.nearest_outcome_distance(g).is_some_and(|d| d <= radius))
        .count();
    hit as f64 / goals.len() as f64
}

/// Procedural space of a resolution: an ordered subspace pair, or `None`
/// for a direct action.
pub type Cell = Option<(SubspaceId, SubspaceId)>;

/// One cell of a histogram row keyed by goal subspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow<K> {
    pub goal_space: SubspaceId,
    pub key: K,
    pub count: usize,
    /// Share of the row's total, in percent.
    pub percent: f64,
}

fn histogram<K: Ord + Clone>(entries: impl IntoIterator<Item = (SubspaceId, K)>) -> Vec<HistogramRow<K>> {
    let mut counts: BTreeMap<(SubspaceId, K), usize> = BTreeMap::new();
    let mut totals: BTreeMap<SubspaceId, usize> = BTreeMap::new();
    for (s, k) in entries {
        *counts.entry((s, k)).or_default() += 1;
        *totals.entry(s).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|((s, k), c)| HistogramRow {
            goal_space: s,
            key: k,
            count: c,
            percent: 100.0 * c as f64 / totals[&s] as f64,
        })
        .collect()
}

/// Which procedural space the inverse model uses at the top level for each
/// testbench goal. Goals that cannot be resolved at all are left out.
pub fn procedure_usage_table(memory: &Memory, testbench: &[Outcome]) -> Vec<HistogramRow<Cell>> {
    let depth = memory.params().depth;
    histogram(testbench.iter().filter_map(|g| {
        memory
            .resolve(g, depth)
            .ok()
            .map(|r| (g.space, r.procedure.map(|p| p.spaces())))
    }))
}

/// Which procedural space procedure-based episodes tried, per goal subspace.
pub fn learning_procedure_usage(episodes: &[EpisodeLog]) -> Vec<HistogramRow<Cell>> {
    histogram(
        episodes
            .iter()
            .filter_map(|e| e.procedure.map(|p| (e.goal.space, Some(p.spaces())))),
    )
}

/// Length of the resolved action for each testbench goal.
pub fn action_length_table(memory: &Memory, testbench: &[Outcome]) -> Vec<HistogramRow<usize>> {
    let depth = memory.params().depth;
    histogram(
        testbench
            .iter()
            .filter_map(|g| memory.resolve(g, depth).ok().map(|r| (g.space, r.action.len()))),
    )
}

/// Share (percent) of `space`'s row taken by the keys satisfying `pred`.
pub fn share<K>(rows: &[HistogramRow<K>], space: SubspaceId, pred: impl Fn(&K) -> bool) -> f64 {
    rows.iter()
        .filter(|r| r.goal_space == space && pred(&r.key))
        .map(|r| r.percent)
        .sum()
}

/// The most frequent key of `space`'s row, ties broken by key order.
pub fn modal<K: Clone>(rows: &[HistogramRow<K>], space: SubspaceId) -> Option<K> {
    let mut best: Option<&HistogramRow<K>> = None;
    for r in rows.iter().filter(|r| r.goal_space == space) {
        if best.is_none_or(|b| r.count > b.count) {
            best = Some(r);
        }
    }
    best.map(|r| r.key.clone())
}

/// Episodes per (window, goal subspace, strategy).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceCount {
    pub window_start: usize,
    pub window_end: usize,
    pub goal_space: SubspaceId,
    pub strategy: String,
    pub count: usize,
}

pub fn strategy_task_counts(episodes: &[EpisodeLog], window: usize) -> Vec<ChoiceCount> {
    assert!(window > 0);
    let mut counts: BTreeMap<(usize, SubspaceId, String), usize> = BTreeMap::new();
    for e in episodes {
        let w = (e.iteration - 1) / window;
        *counts.entry((w, e.goal.space, e.strategy.clone())).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|((w, s, strategy), count)| ChoiceCount {
            window_start: w * window + 1,
            window_end: (w + 1) * window,
            goal_space: s,
            strategy,
            count,
        })
        .collect()
}

// ---------------------------------------------------------------- CSV forms

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub const EVALUATION_COLUMNS: [&str; 9] =
    ["iteration", "global", "e0", "e1", "e2", "e3", "e4", "e5", "memory_size"];

/// Learning curve: one row per snapshot; errors of absent subspaces are empty.
pub fn write_evaluations(path: &Path, snaps: &[EvaluationSnapshot]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(EVALUATION_COLUMNS)?;
    for s in snaps {
        let mut row = vec![s.iteration.to_string(), s.global.to_string()];
        row.extend(s.per_subspace.iter().map(|e| opt(*e)));
        row.push(s.memory_size.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_evaluations(path: &Path) -> Result<Vec<EvaluationSnapshot>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |m: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            message: m,
        };
        let num = |j: usize| -> Result<Option<f64>> {
            let f = rec.get(j).ok_or_else(|| bad(format!("missing column {}", EVALUATION_COLUMNS[j])))?;
            if f.is_empty() {
                return Ok(None);
            }
            f.parse().map(Some).map_err(|e| bad(format!("{}: {e}", EVALUATION_COLUMNS[j])))
        };
        let mut per_subspace = [None; SUBSPACES];
        for (k, p) in per_subspace.iter_mut().enumerate() {
            *p = num(2 + k)?;
        }
        out.push(EvaluationSnapshot {
            iteration: num(0)?.ok_or_else(|| bad("empty iteration".into()))? as usize,
            global: num(1)?.ok_or_else(|| bad("empty global".into()))?,
            per_subspace,
            memory_size: num(8)?.ok_or_else(|| bad("empty memory_size".into()))? as usize,
        });
    }
    Ok(out)
}

pub const USAGE_COLUMNS: [&str; 6] = ["source", "goal_space", "first_space", "second_space", "count", "percent"];

/// Procedure usage; `source` is `test` or `learning`, and direct actions
/// leave both space columns empty.
pub fn write_usage(path: &Path, tables: &[(&str, &[HistogramRow<Cell>])]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(USAGE_COLUMNS)?;
    for (source, rows) in tables {
        for r in rows.iter() {
            let (a, b) = match r.key {
                Some((a, b)) => (a.0.to_string(), b.0.to_string()),
                None => (String::new(), String::new()),
            };
            w.write_record([
                source.to_string(),
                r.goal_space.0.to_string(),
                a,
                b,
                r.count.to_string(),
                format!("{:.4}", r.percent),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const LENGTH_COLUMNS: [&str; 4] = ["goal_space", "length", "count", "percent"];

pub fn write_lengths(path: &Path, rows: &[HistogramRow<usize>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(LENGTH_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.goal_space.0.to_string(),
            r.key.to_string(),
            r.count.to_string(),
            format!("{:.4}", r.percent),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const CHOICE_COLUMNS: [&str; 5] = ["window_start", "window_end", "goal_space", "strategy", "count"];

pub fn write_choices(path: &Path, rows: &[ChoiceCount]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(CHOICE_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.window_start.to_string(),
            r.window_end.to_string(),
            r.goal_space.0.to_string(),
            r.strategy.clone(),
            r.count.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
