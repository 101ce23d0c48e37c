//! Episodic memory: every executed action with everything it reached, the
//! procedures that were tried, and the recursive inverse model built on them.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dmp::ActionSequence;
use crate::error::{Error, Result};
use crate::index::{merge_top, Neighbour, PointSet};
use crate::outcome::{Outcome, OutcomeSpaces, Procedure, Reached, SubspaceId, SUBSPACES};

/// One executed action sequence and its hindsight outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub goal: Outcome,
    pub strategy: String,
    pub action: ActionSequence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub procedure: Option<Procedure>,
    /// Primitives spent on the procedure's first component.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_component_len: Option<usize>,
    pub reached: Vec<Reached>,
}

impl EpisodeRecord {
    pub fn validate(&self) -> Result<()> {
        if self.action.len() == 0 {
            return Err(Error::EmptySequence);
        }
        for r in &self.reached {
            if r.primitives == 0 || r.primitives > self.action.len() {
                return Err(Error::config(
                    "reached.primitives",
                    format!("index {} outside 1..={}", r.primitives, self.action.len()),
                ));
            }
        }
        Ok(())
    }

    /// Procedure records implied by this episode: every outcome reached while
    /// executing the second component.
    pub fn procedure_records(&self) -> Vec<ProcedureRecord> {
        let (Some(procedure), Some(first)) = (self.procedure, self.first_component_len) else {
            return Vec::new();
        };
        self.reached
            .iter()
            .filter(|r| r.primitives > first)
            .map(|r| ProcedureRecord {
                procedure,
                reached: r.outcome,
                length: Some(r.primitives),
                transferred: false,
            })
            .collect()
    }
}

/// A tried decomposition and what it produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcedureRecord {
    pub procedure: Procedure,
    pub reached: Outcome,
    /// Realized number of primitives; unknown for some transferred records.
    pub length: Option<usize>,
    #[serde(default)]
    pub transferred: bool,
}

/// One line of a memory dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DumpRecord {
    Episode(EpisodeRecord),
    Procedure(ProcedureRecord),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryParams {
    pub gamma: f64,
    pub k: usize,
    pub max_len: usize,
    /// Length penalty applied to transferred records of unknown length.
    pub unknown_len: usize,
    pub depth: usize,
}

impl Default for MemoryParams {
    fn default() -> Self {
        MemoryParams {
            gamma: 1.2,
            k: 5,
            max_len: 8,
            unknown_len: 4,
            depth: 3,
        }
    }
}

/// Outcome points grouped by subspace and action length, so that a
/// perf-ordered query is a distance query per group followed by a merge.
#[derive(Debug, Clone)]
struct PerfIndex {
    groups: Vec<Vec<PointSet>>,
    len: usize,
}

impl PerfIndex {
    fn new(max_len: usize) -> PerfIndex {
        PerfIndex {
            groups: SubspaceId::ALL
                .iter()
                .map(|s| (0..max_len).map(|_| PointSet::new(s.dim())).collect())
                .collect(),
            len: 0,
        }
    }

    fn insert(&mut self, spaces: &OutcomeSpaces, o: &Outcome, length: usize, id: usize) {
        self.groups[o.space.index()][length - 1].insert(spaces.normalize(o), id);
        self.len += 1;
    }

    fn count(&self, space: SubspaceId) -> usize {
        self.groups[space.index()].iter().map(|g| g.len()).sum()
    }

    fn top_by_perf(&self, spaces: &OutcomeSpaces, goal: &Outcome, k: usize, gamma: f64) -> Vec<Neighbour> {
        let q = spaces.normalize(goal);
        let mut all = Vec::new();
        for (i, set) in self.groups[goal.space.index()].iter().enumerate() {
            all.extend(set.nearest(&q, k, gamma.powi(i as i32 + 1)));
        }
        merge_top(all, k)
    }

    fn nearest(&self, spaces: &OutcomeSpaces, goal: &Outcome) -> Option<Neighbour> {
        let q = spaces.normalize(goal);
        let all = self.groups[goal.space.index()]
            .iter()
            .flat_map(|set| set.nearest(&q, 1, 1.0))
            .collect();
        merge_top(all, 1).pop()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionEntry {
    pub episode: usize,
    pub primitives: usize,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionMatch {
    pub action: ActionSequence,
    pub reached: Outcome,
    pub distance: f64,
    pub perf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcedureMatch {
    pub record: ProcedureRecord,
    pub distance: f64,
    pub perf: f64,
}

/// Result of the inverse model for one goal.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub action: ActionSequence,
    /// Top-level decomposition used, if any.
    pub procedure: Option<Procedure>,
    pub perf: f64,
}

#[derive(Debug, Clone)]
pub struct Memory {
    spaces: OutcomeSpaces,
    params: MemoryParams,
    episodes: Vec<EpisodeRecord>,
    actions: Vec<ActionEntry>,
    action_index: PerfIndex,
    procedures: Vec<ProcedureRecord>,
    learned_index: PerfIndex,
    transferred_index: PerfIndex,
}

impl Memory {
    pub fn new(spaces: OutcomeSpaces, params: MemoryParams) -> Memory {
        assert!(params.max_len >= 1 && params.unknown_len >= 1);
        let slots = params.max_len.max(params.unknown_len);
        Memory {
            spaces,
            params,
            episodes: Vec::new(),
            actions: Vec::new(),
            action_index: PerfIndex::new(slots),
            procedures: Vec::new(),
            learned_index: PerfIndex::new(slots),
            transferred_index: PerfIndex::new(slots),
        }
    }

    pub fn spaces(&self) -> &OutcomeSpaces {
        &self.spaces
    }

    pub fn params(&self) -> &MemoryParams {
        &self.params
    }

    pub fn episodes(&self) -> &[EpisodeRecord] {
        &self.episodes
    }

    pub fn actions(&self) -> &[ActionEntry] {
        &self.actions
    }

    pub fn procedures(&self) -> &[ProcedureRecord] {
        &self.procedures
    }

    /// Number of indexed (action prefix, outcome) pairs.
    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    pub fn action_count_in(&self, space: SubspaceId) -> usize {
        self.action_index.count(space)
    }

    pub fn procedure_count(&self) -> usize {
        self.procedures.len()
    }

    pub fn transferred_count(&self) -> usize {
        self.transferred_index.len
    }

    /// Indexes every reached (prefix, outcome) pair and the implied procedure
    /// records. Identical records are stored again, never merged.
    pub fn store(&mut self, record: EpisodeRecord) -> Result<()> {
        record.validate()?;
        if record.action.len() > self.params.max_len {
            return Err(Error::SequenceTooLong {
                len: record.action.len(),
                max: self.params.max_len,
            });
        }
        let episode = self.episodes.len();
        for r in &record.reached {
            let id = self.actions.len();
            self.actions.push(ActionEntry {
                episode,
                primitives: r.primitives,
                outcome: r.outcome,
            });
            self.action_index
                .insert(&self.spaces, &r.outcome, r.primitives, id);
        }
        for p in record.procedure_records() {
            self.insert_procedure(p);
        }
        self.episodes.push(record);
        Ok(())
    }

    /// Adds a procedure record; transferred ones only feed local procedure
    /// exploration.
    pub fn insert_procedure(&mut self, record: ProcedureRecord) {
        let length = self.effective_length(&record);
        let id = self.procedures.len();
        let index = if record.transferred {
            &mut self.transferred_index
        } else {
            &mut self.learned_index
        };
        index.insert(&self.spaces, &record.reached, length, id);
        self.procedures.push(record);
    }

    fn effective_length(&self, record: &ProcedureRecord) -> usize {
        record
            .length
            .unwrap_or(self.params.unknown_len)
            .clamp(1, self.params.max_len.max(self.params.unknown_len))
    }

    fn action_match(&self, n: &Neighbour) -> ActionMatch {
        let entry = &self.actions[n.id];
        ActionMatch {
            action: self.episodes[entry.episode].action.prefix(entry.primitives),
            reached: entry.outcome,
            distance: n.distance,
            perf: n.key,
        }
    }

    /// The `k` stored action prefixes with the lowest perf for `goal`.
    pub fn nearest_actions(&self, goal: &Outcome, k: usize) -> Vec<ActionMatch> {
        self.action_index
            .top_by_perf(&self.spaces, goal, k, self.params.gamma)
            .iter()
            .map(|n| self.action_match(n))
            .collect()
    }

    /// The `k` procedure records with the lowest perf for `goal`; transferred
    /// records are considered only when `with_transferred` is set.
    pub fn nearest_procedures(
        &self,
        goal: &Outcome,
        k: usize,
        with_transferred: bool,
    ) -> Vec<ProcedureMatch> {
        let mut all = self
            .learned_index
            .top_by_perf(&self.spaces, goal, k, self.params.gamma);
        if with_transferred {
            all.extend(
                self.transferred_index
                    .top_by_perf(&self.spaces, goal, k, self.params.gamma),
            );
        }
        merge_top(all, k)
            .iter()
            .map(|n| ProcedureMatch {
                record: self.procedures[n.id],
                distance: n.distance,
                perf: n.key,
            })
            .collect()
    }

    /// Distance from `goal` to the closest outcome any stored action reached.
    pub fn nearest_outcome_distance(&self, goal: &Outcome) -> Option<f64> {
        self.action_index
            .nearest(&self.spaces, goal)
            .map(|n| n.distance)
    }

    /// Inverse model: the better (by perf) of the best direct action and the
    /// best applicable procedure, whose components are resolved recursively
    /// with one less level of budget. Ties favour the procedure.
    pub fn resolve(&self, goal: &Outcome, depth: usize) -> Result<Resolution> {
        let direct = self.nearest_actions(goal, 1).into_iter().next();
        let decomposed = if depth > 0 {
            self.resolve_procedure(goal, depth, direct.as_ref().map(|d| d.perf))
        } else {
            None
        };
        match (direct, decomposed) {
            (_, Some(r)) => Ok(r),
            (Some(d), None) => Ok(Resolution {
                action: d.action,
                procedure: None,
                perf: d.perf,
            }),
            (None, None) => Err(Error::ColdStart(goal.space)),
        }
    }

    fn resolve_procedure(&self, goal: &Outcome, depth: usize, bound: Option<f64>) -> Option<Resolution> {
        for m in self.nearest_procedures(goal, self.params.k, false) {
            if bound.is_some_and(|b| m.perf > b) {
                // Candidates are perf-ordered; nothing further can win.
                return None;
            }
            let p = m.record.procedure;
            // A component in the goal's own subspace does not reduce the
            // problem; following it could regress indefinitely.
            if p.first.space == goal.space || p.second.space == goal.space {
                continue;
            }
            let Ok(a) = self.resolve(&p.first, depth - 1) else {
                continue;
            };
            let Ok(b) = self.resolve(&p.second, depth - 1) else {
                continue;
            };
            if a.action.len() + b.action.len() > self.params.max_len {
                continue;
            }
            return Some(Resolution {
                action: a.action.concat(&b.action),
                procedure: Some(p),
                perf: m.perf,
            });
        }
        None
    }

    /// Writes every episode and every transferred procedure record, one JSON
    /// object per line.
    pub fn dump(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for e in &self.episodes {
            write_line(&mut w, path, &DumpRecord::Episode(e.clone()))?;
        }
        for p in self.procedures.iter().filter(|p| p.transferred) {
            write_line(&mut w, path, &DumpRecord::Procedure(*p))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Rebuilds a memory from [`Memory::dump`] output.
    pub fn load(path: &Path, spaces: OutcomeSpaces, params: MemoryParams) -> Result<Memory> {
        let mut m = Memory::new(spaces, params);
        for (line, rec) in read_dump(path)? {
            match rec {
                DumpRecord::Episode(e) => m.store(e).map_err(|e| Error::Parse {
                    path: path.into(),
                    line,
                    message: e.to_string(),
                })?,
                DumpRecord::Procedure(p) => m.insert_procedure(p),
            }
        }
        Ok(m)
    }
}

pub fn write_line<W: Write, T: Serialize>(w: &mut W, path: &Path, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))
}

/// Parses a JSON-lines dump, reporting the 1-based line of the first error.
/// Blank lines are skipped.
pub fn read_dump(path: &Path) -> Result<Vec<(usize, DumpRecord)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.into(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

/// Counts of stored records per subspace, for logging.
pub fn outcome_histogram(memory: &Memory) -> [usize; SUBSPACES] {
    let mut h = [0; SUBSPACES];
    for s in SubspaceId::ALL {
        h[s.index()] = memory.action_count_in(s);
    }
    h
}
