//! Competence progress bookkeeping and the interest-driven partition of each
//! outcome subspace used to pick the next goal and strategy.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::outcome::{Normalized, Outcome, OutcomeSpaces, SubspaceId, MAX_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterestParams {
    /// Competence assigned when nothing was reached in the goal's subspace.
    pub d_thres: f64,
    pub split_threshold: usize,
    /// Entries per strategy averaged into a region's interest.
    pub window: usize,
    pub epsilon: f64,
    /// Goals closer than this (normalized) share one competence record.
    pub ledger_tolerance: f64,
}

impl Default for InterestParams {
    fn default() -> Self {
        InterestParams {
            d_thres: 5.0,
            split_threshold: 80,
            window: 20,
            epsilon: 0.05,
            ledger_tolerance: 0.05,
        }
    }
}

/// Distance from `goal` to the closest outcome of `reached` in its subspace,
/// or `d_thres` when there is none.
pub fn competence(spaces: &OutcomeSpaces, goal: &Outcome, reached: &[Outcome], d_thres: f64) -> f64 {
    reached
        .iter()
        .filter(|o| o.space == goal.space)
        .map(|o| spaces.distance(goal, o).expect("same subspace"))
        .fold(d_thres, f64::min)
}

/// `progress / cost`.
pub fn interest(progress: f64, cost: f64) -> f64 {
    progress / cost
}

/// Best competence seen so far, keyed by a grid whose cells have diagonal
/// equal to the tolerance.
#[derive(Debug, Clone, Default)]
pub struct CompetenceLedger {
    cells: HashMap<(SubspaceId, [i64; MAX_DIM]), f64>,
    side: f64,
}

impl CompetenceLedger {
    pub fn new(tolerance: f64) -> CompetenceLedger {
        assert!(tolerance > 0.0);
        CompetenceLedger {
            cells: HashMap::new(),
            side: tolerance,
        }
    }

    fn key(&self, spaces: &OutcomeSpaces, o: &Outcome) -> (SubspaceId, [i64; MAX_DIM]) {
        let side = self.side / (o.space.dim() as f64).sqrt();
        let n = spaces.normalize(o);
        let mut k = [0i64; MAX_DIM];
        for (i, v) in n.iter().take(o.space.dim()).enumerate() {
            k[i] = (v / side).floor() as i64;
        }
        (o.space, k)
    }

    pub fn get(&self, spaces: &OutcomeSpaces, o: &Outcome) -> Option<f64> {
        self.cells.get(&self.key(spaces, o)).copied()
    }

    /// Records `value` if it improves on the stored competence; returns the
    /// best competence after the update.
    pub fn improve(&mut self, spaces: &OutcomeSpaces, o: &Outcome, value: f64) -> f64 {
        let key = self.key(spaces, o);
        let slot = self.cells.entry(key).or_insert(value);
        *slot = slot.min(value);
        *slot
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterestPoint {
    pub point: Normalized,
    pub strategy: usize,
    pub interest: f64,
    pub time: u64,
}

/// An axis-aligned cell of one subspace's normalized unit cube. Cells are
/// half-open `[lo, hi)` except at the cube's upper faces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: usize,
    pub space: SubspaceId,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points: Vec<InterestPoint>,
}

impl Region {
    pub fn contains(&self, p: &Normalized) -> bool {
        self.lo.iter().zip(&self.hi).enumerate().all(|(i, (lo, hi))| {
            p[i] >= *lo && (p[i] < *hi || (*hi >= 1.0 && p[i] <= 1.0))
        })
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    /// Mean of the most recent `window` entries of `strategy`, or 0.
    pub fn strategy_interest(&self, strategy: usize, window: usize) -> f64 {
        let mut n = 0usize;
        let mut sum = 0.0;
        for p in self.points.iter().rev().filter(|p| p.strategy == strategy) {
            sum += p.interest;
            n += 1;
            if n == window {
                break;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    fn sample_goal<R: Rng + ?Sized>(&self, rng: &mut R) -> Normalized {
        let mut n = [0.0; MAX_DIM];
        for (i, (lo, hi)) in self.lo.iter().zip(&self.hi).enumerate() {
            n[i] = if hi > lo { rng.random_range(*lo..*hi) } else { *lo };
        }
        n
    }
}

/// A candidate cut: `dim < value` goes left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cut {
    pub dim: usize,
    pub value: f64,
    pub score: f64,
}

/// Decile cut candidates of each dimension: the midpoint between the sorted
/// coordinates on either side of each decile, kept if both sides are
/// non-empty.
pub fn candidate_cuts(region: &Region) -> Vec<(usize, f64)> {
    let dim = region.lo.len();
    let mut out = Vec::new();
    for d in 0..dim {
        let mut vals: Vec<f64> = region.points.iter().map(|p| p.point[d]).collect();
        vals.sort_by(f64::total_cmp);
        let n = vals.len();
        for q in 1..10 {
            let i = (q * n / 10).clamp(1, n - 1);
            let c = 0.5 * (vals[i - 1] + vals[i]);
            if c > vals[0] && c > region.lo[d] && c < region.hi[d] && !out.contains(&(d, c)) {
                out.push((d, c));
            }
        }
    }
    out
}

/// `n_left * n_right * (mean_left - mean_right)^2`.
pub fn cut_score(region: &Region, dim: usize, value: f64) -> f64 {
    let (mut nl, mut sl, mut nr, mut sr) = (0usize, 0.0, 0usize, 0.0);
    for p in &region.points {
        if p.point[dim] < value {
            nl += 1;
            sl += p.interest;
        } else {
            nr += 1;
            sr += p.interest;
        }
    }
    if nl == 0 || nr == 0 {
        return 0.0;
    }
    let (ml, mr) = (sl / nl as f64, sr / nr as f64);
    let d = ml - mr;
    // Means of identical values may differ by rounding only.
    if d.abs() <= 1e-12 * ml.abs().max(mr.abs()) {
        return 0.0;
    }
    (nl * nr) as f64 * d * d
}

/// Best-scoring candidate cut; degenerate fields fall back to the midpoint
/// of the widest dimension.
pub fn choose_cut(region: &Region) -> Cut {
    let mut best: Option<Cut> = None;
    for (dim, value) in candidate_cuts(region) {
        let score = cut_score(region, dim, value);
        if score > 0.0 && best.is_none_or(|b| score > b.score) {
            best = Some(Cut { dim, value, score });
        }
    }
    best.unwrap_or_else(|| {
        let dim = (0..region.lo.len())
            .max_by(|a, b| {
                let wa = region.hi[*a] - region.lo[*a];
                let wb = region.hi[*b] - region.lo[*b];
                wa.total_cmp(&wb).then(b.cmp(a))
            })
            .unwrap();
        Cut {
            dim,
            value: 0.5 * (region.lo[dim] + region.hi[dim]),
            score: 0.0,
        }
    })
}

/// Cells narrower than this are never split again; they drop old entries.
const MIN_WIDTH: f64 = 1e-6;

/// Per-subspace partitions plus the strategy interest they carry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterestMap {
    pub params: InterestParams,
    pub strategies: usize,
    regions: Vec<Region>,
    next_id: usize,
    time: u64,
}

/// A selected goal together with the strategy to pursue it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Choice {
    pub goal: Outcome,
    pub strategy: usize,
    pub region: usize,
    /// Whether the choice came from the uniform branch.
    pub random: bool,
}

impl InterestMap {
    pub fn new(spaces: &OutcomeSpaces, strategies: usize, params: InterestParams) -> InterestMap {
        assert!(strategies >= 1, "at least one strategy is required");
        let mut map = InterestMap {
            params,
            strategies,
            regions: Vec::new(),
            next_id: 0,
            time: 0,
        };
        for s in spaces.enabled() {
            let dim = s.dim();
            map.push_region(s, vec![0.0; dim], vec![1.0; dim], Vec::new());
        }
        map
    }

    fn push_region(&mut self, space: SubspaceId, lo: Vec<f64>, hi: Vec<f64>, points: Vec<InterestPoint>) {
        self.regions.push(Region {
            id: self.next_id,
            space,
            lo,
            hi,
            points,
        });
        self.next_id += 1;
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn regions_of(&self, space: SubspaceId) -> impl Iterator<Item = &Region> {
        self.regions.iter().filter(move |r| r.space == space)
    }

    pub fn region_index(&self, space: SubspaceId, p: &Normalized) -> Option<usize> {
        self.regions
            .iter()
            .position(|r| r.space == space && r.contains(p))
    }

    pub fn region_id_of(&self, spaces: &OutcomeSpaces, o: &Outcome) -> Option<usize> {
        self.region_index(o.space, &spaces.normalize(o))
            .map(|i| self.regions[i].id)
    }

    /// Inserts one interest entry into the region owning `o`, splitting as
    /// needed. Outcomes of subspaces without regions are ignored.
    pub fn insert(&mut self, spaces: &OutcomeSpaces, o: &Outcome, strategy: usize, interest: f64) {
        let p = spaces.normalize(o);
        self.insert_normalized(o.space, p, strategy, interest);
    }

    pub fn insert_normalized(&mut self, space: SubspaceId, p: Normalized, strategy: usize, interest: f64) {
        assert!(strategy < self.strategies, "unknown strategy index");
        let Some(i) = self.region_index(space, &p) else {
            return;
        };
        self.time += 1;
        self.regions[i].points.push(InterestPoint {
            point: p,
            strategy,
            interest,
            time: self.time,
        });
        self.split_if_needed(i);
    }

    fn split_if_needed(&mut self, i: usize) {
        let mut pending = vec![i];
        while let Some(i) = pending.pop() {
            if self.regions[i].points.len() <= self.params.split_threshold {
                continue;
            }
            let cut = choose_cut(&self.regions[i]);
            let r = &self.regions[i];
            if r.hi[cut.dim] - r.lo[cut.dim] < MIN_WIDTH {
                let excess = r.points.len() - self.params.split_threshold;
                self.regions[i].points.drain(..excess);
                continue;
            }
            let parent = self.regions.swap_remove(i);
            let (left, right): (Vec<_>, Vec<_>) = parent
                .points
                .iter()
                .partition(|p| p.point[cut.dim] < cut.value);
            let mut lhi = parent.hi.clone();
            lhi[cut.dim] = cut.value;
            let mut rlo = parent.lo.clone();
            rlo[cut.dim] = cut.value;
            self.push_region(parent.space, parent.lo.clone(), lhi, left);
            self.push_region(parent.space, rlo, parent.hi.clone(), right);
            let n = self.regions.len();
            pending.push(n - 1);
            pending.push(n - 2);
        }
    }

    /// Roulette-wheel choice of (region, strategy) weighted by interest, with
    /// an `epsilon` share (and every all-zero case) drawn uniformly; the goal
    /// is then uniform inside the chosen region. `allowed` restricts the
    /// strategies that may be chosen.
    pub fn select<R: Rng + ?Sized>(&self, spaces: &OutcomeSpaces, allowed: &[usize], rng: &mut R) -> Choice {
        assert!(!allowed.is_empty(), "no strategy to choose from");
        let window = self.params.window;
        let mut total = 0.0;
        let mut weights = Vec::with_capacity(self.regions.len() * allowed.len());
        for (ri, r) in self.regions.iter().enumerate() {
            for &s in allowed {
                let w = r.strategy_interest(s, window).max(0.0);
                if w > 0.0 {
                    total += w;
                    weights.push((ri, s, w));
                }
            }
        }
        let uniform = total <= 0.0 || rng.random::<f64>() < self.params.epsilon;
        if uniform {
            let enabled: Vec<SubspaceId> = spaces.enabled().collect();
            let space = enabled[rng.random_range(0..enabled.len())];
            let goal = spaces.sample(space, rng);
            let strategy = allowed[rng.random_range(0..allowed.len())];
            let region = self.region_id_of(spaces, &goal).unwrap_or(usize::MAX);
            return Choice {
                goal,
                strategy,
                region,
                random: true,
            };
        }
        let mut x = rng.random::<f64>() * total;
        let mut pick = *weights.last().unwrap();
        for w in &weights {
            if x < w.2 {
                pick = *w;
                break;
            }
            x -= w.2;
        }
        let r = &self.regions[pick.0];
        let n = r.sample_goal(rng);
        Choice {
            goal: spaces.denormalize(r.space, &n[..r.space.dim()]),
            strategy: pick.1,
            region: r.id,
            random: false,
        }
    }

    /// Checks that the regions of every subspace tile its unit cube: volumes
    /// sum to one and every stored point lies in its own region only.
    pub fn check_tiling(&self) -> bool {
        let mut spaces: Vec<SubspaceId> = self.regions.iter().map(|r| r.space).collect();
        spaces.sort();
        spaces.dedup();
        for s in spaces {
            let vol: f64 = self.regions_of(s).map(|r| r.volume()).sum();
            if (vol - 1.0).abs() > 1e-9 {
                return false;
            }
            for r in self.regions_of(s) {
                for p in &r.points {
                    if !r.contains(&p.point) || self.regions_of(s).filter(|o| o.contains(&p.point)).count() != 1 {
                        return false;
                    }
                }
                if r.points.len() > self.params.split_threshold {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::TableGeometry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spaces() -> OutcomeSpaces {
        OutcomeSpaces::for_table(&TableGeometry::default(), false)
    }

    #[test]
    fn competence_cases() {
        let sp = spaces();
        let g = Outcome::touch([0.5, 0.5]);
        assert_eq!(competence(&sp, &g, &[g], 5.0), 0.0);
        assert_eq!(competence(&sp, &g, &[], 5.0), 5.0);
        let a = Outcome::touch([0.8, 0.5]);
        let b = Outcome::touch([0.5, 1.0]);
        assert!((competence(&sp, &g, &[a, b], 5.0) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn interest_scales_with_cost() {
        assert_eq!(interest(5.0, 1.0), 5.0);
        assert_eq!(interest(5.0, 10.0), 0.5);
    }

    #[test]
    fn ledger_is_a_running_minimum() {
        let sp = spaces();
        let mut l = CompetenceLedger::new(0.05);
        let g = Outcome::touch([0.31, 0.42]);
        assert_eq!(l.improve(&sp, &g, 0.4), 0.4);
        assert_eq!(l.improve(&sp, &g, 0.6), 0.4);
        assert_eq!(l.improve(&sp, &Outcome::touch([0.311, 0.421]), 0.1), 0.1);
        assert_eq!(l.get(&sp, &g), Some(0.1));
    }

    fn region_with(points: Vec<([f64; 2], f64)>) -> Region {
        Region {
            id: 0,
            space: SubspaceId::TOUCH,
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
            points: points
                .into_iter()
                .enumerate()
                .map(|(i, (p, interest))| InterestPoint {
                    point: [p[0], p[1], 0.0, 0.0],
                    strategy: 0,
                    interest,
                    time: i as u64,
                })
                .collect(),
        }
    }

    #[test]
    fn separable_field_is_cut_between_halves() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = (0..81)
            .map(|i| {
                let x = if i < 40 { rng.random_range(0.0..0.5) } else { rng.random_range(0.5..1.0) };
                ([x, rng.random::<f64>()], if x < 0.5 { 1.0 } else { 0.0 })
            })
            .collect();
        let r = region_with(pts);
        let c = choose_cut(&r);
        assert_eq!(c.dim, 0);
        let left_max = r.points.iter().filter(|p| p.interest == 1.0).map(|p| p.point[0]).fold(0.0, f64::max);
        let right_min = r.points.iter().filter(|p| p.interest == 0.0).map(|p| p.point[0]).fold(1.0, f64::min);
        assert!(c.value > left_max && c.value < right_min);
    }

    #[test]
    fn uniform_interest_splits_widest_midpoint() {
        let mut r = region_with((0..81).map(|i| ([i as f64 / 81.0, 0.3], 0.7)).collect());
        r.hi[1] = 0.5;
        let c = choose_cut(&r);
        assert_eq!((c.dim, c.value), (0, 0.5));
    }

    #[test]
    fn chosen_cut_is_the_best_candidate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let r = region_with(
                (0..81)
                    .map(|_| ([rng.random(), rng.random()], rng.random::<f64>()))
                    .collect(),
            );
            let c = choose_cut(&r);
            let best = candidate_cuts(&r)
                .into_iter()
                .map(|(d, v)| cut_score(&r, d, v))
                .fold(0.0, f64::max);
            assert_eq!(c.score, best);
        }
    }

    #[test]
    fn identical_points_keep_the_threshold() {
        let sp = spaces();
        let mut m = InterestMap::new(&sp, 1, InterestParams::default());
        for _ in 0..500 {
            m.insert(&sp, &Outcome::touch([0.25, 0.25]), 0, 1.0);
        }
        assert!(m.check_tiling());
    }

    #[test]
    fn selection_is_fitness_proportionate() {
        let sp = spaces();
        let mut m = InterestMap::new(&sp, 2, InterestParams {
            epsilon: 0.0,
            ..Default::default()
        });
        m.insert(&sp, &Outcome::touch([0.5, 0.5]), 0, 3.0);
        m.insert(&sp, &Outcome::touch([0.5, 0.5]), 1, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10_000;
        let first = (0..n)
            .filter(|_| m.select(&sp, &[0, 1], &mut rng).strategy == 0)
            .count();
        let expected = 0.75 * n as f64;
        let chi2 = (first as f64 - expected).powi(2) / expected
            + ((n - first) as f64 - 0.25 * n as f64).powi(2) / (0.25 * n as f64);
        // 1 degree of freedom, p = 0.01.
        assert!(chi2 < 6.635, "chi2 = {chi2}");
    }

    #[test]
    fn zero_interest_is_uniform() {
        let sp = spaces();
        let m = InterestMap::new(&sp, 3, InterestParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = m.select(&sp, &[0, 1, 2], &mut rng);
        assert!(c.random);
    }
}
