//! End-to-end acceptance checks, one line per criterion.
//!
//! Unit-level criteria run against independent reimplementations; the
//! behavioural criteria run full 5,000-iteration batches (simulation,
//! physical and left-arm profiles, 10 seeds each). Batch outputs go to
//! `$SGIM_ACCEPTANCE_DIR` when set (completed cells are then reused on the
//! next run), otherwise to a temporary directory.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use sgim_core::arm::{execute_sequence, ArmModel, Point};
use sgim_core::batch::{load_cell, run_batch, BatchReport, EVALUATIONS_FILE, REACH_RADIUS};
use sgim_core::config::{Config, Profile, StrategyParams, Variant};
use sgim_core::dmp::{integrate_primitive, ActionSequence, DmpConstants, DmpParams, PrimitiveSpace, JOINTS};
use sgim_core::eval::{
    action_length_table, learning_procedure_usage, procedure_usage_table, read_evaluations, strategy_task_counts, Cell,
    HistogramRow,
};
use sgim_core::interest::{interest, InterestMap, InterestParams};
use sgim_core::learner::{EpisodeLog, Environment, Learner};
use sgim_core::memory::{outcome_histogram, Memory};
use sgim_core::outcome::{Outcome, OutcomeSpaces, SubspaceId};
use sgim_core::table::{SoundParams, TableConfig, TableGeometry, TableState};
use sgim_core::teachers::{write_transfer_lump, Rule, Teacher, TeacherKind};

struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        if pass {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

// ---------------------------------------------------------------------------
// Sound formulas

/// Independent reimplementation of the burst and maintain sounds.
fn oracle_sound(g: &TableGeometry, blue: Point, green: Point, touch: Point) -> [f64; 4] {
    let (x0, y0) = (g.origin[0], g.origin[1]);
    let (x1, y1) = (x0 + g.width, y0 + g.height);
    let diag = (g.width * g.width + g.height * g.height).sqrt();
    let d_min = [(x0, y0), (x1, y0), (x0, y1), (x1, y1)]
        .iter()
        .map(|(cx, cy)| ((blue[0] - cx).powi(2) + (blue[1] - cy).powi(2)).sqrt())
        .fold(f64::INFINITY, f64::min);
    let f = 4.0 * (diag / 4.0 - d_min) / diag;
    let r_min = 2.0 * g.object_radius;
    let (dx, dy) = (green[0] - blue[0], green[1] - blue[1]);
    let r = (dx * dx + dy * dy).sqrt().max(r_min);
    let l = 1.0 - 2.0 * (r / r_min).ln() / (diag / r_min).ln();
    let b = 0.95 * dy.atan2(dx).abs() / PI + 0.05;
    let t = ((touch[0] - green[0]).powi(2) + (touch[1] - green[1]).powi(2)).sqrt() / diag;
    [f, l, b, t]
}

fn state_with(geometry: TableGeometry, blue: Point, green: Point) -> TableState {
    let mut s = TableState::reset(&TableConfig {
        geometry,
        blue,
        green,
    });
    s.burst = Some(s.burst_sound());
    s
}

fn sounds(geometry: TableGeometry, blue: Point, green: Point, touch: Point) -> (SoundParams, SoundParams) {
    let s = state_with(geometry, blue, green);
    let burst = s.burst_sound();
    let maintained = s.maintain_sound(&touch).expect("burst emitted");
    (burst, maintained)
}

fn check_sounds(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let g = TableGeometry {
            origin: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            width: rng.random_range(0.5..2.0),
            height: rng.random_range(0.5..2.0),
            object_radius: rng.random_range(0.01..0.1),
        };
        let pt = |rng: &mut ChaCha8Rng| {
            [
                g.origin[0] + rng.random_range(0.0..=g.width),
                g.origin[1] + rng.random_range(0.0..=g.height),
            ]
        };
        let (blue, green, touch) = (pt(&mut rng), pt(&mut rng), pt(&mut rng));
        let (burst, m) = sounds(g, blue, green, touch);
        let want = oracle_sound(&g, blue, green, touch);
        let got = [burst.f, burst.l, burst.b, m.t.expect("maintain duration")];
        assert!(burst.t.is_none() && (m.f, m.l, m.b) == (burst.f, burst.l, burst.b));
        for k in 0..4 {
            worst = worst.max((got[k] - want[k]).abs());
        }
    }
    let g = TableGeometry::default();
    let d = 2.0 * g.object_radius;
    let corner = sounds(g, [0.0, 0.0], [0.5, 0.5], [0.5, 0.5]).0.f;
    let touching = sounds(g, [0.5, 0.5], [0.5 + d, 0.5], [0.0, 0.0]).0.l;
    let west = sounds(g, [0.6, 0.5], [0.3, 0.5], [0.0, 0.0]).0.b;
    let on_green = sounds(g, [0.3, 0.3], [0.7, 0.6], [0.7, 0.6]).1.t;
    let boundary = corner == 1.0 && touching == 1.0 && west == 1.0 && on_green == Some(0.0);
    r.check(
        "sound formulas",
        worst < 1e-12 && boundary,
        format!(
            "max |diff| = {worst:.2e} over 1000 configurations (< 1e-12); \
             corner f = {corner}, touching l = {touching}, |phi| = pi b = {west}, on-green t = {on_green:?}"
        ),
    );
}

// ---------------------------------------------------------------------------
// Performance and interest arithmetic

fn check_perf_interest(r: &mut Report) {
    let spaces = OutcomeSpaces::for_table(&TableGeometry::default(), false);
    let a = Outcome::touch([0.1, 0.1]);
    let b = Outcome::touch([0.4, 0.5]);
    let gamma = sgim_core::memory::MemoryParams::default().gamma;
    // distance 0.5, multiplied by 1.2^n
    let perf_table = [(0, 0.5), (1, 0.6), (2, 0.72), (4, 1.0368), (8, 2.14990848)];
    let mut worst: f64 = 0.0;
    for (n, want) in perf_table {
        worst = worst.max((spaces.perf(&a, &b, n, gamma).unwrap() - want).abs());
    }
    let costs = StrategyParams::default();
    // autonomous, procedural teacher, action teacher
    let cost_values = [costs.cost_autonomous, costs.cost_procedural_teacher, costs.cost_action_teacher];
    let interest_table = [(0.3, 0, 0.3), (0.3, 1, 0.06), (0.3, 2, 0.03), (0.0, 1, 0.0), (5.0, 2, 0.5)];
    for (progress, k, want) in interest_table {
        worst = worst.max((interest(progress, cost_values[k]) - want).abs());
    }
    r.check(
        "perf/interest arithmetic",
        gamma == 1.2 && cost_values == [1.0, 5.0, 10.0] && worst < 1e-12,
        format!("gamma = {gamma}, costs = {cost_values:?}, max |diff| = {worst:.2e} on 10 tabulated cases"),
    );
}

// ---------------------------------------------------------------------------
// DMP contract

fn check_dmp(r: &mut Report) {
    let arm = ArmModel::default();
    let consts = DmpConstants::default();
    let space = PrimitiveSpace {
        weight_bound: Config::default().weight_bound,
        limits: arm.limits.clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut reach_err, mut dt_err): (f64, f64) = (0.0, 0.0);
    let fine = DmpConstants {
        dt: consts.dt / 2.0,
        ..consts
    };
    for _ in 0..200 {
        let p = space.sample(&mut rng);
        let zero = DmpParams::reach(p.goals());
        let end = *integrate_primitive(&zero, &arm.initial, &consts, &arm.limits).end();
        for j in 0..JOINTS {
            reach_err = reach_err.max((end[j] - zero.joints[j].goal).abs());
        }
        let coarse = *integrate_primitive(&p, &arm.initial, &consts, &arm.limits).end();
        let finer = *integrate_primitive(&p, &arm.initial, &fine, &arm.limits).end();
        for j in 0..JOINTS {
            dt_err = dt_err.max((coarse[j] - finer[j]).abs());
        }
    }
    let mut continuous = true;
    for _ in 0..100 {
        let n = rng.random_range(2..=8);
        let seq = ActionSequence::new((0..n).map(|_| space.sample(&mut rng)).collect(), 8).unwrap();
        let runs = execute_sequence(&seq, &arm, &consts, 8).unwrap();
        continuous &= runs[0].joints.start() == &arm.initial;
        for w in runs.windows(2) {
            continuous &= w[1].joints.start() == w[0].joints.end() && w[1].tip[0] == w[0].end_tip();
        }
    }
    r.check(
        "DMP contract",
        reach_err < 1e-3 && dt_err < 1e-3 && continuous,
        format!(
            "zero-forcing goal error {reach_err:.2e} rad (< 1e-3), dt halving moves endpoints {dt_err:.2e} rad (< 1e-3), \
             chaining continuity exact: {continuous}"
        ),
    );
}

// ---------------------------------------------------------------------------
// Interest map

fn check_tiling(r: &mut Report) {
    let spaces = OutcomeSpaces::for_table(&TableGeometry::default(), true);
    let mut map = InterestMap::new(&spaces, 3, InterestParams::default());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let enabled: Vec<SubspaceId> = spaces.enabled().collect();
    let mut ok = true;
    for op in 1..=100_000 {
        let s = enabled[rng.random_range(0..enabled.len())];
        // A third of the points pile onto a few hot spots to force deep splits.
        let o = if rng.random_bool(1.0 / 3.0) {
            let centre = spaces.denormalize(s, &vec![0.25 * rng.random_range(1..4) as f64; s.dim()]);
            centre
        } else {
            spaces.sample(s, &mut rng)
        };
        map.insert(&spaces, &o, rng.random_range(0..3), rng.random_range(0.0..1.0));
        if op % 20_000 == 0 {
            ok &= map.check_tiling();
        }
    }
    let mut probes_ok = true;
    for &s in &enabled {
        for _ in 0..2_000 {
            let p = spaces.normalize(&spaces.sample(s, &mut rng));
            probes_ok &= map.regions_of(s).filter(|reg| reg.contains(&p)).count() == 1;
        }
    }
    r.check(
        "interest map tiling",
        ok && probes_ok,
        format!(
            "{} regions after 1e5 inserts; volumes and membership consistent: {ok}; every probe in exactly one region: {probes_ok}",
            map.regions().len()
        ),
    );
}

fn check_roulette(r: &mut Report) {
    let spaces = OutcomeSpaces::for_table(&TableGeometry::default(), false);
    let params = InterestParams::default();
    let mut map = InterestMap::new(&spaces, 3, params);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..400 {
        let o = spaces.sample(SubspaceId::TOUCH, &mut rng);
        let field = o.coords()[0] * 2.0;
        map.insert(&spaces, &o, rng.random_range(0..3), field * rng.random_range(0.5..1.0));
    }
    map.insert(&spaces, &Outcome::new(SubspaceId::BURST, &[0.1, 0.2, 0.3]).unwrap(), 2, 1.5);
    map.insert(&spaces, &Outcome::new(SubspaceId::BLUE, &[0.5, 0.5]).unwrap(), 1, 0.7);
    let allowed = [0, 1, 2];
    let window = params.window;
    let enabled = spaces.enabled().count() as f64;
    let mut expected: HashMap<(usize, usize), f64> = HashMap::new();
    let total: f64 = map
        .regions()
        .iter()
        .flat_map(|reg| allowed.iter().map(move |&s| reg.strategy_interest(s, window).max(0.0)))
        .sum();
    for reg in map.regions() {
        for &s in &allowed {
            let w = reg.strategy_interest(s, window).max(0.0);
            let p = (1.0 - params.epsilon) * w / total + params.epsilon * reg.volume() / enabled / allowed.len() as f64;
            expected.insert((reg.id, s), p);
        }
    }
    let draws = 10_000;
    let mut observed: HashMap<(usize, usize), usize> = HashMap::new();
    for _ in 0..draws {
        let c = map.select(&spaces, &allowed, &mut rng);
        *observed.entry((c.region, c.strategy)).or_default() += 1;
    }
    // Pool cells expecting fewer than 5 draws into one bin.
    let (mut chi2, mut bins) = (0.0, 0);
    let (mut small_e, mut small_o) = (0.0, 0usize);
    for (key, p) in &expected {
        let e = p * draws as f64;
        let o = observed.get(key).copied().unwrap_or(0);
        if e < 5.0 {
            small_e += e;
            small_o += o;
        } else {
            chi2 += (o as f64 - e).powi(2) / e;
            bins += 1;
        }
    }
    if small_e > 0.0 {
        chi2 += (small_o as f64 - small_e).powi(2) / small_e;
        bins += 1;
    }
    let unexpected = observed.keys().filter(|k| !expected.contains_key(k)).count();
    let p_value = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
    r.check(
        "roulette selection",
        p_value > 0.01 && unexpected == 0,
        format!("chi2 = {chi2:.2} over {bins} bins, p = {p_value:.3} (> 0.01), 1e4 draws"),
    );
}

// ---------------------------------------------------------------------------
// Batches

struct Cells {
    report: BatchReport,
    loaded: BTreeMap<(Variant, u64), (Environment, Memory, Vec<EpisodeLog>)>,
}

impl Cells {
    fn run(config: &Config) -> Cells {
        let start = Instant::now();
        let report = run_batch(config).expect("batch runs");
        println!(
            "# {} batch: {} cells in {:.0} s",
            config.profile,
            report.cells.len(),
            start.elapsed().as_secs_f64()
        );
        let loaded = report
            .cells
            .iter()
            .map(|c| {
                let dir = report.dir_of(c.variant, c.seed);
                ((c.variant, c.seed), load_cell(&dir).expect("cell reloads"))
            })
            .collect();
        Cells { report, loaded }
    }

    fn of(&self, v: Variant) -> impl Iterator<Item = &(Environment, Memory, Vec<EpisodeLog>)> {
        self.loaded.iter().filter(move |((cv, _), _)| *cv == v).map(|(_, c)| c)
    }

    fn median_global(&self, v: Variant) -> f64 {
        median(self.report.cells_of(v).map(|c| c.final_evaluation.global).collect())
    }

    fn median_reach(&self, v: Variant) -> f64 {
        median(self.report.cells_of(v).map(|c| c.reach_complex).collect())
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Sums histogram counts over several tables: goal space -> key -> count.
fn pool<K: Ord + Clone>(tables: impl Iterator<Item = Vec<HistogramRow<K>>>) -> BTreeMap<SubspaceId, BTreeMap<K, usize>> {
    let mut out: BTreeMap<SubspaceId, BTreeMap<K, usize>> = BTreeMap::new();
    for t in tables {
        for row in t {
            *out.entry(row.goal_space).or_default().entry(row.key).or_default() += row.count;
        }
    }
    out
}

fn modal<K: Clone>(counts: &BTreeMap<K, usize>, keep: impl Fn(&K) -> bool) -> Option<(K, usize)> {
    counts
        .iter()
        .filter(|(k, _)| keep(k))
        .max_by_key(|(_, c)| **c)
        .map(|(k, c)| (k.clone(), *c))
}

fn pair(a: u8, b: u8) -> Cell {
    Some((SubspaceId(a), SubspaceId(b)))
}

fn fmt_cell(c: &Cell) -> String {
    match c {
        Some((a, b)) => format!("({},{})", a.0, b.0),
        None => "none".into(),
    }
}

fn batch_config(profile: Profile, variants: &[Variant], output: PathBuf) -> Config {
    Config {
        variants: variants.to_vec(),
        seeds: (0..10).collect(),
        output,
        ..Config::for_profile(profile)
    }
}

fn check_ordering(r: &mut Report, sim: &Cells) {
    let [pb, acts, im, ra] = [Variant::SgimPb, Variant::SgimActs, Variant::ImPb, Variant::RandomAction]
        .map(|v| sim.median_global(v));
    r.check(
        "variant ordering",
        pb < acts && acts < im.min(ra),
        format!("median final global error SGIM-PB {pb:.4} < SGIM-ACTS {acts:.4} < min(IM-PB {im:.4}, RandomAction {ra:.4})"),
    );
    let [rpb, rim, rra] = [Variant::SgimPb, Variant::ImPb, Variant::RandomAction].map(|v| sim.median_reach(v));
    r.check(
        "complex-subspace reach",
        rim < 0.05 && rra < 0.05 && rpb > 0.5,
        format!(
            "median share of Omega3/Omega4 goals within {REACH_RADIUS}: IM-PB {:.1}% (< 5%), RandomAction {:.1}% (< 5%), SGIM-PB {:.1}% (> 50%)",
            100.0 * rim,
            100.0 * rra,
            100.0 * rpb
        ),
    );
}

fn check_hierarchy(r: &mut Report, sim: &Cells) {
    let counts = pool(sim.of(Variant::SgimPb).map(|(env, mem, _)| procedure_usage_table(mem, &env.testbench)));
    let mut pass = true;
    let mut parts = Vec::new();
    for s in [1u8, 2, 3, 4] {
        let row = &counts[&SubspaceId(s)];
        let total: usize = row.values().sum();
        let merged = |c: &Cell| -> Cell {
            match c {
                Some((a, b)) if (a.0, b.0) == (2, 1) => pair(1, 2),
                other => *other,
            }
        };
        let mut by_cell: BTreeMap<Cell, usize> = BTreeMap::new();
        for (k, c) in row {
            *by_cell.entry(merged(k)).or_default() += c;
        }
        let (cell, n) = modal(&by_cell, |k| k.is_some()).expect("some procedure used");
        let want = if s <= 2 { pair(0, 0) } else { pair(1, 2) };
        let share = 100.0 * n as f64 / total as f64;
        pass &= cell == want && share >= 40.0;
        parts.push(format!("Omega{s} modal {} {share:.1}%", fmt_cell(&cell)));
    }
    r.check(
        "hierarchy discovery",
        pass,
        format!("{} (want (0,0) for 1-2, (1,2) for 3-4, >= 40%)", parts.join(", ")),
    );
}

fn modal_lengths(cells: &Cells, v: Variant) -> BTreeMap<SubspaceId, usize> {
    pool(cells.of(v).map(|(env, mem, _)| action_length_table(mem, &env.testbench)))
        .iter()
        .filter_map(|(s, row)| modal(row, |_| true).map(|(len, _)| (*s, len)))
        .collect()
}

fn check_lengths(r: &mut Report, sim: &Cells, physical: &Cells) {
    let m = modal_lengths(sim, Variant::SgimPb);
    let get = |s: u8| m.get(&SubspaceId(s)).copied().unwrap_or(0);
    let sim_ok = (1..=2).contains(&get(0)) && get(1) == 2 && get(2) == 2 && get(3) == 4 && get(4) == 4;
    let pm = modal_lengths(physical, Variant::SgimPb);
    let omega5 = pm.get(&SubspaceId::MAINTAINED).copied().unwrap_or(0);
    let count5 = |v: Variant| -> Vec<usize> {
        physical
            .of(v)
            .map(|(_, mem, _)| outcome_histogram(mem)[SubspaceId::MAINTAINED.index()])
            .collect()
    };
    let acts5 = count5(Variant::SgimActs);
    let pb5 = count5(Variant::SgimPb);
    r.check(
        "action-length adaptation",
        sim_ok && omega5 == 5 && acts5.iter().all(|n| *n == 0) && pb5.iter().all(|n| *n >= 1),
        format!(
            "modal lengths Omega0..4 = [{}, {}, {}, {}, {}] (want <=2, 2, 2, 4, 4); physical Omega5 modal {omega5} (want 5); \
             Omega5 outcomes per seed SGIM-ACTS {acts5:?} (want 0), SGIM-PB min {} (want >= 1)",
            get(0),
            get(1),
            get(2),
            get(3),
            get(4),
            pb5.iter().min().unwrap_or(&0)
        ),
    );
}

/// Ordered pair of subspaces a teacher's demonstrations decompose into.
fn decomposition(t: &Teacher) -> Option<(u8, u8)> {
    match &t.kind {
        TeacherKind::Rule { rule, .. } => Some(match rule {
            Rule::PickPlace(_) => (0, 0),
            Rule::Project | Rule::Sound => (1, 2),
        }),
        TeacherKind::Repertoire { demos } => demos.first().map(|(p, _)| {
            let (a, b) = p.spaces();
            (a.0, b.0)
        }),
        TeacherKind::Action { .. } => None,
    }
}

fn check_teachers(r: &mut Report, sim: &Cells) {
    let (env, _, _) = sim.of(Variant::SgimPb).next().expect("SGIM-PB cells");
    let teachers: HashMap<&str, &Teacher> = env.teachers.iter().map(|t| (t.name.as_str(), t)).collect();
    let mut counts: BTreeMap<SubspaceId, BTreeMap<String, usize>> = BTreeMap::new();
    for (env, _, episodes) in sim.of(Variant::SgimPb) {
        for c in strategy_task_counts(episodes, env.config.choice_window) {
            if teachers.contains_key(c.strategy.as_str()) {
                *counts.entry(c.goal_space).or_default().entry(c.strategy).or_default() += c.count;
            }
        }
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for s in [1u8, 2, 3, 4].map(SubspaceId) {
        let Some((best, n)) = counts.get(&s).and_then(|row| modal(row, |_| true)) else {
            pass = false;
            parts.push(format!("Omega{}: no consultation", s.0));
            continue;
        };
        let expert = env.teachers.iter().find(|t| t.is_procedural() && t.covers(s));
        let chosen = teachers[best.as_str()];
        let ok = chosen.covers(s)
            || expert.is_some_and(|e| decomposition(e).is_some() && decomposition(e) == decomposition(chosen));
        pass &= ok;
        parts.push(format!("Omega{} -> {best} ({n})", s.0));
    }
    r.check(
        "teacher expertise",
        pass,
        format!("most-consulted teacher per goal subspace, pooled over seeds: {}", parts.join(", ")),
    );
}

/// Share of procedure-based learning episodes that used (Omega1, Omega2).
fn learning_share_12(cells: &Cells, v: Variant) -> f64 {
    let pooled = pool(cells.of(v).map(|(_, _, episodes)| learning_procedure_usage(episodes)));
    let (mut hit, mut total) = (0usize, 0usize);
    for row in pooled.values() {
        for (k, c) in row {
            total += c;
            if *k == pair(1, 2) {
                hit += c;
            }
        }
    }
    hit as f64 / total.max(1) as f64
}

fn check_transfer(r: &mut Report, left: &Cells) {
    let pb = left.median_global(Variant::SgimPb);
    let tl = left.median_global(Variant::SgimTl);
    let rel = (tl - pb).abs() / pb;
    r.check(
        "transfer parity",
        rel < 0.10,
        format!("left-arm median final global error SGIM-TL {tl:.4} vs SGIM-PB {pb:.4}: {:.1}% apart (< 10%)", 100.0 * rel),
    );
    let mut equal = 0;
    let seeds: Vec<u64> = left.report.cells_of(Variant::SgimPb).map(|c| c.seed).collect();
    for &seed in &seeds {
        let first = |v| {
            read_evaluations(&left.report.dir_of(v, seed).join(EVALUATIONS_FILE)).expect("evaluations")[0].clone()
        };
        let (a, b) = (first(Variant::SgimPb), first(Variant::SgimTl));
        if a.iteration == 0 && a == b {
            equal += 1;
        }
    }
    r.check(
        "transfer isolation",
        equal == seeds.len() && !seeds.is_empty(),
        format!("iteration-0 evaluation identical for {equal}/{} seeds", seeds.len()),
    );
    let (s_tl, s_pb) = (learning_share_12(left, Variant::SgimTl), learning_share_12(left, Variant::SgimPb));
    r.check(
        "transfer procedure exploration",
        s_tl > s_pb,
        format!(
            "(Omega1,Omega2) share of procedure learning episodes, pooled over seeds: SGIM-TL {:.1}% > SGIM-PB {:.1}%",
            100.0 * s_tl,
            100.0 * s_pb
        ),
    );
}

fn check_progress(r: &mut Report, batches: &[&Cells]) {
    let (mut n, mut bad) = (0usize, 0usize);
    for cells in batches {
        for (_, _, episodes) in cells.loaded.values() {
            for e in episodes {
                n += 1;
                if !(e.progress >= 0.0 && e.min_progress >= 0.0) {
                    bad += 1;
                }
            }
        }
    }
    r.check(
        "progress non-negativity",
        bad == 0 && n > 0,
        format!("{bad} negative progress values over {n} logged episodes"),
    );
}

fn make_lump(dir: &Path) -> PathBuf {
    let path = dir.join("transfer_lump.jsonl");
    if !path.exists() {
        let config = Config::for_profile(Profile::Simulation);
        let env = Environment::prepare(&config).expect("simulation environment");
        let mut learner = Learner::new(&env, Variant::SgimPb, 100);
        learner
            .run(config.iterations, config.iterations, &env.testbench, |_| Ok(()))
            .expect("lump run");
        let records = learner.memory().procedures().to_vec();
        write_transfer_lump(&path, &records).expect("lump written");
        println!("# transfer lump: {} procedure records", records.len());
    }
    path
}

fn main() {
    let mut r = Report { passed: 0, failed: 0 };
    check_sounds(&mut r);
    check_perf_interest(&mut r);
    check_dmp(&mut r);
    check_tiling(&mut r);
    check_roulette(&mut r);

    let _tmp;
    let root = match std::env::var_os("SGIM_ACCEPTANCE_DIR") {
        Some(d) => PathBuf::from(d),
        None => {
            _tmp = tempfile::tempdir().expect("temporary directory");
            _tmp.path().to_path_buf()
        }
    };
    let sim = Cells::run(&batch_config(
        Profile::Simulation,
        &[Variant::RandomAction, Variant::ImPb, Variant::SgimActs, Variant::SgimPb],
        root.join("simulation"),
    ));
    check_ordering(&mut r, &sim);
    check_hierarchy(&mut r, &sim);
    let physical = Cells::run(&batch_config(
        Profile::Physical,
        &[Variant::SgimActs, Variant::SgimPb],
        root.join("physical"),
    ));
    check_lengths(&mut r, &sim, &physical);
    check_teachers(&mut r, &sim);

    std::fs::create_dir_all(&root).expect("acceptance directory");
    let lump = make_lump(&root);
    let mut left_cfg = batch_config(Profile::LeftArm, &[Variant::SgimPb, Variant::SgimTl], root.join("left-arm"));
    left_cfg.transfer_lump = Some(lump);
    let left = Cells::run(&left_cfg);
    check_transfer(&mut r, &left);
    check_progress(&mut r, &[&sim, &physical, &left]);

    println!("{} passed, {} failed", r.passed, r.failed);
    if r.failed > 0 {
        std::process::exit(1);
    }
}
