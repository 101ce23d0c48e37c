//! Scripted teachers: action demonstrations found offline by inverse
//! kinematics against the simulator, procedural teachers that decompose a
//! goal by a construction rule or from a finite repertoire, and the loader
//! for transferred procedure records.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arm::{forward_kinematics, ArmModel, Point};
use crate::config::Profile;
use crate::dmp::{integrate_primitive, ActionSequence, DmpParams, JointVector, JOINTS};
use crate::error::{Error, Result};
use crate::memory::{read_dump, write_line, DumpRecord, EpisodeRecord, ProcedureRecord};
use crate::outcome::{Outcome, OutcomeSpaces, Procedure, Reached, SubspaceId};
use crate::table::{dist, ObjectId, TableConfig, TableGeometry};
use crate::world::{Rollout, World};

/// How a procedural teacher decomposes goals of its subspace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Rule {
    /// Object position goal: touch the object where it rests, then touch the
    /// goal position.
    PickPlace(ObjectId),
    /// Both-objects goal: place the first object, then the second.
    Project,
    /// Burst-sound goal: the object placements that produce the sound.
    Sound,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TeacherKind {
    Action { demos: Vec<EpisodeRecord> },
    Rule { rule: Rule, table: TableConfig },
    Repertoire { demos: Vec<(Procedure, Outcome)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Teacher {
    pub name: String,
    /// Subspaces the teacher is an expert of.
    pub spaces: Vec<SubspaceId>,
    pub kind: TeacherKind,
}

impl Teacher {
    pub fn is_procedural(&self) -> bool {
        !matches!(self.kind, TeacherKind::Action { .. })
    }

    pub fn covers(&self, space: SubspaceId) -> bool {
        self.spaces.contains(&space)
    }

    pub fn demo_count(&self) -> usize {
        match &self.kind {
            TeacherKind::Action { demos } => demos.len(),
            TeacherKind::Repertoire { demos } => demos.len(),
            TeacherKind::Rule { .. } => 0,
        }
    }

    /// The demonstration whose outcome is closest to `goal`, with that
    /// outcome and the demo's index.
    pub fn nearest_action_demo(
        &self,
        goal: &Outcome,
        spaces: &OutcomeSpaces,
    ) -> Result<(usize, ActionSequence, Outcome)> {
        let TeacherKind::Action { demos } = &self.kind else {
            return Err(Error::NotApplicable {
                teacher: self.name.clone(),
                space: goal.space,
            });
        };
        if demos.is_empty() {
            return Err(Error::EmptyRepertoire(self.name.clone()));
        }
        let mut best: Option<(f64, usize, Outcome)> = None;
        for (i, d) in demos.iter().enumerate() {
            for r in d.reached.iter().filter(|r| r.outcome.space == goal.space) {
                let dd = spaces.distance(&r.outcome, goal)?;
                if best.is_none_or(|b| dd < b.0) {
                    best = Some((dd, i, r.outcome));
                }
            }
        }
        let (_, i, o) = best.ok_or_else(|| Error::NotApplicable {
            teacher: self.name.clone(),
            space: goal.space,
        })?;
        Ok((i, demos[i].action.clone(), o))
    }

    /// A decomposition of `goal` by rule or nearest repertoire entry.
    pub fn demonstrate_procedure(&self, goal: &Outcome, spaces: &OutcomeSpaces) -> Result<Procedure> {
        if !self.covers(goal.space) {
            return Err(Error::NotApplicable {
                teacher: self.name.clone(),
                space: goal.space,
            });
        }
        match &self.kind {
            TeacherKind::Rule { rule, table } => Ok(apply_rule(*rule, table, goal)),
            TeacherKind::Repertoire { demos } => {
                let mut best: Option<(f64, Procedure)> = None;
                for (p, o) in demos.iter().filter(|(_, o)| o.space == goal.space) {
                    let d = spaces.distance(o, goal)?;
                    if best.is_none_or(|b| d < b.0) {
                        best = Some((d, *p));
                    }
                }
                best.map(|b| b.1)
                    .ok_or_else(|| Error::EmptyRepertoire(self.name.clone()))
            }
            TeacherKind::Action { .. } => Err(Error::NotApplicable {
                teacher: self.name.clone(),
                space: goal.space,
            }),
        }
    }
}

/// Decomposition of `goal` under `rule`; the goal must belong to the rule's
/// subspace.
pub fn apply_rule(rule: Rule, table: &TableConfig, goal: &Outcome) -> Procedure {
    match rule {
        Rule::PickPlace(id) => {
            let rest = match id {
                ObjectId::Blue => table.blue,
                ObjectId::Green => table.green,
            };
            Procedure {
                first: Outcome::touch(rest),
                second: Outcome::touch(goal.point()),
            }
        }
        Rule::Project => {
            let c = goal.coords();
            Procedure {
                first: Outcome::new(SubspaceId::BLUE, &c[0..2]).unwrap(),
                second: Outcome::new(SubspaceId::GREEN, &c[2..4]).unwrap(),
            }
        }
        Rule::Sound => {
            let c = goal.coords();
            let (blue, green) = invert_burst(&table.geometry, c[0], c[1], c[2]).placements();
            Procedure {
                first: Outcome::new(SubspaceId::BLUE, &blue).unwrap(),
                second: Outcome::new(SubspaceId::GREEN, &green).unwrap(),
            }
        }
    }
}

/// Object placements computed from a burst sound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub blue: Point,
    pub green: Point,
    /// Whether the placements lie on the table unclamped, so that they
    /// reproduce the sound exactly.
    pub exact: bool,
}

impl Inversion {
    pub fn placements(&self) -> (Point, Point) {
        (self.blue, self.green)
    }
}

/// Inverts the frequency, level and rhythm formulas: `f` fixes the blue
/// object's distance to its closest corner, `l` the objects' separation and
/// `b` the bearing magnitude. Blue is placed on a corner-to-centre diagonal;
/// the four corners and both bearing signs are tried in a fixed order and the
/// first placement keeping green on the table wins. If none does, the
/// candidate needing the least clamping is clamped.
pub fn invert_burst(geometry: &TableGeometry, f: f64, l: f64, b: f64) -> Inversion {
    let diag = geometry.diagonal();
    let r_min = geometry.min_radius();
    let d_min = diag * (1.0 - f.clamp(-1.0, 1.0)) / 4.0;
    let ln_r = r_min.ln() + (1.0 - l.clamp(-1.0, 1.0)) / 2.0 * (diag.ln() - r_min.ln());
    let r = ln_r.exp();
    let phi = ((b.clamp(0.05, 1.0) - 0.05) / 0.95) * PI;
    let centre = [
        geometry.origin[0] + 0.5 * geometry.width,
        geometry.origin[1] + 0.5 * geometry.height,
    ];
    let mut fallback: Option<(f64, Point, Point)> = None;
    for c in geometry.corners() {
        let len = dist(&c, &centre);
        let u = [(centre[0] - c[0]) / len, (centre[1] - c[1]) / len];
        let blue = [c[0] + d_min * u[0], c[1] + d_min * u[1]];
        for sign in [1.0, -1.0] {
            let a = sign * phi;
            let green = [blue[0] + r * a.cos(), blue[1] + r * a.sin()];
            if geometry.contains(&green) {
                return Inversion {
                    blue,
                    green,
                    exact: true,
                };
            }
            let excess = dist(&green, &geometry.clamp(&green));
            if fallback.is_none_or(|fb| excess < fb.0) {
                fallback = Some((excess, blue, green));
            }
        }
    }
    let (_, blue, green) = fallback.unwrap();
    Inversion {
        blue,
        green: geometry.clamp(&green),
        exact: false,
    }
}

/// Builds action demonstrations by inverse kinematics plus a refinement
/// against the simulated primitive end point.
pub struct DemoSearch<'a> {
    world: &'a World,
    rng: ChaCha8Rng,
}

const TIP_TOLERANCE: f64 = 1e-4;

impl<'a> DemoSearch<'a> {
    pub fn new(world: &'a World, seed: u64) -> DemoSearch<'a> {
        DemoSearch {
            world,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn random_posture(&mut self) -> JointVector {
        let lim = &self.world.arm.limits;
        let mut q = [0.0; JOINTS];
        for (j, v) in q.iter_mut().enumerate() {
            *v = self.rng.random_range(lim.min[j]..=lim.max[j]);
        }
        q
    }

    /// Posture within limits whose tip lies at `target`, by damped least
    /// squares from `init`.
    pub fn inverse_kinematics(arm: &ArmModel, target: Point, init: JointVector) -> Option<JointVector> {
        let mut q = init;
        arm.limits.clamp(&mut q);
        for _ in 0..300 {
            let tip = forward_kinematics(&q, arm);
            let e = [target[0] - tip[0], target[1] - tip[1]];
            if e[0].hypot(e[1]) < 1e-9 {
                return Some(q);
            }
            let jac = jacobian(arm, &q);
            // dq = J^T (J J^T + lambda^2 I)^-1 e
            let lambda2 = 1e-4;
            let mut a = [[lambda2, 0.0], [0.0, lambda2]];
            for j in 0..JOINTS {
                a[0][0] += jac[0][j] * jac[0][j];
                a[0][1] += jac[0][j] * jac[1][j];
                a[1][1] += jac[1][j] * jac[1][j];
            }
            a[1][0] = a[0][1];
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            let y = [
                (a[1][1] * e[0] - a[0][1] * e[1]) / det,
                (a[0][0] * e[1] - a[1][0] * e[0]) / det,
            ];
            for j in 0..JOINTS {
                q[j] += jac[0][j] * y[0] + jac[1][j] * y[1];
            }
            arm.limits.clamp(&mut q);
        }
        let tip = forward_kinematics(&q, arm);
        (dist(&tip, &target) < 1e-6).then_some(q)
    }

    /// A zero-forcing primitive from `start` whose simulated end tip lies
    /// within tolerance of `target`. The first attempt seeds the inverse
    /// kinematics with the start posture; later ones with random postures.
    pub fn primitive_to(&mut self, start: &JointVector, target: Point, attempt: usize) -> Option<DmpParams> {
        let init = if attempt == 0 {
            *start
        } else {
            self.random_posture()
        };
        let arm = &self.world.arm;
        let mut goal = Self::inverse_kinematics(arm, target, init)?;
        for _ in 0..10 {
            let p = DmpParams::reach(goal);
            let traj = integrate_primitive(&p, start, &self.world.dmp, &arm.limits);
            let end = forward_kinematics(traj.end(), arm);
            if dist(&end, &target) < TIP_TOLERANCE {
                return Some(p);
            }
            // Shift the goal so that the simulated end point moves onto the target.
            let offset = [target[0] - end[0], target[1] - end[1]];
            let aim = forward_kinematics(&goal, arm);
            goal = Self::inverse_kinematics(arm, [aim[0] + offset[0], aim[1] + offset[1]], goal)?;
        }
        None
    }

    /// A sequence whose primitives end at `targets` in order, accepted only if
    /// `check` approves its rollout.
    pub fn sequence_through(
        &mut self,
        targets: &[Point],
        tries: usize,
        check: impl Fn(&Rollout) -> bool,
    ) -> Option<(ActionSequence, Rollout)> {
        for attempt in 0..tries {
            let mut start = self.world.arm.initial;
            let mut prims = Vec::with_capacity(targets.len());
            let mut ok = true;
            for t in targets {
                match self.primitive_to(&start, *t, attempt) {
                    Some(p) => {
                        let traj =
                            integrate_primitive(&p, &start, &self.world.dmp, &self.world.arm.limits);
                        start = *traj.end();
                        prims.push(p);
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            let seq = ActionSequence::new(prims, self.world.max_len).ok()?;
            let rollout = self.world.rollout(&seq).ok()?;
            if check(&rollout) {
                return Some((seq, rollout));
            }
        }
        None
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

fn jacobian(arm: &ArmModel, q: &JointVector) -> [[f64; JOINTS]; 2] {
    let mut angles = [0.0; JOINTS];
    let mut a = arm.base_angle;
    for j in 0..JOINTS {
        a += q[j];
        angles[j] = a;
    }
    let mut jac = [[0.0; JOINTS]; 2];
    let (mut sx, mut sy) = (0.0, 0.0);
    for j in (0..JOINTS).rev() {
        sx += arm.links[j] * angles[j].cos();
        sy += arm.links[j] * angles[j].sin();
        jac[0][j] = -sy;
        jac[1][j] = sx;
    }
    jac
}

fn reached_near(rollout: &Rollout, space: SubspaceId, at: usize, target: &[f64], tol: f64) -> bool {
    rollout.reached.iter().any(|r| {
        r.primitives == at
            && r.outcome.space == space
            && r.outcome
                .coords()
                .iter()
                .zip(target)
                .all(|(a, b)| (a - b).abs() < tol)
    })
}

fn sample_spot<R: Rng>(rng: &mut R, g: &TableGeometry, margin: f64, avoid: &[Point], clearance: f64) -> Point {
    loop {
        let p = [
            rng.random_range(g.origin[0] + margin..=g.origin[0] + g.width - margin),
            rng.random_range(g.origin[1] + margin..=g.origin[1] + g.height - margin),
        ];
        if avoid.iter().all(|a| dist(a, &p) > clearance) {
            return p;
        }
    }
}

/// Demonstration counts of the action teachers of each profile.
pub fn action_teacher_plan(profile: Profile) -> Vec<(&'static str, Vec<SubspaceId>, usize, usize)> {
    use SubspaceId as S;
    match profile {
        Profile::Simulation | Profile::LeftArm => vec![
            ("ActionTeacher0", vec![S::TOUCH], 11, 1),
            ("ActionTeacher1", vec![S::BLUE], 10, 2),
            ("ActionTeacher2", vec![S::GREEN], 8, 2),
            ("ActionTeacher34", vec![S::BOTH, S::BURST], 73, 4),
        ],
        Profile::Physical => vec![
            ("ActionTeacher0", vec![S::TOUCH], 9, 1),
            ("ActionTeacher1", vec![S::BLUE], 7, 2),
            ("ActionTeacher2", vec![S::GREEN], 7, 2),
            ("ActionTeacher3", vec![S::BOTH], 32, 4),
            ("ActionTeacher4", vec![S::BURST], 7, 4),
        ],
    }
}

/// Generates every action teacher's demonstrations for `world`, stored as
/// episode records whose strategy names the teacher.
pub fn generate_action_demos(world: &World, profile: Profile, seed: u64) -> Result<Vec<EpisodeRecord>> {
    let table = world.table;
    let g = table.geometry;
    let r = g.object_radius;
    let mut search = DemoSearch::new(world, seed);
    let mut out = Vec::new();
    for (name, spaces, count, _) in action_teacher_plan(profile) {
        let mut made = 0;
        let mut budget = 200 * count;
        while made < count {
            if budget == 0 {
                return Err(Error::config(
                    "teachers",
                    format!("could not build {count} demonstrations for {name}"),
                ));
            }
            budget -= 1;
            let main = spaces[0];
            let (targets, goal): (Vec<Point>, Outcome) = match main {
                // The touch expert also shows where each object can be
                // touched; its other demos stay clear of the objects.
                SubspaceId::TOUCH => {
                    let p = match made {
                        0 => table.blue,
                        1 => table.green,
                        _ => sample_spot(search.rng(), &g, 0.02, &[table.blue, table.green], 3.0 * r),
                    };
                    (vec![p], Outcome::touch(p))
                }
                SubspaceId::BLUE | SubspaceId::GREEN => {
                    let (rest, other) = if main == SubspaceId::BLUE {
                        (table.blue, table.green)
                    } else {
                        (table.green, table.blue)
                    };
                    let p = sample_spot(search.rng(), &g, r, &[other], 3.0 * r);
                    (vec![rest, p], Outcome::new(main, &p).unwrap())
                }
                SubspaceId::BOTH => {
                    let p1 = sample_spot(search.rng(), &g, r, &[table.green], 3.0 * r);
                    let p2 = sample_spot(search.rng(), &g, r, &[p1], 3.0 * r);
                    (
                        vec![table.blue, p1, table.green, p2],
                        Outcome::new(main, &[p1[0], p1[1], p2[0], p2[1]]).unwrap(),
                    )
                }
                _ => {
                    let rng = search.rng();
                    let (f, l, b) = (
                        rng.random_range(-1.0..=1.0),
                        rng.random_range(-1.0..=1.0),
                        rng.random_range(0.05..=1.0),
                    );
                    let inv = invert_burst(&g, f, l, b);
                    if !inv.exact || dist(&inv.blue, &table.green) <= 3.0 * r {
                        continue;
                    }
                    (
                        vec![table.blue, inv.blue, table.green, inv.green],
                        Outcome::new(main, &[f, l, b]).unwrap(),
                    )
                }
            };
            let last = targets.len();
            let tol = 1e-3;
            let check = |ro: &Rollout| match main {
                SubspaceId::TOUCH => reached_near(ro, main, 1, goal.coords(), tol),
                SubspaceId::BLUE | SubspaceId::GREEN => reached_near(ro, main, 2, goal.coords(), tol),
                SubspaceId::BOTH => {
                    reached_near(ro, main, 4, goal.coords(), tol)
                        && ro.reached.iter().any(|x| x.outcome.space == SubspaceId::BURST)
                }
                _ => reached_near(ro, SubspaceId::BURST, 4, goal.coords(), tol),
            };
            let Some((action, rollout)) = search.sequence_through(&targets, 6, check) else {
                continue;
            };
            debug_assert_eq!(action.len(), last);
            out.push(EpisodeRecord {
                goal,
                strategy: name.to_string(),
                action,
                procedure: None,
                first_component_len: None,
                reached: rollout.reached,
            });
            made += 1;
        }
    }
    Ok(out)
}

/// Writes demonstrations in the memory-dump format.
pub fn write_demos(path: &Path, demos: &[EpisodeRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for d in demos {
        write_line(&mut w, path, &DumpRecord::Episode(d.clone()))?;
    }
    std::io::Write::flush(&mut w).map_err(|e| Error::io(path, e))
}

/// Reads demonstrations written by [`write_demos`].
pub fn read_demos(path: &Path) -> Result<Vec<EpisodeRecord>> {
    read_dump(path)?
        .into_iter()
        .map(|(line, rec)| match rec {
            DumpRecord::Episode(e) => Ok(e),
            DumpRecord::Procedure(_) => Err(Error::Parse {
                path: path.into(),
                line,
                message: "expected an episode record".into(),
            }),
        })
        .collect()
}

fn outcome_at(demo: &EpisodeRecord, space: SubspaceId, at: usize) -> Option<Outcome> {
    demo.reached
        .iter()
        .find(|r| r.outcome.space == space && r.primitives == at)
        .map(|r| r.outcome)
}

/// Procedural repertoire entries mirroring an action demonstration: the
/// sub-goals reached along the demo and the outcome they lead to.
fn procedure_from_demo(demo: &EpisodeRecord, target: SubspaceId) -> Option<(Procedure, Outcome)> {
    let reached = demo
        .reached
        .iter()
        .filter(|r| r.outcome.space == target)
        .map(|r| r.outcome)
        .next_back()?;
    let (first, second) = match target {
        SubspaceId::BLUE | SubspaceId::GREEN => (
            outcome_at(demo, SubspaceId::TOUCH, 1)?,
            outcome_at(demo, SubspaceId::TOUCH, 2)?,
        ),
        _ => (
            outcome_at(demo, SubspaceId::BLUE, 2)?,
            outcome_at(demo, SubspaceId::GREEN, 4)?,
        ),
    };
    Some((Procedure { first, second }, reached))
}

/// Assembles the teachers of `profile` from the action demonstrations.
pub fn build_teachers(profile: Profile, table: &TableConfig, demos: &[EpisodeRecord]) -> Result<Vec<Teacher>> {
    use SubspaceId as S;
    let mut teachers = Vec::new();
    for (name, spaces, count, _) in action_teacher_plan(profile) {
        let own: Vec<EpisodeRecord> = demos.iter().filter(|d| d.strategy == name).cloned().collect();
        if own.len() != count {
            return Err(Error::config(
                "teachers",
                format!("{name} has {} demonstrations, expected {count}", own.len()),
            ));
        }
        teachers.push(Teacher {
            name: name.to_string(),
            spaces,
            kind: TeacherKind::Action { demos: own },
        });
    }
    let procedural = [
        ("ProceduralTeacher1", S::BLUE, Rule::PickPlace(ObjectId::Blue), "ActionTeacher1"),
        ("ProceduralTeacher2", S::GREEN, Rule::PickPlace(ObjectId::Green), "ActionTeacher2"),
        ("ProceduralTeacher3", S::BOTH, Rule::Project, "ActionTeacher3"),
        ("ProceduralTeacher4", S::BURST, Rule::Sound, "ActionTeacher4"),
    ];
    for (name, space, rule, source) in procedural {
        let kind = match profile {
            Profile::Physical => TeacherKind::Repertoire {
                demos: demos
                    .iter()
                    .filter(|d| d.strategy == source)
                    .filter_map(|d| procedure_from_demo(d, space))
                    .collect(),
            },
            _ => TeacherKind::Rule { rule, table: *table },
        };
        teachers.push(Teacher {
            name: name.to_string(),
            spaces: vec![space],
            kind,
        });
    }
    Ok(teachers)
}

/// Every outcome reached by a demonstration, used to keep the testbench
/// disjoint from teacher data.
pub fn demo_outcomes(demos: &[EpisodeRecord]) -> Vec<Outcome> {
    demos
        .iter()
        .flat_map(|d| d.reached.iter().map(|r: &Reached| r.outcome))
        .collect()
}

/// Reads transferred procedure records. Procedure lines are taken as they
/// are; episode lines contribute the procedure records they imply. Every
/// returned record is flagged as transferred.
pub fn load_transfer_lump(path: &Path) -> Result<Vec<ProcedureRecord>> {
    let mut out = Vec::new();
    for (_, rec) in read_dump(path)? {
        match rec {
            DumpRecord::Procedure(p) => out.push(p),
            DumpRecord::Episode(e) => out.extend(e.procedure_records()),
        }
    }
    for p in &mut out {
        p.transferred = true;
    }
    Ok(out)
}

/// Writes procedure records as a transfer lump.
pub fn write_transfer_lump(path: &Path, records: &[ProcedureRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for r in records {
        write_line(&mut w, path, &DumpRecord::Procedure(*r))?;
    }
    std::io::Write::flush(&mut w).map_err(|e| Error::io(path, e))
}
