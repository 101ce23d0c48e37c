//! The learning loop: pick a goal and a strategy by interest, build and
//! execute one action sequence, remember everything it reached, and credit
//! the competence progress back to the interest map.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Config, StrategyParams, Variant};
use crate::dmp::{ActionSequence, PrimitiveSpace};
use crate::error::Result;
use crate::eval::{evaluate, EvaluationSnapshot};
use crate::interest::{competence, interest, CompetenceLedger, InterestMap, InterestParams};
use crate::memory::{EpisodeRecord, Memory, ProcedureRecord};
use crate::outcome::{Outcome, Procedure, Reached};
use crate::strategy::{
    explore_action, explore_procedure, mimic_action, mimic_procedure, random_sequence, Strategy,
    StrategyContext, StrategyKind, AUTONOMOUS_ACTIONS, AUTONOMOUS_PROCEDURES, RANDOM_ACTION,
};
use crate::teachers::{
    build_teachers, demo_outcomes, generate_action_demos, load_transfer_lump, read_demos, Teacher,
};
use crate::world::World;

/// Strategy inputs borrowed field by field, so that the learner's RNG stays
/// mutably available alongside.
macro_rules! context {
    ($l:expr) => {
        StrategyContext {
            memory: &$l.memory,
            primitives: &$l.primitives,
            params: &$l.params,
            d_thres: $l.interest_params.d_thres,
            use_transferred: $l.variant == Variant::SgimTl,
        }
    };
}

/// Everything shared by the runs of one configuration: the world, the
/// teachers, the testbench and the optional transfer lump.
#[derive(Debug, Clone)]
pub struct Environment {
    pub config: Config,
    pub world: World,
    pub demos: Vec<EpisodeRecord>,
    pub teachers: Vec<Teacher>,
    pub testbench: Vec<Outcome>,
    pub lump: Vec<ProcedureRecord>,
}

impl Environment {
    pub fn prepare(config: &Config) -> Result<Environment> {
        config.validate()?;
        let world = config.world();
        let demos = match &config.teachers {
            Some(path) => read_demos(path)?,
            None => generate_action_demos(&world, config.profile, config.teacher_seed)?,
        };
        let teachers = build_teachers(config.profile, &config.table, &demos)?;
        let testbench = world.spaces.sample_testbench(
            config.testbench_seed,
            &config.testbench_counts(),
            &demo_outcomes(&demos),
        );
        let lump = match &config.transfer_lump {
            Some(path) => load_transfer_lump(path)?,
            None => Vec::new(),
        };
        Ok(Environment {
            config: config.clone(),
            world,
            demos,
            teachers,
            testbench,
            lump,
        })
    }
}

/// The strategies a variant may use, with their costs.
pub fn strategies_for(variant: Variant, teachers: &[Teacher], params: &StrategyParams) -> Vec<Strategy> {
    let autonomous = |name: &str, kind| Strategy {
        name: name.to_string(),
        kind,
        cost: params.cost_autonomous,
    };
    let teacher = |i: usize, t: &Teacher| {
        if t.is_procedural() {
            Strategy {
                name: t.name.clone(),
                kind: StrategyKind::MimicProcedure(i),
                cost: params.cost_procedural_teacher,
            }
        } else {
            Strategy {
                name: t.name.clone(),
                kind: StrategyKind::MimicAction(i),
                cost: params.cost_action_teacher,
            }
        }
    };
    let mut out = Vec::new();
    match variant {
        Variant::RandomAction => out.push(autonomous(RANDOM_ACTION, StrategyKind::RandomAction)),
        Variant::ImPb => {
            out.push(autonomous(AUTONOMOUS_ACTIONS, StrategyKind::AutonomousAction));
            out.push(autonomous(AUTONOMOUS_PROCEDURES, StrategyKind::AutonomousProcedure));
        }
        Variant::SgimActs => {
            out.push(autonomous(AUTONOMOUS_ACTIONS, StrategyKind::AutonomousAction));
            for (i, t) in teachers.iter().enumerate().filter(|(_, t)| !t.is_procedural()) {
                out.push(teacher(i, t));
            }
        }
        Variant::SgimPb | Variant::SgimTl => {
            out.push(autonomous(AUTONOMOUS_ACTIONS, StrategyKind::AutonomousAction));
            out.push(autonomous(AUTONOMOUS_PROCEDURES, StrategyKind::AutonomousProcedure));
            // The first action teacher covers the base subspace.
            if let Some((i, t)) = teachers.iter().enumerate().find(|(_, t)| !t.is_procedural()) {
                out.push(teacher(i, t));
            }
            for (i, t) in teachers.iter().enumerate().filter(|(_, t)| t.is_procedural()) {
                out.push(teacher(i, t));
            }
        }
    }
    out
}

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub iteration: usize,
    pub strategy: String,
    pub goal: Outcome,
    /// Interest region the goal was drawn from.
    pub region: usize,
    /// Whether goal and strategy came from the uniform branch.
    pub random: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub procedure: Option<Procedure>,
    pub length: usize,
    /// Whether a procedure component or goal had nothing to resolve from.
    pub cold_start: bool,
    pub reached: Vec<Reached>,
    /// Goal competence after the episode.
    pub competence: f64,
    /// Competence progress on the goal.
    pub progress: f64,
    /// Smallest progress over the goal and every reached outcome.
    pub min_progress: f64,
}

/// Full output of one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub episodes: Vec<EpisodeLog>,
    pub evaluations: Vec<EvaluationSnapshot>,
}

#[derive(Debug, Clone)]
pub struct Learner {
    pub variant: Variant,
    world: World,
    primitives: PrimitiveSpace,
    memory: Memory,
    interest: InterestMap,
    ledger: CompetenceLedger,
    strategies: Vec<Strategy>,
    allowed: Vec<usize>,
    teachers: Vec<Teacher>,
    params: StrategyParams,
    interest_params: InterestParams,
    consulted: HashSet<(usize, usize)>,
    rng: ChaCha8Rng,
    iteration: usize,
}

impl Learner {
    pub fn new(env: &Environment, variant: Variant, seed: u64) -> Learner {
        let cfg = &env.config;
        let strategies = strategies_for(variant, &env.teachers, &cfg.strategy);
        let mut memory = Memory::new(env.world.spaces.clone(), cfg.memory_params());
        if variant == Variant::SgimTl {
            for r in &env.lump {
                memory.insert_procedure(ProcedureRecord {
                    transferred: true,
                    ..*r
                });
            }
        }
        Learner {
            variant,
            world: env.world.clone(),
            primitives: env.world.primitive_space(),
            interest: InterestMap::new(&env.world.spaces, strategies.len(), cfg.interest),
            ledger: CompetenceLedger::new(cfg.interest.ledger_tolerance),
            allowed: (0..strategies.len()).collect(),
            strategies,
            teachers: env.teachers.clone(),
            params: cfg.strategy,
            interest_params: cfg.interest,
            consulted: HashSet::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            iteration: 0,
            memory,
        }
    }

    pub fn memory(&self) -> &Memory {
        &self.memory
    }

    pub fn interest_map(&self) -> &InterestMap {
        &self.interest
    }

    pub fn strategies(&self) -> &[Strategy] {
        &self.strategies
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn random_action(&mut self) -> ActionSequence {
        random_sequence(
            &self.primitives,
            self.memory.params().max_len,
            self.params.length_continue,
            &mut self.rng,
        )
    }

    /// Resolves a procedure's components one level down and chains them;
    /// components without any memory fall back to random actions. Returns
    /// the action, the first component's length and whether a fallback was
    /// needed.
    fn build_from_procedure(&mut self, p: &Procedure) -> (ActionSequence, usize, bool) {
        let depth = self.memory.params().depth.saturating_sub(1);
        let max_len = self.memory.params().max_len;
        let mut cold = false;
        let mut component = |learner: &mut Learner, goal: &Outcome| match learner.memory.resolve(goal, depth) {
            Ok(r) => r.action,
            Err(_) => {
                cold = true;
                learner.random_action()
            }
        };
        let a = component(self, &p.first);
        let b = component(self, &p.second);
        // Keep the chain within the length cap, shortening the first
        // component first while leaving the second at least half the budget.
        let lb_floor = b.len().min(max_len / 2).max(1);
        let la = a.len().min(max_len - lb_floor);
        let lb = b.len().min(max_len - la);
        (a.prefix(la).concat(&b.prefix(lb)), la, cold)
    }

    /// Runs one episode and returns its log line.
    pub fn step(&mut self) -> Result<EpisodeLog> {
        self.iteration += 1;
        let spaces = self.world.spaces.clone();
        let choice = self.interest.select(&spaces, &self.allowed, &mut self.rng);
        let strategy = self.strategies[choice.strategy].clone();
        let mut cold_start = false;
        let mut procedure = None;
        let mut first_len = None;
        let action = match strategy.kind {
            StrategyKind::RandomAction => self.random_action(),
            StrategyKind::AutonomousAction => {
                let a = explore_action(&choice.goal, &context!(self), &mut self.rng);
                a
            }
            StrategyKind::AutonomousProcedure | StrategyKind::MimicProcedure(_) => {
                let p = match strategy.kind {
                    StrategyKind::MimicProcedure(t) => {
                        let first = self.consulted.insert((t, choice.region));
                        let p = mimic_procedure(&choice.goal, &self.teachers[t], first, &context!(self), &mut self.rng);
                        p?
                    }
                    _ => {
                        let p = explore_procedure(&choice.goal, &context!(self), &mut self.rng);
                        p
                    }
                };
                let (a, la, cold) = self.build_from_procedure(&p);
                cold_start = cold;
                procedure = Some(p);
                first_len = Some(la);
                a
            }
            StrategyKind::MimicAction(t) => {
                let first = self.consulted.insert((t, choice.region));
                let a = mimic_action(&choice.goal, &self.teachers[t], first, &context!(self), &mut self.rng);
                a?
            }
        };
        if matches!(strategy.kind, StrategyKind::AutonomousAction) && self.memory.action_count() == 0 {
            cold_start = true;
        }

        let rollout = self.world.rollout(&action)?;
        let outcomes: Vec<Outcome> = rollout.reached.iter().map(|r| r.outcome).collect();

        // Competence before the episode for the goal and, in hindsight, for
        // every outcome reached.
        let d_thres = self.interest_params.d_thres;
        let mut targets = Vec::with_capacity(outcomes.len() + 1);
        targets.push(choice.goal);
        targets.extend(outcomes.iter().copied());
        let before: Vec<f64> = targets
            .iter()
            .map(|t| {
                let ledger = self.ledger.get(&spaces, t).unwrap_or(d_thres);
                let nn = self.memory.nearest_outcome_distance(t).unwrap_or(d_thres);
                ledger.min(nn).min(d_thres)
            })
            .collect();

        self.memory.store(EpisodeRecord {
            goal: choice.goal,
            strategy: strategy.name.clone(),
            action: action.clone(),
            procedure,
            first_component_len: first_len,
            reached: rollout.reached.clone(),
        })?;

        let mut goal_competence = d_thres;
        let mut goal_progress = 0.0;
        let mut min_progress = f64::INFINITY;
        for (i, (t, b)) in targets.iter().zip(&before).enumerate() {
            let after = b.min(competence(&spaces, t, &outcomes, d_thres));
            self.ledger.improve(&spaces, t, after);
            let progress = b - after;
            min_progress = min_progress.min(progress);
            if i == 0 {
                goal_competence = after;
                goal_progress = progress;
            }
            self.interest
                .insert(&spaces, t, choice.strategy, interest(progress, strategy.cost));
        }

        Ok(EpisodeLog {
            iteration: self.iteration,
            strategy: strategy.name,
            goal: choice.goal,
            region: choice.region,
            random: choice.random,
            procedure,
            length: action.len(),
            cold_start,
            reached: rollout.reached,
            competence: goal_competence,
            progress: goal_progress,
            min_progress,
        })
    }

    pub fn evaluate(&self, testbench: &[Outcome]) -> EvaluationSnapshot {
        evaluate(&self.memory, testbench, self.iteration, self.interest_params.d_thres)
    }

    /// Runs `iterations` episodes, evaluating at the start, every
    /// `eval_every` iterations and at the end. `on_episode` sees each log
    /// line as it is produced.
    pub fn run(
        &mut self,
        iterations: usize,
        eval_every: usize,
        testbench: &[Outcome],
        mut on_episode: impl FnMut(&EpisodeLog) -> Result<()>,
    ) -> Result<RunOutput> {
        let mut episodes = Vec::with_capacity(iterations);
        let mut evaluations = vec![self.evaluate(testbench)];
        for _ in 0..iterations {
            let log = self.step()?;
            on_episode(&log)?;
            episodes.push(log);
            if self.iteration % eval_every == 0 {
                evaluations.push(self.evaluate(testbench));
            }
        }
        if self.iteration % eval_every != 0 {
            evaluations.push(self.evaluate(testbench));
        }
        Ok(RunOutput { episodes, evaluations })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Profile;

    fn env() -> Environment {
        let mut cfg = Config::for_profile(Profile::Simulation);
        cfg.testbench_per_subspace = 20;
        Environment::prepare(&cfg).unwrap()
    }

    #[test]
    fn variant_gating() {
        let e = env();
        let names = |v| {
            strategies_for(v, &e.teachers, &e.config.strategy)
                .into_iter()
                .map(|s| s.name)
                .collect::<Vec<_>>()
        };
        assert_eq!(names(Variant::RandomAction), vec![RANDOM_ACTION]);
        assert_eq!(names(Variant::ImPb), vec![AUTONOMOUS_ACTIONS, AUTONOMOUS_PROCEDURES]);
        assert_eq!(names(Variant::SgimActs).len(), 5);
        let pb = names(Variant::SgimPb);
        assert_eq!(pb.len(), 7);
        assert_eq!(pb[2], "ActionTeacher0");
        assert_eq!(pb, names(Variant::SgimTl));
    }

    #[test]
    fn same_seed_same_log() {
        let e = env();
        let run = |seed| {
            let mut l = Learner::new(&e, Variant::SgimPb, seed);
            l.run(120, 50, &e.testbench, |_| Ok(())).unwrap()
        };
        let a = run(3);
        let b = run(3);
        assert_eq!(a.episodes, b.episodes);
        assert_eq!(a.evaluations, b.evaluations);
        assert_eq!(a.evaluations.len(), 4);
        assert!(a.episodes.iter().all(|l| l.min_progress >= 0.0));
    }

    #[test]
    fn zero_iterations_evaluates_once() {
        let e = env();
        let mut l = Learner::new(&e, Variant::ImPb, 0);
        let out = l.run(0, 250, &e.testbench, |_| Ok(())).unwrap();
        assert!(out.episodes.is_empty());
        assert_eq!(out.evaluations.len(), 1);
        assert_eq!(out.evaluations[0].global, 5.0);
    }

    #[test]
    fn procedure_episodes_chain_two_components() {
        let e = env();
        let mut l = Learner::new(&e, Variant::ImPb, 5);
        let out = l.run(200, 250, &e.testbench, |_| Ok(())).unwrap();
        for log in out.episodes.iter().filter(|l| l.procedure.is_some()) {
            assert!(log.length >= 2, "{log:?}");
        }
        let random = Learner::new(&e, Variant::RandomAction, 5)
            .run(50, 250, &e.testbench, |_| Ok(()))
            .unwrap();
        assert!(random.episodes.iter().all(|l| l.strategy == RANDOM_ACTION && l.procedure.is_none()));
    }
}
