//! The ways an episode can generate its attempt: random or goal-directed
//! action search, goal-directed procedure search, and mimicry of teachers.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::StrategyParams;
use crate::dmp::{ActionSequence, DmpParams, PrimitiveSpace};
use crate::error::Result;
use crate::memory::Memory;
use crate::outcome::{Outcome, OutcomeSpaces, Procedure, SubspaceId};
use crate::teachers::{Teacher, TeacherKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    /// Uniformly random action sequences, ignoring the goal.
    RandomAction,
    AutonomousAction,
    AutonomousProcedure,
    /// Index into the learner's teacher list.
    MimicAction(usize),
    MimicProcedure(usize),
}

impl StrategyKind {
    pub fn uses_procedure(self) -> bool {
        matches!(self, StrategyKind::AutonomousProcedure | StrategyKind::MimicProcedure(_))
    }

    pub fn teacher(self) -> Option<usize> {
        match self {
            StrategyKind::MimicAction(t) | StrategyKind::MimicProcedure(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub name: String,
    pub kind: StrategyKind,
    /// Cost dividing the progress into interest.
    pub cost: f64,
}

pub const RANDOM_ACTION: &str = "RandomAction";
pub const AUTONOMOUS_ACTIONS: &str = "AutonomousActions";
pub const AUTONOMOUS_PROCEDURES: &str = "AutonomousProcedures";

/// Probability of local search given the distance to the best neighbour.
pub fn p_local(d_nn: f64, d_thres: f64, params: &StrategyParams) -> f64 {
    (1.0 - d_nn / d_thres).clamp(params.p_local_min, params.p_local_max)
}

/// Random sequence with a geometric length on `1..=max_len`.
pub fn random_sequence<R: Rng + ?Sized>(
    space: &PrimitiveSpace,
    max_len: usize,
    length_continue: f64,
    rng: &mut R,
) -> ActionSequence {
    let mut len = 1;
    while len < max_len && rng.random::<f64>() < length_continue {
        len += 1;
    }
    let prims = (0..len).map(|_| space.sample(rng)).collect();
    ActionSequence::new(prims, max_len).expect("length within bounds")
}

/// Gaussian perturbation of every parameter with standard deviation
/// `sigma_frac` of its range, clamped back into the primitive space. The
/// length is preserved.
pub fn perturb_sequence<R: Rng + ?Sized>(
    seq: &ActionSequence,
    space: &PrimitiveSpace,
    sigma_frac: f64,
    rng: &mut R,
) -> ActionSequence {
    if sigma_frac <= 0.0 {
        return seq.clone();
    }
    let prims = seq
        .primitives()
        .iter()
        .map(|p| {
            let mut v = p.to_vector();
            for (i, x) in v.iter_mut().enumerate() {
                let n = Normal::new(0.0, sigma_frac * space.range(i)).expect("finite sigma");
                *x += n.sample(rng);
            }
            space.clamp(&DmpParams::from_vector(&v))
        })
        .collect();
    ActionSequence::new(prims, usize::MAX).expect("same length as source")
}

/// Gaussian perturbation of an outcome in normalized coordinates.
pub fn perturb_outcome<R: Rng + ?Sized>(o: &Outcome, spaces: &OutcomeSpaces, sigma: f64, rng: &mut R) -> Outcome {
    if sigma <= 0.0 {
        return *o;
    }
    let n = Normal::new(0.0, sigma).expect("finite sigma");
    let mut v = spaces.normalize(o);
    for x in v.iter_mut().take(o.space.dim()) {
        *x = (*x + n.sample(rng)).clamp(0.0, 1.0);
    }
    spaces.denormalize(o.space, &v[..o.space.dim()])
}

pub fn perturb_procedure<R: Rng + ?Sized>(p: &Procedure, spaces: &OutcomeSpaces, sigma: f64, rng: &mut R) -> Procedure {
    Procedure {
        first: perturb_outcome(&p.first, spaces, sigma, rng),
        second: perturb_outcome(&p.second, spaces, sigma, rng),
    }
}

/// Shared inputs of the strategies.
pub struct StrategyContext<'a> {
    pub memory: &'a Memory,
    pub primitives: &'a PrimitiveSpace,
    pub params: &'a StrategyParams,
    pub d_thres: f64,
    /// Whether transferred procedure records seed local procedure search.
    pub use_transferred: bool,
}

/// Goal-directed action search: local perturbation of the best-perf stored
/// action with probability `p_local`, else a random sequence.
pub fn explore_action<R: Rng + ?Sized>(goal: &Outcome, ctx: &StrategyContext<'_>, rng: &mut R) -> ActionSequence {
    let max_len = ctx.memory.params().max_len;
    if let Some(best) = ctx.memory.nearest_actions(goal, 1).into_iter().next() {
        if rng.random::<f64>() < p_local(best.distance, ctx.d_thres, ctx.params) {
            let sigma = ctx.params.sigma_max.min(best.distance);
            return perturb_sequence(&best.action, ctx.primitives, sigma, rng);
        }
    }
    random_sequence(ctx.primitives, max_len, ctx.params.length_continue, rng)
}

/// Ordered pairs of enabled subspaces.
pub fn procedure_spaces(spaces: &OutcomeSpaces) -> Vec<(SubspaceId, SubspaceId)> {
    let enabled: Vec<SubspaceId> = spaces.enabled().collect();
    let mut out = Vec::new();
    for a in &enabled {
        for b in &enabled {
            out.push((*a, *b));
        }
    }
    out
}

pub fn random_procedure<R: Rng + ?Sized>(spaces: &OutcomeSpaces, rng: &mut R) -> Procedure {
    let pairs = procedure_spaces(spaces);
    let (a, b) = pairs[rng.random_range(0..pairs.len())];
    Procedure {
        first: spaces.sample(a, rng),
        second: spaces.sample(b, rng),
    }
}

/// Goal-directed procedure search: local perturbation of the best-perf
/// stored procedure (subspace pair kept) with probability `p_local`, else a
/// random procedure.
pub fn explore_procedure<R: Rng + ?Sized>(goal: &Outcome, ctx: &StrategyContext<'_>, rng: &mut R) -> Procedure {
    let spaces = ctx.memory.spaces();
    let best = ctx
        .memory
        .nearest_procedures(goal, 1, ctx.use_transferred)
        .into_iter()
        .next();
    if let Some(best) = best {
        if rng.random::<f64>() < p_local(best.distance, ctx.d_thres, ctx.params) {
            let sigma = ctx.params.sigma_max.min(best.distance);
            return perturb_procedure(&best.record.procedure, spaces, sigma, rng);
        }
    }
    random_procedure(spaces, rng)
}

/// Action mimicry: the demo reaching closest to the goal (a random demo if
/// the teacher has nothing in the goal's subspace), replayed exactly on
/// `first` consultation and perturbed by `sigma_demo` otherwise.
pub fn mimic_action<R: Rng + ?Sized>(
    goal: &Outcome,
    teacher: &Teacher,
    first: bool,
    ctx: &StrategyContext<'_>,
    rng: &mut R,
) -> Result<ActionSequence> {
    let demo = match teacher.nearest_action_demo(goal, ctx.memory.spaces()) {
        Ok((_, seq, _)) => seq,
        Err(crate::Error::NotApplicable { .. }) => match &teacher.kind {
            TeacherKind::Action { demos } if !demos.is_empty() => {
                demos[rng.random_range(0..demos.len())].action.clone()
            }
            _ => return Err(crate::Error::EmptyRepertoire(teacher.name.clone())),
        },
        Err(e) => return Err(e),
    };
    let sigma = if first { 0.0 } else { ctx.params.sigma_demo };
    Ok(perturb_sequence(&demo, ctx.primitives, sigma, rng))
}

/// Procedural mimicry: the teacher's decomposition of the goal (of a random
/// goal of its own subspace when asked outside it), replayed exactly on
/// `first` consultation and perturbed by `sigma_demo` otherwise.
pub fn mimic_procedure<R: Rng + ?Sized>(
    goal: &Outcome,
    teacher: &Teacher,
    first: bool,
    ctx: &StrategyContext<'_>,
    rng: &mut R,
) -> Result<Procedure> {
    let spaces = ctx.memory.spaces();
    let target = if teacher.covers(goal.space) {
        *goal
    } else {
        let own = teacher.spaces[rng.random_range(0..teacher.spaces.len())];
        spaces.sample(own, rng)
    };
    let p = teacher.demonstrate_procedure(&target, spaces)?;
    let sigma = if first { 0.0 } else { ctx.params.sigma_demo };
    Ok(perturb_procedure(&p, spaces, sigma, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::memory::{EpisodeRecord, MemoryParams};
    use crate::outcome::Reached;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Memory, PrimitiveSpace, StrategyParams) {
        let cfg = Config::default();
        let world = cfg.world();
        (
            Memory::new(world.spaces.clone(), MemoryParams::default()),
            world.primitive_space(),
            StrategyParams::default(),
        )
    }

    #[test]
    fn p_local_bounds() {
        let p = StrategyParams::default();
        assert_eq!(p_local(0.0, 5.0, &p), 0.9);
        assert_eq!(p_local(5.0, 5.0, &p), 0.1);
        assert!((p_local(2.0, 5.0, &p) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn cold_start_is_random() {
        let (m, ps, sp) = setup();
        let ctx = StrategyContext {
            memory: &m,
            primitives: &ps,
            params: &sp,
            d_thres: 5.0,
            use_transferred: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let goal = Outcome::touch([0.5, 0.5]);
        let a = explore_action(&goal, &ctx, &mut rng);
        assert!(a.len() >= 1 && a.len() <= 8);
        let mut counts = std::collections::HashMap::new();
        let n = 25_000;
        for _ in 0..n {
            let p = explore_procedure(&goal, &ctx, &mut rng);
            *counts.entry(p.spaces()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 25);
        let e = n as f64 / 25.0;
        let chi2: f64 = counts.values().map(|c| (*c as f64 - e).powi(2) / e).sum();
        // 24 degrees of freedom, p = 0.01.
        assert!(chi2 < 42.98, "chi2 = {chi2}");
    }

    #[test]
    fn local_search_keeps_length_and_pair() {
        let (mut m, ps, sp) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let seq = random_sequence(&ps, 3, 0.99, &mut rng);
        assert_eq!(seq.len(), 3);
        let goal = Outcome::touch([0.4, 0.4]);
        let blue = Outcome::new(SubspaceId::BLUE, &[0.2, 0.2]).unwrap();
        let green = Outcome::new(SubspaceId::GREEN, &[0.8, 0.8]).unwrap();
        m.store(EpisodeRecord {
            goal,
            strategy: AUTONOMOUS_PROCEDURES.into(),
            action: seq.clone(),
            procedure: Some(Procedure { first: blue, second: green }),
            first_component_len: Some(1),
            reached: vec![Reached { outcome: goal, primitives: 3 }],
        })
        .unwrap();
        let ctx = StrategyContext {
            memory: &m,
            primitives: &ps,
            params: &sp,
            d_thres: 5.0,
            use_transferred: false,
        };
        let (mut local, mut same_pair) = (0, 0);
        for _ in 0..200 {
            let a = explore_action(&goal, &ctx, &mut rng);
            // d_nn = 0 gives a zero-width perturbation, so local search may
            // return the stored sequence itself.
            if a.len() == 3 {
                local += 1;
            }
            let p = explore_procedure(&goal, &ctx, &mut rng);
            if p.spaces() == (SubspaceId::BLUE, SubspaceId::GREEN) {
                same_pair += 1;
            }
        }
        // p_local = 0.9 at d_nn = 0.
        assert!(local > 150, "{local}");
        assert!(same_pair > 150, "{same_pair}");
    }
}
