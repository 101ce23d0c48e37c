//! Arm plus table: executes an action sequence from the reset state and
//! reports what it reached.

use crate::arm::{execute_sequence, ArmModel, Point};
use crate::dmp::{ActionSequence, DmpConstants, PrimitiveSpace};
use crate::error::Result;
use crate::outcome::{extract_outcomes, Boundary, OutcomeSpaces, Reached};
use crate::table::{TableConfig, TableState};

#[derive(Debug, Clone)]
pub struct World {
    pub arm: ArmModel,
    pub dmp: DmpConstants,
    pub table: TableConfig,
    pub spaces: OutcomeSpaces,
    pub max_len: usize,
    pub weight_bound: f64,
}

#[derive(Debug, Clone)]
pub struct Rollout {
    pub boundaries: Vec<Boundary>,
    pub reached: Vec<Reached>,
    pub end_tips: Vec<Point>,
    pub saturated: bool,
}

impl Rollout {
    pub fn blocked_primitives(&self) -> usize {
        self.boundaries.iter().filter(|b| b.events.blocked).count()
    }
}

impl World {
    pub fn primitive_space(&self) -> PrimitiveSpace {
        PrimitiveSpace {
            weight_bound: self.weight_bound,
            limits: self.arm.limits.clone(),
        }
    }

    /// Resets arm and table, then runs `seq` primitive by primitive.
    pub fn rollout(&self, seq: &ActionSequence) -> Result<Rollout> {
        let execs = execute_sequence(seq, &self.arm, &self.dmp, self.max_len)?;
        let mut state = TableState::reset(&self.table);
        let mut boundaries = Vec::with_capacity(execs.len());
        let mut end_tips = Vec::with_capacity(execs.len());
        let mut saturated = false;
        for e in &execs {
            let (next, events) = state.step_primitive(&e.tip);
            boundaries.push(Boundary {
                events,
                objects: next.objects,
                moved: next.moved,
            });
            end_tips.push(e.end_tip());
            saturated |= e.joints.saturated;
            state = next;
        }
        let reached = extract_outcomes(&boundaries, &self.spaces);
        Ok(Rollout {
            boundaries,
            reached,
            end_tips,
            saturated,
        })
    }
}
