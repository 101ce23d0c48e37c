//! Planar seven-joint revolute arm whose tip moves in the table plane.

use serde::{Deserialize, Serialize};

use crate::dmp::{
    integrate_primitive, ActionSequence, DmpConstants, JointLimits, JointTrajectory, JointVector,
    JOINTS,
};
use crate::error::{Error, Result};

/// Table-frame position in meters.
pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmModel {
    pub links: [f64; JOINTS],
    pub base: Point,
    /// Orientation of the first link at zero joint angle, radians.
    pub base_angle: f64,
    pub limits: JointLimits,
    pub initial: JointVector,
}

impl Default for ArmModel {
    fn default() -> Self {
        use std::f64::consts::FRAC_PI_2;
        ArmModel {
            links: [0.3, 0.3, 0.25, 0.25, 0.2, 0.15, 0.15],
            base: [0.8, -0.2],
            base_angle: FRAC_PI_2,
            limits: JointLimits {
                min: [-FRAC_PI_2, -2.0, -2.0, -2.0, -2.0, -2.0, -2.0],
                max: [FRAC_PI_2, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0],
            },
            initial: [0.3, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6],
        }
    }
}

impl ArmModel {
    pub fn reach(&self) -> f64 {
        self.links.iter().sum()
    }

    /// Same arm with its base reflected across the vertical line `x = axis`.
    pub fn mirrored(&self, axis: f64) -> ArmModel {
        let mut arm = self.clone();
        arm.base[0] = 2.0 * axis - self.base[0];
        arm.base_angle = std::f64::consts::PI - self.base_angle;
        for j in 0..JOINTS {
            arm.limits.min[j] = -self.limits.max[j];
            arm.limits.max[j] = -self.limits.min[j];
            arm.initial[j] = -self.initial[j];
        }
        arm
    }

    pub fn validate(&self) -> Result<()> {
        if self.links.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::config("arm.links", "link lengths must be positive"));
        }
        for j in 0..JOINTS {
            if !(self.limits.min[j] < self.limits.max[j]) {
                return Err(Error::config("arm.limits", format!("empty interval for joint {j}")));
            }
        }
        if !self.limits.contains(&self.initial) {
            return Err(Error::config("arm.initial", "initial posture outside joint limits"));
        }
        Ok(())
    }

    pub fn initial_tip(&self) -> Point {
        forward_kinematics(&self.initial, self)
    }
}

/// Tip position of the planar chain for `joints`.
pub fn forward_kinematics(joints: &JointVector, arm: &ArmModel) -> Point {
    let mut angle = arm.base_angle;
    let [mut x, mut y] = arm.base;
    for (q, l) in joints.iter().zip(&arm.links) {
        angle += q;
        let (s, c) = angle.sin_cos();
        x += l * c;
        y += l * s;
    }
    [x, y]
}

/// One executed primitive: its joint trajectory and the sampled tip path.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveExecution {
    pub joints: JointTrajectory,
    pub tip: Vec<Point>,
}

impl PrimitiveExecution {
    pub fn end_tip(&self) -> Point {
        *self.tip.last().expect("non-empty tip path")
    }
}

/// Runs every primitive of `seq` in order, each starting where the previous
/// one ended; the first starts from the arm's initial posture.
pub fn execute_sequence(
    seq: &ActionSequence,
    arm: &ArmModel,
    consts: &DmpConstants,
    max_len: usize,
) -> Result<Vec<PrimitiveExecution>> {
    if seq.len() > max_len {
        return Err(Error::SequenceTooLong {
            len: seq.len(),
            max: max_len,
        });
    }
    let mut start = arm.initial;
    let mut out = Vec::with_capacity(seq.len());
    for p in seq.primitives() {
        let joints = integrate_primitive(p, &start, consts, &arm.limits);
        let tip = joints
            .samples
            .iter()
            .map(|q| forward_kinematics(q, arm))
            .collect();
        start = *joints.end();
        out.push(PrimitiveExecution { joints, tip });
    }
    Ok(out)
}
