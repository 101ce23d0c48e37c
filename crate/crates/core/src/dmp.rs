//! Dynamic movement primitives driving each joint of the arm.
//!
//! One primitive is a 14-scalar vector: for each of the seven joints a
//! forcing-term weight `w` and a goal angle `g`. Each joint follows the
//! transformation system
//!
//! ```text
//! tau * dv/dt = K (g - x) - D v + (g - x0) f(s)
//! tau * dx/dt = v
//! tau * ds/dt = -alpha s
//! f(s) = sum_i w psi_i(s) s / sum_i psi_i(s),  psi_i(s) = exp(-h (s - c)^2)
//! ```
//!
//! integrated with explicit Euler steps of `dt` over the primitive duration.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const JOINTS: usize = 7;

/// Joint-space configuration of the arm, radians.
pub type JointVector = [f64; JOINTS];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointParams {
    pub weight: f64,
    pub goal: f64,
}

/// Parameters of one action primitive: a `(w, g)` pair per joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmpParams {
    pub joints: [JointParams; JOINTS],
}

impl DmpParams {
    pub const DIM: usize = 2 * JOINTS;

    /// Zero forcing towards `goal`.
    pub fn reach(goal: JointVector) -> Self {
        let mut joints = [JointParams {
            weight: 0.0,
            goal: 0.0,
        }; JOINTS];
        for (j, g) in joints.iter_mut().zip(goal) {
            j.goal = g;
        }
        DmpParams { joints }
    }

    /// Flat `(w0, g0, w1, g1, ...)` layout.
    pub fn to_vector(&self) -> [f64; Self::DIM] {
        let mut out = [0.0; Self::DIM];
        for (i, j) in self.joints.iter().enumerate() {
            out[2 * i] = j.weight;
            out[2 * i + 1] = j.goal;
        }
        out
    }

    pub fn from_vector(v: &[f64; Self::DIM]) -> Self {
        let mut joints = [JointParams {
            weight: 0.0,
            goal: 0.0,
        }; JOINTS];
        for (i, j) in joints.iter_mut().enumerate() {
            j.weight = v[2 * i];
            j.goal = v[2 * i + 1];
        }
        DmpParams { joints }
    }

    pub fn goals(&self) -> JointVector {
        let mut g = [0.0; JOINTS];
        for (out, j) in g.iter_mut().zip(&self.joints) {
            *out = j.goal;
        }
        g
    }
}

/// Constants shared by every primitive of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DmpConstants {
    pub spring: f64,
    pub damping: f64,
    pub alpha: f64,
    pub tau: f64,
    pub dt: f64,
    pub duration: f64,
    pub basis_center: f64,
    pub basis_width: f64,
}

impl Default for DmpConstants {
    fn default() -> Self {
        DmpConstants {
            spring: 100.0,
            damping: 20.0,
            alpha: 4.0,
            tau: 1.0,
            dt: 0.01,
            duration: 1.0,
            basis_center: 0.5,
            basis_width: 10.0,
        }
    }
}

impl DmpConstants {
    pub fn critically_damped(spring: f64) -> Self {
        DmpConstants {
            spring,
            damping: 2.0 * spring.sqrt(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dmp.spring", self.spring),
            ("dmp.damping", self.damping),
            ("dmp.alpha", self.alpha),
            ("dmp.tau", self.tau),
            ("dmp.dt", self.dt),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(field, "must be positive and finite"));
            }
        }
        if !(self.dt < self.duration) {
            return Err(Error::config("dmp.dt", "must be smaller than dmp.duration"));
        }
        if !(self.basis_width > 0.0) {
            return Err(Error::config("dmp.basis_width", "must be positive"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    fn forcing(&self, weight: f64, phase: f64) -> f64 {
        let psi = (-self.basis_width * (phase - self.basis_center).powi(2)).exp();
        if psi <= f64::MIN_POSITIVE {
            return 0.0;
        }
        weight * psi * phase / psi
    }
}

/// Per-joint angle limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub min: JointVector,
    pub max: JointVector,
}

impl JointLimits {
    pub fn contains(&self, q: &JointVector) -> bool {
        q.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn clamp(&self, q: &mut JointVector) -> bool {
        let mut clamped = false;
        for i in 0..JOINTS {
            let c = q[i].clamp(self.min[i], self.max[i]);
            if c != q[i] {
                clamped = true;
                q[i] = c;
            }
        }
        clamped
    }
}

/// Joint trajectory sampled every `dt`, starting sample included.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTrajectory {
    pub samples: Vec<JointVector>,
    /// Set when any sample had to be clamped to the joint limits.
    pub saturated: bool,
}

impl JointTrajectory {
    pub fn start(&self) -> &JointVector {
        &self.samples[0]
    }

    pub fn end(&self) -> &JointVector {
        self.samples.last().expect("trajectory has at least one sample")
    }
}

/// Integrates one primitive from `start`, clamping to `limits`.
pub fn integrate_primitive(
    params: &DmpParams,
    start: &JointVector,
    consts: &DmpConstants,
    limits: &JointLimits,
) -> JointTrajectory {
    let steps = consts.steps();
    let dt = consts.dt;
    let tau = consts.tau;
    let mut x = *start;
    let mut v = [0.0; JOINTS];
    let mut phase = 1.0;
    let mut saturated = false;
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(x);

    for _ in 0..steps {
        for j in 0..JOINTS {
            let JointParams { weight, goal } = params.joints[j];
            let f = consts.forcing(weight, phase);
            let acc = (consts.spring * (goal - x[j]) - consts.damping * v[j]
                + (goal - start[j]) * f)
                / tau;
            x[j] += dt * v[j] / tau;
            v[j] += dt * acc;
            if x[j] < limits.min[j] || x[j] > limits.max[j] {
                x[j] = x[j].clamp(limits.min[j], limits.max[j]);
                v[j] = 0.0;
                saturated = true;
            }
        }
        phase -= dt * consts.alpha * phase / tau;
        samples.push(x);
    }
    JointTrajectory { samples, saturated }
}

/// Ordered chain of primitives executed without returning to the rest posture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionSequence {
    primitives: Vec<DmpParams>,
}

impl ActionSequence {
    pub fn new(primitives: Vec<DmpParams>, max_len: usize) -> Result<Self> {
        if primitives.is_empty() {
            return Err(Error::EmptySequence);
        }
        if primitives.len() > max_len {
            return Err(Error::SequenceTooLong {
                len: primitives.len(),
                max: max_len,
            });
        }
        Ok(ActionSequence { primitives })
    }

    pub fn single(p: DmpParams) -> Self {
        ActionSequence {
            primitives: vec![p],
        }
    }

    pub fn primitives(&self) -> &[DmpParams] {
        &self.primitives
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    /// The first `n` primitives.
    pub fn prefix(&self, n: usize) -> ActionSequence {
        ActionSequence {
            primitives: self.primitives[..n.clamp(1, self.len())].to_vec(),
        }
    }

    pub fn concat(&self, other: &ActionSequence) -> ActionSequence {
        let mut primitives = self.primitives.clone();
        primitives.extend_from_slice(&other.primitives);
        ActionSequence { primitives }
    }
}

/// Box bounds of the 14-dimensional primitive space.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveSpace {
    pub weight_bound: f64,
    pub limits: JointLimits,
}

impl PrimitiveSpace {
    pub fn bounds(&self, i: usize) -> (f64, f64) {
        let joint = i / 2;
        if i % 2 == 0 {
            (-self.weight_bound, self.weight_bound)
        } else {
            (self.limits.min[joint], self.limits.max[joint])
        }
    }

    pub fn range(&self, i: usize) -> f64 {
        let (lo, hi) = self.bounds(i);
        hi - lo
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DmpParams {
        let mut v = [0.0; DmpParams::DIM];
        for (i, x) in v.iter_mut().enumerate() {
            let (lo, hi) = self.bounds(i);
            *x = rng.random_range(lo..=hi);
        }
        DmpParams::from_vector(&v)
    }

    pub fn clamp(&self, p: &DmpParams) -> DmpParams {
        let mut v = p.to_vector();
        for (i, x) in v.iter_mut().enumerate() {
            let (lo, hi) = self.bounds(i);
            *x = x.clamp(lo, hi);
        }
        DmpParams::from_vector(&v)
    }

    pub fn contains(&self, p: &DmpParams) -> bool {
        p.to_vector().iter().enumerate().all(|(i, x)| {
            let (lo, hi) = self.bounds(i);
            *x >= lo && *x <= hi
        })
    }
}
