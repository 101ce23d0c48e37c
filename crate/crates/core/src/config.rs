//! Experiment configuration: profile, variants, seeds, budgets and every
//! constant of the learner, loaded from TOML with defaults for all fields.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arm::ArmModel;
use crate::dmp::DmpConstants;
use crate::error::{Error, Result};
use crate::interest::InterestParams;
use crate::memory::MemoryParams;
use crate::outcome::{OutcomeSpaces, SUBSPACES};
use crate::table::TableConfig;
use crate::world::World;

/// Environment and teacher setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Right arm, on-the-fly procedural teachers, five outcome subspaces.
    Simulation,
    /// Finite teacher repertoires and the maintained-sound subspace.
    Physical,
    /// Simulation setup with the arm mirrored across the table's midline.
    LeftArm,
}

impl Profile {
    pub const ALL: [Profile; 3] = [Profile::Simulation, Profile::Physical, Profile::LeftArm];

    pub fn name(self) -> &'static str {
        match self {
            Profile::Simulation => "simulation",
            Profile::Physical => "physical",
            Profile::LeftArm => "left-arm",
        }
    }

    pub fn with_maintained(self) -> bool {
        self == Profile::Physical
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Profile> {
        Profile::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config("profile", format!("unknown profile `{s}`")))
    }
}

/// The five learner variants compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "RandomAction")]
    RandomAction,
    #[serde(rename = "IM-PB")]
    ImPb,
    #[serde(rename = "SGIM-ACTS")]
    SgimActs,
    #[serde(rename = "SGIM-PB")]
    SgimPb,
    #[serde(rename = "SGIM-TL")]
    SgimTl,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::RandomAction,
        Variant::ImPb,
        Variant::SgimActs,
        Variant::SgimPb,
        Variant::SgimTl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::RandomAction => "RandomAction",
            Variant::ImPb => "IM-PB",
            Variant::SgimActs => "SGIM-ACTS",
            Variant::SgimPb => "SGIM-PB",
            Variant::SgimTl => "SGIM-TL",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Variant> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config("variant", format!("unknown variant `{s}`")))
    }
}

/// Strategy costs and local-search widths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyParams {
    pub cost_autonomous: f64,
    pub cost_procedural_teacher: f64,
    pub cost_action_teacher: f64,
    /// Demonstration perturbation, as a fraction of each parameter's range.
    pub sigma_demo: f64,
    /// Upper bound of the autonomous perturbation, as a fraction of range.
    pub sigma_max: f64,
    pub p_local_min: f64,
    pub p_local_max: f64,
    /// Continuation probability of the geometric random sequence length.
    pub length_continue: f64,
}

impl Default for StrategyParams {
    fn default() -> Self {
        StrategyParams {
            cost_autonomous: 1.0,
            cost_procedural_teacher: 5.0,
            cost_action_teacher: 10.0,
            sigma_demo: 0.05,
            sigma_max: 0.2,
            p_local_min: 0.1,
            p_local_max: 0.9,
            length_continue: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub profile: Profile,
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub eval_every: usize,
    pub testbench_seed: u64,
    pub testbench_per_subspace: usize,
    /// Seed of the offline teacher demonstration search.
    pub teacher_seed: u64,
    /// Demonstration file; generated in-process when absent.
    pub teachers: Option<PathBuf>,
    /// Procedure records injected at start-up by SGIM-TL.
    pub transfer_lump: Option<PathBuf>,
    pub output: PathBuf,
    /// Number of iterations per strategy-choice window in the analysis.
    pub choice_window: usize,
    pub weight_bound: f64,
    pub memory: MemoryParams,
    pub interest: InterestParams,
    pub strategy: StrategyParams,
    pub dmp: DmpConstants,
    pub arm: ArmModel,
    pub table: TableConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            profile: Profile::Simulation,
            variants: Variant::ALL.to_vec(),
            seeds: (0..10).collect(),
            iterations: 5000,
            eval_every: 250,
            testbench_seed: 20_190_901,
            testbench_per_subspace: 500,
            teacher_seed: 7,
            teachers: None,
            transfer_lump: None,
            output: PathBuf::from("runs"),
            choice_window: 500,
            weight_bound: 10.0,
            memory: MemoryParams::default(),
            interest: InterestParams::default(),
            strategy: StrategyParams::default(),
            dmp: DmpConstants::default(),
            arm: ArmModel::default(),
            table: TableConfig::default(),
        }
    }
}

impl Config {
    pub fn for_profile(profile: Profile) -> Config {
        Config {
            profile,
            ..Config::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Config> {
        let cfg: Config = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| format!("bytes {}..{}", s.start, s.end))
                .unwrap_or_else(|| "config".into());
            Error::config(field, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.eval_every == 0 {
            return Err(Error::config("eval_every", "must be positive"));
        }
        if self.testbench_per_subspace == 0 {
            return Err(Error::config("testbench_per_subspace", "must be positive"));
        }
        if self.choice_window == 0 {
            return Err(Error::config("choice_window", "must be positive"));
        }
        if !(self.memory.gamma > 1.0) {
            return Err(Error::config("memory.gamma", "must exceed 1"));
        }
        if !(self.weight_bound > 0.0) {
            return Err(Error::config("weight_bound", "must be positive"));
        }
        let m = &self.memory;
        if m.k == 0 || m.max_len == 0 || m.unknown_len == 0 {
            return Err(Error::config("memory", "k, max_len and unknown_len must be positive"));
        }
        let i = &self.interest;
        if i.split_threshold < 2 || i.window == 0 {
            return Err(Error::config("interest", "split_threshold >= 2 and window >= 1 required"));
        }
        if !(0.0..=1.0).contains(&i.epsilon) {
            return Err(Error::config("interest.epsilon", "must lie in [0, 1]"));
        }
        if !(i.ledger_tolerance > 0.0) || !(i.d_thres > 0.0) {
            return Err(Error::config("interest", "d_thres and ledger_tolerance must be positive"));
        }
        let s = &self.strategy;
        for (name, k) in [
            ("strategy.cost_autonomous", s.cost_autonomous),
            ("strategy.cost_procedural_teacher", s.cost_procedural_teacher),
            ("strategy.cost_action_teacher", s.cost_action_teacher),
        ] {
            if !(k >= 1.0) {
                return Err(Error::config(name, "strategy costs must be at least 1"));
            }
        }
        if !(0.0 <= s.p_local_min && s.p_local_min <= s.p_local_max && s.p_local_max <= 1.0) {
            return Err(Error::config("strategy.p_local_*", "need 0 <= min <= max <= 1"));
        }
        if !(0.0..1.0).contains(&s.length_continue) {
            return Err(Error::config("strategy.length_continue", "must lie in [0, 1)"));
        }
        if s.sigma_demo < 0.0 || s.sigma_max < 0.0 {
            return Err(Error::config("strategy.sigma_*", "must be non-negative"));
        }
        self.dmp.validate()?;
        self.arm.validate()?;
        Ok(())
    }

    /// Arm for the profile: the left-arm profile mirrors the configured arm
    /// across the table's vertical midline.
    pub fn arm_for_profile(&self) -> ArmModel {
        match self.profile {
            Profile::LeftArm => {
                let g = &self.table.geometry;
                self.arm.mirrored(g.origin[0] + 0.5 * g.width)
            }
            _ => self.arm.clone(),
        }
    }

    pub fn world(&self) -> World {
        World {
            arm: self.arm_for_profile(),
            dmp: self.dmp,
            table: self.table,
            spaces: OutcomeSpaces::for_table(&self.table.geometry, self.profile.with_maintained()),
            max_len: self.memory.max_len,
            weight_bound: self.weight_bound,
        }
    }

    pub fn memory_params(&self) -> MemoryParams {
        self.memory
    }

    pub fn testbench_counts(&self) -> [usize; SUBSPACES] {
        [self.testbench_per_subspace; SUBSPACES]
    }
}
