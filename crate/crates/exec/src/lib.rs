//! Skill layer: maps planned actions (navigate, pick, place) onto the
//! abstract robot handle and reports execution outcomes.
//!
//! The executor is backend-agnostic by construction — it sees nothing
//! but the [`mobiman_core::hal::RobotHandle`] trait, so plans run
//! identically on the in-process simulator and on remote servers.

pub mod report;
pub mod skills;

pub use report::{ExecutionReport, OverallStatus, SkillId, StepOutcome, StepReport};
pub use skills::{
    execute_plan, execute_skill, ExecConfig, ExecError, ExecParams, ExecState, MapExtent,
    NamedLocation, SkillBinding, StepResult, WorldKnowledge,
};
