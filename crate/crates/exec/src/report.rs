//! Execution reporting: one record per attempted plan step plus an
//! overall status, exportable as JSONL.
//!
//! Exported records carry only simulation-time durations so that a
//! seeded run writes byte-identical logs on every repetition; wall-clock
//! timings stay in memory (and on stderr for humans) because they can
//! never be reproducible.

use serde::{Deserialize, Serialize};
use std::fmt;

/// The five skill procedures the executor knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillId {
    NavigateTo,
    PickObject,
    PlaceObject,
    OpenGripper,
    CloseGripper,
}

impl fmt::Display for SkillId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SkillId::NavigateTo => "navigate_to",
            SkillId::PickObject => "pick_object",
            SkillId::PlaceObject => "place_object",
            SkillId::OpenGripper => "open_gripper",
            SkillId::CloseGripper => "close_gripper",
        };
        f.write_str(name)
    }
}

/// What happened to a single step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StepOutcome {
    Success,
    Failure { reason: String },
}

impl StepOutcome {
    pub fn failure(reason: impl Into<String>) -> StepOutcome {
        StepOutcome::Failure { reason: reason.into() }
    }

    pub fn is_success(&self) -> bool {
        matches!(self, StepOutcome::Success)
    }
}

/// Record of one attempted plan step, in plan order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// Index into the plan.
    pub step: usize,
    /// Display form of the ground action, e.g. `pick(cup,a)`.
    pub action: String,
    pub skill: SkillId,
    #[serde(flatten)]
    pub outcome: StepOutcome,
    /// Simulated seconds this step consumed.
    pub sim_seconds: f64,
    /// Wall-clock seconds; in-memory only (see module docs).
    #[serde(skip)]
    pub wall_seconds: f64,
    /// Skill-specific measurements (path cost, trajectory length, …).
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub metrics: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverallStatus {
    Success,
    Failure,
}

/// Full execution record: exactly one entry per attempted step; the run
/// halts at the first failure, so trailing plan steps have no entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub steps: Vec<StepReport>,
    pub status: OverallStatus,
    /// Total wall-clock seconds; in-memory only.
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl ExecutionReport {
    pub fn success(&self) -> bool {
        self.status == OverallStatus::Success
    }

    pub fn sim_seconds(&self) -> f64 {
        self.steps.iter().map(|s| s.sim_seconds).sum()
    }

    /// One JSON object per step followed by one summary object, newline
    /// terminated. Deterministic for a fixed run (no wall-clock fields).
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            out.push_str(&serde_json::to_string(step).expect("step reports serialize"));
            out.push('\n');
        }
        let summary = serde_json::json!({
            "summary": true,
            "status": self.status,
            "steps": self.steps.len(),
            "sim_seconds": self.sim_seconds(),
        });
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExecutionReport {
        ExecutionReport {
            steps: vec![
                StepReport {
                    step: 0,
                    action: "move(a,b)".into(),
                    skill: SkillId::NavigateTo,
                    outcome: StepOutcome::Success,
                    sim_seconds: 1.5,
                    wall_seconds: 0.0123,
                    metrics: serde_json::Map::new(),
                },
                StepReport {
                    step: 1,
                    action: "pick(cup,b)".into(),
                    skill: SkillId::PickObject,
                    outcome: StepOutcome::failure("grasp missed"),
                    sim_seconds: 0.5,
                    wall_seconds: 0.004,
                    metrics: serde_json::Map::new(),
                },
            ],
            status: OverallStatus::Failure,
            wall_seconds: 0.02,
        }
    }

    #[test]
    fn jsonl_has_one_line_per_step_plus_summary() {
        let text = sample().to_jsonl();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(first["skill"], "navigate_to");
        assert_eq!(first["status"], "success");
        let second: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(second["status"], "failure");
        assert_eq!(second["reason"], "grasp missed");
        let last: serde_json::Value = serde_json::from_str(lines[2]).unwrap();
        assert_eq!(last["summary"], true);
        assert_eq!(last["steps"], 2);
    }

    #[test]
    fn wall_clock_never_reaches_the_exported_record() {
        let text = sample().to_jsonl();
        assert!(!text.contains("wall"), "wall time leaked into the log: {text}");
    }
}
