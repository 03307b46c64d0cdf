//! Generation plans: ordered stages of (views to generate, views to condition
//! on), the builtin strategies that produce them, validation, and
//! generation-depth analysis.

mod keyframes;
mod strategies;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Camera;
use crate::ViewId;

pub use crate::geometry::camera_distance;
pub use keyframes::select_keyframes;
pub use strategies::{
    plan_chain, plan_grouped, plan_keyframed, plan_unordered, plan_zigzag, KeyframedParams, UnorderedParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Known view, held fixed (time 0) during sampling.
    Observed,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub id: ViewId,
    pub role: Role,
    pub camera: Camera,
}

impl ViewSpec {
    pub fn observed(id: impl Into<ViewId>, camera: Camera) -> Self {
        Self { id: id.into(), role: Role::Observed, camera }
    }

    pub fn generated(id: impl Into<ViewId>, camera: Camera) -> Self {
        Self { id: id.into(), role: Role::Generated, camera }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub generate: Vec<ViewId>,
    pub condition: Vec<ViewId>,
}

/// A set-autoregressive generation plan.
///
/// File format (JSON): `{"views": [{"id", "role", "camera": {...}}],
/// "stages": [{"generate": [ids], "condition": [ids]}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationPlan {
    pub views: Vec<ViewSpec>,
    pub stages: Vec<Stage>,
}

impl GenerationPlan {
    pub fn view(&self, id: &ViewId) -> Option<&ViewSpec> {
        self.views.iter().find(|v| &v.id == id)
    }

    pub fn observed_ids(&self) -> Vec<ViewId> {
        self.ids_with(Role::Observed)
    }

    pub fn generated_ids(&self) -> Vec<ViewId> {
        self.ids_with(Role::Generated)
    }

    fn ids_with(&self, role: Role) -> Vec<ViewId> {
        self.views.iter().filter(|v| v.role == role).map(|v| v.id.clone()).collect()
    }

    /// Applies an id relabeling to views and stages.
    pub fn relabeled(&self, f: impl Fn(&ViewId) -> ViewId) -> GenerationPlan {
        GenerationPlan {
            views: self.views.iter().map(|v| ViewSpec { id: f(&v.id), ..v.clone() }).collect(),
            stages: self
                .stages
                .iter()
                .map(|s| Stage {
                    generate: s.generate.iter().map(&f).collect(),
                    condition: s.condition.iter().map(&f).collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, PlanError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PlanError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PlanError> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

/// One broken plan invariant. Stage indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateView { id: ViewId },
    UnknownView { stage: usize, id: ViewId },
    EmptyGenerateSet { stage: usize },
    RepeatedInStage { stage: usize, id: ViewId },
    GeneratesObserved { stage: usize, id: ViewId },
    GeneratedTwice { stage: usize, id: ViewId, first_stage: usize },
    ConditionOnGenerateSet { stage: usize, id: ViewId },
    ConditionNotAvailable { stage: usize, id: ViewId },
    NeverGenerated { id: ViewId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateView { id } => write!(f, "view `{id}` is declared more than once"),
            Violation::UnknownView { stage, id } => write!(f, "stage {stage}: unknown view `{id}`"),
            Violation::EmptyGenerateSet { stage } => write!(f, "stage {stage}: empty generate set"),
            Violation::RepeatedInStage { stage, id } => {
                write!(f, "stage {stage}: view `{id}` listed more than once")
            }
            Violation::GeneratesObserved { stage, id } => {
                write!(f, "stage {stage}: observed view `{id}` cannot be generated")
            }
            Violation::GeneratedTwice { stage, id, first_stage } => {
                write!(f, "stage {stage}: view `{id}` already generated in stage {first_stage}")
            }
            Violation::ConditionOnGenerateSet { stage, id } => {
                write!(f, "stage {stage}: view `{id}` is both generated and conditioned on")
            }
            Violation::ConditionNotAvailable { stage, id } => write!(
                f,
                "stage {stage}: conditions on `{id}`, which is neither observed nor generated earlier"
            ),
            Violation::NeverGenerated { id } => write!(f, "generated view `{id}` is not in any stage"),
        }
    }
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("no views given")]
    EmptyInput,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("view `{0}` appears in more than one group")]
    OverlappingGroups(ViewId),
    #[error("unknown view `{0}`")]
    UnknownView(ViewId),
    #[error("invalid plan: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("plan file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Reports every violated plan invariant; an empty list means the plan is
/// feasible.
pub fn validate(plan: &GenerationPlan) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut roles: HashMap<&ViewId, Role> = HashMap::new();
    for v in &plan.views {
        if roles.insert(&v.id, v.role).is_some() {
            out.push(Violation::DuplicateView { id: v.id.clone() });
        }
    }
    let mut generated_in: HashMap<&ViewId, usize> = HashMap::new();
    for (i, stage) in plan.stages.iter().enumerate() {
        if stage.generate.is_empty() {
            out.push(Violation::EmptyGenerateSet { stage: i });
        }
        let mut in_stage = HashSet::new();
        for id in &stage.generate {
            if !in_stage.insert(id) {
                out.push(Violation::RepeatedInStage { stage: i, id: id.clone() });
                continue;
            }
            match roles.get(id) {
                None => out.push(Violation::UnknownView { stage: i, id: id.clone() }),
                Some(Role::Observed) => out.push(Violation::GeneratesObserved { stage: i, id: id.clone() }),
                Some(Role::Generated) => {
                    if let Some(&first) = generated_in.get(id) {
                        out.push(Violation::GeneratedTwice { stage: i, id: id.clone(), first_stage: first });
                    }
                }
            }
        }
        let mut in_cond = HashSet::new();
        for id in &stage.condition {
            if !in_cond.insert(id) {
                out.push(Violation::RepeatedInStage { stage: i, id: id.clone() });
                continue;
            }
            if in_stage.contains(id) {
                out.push(Violation::ConditionOnGenerateSet { stage: i, id: id.clone() });
                continue;
            }
            match roles.get(id) {
                None => out.push(Violation::UnknownView { stage: i, id: id.clone() }),
                Some(Role::Observed) => {}
                Some(Role::Generated) => {
                    if !generated_in.contains_key(id) {
                        out.push(Violation::ConditionNotAvailable { stage: i, id: id.clone() });
                    }
                }
            }
        }
        for id in &stage.generate {
            if roles.get(id) == Some(&Role::Generated) {
                generated_in.entry(id).or_insert(i);
            }
        }
    }
    for v in &plan.views {
        if v.role == Role::Generated && !generated_in.contains_key(&v.id) {
            out.push(Violation::NeverGenerated { id: v.id.clone() });
        }
    }
    out
}

/// Generation depth of every view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthReport {
    /// In the plan's view order.
    pub depths: Vec<(ViewId, usize)>,
    pub max_depth: usize,
}

impl DepthReport {
    pub fn get(&self, id: &ViewId) -> Option<usize> {
        self.depths.iter().find(|(v, _)| v == id).map(|&(_, d)| d)
    }
}

/// Observed views have depth 0; a view generated in a stage has depth
/// `1 + min(depth of the stage's conditioning views)`, or 0 when the stage
/// is unconditional.
pub fn depth(plan: &GenerationPlan) -> Result<DepthReport, PlanError> {
    let violations = validate(plan);
    if !violations.is_empty() {
        return Err(PlanError::Invalid(violations));
    }
    let mut depth: HashMap<&ViewId, usize> =
        plan.views.iter().filter(|v| v.role == Role::Observed).map(|v| (&v.id, 0)).collect();
    for stage in &plan.stages {
        let d = stage.condition.iter().map(|c| depth[c]).min().map_or(0, |m| m + 1);
        for id in &stage.generate {
            depth.insert(id, d);
        }
    }
    let depths: Vec<_> = plan.views.iter().map(|v| (v.id.clone(), depth[&v.id])).collect();
    let max_depth = depths.iter().map(|&(_, d)| d).max().unwrap_or(0);
    Ok(DepthReport { depths, max_depth })
}
