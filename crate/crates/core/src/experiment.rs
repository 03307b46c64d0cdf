//! Depth/degradation experiment: run a plan over the Gaussian toy scene with
//! the exact (optionally window-truncated) denoiser and report the marginal
//! KL of every generated view next to its generation depth.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::Cholesky;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffusion::{
    analytic_denoiser, build_schedule, build_toy_scene, execute_plan_batch, gaussian_divergence,
    truncate_conditioning, DiffusionError, DiffusionSchedule, SceneParams, SetDenoiser, ToySceneModel,
};
use crate::plan::{depth, DepthReport, GenerationPlan, PlanError, Role};
use crate::ViewId;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self { steps: 1000, beta_start: 1e-4, beta_end: 0.02 }
    }
}

fn default_samples() -> usize {
    1000
}

/// Experiment configuration file (JSON).
///
/// `plan` is resolved relative to the configuration file. Without
/// `observations`, each seed draws the observed values from the scene prior.
/// Without `window`, the exact denoiser sees every conditioning view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene: SceneParams,
    #[serde(default)]
    pub schedule: ScheduleParams,
    pub plan: PathBuf,
    pub seeds: Vec<u64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub observations: Option<BTreeMap<ViewId, Vec<f64>>>,
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self, ExperimentError> {
        Ok(serde_json::from_str(json)?)
    }

    /// Loads the configuration and makes the plan path absolute.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io { path: path.into(), source })?;
        let mut config = Self::from_json(&text)?;
        if config.plan.is_relative() {
            if let Some(dir) = path.parent() {
                config.plan = dir.join(&config.plan);
            }
        }
        Ok(config)
    }
}

/// One CSV row: `seed,view,depth,kl`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub seed: u64,
    pub view: ViewId,
    pub depth: usize,
    pub kl: f64,
}

/// A plan bound to its toy scene and sampler settings.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub plan: GenerationPlan,
    pub depth: DepthReport,
    pub scene: ToySceneModel,
    pub schedule: DiffusionSchedule,
    pub samples: usize,
    pub window: Option<usize>,
}

impl Experiment {
    pub fn new(
        plan: GenerationPlan,
        scene: SceneParams,
        schedule: DiffusionSchedule,
        samples: usize,
        window: Option<usize>,
    ) -> Result<Self, ExperimentError> {
        let depth = depth(&plan)?;
        let poses: Vec<_> = plan.views.iter().map(|v| (v.id.clone(), v.camera.clone())).collect();
        let scene = build_toy_scene(&poses, scene)?;
        Ok(Self { plan, depth, scene, schedule, samples, window })
    }

    pub fn from_config(config: &ExperimentConfig) -> Result<Self, ExperimentError> {
        let plan = GenerationPlan::load(&config.plan)?;
        let s = config.schedule;
        let schedule = build_schedule(s.steps, s.beta_start, s.beta_end)?;
        Self::new(plan, config.scene, schedule, config.samples, config.window)
    }

    /// Observed values drawn from the scene prior with a stream derived
    /// from `seed`, independent of the sampler noise.
    pub fn prior_observations(&self, seed: u64) -> Result<BTreeMap<ViewId, Vec<f64>>, ExperimentError> {
        let ids: Vec<ViewId> =
            self.plan.views.iter().filter(|v| v.role == Role::Observed).map(|v| v.id.clone()).collect();
        let idx: Vec<usize> = ids.iter().map(|id| self.scene.index_of(id)).collect::<Result<_, _>>()?;
        let k = self.scene.covariance().select_rows(&idx).select_columns(&idx);
        let l = Cholesky::new(k).ok_or(DiffusionError::NotPositiveDefinite)?.unpack();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let (dim, mu) = (self.scene.dim(), self.scene.params().mu);
        let mut out: BTreeMap<ViewId, Vec<f64>> = ids.iter().map(|id| (id.clone(), vec![mu; dim])).collect();
        for d in 0..dim {
            let z: Vec<f64> = (0..ids.len()).map(|_| rng.sample(StandardNormal)).collect();
            for (i, id) in ids.iter().enumerate() {
                let v = out.get_mut(id).expect("inserted above");
                v[d] += (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>();
            }
        }
        Ok(out)
    }

    /// Runs the plan for one seed and reports every generated view in plan
    /// order.
    pub fn run_seed(
        &self,
        seed: u64,
        observations: &BTreeMap<ViewId, Vec<f64>>,
    ) -> Result<Vec<ExperimentRow>, ExperimentError> {
        let exact = analytic_denoiser(&self.scene, BTreeMap::new(), &self.schedule)?;
        let denoiser: Box<dyn SetDenoiser> = match self.window {
            Some(w) => Box::new(truncate_conditioning(exact, w)),
            None => Box::new(exact),
        };
        let samples = execute_plan_batch(&self.plan, &denoiser, observations, &self.schedule, seed, self.samples)?;
        let report = gaussian_divergence(&samples, &self.scene, observations)?;
        Ok(self
            .plan
            .views
            .iter()
            .filter(|v| v.role == Role::Generated)
            .map(|v| ExperimentRow {
                seed,
                view: v.id.clone(),
                depth: self.depth.get(&v.id).expect("depth covers every view"),
                kl: report.get(&v.id).expect("report covers generated views"),
            })
            .collect())
    }
}

/// Runs every configured seed in order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentRow>, ExperimentError> {
    let exp = Experiment::from_config(config)?;
    let mut rows = Vec::new();
    for &seed in &config.seeds {
        let obs = match &config.observations {
            Some(o) => o.clone(),
            None => exp.prior_observations(seed)?,
        };
        rows.extend(exp.run_seed(seed, &obs)?);
    }
    Ok(rows)
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties; `NaN` when either
/// input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman inputs must have equal length");
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
