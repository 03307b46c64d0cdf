//! DDPM schedule and reverse stepping, set sampling with per-view time
//! conditioning, plan execution, and a Gaussian toy scene whose exact
//! denoiser serves as an oracle.

mod divergence;
mod sampler;
mod schedule;
mod toy;

use thiserror::Error;

use crate::geometry::Camera;
use crate::plan::PlanError;
use crate::ViewId;

pub use divergence::{gaussian_divergence, gaussian_kl, DivergenceReport};
pub use sampler::{
    execute_plan, execute_plan_batch, noise_source, sample_set, sample_set_batch, NoiseSource, PlanSamples, SetDraws,
};
pub use schedule::{build_schedule, q_sample, reverse_step, DiffusionSchedule};
pub use toy::{
    analytic_denoiser, build_toy_scene, truncate_conditioning, AnalyticDenoiser, GaussianTarget, SceneParams,
    ToySceneModel, Truncated,
};

#[derive(Debug, Error)]
pub enum DiffusionError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("time {t} outside 0..={steps}")]
    TimeOutOfRange { t: usize, steps: usize },
    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no observation for view `{0}`")]
    MissingObservation(ViewId),
    #[error("view `{0}` is not part of the scene")]
    UnknownView(ViewId),
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("at least {required} samples are required, got {got}")]
    TooFewSamples { required: usize, got: usize },
    #[error("sample covariance is degenerate")]
    DegenerateCovariance,
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// One view inside a sampled set. Conditioning views carry time 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewState {
    pub id: ViewId,
    pub value: Vec<f64>,
    pub time: usize,
}

impl ViewState {
    pub fn new(id: impl Into<ViewId>, value: Vec<f64>, time: usize) -> Self {
        Self { id: id.into(), value, time }
    }

    pub fn is_conditioning(&self) -> bool {
        self.time == 0
    }
}

/// Many joint draws of one view set sharing ids, cameras and times.
#[derive(Debug, Clone, Copy)]
pub struct SetBatch<'a> {
    pub ids: &'a [ViewId],
    pub times: &'a [usize],
    pub cameras: &'a [Camera],
    pub dim: usize,
    pub draws: usize,
    /// `draws x views x dim`, row-major.
    pub values: &'a [f64],
}

impl SetBatch<'_> {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn value(&self, draw: usize, view: usize) -> &[f64] {
        let start = (draw * self.len() + view) * self.dim;
        &self.values[start..start + self.dim]
    }

    pub fn generated(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.times[i] > 0)
    }

    fn check(&self) -> Result<(), DiffusionError> {
        let n = self.len();
        for (what, got) in [("times", self.times.len()), ("cameras", self.cameras.len())] {
            if got != n {
                return Err(DiffusionError::LengthMismatch { what, expected: n, got });
            }
        }
        let expected = self.draws * n * self.dim;
        if self.values.len() != expected {
            return Err(DiffusionError::LengthMismatch { what: "batch values", expected, got: self.values.len() });
        }
        Ok(())
    }
}

/// An ordering-independent noise estimator over view sets.
pub trait SetDenoiser: Send + Sync {
    /// Noise estimates for the views with time > 0, in input order.
    fn estimate(&self, views: &[ViewState], cameras: &[Camera]) -> Result<Vec<Vec<f64>>, DiffusionError>;

    /// Batched estimates written to `out` as `draws x generated x dim`.
    fn estimate_batch(&self, batch: &SetBatch<'_>, out: &mut Vec<f64>) -> Result<(), DiffusionError> {
        batch.check()?;
        out.clear();
        for d in 0..batch.draws {
            let views: Vec<ViewState> = (0..batch.len())
                .map(|i| ViewState::new(batch.ids[i].clone(), batch.value(d, i).to_vec(), batch.times[i]))
                .collect();
            for e in self.estimate(&views, batch.cameras)? {
                if e.len() != batch.dim {
                    return Err(DiffusionError::LengthMismatch {
                        what: "noise estimate",
                        expected: batch.dim,
                        got: e.len(),
                    });
                }
                out.extend(e);
            }
        }
        Ok(())
    }
}

impl<T: SetDenoiser + ?Sized> SetDenoiser for &T {
    fn estimate(&self, views: &[ViewState], cameras: &[Camera]) -> Result<Vec<Vec<f64>>, DiffusionError> {
        (**self).estimate(views, cameras)
    }

    fn estimate_batch(&self, batch: &SetBatch<'_>, out: &mut Vec<f64>) -> Result<(), DiffusionError> {
        (**self).estimate_batch(batch, out)
    }
}

impl<T: SetDenoiser + ?Sized> SetDenoiser for Box<T> {
    fn estimate(&self, views: &[ViewState], cameras: &[Camera]) -> Result<Vec<Vec<f64>>, DiffusionError> {
        (**self).estimate(views, cameras)
    }

    fn estimate_batch(&self, batch: &SetBatch<'_>, out: &mut Vec<f64>) -> Result<(), DiffusionError> {
        (**self).estimate_batch(batch, out)
    }
}
