use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::schedule::step;
use super::{DiffusionError, DiffusionSchedule, SetBatch, SetDenoiser, ViewState};
use crate::geometry::Camera;
use crate::plan::{validate, GenerationPlan, PlanError, Role};
use crate::ViewId;

pub type NoiseSource = ChaCha8Rng;

pub fn noise_source(seed: u64) -> NoiseSource {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Joint draws of one view set: `values` is `draws x views x dim`.
/// Views flagged in `generated` are sampled; the rest are held fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct SetDraws {
    pub ids: Vec<ViewId>,
    pub cameras: Vec<Camera>,
    pub generated: Vec<bool>,
    pub dim: usize,
    pub draws: usize,
    pub values: Vec<f64>,
}

/// Batched reverse diffusion over a view set.
///
/// Generated entries are overwritten with standard normal draws (drawn in
/// `draw, view, dim` order), then `t = T..1` applies the reverse step with
/// the denoiser invoked on the full set at every step. Conditioning entries
/// are never written.
pub fn sample_set_batch<D, R>(
    denoiser: &D,
    set: &mut SetDraws,
    schedule: &DiffusionSchedule,
    rng: &mut R,
) -> Result<(), DiffusionError>
where
    D: SetDenoiser + ?Sized,
    R: Rng + ?Sized,
{
    let n = set.ids.len();
    for (what, got) in [("cameras", set.cameras.len()), ("generated flags", set.generated.len())] {
        if got != n {
            return Err(DiffusionError::LengthMismatch { what, expected: n, got });
        }
    }
    let expected = set.draws * n * set.dim;
    if set.values.len() != expected {
        return Err(DiffusionError::LengthMismatch { what: "set values", expected, got: set.values.len() });
    }
    let gen: Vec<usize> = (0..n).filter(|&i| set.generated[i]).collect();
    if gen.is_empty() {
        return Ok(());
    }
    let dim = set.dim;
    let offset = |d: usize, i: usize| (d * n + i) * dim;
    for d in 0..set.draws {
        for &i in &gen {
            let o = offset(d, i);
            for x in &mut set.values[o..o + dim] {
                *x = rng.sample(StandardNormal);
            }
        }
    }
    let mut times = vec![0usize; n];
    let mut eps = Vec::with_capacity(set.draws * gen.len() * dim);
    for t in (1..=schedule.steps()).rev() {
        for &i in &gen {
            times[i] = t;
        }
        let batch = SetBatch {
            ids: &set.ids,
            times: &times,
            cameras: &set.cameras,
            dim,
            draws: set.draws,
            values: &set.values,
        };
        denoiser.estimate_batch(&batch, &mut eps)?;
        let expected = set.draws * gen.len() * dim;
        if eps.len() != expected {
            return Err(DiffusionError::LengthMismatch { what: "noise estimates", expected, got: eps.len() });
        }
        let (c1, c2, sigma) = schedule.reverse_coefficients(t);
        let mut e = eps.iter();
        for d in 0..set.draws {
            for &i in &gen {
                let o = offset(d, i);
                for x in &mut set.values[o..o + dim] {
                    let zeta = if t > 1 { rng.sample(StandardNormal) } else { 0.0 };
                    *x = step(c1, c2, sigma, *x, *e.next().expect("length checked"), zeta);
                }
            }
        }
    }
    Ok(())
}

/// Samples the views with time > 0 jointly, conditioned on the time-0 views.
///
/// Generated views start from fresh standard normal draws (their input
/// values only fix the dimension) and are returned with time 0; conditioning
/// views are returned unchanged.
pub fn sample_set<D, R>(
    denoiser: &D,
    views: &[ViewState],
    cameras: &[Camera],
    schedule: &DiffusionSchedule,
    rng: &mut R,
) -> Result<Vec<ViewState>, DiffusionError>
where
    D: SetDenoiser + ?Sized,
    R: Rng + ?Sized,
{
    let dim = views.first().map_or(0, |v| v.value.len());
    if let Some(v) = views.iter().find(|v| v.value.len() != dim) {
        return Err(DiffusionError::LengthMismatch { what: "view value", expected: dim, got: v.value.len() });
    }
    for v in views {
        schedule.check_time(v.time)?;
    }
    let mut set = SetDraws {
        ids: views.iter().map(|v| v.id.clone()).collect(),
        cameras: cameras.to_vec(),
        generated: views.iter().map(|v| v.time > 0).collect(),
        dim,
        draws: 1,
        values: views.iter().flat_map(|v| v.value.iter().copied()).collect(),
    };
    sample_set_batch(denoiser, &mut set, schedule, rng)?;
    Ok(views
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if v.time == 0 {
                v.clone()
            } else {
                ViewState::new(v.id.clone(), set.values[i * dim..(i + 1) * dim].to_vec(), 0)
            }
        })
        .collect())
}

/// Per-view joint draws from a plan execution; each entry is `draws x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanSamples {
    pub dim: usize,
    pub draws: usize,
    pub values: BTreeMap<ViewId, Vec<f64>>,
}

impl PlanSamples {
    pub fn draw(&self, id: &ViewId, draw: usize) -> Option<&[f64]> {
        self.values.get(id).map(|v| &v[draw * self.dim..(draw + 1) * self.dim])
    }
}

/// Runs every stage of `plan` in order for `draws` independent joint draws.
///
/// Stage `i` samples its generate set conditioned on the current values of
/// its condition set. Observations are shared by all draws. One noise
/// stream seeded from `seed` feeds all stages.
pub fn execute_plan_batch<D: SetDenoiser + ?Sized>(
    plan: &GenerationPlan,
    denoiser: &D,
    observations: &BTreeMap<ViewId, Vec<f64>>,
    schedule: &DiffusionSchedule,
    seed: u64,
    draws: usize,
) -> Result<PlanSamples, DiffusionError> {
    let violations = validate(plan);
    if !violations.is_empty() {
        return Err(PlanError::Invalid(violations).into());
    }
    let dim = match observations.values().next() {
        Some(v) => v.len(),
        None => return Err(DiffusionError::InvalidParameter("observations are required to fix the value dimension".into())),
    };
    let cameras: HashMap<&ViewId, &Camera> = plan.views.iter().map(|v| (&v.id, &v.camera)).collect();
    let mut values: BTreeMap<ViewId, Vec<f64>> = BTreeMap::new();
    for v in plan.views.iter().filter(|v| v.role == Role::Observed) {
        let obs = observations.get(&v.id).ok_or_else(|| DiffusionError::MissingObservation(v.id.clone()))?;
        if obs.len() != dim {
            return Err(DiffusionError::LengthMismatch { what: "observation", expected: dim, got: obs.len() });
        }
        values.insert(v.id.clone(), obs.repeat(draws));
    }
    let mut rng = noise_source(seed);
    for stage in &plan.stages {
        let ids: Vec<ViewId> = stage.condition.iter().chain(&stage.generate).cloned().collect();
        let n = ids.len();
        let n_cond = stage.condition.len();
        let mut set = SetDraws {
            cameras: ids.iter().map(|id| cameras[id].clone()).collect(),
            generated: (0..n).map(|i| i >= n_cond).collect(),
            ids,
            dim,
            draws,
            values: vec![0.0; draws * n * dim],
        };
        for (i, id) in stage.condition.iter().enumerate() {
            let src = &values[id];
            for d in 0..draws {
                let o = (d * n + i) * dim;
                set.values[o..o + dim].copy_from_slice(&src[d * dim..(d + 1) * dim]);
            }
        }
        sample_set_batch(denoiser, &mut set, schedule, &mut rng)?;
        for (i, id) in stage.generate.iter().enumerate() {
            let i = n_cond + i;
            let mut out = Vec::with_capacity(draws * dim);
            for d in 0..draws {
                let o = (d * n + i) * dim;
                out.extend_from_slice(&set.values[o..o + dim]);
            }
            values.insert(id.clone(), out);
        }
    }
    Ok(PlanSamples { dim, draws, values })
}

/// Single-draw plan execution; returns every view's value.
pub fn execute_plan<D: SetDenoiser + ?Sized>(
    plan: &GenerationPlan,
    denoiser: &D,
    observations: &BTreeMap<ViewId, Vec<f64>>,
    schedule: &DiffusionSchedule,
    seed: u64,
) -> Result<BTreeMap<ViewId, Vec<f64>>, DiffusionError> {
    Ok(execute_plan_batch(plan, denoiser, observations, schedule, seed, 1)?.values)
}
