use std::collections::{BTreeMap, HashMap};

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use super::{DiffusionError, DiffusionSchedule, SetBatch, SetDenoiser, ViewState};
use crate::geometry::{Camera, Vec3};
use crate::ViewId;

/// Relative diagonal jitter added to every scene covariance.
const JITTER: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub mu: f64,
    pub sigma: f64,
    pub length_scale: f64,
    pub dim: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self { mu: 0.0, sigma: 1.0, length_scale: 1.0, dim: 4 }
    }
}

/// Gaussian toy scene: per-view values in `R^dim` with independent
/// dimensions, each jointly Gaussian across views with the squared
/// exponential kernel `sigma^2 exp(-|c_i - c_j|^2 / (2 l^2))` on camera
/// centers.
#[derive(Debug, Clone)]
pub struct ToySceneModel {
    ids: Vec<ViewId>,
    poses: Vec<Camera>,
    index: HashMap<ViewId, usize>,
    params: SceneParams,
    covariance: DMatrix<f64>,
}

pub fn build_toy_scene(poses: &[(ViewId, Camera)], params: SceneParams) -> Result<ToySceneModel, DiffusionError> {
    if !(params.sigma > 0.0 && params.length_scale > 0.0 && params.mu.is_finite()) {
        return Err(DiffusionError::InvalidParameter("sigma and length_scale must be positive".into()));
    }
    if params.dim == 0 {
        return Err(DiffusionError::InvalidParameter("dim must be at least 1".into()));
    }
    let mut index = HashMap::new();
    for (i, (id, _)) in poses.iter().enumerate() {
        if index.insert(id.clone(), i).is_some() {
            return Err(DiffusionError::InvalidParameter(format!("duplicate view `{id}`")));
        }
    }
    let centers: Vec<Vec3> = poses.iter().map(|(_, c)| c.center()).collect();
    let n = poses.len();
    let s2 = params.sigma * params.sigma;
    let l2 = params.length_scale * params.length_scale;
    let covariance = DMatrix::from_fn(n, n, |i, j| {
        let k = s2 * (-(centers[i] - centers[j]).norm_squared() / (2.0 * l2)).exp();
        if i == j {
            k + JITTER * s2
        } else {
            k
        }
    });
    if Cholesky::new(covariance.clone()).is_none() {
        return Err(DiffusionError::NotPositiveDefinite);
    }
    Ok(ToySceneModel {
        ids: poses.iter().map(|(id, _)| id.clone()).collect(),
        poses: poses.iter().map(|(_, c)| c.clone()).collect(),
        index,
        params,
        covariance,
    })
}

/// Exact Gaussian over a list of views, identical for every dimension:
/// means are `views x dim`, `covariance` is `views x views`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTarget {
    pub ids: Vec<ViewId>,
    pub dim: usize,
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianTarget {
    pub fn mean_of(&self, view: usize) -> &[f64] {
        &self.mean[view * self.dim..(view + 1) * self.dim]
    }
}

impl ToySceneModel {
    pub fn ids(&self) -> &[ViewId] {
        &self.ids
    }

    pub fn poses(&self) -> &[Camera] {
        &self.poses
    }

    pub fn params(&self) -> &SceneParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    /// Per-dimension covariance between views, jitter included.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn index_of(&self, id: &ViewId) -> Result<usize, DiffusionError> {
        self.index.get(id).copied().ok_or_else(|| DiffusionError::UnknownView(id.clone()))
    }

    fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.covariance[(rows[i], cols[j])])
    }

    /// Gain `K_GC K_CC^-1` and conditional covariance of `gen` given `cond`.
    fn conditional_factors(&self, gen: &[usize], cond: &[usize]) -> Result<(DMatrix<f64>, DMatrix<f64>), DiffusionError> {
        let k_gg = self.block(gen, gen);
        if cond.is_empty() {
            return Ok((DMatrix::zeros(gen.len(), 0), k_gg));
        }
        let k_cg = self.block(cond, gen);
        let chol = Cholesky::new(self.block(cond, cond)).ok_or(DiffusionError::NotPositiveDefinite)?;
        let gain = chol.solve(&k_cg).transpose();
        let cov = &k_gg - &gain * &k_cg;
        Ok((gain, (&cov + cov.transpose()) * 0.5))
    }

    /// Exact joint distribution of `gen` given observed values.
    pub fn conditional(
        &self,
        gen: &[ViewId],
        observations: &BTreeMap<ViewId, Vec<f64>>,
    ) -> Result<GaussianTarget, DiffusionError> {
        let dim = self.dim();
        let g: Vec<usize> = gen.iter().map(|id| self.index_of(id)).collect::<Result<_, _>>()?;
        let cond: Vec<(&ViewId, &Vec<f64>)> = observations.iter().filter(|(id, _)| !gen.contains(id)).collect();
        let c: Vec<usize> = cond.iter().map(|(id, _)| self.index_of(id)).collect::<Result<_, _>>()?;
        for (_, v) in &cond {
            if v.len() != dim {
                return Err(DiffusionError::LengthMismatch { what: "observation", expected: dim, got: v.len() });
            }
        }
        let (gain, covariance) = self.conditional_factors(&g, &c)?;
        let mu = self.params.mu;
        let mut mean = vec![mu; g.len() * dim];
        for i in 0..g.len() {
            for d in 0..dim {
                mean[i * dim + d] += (0..c.len()).map(|k| gain[(i, k)] * (cond[k].1[d] - mu)).sum::<f64>();
            }
        }
        Ok(GaussianTarget { ids: gen.to_vec(), dim, mean, covariance })
    }
}

/// Exact noise estimator for a [`ToySceneModel`].
#[derive(Debug, Clone)]
pub struct AnalyticDenoiser {
    scene: ToySceneModel,
    conditioning: BTreeMap<ViewId, Vec<f64>>,
    schedule: DiffusionSchedule,
}

/// Builds the exact denoiser. `conditioning` holds fixed known values;
/// time-0 views passed at estimation time are used as conditioning too.
pub fn analytic_denoiser(
    scene: &ToySceneModel,
    conditioning: BTreeMap<ViewId, Vec<f64>>,
    schedule: &DiffusionSchedule,
) -> Result<AnalyticDenoiser, DiffusionError> {
    for (id, v) in &conditioning {
        scene.index_of(id)?;
        if v.len() != scene.dim() {
            return Err(DiffusionError::LengthMismatch { what: "conditioning value", expected: scene.dim(), got: v.len() });
        }
    }
    Ok(AnalyticDenoiser { scene: scene.clone(), conditioning, schedule: schedule.clone() })
}

impl AnalyticDenoiser {
    pub fn scene(&self) -> &ToySceneModel {
        &self.scene
    }
}

fn batch_of(views: &[ViewState], cameras: &[Camera]) -> Result<(Vec<ViewId>, Vec<usize>, Vec<f64>, usize), DiffusionError> {
    let dim = views.first().map_or(0, |v| v.value.len());
    if let Some(v) = views.iter().find(|v| v.value.len() != dim) {
        return Err(DiffusionError::LengthMismatch { what: "view value", expected: dim, got: v.value.len() });
    }
    if cameras.len() != views.len() {
        return Err(DiffusionError::LengthMismatch { what: "cameras", expected: views.len(), got: cameras.len() });
    }
    Ok((
        views.iter().map(|v| v.id.clone()).collect(),
        views.iter().map(|v| v.time).collect(),
        views.iter().flat_map(|v| v.value.iter().copied()).collect(),
        dim,
    ))
}

fn estimate_via_batch<D: SetDenoiser + ?Sized>(
    den: &D,
    views: &[ViewState],
    cameras: &[Camera],
) -> Result<Vec<Vec<f64>>, DiffusionError> {
    let (ids, times, values, dim) = batch_of(views, cameras)?;
    let batch = SetBatch { ids: &ids, times: &times, cameras, dim, draws: 1, values: &values };
    let mut out = Vec::new();
    den.estimate_batch(&batch, &mut out)?;
    if dim == 0 {
        return Ok(vec![Vec::new(); batch.generated().count()]);
    }
    Ok(out.chunks(dim).map(|c| c.to_vec()).collect())
}

impl SetDenoiser for AnalyticDenoiser {
    fn estimate(&self, views: &[ViewState], cameras: &[Camera]) -> Result<Vec<Vec<f64>>, DiffusionError> {
        estimate_via_batch(self, views, cameras)
    }

    /// Posterior-mean noise estimate. For generated views `G` at times `t_i`,
    /// with `a_i = sqrt(alpha_bar_{t_i})`, the conditional prior `N(m, S)`
    /// given all conditioning values yields
    /// `E[z | x] = m + S A (A S A + N)^-1 (x - A m)`, `N = diag(1 - a_i^2)`,
    /// and `eps_i = (x_i - a_i E_i) / sqrt(1 - a_i^2)`.
    fn estimate_batch(&self, batch: &SetBatch<'_>, out: &mut Vec<f64>) -> Result<(), DiffusionError> {
        batch.check()?;
        out.clear();
        let dim = self.scene.dim();
        if batch.dim != dim {
            return Err(DiffusionError::LengthMismatch { what: "view value", expected: dim, got: batch.dim });
        }
        let gen: Vec<usize> = batch.generated().collect();
        if gen.is_empty() {
            return Ok(());
        }
        for &t in batch.times {
            self.schedule.check_time(t)?;
        }
        let in_batch: Vec<usize> = (0..batch.len()).filter(|&i| batch.times[i] == 0).collect();
        let fixed: Vec<(&ViewId, &Vec<f64>)> =
            self.conditioning.iter().filter(|(id, _)| !batch.ids.contains(id)).collect();
        let g_idx: Vec<usize> = gen.iter().map(|&i| self.scene.index_of(&batch.ids[i])).collect::<Result<_, _>>()?;
        let c_idx: Vec<usize> = in_batch
            .iter()
            .map(|&i| &batch.ids[i])
            .chain(fixed.iter().map(|(id, _)| *id))
            .map(|id| self.scene.index_of(id))
            .collect::<Result<_, _>>()?;
        let (gain, cov) = self.scene.conditional_factors(&g_idx, &c_idx)?;

        let ng = gen.len();
        let a: Vec<f64> = gen.iter().map(|&i| self.schedule.alpha_bar(batch.times[i]).sqrt()).collect();
        let noise: Vec<f64> = gen.iter().map(|&i| 1.0 - self.schedule.alpha_bar(batch.times[i])).collect();
        let scaled = DMatrix::from_fn(ng, ng, |i, j| a[i] * cov[(i, j)]);
        let s = DMatrix::from_fn(ng, ng, |i, j| scaled[(i, j)] * a[j] + if i == j { noise[i] } else { 0.0 });
        let chol = Cholesky::<f64, Dyn>::new(s).ok_or(DiffusionError::NotPositiveDefinite)?;
        // M = S_bar A (A S_bar A + N)^-1 = ((A S_bar A + N)^-1 A S_bar)^T.
        let m = chol.solve(&scaled).transpose();
        let inv_sd: Vec<f64> = noise.iter().map(|n| 1.0 / n.sqrt()).collect();

        let mu = self.scene.params.mu;
        let nc = c_idx.len();
        // Row-major copies for tight loops.
        let gain: Vec<f64> = gain.transpose().as_slice().to_vec();
        let m: Vec<f64> = m.transpose().as_slice().to_vec();
        let mut cvals = vec![0.0; nc.max(1) * dim];
        for (k, (_, v)) in fixed.iter().enumerate() {
            for d in 0..dim {
                cvals[d * nc + in_batch.len() + k] = v[d] - mu;
            }
        }
        let stride = batch.len() * dim;
        let mut mbar = vec![0.0; ng];
        let mut r = vec![0.0; ng];
        let mut x = vec![0.0; ng];
        out.resize(batch.draws * ng * dim, 0.0);
        for (row, dst) in batch.values.chunks_exact(stride).zip(out.chunks_exact_mut(ng * dim)) {
            for (d, c) in cvals.chunks_exact_mut(nc.max(1)).enumerate() {
                let c = &mut c[..nc];
                for (ck, &i) in c.iter_mut().zip(&in_batch) {
                    *ck = row[i * dim + d] - mu;
                }
                for i in 0..ng {
                    let mut acc = mu;
                    for (g, cv) in gain[i * nc..(i + 1) * nc].iter().zip(c.iter()) {
                        acc += g * cv;
                    }
                    mbar[i] = acc;
                    x[i] = row[gen[i] * dim + d];
                    r[i] = x[i] - a[i] * acc;
                }
                for i in 0..ng {
                    let mut e = mbar[i];
                    for (mij, rj) in m[i * ng..(i + 1) * ng].iter().zip(&r) {
                        e += mij * rj;
                    }
                    dst[i * dim + d] = (x[i] - a[i] * e) * inv_sd[i];
                }
            }
        }
        Ok(())
    }
}

/// Wrapper that keeps only the `window` conditioning views nearest to the
/// centroid of the generated camera centers before delegating.
#[derive(Debug, Clone)]
pub struct Truncated<D> {
    inner: D,
    window: usize,
}

pub fn truncate_conditioning<D: SetDenoiser>(inner: D, window: usize) -> Truncated<D> {
    Truncated { inner, window }
}

impl<D> Truncated<D> {
    pub fn inner(&self) -> &D {
        &self.inner
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Indices of the views handed to the inner denoiser, in input order.
    fn kept(&self, times: &[usize], cameras: &[Camera]) -> Vec<usize> {
        let gen: Vec<usize> = (0..times.len()).filter(|&i| times[i] > 0).collect();
        let cond: Vec<usize> = (0..times.len()).filter(|&i| times[i] == 0).collect();
        if cond.len() <= self.window {
            return (0..times.len()).collect();
        }
        let mut keep = vec![false; times.len()];
        for &i in &gen {
            keep[i] = true;
        }
        if !gen.is_empty() {
            let centroid = gen.iter().map(|&i| cameras[i].center()).sum::<Vec3>() / gen.len() as f64;
            let mut ranked: Vec<(f64, usize)> =
                cond.iter().map(|&i| ((cameras[i].center() - centroid).norm(), i)).collect();
            ranked.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            for &(_, i) in ranked.iter().take(self.window) {
                keep[i] = true;
            }
        }
        (0..times.len()).filter(|&i| keep[i]).collect()
    }
}

impl<D: SetDenoiser> SetDenoiser for Truncated<D> {
    fn estimate(&self, views: &[ViewState], cameras: &[Camera]) -> Result<Vec<Vec<f64>>, DiffusionError> {
        if cameras.len() != views.len() {
            return Err(DiffusionError::LengthMismatch { what: "cameras", expected: views.len(), got: cameras.len() });
        }
        let times: Vec<usize> = views.iter().map(|v| v.time).collect();
        let kept = self.kept(&times, cameras);
        let views: Vec<ViewState> = kept.iter().map(|&i| views[i].clone()).collect();
        let cameras: Vec<Camera> = kept.iter().map(|&i| cameras[i].clone()).collect();
        self.inner.estimate(&views, &cameras)
    }

    fn estimate_batch(&self, batch: &SetBatch<'_>, out: &mut Vec<f64>) -> Result<(), DiffusionError> {
        batch.check()?;
        let kept = self.kept(batch.times, batch.cameras);
        if kept.len() == batch.len() {
            return self.inner.estimate_batch(batch, out);
        }
        let ids: Vec<ViewId> = kept.iter().map(|&i| batch.ids[i].clone()).collect();
        let times: Vec<usize> = kept.iter().map(|&i| batch.times[i]).collect();
        let cameras: Vec<Camera> = kept.iter().map(|&i| batch.cameras[i].clone()).collect();
        let mut values = Vec::with_capacity(batch.draws * kept.len() * batch.dim);
        for d in 0..batch.draws {
            for &i in &kept {
                values.extend_from_slice(batch.value(d, i));
            }
        }
        let sub = SetBatch { ids: &ids, times: &times, cameras: &cameras, dim: batch.dim, draws: batch.draws, values: &values };
        self.inner.estimate_batch(&sub, out)
    }
}
