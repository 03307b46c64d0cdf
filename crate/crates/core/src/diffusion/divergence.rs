use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{DiffusionError, PlanSamples, ToySceneModel};
use crate::ViewId;

/// Minimum sample count accepted by [`gaussian_divergence`].
pub const MIN_SAMPLES: usize = 1000;

/// `KL(N(m_f, S_f) || N(m_t, S_t))`.
pub fn gaussian_kl(
    mean_f: &DVector<f64>,
    cov_f: &DMatrix<f64>,
    mean_t: &DVector<f64>,
    cov_t: &DMatrix<f64>,
) -> Result<f64, DiffusionError> {
    let k = mean_f.len();
    let chol_t = Cholesky::new(cov_t.clone()).ok_or(DiffusionError::NotPositiveDefinite)?;
    let chol_f = Cholesky::new(cov_f.clone()).ok_or(DiffusionError::DegenerateCovariance)?;
    let trace = chol_t.solve(cov_f).trace();
    let diff = mean_t - mean_f;
    let maha = diff.dot(&chol_t.solve(&diff));
    let logdet = |c: &Cholesky<f64, nalgebra::Dyn>| 2.0 * c.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    Ok(0.5 * (trace + maha - k as f64 + logdet(&chol_t) - logdet(&chol_f)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    /// Marginal `KL(fitted || exact)` of each generated view, over all
    /// dimensions jointly.
    pub per_view: Vec<(ViewId, f64)>,
    /// KL of the joint fit over every generated view and dimension.
    pub joint_kl: f64,
    /// Largest absolute error of a fitted mean.
    pub max_mean_error: f64,
    /// Largest absolute error of a fitted covariance entry.
    pub max_cov_error: f64,
}

impl DivergenceReport {
    pub fn get(&self, id: &ViewId) -> Option<f64> {
        self.per_view.iter().find(|(v, _)| v == id).map(|&(_, k)| k)
    }
}

/// Fits Gaussian moments to the draws of every view not in `conditioning`
/// and compares them with the exact conditional of `scene`.
pub fn gaussian_divergence(
    samples: &PlanSamples,
    scene: &ToySceneModel,
    conditioning: &BTreeMap<ViewId, Vec<f64>>,
) -> Result<DivergenceReport, DiffusionError> {
    if samples.draws < MIN_SAMPLES {
        return Err(DiffusionError::TooFewSamples { required: MIN_SAMPLES, got: samples.draws });
    }
    let ids: Vec<ViewId> = samples.values.keys().filter(|id| !conditioning.contains_key(*id)).cloned().collect();
    let target = scene.conditional(&ids, conditioning)?;
    let (dim, n, nv) = (samples.dim, samples.draws, ids.len());
    let k = nv * dim;
    // Draw-major matrix of joint vectors.
    let mut x = DMatrix::zeros(n, k);
    for (v, id) in ids.iter().enumerate() {
        let vals = &samples.values[id];
        for s in 0..n {
            for d in 0..dim {
                x[(s, v * dim + d)] = vals[s * dim + d];
            }
        }
    }
    let mean = DVector::from_fn(k, |j, _| x.column(j).mean());
    for j in 0..k {
        let m = mean[j];
        x.column_mut(j).add_scalar_mut(-m);
    }
    let cov = (x.transpose() * &x) / (n as f64 - 1.0);
    let true_mean = DVector::from_column_slice(&target.mean);
    let true_cov = DMatrix::from_fn(k, k, |a, b| {
        if a % dim == b % dim {
            target.covariance[(a / dim, b / dim)]
        } else {
            0.0
        }
    });
    let mut per_view = Vec::with_capacity(nv);
    for (v, id) in ids.iter().enumerate() {
        let r = v * dim;
        let kl = gaussian_kl(
            &mean.rows(r, dim).into_owned(),
            &cov.view((r, r), (dim, dim)).into_owned(),
            &true_mean.rows(r, dim).into_owned(),
            &true_cov.view((r, r), (dim, dim)).into_owned(),
        )?;
        per_view.push((id.clone(), kl));
    }
    let joint_kl = if k == 0 { 0.0 } else { gaussian_kl(&mean, &cov, &true_mean, &true_cov)? };
    Ok(DivergenceReport {
        per_view,
        joint_kl,
        max_mean_error: (&mean - &true_mean).amax(),
        max_cov_error: (&cov - &true_cov).amax(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_kl() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let two = DMatrix::from_element(1, 1, 2.0);
        let zero = DVector::zeros(1);
        let kl = gaussian_kl(&zero, &one, &zero, &two).unwrap();
        assert!((kl - 0.5 * (2f64.ln() - 0.5)).abs() < 1e-15);
        assert!((kl - 0.0966).abs() < 1e-4);
        assert!(gaussian_kl(&zero, &two, &zero, &two).unwrap().abs() < 1e-15);
        let shifted = DVector::from_element(1, 2.0);
        assert!((gaussian_kl(&shifted, &one, &zero, &one).unwrap() - 2.0).abs() < 1e-15);
    }
}
