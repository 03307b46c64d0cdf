use super::DiffusionError;

/// Variance schedule `beta_1..beta_T` with `alpha_t = 1 - beta_t` and
/// `alpha_bar_t = prod_{s <= t} alpha_s`, `alpha_bar_0 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    // Index 0 holds the t = 0 convention (beta 0, alpha 1, alpha_bar 1).
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl DiffusionSchedule {
    pub fn from_betas(betas: &[f64]) -> Result<Self, DiffusionError> {
        if betas.is_empty() {
            return Err(DiffusionError::InvalidSchedule("at least one step is required".into()));
        }
        if let Some(b) = betas.iter().find(|&&b| !(b > 0.0 && b < 1.0)) {
            return Err(DiffusionError::InvalidSchedule(format!("beta {b} outside (0, 1)")));
        }
        let mut beta = vec![0.0];
        beta.extend_from_slice(betas);
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bar = Vec::with_capacity(alpha.len());
        let mut acc = 1.0;
        for a in &alpha {
            acc *= a;
            alpha_bar.push(acc);
        }
        Ok(Self { beta, alpha, alpha_bar })
    }

    /// Number of diffusion steps `T`.
    pub fn steps(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn check_time(&self, t: usize) -> Result<(), DiffusionError> {
        if t > self.steps() {
            return Err(DiffusionError::TimeOutOfRange { t, steps: self.steps() });
        }
        Ok(())
    }

    /// Coefficients `(1/sqrt(alpha_t), (1-alpha_t)/sqrt(1-alpha_bar_t), sigma_t)`
    /// of the reverse update, with `sigma_t = sqrt(beta_t)` and 0 at t = 1.
    pub(crate) fn reverse_coefficients(&self, t: usize) -> (f64, f64, f64) {
        let a = self.alpha[t];
        let sigma = if t == 1 { 0.0 } else { self.beta[t].sqrt() };
        (1.0 / a.sqrt(), (1.0 - a) / (1.0 - self.alpha_bar[t]).sqrt(), sigma)
    }
}

impl Default for DiffusionSchedule {
    fn default() -> Self {
        build_schedule(1000, 1e-4, 0.02).expect("default schedule is valid")
    }
}

/// Linear beta schedule from `beta_start` to `beta_end` over `steps` steps.
pub fn build_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<DiffusionSchedule, DiffusionError> {
    if steps == 0 {
        return Err(DiffusionError::InvalidSchedule("at least one step is required".into()));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(DiffusionError::InvalidSchedule(format!(
            "need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )));
    }
    let betas: Vec<f64> = if steps == 1 {
        vec![beta_start]
    } else {
        let step = (beta_end - beta_start) / (steps - 1) as f64;
        (0..steps).map(|i| if i == steps - 1 { beta_end } else { beta_start + step * i as f64 }).collect()
    };
    DiffusionSchedule::from_betas(&betas)
}

/// Closed-form forward noising `sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps`.
pub fn q_sample(x0: &[f64], t: usize, eps: &[f64], schedule: &DiffusionSchedule) -> Result<Vec<f64>, DiffusionError> {
    schedule.check_time(t)?;
    if eps.len() != x0.len() {
        return Err(DiffusionError::LengthMismatch { what: "noise", expected: x0.len(), got: eps.len() });
    }
    let ab = schedule.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect())
}

/// One ancestral step `x_t -> x_{t-1}`. `zeta` is ignored at t = 1.
pub fn reverse_step(
    x_t: &[f64],
    eps_hat: &[f64],
    t: usize,
    zeta: &[f64],
    schedule: &DiffusionSchedule,
) -> Result<Vec<f64>, DiffusionError> {
    if t == 0 {
        return Err(DiffusionError::TimeOutOfRange { t, steps: schedule.steps() });
    }
    schedule.check_time(t)?;
    for (what, got) in [("noise estimate", eps_hat.len()), ("zeta", zeta.len())] {
        if got != x_t.len() {
            return Err(DiffusionError::LengthMismatch { what, expected: x_t.len(), got });
        }
    }
    let (c1, c2, sigma) = schedule.reverse_coefficients(t);
    Ok(x_t.iter().zip(eps_hat).zip(zeta).map(|((x, e), z)| step(c1, c2, sigma, *x, *e, *z)).collect())
}

#[inline]
pub(crate) fn step(c1: f64, c2: f64, sigma: f64, x: f64, eps: f64, zeta: f64) -> f64 {
    c1 * (x - c2 * eps) + sigma * zeta
}
