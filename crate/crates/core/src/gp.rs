//! Exact Gaussian-process regression over the composite kernel.
//!
//! Targets are standardized (zero mean, unit variance over the observed
//! values) before fitting; every quantity here lives in standardized units
//! unless a method says `raw`.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{MixedPoint, NormalizedPoint, SearchSpace, Violation};
use crate::kernels::{self, KernelError, KernelParams, NOISE_FLOOR};

const MAX_JITTER_ESCALATIONS: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("no observations to fit")]
    NoObservations,
    #[error("observation {index}: {violation}")]
    InvalidPoint { index: usize, violation: Violation },
    #[error("observation {0} has a non-finite target")]
    NonFiniteTarget(usize),
    #[error("gram not PD (final jitter {jitter:e})")]
    GramNotPd { jitter: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Normalized inputs with standardized targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub points: Vec<NormalizedPoint>,
    pub y: Vec<f64>,
    pub y_mean: f64,
    pub y_std: f64,
}

impl TrainingSet {
    pub fn new(space: &SearchSpace, observations: &[(MixedPoint, f64)]) -> Result<Self, GpError> {
        if observations.is_empty() {
            return Err(GpError::NoObservations);
        }
        let mut points = Vec::with_capacity(observations.len());
        let mut raw = Vec::with_capacity(observations.len());
        for (index, (p, y)) in observations.iter().enumerate() {
            space
                .validate_point(p)
                .map_err(|violation| GpError::InvalidPoint { index, violation })?;
            if !y.is_finite() {
                return Err(GpError::NonFiniteTarget(index));
            }
            points.push(space.normalize(p));
            raw.push(*y);
        }
        Ok(Self::from_normalized(points, &raw))
    }

    /// Standardizes `raw` with the population standard deviation; a constant
    /// target vector gets `y_std = 1`.
    pub fn from_normalized(points: Vec<NormalizedPoint>, raw: &[f64]) -> Self {
        assert_eq!(points.len(), raw.len());
        assert!(!raw.is_empty());
        let n = raw.len() as f64;
        let y_mean = raw.iter().sum::<f64>() / n;
        let var = raw.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n;
        let mut y_std = var.sqrt();
        if !(y_std > 1e-12 * (1.0 + y_mean.abs())) {
            y_std = 1.0;
        }
        let y = raw.iter().map(|v| (v - y_mean) / y_std).collect();
        Self {
            points,
            y,
            y_mean,
            y_std,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_standardized(&self, raw: f64) -> f64 {
        (raw - self.y_mean) / self.y_std
    }
}

/// Predictive distribution of the latent function at one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    pub var: f64,
    pub y_mean: f64,
    pub y_std: f64,
}

impl Posterior {
    pub fn std(&self) -> f64 {
        self.var.sqrt()
    }

    pub fn raw_mean(&self) -> f64 {
        self.y_mean + self.y_std * self.mean
    }

    pub fn raw_std(&self) -> f64 {
        self.y_std * self.std()
    }
}

#[derive(Debug, Clone)]
pub struct GpModel {
    pub train: TrainingSet,
    pub params: KernelParams,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl GpModel {
    pub fn fit(
        space: &SearchSpace,
        observations: &[(MixedPoint, f64)],
        params: KernelParams,
    ) -> Result<Self, GpError> {
        let train = TrainingSet::new(space, observations)?;
        params.validate(space.n_cat(), space.n_con())?;
        Self::fit_training(train, params)
    }

    pub fn fit_training(train: TrainingSet, params: KernelParams) -> Result<Self, GpError> {
        let (chol, jitter) = factorize(&params, &train.points)?;
        let y = DVector::from_column_slice(&train.y);
        let alpha = chol.solve(&y);
        Ok(Self {
            train,
            params,
            chol,
            alpha,
            jitter,
        })
    }

    /// Jitter that was added on top of the noise variance.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn predict(&self, space: &SearchSpace, x: &MixedPoint) -> Posterior {
        self.predict_normalized(&space.normalize(x))
    }

    pub fn predict_normalized(&self, x: &NormalizedPoint) -> Posterior {
        let kstar = kernels::cross_covariance(&self.params, &self.train.points, x);
        let mean = kstar.dot(&self.alpha);
        let prior = kernels::prior_variance(&self.params, x);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&kstar)
            .expect("cholesky factor has a non-zero diagonal");
        let var = (prior - v.norm_squared()).max(0.0);
        Posterior {
            mean,
            var,
            y_mean: self.train.y_mean,
            y_std: self.train.y_std,
        }
    }

    /// Log marginal likelihood of the standardized targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let y = DVector::from_column_slice(&self.train.y);
        let n = y.len() as f64;
        let log_det_half: f64 = self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
        -0.5 * y.dot(&self.alpha) - log_det_half - 0.5 * n * (2.0 * PI).ln()
    }
}

/// Cholesky of the Gram matrix with adaptive jitter: starts at
/// `1e-8 * trace / n` and grows tenfold per failure, at most six times.
fn factorize(
    params: &KernelParams,
    points: &[NormalizedPoint],
) -> Result<(Cholesky<f64, Dyn>, f64), GpError> {
    let base = kernels::gram(params, points, 0.0)?;
    let n = points.len();
    let mut jitter = 1e-8 * base.trace() / n as f64;
    if !(jitter > 0.0) {
        jitter = 1e-12;
    }
    for attempt in 0..=MAX_JITTER_ESCALATIONS {
        let mut k = base.clone();
        for i in 0..n {
            k[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(k) {
            if chol.l_dirty().diagonal().iter().all(|d| *d > 0.0 && d.is_finite()) {
                return Ok((chol, jitter));
            }
        }
        if attempt < MAX_JITTER_ESCALATIONS {
            jitter *= 10.0;
        }
    }
    Err(GpError::GramNotPd { jitter })
}

/// Log marginal likelihood of `observations` under `params`.
pub fn mll(
    space: &SearchSpace,
    observations: &[(MixedPoint, f64)],
    params: &KernelParams,
) -> Result<f64, GpError> {
    Ok(GpModel::fit(space, observations, params.clone())?.log_marginal_likelihood())
}

pub fn mll_training(train: &TrainingSet, params: &KernelParams) -> Result<f64, GpError> {
    Ok(GpModel::fit_training(train.clone(), params.clone())?.log_marginal_likelihood())
}

/// MLL at `template.with_unconstrained(theta)` together with its analytic
/// gradient in the unconstrained coordinates.
pub fn mll_with_grad(
    train: &TrainingSet,
    template: &KernelParams,
    theta: &[f64],
) -> Result<(f64, Vec<f64>), GpError> {
    let params = template.with_unconstrained(theta);
    let layout = params.layout();
    let model = GpModel::fit_training(train.clone(), params)?;
    let value = model.log_marginal_likelihood();
    let params = &model.params;

    // d MLL / dθ = ½ tr((α αᵀ - K⁻¹) dK/dθ)
    let kinv = model.chol.inverse();
    let alpha = &model.alpha;
    let n = train.len();
    let mut grad = vec![0.0; layout.len()];
    let mut dk = vec![0.0; layout.len()];
    for i in 0..n {
        for j in i..n {
            let w = alpha[i] * alpha[j] - kinv[(i, j)];
            let factor = if i == j { 0.5 * w } else { w };
            kernels::k_composite_grad(params, &train.points[i], &train.points[j], &mut dk);
            for (g, d) in grad.iter_mut().zip(&dk) {
                *g += factor * d;
            }
        }
    }
    let dnoise = params.noise_var - NOISE_FLOOR;
    grad[layout.noise_index()] = 0.5 * (0..n).map(|i| alpha[i] * alpha[i] - kinv[(i, i)]).sum::<f64>() * dnoise;
    Ok((value, grad))
}

/// Central-difference gradient of the MLL in unconstrained coordinates.
pub fn mll_numeric_grad(
    train: &TrainingSet,
    template: &KernelParams,
    theta: &[f64],
    step: f64,
) -> Result<Vec<f64>, GpError> {
    let mut out = Vec::with_capacity(theta.len());
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        probe[i] = theta[i] + step;
        let up = mll_training(train, &template.with_unconstrained(&probe))?;
        probe[i] = theta[i] - step;
        let down = mll_training(train, &template.with_unconstrained(&probe))?;
        probe[i] = theta[i];
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

/// Budget for [`optimize_hyperparams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperBudget {
    /// Number of local ascents; the first starts exactly at the initial
    /// parameters, the rest at perturbations of them.
    pub restarts: usize,
    /// Quasi-Newton iterations per ascent.
    pub max_iters: usize,
    /// Standard deviation of the perturbation in unconstrained space.
    pub perturb_scale: f64,
}

impl Default for HyperBudget {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iters: 60,
            perturb_scale: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperFit {
    pub params: KernelParams,
    pub mll: f64,
    /// MLL at the initial parameters, when they could be factorized.
    pub init_mll: Option<f64>,
    /// Set when no start could be factorized and `init` was returned as is.
    pub failed: bool,
}

/// Multi-start quasi-Newton ascent of the MLL. The result never scores
/// below the initial parameters.
pub fn optimize_hyperparams<R: Rng + ?Sized>(
    space: &SearchSpace,
    observations: &[(MixedPoint, f64)],
    init: &KernelParams,
    budget: &HyperBudget,
    rng: &mut R,
) -> Result<HyperFit, GpError> {
    let train = TrainingSet::new(space, observations)?;
    init.validate(space.n_cat(), space.n_con())?;
    Ok(optimize_training(&train, init, budget, rng))
}

pub fn optimize_training<R: Rng + ?Sized>(
    train: &TrainingSet,
    init: &KernelParams,
    budget: &HyperBudget,
    rng: &mut R,
) -> HyperFit {
    let init_mll = mll_training(train, init).ok();
    let theta0 = init.to_unconstrained();
    let bounds = ParamBounds::for_params(init);

    // Draw every perturbation up front so the RNG stream does not depend on
    // how many evaluations each ascent happens to use.
    let starts: Vec<Vec<f64>> = (0..budget.restarts.max(1))
        .map(|s| {
            if s == 0 {
                bounds.clamp(theta0.clone())
            } else {
                let t = theta0
                    .iter()
                    .map(|v| {
                        let z: f64 = rng.sample(StandardNormal);
                        v + budget.perturb_scale * z
                    })
                    .collect();
                bounds.clamp(t)
            }
        })
        .collect();

    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in starts {
        let objective = |theta: &[f64]| mll_with_grad(train, init, theta).ok();
        if let Some((value, theta)) = ascend(objective, start, budget.max_iters, &bounds) {
            if best.as_ref().map_or(true, |(b, _)| value > *b) {
                best = Some((value, theta));
            }
        }
    }

    match (best, init_mll) {
        (Some((value, theta)), Some(base)) if value > base => {
            finalize(train, init, &theta, base)
        }
        (Some((value, theta)), None) => finalize(train, init, &theta, value),
        (_, Some(base)) => HyperFit {
            params: init.clone(),
            mll: base,
            init_mll,
            failed: false,
        },
        (None, None) => {
            log::warn!("hyperparameter search: no start could be factorized");
            HyperFit {
                params: init.clone(),
                mll: f64::NEG_INFINITY,
                init_mll: None,
                failed: true,
            }
        }
    }
}

// Re-scores the winner through the public fit path so the reported MLL and
// the monotonicity guarantee refer to the same computation callers use.
fn finalize(train: &TrainingSet, init: &KernelParams, theta: &[f64], floor: f64) -> HyperFit {
    let params = init.with_unconstrained(theta);
    match mll_training(train, &params) {
        Ok(v) if v >= floor || floor == f64::NEG_INFINITY => HyperFit {
            params,
            mll: v,
            init_mll: mll_training(train, init).ok(),
            failed: false,
        },
        _ => HyperFit {
            params: init.clone(),
            mll: floor,
            init_mll: Some(floor),
            failed: false,
        },
    }
}

/// Box on the unconstrained parameters keeping the optimizer away from
/// numerically meaningless regions.
struct ParamBounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ParamBounds {
    fn for_params(p: &KernelParams) -> Self {
        let layout = p.layout();
        let d = layout.n_con;
        let mut lo = Vec::with_capacity(layout.len());
        let mut hi = Vec::with_capacity(layout.len());
        for _ in 0..layout.n_gsm + layout.n_csm {
            lo.push(-12.0);
            hi.push(5.0);
            lo.extend(std::iter::repeat(-64.0).take(d));
            hi.extend(std::iter::repeat(64.0).take(d));
            lo.extend(std::iter::repeat(-16.0).take(d));
            hi.extend(std::iter::repeat(9.0).take(d));
        }
        lo.extend(std::iter::repeat(-8.0).take(layout.n_cat));
        hi.extend(std::iter::repeat(4.0).take(layout.n_cat));
        lo.push(-12.0);
        hi.push(12.0);
        lo.push(-25.0);
        hi.push(1.0);
        Self { lo, hi }
    }

    fn clamp(&self, mut theta: Vec<f64>) -> Vec<f64> {
        for ((t, lo), hi) in theta.iter_mut().zip(&self.lo).zip(&self.hi) {
            *t = t.clamp(*lo, *hi);
        }
        theta
    }
}

/// Projected BFGS ascent with Armijo backtracking. Returns the best value
/// seen and its location, or `None` if the start itself cannot be evaluated.
fn ascend<F>(f: F, start: Vec<f64>, max_iters: usize, bounds: &ParamBounds) -> Option<(f64, Vec<f64>)>
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = start.len();
    let (mut fx, mut gx) = f(&start)?;
    if !fx.is_finite() || gx.iter().any(|g| !g.is_finite()) {
        return None;
    }
    let mut x = start;
    // Work on the negated objective so the update is the usual minimizer.
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut first = true;
    for _ in 0..max_iters {
        let g = DVector::from_iterator(n, gx.iter().map(|v| -v));
        let gnorm = g.amax();
        if gnorm < 1e-6 {
            break;
        }
        let mut dir = -(&h * &g);
        if dir.dot(&g) >= 0.0 {
            h.fill_with_identity();
            dir = -g.clone();
        }
        let mut t = if first { (1.0 / gnorm).min(1.0) } else { 1.0 };
        first = false;
        let slope = dir.dot(&g);
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, b)| a + t * b).collect();
            let trial = bounds.clamp(trial);
            if let Some((ft, gt)) = f(&trial) {
                if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && -ft <= -fx + 1e-4 * t * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else { break };
        let s = DVector::from_iterator(n, xn.iter().zip(&x).map(|(a, b)| a - b));
        let yv = DVector::from_iterator(n, gnew.iter().zip(&gx).map(|(a, b)| -(a - b)));
        let sy = s.dot(&yv);
        let improvement = fnew - fx;
        x = xn;
        fx = fnew;
        gx = gnew;
        if sy > 1e-10 {
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            // H += (1 + ρ yᵀHy) ρ s sᵀ - ρ (H y sᵀ + s yᵀ H)
            h += (&s * s.transpose()) * (rho * (1.0 + rho * yhy));
            h -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        if improvement.abs() < 1e-10 * (1.0 + fx.abs()) {
            break;
        }
    }
    Some((fx, x))
}

/// Noise variance of every data-derived start, in standardized units.
const INIT_NOISE_VAR: f64 = 1e-2;

/// Starting hyperparameters derived from the data.
///
/// The first component of each family sits at zero frequency; the remaining
/// ones draw each frequency uniformly from `[0, n / (2 * range_j)]`, where
/// `range_j` is the spread of the observed normalized coordinates. Bandwidths
/// come from the per-dimension median pairwise distance `m_j`:
/// `σ_j = γ_j = 1 / (2π m_j)`, so both envelopes decay on the scale `m_j`.
pub fn spectral_init<R: Rng + ?Sized>(
    train: &TrainingSet,
    n_cat: usize,
    n_con: usize,
    n_gsm: usize,
    n_csm: usize,
    rng: &mut R,
) -> KernelParams {
    let mut p = KernelParams::default_for(n_cat, n_con, n_gsm, n_csm);
    p.noise_var = INIT_NOISE_VAR;
    if n_con == 0 {
        return p;
    }
    let n = train.len();
    let mut nu_max = vec![0.0; n_con];
    let mut median = vec![0.5; n_con];
    for j in 0..n_con {
        let vals: Vec<f64> = train.points.iter().map(|q| q.con01[j]).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = (hi - lo).max(0.1);
        nu_max[j] = n as f64 / (2.0 * range);
        let mut dists = Vec::with_capacity(n * (n - 1) / 2);
        for a in 0..n {
            for b in (a + 1)..n {
                dists.push((vals[a] - vals[b]).abs());
            }
        }
        if !dists.is_empty() {
            dists.sort_by(f64::total_cmp);
            median[j] = dists[dists.len() / 2].max(1e-3);
        }
    }
    let scale: Vec<f64> = median.iter().map(|m| 1.0 / (2.0 * PI * m)).collect();
    for (q, c) in p.gsm.iter_mut().enumerate() {
        for j in 0..n_con {
            c.mean[j] = if q == 0 { 0.0 } else { rng.gen_range(0.0..=nu_max[j]) };
            c.var[j] = scale[j] * scale[j];
        }
    }
    for (q, c) in p.csm.iter_mut().enumerate() {
        for j in 0..n_con {
            c.eta[j] = if q == 0 { 0.0 } else { rng.gen_range(0.0..=nu_max[j]) };
            c.gamma[j] = scale[j];
        }
    }
    p
}
