//! Covariance functions over mixed inputs.
//!
//! Continuous part: a spectral mixture whose spectral density is a
//! symmetrized mixture of Gaussians plus a symmetrized mixture of Cauchy
//! distributions. In input space this gives
//!
//! ```text
//! k_gc(τ) = Σ_q w_q^g exp(-2π² Σ_j σ²_qj τ_j²) cos(2π μ_q·τ)
//!         + Σ_q w_q^c exp(-2π Σ_j γ_qj |τ_j|) cos(2π η_q·τ)
//! ```
//!
//! Categorical part: `k_u(a, b) = exp((1/U) Σ_i ℓ_i [a_i = b_i])`.
//!
//! The two are blended as `λ k_gc k_u + (1 - λ)(k_gc + k_u)`. When the space
//! has no continuous variables the kernel is `k_u` alone, and with no
//! categorical variables it is `k_gc` alone.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::NormalizedPoint;

const TWO_PI: f64 = 2.0 * PI;
const TWO_PI_SQ: f64 = 2.0 * PI * PI;

/// Floor on the observation-noise variance, in standardized output units.
pub const NOISE_FLOOR: f64 = 1e-8;

// Clamp applied before taking logs / logits of parameters that may sit on
// their boundary (zero weights, λ ∈ {0, 1}).
const LOG_CLAMP: f64 = 1e-12;
const LOGIT_CLAMP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("kernel value at pair ({i}, {j}) is not finite")]
    NonFinite { i: usize, j: usize },
    #[error("invalid kernel parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsmComponent {
    pub weight: f64,
    /// Spectral mean, cycles per unit of normalized input.
    pub mean: Vec<f64>,
    /// Diagonal of the spectral covariance.
    pub var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsmComponent {
    pub weight: f64,
    /// Central frequency.
    pub eta: Vec<f64>,
    /// Per-dimension Cauchy scale.
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HammingParams {
    pub lengthscales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub gsm: Vec<GsmComponent>,
    pub csm: Vec<CsmComponent>,
    #[serde(rename = "hamming_lengthscales")]
    pub hamming: HammingParams,
    pub lambda: f64,
    pub noise_var: f64,
    /// Divide `k_u` by its diagonal value so that `k_u(a, a) = 1`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub hamming_unit_diagonal: bool,
}

impl KernelParams {
    /// Unit-mass defaults: weights split evenly, zero frequencies, λ = 0.5,
    /// ℓ_i = 1.
    pub fn default_for(n_cat: usize, n_con: usize, n_gsm: usize, n_csm: usize) -> Self {
        let (n_gsm, n_csm) = if n_con == 0 { (0, 0) } else { (n_gsm, n_csm) };
        let total = (n_gsm + n_csm).max(1) as f64;
        let bw = 1.0 / TWO_PI;
        Self {
            gsm: (0..n_gsm)
                .map(|_| GsmComponent {
                    weight: 1.0 / total,
                    mean: vec![0.0; n_con],
                    var: vec![bw * bw; n_con],
                })
                .collect(),
            csm: (0..n_csm)
                .map(|_| CsmComponent {
                    weight: 1.0 / total,
                    eta: vec![0.0; n_con],
                    gamma: vec![bw; n_con],
                })
                .collect(),
            hamming: HammingParams {
                lengthscales: vec![1.0; n_cat],
            },
            lambda: 0.5,
            noise_var: 1e-4,
            hamming_unit_diagonal: false,
        }
    }

    pub fn n_con(&self) -> usize {
        self.gsm
            .first()
            .map(|c| c.mean.len())
            .or_else(|| self.csm.first().map(|c| c.eta.len()))
            .unwrap_or(0)
    }

    pub fn n_cat(&self) -> usize {
        self.hamming.lengthscales.len()
    }

    /// Checks shapes against a `(U, d)` space plus the positivity constraints.
    pub fn validate(&self, n_cat: usize, n_con: usize) -> Result<(), KernelError> {
        let bad = |m: String| Err(KernelError::InvalidParams(m));
        if self.hamming.lengthscales.len() != n_cat {
            return bad(format!(
                "{} hamming lengthscales for {} categorical variables",
                self.hamming.lengthscales.len(),
                n_cat
            ));
        }
        if self.hamming.lengthscales.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return bad("hamming lengthscales must be finite and >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda {} outside [0, 1]", self.lambda));
        }
        if !(self.noise_var >= NOISE_FLOOR) || !self.noise_var.is_finite() {
            return bad(format!("noise_var {} below floor {NOISE_FLOOR}", self.noise_var));
        }
        if n_con > 0 {
            if self.gsm.is_empty() || self.csm.is_empty() {
                return bad("need at least one gaussian and one cauchy component".into());
            }
            if self.total_weight() <= 0.0 {
                return bad("spectral weights sum to zero".into());
            }
        }
        for c in &self.gsm {
            if c.mean.len() != n_con || c.var.len() != n_con {
                return bad("gaussian component dimension mismatch".into());
            }
            if !(c.weight >= 0.0) || c.var.iter().any(|v| !(*v > 0.0)) {
                return bad("gaussian component needs weight >= 0 and var > 0".into());
            }
            if c.mean.iter().chain(&c.var).any(|v| !v.is_finite()) || !c.weight.is_finite() {
                return bad("gaussian component has non-finite entries".into());
            }
        }
        for c in &self.csm {
            if c.eta.len() != n_con || c.gamma.len() != n_con {
                return bad("cauchy component dimension mismatch".into());
            }
            if !(c.weight >= 0.0) || c.gamma.iter().any(|v| !(*v > 0.0)) {
                return bad("cauchy component needs weight >= 0 and gamma > 0".into());
            }
            if c.eta.iter().chain(&c.gamma).any(|v| !v.is_finite()) || !c.weight.is_finite() {
                return bad("cauchy component has non-finite entries".into());
            }
        }
        Ok(())
    }

    /// `k_gc(0)`: total spectral mass.
    pub fn total_weight(&self) -> f64 {
        self.gsm.iter().map(|c| c.weight).sum::<f64>()
            + self.csm.iter().map(|c| c.weight).sum::<f64>()
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout {
            n_con: self.n_con(),
            n_cat: self.n_cat(),
            n_gsm: self.gsm.len(),
            n_csm: self.csm.len(),
        }
    }

    /// Packs into an unconstrained vector: logs for positive quantities,
    /// a logit for λ and `log(noise - floor)` for the noise variance.
    pub fn to_unconstrained(&self) -> Vec<f64> {
        let layout = self.layout();
        let mut theta = Vec::with_capacity(layout.len());
        let ln = |v: f64| v.max(LOG_CLAMP).ln();
        for c in &self.gsm {
            theta.push(ln(c.weight));
            theta.extend(c.mean.iter().copied());
            theta.extend(c.var.iter().map(|&v| ln(v)));
        }
        for c in &self.csm {
            theta.push(ln(c.weight));
            theta.extend(c.eta.iter().copied());
            theta.extend(c.gamma.iter().map(|&v| ln(v)));
        }
        theta.extend(self.hamming.lengthscales.iter().map(|&l| ln(l)));
        let lam = self.lambda.clamp(LOGIT_CLAMP, 1.0 - LOGIT_CLAMP);
        theta.push((lam / (1.0 - lam)).ln());
        theta.push(ln(self.noise_var - NOISE_FLOOR));
        theta
    }

    /// Inverse of [`to_unconstrained`](Self::to_unconstrained), using `self`
    /// for shapes and flags.
    pub fn with_unconstrained(&self, theta: &[f64]) -> Self {
        let layout = self.layout();
        assert_eq!(theta.len(), layout.len(), "parameter vector length");
        let d = layout.n_con;
        let mut it = theta.iter().copied();
        let mut take = |n: usize| -> Vec<f64> { (&mut it).take(n).collect() };
        let gsm = (0..layout.n_gsm)
            .map(|_| {
                let w = take(1)[0].exp();
                let mean = take(d);
                let var = take(d).into_iter().map(f64::exp).collect();
                GsmComponent { weight: w, mean, var }
            })
            .collect();
        let csm = (0..layout.n_csm)
            .map(|_| {
                let w = take(1)[0].exp();
                let eta = take(d);
                let gamma = take(d).into_iter().map(f64::exp).collect();
                CsmComponent { weight: w, eta, gamma }
            })
            .collect();
        let lengthscales = take(layout.n_cat).into_iter().map(f64::exp).collect();
        let rest = take(2);
        Self {
            gsm,
            csm,
            hamming: HammingParams { lengthscales },
            lambda: sigmoid(rest[0]),
            noise_var: NOISE_FLOOR + rest[1].exp(),
            hamming_unit_diagonal: self.hamming_unit_diagonal,
        }
    }
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Offsets of each parameter group inside the unconstrained vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub n_con: usize,
    pub n_cat: usize,
    pub n_gsm: usize,
    pub n_csm: usize,
}

impl ParamLayout {
    #[inline]
    pub fn component_len(&self) -> usize {
        1 + 2 * self.n_con
    }

    #[inline]
    pub fn csm_offset(&self) -> usize {
        self.n_gsm * self.component_len()
    }

    #[inline]
    pub fn hamming_offset(&self) -> usize {
        self.csm_offset() + self.n_csm * self.component_len()
    }

    #[inline]
    pub fn lambda_index(&self) -> usize {
        self.hamming_offset() + self.n_cat
    }

    #[inline]
    pub fn noise_index(&self) -> usize {
        self.lambda_index() + 1
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.noise_index() + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Gaussian spectral mixture at lag `tau`.
pub fn k_gsm(components: &[GsmComponent], tau: &[f64]) -> f64 {
    components
        .iter()
        .map(|c| {
            let mut quad = 0.0;
            let mut phase = 0.0;
            for ((&t, &m), &v) in tau.iter().zip(&c.mean).zip(&c.var) {
                quad += v * t * t;
                phase += t * m;
            }
            c.weight * (-TWO_PI_SQ * quad).exp() * (TWO_PI * phase).cos()
        })
        .sum()
}

/// Cauchy spectral mixture at lag `tau`.
pub fn k_csm(components: &[CsmComponent], tau: &[f64]) -> f64 {
    components
        .iter()
        .map(|c| {
            let mut abs = 0.0;
            let mut phase = 0.0;
            for ((&t, &e), &g) in tau.iter().zip(&c.eta).zip(&c.gamma) {
                abs += g * t.abs();
                phase += t * e;
            }
            c.weight * (-TWO_PI * abs).exp() * (TWO_PI * phase).cos()
        })
        .sum()
}

pub fn k_gc(params: &KernelParams, tau: &[f64]) -> f64 {
    k_gsm(&params.gsm, tau) + k_csm(&params.csm, tau)
}

/// Weighted exponentiated Hamming similarity, exactly as `exp(mean(ℓ·δ))`.
pub fn k_hamming(params: &HammingParams, a: &[usize], b: &[usize]) -> f64 {
    let u = params.lengthscales.len();
    debug_assert_eq!(a.len(), u);
    debug_assert_eq!(b.len(), u);
    if u == 0 {
        return 1.0;
    }
    let s: f64 = params
        .lengthscales
        .iter()
        .zip(a.iter().zip(b))
        .filter(|(_, (x, y))| x == y)
        .map(|(l, _)| *l)
        .sum();
    (s / u as f64).exp()
}

/// `k_u` scaled to unit diagonal: `exp(-(1/U) Σ ℓ_i [a_i ≠ b_i])`.
pub fn k_hamming_unit(params: &HammingParams, a: &[usize], b: &[usize]) -> f64 {
    let u = params.lengthscales.len();
    if u == 0 {
        return 1.0;
    }
    let s: f64 = params
        .lengthscales
        .iter()
        .zip(a.iter().zip(b))
        .filter(|(_, (x, y))| x != y)
        .map(|(l, _)| *l)
        .sum();
    (-s / u as f64).exp()
}

fn categorical(params: &KernelParams, a: &[usize], b: &[usize]) -> f64 {
    if params.hamming_unit_diagonal {
        k_hamming_unit(&params.hamming, a, b)
    } else {
        k_hamming(&params.hamming, a, b)
    }
}

#[inline]
fn blend(lambda: f64, g: f64, h: f64) -> f64 {
    lambda * (g * h) + (1.0 - lambda) * (g + h)
}

/// Full mixed kernel between two normalized points of the same space.
pub fn k_composite(params: &KernelParams, x: &NormalizedPoint, y: &NormalizedPoint) -> f64 {
    let has_con = !x.con01.is_empty();
    let has_cat = !x.cat.is_empty();
    match (has_cat, has_con) {
        (true, false) => categorical(params, &x.cat, &y.cat),
        (false, _) => {
            let tau = lag(x, y);
            k_gc(params, &tau)
        }
        (true, true) => {
            let tau = lag(x, y);
            blend(params.lambda, k_gc(params, &tau), categorical(params, &x.cat, &y.cat))
        }
    }
}

#[inline]
fn lag(x: &NormalizedPoint, y: &NormalizedPoint) -> Vec<f64> {
    x.con01.iter().zip(&y.con01).map(|(a, b)| a - b).collect()
}

/// Prior variance `k(x, x)`.
pub fn prior_variance(params: &KernelParams, x: &NormalizedPoint) -> f64 {
    k_composite(params, x, x)
}

/// Composite kernel value plus its gradient with respect to the
/// unconstrained kernel parameters (everything in the packed vector except
/// the trailing noise entry). `grad` must have `layout.len()` entries; the
/// noise slot is left at zero.
pub fn k_composite_grad(
    params: &KernelParams,
    x: &NormalizedPoint,
    y: &NormalizedPoint,
    grad: &mut [f64],
) -> f64 {
    let layout = params.layout();
    debug_assert_eq!(grad.len(), layout.len());
    grad.iter_mut().for_each(|g| *g = 0.0);
    let d = layout.n_con;
    let u = layout.n_cat;
    let has_con = !x.con01.is_empty();
    let has_cat = !x.cat.is_empty();

    let mut g = 0.0;
    if has_con {
        let tau = lag(x, y);
        let stride = layout.component_len();
        for (q, c) in params.gsm.iter().enumerate() {
            let base = q * stride;
            let mut quad = 0.0;
            let mut phase = 0.0;
            for j in 0..d {
                quad += c.var[j] * tau[j] * tau[j];
                phase += tau[j] * c.mean[j];
            }
            let env = c.weight * (-TWO_PI_SQ * quad).exp();
            let (s, co) = (TWO_PI * phase).sin_cos();
            let val = env * co;
            g += val;
            grad[base] = val;
            for j in 0..d {
                grad[base + 1 + j] = -env * s * TWO_PI * tau[j];
                grad[base + 1 + d + j] = val * (-TWO_PI_SQ * tau[j] * tau[j] * c.var[j]);
            }
        }
        let off = layout.csm_offset();
        for (q, c) in params.csm.iter().enumerate() {
            let base = off + q * stride;
            let mut abs = 0.0;
            let mut phase = 0.0;
            for j in 0..d {
                abs += c.gamma[j] * tau[j].abs();
                phase += tau[j] * c.eta[j];
            }
            let env = c.weight * (-TWO_PI * abs).exp();
            let (s, co) = (TWO_PI * phase).sin_cos();
            let val = env * co;
            g += val;
            grad[base] = val;
            for j in 0..d {
                grad[base + 1 + j] = -env * s * TWO_PI * tau[j];
                grad[base + 1 + d + j] = val * (-TWO_PI * tau[j].abs() * c.gamma[j]);
            }
        }
    }

    let mut h = 1.0;
    if has_cat {
        h = categorical(params, &x.cat, &y.cat);
        let off = layout.hamming_offset();
        for i in 0..u {
            let l = params.hamming.lengthscales[i];
            let matched = x.cat[i] == y.cat[i];
            grad[off + i] = if params.hamming_unit_diagonal {
                if matched {
                    0.0
                } else {
                    -h * l / u as f64
                }
            } else if matched {
                h * l / u as f64
            } else {
                0.0
            };
        }
    }

    match (has_cat, has_con) {
        (true, false) => h,
        (false, _) => g,
        (true, true) => {
            let lam = params.lambda;
            let dg = lam * h + (1.0 - lam);
            let dh = lam * g + (1.0 - lam);
            for v in &mut grad[..layout.hamming_offset()] {
                *v *= dg;
            }
            for v in &mut grad[layout.hamming_offset()..layout.lambda_index()] {
                *v *= dh;
            }
            grad[layout.lambda_index()] = (g * h - g - h) * lam * (1.0 - lam);
            blend(lam, g, h)
        }
    }
}

/// Gram matrix with `noise_var + jitter` on the diagonal. The upper triangle
/// is computed and mirrored, so the result is exactly symmetric.
pub fn gram(
    params: &KernelParams,
    points: &[NormalizedPoint],
    jitter: f64,
) -> Result<DMatrix<f64>, KernelError> {
    let mut k = gram_noiseless(params, points)?;
    let extra = params.noise_var + jitter;
    for i in 0..points.len() {
        k[(i, i)] += extra;
    }
    Ok(k)
}

/// Gram matrix of the kernel alone, without noise or jitter.
pub fn gram_noiseless(
    params: &KernelParams,
    points: &[NormalizedPoint],
) -> Result<DMatrix<f64>, KernelError> {
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = k_composite(params, &points[i], &points[j]);
            if !v.is_finite() {
                return Err(KernelError::NonFinite { i, j });
            }
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Column of covariances between the training points and `x`.
pub fn cross_covariance(
    params: &KernelParams,
    points: &[NormalizedPoint],
    x: &NormalizedPoint,
) -> DVector<f64> {
    DVector::from_iterator(points.len(), points.iter().map(|p| k_composite(params, p, x)))
}
