//! The ask/tell loop: campaign state, trust-region bookkeeping and the
//! alternating continuous/categorical acquisition search.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{AcqConfig, AcqSpec};
use crate::domain::{MixedPoint, NormalizedPoint, SearchSpace, Violation};
use crate::gp::{self, GpError, GpModel, HyperBudget, TrainingSet};
use crate::kernels::KernelParams;

pub const SCHEMA_VERSION: u32 = 1;

/// Smallest continuous trust-region radius before a restart.
pub const R_MIN: f64 = 1.0 / 64.0;

const MIN_ROUND_GAIN: f64 = 1e-12;

// RNG stream purposes; each (history length, purpose) pair gets its own stream.
const STREAM_INIT: u64 = 0;
const STREAM_HYPER: u64 = 1;
const STREAM_SUGGEST: u64 = 2;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("no observations yet; tell at least one result before asking for a suggestion")]
    NoObservations,
    #[error("point rejected: {0}")]
    InvalidPoint(Violation),
    #[error("observation value must be finite, got {0}")]
    NonFiniteY(f64),
    #[error("iteration {given} already recorded (next is {next})")]
    DuplicateIteration { given: u64, next: u64 },
    #[error("iteration {given} skips ahead of the next index {next}")]
    IterationGap { given: u64, next: u64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unsupported campaign schema version {0}")]
    SchemaVersion(u32),
    #[error("surrogate fit failed: {0}")]
    Gp(#[from] GpError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Maximize,
    Minimize,
}

impl Direction {
    /// Sign that turns a raw value into an engine (maximized) value.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Direction::Maximize => 1.0,
            Direction::Minimize => -1.0,
        }
    }

    #[inline]
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Maximize => a > b,
            Direction::Minimize => a < b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuggestConfig {
    pub n_init: usize,
    pub iters: usize,
    pub alt_rounds: usize,
    pub cont_restarts: usize,
    pub cont_steps: usize,
    pub cat_neighbor_cap: usize,
    pub succ_tol: u32,
    pub fail_tol: u32,
    pub expand: f64,
    pub shrink: f64,
    /// Continuous radius at start and after every restart.
    pub r_init: f64,
    pub seed: u64,
}

impl Default for SuggestConfig {
    fn default() -> Self {
        Self {
            n_init: 20,
            iters: 80,
            alt_rounds: 3,
            cont_restarts: 5,
            cont_steps: 64,
            cat_neighbor_cap: 2000,
            succ_tol: 3,
            fail_tol: 3,
            expand: 2.0,
            shrink: 0.5,
            r_init: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    pub n_gsm: usize,
    pub n_csm: usize,
    pub hamming_unit_diagonal: bool,
    pub hyper: HyperBudget,
    /// Above this many observations, hyperparameters are only re-optimized
    /// every `refit_every` tells.
    pub refit_threshold: usize,
    pub refit_every: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            n_gsm: 2,
            n_csm: 2,
            hamming_unit_diagonal: false,
            hyper: HyperBudget::default(),
            refit_threshold: 200,
            refit_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct CampaignConfig {
    #[serde(flatten)]
    pub suggest: SuggestConfig,
    #[serde(flatten)]
    pub acq: AcqConfig,
    pub kernel: KernelConfig,
    pub direction: Direction,
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), CampaignError> {
        let s = &self.suggest;
        let bad = |m: &str| Err(CampaignError::Config(m.to_string()));
        if s.n_init < 1 {
            return bad("n_init must be at least 1");
        }
        if s.alt_rounds < 1 {
            return bad("alt_rounds must be at least 1");
        }
        if s.cont_restarts < 1 || s.cont_steps < 1 {
            return bad("cont_restarts and cont_steps must be at least 1");
        }
        if s.cat_neighbor_cap < 1 {
            return bad("cat_neighbor_cap must be at least 1");
        }
        if s.succ_tol < 1 || s.fail_tol < 1 {
            return bad("succ_tol and fail_tol must be at least 1");
        }
        if !(s.expand > 1.0 && s.shrink > 0.0 && s.shrink < 1.0) {
            return bad("need expand > 1 > shrink > 0");
        }
        if !(s.r_init >= R_MIN && s.r_init <= 1.0) {
            return bad("r_init must lie in [1/64, 1]");
        }
        if !(self.acq.xi >= 0.0) || !(self.acq.beta >= 0.0) {
            return bad("xi and beta must be non-negative");
        }
        if self.kernel.n_gsm < 1 || self.kernel.n_csm < 1 {
            return bad("need at least one gaussian and one cauchy component");
        }
        if self.kernel.hyper.restarts < 1 {
            return bad("hyperparameter restarts must be at least 1");
        }
        if self.kernel.refit_every < 1 {
            return bad("refit_every must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustRegionState {
    /// L∞ radius in normalized continuous units.
    pub r_cont: f64,
    /// Hamming radius.
    pub r_cat: usize,
    pub succ_count: u32,
    pub fail_count: u32,
    pub restarts: u32,
}

impl TrustRegionState {
    pub fn new(n_cat: usize, r_init: f64) -> Self {
        Self {
            r_cont: r_init,
            r_cat: n_cat.max(1),
            succ_count: 0,
            fail_count: 0,
            restarts: 0,
        }
    }

    /// Applies the outcome of one evaluation.
    pub fn update(&mut self, improved: bool, cfg: &SuggestConfig, n_cat: usize) {
        if improved {
            self.succ_count += 1;
            self.fail_count = 0;
        } else {
            self.fail_count += 1;
            self.succ_count = 0;
        }
        if self.succ_count >= cfg.succ_tol {
            self.r_cont = (cfg.expand * self.r_cont).min(1.0);
            self.succ_count = 0;
            self.fail_count = 0;
        } else if self.fail_count >= cfg.fail_tol {
            self.r_cont *= cfg.shrink;
            self.r_cat = self.r_cat.saturating_sub(1).max(1);
            self.succ_count = 0;
            self.fail_count = 0;
        }
        if self.r_cont < R_MIN {
            self.r_cont = cfg.r_init;
            self.r_cat = n_cat.max(1);
            self.restarts += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    /// Part of the random initial design.
    Init,
    /// Returned by `suggest` from the trust-region search.
    Suggested,
    /// Returned by `suggest` as a random fallback after every candidate
    /// duplicated an earlier observation.
    Exploration,
    /// Anything else the operator chose to run.
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub point: MixedPoint,
    pub y: f64,
    pub iteration: u64,
    pub tag: Tag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incumbent {
    pub point: MixedPoint,
    pub y: f64,
    pub iteration: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub point: MixedPoint,
    pub tag: Tag,
    /// Acquisition value at the point (standardized units).
    pub acquisition: f64,
    /// History length the suggestion was computed for.
    pub history_len: usize,
}

/// Persistent ask/tell state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub schema_version: u32,
    pub space: SearchSpace,
    pub config: CampaignConfig,
    pub initial_design: Vec<MixedPoint>,
    pub history: Vec<Observation>,
    pub incumbent: Option<Incumbent>,
    pub tr: TrustRegionState,
    pub seed: u64,
    /// Hyperparameters from the latest refit.
    #[serde(default)]
    pub kernel_params: Option<KernelParams>,
    /// History length at which `kernel_params` were optimized.
    #[serde(default)]
    pub fitted_at: Option<usize>,
    #[serde(default)]
    pub pending: Option<Suggestion>,
}

impl Campaign {
    pub fn new(space: SearchSpace, config: CampaignConfig) -> Result<Self, CampaignError> {
        config.validate()?;
        let seed = config.suggest.seed;
        let initial_design = initial_design(&space, config.suggest.n_init, seed);
        let tr = TrustRegionState::new(space.n_cat(), config.suggest.r_init);
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            space,
            config,
            initial_design,
            history: Vec::new(),
            incumbent: None,
            tr,
            seed,
            kernel_params: None,
            fitted_at: None,
            pending: None,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, CampaignError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .unwrap_or(0) as u32;
        if version != SCHEMA_VERSION {
            return Err(CampaignError::SchemaVersion(version));
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("campaign serializes")
    }

    pub fn direction(&self) -> Direction {
        self.config.direction
    }

    fn rng(&self, purpose: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((self.history.len() as u64) << 4) | purpose);
        rng
    }

    fn next_iteration(&self) -> u64 {
        self.history.last().map_or(0, |o| o.iteration + 1)
    }

    /// Initial-design points that have not been told yet, in design order.
    pub fn remaining_initial(&self) -> Vec<MixedPoint> {
        let mut told: Vec<&MixedPoint> = self
            .history
            .iter()
            .filter(|o| o.tag == Tag::Init)
            .map(|o| &o.point)
            .collect();
        let mut out = Vec::new();
        for p in &self.initial_design {
            if let Some(pos) = told.iter().position(|q| q.same_as(p)) {
                told.swap_remove(pos);
            } else {
                out.push(p.clone());
            }
        }
        out
    }

    pub fn tell(&mut self, point: MixedPoint, y: f64) -> Result<&Observation, CampaignError> {
        self.tell_at(point, y, None)
    }

    /// Records an observation. When `iteration` is given it must equal the
    /// next index, which lets retried submissions be rejected.
    pub fn tell_at(
        &mut self,
        point: MixedPoint,
        y: f64,
        iteration: Option<u64>,
    ) -> Result<&Observation, CampaignError> {
        self.space
            .validate_point(&point)
            .map_err(CampaignError::InvalidPoint)?;
        if !y.is_finite() {
            return Err(CampaignError::NonFiniteY(y));
        }
        let next = self.next_iteration();
        match iteration {
            Some(given) if given < next => return Err(CampaignError::DuplicateIteration { given, next }),
            Some(given) if given > next => return Err(CampaignError::IterationGap { given, next }),
            _ => {}
        }

        let tag = match &self.pending {
            Some(s) if s.point.same_as(&point) => s.tag,
            _ if self.remaining_initial().iter().any(|p| p.same_as(&point)) => Tag::Init,
            _ => Tag::Manual,
        };
        let dir = self.direction();
        let improved = self
            .incumbent
            .as_ref()
            .map_or(true, |inc| dir.better(y, inc.y));
        if tag != Tag::Init {
            self.tr
                .update(improved, &self.config.suggest, self.space.n_cat());
        }
        if improved {
            self.incumbent = Some(Incumbent {
                point: point.clone(),
                y,
                iteration: next,
            });
        }
        self.pending = None;
        self.history.push(Observation {
            point,
            y,
            iteration: next,
            tag,
        });
        Ok(self.history.last().expect("just pushed"))
    }

    fn training_set(&self) -> TrainingSet {
        let sign = self.direction().sign();
        let points = self
            .history
            .iter()
            .map(|o| self.space.normalize(&o.point))
            .collect();
        let ys: Vec<f64> = self.history.iter().map(|o| sign * o.y).collect();
        TrainingSet::from_normalized(points, &ys)
    }

    fn needs_refit(&self) -> bool {
        let n = self.history.len();
        match (&self.kernel_params, self.fitted_at) {
            (Some(_), Some(at)) if at == n => false,
            (Some(_), Some(at)) if n > self.config.kernel.refit_threshold => {
                n - at >= self.config.kernel.refit_every
            }
            _ => true,
        }
    }

    /// Re-optimizes the kernel hyperparameters on the current history.
    pub fn refit(&mut self) -> Result<(), CampaignError> {
        if self.history.is_empty() {
            return Err(CampaignError::NoObservations);
        }
        if !self.needs_refit() {
            return Ok(());
        }
        let train = self.training_set();
        let mut rng = self.rng(STREAM_HYPER);
        let kc = &self.config.kernel;
        let init = match &self.kernel_params {
            Some(p) => p.clone(),
            None => {
                let mut p = gp::spectral_init(
                    &train,
                    self.space.n_cat(),
                    self.space.n_con(),
                    kc.n_gsm,
                    kc.n_csm,
                    &mut rng,
                );
                p.hamming_unit_diagonal = kc.hamming_unit_diagonal;
                p
            }
        };
        let fit = gp::optimize_training(&train, &init, &kc.hyper, &mut rng);
        if fit.failed {
            log::warn!("hyperparameter refit failed; keeping previous parameters");
        }
        self.kernel_params = Some(fit.params);
        self.fitted_at = Some(self.history.len());
        Ok(())
    }

    /// Fits the surrogate on the current history with the latest
    /// hyperparameters (refitting them first if stale).
    pub fn model(&mut self) -> Result<GpModel, CampaignError> {
        self.refit()?;
        let params = self.kernel_params.clone().expect("refit sets params");
        Ok(GpModel::fit_training(self.training_set(), params)?)
    }

    /// Next point to evaluate. Repeated calls without an intervening tell
    /// return the same pending suggestion.
    pub fn suggest(&mut self) -> Result<Suggestion, CampaignError> {
        if self.history.is_empty() {
            return Err(CampaignError::NoObservations);
        }
        if let Some(p) = &self.pending {
            if p.history_len == self.history.len() {
                return Ok(p.clone());
            }
        }
        let model = self.model()?;
        let incumbent = self.incumbent.as_ref().expect("non-empty history has an incumbent");
        let center = self.space.normalize(&incumbent.point);
        let best = model.train.to_standardized(self.direction().sign() * incumbent.y);
        let acq = self.config.acq.with_best(best);
        let seen: Vec<NormalizedPoint> = self
            .history
            .iter()
            .map(|o| self.space.normalize(&o.point))
            .collect();
        let mut rng = self.rng(STREAM_SUGGEST);
        let proposal = propose(
            &self.space,
            &model,
            &acq,
            &self.tr,
            &center,
            &self.config.suggest,
            &seen,
            &mut rng,
        );
        let suggestion = Suggestion {
            point: self.space.denormalize(&proposal.point),
            tag: proposal.tag,
            acquisition: proposal.score,
            history_len: self.history.len(),
        };
        self.pending = Some(suggestion.clone());
        Ok(suggestion)
    }

    /// Raw-unit incumbent value after each observation.
    pub fn incumbent_trace(&self) -> Vec<f64> {
        let dir = self.direction();
        let mut best: Option<f64> = None;
        self.history
            .iter()
            .map(|o| {
                let b = match best {
                    Some(b) if !dir.better(o.y, b) => b,
                    _ => o.y,
                };
                best = Some(b);
                b
            })
            .collect()
    }

    /// History as CSV with columns
    /// `iteration,point_json,raw_y,observed_y,incumbent_y`.
    pub fn history_csv(&self) -> String {
        let rows: Vec<crate::bench::RunRow> = self
            .history
            .iter()
            .zip(self.incumbent_trace())
            .map(|(o, inc)| crate::bench::RunRow {
                iteration: o.iteration as usize,
                point: o.point.clone(),
                raw_y: o.y,
                observed_y: o.y,
                incumbent_y: inc,
            })
            .collect();
        crate::bench::run_csv(&rows)
    }
}

/// `n_init` uniform random points, deterministic in `seed`.
pub fn initial_design(space: &SearchSpace, n_init: usize, seed: u64) -> Vec<MixedPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_INIT);
    (0..n_init).map(|_| space.sample(&mut rng)).collect()
}

/// Outcome of one acquisition search.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub point: NormalizedPoint,
    pub score: f64,
    pub tag: Tag,
}

/// Every scored candidate in generation order; ties resolve to the earliest.
struct Candidates {
    items: Vec<(f64, NormalizedPoint)>,
}

impl Candidates {
    fn push(&mut self, score: f64, p: NormalizedPoint) {
        self.items.push((score, p));
    }

    fn best_where<F: Fn(&NormalizedPoint) -> bool>(&self, keep: F) -> Option<(f64, NormalizedPoint)> {
        let mut best: Option<&(f64, NormalizedPoint)> = None;
        for item in &self.items {
            if !keep(&item.1) {
                continue;
            }
            if best.map_or(true, |b| item.0 > b.0) {
                best = Some(item);
            }
        }
        best.cloned()
    }
}

/// Alternating trust-region maximization of the acquisition.
///
/// The region stays centered on `center` (the incumbent): the continuous
/// step searches the L∞ box of radius `tr.r_cont` with the categorical part
/// frozen, and the categorical step scans the Hamming ball of radius
/// `tr.r_cat` with the continuous part frozen. The current best point is
/// carried from one step to the next.
#[allow(clippy::too_many_arguments)]
pub fn propose<R: Rng + ?Sized>(
    space: &SearchSpace,
    model: &GpModel,
    acq: &AcqSpec,
    tr: &TrustRegionState,
    center: &NormalizedPoint,
    cfg: &SuggestConfig,
    seen: &[NormalizedPoint],
    rng: &mut R,
) -> Proposal {
    let eval = |p: &NormalizedPoint| acq.score(&model.predict_normalized(p));
    let mut cands = Candidates { items: Vec::new() };

    let mut current = center.clone();
    let mut current_score = eval(&current);
    cands.push(current_score, current.clone());

    let d = space.n_con();
    let u = space.n_cat();
    let (lo, hi): (Vec<f64>, Vec<f64>) = center
        .con01
        .iter()
        .map(|c| ((c - tr.r_cont).max(0.0), (c + tr.r_cont).min(1.0)))
        .unzip();
    let levels = space.level_counts();

    for _ in 0..cfg.alt_rounds {
        let before = current_score;
        if d > 0 {
            let (p, s) = continuous_step(&current, current_score, &lo, &hi, tr.r_cont, cfg, &eval, &mut cands, rng);
            if s > current_score {
                current = p;
                current_score = s;
            }
        }
        if u > 0 {
            let configs = cat_neighborhood(&center.cat, tr.r_cat, &levels, cfg.cat_neighbor_cap, rng);
            for cat in configs {
                let p = NormalizedPoint::new(cat, current.con01.clone());
                let s = eval(&p);
                cands.push(s, p.clone());
                if s > current_score {
                    current = p;
                    current_score = s;
                }
            }
        }
        if current_score - before < MIN_ROUND_GAIN {
            break;
        }
    }

    let is_seen = |p: &NormalizedPoint| seen.iter().any(|q| q.same_as(p));
    if !is_seen(&current) {
        return Proposal {
            point: current,
            score: current_score,
            tag: Tag::Suggested,
        };
    }
    if let Some((score, point)) = cands.best_where(|p| !is_seen(p)) {
        return Proposal {
            point,
            score,
            tag: Tag::Suggested,
        };
    }
    let point = space.sample_normalized(rng);
    let score = eval(&point);
    Proposal {
        point,
        score,
        tag: Tag::Exploration,
    }
}

/// Multi-start coordinate pattern search inside `[lo, hi]`. The first start
/// is `start`; the others are uniform in the box. Each start tries ± steps
/// along every axis, moves on the first improvement and halves the step when
/// no axis improves, for at most `cfg.cont_steps` evaluations.
#[allow(clippy::too_many_arguments)]
fn continuous_step<R: Rng + ?Sized, F: Fn(&NormalizedPoint) -> f64>(
    start: &NormalizedPoint,
    start_score: f64,
    lo: &[f64],
    hi: &[f64],
    radius: f64,
    cfg: &SuggestConfig,
    eval: &F,
    cands: &mut Candidates,
    rng: &mut R,
) -> (NormalizedPoint, f64) {
    let d = lo.len();
    let starts: Vec<Vec<f64>> = (0..cfg.cont_restarts)
        .map(|s| {
            if s == 0 {
                start.con01.iter().zip(lo.iter().zip(hi)).map(|(x, (l, h))| x.clamp(*l, *h)).collect()
            } else {
                lo.iter()
                    .zip(hi)
                    .map(|(l, h)| if h > l { rng.gen_range(*l..=*h) } else { *l })
                    .collect()
            }
        })
        .collect();

    let mut best = (start.clone(), start_score);
    for (s, x0) in starts.into_iter().enumerate() {
        let mut x = NormalizedPoint::new(start.cat.clone(), x0);
        let mut fx = if s == 0 && x.same_as(start) {
            start_score
        } else {
            let v = eval(&x);
            cands.push(v, x.clone());
            v
        };
        let mut step = 0.5 * radius;
        let mut evals = 0;
        'search: while evals < cfg.cont_steps && step > 1e-9 {
            let mut moved = false;
            for j in 0..d {
                for sign in [1.0, -1.0] {
                    let v = (x.con01[j] + sign * step).clamp(lo[j], hi[j]);
                    if v == x.con01[j] {
                        continue;
                    }
                    let mut y = x.clone();
                    y.con01[j] = v;
                    let fy = eval(&y);
                    evals += 1;
                    cands.push(fy, y.clone());
                    if fy > fx {
                        x = y;
                        fx = fy;
                        moved = true;
                        break;
                    }
                    if evals >= cfg.cont_steps {
                        break 'search;
                    }
                }
                if moved {
                    break;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Number of configurations within Hamming distance `radius` of any center,
/// given the level count of each variable.
pub fn hamming_ball_size(levels: &[usize], radius: usize) -> u128 {
    // Coefficients of Π_i (1 + (L_i - 1) t), truncated at degree `radius`.
    let mut coef = vec![0u128; radius + 1];
    coef[0] = 1;
    for &l in levels {
        let m = (l.saturating_sub(1)) as u128;
        for k in (1..=radius).rev() {
            coef[k] = coef[k].saturating_add(coef[k - 1].saturating_mul(m));
        }
    }
    coef.iter().fold(0u128, |a, c| a.saturating_add(*c))
}

/// All configurations within Hamming distance `radius` of `center`, in a
/// fixed lexicographic order (the center itself first).
pub fn hamming_ball(center: &[usize], radius: usize, levels: &[usize]) -> Vec<Vec<usize>> {
    fn rec(
        i: usize,
        budget: usize,
        center: &[usize],
        levels: &[usize],
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if i == center.len() {
            out.push(cur.clone());
            return;
        }
        cur.push(center[i]);
        rec(i + 1, budget, center, levels, cur, out);
        cur.pop();
        if budget > 0 {
            for level in 0..levels[i] {
                if level != center[i] {
                    cur.push(level);
                    rec(i + 1, budget - 1, center, levels, cur, out);
                    cur.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    rec(0, radius, center, levels, &mut Vec::with_capacity(center.len()), &mut out);
    out
}

/// Draws one configuration uniformly from the Hamming ball.
fn sample_ball<R: Rng + ?Sized>(center: &[usize], radius: usize, levels: &[usize], rng: &mut R) -> Vec<usize> {
    let u = center.len();
    // counts[i][b]: completions of positions i.. with at most b changes.
    let mut counts = vec![vec![1.0f64; radius + 1]; u + 1];
    for i in (0..u).rev() {
        for b in 0..=radius {
            let keep = counts[i + 1][b];
            let change = if b > 0 { (levels[i] - 1) as f64 * counts[i + 1][b - 1] } else { 0.0 };
            counts[i][b] = keep + change;
        }
    }
    let mut out = Vec::with_capacity(u);
    let mut b = radius;
    for i in 0..u {
        let keep = counts[i + 1][b];
        let total = counts[i][b];
        if b == 0 || rng.gen::<f64>() * total < keep {
            out.push(center[i]);
        } else {
            let mut level = rng.gen_range(0..levels[i] - 1);
            if level >= center[i] {
                level += 1;
            }
            out.push(level);
            b -= 1;
        }
    }
    out
}

/// The Hamming ball if it has at most `cap` members, otherwise `cap`
/// distinct members drawn uniformly (the center always included).
pub fn cat_neighborhood<R: Rng + ?Sized>(
    center: &[usize],
    radius: usize,
    levels: &[usize],
    cap: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    if hamming_ball_size(levels, radius) <= cap as u128 {
        return hamming_ball(center, radius, levels);
    }
    let mut seen: HashSet<Vec<usize>> = HashSet::with_capacity(cap);
    let mut out = Vec::with_capacity(cap);
    seen.insert(center.to_vec());
    out.push(center.to_vec());
    while out.len() < cap {
        let c = sample_ball(center, radius, levels, rng);
        if seen.insert(c.clone()) {
            out.push(c);
        }
    }
    out
}

/// Failure inside [`run_loop`]; the campaign up to the failure is kept.
#[derive(Debug, Error)]
pub enum RunError<E: std::error::Error + 'static> {
    /// The configuration was rejected before any evaluation.
    #[error("invalid setup: {0}")]
    Setup(CampaignError),
    #[error("objective failed: {source}")]
    Objective {
        campaign: Box<Campaign>,
        #[source]
        source: E,
    },
    #[error("engine failed: {source}")]
    Engine {
        campaign: Box<Campaign>,
        #[source]
        source: CampaignError,
    },
}

impl<E: std::error::Error + 'static> RunError<E> {
    pub fn campaign(&self) -> Option<&Campaign> {
        match self {
            RunError::Setup(_) => None,
            RunError::Objective { campaign, .. } | RunError::Engine { campaign, .. } => Some(campaign),
        }
    }
}

/// Evaluates the initial design, then runs `config.suggest.iters`
/// suggest → evaluate → tell rounds.
pub fn run_loop<F, E>(space: SearchSpace, config: CampaignConfig, mut objective: F) -> Result<Campaign, RunError<E>>
where
    F: FnMut(&MixedPoint) -> Result<f64, E>,
    E: std::error::Error + 'static,
{
    let mut campaign = Campaign::new(space, config).map_err(RunError::Setup)?;
    for p in campaign.initial_design.clone() {
        match objective(&p) {
            Ok(y) => {
                if let Err(source) = campaign.tell(p, y) {
                    return Err(RunError::Engine { campaign: Box::new(campaign), source });
                }
            }
            Err(source) => return Err(RunError::Objective { campaign: Box::new(campaign), source }),
        }
    }
    for _ in 0..campaign.config.suggest.iters {
        let s = match campaign.suggest() {
            Ok(s) => s,
            Err(source) => return Err(RunError::Engine { campaign: Box::new(campaign), source }),
        };
        match objective(&s.point) {
            Ok(y) => {
                if let Err(source) = campaign.tell(s.point, y) {
                    return Err(RunError::Engine { campaign: Box::new(campaign), source });
                }
            }
            Err(source) => return Err(RunError::Objective { campaign: Box::new(campaign), source }),
        }
    }
    Ok(campaign)
}
