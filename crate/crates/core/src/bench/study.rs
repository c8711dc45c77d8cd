use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::domain::{MixedPoint, SearchSpace};
use crate::optimizer::{run_loop, CampaignConfig, Direction, RunError};

use super::functions::{mixed_wrap, FnKind, MixedObjective};
use super::metrics::{aggregate_csv, compute_metrics, Metrics};
use super::noise::{add_noise, NoiseSpec};
use super::record::{decision_path_csv, random_search_with, RunRecord};
use super::{BenchError, CATBOX, RANDOM_SEARCH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Catbox,
    RandomSearch,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Catbox => CATBOX,
            Method::RandomSearch => RANDOM_SEARCH,
        }
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::Catbox, Method::RandomSearch]
}

fn default_levels() -> usize {
    5
}

fn default_threshold() -> f64 {
    0.95
}

fn default_name() -> String {
    "study".into()
}

/// Study description, read from JSON by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub function: FnKind,
    pub n_cat: usize,
    #[serde(default = "default_levels")]
    pub levels: usize,
    pub n_con: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// Total evaluations per run, initial design included.
    pub budget: usize,
    #[serde(default)]
    pub noise: NoiseSpec,
    /// Engine settings; `iters` and `seed` are overridden per run.
    #[serde(default)]
    pub engine: CampaignConfig,
    #[serde(default = "default_threshold")]
    pub threshold_frac: f64,
    #[serde(default)]
    pub optimum: Option<f64>,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.seeds.is_empty() {
            return bad("need at least one seed");
        }
        if self.budget == 0 {
            return bad("budget must be at least 1");
        }
        if !self.methods.contains(&Method::RandomSearch) {
            return bad("methods must include random_search (the baseline)");
        }
        if self.methods.contains(&Method::Catbox) && self.budget < self.engine.suggest.n_init {
            return bad("budget is smaller than the engine's initial design");
        }
        if !(self.noise.sigma >= 0.0) {
            return bad("noise sigma must be non-negative");
        }
        if !(self.threshold_frac > 0.0 && self.threshold_frac <= 1.0) {
            return bad("threshold_frac must lie in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub space: SearchSpace,
    pub records: Vec<RunRecord>,
    pub metrics: Metrics,
}

/// Observation stream for one run: noise-free value plus the noisy value
/// reported to the optimizer, with one noise draw per evaluation.
struct Evaluator<'a> {
    objective: &'a MixedObjective,
    noise: NoiseSpec,
    draws: u64,
}

impl Evaluator<'_> {
    fn eval(&mut self, p: &MixedPoint) -> Result<(f64, f64), BenchError> {
        let raw = self.objective.value(p)?;
        let observed = add_noise(raw, &self.noise, self.draws);
        self.draws += 1;
        Ok((raw, observed))
    }
}

pub fn run_engine(
    objective: &MixedObjective,
    engine: &CampaignConfig,
    budget: usize,
    seed: u64,
    noise: &NoiseSpec,
) -> Result<RunRecord, BenchError> {
    let mut config = engine.clone();
    config.suggest.seed = seed;
    config.suggest.iters = budget.saturating_sub(config.suggest.n_init);
    config.direction = Direction::Maximize;
    let mut ev = Evaluator { objective, noise: noise.for_run(seed), draws: 0 };
    let mut evals = Vec::with_capacity(budget);
    let start = Instant::now();
    let result = run_loop(objective.space.clone(), config, |p| {
        let (raw, obs) = ev.eval(p)?;
        evals.push((p.clone(), raw, obs));
        Ok::<f64, BenchError>(obs)
    });
    match result {
        Ok(_) => {}
        Err(RunError::Objective { source, .. }) => return Err(source),
        Err(RunError::Engine { source, .. } | RunError::Setup(source)) => return Err(BenchError::Engine(source)),
    }
    evals.truncate(budget);
    Ok(RunRecord::from_evaluations(CATBOX, seed, evals, start.elapsed().as_secs_f64()))
}

/// Runs every (method, seed) pair and computes the metrics table.
pub fn run_study(config: &StudyConfig) -> Result<StudyResult, BenchError> {
    config.validate()?;
    let objective = mixed_wrap(config.function, config.n_cat, config.levels, config.n_con)?;
    let mut records = Vec::new();
    for &method in &config.methods {
        for &seed in &config.seeds {
            log::info!("{} seed {seed}", method.label());
            let rec = match method {
                Method::Catbox => run_engine(&objective, &config.engine, config.budget, seed, &config.noise)?,
                Method::RandomSearch => {
                    let mut ev = Evaluator { objective: &objective, noise: config.noise.for_run(seed), draws: 0 };
                    let mut fault = None;
                    let rec = random_search_with(
                        &objective.space,
                        |p| match ev.eval(p) {
                            Ok(v) => v,
                            Err(e) => {
                                fault.get_or_insert(e);
                                (f64::NAN, f64::NAN)
                            }
                        },
                        config.budget,
                        seed,
                    );
                    if let Some(e) = fault {
                        return Err(e);
                    }
                    rec
                }
            };
            records.push(rec);
        }
    }
    let metrics = compute_metrics(&records, config.optimum, config.threshold_frac)?;
    Ok(StudyResult { config: config.clone(), space: objective.space, records, metrics })
}

impl StudyResult {
    /// Writes run CSVs, decision paths, the aggregate CSV, `metrics.json`
    /// and `timings.json` (wall times live only there) into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: String, body: String| -> Result<(), BenchError> {
            let path = dir.join(name);
            fs::write(&path, body)?;
            written.push(path);
            Ok(())
        };
        for r in &self.records {
            let stem = format!("{}_seed{}", r.method, r.seed);
            put(format!("{stem}.csv"), r.to_csv())?;
            put(format!("{stem}_path.csv"), decision_path_csv(&self.space, &r.rows))?;
        }
        put("aggregate.csv".into(), aggregate_csv(&self.metrics))?;
        put("metrics.json".into(), serde_json::to_string_pretty(&self.metrics)? + "\n")?;
        let timings: Vec<serde_json::Value> = self
            .records
            .iter()
            .map(|r| serde_json::json!({"method": r.method, "seed": r.seed, "wall_time_s": r.wall_time_s}))
            .collect();
        put("timings.json".into(), serde_json::to_string_pretty(&timings)? + "\n")?;
        Ok(written)
    }
}
