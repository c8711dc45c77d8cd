use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BenchError, RunRecord, RANDOM_SEARCH};

pub const METRICS_DEFINITION: &str = "nonstandard — local definition";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsMetadata {
    pub definition: String,
    pub baseline: String,
    pub threshold_frac: f64,
    /// Best incumbent over all runs, or the supplied optimum.
    pub best: f64,
    /// `best - (1 - threshold_frac) * |best|`.
    pub threshold: f64,
    pub budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub runs: usize,
    pub mean_curve: Vec<f64>,
    /// Sample standard deviation (n − 1); zero for a single run.
    pub std_curve: Vec<f64>,
    pub final_mean: f64,
    pub final_std: f64,
    /// Mean final value of the running maximum of the noise-free column.
    pub final_true_mean: f64,
    /// Mean number of evaluations to first reach the threshold
    /// (`budget + 1` for runs that never do).
    pub mean_time_to_threshold: f64,
    /// Enhancement factor; `None` when the baseline's final mean is zero.
    pub ef: Option<f64>,
    /// Acceleration factor.
    pub af: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub metadata: MetricsMetadata,
    pub methods: BTreeMap<String, MethodMetrics>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Evaluations needed to first reach `threshold` (1-based).
fn time_to(curve: &[f64], threshold: f64) -> usize {
    curve
        .iter()
        .position(|&v| v >= threshold)
        .map_or(curve.len() + 1, |i| i + 1)
}

/// Mean/std incumbent curves plus enhancement and acceleration factors
/// against the random-search baseline.
///
/// * `EF(m) = (ȳ_m − ȳ_rs) / |ȳ_rs|` on mean final incumbents.
/// * `AF(m) = T_rs / T_m` with `T` the mean evaluations to first reach
///   the threshold `best − (1 − threshold_frac)·|best|`, which equals
///   `threshold_frac · best` for a non-negative `best` and stays below
///   `best` when it is negative.
///
/// Records are grouped by method and sorted by seed, so the result does
/// not depend on the order they are supplied in.
pub fn compute_metrics(
    records: &[RunRecord],
    optimum: Option<f64>,
    threshold_frac: f64,
) -> Result<Metrics, BenchError> {
    let mut groups: BTreeMap<String, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.method.clone()).or_default().push(r);
    }
    if !groups.contains_key(RANDOM_SEARCH) {
        return Err(BenchError::MissingBaseline);
    }
    let budget = records[0].rows.len();
    if budget == 0 || records.iter().any(|r| r.rows.len() != budget) {
        return Err(BenchError::Config("all runs need the same, non-zero length".into()));
    }
    for g in groups.values_mut() {
        g.sort_by_key(|r| r.seed);
    }

    let curves: BTreeMap<&str, Vec<Vec<f64>>> = groups
        .iter()
        .map(|(m, rs)| (m.as_str(), rs.iter().map(|r| r.incumbent_curve()).collect()))
        .collect();
    let best = optimum.unwrap_or_else(|| {
        curves
            .values()
            .flatten()
            .map(|c| c[budget - 1])
            .fold(f64::NEG_INFINITY, f64::max)
    });
    let threshold = best - (1.0 - threshold_frac) * best.abs();

    let times: BTreeMap<&str, f64> = curves
        .iter()
        .map(|(m, cs)| {
            let t: Vec<f64> = cs.iter().map(|c| time_to(c, threshold) as f64).collect();
            (*m, mean_std(&t).0)
        })
        .collect();
    let finals: BTreeMap<&str, f64> = curves
        .iter()
        .map(|(m, cs)| (*m, mean_std(&cs.iter().map(|c| c[budget - 1]).collect::<Vec<_>>()).0))
        .collect();
    let rs_final = finals[RANDOM_SEARCH];
    let rs_time = times[RANDOM_SEARCH];

    let mut methods = BTreeMap::new();
    for (m, cs) in &curves {
        let (mean_curve, std_curve): (Vec<f64>, Vec<f64>) = (0..budget)
            .map(|i| mean_std(&cs.iter().map(|c| c[i]).collect::<Vec<_>>()))
            .unzip();
        let trues: Vec<f64> = groups[*m]
            .iter()
            .map(|r| *r.true_incumbent_curve().last().expect("non-empty"))
            .collect();
        let ef = if rs_final == 0.0 {
            None
        } else {
            Some((finals[m] - rs_final) / rs_final.abs())
        };
        methods.insert(
            m.to_string(),
            MethodMetrics {
                runs: cs.len(),
                final_mean: mean_curve[budget - 1],
                final_std: std_curve[budget - 1],
                mean_curve,
                std_curve,
                final_true_mean: mean_std(&trues).0,
                mean_time_to_threshold: times[m],
                ef,
                af: rs_time / times[m],
            },
        );
    }
    Ok(Metrics {
        metadata: MetricsMetadata {
            definition: METRICS_DEFINITION.into(),
            baseline: RANDOM_SEARCH.into(),
            threshold_frac,
            best,
            threshold,
            budget,
        },
        methods,
    })
}

/// Aggregate CSV: `iteration,<method>_mean,<method>_std,...` with methods in
/// sorted order.
pub fn aggregate_csv(metrics: &Metrics) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["iteration".to_string()];
    for m in metrics.methods.keys() {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    w.write_record(&header).expect("in-memory write");
    for i in 0..metrics.metadata.budget {
        let mut rec = vec![i.to_string()];
        for mm in metrics.methods.values() {
            rec.push(mm.mean_curve[i].to_string());
            rec.push(mm.std_curve[i].to_string());
        }
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}
