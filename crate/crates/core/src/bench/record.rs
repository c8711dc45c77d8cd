use serde::{Deserialize, Serialize};

use crate::domain::{MixedPoint, SearchSpace};
use crate::optimizer::initial_design;

/// One evaluation of a benchmark run. Values are engine-oriented
/// (maximized).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub iteration: usize,
    pub point: MixedPoint,
    /// Noise-free objective value.
    pub raw_y: f64,
    /// Value reported to the optimizer.
    pub observed_y: f64,
    /// Best `observed_y` so far.
    pub incumbent_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub seed: u64,
    pub rows: Vec<RunRow>,
    pub wall_time_s: f64,
}

impl RunRecord {
    /// Builds rows from `(point, raw, observed)` triples, tracking the
    /// incumbent on the observed column.
    pub fn from_evaluations(
        method: impl Into<String>,
        seed: u64,
        evals: Vec<(MixedPoint, f64, f64)>,
        wall_time_s: f64,
    ) -> Self {
        let mut best = f64::NEG_INFINITY;
        let rows = evals
            .into_iter()
            .enumerate()
            .map(|(iteration, (point, raw_y, observed_y))| {
                best = best.max(observed_y);
                RunRow { iteration, point, raw_y, observed_y, incumbent_y: best }
            })
            .collect();
        Self { method: method.into(), seed, rows, wall_time_s }
    }

    pub fn incumbent_curve(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.incumbent_y).collect()
    }

    /// Running maximum of the noise-free column.
    pub fn true_incumbent_curve(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.rows
            .iter()
            .map(|r| {
                best = best.max(r.raw_y);
                best
            })
            .collect()
    }

    pub fn final_incumbent(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.incumbent_y)
    }

    pub fn to_csv(&self) -> String {
        run_csv(&self.rows)
    }
}

/// Run-file CSV: `iteration,point_json,raw_y,observed_y,incumbent_y`.
pub fn run_csv(rows: &[RunRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "point_json", "raw_y", "observed_y", "incumbent_y"])
        .expect("in-memory write");
    for r in rows {
        let point = serde_json::to_string(&r.point).expect("point serializes");
        w.write_record([
            r.iteration.to_string(),
            point,
            r.raw_y.to_string(),
            r.observed_y.to_string(),
            r.incumbent_y.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Decision-path CSV: `iteration,<catvar...>,incumbent_y`, levels by label.
pub fn decision_path_csv(space: &SearchSpace, rows: &[RunRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["iteration".to_string()];
    header.extend(space.categoricals().iter().map(|v| v.name.clone()));
    header.push("incumbent_y".into());
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        let mut rec = vec![r.iteration.to_string()];
        rec.extend(space.labels(&r.point).into_iter().map(str::to_string));
        rec.push(r.incumbent_y.to_string());
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Uniform random search. Points are the first `budget` draws of the same
/// stream that produces the engine's initial design for `seed`, so a
/// seed-paired engine run and random search share their opening points.
pub fn random_search<F: FnMut(&MixedPoint) -> f64>(
    space: &SearchSpace,
    mut objective: F,
    budget: usize,
    seed: u64,
) -> RunRecord {
    random_search_with(space, |p| {
        let y = objective(p);
        (y, y)
    }, budget, seed)
}

/// Random search with an evaluator returning `(raw, observed)`.
pub fn random_search_with<F: FnMut(&MixedPoint) -> (f64, f64)>(
    space: &SearchSpace,
    mut eval: F,
    budget: usize,
    seed: u64,
) -> RunRecord {
    let start = std::time::Instant::now();
    let evals = initial_design(space, budget, seed)
        .into_iter()
        .map(|p| {
            let (raw, obs) = eval(&p);
            (p, raw, obs)
        })
        .collect();
    RunRecord::from_evaluations(super::RANDOM_SEARCH, seed, evals, start.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CategoricalVar, ContinuousVar};

    fn space() -> SearchSpace {
        SearchSpace::new(
            vec![CategoricalVar::new("solvent", ["water", "ethanol"])],
            vec![ContinuousVar::new("x", -1.0, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn budget_one() {
        let r = random_search(&space(), |p| p.con[0], 1, 3);
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.final_incumbent(), r.rows[0].raw_y);
    }

    #[test]
    fn same_seed_same_record() {
        let a = random_search(&space(), |p| -p.con[0].abs(), 30, 5);
        let b = random_search(&space(), |p| -p.con[0].abs(), 30, 5);
        assert_eq!(a.rows, b.rows);
        assert!(a.incumbent_curve().windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn csv_layouts() {
        let r = RunRecord::from_evaluations(
            "m",
            0,
            vec![
                (MixedPoint::new(vec![1], vec![0.5]), 1.0, 1.25),
                (MixedPoint::new(vec![0], vec![-0.5]), 2.0, 0.75),
            ],
            0.0,
        );
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "iteration,point_json,raw_y,observed_y,incumbent_y");
        assert_eq!(lines[1], r#"0,"{""cat"":[1],""con"":[0.5]}",1,1.25,1.25"#);
        assert_eq!(lines[2], r#"1,"{""cat"":[0],""con"":[-0.5]}",2,0.75,1.25"#);
        assert_eq!(r.true_incumbent_curve(), vec![1.0, 2.0]);

        let path = decision_path_csv(&space(), &r.rows);
        assert_eq!(path, "iteration,solvent,incumbent_y\n0,ethanol,1.25\n1,water,1.25\n");
    }
}
