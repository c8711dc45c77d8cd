use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::domain::{encode_categorical_for_benchmark, CategoricalVar, ContinuousVar, MixedPoint, SearchSpace};

use super::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FnKind {
    Ackley,
    Griewank,
    Rosenbrock,
    Schwefel,
}

impl FnKind {
    /// Per-coordinate box of the function's standard domain.
    pub fn domain(self) -> (f64, f64) {
        match self {
            FnKind::Ackley => (-32.768, 32.768),
            FnKind::Griewank => (-600.0, 600.0),
            FnKind::Rosenbrock => (-5.0, 10.0),
            FnKind::Schwefel => (-500.0, 500.0),
        }
    }

    /// Coordinate value of the global minimizer (the same on every axis).
    pub fn minimizer(self) -> f64 {
        match self {
            FnKind::Ackley | FnKind::Griewank => 0.0,
            FnKind::Rosenbrock => 1.0,
            FnKind::Schwefel => 420.968_746,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AckleyParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for AckleyParams {
    fn default() -> Self {
        Self { a: 20.0, b: 0.2, c: 2.0 * PI }
    }
}

/// A minimization benchmark on `R^dim`. The global minimum value is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFn {
    pub kind: FnKind,
    pub dim: usize,
    #[serde(default)]
    pub ackley: AckleyParams,
}

impl SyntheticFn {
    pub fn new(kind: FnKind, dim: usize) -> Self {
        Self { kind, dim, ackley: AckleyParams::default() }
    }

    pub fn domain(&self) -> (f64, f64) {
        self.kind.domain()
    }

    /// Function value at `z`; inputs outside the domain are rejected.
    pub fn eval(&self, z: &[f64]) -> Result<f64, BenchError> {
        if z.len() != self.dim {
            return Err(BenchError::Dimension { expected: self.dim, got: z.len() });
        }
        let (lo, hi) = self.domain();
        for (index, &value) in z.iter().enumerate() {
            if !(value >= lo && value <= hi) {
                return Err(BenchError::OutOfDomain { index, value });
            }
        }
        Ok(self.eval_unchecked(z))
    }

    pub fn eval_unchecked(&self, z: &[f64]) -> f64 {
        let n = z.len() as f64;
        match self.kind {
            FnKind::Ackley => {
                let AckleyParams { a, b, c } = self.ackley;
                let sq = z.iter().map(|v| v * v).sum::<f64>() / n;
                let cs = z.iter().map(|v| (c * v).cos()).sum::<f64>() / n;
                -a * (-b * sq.sqrt()).exp() - cs.exp() + a + E
            }
            FnKind::Griewank => {
                let s = z.iter().map(|v| v * v).sum::<f64>() / 4000.0;
                let p: f64 = z
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
                    .product();
                s - p + 1.0
            }
            FnKind::Rosenbrock => z
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum(),
            FnKind::Schwefel => {
                418.982_887_272_433_9 * n - z.iter().map(|v| v * v.abs().sqrt().sin()).sum::<f64>()
            }
        }
    }
}

/// A synthetic function exposed over a mixed space: the first `n_cat`
/// coordinates come from evenly spaced categorical levels spanning the
/// function's box, the rest are continuous variables on that box. The
/// objective is negated so the engine maximizes it.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedObjective {
    pub func: SyntheticFn,
    pub space: SearchSpace,
}

pub fn mixed_wrap(
    kind: FnKind,
    n_cat: usize,
    levels_per_cat: usize,
    n_con: usize,
) -> Result<MixedObjective, BenchError> {
    if n_cat + n_con == 0 {
        return Err(BenchError::Config("need at least one variable".into()));
    }
    if n_cat > 0 && levels_per_cat < 2 {
        return Err(BenchError::Config("levels_per_cat must be at least 2".into()));
    }
    let func = SyntheticFn::new(kind, n_cat + n_con);
    let (lo, hi) = func.domain();
    let cats = (0..n_cat)
        .map(|i| CategoricalVar::indexed(format!("c{i}"), levels_per_cat))
        .collect();
    let cons = (0..n_con)
        .map(|j| ContinuousVar::new(format!("x{j}"), lo, hi))
        .collect();
    let space = SearchSpace::new(cats, cons).map_err(|e| BenchError::Config(e.to_string()))?;
    Ok(MixedObjective { func, space })
}

impl MixedObjective {
    /// Concatenated real vector `[encoded categorical, continuous]`.
    pub fn encode(&self, p: &MixedPoint) -> Vec<f64> {
        let mut z = encode_categorical_for_benchmark(&self.space, p, self.func.domain());
        z.extend_from_slice(&p.con);
        z
    }

    /// Minimization value of the underlying function.
    pub fn raw(&self, p: &MixedPoint) -> Result<f64, BenchError> {
        self.space
            .validate_point(p)
            .map_err(|v| BenchError::Config(v.to_string()))?;
        self.func.eval(&self.encode(p))
    }

    /// Engine-side value (negated, to be maximized).
    pub fn value(&self, p: &MixedPoint) -> Result<f64, BenchError> {
        self.raw(p).map(|v| -v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optima() {
        for kind in [FnKind::Ackley, FnKind::Griewank, FnKind::Rosenbrock, FnKind::Schwefel] {
            for dim in [1, 2, 4, 7] {
                let f = SyntheticFn::new(kind, dim);
                let v = f.eval(&vec![kind.minimizer(); dim]).unwrap();
                let tol = if kind == FnKind::Schwefel { 1e-3 } else { 1e-6 };
                assert!(v.abs() < tol, "{kind:?} dim {dim}: {v}");
            }
        }
    }

    #[test]
    fn out_of_domain() {
        let f = SyntheticFn::new(FnKind::Ackley, 2);
        assert!(matches!(f.eval(&[0.0, 40.0]), Err(BenchError::OutOfDomain { index: 1, .. })));
        assert!(f.eval(&[f64::NAN, 0.0]).is_err());
        assert!(f.eval(&[0.0]).is_err());
    }

    #[test]
    fn ackley_one_one() {
        // Same formula with the constants spelled out as decimal literals.
        let v = -20.0 * (-0.2f64).exp() - (2.0 * PI).cos().exp() + 20.0 + 2.718_281_828_459_045;
        let f = SyntheticFn::new(FnKind::Ackley, 2);
        assert!((f.eval(&[1.0, 1.0]).unwrap() - v).abs() < 1e-12);
        assert!((v - 3.625_384_938_440_363).abs() < 1e-12);
    }

    #[test]
    fn wrap_middle_levels() {
        let obj = mixed_wrap(FnKind::Ackley, 2, 3, 2).unwrap();
        assert_eq!(obj.space.n_cat(), 2);
        assert_eq!(obj.space.n_con(), 2);
        let p = MixedPoint::new(vec![1, 1], vec![0.0, 0.0]);
        assert!(obj.value(&p).unwrap().abs() < 1e-12);
        assert_eq!(obj.encode(&MixedPoint::new(vec![0, 2], vec![1.0, 2.0])), vec![-32.768, 32.768, 1.0, 2.0]);
    }

    #[test]
    fn wrap_pure_continuous() {
        let obj = mixed_wrap(FnKind::Rosenbrock, 0, 5, 3).unwrap();
        let p = MixedPoint::new(vec![], vec![0.5, -1.0, 2.0]);
        let direct = SyntheticFn::new(FnKind::Rosenbrock, 3).eval(&p.con).unwrap();
        assert_eq!(obj.raw(&p).unwrap(), direct);
        assert_eq!(obj.value(&p).unwrap(), -direct);
    }

    #[test]
    fn wrap_grid_matches_enumeration() {
        let obj = mixed_wrap(FnKind::Griewank, 2, 3, 1).unwrap();
        let f = SyntheticFn::new(FnKind::Griewank, 3);
        let levels = [-600.0, 0.0, 600.0];
        let mut best = (f64::INFINITY, (9, 9));
        for i in 0..3 {
            for j in 0..3 {
                let v = f.eval(&[levels[i], levels[j], 0.0]).unwrap();
                if v < best.0 {
                    best = (v, (i, j));
                }
                let w = obj.raw(&MixedPoint::new(vec![i, j], vec![0.0])).unwrap();
                assert_eq!(v, w);
            }
        }
        assert_eq!(best.1, (1, 1));
    }
}
