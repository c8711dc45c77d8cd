//! Mixed search spaces: categorical variables with finite level sets and
//! box-bounded continuous variables.
//!
//! Categorical values are carried as level indices everywhere inside the
//! engine; labels only matter at the serialization boundary. Continuous
//! coordinates are mapped to the unit cube before they reach a kernel.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("search space has no variables")]
    Empty,
    #[error("continuous variable `{name}`: lower bound {lower} must be strictly below upper bound {upper}")]
    DegenerateBounds { name: String, lower: f64, upper: f64 },
    #[error("continuous variable `{name}`: bounds must be finite")]
    NonFiniteBounds { name: String },
    #[error("categorical variable `{name}` needs at least 2 levels, got {count}")]
    TooFewLevels { name: String, count: usize },
    #[error("categorical variable `{name}` repeats level `{level}`")]
    DuplicateLevel { name: String, level: String },
    #[error("variable name `{0}` is used more than once")]
    DuplicateName(String),
    #[error("variable name must not be empty")]
    EmptyName,
}

impl SpaceError {
    /// Name of the offending variable, when there is one.
    pub fn field(&self) -> Option<&str> {
        match self {
            SpaceError::DegenerateBounds { name, .. }
            | SpaceError::NonFiniteBounds { name }
            | SpaceError::TooFewLevels { name, .. }
            | SpaceError::DuplicateLevel { name, .. }
            | SpaceError::DuplicateName(name) => Some(name),
            SpaceError::Empty | SpaceError::EmptyName => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousVar {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

impl ContinuousVar {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
        }
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalVar {
    pub name: String,
    pub levels: Vec<String>,
}

impl CategoricalVar {
    pub fn new<S: Into<String>>(name: impl Into<String>, levels: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            levels: levels.into_iter().map(Into::into).collect(),
        }
    }

    /// A variable whose levels are labelled `"0"`, `"1"`, ...
    pub fn indexed(name: impl Into<String>, count: usize) -> Self {
        Self::new(name, (0..count).map(|i| i.to_string()))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level_index(&self, label: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == label)
    }
}

/// Unvalidated search-space description, as it appears in JSON.
#[derive(Debug, Clone, Deserialize)]
pub struct SpaceSpec {
    #[serde(default)]
    pub categoricals: Vec<CategoricalVar>,
    #[serde(default)]
    pub continuous: Vec<ContinuousVar>,
}

impl TryFrom<SpaceSpec> for SearchSpace {
    type Error = SpaceError;

    fn try_from(raw: SpaceSpec) -> Result<Self, Self::Error> {
        SearchSpace::new(raw.categoricals, raw.continuous)
    }
}

/// The product of `U` categorical domains and a `d`-dimensional box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceSpec")]
pub struct SearchSpace {
    categoricals: Vec<CategoricalVar>,
    continuous: Vec<ContinuousVar>,
}

impl SearchSpace {
    pub fn new(
        categoricals: Vec<CategoricalVar>,
        continuous: Vec<ContinuousVar>,
    ) -> Result<Self, SpaceError> {
        if categoricals.is_empty() && continuous.is_empty() {
            return Err(SpaceError::Empty);
        }
        let mut names = HashSet::new();
        for var in &categoricals {
            if var.name.is_empty() {
                return Err(SpaceError::EmptyName);
            }
            if !names.insert(var.name.as_str()) {
                return Err(SpaceError::DuplicateName(var.name.clone()));
            }
            if var.levels.len() < 2 {
                return Err(SpaceError::TooFewLevels {
                    name: var.name.clone(),
                    count: var.levels.len(),
                });
            }
            let mut seen = HashSet::new();
            for level in &var.levels {
                if !seen.insert(level.as_str()) {
                    return Err(SpaceError::DuplicateLevel {
                        name: var.name.clone(),
                        level: level.clone(),
                    });
                }
            }
        }
        for var in &continuous {
            if var.name.is_empty() {
                return Err(SpaceError::EmptyName);
            }
            if !names.insert(var.name.as_str()) {
                return Err(SpaceError::DuplicateName(var.name.clone()));
            }
            if !var.lower.is_finite() || !var.upper.is_finite() {
                return Err(SpaceError::NonFiniteBounds {
                    name: var.name.clone(),
                });
            }
            if var.lower >= var.upper {
                return Err(SpaceError::DegenerateBounds {
                    name: var.name.clone(),
                    lower: var.lower,
                    upper: var.upper,
                });
            }
        }
        Ok(Self {
            categoricals,
            continuous,
        })
    }

    pub fn categoricals(&self) -> &[CategoricalVar] {
        &self.categoricals
    }

    pub fn continuous(&self) -> &[ContinuousVar] {
        &self.continuous
    }

    /// Number of categorical variables (`U`).
    #[inline]
    pub fn n_cat(&self) -> usize {
        self.categoricals.len()
    }

    /// Number of continuous variables (`d`).
    #[inline]
    pub fn n_con(&self) -> usize {
        self.continuous.len()
    }

    pub fn level_counts(&self) -> Vec<usize> {
        self.categoricals.iter().map(CategoricalVar::len).collect()
    }

    /// Total number of categorical configurations, saturating at `usize::MAX`.
    pub fn n_cat_configs(&self) -> usize {
        self.categoricals
            .iter()
            .fold(1usize, |acc, v| acc.saturating_mul(v.len()))
    }

    pub fn validate_point(&self, p: &MixedPoint) -> Result<(), Violation> {
        if p.cat.len() != self.n_cat() {
            return Err(Violation::new(format!(
                "cat has length {}, expected {}",
                p.cat.len(),
                self.n_cat()
            )));
        }
        if p.con.len() != self.n_con() {
            return Err(Violation::new(format!(
                "con has length {}, expected {}",
                p.con.len(),
                self.n_con()
            )));
        }
        for (i, (&idx, var)) in p.cat.iter().zip(&self.categoricals).enumerate() {
            if idx >= var.len() {
                return Err(Violation::new(format!("cat[{i}] out of range")));
            }
        }
        for (j, (&x, var)) in p.con.iter().zip(&self.continuous).enumerate() {
            if !x.is_finite() {
                return Err(Violation::new(format!("con[{j}] not finite")));
            }
            if x < var.lower {
                return Err(Violation::new(format!("con[{j}] below lower")));
            }
            if x > var.upper {
                return Err(Violation::new(format!("con[{j}] above upper")));
            }
        }
        Ok(())
    }

    /// Maps continuous coordinates onto `[0, 1]^d`. Assumes `p` is valid.
    pub fn normalize(&self, p: &MixedPoint) -> NormalizedPoint {
        let con01 = p
            .con
            .iter()
            .zip(&self.continuous)
            .map(|(&x, v)| ((x - v.lower) / v.width()).clamp(0.0, 1.0))
            .collect();
        NormalizedPoint {
            cat: p.cat.clone(),
            con01,
        }
    }

    pub fn denormalize(&self, q: &NormalizedPoint) -> MixedPoint {
        let con = q
            .con01
            .iter()
            .zip(&self.continuous)
            .map(|(&u, v)| (v.lower + u * v.width()).clamp(v.lower, v.upper))
            .collect();
        MixedPoint {
            cat: q.cat.clone(),
            con,
        }
    }

    /// Uniform draw: levels uniform per variable, coordinates uniform in bounds.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MixedPoint {
        let cat = self
            .categoricals
            .iter()
            .map(|v| rng.gen_range(0..v.len()))
            .collect();
        let con = self
            .continuous
            .iter()
            .map(|v| rng.gen_range(v.lower..=v.upper))
            .collect();
        MixedPoint { cat, con }
    }

    pub fn sample_normalized<R: Rng + ?Sized>(&self, rng: &mut R) -> NormalizedPoint {
        let cat = self
            .categoricals
            .iter()
            .map(|v| rng.gen_range(0..v.len()))
            .collect();
        let con01 = (0..self.n_con()).map(|_| rng.gen::<f64>()).collect();
        NormalizedPoint { cat, con01 }
    }

    /// Level labels for a point's categorical part.
    pub fn labels<'a>(&'a self, p: &MixedPoint) -> Vec<&'a str> {
        p.cat
            .iter()
            .zip(&self.categoricals)
            .map(|(&i, v)| v.levels[i].as_str())
            .collect()
    }
}

/// One candidate in raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedPoint {
    pub cat: Vec<usize>,
    pub con: Vec<f64>,
}

impl MixedPoint {
    pub fn new(cat: Vec<usize>, con: Vec<f64>) -> Self {
        Self { cat, con }
    }

    /// Bitwise equality on the continuous part.
    pub fn same_as(&self, other: &MixedPoint) -> bool {
        self.cat == other.cat
            && self.con.len() == other.con.len()
            && self
                .con
                .iter()
                .zip(&other.con)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// A candidate with its continuous part in the unit cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedPoint {
    pub cat: Vec<usize>,
    pub con01: Vec<f64>,
}

impl NormalizedPoint {
    pub fn new(cat: Vec<usize>, con01: Vec<f64>) -> Self {
        Self { cat, con01 }
    }

    pub fn same_as(&self, other: &NormalizedPoint) -> bool {
        self.cat == other.cat
            && self.con01.len() == other.con01.len()
            && self
                .con01
                .iter()
                .zip(&other.con01)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Why a point does not belong to a space. Names the first offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation(pub String);

impl Violation {
    fn new(msg: String) -> Self {
        Self(msg)
    }

    pub fn message(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Violation {}

/// Evenly spaced position of `level` out of `n_levels` on `[lo, hi]`.
#[inline]
pub fn encode_level(level: usize, n_levels: usize, lo: f64, hi: f64) -> f64 {
    debug_assert!(n_levels >= 2);
    lo + level as f64 * (hi - lo) / (n_levels - 1) as f64
}

/// Real-valued stand-ins for the categorical coordinates of `p`, used when a
/// synthetic function on `R^(U + d)` is exposed over a mixed space. Every
/// variable is laid out on the same `interval`.
pub fn encode_categorical_for_benchmark(
    space: &SearchSpace,
    p: &MixedPoint,
    interval: (f64, f64),
) -> Vec<f64> {
    p.cat
        .iter()
        .zip(space.categoricals())
        .map(|(&j, v)| encode_level(j, v.len(), interval.0, interval.1))
        .collect()
}
