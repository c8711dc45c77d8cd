//! Acquisition functions. Everything is phrased for maximization and in
//! standardized output units.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::gp::Posterior;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AcqKind {
    #[default]
    Ei,
    Ucb,
    Pi,
}

impl std::str::FromStr for AcqKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ei" => Ok(Self::Ei),
            "ucb" => Ok(Self::Ucb),
            "pi" => Ok(Self::Pi),
            other => Err(format!("unknown acquisition `{other}` (expected ei, ucb or pi)")),
        }
    }
}

/// Acquisition kind plus its constants. Serialized as the `"acq"`, `"xi"`,
/// `"beta"` config fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcqConfig {
    pub acq: AcqKind,
    pub xi: f64,
    pub beta: f64,
}

impl Default for AcqConfig {
    fn default() -> Self {
        Self {
            acq: AcqKind::Ei,
            xi: 0.01,
            beta: 2.0,
        }
    }
}

impl AcqConfig {
    pub fn with_best(&self, best_y: f64) -> AcqSpec {
        AcqSpec {
            kind: self.acq,
            xi: self.xi,
            beta: self.beta,
            best_y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcqSpec {
    pub kind: AcqKind,
    pub xi: f64,
    pub beta: f64,
    /// Incumbent value, standardized.
    pub best_y: f64,
}

impl AcqSpec {
    pub fn ei(best_y: f64, xi: f64) -> Self {
        Self {
            kind: AcqKind::Ei,
            xi,
            beta: 0.0,
            best_y,
        }
    }

    pub fn score(&self, post: &Posterior) -> f64 {
        score(self, post.mean, post.std())
    }
}

/// Acquisition value for a Gaussian predictive with mean `mu` and standard
/// deviation `sigma`.
pub fn score(acq: &AcqSpec, mu: f64, sigma: f64) -> f64 {
    match acq.kind {
        AcqKind::Ei => expected_improvement(mu, sigma, acq.best_y, acq.xi),
        AcqKind::Ucb => mu + acq.beta * sigma,
        AcqKind::Pi => probability_of_improvement(mu, sigma, acq.best_y, acq.xi),
    }
}

pub fn expected_improvement(mu: f64, sigma: f64, best: f64, xi: f64) -> f64 {
    let imp = mu - best - xi;
    if !(sigma > 0.0) {
        return imp.max(0.0);
    }
    let z = imp / sigma;
    (imp * gaussian_cdf(z) + sigma * gaussian_pdf(z)).max(0.0)
}

pub fn probability_of_improvement(mu: f64, sigma: f64, best: f64, xi: f64) -> f64 {
    let imp = mu - best - xi;
    if !(sigma > 0.0) {
        return if imp > 0.0 { 1.0 } else { 0.0 };
    }
    gaussian_cdf(imp / sigma)
}

#[inline]
pub fn gaussian_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal CDF via Hart's double-precision rational approximation
/// (as arranged by West, 2005); absolute error is near machine precision.
pub fn gaussian_cdf(z: f64) -> f64 {
    let x = z.abs();
    let tail = if x > 37.0 {
        0.0
    } else {
        let e = (-x * x / 2.0).exp();
        if x < 7.071_067_811_865_47 {
            let mut n = 3.526_249_659_989_11e-2 * x + 0.700_383_064_443_688;
            n = n * x + 6.373_962_203_531_65;
            n = n * x + 33.912_866_078_383;
            n = n * x + 112.079_291_497_871;
            n = n * x + 221.213_596_169_931;
            n = n * x + 220.206_867_912_376;
            let mut d = 8.838_834_764_831_84e-2 * x + 1.755_667_163_182_64;
            d = d * x + 16.064_177_579_207;
            d = d * x + 86.780_732_202_946_1;
            d = d * x + 296.564_248_779_674;
            d = d * x + 637.333_633_378_831;
            d = d * x + 793.826_512_519_948;
            d = d * x + 440.413_735_824_752;
            e * n / d
        } else {
            let mut b = x + 0.65;
            b = x + 4.0 / b;
            b = x + 3.0 / b;
            b = x + 2.0 / b;
            b = x + 1.0 / b;
            e / b / (2.0 * PI).sqrt()
        }
    };
    if z > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Composite Simpson on [-12, z]: independent of the rational form above.
    fn cdf_by_quadrature(z: f64) -> f64 {
        let lo = -12.0;
        let n = 200_000;
        let h = (z - lo) / n as f64;
        let mut s = gaussian_pdf(lo) + gaussian_pdf(z);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * gaussian_pdf(lo + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn cdf_values() {
        assert_eq!(gaussian_cdf(0.0), 0.5);
        assert!((gaussian_pdf(0.0) - 0.398942).abs() < 1e-6);
        assert!((gaussian_cdf(1.96) - 0.975002).abs() < 1e-6);
        for z in [-8.0, -3.3, -1.0, -0.2, 0.7, 1.96, 2.5, 6.0, 7.5] {
            assert!((gaussian_cdf(z) - cdf_by_quadrature(z)).abs() < 1e-7, "z = {z}");
        }
        assert!((gaussian_cdf(-40.0)).abs() < 1e-300);
        assert_eq!(gaussian_cdf(40.0), 1.0);
    }

    #[test]
    fn ei_closed_forms() {
        assert_eq!(expected_improvement(0.5, 0.0, 0.5, 0.0), 0.0);
        assert!((expected_improvement(0.5, 1.0, 0.5, 0.0) - INV_SQRT_2PI).abs() < 1e-12);
        assert!((expected_improvement(0.5, 1.0, 0.5, 0.0) - 0.398942).abs() < 1e-6);
        assert!((expected_improvement(0.9, 1e-12, 0.4, 0.0) - 0.5).abs() < 1e-9);
        assert!(expected_improvement(0.1, 1e-12, 0.4, 0.0).abs() < 1e-9);
    }

    #[test]
    fn pi_and_ucb() {
        assert_eq!(probability_of_improvement(1.0, 0.0, 0.5, 0.0), 1.0);
        assert_eq!(probability_of_improvement(0.5, 0.0, 0.5, 0.0), 0.0);
        assert_eq!(probability_of_improvement(0.5, 2.0, 0.5, 0.0), 0.5);
        let ucb = AcqSpec { kind: AcqKind::Ucb, xi: 0.0, beta: 2.0, best_y: 0.0 };
        assert_eq!(score(&ucb, 1.0, 0.5), 2.0);
    }

    #[test]
    fn ei_monotone_on_grid() {
        for &best in &[-1.0, 0.0, 0.7] {
            for &xi in &[0.0, 0.01, 0.3] {
                for i in 0..60 {
                    let mu = -3.0 + 0.1 * i as f64;
                    let mut prev = expected_improvement(mu, 0.0, best, xi);
                    for j in 1..60 {
                        let next = expected_improvement(mu, 0.05 * j as f64, best, xi);
                        assert!(next >= prev - 1e-15);
                        prev = next;
                    }
                }
                for j in 0..40 {
                    let sigma = 0.05 * j as f64;
                    let mut prev = expected_improvement(-3.0, sigma, best, xi);
                    for i in 1..60 {
                        let next = expected_improvement(-3.0 + 0.1 * i as f64, sigma, best, xi);
                        assert!(next >= prev - 1e-15);
                        assert!(next >= 0.0);
                        prev = next;
                    }
                }
            }
        }
    }

    #[test]
    fn config_field_names() {
        let c: AcqConfig = serde_json::from_str(r#"{"acq":"ucb","beta":3.5}"#).unwrap();
        assert_eq!(c.acq, AcqKind::Ucb);
        assert_eq!(c.beta, 3.5);
        assert_eq!(c.xi, 0.01);
        assert_eq!("PI".parse::<AcqKind>().unwrap(), AcqKind::Pi);
    }
}
