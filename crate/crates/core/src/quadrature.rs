//! Adaptive quadrature rules used for period integrals.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Stop when successive estimates differ by less than `rel_tol` times the L1 mass.
    pub rel_tol: f64,
    pub min_nodes: usize,
    pub max_nodes: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            min_nodes: 16,
            max_nodes: 1 << 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: Complex64,
    pub nodes: usize,
    /// Difference between the last two estimates.
    pub residual: f64,
}

/// `int_{-1}^{1} f(s) ds / sqrt(1 - s^2)` by Gauss-Chebyshev rules with node doubling.
pub fn gauss_chebyshev<F>(f: F, cfg: &QuadratureConfig) -> Result<QuadResult>
where
    F: Fn(f64) -> Result<Complex64>,
{
    let rule = |n: usize| -> Result<(Complex64, f64)> {
        let w = PI / n as f64;
        let mut sum = Complex64::new(0.0, 0.0);
        let mut mass = 0.0;
        for k in 1..=n {
            let s = ((2 * k - 1) as f64 * PI / (2 * n) as f64).cos();
            let v = f(s)?;
            sum += v;
            mass += v.norm();
        }
        Ok((sum * w, mass * w))
    };
    adapt(rule, cfg)
}

/// `int_0^1 f(t) dt` for a 1-periodic analytic `f` by the trapezoid rule with node doubling.
pub fn periodic_trapezoid<F>(f: F, cfg: &QuadratureConfig) -> Result<QuadResult>
where
    F: Fn(f64) -> Result<Complex64>,
{
    let rule = |n: usize| -> Result<(Complex64, f64)> {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut mass = 0.0;
        for k in 0..n {
            let v = f(k as f64 / n as f64)?;
            sum += v;
            mass += v.norm();
        }
        Ok((sum / n as f64, mass / n as f64))
    };
    adapt(rule, cfg)
}

fn adapt<R>(rule: R, cfg: &QuadratureConfig) -> Result<QuadResult>
where
    R: Fn(usize) -> Result<(Complex64, f64)>,
{
    let mut n = cfg.min_nodes.max(2);
    let (mut prev, _) = rule(n)?;
    let mut residual = f64::INFINITY;
    while 2 * n <= cfg.max_nodes {
        n *= 2;
        let (value, mass) = rule(n)?;
        residual = (value - prev).norm();
        if !residual.is_finite() {
            break;
        }
        if residual <= cfg.rel_tol * mass.max(f64::MIN_POSITIVE) {
            return Ok(QuadResult {
                value,
                nodes: n,
                residual,
            });
        }
        prev = value;
    }
    Err(Error::NoConvergence { nodes: n, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chebyshev_integrates_smooth_weight() {
        // int (1 + s^2) / sqrt(1 - s^2) = 3 pi / 2
        let r = gauss_chebyshev(|s| Ok(Complex64::new(1.0 + s * s, 0.0)), &Default::default())
            .unwrap();
        assert!((r.value.re - 1.5 * PI).abs() < 1e-14);
        // int e^s / sqrt(1 - s^2) = pi I_0(1)
        let r = gauss_chebyshev(|s| Ok(Complex64::new(s.exp(), 0.0)), &Default::default())
            .unwrap();
        assert!((r.value.re - PI * 1.266_065_877_752_008_4).abs() < 1e-13);
    }

    #[test]
    fn trapezoid_is_spectral_on_periodic_functions() {
        // int_0^1 1 / (2 + cos 2 pi t) = 1 / sqrt 3
        let r = periodic_trapezoid(
            |t| Ok(Complex64::new(1.0 / (2.0 + (2.0 * PI * t).cos()), 0.0)),
            &Default::default(),
        )
        .unwrap();
        assert!((r.value.re - 1.0 / 3f64.sqrt()).abs() < 1e-14);
        assert!(r.nodes <= 64);
    }

    #[test]
    fn impossible_tolerance_reports_no_convergence() {
        let cfg = QuadratureConfig {
            rel_tol: 1e-30,
            min_nodes: 16,
            max_nodes: 256,
        };
        let r = gauss_chebyshev(|s| Ok(Complex64::new((10.0 * s).sin().exp(), 0.0)), &cfg);
        assert!(matches!(r, Err(Error::NoConvergence { .. })));
    }
}
