//! Dependence of the intrinsic connection on moduli.
//!
//! On the torus the connection of the Hodge-corrected kernel in the flat coordinate is the
//! constant `c(tau) = 6 (eta1(tau) - pi / Im tau)`. The quasi-period is holomorphic in `tau`,
//! so `d c / d conj(tau) = 3 pi i / (Im tau)^2` and `kappa = (Im tau)^2 dbar c = 3 pi i`.
//! Antiholomorphic derivatives are estimated by central differences along the real and
//! imaginary directions, with Richardson extrapolation over three step sizes.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curves::{Chart, Curve, Sheet, SurfacePoint};
use crate::error::{Error, Result};
use crate::kernel::intrinsic_kernel;
use crate::periods::period_matrices;
use crate::projective::{connection_from_kernel, diagonal_jet, JetConfig};
use crate::special::{quasi_periods, Modulus};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Reference density of the Siegel (Poincaré) metric on the upper half-plane.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SiegelReference;

impl SiegelReference {
    /// `(Im tau)^{-2}`.
    pub fn density(&self, tau: Complex64) -> f64 {
        tau.im.powi(-2)
    }

    /// Predicted `dbar c` for the torus section: `3 pi i` times the density.
    pub fn predicted_dbar(&self, tau: Complex64) -> Complex64 {
        I * (3.0 * PI) * self.density(tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaCoefficient {
    pub tau: Complex64,
    /// `c = 6 h` from the diagonal jet of the Hodge-corrected kernel.
    pub value: Complex64,
    /// `6 (eta1 - pi / Im tau)`.
    pub closed_form: Complex64,
    pub jet_error: f64,
}

/// `c(tau)` through the kernel pipeline, cross-checked against the closed form.
pub fn eta_coefficient_genus1(tau: Complex64, jet: &JetConfig) -> Result<EtaCoefficient> {
    let m = Modulus::new(tau)?;
    let closed_form = (quasi_periods(&m)?.eta1 - PI / tau.im) * 6.0;
    let value = eta_coefficient_jet(tau, jet)?;
    if (value.0 - closed_form).norm() > 1e-6 * closed_form.norm().max(1.0) {
        return Err(Error::ContractViolation(format!(
            "jet coefficient {} disagrees with closed form {closed_form}",
            value.0
        )));
    }
    Ok(EtaCoefficient {
        tau,
        value: value.0,
        closed_form,
        jet_error: value.1,
    })
}

fn eta_coefficient_jet(tau: Complex64, jet: &JetConfig) -> Result<(Complex64, f64)> {
    let curve = Curve::elliptic(tau)?;
    let pd = period_matrices(&curve)?;
    let k = intrinsic_kernel(&curve, &pd)?;
    let j = diagonal_jet(&k, Chart::FlatZ, &SurfacePoint::Torus(Complex64::new(0.17, 0.11)), jet)?;
    Ok((j.finite_part * 6.0, 6.0 * j.error))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbarConfig {
    /// Largest finite-difference step; `h/2` and `h/4` are also used.
    pub step: f64,
    /// Largest acceptable relative disagreement of the extrapolated estimates.
    pub rel_tol: f64,
    pub jet: JetConfig,
}

impl Default for DbarConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            rel_tol: 1e-6,
            jet: JetConfig::wide(),
        }
    }
}

/// `d/dlambda` and `d/dconj(lambda)` of a section at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeEstimate {
    pub value: Complex64,
    pub holomorphic: Complex64,
    pub antiholomorphic: Complex64,
    /// `|R(h, h/2) - R(h/2, h/4)| / max(|R(h, h/2)|, scale)` for the antiholomorphic part.
    pub residual: f64,
}

/// Wirtinger derivatives of `f` at `z0` by central differences with Richardson extrapolation.
/// `scale` is the magnitude below which the residual is measured absolutely.
pub fn wirtinger<F>(f: F, z0: Complex64, step: f64, scale: f64) -> Result<DerivativeEstimate>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let value = f(z0)?;
    let diffs = |h: f64| -> Result<(Complex64, Complex64)> {
        let dx = (f(z0 + h)? - f(z0 - h)?) / (2.0 * h);
        let dy = (f(z0 + I * h)? - f(z0 - I * h)?) / (2.0 * h);
        Ok(((dx - I * dy) * 0.5, (dx + I * dy) * 0.5))
    };
    let d1 = diffs(step)?;
    let d2 = diffs(step / 2.0)?;
    let d4 = diffs(step / 4.0)?;
    let rich = |a: Complex64, b: Complex64| (b * 4.0 - a) / 3.0;
    let (dz, dbar) = (rich(d1.0, d2.0), rich(d1.1, d2.1));
    let dbar_fine = rich(d2.1, d4.1);
    let residual = (dbar - dbar_fine).norm() / dbar.norm().max(scale);
    Ok(DerivativeEstimate {
        value,
        holomorphic: dz,
        antiholomorphic: dbar,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuliSample {
    pub tau: Complex64,
    pub c: Complex64,
    pub dbar_c: Complex64,
    pub d_c: Complex64,
    /// `(Im tau)^2 dbar c`.
    pub kappa: Complex64,
    pub predicted_kappa: Complex64,
    pub richardson_residual: f64,
}

impl ModuliSample {
    pub fn kappa_error(&self) -> f64 {
        (self.kappa - self.predicted_kappa).norm() / self.predicted_kappa.norm()
    }
}

/// `dbar c` at one modulus.
pub fn dbar_sample(tau: Complex64, cfg: &DbarConfig) -> Result<ModuliSample> {
    if tau.im <= 4.0 * cfg.step {
        return Err(Error::BadModulus {
            re: tau.re,
            im: tau.im,
        });
    }
    let est = wirtinger(|t| Ok(eta_coefficient_jet(t, &cfg.jet)?.0), tau, cfg.step, 1.0)?;
    if est.residual > cfg.rel_tol {
        return Err(Error::StepTooLarge {
            residual: est.residual,
        });
    }
    let kappa = est.antiholomorphic * tau.im * tau.im;
    Ok(ModuliSample {
        tau,
        c: est.value,
        dbar_c: est.antiholomorphic,
        d_c: est.holomorphic,
        kappa,
        predicted_kappa: I * (3.0 * PI),
        richardson_residual: est.residual,
    })
}

pub fn dbar_scan(grid: &[Complex64], cfg: &DbarConfig) -> Result<Vec<ModuliSample>> {
    grid.iter().map(|&t| dbar_sample(t, cfg)).collect()
}

/// `dbar` of the uniformizing (flat) connection, which vanishes identically.
pub fn uniformization_dbar(tau: Complex64, cfg: &DbarConfig) -> Result<DerivativeEstimate> {
    Modulus::new(tau)?;
    wirtinger(|_| Ok(Complex64::new(0.0, 0.0)), tau, cfg.step, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    /// Steps in both real and imaginary directions of the deformation parameter.
    Complex,
    /// Real steps only: `d` and `dbar` cannot be separated.
    Real,
}

/// Moving one branch point of a genus-2 curve, `e_k -> e_k + lambda * direction`, and
/// following the connection at a fixed point `x` in the affine chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub roots: Vec<Complex64>,
    pub lead: Complex64,
    pub root_index: usize,
    pub direction: Complex64,
    pub point: Complex64,
    pub kind: PathKind,
    pub step: f64,
    /// Number of samples on each side of `lambda = 0` written to the trace.
    pub samples: usize,
    pub rel_tol: f64,
    pub jet: JetConfig,
}

impl TraceConfig {
    pub fn new(roots: Vec<Complex64>, root_index: usize, point: Complex64) -> Self {
        Self {
            roots,
            lead: Complex64::new(1.0, 0.0),
            root_index,
            direction: Complex64::new(1.0, 0.0),
            point,
            kind: PathKind::Complex,
            step: 1e-3,
            samples: 4,
            rel_tol: 0.1,
            jet: JetConfig::wide(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub lambda: Complex64,
    pub connection: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub samples: Vec<TraceSample>,
    pub dbar: Option<Complex64>,
    pub d: Option<Complex64>,
    pub residual: Option<f64>,
    /// Set when the path cannot separate holomorphic from antiholomorphic dependence.
    pub inconclusive: bool,
}

fn deformed_roots(cfg: &TraceConfig, lambda: Complex64) -> Result<Vec<Complex64>> {
    let mut roots = cfg.roots.clone();
    roots[cfg.root_index] += lambda * cfg.direction;
    // The cycle basis follows the sorted order; a reordering changes the contour topology.
    let mut order: Vec<usize> = (0..roots.len()).collect();
    order.sort_by(|&a, &b| roots[a].re.total_cmp(&roots[b].re).then(roots[a].im.total_cmp(&roots[b].im)));
    let mut base: Vec<usize> = (0..roots.len()).collect();
    base.sort_by(|&a, &b| {
        cfg.roots[a]
            .re
            .total_cmp(&cfg.roots[b].re)
            .then(cfg.roots[a].im.total_cmp(&cfg.roots[b].im))
    });
    if order != base {
        return Err(Error::ContourTopologyChanged(format!(
            "branch points reorder at lambda = {lambda}"
        )));
    }
    Ok(roots)
}

fn connection_at(cfg: &TraceConfig, lambda: Complex64) -> Result<Complex64> {
    let roots = deformed_roots(cfg, lambda)?;
    let curve = Curve::hyperelliptic_from_roots(cfg.lead, &roots)?;
    let pd = period_matrices(&curve).map_err(|e| match e {
        Error::BadConfiguration(msg) => Error::ContourTopologyChanged(msg),
        other => other,
    })?;
    let k = intrinsic_kernel(&curve, &pd)?;
    let p = curve.point_on_sheet(cfg.point, Sheet::Plus)?;
    Ok(connection_from_kernel(&k, Chart::AffineX(Sheet::Plus), &[p], &cfg.jet)?[0].value)
}

/// Follows the genus-2 connection along a one-parameter deformation of a branch point.
pub fn genus2_section_trace(cfg: &TraceConfig) -> Result<TraceReport> {
    if cfg.roots.len() != 5 {
        return Err(Error::BadCurve(format!(
            "genus-2 trace needs 5 finite branch points, got {}",
            cfg.roots.len()
        )));
    }
    if cfg.root_index >= cfg.roots.len() {
        return Err(Error::BadCurve(format!("no branch point {}", cfg.root_index)));
    }
    if cfg.direction.norm() == 0.0 || !(cfg.step > 0.0) {
        return Err(Error::BadConfiguration("deformation direction and step must be nonzero".into()));
    }
    let n = cfg.samples as i64;
    let mut samples = Vec::new();
    for j in -n..=n {
        let lambda = Complex64::new(j as f64 * cfg.step, 0.0);
        samples.push(TraceSample {
            lambda,
            connection: connection_at(cfg, lambda)?,
        });
    }
    match cfg.kind {
        PathKind::Real => Ok(TraceReport {
            samples,
            dbar: None,
            d: None,
            residual: None,
            inconclusive: true,
        }),
        PathKind::Complex => {
            let est = wirtinger(|l| connection_at(cfg, l), Complex64::new(0.0, 0.0), cfg.step, 1e-12)?;
            if est.residual > cfg.rel_tol {
                return Err(Error::StepTooLarge {
                    residual: est.residual,
                });
            }
            Ok(TraceReport {
                samples,
                dbar: Some(est.antiholomorphic),
                d: Some(est.holomorphic),
                residual: Some(est.residual),
                inconclusive: false,
            })
        }
    }
}
