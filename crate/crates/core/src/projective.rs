//! Projective structures read off the diagonal expansion of a kernel.
//!
//! In a chart `zeta`, a kernel with the standard diagonal behaviour expands as
//!
//! ```text
//! K(zeta, zeta + t) = 1 / t^2 + r / t + h(zeta) + O(t)
//! ```
//!
//! with biresidue `1` and `r = 0` for a symmetric kernel. The projective connection is
//! `S = 6 h`. Under a change of chart `zeta = f(w)` it transforms as
//! `S_w = S_zeta(f(w)) f'(w)^2 + {f, w}`, the Schwarzian derivative of the transition.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curves::{
    chart_clearance, coordinate, dx_dcoord, point_near, x_difference, Chart, Curve, SurfacePoint,
};
use crate::error::{Error, Result};
use crate::kernel::{eval_kernel_near, Kernel};
use crate::special::Modulus;

const I: Complex64 = Complex64::new(0.0, 1.0);
const JET_CLEARANCE: f64 = 1e-2;
const TRIVIALIZATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JetConfig {
    /// Inner stencil radius; the outer one is twice as large.
    pub delta: f64,
    /// Largest acceptable error estimate.
    pub tol: f64,
    /// Points on each stencil circle; terms `t^{m + nodes}` alias onto `t^m`.
    pub nodes: usize,
}

impl Default for JetConfig {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            tol: 1e-7,
            nodes: 4,
        }
    }
}

impl JetConfig {
    /// Wide stencil with many nodes: low rounding noise, for finite differences in moduli.
    pub fn wide() -> Self {
        Self {
            delta: 0.05,
            tol: 1e-9,
            nodes: 16,
        }
    }
}

/// Leading Laurent coefficients of `K(zeta, zeta + t)` in `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalJet {
    pub biresidue: Complex64,
    pub residue_term: Complex64,
    pub finite_part: Complex64,
    pub error: f64,
}

/// Diagonal jet of `k` at `p` in chart `ch`, from circular stencils at radii `delta` and
/// `2 delta` with Richardson extrapolation.
pub fn diagonal_jet(k: &Kernel, ch: Chart, p: &SurfacePoint, cfg: &JetConfig) -> Result<DiagonalJet> {
    let c = k.curve();
    let clearance = chart_clearance(c, ch, p)?;
    if clearance < JET_CLEARANCE {
        return Err(Error::ChartDomain(format!(
            "jet point {} is within {clearance:e} of the chart boundary",
            p.x()
        )));
    }
    let z0 = coordinate(c, ch, p)?;
    if ch != Chart::FlatZ {
        // The outer circle must stay well inside the chart.
        let mut reach: f64 = 0.0;
        for k in 0..4 {
            let z = z0 + I.powi(k) * (2.0 * cfg.delta);
            reach = reach.max((x_difference(ch, z, z0)).norm());
        }
        if clearance < 2.0 * reach {
            return Err(Error::ChartDomain(format!(
                "jet stencil of radius {} leaves the chart at {}",
                2.0 * cfg.delta,
                p.x()
            )));
        }
    }
    let n = cfg.nodes.max(4);
    let coefficients = |rho: f64| -> Result<[Complex64; 3]> {
        let mut acc = [Complex64::new(0.0, 0.0); 3];
        for step in 0..n {
            let rot = if n == 4 {
                I.powi(step as i32)
            } else {
                Complex64::from_polar(1.0, 2.0 * PI * step as f64 / n as f64)
            };
            let z1 = z0 + rot * rho;
            let q = point_near(c, ch, z1, p)?;
            // Stencil nodes are not exactly representable; weight by the realised offset.
            let te = z1 - z0;
            let g = te * te * eval_kernel_near(k, ch, p, z0, &q, z1)?;
            let mut back = Complex64::new(1.0, 0.0);
            for slot in acc.iter_mut() {
                *slot += g * back;
                back /= rot;
            }
        }
        let nf = n as f64;
        Ok([acc[0] / nf, acc[1] / (nf * rho), acc[2] / (nf * rho * rho)])
    };
    let near = coefficients(cfg.delta)?;
    let far = coefficients(2.0 * cfg.delta)?;
    // Aliased terms are c_{m+n} rho^n.
    let gain = 2f64.powi(n as i32);
    let extrapolate = |m: usize| (near[m] * gain - far[m]) / (gain - 1.0);
    let error = (0..3)
        .map(|m| (near[m] - far[m]).norm())
        .fold(0.0, f64::max);
    if !(error <= cfg.tol) {
        return Err(Error::IllConditionedFit { error });
    }
    Ok(DiagonalJet {
        biresidue: extrapolate(0),
        residue_term: extrapolate(1),
        finite_part: extrapolate(2),
        error,
    })
}

/// A holomorphic function of one variable with access to its first three derivatives.
pub trait HolomorphicMap {
    fn value(&self, w: Complex64) -> Result<Complex64>;

    /// Radius of a disc around `w` on which the map is holomorphic with some room to spare.
    fn radius(&self, w: Complex64) -> f64;

    /// `[f', f'', f''']` at `w`; by default from the Cauchy integral on a circle of
    /// radius `radius(w)`.
    fn derivatives(&self, w: Complex64) -> Result<[Complex64; 3]> {
        cauchy_derivatives(self, w, self.radius(w))
    }
}

fn cauchy_derivatives<F: HolomorphicMap + ?Sized>(
    f: &F,
    w: Complex64,
    r: f64,
) -> Result<[Complex64; 3]> {
    const NODES: usize = 48;
    let mut acc = [Complex64::new(0.0, 0.0); 3];
    for k in 0..NODES {
        let e = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / NODES as f64);
        let v = f.value(w + e * r)?;
        let mut ep = e;
        for slot in acc.iter_mut() {
            *slot += v / ep;
            ep *= e;
        }
    }
    let n = NODES as f64;
    Ok([
        acc[0] / (n * r),
        acc[1] * 2.0 / (n * r * r),
        acc[2] * 6.0 / (n * r * r * r),
    ])
}

/// `(a w + b) / (c w + d)`, with exact derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobius {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl HolomorphicMap for Mobius {
    fn value(&self, w: Complex64) -> Result<Complex64> {
        Ok((self.a * w + self.b) / (self.c * w + self.d))
    }

    fn radius(&self, w: Complex64) -> f64 {
        if self.c.norm() == 0.0 {
            1.0
        } else {
            0.25 * (w + self.d / self.c).norm()
        }
    }

    fn derivatives(&self, w: Complex64) -> Result<[Complex64; 3]> {
        let det = self.a * self.d - self.b * self.c;
        let den = self.c * w + self.d;
        if den.norm() == 0.0 {
            return Err(Error::Pole { distance: 0.0 });
        }
        Ok([
            det / den.powi(2),
            -(det * self.c * 2.0) / den.powi(3),
            det * self.c * self.c * 6.0 / den.powi(4),
        ])
    }
}

/// Wraps a closure together with a fixed holomorphy radius.
pub struct FnMap<F> {
    pub f: F,
    pub radius: f64,
}

impl<F: Fn(Complex64) -> Result<Complex64>> HolomorphicMap for FnMap<F> {
    fn value(&self, w: Complex64) -> Result<Complex64> {
        (self.f)(w)
    }

    fn radius(&self, _w: Complex64) -> f64 {
        self.radius
    }
}

pub fn schwarzian_from_derivatives(d: [Complex64; 3]) -> Result<Complex64> {
    let [f1, f2, f3] = d;
    if f1.norm() < 1e-12 {
        return Err(Error::CriticalPoint(f1.norm()));
    }
    let r = f2 / f1;
    Ok(f3 / f1 - r * r * 1.5)
}

/// `{f, w} = f'''/f' - (3/2) (f''/f')^2`.
pub fn schwarzian<F: HolomorphicMap + ?Sized>(f: &F, w: Complex64) -> Result<Complex64> {
    schwarzian_from_derivatives(f.derivatives(w)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCheck {
    /// Extrapolated finite part of `f'(x1) f'(x2) / (f(x1) - f(x2))^2 - 1/(x1 - x2)^2`.
    pub finite_part: Complex64,
    /// `{f, x} / 6`.
    pub predicted: Complex64,
    pub residual: f64,
}

/// Compares the diagonal finite part of the pulled-back flat kernel `f'f'/(f - f)^2` with
/// `{f, x}/6`, using offsets `delta * {+-1, +-2}` and Richardson extrapolation.
pub fn expansion_identity_check<F: HolomorphicMap + ?Sized>(
    f: &F,
    x: Complex64,
    delta: f64,
) -> Result<ExpansionCheck> {
    let [d0, ..] = f.derivatives(x)?;
    let f0 = f.value(x)?;
    let pulled = |t: f64| -> Result<Complex64> {
        let t = Complex64::new(t, 0.0);
        let [d1, ..] = f.derivatives(x + t)?;
        let diff = f0 - f.value(x + t)?;
        Ok(d0 * d1 / (diff * diff) - (t * t).inv())
    };
    let sym = |rho: f64| -> Result<Complex64> { Ok((pulled(rho)? + pulled(-rho)?) * 0.5) };
    let finite_part = (sym(delta)? * 4.0 - sym(2.0 * delta)?) / 3.0;
    let predicted = schwarzian(f, x)? / 6.0;
    Ok(ExpansionCheck {
        finite_part,
        predicted,
        residual: (finite_part - predicted).norm(),
    })
}

/// Projective connection of a kernel at one point, `S = 6 h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectionSample {
    pub chart: Chart,
    pub point: SurfacePoint,
    pub value: Complex64,
    pub error: f64,
}

/// `S = 6 h` at each point, after checking that the kernel trivialises the diagonal
/// (biresidue `1`, vanishing residue term).
pub fn connection_from_kernel(
    k: &Kernel,
    ch: Chart,
    points: &[SurfacePoint],
    cfg: &JetConfig,
) -> Result<Vec<ConnectionSample>> {
    points
        .iter()
        .map(|p| {
            let jet = diagonal_jet(k, ch, p, cfg)?;
            if (jet.biresidue - 1.0).norm() > TRIVIALIZATION_TOL
                || jet.residue_term.norm() > TRIVIALIZATION_TOL
            {
                return Err(Error::ContractViolation(format!(
                    "diagonal not trivialised at {}: biresidue {}, residue term {}",
                    p.x(),
                    jet.biresidue,
                    jet.residue_term
                )));
            }
            Ok(ConnectionSample {
                chart: ch,
                point: *p,
                value: jet.finite_part * 6.0,
                error: 6.0 * jet.error,
            })
        })
        .collect()
}

/// The flat structure of the torus: `S = 0` in the coordinate `z`.
pub fn uniformization_genus1(m: &Modulus, points: &[Complex64]) -> Vec<ConnectionSample> {
    let _ = m;
    points
        .iter()
        .map(|&z| ConnectionSample {
            chart: Chart::FlatZ,
            point: SurfacePoint::Torus(z),
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
        })
        .collect()
}

/// Transition `w -> zeta` from chart `to` (coordinate `w`) into chart `from` near `p`.
fn transition<'a>(
    c: &'a Curve,
    from: Chart,
    to: Chart,
    p: &'a SurfacePoint,
) -> Result<FnMap<impl Fn(Complex64) -> Result<Complex64> + 'a>> {
    let clearance = chart_clearance(c, from, p)?.min(chart_clearance(c, to, p)?);
    let rx = 0.1 * clearance;
    let dx = dx_dcoord(c, to, p)?.norm();
    let radius = if dx > 0.0 {
        (rx / dx).min(0.5 * rx.sqrt())
    } else {
        0.5 * rx.sqrt()
    };
    Ok(FnMap {
        f: move |w: Complex64| coordinate(c, from, &point_near(c, to, w, p)?),
        radius,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CocycleCheck {
    /// Connection computed directly in chart `to`.
    pub lhs: Complex64,
    /// Connection in chart `from`, transported: `S_from f'^2 + {f, w}`.
    pub rhs: Complex64,
    /// `|lhs - rhs| / max(1, |lhs|)`.
    pub residual: f64,
}

/// Checks the transformation law of the kernel's connection between two charts at `p`.
pub fn cocycle_check(
    k: &Kernel,
    from: Chart,
    to: Chart,
    p: &SurfacePoint,
    cfg: &JetConfig,
) -> Result<CocycleCheck> {
    let c = k.curve();
    let s_from = connection_from_kernel(k, from, std::slice::from_ref(p), cfg)?[0].value;
    let s_to = connection_from_kernel(k, to, std::slice::from_ref(p), cfg)?[0].value;
    let (rhs, _) = transport(c, from, to, p, s_from)?;
    Ok(CocycleCheck {
        lhs: s_to,
        rhs,
        residual: (s_to - rhs).norm() / s_to.norm().max(1.0),
    })
}

/// `(S f'^2 + {f, w}, f')` for the transition `f` from chart `to` into chart `from`.
fn transport(
    c: &Curve,
    from: Chart,
    to: Chart,
    p: &SurfacePoint,
    s_from: Complex64,
) -> Result<(Complex64, Complex64)> {
    if from == to {
        return Ok((s_from, Complex64::new(1.0, 0.0)));
    }
    let f = transition(c, from, to, p)?;
    let w = coordinate(c, to, p)?;
    let d = f.derivatives(w)?;
    let schw = schwarzian_from_derivatives(d)?;
    Ok((s_from * d[0] * d[0] + schw, d[0]))
}

/// Difference `S_1 - S_2` of two kernels' connections at `p` in chart `ch`: a quadratic
/// differential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticDifferentialSample {
    pub chart: Chart,
    pub point: SurfacePoint,
    pub value: Complex64,
}

pub fn connection_difference(
    k1: &Kernel,
    k2: &Kernel,
    ch: Chart,
    p: &SurfacePoint,
    cfg: &JetConfig,
) -> Result<QuadraticDifferentialSample> {
    let s1 = connection_from_kernel(k1, ch, std::slice::from_ref(p), cfg)?[0].value;
    let s2 = connection_from_kernel(k2, ch, std::slice::from_ref(p), cfg)?[0].value;
    Ok(QuadraticDifferentialSample {
        chart: ch,
        point: *p,
        value: s1 - s2,
    })
}

/// Residual of the weight-two law `q_to = q_from f'^2` for a difference of connections.
pub fn quadratic_law_residual(
    k1: &Kernel,
    k2: &Kernel,
    from: Chart,
    to: Chart,
    p: &SurfacePoint,
    cfg: &JetConfig,
) -> Result<f64> {
    let c = k1.curve();
    let q_from = connection_difference(k1, k2, from, p, cfg)?.value;
    let q_to = connection_difference(k1, k2, to, p, cfg)?.value;
    let (_, d) = transport(c, from, to, p, Complex64::new(0.0, 0.0))?;
    let predicted = q_from * d * d;
    Ok((q_to - predicted).norm() / q_to.norm().max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::Sheet;
    use crate::kernel::{a_normalize, base_kernel, intrinsic_kernel};
    use crate::periods::period_matrices;
    use crate::special::quasi_periods;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn genus2() -> Curve {
        Curve::hyperelliptic_from_roots(c(1.0, 0.0), &[-2.0, -1.0, 0.0, 1.0, 2.0].map(|e| c(e, 0.0)))
            .unwrap()
    }

    #[test]
    fn torus_finite_part_is_eta1_minus_pi_over_im_tau() {
        for tau in [c(0.0, 1.1), c(0.4, 1.3), c(-0.3, 0.9)] {
            let curve = Curve::elliptic(tau).unwrap();
            let pd = period_matrices(&curve).unwrap();
            let k = intrinsic_kernel(&curve, &pd).unwrap();
            let jet = diagonal_jet(&k, Chart::FlatZ, &SurfacePoint::Torus(c(0.17, 0.3)), &JetConfig::default())
                .unwrap();
            let m = Modulus::new(tau).unwrap();
            let expected = quasi_periods(&m).unwrap().eta1 - PI / tau.im;
            assert!((jet.finite_part - expected).norm() < 1e-8, "{} {}", jet.finite_part, expected);
            assert!((jet.biresidue - 1.0).norm() < 1e-10);
            assert!(jet.residue_term.norm() < 1e-10);
        }
    }

    #[test]
    fn expansion_identity_for_standard_maps() {
        let mobius = Mobius {
            a: c(1.0, 0.5),
            b: c(-2.0, 0.0),
            c: c(0.3, -0.2),
            d: c(1.0, 0.0),
        };
        let check = expansion_identity_check(&mobius, c(0.2, 0.1), 0.05).unwrap();
        assert!(check.residual < 1e-12, "{check:?}");
        assert!(check.predicted.norm() < 1e-14);

        let exp = FnMap {
            f: |w: Complex64| Ok(w.exp()),
            radius: 0.5,
        };
        let check = expansion_identity_check(&exp, c(0.3, -0.4), 1e-2).unwrap();
        assert!((check.finite_part - c(-1.0 / 12.0, 0.0)).norm() < 1e-8, "{check:?}");
        assert!(check.residual < 1e-8);

        let square = FnMap {
            f: |w: Complex64| Ok(w * w),
            radius: 0.25,
        };
        let w = c(1.5, 0.5);
        let check = expansion_identity_check(&square, w, 1e-2).unwrap();
        assert!((check.predicted * 6.0 + (w * w).inv() * 1.5).norm() < 1e-10);
        assert!(check.residual < 1e-8);
        assert!(matches!(
            schwarzian(&square, c(0.0, 0.0)),
            Err(Error::CriticalPoint(_))
        ));
    }

    #[test]
    fn cocycle_between_charts() {
        let curve = genus2();
        let pd = period_matrices(&curve).unwrap();
        let k = intrinsic_kernel(&curve, &pd).unwrap();
        let cfg = JetConfig::default();
        let p = curve.point_on_sheet(c(1.2, 0.1), Sheet::Plus).unwrap();
        let affine = Chart::AffineX(Sheet::Plus);
        for other in [Chart::InverseX(Sheet::Plus), Chart::BranchLocal(3)] {
            let check = cocycle_check(&k, affine, other, &p, &cfg).unwrap();
            assert!(check.residual < 1e-6, "{other}: {check:?}");
        }
        // The difference of two connections is a quadratic differential.
        let raw = base_kernel(&curve).unwrap();
        let normalized = a_normalize(&raw, &pd).unwrap();
        let r = quadratic_law_residual(&k, &normalized, affine, Chart::BranchLocal(3), &p, &cfg).unwrap();
        assert!(r < 1e-6, "{r}");
    }

    #[test]
    fn branch_local_chart_reaches_the_branch_point() {
        let curve = genus2();
        let pd = period_matrices(&curve).unwrap();
        let k = intrinsic_kernel(&curve, &pd).unwrap();
        let e = curve.branch_point(2).unwrap();
        let s = connection_from_kernel(&k, Chart::BranchLocal(2), &[e], &JetConfig::default()).unwrap();
        assert!(s[0].value.norm().is_finite());
        assert!(matches!(
            diagonal_jet(&k, Chart::AffineX(Sheet::Plus), &e, &JetConfig::default()),
            Err(Error::ChartDomain(_))
        ));
    }

    #[test]
    fn impossible_jet_tolerance_is_reported() {
        let curve = genus2();
        let k = base_kernel(&curve).unwrap();
        let p = curve.point_on_sheet(c(0.5, 1.0), Sheet::Plus).unwrap();
        let cfg = JetConfig {
            tol: 1e-18,
            ..Default::default()
        };
        assert!(matches!(
            diagonal_jet(&k, Chart::AffineX(Sheet::Plus), &p, &cfg),
            Err(Error::IllConditionedFit { .. })
        ));
    }
}
