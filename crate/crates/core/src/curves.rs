//! Curve models, points, local charts and holomorphic differentials.
//!
//! Two families are supported: the flat torus `C / (Z + tau Z)` and odd-degree hyperelliptic
//! curves `y^2 = P(x)` with `deg P = 2g + 1`, one branch point sitting at infinity.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{quasi_periods, Modulus, QuasiPeriods};

const ROOT_SEPARATION: f64 = 1e-8;
const AFFINE_CLEARANCE: f64 = 1e-6;
const ON_CURVE_TOL: f64 = 1e-10;

/// Curve description as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CurveSpec {
    Elliptic { tau: [f64; 2] },
    /// Coefficients of `P` in ascending degree, each as `[re, im]`.
    Hyperelliptic { coeffs: Vec<[f64; 2]> },
}

#[derive(Debug, Clone)]
pub struct EllipticData {
    pub modulus: Modulus,
    pub quasi: QuasiPeriods,
}

#[derive(Debug, Clone)]
pub struct HyperellipticData {
    coeffs: Vec<Complex64>,
    roots: Vec<Complex64>,
    sqrt_lead: Complex64,
}

#[derive(Debug, Clone)]
pub enum CurveKind {
    Elliptic(EllipticData),
    Hyperelliptic(HyperellipticData),
}

#[derive(Debug, Clone)]
pub struct Curve {
    kind: CurveKind,
    genus: usize,
}

impl Curve {
    pub fn elliptic(tau: Complex64) -> Result<Self> {
        let modulus = Modulus::new(tau)?;
        let quasi = quasi_periods(&modulus)?;
        Ok(Self {
            kind: CurveKind::Elliptic(EllipticData { modulus, quasi }),
            genus: 1,
        })
    }

    /// `y^2 = P(x)` from the coefficients of `P`, ascending degree.
    pub fn hyperelliptic(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::BadCurve("non-finite coefficient".into()));
        }
        let Some(lead) = coeffs.last().copied() else {
            return Err(Error::BadCurve("empty coefficient list".into()));
        };
        if lead.norm() == 0.0 {
            return Err(Error::BadCurve("leading coefficient is zero".into()));
        }
        let degree = coeffs.len() - 1;
        if degree.is_multiple_of(2) || degree < 5 {
            return Err(Error::BadCurve(format!(
                "degree must be odd and at least 5, got {degree}"
            )));
        }
        let roots = poly::roots(&coeffs)?;
        Self::from_parts(coeffs, roots)
    }

    /// `y^2 = lead * prod (x - e_k)`.
    pub fn hyperelliptic_from_roots(lead: Complex64, roots: &[Complex64]) -> Result<Self> {
        if lead.norm() == 0.0 {
            return Err(Error::BadCurve("leading coefficient is zero".into()));
        }
        let degree = roots.len();
        if degree.is_multiple_of(2) || degree < 5 {
            return Err(Error::BadCurve(format!(
                "degree must be odd and at least 5, got {degree}"
            )));
        }
        let coeffs = poly::from_roots(lead, roots);
        Self::from_parts(coeffs, roots.to_vec())
    }

    fn from_parts(coeffs: Vec<Complex64>, mut roots: Vec<Complex64>) -> Result<Self> {
        for i in 0..roots.len() {
            for j in i + 1..roots.len() {
                let d = (roots[i] - roots[j]).norm();
                if d <= ROOT_SEPARATION {
                    return Err(Error::DegenerateCurve(format!(
                        "roots {} and {} are {d:e} apart",
                        roots[i], roots[j]
                    )));
                }
            }
        }
        roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let lead = *coeffs.last().expect("nonempty");
        let genus = (roots.len() - 1) / 2;
        Ok(Self {
            kind: CurveKind::Hyperelliptic(HyperellipticData {
                coeffs,
                roots,
                sqrt_lead: lead.sqrt(),
            }),
            genus,
        })
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn kind(&self) -> &CurveKind {
        &self.kind
    }

    pub fn as_elliptic(&self) -> Option<&EllipticData> {
        match &self.kind {
            CurveKind::Elliptic(e) => Some(e),
            CurveKind::Hyperelliptic(_) => None,
        }
    }

    pub fn as_hyperelliptic(&self) -> Option<&HyperellipticData> {
        match &self.kind {
            CurveKind::Hyperelliptic(h) => Some(h),
            CurveKind::Elliptic(_) => None,
        }
    }

    pub fn spec(&self) -> CurveSpec {
        match &self.kind {
            CurveKind::Elliptic(e) => CurveSpec::Elliptic {
                tau: [e.modulus.tau().re, e.modulus.tau().im],
            },
            CurveKind::Hyperelliptic(h) => CurveSpec::Hyperelliptic {
                coeffs: h.coeffs.iter().map(|c| [c.re, c.im]).collect(),
            },
        }
    }

    /// Point on the torus with flat coordinate `z`.
    pub fn torus_point(&self, z: Complex64) -> Result<SurfacePoint> {
        self.as_elliptic()
            .ok_or_else(|| Error::BadCurve("torus point on a hyperelliptic curve".into()))?;
        Ok(SurfacePoint::Torus(z))
    }

    /// Point `(x, y)`, checked against `y^2 = P(x)`.
    pub fn point(&self, x: Complex64, y: Complex64) -> Result<SurfacePoint> {
        let h = self
            .as_hyperelliptic()
            .ok_or_else(|| Error::BadCurve("affine point on a torus".into()))?;
        let p = h.eval(x);
        if (y * y - p).norm() >= ON_CURVE_TOL * (1.0 + p.norm()) {
            return Err(Error::BadCurve(format!("({x}, {y}) is not on the curve")));
        }
        Ok(SurfacePoint::Affine { x, y })
    }

    /// Point above `x` on the given sheet of the reference branch.
    pub fn point_on_sheet(&self, x: Complex64, sheet: Sheet) -> Result<SurfacePoint> {
        let h = self
            .as_hyperelliptic()
            .ok_or_else(|| Error::BadCurve("affine point on a torus".into()))?;
        Ok(SurfacePoint::Affine {
            x,
            y: h.reference_sqrt(x) * sheet.sign(),
        })
    }

    /// The `k`-th finite branch point (sorted order).
    pub fn branch_point(&self, k: usize) -> Result<SurfacePoint> {
        let h = self
            .as_hyperelliptic()
            .ok_or_else(|| Error::BadCurve("torus has no branch points".into()))?;
        let x = *h
            .roots
            .get(k)
            .ok_or_else(|| Error::BadCurve(format!("no branch point {k}")))?;
        Ok(SurfacePoint::Affine {
            x,
            y: Complex64::new(0.0, 0.0),
        })
    }
}

/// Builds and validates a curve from its description.
pub fn make_curve(spec: &CurveSpec) -> Result<Curve> {
    match spec {
        CurveSpec::Elliptic { tau } => Curve::elliptic(Complex64::new(tau[0], tau[1])),
        CurveSpec::Hyperelliptic { coeffs } => {
            Curve::hyperelliptic(coeffs.iter().map(|c| Complex64::new(c[0], c[1])).collect())
        }
    }
}

impl HyperellipticData {
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Finite branch points sorted by real part, then imaginary part.
    pub fn roots(&self) -> &[Complex64] {
        &self.roots
    }

    pub fn lead(&self) -> Complex64 {
        *self.coeffs.last().expect("nonempty")
    }

    pub fn sqrt_lead(&self) -> Complex64 {
        self.sqrt_lead
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        poly::eval(&self.coeffs, x)
    }

    pub fn min_root_gap(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.roots.len() {
            for j in i + 1..self.roots.len() {
                best = best.min((self.roots[i] - self.roots[j]).norm());
            }
        }
        best
    }

    pub fn distance_to_branch_points(&self, x: Complex64) -> f64 {
        self.roots
            .iter()
            .map(|e| (x - e).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// `sqrt(lead) * prod sqrt(x - e_k)` with principal square roots; positive for real
    /// `x` beyond the rightmost real branch point when the leading coefficient is positive.
    pub fn reference_sqrt(&self, x: Complex64) -> Complex64 {
        self.roots
            .iter()
            .fold(self.sqrt_lead, |acc, e| acc * (x - e).sqrt())
    }

    /// The square root of `P(x)` closest to `anchor`.
    pub fn continue_y(&self, x: Complex64, anchor: Complex64) -> Complex64 {
        let y = self.eval(x).sqrt();
        if (y - anchor).norm() <= (y + anchor).norm() {
            y
        } else {
            -y
        }
    }

    /// Square root of `Q_k(x) = P(x) / (x - e_k)`, continuous near `e_k`.
    pub fn sqrt_cofactor(&self, k: usize, x: Complex64) -> Complex64 {
        let ek = self.roots[k];
        self.roots
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .fold(self.sqrt_lead, |acc, (_, e)| {
                let base = ek - e;
                acc * base.sqrt() * ((x - e) / base).sqrt()
            })
    }

    /// Radius of the disc around `e_k` on which `s = sqrt(x - e_k)` is used as a chart.
    pub fn branch_chart_radius(&self, k: usize) -> f64 {
        let ek = self.roots[k];
        0.5 * self
            .roots
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, e)| (ek - e).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

/// A point of the curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SurfacePoint {
    /// Flat coordinate on the torus, defined modulo the lattice.
    Torus(Complex64),
    /// `(x, y)` with `y^2 = P(x)`; branch points have `y = 0`.
    Affine { x: Complex64, y: Complex64 },
}

impl SurfacePoint {
    pub fn x(&self) -> Complex64 {
        match *self {
            SurfacePoint::Torus(z) => z,
            SurfacePoint::Affine { x, .. } => x,
        }
    }

    pub fn y(&self) -> Option<Complex64> {
        match *self {
            SurfacePoint::Torus(_) => None,
            SurfacePoint::Affine { y, .. } => Some(y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sheet {
    Plus,
    Minus,
}

impl Sheet {
    pub fn sign(self) -> f64 {
        match self {
            Sheet::Plus => 1.0,
            Sheet::Minus => -1.0,
        }
    }
}

/// Local holomorphic coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chart {
    /// `z` on the torus.
    FlatZ,
    /// `x`, away from the branch points.
    AffineX(Sheet),
    /// `w = 1/x`, away from the branch points and from `x = 0`.
    InverseX(Sheet),
    /// `s` with `x = e_k + s^2` and `y = s sqrt(Q_k(x))` near the `k`-th branch point.
    BranchLocal(usize),
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sheet = |s: &Sheet| if *s == Sheet::Plus { '+' } else { '-' };
        match self {
            Chart::FlatZ => write!(f, "flat"),
            Chart::AffineX(s) => write!(f, "affine{}", sheet(s)),
            Chart::InverseX(s) => write!(f, "inverse{}", sheet(s)),
            Chart::BranchLocal(k) => write!(f, "branch{k}"),
        }
    }
}

fn hyper(c: &Curve, ch: Chart) -> Result<&HyperellipticData> {
    c.as_hyperelliptic()
        .ok_or_else(|| Error::ChartDomain(format!("chart {ch} needs a hyperelliptic curve")))
}

fn check_point_kind(c: &Curve, ch: Chart, p: &SurfacePoint) -> Result<()> {
    match (ch, p) {
        (Chart::FlatZ, SurfacePoint::Torus(_)) if c.as_elliptic().is_some() => Ok(()),
        (Chart::FlatZ, _) => Err(Error::ChartDomain("flat chart needs a torus point".into())),
        (_, SurfacePoint::Affine { .. }) => hyper(c, ch).map(|_| ()),
        (_, SurfacePoint::Torus(_)) => Err(Error::ChartDomain(format!(
            "chart {ch} needs an affine point"
        ))),
    }
}

/// Distance (in the `x`-plane, or the `z`-plane on the torus) from `p` to the boundary of
/// the chart's domain. Negative or zero means outside.
pub fn chart_clearance(c: &Curve, ch: Chart, p: &SurfacePoint) -> Result<f64> {
    check_point_kind(c, ch, p)?;
    Ok(match ch {
        Chart::FlatZ => f64::INFINITY,
        Chart::AffineX(_) => hyper(c, ch)?.distance_to_branch_points(p.x()),
        Chart::InverseX(_) => {
            let h = hyper(c, ch)?;
            h.distance_to_branch_points(p.x()).min(p.x().norm())
        }
        Chart::BranchLocal(k) => {
            let h = hyper(c, ch)?;
            if k >= h.roots.len() {
                return Err(Error::ChartDomain(format!("no branch point {k}")));
            }
            h.branch_chart_radius(k) - (p.x() - h.roots[k]).norm()
        }
    })
}

fn check_domain(c: &Curve, ch: Chart, p: &SurfacePoint) -> Result<()> {
    let clearance = chart_clearance(c, ch, p)?;
    let needed = match ch {
        Chart::AffineX(_) | Chart::InverseX(_) => AFFINE_CLEARANCE,
        _ => 0.0,
    };
    if clearance > needed {
        Ok(())
    } else {
        Err(Error::ChartDomain(format!(
            "point {} is outside chart {ch} (clearance {clearance:e})",
            p.x()
        )))
    }
}

/// Chart coordinate of `p`.
pub fn coordinate(c: &Curve, ch: Chart, p: &SurfacePoint) -> Result<Complex64> {
    check_domain(c, ch, p)?;
    Ok(match (ch, *p) {
        (Chart::FlatZ, SurfacePoint::Torus(z)) => z,
        (Chart::AffineX(_), SurfacePoint::Affine { x, .. }) => x,
        (Chart::InverseX(_), SurfacePoint::Affine { x, .. }) => x.inv(),
        (Chart::BranchLocal(k), SurfacePoint::Affine { x, y }) => {
            y / hyper(c, ch)?.sqrt_cofactor(k, x)
        }
        _ => unreachable!("checked by check_point_kind"),
    })
}

/// Point with chart coordinate `coord`, on the sheet named by the chart.
pub fn point_at(c: &Curve, ch: Chart, coord: Complex64) -> Result<SurfacePoint> {
    let p = match ch {
        Chart::FlatZ => c.torus_point(coord)?,
        Chart::AffineX(s) => c.point_on_sheet(coord, s)?,
        Chart::InverseX(s) => c.point_on_sheet(coord.inv(), s)?,
        Chart::BranchLocal(k) => branch_local_point(c, k, coord)?,
    };
    check_domain(c, ch, &p)?;
    Ok(p)
}

/// Point with chart coordinate `coord`, continued from `anchor` (the square root of `P`
/// nearest to the anchor's `y` is taken).
pub fn point_near(
    c: &Curve,
    ch: Chart,
    coord: Complex64,
    anchor: &SurfacePoint,
) -> Result<SurfacePoint> {
    let p = match ch {
        Chart::FlatZ => c.torus_point(coord)?,
        Chart::AffineX(_) | Chart::InverseX(_) => {
            let h = hyper(c, ch)?;
            let x = if matches!(ch, Chart::AffineX(_)) {
                coord
            } else {
                coord.inv()
            };
            let anchor_y = anchor
                .y()
                .ok_or_else(|| Error::ChartDomain("anchor is not an affine point".into()))?;
            SurfacePoint::Affine {
                x,
                y: h.continue_y(x, anchor_y),
            }
        }
        Chart::BranchLocal(k) => branch_local_point(c, k, coord)?,
    };
    check_domain(c, ch, &p)?;
    Ok(p)
}

fn branch_local_point(c: &Curve, k: usize, s: Complex64) -> Result<SurfacePoint> {
    let h = hyper(c, Chart::BranchLocal(k))?;
    if k >= h.roots.len() {
        return Err(Error::ChartDomain(format!("no branch point {k}")));
    }
    let x = h.roots[k] + s * s;
    Ok(SurfacePoint::Affine {
        x,
        y: s * h.sqrt_cofactor(k, x),
    })
}

/// `dx / d(coordinate)` at `p` (hyperelliptic charts only).
pub fn dx_dcoord(c: &Curve, ch: Chart, p: &SurfacePoint) -> Result<Complex64> {
    let z = coordinate(c, ch, p)?;
    Ok(match ch {
        Chart::FlatZ => Complex64::new(1.0, 0.0),
        Chart::AffineX(_) => Complex64::new(1.0, 0.0),
        Chart::InverseX(_) => -(z * z).inv(),
        Chart::BranchLocal(_) => z * 2.0,
    })
}

/// `x(z1) - x(z2)` from two chart coordinates without cancellation (the flat coordinate on
/// the torus).
pub(crate) fn x_difference(ch: Chart, z1: Complex64, z2: Complex64) -> Complex64 {
    match ch {
        Chart::FlatZ | Chart::AffineX(_) => z1 - z2,
        Chart::InverseX(_) => (z2 - z1) / (z1 * z2),
        Chart::BranchLocal(_) => (z1 - z2) * (z1 + z2),
    }
}

/// Coefficient of `dx / y` in the chart: `(dx / d coordinate) / y`, finite at branch points
/// in their local chart.
pub fn dx_over_y(c: &Curve, ch: Chart, p: &SurfacePoint) -> Result<Complex64> {
    check_domain(c, ch, p)?;
    let h = hyper(c, ch)?;
    let (x, y) = (p.x(), p.y().expect("affine point"));
    Ok(match ch {
        Chart::AffineX(_) => y.inv(),
        Chart::InverseX(_) => -(x * x) / y,
        Chart::BranchLocal(k) => Complex64::new(2.0, 0.0) / h.sqrt_cofactor(k, x),
        Chart::FlatZ => unreachable!("rejected by hyper()"),
    })
}

/// Derivative of the transition map `coordinate_to o coordinate_from^{-1}` at `p`.
pub fn chart_derivative(c: &Curve, from: Chart, to: Chart, p: &SurfacePoint) -> Result<Complex64> {
    if from == to {
        check_domain(c, from, p)?;
        return Ok(Complex64::new(1.0, 0.0));
    }
    if matches!(from, Chart::FlatZ) || matches!(to, Chart::FlatZ) {
        return Err(Error::ChartDomain(
            "no transition between the flat chart and hyperelliptic charts".into(),
        ));
    }
    let dfrom = dx_dcoord(c, from, p)?;
    let dto = dx_dcoord(c, to, p)?;
    if dto.norm() == 0.0 {
        return Err(Error::ChartDomain("transition is singular at this point".into()));
    }
    Ok(dfrom / dto)
}

/// A meromorphic one-form given in closed form.
#[derive(Debug, Clone, PartialEq)]
pub enum Differential {
    /// `c dz` on the torus.
    Flat(Complex64),
    /// `n(x) dx / y` with `n` given by ascending coefficients.
    Hyper(Vec<Complex64>),
}

/// `[dz]` on the torus, `[x^{i-1} dx / y]_{i=1..g}` on a hyperelliptic curve.
pub fn holomorphic_basis(c: &Curve) -> Vec<Differential> {
    match c.kind() {
        CurveKind::Elliptic(_) => vec![Differential::Flat(Complex64::new(1.0, 0.0))],
        CurveKind::Hyperelliptic(_) => (0..c.genus())
            .map(|i| {
                let mut n = vec![Complex64::new(0.0, 0.0); i + 1];
                n[i] = Complex64::new(1.0, 0.0);
                Differential::Hyper(n)
            })
            .collect(),
    }
}

/// Chart coefficient `f` with `d = f d(coordinate)` at `p`.
pub fn eval_differential(
    c: &Curve,
    d: &Differential,
    p: &SurfacePoint,
    ch: Chart,
) -> Result<Complex64> {
    match d {
        Differential::Flat(k) => {
            check_domain(c, ch, p)?;
            if ch != Chart::FlatZ {
                return Err(Error::ChartDomain("flat differential needs the flat chart".into()));
            }
            Ok(*k)
        }
        Differential::Hyper(n) => Ok(poly::eval(n, p.x()) * dx_over_y(c, ch, p)?),
    }
}

pub(crate) mod poly {
    use super::*;

    pub fn eval(coeffs: &[Complex64], x: Complex64) -> Complex64 {
        coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
    }

    pub fn eval_with_derivative(coeffs: &[Complex64], x: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in coeffs.iter().rev() {
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp)
    }

    pub fn derivative(coeffs: &[Complex64]) -> Vec<Complex64> {
        coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * k as f64)
            .collect()
    }

    pub fn from_roots(lead: Complex64, roots: &[Complex64]) -> Vec<Complex64> {
        let mut c = vec![lead];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (k, &ck) in c.iter().enumerate() {
                next[k + 1] += ck;
                next[k] -= ck * r;
            }
            c = next;
        }
        c
    }

    fn abs_scale(coeffs: &[Complex64], x: Complex64) -> f64 {
        let r = x.norm();
        coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * r + c.norm())
    }

    /// All roots by Aberth-Ehrlich iteration followed by Newton polishing.
    pub fn roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = coeffs.len() - 1;
        let lead = coeffs[n];
        let radius = 1.0
            + coeffs[..n]
                .iter()
                .map(|c| (c / lead).norm())
                .fold(0.0, f64::max);
        let mut z: Vec<Complex64> = (0..n)
            .map(|k| {
                let angle = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
                Complex64::from_polar(0.5 * radius, angle)
            })
            .collect();
        let mut converged = false;
        for _ in 0..1000 {
            let mut largest = 0.0f64;
            for k in 0..n {
                let (p, dp) = eval_with_derivative(coeffs, z[k]);
                if p.norm() == 0.0 {
                    continue;
                }
                let ratio = p / dp;
                let repulsion: Complex64 = (0..n)
                    .filter(|&j| j != k)
                    .map(|j| (z[k] - z[j]).inv())
                    .sum();
                let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
                if step.re.is_finite() && step.im.is_finite() {
                    z[k] -= step;
                    largest = largest.max(step.norm() / z[k].norm().max(1.0));
                }
            }
            if largest < 1e-15 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::DegenerateCurve(
                "root finder did not converge (clustered roots)".into(),
            ));
        }
        for root in z.iter_mut() {
            for _ in 0..3 {
                let (p, dp) = eval_with_derivative(coeffs, *root);
                if dp.norm() == 0.0 {
                    break;
                }
                let step = p / dp;
                if step.re.is_finite() && step.im.is_finite() {
                    *root -= step;
                }
            }
        }
        let scale = z.iter().map(|r| r.norm()).fold(1.0, f64::max);
        for root in z.iter_mut() {
            if root.im.abs() < 1e-14 * scale {
                root.im = 0.0;
            }
        }
        reject_multiple_roots(coeffs, &z)?;
        Ok(z)
    }

    /// Close pairs of computed roots are tested for a genuine common root of `P` and `P'`.
    fn reject_multiple_roots(coeffs: &[Complex64], z: &[Complex64]) -> Result<()> {
        let dp = derivative(coeffs);
        for i in 0..z.len() {
            for j in i + 1..z.len() {
                let d = (z[i] - z[j]).norm();
                if d > 1e-5 * z[i].norm().max(1.0) {
                    continue;
                }
                let mut c = (z[i] + z[j]) * 0.5;
                for _ in 0..20 {
                    let (q, dq) = eval_with_derivative(&dp, c);
                    if dq.norm() == 0.0 {
                        break;
                    }
                    c -= q / dq;
                }
                let residual = eval(coeffs, c).norm();
                if residual <= 1e-12 * abs_scale(coeffs, c) {
                    return Err(Error::DegenerateCurve(format!(
                        "P has a repeated root near {c}"
                    )));
                }
            }
        }
        Ok(())
    }
}
