//! Homology bases, period integrals and normalised period matrices.
//!
//! On a hyperelliptic curve with sorted branch points `e_1, ..., e_{2g+1}` the building blocks
//! are the lifts `gamma_j` of the segments `[e_j, e_{j+1}]`: out along the segment on one branch
//! of `y` and back on the other. Only the sheet-odd part `S(x) dx / y` of a form contributes, and
//!
//! ```text
//! int_{gamma_j} S dx / y = 2 int_{-1}^{1} S(x(s)) / (i R_j(x(s))) ds / sqrt(1 - s^2)
//! ```
//!
//! where `x(s)` runs over the segment and `y = R_j(x) * i (b - a)/2 * sqrt(1 - s^2)` on it.
//! Consecutive lifts meet once, at their shared branch point; the symplectic basis is
//! assembled from these intersection numbers.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curves::{poly, Curve, CurveKind, Differential, HyperellipticData};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_chebyshev, periodic_trapezoid, QuadResult, QuadratureConfig};

const I: Complex64 = Complex64::new(0.0, 1.0);
const PATH_CLEARANCE: f64 = 1e-3;
const MAX_CONDITION: f64 = 1e12;
const SYMMETRY_TOL: f64 = 1e-8;

/// A one-form that can be integrated over cycles.
pub trait OneForm {
    /// Coefficient of `dz` on the torus.
    fn flat_coefficient(&self, z: Complex64) -> Result<Complex64>;
    /// `S(x)` such that the sheet-odd part of the form is `S(x) dx / y`.
    fn odd_coefficient(&self, x: Complex64) -> Result<Complex64>;
    /// Poles in the flat (torus) or `x` (hyperelliptic) coordinate.
    fn poles(&self) -> Vec<Complex64> {
        Vec::new()
    }
}

impl OneForm for Differential {
    fn flat_coefficient(&self, _z: Complex64) -> Result<Complex64> {
        match self {
            Differential::Flat(c) => Ok(*c),
            Differential::Hyper(_) => Err(Error::BadCurve(
                "hyperelliptic differential on a torus".into(),
            )),
        }
    }

    fn odd_coefficient(&self, x: Complex64) -> Result<Complex64> {
        match self {
            Differential::Hyper(n) => Ok(poly::eval(n, x)),
            Differential::Flat(_) => Err(Error::BadCurve(
                "flat differential on a hyperelliptic curve".into(),
            )),
        }
    }
}

/// Branch-point segment `[start, end]` with a single-valued branch of `y` along it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Complex64,
    pub end: Complex64,
    /// `sqrt(lead) * prod_k sqrt(m - e_k)` over the other branch points, `m` the midpoint.
    scale: Complex64,
    /// `(e_k, m - e_k)` for the other branch points.
    others: Vec<(Complex64, Complex64)>,
}

impl Segment {
    fn new(h: &HyperellipticData, j: usize) -> Self {
        let roots = h.roots();
        let (start, end) = (roots[j], roots[j + 1]);
        let mid = (start + end) * 0.5;
        let mut scale = h.sqrt_lead();
        let mut others = Vec::with_capacity(roots.len() - 2);
        for (k, &e) in roots.iter().enumerate() {
            if k != j && k != j + 1 {
                scale *= (mid - e).sqrt();
                others.push((e, mid - e));
            }
        }
        Self {
            start,
            end,
            scale,
            others,
        }
    }

    /// `R_j(x)`: the square root of `P(x) / ((x - start)(x - end))` continuous on the segment.
    fn sqrt_rest(&self, x: Complex64) -> Complex64 {
        self.others
            .iter()
            .fold(self.scale, |acc, &(e, base)| acc * ((x - e) / base).sqrt())
    }

    fn at(&self, s: f64) -> Complex64 {
        self.start + (self.end - self.start) * (0.5 * (1.0 + s))
    }

    /// Tangent direction of the lift, in the local coordinate `y`, where it leaves `start`.
    fn tangent_at_start(&self) -> Complex64 {
        self.sqrt_rest(self.start) * I * (self.end - self.start)
    }

    /// Tangent direction of the lift, in the local coordinate `y`, where it passes `end`.
    fn tangent_at_end(&self) -> Complex64 {
        -(self.sqrt_rest(self.end) * I * (self.end - self.start))
    }

    pub fn distance_to(&self, x: Complex64) -> f64 {
        distance_to_segment(x, self.start, self.end)
    }
}

fn distance_to_segment(x: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let t = ((x - a) * d.conj()).re / d.norm_sqr();
    let t = t.clamp(0.0, 1.0);
    (x - (a + d * t)).norm()
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    (a.conj() * b).im
}

fn segments_cross(a0: Complex64, a1: Complex64, b0: Complex64, b1: Complex64) -> bool {
    let scale = (a1 - a0).norm() * (b1 - b0).norm();
    let tol = 1e-12 * scale;
    let d1 = cross(a1 - a0, b0 - a0);
    let d2 = cross(a1 - a0, b1 - a0);
    let d3 = cross(b1 - b0, a0 - b0);
    let d4 = cross(b1 - b0, a1 - b0);
    if d1.abs() <= tol && d2.abs() <= tol {
        // Collinear: overlap of the projections onto the common line.
        let dir = a1 - a0;
        let t = |p: Complex64| ((p - a0) * dir.conj()).re / dir.norm_sqr();
        let (lo, hi) = (t(b0).min(t(b1)), t(b0).max(t(b1)));
        return hi >= 0.0 && lo <= 1.0;
    }
    (d1 > tol && d2 < -tol || d1 < -tol && d2 > tol) && (d3 * d4 <= 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CyclePath {
    /// Straight path along the lattice period `period`, based away from poles by half of
    /// `transverse`.
    Torus {
        period: Complex64,
        transverse: Complex64,
    },
    /// Integer combination of collapsed segment lifts.
    Lifted(Vec<(Segment, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    /// `a1, ..., ag, b1, ..., bg`.
    pub label: String,
    pub path: CyclePath,
}

/// Symplectic basis `a_1..a_g, b_1..b_g` with its intersection matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleBasis {
    pub cycles: Vec<Cycle>,
    /// Intersection numbers of the basis, row-major `2g x 2g`.
    pub intersections: Vec<i32>,
}

impl CycleBasis {
    pub fn genus(&self) -> usize {
        self.cycles.len() / 2
    }

    pub fn a(&self, i: usize) -> &Cycle {
        &self.cycles[i]
    }

    pub fn b(&self, i: usize) -> &Cycle {
        &self.cycles[self.genus() + i]
    }

    /// `true` when the intersection matrix is the standard symplectic form.
    pub fn is_symplectic(&self) -> bool {
        let g = self.genus();
        let n = 2 * g;
        (0..n).all(|r| {
            (0..n).all(|c| {
                let expected = if c == r + g && r < g {
                    1
                } else if r == c + g && c < g {
                    -1
                } else {
                    0
                };
                self.intersections[r * n + c] == expected
            })
        })
    }
}

/// Canonical homology basis for the curve.
pub fn cycle_basis(c: &Curve) -> Result<CycleBasis> {
    match c.kind() {
        CurveKind::Elliptic(e) => Ok(CycleBasis {
            cycles: vec![
                Cycle {
                    label: "a1".into(),
                    path: CyclePath::Torus {
                        period: Complex64::new(1.0, 0.0),
                        transverse: e.modulus.tau(),
                    },
                },
                Cycle {
                    label: "b1".into(),
                    path: CyclePath::Torus {
                        period: e.modulus.tau(),
                        transverse: Complex64::new(1.0, 0.0),
                    },
                },
            ],
            intersections: vec![0, 1, -1, 0],
        }),
        CurveKind::Hyperelliptic(h) => hyperelliptic_basis(h, c.genus()),
    }
}

fn validate_chain(h: &HyperellipticData) -> Result<()> {
    let roots = h.roots();
    let gap = h.min_root_gap();
    let n = roots.len();
    for j in 0..n - 1 {
        for (k, &e) in roots.iter().enumerate() {
            if k != j && k != j + 1 && distance_to_segment(e, roots[j], roots[j + 1]) < 1e-3 * gap
            {
                return Err(Error::BadConfiguration(format!(
                    "branch point {e} lies on the segment [{}, {}]",
                    roots[j],
                    roots[j + 1]
                )));
            }
        }
        for i in j + 2..n - 1 {
            if segments_cross(roots[j], roots[j + 1], roots[i], roots[i + 1]) {
                return Err(Error::BadConfiguration(format!(
                    "segments [{}, {}] and [{}, {}] intersect",
                    roots[j],
                    roots[j + 1],
                    roots[i],
                    roots[i + 1]
                )));
            }
        }
    }
    Ok(())
}

fn hyperelliptic_basis(h: &HyperellipticData, g: usize) -> Result<CycleBasis> {
    validate_chain(h)?;
    let n = 2 * g;
    let segments: Vec<Segment> = (0..n).map(|j| Segment::new(h, j)).collect();

    // Intersection numbers of consecutive lifts at their shared branch point.
    let mut gamma = DMatrix::<f64>::zeros(n, n);
    for j in 0..n - 1 {
        let t0 = segments[j].tangent_at_end();
        let t1 = segments[j + 1].tangent_at_start();
        let orientation = cross(t0, t1);
        if orientation.abs() <= 1e-12 * t0.norm() * t1.norm() {
            return Err(Error::BadConfiguration(format!(
                "lifts {j} and {} meet tangentially",
                j + 1
            )));
        }
        let sign = orientation.signum();
        gamma[(j, j + 1)] = sign;
        gamma[(j + 1, j)] = -sign;
    }

    // a_i = alpha_i gamma_{2i}, b_i = sum_{k >= i} beta_k gamma_{2k+1} (zero-based).
    let mut alpha = vec![0.0; g];
    let mut beta = vec![0.0; g];
    beta[0] = 1.0;
    for i in 0..g {
        if i > 0 {
            beta[i] = -beta[i - 1] * gamma[(2 * i, 2 * i - 1)] / gamma[(2 * i, 2 * i + 1)];
        }
        alpha[i] = 1.0 / (beta[i] * gamma[(2 * i, 2 * i + 1)]);
    }
    let mut t = DMatrix::<f64>::zeros(n, n);
    for i in 0..g {
        t[(i, 2 * i)] = alpha[i];
        for k in i..g {
            t[(g + i, 2 * k + 1)] = beta[k];
        }
    }
    let form = &t * &gamma * t.transpose();
    let intersections: Vec<i32> = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .map(|(r, c)| form[(r, c)].round() as i32)
        .collect();

    let mut cycles = Vec::with_capacity(n);
    for r in 0..n {
        let terms: Vec<(Segment, f64)> = (0..n)
            .filter(|&j| t[(r, j)] != 0.0)
            .map(|j| (segments[j].clone(), t[(r, j)]))
            .collect();
        let label = if r < g {
            format!("a{}", r + 1)
        } else {
            format!("b{}", r - g + 1)
        };
        cycles.push(Cycle {
            label,
            path: CyclePath::Lifted(terms),
        });
    }
    let basis = CycleBasis {
        cycles,
        intersections,
    };
    if !basis.is_symplectic() {
        return Err(Error::BadConfiguration(
            "could not assemble a symplectic basis".into(),
        ));
    }
    Ok(basis)
}

/// `int_{cycle} form`.
pub fn integrate_over_cycle<F: OneForm + ?Sized>(
    form: &F,
    cycle: &Cycle,
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    match &cycle.path {
        CyclePath::Torus { period, transverse } => {
            // Half a transverse period away from the pole keeps the path clear of it.
            let start = match form.poles().first() {
                Some(&z) => z + transverse * 0.5,
                None => Complex64::new(0.0, 0.0),
            };
            let r = periodic_trapezoid(|t| form.flat_coefficient(start + period * t), cfg)?;
            Ok(QuadResult {
                value: r.value * period,
                ..r
            })
        }
        CyclePath::Lifted(terms) => {
            let mut value = Complex64::new(0.0, 0.0);
            let mut nodes = 0;
            let mut residual: f64 = 0.0;
            for (seg, coef) in terms {
                let r = segment_integral(form, seg, cfg)?;
                value += r.value * (2.0 * coef);
                nodes += r.nodes;
                residual = residual.max(r.residual);
            }
            Ok(QuadResult {
                value,
                nodes,
                residual,
            })
        }
    }
}

/// `int_{segment} S dx / y_j` taken on the `+y_j` branch only.
fn segment_integral<F: OneForm + ?Sized>(
    form: &F,
    seg: &Segment,
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    for &p in &form.poles() {
        let d = seg.distance_to(p);
        if d < PATH_CLEARANCE {
            return Err(Error::PoleOnPath { distance: d });
        }
    }
    gauss_chebyshev(
        |s| {
            let x = seg.at(s);
            Ok(form.odd_coefficient(x)? / (I * seg.sqrt_rest(x)))
        },
        cfg,
    )
}

/// Convergence record for one period integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodDiagnostic {
    pub cycle: String,
    pub form: usize,
    pub nodes: usize,
    pub residual: f64,
}

/// Period matrices of the holomorphic basis `u_1..u_g` with
/// `pi_a[(i, j)] = int_{a_j} u_i`, `pi_b[(i, j)] = int_{b_j} u_i`,
/// the normalising matrix `N = pi_a^{-1}` (`v = N u` has `int_{a_j} v_i = delta_ij`) and
/// `tau = pi_a^{-1} pi_b`.
#[derive(Debug, Clone)]
pub struct PeriodData {
    pub basis: CycleBasis,
    pub pi_a: DMatrix<Complex64>,
    pub pi_b: DMatrix<Complex64>,
    pub tau: DMatrix<Complex64>,
    pub normalizer: DMatrix<Complex64>,
    pub quadrature: QuadratureConfig,
    pub diagnostics: Vec<PeriodDiagnostic>,
    /// `max |tau - tau^T|` before symmetrisation.
    pub symmetry_residual: f64,
    pub condition: f64,
}

impl PeriodData {
    pub fn genus(&self) -> usize {
        self.tau.nrows()
    }

    pub fn im_tau(&self) -> DMatrix<f64> {
        self.tau.map(|z| z.im)
    }

    /// Values of the normalised basis `v_i = sum_j N_ij u_j` from the values of `u`.
    pub fn normalize(&self, u: &[Complex64]) -> Vec<Complex64> {
        let g = self.genus();
        (0..g)
            .map(|i| (0..g).map(|j| self.normalizer[(i, j)] * u[j]).sum())
            .collect()
    }
}

pub fn period_matrices(c: &Curve) -> Result<PeriodData> {
    period_matrices_with(c, &QuadratureConfig::default())
}

pub fn period_matrices_with(c: &Curve, cfg: &QuadratureConfig) -> Result<PeriodData> {
    let basis = cycle_basis(c)?;
    let forms = crate::curves::holomorphic_basis(c);
    let g = c.genus();
    let mut pi_a = DMatrix::<Complex64>::zeros(g, g);
    let mut pi_b = DMatrix::<Complex64>::zeros(g, g);
    let mut diagnostics = Vec::with_capacity(2 * g * g);
    for (i, form) in forms.iter().enumerate() {
        for (k, cycle) in basis.cycles.iter().enumerate() {
            let r = integrate_over_cycle(form, cycle, cfg)?;
            if k < g {
                pi_a[(i, k)] = r.value;
            } else {
                pi_b[(i, k - g)] = r.value;
            }
            diagnostics.push(PeriodDiagnostic {
                cycle: cycle.label.clone(),
                form: i,
                nodes: r.nodes,
                residual: r.residual,
            });
        }
    }

    let sv = pi_a.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(Error::SingularPiA { condition });
    }
    let normalizer = pi_a
        .clone()
        .try_inverse()
        .ok_or(Error::SingularPiA { condition })?;
    let tau_raw = &normalizer * &pi_b;

    let scale = tau_raw.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let symmetry_residual = (&tau_raw - tau_raw.transpose())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if symmetry_residual > SYMMETRY_TOL * scale {
        return Err(Error::RiemannRelations(format!(
            "period matrix is not symmetric (residual {symmetry_residual:e})"
        )));
    }
    let tau = (&tau_raw + tau_raw.transpose()).map(|z| z * 0.5);
    if tau.map(|z| z.im).cholesky().is_none() {
        return Err(Error::RiemannRelations(
            "imaginary part of the period matrix is not positive definite".into(),
        ));
    }
    Ok(PeriodData {
        basis,
        pi_a,
        pi_b,
        tau,
        normalizer,
        quadrature: *cfg,
        diagnostics,
        symmetry_residual,
        condition,
    })
}

/// A- and B-periods of a closed one-form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodVector {
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
}

impl PeriodVector {
    /// Periods of the normalised holomorphic differential `v_k`.
    pub fn holomorphic(pd: &PeriodData, k: usize) -> Self {
        let g = pd.genus();
        let mut a = vec![Complex64::new(0.0, 0.0); g];
        a[k] = Complex64::new(1.0, 0.0);
        let b = (0..g).map(|i| pd.tau[(k, i)]).collect();
        Self { a, b }
    }

    /// Periods of the complex conjugate form.
    pub fn conj(&self) -> Self {
        Self {
            a: self.a.iter().map(|z| z.conj()).collect(),
            b: self.b.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn genus(&self) -> usize {
        self.a.len()
    }
}

/// `int phi ^ psi = sum_i (A_i(phi) B_i(psi) - B_i(phi) A_i(psi))` for closed forms.
pub fn cup_product(phi: &PeriodVector, psi: &PeriodVector) -> Complex64 {
    phi.a
        .iter()
        .zip(&phi.b)
        .zip(psi.a.iter().zip(&psi.b))
        .map(|((pa, pb), (qa, qb))| pa * qb - pb * qa)
        .sum()
}

/// Result of continuing `y` around a circle in the `x`-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopResult {
    pub integral: Complex64,
    pub end_y: Complex64,
    pub nodes: usize,
}

/// Integrates `n(x) dx / y` around the circle `|x - center| = radius` (counter-clockwise, from
/// `center + radius`), continuing `y` from `start_y`. The integral is only meaningful when the
/// loop closes on the surface, i.e. `end_y == start_y`.
pub fn loop_integral(
    c: &Curve,
    numerator: &[Complex64],
    center: Complex64,
    radius: f64,
    start_y: Complex64,
    nodes: usize,
) -> Result<LoopResult> {
    let h = c
        .as_hyperelliptic()
        .ok_or_else(|| Error::BadCurve("loop integrals need a hyperelliptic curve".into()))?;
    for &e in h.roots() {
        let d = ((e - center).norm() - radius).abs();
        if d < PATH_CLEARANCE {
            return Err(Error::PoleOnPath { distance: d });
        }
    }
    let x0 = center + radius;
    if (start_y * start_y - h.eval(x0)).norm() > 1e-8 * (1.0 + start_y.norm_sqr()) {
        return Err(Error::BadCurve("start point is not on the curve".into()));
    }
    let mut y = start_y;
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..nodes {
        let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / nodes as f64);
        let x = center + w * radius;
        y = h.continue_y(x, y);
        // dx = i (x - center) dtheta
        sum += poly::eval(numerator, x) / y * I * (x - center);
    }
    let end_y = h.continue_y(x0, y);
    Ok(LoopResult {
        integral: sum * (2.0 * std::f64::consts::PI / nodes as f64),
        end_y,
        nodes,
    })
}
