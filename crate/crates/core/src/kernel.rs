//! Symmetric bidifferentials with a double pole on the diagonal.
//!
//! A kernel is a base bidifferential plus a symmetric holomorphic correction
//! `sum_jk M_jk u_j(p) u_k(q)` in the basis `u` returned by [`holomorphic_basis`].
//!
//! * Torus: base `(wp(z - w) + eta1) dz dw`, already a-normalised.
//! * Hyperelliptic: Klein's kernel
//!   `(2 y1 y2 + F(x1, x2)) / (4 (x1 - x2)^2 y1 y2) dx1 dx2` with
//!   `F = sum_{k=0}^{g} x1^k x2^k (2 c_{2k} + c_{2k+1} (x1 + x2))`, `c_i` the coefficients of `P`.
//!
//! [`holomorphic_basis`]: crate::curves::holomorphic_basis

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curves::{
    chart_clearance, coordinate, dx_dcoord, dx_over_y, holomorphic_basis, poly, x_difference,
    Chart, Curve, CurveKind, CurveSpec, HyperellipticData, Sheet, SurfacePoint,
};
use crate::error::{Error, Result};
use crate::periods::{integrate_over_cycle, CyclePath, OneForm, PeriodData, PeriodVector};
use crate::projective::{diagonal_jet, JetConfig};
use crate::special::weierstrass_p;

const SLICE_CLEARANCE: f64 = 1e-2;
const CONTRACT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseKind {
    Weierstrass,
    Klein,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Raw,
    ANormalized,
    HodgeCorrected,
}

#[derive(Debug, Clone)]
pub struct Kernel {
    curve: Curve,
    base: BaseKind,
    correction: DMatrix<Complex64>,
    stage: Stage,
}

impl Kernel {
    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    pub fn base(&self) -> BaseKind {
        self.base
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    /// Coefficients `M_jk` of the holomorphic correction.
    pub fn correction(&self) -> &DMatrix<Complex64> {
        &self.correction
    }

    pub fn dump(&self) -> KernelDump {
        let g = self.correction.nrows();
        KernelDump {
            curve: self.curve.spec(),
            genus: g,
            base: self.base,
            stage: self.stage,
            correction: (0..g)
                .map(|i| {
                    (0..g)
                        .map(|j| {
                            let z = self.correction[(i, j)];
                            [z.re, z.im]
                        })
                        .collect()
                })
                .collect(),
        }
    }

    /// Rebuilds a kernel from its serialised form.
    pub fn from_dump(dump: &KernelDump) -> Result<Self> {
        let curve = crate::make_curve(&dump.curve)?;
        let g = curve.genus();
        if dump.correction.len() != g || dump.correction.iter().any(|r| r.len() != g) {
            return Err(Error::BadCurve("correction matrix has the wrong shape".into()));
        }
        let correction =
            DMatrix::from_fn(g, g, |i, j| Complex64::new(dump.correction[i][j][0], dump.correction[i][j][1]));
        Ok(Self {
            curve,
            base: dump.base,
            correction,
            stage: dump.stage,
        })
    }
}

/// Serialisable description of a kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDump {
    pub curve: CurveSpec,
    pub genus: usize,
    pub base: BaseKind,
    pub stage: Stage,
    /// Row-major `M_jk` as `[re, im]`.
    pub correction: Vec<Vec<[f64; 2]>>,
}

/// Base kernel of the curve, checked against the diagonal contract (biresidue 1, no residue,
/// symmetry) at reference points.
pub fn base_kernel(c: &Curve) -> Result<Kernel> {
    let g = c.genus();
    let (base, stage) = match c.kind() {
        CurveKind::Elliptic(_) => (BaseKind::Weierstrass, Stage::ANormalized),
        CurveKind::Hyperelliptic(_) => (BaseKind::Klein, Stage::Raw),
    };
    let k = Kernel {
        curve: c.clone(),
        base,
        correction: DMatrix::zeros(g, g),
        stage,
    };
    check_contract(&k)?;
    Ok(k)
}

/// Sample points well away from the branch points, on the `+` sheet.
pub(crate) fn reference_points(c: &Curve, count: usize) -> Vec<SurfacePoint> {
    match c.kind() {
        CurveKind::Elliptic(e) => {
            let tau = e.modulus.tau();
            (0..count)
                .map(|s| SurfacePoint::Torus(tau * (0.2 + 0.13 * s as f64) + 0.1 + 0.21 * s as f64))
                .collect()
        }
        CurveKind::Hyperelliptic(h) => {
            let roots = h.roots();
            let center: Complex64 = roots.iter().sum::<Complex64>() / roots.len() as f64;
            let span = roots
                .iter()
                .map(|e| (e - center).norm())
                .fold(0.0, f64::max);
            (0..count)
                .map(|s| {
                    let x = center
                        + Complex64::from_polar(0.6 * span + 0.7, 1.1 + 0.83 * s as f64);
                    SurfacePoint::Affine {
                        x,
                        y: h.reference_sqrt(x),
                    }
                })
                .collect()
        }
    }
}

fn default_chart(c: &Curve) -> Chart {
    match c.kind() {
        CurveKind::Elliptic(_) => Chart::FlatZ,
        CurveKind::Hyperelliptic(_) => Chart::AffineX(Sheet::Plus),
    }
}

fn check_contract(k: &Kernel) -> Result<()> {
    let ch = default_chart(&k.curve);
    let pts = reference_points(&k.curve, 2);
    for p in &pts {
        let jet = diagonal_jet(k, ch, p, &JetConfig::default())?;
        if (jet.biresidue - 1.0).norm() > CONTRACT_TOL || jet.residue_term.norm() > CONTRACT_TOL {
            return Err(Error::ContractViolation(format!(
                "biresidue {} and residue term {} at {}",
                jet.biresidue,
                jet.residue_term,
                p.x()
            )));
        }
    }
    let a = eval_kernel(k, &pts[0], &pts[1], ch)?;
    let b = eval_kernel(k, &pts[1], &pts[0], ch)?;
    if (a - b).norm() > 1e-12 * (1.0 + a.norm()) {
        return Err(Error::ContractViolation(format!(
            "kernel is not symmetric: {a} vs {b}"
        )));
    }
    Ok(())
}

fn klein_f(h: &HyperellipticData, g: usize, x1: Complex64, x2: Complex64) -> Complex64 {
    let c = h.coeffs();
    let zero = Complex64::new(0.0, 0.0);
    let prod = x1 * x2;
    let mut power = Complex64::new(1.0, 0.0);
    let mut f = zero;
    for k in 0..=g {
        let even = c.get(2 * k).copied().unwrap_or(zero);
        let odd = c.get(2 * k + 1).copied().unwrap_or(zero);
        f += power * (even * 2.0 + odd * (x1 + x2));
        power *= prod;
    }
    f
}

fn same_point(p: &SurfacePoint, q: &SurfacePoint) -> bool {
    match (p, q) {
        (SurfacePoint::Torus(a), SurfacePoint::Torus(b)) => a == b,
        (SurfacePoint::Affine { x: x1, y: y1 }, SurfacePoint::Affine { x: x2, y: y2 }) => {
            x1 == x2 && (y1 - y2).norm() <= (y1 + y2).norm()
        }
        _ => false,
    }
}

/// Coefficient of `d zeta_1 d zeta_2` with both points expressed in `ch`.
pub fn eval_kernel(k: &Kernel, p: &SurfacePoint, q: &SurfacePoint, ch: Chart) -> Result<Complex64> {
    eval_kernel_charts(k, p, ch, q, ch)
}

/// Coefficient of `d zeta_1 d zeta_2` with `p` in chart `ch1` and `q` in chart `ch2`.
pub fn eval_kernel_charts(
    k: &Kernel,
    p: &SurfacePoint,
    ch1: Chart,
    q: &SurfacePoint,
    ch2: Chart,
) -> Result<Complex64> {
    if same_point(p, q) {
        return Err(Error::DiagonalPole);
    }
    coordinate(&k.curve, ch1, p)?;
    coordinate(&k.curve, ch2, q)?;
    evaluate(k, p, ch1, q, ch2, p.x() - q.x())
}

/// Like [`eval_kernel`], with `x(p) - x(q)` (or `z - w`) recomputed from the chart coordinates
/// `z1`, `z2` of the two points; used close to the diagonal, where subtracting the stored
/// coordinates would lose most digits.
pub(crate) fn eval_kernel_near(
    k: &Kernel,
    ch: Chart,
    p: &SurfacePoint,
    z1: Complex64,
    q: &SurfacePoint,
    z2: Complex64,
) -> Result<Complex64> {
    if z1 == z2 {
        return Err(Error::DiagonalPole);
    }
    evaluate(k, p, ch, q, ch, x_difference(ch, z1, z2))
}

fn evaluate(
    k: &Kernel,
    p: &SurfacePoint,
    ch1: Chart,
    q: &SurfacePoint,
    ch2: Chart,
    t: Complex64,
) -> Result<Complex64> {
    match k.curve.kind() {
        CurveKind::Elliptic(e) => {
            let wp = weierstrass_p(t, &e.modulus).map_err(|err| match err {
                Error::Pole { .. } => Error::DiagonalPole,
                other => other,
            })?;
            Ok(wp + e.quasi.eta1 + k.correction[(0, 0)])
        }
        CurveKind::Hyperelliptic(h) => {
            let (x1, x2) = (p.x(), q.x());
            if t.norm() == 0.0 {
                return Err(Error::ChartDomain(
                    "points over the same x on opposite sheets".into(),
                ));
            }
            let g = k.curve.genus();
            let even = (t * t * 2.0).inv();
            let mut odd = klein_f(h, g, x1, x2) / (t * t * 4.0);
            let w1 = dx_over_y(&k.curve, ch1, p)?;
            let w2 = dx_over_y(&k.curve, ch2, q)?;
            let mut powers2 = vec![Complex64::new(1.0, 0.0); g];
            for j in 1..g {
                powers2[j] = powers2[j - 1] * x2;
            }
            let mut p1 = Complex64::new(1.0, 0.0);
            for j in 0..g {
                let row: Complex64 = (0..g).map(|l| k.correction[(j, l)] * powers2[l]).sum();
                odd += p1 * row;
                p1 *= x1;
            }
            let d1 = dx_dcoord(&k.curve, ch1, p)?;
            let d2 = dx_dcoord(&k.curve, ch2, q)?;
            Ok(even * d1 * d2 + odd * w1 * w2)
        }
    }
}

/// Values of the basis `u_j` at `p` in chart `ch`.
pub fn basis_values(c: &Curve, p: &SurfacePoint, ch: Chart) -> Result<Vec<Complex64>> {
    holomorphic_basis(c)
        .iter()
        .map(|d| crate::curves::eval_differential(c, d, p, ch))
        .collect()
}

/// The one-form `q -> K(p, q)`, with the first slot in the default chart at `p`
/// (flat `z` on the torus, `x` on a hyperelliptic curve).
pub struct Slice<'a> {
    kernel: &'a Kernel,
    base: SurfacePoint,
}

impl<'a> Slice<'a> {
    pub fn new(kernel: &'a Kernel, base: SurfacePoint) -> Result<Self> {
        coordinate(&kernel.curve, default_chart(&kernel.curve), &base)?;
        Ok(Self { kernel, base })
    }
}

impl OneForm for Slice<'_> {
    fn flat_coefficient(&self, w: Complex64) -> Result<Complex64> {
        let e = self
            .kernel
            .curve
            .as_elliptic()
            .ok_or_else(|| Error::BadCurve("flat slice on a hyperelliptic curve".into()))?;
        let z = self.base.x();
        Ok(weierstrass_p(z - w, &e.modulus)? + e.quasi.eta1 + self.kernel.correction[(0, 0)])
    }

    fn odd_coefficient(&self, x2: Complex64) -> Result<Complex64> {
        let h = self
            .kernel
            .curve
            .as_hyperelliptic()
            .ok_or_else(|| Error::BadCurve("hyperelliptic slice on a torus".into()))?;
        let g = self.kernel.curve.genus();
        let (x1, y1) = (self.base.x(), self.base.y().expect("affine base point"));
        let t = x1 - x2;
        let mut s = klein_f(h, g, x1, x2) / (t * t * 4.0);
        let mut p1 = Complex64::new(1.0, 0.0);
        for j in 0..g {
            let row = poly::eval(
                &(0..g).map(|l| self.kernel.correction[(j, l)]).collect::<Vec<_>>(),
                x2,
            );
            s += p1 * row;
            p1 *= x1;
        }
        Ok(s / y1)
    }

    fn poles(&self) -> Vec<Complex64> {
        vec![self.base.x()]
    }
}

/// A- and B-periods of the slice `K(p, .)`; `p` must keep a distance of `1e-2` from the cycles.
pub fn slice_periods(k: &Kernel, p: &SurfacePoint, pd: &PeriodData) -> Result<PeriodVector> {
    for cycle in &pd.basis.cycles {
        if let CyclePath::Lifted(terms) = &cycle.path {
            for (seg, _) in terms {
                let d = seg.distance_to(p.x());
                if d < SLICE_CLEARANCE {
                    return Err(Error::PoleOnPath { distance: d });
                }
            }
        }
    }
    let slice = Slice::new(k, *p)?;
    let g = pd.genus();
    let mut a = Vec::with_capacity(g);
    let mut b = Vec::with_capacity(g);
    for i in 0..g {
        a.push(integrate_over_cycle(&slice, pd.basis.a(i), &pd.quadrature)?.value);
        b.push(integrate_over_cycle(&slice, pd.basis.b(i), &pd.quadrature)?.value);
    }
    Ok(PeriodVector { a, b })
}

/// Adds the holomorphic correction that kills all A-periods of the slices.
pub fn a_normalize(k: &Kernel, pd: &PeriodData) -> Result<Kernel> {
    match k.stage {
        Stage::ANormalized => return Ok(k.clone()),
        Stage::HodgeCorrected => {
            return Err(Error::ContractViolation(
                "kernel is already Hodge corrected".into(),
            ))
        }
        Stage::Raw => {}
    }
    let g = pd.genus();
    let ch = default_chart(&k.curve);
    let pts = reference_points(&k.curve, g);
    // A-periods of slices are holomorphic in the base point: A(p)_l = sum_j u_j(p) G_jl.
    let mut u = DMatrix::<Complex64>::zeros(g, g);
    let mut a = DMatrix::<Complex64>::zeros(g, g);
    for (s, p) in pts.iter().enumerate() {
        let vals = basis_values(&k.curve, p, ch)?;
        let pv = slice_periods(k, p, pd)?;
        for j in 0..g {
            u[(s, j)] = vals[j];
            a[(s, j)] = pv.a[j];
        }
    }
    let gmat = u
        .lu()
        .solve(&a)
        .ok_or_else(|| Error::ContractViolation("sample points are degenerate".into()))?;
    let delta = -(gmat * &pd.normalizer);
    let scale = delta.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let asym = (&delta - delta.transpose())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        / scale;
    if asym > 1e-6 {
        return Err(Error::AsymmetricSolution(asym));
    }
    let delta = (&delta + delta.transpose()).map(|z| z * 0.5);
    Ok(Kernel {
        correction: &k.correction + delta,
        stage: Stage::ANormalized,
        ..k.clone()
    })
}

/// `M -> M - pi N^T (Im tau)^{-1} N`: subtracts `pi sum (Im tau)^{-1}_ij v_i v_j`.
pub fn hodge_correct(k: &Kernel, pd: &PeriodData) -> Result<Kernel> {
    if k.stage != Stage::ANormalized {
        return Err(Error::ContractViolation(
            "Hodge correction needs an a-normalised kernel".into(),
        ));
    }
    let y_inv = pd
        .im_tau()
        .cholesky()
        .ok_or(Error::SingularImTau)?
        .inverse()
        .map(|v| Complex64::new(v, 0.0));
    let n = &pd.normalizer;
    let shift = n.transpose() * y_inv * n * Complex64::new(PI, 0.0);
    Ok(Kernel {
        correction: &k.correction - shift,
        stage: Stage::HodgeCorrected,
        ..k.clone()
    })
}

/// Full pipeline: base kernel, a-normalisation and Hodge correction.
pub fn intrinsic_kernel(c: &Curve, pd: &PeriodData) -> Result<Kernel> {
    let base = base_kernel(c)?;
    let normalized = a_normalize(&base, pd)?;
    hodge_correct(&normalized, pd)
}

/// `O = B - conj(tau) A` for the periods of a slice; zero exactly when the slice is
/// orthogonal to every antiholomorphic form.
pub fn obstruction(pv: &PeriodVector, pd: &PeriodData) -> Vec<Complex64> {
    let g = pd.genus();
    (0..g)
        .map(|i| pv.b[i] - (0..g).map(|j| pd.tau[(i, j)].conj() * pv.a[j]).sum::<Complex64>())
        .collect()
}

/// Kernel with the correction increased by the symmetric matrix `m`.
pub fn perturb(k: &Kernel, m: &DMatrix<Complex64>) -> Result<Kernel> {
    let g = k.correction.nrows();
    if m.nrows() != g || m.ncols() != g {
        return Err(Error::BadCurve(format!("perturbation must be {g}x{g}")));
    }
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let asym = (m - m.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if asym > 1e-12 * scale {
        return Err(Error::AsymmetricInput(asym));
    }
    Ok(Kernel {
        correction: &k.correction + m,
        ..k.clone()
    })
}

/// `2 pi i v_k(p)` and friends: the predicted B-periods of the a-normalised slice at `p`.
pub fn normalized_values(k: &Kernel, p: &SurfacePoint, pd: &PeriodData) -> Result<Vec<Complex64>> {
    let u = basis_values(&k.curve, p, default_chart(&k.curve))?;
    Ok(pd.normalize(&u))
}

/// Clearance of `p` from everything a slice integral needs to avoid.
pub fn slice_clearance(k: &Kernel, p: &SurfacePoint, pd: &PeriodData) -> Result<f64> {
    let mut d = chart_clearance(&k.curve, default_chart(&k.curve), p)?;
    for cycle in &pd.basis.cycles {
        if let CyclePath::Lifted(terms) = &cycle.path {
            for (seg, _) in terms {
                d = d.min(seg.distance_to(p.x()));
            }
        }
    }
    Ok(d)
}

/// Linear response of slice obstructions to symmetric perturbations of the correction.
#[derive(Debug, Clone)]
pub struct ObstructionResponse {
    /// Row `s`: component `s mod g` of the obstruction at probe point `s`; column: the
    /// symmetric unit perturbation `E_ab + E_ba` (`a <= b`).
    pub matrix: DMatrix<Complex64>,
    pub singular_values: Vec<f64>,
    /// Largest entry of the matrix.
    pub scale: f64,
    /// Obstruction components of the unperturbed kernel, in row order.
    pub base: Vec<Complex64>,
    genus: usize,
}

impl ObstructionResponse {
    pub fn smallest_singular_value(&self) -> f64 {
        self.singular_values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn condition(&self) -> f64 {
        let max = self.singular_values.iter().copied().fold(0.0, f64::max);
        max / self.smallest_singular_value()
    }

    /// The symmetric correction that cancels the sampled obstruction. It vanishes for the
    /// unique pure kernel.
    pub fn restoring_correction(&self) -> Result<DMatrix<Complex64>> {
        let rhs = DMatrix::from_iterator(self.base.len(), 1, self.base.iter().map(|z| -z));
        let m = self
            .matrix
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::ContractViolation("obstruction response is singular".into()))?;
        let g = self.genus;
        let mut out = DMatrix::zeros(g, g);
        let mut col = 0;
        for a in 0..g {
            for b in a..g {
                out[(a, b)] = m[col];
                out[(b, a)] = m[col];
                col += 1;
            }
        }
        Ok(out)
    }
}

/// Obstruction response at `g(g+1)/2` probe points. Trivial kernel of this map means no
/// symmetric correction can be added to `k` without breaking the pure type.
pub fn obstruction_response(
    k: &Kernel,
    pd: &PeriodData,
    points: &[SurfacePoint],
) -> Result<ObstructionResponse> {
    let g = pd.genus();
    let n = g * (g + 1) / 2;
    if points.len() != n {
        return Err(Error::BadCurve(format!(
            "need {n} probe points, got {}",
            points.len()
        )));
    }
    let base: Vec<Vec<Complex64>> = points
        .iter()
        .map(|p| Ok(obstruction(&slice_periods(k, p, pd)?, pd)))
        .collect::<Result<_>>()?;
    let mut matrix = DMatrix::<Complex64>::zeros(n, n);
    let rows: Vec<Complex64> = (0..n).map(|s| base[s][s % g]).collect();
    let mut col = 0;
    for a in 0..g {
        for b in a..g {
            let mut e = DMatrix::<Complex64>::zeros(g, g);
            e[(a, b)] = Complex64::new(1.0, 0.0);
            e[(b, a)] = Complex64::new(1.0, 0.0);
            let kp = perturb(k, &e)?;
            for (s, p) in points.iter().enumerate() {
                let i = s % g;
                let o = obstruction(&slice_periods(&kp, p, pd)?, pd);
                matrix[(s, col)] = o[i] - rows[s];
            }
            col += 1;
        }
    }
    let scale = matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let singular_values = matrix.clone().svd(false, false).singular_values.iter().copied().collect();
    Ok(ObstructionResponse {
        matrix,
        singular_values,
        scale,
        base: rows,
        genus: g,
    })
}

/// Cauchy-Riemann residual `|d/d conj(z) K(., q)| / |K|` at `p` in chart `ch`, from the
/// four-point stencil `z + h {1, -1, i, -i}`.
pub fn holomorphy_residual(
    k: &Kernel,
    p: &SurfacePoint,
    q: &SurfacePoint,
    ch: Chart,
    h: f64,
) -> Result<f64> {
    let c = &k.curve;
    let z = coordinate(c, ch, p)?;
    let f = |dz: Complex64| -> Result<Complex64> {
        let pt = crate::curves::point_near(c, ch, z + dz, p)?;
        eval_kernel(k, &pt, q, ch)
    };
    let i = Complex64::new(0.0, 1.0);
    let dbar = ((f(Complex64::new(h, 0.0))? - f(Complex64::new(-h, 0.0))?)
        + i * (f(i * h)? - f(-i * h)?))
        / (4.0 * h);
    let center = eval_kernel(k, p, q, ch)?;
    Ok(dbar.norm() / center.norm().max(1.0))
}
