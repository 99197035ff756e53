//! Genus-one special functions on the lattice `Z + tau Z`.
//!
//! Everything is built on the odd Jacobi theta function
//!
//! ```text
//! theta1(z) = 2 sum_{n>=0} (-1)^n q^{(n+1/2)^2} sin((2n+1) pi z),   q = exp(i pi tau)
//! ```
//!
//! with `wp(z) = -(log theta1)''(z) + theta1'''(0) / (3 theta1'(0))` and the quasi-period
//! convention `eta1 = zeta(z+1) - zeta(z)`, `eta2 = zeta(z+tau) - zeta(z)`, so that the
//! Legendre relation reads `eta1 tau - eta2 = 2 pi i`.
//!
//! Before any lattice-invariant quantity is evaluated the modulus is moved into the standard
//! fundamental domain and the argument into the centred period cell; the results are mapped
//! back with the weight of the corresponding `SL(2, Z)` element.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);
const SERIES_REL_TOL: f64 = 1e-17;
const MAX_SERIES_TERMS: usize = 4000;
const POLE_DISTANCE: f64 = 1e-12;

/// Period ratio of the lattice `Z + tau Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Modulus {
    tau: Complex64,
}

impl Modulus {
    pub fn new(tau: Complex64) -> Result<Self> {
        if !(tau.im > 0.0) || !tau.re.is_finite() || !tau.im.is_finite() {
            return Err(Error::BadModulus {
                re: tau.re,
                im: tau.im,
            });
        }
        Ok(Self { tau })
    }

    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    /// Moves `tau` into `|Re tau| <= 1/2, |tau| >= 1`.
    pub(crate) fn reduce(&self) -> Reduction {
        let (mut a, mut b, mut c, mut d) = (1i64, 0i64, 0i64, 1i64);
        let mut t = self.tau;
        for _ in 0..200 {
            let n = t.re.round();
            if n != 0.0 {
                t.re -= n;
                let n = n as i64;
                a -= n * c;
                b -= n * d;
            }
            if t.norm_sqr() < 1.0 - 1e-14 {
                t = -t.inv();
                (a, b, c, d) = (-c, -d, a, b);
            } else {
                break;
            }
        }
        Reduction {
            reduced: t,
            a: a as f64,
            b: b as f64,
            c: c as f64,
            d: d as f64,
            scale: self.tau * c as f64 + d as f64,
        }
    }
}

/// `reduced = (a tau + b) / (c tau + d)`; the original lattice is `scale` times the reduced one.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Reduction {
    pub reduced: Complex64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub scale: Complex64,
}

/// Increments of the Weierstrass zeta function over the periods `1` and `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiPeriods {
    pub eta1: Complex64,
    pub eta2: Complex64,
}

impl QuasiPeriods {
    /// `|eta1 tau - eta2 - 2 pi i|`.
    pub fn legendre_residual(&self, m: &Modulus) -> f64 {
        (self.eta1 * m.tau() - self.eta2 - 2.0 * PI * I).norm()
    }
}

/// `[theta1, theta1', theta1'', theta1''']` at `z` by direct summation of the q-series.
pub fn theta1_derivatives(z: Complex64, m: &Modulus) -> Result<[Complex64; 4]> {
    let tau = m.tau();
    if !(tau.im > 0.0) {
        return Err(Error::SeriesDivergence { terms: 0 });
    }
    let abs_q = (-PI * tau.im).exp();
    let growth = (2.0 * PI * z.im.abs()).exp();
    let mut acc = [Complex64::new(0.0, 0.0); 4];
    for n in 0..MAX_SERIES_TERMS {
        let nf = n as f64;
        let k = 2.0 * nf + 1.0;
        let weight = (I * PI * tau * (nf + 0.5) * (nf + 0.5)).exp() * 2.0;
        let weight = if n % 2 == 0 { weight } else { -weight };
        let arg = z * (k * PI);
        let (s, c) = (arg.sin(), arg.cos());
        let kp = k * PI;
        acc[0] += weight * s;
        acc[1] += weight * c * kp;
        acc[2] -= weight * s * (kp * kp);
        acc[3] -= weight * c * (kp * kp * kp);

        // Size of the next term relative to the leading one, derivative factors included.
        let next = nf + 1.0;
        let bound = abs_q.powf((next + 0.5) * (next + 0.5) - 0.25)
            * growth.powf(next)
            * (2.0 * next + 1.0).powi(3);
        if bound < SERIES_REL_TOL {
            return Ok(acc);
        }
    }
    Err(Error::SeriesDivergence {
        terms: MAX_SERIES_TERMS,
    })
}

/// Odd Jacobi theta function `theta1(z | tau)`.
pub fn theta1(z: Complex64, m: &Modulus) -> Result<Complex64> {
    // theta1(z + 1) = -theta1(z) keeps the sine arguments small.
    let shift = z.re.round();
    let value = theta1_derivatives(z - shift, m)?[0];
    Ok(if (shift as i64) % 2 == 0 { value } else { -value })
}

/// `theta1'''(0) / theta1'(0)` on the given (ideally reduced) modulus.
fn theta_ratio_at_zero(m: &Modulus) -> Result<Complex64> {
    let d = theta1_derivatives(Complex64::new(0.0, 0.0), m)?;
    Ok(d[3] / d[1])
}

/// Splits `z = w + p + q tau` with `w` in the centred period cell.
fn reduce_argument(z: Complex64, tau: Complex64) -> (Complex64, f64, f64) {
    let q = (z.im / tau.im).round();
    let w = z - tau * q;
    let p = w.re.round();
    (w - p, p, q)
}

fn distance_to_lattice(w: Complex64, tau: Complex64) -> f64 {
    let mut best = f64::INFINITY;
    for p in -1..=1 {
        for q in -1..=1 {
            let d = (w - tau * q as f64 - p as f64).norm();
            best = best.min(d);
        }
    }
    best
}

struct ReducedQuasi {
    eta1: Complex64,
    eta2: Complex64,
}

fn reduced_quasi_periods(red: &Reduction) -> Result<ReducedQuasi> {
    let m = Modulus::new(red.reduced)?;
    let eta1 = -theta_ratio_at_zero(&m)? / 3.0;
    // eta2 = 2 zeta(tau/2) = 2 theta1'/theta1 (tau/2) + eta1 tau.
    let half = red.reduced * 0.5;
    let d = theta1_derivatives(half, &m)?;
    let eta2 = d[1] / d[0] * 2.0 + eta1 * red.reduced;
    Ok(ReducedQuasi { eta1, eta2 })
}

/// Quasi-periods of the Weierstrass zeta function for `Z + tau Z`.
pub fn quasi_periods(m: &Modulus) -> Result<QuasiPeriods> {
    let red = m.reduce();
    let rq = reduced_quasi_periods(&red)?;
    // The generator 1 of the original lattice is scale * (a - c tau'), and tau is
    // scale * (d tau' - b).
    let eta1 = (rq.eta1 * red.a - rq.eta2 * red.c) / red.scale;
    let eta2 = (rq.eta2 * red.d - rq.eta1 * red.b) / red.scale;
    Ok(QuasiPeriods { eta1, eta2 })
}

/// Weierstrass `wp(z)` for the lattice `Z + tau Z`.
pub fn weierstrass_p(z: Complex64, m: &Modulus) -> Result<Complex64> {
    let red = m.reduce();
    let rm = Modulus::new(red.reduced)?;
    let zr = z / red.scale;
    let (w, _, _) = reduce_argument(zr, red.reduced);
    let dist = distance_to_lattice(w, red.reduced) * red.scale.norm();
    if dist < POLE_DISTANCE {
        return Err(Error::Pole { distance: dist });
    }
    let d = theta1_derivatives(w, &rm)?;
    let log_deriv = d[1] / d[0];
    let second = d[2] / d[0] - log_deriv * log_deriv;
    let constant = theta_ratio_at_zero(&rm)? / 3.0;
    let value = -second + constant;
    Ok(value / (red.scale * red.scale))
}

/// Weierstrass `zeta(z)` for the lattice `Z + tau Z`, normalised to be odd.
pub fn weierstrass_zeta(z: Complex64, m: &Modulus) -> Result<Complex64> {
    let red = m.reduce();
    let rm = Modulus::new(red.reduced)?;
    let rq = reduced_quasi_periods(&red)?;
    let zr = z / red.scale;
    let (w, p, q) = reduce_argument(zr, red.reduced);
    let dist = distance_to_lattice(w, red.reduced) * red.scale.norm();
    if dist < POLE_DISTANCE {
        return Err(Error::Pole { distance: dist });
    }
    let d = theta1_derivatives(w, &rm)?;
    let zeta_w = d[1] / d[0] + rq.eta1 * w;
    let zeta_r = zeta_w + rq.eta1 * p + rq.eta2 * q;
    Ok(zeta_r / red.scale)
}

/// Independent evaluation of `wp(z)` by summing
/// `1/z^2 + sum' [1/(z-w)^2 - 1/w^2]` over the square shells `max(|m|,|n|) <= shells`.
///
/// The truncation error of symmetric shells expands in powers `N^-2, N^-3, ...`; partial sums
/// recorded at five shell counts are extrapolated to `N -> infinity` by an exact polynomial fit
/// in `1/N` with the constant and `N^-2 .. N^-5` terms.
pub fn lattice_sum_oracle(z: Complex64, m: &Modulus, shells: usize) -> Result<Complex64> {
    if shells < 50 {
        return Err(Error::BadConfiguration(format!(
            "lattice sum needs at least 50 shells, got {shells}"
        )));
    }
    let tau = m.tau();
    let dist = distance_to_lattice(reduce_argument(z, tau).0, tau);
    if dist < POLE_DISTANCE {
        return Err(Error::Pole { distance: dist });
    }
    let marks: Vec<usize> = [10, 9, 8, 7, 6]
        .iter()
        .map(|&f| shells * f / 10)
        .collect();
    let mut partial = vec![Complex64::new(0.0, 0.0); marks.len()];

    let term = |mm: i64, nn: i64| -> Complex64 {
        let w = tau * nn as f64 + mm as f64;
        let zw = z - w;
        (zw * zw).inv() - (w * w).inv()
    };

    let mut sum = (z * z).inv();
    for k in 1..=shells as i64 {
        let mut shell = Complex64::new(0.0, 0.0);
        // Each edge of the square shell takes one corner.
        for t in -k..k {
            shell += term(k, t);
            shell += term(-k, -t);
            shell += term(-t, k);
            shell += term(t, -k);
        }
        sum += shell;
        for (slot, &mark) in partial.iter_mut().zip(&marks) {
            if mark == k as usize {
                *slot = sum;
            }
        }
    }

    let powers = [0, 2, 3, 4, 5];
    let n = marks.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (row, &mark) in marks.iter().enumerate() {
        let h = shells as f64 / mark as f64; // scaled 1/N keeps the system well conditioned
        for (col, &p) in powers.iter().enumerate() {
            a[(row, col)] = h.powi(p);
        }
    }
    let lu = a.lu();
    let re = DVector::from_iterator(n, partial.iter().map(|c| c.re));
    let im = DVector::from_iterator(n, partial.iter().map(|c| c.im));
    let (Some(sr), Some(si)) = (lu.solve(&re), lu.solve(&im)) else {
        return Err(Error::NoConvergence {
            nodes: shells,
            residual: f64::NAN,
        });
    };
    Ok(Complex64::new(sr[0], si[0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn theta1_is_odd() {
        let m = Modulus::new(c(0.0, 1.0)).unwrap();
        assert!(theta1(c(0.0, 0.0), &m).unwrap().norm() < 1e-300);
        let z = c(0.3, 0.1);
        let s = theta1(z, &m).unwrap() + theta1(-z, &m).unwrap();
        assert!(s.norm() < 1e-15);
    }

    #[test]
    fn theta1_matches_long_summation() {
        let m = Modulus::new(c(0.0, 1.0)).unwrap();
        let z = c(0.25, 0.0);
        let mut direct = c(0.0, 0.0);
        for n in 0..500 {
            let nf = n as f64 + 0.5;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            direct += (I * PI * m.tau() * nf * nf).exp()
                * sign
                * 2.0
                * (z * ((2 * n + 1) as f64 * PI)).sin();
        }
        assert!((theta1(z, &m).unwrap() - direct).norm() < 1e-12);
    }

    #[test]
    fn modulus_rejects_lower_half_plane() {
        assert!(matches!(
            Modulus::new(c(0.2, -1.0)),
            Err(Error::BadModulus { .. })
        ));
        assert!(Modulus::new(c(0.2, 0.0)).is_err());
    }

    #[test]
    fn reduction_lands_in_fundamental_domain() {
        for tau in [c(3.7, 0.05), c(-0.49, 0.3), c(0.1, 0.9), c(12.3, 2.0)] {
            let m = Modulus::new(tau).unwrap();
            let r = m.reduce();
            assert!(r.reduced.re.abs() <= 0.5 + 1e-12);
            assert!(r.reduced.norm() >= 1.0 - 1e-12);
            let back = (tau * r.a + r.b) / (tau * r.c + r.d);
            assert!((back - r.reduced).norm() < 1e-9);
            assert!((r.a * r.d - r.b * r.c - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn wp_is_even_with_double_pole() {
        let m = Modulus::new(c(0.3, 1.2)).unwrap();
        let z = c(0.2, 0.3);
        let d = weierstrass_p(z, &m).unwrap() - weierstrass_p(-z, &m).unwrap();
        assert!(d.norm() < 1e-12);

        let m = Modulus::new(c(0.0, 1.0)).unwrap();
        // z^2 wp(z) = 1 + O(z^4) at the square lattice (g2 term only).
        let vals: Vec<f64> = (2..=4)
            .map(|k| {
                let z = c(10f64.powi(-k), 0.0);
                (z * z * weierstrass_p(z, &m).unwrap()).re
            })
            .collect();
        for v in &vals {
            assert!((v - 1.0).abs() < 1e-6);
        }
        assert!((vals[2] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn wp_pole_is_reported() {
        let m = Modulus::new(c(0.0, 1.0)).unwrap();
        assert!(matches!(
            weierstrass_p(c(1.0, 1.0), &m),
            Err(Error::Pole { .. })
        ));
        assert!(matches!(
            lattice_sum_oracle(c(0.0, 0.0), &m, 50),
            Err(Error::Pole { .. })
        ));
    }

    #[test]
    fn quasi_periods_of_square_lattice() {
        let m = Modulus::new(c(0.0, 1.0)).unwrap();
        let q = quasi_periods(&m).unwrap();
        assert!((q.eta1 - c(PI, 0.0)).norm() < 1e-10);
        assert!(q.legendre_residual(&m) < 1e-10);
        let shifted = quasi_periods(&Modulus::new(c(1.0, 1.0)).unwrap()).unwrap();
        assert!((shifted.eta1 - q.eta1).norm() < 1e-10);
    }

    #[test]
    fn quasi_periods_match_zeta_increments() {
        let m = Modulus::new(c(0.3, 1.2)).unwrap();
        let q = quasi_periods(&m).unwrap();
        let z = c(0.17, 0.21);
        let z0 = weierstrass_zeta(z, &m).unwrap();
        let d1 = weierstrass_zeta(z + 1.0, &m).unwrap() - z0;
        let d2 = weierstrass_zeta(z + m.tau(), &m).unwrap() - z0;
        assert!((d1 - q.eta1).norm() < 1e-10);
        assert!((d2 - q.eta2).norm() < 1e-10);
        assert!(q.legendre_residual(&m) < 1e-10);
    }

    #[test]
    fn zeta_is_odd_and_integrates_wp() {
        let m = Modulus::new(c(-0.2, 0.8)).unwrap();
        let z = c(0.31, -0.12);
        let s = weierstrass_zeta(z, &m).unwrap() + weierstrass_zeta(-z, &m).unwrap();
        assert!(s.norm() < 1e-10);
        // zeta' = -wp by central difference.
        let h = 1e-4;
        let fd = (weierstrass_zeta(z + h, &m).unwrap() - weierstrass_zeta(z - h, &m).unwrap())
            / (2.0 * h);
        assert!((fd + weierstrass_p(z, &m).unwrap()).norm() < 1e-6);
    }

    #[test]
    fn lattice_sum_converges_and_has_lemniscatic_symmetry() {
        let m = Modulus::new(c(0.0, 1.0)).unwrap();
        let a = lattice_sum_oracle(c(0.5, 0.0), &m, 400).unwrap();
        let b = lattice_sum_oracle(c(0.5, 0.0), &m, 800).unwrap();
        assert!((a - b).norm() < 1e-9);
        let r = lattice_sum_oracle(c(0.0, 0.5), &m, 400).unwrap();
        assert!((r + a).norm() < 1e-9);
        let p = weierstrass_p(c(0.5, 0.0), &m).unwrap();
        assert!((p - a).norm() < 1e-10, "{p} vs {a}");
    }
}
