//! Gauss hypergeometric series and the two reservoir-specific specialisations
//! `F̄(x, t) = ₂F₁(x, 1; 1 + x; e^{-ν₁ t})` and
//! `Ḡ(x, t) = ₂F₁(2, 1 + x; 2 + x; e^{-ν₁ t})`.
//!
//! Everything is evaluated in complex arithmetic, since the diffusion
//! coefficient needs `F̄(±i r₀, t)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::reservoir::ReservoirParams;

pub type ComplexScalar = Complex64;

/// Default absolute tolerance on the series tail.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Hard cap on the number of series terms.
pub const TERM_CAP: usize = 100_000;

/// A truncated series value together with its truncation bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: Complex64,
    /// Number of terms summed (including the n = 0 term).
    pub terms: usize,
    /// Upper bound on the magnitude of the neglected tail.
    pub tail_bound: f64,
}

/// Rising factorial `(a)_n = a (a+1) ... (a+n-1)`, with `(a)_0 = 1`.
pub fn pochhammer(a: Complex64, n: u32) -> Result<Complex64> {
    let mut acc = Complex64::new(1.0, 0.0);
    for k in 0..n {
        acc *= a + f64::from(k);
    }
    if !(acc.re.is_finite() && acc.im.is_finite()) {
        return Err(Error::Evaluation(format!(
            "pochhammer({a}, {n}) overflows f64"
        )));
    }
    Ok(acc)
}

fn is_nonpositive_integer(c: Complex64) -> bool {
    c.im == 0.0 && c.re <= 0.0 && c.re.fract() == 0.0
}

/// Gauss series `Σ (a)_n (b)_n / (c)_n · zⁿ / n!` for `|z| < 1`.
///
/// Summation stops once the geometric majorant of the remaining terms drops
/// below `tol`. The majorant uses `ρ = max(|t_{n+1}/t_n|, |z|)`, which bounds
/// every later ratio once the ratio sequence has become monotone; that is
/// only trusted after `n` exceeds a few multiples of the parameter sizes.
pub fn hyp2f1(
    a: Complex64,
    b: Complex64,
    c: Complex64,
    z: Complex64,
    tol: f64,
) -> Result<SeriesValue> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be > 0, got {tol}")));
    }
    if is_nonpositive_integer(c) {
        return Err(Error::InvalidParameter(format!(
            "c = {c} is a non-positive integer"
        )));
    }
    let z_abs = z.norm();
    if !(z_abs < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "|z| = {z_abs} outside the unit disc"
        )));
    }

    let one = Complex64::new(1.0, 0.0);
    if z_abs == 0.0 {
        return Ok(SeriesValue { value: one, terms: 1, tail_bound: 0.0 });
    }

    let monotone_from = (2.0 * (a.norm() + b.norm() + c.norm())).ceil() as usize + 2;
    let mut sum = one;
    let mut term = one;
    for n in 0..TERM_CAP {
        let nf = n as f64;
        let factor = (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        let next = term * factor;
        if next == Complex64::new(0.0, 0.0) {
            // a or b is a non-positive integer: the series terminates.
            return Ok(SeriesValue { value: sum, terms: n + 1, tail_bound: 0.0 });
        }
        if n >= monotone_from {
            let rho = factor.norm().max(z_abs);
            if rho < 1.0 {
                let tail = next.norm() / (1.0 - rho);
                if tail < tol {
                    return Ok(SeriesValue { value: sum, terms: n + 1, tail_bound: tail });
                }
            }
        }
        sum += next;
        term = next;
        if !(sum.re.is_finite() && sum.im.is_finite()) {
            return Err(Error::Evaluation(format!(
                "hyp2f1({a}, {b}, {c}, {z}) diverged"
            )));
        }
    }
    Err(Error::SeriesNonConvergence { terms: TERM_CAP, z_abs })
}

/// Argument `e^{-ν₁ t}` shared by [`f_bar`] and [`g_bar`].
pub fn matsubara_argument(t: f64, params: &ReservoirParams) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "F̄/Ḡ need t > 0, got {t}"
        )));
    }
    Ok((-params.nu1() * t).exp())
}

/// `F̄(x, t) = ₂F₁(x, 1; 1 + x; e^{-ν₁ t})`.
pub fn f_bar(x: Complex64, t: f64, params: &ReservoirParams, tol: f64) -> Result<SeriesValue> {
    let z = matsubara_argument(t, params)?;
    let one = Complex64::new(1.0, 0.0);
    hyp2f1(x, one, one + x, Complex64::new(z, 0.0), tol)
}

/// `Ḡ(x, t) = ₂F₁(2, 1 + x; 2 + x; e^{-ν₁ t})`.
pub fn g_bar(x: Complex64, t: f64, params: &ReservoirParams, tol: f64) -> Result<SeriesValue> {
    let z = matsubara_argument(t, params)?;
    hyp2f1(
        Complex64::new(2.0, 0.0),
        x + 1.0,
        x + 2.0,
        Complex64::new(z, 0.0),
        tol,
    )
}
