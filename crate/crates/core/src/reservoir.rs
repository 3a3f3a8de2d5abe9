//! Ohmic reservoir with a Lorentz-Drude cutoff: spectral density, bath
//! kernels and the time-dependent coefficients Δ(t) (diffusion) and γ(t)
//! (dissipation) that enter the Bloch equations.
//!
//! Units: ħ = k_B = 1 and frequencies are measured in units of whatever
//! `omega0` is set to (1 for every scenario shipped with the tool).
//!
//! The coefficients come in four flavours (see [`CoefficientMethod`]):
//! closed form, high-temperature closed form, Markovian constants and a
//! direct quadrature of the kernels. The kernels as written carry no coupling
//! constant, so the quadrature route multiplies the kernel integrals by α²/2
//! to land on the same normalisation as the closed forms.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bloch::TimeGrid;
use crate::error::{Error, Result};
use crate::quadrature;
use crate::special::{self, DEFAULT_TOL};

/// Largest `e^{-ν₁ t}` at which Δ(t) is evaluated through the Gauss series.
pub const SERIES_ARGUMENT_LIMIT: f64 = 0.95;

/// Starting Matsubara cutoff for the resummed noise kernel.
pub const DEFAULT_MATSUBARA: usize = 200;

/// Relative tail target for the resummed noise kernel.
pub const MATSUBARA_REL_TOL: f64 = 1e-9;

/// Relative distance at which ω_c = |ν_n| is treated as degenerate.
const DEGENERATE_REL: f64 = 1e-6;

/// Distance of r_c from an integer below which cot(π r_c) is refused.
const COT_POLE_DISTANCE: f64 = 1e-9;

/// Temperature (in units of ω₀) above which the Markovian trace uses the
/// high-temperature diffusion constant.
pub const HIGH_T_THRESHOLD: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReservoirParams {
    /// Coupling constant squared, α².
    pub alpha2: f64,
    /// System transition frequency ω₀.
    pub omega0: f64,
    /// Cutoff ratio r = ω_c / ω₀.
    pub r: f64,
    /// Temperature k_B T.
    pub kbt: f64,
    /// Damping constant γ₀ of the spectral density.
    pub gamma0: f64,
}

impl ReservoirParams {
    pub fn new(alpha2: f64, omega0: f64, r: f64, kbt: f64) -> Result<Self> {
        let p = Self { alpha2, omega0, r, kbt, gamma0: 1.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn with_gamma0(mut self, gamma0: f64) -> Result<Self> {
        self.gamma0 = gamma0;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("alpha2", self.alpha2),
            ("omega0", self.omega0),
            ("r", self.r),
            ("kBT", self.kbt),
            ("gamma0", self.gamma0),
        ];
        for (name, v) in checks {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn omega_c(&self) -> f64 {
        self.r * self.omega0
    }

    /// First Matsubara frequency ν₁ = 2π k_B T.
    pub fn nu1(&self) -> f64 {
        2.0 * PI * self.kbt
    }

    /// r₀ = ω₀ / 2π k_B T.
    pub fn r0(&self) -> f64 {
        self.omega0 / self.nu1()
    }

    /// r_c = ω_c / 2π k_B T.
    pub fn rc(&self) -> f64 {
        self.omega_c() / self.nu1()
    }

    /// Common prefactor α² ω₀ r²/(1+r²), including γ₀.
    fn coefficient_scale(&self) -> f64 {
        self.gamma0 * self.alpha2 * self.omega0 * self.r * self.r / (1.0 + self.r * self.r)
    }

    /// Earliest time at which the series form of Δ(t) is used.
    pub fn series_t_min(&self) -> f64 {
        -SERIES_ARGUMENT_LIMIT.ln() / self.nu1()
    }
}

/// J(ω) = (2γ₀/π) ω ω_c² / (ω_c² + ω²).
pub fn spectral_density(omega: f64, params: &ReservoirParams) -> f64 {
    let wc2 = params.omega_c().powi(2);
    2.0 * params.gamma0 / PI * omega * wc2 / (wc2 + omega * omega)
}

/// μ(τ) = 2γ₀ ω_c² e^{-ω_c|τ|} sign τ.
pub fn dissipation_kernel(tau: f64, params: &ReservoirParams) -> f64 {
    if tau == 0.0 {
        return 0.0;
    }
    let wc = params.omega_c();
    2.0 * params.gamma0 * wc * wc * (-wc * tau.abs()).exp() * tau.signum()
}

/// A kernel value with a bound on the neglected Matsubara tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub tail_bound: f64,
    pub n_matsubara: usize,
}

/// Σ_{n>N} 1/(n² − x²) for N > x ≥ 0, bounded by the integral from N.
fn inverse_square_tail(n: usize, x: f64) -> f64 {
    let n = n as f64;
    if x < 1e-8 * n {
        1.0 / n
    } else {
        ((n + x) / (n - x)).ln() / (2.0 * x)
    }
}

/// Noise kernel k(τ) as the Matsubara sum truncated at |n| ≤ `n_matsubara`,
/// with ±n paired. A term whose denominator ω_c² − ν_n² is degenerate is
/// replaced by its analytic limit.
///
/// The tail bound is infinite at τ = 0, where the full sum diverges
/// logarithmically.
pub fn noise_kernel(tau: f64, params: &ReservoirParams, n_matsubara: usize) -> KernelValue {
    let tau = tau.abs();
    let wc = params.omega_c();
    let nu1 = params.nu1();
    let e_wc = (-wc * tau).exp();
    let mut sum = e_wc / wc;
    for n in 1..=n_matsubara {
        let nu = nu1 * n as f64;
        let term = if ((nu - wc) / wc).abs() < DEGENERATE_REL {
            (1.0 - wc * tau) * e_wc / (2.0 * wc)
        } else {
            (wc * e_wc - nu * (-nu * tau).exp()) / (wc * wc - nu * nu)
        };
        sum += 2.0 * term;
    }
    let scale = 4.0 * params.gamma0 * params.kbt * wc * wc;

    let rc = params.rc();
    let tail_bound = if (n_matsubara as f64) <= rc + 1.0 || tau == 0.0 {
        f64::INFINITY
    } else {
        let first = 2.0 * wc * e_wc / (nu1 * nu1) * inverse_square_tail(n_matsubara, rc);
        let m = (n_matsubara + 1) as f64;
        let w = (-nu1 * tau).exp();
        let geometric = w.powf(m) / -(-nu1 * tau).exp_m1();
        let second = 2.0 / (nu1 * m) * (m * m / (m * m - rc * rc)) * geometric;
        scale * (first + second)
    };
    KernelValue { value: scale * sum, tail_bound, n_matsubara }
}

/// Noise kernel with the slowly converging parts of the Matsubara sum summed
/// in closed form:
///
/// k(τ) = 4γ₀k_BTω_c² [π cot(π r_c) e^{-ω_cτ}/ν₁ − (2/ν₁) ln(1 − w)
///        + (2r_c²/ν₁) Σ_{n≥1} wⁿ / (n(n² − r_c²))],   w = e^{-ν₁τ}.
///
/// Only the last series is truncated; its cutoff starts at
/// [`DEFAULT_MATSUBARA`] and doubles until the tail bound is below
/// [`MATSUBARA_REL_TOL`] of the kernel magnitude.
pub fn noise_kernel_resummed(tau: f64, params: &ReservoirParams) -> Result<KernelValue> {
    let tau = tau.abs();
    if tau == 0.0 {
        return Err(Error::InvalidParameter(
            "resummed noise kernel diverges at tau = 0".into(),
        ));
    }
    let rc = params.rc();
    near_cot_pole(rc, DEGENERATE_REL * rc.max(1.0))?;
    let wc = params.omega_c();
    let nu1 = params.nu1();
    let scale = 4.0 * params.gamma0 * params.kbt * wc * wc;
    let one_minus_w = -(-nu1 * tau).exp_m1();
    let w = 1.0 - one_minus_w;

    let cot_part = PI / (PI * rc).tan() * (-wc * tau).exp() / nu1;
    let log_part = -2.0 / nu1 * one_minus_w.ln();
    let rem_scale = 2.0 * rc * rc / nu1;

    let floor = ((2.0 * rc).ceil() as usize + 1).max(1);
    let mut n_max = DEFAULT_MATSUBARA.max(floor);
    let mut n_done = 0usize;
    let mut remainder = 0.0;
    let mut wn = 1.0;
    loop {
        for n in (n_done + 1)..=n_max {
            let nf = n as f64;
            wn *= w;
            remainder += wn / (nf * (nf * nf - rc * rc));
        }
        n_done = n_max;
        let nf = n_max as f64;
        let m = nf + 1.0;
        let geometric = wn * w / (one_minus_w * m * (m * m - rc * rc));
        let integral = 1.0 / (2.0 * (nf * nf - rc * rc));
        let tail = rem_scale * geometric.min(integral);
        let magnitude = cot_part.abs() + log_part.abs() + (rem_scale * remainder).abs();
        if tail <= MATSUBARA_REL_TOL * magnitude || n_max >= 1 << 26 {
            return Ok(KernelValue {
                value: scale * (cot_part + log_part + rem_scale * remainder),
                tail_bound: scale * tail,
                n_matsubara: n_max,
            });
        }
        n_max *= 2;
    }
}

/// cot(π r_c) is singular at positive integers r_c (r_c → 0 is harmless).
fn near_cot_pole(rc: f64, distance: f64) -> Result<()> {
    let m = rc.round();
    if m >= 1.0 && (rc - m).abs() < distance {
        return Err(Error::CotPole { rc });
    }
    Ok(())
}

/// γ(t) = α²ω₀ r²/(1+r²) [1 − e^{-rω₀t} cos ω₀t − r e^{-rω₀t} sin ω₀t].
pub fn gamma_exact(t: f64, params: &ReservoirParams) -> f64 {
    let w0t = params.omega0 * t;
    let decay = (-params.r * w0t).exp();
    params.coefficient_scale() * (1.0 - decay * w0t.cos() - params.r * decay * w0t.sin())
}

/// High-temperature diffusion coefficient
/// Δ(t) = 2α²k_BT r²/(1+r²) {1 − e^{-rω₀t}[cos ω₀t − sin(ω₀t)/r]}.
pub fn delta_high_t(t: f64, params: &ReservoirParams) -> f64 {
    let w0t = params.omega0 * t;
    let r = params.r;
    let decay = (-r * w0t).exp();
    2.0 * params.gamma0 * params.alpha2 * params.kbt * r * r / (1.0 + r * r)
        * (1.0 - decay * (w0t.cos() - w0t.sin() / r))
}

/// Closed-form diffusion coefficient built from `F̄(±r_c, t)` and `F̄(±i r₀, t)`.
///
/// Δ(t) = α²ω₀ r²/(1+r²) { coth(πr₀) + cot(πr_c) e^{-ω_c t}[sin ω₀t − r cos ω₀t]
///        + cos(ω₀t)/(πr₀) [F̄(−r_c) + F̄(r_c) − F̄(ir₀) − F̄(−ir₀)]
///        − sin(ω₀t)/π [(F̄(−r_c) − F̄(r_c))/r_c + (F̄(ir₀) − F̄(−ir₀))/(i r₀)] }
///
/// Requires `e^{-ν₁t} ≤ 0.95`; closer to t = 0 the series converges too slowly
/// and callers should use [`delta_quadrature`].
pub fn delta_exact(t: f64, params: &ReservoirParams, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be > 0, got {tol}")));
    }
    let t_min = params.series_t_min();
    if !(t >= t_min) {
        return Err(Error::InvalidParameter(format!(
            "series form of delta needs t >= {t_min:e}, got {t}"
        )));
    }
    let rc = params.rc();
    near_cot_pole(rc, COT_POLE_DISTANCE)?;
    let r0 = params.r0();
    let r = params.r;
    let w0t = params.omega0 * t;
    let (s, c) = w0t.sin_cos();

    // F̄(x) = 1 + O(x); the differences below are divided by x, so the series
    // tolerance is tightened accordingly.
    let fb = |x: Complex64| -> Result<Complex64> {
        let x_tol = tol * x.norm().min(1.0);
        Ok(special::f_bar(x, t, params, x_tol)?.value)
    };
    let f_mrc = fb(Complex64::new(-rc, 0.0))?;
    let f_prc = fb(Complex64::new(rc, 0.0))?;
    let f_pir0 = fb(Complex64::new(0.0, r0))?;
    let f_mir0 = fb(Complex64::new(0.0, -r0))?;

    let i_r0 = Complex64::new(0.0, r0);
    let coth = 1.0 / (PI * r0).tanh();
    let cot = 1.0 / (PI * rc).tan();
    let bracket = Complex64::new(coth, 0.0)
        + cot * (-params.omega_c() * t).exp() * (s - r * c)
        + c / (PI * r0) * (f_mrc + f_prc - f_pir0 - f_mir0)
        - s / PI * ((f_mrc - f_prc) / rc + (f_pir0 - f_mir0) / i_r0);
    let value = params.coefficient_scale() * bracket;
    if value.im.abs() > 10.0 * tol {
        return Err(Error::Evaluation(format!(
            "delta(t={t}) has imaginary residue {:e}",
            value.im
        )));
    }
    Ok(value.re)
}

/// Stationary values approached for t → ∞.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovianLimits {
    pub gamma_m: f64,
    pub delta_m: f64,
    pub delta_m_high_t: f64,
}

pub fn markovian_limits(params: &ReservoirParams) -> MarkovianLimits {
    let scale = params.coefficient_scale();
    let r2 = params.r * params.r;
    MarkovianLimits {
        gamma_m: scale,
        delta_m: scale / (PI * params.r0()).tanh(),
        delta_m_high_t: 2.0 * params.gamma0 * params.alpha2 * params.kbt * r2 / (1.0 + r2),
    }
}

impl MarkovianLimits {
    /// Diffusion constant used for Markovian runs at temperature `kbt`.
    pub fn delta_for(&self, params: &ReservoirParams) -> f64 {
        if params.kbt >= HIGH_T_THRESHOLD * params.omega0 {
            self.delta_m_high_t
        } else {
            self.delta_m
        }
    }
}

const QUAD_ABS_TOL: f64 = 1e-13;
const QUAD_REL_TOL: f64 = 1e-12;

fn delta_integrand(tau: f64, params: &ReservoirParams) -> f64 {
    // nodes never land on τ = 0 and r_c poles are screened by the caller
    let k = noise_kernel_resummed(tau, params).map(|k| k.value).unwrap_or(f64::NAN);
    0.5 * params.alpha2 * k * (params.omega0 * tau).cos()
}

fn gamma_integrand(tau: f64, params: &ReservoirParams) -> f64 {
    0.5 * params.alpha2 * dissipation_kernel(tau, params) * (params.omega0 * tau).sin()
}

fn check_resummable(params: &ReservoirParams) -> Result<()> {
    let rc = params.rc();
    near_cot_pole(rc, DEGENERATE_REL * rc.max(1.0))
}

/// (α²/2) ∫₀ᵗ k(τ) cos(ω₀τ) dτ by adaptive quadrature.
pub fn delta_quadrature(t: f64, params: &ReservoirParams) -> Result<f64> {
    check_resummable(params)?;
    Ok(quadrature::integrate(|x| delta_integrand(x, params), 0.0, t, QUAD_ABS_TOL, QUAD_REL_TOL)?.value)
}

/// (α²/2) ∫₀ᵗ μ(τ) sin(ω₀τ) dτ by adaptive quadrature.
pub fn gamma_quadrature(t: f64, params: &ReservoirParams) -> Result<f64> {
    Ok(quadrature::integrate(|x| gamma_integrand(x, params), 0.0, t, QUAD_ABS_TOL, QUAD_REL_TOL)?.value)
}

/// Integrates `f` over each grid interval (in parallel) and accumulates the
/// interval integrals in order, so the result does not depend on scheduling.
fn cumulative<F>(times: &[f64], upto: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64 + Sync,
{
    let pieces: Vec<f64> = (1..upto)
        .into_par_iter()
        .map(|k| {
            quadrature::integrate(&f, times[k - 1], times[k], QUAD_ABS_TOL, QUAD_REL_TOL)
                .map(|i| i.value)
                .map_err(|e| Error::AtSample { index: k, t: times[k], source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(upto);
    let mut acc = 0.0;
    if upto > 0 {
        out.push(0.0);
    }
    for p in pieces {
        acc += p;
        out.push(acc);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoefficientMethod {
    Exact,
    HighT,
    Markovian,
    Quadrature,
}

impl CoefficientMethod {
    pub const ALL: [CoefficientMethod; 4] = [
        CoefficientMethod::Exact,
        CoefficientMethod::HighT,
        CoefficientMethod::Markovian,
        CoefficientMethod::Quadrature,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CoefficientMethod::Exact => "exact",
            CoefficientMethod::HighT => "high-t",
            CoefficientMethod::Markovian => "markovian",
            CoefficientMethod::Quadrature => "quadrature",
        }
    }
}

impl std::str::FromStr for CoefficientMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(CoefficientMethod::Exact),
            "high-t" | "hight" | "high_t" => Ok(CoefficientMethod::HighT),
            "markovian" => Ok(CoefficientMethod::Markovian),
            "quadrature" => Ok(CoefficientMethod::Quadrature),
            other => Err(Error::Validation(format!(
                "unknown coefficient method '{other}' (expected exact|high-t|markovian|quadrature)"
            ))),
        }
    }
}

impl std::fmt::Display for CoefficientMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Δ(t), γ(t) sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTrace {
    pub grid: TimeGrid,
    pub delta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub method: CoefficientMethod,
    /// Transition frequency of the system the trace belongs to.
    pub omega0: f64,
    /// Samples of an `Exact` trace that were filled from quadrature because
    /// they lie below the series threshold.
    pub from_quadrature: Vec<bool>,
}

impl CoefficientTrace {
    /// Constant coefficients, e.g. for Markovian runs or a switched-off bath.
    pub fn constant(grid: TimeGrid, delta: f64, gamma: f64, omega0: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            omega0,
            delta: vec![delta; n],
            gamma: vec![gamma; n],
            method: CoefficientMethod::Markovian,
            from_quadrature: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }
}

/// Samples Δ and γ on `grid` with the chosen method.
pub fn coefficient_trace(
    grid: &TimeGrid,
    params: &ReservoirParams,
    method: CoefficientMethod,
) -> Result<CoefficientTrace> {
    params.validate()?;
    if grid.t0 != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "coefficient traces start at t = 0, grid starts at {}",
            grid.t0
        )));
    }
    let times = grid.times();
    let n = times.len();
    let mut from_quadrature = vec![false; n];
    let gamma_closed: Vec<f64> = times.iter().map(|&t| gamma_exact(t, params)).collect();

    let (delta, gamma) = match method {
        CoefficientMethod::Markovian => {
            let lim = markovian_limits(params);
            (vec![lim.delta_for(params); n], vec![lim.gamma_m; n])
        }
        CoefficientMethod::HighT => {
            (times.iter().map(|&t| delta_high_t(t, params)).collect(), gamma_closed)
        }
        CoefficientMethod::Quadrature => {
            check_resummable(params)?;
            let delta = cumulative(&times, n, |x| delta_integrand(x, params))?;
            let gamma = cumulative(&times, n, |x| gamma_integrand(x, params))?;
            from_quadrature.iter_mut().for_each(|f| *f = true);
            (delta, gamma)
        }
        CoefficientMethod::Exact => {
            let t_min = params.series_t_min();
            // samples before the series threshold (t = 0 included) come from quadrature
            let n_early = times.iter().take_while(|&&t| t < t_min).count();
            let mut delta = if n_early > 1 {
                check_resummable(params)?;
                cumulative(&times, n_early, |x| delta_integrand(x, params))?
            } else {
                vec![0.0; n_early]
            };
            for f in from_quadrature.iter_mut().take(n_early).skip(1) {
                *f = true;
            }
            let late: Vec<f64> = times[n_early..]
                .par_iter()
                .enumerate()
                .map(|(j, &t)| {
                    delta_exact(t, params, DEFAULT_TOL).map_err(|e| Error::AtSample {
                        index: n_early + j,
                        t,
                        source: Box::new(e),
                    })
                })
                .collect::<Result<_>>()?;
            delta.extend(late);
            (delta, gamma_closed)
        }
    };
    Ok(CoefficientTrace { grid: *grid, delta, gamma, method, omega0: params.omega0, from_quadrature })
}
