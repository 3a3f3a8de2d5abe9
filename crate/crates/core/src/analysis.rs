//! Coherence traces, decoherence times, control spectra and the
//! controllability classification.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::bloch::{self, BlochVector, ControlField, TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::pmp::{self, CostWeights, SweepConfig, SweepResult};
use crate::reservoir::{coefficient_trace, CoefficientMethod, CoefficientTrace, ReservoirParams};

/// Off-diagonal magnitude `|ρ₀₁| = ½√(x₁² + x₂²)`.
pub fn coherence(x: &BlochVector) -> f64 {
    0.5 * x.x1.hypot(x.x2)
}

pub fn coherence_trace(traj: &Trajectory) -> Vec<f64> {
    traj.states.iter().map(coherence).collect()
}

/// `coherence(t_f) / coherence(0)`.
pub fn retention(traj: &Trajectory) -> f64 {
    coherence(&traj.last()) / coherence(&traj.states[0])
}

pub const DEFAULT_THRESHOLD_FRACTION: f64 = 1.0 / std::f64::consts::E;

/// First time the coherence falls below `threshold_fraction` of its initial
/// value, interpolated linearly between samples.
pub fn decoherence_time(traj: &Trajectory, threshold_fraction: f64) -> Result<Option<f64>> {
    if !(threshold_fraction > 0.0 && threshold_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold fraction must be in (0, 1), got {threshold_fraction}"
        )));
    }
    let c = coherence_trace(traj);
    let level = threshold_fraction * c[0];
    for k in 1..c.len() {
        if c[k] < level {
            let s = (c[k - 1] - level) / (c[k - 1] - c[k]);
            return Ok(Some(traj.grid.time(k - 1) + s * traj.grid.step()));
        }
    }
    Ok(None)
}

/// One-sided power spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Bin frequencies `2πk/(N h)`, `k = 0..=N/2`.
    pub freqs: Vec<f64>,
    /// `|X_k|²` of the mean-removed signal.
    pub power: Vec<f64>,
    pub sample_spacing: f64,
    /// Number of input samples N.
    pub n_samples: usize,
}

impl Spectrum {
    /// Multiplicity of bin `k` in the full two-sided DFT.
    fn multiplicity(&self, k: usize) -> f64 {
        let nyquist = self.n_samples.is_multiple_of(2) && k == self.n_samples / 2;
        if k == 0 || nyquist {
            1.0
        } else {
            2.0
        }
    }

    /// `Σ_k |X_k|²` over all N bins.
    pub fn two_sided_total(&self) -> f64 {
        self.power.iter().enumerate().map(|(k, p)| self.multiplicity(k) * p).sum()
    }

    /// Frequency of the strongest bin.
    pub fn peak(&self) -> f64 {
        let k = self
            .power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        self.freqs[k]
    }
}

/// Squared-magnitude DFT of the mean-removed signal, rectangular window.
pub fn power_spectrum(samples: &[f64], sample_spacing: f64) -> Result<Spectrum> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InvalidParameter("power spectrum needs at least 2 samples".into()));
    }
    if !(sample_spacing > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sample spacing must be > 0, got {sample_spacing}"
        )));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&x| Complex::new(x - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let bins = n / 2 + 1;
    let dw = 2.0 * PI / (n as f64 * sample_spacing);
    Ok(Spectrum {
        freqs: (0..bins).map(|k| k as f64 * dw).collect(),
        power: buf[..bins].iter().map(|c| c.norm_sqr()).collect(),
        sample_spacing,
        n_samples: n,
    })
}

pub const DEFAULT_ENERGY_FRACTION: f64 = 0.9;

/// Smallest bin frequency at which the cumulative energy reaches
/// `energy_fraction` of the total.
pub fn bandwidth(spec: &Spectrum, energy_fraction: f64) -> Result<f64> {
    if !(energy_fraction > 0.0 && energy_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "energy fraction must be in (0, 1), got {energy_fraction}"
        )));
    }
    let total = spec.two_sided_total();
    if !(total > 0.0) {
        return Err(Error::Evaluation("bandwidth of an all-zero spectrum is undefined".into()));
    }
    let mut acc = 0.0;
    for (k, p) in spec.power.iter().enumerate() {
        acc += spec.multiplicity(k) * p;
        if acc >= energy_fraction * total {
            return Ok(spec.freqs[k]);
        }
    }
    Ok(*spec.freqs.last().expect("non-empty spectrum"))
}

/// Combined spectrum of both control channels: bin-wise sum of the
/// `u_x` and `u_y` powers, i.e. the spectrum of the control energy.
pub fn control_spectrum(control: &ControlField) -> Result<Spectrum> {
    let h = control.grid.step();
    let mut spec = power_spectrum(&control.ux, h)?;
    let uy = power_spectrum(&control.uy, h)?;
    for (p, q) in spec.power.iter_mut().zip(&uy.power) {
        *p += q;
    }
    Ok(spec)
}

/// Bandwidth of the combined control spectrum.
pub fn control_bandwidth(control: &ControlField, energy_fraction: f64) -> Result<f64> {
    bandwidth(&control_spectrum(control)?, energy_fraction)
}

/// Table I labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControllabilityLabel {
    SlowDecay,
    Controllable,
    ControllableNonMarkovianOnly,
    Uncontrollable,
}

impl ControllabilityLabel {
    pub fn name(self) -> &'static str {
        match self {
            Self::SlowDecay => "slow-decay",
            Self::Controllable => "controllable",
            Self::ControllableNonMarkovianOnly => "controllable-non-markovian-only",
            Self::Uncontrollable => "uncontrollable",
        }
    }
}

impl std::fmt::Display for ControllabilityLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Retention thresholds of the labelling rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelThresholds {
    /// Uncontrolled retention at or above this is slow decay.
    pub slow_decay: f64,
    /// A controlled run must retain at least this multiple of the uncontrolled run...
    pub gain: f64,
    /// ...and at least this fraction of the initial coherence.
    pub floor: f64,
}

impl Default for LabelThresholds {
    fn default() -> Self {
        Self { slow_decay: 0.8, gain: 2.0, floor: 0.5 }
    }
}

impl LabelThresholds {
    fn meets_bar(&self, controlled: f64, uncontrolled: f64) -> bool {
        controlled >= self.gain * uncontrolled && controlled >= self.floor
    }

    /// Label from the three retentions (coherence(t_f)/coherence(0)).
    pub fn classify(&self, uncontrolled: f64, markovian: f64, non_markovian: f64) -> ControllabilityLabel {
        if uncontrolled >= self.slow_decay {
            ControllabilityLabel::SlowDecay
        } else if self.meets_bar(markovian, uncontrolled) {
            ControllabilityLabel::Controllable
        } else if self.meets_bar(non_markovian, uncontrolled) {
            ControllabilityLabel::ControllableNonMarkovianOnly
        } else {
            ControllabilityLabel::Uncontrollable
        }
    }
}

/// Uncontrolled, Markovian-controlled and non-Markovian-controlled runs of one
/// scenario. Both controls are evaluated in the exact non-Markovian dynamics.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub coeffs: CoefficientTrace,
    pub uncontrolled: Trajectory,
    pub target: Trajectory,
    /// Sweep against the Markovian coefficients.
    pub markovian: SweepResult,
    /// The Markovian control applied to the exact dynamics.
    pub markovian_state: Trajectory,
    pub non_markovian: SweepResult,
}

impl CellOutcome {
    pub fn retentions(&self) -> (f64, f64, f64) {
        (
            retention(&self.uncontrolled),
            retention(&self.markovian_state),
            retention(&self.non_markovian.state),
        )
    }
}

/// Runs the three evolutions of one scenario with coefficients from `method`.
pub fn compare_controls(
    x0: &BlochVector,
    params: &ReservoirParams,
    grid: &TimeGrid,
    method: CoefficientMethod,
    weights: &CostWeights,
    config: &SweepConfig,
) -> Result<CellOutcome> {
    let coeffs = coefficient_trace(grid, params, method)?;
    let uncontrolled = bloch::integrate(x0, &ControlField::zeros(*grid), &coeffs)?;
    let markovian = pmp::markovian_control(x0, params, grid, weights, config)?;
    let markovian_state = bloch::integrate(x0, &markovian.control, &coeffs)?;
    let non_markovian = pmp::solve_fbsm(x0, &coeffs, weights, config)?;
    Ok(CellOutcome {
        target: Trajectory::target(*grid, x0, params.omega0),
        coeffs,
        uncontrolled,
        markovian,
        markovian_state,
        non_markovian,
    })
}

/// One entry of the controllability table.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllabilityCell {
    pub kbt: f64,
    pub r: f64,
    pub label: ControllabilityLabel,
    pub uncontrolled_retention: f64,
    pub markovian_retention: f64,
    pub non_markovian_retention: f64,
    pub markovian_converged: bool,
    pub non_markovian_converged: bool,
    /// Solver annotations, e.g. exhausted iteration budgets.
    pub notes: Vec<String>,
}

/// Temperatures and cutoff ratios of the reference table.
pub const TABLE_KBT: [f64; 3] = [0.3, 3.0, 300.0];
pub const TABLE_R: [f64; 3] = [0.1, 1.0, 10.0];

/// Classifies every `(kBT, r)` pair, row-major in `r`, with the reservoir
/// coefficients of `method`. Cells run in parallel.
/// Non-convergence is recorded in the cell notes; evaluation errors abort.
#[allow(clippy::too_many_arguments)]
pub fn controllability_table(
    kbts: &[f64],
    rs: &[f64],
    base: &ReservoirParams,
    x0: &BlochVector,
    grid: &TimeGrid,
    method: CoefficientMethod,
    weights: &CostWeights,
    config: &SweepConfig,
    thresholds: &LabelThresholds,
) -> Result<Vec<ControllabilityCell>> {
    let pairs: Vec<(f64, f64)> = rs.iter().flat_map(|&r| kbts.iter().map(move |&k| (k, r))).collect();
    pairs
        .par_iter()
        .map(|&(kbt, r)| {
            let params = ReservoirParams { kbt, r, ..*base };
            let out = compare_controls(x0, &params, grid, method, weights, config)?;
            let (u, m, n) = out.retentions();
            let mut notes = Vec::new();
            for (name, res) in [("markovian", &out.markovian), ("non-markovian", &out.non_markovian)] {
                if !res.converged {
                    notes.push(format!("{name} sweep stopped unconverged after {} iterations", res.iterations));
                }
            }
            Ok(ControllabilityCell {
                kbt,
                r,
                label: thresholds.classify(u, m, n),
                uncontrolled_retention: u,
                markovian_retention: m,
                non_markovian_retention: n,
                markovian_converged: out.markovian.converged,
                non_markovian_converged: out.non_markovian.converged,
                notes,
            })
        })
        .collect()
}
