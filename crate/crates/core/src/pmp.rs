//! Optimal decoherence control through the minimum principle.
//!
//! The cost is `J[u] = ∫ |x − x⁰|² + θ uᵀu dt` with `x⁰` the free precession
//! of the initial state. The costate obeys `λ̇ = −2(x − x⁰) − Aᵀλ` with
//! `λ(t_f) = 0`, and the stationary control is
//! `u_x = (λ₂x₃ − λ₃x₂)/2θ`, `u_y = (λ₃x₁ − λ₁x₃)/2θ`.
//!
//! [`solve_fbsm`] finds it by forward–backward sweeping with a relaxed
//! control update that is halved whenever it would raise the cost.

use nalgebra::{Matrix3, Vector3};

use crate::bloch::{self, check_same_grid, BlochVector, ControlField, Trajectory};
use crate::error::{Error, Result};
use crate::reservoir::{coefficient_trace, CoefficientMethod, CoefficientTrace, ReservoirParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    /// Control-effort weight θ.
    pub theta: f64,
}

impl CostWeights {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::Validation(format!("theta must be > 0, got {theta}")));
        }
        Ok(Self { theta })
    }
}

impl Default for CostWeights {
    fn default() -> Self {
        Self { theta: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    /// Relaxation κ ∈ (0, 1] of `u ← (1−κ)u + κ u_candidate`.
    pub relaxation: f64,
    pub max_iters: usize,
    /// Stop when the relative cost change falls below this...
    pub tol_cost: f64,
    /// ...and the largest pointwise gap to the candidate control is below this.
    pub tol_control: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { relaxation: 0.3, max_iters: 3000, tol_cost: 1e-10, tol_control: 1e-5 }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::Validation(format!(
                "relaxation must be in (0, 1], got {}",
                self.relaxation
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Validation("max_iters must be >= 1".into()));
        }
        if !(self.tol_cost > 0.0) || !(self.tol_control > 0.0) {
            return Err(Error::Validation("tol_cost and tol_control must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub control: ControlField,
    pub state: Trajectory,
    /// Multiplier λ(t), stored component-wise in the Bloch-vector slots.
    pub costate: Trajectory,
    pub target: Trajectory,
    /// Cost of every accepted iterate, starting with u ≡ 0.
    pub cost_history: Vec<f64>,
    /// max_t |(∂H/∂u_x, ∂H/∂u_y)| at the returned control.
    pub stationarity_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SweepResult {
    pub fn final_cost(&self) -> f64 {
        *self.cost_history.last().expect("history starts with the zero-control cost")
    }

    /// `Err(NonConvergence)` when the iteration budget ran out.
    pub fn into_result(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence { iterations: self.iterations })
        }
    }
}

fn trapezoid(h: f64, values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    let mut acc = 0.0;
    for (k, v) in values.enumerate() {
        let w = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
        acc += w * v;
    }
    acc * h
}

/// Trapezoidal `∫ |x − x⁰|² + θ(u_x² + u_y²) dt`.
pub fn cost(state: &Trajectory, control: &ControlField, weights: &CostWeights, target: &Trajectory) -> Result<f64> {
    check_same_grid(&state.grid, &control.grid)?;
    check_same_grid(&state.grid, &target.grid)?;
    let integrand = (0..state.grid.len()).map(|k| {
        let dx = state.states[k].to_vector() - target.states[k].to_vector();
        let (ux, uy) = control.sample(k);
        dx.norm_squared() + weights.theta * (ux * ux + uy * uy)
    });
    Ok(trapezoid(state.grid.step(), integrand))
}

/// `λ̇ = −2(x − x⁰) − Aᵀλ`.
pub fn costate_rhs(lambda: &Vector3<f64>, x: &BlochVector, target: &BlochVector, a: &Matrix3<f64>) -> Vector3<f64> {
    -2.0 * (x.to_vector() - target.to_vector()) - a.transpose() * lambda
}

/// Control that makes `∂H/∂u` vanish for the given costate and state.
pub fn control_update(lambda: &Vector3<f64>, x: &BlochVector, weights: &CostWeights) -> (f64, f64) {
    let k = 0.5 / weights.theta;
    (
        k * (lambda[1] * x.x3 - lambda[2] * x.x2),
        k * (lambda[2] * x.x1 - lambda[0] * x.x3),
    )
}

/// `(∂H/∂u_x, ∂H/∂u_y)` of the control Hamiltonian.
pub fn hamiltonian_gradient(lambda: &Vector3<f64>, x: &BlochVector, u: (f64, f64), weights: &CostWeights) -> (f64, f64) {
    (
        2.0 * weights.theta * u.0 - lambda[1] * x.x3 + lambda[2] * x.x2,
        2.0 * weights.theta * u.1 + lambda[0] * x.x3 - lambda[2] * x.x1,
    )
}

/// Integrates the costate backwards from `λ(t_f) = 0` with RK4 on the state
/// grid. Mid-step states come from cubic Hermite interpolation using the
/// state derivative at both ends.
pub fn integrate_costate(
    state: &Trajectory,
    control: &ControlField,
    coeffs: &CoefficientTrace,
    x0: &BlochVector,
) -> Result<Vec<Vector3<f64>>> {
    check_same_grid(&state.grid, &coeffs.grid)?;
    check_same_grid(&control.grid, &coeffs.grid)?;
    let grid = coeffs.grid;
    let h = grid.step();
    let omega0 = coeffs.omega0;
    let n = grid.n_steps;
    let mut lambdas = vec![Vector3::zeros(); grid.len()];
    let mut lam = Vector3::zeros();
    for k in (0..n).rev() {
        let (a1, b1) = bloch::drift_at(control, coeffs, k + 1, false);
        let (am, _) = bloch::drift_at(control, coeffs, k, true);
        let (a0, b0) = bloch::drift_at(control, coeffs, k, false);
        let x1 = state.states[k + 1].to_vector();
        let x0v = state.states[k].to_vector();
        let f1 = a1 * x1 + b1;
        let f0 = a0 * x0v + b0;
        let xm = BlochVector::from_vector(&(0.5 * (x0v + x1) + h / 8.0 * (f0 - f1)));
        let (t0, t1) = (grid.time(k), grid.time(k + 1));
        let tm = 0.5 * (t0 + t1);
        let target1 = bloch::target_trajectory(t1, x0, omega0);
        let targetm = bloch::target_trajectory(tm, x0, omega0);
        let target0 = bloch::target_trajectory(t0, x0, omega0);
        let xs1 = state.states[k + 1];
        let xs0 = state.states[k];
        // backward step: dλ/d(−t) = −rhs
        let k1 = costate_rhs(&lam, &xs1, &target1, &a1);
        let k2 = costate_rhs(&(lam - 0.5 * h * k1), &xm, &targetm, &am);
        let k3 = costate_rhs(&(lam - 0.5 * h * k2), &xm, &targetm, &am);
        let k4 = costate_rhs(&(lam - h * k3), &xs0, &target0, &a0);
        lam -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        lambdas[k] = lam;
    }
    Ok(lambdas)
}

/// Pointwise `∂H/∂u` for a control: the L² gradient of the cost.
pub fn cost_gradient(
    x0: &BlochVector,
    control: &ControlField,
    coeffs: &CoefficientTrace,
    weights: &CostWeights,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let state = bloch::integrate(x0, control, coeffs)?;
    let lambdas = integrate_costate(&state, control, coeffs, x0)?;
    Ok((0..state.grid.len())
        .map(|k| hamiltonian_gradient(&lambdas[k], &state.states[k], control.sample(k), weights))
        .unzip())
}

/// Directional derivative `∫ (∂H/∂u)·δu dt` predicted by the costate.
pub fn directional_derivative(
    x0: &BlochVector,
    control: &ControlField,
    direction: &ControlField,
    coeffs: &CoefficientTrace,
    weights: &CostWeights,
) -> Result<f64> {
    check_same_grid(&control.grid, &direction.grid)?;
    let (gx, gy) = cost_gradient(x0, control, coeffs, weights)?;
    let h = control.grid.step();
    Ok(trapezoid(
        h,
        (0..gx.len()).map(|k| gx[k] * direction.ux[k] + gy[k] * direction.uy[k]),
    ))
}

/// State trajectory and cost of an arbitrary control.
pub fn evaluate_control(
    x0: &BlochVector,
    control: &ControlField,
    coeffs: &CoefficientTrace,
    weights: &CostWeights,
) -> Result<(Trajectory, f64)> {
    let state = bloch::integrate(x0, control, coeffs)?;
    let target = Trajectory::target(coeffs.grid, x0, coeffs.omega0);
    let j = cost(&state, control, weights, &target)?;
    Ok((state, j))
}

struct Iterate {
    control: ControlField,
    state: Trajectory,
    lambdas: Vec<Vector3<f64>>,
    cost: f64,
}

fn candidate_gap(it: &Iterate, weights: &CostWeights) -> (ControlField, f64, f64) {
    let mut cand = ControlField::zeros(it.control.grid);
    let mut gap = 0.0f64;
    let mut residual = 0.0f64;
    for k in 0..it.control.grid.len() {
        let x = &it.state.states[k];
        let (cx, cy) = control_update(&it.lambdas[k], x, weights);
        cand.ux[k] = cx;
        cand.uy[k] = cy;
        let (ux, uy) = it.control.sample(k);
        gap = gap.max((cx - ux).abs()).max((cy - uy).abs());
        let (gx, gy) = hamiltonian_gradient(&it.lambdas[k], x, (ux, uy), weights);
        residual = residual.max(gx.hypot(gy));
    }
    (cand, gap, residual)
}

/// Smallest relaxation tried before an iterate is declared stalled.
const MIN_RELAXATION: f64 = 1e-12;

/// Forward–backward sweep starting from `u ≡ 0`.
///
/// Each iterate integrates the state forward, the costate backward, forms the
/// pointwise candidate control and moves towards it by `κ`. A step that does
/// not lower the cost is retried with `κ/2`. The sweep stops once the relative
/// cost change is below `tol_cost` and every candidate sample is within
/// `tol_control` of the current control, or when the budget runs out
/// (`converged = false`).
pub fn solve_fbsm(
    x0: &BlochVector,
    coeffs: &CoefficientTrace,
    weights: &CostWeights,
    config: &SweepConfig,
) -> Result<SweepResult> {
    config.validate()?;
    let grid = coeffs.grid;
    let target = Trajectory::target(grid, x0, coeffs.omega0);
    let make = |control: ControlField| -> Result<Iterate> {
        let state = bloch::integrate(x0, &control, coeffs)?;
        let cost = cost(&state, &control, weights, &target)?;
        let lambdas = integrate_costate(&state, &control, coeffs, x0)?;
        Ok(Iterate { control, state, lambdas, cost })
    };

    let mut current = make(ControlField::zeros(grid))?;
    let mut history = vec![current.cost];
    let mut rel_change = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iters {
        let (cand, gap, _) = candidate_gap(&current, weights);
        if gap < config.tol_control && (rel_change < config.tol_cost || current.cost == 0.0) {
            converged = true;
            break;
        }
        iterations += 1;
        let mut kappa = config.relaxation;
        let accepted = loop {
            let mut trial = current.control.clone();
            for k in 0..grid.len() {
                trial.ux[k] += kappa * (cand.ux[k] - trial.ux[k]);
                trial.uy[k] += kappa * (cand.uy[k] - trial.uy[k]);
            }
            let state = bloch::integrate(x0, &trial, coeffs)?;
            let j = cost(&state, &trial, weights, &target)?;
            if j < current.cost {
                break Some((trial, j));
            }
            kappa *= 0.5;
            if kappa < MIN_RELAXATION {
                break None;
            }
        };
        match accepted {
            Some((trial, j)) => {
                rel_change = (current.cost - j) / current.cost.abs().max(f64::MIN_POSITIVE);
                current = make(trial)?;
                debug_assert_eq!(current.cost, j);
                history.push(j);
            }
            None => {
                // no descent left at this resolution; judge by the stationarity gap alone
                converged = gap < config.tol_control;
                break;
            }
        }
    }
    if !converged && iterations == config.max_iters {
        let (_, gap, _) = candidate_gap(&current, weights);
        converged = gap < config.tol_control && rel_change < config.tol_cost;
    }
    let (_, _, residual) = candidate_gap(&current, weights);
    let costate = Trajectory::new(grid, current.lambdas.iter().map(BlochVector::from_vector).collect())?;
    Ok(SweepResult {
        control: current.control,
        state: current.state,
        costate,
        target,
        cost_history: history,
        stationarity_residual: residual,
        iterations,
        converged,
    })
}

/// Sweep against the constant Markovian coefficients of `params`.
pub fn markovian_control(
    x0: &BlochVector,
    params: &ReservoirParams,
    grid: &bloch::TimeGrid,
    weights: &CostWeights,
    config: &SweepConfig,
) -> Result<SweepResult> {
    let coeffs = coefficient_trace(grid, params, CoefficientMethod::Markovian)?;
    solve_fbsm(x0, &coeffs, weights, config)
}
