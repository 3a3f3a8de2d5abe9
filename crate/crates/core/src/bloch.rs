//! Bloch-vector representation of the qubit and its driven, non-Markovian
//! equations of motion `ẋ = A(t) x + B(t)`.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::reservoir::CoefficientTrace;

/// Uniform grid `t_k = t0 + k h`, `h = (tf - t0) / n_steps`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub tf: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, tf: f64, n_steps: usize) -> Result<Self> {
        if !(tf > t0) || !t0.is_finite() || !tf.is_finite() {
            return Err(Error::Validation(format!("grid needs tf > t0, got [{t0}, {tf}]")));
        }
        if n_steps == 0 {
            return Err(Error::Validation("grid needs n_steps >= 1".into()));
        }
        Ok(Self { t0, tf, n_steps })
    }

    pub fn step(&self) -> f64 {
        (self.tf - self.t0) / self.n_steps as f64
    }

    /// Number of samples, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.tf
        } else {
            self.t0 + k as f64 * self.step()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    /// Same interval with `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Self {
        Self { n_steps: self.n_steps * factor.max(1), ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlochVector {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl BlochVector {
    pub const fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Self { x1, x2, x3 }
    }

    /// The initial state used throughout the scenario study,
    /// (√3/2, −√2/4, −√2/4).
    pub fn reference_initial_state() -> Self {
        let s2 = std::f64::consts::SQRT_2;
        Self::new(3f64.sqrt() / 2.0, -s2 / 4.0, -s2 / 4.0)
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x1, self.x2, self.x3)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    /// A Bloch vector describes a density matrix iff its length is at most one.
    pub fn is_physical(&self) -> bool {
        self.norm() <= 1.0 + 1e-12
    }
}

/// Qubit density matrix `[[ρ00, ρ01], [ρ01*, ρ11]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix2 {
    pub rho00: f64,
    pub rho11: f64,
    pub rho01: Complex64,
}

impl DensityMatrix2 {
    pub fn rho10(&self) -> Complex64 {
        self.rho01.conj()
    }

    /// Unit trace and positive semidefinite, within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        (self.rho00 + self.rho11 - 1.0).abs() <= tol
            && self.rho00 >= -tol
            && self.rho11 >= -tol
            && self.rho00 * self.rho11 - self.rho01.norm_sqr() >= -tol
    }
}

pub fn bloch_from_density(rho: &DensityMatrix2) -> BlochVector {
    BlochVector::new(2.0 * rho.rho01.re, -2.0 * rho.rho01.im, rho.rho00 - rho.rho11)
}

/// Inverse of [`bloch_from_density`]. The result is only a valid density
/// matrix when `x.is_physical()`.
pub fn density_from_bloch(x: &BlochVector) -> DensityMatrix2 {
    DensityMatrix2 {
        rho00: 0.5 * (1.0 + x.x3),
        rho11: 0.5 * (1.0 - x.x3),
        rho01: Complex64::new(0.5 * x.x1, -0.5 * x.x2),
    }
}

/// Free precession of `x0` about the z axis at frequency `omega0`, starting at t = 0.
pub fn target_trajectory(t: f64, x0: &BlochVector, omega0: f64) -> BlochVector {
    let (s, c) = (omega0 * t).sin_cos();
    BlochVector::new(x0.x1 * c - x0.x2 * s, x0.x1 * s + x0.x2 * c, x0.x3)
}

/// `A(t)` and `B(t)` of `ẋ = A x + B` for controls `u = (u_x, u_y)`.
pub fn drift_matrix(omega0: f64, u: (f64, f64), delta: f64, gamma: f64) -> (Matrix3<f64>, Vector3<f64>) {
    let (ux, uy) = u;
    #[rustfmt::skip]
    let a = Matrix3::new(
        -delta, -omega0,  uy,
        omega0, -delta,  -ux,
        -uy,     ux,     -2.0 * delta,
    );
    (a, Vector3::new(0.0, 0.0, -2.0 * gamma))
}

/// Time-sampled Bloch vectors (or, for costates, the multiplier vector).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<BlochVector>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, states: Vec<BlochVector>) -> Result<Self> {
        if states.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "trajectory has {} states for a grid of {} samples",
                states.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, states })
    }

    /// Free precession of `x0` sampled on `grid`.
    pub fn target(grid: TimeGrid, x0: &BlochVector, omega0: f64) -> Self {
        let states = grid.times().iter().map(|&t| target_trajectory(t, x0, omega0)).collect();
        Self { grid, states }
    }

    pub fn last(&self) -> BlochVector {
        *self.states.last().expect("trajectories are never empty")
    }
}

/// Control amplitudes `(u_x, u_y)` on a grid, linearly interpolated in between.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    pub grid: TimeGrid,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
}

impl ControlField {
    pub fn new(grid: TimeGrid, ux: Vec<f64>, uy: Vec<f64>) -> Result<Self> {
        if ux.len() != grid.len() || uy.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "control arrays ({}, {}) do not match grid of {} samples",
                ux.len(),
                uy.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, ux, uy })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self { grid, ux: vec![0.0; grid.len()], uy: vec![0.0; grid.len()] }
    }

    pub fn sample(&self, k: usize) -> (f64, f64) {
        (self.ux[k], self.uy[k])
    }

    /// Linear interpolation at time `t` (clamped to the grid).
    pub fn at(&self, t: f64) -> (f64, f64) {
        let (k, frac) = locate(&self.grid, t);
        if k + 1 >= self.grid.len() {
            return self.sample(self.grid.n_steps);
        }
        (
            lerp(self.ux[k], self.ux[k + 1], frac),
            lerp(self.uy[k], self.uy[k + 1], frac),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.ux.iter().chain(&self.uy).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Resamples onto `grid` by linear interpolation.
    pub fn resample(&self, grid: TimeGrid) -> Self {
        let (ux, uy) = grid.times().iter().map(|&t| self.at(t)).unzip();
        Self { grid, ux, uy }
    }
}

fn lerp(a: f64, b: f64, s: f64) -> f64 {
    a + (b - a) * s
}

fn locate(grid: &TimeGrid, t: f64) -> (usize, f64) {
    let h = grid.step();
    let pos = ((t - grid.t0) / h).clamp(0.0, grid.n_steps as f64);
    let k = (pos.floor() as usize).min(grid.n_steps);
    (k, pos - k as f64)
}

impl CoefficientTrace {
    /// Linear interpolation of (Δ, γ) at `t`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let (k, frac) = locate(&self.grid, t);
        if k + 1 >= self.grid.len() {
            let k = self.grid.n_steps;
            return (self.delta[k], self.gamma[k]);
        }
        (
            lerp(self.delta[k], self.delta[k + 1], frac),
            lerp(self.gamma[k], self.gamma[k + 1], frac),
        )
    }

    /// Resamples onto `grid` by linear interpolation.
    pub fn resample(&self, grid: TimeGrid) -> Self {
        let (delta, gamma): (Vec<f64>, Vec<f64>) = grid.times().iter().map(|&t| self.at(t)).unzip();
        Self {
            grid,
            from_quadrature: vec![false; grid.len()],
            delta,
            gamma,
            ..self.clone()
        }
    }
}

/// Drift `(A, B)` at sample `k`, or at the midpoint of step `k` when `mid` is set.
pub(crate) fn drift_at(
    controls: &ControlField,
    coeffs: &CoefficientTrace,
    k: usize,
    mid: bool,
) -> (Matrix3<f64>, Vector3<f64>) {
    if mid {
        let u = (
            0.5 * (controls.ux[k] + controls.ux[k + 1]),
            0.5 * (controls.uy[k] + controls.uy[k + 1]),
        );
        let d = 0.5 * (coeffs.delta[k] + coeffs.delta[k + 1]);
        let g = 0.5 * (coeffs.gamma[k] + coeffs.gamma[k + 1]);
        drift_matrix(coeffs.omega0, u, d, g)
    } else {
        drift_matrix(coeffs.omega0, controls.sample(k), coeffs.delta[k], coeffs.gamma[k])
    }
}

pub(crate) fn check_same_grid(a: &TimeGrid, b: &TimeGrid) -> Result<()> {
    if a != b {
        return Err(Error::InvalidParameter(format!(
            "grids differ: {a:?} vs {b:?}"
        )));
    }
    Ok(())
}

/// Classical RK4 on the shared grid of `controls` and `coeffs`; half-step
/// values of u, Δ and γ are linear interpolants.
pub fn integrate(x0: &BlochVector, controls: &ControlField, coeffs: &CoefficientTrace) -> Result<Trajectory> {
    check_same_grid(&controls.grid, &coeffs.grid)?;
    let grid = coeffs.grid;
    let h = grid.step();
    let mut states = Vec::with_capacity(grid.len());
    let mut x = x0.to_vector();
    states.push(*x0);
    for k in 0..grid.n_steps {
        let (a0, b0) = drift_at(controls, coeffs, k, false);
        let (am, bm) = drift_at(controls, coeffs, k, true);
        let (a1, b1) = drift_at(controls, coeffs, k + 1, false);
        let k1 = a0 * x + b0;
        let k2 = am * (x + 0.5 * h * k1) + bm;
        let k3 = am * (x + 0.5 * h * k2) + bm;
        let k4 = a1 * (x + h * k3) + b1;
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        states.push(BlochVector::from_vector(&x));
    }
    Ok(Trajectory { grid, states })
}

/// Endpoint difference between the run on the given grid and a run on a grid
/// with half the step (controls and coefficients linearly interpolated).
pub fn step_halving_error(x0: &BlochVector, controls: &ControlField, coeffs: &CoefficientTrace) -> Result<f64> {
    let coarse = integrate(x0, controls, coeffs)?;
    let fine_grid = coeffs.grid.refined(2);
    let fine = integrate(x0, &controls.resample(fine_grid), &coeffs.resample(fine_grid))?;
    Ok((coarse.last().to_vector() - fine.last().to_vector()).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn free(grid: TimeGrid) -> CoefficientTrace {
        CoefficientTrace::constant(grid, 0.0, 0.0, 1.0)
    }

    fn close(a: &BlochVector, b: &BlochVector, eps: f64) -> bool {
        (a.to_vector() - b.to_vector()).norm() <= eps
    }

    #[test]
    fn density_to_bloch_examples() {
        let ground = DensityMatrix2 { rho00: 1.0, rho11: 0.0, rho01: Complex64::new(0.0, 0.0) };
        assert_eq!(bloch_from_density(&ground), BlochVector::new(0.0, 0.0, 1.0));
        let mixed = DensityMatrix2 { rho00: 0.5, rho11: 0.5, rho01: Complex64::new(0.0, 0.0) };
        assert_eq!(bloch_from_density(&mixed), BlochVector::new(0.0, 0.0, 0.0));
        let plus = DensityMatrix2 { rho00: 0.5, rho11: 0.5, rho01: Complex64::new(0.5, 0.0) };
        assert_eq!(bloch_from_density(&plus), BlochVector::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn bloch_to_density_examples() {
        let m = density_from_bloch(&BlochVector::default());
        assert_eq!((m.rho00, m.rho11, m.rho01), (0.5, 0.5, Complex64::new(0.0, 0.0)));
        let g = density_from_bloch(&BlochVector::new(0.0, 0.0, 1.0));
        assert_eq!((g.rho00, g.rho11), (1.0, 0.0));
        let x0 = BlochVector::reference_initial_state();
        let rho = density_from_bloch(&x0);
        assert!(rho.is_valid(1e-12));
        assert!(close(&bloch_from_density(&rho), &x0, 1e-15));
        assert_abs_diff_eq!(x0.norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn unphysical_vector_is_flagged() {
        let x = BlochVector::new(0.9, 0.9, 0.0);
        assert!(!x.is_physical());
        assert!(!density_from_bloch(&x).is_valid(1e-12));
    }

    #[test]
    fn target_examples() {
        let x0 = BlochVector::reference_initial_state();
        assert!(close(&target_trajectory(0.0, &x0, 1.0), &x0, 0.0));
        assert!(close(&target_trajectory(TAU, &x0, 1.0), &x0, 1e-14));
        let t = target_trajectory(FRAC_PI_2, &BlochVector::new(1.0, 0.0, 0.0), 1.0);
        assert!(close(&t, &BlochVector::new(0.0, 1.0, 0.0), 1e-15));
    }

    #[test]
    fn drift_structure() {
        let (a, b) = drift_matrix(1.0, (0.0, 0.0), 0.0, 0.0);
        assert_eq!(a, -a.transpose());
        assert_eq!(b, Vector3::zeros());
        let (a0, _) = drift_matrix(1.3, (0.0, 0.0), 0.2, 0.1);
        let (au, bu) = drift_matrix(1.3, (0.7, -0.4), 0.2, 0.1);
        let d = au - a0;
        assert_eq!(d, -d.transpose());
        assert_abs_diff_eq!(au.trace(), -4.0 * 0.2, epsilon = 1e-15);
        assert_eq!(bu, Vector3::new(0.0, 0.0, -0.2));
    }

    #[test]
    fn closed_system_returns_after_one_period() {
        let grid = TimeGrid::new(0.0, TAU, 1000).unwrap();
        let x0 = BlochVector::new(1.0, 0.0, 0.0);
        let traj = integrate(&x0, &ControlField::zeros(grid), &free(grid)).unwrap();
        assert!(close(&traj.last(), &x0, 1e-8));
        let target = Trajectory::target(grid, &x0, 1.0);
        for (s, t) in traj.states.iter().zip(&target.states) {
            assert!(close(s, t, 1e-8));
        }
    }

    #[test]
    fn constant_dephasing_envelope() {
        let d = 0.3;
        let grid = TimeGrid::new(0.0, 10.0, 2000).unwrap();
        let coeffs = CoefficientTrace::constant(grid, d, 0.0, 1.0);
        let traj = integrate(&BlochVector::new(1.0, 0.0, 0.0), &ControlField::zeros(grid), &coeffs).unwrap();
        for (t, s) in grid.times().iter().zip(&traj.states) {
            let transverse = (s.x1 * s.x1 + s.x2 * s.x2).sqrt();
            assert_abs_diff_eq!(transverse, (-d * t).exp(), epsilon = 1e-6);
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let x0 = BlochVector::new(0.6, -0.3, 0.5);
        let endpoint_error = |n: usize| {
            let grid = TimeGrid::new(0.0, 2.0 * PI, n).unwrap();
            let traj = integrate(&x0, &ControlField::zeros(grid), &free(grid)).unwrap();
            let exact = target_trajectory(2.0 * PI, &x0, 1.0);
            (traj.last().to_vector() - exact.to_vector()).norm()
        };
        let ratio = endpoint_error(20) / endpoint_error(40);
        assert!(ratio >= 12.0, "ratio {ratio}");
    }

    #[test]
    fn step_halving_self_check_is_small() {
        let grid = TimeGrid::new(0.0, 5.0, 500).unwrap();
        let coeffs = CoefficientTrace::constant(grid, 0.05, 0.01, 1.0);
        let ux: Vec<f64> = grid.times().iter().map(|t| 0.2 * t.sin()).collect();
        let controls = ControlField::new(grid, ux, vec![0.1; grid.len()]).unwrap();
        let err = step_halving_error(&BlochVector::reference_initial_state(), &controls, &coeffs).unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let g1 = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let g2 = TimeGrid::new(0.0, 1.0, 20).unwrap();
        assert!(integrate(&BlochVector::default(), &ControlField::zeros(g1), &free(g2)).is_err());
        assert!(ControlField::new(g1, vec![0.0; 3], vec![0.0; 11]).is_err());
        assert!(TimeGrid::new(1.0, 1.0, 10).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn control_interpolation() {
        let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let c = ControlField::new(grid, vec![0.0, 1.0, 3.0], vec![2.0, 2.0, 0.0]).unwrap();
        assert_eq!(c.at(0.25), (0.5, 2.0));
        assert_eq!(c.at(0.75), (2.0, 1.0));
        assert_eq!(c.at(1.0), (3.0, 0.0));
    }

    fn controls_strategy(grid: TimeGrid) -> impl Strategy<Value = ControlField> {
        (-1.0f64..1.0, -1.0f64..1.0, 0.1f64..3.0).prop_map(move |(a, b, w)| {
            let ts = grid.times();
            let ux = ts.iter().map(|t| a * (w * t).sin()).collect();
            let uy = ts.iter().map(|t| b * (w * t).cos()).collect();
            ControlField::new(grid, ux, uy).unwrap()
        })
    }

    fn unit_ball() -> impl Strategy<Value = BlochVector> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("inside ball", |(a, b, c)| a * a + b * b + c * c <= 1.0)
            .prop_map(|(a, b, c)| BlochVector::new(a, b, c))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn norm_contracts_in_lindblad_regime(
            x0 in unit_ball(),
            d in 0.0f64..0.5,
            g_frac in 0.0f64..1.0,
            u in controls_strategy(TimeGrid::new(0.0, 10.0, 1000).unwrap()),
        ) {
            let grid = u.grid;
            let coeffs = CoefficientTrace::constant(grid, d, d * g_frac, 1.0);
            let traj = integrate(&x0, &u, &coeffs).unwrap();
            for s in &traj.states {
                prop_assert!(s.norm() <= 1.0 + 1e-6);
            }
        }

        #[test]
        fn integrate_is_affine_in_initial_state(
            x0 in unit_ball(),
            y0 in unit_ball(),
            alpha in -1.0f64..2.0,
            u in controls_strategy(TimeGrid::new(0.0, 5.0, 400).unwrap()),
        ) {
            let grid = u.grid;
            let coeffs = CoefficientTrace::constant(grid, 0.1, 0.05, 1.0);
            let mix = BlochVector::from_vector(&(alpha * x0.to_vector() + (1.0 - alpha) * y0.to_vector()));
            let tm = integrate(&mix, &u, &coeffs).unwrap();
            let tx = integrate(&x0, &u, &coeffs).unwrap();
            let ty = integrate(&y0, &u, &coeffs).unwrap();
            for k in 0..grid.len() {
                let combo = alpha * tx.states[k].to_vector() + (1.0 - alpha) * ty.states[k].to_vector();
                prop_assert!((tm.states[k].to_vector() - combo).norm() <= 1e-10);
            }
        }
    }
}
