//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use std::f64::consts::TAU;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use tcl_control::analysis::{
    coherence_trace, compare_controls, control_bandwidth, controllability_table, CellOutcome,
    ControllabilityLabel, LabelThresholds, TABLE_KBT, TABLE_R,
};
use tcl_control::pmp::{directional_derivative, evaluate_control};
use tcl_control::reservoir::{
    delta_exact, delta_high_t, gamma_exact, MarkovianLimits, SERIES_ARGUMENT_LIMIT,
};
use tcl_control::special::DEFAULT_TOL;
use tcl_control::*;

const ALPHA2: f64 = 0.01;

fn params(r: f64, kbt: f64) -> ReservoirParams {
    ReservoirParams::new(ALPHA2, 1.0, r, kbt).unwrap()
}

fn cells() -> Vec<(f64, f64)> {
    TABLE_R.iter().flat_map(|&r| TABLE_KBT.iter().map(move |&k| (r, k))).collect()
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn coefficient_oracle() -> Verdict {
    let grid = TimeGrid::new(0.0, 20.0, 199).unwrap();
    let tol = 1e-6 * ALPHA2;
    let worst: Vec<(f64, f64, f64, f64)> = cells()
        .par_iter()
        .map(|&(r, kbt)| {
            let p = params(r, kbt);
            let quad = coefficient_trace(&grid, &p, CoefficientMethod::Quadrature).unwrap();
            let mut dg = 0.0f64;
            let mut dd = 0.0f64;
            for (k, t) in grid.times().into_iter().enumerate() {
                dg = dg.max((gamma_exact(t, &p) - quad.gamma[k]).abs());
                if t > 0.0 && (-p.nu1() * t).exp() <= SERIES_ARGUMENT_LIMIT {
                    let d = delta_exact(t, &p, DEFAULT_TOL).unwrap();
                    dd = dd.max((d - quad.delta[k]).abs());
                }
            }
            (r, kbt, dg, dd)
        })
        .collect();
    let max_g = worst.iter().map(|w| w.2).fold(0.0, f64::max);
    let max_d = worst.iter().map(|w| w.3).fold(0.0, f64::max);
    verdict(
        max_g <= tol && max_d <= tol,
        format!("max |dgamma| = {max_g:.3e}, max |ddelta| = {max_d:.3e}, tolerance {tol:.1e}"),
    )
}

fn limit_consistency() -> Verdict {
    let mut worst_gamma = 0.0f64;
    for &r in &TABLE_R {
        let p = params(r, 1.0);
        let gm = markovian_limits(&p).gamma_m;
        let t_start = 30.0 / r;
        for k in 0..=1000 {
            let t = t_start + k as f64 * 0.1;
            worst_gamma = worst_gamma.max((gamma_exact(t, &p) - gm).abs() / gm);
        }
    }
    let p = params(0.1, 300.0);
    let ht_inf = (delta_high_t(1e4, &p) - markovian_limits(&p).delta_m_high_t).abs();
    let cold = params(0.1, 1e4);
    let MarkovianLimits { delta_m, delta_m_high_t, .. } = markovian_limits(&cold);
    let ratio = delta_m / delta_m_high_t;
    verdict(
        worst_gamma <= 1e-6 && ht_inf <= 1e-12 && (ratio - 1.0).abs() <= 1e-3,
        format!(
            "gamma rel dev {worst_gamma:.2e}, high-T tail {ht_inf:.1e}, Delta_M/Delta_M^HT at kBT=1e4: {ratio:.6}"
        ),
    )
}

fn high_t_agreement() -> Verdict {
    let p = params(0.1, 300.0);
    let scale = markovian_limits(&p).delta_m_high_t;
    let mut worst = 0.0f64;
    for k in 0..=1990 {
        let t = 0.1 + k as f64 * 0.01;
        let dev = (delta_exact(t, &p, DEFAULT_TOL).unwrap() - delta_high_t(t, &p)).abs() / scale;
        worst = worst.max(dev);
    }
    verdict(worst <= 0.02, format!("max relative deviation {worst:.3e} (limit 0.02)"))
}

fn delta_trace(p: &ReservoirParams) -> CoefficientTrace {
    coefficient_trace(&TimeGrid::new(0.0, 20.0, 4000).unwrap(), p, CoefficientMethod::Exact).unwrap()
}

fn non_lindblad_detection() -> Verdict {
    let hot_wide = delta_trace(&params(10.0, 300.0));
    let negative_wide = hot_wide.delta.iter().skip(1).any(|&d| d < 0.0);
    let wide_min = hot_wide.delta.iter().skip(1).cloned().fold(f64::INFINITY, f64::min);
    let mut detail = format!("r=10,kBT=300 min Delta {wide_min:.3e}");
    let mut narrow_positive = true;
    for &kbt in &TABLE_KBT {
        let tr = delta_trace(&params(0.1, kbt));
        let (k, min) = tr
            .delta
            .iter()
            .enumerate()
            .skip(1)
            .fold((0, f64::INFINITY), |acc, (k, &d)| if d < acc.1 { (k, d) } else { acc });
        if min <= 0.0 {
            narrow_positive = false;
        }
        detail.push_str(&format!("; r=0.1,kBT={kbt} min Delta {min:.3e} at t={:.3}", tr.grid.time(k)));
    }
    verdict(negative_wide && narrow_positive, detail)
}

fn integrator() -> Verdict {
    let x0 = BlochVector::new(1.0, 0.0, 0.0);
    let endpoint_error = |n: usize, tf: f64| {
        let grid = TimeGrid::new(0.0, tf, n).unwrap();
        let coeffs = CoefficientTrace::constant(grid, 0.0, 0.0, 1.0);
        let traj = integrate(&x0, &ControlField::zeros(grid), &coeffs).unwrap();
        (traj.last().to_vector() - target_trajectory(tf, &x0, 1.0).to_vector()).norm()
    };
    let round_trip = endpoint_error(1000, TAU);
    let (e1, e2) = (endpoint_error(40, TAU), endpoint_error(80, TAU));
    let order = (e1 / e2).log2();
    verdict(
        round_trip <= 1e-8 && order >= 3.8,
        format!("round-trip error {round_trip:.2e}, observed order {order:.3}"),
    )
}

fn smooth_field(grid: TimeGrid, rng: &mut ChaCha8Rng) -> ControlField {
    let modes: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.2..3.0),
                rng.gen_range(0.0..TAU),
            )
        })
        .collect();
    let eval = |t: f64, pick: usize| -> f64 {
        modes.iter().map(|m| if pick == 0 { m.0 } else { m.1 } * (m.2 * t + m.3).sin()).sum()
    };
    let ts = grid.times();
    ControlField::new(grid, ts.iter().map(|&t| eval(t, 0)).collect(), ts.iter().map(|&t| eval(t, 1)).collect()).unwrap()
}

fn gradient_check() -> Verdict {
    let s = Scenario::default();
    let coeffs = coefficient_trace(&s.grid, &s.params, CoefficientMethod::Exact).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut base = smooth_field(s.grid, &mut rng);
    base.ux.iter_mut().chain(base.uy.iter_mut()).for_each(|u| *u *= 0.1);
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let dir = smooth_field(s.grid, &mut rng);
        let predicted = directional_derivative(&s.x0, &base, &dir, &coeffs, &s.weights).unwrap();
        let shifted = |sign: f64| {
            let mut c = base.clone();
            for k in 0..s.grid.len() {
                c.ux[k] += sign * eps * dir.ux[k];
                c.uy[k] += sign * eps * dir.uy[k];
            }
            evaluate_control(&s.x0, &c, &coeffs, &s.weights).unwrap().1
        };
        let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * eps);
        worst = worst.max((predicted - fd).abs() / fd.abs());
    }
    verdict(worst <= 1e-3, format!("worst relative mismatch {worst:.2e} over 5 directions"))
}

fn solver_properties(outcomes: &[(f64, f64, CellOutcome)]) -> Verdict {
    let mut failures = Vec::new();
    let mut unconverged = 0;
    for (r, kbt, out) in outcomes {
        for (name, res) in [("markovian", &out.markovian), ("non-markovian", &out.non_markovian)] {
            let j0 = res.cost_history[0];
            if res.final_cost() > j0 {
                failures.push(format!("{name} r={r} kBT={kbt}: J(u*) > J(0)"));
            }
            if res.cost_history.windows(2).any(|w| w[1] > w[0]) {
                failures.push(format!("{name} r={r} kBT={kbt}: cost increased"));
            }
            if res.converged {
                let bound = 1e-4 * res.control.max_abs().max(1.0);
                if res.stationarity_residual > bound {
                    failures.push(format!(
                        "{name} r={r} kBT={kbt}: residual {:.2e} > {bound:.2e}",
                        res.stationarity_residual
                    ));
                }
            } else {
                unconverged += 1;
            }
        }
    }
    let s = Scenario::default();
    let free = CoefficientTrace::constant(s.grid, 0.0, 0.0, 1.0);
    let trivial = solve_fbsm(&s.x0, &free, &s.weights, &s.sweep).unwrap();
    if trivial.final_cost() > 1e-8 || trivial.control.max_abs() > 1e-4 {
        failures.push(format!(
            "free system: J* = {:.2e}, max|u*| = {:.2e}",
            trivial.final_cost(),
            trivial.control.max_abs()
        ));
    }
    let detail = if failures.is_empty() {
        format!("18 sweeps checked ({unconverged} stopped unconverged), free system J* = {:.1e}", trivial.final_cost())
    } else {
        failures.join("; ")
    };
    verdict(failures.is_empty(), detail)
}

fn figure_coherence(out: &CellOutcome) -> Verdict {
    let grid = out.uncontrolled.grid;
    let cu = coherence_trace(&out.uncontrolled);
    let cn = coherence_trace(&out.non_markovian.state);
    let cm = coherence_trace(&out.markovian_state);
    let (mut margin, mut at) = (f64::INFINITY, 0.0);
    for k in 0..grid.len() {
        let t = grid.time(k);
        if t >= 1.0 && cn[k] - cu[k] < margin {
            margin = cn[k] - cu[k];
            at = t;
        }
    }
    let final_margin = cn[grid.n_steps] - cm[grid.n_steps];
    verdict(
        margin >= 0.0 && final_margin >= 0.0,
        format!(
            "min(non-Markovian - uncontrolled) on [1, tf] = {margin:.4e} at t={at:.3}; final non-Markovian - Markovian = {final_margin:.4e}"
        ),
    )
}

fn figure_bandwidth(out: &CellOutcome) -> Verdict {
    let nm = control_bandwidth(&out.non_markovian.control, 0.9).unwrap();
    let m = control_bandwidth(&out.markovian.control, 0.9).unwrap();
    verdict(nm > m, format!("bandwidth non-Markovian {nm:.4}, Markovian {m:.4}"))
}

fn table_reproduction() -> Verdict {
    use ControllabilityLabel::*;
    let s = Scenario::default();
    let thresholds = LabelThresholds::default();
    let cells = controllability_table(
        &TABLE_KBT,
        &TABLE_R,
        &s.params,
        &s.x0,
        &s.grid,
        CoefficientMethod::Exact,
        &s.weights,
        &s.sweep,
        &thresholds,
    )
        .unwrap();
    let expected = [
        SlowDecay,
        SlowDecay,
        ControllableNonMarkovianOnly,
        Controllable,
        Uncontrollable,
        Uncontrollable,
        Controllable,
        Uncontrollable,
        Uncontrollable,
    ];
    let mut mismatches = Vec::new();
    for (c, e) in cells.iter().zip(expected) {
        if c.label != e {
            mismatches.push(format!(
                "r={} kBT={}: {} (expected {e}; retention u={:.3} m={:.3} n={:.3})",
                c.r, c.kbt, c.label, c.uncontrolled_retention, c.markovian_retention, c.non_markovian_retention
            ));
        }
    }
    let header = format!(
        "thresholds slow_decay={} gain={} floor={}; {}/9 cells match",
        thresholds.slow_decay,
        thresholds.gain,
        thresholds.floor,
        9 - mismatches.len()
    );
    let detail = if mismatches.is_empty() { header } else { format!("{header}; {}", mismatches.join("; ")) };
    verdict(mismatches.is_empty(), detail)
}

fn main() -> ExitCode {
    let started = Instant::now();
    let s = Scenario::default();
    let outcomes: Vec<(f64, f64, CellOutcome)> = cells()
        .par_iter()
        .map(|&(r, kbt)| {
            let p = params(r, kbt);
            (r, kbt, compare_controls(&s.x0, &p, &s.grid, CoefficientMethod::Exact, &s.weights, &s.sweep).unwrap())
        })
        .collect();
    let high_t = &outcomes
        .iter()
        .find(|(r, kbt, _)| *r == 0.1 && *kbt == 300.0)
        .expect("high-temperature cell")
        .2;

    let results: Vec<(&str, Verdict)> = vec![
        ("coefficient oracle equivalence", coefficient_oracle()),
        ("limit consistency", limit_consistency()),
        ("high-temperature agreement", high_t_agreement()),
        ("non-Lindblad detection", non_lindblad_detection()),
        ("integrator accuracy", integrator()),
        ("adjoint gradient check", gradient_check()),
        ("solver optimality properties", solver_properties(&outcomes)),
        ("controlled coherence ordering", figure_coherence(high_t)),
        ("control bandwidth ordering", figure_bandwidth(high_t)),
        ("controllability table", table_reproduction()),
    ];
    let mut failed = 0;
    for (i, (name, v)) in results.iter().enumerate() {
        println!("[{}] {:>2}. {name}: {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("{} passed, {failed} failed in {:.1?}", results.len() - failed, started.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
