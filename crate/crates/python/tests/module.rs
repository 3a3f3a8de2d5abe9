use std::ffi::CString;

use pyo3::prelude::*;
use pyo3::types::PyDict;
use tcl_control::tcl_control as extension;

fn run(code: &str) -> PyResult<()> {
    Python::attach(|py| {
        let globals = PyDict::new(py);
        py.run(&CString::new(code).unwrap(), Some(&globals), None)
    })
}

fn init() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| {
        pyo3::append_to_inittab!(extension);
        Python::initialize();
    });
}

#[test]
fn limits_and_coefficients() {
    init();
    run(r#"
import math, tcl_control as tc
p = tc.ReservoirParams(0.01, 1.0, 0.1, 300.0)
g, d, dht = p.markovian_limits()
assert math.isclose(g, 0.01 * 0.01 / 1.01, rel_tol=1e-12)
assert math.isclose(dht, 2 * 0.01 * 300 * 0.01 / 1.01, rel_tol=1e-12)
assert math.isclose(tc.gamma_exact(200.0, p), g, rel_tol=1e-6)
t, delta, gamma = tc.coefficient_trace(p, 2.0, 20, "markovian")
assert len(t) == 21 and all(x == g for x in gamma)
assert math.isclose(tc.hyp2f1(1, 1, 2, 0.5).real, 2 * math.log(2), rel_tol=1e-10)
"#)
    .unwrap();
}

#[test]
fn errors_map_to_python_exceptions() {
    init();
    run(r#"
import tcl_control as tc
try:
    tc.ReservoirParams(0.01, 1.0, -1.0, 1.0)
    raise AssertionError("accepted")
except ValueError:
    pass
try:
    tc.scenario_labels("[reservoir]\nbogus = 1\n")
    raise AssertionError("accepted")
except ValueError as e:
    assert "line 2" in str(e)
p = tc.ReservoirParams(0.01, 1.0, 0.1, 300.0)
try:
    tc.optimize(p, (1.0, 0.0, 0.0), 5.0, 500, max_iters=1)
except RuntimeError:
    raise AssertionError("non-convergence is reported in the result")
"#)
    .unwrap();
}

#[test]
fn optimize_reports_monotone_history() {
    init();
    run(r#"
import tcl_control as tc
p = tc.ReservoirParams(0.01, 1.0, 0.1, 300.0)
r = tc.optimize(p, (1.0, 0.0, 0.0), 5.0, 500, max_iters=400)
h = r["cost_history"]
assert r["converged"]
assert all(b <= a for a, b in zip(h, h[1:]))
assert r["costate"][-1] == (0.0, 0.0, 0.0)
s = tc.evolve(p, (1.0, 0.0, 0.0), 5.0, 500, "exact", r["ux"], r["uy"])
assert s == r["state"]
"#)
    .unwrap();
}
