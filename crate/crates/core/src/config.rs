//! Scenario files.
//!
//! Flat `key = value` lines grouped under `[section]` headers. Blank lines and
//! lines starting with `#` or `;` are ignored. Unknown sections or keys are
//! rejected with their line number.
//!
//! ```text
//! [reservoir]
//! alpha2 = 0.01
//! omega0 = 1
//! r = 0.1
//! kBT = 300
//! gamma0 = 1
//!
//! [state]
//! x1 = 0.8660254037844386
//! x2 = -0.3535533905932738
//! x3 = -0.3535533905932738
//!
//! [grid]
//! tf = 20
//! n_steps = 4000
//!
//! [cost]
//! theta = 1
//!
//! [sweep]
//! relaxation = 0.3
//! max_iters = 3000
//! tol_cost = 1e-10
//! tol_control = 1e-5
//!
//! [run]
//! label = highT_r0.1
//! method = exact
//!
//! [batch]
//! kBT = 0.3, 3, 300
//! r = 0.1, 1, 10
//!
//! [table]
//! slow_decay = 0.8
//! gain = 2
//! floor = 0.5
//! ```
//!
//! A `[batch]` section expands the base scenario over the listed values, one
//! scenario per combination, labelled `{label}_kBT{kBT}_r{r}`.

use std::collections::{BTreeMap, HashSet};

use crate::analysis::LabelThresholds;
use crate::bloch::{BlochVector, TimeGrid};
use crate::error::{Error, Result};
use crate::pmp::{CostWeights, SweepConfig};
use crate::reservoir::{CoefficientMethod, ReservoirParams};

/// One fully validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: ReservoirParams,
    pub x0: BlochVector,
    pub grid: TimeGrid,
    pub weights: CostWeights,
    pub sweep: SweepConfig,
    pub coefficient_method: CoefficientMethod,
    pub label: String,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            params: ReservoirParams { alpha2: 0.01, omega0: 1.0, r: 0.1, kbt: 300.0, gamma0: 1.0 },
            x0: BlochVector::reference_initial_state(),
            grid: TimeGrid { t0: 0.0, tf: 20.0, n_steps: 4000 },
            weights: CostWeights::default(),
            sweep: SweepConfig::default(),
            coefficient_method: CoefficientMethod::Exact,
            label: "default".into(),
        }
    }
}

impl Scenario {
    /// `(key, value)` pairs of every setting, in file order.
    pub fn settings(&self) -> Vec<(&'static str, String)> {
        vec![
            ("reservoir.alpha2", fmt(self.params.alpha2)),
            ("reservoir.omega0", fmt(self.params.omega0)),
            ("reservoir.r", fmt(self.params.r)),
            ("reservoir.kBT", fmt(self.params.kbt)),
            ("reservoir.gamma0", fmt(self.params.gamma0)),
            ("state.x1", fmt(self.x0.x1)),
            ("state.x2", fmt(self.x0.x2)),
            ("state.x3", fmt(self.x0.x3)),
            ("grid.tf", fmt(self.grid.tf)),
            ("grid.n_steps", self.grid.n_steps.to_string()),
            ("cost.theta", fmt(self.weights.theta)),
            ("sweep.relaxation", fmt(self.sweep.relaxation)),
            ("sweep.max_iters", self.sweep.max_iters.to_string()),
            ("sweep.tol_cost", fmt(self.sweep.tol_cost)),
            ("sweep.tol_control", fmt(self.sweep.tol_control)),
            ("run.label", self.label.clone()),
            ("run.method", self.coefficient_method.to_string()),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        CostWeights::new(self.weights.theta)?;
        self.sweep.validate()?;
        TimeGrid::new(self.grid.t0, self.grid.tf, self.grid.n_steps)?;
        if self.x0.norm() > 1.0 + 1e-12 {
            return Err(Error::Validation(format!(
                "initial state has norm {} > 1",
                self.x0.norm()
            )));
        }
        if self.label.is_empty() {
            return Err(Error::Validation("label must be nonempty".into()));
        }
        Ok(())
    }
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

/// A parsed scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// One scenario, or one per batch combination.
    pub scenarios: Vec<Scenario>,
    /// The scenario before batch expansion.
    pub base: Scenario,
    /// `[batch]` values of `(kBT, r)`, if a batch was given.
    pub batch: Option<(Vec<f64>, Vec<f64>)>,
    pub thresholds: LabelThresholds,
    /// Keys that were not given and took their default value.
    pub defaulted: Vec<&'static str>,
}

const SECTIONS: &[&str] = &["reservoir", "state", "grid", "cost", "sweep", "run", "batch", "table"];

struct Entry {
    line: usize,
    value: String,
}

fn key_slot(section: &str, key: &str) -> Option<&'static str> {
    ALL_NAMES.iter().copied().find(|n| n.split_once('.') == Some((section, key)))
}

const ALL_NAMES: &[&str] = &[
    "reservoir.alpha2",
    "reservoir.omega0",
    "reservoir.r",
    "reservoir.kBT",
    "reservoir.gamma0",
    "state.x1",
    "state.x2",
    "state.x3",
    "grid.tf",
    "grid.n_steps",
    "cost.theta",
    "sweep.relaxation",
    "sweep.max_iters",
    "sweep.tol_cost",
    "sweep.tol_control",
    "run.label",
    "run.method",
    "batch.kBT",
    "batch.r",
    "table.slow_decay",
    "table.gain",
    "table.floor",
];

struct Reader {
    entries: BTreeMap<&'static str, Entry>,
    defaulted: Vec<&'static str>,
}

impl Reader {
    fn raw(&mut self, name: &'static str) -> Option<&Entry> {
        let e = self.entries.get(name);
        if e.is_none() && !name.starts_with("batch.") {
            self.defaulted.push(name);
        }
        e
    }

    fn f64(&mut self, name: &'static str, default: f64) -> Result<f64> {
        match self.raw(name) {
            None => Ok(default),
            Some(e) => parse_number(&e.value, e.line, name),
        }
    }

    fn usize(&mut self, name: &'static str, default: usize) -> Result<usize> {
        match self.raw(name) {
            None => Ok(default),
            Some(e) => e.value.parse().map_err(|_| Error::Parse {
                line: e.line,
                message: format!("{name}: expected a nonnegative integer, got '{}'", e.value),
            }),
        }
    }

    fn list(&mut self, name: &'static str) -> Result<Option<Vec<f64>>> {
        match self.raw(name) {
            None => Ok(None),
            Some(e) => {
                let (line, value) = (e.line, e.value.clone());
                let items: Result<Vec<f64>> = value
                    .split(',')
                    .map(|s| parse_number(s.trim(), line, name))
                    .collect();
                let items = items?;
                if items.is_empty() {
                    return Err(Error::Parse { line, message: format!("{name}: empty list") });
                }
                Ok(Some(items))
            }
        }
    }
}

fn parse_number(s: &str, line: usize, name: &str) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("{name}: expected a number, got '{s}'"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse { line, message: format!("{name}: value must be finite") });
    }
    Ok(v)
}

/// Parses and validates a scenario file. Empty input yields the default scenario.
pub fn parse_config(text: &str) -> Result<Config> {
    let mut section: Option<String> = None;
    let mut entries = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                line,
                message: format!("malformed section header '{s}'"),
            })?;
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(Error::Parse { line, message: format!("unknown section [{name}]") });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = s.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected key = value, got '{s}'"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section.as_deref().ok_or_else(|| Error::Parse {
            line,
            message: format!("key '{key}' appears before any [section]"),
        })?;
        let slot = key_slot(sec, key).ok_or_else(|| Error::Parse {
            line,
            message: format!("unknown key '{key}' in [{sec}]"),
        })?;
        if entries.insert(slot, Entry { line, value: value.to_string() }).is_some() {
            return Err(Error::Parse { line, message: format!("duplicate key '{key}' in [{sec}]") });
        }
    }

    let d = Scenario::default();
    let mut rd = Reader { entries, defaulted: Vec::new() };
    let params = ReservoirParams {
        alpha2: rd.f64("reservoir.alpha2", d.params.alpha2)?,
        omega0: rd.f64("reservoir.omega0", d.params.omega0)?,
        r: rd.f64("reservoir.r", d.params.r)?,
        kbt: rd.f64("reservoir.kBT", d.params.kbt)?,
        gamma0: rd.f64("reservoir.gamma0", d.params.gamma0)?,
    };
    let x0 = BlochVector::new(
        rd.f64("state.x1", d.x0.x1)?,
        rd.f64("state.x2", d.x0.x2)?,
        rd.f64("state.x3", d.x0.x3)?,
    );
    let grid = TimeGrid { t0: 0.0, tf: rd.f64("grid.tf", d.grid.tf)?, n_steps: rd.usize("grid.n_steps", d.grid.n_steps)? };
    let weights = CostWeights { theta: rd.f64("cost.theta", d.weights.theta)? };
    let sweep = SweepConfig {
        relaxation: rd.f64("sweep.relaxation", d.sweep.relaxation)?,
        max_iters: rd.usize("sweep.max_iters", d.sweep.max_iters)?,
        tol_cost: rd.f64("sweep.tol_cost", d.sweep.tol_cost)?,
        tol_control: rd.f64("sweep.tol_control", d.sweep.tol_control)?,
    };
    let label = match rd.raw("run.label") {
        None => d.label.clone(),
        Some(e) => e.value.clone(),
    };
    let coefficient_method = match rd.raw("run.method") {
        None => d.coefficient_method,
        Some(e) => e.value.parse().map_err(|m: Error| Error::Parse { line: e.line, message: m.to_string() })?,
    };
    let thresholds = LabelThresholds {
        slow_decay: rd.f64("table.slow_decay", LabelThresholds::default().slow_decay)?,
        gain: rd.f64("table.gain", LabelThresholds::default().gain)?,
        floor: rd.f64("table.floor", LabelThresholds::default().floor)?,
    };
    let base = Scenario { params, x0, grid, weights, sweep, coefficient_method, label };
    base.validate()?;

    let kbts = rd.list("batch.kBT")?;
    let rs = rd.list("batch.r")?;
    let (scenarios, batch) = if kbts.is_none() && rs.is_none() {
        (vec![base.clone()], None)
    } else {
        let kbts = kbts.unwrap_or_else(|| vec![base.params.kbt]);
        let rs = rs.unwrap_or_else(|| vec![base.params.r]);
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for &r in &rs {
            for &kbt in &kbts {
                let mut s = base.clone();
                s.params.kbt = kbt;
                s.params.r = r;
                s.label = format!("{}_kBT{kbt}_r{r}", base.label);
                s.validate()?;
                if !seen.insert(s.label.clone()) {
                    return Err(Error::Validation(format!("duplicate scenario label '{}'", s.label)));
                }
                out.push(s);
            }
        }
        (out, Some((kbts, rs)))
    };
    Ok(Config { scenarios, base, batch, thresholds, defaulted: rd.defaulted })
}
