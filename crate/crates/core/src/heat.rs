//! Finite-difference reference solutions for 1D transient conduction
//! through a part's thickness, with convective exchange to the autoclave
//! air on both faces.
//!
//! The solver marches backward Euler in time on a uniform node grid. Each
//! convective face gets a ghost node so the flux condition is second order
//! in space, and every step is one tridiagonal solve.

use std::path::Path;

use ndarray::Array2;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::csvio;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialProps {
    /// kg/m³
    pub density: f64,
    /// J/(kg·K)
    pub specific_heat: f64,
    /// W/(m·K)
    pub conductivity: f64,
}

impl MaterialProps {
    pub fn new(density: f64, specific_heat: f64, conductivity: f64) -> Result<Self> {
        let m = MaterialProps {
            density,
            specific_heat,
            conductivity,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("density", self.density),
            ("specific_heat", self.specific_heat),
            ("conductivity", self.conductivity),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Low-fidelity system.
    pub fn composite_1() -> Self {
        MaterialProps {
            density: 1573.0,
            specific_heat: 967.0,
            conductivity: 0.47,
        }
    }

    /// High-fidelity system.
    pub fn composite_2() -> Self {
        MaterialProps {
            density: 1581.26,
            specific_heat: 1080.22,
            conductivity: 0.702,
        }
    }

    /// α = k / (ρ·C_p), m²/s.
    pub fn diffusivity(&self) -> f64 {
        self.conductivity / (self.density * self.specific_heat)
    }

    pub fn volumetric_heat_capacity(&self) -> f64 {
        self.density * self.specific_heat
    }
}

/// Piecewise-linear air-temperature schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct CureCycle {
    knots: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for CureCycle {
    type Error = Error;

    fn try_from(knots: Vec<(f64, f64)>) -> Result<Self> {
        CureCycle::new(knots)
    }
}

impl From<CureCycle> for Vec<(f64, f64)> {
    fn from(c: CureCycle) -> Self {
        c.knots
    }
}

impl CureCycle {
    /// Knots are `(time s, air temperature °C)`; times must start at 0 and
    /// increase strictly.
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Config("a cure cycle needs at least two knots".into()));
        }
        if knots[0].0 != 0.0 {
            return Err(Error::Config(format!("cure cycle must start at t = 0, starts at {}", knots[0].0)));
        }
        if knots.iter().any(|&(t, temp)| !t.is_finite() || !temp.is_finite()) {
            return Err(Error::Config("cure cycle knots must be finite".into()));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config("cure cycle knot times must increase strictly".into()));
        }
        Ok(CureCycle { knots })
    }

    /// Ramp 0→180 °C over 500 s, hold to 2000 s, cool to 20 °C at 2500 s.
    pub fn default_one_hold() -> Self {
        CureCycle {
            knots: vec![(0.0, 0.0), (500.0, 180.0), (2000.0, 180.0), (2500.0, 20.0)],
        }
    }

    pub fn constant(temperature: f64, duration: f64) -> Result<Self> {
        Self::new(vec![(0.0, temperature), (duration, temperature)])
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn total_duration(&self) -> f64 {
        self.knots.last().unwrap().0
    }

    pub fn max_temperature(&self) -> f64 {
        self.knots.iter().map(|k| k.1).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn air_temperature(&self, t: f64) -> Result<f64> {
        let end = self.total_duration();
        if !(0.0..=end).contains(&t) {
            return Err(Error::Domain {
                what: "cure cycle time",
                value: t,
                lo: 0.0,
                hi: end,
            });
        }
        let i = self.knots.partition_point(|k| k.0 <= t);
        if i == self.knots.len() {
            return Ok(self.knots[i - 1].1);
        }
        let (t0, y0) = self.knots[i - 1];
        let (t1, y1) = self.knots[i];
        Ok(y0 + (y1 - y0) * (t - t0) / (t1 - t0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalSetup {
    pub material: MaterialProps,
    /// Part thickness L, m.
    pub thickness: f64,
    /// Bottom-face heat transfer coefficient, W/(m²·K).
    pub htc_bottom: f64,
    /// Top-face heat transfer coefficient, W/(m²·K).
    pub htc_top: f64,
    /// °C
    pub initial_temperature: f64,
    pub cycle: CureCycle,
}

impl ThermalSetup {
    pub fn composite_1() -> Self {
        ThermalSetup {
            material: MaterialProps::composite_1(),
            ..Self::composite_2()
        }
    }

    pub fn composite_2() -> Self {
        ThermalSetup {
            material: MaterialProps::composite_2(),
            thickness: 0.02,
            htc_bottom: 50.0,
            htc_top: 100.0,
            initial_temperature: 0.0,
            cycle: CureCycle::default_one_hold(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        if !(self.thickness > 0.0) {
            return Err(Error::Config(format!("thickness must be positive, got {}", self.thickness)));
        }
        if !(self.htc_bottom >= 0.0 && self.htc_top >= 0.0) {
            return Err(Error::Config("heat transfer coefficients must be nonnegative".into()));
        }
        if !self.initial_temperature.is_finite() {
            return Err(Error::Config("initial temperature must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub n_elements: usize,
    /// Nominal time step, s.
    pub dt: f64,
    /// Largest nodal change accepted in one step, °C.
    pub max_step_change: f64,
    /// Uniformly spaced snapshots over the cycle, both ends included.
    pub n_snapshots: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            n_elements: 40,
            dt: 0.0015,
            max_step_change: 1.0,
            n_snapshots: TEST_GRID_SNAPSHOTS,
        }
    }
}

const MAX_HALVINGS: u32 = 20;
pub const TEST_GRID_SNAPSHOTS: usize = 138;
pub const TEST_GRID_ELEMENTS: usize = 40;

#[derive(Clone, Debug, PartialEq)]
pub struct FieldSolution {
    pub x_nodes: Vec<f64>,
    pub t_snapshots: Vec<f64>,
    /// °C, indexed `(snapshot, node)`.
    pub temperatures: Array2<f64>,
}

impl FieldSolution {
    pub fn n_elements(&self) -> usize {
        self.x_nodes.len() - 1
    }

    /// Temperature history of one node.
    pub fn node_history(&self, node: usize) -> Vec<f64> {
        self.temperatures.column(node).to_vec()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
        let rows = self.t_snapshots.iter().enumerate().flat_map(|(s, &t)| {
            self.x_nodes
                .iter()
                .enumerate()
                .map(move |(i, &x)| vec![x, t, self.temperatures[[s, i]]])
        });
        csvio::write_f64_table(path, comments, &DATASET_HEADER, rows)
    }
}

pub const DATASET_HEADER: [&str; 3] = ["x_m", "t_s", "temp_C"];

/// `a·T[i-1] + b·T[i] + c·T[i+1] = d`, solved in place into `out`.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64], scratch: &mut [f64], out: &mut [f64]) {
    let n = diag.len();
    scratch[0] = upper[0] / diag[0];
    out[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        out[i] = (rhs[i] - lower[i] * out[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        out[i] -= scratch[i] * out[i + 1];
    }
}

struct Stepper {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
    alpha: f64,
    dx: f64,
    beta_bottom: f64,
    beta_top: f64,
}

impl Stepper {
    fn new(setup: &ThermalSetup, n_nodes: usize) -> Self {
        let dx = setup.thickness / (n_nodes - 1) as f64;
        let k = setup.material.conductivity;
        Stepper {
            lower: vec![0.0; n_nodes],
            diag: vec![0.0; n_nodes],
            upper: vec![0.0; n_nodes],
            rhs: vec![0.0; n_nodes],
            scratch: vec![0.0; n_nodes],
            alpha: setup.material.diffusivity(),
            dx,
            beta_bottom: dx * setup.htc_bottom / k,
            beta_top: dx * setup.htc_top / k,
        }
    }

    /// One backward-Euler step of length `dt` with the air at `t_air`.
    fn step(&mut self, old: &[f64], dt: f64, t_air: f64, out: &mut [f64]) {
        let n = old.len();
        let r = self.alpha * dt / (self.dx * self.dx);
        for i in 1..n - 1 {
            self.lower[i] = -r;
            self.diag[i] = 1.0 + 2.0 * r;
            self.upper[i] = -r;
            self.rhs[i] = old[i];
        }
        // Ghost node at x = 0: k(T₁ − T₋₁)/(2Δx) = h_b(T₀ − T_air).
        self.diag[0] = 1.0 + 2.0 * r + 2.0 * r * self.beta_bottom;
        self.upper[0] = -2.0 * r;
        self.rhs[0] = old[0] + 2.0 * r * self.beta_bottom * t_air;
        // Ghost node at x = L: k(T_{N+1} − T_{N−1})/(2Δx) = h_t(T_air − T_N).
        self.lower[n - 1] = -2.0 * r;
        self.diag[n - 1] = 1.0 + 2.0 * r + 2.0 * r * self.beta_top;
        self.rhs[n - 1] = old[n - 1] + 2.0 * r * self.beta_top * t_air;
        solve_tridiagonal(&self.lower, &self.diag, &self.upper, &self.rhs, &mut self.scratch, out);
    }
}

/// March the conduction problem over the whole cure cycle.
///
/// Steps whose largest nodal change exceeds `max_step_change` are retried
/// with half the step, up to 20 times; the nominal step is used again once
/// a reduced step succeeds. Steps are shortened where needed so that every
/// snapshot time is hit exactly.
pub fn solve(setup: &ThermalSetup, settings: &SolverSettings) -> Result<FieldSolution> {
    let n_nodes = settings.n_elements + 1;
    solve_from_profile(setup, settings, &vec![setup.initial_temperature; n_nodes.max(3)][..n_nodes])
}

/// Like [`solve`], but starting from an arbitrary nodal temperature profile
/// instead of the uniform initial temperature.
pub fn solve_from_profile(setup: &ThermalSetup, settings: &SolverSettings, initial: &[f64]) -> Result<FieldSolution> {
    setup.validate()?;
    if settings.n_elements < 2 {
        return Err(Error::Config(format!("n_elements must be ≥ 2, got {}", settings.n_elements)));
    }
    if !(settings.dt > 0.0) || !(settings.max_step_change > 0.0) {
        return Err(Error::Config("dt and max_step_change must be positive".into()));
    }
    if settings.n_snapshots < 2 {
        return Err(Error::Config("at least two snapshots are required".into()));
    }
    let n_nodes = settings.n_elements + 1;
    if initial.len() != n_nodes {
        return Err(Error::Dimension {
            expected: n_nodes,
            got: initial.len(),
            context: "initial temperature profile",
        });
    }
    let duration = setup.cycle.total_duration();
    let x_nodes: Vec<f64> = (0..n_nodes)
        .map(|i| setup.thickness * i as f64 / settings.n_elements as f64)
        .collect();
    let last_snap = settings.n_snapshots - 1;
    let t_snapshots: Vec<f64> = (0..settings.n_snapshots)
        .map(|s| if s == last_snap { duration } else { duration * s as f64 / last_snap as f64 })
        .collect();

    let mut temperatures = Array2::zeros((settings.n_snapshots, n_nodes));
    let mut current = initial.to_vec();
    let mut next = vec![0.0; n_nodes];
    temperatures.row_mut(0).assign(&ndarray::ArrayView1::from(&current));
    let mut stepper = Stepper::new(setup, n_nodes);

    let mut t = 0.0;
    for (s, &target) in t_snapshots.iter().enumerate().skip(1) {
        while t < target {
            let mut dt = settings.dt.min(target - t);
            let mut halvings = 0;
            loop {
                let t_new = if dt >= target - t { target } else { t + dt };
                stepper.step(&current, t_new - t, setup.cycle.air_temperature(t_new)?, &mut next);
                let change = current
                    .iter()
                    .zip(&next)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                if !change.is_finite() {
                    return Err(Error::Solver {
                        time: t,
                        detail: "non-finite temperature".into(),
                    });
                }
                if change <= settings.max_step_change {
                    t = t_new;
                    std::mem::swap(&mut current, &mut next);
                    break;
                }
                halvings += 1;
                if halvings > MAX_HALVINGS {
                    return Err(Error::Solver {
                        time: t,
                        detail: format!(
                            "nodal change {change:.3} °C still above {} °C after {MAX_HALVINGS} halvings (dt = {dt:e} s)",
                            settings.max_step_change
                        ),
                    });
                }
                dt *= 0.5;
            }
        }
        temperatures.row_mut(s).assign(&ndarray::ArrayView1::from(&current));
    }

    Ok(FieldSolution {
        x_nodes,
        t_snapshots,
        temperatures,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    /// m
    pub x: f64,
    /// s
    pub t: f64,
    /// °C
    pub temperature: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledSet {
    pub points: Vec<LabeledPoint>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points of `self` followed by points of `other` not already present
    /// at the same `(x, t)`.
    pub fn union(&self, other: &LabeledSet) -> LabeledSet {
        let key = |p: &LabeledPoint| (p.x.to_bits(), p.t.to_bits());
        let mut seen: std::collections::HashSet<_> = self.points.iter().map(key).collect();
        let mut points = self.points.clone();
        for p in &other.points {
            if seen.insert(key(p)) {
                points.push(*p);
            }
        }
        LabeledSet { points }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
        let rows = self.points.iter().map(|p| vec![p.x, p.t, p.temperature]);
        csvio::write_f64_table(path, comments, &DATASET_HEADER, rows)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let rows = csvio::read_f64_table(path, &DATASET_HEADER)?;
        Ok(LabeledSet {
            points: rows
                .into_iter()
                .map(|r| LabeledPoint {
                    x: r[0],
                    t: r[1],
                    temperature: r[2],
                })
                .collect(),
        })
    }
}

/// Closed sub-rectangle of the space-time domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub t_min: f64,
    pub t_max: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl Region {
    pub fn contains(&self, x: f64, t: f64) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.t_min..=self.t_max).contains(&t)
    }
}

/// Draw `n` distinct lattice points of `field` uniformly at random,
/// optionally restricted to `region`.
pub fn sample_labeled(field: &FieldSolution, n: usize, seed: u64, region: Option<Region>) -> Result<LabeledSet> {
    let n_nodes = field.x_nodes.len();
    let candidates: Vec<(usize, usize)> = field
        .t_snapshots
        .iter()
        .enumerate()
        .flat_map(|(s, &t)| {
            field
                .x_nodes
                .iter()
                .enumerate()
                .filter(move |&(_, &x)| region.map_or(true, |r| r.contains(x, t)))
                .map(move |(i, _)| (s, i))
        })
        .collect();
    if let Some(r) = region {
        if candidates.is_empty() {
            return Err(Error::Config(format!("sampling region {r:?} contains no lattice points")));
        }
    }
    if n > candidates.len() {
        return Err(Error::Sampling {
            requested: n,
            available: candidates.len(),
        });
    }
    debug_assert!(candidates.len() <= field.t_snapshots.len() * n_nodes);
    let mut rng = rng::stream(seed, "heat.sample_labeled");
    let chosen = index::sample(&mut rng, candidates.len(), n);
    Ok(LabeledSet {
        points: chosen
            .into_iter()
            .map(|k| {
                let (s, i) = candidates[k];
                LabeledPoint {
                    x: field.x_nodes[i],
                    t: field.t_snapshots[s],
                    temperature: field.temperatures[[s, i]],
                }
            })
            .collect(),
    })
}

/// The standard evaluation grid: 41 nodes × 138 snapshots = 5658 points,
/// ordered snapshot-major.
pub fn test_grid(field: &FieldSolution) -> Result<LabeledSet> {
    let stride = test_grid_stride(field)?;
    let mut points = Vec::with_capacity(TEST_GRID_SNAPSHOTS * field.x_nodes.len());
    for s in (0..field.t_snapshots.len()).step_by(stride) {
        for (i, &x) in field.x_nodes.iter().enumerate() {
            points.push(LabeledPoint {
                x,
                t: field.t_snapshots[s],
                temperature: field.temperatures[[s, i]],
            });
        }
    }
    Ok(LabeledSet { points })
}

fn test_grid_stride(field: &FieldSolution) -> Result<usize> {
    if field.n_elements() != TEST_GRID_ELEMENTS {
        return Err(Error::Config(format!(
            "test grid needs a {TEST_GRID_ELEMENTS}-element field, got {}",
            field.n_elements()
        )));
    }
    let n = field.t_snapshots.len();
    if n < TEST_GRID_SNAPSHOTS || (n - 1) % (TEST_GRID_SNAPSHOTS - 1) != 0 {
        return Err(Error::Config(format!(
            "test grid needs {TEST_GRID_SNAPSHOTS} uniformly spaced snapshots (or a refinement of them), got {n}"
        )));
    }
    Ok((n - 1) / (TEST_GRID_SNAPSHOTS - 1))
}
