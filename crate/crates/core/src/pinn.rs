//! Single-network PINN machinery for the through-thickness heat problem.
//!
//! Everything here works in normalized coordinates `ξ = x/L`,
//! `τ = t/t_scale`, `u = T/temp_scale`. The composite loss has four
//! families (PDE, boundary, initial, labeled data), each a mean of squared
//! residuals. Their relative weights are rebalanced during training from
//! parameter-gradient statistics, with the PDE term as the fixed reference.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::diffnet::{Gradient, InputBatch, Jet, NetworkParams};
use crate::error::{Error, Result};
use crate::heat::{LabeledSet, ThermalSetup};
use crate::rng;

/// Maps physical `(x, t, T)` to the network's `(ξ, τ, u)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// m
    pub x_scale: f64,
    /// s
    pub t_scale: f64,
    /// °C
    pub temp_scale: f64,
}

pub const DEFAULT_TEMP_SCALE: f64 = 200.0;

impl Normalization {
    pub fn new(x_scale: f64, t_scale: f64, temp_scale: f64) -> Result<Self> {
        for (name, v) in [("x_scale", x_scale), ("t_scale", t_scale), ("temp_scale", temp_scale)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Normalization {
            x_scale,
            t_scale,
            temp_scale,
        })
    }

    /// Thickness and cycle duration of `setup`, with the given temperature scale.
    pub fn for_setup(setup: &ThermalSetup, temp_scale: f64) -> Result<Self> {
        Self::new(setup.thickness, setup.cycle.total_duration(), temp_scale)
    }

    pub fn xi(&self, x: f64) -> f64 {
        x / self.x_scale
    }

    pub fn tau(&self, t: f64) -> f64 {
        t / self.t_scale
    }

    pub fn u(&self, temperature: f64) -> f64 {
        temperature / self.temp_scale
    }

    pub fn x(&self, xi: f64) -> f64 {
        xi * self.x_scale
    }

    pub fn t(&self, tau: f64) -> f64 {
        tau * self.t_scale
    }

    pub fn temperature(&self, u: f64) -> f64 {
        u * self.temp_scale
    }
}

/// `α·t_scale/L²`: the diffusion coefficient of the heat equation in
/// normalized coordinates.
pub fn diffusion_number(setup: &ThermalSetup, norm: &Normalization) -> f64 {
    setup.material.diffusivity() * norm.t_scale / (norm.x_scale * norm.x_scale)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Bottom,
    Top,
}

impl Side {
    pub fn xi(self) -> f64 {
        match self {
            Side::Bottom => 0.0,
            Side::Top => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizedLabel {
    pub xi: f64,
    pub tau: f64,
    pub u: f64,
}

/// Training points in normalized coordinates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointSets {
    /// Interior `(ξ, τ)`.
    pub collocation: Vec<(f64, f64)>,
    /// Face and `τ`.
    pub boundary: Vec<(Side, f64)>,
    /// `ξ` at `τ = 0`.
    pub initial: Vec<f64>,
    pub labeled: Vec<NormalizedLabel>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointCounts {
    pub collocation: usize,
    pub boundary: usize,
    pub initial: usize,
}

impl Default for PointCounts {
    fn default() -> Self {
        PointCounts {
            collocation: 1600,
            boundary: 80,
            initial: 20,
        }
    }
}

impl PointSets {
    /// Uniform random points; the boundary budget is split evenly between
    /// the two faces.
    pub fn sample(counts: PointCounts, seed: u64) -> Result<Self> {
        if counts.boundary % 2 != 0 {
            return Err(Error::Config(format!(
                "boundary point count must be even, got {}",
                counts.boundary
            )));
        }
        let mut rng = rng::stream(seed, "pinn.points");
        let collocation = (0..counts.collocation)
            .map(|_| (rng.gen::<f64>(), rng.gen::<f64>()))
            .collect();
        let half = counts.boundary / 2;
        let boundary = [Side::Bottom, Side::Top]
            .into_iter()
            .flat_map(|side| std::iter::repeat(side).take(half))
            .map(|side| (side, rng.gen::<f64>()))
            .collect();
        let initial = (0..counts.initial).map(|_| rng.gen::<f64>()).collect();
        Ok(PointSets {
            collocation,
            boundary,
            initial,
            labeled: Vec::new(),
        })
    }

    /// Replace the labeled set with `data` mapped through `norm`.
    pub fn with_labeled(mut self, data: &LabeledSet, norm: &Normalization) -> Result<Self> {
        self.labeled = data
            .points
            .iter()
            .map(|p| {
                let label = NormalizedLabel {
                    xi: norm.xi(p.x),
                    tau: norm.tau(p.t),
                    u: norm.u(p.temperature),
                };
                if !(0.0..=1.0).contains(&label.xi) || !(0.0..=1.0).contains(&label.tau) {
                    return Err(Error::Domain {
                        what: "labeled point (normalized)",
                        value: if (0.0..=1.0).contains(&label.xi) { label.tau } else { label.xi },
                        lo: 0.0,
                        hi: 1.0,
                    });
                }
                Ok(label)
            })
            .collect::<Result<_>>()?;
        Ok(self)
    }

    pub fn is_empty(&self) -> bool {
        self.collocation.is_empty() && self.boundary.is_empty() && self.initial.is_empty() && self.labeled.is_empty()
    }
}

/// Loss multipliers. The PDE weight is the reference and stays at 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub pde: f64,
    pub bc: f64,
    pub ic: f64,
    pub data: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            pde: 1.0,
            bc: 1.0,
            ic: 1.0,
            data: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.pde != 1.0 {
            return Err(Error::Config(format!("the PDE weight is the reference and must be 1, got {}", self.pde)));
        }
        for (name, v) in [("bc", self.bc), ("ic", self.ic), ("data", self.data)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("loss weight {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Collocation points per optimizer step.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay_factor: f64,
    pub lr_patience_epochs: usize,
    pub ema_alpha: f64,
    /// Optimizer steps between adaptive weight refreshes.
    pub weight_update_stride: usize,
    /// Refreshes happen only before this optimizer step; 0 keeps refreshing
    /// for the whole run. The default calibrates once, at step 0.
    pub weight_update_until_step: usize,
    /// Whether the labeled-data weight is rebalanced too.
    pub adapt_data_weight: bool,
    /// Shuffling stream; experiment runs set it per run.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-3,
            lr_decay_factor: 0.5,
            lr_patience_epochs: 20,
            ema_alpha: 0.1,
            weight_update_stride: 10,
            weight_update_until_step: 1,
            adapt_data_weight: true,
            seed: 0,
        }
    }
}

/// Relative drop of the monitored loss that counts as an improvement.
pub const PLATEAU_THRESHOLD: f64 = 1e-4;

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.lr_patience_epochs == 0 || self.weight_update_stride == 0 {
            return Err(Error::Config(
                "batch_size, lr_patience_epochs and weight_update_stride must be ≥ 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor < 1.0) {
            return Err(Error::Config(format!("lr_decay_factor must lie in (0, 1), got {}", self.lr_decay_factor)));
        }
        if !(self.ema_alpha > 0.0 && self.ema_alpha <= 1.0) {
            return Err(Error::Config(format!("ema_alpha must lie in (0, 1], got {}", self.ema_alpha)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub epoch: usize,
    pub loss_pde: f64,
    pub loss_bc: f64,
    pub loss_ic: f64,
    pub loss_data: f64,
    pub weights: LossWeights,
    pub total: f64,
    pub lr: f64,
}

impl LossReport {
    pub fn new(epoch: usize, terms: [f64; 4], weights: LossWeights, lr: f64) -> Self {
        let [loss_pde, loss_bc, loss_ic, loss_data] = terms;
        LossReport {
            epoch,
            loss_pde,
            loss_bc,
            loss_ic,
            loss_data,
            weights,
            total: weighted_total(terms, &weights),
            lr,
        }
    }
}

fn weighted_total(terms: [f64; 4], w: &LossWeights) -> f64 {
    w.pde * terms[0] + w.bc * terms[1] + w.ic * terms[2] + w.data * terms[3]
}

pub const HISTORY_HEADER: [&str; 10] = [
    "epoch",
    "loss_pde",
    "loss_bc",
    "loss_ic",
    "loss_data",
    "lambda_bc",
    "lambda_ic",
    "lambda_data",
    "total",
    "lr",
];

pub fn history_row(r: &LossReport) -> Vec<String> {
    let mut row = vec![r.epoch.to_string()];
    row.extend(
        [
            r.loss_pde,
            r.loss_bc,
            r.loss_ic,
            r.loss_data,
            r.weights.bc,
            r.weights.ic,
            r.weights.data,
            r.total,
            r.lr,
        ]
        .into_iter()
        .map(crate::csvio::fmt_f64),
    );
    row
}

/// `u_τ − (α·t_scale/L²)·u_ξξ`.
pub fn pde_residual(jet: &Jet, setup: &ThermalSetup, norm: &Normalization) -> f64 {
    jet.du_dt - diffusion_number(setup, norm) * jet.d2u_dx2
}

/// Convective face residuals `(r_b, r_t)` at normalized time `tau`.
///
/// Temperatures enter in normalized units while `h` and `k/L` keep their
/// physical magnitudes; the adaptive weights absorb the overall scale.
pub fn boundary_residuals(
    jet_bottom: &Jet,
    jet_top: &Jet,
    tau: f64,
    setup: &ThermalSetup,
    norm: &Normalization,
) -> Result<(f64, f64)> {
    let u_air = normalized_air(tau, setup, norm)?;
    let k_over_l = setup.material.conductivity / norm.x_scale;
    Ok((
        bottom_residual(jet_bottom, u_air, setup.htc_bottom, k_over_l),
        top_residual(jet_top, u_air, setup.htc_top, k_over_l),
    ))
}

fn bottom_residual(jet: &Jet, u_air: f64, h: f64, k_over_l: f64) -> f64 {
    h * (jet.u - u_air) - k_over_l * jet.du_dx
}

fn top_residual(jet: &Jet, u_air: f64, h: f64, k_over_l: f64) -> f64 {
    h * (u_air - jet.u) - k_over_l * jet.du_dx
}

fn normalized_air(tau: f64, setup: &ThermalSetup, norm: &Normalization) -> Result<f64> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Domain {
            what: "normalized time",
            value: tau,
            lo: 0.0,
            hi: 1.0,
        });
    }
    // Rounding in τ·t_scale may overshoot the cycle end by an ulp.
    let t = norm.t(tau).min(setup.cycle.total_duration());
    Ok(norm.u(setup.cycle.air_temperature(t)?))
}

/// `u|τ=0 − T₀/temp_scale`. The initial temperature is uniform, so `xi`
/// does not enter.
pub fn initial_residual(jet: &Jet, _xi: f64, setup: &ThermalSetup, norm: &Normalization) -> f64 {
    jet.u - norm.u(setup.initial_temperature)
}

/// Turns `(ξ, τ)` points into network input batches.
///
/// A plain PINN feeds the coordinates straight in; the high-fidelity
/// network of a multi-fidelity model appends the low-fidelity prediction
/// and carries its derivatives in the seeds.
pub trait InputMap {
    fn batch(&self, coords: &[(f64, f64)], derivatives: bool) -> Result<InputBatch>;
}

/// `(ξ, τ)` as-is.
#[derive(Clone, Copy, Debug, Default)]
pub struct Coordinates;

impl InputMap for Coordinates {
    fn batch(&self, coords: &[(f64, f64)], derivatives: bool) -> Result<InputBatch> {
        Ok(if derivatives {
            InputBatch::points(coords)
        } else {
            InputBatch::points_values(coords)
        })
    }
}

/// Network inputs of every point family, built once per training run.
pub struct PreparedPoints {
    collocation: InputBatch,
    boundary_bottom: InputBatch,
    boundary_top: InputBatch,
    bottom_air: Vec<f64>,
    top_air: Vec<f64>,
    initial: InputBatch,
    labeled: InputBatch,
    labeled_targets: Vec<f64>,
    u0: f64,
    diffusion: f64,
    k_over_l: f64,
    htc_bottom: f64,
    htc_top: f64,
}

impl PreparedPoints {
    pub fn new(
        points: &PointSets,
        setup: &ThermalSetup,
        norm: &Normalization,
        inputs: &dyn InputMap,
    ) -> Result<Self> {
        let bottom: Vec<f64> = points
            .boundary
            .iter()
            .filter(|(s, _)| *s == Side::Bottom)
            .map(|&(_, tau)| tau)
            .collect();
        let top: Vec<f64> = points
            .boundary
            .iter()
            .filter(|(s, _)| *s == Side::Top)
            .map(|&(_, tau)| tau)
            .collect();
        let air = |taus: &[f64]| taus.iter().map(|&tau| normalized_air(tau, setup, norm)).collect::<Result<Vec<_>>>();
        let face = |xi: f64, taus: &[f64]| taus.iter().map(|&tau| (xi, tau)).collect::<Vec<_>>();
        let initial: Vec<(f64, f64)> = points.initial.iter().map(|&xi| (xi, 0.0)).collect();
        let labeled: Vec<(f64, f64)> = points.labeled.iter().map(|l| (l.xi, l.tau)).collect();
        Ok(PreparedPoints {
            collocation: inputs.batch(&points.collocation, true)?,
            boundary_bottom: inputs.batch(&face(0.0, &bottom), true)?,
            boundary_top: inputs.batch(&face(1.0, &top), true)?,
            bottom_air: air(&bottom)?,
            top_air: air(&top)?,
            initial: inputs.batch(&initial, false)?,
            labeled: inputs.batch(&labeled, false)?,
            labeled_targets: points.labeled.iter().map(|l| l.u).collect(),
            u0: norm.u(setup.initial_temperature),
            diffusion: diffusion_number(setup, norm),
            k_over_l: setup.material.conductivity / norm.x_scale,
            htc_bottom: setup.htc_bottom,
            htc_top: setup.htc_top,
        })
    }

    pub fn n_collocation(&self) -> usize {
        self.collocation.len()
    }
}

/// Unweighted loss value and gradient of each family.
#[derive(Clone, Debug)]
pub struct TermGradients {
    pub values: [f64; 4],
    pub pde: Gradient,
    pub bc: Gradient,
    pub ic: Gradient,
    pub data: Gradient,
}

impl TermGradients {
    /// `Σ λ_i ∇L_i`.
    pub fn weighted(&self, w: &LossWeights) -> Gradient {
        let mut g = self.pde.clone();
        g.scale(w.pde);
        g.add_scaled(&self.bc, w.bc);
        g.add_scaled(&self.ic, w.ic);
        g.add_scaled(&self.data, w.data);
        g
    }
}

/// Mean of squared residuals and its jet adjoints, for residuals that are
/// affine in the jet.
fn mse<F, G>(jets: &[Jet], residual: F, d_residual: G) -> (f64, Vec<Jet>)
where
    F: Fn(usize, &Jet) -> f64,
    G: Fn(&Jet) -> Jet,
{
    if jets.is_empty() {
        return (0.0, Vec::new());
    }
    let n = jets.len() as f64;
    let mut sum = 0.0;
    let adjoints = jets
        .iter()
        .enumerate()
        .map(|(i, j)| {
            let r = residual(i, j);
            sum += r * r;
            let d = d_residual(j);
            let c = 2.0 * r / n;
            Jet {
                u: c * d.u,
                du_dx: c * d.du_dx,
                d2u_dx2: c * d.d2u_dx2,
                du_dt: c * d.du_dt,
            }
        })
        .collect();
    (sum / n, adjoints)
}

fn family(
    params: &NetworkParams,
    batch: &InputBatch,
    grad: &mut Gradient,
    loss: impl FnOnce(&[Jet]) -> (f64, Vec<Jet>),
    name: &str,
) -> Result<f64> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let trace = params.trace(batch)?;
    let (value, adjoints) = loss(&trace.jets());
    if !value.is_finite() {
        return Err(Error::Numeric {
            context: format!("{name} loss"),
            detail: format!("{value} on batch {}", crate::diffnet::describe_batch(batch)),
        });
    }
    trace.backward(&adjoints, grad)?;
    Ok(value)
}

/// Per-family losses and gradients, with an optional collocation subset.
pub fn term_gradients(
    params: &NetworkParams,
    prepared: &PreparedPoints,
    collocation: Option<&InputBatch>,
) -> Result<TermGradients> {
    let colloc = collocation.unwrap_or(&prepared.collocation);
    let mut pde = Gradient::zeros_like(params);
    let mut bc = Gradient::zeros_like(params);
    let mut ic = Gradient::zeros_like(params);
    let mut data = Gradient::zeros_like(params);
    let d = prepared.diffusion;

    let l_pde = family(
        params,
        colloc,
        &mut pde,
        |jets| {
            mse(
                jets,
                |_, j| j.du_dt - d * j.d2u_dx2,
                |_| Jet {
                    du_dt: 1.0,
                    d2u_dx2: -d,
                    ..Jet::ZERO
                },
            )
        },
        "pde",
    )?;

    let kl = prepared.k_over_l;
    let (hb, ht) = (prepared.htc_bottom, prepared.htc_top);
    let l_bottom = family(
        params,
        &prepared.boundary_bottom,
        &mut bc,
        |jets| {
            mse(
                jets,
                |i, j| bottom_residual(j, prepared.bottom_air[i], hb, kl),
                |_| Jet {
                    u: hb,
                    du_dx: -kl,
                    ..Jet::ZERO
                },
            )
        },
        "bottom boundary",
    )?;
    let l_top = family(
        params,
        &prepared.boundary_top,
        &mut bc,
        |jets| {
            mse(
                jets,
                |i, j| top_residual(j, prepared.top_air[i], ht, kl),
                |_| Jet {
                    u: -ht,
                    du_dx: -kl,
                    ..Jet::ZERO
                },
            )
        },
        "top boundary",
    )?;

    let u0 = prepared.u0;
    let l_ic = family(
        params,
        &prepared.initial,
        &mut ic,
        |jets| mse(jets, |_, j| j.u - u0, |_| Jet { u: 1.0, ..Jet::ZERO }),
        "initial",
    )?;
    let targets = &prepared.labeled_targets;
    let l_data = family(
        params,
        &prepared.labeled,
        &mut data,
        |jets| mse(jets, |i, j| j.u - targets[i], |_| Jet { u: 1.0, ..Jet::ZERO }),
        "data",
    )?;

    Ok(TermGradients {
        values: [l_pde, l_bottom + l_top, l_ic, l_data],
        pde,
        bc,
        ic,
        data,
    })
}

/// Weighted composite loss over all points, and its exact gradient.
pub fn composite_loss(
    params: &NetworkParams,
    points: &PointSets,
    weights: &LossWeights,
    setup: &ThermalSetup,
    norm: &Normalization,
) -> Result<(LossReport, Gradient)> {
    weights.validate()?;
    let prepared = PreparedPoints::new(points, setup, norm, &Coordinates)?;
    let terms = term_gradients(params, &prepared, None)?;
    Ok((LossReport::new(0, terms.values, *weights, 0.0), terms.weighted(weights)))
}

/// Rebalance the non-PDE weights from gradient statistics.
///
/// Each term's target is `max|∇L_pde| / mean|∇L_i|`; the weight moves
/// toward it by an exponential moving average. A term whose gradient
/// vanishes keeps its weight.
pub fn update_weights_adaptive(terms: &TermGradients, current: &LossWeights, ema_alpha: f64, adapt_data: bool) -> LossWeights {
    let reference = terms.pde.max_abs();
    let update = |old: f64, g: &Gradient| {
        let mean = g.mean_abs();
        if mean == 0.0 || !mean.is_finite() {
            return old;
        }
        let target = reference / mean;
        let new = (1.0 - ema_alpha) * old + ema_alpha * target;
        if new.is_finite() && new > 0.0 {
            new
        } else {
            old
        }
    };
    LossWeights {
        pde: 1.0,
        bc: update(current.bc, &terms.bc),
        ic: update(current.ic, &terms.ic),
        data: if adapt_data { update(current.data, &terms.data) } else { current.data },
    }
}

/// Adam with the usual bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    pub fn apply(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

/// Reduce-on-plateau learning-rate schedule.
#[derive(Clone, Debug)]
struct Plateau {
    best: f64,
    wait: usize,
}

impl Plateau {
    fn observe(&mut self, loss: f64, lr: &mut f64, config: &TrainConfig) {
        if loss < self.best * (1.0 - PLATEAU_THRESHOLD) {
            self.best = loss;
            self.wait = 0;
        } else {
            self.wait += 1;
            if self.wait >= config.lr_patience_epochs {
                *lr *= config.lr_decay_factor;
                self.wait = 0;
            }
        }
    }
}

fn refresh_due(step: usize, config: &TrainConfig) -> bool {
    step % config.weight_update_stride == 0 && (config.weight_update_until_step == 0 || step < config.weight_update_until_step)
}

/// Train a plain PINN on `(ξ, τ)` inputs.
pub fn train(
    params: NetworkParams,
    points: &PointSets,
    weights: LossWeights,
    config: &TrainConfig,
    setup: &ThermalSetup,
    norm: &Normalization,
) -> Result<(NetworkParams, Vec<LossReport>)> {
    train_with_inputs(params, points, weights, config, setup, norm, &Coordinates)
}

/// Training loop shared by plain and multi-fidelity networks.
///
/// Each optimizer step sees one minibatch of collocation points and the
/// full boundary, initial and labeled sets. Collocation order is
/// reshuffled every epoch. Loss weights are re-estimated every
/// `weight_update_stride` steps until `weight_update_until_step`.
pub fn train_with_inputs(
    mut params: NetworkParams,
    points: &PointSets,
    mut weights: LossWeights,
    config: &TrainConfig,
    setup: &ThermalSetup,
    norm: &Normalization,
    inputs: &dyn InputMap,
) -> Result<(NetworkParams, Vec<LossReport>)> {
    config.validate()?;
    weights.validate()?;
    if points.is_empty() {
        return Err(Error::Config("all point families are empty".into()));
    }
    let prepared = PreparedPoints::new(points, setup, norm, inputs)?;
    let n_colloc = prepared.n_collocation();
    let steps_per_epoch = n_colloc.div_ceil(config.batch_size).max(1);
    let mut order: Vec<usize> = (0..n_colloc).collect();
    let mut shuffle = rng::stream(config.seed, "pinn.shuffle");
    let mut adam = Adam::new(params.num_params());
    let mut lr = config.learning_rate;
    let mut plateau = Plateau {
        best: f64::INFINITY,
        wait: 0,
    };
    let mut history = Vec::with_capacity(config.epochs);
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle);
        let mut sums = [0.0; 4];
        for chunk in 0..steps_per_epoch {
            let lo = chunk * config.batch_size;
            let hi = (lo + config.batch_size).min(n_colloc);
            let batch = (n_colloc > 0).then(|| prepared.collocation.select(&order[lo..hi]));
            let terms = match term_gradients(&params, &prepared, batch.as_ref()) {
                Ok(t) => t,
                Err(e) => {
                    return Err(Error::Training {
                        step,
                        detail: e.to_string(),
                        last_good: Some(Box::new(params)),
                    })
                }
            };
            if refresh_due(step, config) {
                // The first estimate replaces the starting weights outright,
                // so the physical scale of each residual is absorbed at once.
                let alpha = if step == 0 { 1.0 } else { config.ema_alpha };
                weights = update_weights_adaptive(&terms, &weights, alpha, config.adapt_data_weight);
            }
            let grad = terms.weighted(&weights);
            if !grad.is_finite() {
                return Err(Error::Training {
                    step,
                    detail: "non-finite gradient".into(),
                    last_good: Some(Box::new(params)),
                });
            }
            for (s, v) in sums.iter_mut().zip(terms.values) {
                *s += v;
            }
            adam.apply(params.as_mut_slice(), grad.as_slice(), lr);
            step += 1;
        }
        let means = sums.map(|s| s / steps_per_epoch as f64);
        let report = LossReport::new(epoch, means, weights, lr);
        if !report.total.is_finite() {
            return Err(Error::Training {
                step,
                detail: format!("non-finite epoch loss {}", report.total),
                last_good: None,
            });
        }
        plateau.observe(report.total, &mut lr, config);
        history.push(report);
    }
    Ok((params, history))
}

/// Predicted temperatures (°C) of a plain PINN at physical points.
pub fn predict_temperatures(params: &NetworkParams, norm: &Normalization, xt: &[(f64, f64)]) -> Result<Vec<f64>> {
    let mut inputs = Array2::zeros((2, xt.len()));
    for (b, &(x, t)) in xt.iter().enumerate() {
        inputs[[0, b]] = norm.xi(x);
        inputs[[1, b]] = norm.tau(t);
    }
    Ok(params.predict(inputs)?.into_iter().map(|u| norm.temperature(u)).collect())
}
