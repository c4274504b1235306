//! Two-stage multi-fidelity PINN.
//!
//! A low-fidelity network `f_L(ξ, τ)` is trained first on the cheap
//! material. The high-fidelity network then sees `(ξ, τ, f_L(ξ, τ))` and is
//! trained against the target material's physics, so its PDE residual needs
//! the total derivatives of `g(ξ, τ) = f_H(ξ, τ, f_L(ξ, τ))`. Those come for
//! free from the jet propagation: the low network's jet becomes the third
//! input's derivative seed.

use ndarray::Array2;

use crate::diffnet::{InputBatch, Jet, NetworkParams};
use crate::error::{Error, Result};
use crate::heat::{sample_labeled, FieldSolution, LabeledSet, Region, ThermalSetup};
use crate::pinn::{self, InputMap, LossReport, LossWeights, Normalization, PointSets, TrainConfig};

/// Default cooldown window for the labeled cloud, in seconds.
pub const COOLDOWN_REGION: Region = Region {
    t_min: 2000.0,
    t_max: 2500.0,
    x_min: f64::NEG_INFINITY,
    x_max: f64::INFINITY,
};

/// `(ξ, τ, f_L(ξ, τ))` with the low network's derivatives as seeds.
///
/// The low network is frozen, so its jets at a fixed point set never
/// change; they are computed once when the batch is built.
pub struct LowFidelityInputs<'a> {
    pub low: &'a NetworkParams,
}

impl InputMap for LowFidelityInputs<'_> {
    fn batch(&self, coords: &[(f64, f64)], derivatives: bool) -> Result<InputBatch> {
        let n = coords.len();
        let mut value = Array2::zeros((3, n));
        for (b, &(xi, tau)) in coords.iter().enumerate() {
            value[[0, b]] = xi;
            value[[1, b]] = tau;
        }
        if !derivatives {
            let low = self.low.predict(value.slice(ndarray::s![0..2, ..]).to_owned())?;
            value.row_mut(2).assign(&ndarray::Array1::from(low));
            return Ok(InputBatch::values(value));
        }
        let jets = self.low.evaluate(&InputBatch::points(coords))?;
        let mut dx = Array2::zeros((3, n));
        let mut dxx = Array2::zeros((3, n));
        let mut dt = Array2::zeros((3, n));
        for (b, j) in jets.iter().enumerate() {
            value[[2, b]] = j.u;
            dx[[0, b]] = 1.0;
            dx[[2, b]] = j.du_dx;
            dxx[[2, b]] = j.d2u_dx2;
            dt[[1, b]] = 1.0;
            dt[[2, b]] = j.du_dt;
        }
        InputBatch::with_tangents(value, dx.view(), dxx.view(), dt.view())
    }
}

/// A trained low/high pair with the scalings and setups they were built for.
#[derive(Clone, Debug, PartialEq)]
pub struct MfModel {
    low: NetworkParams,
    high: NetworkParams,
    norm_low: Normalization,
    norm_high: Normalization,
    setup_low: ThermalSetup,
    setup_high: ThermalSetup,
}

impl MfModel {
    pub fn new(
        low: NetworkParams,
        high: NetworkParams,
        norm_low: Normalization,
        norm_high: Normalization,
        setup_low: ThermalSetup,
        setup_high: ThermalSetup,
    ) -> Result<Self> {
        if low.input_width() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: low.input_width(),
                context: "low-fidelity input width",
            });
        }
        if high.input_width() != 3 {
            return Err(Error::Dimension {
                expected: 3,
                got: high.input_width(),
                context: "high-fidelity input width",
            });
        }
        check_compatible(&norm_low, &norm_high)?;
        Ok(MfModel {
            low,
            high,
            norm_low,
            norm_high,
            setup_low,
            setup_high,
        })
    }

    pub fn low(&self) -> &NetworkParams {
        &self.low
    }

    pub fn high(&self) -> &NetworkParams {
        &self.high
    }

    pub fn norm_low(&self) -> &Normalization {
        &self.norm_low
    }

    pub fn norm_high(&self) -> &Normalization {
        &self.norm_high
    }

    pub fn setup_low(&self) -> &ThermalSetup {
        &self.setup_low
    }

    pub fn setup_high(&self) -> &ThermalSetup {
        &self.setup_high
    }

    /// Jet of the composed map at one normalized point, with total derivatives.
    pub fn compose_jet(&self, xi: f64, tau: f64) -> Jet {
        self.compose_jets(&[(xi, tau)])[0]
    }

    pub fn compose_jets(&self, coords: &[(f64, f64)]) -> Vec<Jet> {
        let inputs = LowFidelityInputs { low: &self.low };
        // widths were checked in `new`
        let batch = inputs.batch(coords, true).expect("low-fidelity width is 2");
        self.high.evaluate(&batch).expect("high-fidelity width is 3")
    }

    /// Temperature in °C at a physical point.
    pub fn predict(&self, x: f64, t: f64) -> Result<f64> {
        Ok(self.predict_many(&[(x, t)])?[0])
    }

    pub fn predict_many(&self, xt: &[(f64, f64)]) -> Result<Vec<f64>> {
        let norm = &self.norm_high;
        let coords = xt
            .iter()
            .map(|&(x, t)| {
                check_domain(x, t, &self.setup_high)?;
                Ok((norm.xi(x), norm.tau(t)))
            })
            .collect::<Result<Vec<_>>>()?;
        let batch = LowFidelityInputs { low: &self.low }.batch(&coords, false)?;
        let mut u = Vec::with_capacity(coords.len());
        u.extend(self.high.predict(batch.value().to_owned())?.into_iter().map(|v| norm.temperature(v)));
        Ok(u)
    }
}

/// Both stages must agree on the normalized coordinates and the output
/// units, since `f_L`'s output is fed to `f_H` as-is.
fn check_compatible(low: &Normalization, high: &Normalization) -> Result<()> {
    if low != high {
        return Err(Error::Config(format!(
            "low- and high-fidelity normalizations differ: {low:?} vs {high:?}"
        )));
    }
    Ok(())
}

pub(crate) fn check_domain(x: f64, t: f64, setup: &ThermalSetup) -> Result<()> {
    if !(0.0..=setup.thickness).contains(&x) {
        return Err(Error::Domain {
            what: "x (m)",
            value: x,
            lo: 0.0,
            hi: setup.thickness,
        });
    }
    let end = setup.cycle.total_duration();
    if !(0.0..=end).contains(&t) {
        return Err(Error::Domain {
            what: "t (s)",
            value: t,
            lo: 0.0,
            hi: end,
        });
    }
    Ok(())
}

/// Train the low-fidelity network on its own physics plus `data`.
pub fn train_low(
    init: NetworkParams,
    setup: &ThermalSetup,
    norm: &Normalization,
    data: &LabeledSet,
    points: &PointSets,
    config: &TrainConfig,
) -> Result<(NetworkParams, Vec<LossReport>)> {
    let points = points.clone().with_labeled(data, norm)?;
    pinn::train(init, &points, LossWeights::default(), config, setup, norm)
}

/// Train the high-fidelity network through the frozen `low`.
pub fn train_high(
    low: &NetworkParams,
    init: NetworkParams,
    setup: &ThermalSetup,
    norm: &Normalization,
    data: &LabeledSet,
    points: &PointSets,
    config: &TrainConfig,
) -> Result<(NetworkParams, Vec<LossReport>)> {
    if init.input_width() != 3 {
        return Err(Error::Dimension {
            expected: 3,
            got: init.input_width(),
            context: "high-fidelity input width",
        });
    }
    let points = points.clone().with_labeled(data, norm)?;
    let inputs = LowFidelityInputs { low };
    pinn::train_with_inputs(init, &points, LossWeights::default(), config, setup, norm, &inputs)
}

/// Labeled high-fidelity points drawn from `region` (the cooldown window by default).
pub fn augment_cooldown(field: &FieldSolution, n: usize, region: Option<Region>, seed: u64) -> Result<LabeledSet> {
    sample_labeled(field, n, seed, Some(region.unwrap_or(COOLDOWN_REGION)))
}
