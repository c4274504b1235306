//! A small differentiable MLP engine.
//!
//! Networks are fully connected with `tanh` on every hidden layer and a
//! linear output. Besides plain evaluation the engine propagates *jets*:
//! the output together with its first and second derivative along the
//! spatial input and its first derivative along the time input. Input
//! derivatives are pushed forward layer by layer (Taylor mode); parameter
//! gradients of any loss built from jets are pulled back through the same
//! propagation in one reverse sweep, so the gradient of a PDE residual
//! loss is exact to rounding.
//!
//! ```
//! use mfpinn::diffnet::NetworkParams;
//!
//! let net = NetworkParams::init(&[2, 8, 8, 1], 7).unwrap();
//! let jet = net.forward_jet(0.3, 0.6, &[]).unwrap();
//! assert_eq!(jet.u, net.forward(&[0.3, 0.6]).unwrap());
//! ```

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng;

/// Output value with its input derivatives, in whatever coordinates the
/// network was evaluated in.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub u: f64,
    pub du_dx: f64,
    pub d2u_dx2: f64,
    pub du_dt: f64,
}

impl Jet {
    pub const ZERO: Jet = Jet {
        u: 0.0,
        du_dx: 0.0,
        d2u_dx2: 0.0,
        du_dt: 0.0,
    };

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.du_dx.is_finite() && self.d2u_dx2.is_finite() && self.du_dt.is_finite()
    }
}

/// Offsets of one layer inside the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq)]
struct LayerSlot {
    fan_in: usize,
    fan_out: usize,
    weights: usize,
    biases: usize,
}

fn layout(layer_sizes: &[usize]) -> Result<(Vec<LayerSlot>, usize)> {
    if layer_sizes.len() < 2 {
        return Err(Error::Config(format!(
            "a network needs at least an input and an output width, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.iter().any(|&n| n == 0) {
        return Err(Error::Config(format!("layer widths must be positive, got {layer_sizes:?}")));
    }
    let mut slots = Vec::with_capacity(layer_sizes.len() - 1);
    let mut offset = 0;
    for pair in layer_sizes.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        slots.push(LayerSlot {
            fan_in,
            fan_out,
            weights: offset,
            biases: offset + fan_in * fan_out,
        });
        offset += fan_in * fan_out + fan_out;
    }
    Ok((slots, offset))
}

/// Weights and biases of a fixed-architecture MLP.
///
/// All parameters live in one flat vector, layer after layer, each layer
/// storing its `fan_out × fan_in` weight matrix row-major followed by its
/// bias. [`Gradient`] uses the same layout.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    layer_sizes: Vec<usize>,
    seed: u64,
    slots: Vec<LayerSlot>,
    values: Vec<f64>,
}

impl NetworkParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        let (slots, count) = layout(layer_sizes)?;
        let mut values = vec![0.0; count];
        let mut rng = rng::stream(seed, "diffnet.init");
        for slot in &slots {
            let bound = (6.0 / (slot.fan_in + slot.fan_out) as f64).sqrt();
            for w in &mut values[slot.weights..slot.biases] {
                *w = rng.gen_range(-bound..=bound);
            }
        }
        Ok(NetworkParams {
            layer_sizes: layer_sizes.to_vec(),
            seed,
            slots,
            values,
        })
    }

    /// Build from an explicit flat parameter vector.
    pub fn from_values(layer_sizes: &[usize], seed: u64, values: Vec<f64>) -> Result<Self> {
        let (slots, count) = layout(layer_sizes)?;
        if values.len() != count {
            return Err(Error::Dimension {
                expected: count,
                got: values.len(),
                context: "flat parameter vector",
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                context: "network parameters".into(),
                detail: format!("entry {i} is {}", values[i]),
            });
        }
        Ok(NetworkParams {
            layer_sizes: layer_sizes.to_vec(),
            seed,
            slots,
            values,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// Seed the parameters were initialized from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_layers(&self) -> usize {
        self.slots.len()
    }

    pub fn num_params(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn weight(&self, layer: usize) -> ArrayView2<'_, f64> {
        let s = self.slots[layer];
        ArrayView2::from_shape((s.fan_out, s.fan_in), &self.values[s.weights..s.biases]).unwrap()
    }

    pub fn bias(&self, layer: usize) -> ArrayView1<'_, f64> {
        let s = self.slots[layer];
        ArrayView1::from(&self.values[s.biases..s.biases + s.fan_out])
    }

    pub fn weight_mut(&mut self, layer: usize) -> ArrayViewMut2<'_, f64> {
        let s = self.slots[layer];
        ArrayViewMut2::from_shape((s.fan_out, s.fan_in), &mut self.values[s.weights..s.biases]).unwrap()
    }

    pub fn bias_mut(&mut self, layer: usize) -> ArrayViewMut1<'_, f64> {
        let s = self.slots[layer];
        ArrayViewMut1::from(&mut self.values[s.biases..s.biases + s.fan_out])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Plain network output at one input vector.
    pub fn forward(&self, input: &[f64]) -> Result<f64> {
        self.check_width(input.len())?;
        let value = Array2::from_shape_vec((input.len(), 1), input.to_vec()).unwrap();
        let batch = InputBatch::values(value);
        Ok(self.trace(&batch)?.output_value(0))
    }

    /// Output and derivatives at `(x, t, extra_inputs…)`.
    ///
    /// `extra_inputs` are held constant: their derivative seeds are zero.
    pub fn forward_jet(&self, x: f64, t: f64, extra_inputs: &[f64]) -> Result<Jet> {
        let mut row = vec![x, t];
        row.extend_from_slice(extra_inputs);
        self.check_width(row.len())?;
        let batch = InputBatch::points_with_extras(&[row])?;
        Ok(self.trace(&batch)?.jets()[0])
    }

    /// Batched evaluation.
    pub fn evaluate(&self, batch: &InputBatch) -> Result<Vec<Jet>> {
        Ok(self.trace(batch)?.jets())
    }

    /// Output values only, one per column of `inputs` (`input_width × n`).
    pub fn predict(&self, inputs: Array2<f64>) -> Result<Vec<f64>> {
        let batch = InputBatch::values(inputs);
        let trace = self.trace(&batch)?;
        Ok((0..batch.len()).map(|b| trace.output_value(b)).collect())
    }

    fn check_width(&self, got: usize) -> Result<()> {
        if got != self.input_width() {
            return Err(Error::Dimension {
                expected: self.input_width(),
                got,
                context: "network input",
            });
        }
        Ok(())
    }

    /// Forward propagation that keeps every intermediate needed by
    /// [`Trace::backward`].
    pub fn trace<'a>(&'a self, batch: &InputBatch) -> Result<Trace<'a>> {
        self.check_width(batch.width())?;
        let n = batch.len();
        let deriv = batch.tangents.is_some();
        let last = self.num_layers() - 1;
        let mut layers = Vec::with_capacity(self.num_layers());
        let mut h_val = batch.value.clone();
        let mut h_der = batch.tangents.clone();

        for l in 0..self.num_layers() {
            let w = self.weight(l);
            let mut a_val = w.dot(&h_val);
            for (mut row, &b) in a_val.rows_mut().into_iter().zip(self.bias(l).iter()) {
                row.mapv_inplace(|v| v + b);
            }
            let a_der = h_der.as_ref().map(|d| w.dot(d));

            if l == last {
                layers.push(LayerTrace {
                    input_val: h_val,
                    input_der: h_der,
                    pre_der: a_der,
                    act: a_val,
                });
                break;
            }

            let s = a_val.mapv(f64::tanh);
            let next_der = a_der.as_ref().map(|a_der| {
                let mut out = Array2::zeros(a_der.raw_dim());
                let width = s.ncols();
                let (sv, ad, od) = (
                    s.as_slice().unwrap(),
                    a_der.as_slice().unwrap(),
                    out.as_slice_mut().unwrap(),
                );
                for i in 0..s.nrows() {
                    for b in 0..width {
                        let sig = sv[i * width + b];
                        let d1 = 1.0 - sig * sig;
                        let d2 = -2.0 * sig * d1;
                        let base = i * 3 * width;
                        let ax = ad[base + b];
                        let axx = ad[base + width + b];
                        let at = ad[base + 2 * width + b];
                        od[base + b] = d1 * ax;
                        od[base + width + b] = d2 * ax * ax + d1 * axx;
                        od[base + 2 * width + b] = d1 * at;
                    }
                }
                out
            });
            let next_val = s.clone();
            layers.push(LayerTrace {
                input_val: std::mem::replace(&mut h_val, next_val),
                input_der: std::mem::replace(&mut h_der, next_der),
                pre_der: a_der,
                act: s,
            });
        }
        debug_assert_eq!(layers.last().unwrap().act.ncols(), n);
        Ok(Trace {
            params: self,
            layers,
            deriv,
        })
    }

    /// Write a versioned text checkpoint. Values are printed with Rust's
    /// shortest round-trip formatting, so reloading is lossless.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_checkpoint_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_str(&text).map_err(|e| match e {
            Error::Format { detail, .. } => Error::format(path, detail),
            other => other,
        })
    }

    pub fn to_checkpoint_string(&self) -> String {
        let mut out = String::new();
        out.push_str(CHECKPOINT_MAGIC);
        out.push('\n');
        let sizes: Vec<String> = self.layer_sizes.iter().map(|n| n.to_string()).collect();
        writeln!(out, "layer_sizes {}", sizes.join(" ")).unwrap();
        writeln!(out, "seed {}", self.seed).unwrap();
        writeln!(out, "params {}", self.values.len()).unwrap();
        for v in &self.values {
            writeln!(out, "{v:?}").unwrap();
        }
        out
    }

    pub fn from_checkpoint_str(text: &str) -> Result<Self> {
        let bad = |d: String| Error::format("<checkpoint>", d);
        let mut lines = text.lines();
        match lines.next() {
            Some(CHECKPOINT_MAGIC) => {}
            other => return Err(bad(format!("expected header {CHECKPOINT_MAGIC:?}, found {other:?}"))),
        }
        let mut field = |name: &str| -> Result<Vec<String>> {
            let line = lines.next().ok_or_else(|| bad(format!("missing {name} line")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(name) {
                return Err(bad(format!("expected {name}, found {line:?}")));
            }
            Ok(parts.map(str::to_owned).collect())
        };
        let sizes = field("layer_sizes")?
            .iter()
            .map(|s| s.parse::<usize>().map_err(|e| bad(format!("layer size {s:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let seed = field("seed")?
            .first()
            .ok_or_else(|| bad("empty seed".into()))?
            .parse::<u64>()
            .map_err(|e| bad(format!("seed: {e}")))?;
        let count = field("params")?
            .first()
            .ok_or_else(|| bad("empty params count".into()))?
            .parse::<usize>()
            .map_err(|e| bad(format!("params count: {e}")))?;
        let values = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<f64>().map_err(|e| bad(format!("value {l:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != count {
            return Err(bad(format!("header announces {count} values, found {}", values.len())));
        }
        Self::from_values(&sizes, seed, values)
    }
}

const CHECKPOINT_MAGIC: &str = "mfpinn-checkpoint v1";

/// A batch of network inputs, optionally carrying derivative seeds.
///
/// Each column is one sample. The tangent block stacks the three seed
/// matrices side by side: `[∂z/∂x | ∂²z/∂x² | ∂z/∂t]`, each
/// `input_width × len`. For a plain `(x, t)` input the seeds are the unit
/// vectors `e₀`, `0`, `e₁`; a composed network supplies the derivatives of
/// its inner map instead.
#[derive(Clone, Debug)]
pub struct InputBatch {
    value: Array2<f64>,
    tangents: Option<Array2<f64>>,
}

impl InputBatch {
    /// Values only; the trace will not carry derivatives.
    pub fn values(value: Array2<f64>) -> Self {
        InputBatch { value, tangents: None }
    }

    /// `(x, t)` samples with unit derivative seeds.
    pub fn points(coords: &[(f64, f64)]) -> Self {
        let rows: Vec<Vec<f64>> = coords.iter().map(|&(x, t)| vec![x, t]).collect();
        Self::points_with_extras(&rows).unwrap()
    }

    /// `(x, t)` samples, value channel only.
    pub fn points_values(coords: &[(f64, f64)]) -> Self {
        let n = coords.len();
        let mut value = Array2::zeros((2, n));
        for (b, &(x, t)) in coords.iter().enumerate() {
            value[[0, b]] = x;
            value[[1, b]] = t;
        }
        Self::values(value)
    }

    /// Rows of `[x, t, extra…]`; extras are treated as constants.
    pub fn points_with_extras(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let width = rows.first().map_or(2, Vec::len);
        if width < 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: width,
                context: "jet input needs at least (x, t)",
            });
        }
        let mut value = Array2::zeros((width, n));
        let mut tangents = Array2::zeros((width, 3 * n));
        for (b, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Dimension {
                    expected: width,
                    got: row.len(),
                    context: "ragged input batch",
                });
            }
            for (i, &v) in row.iter().enumerate() {
                value[[i, b]] = v;
            }
            tangents[[0, b]] = 1.0;
            tangents[[1, 2 * n + b]] = 1.0;
        }
        Ok(InputBatch {
            value,
            tangents: Some(tangents),
        })
    }

    /// Fully explicit seeds. All four matrices are `width × len`.
    pub fn with_tangents<'a>(
        value: Array2<f64>,
        dx: ArrayView2<'a, f64>,
        dxx: ArrayView2<'a, f64>,
        dt: ArrayView2<'a, f64>,
    ) -> Result<Self> {
        let shape = value.dim();
        for (m, name) in [(dx, "dx seed"), (dxx, "dxx seed"), (dt, "dt seed")] {
            if m.dim() != shape {
                return Err(Error::Dimension {
                    expected: shape.0 * shape.1,
                    got: m.len(),
                    context: name,
                });
            }
        }
        let n = shape.1;
        let mut tangents = Array2::zeros((shape.0, 3 * n));
        tangents.slice_mut(ndarray::s![.., 0..n]).assign(&dx);
        tangents.slice_mut(ndarray::s![.., n..2 * n]).assign(&dxx);
        tangents.slice_mut(ndarray::s![.., 2 * n..3 * n]).assign(&dt);
        Ok(InputBatch {
            value,
            tangents: Some(tangents),
        })
    }

    pub fn len(&self) -> usize {
        self.value.ncols()
    }

    /// The samples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> InputBatch {
        let value = self.value.select(ndarray::Axis(1), indices);
        let tangents = self.tangents.as_ref().map(|t| {
            let n = self.len();
            let cols: Vec<usize> = (0..3).flat_map(|c| indices.iter().map(move |&i| c * n + i)).collect();
            t.select(ndarray::Axis(1), &cols)
        });
        InputBatch { value, tangents }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.value.nrows()
    }

    pub fn has_derivatives(&self) -> bool {
        self.tangents.is_some()
    }

    pub fn value(&self) -> ArrayView2<'_, f64> {
        self.value.view()
    }
}

struct LayerTrace {
    input_val: Array2<f64>,
    input_der: Option<Array2<f64>>,
    /// Derivative channels of the pre-activation (hidden layers) or of the
    /// output (last layer).
    pre_der: Option<Array2<f64>>,
    /// tanh output for hidden layers, raw output for the last layer.
    act: Array2<f64>,
}

/// Intermediates of one forward propagation.
pub struct Trace<'a> {
    params: &'a NetworkParams,
    layers: Vec<LayerTrace>,
    deriv: bool,
}

impl Trace<'_> {
    pub fn len(&self) -> usize {
        self.layers.last().map_or(0, |l| l.act.ncols())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn output_value(&self, b: usize) -> f64 {
        self.layers.last().unwrap().act[[0, b]]
    }

    /// Output jets, one per sample. Derivative entries are zero when the
    /// batch carried no seeds.
    pub fn jets(&self) -> Vec<Jet> {
        let out = self.layers.last().unwrap();
        let n = out.act.ncols();
        (0..n)
            .map(|b| {
                let u = out.act[[0, b]];
                match &out.pre_der {
                    Some(d) => Jet {
                        u,
                        du_dx: d[[0, b]],
                        d2u_dx2: d[[0, n + b]],
                        du_dt: d[[0, 2 * n + b]],
                    },
                    None => Jet { u, ..Jet::ZERO },
                }
            })
            .collect()
    }

    /// Pull output-jet adjoints `∂L/∂jet` back to the parameters and add
    /// the result into `grad`. Derivative adjoints are ignored when the
    /// batch carried no seeds.
    pub fn backward(&self, adjoints: &[Jet], grad: &mut Gradient) -> Result<()> {
        let n = self.len();
        if adjoints.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: adjoints.len(),
                context: "jet adjoints",
            });
        }
        if grad.layer_sizes != self.params.layer_sizes {
            return Err(Error::Config("gradient shape does not match the network".into()));
        }
        let mut g_val = Array2::from_shape_fn((1, n), |(_, b)| adjoints[b].u);
        let mut g_der = self.deriv.then(|| {
            Array2::from_shape_fn((1, 3 * n), |(_, c)| {
                let a = &adjoints[c % n];
                match c / n {
                    0 => a.du_dx,
                    1 => a.d2u_dx2,
                    _ => a.du_dt,
                }
            })
        });

        let last = self.layers.len() - 1;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            if l != last {
                // Turn adjoints of the tanh jet into adjoints of the
                // pre-activation jet.
                let s = layer.act.as_slice().unwrap();
                let gv = g_val.as_slice_mut().unwrap();
                match (&mut g_der, &layer.pre_der) {
                    (Some(g_der), Some(a_der)) => {
                        let ad = a_der.as_slice().unwrap();
                        let gd = g_der.as_slice_mut().unwrap();
                        for i in 0..layer.act.nrows() {
                            for b in 0..n {
                                let sig = s[i * n + b];
                                let d1 = 1.0 - sig * sig;
                                let d2 = -2.0 * sig * d1;
                                let base = i * 3 * n;
                                let (ax, axx, at) = (ad[base + b], ad[base + n + b], ad[base + 2 * n + b]);
                                let (gx, gxx, gt) = (gd[base + b], gd[base + n + b], gd[base + 2 * n + b]);
                                let mut d1_bar = gx * ax + gxx * axx + gt * at;
                                let d2_bar = gxx * ax * ax;
                                d1_bar += d2_bar * (-2.0 * sig);
                                let sig_bar = gv[i * n + b] + d2_bar * (-2.0 * d1) + d1_bar * (-2.0 * sig);
                                gv[i * n + b] = sig_bar * d1;
                                gd[base + b] = gx * d1 + gxx * d2 * 2.0 * ax;
                                gd[base + n + b] = gxx * d1;
                                gd[base + 2 * n + b] = gt * d1;
                            }
                        }
                    }
                    _ => {
                        for (g, &sig) in gv.iter_mut().zip(s) {
                            *g *= 1.0 - sig * sig;
                        }
                    }
                }
            }

            let slot = grad.slots[l];
            {
                let mut gw = ArrayViewMut2::from_shape(
                    (slot.fan_out, slot.fan_in),
                    &mut grad.values[slot.weights..slot.biases],
                )
                .unwrap();
                ndarray::linalg::general_mat_mul(1.0, &g_val, &layer.input_val.t(), 1.0, &mut gw);
                if let (Some(g_der), Some(h_der)) = (&g_der, &layer.input_der) {
                    ndarray::linalg::general_mat_mul(1.0, g_der, &h_der.t(), 1.0, &mut gw);
                }
            }
            for (gb, row) in grad.values[slot.biases..slot.biases + slot.fan_out]
                .iter_mut()
                .zip(g_val.rows())
            {
                *gb += row.sum();
            }
            if l > 0 {
                let w = self.params.weight(l);
                g_val = w.t().dot(&g_val);
                g_der = g_der.map(|g| w.t().dot(&g));
            }
        }
        Ok(())
    }
}

/// `∂L/∂θ`, laid out exactly like [`NetworkParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    layer_sizes: Vec<usize>,
    slots: Vec<LayerSlot>,
    values: Vec<f64>,
}

impl Gradient {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Gradient {
            layer_sizes: params.layer_sizes.clone(),
            slots: params.slots.clone(),
            values: vec![0.0; params.values.len()],
        }
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn weight(&self, layer: usize) -> ArrayView2<'_, f64> {
        let s = self.slots[layer];
        ArrayView2::from_shape((s.fan_out, s.fan_in), &self.values[s.weights..s.biases]).unwrap()
    }

    pub fn bias(&self, layer: usize) -> ArrayView1<'_, f64> {
        let s = self.slots[layer];
        ArrayView1::from(&self.values[s.biases..s.biases + s.fan_out])
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|g| *g *= factor);
    }

    /// `self += factor · other`.
    pub fn add_scaled(&mut self, other: &Gradient, factor: f64) {
        assert_eq!(self.values.len(), other.values.len(), "gradient shapes differ");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, g| m.max(g.abs()))
    }

    pub fn mean_abs(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().map(|g| g.abs()).sum::<f64>() / self.values.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|g| g.is_finite())
    }
}

/// Value and exact parameter gradient of a scalar loss of the output jets.
///
/// `loss` receives the jets of every sample in `batch` and returns the loss
/// value together with `∂loss/∂jet` for each sample.
pub fn grad_params<F>(params: &NetworkParams, batch: &InputBatch, loss: F) -> Result<(f64, Gradient)>
where
    F: FnOnce(&[Jet]) -> (f64, Vec<Jet>),
{
    let mut grad = Gradient::zeros_like(params);
    if batch.is_empty() {
        return Ok((0.0, grad));
    }
    let trace = params.trace(batch)?;
    let jets = trace.jets();
    let (value, adjoints) = loss(&jets);
    if !value.is_finite() {
        return Err(Error::Numeric {
            context: "loss".into(),
            detail: format!("loss = {value} on batch {}", describe_batch(batch)),
        });
    }
    trace.backward(&adjoints, &mut grad)?;
    Ok((value, grad))
}

/// Compact rendering of a batch's input values for error messages.
pub(crate) fn describe_batch(batch: &InputBatch) -> String {
    const SHOWN: usize = 8;
    let v = batch.value();
    let cols: Vec<String> = (0..batch.len().min(SHOWN))
        .map(|b| {
            let col: Vec<String> = v.column(b).iter().map(|x| format!("{x:.6}")).collect();
            format!("({})", col.join(", "))
        })
        .collect();
    let more = if batch.len() > SHOWN {
        format!(" … {} more", batch.len() - SHOWN)
    } else {
        String::new()
    };
    format!("[{}{}]", cols.join(" "), more)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_architecture_param_count() {
        // Σ (fan_in·fan_out + fan_out): 90 + 4·930 + 31, and 120 + 4·930 + 31.
        let p = NetworkParams::init(&[2, 30, 30, 30, 30, 30, 1], 42).unwrap();
        assert_eq!(p.num_params(), 3841);
        let p = NetworkParams::init(&[3, 30, 30, 30, 30, 30, 1], 42).unwrap();
        assert_eq!(p.num_params(), 3871);
        let bound = (6.0f64 / 33.0).sqrt();
        assert!(p.weight(0).iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn smallest_network_has_zero_bias() {
        let p = NetworkParams::init(&[1, 1], 9).unwrap();
        assert_eq!(p.num_params(), 2);
        assert_eq!(p.bias(0)[0], 0.0);
    }

    #[test]
    fn bad_layer_sizes_rejected() {
        assert!(matches!(NetworkParams::init(&[], 1), Err(Error::Config(_))));
        assert!(matches!(NetworkParams::init(&[2], 1), Err(Error::Config(_))));
        assert!(matches!(NetworkParams::init(&[2, 0, 1], 1), Err(Error::Config(_))));
    }

    #[test]
    fn init_is_deterministic() {
        let a = NetworkParams::init(&[2, 5, 1], 11).unwrap();
        let b = NetworkParams::init(&[2, 5, 1], 11).unwrap();
        let c = NetworkParams::init(&[2, 5, 1], 12).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        assert_ne!(a.as_slice(), c.as_slice());
    }

    #[test]
    fn zero_weights_output_bias() {
        let mut p = NetworkParams::init(&[2, 4, 1], 1).unwrap();
        p.as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
        p.bias_mut(1)[0] = 0.75;
        assert_eq!(p.forward(&[0.3, -2.0]).unwrap(), 0.75);
    }

    #[test]
    fn identity_projection() {
        let p = NetworkParams::from_values(&[2, 1], 0, vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.forward(&[0.37, 0.9]).unwrap(), 0.37);
    }

    #[test]
    fn input_width_mismatch() {
        let p = NetworkParams::init(&[2, 3, 1], 1).unwrap();
        assert!(matches!(p.forward(&[1.0]), Err(Error::Dimension { .. })));
        assert!(matches!(p.forward_jet(0.1, 0.2, &[0.3]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn affine_jet() {
        let p = NetworkParams::from_values(&[2, 1], 0, vec![1.5, -0.25, 0.125]).unwrap();
        let jet = p.forward_jet(0.4, 0.8, &[]).unwrap();
        assert_eq!(jet.du_dx, 1.5);
        assert_eq!(jet.d2u_dx2, 0.0);
        assert_eq!(jet.du_dt, -0.25);
        assert!((jet.u - (1.5 * 0.4 - 0.25 * 0.8 + 0.125)).abs() < 1e-15);
    }

    #[test]
    fn single_tanh_neuron_jet() {
        // u = tanh(2x)
        let p = NetworkParams::from_values(&[2, 1, 1], 0, vec![2.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let jet = p.forward_jet(0.3, 0.77, &[]).unwrap();
        let th = 0.6f64.tanh();
        let sech2 = 1.0 / 0.6f64.cosh().powi(2);
        assert!((jet.du_dx - 2.0 * sech2).abs() < 1e-14);
        assert!((jet.d2u_dx2 + 8.0 * th * sech2).abs() < 1e-14);
        assert_eq!(jet.du_dt, 0.0);
    }

    #[test]
    fn jet_value_matches_forward_exactly() {
        let p = NetworkParams::init(&[2, 30, 30, 30, 30, 30, 1], 5).unwrap();
        for &(x, t) in &[(0.0, 0.0), (0.25, 0.5), (0.9, 0.1)] {
            assert_eq!(p.forward_jet(x, t, &[]).unwrap().u, p.forward(&[x, t]).unwrap());
        }
    }

    #[test]
    fn empty_batch_zero_gradient() {
        let p = NetworkParams::init(&[2, 3, 1], 1).unwrap();
        let (v, g) = grad_params(&p, &InputBatch::points(&[]), |_| (0.0, vec![])).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn linear_layer_hand_gradient() {
        let (w1, w2, b) = (0.7, -0.3, 0.2);
        let (x0, t0) = (0.5, 0.25);
        let p = NetworkParams::from_values(&[2, 1], 0, vec![w1, w2, b]).unwrap();
        let (loss, g) = grad_params(&p, &InputBatch::points(&[(x0, t0)]), |jets| {
            let u = jets[0].u;
            (u * u, vec![Jet { u: 2.0 * u, ..Jet::ZERO }])
        })
        .unwrap();
        let u = w1 * x0 + w2 * t0 + b;
        assert!((loss - u * u).abs() < 1e-15);
        assert!((g.as_slice()[0] - 2.0 * u * x0).abs() < 1e-15);
        assert!((g.as_slice()[1] - 2.0 * u * t0).abs() < 1e-15);
        assert!((g.as_slice()[2] - 2.0 * u).abs() < 1e-15);
    }

    #[test]
    fn non_finite_loss_reports_batch() {
        let p = NetworkParams::init(&[2, 3, 1], 1).unwrap();
        let err = grad_params(&p, &InputBatch::points(&[(0.1, 0.2)]), |_| (f64::NAN, vec![Jet::ZERO])).unwrap_err();
        match err {
            Error::Numeric { detail, .. } => assert!(detail.contains("0.100000")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn checkpoint_round_trip_is_lossless() {
        let p = NetworkParams::init(&[3, 7, 5, 1], 77).unwrap();
        let q = NetworkParams::from_checkpoint_str(&p.to_checkpoint_string()).unwrap();
        assert_eq!(p, q);
        let bits = |n: &NetworkParams| n.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&p), bits(&q));
    }

    #[test]
    fn checkpoint_rejects_truncation() {
        let p = NetworkParams::init(&[2, 3, 1], 1).unwrap();
        let text = p.to_checkpoint_string();
        let cut: String = text.lines().take(6).collect::<Vec<_>>().join("\n");
        assert!(matches!(NetworkParams::from_checkpoint_str(&cut), Err(Error::Format { .. })));
    }
}
