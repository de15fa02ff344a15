//! The 2-4-4-4-1 tanh network, executed layer by layer on the weight bank.
//!
//! The rings only realize weights in `[0, 1]` on intensities in `[0, 1]`. A
//! signed activation `a` is sent as `e = (a + 1) / 2` and every layer runs two
//! passes through the bank: `p = W e` and `r = W 1`. With `q = sum(e)` and
//! fan-in `n`,
//!
//! ```text
//! 4 p - 2 r - 2 q + n = sum_i (2 w_i - 1)(2 e_i - 1)
//! ```
//!
//! so the network effectively uses signed weights `s = 2 w - 1` in `[-1, 1]`
//! on signed activations. Biases and `tanh` are applied digitally.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::hardware::{RealizedMatrix, WeightBank};
use crate::rng::{keyed_rng, NoiseStream};

/// Layer widths of a rectangular MLP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkTopology {
    widths: Vec<usize>,
}

impl Default for NetworkTopology {
    fn default() -> Self {
        Self {
            widths: vec![2, 4, 4, 4, 1],
        }
    }
}

impl NetworkTopology {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::config(format!("invalid layer widths {widths:?}")));
        }
        if widths[0] != 2 || widths[widths.len() - 1] != 1 {
            return Err(Error::config("the network maps (x, t) to a single output"));
        }
        Ok(Self { widths })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// `(fan_in, fan_out)` per weight matrix.
    pub fn layers(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.widths.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn n_weights(&self) -> usize {
        self.layers().map(|(i, o)| i * o).sum()
    }

    pub fn n_biases(&self) -> usize {
        self.widths[1..].iter().sum()
    }

    pub fn n_params(&self) -> usize {
        self.n_weights() + self.n_biases()
    }

    /// Tile operations of one uncached forward pass: two passes per layer,
    /// `fan_out * ceil(fan_in / 4)` tiles each.
    pub fn tile_ops_per_forward(&self) -> u64 {
        self.layers()
            .map(|(i, o)| 2 * (o * i.div_ceil(crate::hardware::TILE_WIDTH)) as u64)
            .sum()
    }
}

/// Trainable state: one heater voltage per weight, then one digital bias per
/// neuron.
///
/// Voltages are stored layer-major, and row-major within a layer where the
/// layer matrix is `fan_in x fan_out` (index `in * fan_out + out`). Biases
/// follow, layer-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    topology: NetworkTopology,
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn from_flat(topology: NetworkTopology, values: Vec<f64>) -> Result<Self> {
        if values.len() != topology.n_params() {
            return Err(Error::config(format!(
                "expected {} parameters for topology {:?}, got {}",
                topology.n_params(),
                topology.widths(),
                values.len()
            )));
        }
        Ok(Self { topology, values })
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_voltages(&self) -> usize {
        self.topology.n_weights()
    }

    pub fn voltages(&self) -> &[f64] {
        &self.values[..self.n_voltages()]
    }

    pub fn biases(&self) -> &[f64] {
        &self.values[self.n_voltages()..]
    }

    /// Saturates every voltage to `[lo, hi]`.
    pub fn clip_voltages(&mut self, lo: f64, hi: f64) {
        let n = self.n_voltages();
        for v in &mut self.values[..n] {
            *v = v.clamp(lo, hi);
        }
    }

    /// Per-layer `(voltage offset, bias offset)`.
    fn offsets(&self) -> Vec<(usize, usize)> {
        let mut w = 0;
        let mut b = self.n_voltages();
        self.topology
            .layers()
            .map(|(i, o)| {
                let off = (w, b);
                w += i * o;
                b += o;
                off
            })
            .collect()
    }
}

/// Uniform voltages over the central 60% of the heater range and biases in
/// `[-0.1, 0.1]`, drawn from `seed`.
pub fn init_params(topology: &NetworkTopology, seed: u64, bank: &WeightBank) -> ParameterVector {
    let mut rng = keyed_rng(&[seed, 0x1417]);
    let span = bank.v_span();
    let (lo, hi) = (bank.v_min() + 0.2 * span, bank.v_max() - 0.2 * span);
    let mut values = Vec::with_capacity(topology.n_params());
    values.extend((0..topology.n_weights()).map(|_| rng.gen_range(lo..=hi)));
    values.extend((0..topology.n_biases()).map(|_| rng.gen_range(-0.1..=0.1)));
    ParameterVector {
        topology: topology.clone(),
        values,
    }
}

/// A parameter set loaded onto the bank, callable as `(x, t) -> u`.
///
/// Voltage matrices are realized once at construction; every call then runs
/// the uncached two-pass forward and advances the noise stream by one
/// position per tile operation.
#[derive(Debug, Clone)]
pub struct HardwareEvaluator<'a> {
    bank: &'a WeightBank,
    layers: Vec<(RealizedMatrix, Vec<f64>)>,
    ones: Vec<f64>,
    stream: NoiseStream,
    tile_ops: u64,
    calls: u64,
    act: Vec<f64>,
    encoded: Vec<f64>,
    p: Vec<f64>,
    r: Vec<f64>,
}

impl<'a> HardwareEvaluator<'a> {
    pub fn new(params: &ParameterVector, bank: &'a WeightBank, stream: NoiseStream) -> Result<Self> {
        let topology = params.topology();
        let offsets = params.offsets();
        let mut layers = Vec::with_capacity(topology.n_layers());
        let mut widest = 0;
        for ((fan_in, fan_out), (w_off, b_off)) in topology.layers().zip(offsets) {
            widest = widest.max(fan_in).max(fan_out);
            // stored fan_in x fan_out; the bank wants fan_out rows of fan_in
            let stored = &params.voltages()[w_off..w_off + fan_in * fan_out];
            let mut rows = Vec::with_capacity(stored.len());
            for o in 0..fan_out {
                rows.extend((0..fan_in).map(|i| stored[i * fan_out + o]));
            }
            let matrix = bank.realize(&rows, fan_in)?;
            let bias = params.as_slice()[b_off..b_off + fan_out].to_vec();
            layers.push((matrix, bias));
        }
        let ones = vec![bank.encode_input(1.0); widest];
        Ok(Self {
            bank,
            layers,
            ones,
            stream,
            tile_ops: 0,
            calls: 0,
            act: Vec::with_capacity(widest),
            encoded: Vec::with_capacity(widest),
            p: Vec::with_capacity(widest),
            r: Vec::with_capacity(widest),
        })
    }

    /// Signed weights `2 w - 1` as the network sees them, per layer, in
    /// `fan_out x fan_in` row-major order.
    pub fn signed_weights(&self) -> Vec<Vec<f64>> {
        self.layers
            .iter()
            .map(|(m, _)| m.weights.iter().map(|w| 2.0 * w - 1.0).collect())
            .collect()
    }

    pub fn tile_ops(&self) -> u64 {
        self.tile_ops
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn stream(&self) -> NoiseStream {
        self.stream
    }

    /// Network output at `(x, t)`; both enter the first layer directly as
    /// intensities.
    pub fn eval(&mut self, x: f64, t: f64) -> f64 {
        self.calls += 1;
        self.act.clear();
        self.act.extend([x, t]);
        let n_layers = self.layers.len();
        for (l, (matrix, bias)) in self.layers.iter().enumerate() {
            self.encoded.clear();
            self.encoded.extend(self.act.iter().map(|&e| self.bank.encode_input(e)));
            let fan_in = matrix.cols;
            self.tile_ops += self
                .bank
                .matvec_encoded(matrix, &self.encoded, &mut self.stream, &mut self.p);
            self.tile_ops += self
                .bank
                .matvec_encoded(matrix, &self.ones[..fan_in], &mut self.stream, &mut self.r);
            let q: f64 = self.encoded.iter().sum();
            let last = l + 1 == n_layers;
            self.act.clear();
            for ((&p, &r), &b) in self.p.iter().zip(&self.r).zip(bias) {
                let z = (4.0 * p - 2.0 * q) - (2.0 * r - fan_in as f64) + b;
                self.act.push(if last { z } else { 0.5 * (z.tanh() + 1.0) });
            }
        }
        self.act[0]
    }
}

/// One forward pass; returns the output and the tile operations it used.
pub fn forward(
    params: &ParameterVector,
    x: f64,
    t: f64,
    bank: &WeightBank,
    stream: &mut NoiseStream,
) -> Result<(f64, u64)> {
    let mut ev = HardwareEvaluator::new(params, bank, *stream)?;
    let u = ev.eval(x, t);
    *stream = ev.stream();
    Ok((u, ev.tile_ops()))
}

/// Builds a reusable evaluator for `params` on `bank`.
pub fn make_evaluator<'a>(
    params: &ParameterVector,
    bank: &'a WeightBank,
    stream: NoiseStream,
) -> Result<HardwareEvaluator<'a>> {
    HardwareEvaluator::new(params, bank, stream)
}

/// Parameters plus the optimizer state needed to resume a run exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ParameterVector,
    /// Iterations completed; noise and direction streams are keyed by it.
    pub iteration: u64,
    /// Adam first and second moments, if saved.
    pub moments: Option<(Vec<f64>, Vec<f64>)>,
}

impl Checkpoint {
    pub fn new(params: ParameterVector) -> Self {
        Self {
            params,
            iteration: 0,
            moments: None,
        }
    }

    /// Writes `index,kind,layer,row,col,value`. Voltages use `row` = input
    /// neuron and `col` = output neuron; biases use `row` = neuron and leave
    /// `col` empty. Optional trailing rows carry Adam moments
    /// (`moment1`/`moment2`, same index/layer/row/col as the parameter) and the
    /// completed-iteration `counter`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,kind,layer,row,col,value\n");
        let coords = coordinates(self.params.topology());
        let mut emit = |kind: &str, values: &[f64]| {
            for (idx, ((is_bias, layer, row, col), v)) in coords.iter().zip(values).enumerate() {
                let kind = match (kind, is_bias) {
                    ("param", false) => "voltage",
                    ("param", true) => "bias",
                    (k, _) => k,
                };
                let col = col.map(|c| c.to_string()).unwrap_or_default();
                let _ = writeln!(out, "{idx},{kind},{layer},{row},{col},{v}");
            }
        };
        emit("param", self.params.as_slice());
        if let Some((m, v)) = &self.moments {
            emit("moment1", m);
            emit("moment2", v);
        }
        let _ = writeln!(out, "{},counter,,,,{}", self.params.len(), self.iteration);
        out
    }

    pub fn from_csv(text: &str, topology: &NetworkTopology) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::format("empty checkpoint"))?;
        if header != "index,kind,layer,row,col,value" {
            return Err(Error::format(format!("unexpected checkpoint header `{header}`")));
        }
        let coords = coordinates(topology);
        let n = topology.n_params();
        let mut params = vec![f64::NAN; n];
        let mut m1 = vec![f64::NAN; n];
        let mut m2 = vec![f64::NAN; n];
        let mut iteration = 0;
        for (line_no, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            let bad = |what: &str| Error::format(format!("checkpoint row {}: {what}", line_no + 1));
            if cells.len() != 6 {
                return Err(bad("expected 6 columns"));
            }
            let idx: usize = cells[0].parse().map_err(|_| bad("bad index"))?;
            let kind = cells[1];
            if kind == "counter" {
                iteration = cells[5].parse().map_err(|_| bad("bad counter"))?;
                continue;
            }
            let value: f64 = cells[5].parse().map_err(|_| bad("bad value"))?;
            let &(is_bias, layer, row, col) = coords
                .get(idx)
                .ok_or_else(|| bad("index does not fit the network topology"))?;
            let col_text = col.map(|c| c.to_string()).unwrap_or_default();
            if cells[2] != layer.to_string() || cells[3] != row.to_string() || cells[4] != col_text {
                return Err(bad("layer/row/col do not match the network topology"));
            }
            let slot = match (kind, is_bias) {
                ("voltage", false) | ("bias", true) => &mut params,
                ("moment1", _) => &mut m1,
                ("moment2", _) => &mut m2,
                _ => return Err(bad("kind does not match the network topology")),
            };
            slot[idx] = value;
        }
        if params.iter().any(|v| v.is_nan()) {
            return Err(Error::format("checkpoint does not cover every parameter"));
        }
        let moments = match (m1.iter().all(|v| !v.is_nan()), m2.iter().all(|v| !v.is_nan())) {
            (true, true) => Some((m1, m2)),
            _ => None,
        };
        Ok(Self {
            params: ParameterVector::from_flat(topology.clone(), params)?,
            iteration,
            moments,
        })
    }
}

/// `(is_bias, layer, row, col)` for every flat parameter index.
fn coordinates(topology: &NetworkTopology) -> Vec<(bool, usize, usize, Option<usize>)> {
    let mut coords = Vec::with_capacity(topology.n_params());
    for (l, (fan_in, fan_out)) in topology.layers().enumerate() {
        for i in 0..fan_in {
            for o in 0..fan_out {
                coords.push((false, l, i, Some(o)));
            }
        }
    }
    for (l, (_, fan_out)) in topology.layers().enumerate() {
        for o in 0..fan_out {
            coords.push((true, l, o, None));
        }
    }
    coords
}
