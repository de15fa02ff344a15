//! Behavioral model of a 1x4 micro-ring weight bank.
//!
//! Each of the four rings imposes a weight in `[0, 1]` on one wavelength lane,
//! set by a heater voltage through a monotone transfer curve. A photodetector
//! sums the weighted lanes. Larger matrix-vector products are time-multiplexed
//! onto the single 1x4 tile, one tile operation per clock cycle.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::{keyed_rng, NoiseStream};

/// Number of rings (lanes) in the physical tile.
pub const TILE_WIDTH: usize = 4;

/// Detected value range: four lanes of unit intensity at unit weight.
pub const DETECTOR_RANGE: (f64, f64) = (0.0, TILE_WIDTH as f64);

/// Default heater voltage span of the synthesized curves.
pub const SYNTH_V_RANGE: (f64, f64) = (0.0, 2.0);
/// Heater power (V^2) at the logistic midpoint of a nominal ring.
pub const SYNTH_CENTER: f64 = 1.5;
/// Logistic width in units of V^2.
pub const SYNTH_WIDTH: f64 = 0.5;
/// Samples per synthesized curve.
pub const SYNTH_SAMPLES: usize = 1025;

/// Bit depth of a converter, or no quantization at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Precision {
    Full,
    Bits(u32),
}

impl Precision {
    pub const MAX_BITS: u32 = 48;

    pub fn bits(bits: u32) -> Result<Self> {
        if !(2..=Self::MAX_BITS).contains(&bits) {
            return Err(Error::config(format!(
                "bit depth must lie in [2, {}], got {bits}",
                Self::MAX_BITS
            )));
        }
        Ok(Precision::Bits(bits))
    }

    fn validate(self) -> Result<Self> {
        match self {
            Precision::Full => Ok(self),
            Precision::Bits(b) => Precision::bits(b),
        }
    }

    /// Quantization step over `[lo, hi]`, or zero at full precision.
    pub fn lsb(self, lo: f64, hi: f64) -> f64 {
        match self {
            Precision::Full => 0.0,
            Precision::Bits(b) => (hi - lo) / max_code(b),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Precision::Full => f.write_str("full"),
            Precision::Bits(b) => write!(f, "{b}"),
        }
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("full") {
            return Ok(Precision::Full);
        }
        let bits: u32 = s
            .parse()
            .map_err(|_| Error::config(format!("bit depth must be an integer or \"full\", got {s:?}")))?;
        Precision::bits(bits)
    }
}

#[inline]
fn max_code(bits: u32) -> f64 {
    ((1u64 << bits) - 1) as f64
}

/// Clips `value` to `[lo, hi]` and rounds it to the nearest of the `2^bits`
/// evenly spaced levels, ties to the even integer code.
pub fn quantize_uniform(value: f64, precision: Precision, lo: f64, hi: f64) -> Result<f64> {
    let precision = precision.validate()?;
    if !(lo < hi) {
        return Err(Error::config(format!("quantizer range [{lo}, {hi}] is empty")));
    }
    Ok(quantize_clipped(value, precision, lo, hi))
}

#[inline]
fn quantize_clipped(value: f64, precision: Precision, lo: f64, hi: f64) -> f64 {
    let v = value.clamp(lo, hi);
    match precision {
        Precision::Full => v,
        Precision::Bits(b) => {
            let levels = max_code(b);
            let code = ((v - lo) / (hi - lo) * levels).round_ties_even();
            lo + code * (hi - lo) / levels
        }
    }
}

/// Converter precisions at the three places a signal crosses between the
/// digital and analog domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantSpec {
    /// Input modulators, over `[0, 1]`.
    pub input: Precision,
    /// Heater DACs, over `[v_min, v_max]`.
    pub voltage: Precision,
    /// Detector ADC, over [`DETECTOR_RANGE`].
    pub detector: Precision,
}

impl QuantSpec {
    pub fn full() -> Self {
        Self::uniform(Precision::Full)
    }

    /// Same precision at all three sites.
    pub fn uniform(precision: Precision) -> Self {
        Self {
            input: precision,
            voltage: precision,
            detector: precision,
        }
    }

    pub fn validate(self) -> Result<Self> {
        Ok(Self {
            input: self.input.validate()?,
            voltage: self.voltage.validate()?,
            detector: self.detector.validate()?,
        })
    }
}

impl Default for QuantSpec {
    fn default() -> Self {
        Self::full()
    }
}

/// Analog imperfections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Std-dev of additive Gaussian noise on each detected dot product.
    pub sigma_read: f64,
    /// Relative std-dev of per-ring curve centers.
    pub sigma_fab: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn ideal() -> Self {
        Self {
            sigma_read: 0.0,
            sigma_fab: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_read >= 0.0) || !(self.sigma_fab >= 0.0) {
            return Err(Error::config(format!(
                "noise std-devs must be non-negative (sigma_read={}, sigma_fab={})",
                self.sigma_read, self.sigma_fab
            )));
        }
        Ok(())
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::ideal()
    }
}

/// A sampled voltage-to-weight transfer curve, interpolated linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightCurve {
    samples: Vec<(f64, f64)>,
}

impl WeightCurve {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::format(format!(
                "a weight curve needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        for (i, &(v, w)) in samples.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::format(format!("sample {i}: voltage {v} is not finite")));
            }
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Range(format!("sample {i}: weight {w} outside [0, 1]")));
            }
        }
        for (i, pair) in samples.windows(2).enumerate() {
            let ((v0, w0), (v1, w1)) = (pair[0], pair[1]);
            if !(v1 > v0) {
                return Err(Error::format(format!(
                    "voltages must be strictly increasing (row {} has {v1} after {v0})",
                    i + 1
                )));
            }
            if w1 < w0 {
                return Err(Error::format(format!(
                    "weights must be non-decreasing (row {} has {w1} after {w0})",
                    i + 1
                )));
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn v_min(&self) -> f64 {
        self.samples[0].0
    }

    pub fn v_max(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    /// Weight at voltage `v`; `v` must already lie in `[v_min, v_max]`.
    pub fn weight_at(&self, v: f64) -> Result<f64> {
        let (lo, hi) = (self.v_min(), self.v_max());
        if !(lo..=hi).contains(&v) {
            return Err(Error::OutOfRange { v, lo, hi });
        }
        let s = &self.samples;
        // first sample strictly above v; v == v_max lands past the end
        let idx = s.partition_point(|&(sv, _)| sv <= v);
        if idx == s.len() {
            return Ok(s[s.len() - 1].1);
        }
        let (v0, w0) = s[idx - 1];
        let (v1, w1) = s[idx];
        Ok(w0 + (w1 - w0) * (v - v0) / (v1 - v0))
    }
}

/// Piecewise-linear lookup on a transfer curve.
pub fn weight_from_voltage(curve: &WeightCurve, v: f64) -> Result<f64> {
    curve.weight_at(v)
}

fn parse_rows(csv_text: &str, expected_header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut lines = csv_text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines.next().ok_or_else(|| Error::format("empty curve file"))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names != expected_header {
        return Err(Error::format(format!(
            "expected header `{}`, got `{header}`",
            expected_header.join(",")
        )));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != expected_header.len() {
                return Err(Error::format(format!(
                    "data row {}: expected {} columns, got {}",
                    i + 1,
                    expected_header.len(),
                    cells.len()
                )));
            }
            cells
                .iter()
                .map(|c| {
                    c.parse::<f64>()
                        .map_err(|_| Error::format(format!("data row {}: cannot parse {c:?}", i + 1)))
                })
                .collect()
        })
        .collect()
}

/// Parses a single-channel `voltage,weight` curve.
pub fn load_weight_curve(csv_text: &str) -> Result<WeightCurve> {
    let rows = parse_rows(csv_text, &["voltage", "weight"])?;
    WeightCurve::new(rows.into_iter().map(|r| (r[0], r[1])).collect())
}

/// Parses a combined `voltage,w1,w2,w3,w4` table into four curves.
pub fn load_weight_curves_combined(csv_text: &str) -> Result<[WeightCurve; TILE_WIDTH]> {
    let rows = parse_rows(csv_text, &["voltage", "w1", "w2", "w3", "w4"])?;
    let curve = |ch: usize| WeightCurve::new(rows.iter().map(|r| (r[0], r[ch + 1])).collect());
    Ok([curve(0)?, curve(1)?, curve(2)?, curve(3)?])
}

/// Logistic response in heater power, `1 / (1 + exp(-(V^2 - center) / width))`,
/// rescaled so the curve spans exactly `[0, 1]` over `[v_min, v_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticCurve {
    pub center: f64,
    pub width: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl LogisticCurve {
    pub fn nominal() -> Self {
        Self {
            center: SYNTH_CENTER,
            width: SYNTH_WIDTH,
            v_min: SYNTH_V_RANGE.0,
            v_max: SYNTH_V_RANGE.1,
        }
    }

    /// Unrescaled logistic.
    pub fn raw(&self, v: f64) -> f64 {
        1.0 / (1.0 + (-(v * v - self.center) / self.width).exp())
    }

    pub fn weight(&self, v: f64) -> f64 {
        let lo = self.raw(self.v_min);
        let hi = self.raw(self.v_max);
        ((self.raw(v) - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    /// Samples the curve at `n` evenly spaced voltages, endpoints pinned to 0 and 1.
    pub fn sample(&self, n: usize) -> Result<WeightCurve> {
        let n = n.max(2);
        let step = (self.v_max - self.v_min) / (n - 1) as f64;
        let mut running = 0.0f64;
        let samples = (0..n)
            .map(|i| {
                let v = if i == n - 1 {
                    self.v_max
                } else {
                    self.v_min + step * i as f64
                };
                let w = match i {
                    0 => 0.0,
                    _ if i == n - 1 => 1.0,
                    _ => self.weight(v),
                };
                running = running.max(w);
                (v, running)
            })
            .collect();
        WeightCurve::new(samples)
    }
}

/// Synthesizes four ring curves whose centers scatter as
/// `center * (1 + eps_i)`, `eps_i ~ Normal(0, sigma_fab)`.
pub fn synth_curves(sigma_fab: f64, seed: u64) -> Result<[WeightCurve; TILE_WIDTH]> {
    if !(sigma_fab >= 0.0) {
        return Err(Error::config(format!(
            "sigma_fab must be non-negative, got {sigma_fab}"
        )));
    }
    let mut rng = keyed_rng(&[seed, 0xfab]);
    let normal = Normal::new(0.0, sigma_fab).map_err(|e| Error::config(e.to_string()))?;
    let nominal = LogisticCurve::nominal();
    let mut curve = |_| {
        let eps = if sigma_fab > 0.0 { normal.sample(&mut rng) } else { 0.0 };
        LogisticCurve {
            center: nominal.center * (1.0 + eps),
            ..nominal
        }
        .sample(SYNTH_SAMPLES)
    };
    Ok([curve(0)?, curve(1)?, curve(2)?, curve(3)?])
}

/// Synthesized bank with full precision and no read noise; adjust with
/// [`WeightBank::with_quant`] and [`WeightBank::with_noise`].
pub fn synth_weight_bank(sigma_fab: f64, seed: u64) -> Result<WeightBank> {
    let curves = synth_curves(sigma_fab, seed)?;
    WeightBank::new(
        curves,
        QuantSpec::full(),
        NoiseSpec {
            sigma_read: 0.0,
            sigma_fab,
            seed,
        },
    )
}

/// Four ring channels sharing one voltage range, plus converter and noise models.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightBank {
    curves: [WeightCurve; TILE_WIDTH],
    pub quant: QuantSpec,
    pub noise: NoiseSpec,
}

/// Voltage matrix already quantized and mapped through the channel curves.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizedMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major realized weights in `[0, 1]`.
    pub weights: Vec<f64>,
}

impl WeightBank {
    pub fn new(curves: [WeightCurve; TILE_WIDTH], quant: QuantSpec, noise: NoiseSpec) -> Result<Self> {
        let (lo, hi) = (curves[0].v_min(), curves[0].v_max());
        if curves.iter().any(|c| c.v_min() != lo || c.v_max() != hi) {
            return Err(Error::format("all four curves must share one voltage range"));
        }
        noise.validate()?;
        Ok(Self {
            curves,
            quant: quant.validate()?,
            noise,
        })
    }

    pub fn with_quant(mut self, quant: QuantSpec) -> Result<Self> {
        self.quant = quant.validate()?;
        Ok(self)
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Result<Self> {
        noise.validate()?;
        self.noise = noise;
        Ok(self)
    }

    pub fn curves(&self) -> &[WeightCurve; TILE_WIDTH] {
        &self.curves
    }

    pub fn v_min(&self) -> f64 {
        self.curves[0].v_min()
    }

    pub fn v_max(&self) -> f64 {
        self.curves[0].v_max()
    }

    pub fn v_span(&self) -> f64 {
        self.v_max() - self.v_min()
    }

    pub fn clip_voltage(&self, v: f64) -> f64 {
        v.clamp(self.v_min(), self.v_max())
    }

    /// Heater DAC step at the configured precision (zero at full precision).
    pub fn voltage_lsb(&self) -> f64 {
        self.quant.voltage.lsb(self.v_min(), self.v_max())
    }

    /// Weight realized on `channel` by voltage `v` after DAC quantization.
    pub fn channel_weight(&self, channel: usize, v: f64) -> Result<f64> {
        let (lo, hi) = (self.v_min(), self.v_max());
        if !(lo..=hi).contains(&v) {
            return Err(Error::OutOfRange { v, lo, hi });
        }
        let vq = quantize_clipped(v, self.quant.voltage, lo, hi);
        self.curves[channel].weight_at(vq)
    }

    /// Realizes a row-major `rows x cols` voltage matrix. Column `j` of every
    /// row is routed to ring `j % 4`.
    pub fn realize(&self, voltages: &[f64], cols: usize) -> Result<RealizedMatrix> {
        if cols == 0 || voltages.is_empty() || !voltages.len().is_multiple_of(cols) {
            return Err(Error::config(format!(
                "voltage matrix of {} entries does not tile into rows of {cols}",
                voltages.len()
            )));
        }
        let weights = voltages
            .iter()
            .enumerate()
            .map(|(i, &v)| self.channel_weight((i % cols) % TILE_WIDTH, v))
            .collect::<Result<Vec<_>>>()?;
        Ok(RealizedMatrix {
            rows: voltages.len() / cols,
            cols,
            weights,
        })
    }

    /// Input modulator quantization for one lane intensity.
    #[inline]
    pub fn encode_input(&self, e: f64) -> f64 {
        quantize_clipped(e, self.quant.input, 0.0, 1.0)
    }

    /// One tile operation on inputs that are already encoded: weighted sum,
    /// read noise, detector quantization. Consumes one stream position.
    #[inline]
    fn detect(&self, encoded: &[f64], weights: &[f64], stream: &mut NoiseStream) -> f64 {
        let mut acc = 0.0;
        for (e, w) in encoded.iter().zip(weights) {
            acc += e * w;
        }
        if self.noise.sigma_read > 0.0 {
            acc += self.noise.sigma_read * stream.next_normal();
        } else {
            stream.skip();
        }
        quantize_clipped(acc, self.quant.detector, DETECTOR_RANGE.0, DETECTOR_RANGE.1)
    }

    /// Matrix-vector product on a realized matrix. Inputs are encoded here;
    /// partial tiles are zero-padded and partial sums accumulate digitally.
    /// Returns the number of tile operations.
    pub fn matvec_realized(
        &self,
        matrix: &RealizedMatrix,
        inputs: &[f64],
        stream: &mut NoiseStream,
        out: &mut Vec<f64>,
    ) -> u64 {
        debug_assert_eq!(inputs.len(), matrix.cols);
        let encoded: Vec<f64> = inputs.iter().map(|&e| self.encode_input(e)).collect();
        self.matvec_encoded(matrix, &encoded, stream, out)
    }

    #[inline]
    pub(crate) fn matvec_encoded(
        &self,
        matrix: &RealizedMatrix,
        encoded: &[f64],
        stream: &mut NoiseStream,
        out: &mut Vec<f64>,
    ) -> u64 {
        out.clear();
        let mut ops = 0;
        for row in matrix.weights.chunks_exact(matrix.cols) {
            let mut sum = 0.0;
            // a zero-padded lane contributes nothing, so a short final chunk
            // is the same cycle as a padded one
            for (w, e) in row.chunks(TILE_WIDTH).zip(encoded.chunks(TILE_WIDTH)) {
                sum += self.detect(e, w, stream);
                ops += 1;
            }
            out.push(sum);
        }
        ops
    }
}

/// One 1x4 tile cycle: `sum_i input_i * w_i(voltage_i)` through the bank.
pub fn tile_dot4(
    inputs: [f64; TILE_WIDTH],
    voltages: [f64; TILE_WIDTH],
    bank: &WeightBank,
    stream: &mut NoiseStream,
) -> Result<f64> {
    let mut weights = [0.0; TILE_WIDTH];
    for (ch, (w, &v)) in weights.iter_mut().zip(&voltages).enumerate() {
        *w = bank.channel_weight(ch, v)?;
    }
    let encoded = inputs.map(|e| bank.encode_input(e));
    Ok(bank.detect(&encoded, &weights, stream))
}

/// Time-multiplexed product of a row-major `m x n` voltage matrix with `n`
/// inputs in `[0, 1]`. Returns the `m` outputs and the tile-operation count,
/// `m * ceil(n / 4)`.
pub fn banked_matvec(
    voltages: &[f64],
    inputs: &[f64],
    bank: &WeightBank,
    stream: &mut NoiseStream,
) -> Result<(Vec<f64>, u64)> {
    let matrix = bank.realize(voltages, inputs.len())?;
    let mut out = Vec::with_capacity(matrix.rows);
    let ops = bank.matvec_realized(&matrix, inputs, stream, &mut out);
    Ok((out, ops))
}
