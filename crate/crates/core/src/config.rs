//! Plain-text run configuration: one `key = value` per line, `#` starts a
//! comment. Unknown keys are rejected and missing keys keep their defaults.
//! Relative paths are resolved against the directory of the config file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hardware::{
    load_weight_curve, load_weight_curves_combined, synth_weight_bank, NoiseSpec, Precision, QuantSpec, WeightBank,
    WeightCurve,
};
use crate::zo::{Estimator, LossSpec, ZoConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub bits: Precision,
    pub sigma_read: f64,
    pub sigma_fab: f64,
    /// Seeds fabrication spread and read noise.
    pub hw_seed: u64,
    /// A combined `voltage,w1,w2,w3,w4` table, or four `voltage,weight` files.
    pub lut_path: Vec<PathBuf>,
    pub mu: f64,
    pub k_samples: usize,
    pub estimator: Estimator,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub iterations: usize,
    pub master_seed: u64,
    pub colloc_seed: u64,
    pub init_seed: u64,
    pub delta: f64,
    pub n_interior: usize,
    pub n_initial: usize,
    pub n_boundary_per_side: usize,
    pub eval_nx: usize,
    pub eval_nt: usize,
    pub eval_every: usize,
    /// Evaluate the held-out grid through the noisy readout.
    pub eval_noisy: bool,
    /// Worker threads for loss evaluations; 0 uses every core.
    pub threads: usize,
    /// Checkpoint to resume from.
    pub resume: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let zo = ZoConfig::default();
        Self {
            bits: Precision::Full,
            sigma_read: 0.0,
            sigma_fab: 0.0,
            hw_seed: 0,
            lut_path: Vec::new(),
            mu: zo.mu,
            k_samples: zo.k_samples,
            estimator: zo.estimator,
            lr: zo.lr,
            beta1: zo.beta1,
            beta2: zo.beta2,
            eps: zo.eps,
            iterations: zo.iterations,
            master_seed: 0,
            colloc_seed: 0,
            init_seed: 0,
            delta: zo.loss.delta,
            n_interior: zo.loss.n_interior,
            n_initial: zo.loss.n_initial,
            n_boundary_per_side: zo.loss.n_boundary_per_side,
            eval_nx: zo.eval_nx,
            eval_nt: zo.eval_nt,
            eval_every: zo.eval_every,
            eval_noisy: false,
            threads: 0,
            resume: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("invalid value {value:?} for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::config(format!("invalid boolean {value:?} for `{key}`"))),
    }
}

impl RunConfig {
    /// Parses config text; relative paths are joined onto `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = RunConfig {
            output_dir: base_dir.join("out"),
            ..RunConfig::default()
        };
        let path = |v: &str| base_dir.join(v);
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key=value, got {raw:?}", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "bits" => cfg.bits = value.parse()?,
                "sigma_read" => cfg.sigma_read = parse(key, value)?,
                "sigma_fab" => cfg.sigma_fab = parse(key, value)?,
                "hw_seed" => cfg.hw_seed = parse(key, value)?,
                "lut_path" => {
                    cfg.lut_path = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(path)
                        .collect()
                }
                "mu" => cfg.mu = parse(key, value)?,
                "k_samples" => cfg.k_samples = parse(key, value)?,
                "estimator" => cfg.estimator = value.parse()?,
                "lr" => cfg.lr = parse(key, value)?,
                "beta1" => cfg.beta1 = parse(key, value)?,
                "beta2" => cfg.beta2 = parse(key, value)?,
                "eps" => cfg.eps = parse(key, value)?,
                "iterations" => cfg.iterations = parse(key, value)?,
                "master_seed" => cfg.master_seed = parse(key, value)?,
                "colloc_seed" => cfg.colloc_seed = parse(key, value)?,
                "init_seed" => cfg.init_seed = parse(key, value)?,
                "delta" => cfg.delta = parse(key, value)?,
                "n_interior" => cfg.n_interior = parse(key, value)?,
                "n_initial" => cfg.n_initial = parse(key, value)?,
                "n_boundary_per_side" => cfg.n_boundary_per_side = parse(key, value)?,
                "eval_nx" => cfg.eval_nx = parse(key, value)?,
                "eval_nt" => cfg.eval_nt = parse(key, value)?,
                "eval_every" => cfg.eval_every = parse(key, value)?,
                "eval_noisy" => cfg.eval_noisy = parse_bool(key, value)?,
                "threads" => cfg.threads = parse(key, value)?,
                "resume" => cfg.resume = (!value.is_empty()).then(|| path(value)),
                "output_dir" => cfg.output_dir = path(value),
                other => return Err(Error::config(format!("line {}: unknown key `{other}`", n + 1))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        NoiseSpec {
            sigma_read: self.sigma_read,
            sigma_fab: self.sigma_fab,
            seed: self.hw_seed,
        }
        .validate()?;
        if !matches!(self.lut_path.len(), 0 | 1 | 4) {
            return Err(Error::config(
                "lut_path takes one combined table or four per-ring files",
            ));
        }
        if self.eval_nx < 2 || self.eval_nt < 2 {
            return Err(Error::config("eval_nx and eval_nt must be at least 2"));
        }
        if self.n_interior == 0 || self.n_initial == 0 || self.n_boundary_per_side == 0 {
            return Err(Error::config("collocation counts must all be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::config(format!("delta must lie in (0, 0.5), got {}", self.delta)));
        }
        self.zo().validate()
    }

    pub fn zo(&self) -> ZoConfig {
        ZoConfig {
            mu: self.mu,
            k_samples: self.k_samples,
            estimator: self.estimator,
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            iterations: self.iterations,
            master_seed: self.master_seed,
            eval_every: self.eval_every,
            loss: LossSpec {
                delta: self.delta,
                n_interior: self.n_interior,
                n_initial: self.n_initial,
                n_boundary_per_side: self.n_boundary_per_side,
            },
            eval_nx: self.eval_nx,
            eval_nt: self.eval_nt,
        }
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec {
            sigma_read: self.sigma_read,
            sigma_fab: self.sigma_fab,
            seed: self.hw_seed,
        }
    }

    /// The simulated chip: measured curves when `lut_path` is set (used as
    /// measured, `sigma_fab` is not applied on top), synthesized otherwise.
    pub fn bank(&self) -> Result<WeightBank> {
        let read = |p: &PathBuf| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        let quant = QuantSpec::uniform(self.bits);
        match self.lut_path.as_slice() {
            [] => synth_weight_bank(self.sigma_fab, self.hw_seed)?
                .with_quant(quant)?
                .with_noise(self.noise()),
            [combined] => WeightBank::new(load_weight_curves_combined(&read(combined)?)?, quant, self.noise()),
            paths => {
                let curves = paths
                    .iter()
                    .map(|p| load_weight_curve(&read(p)?))
                    .collect::<Result<Vec<WeightCurve>>>()?;
                let curves: [WeightCurve; 4] = curves.try_into().expect("four paths checked in validate");
                WeightBank::new(curves, quant, self.noise())
            }
        }
    }

    /// Every key with its resolved value, in a form [`RunConfig::parse`] accepts.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let luts: Vec<String> = self.lut_path.iter().map(|p| p.display().to_string()).collect();
        let resume = self
            .resume
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default();
        let _ = writeln!(s, "bits = {}", self.bits);
        let _ = writeln!(s, "sigma_read = {}", self.sigma_read);
        let _ = writeln!(s, "sigma_fab = {}", self.sigma_fab);
        let _ = writeln!(s, "hw_seed = {}", self.hw_seed);
        let _ = writeln!(s, "lut_path = {}", luts.join(","));
        let _ = writeln!(s, "mu = {}", self.mu);
        let _ = writeln!(s, "k_samples = {}", self.k_samples);
        let _ = writeln!(s, "estimator = {}", self.estimator.name());
        let _ = writeln!(s, "lr = {}", self.lr);
        let _ = writeln!(s, "beta1 = {}", self.beta1);
        let _ = writeln!(s, "beta2 = {}", self.beta2);
        let _ = writeln!(s, "eps = {}", self.eps);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "master_seed = {}", self.master_seed);
        let _ = writeln!(s, "colloc_seed = {}", self.colloc_seed);
        let _ = writeln!(s, "init_seed = {}", self.init_seed);
        let _ = writeln!(s, "delta = {}", self.delta);
        let _ = writeln!(s, "n_interior = {}", self.n_interior);
        let _ = writeln!(s, "n_initial = {}", self.n_initial);
        let _ = writeln!(s, "n_boundary_per_side = {}", self.n_boundary_per_side);
        let _ = writeln!(s, "eval_nx = {}", self.eval_nx);
        let _ = writeln!(s, "eval_nt = {}", self.eval_nt);
        let _ = writeln!(s, "eval_every = {}", self.eval_every);
        let _ = writeln!(s, "eval_noisy = {}", self.eval_noisy);
        let _ = writeln!(s, "resume = {resume}");
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        s
    }
}
