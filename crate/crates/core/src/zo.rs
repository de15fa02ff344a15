//! Back-propagation-free training.
//!
//! Gradients are estimated from loss values alone, each loss being a batch of
//! forward passes through the simulated accelerator. The trainable
//! coordinates are the heater voltages themselves plus the digital biases, so
//! fabrication spread in the ring curves is absorbed by the optimizer instead
//! of calibrated away.

use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{evaluate_grid, SolutionGrid};
use crate::hardware::{NoiseSpec, WeightBank};
use crate::model::{init_params, make_evaluator, Checkpoint, NetworkTopology, ParameterVector};
use crate::pde::{physics_loss, sample_collocation, CollocationSet, HeatProblem, LossBreakdown};
use crate::rng::{derive_key, keyed_rng, NoiseStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// `(L(theta + mu u) - L(theta)) / mu * u`, `u ~ N(0, I)`; `K + 1` losses.
    GaussianForward,
    /// `(L(theta + mu d) - L(theta - mu d)) / (2 mu d_i)`, Rademacher `d`; `2K` losses.
    SpsaCentral,
}

impl Estimator {
    pub fn evaluations(self, k: usize) -> usize {
        match self {
            Estimator::GaussianForward => k + 1,
            Estimator::SpsaCentral => 2 * k,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Estimator::GaussianForward => "gaussian-forward",
            Estimator::SpsaCentral => "spsa-central",
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian-forward" => Ok(Estimator::GaussianForward),
            "spsa-central" => Ok(Estimator::SpsaCentral),
            other => Err(Error::config(format!(
                "unknown estimator {other:?} (expected gaussian-forward or spsa-central)"
            ))),
        }
    }
}

/// Training points and stencil step for the physics loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub delta: f64,
    pub n_interior: usize,
    pub n_initial: usize,
    pub n_boundary_per_side: usize,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self {
            delta: 0.05,
            n_interior: 100,
            n_initial: 25,
            n_boundary_per_side: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoConfig {
    /// Perturbation size in volts; biases use `mu / (v_max - v_min)`.
    pub mu: f64,
    pub k_samples: usize,
    pub estimator: Estimator,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub iterations: usize,
    pub master_seed: u64,
    pub eval_every: usize,
    pub loss: LossSpec,
    pub eval_nx: usize,
    pub eval_nt: usize,
}

impl Default for ZoConfig {
    fn default() -> Self {
        Self {
            mu: 0.002,
            k_samples: 16,
            estimator: Estimator::SpsaCentral,
            lr: 2e-3,
            beta1: 0.9,
            beta2: 0.99,
            eps: 1e-8,
            iterations: 5000,
            master_seed: 0,
            eval_every: 100,
            loss: LossSpec::default(),
            eval_nx: 101,
            eval_nt: 101,
        }
    }
}

impl ZoConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("mu", self.mu)?;
        positive("lr", self.lr)?;
        positive("eps", self.eps)?;
        positive("delta", self.loss.delta)?;
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("beta1 and beta2 must lie in [0, 1)"));
        }
        if self.k_samples == 0 || self.iterations == 0 || self.eval_every == 0 {
            return Err(Error::config("k_samples, iterations and eval_every must be at least 1"));
        }
        Ok(())
    }

    /// Voltage perturbation actually used on `bank`: `mu`, floored at two
    /// heater-DAC steps so a perturbation always moves the realized weight.
    pub fn effective_mu(&self, bank: &WeightBank) -> f64 {
        self.mu.max(2.0 * bank.voltage_lsb())
    }

    /// Per-coordinate perturbation sizes: voltages, then biases rescaled by
    /// the heater span.
    pub fn perturbation_steps(&self, params: &ParameterVector, bank: &WeightBank) -> Vec<f64> {
        let mu = self.effective_mu(bank);
        let n_v = params.n_voltages();
        (0..params.len())
            .map(|i| if i < n_v { mu } else { mu / bank.v_span() })
            .collect()
    }
}

/// A gradient estimate and the loss evaluations behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoEstimate {
    pub gradient: Vec<f64>,
    /// `L(theta)` when the estimator evaluates it (gaussian-forward only).
    pub base_loss: Option<f64>,
    pub evaluations: usize,
}

/// Direction `k` of iteration `iter`; depends only on `(seed, iter, k)`.
fn direction(estimator: Estimator, seed: u64, iter: u64, k: usize, dim: usize) -> Vec<f64> {
    let mut rng = keyed_rng(&[seed, iter, k as u64, 0xd1]);
    match estimator {
        Estimator::GaussianForward => (0..dim).map(|_| rng.sample(StandardNormal)).collect(),
        Estimator::SpsaCentral => (0..dim).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect(),
    }
}

/// Zeroth-order gradient of `loss_fn` at `theta`.
///
/// `loss_fn(point, slot)` receives a distinct `slot` for every evaluation in
/// the iteration (slot 0 is the unperturbed point for gaussian-forward). The
/// evaluations run on the current rayon pool; the estimate is the same for any
/// pool size.
pub fn zo_gradient<F>(loss_fn: F, theta: &[f64], steps: &[f64], cfg: &ZoConfig, iter: u64) -> Result<ZoEstimate>
where
    F: Fn(&[f64], usize) -> f64 + Sync,
{
    if steps.len() != theta.len() {
        return Err(Error::config("perturbation steps must match the parameter dimension"));
    }
    let dim = theta.len();
    let k = cfg.k_samples;
    let dirs: Vec<Vec<f64>> = (0..k)
        .map(|j| direction(cfg.estimator, cfg.master_seed, iter, j, dim))
        .collect();
    let shifted = |dir: &[f64], sign: f64| -> Vec<f64> {
        theta
            .iter()
            .zip(steps)
            .zip(dir)
            .map(|((t, s), d)| t + sign * s * d)
            .collect()
    };

    let points: Vec<Vec<f64>> = match cfg.estimator {
        Estimator::GaussianForward => std::iter::once(theta.to_vec())
            .chain(dirs.iter().map(|d| shifted(d, 1.0)))
            .collect(),
        Estimator::SpsaCentral => dirs.iter().flat_map(|d| [shifted(d, 1.0), shifted(d, -1.0)]).collect(),
    };
    let losses: Vec<f64> = points
        .par_iter()
        .enumerate()
        .map(|(slot, p)| loss_fn(p, slot))
        .collect();
    if let Some((slot, l)) = losses.iter().enumerate().find(|(_, l)| !l.is_finite()) {
        return Err(Error::Divergence {
            iter: iter as usize,
            detail: format!("loss evaluation {slot} returned {l}"),
        });
    }

    let mut gradient = vec![0.0; dim];
    let base_loss = match cfg.estimator {
        Estimator::GaussianForward => {
            let base = losses[0];
            for (dir, l) in dirs.iter().zip(&losses[1..]) {
                let diff = l - base;
                for ((g, d), s) in gradient.iter_mut().zip(dir).zip(steps) {
                    *g += diff * d / s;
                }
            }
            Some(base)
        }
        Estimator::SpsaCentral => {
            for (dir, pair) in dirs.iter().zip(losses.chunks_exact(2)) {
                let diff = pair[0] - pair[1];
                for ((g, d), s) in gradient.iter_mut().zip(dir).zip(steps) {
                    *g += diff / (2.0 * s * d);
                }
            }
            None
        }
    };
    for g in &mut gradient {
        *g /= k as f64;
    }
    Ok(ZoEstimate {
        gradient,
        base_loss,
        evaluations: losses.len(),
    })
}

/// Adam moment accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Steps taken so far.
    pub t: u64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }
}

/// One bias-corrected Adam step on `params`, then voltages are saturated to
/// `[v_min, v_max]`. Biases are left unbounded.
pub fn adam_step(
    params: &mut ParameterVector,
    grad: &[f64],
    cfg: &ZoConfig,
    state: &mut AdamState,
    voltage_bounds: (f64, f64),
) {
    state.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for (((p, &g), m), v) in params
        .as_mut_slice()
        .iter_mut()
        .zip(grad)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    params.clip_voltages(voltage_bounds.0, voltage_bounds.1);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// Loss of the parameters entering this iteration.
    pub loss: LossBreakdown,
    /// Errors of the parameters leaving this iteration, on evaluation
    /// iterations only.
    pub l2_rel: Option<f64>,
    pub l2_abs: Option<f64>,
    pub tile_ops_cum: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<IterationRecord>,
    pub params: ParameterVector,
    pub adam: AdamState,
}

impl TrainHistory {
    /// `iter,loss_total,l_r,l_0,l_b,l2_rel,l2_abs,tile_ops_cum`; l2 cells are
    /// blank on iterations without an evaluation.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("iter,loss_total,l_r,l_0,l_b,l2_rel,l2_abs,tile_ops_cum\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.iter,
                r.loss.total,
                r.loss.l_r,
                r.loss.l_0,
                r.loss.l_b,
                opt(r.l2_rel),
                opt(r.l2_abs),
                r.tile_ops_cum
            );
        }
        out
    }

    pub fn last_l2_rel(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.l2_rel)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            params: self.params.clone(),
            iteration: self.adam.t,
            moments: Some((self.adam.m.clone(), self.adam.v.clone())),
        }
    }
}

/// A run that stopped early; `history` holds every completed iteration.
#[derive(Debug)]
pub struct TrainError {
    pub error: Error,
    pub history: Box<TrainHistory>,
}

impl std::fmt::Display for TrainError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} iterations)", self.error, self.history.records.len())
    }
}

impl std::error::Error for TrainError {}

/// The bank used for held-out evaluation: same curves and converters, no read noise.
pub fn noise_free(bank: &WeightBank) -> WeightBank {
    bank.clone()
        .with_noise(NoiseSpec {
            sigma_read: 0.0,
            ..bank.noise
        })
        .expect("zero read noise is valid")
}

/// Evaluates `params` on the configured grid through `bank`.
pub fn solution_grid(params: &ParameterVector, bank: &WeightBank, nx: usize, nt: usize) -> Result<SolutionGrid> {
    let mut ev = make_evaluator(params, bank, NoiseStream::new(derive_key(&[bank.noise.seed, 0xe7a1])))?;
    evaluate_grid(&mut |x, t| ev.eval(x, t), nx, nt)
}

/// Everything a training run needs besides its configuration.
#[derive(Debug, Clone)]
pub struct TrainSetup {
    pub problem: HeatProblem,
    pub topology: NetworkTopology,
    pub colloc: CollocationSet,
    pub start: Checkpoint,
}

impl TrainSetup {
    pub fn new(bank: &WeightBank, cfg: &ZoConfig, colloc_seed: u64, init_seed: u64) -> Result<Self> {
        let topology = NetworkTopology::default();
        let colloc = sample_collocation(
            cfg.loss.n_interior,
            cfg.loss.n_initial,
            cfg.loss.n_boundary_per_side,
            colloc_seed,
            cfg.loss.delta,
        )?;
        let params = init_params(&topology, init_seed, bank);
        Ok(Self {
            problem: HeatProblem::default(),
            topology,
            colloc,
            start: Checkpoint::new(params),
        })
    }
}

/// Trains from scratch; see [`train_from`].
pub fn train(
    problem: &HeatProblem,
    bank: &WeightBank,
    cfg: &ZoConfig,
    colloc_seed: u64,
    init_seed: u64,
) -> Result<TrainHistory, TrainError> {
    let mut setup = TrainSetup::new(bank, cfg, colloc_seed, init_seed).map_err(|error| TrainError {
        error,
        history: Box::new(TrainHistory {
            records: Vec::new(),
            params: init_params(&NetworkTopology::default(), init_seed, bank),
            adam: AdamState::new(NetworkTopology::default().n_params()),
        }),
    })?;
    setup.problem = *problem;
    train_from(&setup, bank, cfg)
}

/// Runs iterations `start.iteration + 1 ..= cfg.iterations`.
///
/// Each iteration estimates the gradient of the physics loss on the fixed
/// collocation set and takes one Adam step. All randomness is keyed by
/// `(seeds, iteration, evaluation slot)`, so a resumed run continues exactly
/// where the checkpoint left off.
pub fn train_from(setup: &TrainSetup, bank: &WeightBank, cfg: &ZoConfig) -> Result<TrainHistory, TrainError> {
    let mut params = setup.start.params.clone();
    let mut adam = match &setup.start.moments {
        Some((m, v)) => AdamState {
            m: m.clone(),
            v: v.clone(),
            t: setup.start.iteration,
        },
        None => AdamState {
            t: setup.start.iteration,
            ..AdamState::new(params.len())
        },
    };
    let history = |records, params: &ParameterVector, adam: &AdamState| TrainHistory {
        records,
        params: params.clone(),
        adam: adam.clone(),
    };
    let mut records: Vec<IterationRecord> = Vec::with_capacity(cfg.iterations);
    if let Err(error) = cfg.validate() {
        return Err(TrainError {
            error,
            history: Box::new(history(records, &params, &adam)),
        });
    }

    let eval_bank = noise_free(bank);
    let (v_lo, v_hi) = (bank.v_min(), bank.v_max());
    let steps = cfg.perturbation_steps(&params, bank);
    let delta = cfg.loss.delta;
    let mut tile_ops_cum = 0u64;

    for iter in (setup.start.iteration as usize + 1)..=cfg.iterations {
        let it = iter as u64;
        let key_base = [bank.noise.seed, cfg.master_seed, it];
        let tile_ops = AtomicU64::new(0);
        let breakdown = |theta: &[f64], slot: usize| -> Result<LossBreakdown> {
            let mut p = ParameterVector::from_flat(setup.topology.clone(), theta.to_vec())?;
            p.clip_voltages(v_lo, v_hi);
            let stream = NoiseStream::new(derive_key(&[key_base[0], key_base[1], key_base[2], slot as u64]));
            let mut ev = make_evaluator(&p, bank, stream)?;
            let loss = physics_loss(&mut |x, t| ev.eval(x, t), &setup.colloc, delta)?;
            tile_ops.fetch_add(ev.tile_ops(), Ordering::Relaxed);
            Ok(loss)
        };
        let base = Mutex::new(None);
        let loss_fn = |theta: &[f64], slot: usize| match breakdown(theta, slot) {
            Ok(l) => {
                if slot == 0 && cfg.estimator == Estimator::GaussianForward {
                    *base.lock().unwrap() = Some(l);
                }
                l.total
            }
            Err(_) => f64::NAN,
        };

        let estimate = match zo_gradient(loss_fn, params.as_slice(), &steps, cfg, it) {
            Ok(e) => e,
            Err(error) => {
                return Err(TrainError {
                    error,
                    history: Box::new(history(records, &params, &adam)),
                })
            }
        };
        // spsa-central never evaluates the current point, so the record costs
        // one extra loss
        let recorded = match base.into_inner().unwrap() {
            Some(l) => Ok(l),
            None => breakdown(params.as_slice(), estimate.evaluations),
        };
        let loss = match recorded {
            Ok(l) if l.total.is_finite() => l,
            Ok(l) => {
                return Err(TrainError {
                    error: Error::Divergence {
                        iter,
                        detail: format!("loss {}", l.total),
                    },
                    history: Box::new(history(records, &params, &adam)),
                })
            }
            Err(error) => {
                return Err(TrainError {
                    error,
                    history: Box::new(history(records, &params, &adam)),
                })
            }
        };
        tile_ops_cum += tile_ops.load(Ordering::Relaxed);

        adam_step(&mut params, &estimate.gradient, cfg, &mut adam, (v_lo, v_hi));

        let (l2_rel, l2_abs) = if iter % cfg.eval_every == 0 || iter == cfg.iterations {
            match solution_grid(&params, &eval_bank, cfg.eval_nx, cfg.eval_nt) {
                Ok(g) => (Some(g.l2_rel), Some(g.l2_abs)),
                Err(error) => {
                    return Err(TrainError {
                        error,
                        history: Box::new(history(records, &params, &adam)),
                    })
                }
            }
        } else {
            (None, None)
        };
        records.push(IterationRecord {
            iter,
            loss,
            l2_rel,
            l2_abs,
            tile_ops_cum,
        });
    }
    Ok(history(records, &params, &adam))
}
