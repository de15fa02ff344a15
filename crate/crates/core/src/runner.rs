//! Experiment driver behind the command-line interface.
//!
//! Output files of one run, all under `output_dir`:
//!
//! * `error_curve.csv`: `iter,loss_total,l_r,l_0,l_b,l2_rel,l2_abs,tile_ops_cum`
//! * `solution_grid.csv`: `x,t,u_pred,u_true` on the evaluation grid
//! * `checkpoint.csv`: parameters, Adam moments and iteration counter
//! * `resolved_config.txt`: every config key with the value actually used

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::SolutionGrid;
use crate::hardware::{Precision, WeightBank};
use crate::model::{Checkpoint, NetworkTopology};
use crate::zo::{noise_free, solution_grid, train_from, TrainHistory, TrainSetup};

pub const ERROR_CURVE: &str = "error_curve.csv";
pub const SOLUTION_GRID: &str = "solution_grid.csv";
pub const CHECKPOINT: &str = "checkpoint.csv";
pub const RESOLVED_CONFIG: &str = "resolved_config.txt";
pub const EVAL_GRID: &str = "eval_grid.csv";
pub const SWEEP_SUMMARY: &str = "sweep_summary.csv";

/// Outcome of one training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub history: TrainHistory,
    pub grid: SolutionGrid,
    pub output_dir: PathBuf,
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn prepare_dir(dir: &Path, files: &[&str], force: bool) -> Result<()> {
    if !force {
        if let Some(existing) = files.iter().map(|f| dir.join(f)).find(|p| p.exists()) {
            return Err(Error::config(format!(
                "{} already exists; pass --force to overwrite",
                existing.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn with_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(job))
}

fn evaluation_bank(cfg: &RunConfig, bank: &WeightBank) -> WeightBank {
    if cfg.eval_noisy {
        bank.clone()
    } else {
        noise_free(bank)
    }
}

/// Trains with `cfg` and writes the run's output files. A diverged run still
/// writes everything it has and then returns the divergence error.
pub fn run_training(cfg: &RunConfig, force: bool) -> Result<TrainReport> {
    let bank = cfg.bank()?;
    let zo = cfg.zo();
    let mut setup = TrainSetup::new(&bank, &zo, cfg.colloc_seed, cfg.init_seed)?;
    if let Some(path) = &cfg.resume {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        setup.start = Checkpoint::from_csv(&text, &setup.topology)?;
    }
    let dir = &cfg.output_dir;
    prepare_dir(dir, &[ERROR_CURVE, SOLUTION_GRID, CHECKPOINT, RESOLVED_CONFIG], force)?;
    write(&dir.join(RESOLVED_CONFIG), &cfg.to_text())?;

    let outcome = with_pool(cfg.threads, || train_from(&setup, &bank, &zo))?;
    let (history, failure) = match outcome {
        Ok(h) => (h, None),
        Err(e) => (*e.history, Some(e.error)),
    };
    write(&dir.join(ERROR_CURVE), &history.to_csv())?;
    write(&dir.join(CHECKPOINT), &history.checkpoint().to_csv())?;
    let grid = solution_grid(&history.params, &evaluation_bank(cfg, &bank), cfg.eval_nx, cfg.eval_nt)?;
    write(&dir.join(SOLUTION_GRID), &grid.to_csv())?;
    match failure {
        Some(e) => Err(e),
        None => Ok(TrainReport {
            history,
            grid,
            output_dir: dir.clone(),
        }),
    }
}

/// `train <config>`.
pub fn cmd_train(config_path: &Path, force: bool) -> Result<TrainReport> {
    let cfg = RunConfig::load(config_path)?;
    run_training(&cfg, force)
}

/// `eval <checkpoint> <config>`: writes `eval_grid.csv` into the configured
/// output directory.
pub fn cmd_eval(checkpoint_path: &Path, config_path: &Path, force: bool) -> Result<SolutionGrid> {
    let cfg = RunConfig::load(config_path)?;
    let bank = cfg.bank()?;
    let text = fs::read_to_string(checkpoint_path).map_err(|e| Error::io(checkpoint_path, e))?;
    let ck = Checkpoint::from_csv(&text, &NetworkTopology::default())?;
    let mut params = ck.params;
    params.clip_voltages(bank.v_min(), bank.v_max());
    let grid = solution_grid(&params, &evaluation_bank(&cfg, &bank), cfg.eval_nx, cfg.eval_nt)?;
    prepare_dir(&cfg.output_dir, &[EVAL_GRID], force)?;
    write(&cfg.output_dir.join(EVAL_GRID), &grid.to_csv())?;
    Ok(grid)
}

/// Parses `8,10,full`.
pub fn parse_bits_list(text: &str) -> Result<Vec<Precision>> {
    let list = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<Vec<Precision>>>()?;
    if list.is_empty() {
        return Err(Error::config("the bit list is empty"));
    }
    Ok(list)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub bits: Precision,
    pub seed: u64,
    pub final_l2_rel: Option<f64>,
    pub final_loss: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub cells: Vec<SweepCell>,
    /// Per bit setting, medians over the cells that finished.
    pub medians: Vec<(Precision, Option<f64>, Option<f64>)>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

impl SweepSummary {
    pub fn median_l2(&self, bits: Precision) -> Option<f64> {
        self.medians.iter().find(|m| m.0 == bits).and_then(|m| m.1)
    }

    /// `bits,seed,final_l2_rel,final_loss,status`; per-bits median rows use
    /// `median` in the seed column.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("bits,seed,final_l2_rel,final_loss,status\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                c.bits,
                c.seed,
                opt(c.final_l2_rel),
                opt(c.final_loss),
                c.status
            );
        }
        for (bits, l2, loss) in &self.medians {
            let _ = writeln!(out, "{bits},median,{},{},ok", opt(*l2), opt(*loss));
        }
        out
    }
}

/// Trains every `(bits, seed)` cell, seed `i` offsetting the master,
/// collocation and initialization seeds of `base` by `i`. The chip
/// (`hw_seed`) is shared. Cells run concurrently and write into
/// `output_dir/bits-<b>/seed-<i>/`; the summary is written last.
pub fn run_sweep(base: &RunConfig, bits_list: &[Precision], n_seeds: usize, force: bool) -> Result<SweepSummary> {
    if bits_list.is_empty() || n_seeds == 0 {
        return Err(Error::config("a sweep needs at least one bit setting and one seed"));
    }
    for &b in bits_list {
        if let Precision::Bits(n) = b {
            Precision::bits(n)?;
        }
    }
    let dir = &base.output_dir;
    prepare_dir(dir, &[SWEEP_SUMMARY], force)?;

    let jobs: Vec<(Precision, u64)> = bits_list
        .iter()
        .flat_map(|&b| (0..n_seeds as u64).map(move |s| (b, s)))
        .collect();
    let cells: Vec<SweepCell> = with_pool(base.threads, || {
        jobs.par_iter()
            .map(|&(bits, seed)| {
                let cfg = RunConfig {
                    bits,
                    master_seed: base.master_seed + seed,
                    colloc_seed: base.colloc_seed + seed,
                    init_seed: base.init_seed + seed,
                    output_dir: dir.join(format!("bits-{bits}")).join(format!("seed-{seed}")),
                    ..base.clone()
                };
                match run_training(&cfg, force) {
                    Ok(r) => SweepCell {
                        bits,
                        seed,
                        final_l2_rel: Some(r.grid.l2_rel),
                        final_loss: r.history.records.last().map(|l| l.loss.total),
                        status: "ok".into(),
                    },
                    Err(e) => SweepCell {
                        bits,
                        seed,
                        final_l2_rel: None,
                        final_loss: None,
                        status: match e {
                            Error::Divergence { .. } => "diverged".into(),
                            _ => "failed".into(),
                        },
                    },
                }
            })
            .collect()
    })?;

    let medians = bits_list
        .iter()
        .map(|&b| {
            let ok: Vec<&SweepCell> = cells.iter().filter(|c| c.bits == b && c.status == "ok").collect();
            let l2: Vec<f64> = ok.iter().filter_map(|c| c.final_l2_rel).collect();
            let loss: Vec<f64> = ok.iter().filter_map(|c| c.final_loss).collect();
            (b, median(&l2), median(&loss))
        })
        .collect();
    let summary = SweepSummary { cells, medians };
    write(&dir.join(SWEEP_SUMMARY), &summary.to_csv())?;
    Ok(summary)
}

/// `sweep-bits <config> --bits ... [--seeds N]`.
pub fn cmd_sweep_bits(config_path: &Path, bits: &str, n_seeds: usize, force: bool) -> Result<SweepSummary> {
    let bits_list = parse_bits_list(bits)?;
    let cfg = RunConfig::load(config_path)?;
    run_sweep(&cfg, &bits_list, n_seeds, force)
}
