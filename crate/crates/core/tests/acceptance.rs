//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! `ACCEPTANCE_ONLY=3,4 cargo test --test acceptance` runs a subset.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use photonic_pinn::config::RunConfig;
use photonic_pinn::hardware::{banked_matvec, quantize_uniform, synth_weight_bank, Precision, WeightCurve};
use photonic_pinn::model::{forward, NetworkTopology, ParameterVector};
use photonic_pinn::pde::{fd_residual, physics_loss, sample_collocation};
use photonic_pinn::rng::NoiseStream;
use photonic_pinn::runner::{run_sweep, run_training, ERROR_CURVE, SOLUTION_GRID};
use photonic_pinn::zo::{zo_gradient, Estimator, ZoConfig};

struct Verdict {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Verdict);

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn exact(x: f64, t: f64) -> f64 {
    (-t).exp() * (PI * x).sin()
}

/// 1. Full-precision, noise-free default run: l2_rel <= 0.1 at iteration 1000
///    and <= 2e-2 after 5000 iterations, within two minutes.
fn convergence() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        iterations: 5000,
        output_dir: dir.path().to_path_buf(),
        ..RunConfig::default()
    };
    let start = Instant::now();
    let report = match run_training(&cfg, false) {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("training failed: {e}")),
    };
    let elapsed = start.elapsed();
    let at_1000 = report
        .history
        .records
        .iter()
        .find(|r| r.iter == 1000)
        .and_then(|r| r.l2_rel)
        .unwrap_or(f64::NAN);
    let final_l2 = report.grid.l2_rel;
    verdict(
        at_1000 <= 1e-1 && final_l2 <= 2e-2 && elapsed <= Duration::from_secs(120),
        format!(
            "l2_rel@1000={at_1000:.4} (<=0.1), final l2_rel={final_l2:.4} (<=0.02), {:.1}s (<=120s)",
            elapsed.as_secs_f64()
        ),
    )
}

/// 2. Medians over 5 seeds at 3000 iterations are non-increasing along
///    [8, 10, full], and median(8) >= 3 * median(full), within twenty minutes.
fn bit_precision_ordering() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        iterations: 3000,
        output_dir: dir.path().to_path_buf(),
        ..RunConfig::default()
    };
    let bits = [Precision::Bits(8), Precision::Bits(10), Precision::Full];
    let start = Instant::now();
    let summary = match run_sweep(&cfg, &bits, 5, false) {
        Ok(s) => s,
        Err(e) => return verdict(false, format!("sweep failed: {e}")),
    };
    let elapsed = start.elapsed();
    let m: Vec<f64> = bits.iter().map(|&b| summary.median_l2(b).unwrap_or(f64::NAN)).collect();
    let failed = summary.cells.iter().filter(|c| c.status != "ok").count();
    verdict(
        m[0] >= m[1] && m[1] >= m[2] && m[0] >= 3.0 * m[2] && failed == 0 && elapsed <= Duration::from_secs(1200),
        format!(
            "median l2_rel 8-bit={:.4}, 10-bit={:.4}, full={:.4}; ratio 8/full={:.1} (>=3); {failed} failed cells; {:.0}s (<=1200s)",
            m[0],
            m[1],
            m[2],
            m[0] / m[2],
            elapsed.as_secs_f64()
        ),
    )
}

/// 3. Gaussian-forward on a random linear objective in 57 dimensions.
fn zo_oracle() -> Verdict {
    let dim = 57;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let c: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.5..1.5)).collect();
    let c_norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let theta = vec![0.25; dim];
    let steps = vec![0.1; dim];
    let linear = |p: &[f64], _: usize| p.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
    let cfg = |k: usize, seed: u64| ZoConfig {
        estimator: Estimator::GaussianForward,
        k_samples: k,
        mu: 0.1,
        master_seed: seed,
        ..ZoConfig::default()
    };

    let g = zo_gradient(linear, &theta, &steps, &cfg(10_000, 1), 1)
        .unwrap()
        .gradient;
    let rel: Vec<f64> = g.iter().zip(&c).map(|(gi, ci)| (gi - ci).abs() / ci.abs()).collect();
    let max_rel = rel.iter().cloned().fold(0.0, f64::max);
    let within = rel.iter().filter(|&&r| r <= 0.05).count();
    let norm_rel = g.iter().zip(&c).map(|(gi, ci)| (gi - ci).powi(2)).sum::<f64>().sqrt() / c_norm;

    // mean relative error norm over repeats at each K, then a log-log fit
    let ks = [100usize, 1_000, 10_000];
    let repeats = 20u64;
    let errs: Vec<f64> = ks
        .iter()
        .map(|&k| {
            (0..repeats)
                .map(|r| {
                    let g = zo_gradient(linear, &theta, &steps, &cfg(k, 100 + r), r)
                        .unwrap()
                        .gradient;
                    g.iter().zip(&c).map(|(gi, ci)| (gi - ci).powi(2)).sum::<f64>().sqrt() / c_norm
                })
                .sum::<f64>()
                / repeats as f64
        })
        .collect();
    let xs: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();

    verdict(
        max_rel <= 0.05 && (-0.6..=-0.4).contains(&slope),
        format!(
            "K=1e4: max componentwise rel err={max_rel:.4} (<=0.05), {within}/{dim} components within 5%, \
             ||g-c||/||c||={norm_rel:.4}; log-log slope={slope:.3} (in [-0.6,-0.4])"
        ),
    )
}

/// 4. Residual of the exact solution shrinks 3.5x..4.5x per halving of delta.
fn fd_order() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let points: Vec<(f64, f64)> = (0..20)
        .map(|_| (rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)))
        .collect();
    let mut deltas = vec![1e-2];
    while deltas[deltas.len() - 1] / 2.0 >= 1e-4 {
        let d = deltas[deltas.len() - 1] / 2.0;
        deltas.push(d);
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &p in &points {
        for pair in deltas.windows(2) {
            let coarse = fd_residual(&mut exact, p, pair[0]).unwrap().abs();
            let fine = fd_residual(&mut exact, p, pair[1]).unwrap().abs();
            let ratio = coarse / fine;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    verdict(
        lo >= 3.5 && hi <= 4.5,
        format!(
            "20 points x {} halvings from {:e} to {:e}: ratio range [{lo:.3}, {hi:.3}] (within [3.5, 4.5])",
            deltas.len() - 1,
            deltas[0],
            deltas[deltas.len() - 1]
        ),
    )
}

/// Straight signed-weight MLP: `s = 2 w(v) - 1`, `tanh` hidden layers.
fn reference_mlp(params: &ParameterVector, curves: &[WeightCurve], x: f64, t: f64) -> f64 {
    fn interp(curve: &WeightCurve, v: f64) -> f64 {
        let s = curve.samples();
        for pair in s.windows(2) {
            let ((v0, w0), (v1, w1)) = (pair[0], pair[1]);
            if v <= v1 {
                return w0 + (w1 - w0) * (v - v0) / (v1 - v0);
            }
        }
        s[s.len() - 1].1
    }
    let widths = params.topology().widths().to_vec();
    let (volts, biases) = (params.voltages(), params.biases());
    let mut a = vec![2.0 * x - 1.0, 2.0 * t - 1.0];
    let (mut wo, mut bo) = (0, 0);
    for l in 0..widths.len() - 1 {
        let (n_in, n_out) = (widths[l], widths[l + 1]);
        let mut next = vec![0.0; n_out];
        for (o, z) in next.iter_mut().enumerate() {
            *z = biases[bo + o];
            for (i, ai) in a.iter().enumerate() {
                let w = interp(&curves[i % 4], volts[wo + i * n_out + o]);
                *z += (2.0 * w - 1.0) * ai;
            }
        }
        wo += n_in * n_out;
        bo += n_out;
        a = if l + 2 == widths.len() {
            next
        } else {
            next.iter().map(|z| z.tanh()).collect()
        };
    }
    a[0]
}

/// 5. Ideal hardware equals the reference MLP; 8-bit quantizer error stays
///    within half an LSB.
fn hardware_equivalence() -> Verdict {
    let bank = synth_weight_bank(0.0, 5).unwrap();
    let topo = NetworkTopology::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut max_diff = 0.0f64;
    for _ in 0..1000 {
        let mut values: Vec<f64> = (0..topo.n_weights())
            .map(|_| rng.gen_range(bank.v_min()..=bank.v_max()))
            .collect();
        values.extend((0..topo.n_biases()).map(|_| rng.gen_range(-1.0..1.0)));
        let params = ParameterVector::from_flat(topo.clone(), values).unwrap();
        let (x, t) = (rng.gen::<f64>(), rng.gen::<f64>());
        let mut stream = NoiseStream::new(0);
        let (u, _) = forward(&params, x, t, &bank, &mut stream).unwrap();
        max_diff = max_diff.max((u - reference_mlp(&params, bank.curves(), x, t)).abs());
    }

    let lsb = 1.0 / 255.0;
    let mut max_q = 0.0f64;
    for _ in 0..1_000_000 {
        let v = rng.gen::<f64>();
        let q = quantize_uniform(v, Precision::Bits(8), 0.0, 1.0).unwrap();
        max_q = max_q.max((q - v).abs());
    }
    verdict(
        max_diff <= 1e-12 && max_q <= 0.5 * lsb,
        format!(
            "max |forward - reference| = {max_diff:.2e} (<=1e-12); 8-bit max error = {:.6} LSB (<=0.5)",
            max_q / lsb
        ),
    )
}

/// 6. 26 tiles per forward; `m * ceil(n/4)` tiles per matvec.
fn cycle_accounting() -> Verdict {
    let bank = synth_weight_bank(0.0, 0).unwrap();
    let topo = NetworkTopology::default();
    let mut values = vec![1.0; topo.n_weights()];
    values.extend(vec![0.0; topo.n_biases()]);
    let params = ParameterVector::from_flat(topo, values).unwrap();
    let (_, per_forward) = forward(&params, 0.4, 0.6, &bank, &mut NoiseStream::new(0)).unwrap();
    let mut mismatches = 0;
    for m in 1..=8 {
        for n in 1..=8 {
            let (_, ops) = banked_matvec(&vec![1.0; m * n], &vec![0.5; n], &bank, &mut NoiseStream::new(0)).unwrap();
            if ops as usize != m * n.div_ceil(4) {
                mismatches += 1;
            }
        }
    }
    verdict(
        per_forward == 26 && mismatches == 0,
        format!("tile ops per forward = {per_forward} (26); {mismatches}/64 matvec shapes off"),
    )
}

/// 7. Two runs of one config give byte-identical CSVs at 1 and 4 threads.
fn determinism() -> Verdict {
    let run = |threads: usize| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            iterations: 60,
            eval_every: 20,
            bits: Precision::Bits(10),
            sigma_read: 0.01,
            sigma_fab: 0.05,
            hw_seed: 3,
            threads,
            output_dir: dir.path().to_path_buf(),
            ..RunConfig::default()
        };
        run_training(&cfg, false).unwrap();
        let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
        (read(ERROR_CURVE), read(SOLUTION_GRID))
    };
    let a = run(1);
    let b = run(1);
    let c = run(4);
    verdict(
        a == b && a == c,
        format!(
            "repeat identical: {}, 1 vs 4 threads identical: {} ({} + {} bytes)",
            a == b,
            a == c,
            a.0.len(),
            a.1.len()
        ),
    )
}

/// 8. Loss fixtures at delta = 1e-3.
fn loss_sanity() -> Verdict {
    let colloc = sample_collocation(100, 25, 25, 8, 1e-3).unwrap();
    let exact_loss = physics_loss(&mut exact, &colloc, 1e-3).unwrap();
    let zero = physics_loss(&mut |_, _| 0.0, &colloc, 1e-3).unwrap();
    let one = physics_loss(&mut |_, _| 1.0, &colloc, 1e-3).unwrap();
    verdict(
        exact_loss.total <= 1e-9 && zero.l_r == 0.0 && zero.l_b == 0.0 && one.l_b == 1.0,
        format!(
            "exact total={:.2e} (<=1e-9); zero model l_r={}, l_b={}; constant-1 l_b={}",
            exact_loss.total, zero.l_r, zero.l_b, one.l_b
        ),
    )
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [Criterion; 8] = [
        ("convergence", convergence),
        ("bit-precision ordering", bit_precision_ordering),
        ("ZO estimator oracle", zo_oracle),
        ("finite-difference order", fd_order),
        ("hardware equivalence", hardware_equivalence),
        ("cycle accounting", cycle_accounting),
        ("determinism", determinism),
        ("loss sanity", loss_sanity),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        if !v.pass {
            failures += 1;
        }
        println!(
            "[{}] criterion {id} {name}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
