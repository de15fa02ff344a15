//! The 1D heat-equation benchmark: `u_t = u_xx / pi^2` on the unit square with
//! `u(x, 0) = sin(pi x)` and homogeneous Dirichlet boundaries.
//!
//! Derivatives of a model are never taken analytically. The residual is built
//! from five forward evaluations of a central-difference stencil, so the same
//! loss can be computed through any black-box evaluator, including the
//! simulated accelerator.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::keyed_rng;

/// Step used for residual stencils when the model runs on simulated hardware.
pub const DEFAULT_HW_DELTA: f64 = 1e-2;
/// Step used for pure-math checks.
pub const DEFAULT_MATH_DELTA: f64 = 1e-3;

/// The benchmark problem. All state is fixed; the type exists so callers can
/// name the problem they are training against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatProblem {
    pub x_range: (f64, f64),
    pub t_range: (f64, f64),
}

impl Default for HeatProblem {
    fn default() -> Self {
        Self {
            x_range: (0.0, 1.0),
            t_range: (0.0, 1.0),
        }
    }
}

impl HeatProblem {
    pub fn diffusivity(&self) -> f64 {
        1.0 / (PI * PI)
    }

    pub fn initial_condition(&self, x: f64) -> f64 {
        (PI * x).sin()
    }

    /// `e^{-t} sin(pi x)` without a domain check.
    #[inline]
    pub fn exact(&self, x: f64, t: f64) -> f64 {
        (-t).exp() * (PI * x).sin()
    }

    pub fn contains(&self, x: f64, t: f64) -> bool {
        (self.x_range.0..=self.x_range.1).contains(&x) && (self.t_range.0..=self.t_range.1).contains(&t)
    }

    pub fn analytic_solution(&self, x: f64, t: f64) -> Result<f64> {
        if !self.contains(x, t) {
            return Err(Error::Domain { x, t });
        }
        // pin the boundary values; sin(pi) is ~1.2e-16 in floating point
        if x == self.x_range.0 || x == self.x_range.1 {
            return Ok(0.0);
        }
        Ok(self.exact(x, t))
    }
}

/// Closed-form solution of the benchmark, `e^{-t} sin(pi x)`.
pub fn analytic_solution(x: f64, t: f64) -> Result<f64> {
    HeatProblem::default().analytic_solution(x, t)
}

/// Training points for the three loss terms.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    /// Interior points, at distance `margin` or more from every edge.
    pub interior: Vec<(f64, f64)>,
    /// Points on `t = 0`.
    pub initial: Vec<(f64, f64)>,
    /// Points on `x = 0` followed by points on `x = 1`.
    pub boundary: Vec<(f64, f64)>,
    pub seed: u64,
    pub margin: f64,
}

/// Draws uniform i.i.d. points in each subdomain. Interior points keep a
/// `margin` (normally the stencil step) from all four edges so every stencil
/// stays inside the unit square.
pub fn sample_collocation(
    n_interior: usize,
    n_initial: usize,
    n_boundary_per_side: usize,
    seed: u64,
    margin: f64,
) -> Result<CollocationSet> {
    if n_interior == 0 || n_initial == 0 || n_boundary_per_side == 0 {
        return Err(Error::config("collocation counts must all be at least 1"));
    }
    if !(0.0..0.5).contains(&margin) {
        return Err(Error::config(format!(
            "collocation margin {margin} must lie in [0, 0.5)"
        )));
    }

    let mut rng = keyed_rng(&[seed, 0x1]);
    let span = 1.0 - 2.0 * margin;
    let interior = (0..n_interior)
        .map(|_| {
            let x = margin + span * rng.gen::<f64>();
            let t = margin + span * rng.gen::<f64>();
            (x, t)
        })
        .collect();

    let mut rng = keyed_rng(&[seed, 0x2]);
    let initial = (0..n_initial).map(|_| (rng.gen::<f64>(), 0.0)).collect();

    let mut rng = keyed_rng(&[seed, 0x3]);
    let mut boundary = Vec::with_capacity(2 * n_boundary_per_side);
    for side in [0.0, 1.0] {
        for _ in 0..n_boundary_per_side {
            boundary.push((side, rng.gen::<f64>()));
        }
    }

    Ok(CollocationSet {
        interior,
        initial,
        boundary,
        seed,
        margin,
    })
}

/// PDE residual `u_t - u_xx / pi^2` of `model` at `point`, from a five-point
/// central-difference stencil.
pub fn fd_residual<F>(model: &mut F, point: (f64, f64), delta: f64) -> Result<f64>
where
    F: FnMut(f64, f64) -> f64,
{
    if !(delta > 0.0) {
        return Err(Error::config(format!("stencil step must be positive, got {delta}")));
    }
    Ok(stencil_residual(model, point, delta))
}

#[inline]
fn stencil_residual<F>(model: &mut F, (x, t): (f64, f64), delta: f64) -> f64
where
    F: FnMut(f64, f64) -> f64,
{
    let t_plus = model(x, t + delta);
    let t_minus = model(x, t - delta);
    let x_plus = model(x + delta, t);
    let center = model(x, t);
    let x_minus = model(x - delta, t);
    let u_t = (t_plus - t_minus) / (2.0 * delta);
    let u_xx = (x_plus - 2.0 * center + x_minus) / (delta * delta);
    u_t - u_xx / (PI * PI)
}

/// Physics-informed loss and its three unweighted terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub l_r: f64,
    pub l_0: f64,
    pub l_b: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(l_r: f64, l_0: f64, l_b: f64) -> Self {
        Self {
            l_r,
            l_0,
            l_b,
            total: l_r + l_0 + l_b,
        }
    }
}

/// Number of evaluator calls one [`physics_loss`] makes on `colloc`.
pub fn loss_call_count(colloc: &CollocationSet) -> usize {
    5 * colloc.interior.len() + colloc.initial.len() + colloc.boundary.len()
}

/// Mean-squared PDE residual, initial-condition and boundary-condition errors.
pub fn physics_loss<F>(model: &mut F, colloc: &CollocationSet, delta: f64) -> Result<LossBreakdown>
where
    F: FnMut(f64, f64) -> f64,
{
    if colloc.interior.is_empty() || colloc.initial.is_empty() || colloc.boundary.is_empty() {
        return Err(Error::config("collocation subsets must be non-empty"));
    }
    if !(delta > 0.0) {
        return Err(Error::config(format!("stencil step must be positive, got {delta}")));
    }
    let problem = HeatProblem::default();

    let l_r = mean(
        colloc
            .interior
            .iter()
            .map(|&p| stencil_residual(model, p, delta).powi(2)),
    );
    let l_0 = mean(
        colloc
            .initial
            .iter()
            .map(|&(x, t)| (model(x, t) - problem.initial_condition(x)).powi(2)),
    );
    let l_b = mean(colloc.boundary.iter().map(|&(x, t)| model(x, t).powi(2)));
    Ok(LossBreakdown::new(l_r, l_0, l_b))
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    values.sum::<f64>() / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact(x: f64, t: f64) -> f64 {
        (-t).exp() * (PI * x).sin()
    }

    #[test]
    fn analytic_values() {
        assert_eq!(analytic_solution(0.5, 0.0).unwrap(), 1.0);
        assert_eq!(analytic_solution(0.0, 0.7).unwrap(), 0.0);
        assert_eq!(analytic_solution(1.0, 0.3).unwrap(), 0.0);
        let v = analytic_solution(0.5, 1.0).unwrap();
        assert!((v - 0.367_879_441_171_442_33).abs() < 1e-15);
        assert!(matches!(analytic_solution(1.2, 0.0), Err(Error::Domain { .. })));
        assert!(matches!(analytic_solution(0.5, -0.1), Err(Error::Domain { .. })));
    }

    #[test]
    fn analytic_satisfies_pde_symbolically() {
        // u_t = -u, u_xx = -pi^2 u
        for &(x, t) in &[(0.1, 0.2), (0.5, 0.5), (0.9, 0.95)] {
            let u = exact(x, t);
            let u_t = -u;
            let u_xx = -PI * PI * u;
            assert!((u_t - u_xx / (PI * PI)).abs() < 1e-15);
        }
    }

    #[test]
    fn diffusivity_is_inverse_pi_squared() {
        let p = HeatProblem::default();
        assert_eq!(p.diffusivity() * PI * PI, 1.0);
    }

    #[test]
    fn collocation_sizes_membership_and_determinism() {
        let set = sample_collocation(100, 25, 25, 7, 1e-2).unwrap();
        assert_eq!(set.interior.len(), 100);
        assert_eq!(set.initial.len(), 25);
        assert_eq!(set.boundary.len(), 50);
        for &(x, t) in &set.interior {
            assert!((1e-2..=1.0 - 1e-2).contains(&x) && (1e-2..=1.0 - 1e-2).contains(&t));
        }
        assert!(set.initial.iter().all(|&(x, t)| t == 0.0 && (0.0..=1.0).contains(&x)));
        assert!(set.boundary[..25].iter().all(|&(x, _)| x == 0.0));
        assert!(set.boundary[25..].iter().all(|&(x, _)| x == 1.0));
        assert!(set.boundary.iter().all(|&(_, t)| (0.0..=1.0).contains(&t)));

        let again = sample_collocation(100, 25, 25, 7, 1e-2).unwrap();
        assert_eq!(set, again);
        let other = sample_collocation(100, 25, 25, 8, 1e-2).unwrap();
        assert_ne!(set.interior, other.interior);
    }

    #[test]
    fn collocation_minimal_and_invalid() {
        let set = sample_collocation(1, 1, 1, 0, 0.0).unwrap();
        assert_eq!((set.interior.len(), set.initial.len(), set.boundary.len()), (1, 1, 2));
        assert!(matches!(sample_collocation(0, 1, 1, 0, 0.0), Err(Error::Config(_))));
        assert!(matches!(sample_collocation(1, 0, 1, 0, 0.0), Err(Error::Config(_))));
        assert!(matches!(sample_collocation(1, 1, 0, 0, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn residual_fixtures() {
        let r = fd_residual(&mut exact, (0.5, 0.5), 1e-3).unwrap();
        assert!(r.abs() <= 1e-5, "{r}");
        assert_eq!(fd_residual(&mut |_, _| 0.0, (0.3, 0.4), 1e-2).unwrap(), 0.0);
        let r = fd_residual(&mut |_, t| t, (0.3, 0.4), 1e-2).unwrap();
        assert!((r - 1.0).abs() < 1e-12, "{r}");
        assert!(matches!(
            fd_residual(&mut exact, (0.5, 0.5), 0.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            fd_residual(&mut exact, (0.5, 0.5), -1e-3),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn residual_uses_five_calls() {
        let mut calls = 0;
        let mut f = |x: f64, t: f64| {
            calls += 1;
            x * t
        };
        fd_residual(&mut f, (0.5, 0.5), 1e-2).unwrap();
        assert_eq!(calls, 5);
    }

    #[test]
    fn loss_fixtures() {
        let set = sample_collocation(100, 25, 25, 3, 1e-3).unwrap();
        let l = physics_loss(&mut exact, &set, 1e-3).unwrap();
        assert!(l.total <= 1e-9, "{l:?}");
        assert!(l.l_b < 1e-30);

        let l = physics_loss(&mut |_, _| 0.0, &set, 1e-3).unwrap();
        assert_eq!(l.l_r, 0.0);
        assert_eq!(l.l_b, 0.0);
        let direct: f64 =
            set.initial.iter().map(|&(x, _)| (PI * x).sin().powi(2)).sum::<f64>() / set.initial.len() as f64;
        assert!((l.l_0 - direct).abs() < 1e-15);

        let l = physics_loss(&mut |_, _| 1.0, &set, 1e-3).unwrap();
        assert_eq!(l.l_b, 1.0);
        assert_eq!(l.total, l.l_r + l.l_0 + l.l_b);
    }

    #[test]
    fn loss_call_budget() {
        let set = sample_collocation(13, 7, 5, 1, 1e-2).unwrap();
        let mut calls = 0usize;
        let mut f = |_: f64, _: f64| {
            calls += 1;
            0.25
        };
        physics_loss(&mut f, &set, 1e-2).unwrap();
        assert_eq!(calls, loss_call_count(&set));
        assert_eq!(calls, 5 * 13 + 7 + 10);
    }

    #[test]
    fn loss_rejects_empty_subsets() {
        let mut set = sample_collocation(1, 1, 1, 0, 0.0).unwrap();
        set.boundary.clear();
        assert!(matches!(physics_loss(&mut exact, &set, 1e-3), Err(Error::Config(_))));
    }
}
