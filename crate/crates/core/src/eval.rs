//! Predicted vs. exact solution on a uniform grid, with l2 summaries.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::pde::HeatProblem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub x: f64,
    pub t: f64,
    pub u_pred: f64,
    pub u_true: f64,
}

/// `nx x nt` endpoint-inclusive tensor grid over the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionGrid {
    pub nx: usize,
    pub nt: usize,
    pub rows: Vec<GridPoint>,
    pub l2_rel: f64,
    pub l2_abs: f64,
}

/// Grid coordinate `i` of `n` evenly spaced points on `[0, 1]`.
fn node(i: usize, n: usize) -> f64 {
    if n == 1 {
        0.0
    } else if i + 1 == n {
        1.0
    } else {
        i as f64 / (n - 1) as f64
    }
}

/// Evaluates `model` on the grid, `x` outer and `t` inner.
pub fn evaluate_grid<F>(model: &mut F, nx: usize, nt: usize) -> Result<SolutionGrid>
where
    F: FnMut(f64, f64) -> f64,
{
    if nx < 2 || nt < 2 {
        return Err(Error::config(format!(
            "evaluation grid must be at least 2x2, got {nx}x{nt}"
        )));
    }
    let problem = HeatProblem::default();
    let mut rows = Vec::with_capacity(nx * nt);
    for i in 0..nx {
        let x = node(i, nx);
        for j in 0..nt {
            let t = node(j, nt);
            rows.push(GridPoint {
                x,
                t,
                u_pred: model(x, t),
                u_true: problem.analytic_solution(x, t)?,
            });
        }
    }
    let (l2_rel, l2_abs) = l2_errors(&rows);
    Ok(SolutionGrid {
        nx,
        nt,
        rows,
        l2_rel,
        l2_abs,
    })
}

/// `(||pred - true|| / ||true||, ||pred - true|| / sqrt(n))`.
pub fn l2_errors(rows: &[GridPoint]) -> (f64, f64) {
    let (err2, ref2) = rows.iter().fold((0.0, 0.0), |(e, r), p| {
        (e + (p.u_pred - p.u_true).powi(2), r + p.u_true.powi(2))
    });
    (err2.sqrt() / ref2.sqrt(), (err2 / rows.len() as f64).sqrt())
}

impl SolutionGrid {
    /// `x,t,u_pred,u_true` with shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * 48);
        out.push_str("x,t,u_pred,u_true\n");
        for p in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", p.x, p.t, p.u_pred, p.u_true);
        }
        out
    }
}
