//! Convex QP solver used both for the Euclidean projection and for the exact
//! (slightly regularized) linear-cost dispatch.
//!
//! Problems have the form
//!
//! ```text
//! min ½ xᵀ diag(q) x + linᵀ x   s.t.  A x = b,  G x + s = h,  s >= 0
//! ```
//!
//! and are solved by a Mehrotra predictor-corrector primal-dual interior-point
//! method with a dense reduced KKT factorization.

mod ipm;
mod kkt;

pub use ipm::{solve_on_active_set, InteriorPointSolver, SolverOptions};
pub use kkt::{check_kkt, KktReport};

use serde::{Deserialize, Serialize};

use crate::formulation::QpData;

/// Regularization of the linear dispatch objective.
pub const LP_REGULARIZATION: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct ConvexProgram<'a> {
    pub q_diag: Vec<f64>,
    pub lin: Vec<f64>,
    /// Constant added to the objective (`½‖z‖²` for projections).
    pub constant: f64,
    pub qp: &'a QpData,
}

impl<'a> ConvexProgram<'a> {
    /// `argmin_{x in F} ½‖x - z‖²`
    pub fn projection(qp: &'a QpData, z: &[f64]) -> Self {
        assert_eq!(z.len(), qp.n(), "projection target has wrong length");
        ConvexProgram {
            q_diag: vec![1.0; qp.n()],
            lin: z.iter().map(|v| -v).collect(),
            constant: 0.5 * z.iter().map(|v| v * v).sum::<f64>(),
            qp,
        }
    }

    /// `min costᵀx + ½ eps ‖x‖²` over `F`.
    pub fn dispatch(qp: &'a QpData, cost: &[f64], eps: f64) -> Self {
        assert_eq!(cost.len(), qp.n(), "cost vector has wrong length");
        ConvexProgram {
            q_diag: vec![eps; qp.n()],
            lin: cost.to_vec(),
            constant: 0.0,
            qp,
        }
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.q_diag)
            .zip(&self.lin)
            .map(|((x, q), c)| 0.5 * q * x * x + c * x)
            .sum::<f64>()
            + self.constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

/// Scaled residuals at the returned iterate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `max(‖Ax-b‖∞, ‖Gx+s-h‖∞) / (1 + max(‖b‖∞, ‖h‖∞))`
    pub primal: f64,
    /// `‖Qx + lin + Aᵀλ + Gᵀμ‖∞ / (1 + ‖lin‖∞)`
    pub dual: f64,
    /// `sᵀμ / (1 + |objective|)`
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub x_star: Vec<f64>,
    pub lambda_star: Vec<f64>,
    pub mu_star: Vec<f64>,
    /// Inequality slacks `h - Gx` as tracked by the solver.
    pub slack: Vec<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub residuals: Residuals,
    pub objective: f64,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Inequality rows whose slack is below their multiplier (or exactly
    /// zero); a warm-start hint for [`InteriorPointSolver::solve_with_hint`].
    pub fn tight_rows(&self) -> Vec<usize> {
        (0..self.mu_star.len())
            .filter(|&i| self.slack[i] < self.mu_star[i] || self.slack[i] == 0.0)
            .collect()
    }

    pub fn diagnostic(&self) -> String {
        format!(
            "status {:?} after {} iterations (primal {:.3e}, dual {:.3e}, gap {:.3e}, max dual {:.3e})",
            self.status,
            self.iterations,
            self.residuals.primal,
            self.residuals.dual,
            self.residuals.gap,
            self.mu_star.iter().chain(&self.lambda_star).fold(0.0_f64, |a, v| a.max(v.abs())),
        )
    }
}

#[cfg(test)]
mod tests;
