//! Differentiation of the Euclidean projection `z ↦ argmin_{x∈F} ½‖x - z‖²`.
//!
//! At a solution with active inequality rows `G_a`, the projection is locally
//! the equality-constrained projection onto `{x : A x = b, G_a x = h_a}`, so
//! with `C = [A; G_a]`
//!
//! ```text
//! ∂x̃/∂z = I - Cᵀ (C Cᵀ)⁻¹ C
//! ```
//!
//! This matrix is symmetric, so a vector-Jacobian product is the same solve as
//! a Jacobian-vector product. Rows whose multiplier is below `tau_act` count as
//! inactive even when their slack is zero (weak activity); those rows are
//! counted in [`ActiveSet::degenerate_rows`].

use log::debug;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulation::QpData;
use crate::solver::SolveResult;

/// Tikhonov term added to `C Cᵀ`, relative to its largest diagonal entry.
pub const SENSITIVITY_REGULARIZATION: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Multiplier above which a row is active.
    pub tau_act: f64,
    /// Relative slack below which a row counts as tight.
    pub tau_slack: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            tau_act: 1e-6,
            tau_slack: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveSet {
    pub active_rows: Vec<usize>,
    /// Tight rows with negligible multiplier, treated as inactive.
    pub degenerate_rows: Vec<usize>,
    pub thresholds: Thresholds,
}

impl ActiveSet {
    pub fn detect(sol: &SolveResult, qp: &QpData, thresholds: Thresholds) -> Self {
        let gx = qp.g_mat.mul_vec(&sol.x_star);
        let mut active_rows = Vec::new();
        let mut degenerate_rows = Vec::new();
        for (i, (&mu, (&h, &g))) in sol.mu_star.iter().zip(qp.h_vec.iter().zip(&gx)).enumerate() {
            if mu > thresholds.tau_act {
                active_rows.push(i);
            } else if h - g < thresholds.tau_slack * (1.0 + h.abs()) {
                degenerate_rows.push(i);
            }
        }
        ActiveSet {
            active_rows,
            degenerate_rows,
            thresholds,
        }
    }
}

/// Factorized sensitivity system for one projection solution.
#[derive(Debug, Clone)]
pub struct VjpWorkspace {
    pub active: ActiveSet,
    n: usize,
    /// `C = [A; G_a]`, dense.
    constraints: DMatrix<f64>,
    /// Cholesky of `C Cᵀ + δ I`; `None` when there is nothing to project out.
    factor: Option<Cholesky<f64, Dyn>>,
}

pub fn build_sensitivity(
    sol: &SolveResult,
    qp: &QpData,
    thresholds: Thresholds,
) -> Result<VjpWorkspace> {
    if !sol.is_optimal() {
        return Err(Error::Numerical(format!(
            "sensitivity requested for a non-optimal solve: {}",
            sol.diagnostic()
        )));
    }
    let n = qp.n();
    if sol.x_star.len() != n || sol.mu_star.len() != qp.q() {
        return Err(Error::Dimension(
            "solution does not match the QP data".into(),
        ));
    }
    let active = ActiveSet::detect(sol, qp, thresholds);
    if !active.degenerate_rows.is_empty() {
        debug!(
            "{} weakly active rows treated as inactive",
            active.degenerate_rows.len()
        );
    }
    let m = qp.n_eq();
    let k = m + active.active_rows.len();
    let mut constraints = DMatrix::zeros(k, n);
    for i in 0..m {
        let (cols, vals) = qp.a_mat.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            constraints[(i, j)] = v;
        }
    }
    for (r, &i) in active.active_rows.iter().enumerate() {
        let (cols, vals) = qp.g_mat.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            constraints[(m + r, j)] = v;
        }
    }
    let factor = if k == 0 {
        None
    } else {
        let mut gram = &constraints * constraints.transpose();
        let scale = (0..k).map(|i| gram[(i, i)]).fold(0.0, f64::max).max(1.0);
        for i in 0..k {
            gram[(i, i)] += SENSITIVITY_REGULARIZATION * scale;
        }
        Some(Cholesky::new(gram).ok_or_else(|| {
            Error::DegenerateActiveSet(format!(
                "reduced sensitivity system with {} equality and {} active rows is singular",
                m,
                active.active_rows.len()
            ))
        })?)
    };
    Ok(VjpWorkspace {
        active,
        n,
        constraints,
        factor,
    })
}

impl VjpWorkspace {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degeneracy(&self) -> usize {
        self.active.degenerate_rows.len()
    }

    /// `(∂x̃/∂z)ᵀ grad_x`.
    pub fn vjp(&self, grad_x: &[f64]) -> Result<Vec<f64>> {
        if grad_x.len() != self.n {
            return Err(Error::Dimension(format!(
                "cotangent has length {}, expected {}",
                grad_x.len(),
                self.n
            )));
        }
        let g = DVector::from_column_slice(grad_x);
        let Some(factor) = &self.factor else {
            return Ok(grad_x.to_vec());
        };
        let mut w = &self.constraints * &g;
        factor.solve_mut(&mut w);
        let out = g - self.constraints.tr_mul(&w);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(
                "projection vjp produced a non-finite entry".into(),
            ));
        }
        Ok(out.as_slice().to_vec())
    }

    /// Full Jacobian, assembled column by column from basis cotangents.
    /// Diagnostic use only.
    pub fn jacobian(&self) -> Result<DMatrix<f64>> {
        let mut jac = DMatrix::zeros(self.n, self.n);
        let mut e = vec![0.0; self.n];
        for i in 0..self.n {
            e[i] = 1.0;
            let col = self.vjp(&e)?;
            e[i] = 0.0;
            // vjp(e_i) is row i of the Jacobian
            for (j, v) in col.into_iter().enumerate() {
                jac[(i, j)] = v;
            }
        }
        Ok(jac)
    }
}
