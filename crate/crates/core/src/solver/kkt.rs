use serde::{Deserialize, Serialize};

use super::ipm::inf_norm;
use super::{ConvexProgram, SolveResult};

/// KKT residuals of a candidate primal-dual point, recomputed from scratch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `‖Qx + lin + Aᵀλ + Gᵀμ‖∞`
    pub stationarity: f64,
    /// `‖Ax - b‖∞`
    pub primal_equality: f64,
    /// `max(0, max_i (Gx - h)_i)`
    pub primal_inequality: f64,
    /// `‖diag(μ)(Gx - h)‖∞`
    pub complementarity: f64,
    /// `max(0, -min_i μ_i)`
    pub dual_infeasibility: f64,
    pub b_scale: f64,
    pub c_scale: f64,
}

impl KktReport {
    /// Largest residual after dividing by the solver's scaling.
    pub fn max_scaled(&self) -> f64 {
        (self.stationarity / self.c_scale)
            .max(self.primal_equality / self.b_scale)
            .max(self.primal_inequality / self.b_scale)
            .max(self.complementarity / (self.b_scale * self.c_scale))
            .max(self.dual_infeasibility / self.c_scale)
    }

    pub fn max_abs(&self) -> f64 {
        self.stationarity
            .max(self.primal_equality)
            .max(self.primal_inequality)
            .max(self.complementarity)
            .max(self.dual_infeasibility)
    }
}

pub fn check_kkt(result: &SolveResult, prog: &ConvexProgram<'_>) -> KktReport {
    let qp = prog.qp;
    let x = &result.x_star;
    let mut stat: Vec<f64> = x
        .iter()
        .zip(&prog.q_diag)
        .zip(&prog.lin)
        .map(|((x, q), c)| q * x + c)
        .collect();
    qp.a_mat.tr_mul_acc(&result.lambda_star, &mut stat);
    qp.g_mat.tr_mul_acc(&result.mu_star, &mut stat);
    let ax = qp.a_mat.mul_vec(x);
    let eq = ax
        .iter()
        .zip(&qp.b_vec)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let gx = qp.g_mat.mul_vec(x);
    let viol: Vec<f64> = gx.iter().zip(&qp.h_vec).map(|(g, h)| g - h).collect();
    let ineq = viol.iter().fold(0.0_f64, |a, v| a.max(*v));
    let comp = viol
        .iter()
        .zip(&result.mu_star)
        .map(|(v, m)| (v * m).abs())
        .fold(0.0, f64::max);
    let dual_inf = result.mu_star.iter().fold(0.0_f64, |a, m| a.max(-m));
    KktReport {
        stationarity: inf_norm(&stat),
        primal_equality: eq,
        primal_inequality: ineq,
        complementarity: comp,
        dual_infeasibility: dual_inf,
        b_scale: 1.0 + inf_norm(&qp.b_vec).max(inf_norm(&qp.h_vec)),
        c_scale: 1.0 + inf_norm(&prog.lin),
    }
}
