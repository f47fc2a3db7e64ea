use log::trace;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{ConvexProgram, Residuals, SolveResult, SolveStatus};
use crate::error::{Error, Result};
use crate::formulation::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Tolerance on the scaled primal, dual and gap residuals.
    pub tol: f64,
    pub max_iter: usize,
    /// Emit per-iteration residuals at `trace` log level.
    pub trace: bool,
    /// Re-solve the equality-constrained problem on the detected active set
    /// after convergence. Removes the `O(sqrt(mu))` error on degenerate
    /// constraints.
    pub polish: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 200,
            trace: false,
            polish: true,
        }
    }
}

const STEP_FRACTION: f64 = 0.99;

const REFINEMENT_STEPS: usize = 2;

/// Scaled primal and gap residual below which active-set solves are tried.
const POLISH_START: f64 = 1e-6;

/// Primal-dual interior-point solver.
#[derive(Debug, Default)]
pub struct InteriorPointSolver {
    pub options: SolverOptions,
}

/// Factorization of the reduced Newton system `[H Aᵀ; A 0]`.
struct NewtonFactor {
    a: SparseMatrix,
    chol: Cholesky<f64, Dyn>,
    /// `H⁻¹ Aᵀ`
    h_inv_at: DMatrix<f64>,
    /// Cholesky of the Schur complement `A H⁻¹ Aᵀ`.
    schur: Option<Cholesky<f64, Dyn>>,
}

impl InteriorPointSolver {
    pub fn new(options: SolverOptions) -> Self {
        InteriorPointSolver { options }
    }

    pub fn solve(
        &mut self,
        prog: &ConvexProgram<'_>,
        warm_start: Option<&SolveResult>,
    ) -> Result<SolveResult> {
        let qp = prog.qp;
        let (n, m, q) = (qp.n(), qp.n_eq(), qp.q());
        let a = &qp.a_mat;
        let g = &qp.g_mat;
        let b = &qp.b_vec;
        let h = &qp.h_vec;
        let c = &prog.lin;
        if prog.q_diag.len() != n || c.len() != n {
            return Err(Error::Dimension(
                "objective length does not match the program".into(),
            ));
        }
        if prog.q_diag.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Numerical(
                "quadratic diagonal must be nonnegative".into(),
            ));
        }

        let b_scale = 1.0 + inf_norm(b).max(inf_norm(h));
        let c_scale = 1.0 + inf_norm(c);
        let tol = self.options.tol;

        // initial point
        let (mut x, mut y, mut s, mut z) = match warm_start {
            Some(w) if w.x_star.len() == n && w.lambda_star.len() == m && w.mu_star.len() == q => {
                let gx = g.mul_vec(&w.x_star);
                let s: Vec<f64> = h
                    .iter()
                    .zip(&gx)
                    .map(|(h, gx)| (h - gx).max(1e-2 * b_scale.sqrt()))
                    .collect();
                let z: Vec<f64> = w
                    .mu_star
                    .iter()
                    .map(|v| v.max(1e-2 * c_scale.sqrt()))
                    .collect();
                (w.x_star.clone(), w.lambda_star.clone(), s, z)
            }
            _ => {
                let weights = vec![1.0; q];
                let factor = self.factor(prog, &weights)?;
                // min ½xᵀQx + cᵀx + ½‖Gx - h‖²  s.t. Ax = b
                let mut rx: Vec<f64> = c.iter().map(|v| -v).collect();
                g.tr_mul_acc(h, &mut rx);
                let (x, y) = factor.solve(&rx, b);
                let gx = g.mul_vec(&x);
                let mut s: Vec<f64> = h.iter().zip(&gx).map(|(h, gx)| h - gx).collect();
                let mut z: Vec<f64> = s.iter().map(|v| -v).collect();
                shift_positive(&mut s);
                shift_positive(&mut z);
                (x, y, s, z)
            }
        };

        let mut status = SolveStatus::MaxIterations;
        let mut residuals = Residuals::default();
        let mut iterations = 0;
        let mut best_primal = f64::INFINITY;
        let mut stall = 0usize;
        let mut breakdown = None;

        for iter in 0..=self.options.max_iter {
            iterations = iter;
            // residuals
            let mut r_d: Vec<f64> = (0..n).map(|i| prog.q_diag[i] * x[i] + c[i]).collect();
            a.tr_mul_acc(&y, &mut r_d);
            g.tr_mul_acc(&z, &mut r_d);
            let r_p: Vec<f64> = a.mul_vec(&x).iter().zip(b).map(|(ax, b)| ax - b).collect();
            let gx = g.mul_vec(&x);
            let r_i: Vec<f64> = (0..q).map(|i| gx[i] + s[i] - h[i]).collect();
            let sz: f64 = s.iter().zip(&z).map(|(s, z)| s * z).sum();
            let mu = if q > 0 { sz / q as f64 } else { 0.0 };
            let pobj = prog.objective(&x);

            let primal_abs = inf_norm(&r_p).max(inf_norm(&r_i));
            residuals = Residuals {
                primal: primal_abs / b_scale,
                dual: inf_norm(&r_d) / c_scale,
                gap: sz / (1.0 + pobj.abs()),
            };
            if self.options.trace {
                trace!(
                    "ipm {iter:3}: primal {:.3e} dual {:.3e} gap {:.3e} mu {:.3e}",
                    residuals.primal,
                    residuals.dual,
                    residuals.gap,
                    mu
                );
            }
            // per-row complementarity on the scale `check_kkt` reports
            let comp = (0..q).map(|i| s[i] * z[i]).fold(0.0, f64::max) / (b_scale * c_scale);
            if residuals.primal <= tol
                && residuals.dual <= tol
                && residuals.gap <= tol
                && comp <= tol
            {
                status = SolveStatus::Optimal;
                break;
            }
            // Near the solution the dual residual can stall at the accuracy
            // limit of the weighted factorization; an exact solve on the
            // predicted active set finishes the job when it verifies.
            if self.options.polish
                && residuals.primal <= POLISH_START
                && residuals.gap <= POLISH_START
            {
                let active: Vec<usize> = (0..q).filter(|&i| s[i] < z[i]).collect();
                if let Some(mut polished) = solve_on_active_set(prog, &active) {
                    if polished.residuals.dual <= tol {
                        polished.iterations = iter;
                        return Ok(polished);
                    }
                }
            }
            if primal_infeasibility_certificate(prog, &y, &z, b_scale) {
                status = SolveStatus::Infeasible;
                break;
            }
            // primal residual stuck while the duals diverge
            if residuals.primal < 0.5 * best_primal {
                best_primal = residuals.primal;
                stall = 0;
            } else {
                stall += 1;
            }
            let dual_size = inf_norm(&z).max(inf_norm(&y));
            if stall >= 30 && residuals.primal > tol && dual_size > 1e10 * c_scale {
                status = SolveStatus::Infeasible;
                break;
            }
            if iter == self.options.max_iter {
                break;
            }

            // Newton system
            let weights: Vec<f64> = (0..q).map(|i| z[i] / s[i]).collect();
            let factor = match self.factor(prog, &weights) {
                Ok(f) => f,
                Err(e) => {
                    if residuals.primal > tol.sqrt() {
                        status = SolveStatus::Infeasible;
                        break;
                    }
                    // close to the solution the weights z/s span too many
                    // orders of magnitude; fall back to the active-set solve
                    breakdown = Some(e);
                    break;
                }
            };
            let neg_rp: Vec<f64> = r_p.iter().map(|v| -v).collect();
            let direction = |r_c: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
                // rx = -r_d + Gᵀ((r_c - z∘r_i) / s)
                let tmp: Vec<f64> = (0..q).map(|i| (r_c[i] - z[i] * r_i[i]) / s[i]).collect();
                let mut rx: Vec<f64> = r_d.iter().map(|v| -v).collect();
                g.tr_mul_acc(&tmp, &mut rx);
                let (mut dx, mut dy) = factor.solve(&rx, &neg_rp);
                // iterative refinement against the unshifted reduced system
                for _ in 0..REFINEMENT_STEPS {
                    let gdx = g.mul_vec(&dx);
                    let wgdx: Vec<f64> = gdx.iter().zip(&weights).map(|(v, w)| v * w).collect();
                    let mut hdx: Vec<f64> = (0..n).map(|i| prog.q_diag[i] * dx[i]).collect();
                    g.tr_mul_acc(&wgdx, &mut hdx);
                    a.tr_mul_acc(&dy, &mut hdx);
                    let r1: Vec<f64> = (0..n).map(|i| rx[i] - hdx[i]).collect();
                    let adx = a.mul_vec(&dx);
                    let r2: Vec<f64> = (0..m).map(|i| neg_rp[i] - adx[i]).collect();
                    let (cx, cy) = factor.solve(&r1, &r2);
                    dx.iter_mut().zip(&cx).for_each(|(d, c)| *d += c);
                    dy.iter_mut().zip(&cy).for_each(|(d, c)| *d += c);
                }
                let gdx = g.mul_vec(&dx);
                let ds: Vec<f64> = (0..q).map(|i| -r_i[i] - gdx[i]).collect();
                let dz: Vec<f64> = (0..q).map(|i| (-r_c[i] - z[i] * ds[i]) / s[i]).collect();
                (dx, dy, ds, dz)
            };

            // predictor
            let r_aff: Vec<f64> = (0..q).map(|i| s[i] * z[i]).collect();
            let (_, _, ds_a, dz_a) = direction(&r_aff);
            let alpha_aff = max_step(&s, &ds_a).min(max_step(&z, &dz_a)).min(1.0);
            let mu_aff = if q > 0 {
                (0..q)
                    .map(|i| (s[i] + alpha_aff * ds_a[i]) * (z[i] + alpha_aff * dz_a[i]))
                    .sum::<f64>()
                    / q as f64
            } else {
                0.0
            };
            let sigma = if mu > 0.0 {
                (mu_aff / mu).powi(3).min(1.0)
            } else {
                0.0
            };

            // corrector
            let r_c: Vec<f64> = (0..q)
                .map(|i| s[i] * z[i] + ds_a[i] * dz_a[i] - sigma * mu)
                .collect();
            let (dx, dy, ds, dz) = direction(&r_c);
            let alpha = (STEP_FRACTION * max_step(&s, &ds).min(max_step(&z, &dz))).min(1.0);

            for i in 0..n {
                x[i] += alpha * dx[i];
            }
            for i in 0..m {
                y[i] += alpha * dy[i];
            }
            for i in 0..q {
                s[i] += alpha * ds[i];
                z[i] += alpha * dz[i];
            }
        }

        let try_polish = match breakdown {
            Some(_) => residuals.primal <= tol.sqrt() && residuals.dual <= tol.sqrt(),
            None => status == SolveStatus::Optimal && self.options.polish,
        };
        if try_polish {
            let active: Vec<usize> = (0..q).filter(|&i| s[i] < z[i]).collect();
            if let Some(polished) = solve_on_active_set(prog, &active) {
                let mut polished = polished;
                polished.iterations = iterations;
                return Ok(polished);
            }
        }

        if let Some(e) = breakdown {
            return Err(e);
        }

        let objective = prog.objective(&x);
        let result = SolveResult {
            x_star: x,
            lambda_star: y,
            mu_star: z,
            slack: s,
            status,
            iterations,
            residuals,
            objective,
        };
        match status {
            SolveStatus::Optimal => Ok(result),
            SolveStatus::Infeasible => Err(Error::Infeasible(Box::new(result))),
            SolveStatus::MaxIterations => Err(Error::MaxIterations(Box::new(result))),
        }
    }

    /// Try the active set `hint` first (see [`solve_on_active_set`]) and fall
    /// back to the interior-point method when it does not verify.
    pub fn solve_with_hint(
        &mut self,
        prog: &ConvexProgram<'_>,
        hint: Option<&[usize]>,
    ) -> Result<SolveResult> {
        if let Some(active) = hint {
            if let Some(res) = solve_on_active_set(prog, active) {
                return Ok(res);
            }
        }
        self.solve(prog, None)
    }

    /// Factor `[Q + Gᵀ W G, Aᵀ; A, 0]` through its Schur complement.
    fn factor(&self, prog: &ConvexProgram<'_>, weights: &[f64]) -> Result<NewtonFactor> {
        let qp = prog.qp;
        let n = qp.n();
        let m = qp.n_eq();
        let mut hess = DMatrix::zeros(n, n);
        for i in 0..n {
            hess[(i, i)] = prog.q_diag[i];
        }
        let g = &qp.g_mat;
        for (r, &w) in weights.iter().enumerate() {
            let (cols, vals) = g.row(r);
            for (ka, &ja) in cols.iter().enumerate() {
                let wa = w * vals[ka];
                for (kb, &jb) in cols.iter().enumerate() {
                    // Cholesky reads the lower triangle only
                    if jb <= ja {
                        hess[(ja, jb)] += wa * vals[kb];
                    }
                }
            }
        }
        // Shifts are a last resort: near convergence the largest diagonal
        // entries reach 1e20 and any shift relative to them would swamp the
        // small curvature of loose variables.
        let max_diag = (0..n).map(|i| hess[(i, i)]).fold(0.0, f64::max);
        let chol = factor_with_shifts(hess, max_diag)
            .ok_or_else(|| Error::Numerical("reduced Hessian is not positive definite".into()))?;

        let mut at = DMatrix::zeros(n, m);
        for (i, j, v) in qp.a_mat.triplets() {
            at[(j, i)] = v;
        }
        let h_inv_at = chol.solve(&at);
        let schur =
            if m > 0 {
                let mut s = DMatrix::zeros(m, m);
                for i in 0..m {
                    let (cols, vals) = qp.a_mat.row(i);
                    for k in 0..m {
                        s[(i, k)] = cols
                            .iter()
                            .zip(vals)
                            .map(|(&j, &v)| v * h_inv_at[(j, k)])
                            .sum();
                    }
                }
                let max_diag = (0..m).map(|i| s[(i, i)]).fold(0.0, f64::max);
                Some(factor_with_shifts(s, max_diag).ok_or_else(|| {
                    Error::Numerical("equality Schur complement is singular".into())
                })?)
            } else {
                None
            };
        Ok(NewtonFactor {
            a: qp.a_mat.clone(),
            chol,
            h_inv_at,
            schur,
        })
    }
}

impl NewtonFactor {
    /// Solve `[H Aᵀ; A 0] [dx; dy] = [rx; ry]`.
    fn solve(&self, rx: &[f64], ry: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut hx = DVector::from_column_slice(rx);
        self.chol.solve_mut(&mut hx);
        match &self.schur {
            None => (hx.as_slice().to_vec(), Vec::new()),
            Some(schur) => {
                // dy = (A H⁻¹ Aᵀ)⁻¹ (A H⁻¹ rx - ry);  dx = H⁻¹ rx - H⁻¹Aᵀ dy
                let ahx = self.a.mul_vec(hx.as_slice());
                let mut dy =
                    DVector::from_iterator(ry.len(), ahx.iter().zip(ry).map(|(a, r)| a - r));
                schur.solve_mut(&mut dy);
                let dx = hx - &self.h_inv_at * &dy;
                (dx.as_slice().to_vec(), dy.as_slice().to_vec())
            }
        }
    }
}

/// Rounds of active-set correction before a guess is given up.
const ACTIVE_SET_ROUNDS: usize = 8;

enum Attempt {
    Verified(SolveResult),
    /// Rows to drop (negative multiplier) and rows to add (violated), with
    /// the point itself when it passes verification at the looser tolerance.
    Adjust(Vec<usize>, Vec<usize>, Option<SolveResult>),
    Failed,
}

/// Solve `min ½xᵀQx + cᵀx` with the equalities and the inequality rows in
/// `active` held with equality, then verify the result is a KKT point of the
/// full problem: primal feasible and with nonnegative multipliers on the
/// active rows. A guess that fails verification is corrected by dropping rows
/// with negative multipliers and adding violated rows, for a few rounds.
/// Returns `None` when no verified point is found or `Q` is singular.
pub fn solve_on_active_set(prog: &ConvexProgram<'_>, active: &[usize]) -> Option<SolveResult> {
    let q = prog.qp.q();
    if prog.q_diag.iter().any(|v| *v <= 0.0) || active.iter().any(|&i| i >= q) {
        return None;
    }
    let mut set: Vec<usize> = active.to_vec();
    set.sort_unstable();
    set.dedup();
    let mut seen = std::collections::HashSet::new();
    let mut fallback = None;
    for _ in 0..ACTIVE_SET_ROUNDS {
        if !seen.insert(set.clone()) {
            break;
        }
        match active_set_attempt(prog, &set) {
            Attempt::Verified(res) => return Some(res),
            Attempt::Failed => break,
            Attempt::Adjust(drop, add, loose) => {
                if loose.is_some() {
                    fallback = loose;
                }
                set.retain(|i| !drop.contains(i));
                set.extend(add);
                set.sort_unstable();
                set.dedup();
            }
        }
    }
    fallback
}

fn active_set_attempt(prog: &ConvexProgram<'_>, active: &[usize]) -> Attempt {
    let qp = prog.qp;
    let (n, m, q) = (qp.n(), qp.n_eq(), qp.q());
    // Degenerate vertices can have more tight rows than variables, and the
    // regularized solve copes with the dependence. Far larger sets are a bad
    // guess that would only cost a big factorization.
    if m + active.len() > 2 * n {
        return Attempt::Failed;
    }
    let b_scale = 1.0 + inf_norm(&qp.b_vec).max(inf_norm(&qp.h_vec));
    let c_scale = 1.0 + inf_norm(&prog.lin);
    let k = m + active.len();
    let mut cmat = DMatrix::zeros(k, n);
    let mut rhs = DVector::zeros(k);
    for i in 0..m {
        let (cols, vals) = qp.a_mat.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            cmat[(i, j)] = v;
        }
        rhs[i] = qp.b_vec[i];
    }
    for (r, &i) in active.iter().enumerate() {
        let (cols, vals) = qp.g_mat.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            cmat[(m + r, j)] = v;
        }
        rhs[m + r] = qp.h_vec[i];
    }
    let dinv = DVector::from_iterator(n, prog.q_diag.iter().map(|v| 1.0 / v));
    let c = DVector::from_column_slice(&prog.lin);
    // x = -D⁻¹(c + Cᵀν),  (C D⁻¹ Cᵀ) ν = -d - C D⁻¹ c
    let mut cd = cmat.clone();
    for j in 0..n {
        cd.column_mut(j).scale_mut(dinv[j]);
    }
    let mmat = &cd * cmat.transpose();
    let target = -&rhs - &cd * &c;
    let reg = 1e-12 * (1.0 + (0..k).map(|i| mmat[(i, i)]).fold(0.0, f64::max));
    let mut shifted = mmat.clone();
    for i in 0..k {
        shifted[(i, i)] += reg;
    }
    let Some(chol) = Cholesky::new(shifted) else {
        trace!("active-set solve rejected: {k} x {k} system not factorizable");
        return Attempt::Failed;
    };
    let mut nu = chol.solve(&target);
    for _ in 0..3 {
        let resid = &target - &mmat * &nu;
        nu += chol.solve(&resid);
    }
    let x_vec = -(dinv.component_mul(&(&c + cmat.transpose() * &nu)));
    let x: Vec<f64> = x_vec.as_slice().to_vec();
    if x.iter().any(|v| !v.is_finite()) {
        return Attempt::Failed;
    }

    let feas_tol = 1e-9 * b_scale;
    let ax = qp.a_mat.mul_vec(&x);
    let eq = ax
        .iter()
        .zip(&qp.b_vec)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if eq > feas_tol {
        trace!("active-set solve rejected: equality {eq:.3e}");
        return Attempt::Failed;
    }
    let gx = qp.g_mat.mul_vec(&x);
    let worst = (0..q).map(|i| gx[i] - qp.h_vec[i]).fold(0.0, f64::max);
    // rows outside the set violated beyond rounding belong in it
    let round_tol = 1e-12 * b_scale;
    let violated: Vec<usize> = (0..q)
        .filter(|&i| gx[i] - qp.h_vec[i] > round_tol && active.binary_search(&i).is_err())
        .collect();
    let negative: Vec<usize> = active
        .iter()
        .enumerate()
        .filter(|&(r, _)| nu[m + r] < -1e-9 * c_scale)
        .map(|(_, &i)| i)
        .collect();
    if worst > feas_tol || !negative.is_empty() {
        trace!(
            "active-set solve rejected: worst violation {worst:.3e} over {} rows, {} negative multipliers",
            violated.len(),
            negative.len()
        );
        return Attempt::Adjust(negative, violated, None);
    }
    let mut mu = vec![0.0; q];
    for (r, &i) in active.iter().enumerate() {
        mu[i] = nu[m + r].max(0.0);
    }
    let lambda = nu.as_slice()[..m].to_vec();
    let slack: Vec<f64> = qp
        .h_vec
        .iter()
        .zip(&gx)
        .map(|(h, g)| (h - g).max(0.0))
        .collect();
    let mut r_d: Vec<f64> = (0..n)
        .map(|i| prog.q_diag[i] * x[i] + prog.lin[i])
        .collect();
    qp.a_mat.tr_mul_acc(&lambda, &mut r_d);
    qp.g_mat.tr_mul_acc(&mu, &mut r_d);
    let sz: f64 = slack.iter().zip(&mu).map(|(s, z)| s * z).sum();
    let objective = prog.objective(&x);
    let res = SolveResult {
        x_star: x,
        lambda_star: lambda,
        mu_star: mu,
        slack,
        status: SolveStatus::Optimal,
        iterations: 0,
        residuals: Residuals {
            primal: eq / b_scale,
            dual: inf_norm(&r_d) / c_scale,
            gap: sz / (1.0 + objective.abs()),
        },
        objective,
    };
    if violated.is_empty() {
        Attempt::Verified(res)
    } else {
        Attempt::Adjust(Vec::new(), violated, Some(res))
    }
}

/// Farkas certificate: `Aᵀŷ + Gᵀẑ ≈ 0`, `bᵀŷ + hᵀẑ < 0` for normalized duals.
fn primal_infeasibility_certificate(
    prog: &ConvexProgram<'_>,
    y: &[f64],
    z: &[f64],
    b_scale: f64,
) -> bool {
    let size = inf_norm(y).max(inf_norm(z));
    if size < 1e6 {
        return false;
    }
    let qp = prog.qp;
    let yh: Vec<f64> = y.iter().map(|v| v / size).collect();
    let zh: Vec<f64> = z.iter().map(|v| v / size).collect();
    let mut combo = qp.a_mat.tr_mul_vec(&yh);
    qp.g_mat.tr_mul_acc(&zh, &mut combo);
    let support: f64 = dot(&qp.b_vec, &yh) + dot(&qp.h_vec, &zh);
    inf_norm(&combo) <= 1e-8 && support < -1e-6 * b_scale
}

/// Cholesky of `m`, retried with growing diagonal shifts relative to
/// `max_diag` when it is not numerically positive definite.
fn factor_with_shifts(m: DMatrix<f64>, max_diag: f64) -> Option<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    for rel in [1e-14, 1e-12, 1e-10] {
        let mut shifted = m.clone();
        let delta = rel * (1.0 + max_diag);
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += delta;
        }
        if let Some(c) = Cholesky::new(shifted) {
            return Some(c);
        }
    }
    None
}

fn shift_positive(v: &mut [f64]) {
    let worst = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let norm = inf_norm(v).max(1.0);
    if worst < 1e-8 * norm || !worst.is_finite() {
        let delta = 1.0 - worst.min(0.0) + 1e-2 * norm.sqrt();
        v.iter_mut().for_each(|x| *x += delta);
    }
}

/// Largest `a` in [0, ∞) with `v + a dv >= 0`.
fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}
