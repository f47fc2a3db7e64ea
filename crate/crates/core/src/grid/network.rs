//! Derived network matrices: device-to-bus incidence and generation shift factors.

use std::collections::VecDeque;

use nalgebra::{Cholesky, DMatrix};

use super::GridCase;
use crate::error::{Error, Result};

/// Device-to-bus placement matrices (`n_b x n_dev`, one 1 per column).
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMaps {
    pub m_g: DMatrix<f64>,
    pub m_d: DMatrix<f64>,
    pub m_e: DMatrix<f64>,
}

/// Line flow per unit nodal injection (`n_l x n_b`). The slack column is zero,
/// so an injection at bus `k` is implicitly withdrawn at the slack bus.
#[derive(Debug, Clone, PartialEq)]
pub struct GsfMatrix {
    pub phi: DMatrix<f64>,
}

impl GsfMatrix {
    /// Flows for a nodal injection vector.
    pub fn flows(&self, injection: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.phi.nrows()];
        for (l, f) in out.iter_mut().enumerate() {
            *f = (0..self.phi.ncols())
                .map(|b| self.phi[(l, b)] * injection[b])
                .sum();
        }
        out
    }
}

pub fn build_incidence(case: &GridCase) -> IncidenceMaps {
    let place = |buses: &mut dyn Iterator<Item = usize>, n: usize| {
        let mut m = DMatrix::zeros(case.n_b, n);
        for (col, bus) in buses.enumerate() {
            m[(bus, col)] = 1.0;
        }
        m
    };
    IncidenceMaps {
        m_g: place(&mut case.generators.iter().map(|g| g.bus), case.n_g()),
        m_d: place(&mut case.loads.iter().map(|d| d.bus), case.n_d()),
        m_e: place(&mut case.ess_units.iter().map(|e| e.bus), case.n_e()),
    }
}

/// Standard DC PTDF: `diag(1/x) A_inc B_red^-1`, zero-padded at the slack bus.
pub fn compute_gsf(case: &GridCase) -> Result<GsfMatrix> {
    let n_b = case.n_b;
    let n_l = case.n_l();
    check_connected(case)?;

    // reduced bus ordering skips the slack
    let reduced: Vec<Option<usize>> = {
        let mut next = 0;
        (0..n_b)
            .map(|b| {
                if b == case.slack_bus {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    };
    let n_r = n_b - 1;
    let mut phi = DMatrix::zeros(n_l, n_b);
    if n_r == 0 {
        return Ok(GsfMatrix { phi });
    }

    let mut b_red = DMatrix::<f64>::zeros(n_r, n_r);
    for line in &case.lines {
        let y = 1.0 / line.reactance;
        let (f, t) = (reduced[line.from_bus], reduced[line.to_bus]);
        if let Some(f) = f {
            b_red[(f, f)] += y;
        }
        if let Some(t) = t {
            b_red[(t, t)] += y;
        }
        if let (Some(f), Some(t)) = (f, t) {
            b_red[(f, t)] -= y;
            b_red[(t, f)] -= y;
        }
    }
    let chol = Cholesky::new(b_red).ok_or(Error::SingularSusceptance)?;

    // rows of diag(1/x) A_inc restricted to non-slack buses, solved against B_red
    let mut rhs = DMatrix::<f64>::zeros(n_r, n_l);
    for (l, line) in case.lines.iter().enumerate() {
        let y = 1.0 / line.reactance;
        if let Some(f) = reduced[line.from_bus] {
            rhs[(f, l)] += y;
        }
        if let Some(t) = reduced[line.to_bus] {
            rhs[(t, l)] -= y;
        }
    }
    // B_red is symmetric, so (row_l B_red^-1)^T = B_red^-1 row_l^T
    let sol = chol.solve(&rhs);
    for l in 0..n_l {
        for b in 0..n_b {
            if let Some(r) = reduced[b] {
                phi[(l, b)] = sol[(r, l)];
            }
        }
    }
    Ok(GsfMatrix { phi })
}

fn check_connected(case: &GridCase) -> Result<()> {
    let mut adj = vec![Vec::new(); case.n_b];
    for l in &case.lines {
        adj[l.from_bus].push(l.to_bus);
        adj[l.to_bus].push(l.from_bus);
    }
    let mut seen = vec![false; case.n_b];
    let mut queue = VecDeque::from([case.slack_bus]);
    seen[case.slack_bus] = true;
    while let Some(b) = queue.pop_front() {
        for &n in &adj[b] {
            if !seen[n] {
                seen[n] = true;
                queue.push_back(n);
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(b) => Err(Error::Disconnected(b)),
        None => Ok(()),
    }
}
