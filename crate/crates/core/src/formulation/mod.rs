//! Multi-period feasible region `{x : A x = b, G x <= h}` and the stacked
//! decision layout shared by the solver, the projection layer and the models.
//!
//! The constraint families follow the multi-period DC-OPF model: power
//! balance, generator limits, ramping, storage power and energy limits,
//! terminal state of charge and line flows. The compact matrix encoding uses
//! Kronecker products of block-selection matrices with a few corrections to
//! the textbook form:
//!
//! * ramp rows act on generation only (`n_g (T-1)` rows per direction) with
//!   right-hand side `1_{T-1} ⊗ R`;
//! * the charge bound uses `p̄^ch` and the discharge bound uses `p̄^dis`;
//! * `S` accumulates energy *changes*, so the SoC rows are offset by the
//!   initial energy;
//! * the terminal condition `e_T = e_init` is appended to `A`.

mod check;
mod layout;
mod sparse;

pub use check::{check_schedule, FeasibilityReport};
pub use layout::{DecisionLayout, DeviceClass, SelectionMatrices};
pub use sparse::SparseMatrix;

use std::io::Write;
use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridCase, GsfMatrix, IncidenceMaps, Network};

/// Demand of every load over the horizon (`n_d x T`, MW).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandScenario {
    pub p_d: DMatrix<f64>,
}

impl DemandScenario {
    pub fn new(p_d: DMatrix<f64>) -> Result<Self> {
        if p_d.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Validation(
                "demand entries must be finite and >= 0".into(),
            ));
        }
        Ok(DemandScenario { p_d })
    }

    pub fn horizon(&self) -> usize {
        self.p_d.ncols()
    }

    pub fn n_d(&self) -> usize {
        self.p_d.nrows()
    }

    pub fn total(&self, t: usize) -> f64 {
        self.p_d.column(t).sum()
    }

    /// `vec(p^d)`, period-major.
    pub fn flatten(&self) -> Vec<f64> {
        self.p_d.as_slice().to_vec()
    }

    /// Single-period scenario holding column `t`.
    pub fn period(&self, t: usize) -> DemandScenario {
        DemandScenario {
            p_d: self.p_d.columns(t, 1).into_owned(),
        }
    }

    pub fn scaled(&self, factor: f64) -> DemandScenario {
        DemandScenario {
            p_d: &self.p_d * factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintFamily {
    Balance,
    TerminalSoc,
    GenUpper,
    GenLower,
    ChargeUpper,
    ChargeLower,
    DischargeUpper,
    DischargeLower,
    RampUp,
    RampDown,
    SocUpper,
    SocLower,
    LineForward,
    LineBackward,
}

impl ConstraintFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ConstraintFamily::Balance => "balance",
            ConstraintFamily::TerminalSoc => "terminal_soc",
            ConstraintFamily::GenUpper => "gen_upper",
            ConstraintFamily::GenLower => "gen_lower",
            ConstraintFamily::ChargeUpper => "charge_upper",
            ConstraintFamily::ChargeLower => "charge_lower",
            ConstraintFamily::DischargeUpper => "discharge_upper",
            ConstraintFamily::DischargeLower => "discharge_lower",
            ConstraintFamily::RampUp => "ramp_up",
            ConstraintFamily::RampDown => "ramp_down",
            ConstraintFamily::SocUpper => "soc_upper",
            ConstraintFamily::SocLower => "soc_lower",
            ConstraintFamily::LineForward => "line_forward",
            ConstraintFamily::LineBackward => "line_backward",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowLabel {
    pub family: ConstraintFamily,
    pub rows: Range<usize>,
}

/// Switches for constraint families that some models leave out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulationOptions {
    pub line_limits: bool,
    /// SoC window and terminal condition. Off for single-period models that
    /// do not track storage energy.
    pub storage_energy: bool,
}

impl Default for FormulationOptions {
    fn default() -> Self {
        FormulationOptions {
            line_limits: true,
            storage_energy: true,
        }
    }
}

/// Feasible region of one demand scenario.
#[derive(Debug, Clone)]
pub struct QpData {
    pub a_mat: SparseMatrix,
    pub b_vec: Vec<f64>,
    pub g_mat: SparseMatrix,
    pub h_vec: Vec<f64>,
    pub eq_labels: Vec<RowLabel>,
    pub ineq_labels: Vec<RowLabel>,
    pub layout: DecisionLayout,
}

impl QpData {
    pub fn build(net: &Network, demand: &DemandScenario, opts: FormulationOptions) -> Result<Self> {
        let (a_mat, b_vec, eq_labels) = build_equalities(&net.case, demand, opts)?;
        let (g_mat, h_vec, ineq_labels) =
            build_inequalities(&net.case, demand, &net.gsf, &net.maps, opts)?;
        Ok(QpData {
            a_mat,
            b_vec,
            g_mat,
            h_vec,
            eq_labels,
            ineq_labels,
            layout: DecisionLayout::new(net.case.n_g(), net.case.n_e(), demand.horizon()),
        })
    }

    pub fn n(&self) -> usize {
        self.layout.len()
    }

    pub fn n_eq(&self) -> usize {
        self.b_vec.len()
    }

    pub fn q(&self) -> usize {
        self.h_vec.len()
    }

    pub fn family_of_ineq(&self, row: usize) -> ConstraintFamily {
        label_of(&self.ineq_labels, row)
    }

    pub fn family_of_eq(&self, row: usize) -> ConstraintFamily {
        label_of(&self.eq_labels, row)
    }

    /// Row range of an inequality family, empty if absent.
    pub fn ineq_rows(&self, family: ConstraintFamily) -> Range<usize> {
        self.ineq_labels
            .iter()
            .find(|l| l.family == family)
            .map_or(0..0, |l| l.rows.clone())
    }

    /// Largest violation of `A x = b` and `G x <= h`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let eq = self
            .a_mat
            .mul_vec(x)
            .iter()
            .zip(&self.b_vec)
            .map(|(ax, b)| (ax - b).abs())
            .fold(0.0, f64::max);
        let ineq = self
            .g_mat
            .mul_vec(x)
            .iter()
            .zip(&self.h_vec)
            .map(|(gx, h)| gx - h)
            .fold(0.0, f64::max);
        eq.max(ineq)
    }

    /// Text dump: labeled row ranges plus 0-based sparse triplets.
    pub fn write_dump(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(
            w,
            "%%qpdata n={} p={} horizon={} n_eq={} q={}",
            self.n(),
            self.layout.p(),
            self.layout.horizon,
            self.n_eq(),
            self.q()
        )?;
        for (tag, labels) in [("eq", &self.eq_labels), ("ineq", &self.ineq_labels)] {
            for l in labels {
                writeln!(
                    w,
                    "%label {tag} {} {} {}",
                    l.family.name(),
                    l.rows.start,
                    l.rows.end
                )?;
            }
        }
        for (tag, m, rhs) in [
            ("A", &self.a_mat, &self.b_vec),
            ("G", &self.g_mat, &self.h_vec),
        ] {
            writeln!(w, "%matrix {tag} {} {} {}", m.nrows(), m.ncols(), m.nnz())?;
            for (i, j, v) in m.triplets() {
                writeln!(w, "{i} {j} {v:e}")?;
            }
            writeln!(w, "%rhs {tag} {}", rhs.len())?;
            for v in rhs {
                writeln!(w, "{v:e}")?;
            }
        }
        Ok(())
    }
}

fn label_of(labels: &[RowLabel], row: usize) -> ConstraintFamily {
    labels
        .iter()
        .find(|l| l.rows.contains(&row))
        .map(|l| l.family)
        .unwrap_or_else(|| panic!("row {row} has no label"))
}

fn check_demand(case: &GridCase, demand: &DemandScenario) -> Result<()> {
    if demand.n_d() != case.n_d() {
        return Err(Error::Dimension(format!(
            "demand has {} loads, case has {}",
            demand.n_d(),
            case.n_d()
        )));
    }
    if demand.horizon() == 0 {
        return Err(Error::Dimension("demand horizon is empty".into()));
    }
    for g in &case.generators {
        if g.cost.len() > 1 && g.cost.len() < demand.horizon() {
            return Err(Error::Dimension(format!(
                "cost profile has {} periods, demand has {}",
                g.cost.len(),
                demand.horizon()
            )));
        }
    }
    Ok(())
}

/// `diag(eta_ch) U_ch - diag(1/eta_dis) U_dis`: per-period energy change.
fn storage_coupling(case: &GridCase, sel: &SelectionMatrices) -> SparseMatrix {
    let mut t = Vec::new();
    for (i, j, v) in sel.u_ch.triplets() {
        t.push((i, j, v * case.ess_units[i].eta_ch));
    }
    for (i, j, v) in sel.u_dis.triplets() {
        t.push((i, j, -v / case.ess_units[i].eta_dis));
    }
    SparseMatrix::from_triplets(case.n_e(), sel.u_g.ncols(), &t)
}

pub fn build_equalities(
    case: &GridCase,
    demand: &DemandScenario,
    opts: FormulationOptions,
) -> Result<(SparseMatrix, Vec<f64>, Vec<RowLabel>)> {
    check_demand(case, demand)?;
    let t_len = demand.horizon();
    let layout = DecisionLayout::new(case.n_g(), case.n_e(), t_len);
    let p = layout.p();

    // [1_g^T, -1_ch^T, 1_dis^T]
    let mut pattern = vec![1.0; p];
    for e in 0..case.n_e() {
        pattern[case.n_g() + e] = -1.0;
    }
    let row = SparseMatrix::from_triplets(
        1,
        p,
        &pattern
            .iter()
            .enumerate()
            .map(|(j, &v)| (0, j, v))
            .collect::<Vec<_>>(),
    );
    let balance = SparseMatrix::identity(t_len).kron(&row);
    let mut b_vec: Vec<f64> = (0..t_len).map(|t| demand.total(t)).collect();
    let mut labels = vec![RowLabel {
        family: ConstraintFamily::Balance,
        rows: 0..t_len,
    }];

    let a_mat = if opts.storage_energy && case.n_e() > 0 {
        // last row of S ⊗ K is 1_T^T ⊗ K: total energy change over the horizon
        let sel = SelectionMatrices::new(&layout);
        let ones = SparseMatrix::from_triplets(
            1,
            t_len,
            &(0..t_len).map(|t| (0, t, 1.0)).collect::<Vec<_>>(),
        );
        let terminal = ones.kron(&storage_coupling(case, &sel));
        b_vec.extend(std::iter::repeat_n(0.0, case.n_e()));
        labels.push(RowLabel {
            family: ConstraintFamily::TerminalSoc,
            rows: t_len..t_len + case.n_e(),
        });
        SparseMatrix::vstack(&[&balance, &terminal])
    } else {
        balance
    };
    Ok((a_mat, b_vec, labels))
}

pub fn build_inequalities(
    case: &GridCase,
    demand: &DemandScenario,
    gsf: &GsfMatrix,
    maps: &IncidenceMaps,
    opts: FormulationOptions,
) -> Result<(SparseMatrix, Vec<f64>, Vec<RowLabel>)> {
    check_demand(case, demand)?;
    if gsf.phi.shape() != (case.n_l(), case.n_b) {
        return Err(Error::Dimension("GSF shape does not match case".into()));
    }
    let t_len = demand.horizon();
    let layout = DecisionLayout::new(case.n_g(), case.n_e(), t_len);
    let sel = SelectionMatrices::new(&layout);
    let eye_t = SparseMatrix::identity(t_len);

    let mut blocks: Vec<(ConstraintFamily, SparseMatrix, Vec<f64>)> = Vec::new();
    let tile = |per: &dyn Fn(usize) -> f64, width: usize, reps: usize| -> Vec<f64> {
        (0..reps).flat_map(|_| (0..width).map(per)).collect()
    };
    let gens = &case.generators;
    let ess = &case.ess_units;
    let (n_g, n_e) = (case.n_g(), case.n_e());

    blocks.push((
        ConstraintFamily::GenUpper,
        sel.v_g.clone(),
        tile(&|g| gens[g].p_max, n_g, t_len),
    ));
    blocks.push((
        ConstraintFamily::GenLower,
        sel.v_g.scale(-1.0),
        tile(&|g| -gens[g].p_min, n_g, t_len),
    ));
    blocks.push((
        ConstraintFamily::ChargeUpper,
        sel.v_ch.clone(),
        tile(&|e| ess[e].p_ch_max, n_e, t_len),
    ));
    blocks.push((
        ConstraintFamily::ChargeLower,
        sel.v_ch.scale(-1.0),
        vec![0.0; n_e * t_len],
    ));
    blocks.push((
        ConstraintFamily::DischargeUpper,
        sel.v_dis.clone(),
        tile(&|e| ess[e].p_dis_max, n_e, t_len),
    ));
    blocks.push((
        ConstraintFamily::DischargeLower,
        sel.v_dis.scale(-1.0),
        vec![0.0; n_e * t_len],
    ));

    let ramp = sel.d.kron(&sel.u_g);
    let n_ramp = t_len - 1;
    blocks.push((
        ConstraintFamily::RampUp,
        ramp.clone(),
        tile(&|g| gens[g].ramp_up, n_g, n_ramp),
    ));
    blocks.push((
        ConstraintFamily::RampDown,
        ramp.scale(-1.0),
        tile(&|g| gens[g].ramp_down, n_g, n_ramp),
    ));

    if opts.storage_energy && n_e > 0 {
        let soc = sel.s.kron(&storage_coupling(case, &sel));
        blocks.push((
            ConstraintFamily::SocUpper,
            soc.clone(),
            tile(&|e| ess[e].e_max - ess[e].e_init(), n_e, t_len),
        ));
        blocks.push((
            ConstraintFamily::SocLower,
            soc.scale(-1.0),
            tile(&|e| ess[e].e_init() - ess[e].e_min, n_e, t_len),
        ));
    }

    if opts.line_limits && case.n_l() > 0 {
        let phi_g = &gsf.phi * &maps.m_g;
        let phi_e = &gsf.phi * &maps.m_e;
        let mut per_period = DMatrix::zeros(case.n_l(), layout.p());
        per_period.columns_mut(0, n_g).copy_from(&phi_g);
        per_period.columns_mut(n_g, n_e).copy_from(&(-&phi_e));
        per_period.columns_mut(n_g + n_e, n_e).copy_from(&phi_e);
        let flow = eye_t.kron(&SparseMatrix::from_dense(&per_period));
        let load_flow = &gsf.phi * &maps.m_d * &demand.p_d; // n_l x T
        let limit: Vec<f64> = case.lines.iter().map(|l| l.flow_limit).collect();
        let fwd: Vec<f64> = (0..t_len)
            .flat_map(|t| (0..case.n_l()).map(move |l| (t, l)))
            .map(|(t, l)| load_flow[(l, t)] + limit[l])
            .collect();
        let bwd: Vec<f64> = (0..t_len)
            .flat_map(|t| (0..case.n_l()).map(move |l| (t, l)))
            .map(|(t, l)| -load_flow[(l, t)] + limit[l])
            .collect();
        blocks.push((ConstraintFamily::LineForward, flow.clone(), fwd));
        blocks.push((ConstraintFamily::LineBackward, flow.scale(-1.0), bwd));
    }

    let mut labels = Vec::with_capacity(blocks.len());
    let mut h = Vec::new();
    let mut start = 0;
    for (family, m, rhs) in &blocks {
        debug_assert_eq!(m.nrows(), rhs.len(), "{family:?}");
        labels.push(RowLabel {
            family: *family,
            rows: start..start + m.nrows(),
        });
        start += m.nrows();
        h.extend_from_slice(rhs);
    }
    let mats: Vec<&SparseMatrix> = blocks.iter().map(|(_, m, _)| m).collect();
    let g = SparseMatrix::vstack(&mats);
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite constraint bound".into()));
    }
    Ok((g, h, labels))
}

/// Expected inequality count `2pT + 2 n_g (T-1) + 2 n_e T + 2 n_l T` for the
/// full formulation.
pub fn inequality_count(case: &GridCase, horizon: usize) -> usize {
    let p = case.period_width();
    2 * p * horizon
        + 2 * case.n_g() * (horizon - 1)
        + 2 * case.n_e() * horizon
        + 2 * case.n_l() * horizon
}

/// Stacked cost vector `vec([c_t; 0; 0])`; `first_period` offsets into
/// time-varying cost profiles.
pub fn cost_vector(case: &GridCase, layout: &DecisionLayout, first_period: usize) -> Vec<f64> {
    let mut c = vec![0.0; layout.len()];
    for t in 0..layout.horizon {
        for (g, gen) in case.generators.iter().enumerate() {
            c[layout.gen(t, g)] = gen.cost_at(first_period + t);
        }
    }
    c
}

/// Total generation cost of a stacked schedule.
pub fn schedule_cost(case: &GridCase, layout: &DecisionLayout, x: &[f64]) -> f64 {
    let c = cost_vector(case, layout, 0);
    c.iter().zip(x).map(|(c, x)| c * x).sum()
}

/// Stored energy after each period (`n_e x T`), starting from `e_init`.
pub fn soc_trajectory(case: &GridCase, layout: &DecisionLayout, x: &[f64]) -> Result<DMatrix<f64>> {
    if x.len() != layout.len() {
        return Err(Error::Dimension(format!(
            "decision has length {}, expected {}",
            x.len(),
            layout.len()
        )));
    }
    let mut e = DMatrix::zeros(case.n_e(), layout.horizon);
    for (k, unit) in case.ess_units.iter().enumerate() {
        let mut level = unit.e_init();
        for t in 0..layout.horizon {
            level += unit.eta_ch * x[layout.ch(t, k)] - x[layout.dis(t, k)] / unit.eta_dis;
            e[(k, t)] = level;
        }
    }
    Ok(e)
}

#[cfg(test)]
mod tests;
