//! Constraint residuals evaluated straight from the dispatch model, without
//! going through the assembled matrices. Used as an independent feasibility
//! check for projected and solved schedules.

use serde::{Deserialize, Serialize};

use super::{DecisionLayout, DemandScenario, FormulationOptions};
use crate::error::{Error, Result};
use crate::grid::Network;

/// Largest violation per constraint family (MW or MWh; 0 when satisfied).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub balance: f64,
    pub gen_limits: f64,
    pub ramping: f64,
    pub storage_power: f64,
    pub soc_limits: f64,
    pub terminal_soc: f64,
    pub line_flow: f64,
}

impl FeasibilityReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.balance,
            self.gen_limits,
            self.ramping,
            self.storage_power,
            self.soc_limits,
            self.terminal_soc,
            self.line_flow,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Element-wise maximum of two reports.
    pub fn max(&self, other: &Self) -> Self {
        FeasibilityReport {
            balance: self.balance.max(other.balance),
            gen_limits: self.gen_limits.max(other.gen_limits),
            ramping: self.ramping.max(other.ramping),
            storage_power: self.storage_power.max(other.storage_power),
            soc_limits: self.soc_limits.max(other.soc_limits),
            terminal_soc: self.terminal_soc.max(other.terminal_soc),
            line_flow: self.line_flow.max(other.line_flow),
        }
    }
}

pub fn check_schedule(
    net: &Network,
    demand: &DemandScenario,
    x: &[f64],
    opts: FormulationOptions,
) -> Result<FeasibilityReport> {
    let case = &net.case;
    let t_len = demand.horizon();
    let layout = DecisionLayout::new(case.n_g(), case.n_e(), t_len);
    if x.len() != layout.len() {
        return Err(Error::Dimension(format!(
            "schedule length {} != {}",
            x.len(),
            layout.len()
        )));
    }
    let mut r = FeasibilityReport::default();
    let up = |v: f64, acc: &mut f64| *acc = acc.max(v);

    for t in 0..t_len {
        let mut supplied = 0.0;
        for (g, gen) in case.generators.iter().enumerate() {
            let p = x[layout.gen(t, g)];
            supplied += p;
            up(p - gen.p_max, &mut r.gen_limits);
            up(gen.p_min - p, &mut r.gen_limits);
            if t > 0 {
                let delta = p - x[layout.gen(t - 1, g)];
                up(delta - gen.ramp_up, &mut r.ramping);
                up(-delta - gen.ramp_down, &mut r.ramping);
            }
        }
        for (e, unit) in case.ess_units.iter().enumerate() {
            let (ch, dis) = (x[layout.ch(t, e)], x[layout.dis(t, e)]);
            supplied += dis - ch;
            up(ch - unit.p_ch_max, &mut r.storage_power);
            up(-ch, &mut r.storage_power);
            up(dis - unit.p_dis_max, &mut r.storage_power);
            up(-dis, &mut r.storage_power);
        }
        up((supplied - demand.total(t)).abs(), &mut r.balance);

        if opts.line_limits {
            let mut inj = vec![0.0; case.n_b];
            for (g, gen) in case.generators.iter().enumerate() {
                inj[gen.bus] += x[layout.gen(t, g)];
            }
            for (e, unit) in case.ess_units.iter().enumerate() {
                inj[unit.bus] += x[layout.dis(t, e)] - x[layout.ch(t, e)];
            }
            for (d, load) in case.loads.iter().enumerate() {
                inj[load.bus] -= demand.p_d[(d, t)];
            }
            for (flow, line) in net.gsf.flows(&inj).iter().zip(&case.lines) {
                up(flow.abs() - line.flow_limit, &mut r.line_flow);
            }
        }
    }

    if opts.storage_energy {
        for (e, unit) in case.ess_units.iter().enumerate() {
            let mut level = unit.e_init();
            for t in 0..t_len {
                level += unit.eta_ch * x[layout.ch(t, e)] - x[layout.dis(t, e)] / unit.eta_dis;
                up(level - unit.e_max, &mut r.soc_limits);
                up(unit.e_min - level, &mut r.soc_limits);
            }
            up((level - unit.e_init()).abs(), &mut r.terminal_soc);
        }
    }
    Ok(r)
}
