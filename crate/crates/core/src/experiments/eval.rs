use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::labels::Label;
use crate::error::{Error, Result};
use crate::formulation::{
    check_schedule, cost_vector, DecisionLayout, DemandScenario, FeasibilityReport,
    FormulationOptions,
};
use crate::grid::Network;

/// Ramp excess counted as a violation.
const RAMP_TOL: f64 = 1e-6;

/// Hours (1-based) listed in the per-hour cost table.
pub const REPORT_HOURS: [usize; 3] = [15, 16, 17];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyCost {
    /// 1-based hour of the day.
    pub hour: usize,
    pub model_cost: f64,
    pub exact_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub load_scale: f64,
    pub samples: usize,
    /// Mean absolute generation error in p.u. of the system base.
    pub mae_pu: f64,
    /// Mean relative cost excess over the exact dispatch, in percent.
    pub gap_pct: f64,
    /// Samples with at least one ramp excursion above tolerance.
    pub ramp_violations: usize,
    /// Worst residual of every constraint family across samples.
    pub max_residual: FeasibilityReport,
    /// False when the model does not track storage energy (SoC rows unchecked).
    pub storage_energy_checked: bool,
    /// Mean hourly generation cost over samples, every hour.
    pub hourly: Vec<HourlyCost>,
}

impl EvalReport {
    pub fn violations_label(&self) -> String {
        format!("{} / {}", self.ramp_violations, self.samples)
    }
}

fn ramp_violated(net: &Network, layout: &DecisionLayout, x: &[f64]) -> bool {
    (1..layout.horizon).any(|t| {
        net.case.generators.iter().enumerate().any(|(g, gen)| {
            let delta = x[layout.gen(t, g)] - x[layout.gen(t - 1, g)];
            delta > gen.ramp_up + RAMP_TOL || -delta > gen.ramp_down + RAMP_TOL
        })
    })
}

fn hourly_costs(cost: &[f64], layout: &DecisionLayout, x: &[f64]) -> Vec<f64> {
    (0..layout.horizon)
        .map(|t| {
            (0..layout.n_g)
                .map(|g| cost[layout.gen(t, g)] * x[layout.gen(t, g)])
                .sum()
        })
        .collect()
}

/// Score model schedules against exact labels on the same scenarios.
pub fn evaluate(
    net: &Network,
    model: &str,
    load_scale: f64,
    scenarios: &[DemandScenario],
    outputs: &[Vec<f64>],
    labels: &[Label],
    storage_energy: bool,
) -> Result<EvalReport> {
    if scenarios.len() != outputs.len() || outputs.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "misaligned evaluation sets: {} scenarios, {} outputs, {} labels",
            scenarios.len(),
            outputs.len(),
            labels.len()
        )));
    }
    if scenarios.is_empty() {
        return Err(Error::Validation("nothing to evaluate".into()));
    }
    let case = &net.case;
    let horizon = scenarios[0].horizon();
    let layout = DecisionLayout::new(case.n_g(), case.n_e(), horizon);
    let cost = cost_vector(case, &layout, 0);
    let opts = FormulationOptions {
        line_limits: true,
        storage_energy,
    };
    let mut abs_err = 0.0;
    let mut gap = 0.0;
    let mut violations = 0;
    let mut worst = FeasibilityReport::default();
    let mut hourly_model = vec![0.0; horizon];
    let mut hourly_exact = vec![0.0; horizon];
    for (i, ((sc, x), label)) in scenarios.iter().zip(outputs).zip(labels).enumerate() {
        if sc.horizon() != horizon || x.len() != layout.len() || label.x_star.len() != layout.len()
        {
            return Err(Error::Dimension(format!(
                "sample {i} does not match the evaluation layout"
            )));
        }
        for t in 0..horizon {
            for g in 0..layout.n_g {
                abs_err +=
                    (x[layout.gen(t, g)] - label.x_star[layout.gen(t, g)]).abs() / case.base_mva;
            }
        }
        let model_cost: f64 = cost.iter().zip(x).map(|(c, x)| c * x).sum();
        let exact_cost: f64 = cost.iter().zip(&label.x_star).map(|(c, x)| c * x).sum();
        gap += (model_cost - exact_cost) / exact_cost * 100.0;
        if ramp_violated(net, &layout, x) {
            violations += 1;
        }
        let report = check_schedule(net, sc, x, opts)?;
        worst = worst.max(&report);
        for (acc, v) in hourly_model.iter_mut().zip(hourly_costs(&cost, &layout, x)) {
            *acc += v;
        }
        for (acc, v) in hourly_exact
            .iter_mut()
            .zip(hourly_costs(&cost, &layout, &label.x_star))
        {
            *acc += v;
        }
    }
    let k = scenarios.len() as f64;
    Ok(EvalReport {
        model: model.to_string(),
        load_scale,
        samples: scenarios.len(),
        mae_pu: abs_err / (k * (horizon * layout.n_g) as f64),
        gap_pct: gap / k,
        ramp_violations: violations,
        max_residual: worst,
        storage_energy_checked: storage_energy,
        hourly: (0..horizon)
            .map(|t| HourlyCost {
                hour: t + 1,
                model_cost: hourly_model[t] / k,
                exact_cost: hourly_exact[t] / k,
            })
            .collect(),
    })
}

fn csv_err(e: csv::Error) -> Error {
    Error::Output(e.to_string())
}

/// Write the accuracy, ramp-violation, hourly-cost and residual tables plus a
/// plain-text summary into `dir`.
pub fn write_reports(dir: &Path, reports: &[EvalReport]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let open = |name: &str| csv::Writer::from_path(dir.join(name)).map_err(csv_err);

    let mut w = open("accuracy.csv")?;
    w.write_record(["model", "load_scale", "samples", "mae_pu", "opt_gap_pct"])
        .map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.model.clone(),
            format!("{:.3}", r.load_scale),
            r.samples.to_string(),
            format!("{:.6}", r.mae_pu),
            format!("{:.6}", r.gap_pct),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(dir, e))?;

    let mut w = open("ramp_violations.csv")?;
    w.write_record([
        "model",
        "load_scale",
        "violating_samples",
        "samples",
        "violations",
    ])
    .map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.model.clone(),
            format!("{:.3}", r.load_scale),
            r.ramp_violations.to_string(),
            r.samples.to_string(),
            r.violations_label(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(dir, e))?;

    let mut w = open("hourly_cost.csv")?;
    w.write_record(["model", "load_scale", "hour", "model_cost", "exact_cost"])
        .map_err(csv_err)?;
    for r in reports {
        for h in &r.hourly {
            w.write_record([
                r.model.clone(),
                format!("{:.3}", r.load_scale),
                h.hour.to_string(),
                format!("{:.2}", h.model_cost),
                format!("{:.2}", h.exact_cost),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(dir, e))?;

    let mut w = open("residuals.csv")?;
    w.write_record([
        "model",
        "load_scale",
        "balance",
        "gen_limits",
        "ramping",
        "storage_power",
        "soc_limits",
        "terminal_soc",
        "line_flow",
        "storage_energy_checked",
    ])
    .map_err(csv_err)?;
    for r in reports {
        let m = &r.max_residual;
        let mut rec = vec![r.model.clone(), format!("{:.3}", r.load_scale)];
        rec.extend(
            [
                m.balance,
                m.gen_limits,
                m.ramping,
                m.storage_power,
                m.soc_limits,
                m.terminal_soc,
                m.line_flow,
            ]
            .iter()
            .map(|v| format!("{v:.3e}")),
        );
        rec.push(r.storage_energy_checked.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(dir, e))?;

    let path = dir.join("summary.txt");
    std::fs::write(&path, summary(reports)).map_err(|e| Error::io(&path, e))
}

fn summary(reports: &[EvalReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "MAE in p.u. on the system base (100 MVA unless the case says otherwise)."
    );
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<12} {:>6} {:>10} {:>11} {:>14}",
        "model", "scale", "MAE (pu)", "gap (%)", "ramp viol."
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<12} {:>6.3} {:>10.4} {:>11.4} {:>14}",
            r.model,
            r.load_scale,
            r.mae_pu,
            r.gap_pct,
            r.violations_label()
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "mean generation cost at selected hours");
    for r in reports {
        for h in r.hourly.iter().filter(|h| REPORT_HOURS.contains(&h.hour)) {
            let _ = writeln!(
                s,
                "{:<12} {:>6.3} hour {:>2}: model {:>12.2}  exact {:>12.2}",
                r.model, r.load_scale, h.hour, h.model_cost, h.exact_cost
            );
        }
    }
    if reports.iter().any(|r| !r.storage_energy_checked) {
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "note: models without storage energy tracking are not checked against SoC limits or the terminal condition"
        );
    }
    s
}
