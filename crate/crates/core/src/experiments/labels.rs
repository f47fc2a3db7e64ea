use std::path::Path;

use serde::{Deserialize, Serialize};

use super::parallel_map;
use crate::error::{Error, Result};
use crate::formulation::{cost_vector, DemandScenario, FormulationOptions, QpData};
use crate::grid::Network;
use crate::solver::{check_kkt, ConvexProgram, InteriorPointSolver, LP_REGULARIZATION};

/// Largest scaled KKT residual accepted for a label.
const KKT_CERTIFICATE: f64 = 1e-8;

/// Exact multi-period dispatch of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub cost: f64,
    pub kkt_residual: f64,
    pub x_star: Vec<f64>,
}

pub fn label_scenario(net: &Network, scenario: &DemandScenario) -> Result<Label> {
    let qp = QpData::build(net, scenario, FormulationOptions::default())?;
    let cost = cost_vector(&net.case, &qp.layout, 0);
    let prog = ConvexProgram::dispatch(&qp, &cost, LP_REGULARIZATION);
    let sol = InteriorPointSolver::default().solve(&prog, None)?;
    let kkt = check_kkt(&sol, &prog).max_scaled();
    if kkt > KKT_CERTIFICATE {
        return Err(Error::Numerical(format!(
            "dispatch KKT residual {kkt:.3e} above {KKT_CERTIFICATE:e}: {}",
            sol.diagnostic()
        )));
    }
    Ok(Label {
        cost: cost.iter().zip(&sol.x_star).map(|(c, x)| c * x).sum(),
        kkt_residual: kkt,
        x_star: sol.x_star,
    })
}

pub fn label_dataset(
    net: &Network,
    scenarios: &[DemandScenario],
    jobs: usize,
) -> Result<Vec<Label>> {
    parallel_map(scenarios, jobs, |i, s| {
        label_scenario(net, s).map_err(|e| match e {
            Error::Infeasible(_) => Error::Validation(format!("scenario {i} is infeasible")),
            other => Error::Numerical(format!("scenario {i}: {other}")),
        })
    })
    .into_iter()
    .collect()
}

/// One row per scenario: `scenario, cost, kkt_residual, x0, x1, ...`.
pub fn write_labels(path: &Path, labels: &[Label]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Output(format!("{}: {e}", path.display())))?;
    let n = labels.first().map_or(0, |l| l.x_star.len());
    let mut header = vec!["scenario".to_string(), "cost".into(), "kkt_residual".into()];
    header.extend((0..n).map(|i| format!("x{i}")));
    w.write_record(&header)
        .map_err(|e| Error::Output(e.to_string()))?;
    for (i, l) in labels.iter().enumerate() {
        let mut rec = vec![
            i.to_string(),
            l.cost.to_string(),
            l.kkt_residual.to_string(),
        ];
        rec.extend(l.x_star.iter().map(|v| v.to_string()));
        w.write_record(&rec)
            .map_err(|e| Error::Output(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: &Path) -> Result<Vec<Label>> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => parse_err(format!("{other:?}")),
    })?;
    let mut labels = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| parse_err(format!("row {}: {e}", i + 1)))
            })
            .collect::<Result<_>>()?;
        if vals.len() < 3 || vals[0] as usize != i {
            return Err(parse_err(format!("row {} is malformed", i + 1)));
        }
        labels.push(Label {
            cost: vals[1],
            kkt_residual: vals[2],
            x_star: vals[3..].to_vec(),
        });
    }
    Ok(labels)
}
