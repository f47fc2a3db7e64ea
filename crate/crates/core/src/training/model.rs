use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TrainMode;
use crate::error::{Error, Result};
use crate::formulation::{cost_vector, DecisionLayout, DemandScenario, FormulationOptions, QpData};
use crate::grid::{GridCase, Network};
use crate::nn::{MlpParams, OutputScaling, Surrogate};
use crate::solver::{ConvexProgram, InteriorPointSolver};

/// A trained surrogate together with how it is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub mode: TrainMode,
    /// Horizon of the scenarios the model was trained on.
    pub horizon: usize,
    pub surrogate: Surrogate,
}

/// Feasible schedule produced by a model for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    /// Projected schedule over the full horizon.
    pub x: Vec<f64>,
    /// Raw network output over the full horizon.
    pub raw: Vec<f64>,
    pub cost: f64,
    pub layout: DecisionLayout,
    /// Active sets of the projections, one per projected block.
    pub hints: Vec<Option<Vec<usize>>>,
}

impl Model {
    /// Periods covered by one network evaluation.
    pub fn block_horizon(&self) -> usize {
        if self.mode.single_period() {
            1
        } else {
            self.horizon
        }
    }

    pub fn init(
        case: &GridCase,
        mode: TrainMode,
        horizon: usize,
        input_scale: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let block = if mode.single_period() { 1 } else { horizon };
        let layout = DecisionLayout::new(case.n_g(), case.n_e(), block);
        let sizes = MlpParams::standard_sizes(case.n_d() * block, layout.len());
        let params = MlpParams::he_uniform(&sizes, rng)?;
        let surrogate =
            Surrogate::new(params, input_scale, OutputScaling::from_case(case, &layout))?;
        Ok(Model {
            mode,
            horizon,
            surrogate,
        })
    }

    /// Check that the network widths fit `case`.
    pub fn check_case(&self, case: &GridCase) -> Result<()> {
        let block = self.block_horizon();
        let p = &self.surrogate.params;
        if p.input_dim() != case.n_d() * block || p.output_dim() != case.period_width() * block {
            return Err(Error::Dimension(format!(
                "model widths {}→{} do not fit case `{}` at horizon {block}",
                p.input_dim(),
                p.output_dim(),
                case.name
            )));
        }
        Ok(())
    }

    /// Feasible region a block is projected onto.
    pub fn region(&self, net: &Network, block: &DemandScenario) -> Result<QpData> {
        let opts = if self.mode.single_period() {
            FormulationOptions {
                line_limits: true,
                storage_energy: false,
            }
        } else {
            FormulationOptions::default()
        };
        QpData::build(net, block, opts)
    }

    pub fn infer(
        &self,
        net: &Network,
        scenario: &DemandScenario,
        solver: &mut InteriorPointSolver,
    ) -> Result<Inference> {
        self.infer_with_hints(net, scenario, solver, None)
    }

    /// Network output followed by projection. `hints` optionally provides an
    /// active-set guess per projected block.
    pub fn infer_with_hints(
        &self,
        net: &Network,
        scenario: &DemandScenario,
        solver: &mut InteriorPointSolver,
        hints: Option<&[Option<Vec<usize>>]>,
    ) -> Result<Inference> {
        let case = &net.case;
        let horizon = scenario.horizon();
        if !self.mode.single_period() && horizon != self.horizon {
            return Err(Error::Dimension(format!(
                "model was trained at horizon {}, scenario has {horizon}",
                self.horizon
            )));
        }
        let layout = DecisionLayout::new(case.n_g(), case.n_e(), horizon);
        let blocks = if self.mode.single_period() {
            horizon
        } else {
            1
        };
        let mut x = Vec::with_capacity(layout.len());
        let mut raw = Vec::with_capacity(layout.len());
        let mut out_hints = Vec::with_capacity(blocks);
        for b in 0..blocks {
            let block = if self.mode.single_period() {
                scenario.period(b)
            } else {
                scenario.clone()
            };
            let qp = self.region(net, &block)?;
            let (z, _) = self.surrogate.predict(&block.flatten())?;
            let hint = hints.and_then(|h| h.get(b)).and_then(|h| h.as_deref());
            let sol = solver.solve_with_hint(&ConvexProgram::projection(&qp, &z), hint)?;
            out_hints.push(Some(sol.tight_rows()));
            x.extend_from_slice(&sol.x_star);
            raw.extend_from_slice(&z);
        }
        let cost = cost_vector(case, &layout, 0)
            .iter()
            .zip(&x)
            .map(|(c, x)| c * x)
            .sum();
        Ok(Inference {
            x,
            raw,
            cost,
            layout,
            hints: out_hints,
        })
    }
}
