use serde::{Deserialize, Serialize};

use super::{ForwardCache, MlpParams};
use crate::error::{Error, Result};
use crate::formulation::DecisionLayout;
use crate::grid::GridCase;

/// Affine map from the network's output to MW: `z = offset + scale ∘ out`.
///
/// With the offset at the middle of each device's power box and the scale at
/// its half-width, an output of order one covers the whole operating range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputScaling {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl OutputScaling {
    pub fn from_case(case: &GridCase, layout: &DecisionLayout) -> Self {
        let mut offset = Vec::with_capacity(layout.len());
        let mut scale = Vec::with_capacity(layout.len());
        for _ in 0..layout.horizon {
            let boxes = case
                .generators
                .iter()
                .map(|g| (g.p_min, g.p_max))
                .chain(case.ess_units.iter().map(|e| (0.0, e.p_ch_max)))
                .chain(case.ess_units.iter().map(|e| (0.0, e.p_dis_max)));
            for (lo, hi) in boxes {
                offset.push(0.5 * (lo + hi));
                scale.push((0.5 * (hi - lo)).max(1.0));
            }
        }
        OutputScaling { offset, scale }
    }

    pub fn identity(n: usize) -> Self {
        OutputScaling {
            offset: vec![0.0; n],
            scale: vec![1.0; n],
        }
    }
}

/// Network plus the fixed input and output normalizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    pub params: MlpParams,
    /// Inputs are divided by this constant (the largest total demand).
    pub input_scale: f64,
    pub output: OutputScaling,
}

impl Surrogate {
    pub fn new(params: MlpParams, input_scale: f64, output: OutputScaling) -> Result<Self> {
        params.validate()?;
        if !(input_scale > 0.0 && input_scale.is_finite()) {
            return Err(Error::Validation(format!(
                "input scale must be positive, got {input_scale}"
            )));
        }
        if output.offset.len() != params.output_dim() || output.scale.len() != params.output_dim() {
            return Err(Error::Dimension(
                "output scaling does not match the network width".into(),
            ));
        }
        Ok(Surrogate {
            params,
            input_scale,
            output,
        })
    }

    pub fn predict(&self, demand: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let input: Vec<f64> = demand.iter().map(|d| d / self.input_scale).collect();
        let (out, cache) = self.params.forward(&input)?;
        let z = out
            .iter()
            .zip(&self.output.offset)
            .zip(&self.output.scale)
            .map(|((o, c), s)| c + s * o)
            .collect();
        Ok((z, cache))
    }

    /// Parameter gradient of `⟨grad_z, z⟩`.
    pub fn backward(&self, cache: &ForwardCache, grad_z: &[f64]) -> Result<Vec<f64>> {
        if grad_z.len() != self.output.scale.len() {
            return Err(Error::Dimension(
                "gradient does not match the network output".into(),
            ));
        }
        let grad_out: Vec<f64> = grad_z
            .iter()
            .zip(&self.output.scale)
            .map(|(g, s)| g * s)
            .collect();
        self.params.backward(cache, &grad_out)
    }
}
