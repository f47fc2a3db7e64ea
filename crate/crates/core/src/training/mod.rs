//! Training loops for the projection-aware surrogate and its baselines.
//!
//! * `mpa_unsup`: full-horizon projection in the loop, loss is the
//!   generation cost of the projected schedule.
//! * `mpa_sup`: full-horizon projection in the loop, squared error against
//!   exact dispatch labels.
//! * `mpp_sup`: squared error of the raw output against labels; projection
//!   only at inference.
//! * `spa_unsup`: one network shared by all hours, each hour projected on its
//!   own single-period region (no ramping, no storage energy).
//!
//! Updates are per sample (or per mini-batch when `batch_size > 1`) and
//! strictly serial, so a run is a pure function of its inputs.

mod checkpoint;
mod model;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use model::{Inference, Model};

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diff_projection::{build_sensitivity, Thresholds};
use crate::error::{Error, Result};
use crate::experiments::{parallel_map, split_indices, Label};
use crate::formulation::{cost_vector, DemandScenario};
use crate::grid::Network;
use crate::nn::{adam_step, AdamState};
use crate::solver::InteriorPointSolver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    MpaUnsup,
    MpaSup,
    MppSup,
    SpaUnsup,
}

impl TrainMode {
    pub const ALL: [TrainMode; 4] = [
        TrainMode::MpaUnsup,
        TrainMode::MpaSup,
        TrainMode::MppSup,
        TrainMode::SpaUnsup,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrainMode::MpaUnsup => "mpa_unsup",
            TrainMode::MpaSup => "mpa_sup",
            TrainMode::MppSup => "mpp_sup",
            TrainMode::SpaUnsup => "spa_unsup",
        }
    }

    pub fn is_supervised(self) -> bool {
        matches!(self, TrainMode::MpaSup | TrainMode::MppSup)
    }

    pub fn single_period(self) -> bool {
        self == TrainMode::SpaUnsup
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TrainMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown training mode `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub max_epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Train/validation/test ratios.
    pub split: [f64; 3],
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Samples per parameter update.
    pub batch_size: usize,
    /// Worker threads for validation inference. Does not change results.
    pub jobs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: TrainMode::MpaUnsup,
            max_epochs: 50,
            lr: 1e-4,
            seed: 7,
            split: [0.5, 0.3, 0.2],
            patience: 10,
            batch_size: 1,
            jobs: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, horizon: usize) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !self.mode.single_period() && horizon < 2 {
            return Err(Error::Config(format!(
                "mode {} needs a multi-period dataset, got horizon {horizon}",
                self.mode
            )));
        }
        let total: f64 = self.split.iter().sum();
        if self.split.iter().any(|r| *r < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split ratios {:?} must sum to 1",
                self.split
            )));
        }
        Ok(())
    }
}

/// Metrics of one completed epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss (generation cost for unsupervised modes).
    pub train_loss: f64,
    /// Mean generation cost of the validation schedules.
    pub val_cost: f64,
    pub val_mae_pu: Option<f64>,
    pub val_gap_pct: Option<f64>,
    /// Weakly active rows met in projection sensitivities this epoch.
    pub degenerate_rows: usize,
    pub skipped_samples: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl TrainRecord {
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(
            w,
            "epoch,train_loss,val_cost,val_mae_pu,val_gap_pct,degenerate_rows,skipped_samples"
        )?;
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for e in &self.epochs {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                e.epoch,
                e.train_loss,
                e.val_cost,
                opt(e.val_mae_pu),
                opt(e.val_gap_pct),
                e.degenerate_rows,
                e.skipped_samples
            )?;
        }
        Ok(())
    }
}

/// Scenarios with optional exact labels, aligned by index.
#[derive(Debug, Clone, Copy)]
pub struct TrainingData<'a> {
    pub net: &'a Network,
    pub scenarios: &'a [DemandScenario],
    pub labels: Option<&'a [Label]>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub model: Model,
    /// Optimizer state at the best validation epoch.
    pub adam: AdamState,
    pub record: TrainRecord,
    /// Wall-clock seconds per epoch; kept out of the record so the record is
    /// reproducible.
    pub epoch_seconds: Vec<f64>,
}

impl TrainOutcome {
    pub fn checkpoint(&self, net: &Network, config: &TrainConfig) -> Checkpoint {
        Checkpoint::new(
            net,
            &self.model,
            &self.adam,
            self.record.best_epoch,
            config.seed,
        )
    }
}

struct SampleStep {
    loss: f64,
    grads: Vec<f64>,
    degenerate: usize,
}

fn squared_error(a: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
    let n = a.len() as f64;
    let loss = a.iter().zip(b).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
    let grad = a.iter().zip(b).map(|(a, b)| 2.0 * (a - b) / n).collect();
    (loss, grad)
}

/// Loss and parameter gradient of one training sample. `hints` carries the
/// projection active sets between epochs.
fn sample_step(
    model: &Model,
    net: &Network,
    scenario: &DemandScenario,
    label: Option<&Label>,
    solver: &mut InteriorPointSolver,
    hints: &mut [Option<Vec<usize>>],
) -> Result<SampleStep> {
    let case = &net.case;
    let mode = model.mode;
    let thresholds = Thresholds::default();
    if mode == TrainMode::MppSup {
        let label = label.ok_or_else(|| Error::MissingLabels("mpp_sup needs labels".into()))?;
        let (z, cache) = model.surrogate.predict(&scenario.flatten())?;
        let (loss, grad_z) = squared_error(&z, &label.x_star);
        return Ok(SampleStep {
            loss,
            grads: model.surrogate.backward(&cache, &grad_z)?,
            degenerate: 0,
        });
    }

    let periods = if mode.single_period() {
        scenario.horizon()
    } else {
        1
    };
    let mut total = SampleStep {
        loss: 0.0,
        grads: vec![0.0; model.surrogate.params.len()],
        degenerate: 0,
    };
    for (p, hint) in hints.iter_mut().enumerate().take(periods) {
        let (sub, first_period) = if mode.single_period() {
            (scenario.period(p), p)
        } else {
            (scenario.clone(), 0)
        };
        let qp = model.region(net, &sub)?;
        let (z, cache) = model.surrogate.predict(&sub.flatten())?;
        let sol = solver.solve_with_hint(
            &crate::solver::ConvexProgram::projection(&qp, &z),
            hint.as_deref(),
        )?;
        *hint = Some(sol.tight_rows());
        let ws = build_sensitivity(&sol, &qp, thresholds)?;
        let (loss, grad_x) = match mode {
            TrainMode::MpaUnsup | TrainMode::SpaUnsup => {
                let c = cost_vector(case, &qp.layout, first_period);
                (c.iter().zip(&sol.x_star).map(|(c, x)| c * x).sum(), c)
            }
            TrainMode::MpaSup => {
                let label =
                    label.ok_or_else(|| Error::MissingLabels("mpa_sup needs labels".into()))?;
                squared_error(&sol.x_star, &label.x_star)
            }
            TrainMode::MppSup => unreachable!(),
        };
        let grad_z = ws.vjp(&grad_x)?;
        let grads = model.surrogate.backward(&cache, &grad_z)?;
        total.loss += loss;
        for (a, g) in total.grads.iter_mut().zip(grads) {
            *a += g;
        }
        total.degenerate += ws.degeneracy();
    }
    Ok(total)
}

struct Validation {
    cost: f64,
    mae: Option<f64>,
    gap: Option<f64>,
}

fn validate(
    model: &Model,
    data: &TrainingData<'_>,
    indices: &[usize],
    hints: &mut [Vec<Option<Vec<usize>>>],
    jobs: usize,
) -> Result<Validation> {
    let net = data.net;
    let work: Vec<(usize, Vec<Option<Vec<usize>>>)> =
        indices.iter().copied().zip(hints.iter().cloned()).collect();
    let results = parallel_map(&work, jobs, |_, (i, h)| {
        let mut solver = InteriorPointSolver::default();
        model.infer_with_hints(net, &data.scenarios[*i], &mut solver, Some(h))
    });
    let mut cost = 0.0;
    let mut abs_err = 0.0;
    let mut gap = 0.0;
    for ((slot, res), &i) in hints.iter_mut().zip(results).zip(indices) {
        let inf = res?;
        cost += inf.cost;
        if let Some(labels) = data.labels {
            let label = &labels[i];
            let lay = inf.layout;
            for t in 0..lay.horizon {
                for g in 0..lay.n_g {
                    abs_err += (inf.x[lay.gen(t, g)] - label.x_star[lay.gen(t, g)]).abs()
                        / net.case.base_mva;
                }
            }
            gap += (inf.cost - label.cost) / label.cost * 100.0;
        }
        *slot = inf.hints;
    }
    let k = indices.len().max(1) as f64;
    let per_sample = |v: f64| data.labels.map(|_| v / k);
    let entries = data
        .scenarios
        .first()
        .map_or(1, |s| s.horizon() * net.case.n_g()) as f64;
    Ok(Validation {
        cost: cost / k,
        mae: per_sample(abs_err).map(|v| v / entries),
        gap: per_sample(gap),
    })
}

/// Run the training loop for `config.mode`.
pub fn train(data: &TrainingData<'_>, config: &TrainConfig) -> Result<TrainOutcome> {
    let net = data.net;
    let k = data.scenarios.len();
    if k == 0 {
        return Err(Error::Validation("empty training dataset".into()));
    }
    let horizon = data.scenarios[0].horizon();
    config.validate(horizon)?;
    if data
        .scenarios
        .iter()
        .any(|s| s.horizon() != horizon || s.n_d() != net.case.n_d())
    {
        return Err(Error::Dimension(
            "scenarios differ in shape or do not match the case".into(),
        ));
    }
    if let Some(labels) = data.labels {
        if labels.len() != k {
            return Err(Error::MissingLabels(format!(
                "{} labels for {k} scenarios",
                labels.len()
            )));
        }
    } else if config.mode.is_supervised() {
        return Err(Error::MissingLabels(format!(
            "mode {} needs exact labels",
            config.mode
        )));
    }
    let [train_idx, val_idx, _] = split_indices(k, config.split, config.seed)?;
    if train_idx.is_empty() {
        return Err(Error::Config("split leaves no training samples".into()));
    }
    let val_idx = if val_idx.is_empty() {
        train_idx.clone()
    } else {
        val_idx
    };

    let input_scale = train_idx
        .iter()
        .flat_map(|&i| (0..horizon).map(move |t| data.scenarios[i].total(t)))
        .fold(0.0, f64::max)
        .max(1.0);
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Model::init(&net.case, config.mode, horizon, input_scale, &mut init_rng)?;
    let mut adam = AdamState::new(model.surrogate.params.len(), config.lr);
    let periods = if config.mode.single_period() {
        horizon
    } else {
        1
    };
    let mut train_hints: Vec<Vec<Option<Vec<usize>>>> = vec![vec![None; periods]; k];
    let mut val_hints: Vec<Vec<Option<Vec<usize>>>> = vec![vec![None; periods]; val_idx.len()];
    let mut solver = InteriorPointSolver::default();

    let mut record = TrainRecord::default();
    let mut epoch_seconds = Vec::new();
    let mut best: Option<(f64, Model, AdamState)> = None;
    let mut since_best = 0;
    for epoch in 1..=config.max_epochs {
        let started = Instant::now();
        let mut order = train_idx.clone();
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
        shuffle_rng.set_stream(epoch as u64);
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        let mut used = 0usize;
        let mut skipped = 0usize;
        let mut degenerate = 0usize;
        let mut batch_grads = vec![0.0; adam.m.len()];
        let mut in_batch = 0usize;
        for (pos, &i) in order.iter().enumerate() {
            let label = data.labels.map(|l| &l[i]);
            match sample_step(
                &model,
                net,
                &data.scenarios[i],
                label,
                &mut solver,
                &mut train_hints[i],
            ) {
                Ok(step) => {
                    loss_sum += step.loss;
                    used += 1;
                    degenerate += step.degenerate;
                    for (a, g) in batch_grads.iter_mut().zip(&step.grads) {
                        *a += g;
                    }
                    in_batch += 1;
                }
                Err(
                    e @ (Error::Infeasible(_)
                    | Error::MaxIterations(_)
                    | Error::DegenerateActiveSet(_)),
                ) => {
                    warn!("epoch {epoch}: sample {i} skipped: {e}");
                    skipped += 1;
                }
                Err(e) => return Err(e),
            }
            if in_batch > 0 && (in_batch == config.batch_size || pos + 1 == order.len()) {
                let scale = 1.0 / in_batch as f64;
                batch_grads.iter_mut().for_each(|g| *g *= scale);
                adam_step(&mut model.surrogate.params.data, &batch_grads, &mut adam)?;
                batch_grads.iter_mut().for_each(|g| *g = 0.0);
                in_batch = 0;
            }
        }
        if used == 0 {
            return Err(Error::Numerical(format!(
                "epoch {epoch}: every training sample failed"
            )));
        }

        let val = validate(&model, data, &val_idx, &mut val_hints, config.jobs)?;
        let metric = val.gap.unwrap_or(val.cost);
        record.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / used as f64,
            val_cost: val.cost,
            val_mae_pu: val.mae,
            val_gap_pct: val.gap,
            degenerate_rows: degenerate,
            skipped_samples: skipped,
        });
        epoch_seconds.push(started.elapsed().as_secs_f64());
        info!(
            "{} epoch {epoch}: loss {:.6e}, val cost {:.6e}, val gap {:?}, {:.1}s",
            config.mode,
            loss_sum / used as f64,
            val.cost,
            val.gap,
            started.elapsed().as_secs_f64()
        );

        if best.as_ref().is_none_or(|(b, _, _)| metric < *b) {
            best = Some((metric, model.clone(), adam.clone()));
            record.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                info!("early stop after epoch {epoch}");
                break;
            }
        }
    }
    let (_, model, adam) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model,
        adam,
        record,
        epoch_seconds,
    })
}

pub fn train_mpa_unsupervised(
    data: &TrainingData<'_>,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    train(
        data,
        &TrainConfig {
            mode: TrainMode::MpaUnsup,
            ..config.clone()
        },
    )
}

/// `config.mode` must be `mpa_sup` or `mpp_sup`.
pub fn train_supervised(data: &TrainingData<'_>, config: &TrainConfig) -> Result<TrainOutcome> {
    if !config.mode.is_supervised() {
        return Err(Error::Config(format!(
            "{} is not a supervised mode",
            config.mode
        )));
    }
    train(data, config)
}

pub fn train_spa(data: &TrainingData<'_>, config: &TrainConfig) -> Result<TrainOutcome> {
    train(
        data,
        &TrainConfig {
            mode: TrainMode::SpaUnsup,
            ..config.clone()
        },
    )
}
