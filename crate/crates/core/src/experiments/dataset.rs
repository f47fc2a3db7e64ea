use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use log::{info, warn};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::labels::{label_scenario, Label};
use super::parallel_map;
use crate::error::{Error, Result};
use crate::formulation::DemandScenario;
use crate::grid::Network;

/// Hourly multipliers of the nominal load: overnight trough, morning ramp,
/// midday plateau and an evening peak. The steep morning and evening ramps
/// are deliberate.
const DIURNAL: [f64; 24] = [
    0.62, 0.58, 0.56, 0.55, 0.56, 0.60, 0.70, 0.80, 0.88, 0.92, 0.90, 0.87, 0.85, 0.84, 0.85, 0.88,
    0.93, 0.98, 1.00, 0.97, 0.90, 0.80, 0.72, 0.66,
];

const MAX_TRIES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub k: usize,
    pub horizon: usize,
    /// Half-width of the uniform multiplicative noise per load and hour.
    pub noise: f64,
    pub load_scale: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            k: 500,
            horizon: 24,
            noise: 0.1,
            load_scale: 1.0,
            seed: 7,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Validation(
                "dataset needs at least one sample".into(),
            ));
        }
        if self.horizon == 0 {
            return Err(Error::Validation("horizon must be positive".into()));
        }
        if !(self.load_scale > 0.0 && self.load_scale.is_finite()) {
            return Err(Error::Validation(format!(
                "load scale must be positive, got {}",
                self.load_scale
            )));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(Error::Validation(format!(
                "noise amplitude must be in [0, 1), got {}",
                self.noise
            )));
        }
        Ok(())
    }
}

/// Base multipliers for a horizon of `horizon` hours, sampled from the daily
/// curve by linear interpolation when `horizon != 24`.
pub fn base_load_shape(horizon: usize) -> Vec<f64> {
    if horizon == DIURNAL.len() {
        return DIURNAL.to_vec();
    }
    (0..horizon)
        .map(|t| {
            let pos = t as f64 * 24.0 / horizon as f64;
            let i = pos.floor() as usize % 24;
            let frac = pos - pos.floor();
            DIURNAL[i] * (1.0 - frac) + DIURNAL[(i + 1) % 24] * frac
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub spec: DatasetSpec,
    pub case_name: String,
    pub case_fingerprint: String,
    pub n_d: usize,
    /// Number of draws rejected as infeasible.
    pub resampled: usize,
    pub demand_sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub scenarios: Vec<DemandScenario>,
}

fn draw(
    net: &Network,
    spec: &DatasetSpec,
    shape: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<DemandScenario> {
    let case = &net.case;
    let mut pd = DMatrix::zeros(case.n_d(), spec.horizon);
    for t in 0..spec.horizon {
        for (i, load) in case.loads.iter().enumerate() {
            let noise = if spec.noise > 0.0 {
                1.0 + rng.random_range(-spec.noise..spec.noise)
            } else {
                1.0
            };
            pd[(i, t)] = load.nominal_mw * shape[t] * noise * spec.load_scale;
        }
    }
    DemandScenario::new(pd)
}

/// Draw `spec.k` scenarios and solve each one exactly. Sample `i` uses its
/// own random stream, so datasets at different load scales stay aligned.
/// Infeasible draws are redrawn up to ten times.
pub fn generate_dataset(
    spec: &DatasetSpec,
    net: &Network,
    jobs: usize,
) -> Result<(Dataset, Vec<Label>)> {
    spec.validate()?;
    let shape = base_load_shape(spec.horizon);
    let indices: Vec<usize> = (0..spec.k).collect();
    let results = parallel_map(
        &indices,
        jobs,
        |_, &i| -> Result<(DemandScenario, Label, usize)> {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            for attempt in 0..MAX_TRIES {
                let scenario = draw(net, spec, &shape, &mut rng)?;
                match label_scenario(net, &scenario) {
                    Ok(label) => return Ok((scenario, label, attempt)),
                    Err(Error::Infeasible(_)) => {
                        warn!("sample {i}: draw {attempt} infeasible, redrawing")
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(Error::Validation(format!(
                "sample {i}: no feasible demand draw in {MAX_TRIES} tries at load scale {}",
                spec.load_scale
            )))
        },
    );
    let mut scenarios = Vec::with_capacity(spec.k);
    let mut labels = Vec::with_capacity(spec.k);
    let mut resampled = 0;
    for r in results {
        let (s, l, tries) = r?;
        scenarios.push(s);
        labels.push(l);
        resampled += tries;
    }
    let mut dataset = Dataset {
        manifest: DatasetManifest {
            format_version: 1,
            spec: spec.clone(),
            case_name: net.case.name.clone(),
            case_fingerprint: net.case.fingerprint(),
            n_d: net.case.n_d(),
            resampled,
            demand_sha256: String::new(),
        },
        scenarios,
    };
    dataset.manifest.demand_sha256 = hex::encode(Sha256::digest(dataset.demand_csv(net)?));
    info!(
        "generated {} scenarios at scale {} ({} redraws)",
        spec.k, spec.load_scale, resampled
    );
    Ok((dataset, labels))
}

#[derive(Debug, Serialize, Deserialize)]
struct DemandRow {
    scenario: usize,
    hour: usize,
    load: usize,
    bus: usize,
    demand_mw: f64,
}

impl Dataset {
    pub fn horizon(&self) -> usize {
        self.manifest.spec.horizon
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    /// Check that the dataset was generated for `net`.
    pub fn check_case(&self, net: &Network) -> Result<()> {
        if self.manifest.case_fingerprint != net.case.fingerprint() {
            return Err(Error::Config(format!(
                "dataset was generated for case `{}` with a different fingerprint",
                self.manifest.case_name
            )));
        }
        Ok(())
    }

    fn demand_csv(&self, net: &Network) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for (s, sc) in self.scenarios.iter().enumerate() {
            for t in 0..sc.horizon() {
                for (l, load) in net.case.loads.iter().enumerate() {
                    w.serialize(DemandRow {
                        scenario: s,
                        hour: t,
                        load: l,
                        bus: load.bus,
                        demand_mw: sc.p_d[(l, t)],
                    })
                    .map_err(|e| Error::Output(e.to_string()))?;
                }
            }
        }
        w.into_inner().map_err(|e| Error::Output(e.to_string()))
    }

    /// Write `demand.csv` and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path, net: &Network) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let bytes = self.demand_csv(net)?;
        let path = dir.join("demand.csv");
        std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        let mut manifest = self.manifest.clone();
        manifest.demand_sha256 = hex::encode(Sha256::digest(&bytes));
        let path = dir.join("manifest.json");
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut out, &manifest)
            .map_err(|e| Error::Output(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: DatasetManifest =
            serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
                path: path.clone(),
                message: e.to_string(),
            })?;
        let path = dir.join("demand.csv");
        let mut bytes = Vec::new();
        File::open(&path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(&path, e))?;
        if hex::encode(Sha256::digest(&bytes)) != manifest.demand_sha256 {
            return Err(Error::Validation(format!(
                "{} does not match its manifest hash",
                path.display()
            )));
        }
        let (k, t_len, n_d) = (manifest.spec.k, manifest.spec.horizon, manifest.n_d);
        let mut mats = vec![DMatrix::zeros(n_d, t_len); k];
        let mut seen = 0usize;
        for row in csv::Reader::from_reader(bytes.as_slice()).deserialize::<DemandRow>() {
            let row = row.map_err(|e| Error::Parse {
                path: path.clone(),
                message: e.to_string(),
            })?;
            if row.scenario >= k || row.hour >= t_len || row.load >= n_d {
                return Err(Error::Parse {
                    path: path.clone(),
                    message: format!("row index out of range: {row:?}"),
                });
            }
            mats[row.scenario][(row.load, row.hour)] = row.demand_mw;
            seen += 1;
        }
        if seen != k * t_len * n_d {
            return Err(Error::Parse {
                path,
                message: format!("expected {} rows, found {seen}", k * t_len * n_d),
            });
        }
        let scenarios = mats
            .into_iter()
            .map(DemandScenario::new)
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            manifest,
            scenarios,
        })
    }
}

/// Seeded shuffle split into train/validation/test index sets.
pub fn split_indices(k: usize, ratios: [f64; 3], seed: u64) -> Result<[Vec<usize>; 3]> {
    let total: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| *r < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios {ratios:?} must be nonnegative and sum to 1"
        )));
    }
    let mut idx: Vec<usize> = (0..k).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (ratios[0] * k as f64).round() as usize;
    let n_val = ((ratios[1] * k as f64).round() as usize).min(k - n_train);
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    Ok([idx, val, test])
}
