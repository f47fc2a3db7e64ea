//! Case description and the TOML case-file schema.
//!
//! A case file has a top-level header plus the sections `[buses]`,
//! `[[generators]]`, `[[lines]]`, `[[loads]]` and `[[ess]]`. Bus references
//! use the numbering declared by `buses.index_base` (0 or 1) and are mapped to
//! 0-based indices on load. Unknown keys are rejected.
//!
//! ```toml
//! name = "toy"
//! base_mva = 100.0
//! slack_bus = 0
//!
//! [buses]
//! count = 2
//!
//! [[generators]]
//! bus = 0
//! p_min = 0.0
//! p_max = 50.0
//! ramp_up = 20.0
//! ramp_down = 20.0
//! cost = 10.0          # or one entry per period
//!
//! [[lines]]
//! from_bus = 0
//! to_bus = 1
//! reactance = 0.1
//! flow_limit = 100.0
//!
//! [[loads]]
//! bus = 1
//! nominal_mw = 30.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    /// Linear cost per MWh. One entry means constant over the horizon,
    /// otherwise one entry per period.
    pub cost: Vec<f64>,
}

impl GeneratorSpec {
    /// Cost coefficient at period `t` (0-based).
    pub fn cost_at(&self, t: usize) -> f64 {
        if self.cost.len() == 1 {
            self.cost[0]
        } else {
            self.cost[t]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    pub from_bus: usize,
    pub to_bus: usize,
    /// Series reactance in p.u.
    pub reactance: f64,
    /// Thermal limit in MW, applied in both directions.
    pub flow_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSpec {
    pub bus: usize,
    /// Nominal (peak) demand used by the dataset generator.
    pub nominal_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssSpec {
    pub bus: usize,
    pub p_ch_max: f64,
    pub p_dis_max: f64,
    pub eta_ch: f64,
    pub eta_dis: f64,
    pub e_min: f64,
    pub e_max: f64,
    /// Initial and terminal state of charge as a fraction of `e_max`.
    pub e_init_frac: f64,
}

impl EssSpec {
    /// Energy at the start of the horizon, which is also the terminal target.
    pub fn e_init(&self) -> f64 {
        self.e_init_frac * self.e_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCase {
    pub name: String,
    pub base_mva: f64,
    pub n_b: usize,
    pub slack_bus: usize,
    pub generators: Vec<GeneratorSpec>,
    pub lines: Vec<LineSpec>,
    pub loads: Vec<LoadSpec>,
    pub ess_units: Vec<EssSpec>,
}

impl GridCase {
    pub fn n_g(&self) -> usize {
        self.generators.len()
    }

    pub fn n_d(&self) -> usize {
        self.loads.len()
    }

    pub fn n_l(&self) -> usize {
        self.lines.len()
    }

    pub fn n_e(&self) -> usize {
        self.ess_units.len()
    }

    /// Per-period decision width `n_g + 2 n_e`.
    pub fn period_width(&self) -> usize {
        self.n_g() + 2 * self.n_e()
    }

    pub fn total_capacity(&self) -> f64 {
        self.generators.iter().map(|g| g.p_max).sum()
    }

    /// Parse a case from TOML text.
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let file: CaseFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: describe_toml_error(text, &e),
        })?;
        let case = file.into_case()?;
        case.validate()?;
        Ok(case)
    }

    /// Serialize back to the case-file schema (0-based bus numbering).
    pub fn to_toml_string(&self) -> String {
        let file = CaseFile::from_case(self);
        toml::to_string(&file).expect("case schema is always serializable")
    }

    /// Check every structural and physical invariant of the case.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if self.n_b == 0 {
            return bad("bus count must be positive".into());
        }
        if self.generators.is_empty() {
            return bad("case needs at least one generator".into());
        }
        if self.loads.is_empty() {
            return bad("case needs at least one load".into());
        }
        if !(self.base_mva > 0.0) {
            return bad(format!("base_mva must be positive, got {}", self.base_mva));
        }
        if self.slack_bus >= self.n_b {
            return bad(format!("slack_bus {} out of range", self.slack_bus));
        }
        let check_bus = |what: String, bus: usize| -> Result<()> {
            if bus >= self.n_b {
                Err(Error::Validation(format!(
                    "{what}: bus {bus} out of range [0, {})",
                    self.n_b
                )))
            } else {
                Ok(())
            }
        };
        let mut cost_len = None;
        for (i, g) in self.generators.iter().enumerate() {
            let what = format!("generators[{i}]");
            check_bus(what.clone(), g.bus)?;
            if !(g.p_min >= 0.0) {
                return bad(format!("{what}: p_min ({}) must be >= 0", g.p_min));
            }
            if !(g.p_min <= g.p_max) || !g.p_max.is_finite() {
                return bad(format!("{what}: p_min ({}) > p_max ({})", g.p_min, g.p_max));
            }
            if !(g.ramp_up >= 0.0) || !(g.ramp_down >= 0.0) {
                return bad(format!("{what}: ramp limits must be >= 0"));
            }
            if g.cost.is_empty() {
                return bad(format!("{what}: cost must have at least one entry"));
            }
            if g.cost.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
                return bad(format!("{what}: cost entries must be finite and >= 0"));
            }
            if g.cost.len() > 1 {
                match cost_len {
                    None => cost_len = Some(g.cost.len()),
                    Some(n) if n != g.cost.len() => {
                        return bad(format!(
                            "{what}: cost profile length {} differs from {n}",
                            g.cost.len()
                        ))
                    }
                    _ => {}
                }
            }
        }
        for (i, l) in self.lines.iter().enumerate() {
            let what = format!("lines[{i}]");
            check_bus(what.clone(), l.from_bus)?;
            check_bus(what.clone(), l.to_bus)?;
            if l.from_bus == l.to_bus {
                return bad(format!("{what}: from_bus equals to_bus ({})", l.from_bus));
            }
            if !(l.reactance > 0.0) {
                return bad(format!(
                    "{what}: reactance must be > 0, got {}",
                    l.reactance
                ));
            }
            if !(l.flow_limit > 0.0) {
                return bad(format!(
                    "{what}: flow_limit must be > 0, got {}",
                    l.flow_limit
                ));
            }
        }
        for (i, d) in self.loads.iter().enumerate() {
            let what = format!("loads[{i}]");
            check_bus(what.clone(), d.bus)?;
            if !(d.nominal_mw >= 0.0) {
                return bad(format!("{what}: nominal_mw must be >= 0"));
            }
        }
        for (i, e) in self.ess_units.iter().enumerate() {
            let what = format!("ess[{i}]");
            check_bus(what.clone(), e.bus)?;
            if !(e.eta_ch > 0.0 && e.eta_ch <= 1.0) || !(e.eta_dis > 0.0 && e.eta_dis <= 1.0) {
                return bad(format!("{what}: efficiencies must lie in (0, 1]"));
            }
            if !(e.e_min >= 0.0 && e.e_min < e.e_max) {
                return bad(format!(
                    "{what}: need 0 <= e_min < e_max, got {} / {}",
                    e.e_min, e.e_max
                ));
            }
            if !(e.p_ch_max >= 0.0) || !(e.p_dis_max >= 0.0) {
                return bad(format!("{what}: power limits must be >= 0"));
            }
            let e0 = e.e_init();
            if !(e0 >= e.e_min && e0 <= e.e_max) {
                return bad(format!(
                    "{what}: initial energy {e0} outside [{}, {}]",
                    e.e_min, e.e_max
                ));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form; identifies the case in manifests
    /// and checkpoints.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("case is serializable");
        hex::encode(Sha256::digest(&json))
    }
}

/// Read and validate a case file.
pub fn load_case(path: impl AsRef<Path>) -> Result<GridCase> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    GridCase::from_toml_str(&text, path)
}

fn describe_toml_error(text: &str, err: &toml::de::Error) -> String {
    match err.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("line {line}: {}", err.message())
        }
        None => err.message().to_string(),
    }
}

// On-disk schema.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    name: String,
    #[serde(default = "default_base_mva")]
    base_mva: f64,
    slack_bus: usize,
    buses: BusSection,
    #[serde(default)]
    generators: Vec<GeneratorEntry>,
    #[serde(default)]
    lines: Vec<LineEntry>,
    #[serde(default)]
    loads: Vec<LoadEntry>,
    #[serde(default)]
    ess: Vec<EssEntry>,
}

fn default_base_mva() -> f64 {
    100.0
}

fn default_e_init_frac() -> f64 {
    0.5
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusSection {
    count: usize,
    #[serde(default)]
    index_base: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum CostEntry {
    Constant(f64),
    Profile(Vec<f64>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorEntry {
    bus: usize,
    p_min: f64,
    p_max: f64,
    ramp_up: f64,
    ramp_down: f64,
    cost: CostEntry,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineEntry {
    from_bus: usize,
    to_bus: usize,
    reactance: f64,
    flow_limit: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadEntry {
    bus: usize,
    nominal_mw: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EssEntry {
    bus: usize,
    p_ch_max: f64,
    p_dis_max: f64,
    eta_ch: f64,
    eta_dis: f64,
    #[serde(default)]
    e_min: f64,
    e_max: f64,
    #[serde(default = "default_e_init_frac")]
    e_init_frac: f64,
}

impl CaseFile {
    fn into_case(self) -> Result<GridCase> {
        let base = self.buses.index_base;
        if base > 1 {
            return Err(Error::Validation(format!(
                "buses.index_base must be 0 or 1, got {base}"
            )));
        }
        let map = |what: &str, bus: usize| -> Result<usize> {
            bus.checked_sub(base).ok_or_else(|| {
                Error::Validation(format!("{what}: bus {bus} below index_base {base}"))
            })
        };
        let generators = self
            .generators
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                Ok(GeneratorSpec {
                    bus: map(&format!("generators[{i}]"), g.bus)?,
                    p_min: g.p_min,
                    p_max: g.p_max,
                    ramp_up: g.ramp_up,
                    ramp_down: g.ramp_down,
                    cost: match g.cost {
                        CostEntry::Constant(c) => vec![c],
                        CostEntry::Profile(v) => v,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let lines = self
            .lines
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                let what = format!("lines[{i}]");
                Ok(LineSpec {
                    from_bus: map(&what, l.from_bus)?,
                    to_bus: map(&what, l.to_bus)?,
                    reactance: l.reactance,
                    flow_limit: l.flow_limit,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let loads = self
            .loads
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                Ok(LoadSpec {
                    bus: map(&format!("loads[{i}]"), d.bus)?,
                    nominal_mw: d.nominal_mw,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let ess_units = self
            .ess
            .into_iter()
            .enumerate()
            .map(|(i, e)| {
                Ok(EssSpec {
                    bus: map(&format!("ess[{i}]"), e.bus)?,
                    p_ch_max: e.p_ch_max,
                    p_dis_max: e.p_dis_max,
                    eta_ch: e.eta_ch,
                    eta_dis: e.eta_dis,
                    e_min: e.e_min,
                    e_max: e.e_max,
                    e_init_frac: e.e_init_frac,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GridCase {
            name: self.name,
            base_mva: self.base_mva,
            n_b: self.buses.count,
            slack_bus: map("slack_bus", self.slack_bus)?,
            generators,
            lines,
            loads,
            ess_units,
        })
    }

    fn from_case(case: &GridCase) -> Self {
        CaseFile {
            name: case.name.clone(),
            base_mva: case.base_mva,
            slack_bus: case.slack_bus,
            buses: BusSection {
                count: case.n_b,
                index_base: 0,
            },
            generators: case
                .generators
                .iter()
                .map(|g| GeneratorEntry {
                    bus: g.bus,
                    p_min: g.p_min,
                    p_max: g.p_max,
                    ramp_up: g.ramp_up,
                    ramp_down: g.ramp_down,
                    cost: if g.cost.len() == 1 {
                        CostEntry::Constant(g.cost[0])
                    } else {
                        CostEntry::Profile(g.cost.clone())
                    },
                })
                .collect(),
            lines: case
                .lines
                .iter()
                .map(|l| LineEntry {
                    from_bus: l.from_bus,
                    to_bus: l.to_bus,
                    reactance: l.reactance,
                    flow_limit: l.flow_limit,
                })
                .collect(),
            loads: case
                .loads
                .iter()
                .map(|d| LoadEntry {
                    bus: d.bus,
                    nominal_mw: d.nominal_mw,
                })
                .collect(),
            ess: case
                .ess_units
                .iter()
                .map(|e| EssEntry {
                    bus: e.bus,
                    p_ch_max: e.p_ch_max,
                    p_dis_max: e.p_dis_max,
                    eta_ch: e.eta_ch,
                    eta_dis: e.eta_dis,
                    e_min: e.e_min,
                    e_max: e.e_max,
                    e_init_frac: e.e_init_frac,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = r#"
name = "toy"
slack_bus = 0

[buses]
count = 2

[[generators]]
bus = 0
p_min = 0.0
p_max = 50.0
ramp_up = 20.0
ramp_down = 20.0
cost = 10.0

[[lines]]
from_bus = 0
to_bus = 1
reactance = 0.1
flow_limit = 100.0

[[loads]]
bus = 1
nominal_mw = 30.0
"#;

    fn parse(text: &str) -> Result<GridCase> {
        GridCase::from_toml_str(text, Path::new("inline.toml"))
    }

    #[test]
    fn parses_minimal_case() {
        let case = parse(TOY).unwrap();
        assert_eq!(case.n_b, 2);
        assert_eq!(case.n_g(), 1);
        assert_eq!(case.n_e(), 0);
        assert_eq!(case.base_mva, 100.0);
        assert_eq!(case.generators[0].cost_at(7), 10.0);
    }

    #[test]
    fn rejects_pmin_above_pmax() {
        let text = TOY.replace("p_min = 0.0", "p_min = 60.0");
        let err = parse(&text).unwrap_err();
        assert!(
            matches!(err, Error::Validation(ref m) if m.contains("p_min")),
            "{err}"
        );
    }

    #[test]
    fn rejects_unknown_key_with_line() {
        let text = TOY.replace("ramp_up = 20.0", "ramp_up = 20.0\nwidget = 3");
        match parse(&text).unwrap_err() {
            Error::Parse { message, .. } => {
                assert!(message.contains("line"), "{message}");
                assert!(message.contains("widget"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_zero_reactance_and_self_loop() {
        let err = parse(&TOY.replace("reactance = 0.1", "reactance = 0.0")).unwrap_err();
        assert!(err.to_string().contains("reactance"));
        let err = parse(&TOY.replace("to_bus = 1", "to_bus = 0")).unwrap_err();
        assert!(err.to_string().contains("from_bus equals to_bus"));
    }

    #[test]
    fn rejects_out_of_range_bus() {
        let err = parse(&TOY.replace("bus = 1\nnominal", "bus = 5\nnominal")).unwrap_err();
        assert!(err.to_string().contains("out of range"));
    }

    #[test]
    fn one_based_numbering_is_shifted() {
        let text = TOY
            .replace("count = 2", "count = 2\nindex_base = 1")
            .replace("slack_bus = 0", "slack_bus = 1")
            .replace("bus = 0", "bus = 1")
            .replace("from_bus = 0", "from_bus = 1")
            .replace("to_bus = 1", "to_bus = 2")
            .replace("bus = 1\nnominal", "bus = 2\nnominal");
        let case = parse(&text).unwrap();
        assert_eq!(case.slack_bus, 0);
        assert_eq!(case.generators[0].bus, 0);
        assert_eq!(case.loads[0].bus, 1);
        assert_eq!((case.lines[0].from_bus, case.lines[0].to_bus), (0, 1));
    }

    #[test]
    fn toml_round_trip_preserves_case() {
        let case = parse(TOY).unwrap();
        let again = parse(&case.to_toml_string()).unwrap();
        assert_eq!(case, again);
        assert_eq!(case.fingerprint(), again.fingerprint());
    }
}
