//! Power-system case data and the network matrices derived from it.

mod case;
mod network;

pub use case::{load_case, EssSpec, GeneratorSpec, GridCase, LineSpec, LoadSpec};
pub use network::{build_incidence, compute_gsf, GsfMatrix, IncidenceMaps};

use std::path::Path;

use crate::error::{Error, Result};

const CASE39: &str = include_str!("../../fixtures/case39.toml");
const TOY3: &str = include_str!("../../fixtures/toy3.toml");
const TOY_STORAGE: &str = include_str!("../../fixtures/toy_storage.toml");

/// Names accepted by [`builtin_case`].
pub const BUILTIN_CASES: &[&str] = &["case39", "toy3", "toy_storage"];

/// One of the bundled fixture cases.
pub fn builtin_case(name: &str) -> Result<GridCase> {
    let text = match name {
        "case39" => CASE39,
        "toy3" => TOY3,
        "toy_storage" => TOY_STORAGE,
        other => return Err(Error::Config(format!("unknown built-in case `{other}`"))),
    };
    GridCase::from_toml_str(text, Path::new(name))
}

/// Resolve a CLI-style case reference: a built-in name or a file path.
pub fn resolve_case(reference: &str) -> Result<GridCase> {
    if BUILTIN_CASES.contains(&reference) && !Path::new(reference).exists() {
        builtin_case(reference)
    } else {
        load_case(reference)
    }
}

/// Network data shared by every scenario of one case.
#[derive(Debug, Clone)]
pub struct Network {
    pub case: GridCase,
    pub gsf: GsfMatrix,
    pub maps: IncidenceMaps,
}

impl Network {
    pub fn new(case: GridCase) -> Result<Self> {
        case.validate()?;
        let gsf = compute_gsf(&case)?;
        let maps = build_incidence(&case);
        Ok(Network { case, gsf, maps })
    }
}
