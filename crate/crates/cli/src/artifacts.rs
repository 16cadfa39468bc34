use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use qew::qstate::{isotropic_state, random_density_matrix, werner_state, DensityMatrix};
use qew::railsim::{RailEnsemble, RailState};

use crate::{read_file, CliError, Result, TOOL, VERSION};

/// Where a state comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    Werner { f: f64 },
    Isotropic { g: f64 },
    Bell,
    /// Ginibre state; rank defaults to d².
    Random { seed: u64, rank: Option<usize> },
    File(PathBuf),
}

impl StateSpec {
    pub fn label(&self) -> String {
        match self {
            StateSpec::Werner { f } => format!("werner f={f}"),
            StateSpec::Isotropic { g } => format!("isotropic g={g}"),
            StateSpec::Bell => "bell".into(),
            StateSpec::Random { seed, rank } => match rank {
                Some(r) => format!("random seed={seed} rank={r}"),
                None => format!("random seed={seed}"),
            },
            StateSpec::File(p) => format!("file {}", p.display()),
        }
    }
}

/// A state as stored on disk: a density matrix or a pure rail amplitude.
#[derive(Debug, Clone, PartialEq)]
pub enum StateArtifact {
    Density(DensityMatrix),
    Rail(RailState),
}

impl StateArtifact {
    pub fn build(d: usize, spec: &StateSpec) -> Result<Self> {
        Ok(match spec {
            StateSpec::Werner { f } => StateArtifact::Density(werner_state(d, *f)?),
            StateSpec::Isotropic { g } => StateArtifact::Density(isotropic_state(d, *g)?),
            StateSpec::Bell => StateArtifact::Rail(RailState::bell(d)?),
            StateSpec::Random { seed, rank } => {
                StateArtifact::Density(random_density_matrix(d, rank.unwrap_or(d * d), *seed)?)
            }
            StateSpec::File(path) => {
                let state = load_state(path)?;
                if state.d() != d {
                    return Err(CliError::Usage(format!(
                        "{}: state has d = {} but d = {d} was requested",
                        path.display(),
                        state.d()
                    )));
                }
                state
            }
        })
    }

    pub fn d(&self) -> usize {
        match self {
            StateArtifact::Density(r) => r.d(),
            StateArtifact::Rail(s) => s.d(),
        }
    }

    pub fn to_ensemble(&self) -> Result<RailEnsemble> {
        Ok(match self {
            StateArtifact::Density(r) => RailEnsemble::from_density_matrix(r)?,
            StateArtifact::Rail(s) => s.clone().into(),
        })
    }

    /// The core JSON of the state with a provenance block added.
    pub fn to_json(&self, provenance: &Provenance) -> Result<String> {
        let core = match self {
            StateArtifact::Density(r) => r.to_json()?,
            StateArtifact::Rail(s) => s.to_json()?,
        };
        with_provenance(&core, provenance)
    }
}

/// Reads a state file, telling the two formats apart by their `matrix` or `phi` key.
pub fn load_state(path: &Path) -> Result<StateArtifact> {
    let text = read_file(path)?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let with_path = |e: qew::Error| CliError::Usage(format!("{}: {e}", path.display()));
    if value.get("phi").is_some() {
        RailState::from_json(&text).map(StateArtifact::Rail).map_err(with_path)
    } else if value.get("matrix").is_some() {
        DensityMatrix::from_json(&text).map(StateArtifact::Density).map_err(with_path)
    } else {
        Err(CliError::Usage(format!(
            "{}: not a state file (expected a \"matrix\" or \"phi\" field)",
            path.display()
        )))
    }
}

/// Tool identity, randomness and input digests behind an artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots_per_turn: Option<u64>,
    /// SHA-256 of each input file, keyed by role.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub inputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Provenance {
    pub fn new(command: &str) -> Self {
        Provenance {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            seed: None,
            shots_per_turn: None,
            inputs: BTreeMap::new(),
            detail: None,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Appends `"provenance"` to a JSON object produced by the core writer,
/// keeping its number formatting intact.
pub(crate) fn with_provenance(core_json: &str, provenance: &Provenance) -> Result<String> {
    let body = core_json.trim_end();
    let inner = body
        .strip_suffix('}')
        .ok_or_else(|| qew::Error::Numerical("artifact is not a JSON object".into()))?
        .trim_end();
    let prov = serde_json::to_string_pretty(provenance)
        .map_err(|e| qew::Error::Numerical(e.to_string()))?
        .replace('\n', "\n  ");
    Ok(format!("{inner},\n  \"provenance\": {prov}\n}}\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provenance_is_appended_as_valid_json() {
        let rho = werner_state(2, -0.5).unwrap();
        let mut p = Provenance::new("state");
        p.seed = Some(3);
        p.inputs.insert("state".into(), sha256_hex(b"abc"));
        let text = StateArtifact::Density(rho.clone()).to_json(&p).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["provenance"]["seed"], 3);
        assert_eq!(v["provenance"]["tool"], "qew");
        assert_eq!(DensityMatrix::from_json(&text).unwrap(), rho);
    }

    #[test]
    fn sha256_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn build_states() {
        assert!(matches!(StateArtifact::build(3, &StateSpec::Bell).unwrap(), StateArtifact::Rail(_)));
        assert!(StateArtifact::build(3, &StateSpec::Werner { f: 1.5 }).is_err());
        let r = StateArtifact::build(2, &StateSpec::Random { seed: 1, rank: Some(2) }).unwrap();
        assert_eq!(r.to_ensemble().unwrap().components().len(), 2);
        assert_eq!(StateSpec::Werner { f: -0.8 }.label(), "werner f=-0.8");
    }
}
