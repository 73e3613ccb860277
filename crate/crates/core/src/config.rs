//! File formats: system, potential and measure definitions as TOML.
//!
//! * System file: `alphabet` (integer), `transitions` (row-major 0/1 list),
//!   optional `name`. The matrix round-trips bit-exactly.
//! * Potential file: `depth` plus a `[values]` table keyed by symbol-word
//!   strings; every admissible word of that depth must be present.
//! * Measure file: `P` (row-major stochastic matrix, nested arrays) and an
//!   optional `pi` stationary vector (validated when supplied, computed
//!   otherwise).

use crate::error::{Error, Result};
use crate::orbit::Potential;
use crate::pressure::MarkovMeasure;
use crate::systems::SymbolicSystem;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
pub struct SystemFile {
    pub alphabet: usize,
    pub transitions: Vec<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl SystemFile {
    pub fn from_system(system: &SymbolicSystem) -> Self {
        SystemFile {
            alphabet: system.alphabet_size(),
            transitions: system.transition_rows().concat(),
            name: system.name().map(str::to_string),
        }
    }

    pub fn into_system(self) -> Result<SymbolicSystem> {
        if self.transitions.len() != self.alphabet * self.alphabet {
            return Err(Error::Parse(format!(
                "transitions has {} entries, expected {}",
                self.transitions.len(),
                self.alphabet * self.alphabet
            )));
        }
        let rows: Vec<Vec<u8>> = self
            .transitions
            .chunks(self.alphabet)
            .map(|c| c.to_vec())
            .collect();
        let sys = SymbolicSystem::validate(&rows)?;
        Ok(match self.name {
            Some(n) => sys.with_name(n),
            None => sys,
        })
    }
}

pub fn load_system(path: &Path) -> Result<SymbolicSystem> {
    let text = std::fs::read_to_string(path)?;
    let file: SystemFile = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    file.into_system()
}

pub fn save_system(system: &SymbolicSystem, path: &Path) -> Result<()> {
    let file = SystemFile::from_system(system);
    let text = toml::to_string(&file).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct PotentialFile {
    depth: usize,
    values: toml::Table,
}

pub fn load_potential(path: &Path, system: &SymbolicSystem) -> Result<Potential> {
    let text = std::fs::read_to_string(path)?;
    let file: PotentialFile = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut pairs = Vec::with_capacity(file.values.len());
    for (word, value) in file.values {
        let v = match value {
            toml::Value::Float(f) => f,
            toml::Value::Integer(i) => i as f64,
            other => {
                return Err(Error::Parse(format!(
                    "value for word {word} must be numeric, got {other:?}"
                )))
            }
        };
        pairs.push((word, v));
    }
    Potential::from_pairs(system, file.depth, &pairs)
}

#[derive(Debug, Deserialize)]
struct MeasureFile {
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
    pi: Option<Vec<f64>>,
}

pub fn load_measure(path: &Path, system: &SymbolicSystem) -> Result<MarkovMeasure> {
    let text = std::fs::read_to_string(path)?;
    let file: MeasureFile = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    MarkovMeasure::new(system, file.p, file.pi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn system_roundtrip_bit_exact() {
        let dir = std::env::temp_dir().join(format!("shiftlab-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("system.toml");
        let sys = SymbolicSystem::golden_mean();
        save_system(&sys, &path).unwrap();
        let loaded = load_system(&path).unwrap();
        assert_eq!(loaded.transition_rows(), sys.transition_rows());
        assert_eq!(loaded.primitivity_exponent(), sys.primitivity_exponent());
        assert_eq!(loaded.name(), sys.name());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn potential_file_requires_full_table() {
        let dir = std::env::temp_dir().join(format!("shiftlab-cfg2-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let sys = SymbolicSystem::full_shift(2);

        let good = dir.join("phi.toml");
        std::fs::write(&good, "depth = 1\n[values]\n\"0\" = 0.0\n\"1\" = 1\n").unwrap();
        let phi = load_potential(&good, &sys).unwrap();
        assert_eq!(phi.depth(), 1);
        assert_eq!(phi.eval(&[1]).unwrap(), 1.0);

        let bad = dir.join("bad.toml");
        std::fs::write(&bad, "depth = 1\n[values]\n\"0\" = 0.0\n").unwrap();
        match load_potential(&bad, &sys) {
            Err(Error::MissingTableEntry { word }) => assert_eq!(word, "1"),
            other => panic!("expected MissingTableEntry, got {other:?}"),
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn measure_file_loads() {
        let dir = std::env::temp_dir().join(format!("shiftlab-cfg3-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let sys = SymbolicSystem::full_shift(2);
        let path = dir.join("mu.toml");
        std::fs::write(&path, "P = [[0.25, 0.75], [0.25, 0.75]]\n").unwrap();
        let mu = load_measure(&path, &sys).unwrap();
        assert!(mu.is_bernoulli());
        assert!((mu.stationary()[1] - 0.75).abs() < 1e-12);
        std::fs::remove_dir_all(&dir).ok();
    }
}
