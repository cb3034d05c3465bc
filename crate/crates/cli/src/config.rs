use std::path::{Path, PathBuf};

use dsii_core::dbar::SolverConfig;
use dsii_core::field::gaussian;
use dsii_core::reference::StepConfig;
use dsii_core::{Complex64, Error, Field, GridSpec, Result, Space};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n: 128, l: 16.0 }
    }
}

/// Initial data: a named family or a DSF1 file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    TwoBump {
        amplitudes: [f64; 2],
        width: f64,
        centers: [[f64; 2]; 2],
    },
    File {
        path: PathBuf,
    },
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec::Gaussian { amplitude: 1.0, width: 1.0, center: [0.0, 0.0] }
    }
}

/// Parameters read by individual subcommands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskParams {
    pub t: f64,
    pub tlist: Vec<f64>,
    pub z: [f64; 2],
    pub kladder: Vec<f64>,
    pub n: usize,
    pub exponents: Option<Vec<String>>,
    pub samples: usize,
    pub quick: bool,
    pub telemetry: bool,
}

impl Default for TaskParams {
    fn default() -> Self {
        TaskParams {
            t: 0.25,
            tlist: vec![1.0, 2.0, 4.0],
            z: [0.0, 0.0],
            kladder: vec![8.0, 12.0, 16.0, 24.0, 32.0],
            n: 1,
            exponents: None,
            samples: 1_000_000,
            quick: false,
            telemetry: false,
        }
    }
}

fn default_seed() -> u64 {
    7
}

/// Everything a run depends on. The output directory is read but never
/// echoed, so moving a run does not change its hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub data: DataSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub step: StepConfig,
    #[serde(default)]
    pub task: TaskParams,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            grid: GridConfig::default(),
            data: DataSpec::default(),
            solver: SolverConfig::default(),
            step: StepConfig::default(),
            task: TaskParams::default(),
            seed: default_seed(),
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        GridSpec::new(self.grid.n, self.grid.l)?;
        self.solver.validate()?;
        self.step.validate()?;
        Ok(())
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.n, self.grid.l)
    }

    /// Builds the initial data. A file overrides the configured grid.
    pub fn field(&self) -> Result<Field> {
        let c = |p: [f64; 2]| Complex64::new(p[0], p[1]);
        match &self.data {
            DataSpec::Gaussian { amplitude, width, center } => {
                Ok(Field::from_fn(self.grid()?, Space::Z, gaussian(*amplitude, *width, c(*center))))
            }
            DataSpec::TwoBump { amplitudes, width, centers } => {
                let a = gaussian(amplitudes[0], *width, c(centers[0]));
                let b = gaussian(amplitudes[1], *width, c(centers[1]));
                Ok(Field::from_fn(self.grid()?, Space::Z, |z| a(z) + b(z)))
            }
            DataSpec::File { path } => dsii_core::io::load(path),
        }
    }
}

/// Parses `"1,2,4"`.
pub fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::InvalidConfig(format!("bad {what} entry {v:?}"))))
        .collect()
}

/// Parses `1e6` or `1000000` as a count.
pub fn parse_count(s: &str) -> Result<usize> {
    let v: f64 = s.trim().parse().map_err(|_| Error::InvalidConfig(format!("bad count {s:?}")))?;
    if !(v >= 1.0 && v.fract() == 0.0 && v <= 1e12) {
        return Err(Error::InvalidConfig(format!("count {s:?} must be a positive integer")));
    }
    Ok(v as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_hash_ignores_out() {
        let a = ExperimentConfig::default();
        let back: ExperimentConfig = serde_json::from_str(&a.canonical_json()).unwrap();
        assert_eq!(back, a);
        let b = ExperimentConfig { out: Some("elsewhere".into()), ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig { seed: 8, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"grid":{"n":64,"L":10},"data":{"family":"gaussian","amplitude":0.5,"width":1}}"#)
                .unwrap();
        assert_eq!(cfg.grid.n, 64);
        assert_eq!(cfg.task, TaskParams::default());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"grdi":{}}"#).is_err());
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_list("1, 2,4", "t").unwrap(), vec![1.0, 2.0, 4.0]);
        assert!(parse_list("1,x", "t").is_err());
        assert_eq!(parse_count("1e6").unwrap(), 1_000_000);
        assert!(parse_count("0.5").is_err());
    }
}
