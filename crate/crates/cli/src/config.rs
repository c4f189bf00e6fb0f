//! `RunConfig`: the TOML run description shared by all subcommands.

use std::path::{Path, PathBuf};

use fungen::engine::Mode;
use fungen::genfun::Catalog;
use fungen::lambda::LambdaKind;
use fungen::simulate::SimConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MarketSource {
    /// Path to a market CSV, relative paths taken from the config file.
    Csv(PathBuf),
    Simulator(SimConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum GenfunConfig {
    Entropy,
    PowerDiversity {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_p")]
        p: f64,
    },
    Quadratic,
    RankedHybrid { d1: usize, d2: usize, xi_lo: f64, xi_hi: f64 },
    Market,
}

fn default_alpha() -> f64 {
    0.6
}

fn default_p() -> f64 {
    0.8
}

impl GenfunConfig {
    pub fn catalog(&self) -> Catalog<f64> {
        match *self {
            GenfunConfig::Entropy => Catalog::Entropy,
            GenfunConfig::PowerDiversity { alpha, p } => Catalog::PowerDiversity { alpha, p },
            GenfunConfig::Quadratic => Catalog::Quadratic,
            GenfunConfig::RankedHybrid { d1, d2, xi_lo, xi_hi } => Catalog::RankedHybrid { d1, d2, xi_lo, xi_hi },
            GenfunConfig::Market => Catalog::Market,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSelection {
    #[default]
    Additive,
    Multiplicative,
    Both,
}

impl ModeSelection {
    pub fn modes(self) -> Vec<Mode> {
        match self {
            ModeSelection::Additive => vec![Mode::Additive],
            ModeSelection::Multiplicative => vec![Mode::Multiplicative],
            ModeSelection::Both => vec![Mode::Additive, Mode::Multiplicative],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub market: MarketSource,
    pub genfun: GenfunConfig,
    #[serde(default = "default_lambda")]
    pub lambda: LambdaKind,
    #[serde(default)]
    pub mode: ModeSelection,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Simulator seeds; each one is a separate run. Empty means the
    /// simulator's own seed.
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Cap of the diversity measure, `1/d` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diversity_cap: Option<f64>,
}

fn default_lambda() -> LambdaKind {
    LambdaKind::Constant { value: 1.0 }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config(e.to_string()))?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("at `{path}`: {}", e.into_inner().message().trim()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`; a relative CSV source is resolved against the config's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let MarketSource::Csv(p) = &mut cfg.market {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::Config(format!("at `{field}`: {msg}")));
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return bad("c", format!("must be finite and >= 0, got {}", self.c));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon", format!("must be finite and >= 0, got {}", self.epsilon));
        }
        if let Some(cap) = self.diversity_cap {
            if !(cap > 0.0) {
                return bad("diversity_cap", format!("must be positive, got {cap}"));
            }
        }
        if matches!(self.market, MarketSource::Csv(_)) && self.seeds.len() > 1 {
            return bad("seeds", "a CSV market has no randomness; give at most one seed".into());
        }
        self.lambda.validate().map_err(|e| CliError::Config(format!("at `lambda`: {e}")))?;
        Ok(())
    }

    /// One entry per run: the seed list, or the simulator's own seed, or
    /// `None` for a CSV source.
    pub fn run_seeds(&self) -> Vec<Option<u64>> {
        match &self.market {
            MarketSource::Csv(_) => vec![self.seeds.first().copied()],
            MarketSource::Simulator(sim) if self.seeds.is_empty() => vec![Some(sim.seed)],
            MarketSource::Simulator(_) => self.seeds.iter().map(|&s| Some(s)).collect(),
        }
    }

    /// The simulator configuration for one seed.
    pub fn sim_for(&self, seed: Option<u64>) -> Option<SimConfig> {
        match &self.market {
            MarketSource::Simulator(sim) => Some(match seed {
                Some(s) => sim.clone().with_seed(s),
                None => sim.clone(),
            }),
            MarketSource::Csv(_) => None,
        }
    }

    /// Config as sorted-key JSON, without the output location and the seed
    /// list, with the run's own seed filled in.
    pub fn canonical(&self, seed: Option<u64>) -> serde_json::Value {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.seeds = vec![];
        if let (MarketSource::Simulator(sim), Some(s)) = (&mut c.market, seed) {
            sim.seed = s;
        }
        let mut v = serde_json::to_value(&c).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output_dir");
            obj.remove("seeds");
        }
        v
    }

    /// First 12 hex digits of SHA-256 over the canonical config and seed.
    pub fn run_id(&self, seed: Option<u64>) -> String {
        let text = serde_json::to_string(&self.canonical(seed)).expect("json value serializes");
        let mut h = Sha256::new();
        h.update(text.as_bytes());
        h.update(b"\0seed=");
        h.update(seed.map(|s| s.to_string()).unwrap_or_default().as_bytes());
        hex::encode(h.finalize())[..12].to_string()
    }

    /// Hash of the config with every seed, naming the aggregate summary.
    pub fn batch_id(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))[..12].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [market.simulator]
        d = 2
        n_days = 10

        [genfun]
        name = "entropy"
    "#;

    #[test]
    fn minimal_config_defaults() {
        let c = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.lambda, LambdaKind::Constant { value: 1.0 });
        assert_eq!(c.mode, ModeSelection::Additive);
        assert_eq!(c.c, 0.0);
        assert_eq!(c.run_seeds(), vec![Some(0)]);
    }

    #[test]
    fn errors_carry_field_paths() {
        let err = RunConfig::from_toml_str(&format!("{MINIMAL}\n[lambda]\nkind = \"exp_qv\"\nscale = \"big\"\n"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("lambda"), "{err}");
        let err = RunConfig::from_toml_str(&MINIMAL.replace("n_days = 10", "n_days = 10\nvolatility = 1"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("market.simulator"), "{err}");
        let err = RunConfig::from_toml_str(&MINIMAL.replace("entropy", "banana")).unwrap_err().to_string();
        assert!(err.contains("genfun"), "{err}");
        let err = RunConfig::from_toml_str(&format!("c = -1.0\n{MINIMAL}")).unwrap_err().to_string();
        assert!(err.contains("`c`"), "{err}");
    }

    #[test]
    fn two_market_sources_rejected() {
        let text = format!("{MINIMAL}\n[market]\ncsv = \"m.csv\"\n");
        assert!(RunConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn run_id_depends_on_seed_not_output_dir() {
        let a = RunConfig::from_toml_str(MINIMAL).unwrap();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.run_id(Some(1)), b.run_id(Some(1)));
        assert_ne!(a.run_id(Some(1)), a.run_id(Some(2)));
        assert_eq!(a.run_id(Some(1)).len(), 12);
        b.c = 0.5;
        assert_ne!(a.run_id(Some(1)), b.run_id(Some(1)));
    }
}
