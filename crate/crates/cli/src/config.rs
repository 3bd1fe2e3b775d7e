//! Run configuration: JSON file, command-line flags and built-in defaults.
//!
//! Precedence is config file, then flags, then defaults. Every config key is
//! optional; unknown keys are rejected.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use besov_core::grid::{DomainSpec, PotentialSpec};
use besov_core::lab::{DEFAULT_COUNT, DEFAULT_SEED};
use besov_core::paraproduct::HolderTuple;
use besov_core::Exponent;
use serde::{Deserialize, Serialize};

pub const DEFAULT_OUT: &str = "besov-out";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub seed: Option<u64>,
    pub count: Option<usize>,
}

/// Heat times are `2^k / λ_1` for `k` in `k_min..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum GradientConfig {
    Block { alpha: f64 },
    Lowpass { alpha: f64 },
    Heat { k_min: i32, k_max: i32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub k_min: i32,
    pub k_max: i32,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceConfig {
    pub potential: PotentialSpec,
    pub s: f64,
    pub p: Exponent,
    pub q: Exponent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeibnizConfig {
    pub length: f64,
    pub resolutions: Vec<usize>,
    pub cutoff_j: i32,
}

/// The on-disk configuration. Absent keys fall back to flags or defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: Option<DomainSpec>,
    /// Restricts `all` to these selectors, in registry order.
    pub experiments: Option<Vec<String>>,
    pub ensemble: Option<EnsembleConfig>,
    pub out: Option<PathBuf>,
    pub s: Option<Vec<f64>>,
    pub q: Option<Exponent>,
    pub p_tuple: Option<[Exponent; 5]>,
    pub p: Option<Vec<Exponent>>,
    pub alpha: Option<Vec<f64>>,
    pub samples: Option<usize>,
    pub blocks: Option<Vec<i32>>,
    pub probes: Option<usize>,
    pub gradient: Option<GradientConfig>,
    pub chain: Option<ChainConfig>,
    pub equivalence: Option<EquivalenceConfig>,
    pub leibniz: Option<LeibnizConfig>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| anyhow::anyhow!("config error: {e}"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("config error: cannot read {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Values supplied on the command line.
#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Fully resolved parameters for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub domain: DomainSpec,
    pub experiments: Option<Vec<String>>,
    pub seed: u64,
    pub count: usize,
    pub out: PathBuf,
    pub s: Vec<f64>,
    pub q: Exponent,
    pub p_tuple: HolderTuple,
    pub p: Vec<Exponent>,
    pub alpha: Vec<f64>,
    pub samples: usize,
    pub blocks: Option<Vec<i32>>,
    pub probes: usize,
    pub gradient: GradientConfig,
    pub chain: ChainConfig,
    pub equivalence: EquivalenceConfig,
    pub leibniz: LeibnizConfig,
}

fn key_error<T>(key: &str, e: impl std::fmt::Display) -> Result<T> {
    bail!("config error: key `{key}`: {e}")
}

impl Settings {
    pub fn resolve(config: &RunConfig, flags: &Flags) -> Result<Self> {
        let ens = config.ensemble.clone().unwrap_or_default();
        let domain = config
            .domain
            .clone()
            .unwrap_or_else(|| DomainSpec::interval(PI, 127));
        if let Err(e) = domain.validate() {
            return key_error("domain", e);
        }
        let tuple = config.p_tuple.unwrap_or([
            Exponent::ONE,
            Exponent::TWO,
            Exponent::TWO,
            Exponent::TWO,
            Exponent::TWO,
        ]);
        let p_tuple = match HolderTuple::new(tuple[0], tuple[1], tuple[2], tuple[3], tuple[4]) {
            Ok(t) => t,
            Err(e) => return key_error("p_tuple", e),
        };
        let settings = Settings {
            domain,
            experiments: config.experiments.clone(),
            seed: ens.seed.or(flags.seed).unwrap_or(DEFAULT_SEED),
            count: ens.count.unwrap_or(DEFAULT_COUNT),
            out: config
                .out
                .clone()
                .or_else(|| flags.out.clone())
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            s: config
                .s
                .clone()
                .unwrap_or_else(|| vec![0.5, 1.0, 1.5, 2.5, 3.5]),
            q: config.q.unwrap_or(Exponent::TWO),
            p_tuple,
            p: config
                .p
                .clone()
                .unwrap_or_else(|| vec![Exponent::ONE, Exponent::TWO, Exponent::INFINITY]),
            alpha: config.alpha.clone().unwrap_or_else(|| vec![0.0, 1.0]),
            samples: config.samples.unwrap_or(10_000),
            blocks: config.blocks.clone(),
            probes: config.probes.unwrap_or(1000),
            gradient: config.gradient.clone().unwrap_or(GradientConfig::Heat {
                k_min: -12,
                k_max: 4,
            }),
            chain: config.chain.clone().unwrap_or(ChainConfig {
                k_min: -6,
                k_max: 2,
                epsilon: 0.25,
            }),
            equivalence: config.equivalence.clone().unwrap_or(EquivalenceConfig {
                potential: PotentialSpec::well(0.5),
                s: 0.5,
                p: Exponent::TWO,
                q: Exponent::TWO,
            }),
            leibniz: config.leibniz.clone().unwrap_or(LeibnizConfig {
                length: PI,
                resolutions: vec![31, 63, 127, 255],
                cutoff_j: 2,
            }),
        };
        settings.check()?;
        Ok(settings)
    }

    fn check(&self) -> Result<()> {
        if self.count == 0 {
            return key_error("ensemble.count", "must be at least 1");
        }
        if self.s.iter().any(|s| !s.is_finite()) {
            return key_error("s", "regularities must be finite");
        }
        if self.alpha.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return key_error("alpha", "powers must be finite and >= 0");
        }
        if let Some(bad) = self
            .p
            .iter()
            .find(|p| ![1.0, 2.0, f64::INFINITY].contains(&p.value()))
        {
            return key_error(
                "p",
                format!("operator norms support p in {{1, 2, inf}}, got {bad}"),
            );
        }
        if self.samples == 0 {
            return key_error("samples", "must be at least 1");
        }
        if let GradientConfig::Heat { k_min, k_max } = self.gradient {
            if k_min > k_max {
                return key_error("gradient", "k_min exceeds k_max");
            }
        }
        if self.chain.k_min > self.chain.k_max {
            return key_error("chain", "k_min exceeds k_max");
        }
        if !(self.chain.epsilon > 0.0) {
            return key_error("chain.epsilon", "must be positive");
        }
        if !self.equivalence.potential.amplitude.is_finite() || !self.equivalence.s.is_finite() {
            return key_error("equivalence", "potential amplitude and s must be finite");
        }
        if self.leibniz.resolutions.iter().any(|n| *n < 3) || !(self.leibniz.length > 0.0) {
            return key_error("leibniz", "resolutions must be >= 3 and length positive");
        }
        Ok(())
    }
}
