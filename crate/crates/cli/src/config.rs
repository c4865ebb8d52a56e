//! Run configuration: a TOML file whose sections all have defaults, so an empty file is valid.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use trapnls::analysis::{
    DipoleConfig, MatchedLimitConfig, Quasi1dConfig, SeparabilityConfig, StationaryPhaseConfig, WaveOperatorConfig,
};

#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    Parse(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for randomized initial data; `--seed` overrides it.
    pub seed: Option<u64>,
    pub tensor: TensorSection,
    pub rs_stationary: RsStationaryConfig,
    pub evolution: RawEvolutionConfig,
    pub wave_operator: WaveOperatorConfig,
    pub matched_limit: MatchedLimitConfig,
    pub quasi1d: Quasi1dConfig,
    pub vortex_dipole: DipoleConfig,
    pub non_separability: SeparabilityConfig,
    pub stationary_phase: StationaryPhaseConfig,
}

/// Basis for `precompute-tensor`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TensorSection {
    pub d: usize,
    pub n_max: usize,
}

impl Default for TensorSection {
    fn default() -> Self {
        TensorSection { d: 2, n_max: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RsStationaryConfig {
    pub n: usize,
    /// 0 selects `3 n`, and at least 1.
    pub n_max: usize,
}

impl Default for RsStationaryConfig {
    fn default() -> Self {
        RsStationaryConfig { n: 1, n_max: 0 }
    }
}

/// Shared setup of the plain evolutions (`rs`, `rss`, `cnls`, `truncated`, `1d`, `xpm`).
/// Initial data is `eps * gauss(x / width) * f(y)` with `f = g_vortex`, or a random trap
/// profile on levels `<= top_level` normalized like `g_0` when `random` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawEvolutionConfig {
    pub n_max: usize,
    pub l_x: f64,
    pub n_x: usize,
    pub vortex: usize,
    pub random: bool,
    pub top_level: usize,
    pub eps: f64,
    pub width: f64,
    pub kappa: f64,
    /// Start time of the x-dependent runs; the trap-only runs always start at `tau = 0`.
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub sample_every: usize,
    /// `s`-nodes of the truncated run; 0 selects `2 n_max + 1`.
    pub m_s: usize,
    /// Sobolev order of the S-norm column.
    pub order: u32,
}

impl Default for RawEvolutionConfig {
    fn default() -> Self {
        RawEvolutionConfig {
            n_max: 3,
            l_x: 64.0 * PI,
            n_x: 256,
            vortex: 1,
            random: false,
            top_level: 2,
            eps: 0.05,
            width: 2.0,
            kappa: 1.0,
            t_start: 1.0,
            t_end: 10.0,
            dt: 0.01,
            sample_every: 10,
            m_s: 0,
            order: 2,
        }
    }
}

impl RunConfig {
    /// Reads and parses the file; a missing path means all defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))
    }

    /// Pushes the run seed into the sections that consume one.
    pub fn resolve_seed(&mut self, flag: Option<u64>) {
        if let Some(s) = flag {
            self.seed = Some(s);
        }
        if let Some(s) = self.seed {
            self.matched_limit.seed = s;
        }
    }
}
