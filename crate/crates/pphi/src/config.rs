//! Run configuration, read from JSON.

use std::fmt;
use std::path::{Path, PathBuf};

use pphi_core::ensemble::PotentialSpec;
use pphi_core::geometry::{Quadrature, SupportGrid, SupportSpec, Weight, WeightedGeometry};
use pphi_core::sampler::ChainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A problem with the configuration or the command line. Maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    FubiniStudy,
    FlatOnDisk,
    /// `φ = ln(1+|z|²) + Σ c_j (2u−1)^j`.
    Radial { coeffs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NuSpec {
    /// Equispaced nodes on the unit circle; by default enough to make `|s|^{2k}` exact.
    Circle {
        #[serde(default)]
        nodes: Option<usize>,
    },
    /// The `ω_h` rule with `n` rings (default `N + 2`).
    Curvature {
        #[serde(default)]
        n: Option<usize>,
    },
    SphereGrid { n_theta: usize, n_phi: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SupportConfig {
    Full,
    Circle,
    DiskRadius { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub weight: WeightSpec,
    pub nu: NuSpec,
    pub support: SupportConfig,
    /// Points in the support grid used for `sup_K` and the equilibrium solver.
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    /// Rings in the `ω_h` quadrature (smooth weights only).
    #[serde(default = "default_curvature_nodes")]
    pub curvature_nodes: usize,
    #[serde(default)]
    pub green_constant: Option<f64>,
}

fn default_grid_size() -> usize {
    1024
}

fn default_curvature_nodes() -> usize {
    64
}

impl GeometrySpec {
    pub fn kac_hammersley() -> Self {
        Self {
            weight: WeightSpec::FlatOnDisk,
            nu: NuSpec::Circle { nodes: None },
            support: SupportConfig::Circle,
            grid_size: default_grid_size(),
            curvature_nodes: default_curvature_nodes(),
            green_constant: None,
        }
    }

    pub fn fubini_study() -> Self {
        Self {
            weight: WeightSpec::FubiniStudy,
            nu: NuSpec::Curvature { n: None },
            support: SupportConfig::Full,
            grid_size: default_grid_size(),
            curvature_nodes: default_curvature_nodes(),
            green_constant: None,
        }
    }

    pub fn weight(&self) -> Weight {
        match &self.weight {
            WeightSpec::FubiniStudy => Weight::FubiniStudy,
            WeightSpec::FlatOnDisk => Weight::FlatOnDisk,
            WeightSpec::Radial { coeffs } => Weight::Radial(coeffs.clone()),
        }
    }

    pub fn support_grid(&self) -> anyhow::Result<SupportGrid> {
        let spec = match self.support {
            SupportConfig::Full => SupportSpec::Full,
            SupportConfig::Circle => SupportSpec::Circle,
            SupportConfig::DiskRadius { radius } => SupportSpec::DiskRadius(radius),
        };
        SupportGrid::new(spec, self.grid_size).map_err(|e| config_error(e.to_string()))
    }

    /// The geometry used for degree `n` sections with a potential of degree `k`.
    pub fn build(&self, n: usize, k: usize) -> anyhow::Result<WeightedGeometry> {
        let weight = self.weight();
        let cfg = |e: pphi_core::Error| config_error(e.to_string());
        let nu = match self.nu {
            NuSpec::Circle { nodes } => Quadrature::circle(nodes.unwrap_or(WeightedGeometry::kh_nodes(n, k))),
            NuSpec::Curvature { n: rings } => Quadrature::curvature(&weight, rings.unwrap_or(n + 2)),
            NuSpec::SphereGrid { n_theta, n_phi } => Quadrature::sphere_grid(n_theta, n_phi),
        }
        .map_err(cfg)?;
        // a singular ω_h lives on the circle, where ν already has the right resolution
        let curvature_n = match weight {
            Weight::FlatOnDisk => nu.len().max(self.curvature_nodes),
            _ => self.curvature_nodes,
        };
        let geom = WeightedGeometry::new(weight, nu, self.support_grid()?, curvature_n).map_err(cfg)?;
        Ok(match self.green_constant {
            Some(c) => geom.with_green_constant(c),
            None => geom,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    /// `c_1..c_k` with `c_k = 1`.
    pub c: Vec<f64>,
    #[serde(default)]
    pub kinetic: bool,
}

impl PotentialConfig {
    pub fn gaussian() -> Self {
        Self { c: vec![1.0], kinetic: false }
    }

    pub fn quartic(kinetic: bool) -> Self {
        Self { c: vec![0.0, 1.0], kinetic }
    }

    pub fn spec(&self) -> anyhow::Result<PotentialSpec> {
        PotentialSpec::new(self.c.clone(), self.kinetic).map_err(|e| config_error(e.to_string()))
    }

    /// `P(x) = x` without the kinetic term: the free field, sampled exactly.
    pub fn is_gaussian(&self) -> bool {
        self.c == [1.0] && !self.kinetic
    }
}

/// Sampler settings; the seed lives in [`RunConfig`]. Without `thinning`, the
/// chains are thinned to give `samples` draws in total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSettings {
    pub n_steps: usize,
    pub burn_in: usize,
    pub n_chains: usize,
    pub target_accept: f64,
    #[serde(default)]
    pub thinning: Option<usize>,
}

impl Default for ChainSettings {
    fn default() -> Self {
        let c = ChainConfig::default();
        Self { n_steps: c.n_steps, burn_in: c.burn_in, n_chains: c.n_chains, target_accept: c.target_accept, thinning: None }
    }
}

impl ChainSettings {
    pub fn chain_config(&self, seed: u64, samples: usize) -> anyhow::Result<ChainConfig> {
        let per_chain = samples.div_ceil(self.n_chains.max(1)).max(1);
        let thinning = self.thinning.unwrap_or((self.n_steps.saturating_sub(self.burn_in) / per_chain).max(1));
        let c = ChainConfig {
            n_steps: self.n_steps,
            burn_in: self.burn_in,
            n_chains: self.n_chains,
            target_accept: self.target_accept,
            seed,
            thinning,
        };
        c.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    KhDemo,
    Eqdist,
    JpcCheck,
    GammaCheck,
    BernsteinCheck,
    Equilibrium,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "GeometrySpec::kac_hammersley")]
    pub geometry: GeometrySpec,
    #[serde(default = "PotentialConfig::gaussian")]
    pub potential: PotentialConfig,
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub chain: ChainSettings,
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Sections drawn per `N`.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_samples() -> usize {
    200
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            geometry: GeometrySpec::kac_hammersley(),
            potential: PotentialConfig::gaussian(),
            n_list: vec![100],
            chain: ChainSettings::default(),
            experiment: None,
            output_dir: default_output_dir(),
            seed: 0,
            samples: default_samples(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.n_list.is_empty() {
            return Err(config_error("n_list is empty"));
        }
        if self.n_list[0] == 0 || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_error("n_list must be positive and strictly increasing"));
        }
        if self.samples == 0 {
            return Err(config_error("samples must be positive"));
        }
        let spec = self.potential.spec()?;
        if !self.potential.is_gaussian() {
            self.chain.chain_config(self.seed, self.samples)?;
        }
        self.geometry.build(self.n_list[0], spec.k)?;
        Ok(())
    }

    /// Refuses a config written for another experiment.
    pub fn expect(&self, e: Experiment) -> anyhow::Result<()> {
        match self.experiment {
            Some(x) if x != e => Err(config_error(format!("config is for experiment {x:?}, not {e:?}"))),
            _ => Ok(()),
        }
    }

    /// Seed of the stream for degree `n`.
    pub fn seed_for(&self, n: usize) -> u64 {
        self.seed.wrapping_add((n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
