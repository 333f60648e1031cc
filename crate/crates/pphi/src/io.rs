//! Files: samples (JSON), zeros (CSV), reports and manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{bail, Context};
use pphi_core::ensemble::PolySection;
use pphi_core::geometry::{CP1Point, WeightedGeometry};
use pphi_core::sampler::ChainDiagnostics;
use pphi_core::zeros::ZeroConfig;
use pphi_core::C64;
use serde::{Deserialize, Serialize};

use crate::config::{config_error, sha256_hex, GeometrySpec, PotentialConfig, RunConfig};

static WRITER: Mutex<()> = Mutex::new(());

/// Every file goes through here, one at a time.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let _guard = WRITER.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// `null` for the point at infinity, `[re, im]` otherwise.
pub fn point_json(p: CP1Point) -> Option<[f64; 2]> {
    p.finite().map(|z| [z.re, z.im])
}

pub fn point_from_json(p: Option<[f64; 2]>) -> CP1Point {
    match p {
        Some([re, im]) => CP1Point::new(re, im),
        None => CP1Point::Infinity,
    }
}

/// Hash of the realized geometry: weight, both quadratures, grid and Green constant.
pub fn geometry_hash(geom: &WeightedGeometry) -> String {
    let text = format!(
        "{:?}|{:?}|{:?}|{:?}|{:?}",
        geom.weight, geom.nu, geom.curvature_quadrature, geom.support_grid, geom.green_constant
    );
    sha256_hex(text.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub acceptance_rate: f64,
    pub rhat_max: f64,
    pub ess_min: f64,
    pub step_sizes: Vec<f64>,
    pub warning: Option<String>,
}

impl From<&ChainDiagnostics> for DiagnosticsRecord {
    fn from(d: &ChainDiagnostics) -> Self {
        Self {
            acceptance_rate: d.acceptance_rate,
            rhat_max: d.rhat_max,
            ess_min: d.ess_min,
            step_sizes: d.step_sizes.clone(),
            warning: d.warning.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    ExactGaussian,
    Mcmc,
}

/// Sections of one degree, with what is needed to reproduce them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplesFile {
    pub n: usize,
    pub seed: u64,
    pub potential: PotentialConfig,
    pub geometry: GeometrySpec,
    pub geometry_hash: String,
    pub sampler: SamplerKind,
    /// Chain settings actually used (MCMC only).
    pub chain: Option<ChainRecord>,
    pub diagnostics: Option<DiagnosticsRecord>,
    /// Coefficients `[re, im]`, leading first.
    pub coeffs: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub n_steps: usize,
    pub burn_in: usize,
    pub n_chains: usize,
    pub target_accept: f64,
    pub thinning: usize,
}

impl SamplesFile {
    pub fn sections(&self) -> anyhow::Result<Vec<PolySection>> {
        self.coeffs
            .iter()
            .map(|c| {
                if c.len() != self.n + 1 {
                    bail!("sample of length {} in a degree-{} file", c.len(), self.n);
                }
                Ok(PolySection::new(c.iter().map(|&[re, im]| C64::new(re, im)).collect())?)
            })
            .collect()
    }

    pub fn encode(s: &PolySection) -> Vec<[f64; 2]> {
        s.coeffs.iter().map(|z| [z.re, z.im]).collect()
    }

    /// Whether this file is the output of the given inputs.
    pub fn matches(&self, cfg: &RunConfig, n: usize, geometry_hash: &str, chain: Option<&ChainRecord>) -> bool {
        self.n == n
            && self.seed == cfg.seed_for(n)
            && self.potential == cfg.potential
            && self.geometry_hash == geometry_hash
            && self.chain.as_ref() == chain
            && self.coeffs.len() == cfg.samples
    }
}

/// `sample_id,re,im,at_infinity`; a zero at infinity has empty `re`/`im`.
pub fn zeros_csv(zcs: &[ZeroConfig]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sample_id", "re", "im", "at_infinity"])?;
    for (id, zc) in zcs.iter().enumerate() {
        let id = id.to_string();
        for z in &zc.finite_zeros {
            w.write_record([id.as_str(), &z.re.to_string(), &z.im.to_string(), "0"])?;
        }
        for _ in 0..zc.zeros_at_infinity {
            w.write_record([id.as_str(), "", "", "1"])?;
        }
    }
    Ok(w.into_inner()?)
}

pub fn write_zeros(path: &Path, zcs: &[ZeroConfig]) -> anyhow::Result<()> {
    write_bytes(path, &zeros_csv(zcs)?)
}

pub fn read_zeros(path: &Path) -> anyhow::Result<Vec<ZeroConfig>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut by_id: BTreeMap<usize, ZeroConfig> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 4 {
            bail!("{}: expected 4 columns", path.display());
        }
        let id: usize = rec[0].parse().context("sample_id")?;
        let zc = by_id.entry(id).or_insert_with(|| ZeroConfig::new(Vec::new()));
        if &rec[3] == "1" {
            zc.zeros_at_infinity += 1;
        } else {
            zc.finite_zeros.push(C64::new(rec[1].parse().context("re")?, rec[2].parse().context("im")?));
        }
    }
    if by_id.keys().enumerate().any(|(i, &k)| i != k) {
        bail!("{}: sample ids are not 0..M", path.display());
    }
    Ok(by_id.into_values().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
}

/// What was run and what it wrote; enough to reproduce every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub seed: u64,
    pub seeds_per_n: BTreeMap<usize, u64>,
    pub versions: BTreeMap<String, String>,
    pub outputs: Vec<OutputRecord>,
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("pphi".to_string(), env!("CARGO_PKG_VERSION").to_string());
        versions.insert("pphi-core".to_string(), env!("CARGO_PKG_VERSION").to_string());
        Self {
            command: command.to_string(),
            config: cfg.clone(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            seeds_per_n: cfg.n_list.iter().map(|&n| (n, cfg.seed_for(n))).collect(),
            versions,
            outputs: Vec::new(),
        }
    }

    /// Records the files under `dir` (by path relative to it) and writes `manifest.json`.
    pub fn finish(mut self, dir: &Path, files: &[PathBuf]) -> anyhow::Result<()> {
        for f in files {
            let bytes = std::fs::read(f).with_context(|| format!("reading {}", f.display()))?;
            let rel = f.strip_prefix(dir).unwrap_or(f);
            self.outputs.push(OutputRecord { path: rel.display().to_string(), sha256: sha256_hex(&bytes) });
        }
        write_json(&dir.join("manifest.json"), &self)
    }
}

/// A weighted point set as read by `pphi rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureFile {
    pub points: Vec<Option<[f64; 2]>>,
    pub weights: Vec<f64>,
    /// Cap radius for every atom; `2/√n` when absent.
    #[serde(default)]
    pub smoothing_radius: Option<f64>,
}

impl MeasureFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        read_json(path).map_err(|e| config_error(format!("{e:#}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zeros_round_trip_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.csv");
        let mut a = ZeroConfig::new(vec![C64::new(0.1, -2.5e-17), C64::new(1.0 / 3.0, 7.0)]);
        a.zeros_at_infinity = 1;
        let b = ZeroConfig::new(vec![C64::new(-1e300, 5e-324)]);
        write_zeros(&path, &[a.clone(), b.clone()]).unwrap();
        assert_eq!(read_zeros(&path).unwrap(), vec![a, b]);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("sample_id,re,im,at_infinity\n"));
        assert!(text.contains("0,,,1"));
    }

    proptest! {
        #[test]
        fn samples_round_trip_bit_for_bit(re in proptest::collection::vec(-1e6f64..1e6, 3), im in proptest::collection::vec(-1e6f64..1e6, 3)) {
            let s = PolySection::new(re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)).collect()).unwrap();
            let f = SamplesFile {
                n: 2,
                seed: 3,
                potential: PotentialConfig::gaussian(),
                geometry: GeometrySpec::kac_hammersley(),
                geometry_hash: String::new(),
                sampler: SamplerKind::ExactGaussian,
                chain: None,
                diagnostics: None,
                coeffs: vec![SamplesFile::encode(&s)],
            };
            let back: SamplesFile = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
            prop_assert_eq!(back.sections().unwrap(), vec![s]);
        }
    }
}
