//! Experiments: sample → zeros → measures → functionals.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::Context;
use pphi_core::ensemble::{MomentMatrices, PolySection, SectionEvaluator};
use pphi_core::geometry::{Weight, WeightedGeometry};
use pphi_core::jpc::{gamma_sandwich, log_gamma_n, main1_residual, GammaInput};
use pphi_core::measures::{
    equilibrium_measure, rate_functional, rate_on_grid, DiscreteMeasure, Equilibrium, Smoothing, SolverConfig,
};
use pphi_core::sampler::{gram_matrix, sample_gaussian, sample_mcmc};
use pphi_core::transport::w1_dual;
use pphi_core::zeros::{empirical_measure, find_roots, ZeroConfig};
use pphi_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{config_error, Experiment, RunConfig};
use crate::io::{
    geometry_hash, point_from_json, point_json, read_json, read_zeros, write_json, write_zeros, ChainRecord,
    DiagnosticsRecord, Manifest, MeasureFile, SamplerKind, SamplesFile,
};
use crate::plot::{emit_plot, PlotKind};

/// Reconstruction tolerance for accepting computed zeros.
pub const ROOT_TOL: f64 = 1e-8;

/// One pass/fail line of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub n: Option<usize>,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    /// `value ≤ bound`.
    pub fn at_most(name: &str, n: Option<usize>, value: f64, bound: f64) -> Self {
        Self { name: name.to_string(), n, value, bound, passed: value <= bound }
    }

    /// `value ≥ bound`.
    pub fn at_least(name: &str, n: Option<usize>, value: f64, bound: f64) -> Self {
        Self { name: name.to_string(), n, value, bound, passed: value >= bound }
    }
}

fn geometry_for(cfg: &RunConfig, n: usize) -> anyhow::Result<WeightedGeometry> {
    cfg.geometry.build(n, cfg.potential.spec()?.k)
}

fn chain_record(cfg: &RunConfig, n: usize) -> anyhow::Result<Option<ChainRecord>> {
    if cfg.potential.is_gaussian() {
        return Ok(None);
    }
    let c = cfg.chain.chain_config(cfg.seed_for(n), cfg.samples)?;
    Ok(Some(ChainRecord {
        n_steps: c.n_steps,
        burn_in: c.burn_in,
        n_chains: c.n_chains,
        target_accept: c.target_accept,
        thinning: c.thinning,
    }))
}

/// Draws `cfg.samples` sections of degree `n`: exactly for the free field, by MCMC otherwise.
pub fn sample_file(cfg: &RunConfig, n: usize) -> anyhow::Result<SamplesFile> {
    let spec = cfg.potential.spec()?;
    let geom = geometry_for(cfg, n)?;
    let seed = cfg.seed_for(n);
    let chain = chain_record(cfg, n)?;
    let (sections, diagnostics, sampler) = if cfg.potential.is_gaussian() {
        (sample_gaussian(&geom, n, cfg.samples, seed)?, None, SamplerKind::ExactGaussian)
    } else {
        let cc = cfg.chain.chain_config(seed, cfg.samples)?;
        let (mut s, d) = sample_mcmc(&spec, &geom, n, &cc)?;
        if let Some(w) = &d.warning {
            eprintln!("N = {n}: {w}");
        }
        // keep an equal share of every chain
        let kept = cc.kept_per_chain();
        let per = cfg.samples.div_ceil(cc.n_chains).min(kept);
        s = (0..cc.n_chains).flat_map(|c| s[c * kept..c * kept + per].to_vec()).take(cfg.samples).collect();
        (s, Some(DiagnosticsRecord::from(&d)), SamplerKind::Mcmc)
    };
    Ok(SamplesFile {
        n,
        seed,
        potential: cfg.potential.clone(),
        geometry: cfg.geometry.clone(),
        geometry_hash: geometry_hash(&geom),
        sampler,
        chain,
        diagnostics,
        coeffs: sections.iter().map(SamplesFile::encode).collect(),
    })
}

pub fn find_all_roots(sections: &[PolySection]) -> anyhow::Result<Vec<ZeroConfig>> {
    sections
        .par_iter()
        .enumerate()
        .map(|(i, s)| find_roots(s, ROOT_TOL).with_context(|| format!("sample {i}")))
        .collect()
}

/// Samples of degree `n` under `dir`, reused when the file on disk came from the same inputs.
/// The flag says whether they were reused.
pub fn stage_samples(cfg: &RunConfig, dir: &Path, n: usize) -> anyhow::Result<(SamplesFile, bool)> {
    let path = dir.join(format!("samples_N{n}.json"));
    if path.exists() {
        let geom = geometry_for(cfg, n)?;
        if let Ok(f) = read_json::<SamplesFile>(&path) {
            if f.matches(cfg, n, &geometry_hash(&geom), chain_record(cfg, n)?.as_ref()) {
                eprintln!("reusing {}", path.display());
                return Ok((f, true));
            }
        }
    }
    eprintln!("sampling N = {n}");
    let f = sample_file(cfg, n)?;
    write_json(&path, &f)?;
    Ok((f, false))
}

/// Zeros of the samples, reused from `dir` when the samples were.
pub fn stage_zeros(dir: &Path, samples: &SamplesFile, reuse: bool) -> anyhow::Result<Vec<ZeroConfig>> {
    let path = dir.join(format!("zeros_N{}.csv", samples.n));
    if reuse && path.exists() {
        if let Ok(z) = read_zeros(&path) {
            if z.len() == samples.coeffs.len() && z.iter().all(|zc| zc.degree() == samples.n) {
                eprintln!("reusing {}", path.display());
                return Ok(z);
            }
        }
    }
    let z = find_all_roots(&samples.sections()?)?;
    write_zeros(&path, &z)?;
    Ok(z)
}

pub fn solve_equilibrium(geom: &WeightedGeometry) -> anyhow::Result<Equilibrium> {
    Ok(equilibrium_measure(geom, &geom.support_grid, &SolverConfig::default())?)
}

/// `W₁(μ̄, ν_eq)` for the mean empirical measure `μ̄` of `zcs`, with a delta-method
/// standard error: the optimal potential `f` makes `W₁ = mean_m ∫f dμ_m + ∫g dν`.
pub fn w1_with_error(zcs: &[ZeroConfig], eq: &Equilibrium) -> anyhow::Result<(f64, f64)> {
    let parts: Vec<DiscreteMeasure> = zcs.iter().map(empirical_measure).collect();
    let mix = DiscreteMeasure::mixture(&parts)?;
    let d = w1_dual(&mix.points, &mix.weights, &eq.measure.points, &eq.measure.weights)?;
    let mut at = 0;
    let per: Vec<f64> = parts
        .iter()
        .map(|p| {
            let v = p.weights.iter().zip(&d.f[at..]).map(|(w, f)| w * f).sum::<f64>();
            at += p.len();
            v
        })
        .collect();
    let m = per.len() as f64;
    let se = if per.len() > 1 {
        let mean = per.iter().sum::<f64>() / m;
        (per.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
    } else {
        f64::NAN
    };
    Ok((d.value, se))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EqdistRow {
    pub n: usize,
    pub samples: usize,
    pub w1: f64,
    pub std_error: f64,
    pub sampler: SamplerKind,
    pub diagnostics: Option<DiagnosticsRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EqdistReport {
    pub rows: Vec<EqdistRow>,
    pub strictly_decreasing: bool,
    pub grid_spacing: f64,
    pub warnings: Vec<String>,
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// One degree of a convergence study: samples, zeros and the distance to `ν_eq`.
fn eqdist_row(cfg: &RunConfig, dir: &Path, n: usize) -> anyhow::Result<(EqdistRow, f64, Vec<ZeroConfig>)> {
    let geom = geometry_for(cfg, n)?;
    let (samples, reused) = stage_samples(cfg, dir, n)?;
    let zcs = stage_zeros(dir, &samples, reused)?;
    let eq = solve_equilibrium(&geom)?;
    let (w1, std_error) = w1_with_error(&zcs, &eq)?;
    let row = EqdistRow { n, samples: zcs.len(), w1, std_error, sampler: samples.sampler, diagnostics: samples.diagnostics };
    Ok((row, eq.grid.spacing, zcs))
}

fn eqdist_csv(rows: &[EqdistRow]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["N", "samples", "w1", "std_error", "rhat_max", "ess_min", "acceptance_rate", "warning"])?;
    for r in rows {
        let d = r.diagnostics.as_ref();
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            r.n.to_string(),
            r.samples.to_string(),
            r.w1.to_string(),
            r.std_error.to_string(),
            opt(d.map(|d| d.rhat_max)),
            opt(d.map(|d| d.ess_min)),
            opt(d.map(|d| d.acceptance_rate)),
            d.and_then(|d| d.warning.clone()).unwrap_or_default(),
        ])?;
    }
    Ok(w.into_inner()?)
}

/// Mean empirical measure against `ν_eq` for every `N`; writes CSV, SVG, report and manifest.
pub fn run_eqdist(cfg: &RunConfig, dir: &Path) -> anyhow::Result<EqdistReport> {
    cfg.expect(Experiment::Eqdist)?;
    let out: Vec<(EqdistRow, f64, Vec<ZeroConfig>)> =
        cfg.n_list.par_iter().map(|&n| eqdist_row(cfg, dir, n)).collect::<anyhow::Result<_>>()?;
    let rows: Vec<EqdistRow> = out.iter().map(|o| o.0.clone()).collect();
    let warnings: Vec<String> = rows
        .iter()
        .filter_map(|r| r.diagnostics.as_ref().and_then(|d| d.warning.as_ref()).map(|w| format!("N = {}: {w}", r.n)))
        .collect();
    let report = EqdistReport {
        strictly_decreasing: strictly_decreasing(&rows.iter().map(|r| r.w1).collect::<Vec<_>>()),
        grid_spacing: out.iter().map(|o| o.1).fold(0.0, f64::max),
        rows,
        warnings,
    };
    let csv_path = dir.join("eqdist.csv");
    crate::io::write_bytes(&csv_path, &eqdist_csv(&report.rows)?)?;
    let svg_path = dir.join("eqdist.svg");
    let pts: Vec<(f64, f64)> = report.rows.iter().map(|r| (r.n as f64, r.w1)).collect();
    emit_plot(&pts, PlotKind::Line, &svg_path, "W1 to the equilibrium measure", "N", "W1")?;
    let json_path = dir.join("eqdist.json");
    write_json(&json_path, &report)?;
    let mut files = stage_files(dir, &cfg.n_list);
    files.extend([csv_path, svg_path, json_path]);
    Manifest::new("eqdist", cfg).finish(dir, &files)?;
    Ok(report)
}

fn stage_files(dir: &Path, ns: &[usize]) -> Vec<PathBuf> {
    ns.iter().flat_map(|n| [dir.join(format!("samples_N{n}.json")), dir.join(format!("zeros_N{n}.csv"))]).collect()
}

/// Angular Fourier modes `1..=4` of the mean empirical measure, with standard errors.
pub fn angular_modes(zcs: &[ZeroConfig]) -> Vec<(usize, f64, f64)> {
    let m = zcs.len() as f64;
    (1..=4usize)
        .map(|k| {
            let per: Vec<C64> = zcs
                .iter()
                .map(|zc| {
                    let n = zc.finite_zeros.len().max(1) as f64;
                    zc.finite_zeros.iter().map(|z| C64::from_polar(1.0, k as f64 * z.arg())).sum::<C64>() / n
                })
                .collect();
            let mean = per.iter().sum::<C64>() / m;
            let var = per.iter().map(|c| (c - mean).norm_sqr()).sum::<f64>() / (m - 1.0).max(1.0);
            (k, mean.norm(), (var / m).sqrt())
        })
        .collect()
}

/// Fraction of finite zeros with `lo ≤ |z| ≤ hi`.
pub fn radial_fraction(zcs: &[ZeroConfig], lo: f64, hi: f64) -> f64 {
    let total: usize = zcs.iter().map(|z| z.degree()).sum();
    let inside = zcs.iter().flat_map(|z| &z.finite_zeros).filter(|z| (lo..=hi).contains(&z.norm())).count();
    inside as f64 / total as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KhDemoReport {
    pub checks: Vec<Check>,
    pub eqdist: Vec<EqdistRow>,
    pub passed: bool,
}

/// Kac–Hammersley checks at every `N`: norm identities, Bernstein bound,
/// concentration on the circle, angular uniformity and distance to `δ_{S¹}`.
pub fn run_kh_demo(cfg: &RunConfig, dir: &Path) -> anyhow::Result<KhDemoReport> {
    cfg.expect(Experiment::KhDemo)?;
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    let mut last_zeros = Vec::new();
    for &n in &cfg.n_list {
        let geom = geometry_for(cfg, n)?;
        let nn = Some(n);
        let mm = MomentMatrices::new(&geom.nu, &geom.weight, n);
        let gram_err = (0..=n)
            .flat_map(|i| (0..=n).map(move |j| (i, j)))
            .map(|(i, j)| (mm.norm[(i, j)] - if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }).norm())
            .fold(0.0, f64::max);
        checks.push(Check::at_most("gram matrix is the identity", nn, gram_err, 1e-10));
        let kin_err = (0..=n)
            .flat_map(|i| (0..=n).map(move |j| (i, j)))
            .map(|(i, j)| (mm.kinetic[(i, j)] - if i == j { C64::new((i * i) as f64, 0.0) } else { C64::new(0.0, 0.0) }).norm())
            .fold(0.0, f64::max)
            / (n * n) as f64;
        checks.push(Check::at_most("kinetic form is diag(j^2)", nn, kin_err, 1e-10));

        let (row, _, zcs) = eqdist_row(cfg, dir, n)?;
        let sections = read_json::<SamplesFile>(&dir.join(format!("samples_N{n}.json")))?.sections()?;
        let ev = SectionEvaluator::for_nu(&geom, n);
        let mut norm_err = 0.0f64;
        let mut ratio_max = 0.0f64;
        for s in &sections {
            let coef: f64 = s.coeffs.iter().map(|a| a.norm_sqr()).sum();
            let norm = ev.norm_sq(s);
            norm_err = norm_err.max((norm - coef).abs() / coef);
            ratio_max = ratio_max.max(ev.kinetic(s) / norm);
        }
        checks.push(Check::at_most("||s||^2 = sum |a_j|^2", nn, norm_err, 1e-10));
        checks.push(Check::at_most("Bernstein ratio / N^2", nn, ratio_max / (n * n) as f64, 1.0 + 1e-12));
        checks.push(Check::at_least("fraction of zeros with 0.85 <= |z| <= 1.15", nn, radial_fraction(&zcs, 0.85, 1.15), 0.9));
        for (k, modulus, se) in angular_modes(&zcs) {
            checks.push(Check::at_most(&format!("angular mode {k} in standard errors"), nn, modulus / se, 3.0));
        }
        rows.push(row);
        last_zeros = zcs;
    }
    if rows.len() > 1 {
        let w: Vec<f64> = rows.iter().map(|r| r.w1).collect();
        let ok = strictly_decreasing(&w);
        checks.push(Check { name: "W1 strictly decreasing in N".into(), n: None, value: w[w.len() - 1], bound: w[0], passed: ok });
    }

    let mut files = stage_files(dir, &cfg.n_list);
    let pts: Vec<(f64, f64)> =
        last_zeros.iter().flat_map(|z| &z.finite_zeros).take(10_000).map(|z| (z.re, z.im)).collect();
    let n_last = cfg.n_list[cfg.n_list.len() - 1];
    let scatter = dir.join("zeros.svg");
    emit_plot(&pts, PlotKind::Scatter, &scatter, &format!("zeros, N = {n_last}"), "Re z", "Im z")?;
    let radii: Vec<(f64, f64)> = last_zeros.iter().flat_map(|z| &z.finite_zeros).map(|z| (z.norm(), 0.0)).collect();
    let hist = dir.join("radii.svg");
    emit_plot(&radii, PlotKind::Histogram, &hist, &format!("|z| of zeros, N = {n_last}"), "|z|", "count")?;
    let report = KhDemoReport { passed: checks.iter().all(|c| c.passed), checks, eqdist: rows };
    let json = dir.join("kh_demo.json");
    write_json(&json, &report)?;
    files.extend([scatter, hist, json]);
    Manifest::new("kh-demo", cfg).finish(dir, &files)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub energy: f64,
    pub sup_potential: f64,
    pub eh_constant: f64,
    pub total: f64,
    pub smoothing_radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub points: Vec<Option<[f64; 2]>>,
    pub weights: Vec<f64>,
    /// `I^{h,K}(ν_eq)` term by term; `total` is 0 by the choice of `E(h)`.
    pub rate: RateReport,
    /// `max_K U − min_{supp} U`.
    pub gap: f64,
    pub iterations: usize,
    pub grid_spacing: f64,
    pub green_constant: f64,
}

pub fn equilibrium_report(cfg: &RunConfig) -> anyhow::Result<EquilibriumReport> {
    cfg.expect(Experiment::Equilibrium)?;
    let geom = geometry_for(cfg, cfg.n_list[0])?;
    let eq = solve_equilibrium(&geom)?;
    let r = rate_on_grid(&eq, &eq.measure.weights);
    Ok(EquilibriumReport {
        points: eq.measure.points.iter().map(|&p| point_json(p)).collect(),
        weights: eq.measure.weights.clone(),
        rate: RateReport { energy: r.energy, sup_potential: r.sup_potential, eh_constant: r.eh_constant, total: r.total, smoothing_radii: Vec::new() },
        gap: eq.gap,
        iterations: eq.iterations,
        grid_spacing: eq.grid.spacing,
        green_constant: geom.green_constant,
    })
}

/// `I^{h,K}` of a user-supplied measure.
pub fn rate_report(cfg: &RunConfig, m: &MeasureFile) -> anyhow::Result<RateReport> {
    let geom = geometry_for(cfg, cfg.n_list[0])?;
    let mu = DiscreteMeasure::new(m.points.iter().map(|&p| point_from_json(p)).collect(), m.weights.clone())
        .map_err(|e| config_error(e.to_string()))?;
    let eq = solve_equilibrium(&geom)?;
    let smoothing = m.smoothing_radius.map(Smoothing::Radius).unwrap_or(Smoothing::Auto);
    let r = rate_functional(&mu, &geom, &eq, &smoothing)?;
    Ok(RateReport { energy: r.energy, sup_potential: r.sup_potential, eh_constant: r.eh_constant, total: r.total, smoothing_radii: r.smoothing_radii })
}

/// `n` distinct zeros with `ln|ζ|` uniform in `[−1, 1]` and uniform angles.
pub fn random_config(rng: &mut ChaCha8Rng, n: usize) -> ZeroConfig {
    ZeroConfig::new((0..n).map(|_| C64::from_polar(rng.gen_range(-1.0f64..1.0).exp(), rng.gen_range(0.0..2.0 * PI))).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JpcReport {
    pub n_pairs: usize,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// `max |main1_residual|` over random configuration pairs, per `N`.
pub fn jpc_check(cfg: &RunConfig, n_pairs: usize, tol: f64) -> anyhow::Result<JpcReport> {
    cfg.expect(Experiment::JpcCheck)?;
    let spec = cfg.potential.spec()?;
    let checks = cfg
        .n_list
        .par_iter()
        .map(|&n| {
            let geom = geometry_for(cfg, n)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed_for(n));
            let mut worst = 0.0f64;
            for _ in 0..n_pairs {
                let (a, b) = (random_config(&mut rng, n), random_config(&mut rng, n));
                worst = worst.max(main1_residual(&a, &b, &spec, &geom)?.abs());
            }
            Ok(Check::at_most("max |MAIN1 residual|", Some(n), worst, tol))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(JpcReport { n_pairs, passed: checks.iter().all(|c| c.passed), checks })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaRow {
    pub n: usize,
    pub log_gamma: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl GammaRow {
    pub fn inside(&self) -> bool {
        let slack = 1e-9 * self.log_gamma.abs().max(1.0);
        self.lower.is_none_or(|l| l <= self.log_gamma + slack) && self.upper.is_none_or(|u| self.log_gamma <= u + slack)
    }
}

/// `log Γ_N` and its sandwich for `n_min..=n_max`; with `kinetic`, `τ = N²` (that is,
/// `η = N² α^{1/k}`) and no sandwich.
pub fn gamma_table(k: usize, c: &[f64], betas: &[f64], n_min: usize, n_max: usize, kinetic: bool) -> anyhow::Result<Vec<GammaRow>> {
    if n_min > n_max {
        return Err(config_error("n-min exceeds n-max"));
    }
    (n_min..=n_max)
        .map(|n| {
            let tau = if kinetic { (n * n) as f64 } else { 0.0 };
            let inp = GammaInput::new(k, c.to_vec(), betas.to_vec(), n, tau).map_err(|e| config_error(e.to_string()))?;
            let lg = log_gamma_n(&inp);
            let (lower, upper) = if kinetic {
                (None, None)
            } else {
                let (l, u) = gamma_sandwich(&inp).map_err(|e| config_error(e.to_string()))?;
                (Some(l), Some(u))
            };
            Ok(GammaRow { n, log_gamma: lg, lower, upper })
        })
        .collect()
}

pub fn gamma_csv(rows: &[GammaRow]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["N", "log_gamma", "lower", "upper", "log_gamma_over_N2"])?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.log_gamma.to_string(),
            opt(r.lower),
            opt(r.upper),
            (r.log_gamma / (r.n * r.n).max(1) as f64).to_string(),
        ])?;
    }
    Ok(w.into_inner()?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernsteinRow {
    pub n: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernsteinReport {
    pub n_samples: usize,
    pub rows: Vec<BernsteinRow>,
    /// Least-squares slope of `ln max_ratio` against `ln N`.
    pub growth_exponent: Option<f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn log_log_slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// `‖∇s‖²/‖s‖²` over free-field draws at every `N`. On the flat disk the ratio must
/// stay below `N²`; elsewhere the growth exponent of the maximum is checked.
pub fn bernstein_check(cfg: &RunConfig, n_samples: usize, max_exponent: f64) -> anyhow::Result<BernsteinReport> {
    cfg.expect(Experiment::BernsteinCheck)?;
    let flat = matches!(cfg.geometry.weight(), Weight::FlatOnDisk);
    let rows = cfg
        .n_list
        .par_iter()
        .map(|&n| {
            let geom = geometry_for(cfg, n)?;
            gram_matrix(&geom, n)?;
            let mm = MomentMatrices::new(&geom.nu, &geom.weight, n);
            let draws = sample_gaussian(&geom, n, n_samples, cfg.seed_for(n))?;
            let ratios: Vec<f64> = draws
                .iter()
                .map(|s| {
                    let b = s.ascending();
                    MomentMatrices::form(&mm.kinetic, &b) / MomentMatrices::form(&mm.norm, &b)
                })
                .collect();
            Ok(BernsteinRow {
                n,
                max_ratio: ratios.iter().cloned().fold(0.0, f64::max),
                mean_ratio: ratios.iter().sum::<f64>() / ratios.len() as f64,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    if flat {
        for r in &rows {
            checks.push(Check::at_most("max ratio / N^2", Some(r.n), r.max_ratio / (r.n * r.n) as f64, 1.0 + 1e-12));
        }
    }
    let growth_exponent = (rows.len() > 1).then(|| log_log_slope(&rows.iter().map(|r| (r.n as f64, r.max_ratio)).collect::<Vec<_>>()));
    if let Some(e) = growth_exponent {
        checks.push(Check::at_most("growth exponent of the max ratio", None, e, max_exponent));
    }
    Ok(BernsteinReport { n_samples, passed: checks.iter().all(|c| c.passed), rows, growth_exponent, checks })
}
