//! Draws from `γ_N = e^{−S(s)} ds` on degree-`N` polynomials.
//!
//! Coefficient vectors are ascending (`b_i` multiplies `z^i`). With
//! `G_ij = ∫ z^i z̄^j e^{−Nφ} dν` the weighted norm is `‖s‖² = bᵀ G b̄ = b* Ḡ b`,
//! so the Gaussian ensemble has covariance `E[b b*] = Ḡ⁻¹`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::ensemble::{MomentMatrices, PolySection, PotentialSpec, SectionEvaluator};
use crate::error::{invalid, Error, Result};
use crate::geometry::WeightedGeometry;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    pub n_steps: usize,
    pub burn_in: usize,
    pub n_chains: usize,
    pub target_accept: f64,
    pub seed: u64,
    pub thinning: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { n_steps: 20_000, burn_in: 5_000, n_chains: 4, target_accept: 0.234, seed: 0, thinning: 10 }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_steps {
            return Err(invalid("burn_in must be smaller than n_steps"));
        }
        if self.n_chains == 0 || self.thinning == 0 {
            return Err(invalid("n_chains and thinning must be positive"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(invalid("target_accept must lie in (0, 1)"));
        }
        if self.kept_per_chain() < 4 {
            return Err(invalid("fewer than 4 kept samples per chain"));
        }
        Ok(())
    }

    pub fn kept_per_chain(&self) -> usize {
        (self.n_steps - self.burn_in) / self.thinning
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainDiagnostics {
    /// Acceptance rate of the sampling phase, pooled over chains.
    pub acceptance_rate: f64,
    pub rhat_max: f64,
    pub ess_min: f64,
    /// Frozen proposal scale of each chain.
    pub step_sizes: Vec<f64>,
    pub warning: Option<String>,
}

/// `G_ij = ∫ z^i z̄^j e^{−Nφ} dν`, `0 ≤ i, j ≤ N`.
pub fn gram_matrix(geom: &WeightedGeometry, n: usize) -> Result<DMatrix<C64>> {
    let g = MomentMatrices::new(&geom.nu, &geom.weight, n).norm;
    cholesky_upper_inverse(&g)?;
    Ok(g)
}

/// `T = L^{-*}` for `Ḡ = L L*`, so `T ξ` has covariance `Ḡ⁻¹` when `E[ξ ξ*] = I`.
fn cholesky_upper_inverse(g: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let a = g.map(|x| x.conj());
    let n = a.nrows();
    for i in 0..n {
        if !(a[(i, i)].re > 0.0) {
            return Err(Error::DegenerateMeasure);
        }
    }
    let l = a.clone().cholesky().ok_or(Error::DegenerateMeasure)?.l();
    // pivots far below their diagonal entry mean ν cannot separate the monomials
    for i in 0..n {
        if l[(i, i)].norm_sqr() < 1e-12 * a[(i, i)].re {
            return Err(Error::DegenerateMeasure);
        }
    }
    l.adjoint()
        .solve_upper_triangular(&DMatrix::identity(n, n))
        .ok_or(Error::DegenerateMeasure)
}

/// Standard complex Gaussian vector, `E|ξ_i|² = 1`.
fn complex_normal(rng: &mut ChaCha8Rng, n: usize) -> DVector<C64> {
    let s = core::f64::consts::FRAC_1_SQRT_2;
    DVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

fn upper_times(t: &DMatrix<C64>, x: &DVector<C64>) -> DVector<C64> {
    let n = x.len();
    DVector::from_fn(n, |i, _| (i..n).map(|j| t[(i, j)] * x[j]).sum())
}

fn section(b: &DVector<C64>) -> PolySection {
    PolySection::from_ascending(b.iter().copied().collect()).expect("degree >= 1, finite")
}

/// Exact draws with density `∝ e^{−‖s‖²}`.
pub fn sample_gaussian(geom: &WeightedGeometry, n: usize, count: usize, seed: u64) -> Result<Vec<PolySection>> {
    if n == 0 {
        return Err(invalid("a section needs degree N >= 1"));
    }
    let t = cholesky_upper_inverse(&gram_matrix(geom, n)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| section(&upper_times(&t, &complex_normal(&mut rng, n + 1)))).collect())
}

/// `log π(to) − log π(from)` for `π ∝ e^{−S}`; the proposal is symmetric.
pub fn log_acceptance_ratio(ev: &SectionEvaluator, spec: &PotentialSpec, from: &PolySection, to: &PolySection) -> f64 {
    ev.action(from, spec) - ev.action(to, spec)
}

struct ChainRun {
    kept: Vec<DVector<C64>>,
    actions: Vec<f64>,
    accepted: usize,
    proposed: usize,
    step: f64,
}

fn run_chain(
    ev: &SectionEvaluator,
    spec: &PotentialSpec,
    t: &DMatrix<C64>,
    cfg: &ChainConfig,
    chain: usize,
) -> ChainRun {
    let d = t.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chain as u64);
    let mut b = upper_times(t, &complex_normal(&mut rng, d));
    let mut act = ev.action(&section(&b), spec);
    let mut log_step = (2.38 / ((2 * d) as f64).sqrt()).ln();
    let mut run = ChainRun { kept: Vec::new(), actions: Vec::new(), accepted: 0, proposed: 0, step: 0.0 };
    for it in 0..cfg.n_steps {
        let step = log_step.exp();
        let mut prop = upper_times(t, &complex_normal(&mut rng, d));
        prop *= C64::new(step, 0.0);
        prop += &b;
        let ps = section(&prop);
        let pact = ev.action(&ps, spec);
        let log_r = act - pact;
        let u: f64 = rng.gen();
        let accept = log_r >= 0.0 || u.ln() < log_r;
        if accept {
            b = prop;
            act = pact;
        }
        if it < cfg.burn_in {
            // Robbins–Monro on the log scale, frozen after burn-in
            let gain = 1.0 / ((it + 1) as f64).powf(0.6);
            let a = if log_r >= 0.0 { 1.0 } else { log_r.exp() };
            log_step += gain * (a - cfg.target_accept);
        } else {
            run.proposed += 1;
            run.accepted += accept as usize;
            if (it - cfg.burn_in + 1) % cfg.thinning == 0 {
                run.kept.push(b.clone());
                run.actions.push(act);
            }
        }
    }
    run.step = log_step.exp();
    run
}

/// Adaptive random-walk Metropolis on `ℂ^{N+1}` targeting `e^{−S(s)}`.
///
/// Proposals are `b + σ T ξ` with `T T* = conj(G + [kinetic] K)⁻¹`, where `K` is the
/// kinetic form on monomials. Returns the kept states of every chain, chain by chain.
pub fn sample_mcmc(
    spec: &PotentialSpec,
    geom: &WeightedGeometry,
    n: usize,
    cfg: &ChainConfig,
) -> Result<(Vec<PolySection>, ChainDiagnostics)> {
    if n == 0 {
        return Err(invalid("a section needs degree N >= 1"));
    }
    cfg.validate()?;
    let mm = MomentMatrices::new(&geom.nu, &geom.weight, n);
    cholesky_upper_inverse(&mm.norm)?;
    let pre = if spec.include_kinetic { &mm.norm + &mm.kinetic } else { mm.norm.clone() };
    let t = cholesky_upper_inverse(&pre)?;
    let ev = SectionEvaluator::for_nu(geom, n);
    let runs: Vec<ChainRun> = (0..cfg.n_chains).map(|c| run_chain(&ev, spec, &t, cfg, c)).collect();

    let (acc, prop) = runs.iter().fold((0, 0), |(a, p), r| (a + r.accepted, p + r.proposed));
    let stats = summary_statistics(&runs);
    let mut rhat_max: f64 = 1.0;
    let mut ess_min = f64::INFINITY;
    for chains in &stats {
        let (r, e) = rhat_ess(chains);
        if r.is_finite() {
            rhat_max = rhat_max.max(r);
        }
        ess_min = ess_min.min(e);
    }
    let warning = (rhat_max > 1.1).then(|| format!("chains have not converged: split R-hat {rhat_max:.3} > 1.1"));
    let diagnostics = ChainDiagnostics {
        acceptance_rate: acc as f64 / prop.max(1) as f64,
        rhat_max,
        ess_min,
        step_sizes: runs.iter().map(|r| r.step).collect(),
        warning,
    };
    let samples = runs.iter().flat_map(|r| r.kept.iter().map(section)).collect();
    Ok((samples, diagnostics))
}

/// Scalar summaries monitored for convergence: action, `ln‖b‖²`, and the real and
/// imaginary parts of the constant and top coefficients.
fn summary_statistics(runs: &[ChainRun]) -> Vec<Vec<Vec<f64>>> {
    let mut out = vec![Vec::new(); 6];
    for r in runs {
        let d = r.kept.first().map_or(0, |b| b.len());
        out[0].push(r.actions.clone());
        out[1].push(r.kept.iter().map(|b| b.norm_squared().ln()).collect());
        out[2].push(r.kept.iter().map(|b| b[0].re).collect());
        out[3].push(r.kept.iter().map(|b| b[0].im).collect());
        out[4].push(r.kept.iter().map(|b| b[d - 1].re).collect());
        out[5].push(r.kept.iter().map(|b| b[d - 1].im).collect());
    }
    out
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0))
}

/// Split-R̂ and a Geyer initial-monotone ESS over several chains.
pub fn rhat_ess(chains: &[Vec<f64>]) -> (f64, f64) {
    let half = chains.iter().map(|c| c.len() / 2).min().unwrap_or(0);
    if half < 2 {
        return (f64::NAN, 0.0);
    }
    let split: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| {
            let off = c.len() - 2 * half;
            [&c[off..off + half], &c[off + half..]]
        })
        .collect();
    let m = split.len() as f64;
    let n = half as f64;
    let mv: Vec<(f64, f64)> = split.iter().map(|c| mean_var(c)).collect();
    let w = mv.iter().map(|x| x.1).sum::<f64>() / m;
    let grand = mv.iter().map(|x| x.0).sum::<f64>() / m;
    let b_over_n = mv.iter().map(|x| (x.0 - grand).powi(2)).sum::<f64>() / (m - 1.0);
    let var_plus = (n - 1.0) / n * w + b_over_n;
    if !(w > 0.0) {
        return (if b_over_n > 0.0 { f64::INFINITY } else { 1.0 }, if b_over_n > 0.0 { 0.0 } else { m * n });
    }
    let rhat = (var_plus / w).sqrt();

    let acov = |c: &[f64], mean: f64, lag: usize| -> f64 {
        (0..c.len() - lag).map(|i| (c[i] - mean) * (c[i + lag] - mean)).sum::<f64>() / c.len() as f64
    };
    let rho = |lag: usize| -> f64 {
        let mean_acov = split.iter().zip(&mv).map(|(c, (mu, _))| acov(c, *mu, lag)).sum::<f64>() / m;
        1.0 - (w - mean_acov) / var_plus
    };
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < half {
        let mut pair = rho(lag) + rho(lag + 1);
        if pair < 0.0 {
            break;
        }
        pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    let tau = tau.max(1.0 / (m * n).log10().max(1.0));
    (rhat, m * n / tau)
}
