//! The joint probability current of zeros.
//!
//! For `s = a_0 ∏(z − ζ_j)` the density of the zeros (w.r.t. Lebesgue measure
//! on `ℂ^N`) is, up to a constant depending only on `N` and the ensemble,
//!
//! ```text
//! log K^N(ζ) = log Γ_N(ζ) + log|Δ(ζ)|² − ((N+1)/k) log α_k(ζ)
//! ```
//!
//! with `α_i = ∫ |∏(z − ζ_j)|^{2i}_{h^N} dν` and the one-dimensional integral `Γ_N`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use crate::ensemble::{kinetic_energy, PolySection, PotentialSpec};
use crate::error::{invalid, Error, Result};
use crate::geometry::{CP1Point, Weight, WeightedGeometry};
use crate::measures::{green_energy, EnergyMode};
use crate::special::{integrate_adaptive, ln_gamma, ln_upper_gamma, log_sum_exp};
use crate::zeros::{empirical_measure, reconstruct, ZeroConfig};
use crate::C64;

fn finite_zeros(zc: &ZeroConfig) -> Result<&[C64]> {
    if zc.zeros_at_infinity > 0 {
        return Err(Error::ZerosAtInfinity);
    }
    Ok(&zc.finite_zeros)
}

/// `ln |∏(z − ζ_j)|²_{h^N}` at `p`, in the chart `w = 1/z` when `|z| > 1`.
fn log_monic_density(zeros: &[C64], weight: &Weight, p: CP1Point) -> f64 {
    let n = zeros.len() as f64;
    match p {
        CP1Point::Finite(z) if z.norm_sqr() <= 1.0 => {
            zeros.iter().map(|&q| (z - q).norm_sqr().ln()).sum::<f64>() - n * weight.phi(z)
        }
        _ => {
            // |z − ζ|² = |z|² |1 − ζw|² and φ(z) = ln|z|² + φ_outer(w)
            let w = p.inverted().finite().expect("inverse of a far point is finite");
            let one = C64::new(1.0, 0.0);
            zeros.iter().map(|&q| (one - q * w).norm_sqr().ln()).sum::<f64>() - n * weight.chart(w, true).phi
        }
    }
}

/// `log α_i`, assembled in log space.
pub fn log_alpha(i: usize, zc: &ZeroConfig, geom: &WeightedGeometry) -> Result<f64> {
    let zeros = finite_zeros(zc)?;
    if i == 0 {
        return Err(invalid("alpha index starts at 1"));
    }
    let terms: Vec<f64> = geom
        .nu
        .nodes
        .iter()
        .zip(&geom.nu.weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&p, &w)| w.ln() + i as f64 * log_monic_density(zeros, &geom.weight, p))
        .collect();
    Ok(log_sum_exp(terms.iter().copied()))
}

/// `β_i = α_i / α_k^{i/k}`.
pub fn beta(i: usize, zc: &ZeroConfig, geom: &WeightedGeometry, k: usize) -> Result<f64> {
    if i == 0 || i > k {
        return Err(invalid("beta needs 1 <= i <= k"));
    }
    if i == k {
        return Ok(1.0);
    }
    Ok((log_alpha(i, zc, geom)? - i as f64 / k as f64 * log_alpha(k, zc, geom)?).exp())
}

/// Inputs of `Γ_N = ∫_0^∞ e^{−(ρ^k + Σ_{i<k} β_i c_i ρ^i + τρ)} ρ^N dρ`, `τ = η/α_k^{1/k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaInput {
    pub k: usize,
    /// `c_1..c_{k−1}`; `c_k = 1` is implicit.
    pub c: Vec<f64>,
    pub betas: Vec<f64>,
    pub n: usize,
    pub eta_over_alpha: f64,
}

impl GammaInput {
    pub fn new(k: usize, c: Vec<f64>, betas: Vec<f64>, n: usize, eta_over_alpha: f64) -> Result<Self> {
        if k == 0 || c.len() != k - 1 || betas.len() != k - 1 {
            return Err(invalid("GammaInput needs k >= 1 and k − 1 coefficients and betas"));
        }
        if c.iter().chain(&betas).any(|x| !x.is_finite()) || !(eta_over_alpha >= 0.0) {
            return Err(invalid("non-finite coefficient or negative eta"));
        }
        Ok(Self { k, c, betas, n, eta_over_alpha })
    }

    /// `P(ρ) = ρ^k + Σ β_i c_i ρ^i + τρ`.
    fn poly(&self, rho: f64) -> f64 {
        let mut p = rho.powi(self.k as i32) + self.eta_over_alpha * rho;
        for (i, (c, b)) in self.c.iter().zip(&self.betas).enumerate() {
            p += b * c * rho.powi(i as i32 + 1);
        }
        p
    }

    /// `ρ P'(ρ)`.
    fn rho_dpoly(&self, rho: f64) -> f64 {
        let mut p = self.k as f64 * rho.powi(self.k as i32) + self.eta_over_alpha * rho;
        for (i, (c, b)) in self.c.iter().zip(&self.betas).enumerate() {
            p += (i + 1) as f64 * b * c * rho.powi(i as i32 + 1);
        }
        p
    }
}

/// `log Γ_N` (or `log Γ̃_N` when `eta_over_alpha > 0`).
///
/// Integrates `e^{h(x) − h(x*)}` with `x = ln ρ`, `h(x) = (N+1)x − P(e^x)`, around
/// the global maximizer `x*`.
pub fn log_gamma_n(inp: &GammaInput) -> f64 {
    let n1 = inp.n as f64 + 1.0;
    let h = |x: f64| n1 * x - inp.poly(x.exp());
    let dh = |x: f64| n1 - inp.rho_dpoly(x.exp());
    // right end of the search: P' dominates N+1 beyond here
    let scale: f64 = n1 + inp.eta_over_alpha + inp.c.iter().zip(&inp.betas).map(|(c, b)| (c * b).abs()).sum::<f64>();
    let mut hi = (4.0 * scale).ln() / inp.k as f64 + 1.0;
    while dh(hi) > 0.0 {
        hi += 1.0;
    }
    let lo = hi - 80.0;
    // coarse scan for the global maximum, then a local bisection on h'
    let m = 4000;
    let step = (hi - lo) / m as f64;
    let mut best = (lo, h(lo));
    for i in 1..=m {
        let x = lo + i as f64 * step;
        let v = h(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let mut x_star = best.0;
    if dh(a) > 0.0 && dh(b) < 0.0 {
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if dh(mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        x_star = 0.5 * (a + b);
    }
    let h_star = h(x_star).max(best.1);
    // integration window where the integrand exceeds e^{-80} of its peak
    let mut left = 1.0;
    while h(x_star - left) - h_star > -80.0 && x_star - left > lo - 1000.0 {
        left *= 2.0;
    }
    let mut right = 1.0 / n1.sqrt();
    while h(x_star + right) - h_star > -80.0 {
        right *= 2.0;
    }
    let f = |x: f64| (h(x) - h_star).exp();
    let (v1, _) = integrate_adaptive(f, x_star - left, x_star, 0.0, 1e-14, 4000);
    let (v2, _) = integrate_adaptive(f, x_star, x_star + right, 0.0, 1e-14, 4000);
    h_star + (v1 + v2).ln()
}

/// `ρ_k`: the root of `Σ_{j<k} |c_j| ρ^{j−k} = ½` (0 if every `c_j` vanishes).
fn rho_threshold(c: &[f64], k: usize) -> f64 {
    let g = |rho: f64| c.iter().enumerate().map(|(j, cj)| cj.abs() * rho.powi(j as i32 + 1 - k as i32)).sum::<f64>() - 0.5;
    if c.iter().all(|x| *x == 0.0) {
        return 0.0;
    }
    let (mut a, mut b) = (0.0, 1.0);
    while g(b) > 0.0 {
        b *= 2.0;
    }
    for _ in 0..300 {
        let mid = 0.5 * (a + b);
        if g(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    b
}

/// Rigorous bounds `(log lower, log upper)` on `log Γ_N` for `β_i ∈ [0, 1]` and `η = 0`:
///
/// ```text
/// e^{−Ck}/(N+1) + (Ck)^{−(N+1)/k} Γ((N+1)/k, Ck)/k ≤ Γ_N ≤ ρ_k^N C_k + 2^{(N+1)/k} Γ((N+1)/k)/k
/// ```
///
/// where `C = max_j |c_j|` (with `c_k = 1`) and `C_k = ∫_0^{ρ_k} e^{−(ρ^k − Σ|c_j|ρ^j)} dρ`.
pub fn gamma_sandwich(inp: &GammaInput) -> Result<(f64, f64)> {
    if inp.eta_over_alpha != 0.0 {
        return Err(invalid("the sandwich bounds are for the potential-only case"));
    }
    if inp.betas.iter().any(|b| !(-1e-12..=1.0 + 1e-10).contains(b)) {
        return Err(invalid("betas must lie in [0, 1]"));
    }
    let k = inp.k as f64;
    let n = inp.n as f64;
    let a = (n + 1.0) / k;
    let cmax = inp.c.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let ck = cmax * k;
    let lower = log_sum_exp([-ck - (n + 1.0).ln(), -a * ck.ln() - k.ln() + ln_upper_gamma(a, ck)]);

    let rho_k = rho_threshold(&inp.c, inp.k);
    let tail = -k.ln() + a * core::f64::consts::LN_2 + ln_gamma(a);
    let upper = if rho_k > 0.0 {
        let q = |rho: f64| rho.powi(inp.k as i32) - inp.c.iter().enumerate().map(|(j, cj)| cj.abs() * rho.powi(j as i32 + 1)).sum::<f64>();
        let (c_k, _) = integrate_adaptive(|r| (-q(r)).exp(), 0.0, rho_k, 0.0, 1e-13, 2000);
        log_sum_exp([n * rho_k.ln() + c_k.ln(), tail])
    } else {
        tail
    };
    Ok((lower, upper))
}

/// Leading saddle-point value of `log ∫ e^{−α_k ρ^k} ρ^N dρ`.
pub fn saddle_log_gamma(log_alpha_k: f64, n: usize, k: usize) -> f64 {
    let r = n as f64 / k as f64;
    -r * log_alpha_k + r * (r.ln() - 1.0)
}

/// `η = |a_0|^{−2} ‖∇s‖²`, the kinetic energy of the monic polynomial with the zeros of `s`.
pub fn eta_term(s: &PolySection, geom: &WeightedGeometry) -> Result<f64> {
    let a0 = s.leading().norm_sqr();
    if a0 == 0.0 {
        return Err(invalid("eta needs a nonzero leading coefficient"));
    }
    Ok(kinetic_energy(s, geom) / a0)
}

fn log_vandermonde_sq(zeros: &[C64]) -> Result<f64> {
    let mut v = 0.0;
    for i in 0..zeros.len() {
        for j in 0..i {
            let d = (zeros[i] - zeros[j]).norm_sqr();
            if d == 0.0 {
                return Err(Error::CoincidentZeros);
            }
            v += d.ln();
        }
    }
    Ok(v)
}

/// The `Γ_N` input of a configuration (with `τ = η/α_k^{1/k}` when the kinetic term is on).
pub fn gamma_input(zc: &ZeroConfig, spec: &PotentialSpec, geom: &WeightedGeometry) -> Result<(GammaInput, f64)> {
    let k = spec.k;
    let n = zc.degree();
    let la_k = log_alpha(k, zc, geom)?;
    let mut betas = Vec::with_capacity(k - 1);
    for i in 1..k {
        betas.push((log_alpha(i, zc, geom)? - i as f64 / k as f64 * la_k).exp());
    }
    let tau = if spec.include_kinetic {
        let monic = reconstruct(zc, C64::new(1.0, 0.0))?;
        (kinetic_energy(&monic, geom).ln() - la_k / k as f64).exp()
    } else {
        0.0
    };
    Ok((GammaInput::new(k, spec.c[..k - 1].to_vec(), betas, n, tau)?, la_k))
}

/// `log Γ_N + log|Δ|² − ((N+1)/k) log α_k`: the log-density of zeros up to an additive constant.
pub fn jpc_log_density(zc: &ZeroConfig, spec: &PotentialSpec, geom: &WeightedGeometry) -> Result<f64> {
    let zeros = finite_zeros(zc)?;
    let lv = log_vandermonde_sq(zeros)?;
    let (inp, la_k) = gamma_input(zc, spec, geom)?;
    let n1 = zeros.len() as f64 + 1.0;
    Ok(log_gamma_n(&inp) + lv - n1 / spec.k as f64 * la_k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxRate {
    /// `(1/N²) Σ_{i≠j} G_h(ζ_i, ζ_j)`.
    pub energy: f64,
    /// `(1/kN) log ∫ e^{kN U^{μ_ζ}_h} dν`.
    pub j: f64,
    /// `−½ E_N + ((N+1)/N) J_N`.
    pub rate: f64,
}

/// Off-diagonal energy, `L^{kN}(ν)` potential norm and the approximate rate of a configuration.
pub fn approx_rate(zc: &ZeroConfig, geom: &WeightedGeometry, k: usize) -> Result<ApproxRate> {
    let zeros = finite_zeros(zc)?;
    log_vandermonde_sq(zeros)?;
    let n = zeros.len() as f64;
    let mu = empirical_measure(zc);
    let energy = green_energy(&mu, geom, EnergyMode::OffDiagonal)?;
    let kn = k as f64 * n;
    let mut terms = Vec::with_capacity(geom.nu.len());
    for (&p, &w) in geom.nu.nodes.iter().zip(&geom.nu.weights) {
        if w <= 0.0 {
            continue;
        }
        let mut u = 0.0;
        for &q in &mu.points {
            match geom.green_function(p, q) {
                Ok(g) => u += g / n,
                Err(Error::Diagonal) => u = f64::NEG_INFINITY,
                Err(e) => return Err(e),
            }
        }
        terms.push(w.ln() + kn * u);
    }
    let j = log_sum_exp(terms.iter().copied()) / kn;
    Ok(ApproxRate { energy, j, rate: -0.5 * energy + (n + 1.0) / n * j })
}

/// `R(ζ) = log K^N(ζ) − log Γ_N(ζ) + N² I_N(ζ) + 2 Σ φ(ζ_j)` at `zc1` minus at `zc2`.
///
/// The factorization `K^N ∝ Γ_N e^{−N² I_N}` holds against the reference measure
/// `∏ e^{−2φ(ζ_j)} d²ζ_j`, so `R` is constant in `ζ` and the difference vanishes.
pub fn main1_residual(zc1: &ZeroConfig, zc2: &ZeroConfig, spec: &PotentialSpec, geom: &WeightedGeometry) -> Result<f64> {
    if zc1.degree() != zc2.degree() {
        return Err(invalid("configurations of different degree"));
    }
    let r = |zc: &ZeroConfig| -> Result<f64> {
        let zeros = finite_zeros(zc)?;
        let n = zeros.len() as f64;
        let lv = log_vandermonde_sq(zeros)?;
        let (_, la_k) = gamma_input(zc, spec, geom)?;
        // jpc − log Γ, without re-integrating Γ
        let jpc_minus_gamma = lv - (n + 1.0) / spec.k as f64 * la_k;
        let rate = approx_rate(zc, geom, spec.k)?.rate;
        let phis: f64 = zeros.iter().map(|&z| geom.weight.phi(z)).sum();
        Ok(jpc_minus_gamma + n * n * rate + 2.0 * phis)
    };
    Ok(r(zc1)? - r(zc2)?)
}
