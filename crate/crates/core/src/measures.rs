//! Potential-theoretic functionals of probability measures on CP¹.
//!
//! Energies of atomic measures diverge, so the rate functional and the
//! equilibrium solver replace each atom by the normalized ω_FS measure of a
//! chordal cap around it. The logarithmic part of the Green's kernel has
//! closed forms for caps, see [`cap_offset`] and [`cap_self_energy`].

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::geometry::{chordal_sq, ring_log_kernel, CP1Point, Quadrature, Ring, SupportGrid, WeightedGeometry};
use crate::special::gauss_legendre_on;
use crate::transport;
use crate::C64;

/// Point masses on CP¹. `rings`, when present, lists the points ring by ring and
/// marks the measure as a quadrature for the rotation-invariant measure with the
/// same ring masses.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    pub points: Vec<CP1Point>,
    pub weights: Vec<f64>,
    pub rings: Option<Vec<Ring>>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<CP1Point>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() || points.is_empty() {
            return Err(invalid("measure needs matching, nonempty point and weight lists"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid("negative weight"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("weights must sum to 1"));
        }
        Ok(Self { points, weights, rings: None })
    }

    pub fn uniform(points: Vec<CP1Point>) -> Result<Self> {
        let w = 1.0 / points.len() as f64;
        let n = points.len();
        Self::new(points, vec![w; n])
    }

    pub fn from_quadrature(q: &Quadrature) -> Self {
        Self { points: q.nodes.clone(), weights: q.weights.clone(), rings: q.rings.clone() }
    }

    pub fn dirac(p: CP1Point) -> Self {
        Self { points: vec![p], weights: vec![1.0], rings: None }
    }

    /// Uniform mixture `(1/M) Σ μ_m`.
    pub fn mixture(parts: &[DiscreteMeasure]) -> Result<Self> {
        if parts.is_empty() {
            return Err(invalid("empty mixture"));
        }
        let m = parts.len() as f64;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for p in parts {
            points.extend_from_slice(&p.points);
            weights.extend(p.weights.iter().map(|w| w / m));
        }
        Ok(Self { points, weights, rings: None })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyMode {
    /// `∬ G_h dμ dμ`; needs a ring layout, each ring read as its rotation average.
    Full,
    /// `Σ_{i≠j} w_i w_j G_h(ζ_i, ζ_j)`, i.e. `(1/N²) Σ_{i≠j}` for an empirical measure.
    OffDiagonal,
}

pub fn green_energy(mu: &DiscreteMeasure, geom: &WeightedGeometry, mode: EnergyMode) -> Result<f64> {
    match mode {
        EnergyMode::OffDiagonal => {
            let mut e = 0.0;
            for i in 0..mu.len() {
                for j in 0..i {
                    e += 2.0 * mu.weights[i] * mu.weights[j] * geom.green_function(mu.points[i], mu.points[j])?;
                }
            }
            Ok(e)
        }
        EnergyMode::Full => {
            let rings = mu.rings.as_ref().ok_or(Error::AtomicMeasure)?;
            Ok(ring_energy(rings, geom))
        }
    }
}

fn ring_energy(rings: &[Ring], geom: &WeightedGeometry) -> f64 {
    let mut e = 0.0;
    let mut mass_psi = 0.0;
    for r in rings {
        mass_psi += r.mass * geom.weight.psi_u(r.u());
        for s in rings {
            e += r.mass * s.mass * ring_log_kernel(r.u(), s.u());
        }
    }
    e - 2.0 * mass_psi + geom.green_constant
}

/// `U^μ_h(z) = ∫ G_h(z, w) dμ(w)`.
pub fn green_potential(mu: &DiscreteMeasure, geom: &WeightedGeometry, z: CP1Point) -> Result<f64> {
    let mut u = 0.0;
    for (&p, &w) in mu.points.iter().zip(&mu.weights) {
        if w == 0.0 {
            continue;
        }
        match geom.green_function(z, p) {
            Ok(g) => u += w * g,
            Err(Error::Diagonal) => return Err(Error::AtomCollision),
            Err(e) => return Err(e),
        }
    }
    Ok(u)
}

/// Exact W₁ under the chordal metric.
pub fn wasserstein(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    transport::w1(&mu.points, &mu.weights, &nu.points, &nu.weights)
}

/// `a(x)` with `x = ε²`: outside a cap of chordal radius `ε`, the `ln chord²`
/// potential of the cap's normalized ω_FS measure is `ln chord²(p, ·) + a(x)`.
pub fn cap_offset(x: f64) -> f64 {
    if x < 1e-4 {
        -(1..8).map(|k| x.powi(k) / (k * (k + 1)) as f64).sum::<f64>()
    } else if x >= 1.0 {
        -1.0
    } else {
        -((1.0 - x) * (-x).ln_1p() + x) / x
    }
}

/// `ln chord²` self-energy of a cap with `x = ε²`.
pub fn cap_self_energy(x: f64) -> f64 {
    if x >= 1.0 {
        return -1.0;
    }
    let inner = if x < 1e-4 {
        (2..10).map(|k| x.powi(k) / (k * (k - 1)) as f64).sum::<f64>()
    } else {
        (1.0 - x) * (-x).ln_1p() + x
    };
    x.ln() - 1.0 + (1.0 - x) * inner / (x * x)
}

/// `ln chord²` potential of a cap at squared chordal distance `u` from its centre.
fn cap_potential(x: f64, u: f64) -> f64 {
    if u >= x {
        u.ln() + cap_offset(x)
    } else {
        x.ln() - 1.0 - ((1.0 - x) / x) * (-u).ln_1p()
    }
}

/// Chordal isometry sending `p` to 0.
fn center_at(p: CP1Point, z: CP1Point) -> CP1Point {
    match (p, z) {
        (CP1Point::Infinity, _) => z.inverted(),
        (CP1Point::Finite(a), CP1Point::Infinity) => {
            if a == C64::new(0.0, 0.0) {
                CP1Point::Infinity
            } else {
                CP1Point::Finite(a.conj().inv())
            }
        }
        (CP1Point::Finite(a), CP1Point::Finite(w)) => {
            let den = C64::new(1.0, 0.0) + a.conj() * w;
            if den == C64::new(0.0, 0.0) {
                CP1Point::Infinity
            } else {
                CP1Point::Finite((w - a) / den)
            }
        }
    }
}

/// `∬ ln chord² dλ₁ dλ₂` for two caps `(p, ε)`.
pub fn cap_interaction(p1: CP1Point, e1: f64, p2: CP1Point, e2: f64) -> f64 {
    let (x1, x2) = ((e1 * e1).min(1.0), (e2 * e2).min(1.0));
    let d2 = chordal_sq(p1, p2);
    if d2 == 0.0 && x1 == x2 {
        return cap_self_energy(x1);
    }
    if d2.sqrt() >= e1 + e2 {
        return d2.ln() + cap_offset(x1) + cap_offset(x2);
    }
    // overlapping caps: average the potential of cap 2 over cap 1, centred at 0
    let q = center_at(p1, p2);
    let (us, ws) = gauss_legendre_on(24, 0.0, x1);
    let na = 48;
    let mut s = 0.0;
    for (&u, &w) in us.iter().zip(&ws) {
        let r = (u / (1.0 - u)).sqrt();
        for m in 0..na {
            let z = CP1Point::Finite(C64::from_polar(r, (m as f64 + 0.5) * core::f64::consts::TAU / na as f64));
            s += w * cap_potential(x2, chordal_sq(q, z));
        }
    }
    s / (x1 * na as f64)
}

/// How atoms are spread before energies are taken.
#[derive(Debug, Clone, PartialEq)]
pub enum Smoothing {
    /// Caps of radius `2/√n` for `n` atoms.
    Auto,
    Radius(f64),
    PerAtom(Vec<f64>),
}

impl Smoothing {
    fn radii(&self, n: usize) -> Result<Vec<f64>> {
        let r = match self {
            Smoothing::Auto => vec![(2.0 / (n as f64).sqrt()).min(1.0); n],
            Smoothing::Radius(e) => vec![e.min(1.0); n],
            Smoothing::PerAtom(v) => {
                if v.len() != n {
                    return Err(invalid("one smoothing radius per atom is required"));
                }
                v.iter().map(|e| e.min(1.0)).collect()
            }
        };
        if r.iter().any(|e| !(*e > 0.0)) {
            return Err(invalid("smoothing radii must be positive"));
        }
        Ok(r)
    }
}

/// Cap-smoothed Green kernel on a support grid.
pub fn grid_kernel(geom: &WeightedGeometry, grid: &SupportGrid) -> DMatrix<f64> {
    let n = grid.len();
    let psi: Vec<f64> = grid.points.iter().map(|&p| geom.psi(p)).collect();
    let x: Vec<f64> = grid.cap_radius.iter().map(|e| (e * e).min(1.0)).collect();
    let off: Vec<f64> = x.iter().map(|&x| cap_offset(x)).collect();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = cap_self_energy(x[i]) - 2.0 * psi[i] + geom.green_constant;
        for j in 0..i {
            let v = chordal_sq(grid.points[i], grid.points[j]).ln() + off[i] + off[j] - psi[i] - psi[j]
                + geom.green_constant;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverInit {
    Uniform,
    Vertex(usize),
    Random(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Target for `max_K U − min_{supp} U`.
    pub tol: f64,
    pub max_iter: usize,
    pub init: SolverInit,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 200_000, init: SolverInit::Uniform }
    }
}

/// A solved equilibrium problem on a grid, with everything needed to evaluate `I^{h,K}`.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub grid: SupportGrid,
    pub kernel: DMatrix<f64>,
    pub measure: DiscreteMeasure,
    /// Cap-averaged potential of the solution at every grid point.
    pub potential: Vec<f64>,
    /// Optimality gap `max U − min_{supp} U`.
    pub gap: f64,
    pub iterations: usize,
    /// `E(h) = ½𝓔(ν_eq) − sup_K U^{ν_eq}`.
    pub eh: f64,
}

fn support_gap(w: &[f64], km: &[f64]) -> f64 {
    let hi = km.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = w.iter().zip(km).filter(|(w, _)| **w > 0.0).map(|(_, k)| *k).fold(f64::INFINITY, f64::min);
    hi - lo
}

/// Minimizer of `I^{h,K}` over probability measures on `grid`.
///
/// Away-step Frank–Wolfe on `−½ μᵀKμ` identifies the support; an active-set
/// solve of the KKT system then drives the optimality gap to round-off.
pub fn equilibrium_measure(geom: &WeightedGeometry, grid: &SupportGrid, cfg: &SolverConfig) -> Result<Equilibrium> {
    let n = grid.len();
    if n > 8000 {
        return Err(invalid("grid too large for a dense kernel"));
    }
    let k = grid_kernel(geom, grid);
    let mut w = match cfg.init {
        SolverInit::Uniform => vec![1.0 / n as f64; n],
        SolverInit::Vertex(i) => {
            let mut v = vec![0.0; n];
            v[i.min(n - 1)] = 1.0;
            v
        }
        SolverInit::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        }
    };
    let mut km: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k[(i, j)] * w[j]).sum()).collect();
    let mut iterations = 0;
    let fw_tol = cfg.tol.max(1e-6);
    while iterations < cfg.max_iter {
        iterations += 1;
        let s = (0..n).max_by(|&a, &b| km[a].total_cmp(&km[b])).unwrap_or(0);
        let v = (0..n).filter(|&i| w[i] > 0.0).min_by(|&a, &b| km[a].total_cmp(&km[b])).unwrap_or(s);
        let mu_k_mu: f64 = w.iter().zip(&km).map(|(a, b)| a * b).sum();
        let fw_gap = km[s] - mu_k_mu;
        let away_gap = mu_k_mu - km[v];
        if km[s] - km[v] <= fw_tol {
            break;
        }
        // direction d = e_s − μ (toward) or μ − e_v (away)
        let (toward, gmax) = if fw_gap >= away_gap { (true, 1.0) } else { (false, w[v] / (1.0 - w[v]).max(1e-300)) };
        let (g, q) = if toward {
            (fw_gap, -(k[(s, s)] - 2.0 * km[s] + mu_k_mu))
        } else {
            (away_gap, -(mu_k_mu - 2.0 * km[v] + k[(v, v)]))
        };
        let gamma = if q > 0.0 { (g / q).min(gmax) } else { gmax };
        if toward {
            for (i, wi) in w.iter_mut().enumerate() {
                *wi *= 1.0 - gamma;
                if i == s {
                    *wi += gamma;
                }
            }
            for (i, ki) in km.iter_mut().enumerate() {
                *ki = (1.0 - gamma) * *ki + gamma * k[(i, s)];
            }
        } else {
            for (i, wi) in w.iter_mut().enumerate() {
                *wi *= 1.0 + gamma;
                if i == v {
                    *wi -= gamma;
                }
            }
            if gamma >= gmax {
                w[v] = 0.0;
            }
            for (i, ki) in km.iter_mut().enumerate() {
                *ki = (1.0 + gamma) * *ki - gamma * k[(i, v)];
            }
        }
    }
    let (w, km) = active_set(&k, w, cfg.tol, cfg.max_iter);
    let gap = support_gap(&w, &km);
    if !(gap <= cfg.tol) {
        return Err(Error::NotCertified { gap, iterations });
    }
    let energy: f64 = w.iter().zip(&km).map(|(a, b)| a * b).sum();
    let sup = km.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let measure = DiscreteMeasure { points: grid.points.clone(), weights: w, rings: None };
    Ok(Equilibrium { grid: grid.clone(), kernel: k, measure, potential: km, gap, iterations, eh: 0.5 * energy - sup })
}

/// Primal active-set refinement: solve `K_SS μ_S = λ 1`, `Σ μ_S = 1` on the current
/// support, step back to feasibility, and add the worst off-support violator.
fn active_set(k: &DMatrix<f64>, mut w: Vec<f64>, tol: f64, max_iter: usize) -> (Vec<f64>, Vec<f64>) {
    let n = w.len();
    let kmul = |w: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| k[(i, j)] * w[j]).sum()).collect() };
    let mut support: Vec<usize> = (0..n).filter(|&i| w[i] > 1e-14).collect();
    let mut km = kmul(&w);
    for _ in 0..max_iter.min(4 * n + 10) {
        if support_gap(&w, &km) <= 0.01 * tol {
            break;
        }
        let m = support.len();
        let mut a = DMatrix::zeros(m + 1, m + 1);
        let mut b = DVector::zeros(m + 1);
        for (r, &i) in support.iter().enumerate() {
            for (c, &j) in support.iter().enumerate() {
                a[(r, c)] = k[(i, j)];
            }
            a[(r, m)] = -1.0;
            a[(m, r)] = 1.0;
        }
        b[m] = 1.0;
        let Some(sol) = a.lu().solve(&b) else { break };
        // largest step toward the KKT point that keeps weights nonnegative
        let mut t = 1.0f64;
        let mut blocking = None;
        for (r, &i) in support.iter().enumerate() {
            let target = sol[r];
            if target < 0.0 {
                let ti = w[i] / (w[i] - target);
                if ti < t {
                    t = ti;
                    blocking = Some(i);
                }
            }
        }
        for (r, &i) in support.iter().enumerate() {
            w[i] += t * (sol[r] - w[i]);
        }
        if let Some(i) = blocking {
            w[i] = 0.0;
            support.retain(|&j| j != i);
            km = kmul(&w);
            continue;
        }
        km = kmul(&w);
        let lambda = support.iter().map(|&i| km[i]).sum::<f64>() / support.len() as f64;
        let worst = (0..n)
            .filter(|i| !support.contains(i))
            .max_by(|&a, &b| km[a].total_cmp(&km[b]));
        match worst {
            Some(i) if km[i] > lambda + 0.01 * tol => {
                support.push(i);
                support.sort_unstable();
            }
            _ => break,
        }
    }
    for x in w.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    let km = kmul(&w);
    (w, km)
}

/// `E(h)` pinned by `I^{h,K}(ν_eq) = 0`.
pub fn calibrate_eh(geom: &WeightedGeometry, grid: &SupportGrid, cfg: &SolverConfig) -> Result<f64> {
    Ok(equilibrium_measure(geom, grid, cfg)?.eh)
}

/// `I^{h,K}(μ) = −½𝓔_h(μ) + sup_K U^μ_h + E(h)`, term by term.
#[derive(Debug, Clone, PartialEq)]
pub struct RateValue {
    pub energy: f64,
    pub sup_potential: f64,
    pub eh_constant: f64,
    pub total: f64,
    /// Cap radii used for the atoms of an atomic input (empty for ring measures).
    pub smoothing_radii: Vec<f64>,
}

impl RateValue {
    fn new(energy: f64, sup_potential: f64, eh: f64, radii: Vec<f64>) -> Self {
        Self { energy, sup_potential, eh_constant: eh, total: -0.5 * energy + sup_potential + eh, smoothing_radii: radii }
    }
}

/// Rate functional on a weight vector over the solver grid itself.
pub fn rate_on_grid(eq: &Equilibrium, w: &[f64]) -> RateValue {
    let n = w.len();
    let km: Vec<f64> = (0..n).map(|i| (0..n).map(|j| eq.kernel[(i, j)] * w[j]).sum()).collect();
    let energy = w.iter().zip(&km).map(|(a, b)| a * b).sum();
    let sup = km.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    RateValue::new(energy, sup, eq.eh, eq.grid.cap_radius.clone())
}

/// `I^{h,K}(μ)` with the sup over the grid of `eq`. Ring measures are taken as
/// continuous rings; atomic measures are cap-smoothed per `smoothing`.
pub fn rate_functional(mu: &DiscreteMeasure, geom: &WeightedGeometry, eq: &Equilibrium, smoothing: &Smoothing) -> Result<RateValue> {
    let grid = &eq.grid;
    let c = geom.green_constant;
    let gx: Vec<f64> = grid.cap_radius.iter().map(|e| (e * e).min(1.0)).collect();
    let gpsi: Vec<f64> = grid.points.iter().map(|&p| geom.psi(p)).collect();
    if let Some(rings) = &mu.rings {
        let energy = ring_energy(rings, geom);
        let mass_psi: f64 = rings.iter().map(|r| r.mass * geom.weight.psi_u(r.u())).sum();
        let sup = (0..grid.len())
            .map(|i| {
                let ui = grid.points[i].u();
                rings.iter().map(|r| r.mass * ring_log_kernel(ui, r.u())).sum::<f64>() + cap_offset(gx[i]) - gpsi[i]
                    - mass_psi
                    + c
            })
            .fold(f64::NEG_INFINITY, f64::max);
        return Ok(RateValue::new(energy, sup, eq.eh, Vec::new()));
    }
    let radii = smoothing.radii(mu.len())?;
    let psi: Vec<f64> = mu.points.iter().map(|&p| geom.psi(p)).collect();
    let mass_psi: f64 = mu.weights.iter().zip(&psi).map(|(w, p)| w * p).sum();
    let mut log_e = 0.0;
    for i in 0..mu.len() {
        log_e += mu.weights[i] * mu.weights[i] * cap_self_energy((radii[i] * radii[i]).min(1.0));
        for j in 0..i {
            log_e += 2.0 * mu.weights[i] * mu.weights[j] * cap_interaction(mu.points[i], radii[i], mu.points[j], radii[j]);
        }
    }
    let energy = log_e - 2.0 * mass_psi + c;
    let sup = (0..grid.len())
        .map(|g| {
            let mut s = 0.0;
            for j in 0..mu.len() {
                s += mu.weights[j] * cap_interaction(grid.points[g], grid.cap_radius[g], mu.points[j], radii[j]);
            }
            s - gpsi[g] - mass_psi + c
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(RateValue::new(energy, sup, eq.eh, radii))
}
