//! Weights, quadrature rules, the chordal metric and the Green's function on CP¹.
//!
//! A weight `φ` on `O(1)` is stored through the smooth function
//! `ψ = φ − ln(1+|z|²)`, which extends across ∞. Most radial quantities are
//! expressed in `u = |z|²/(1+|z|²) ∈ [0, 1]`, the ω_FS mass of the disk of
//! radius `|z|`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::special::gauss_legendre_on;
use crate::C64;

/// A point of the Riemann sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CP1Point {
    Finite(C64),
    Infinity,
}

impl CP1Point {
    pub fn new(re: f64, im: f64) -> Self {
        CP1Point::Finite(C64::new(re, im))
    }

    pub fn finite(&self) -> Option<C64> {
        match *self {
            CP1Point::Finite(z) => Some(z),
            CP1Point::Infinity => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, CP1Point::Infinity)
    }

    /// `|z|²/(1+|z|²)`, equal to 1 at ∞.
    pub fn u(&self) -> f64 {
        match *self {
            CP1Point::Finite(z) => {
                let t = z.norm_sqr();
                if t > 1.0 {
                    1.0 / (1.0 + 1.0 / t)
                } else {
                    t / (1.0 + t)
                }
            }
            CP1Point::Infinity => 1.0,
        }
    }

    /// The antipodal-chart coordinate `1/z`.
    pub fn inverted(&self) -> CP1Point {
        match *self {
            CP1Point::Finite(z) if z == C64::new(0.0, 0.0) => CP1Point::Infinity,
            CP1Point::Finite(z) => CP1Point::Finite(z.inv()),
            CP1Point::Infinity => CP1Point::Finite(C64::new(0.0, 0.0)),
        }
    }

    pub fn conj(&self) -> CP1Point {
        match *self {
            CP1Point::Finite(z) => CP1Point::Finite(z.conj()),
            CP1Point::Infinity => CP1Point::Infinity,
        }
    }

    pub fn rotate(&self, theta: f64) -> CP1Point {
        match *self {
            CP1Point::Finite(z) => CP1Point::Finite(z * C64::from_polar(1.0, theta)),
            CP1Point::Infinity => CP1Point::Infinity,
        }
    }
}

impl From<C64> for CP1Point {
    fn from(z: C64) -> Self {
        CP1Point::Finite(z)
    }
}

/// `ln(1 + |z|²)`.
pub fn fs_weight(z: C64) -> f64 {
    z.norm_sqr().ln_1p()
}

/// Chordal distance `|z−w| / √((1+|z|²)(1+|w|²))`, in `[0, 1]`.
pub fn chordal_dist(p: CP1Point, q: CP1Point) -> f64 {
    chordal_sq(p, q).sqrt()
}

/// Squared chordal distance.
pub fn chordal_sq(p: CP1Point, q: CP1Point) -> f64 {
    match (p, q) {
        (CP1Point::Infinity, CP1Point::Infinity) => 0.0,
        (CP1Point::Finite(z), CP1Point::Infinity) | (CP1Point::Infinity, CP1Point::Finite(z)) => {
            1.0 - CP1Point::Finite(z).u()
        }
        (CP1Point::Finite(z), CP1Point::Finite(w)) => {
            let (a, b) = (z.norm_sqr(), w.norm_sqr());
            let d = if a > 1.0 && b > 1.0 {
                // both near ∞: |1/z − 1/w|² / ((1+|1/z|²)(1+|1/w|²))
                let (zi, wi) = (z.inv(), w.inv());
                (zi - wi).norm_sqr() / ((1.0 + zi.norm_sqr()) * (1.0 + wi.norm_sqr()))
            } else {
                (z - w).norm_sqr() / ((1.0 + a) * (1.0 + b))
            };
            d.min(1.0)
        }
    }
}

/// The weights supported on `O(1)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    /// `φ = ln(1+|z|²)`, `ω_h = ω_FS`.
    FubiniStudy,
    /// `φ = max(0, ln|z|²)`, `ω_h = δ_{S¹}`: flat on the unit disk.
    FlatOnDisk,
    /// `φ = ln(1+|z|²) + Σ_j c_j x^j` with `x = 2u − 1`.
    Radial(Vec<f64>),
}

/// Local data of the weight in one of the two standard charts.
#[derive(Debug, Clone, Copy)]
pub struct ChartData {
    pub phi: f64,
    /// `α = −∂φ`, the `dz` coefficient of the Chern connection `h⁻¹∂h`.
    pub alpha: C64,
    /// `|dt|²_g` for the chart coordinate `t`.
    pub metric: f64,
}

impl Weight {
    fn radial_poly(c: &[f64], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &cj| (acc + cj) * x)
    }

    fn radial_dpoly(c: &[f64], x: f64) -> f64 {
        c.iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (j, &cj)| acc * x + (j + 1) as f64 * cj)
    }

    fn radial_d2poly(c: &[f64], x: f64) -> f64 {
        c.iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (j, &cj)| acc * x + ((j + 1) * j) as f64 * cj)
    }

    /// `ψ = φ − ln(1+|z|²)` as a function of `u`.
    pub fn psi_u(&self, u: f64) -> f64 {
        match self {
            Weight::FubiniStudy => 0.0,
            Weight::FlatOnDisk => {
                if u <= 0.5 {
                    (-u).ln_1p()
                } else {
                    u.ln()
                }
            }
            Weight::Radial(c) => Self::radial_poly(c, 2.0 * u - 1.0),
        }
    }

    pub fn psi(&self, p: CP1Point) -> f64 {
        match (self, p) {
            (Weight::FubiniStudy, _) => 0.0,
            (Weight::FlatOnDisk, CP1Point::Finite(z)) => {
                let t = z.norm_sqr();
                t.ln().max(0.0) - t.ln_1p()
            }
            _ => self.psi_u(p.u()),
        }
    }

    /// The local weight `φ(z)` in the standard chart.
    pub fn phi(&self, z: C64) -> f64 {
        let t = z.norm_sqr();
        match self {
            Weight::FubiniStudy => t.ln_1p(),
            Weight::FlatOnDisk => t.ln().max(0.0),
            Weight::Radial(_) => t.ln_1p() + self.psi(CP1Point::Finite(z)),
        }
    }

    /// Radial distribution function of `ω_h`: the mass of `{u(z) ≤ u}`.
    pub fn omega_cdf(&self, u: f64) -> f64 {
        match self {
            Weight::FubiniStudy => u,
            Weight::FlatOnDisk => {
                if u < 0.5 {
                    0.0
                } else {
                    1.0
                }
            }
            Weight::Radial(c) => u + 2.0 * u * (1.0 - u) * Self::radial_dpoly(c, 2.0 * u - 1.0),
        }
    }

    /// Density of `ω_h` with respect to `du` (not defined for the flat weight).
    pub fn omega_density(&self, u: f64) -> f64 {
        match self {
            Weight::FubiniStudy => 1.0,
            Weight::FlatOnDisk => 0.0,
            Weight::Radial(c) => {
                let x = 2.0 * u - 1.0;
                1.0 - 2.0 * x * Self::radial_dpoly(c, x) + 4.0 * u * (1.0 - u) * Self::radial_d2poly(c, x)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Weight::Radial(c) = self {
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidWeight("non-finite radial coefficient".into()));
            }
            for i in 0..=2000 {
                let u = i as f64 / 2000.0;
                if self.omega_density(u) <= 0.0 {
                    return Err(Error::InvalidWeight(format!(
                        "curvature is not positive at u = {u}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Weight data in the chart `t = z` (`outer = false`) or `t = 1/z`.
    pub fn chart(&self, t: C64, outer: bool) -> ChartData {
        let s = t.norm_sqr();
        match self {
            Weight::FubiniStudy => ChartData {
                phi: s.ln_1p(),
                alpha: -t.conj() / (1.0 + s),
                metric: (1.0 + s) * (1.0 + s),
            },
            Weight::FlatOnDisk => {
                if outer {
                    // z outside the disk: φ − ln|z|² = 0, metric |dz|² = |w|⁻⁴|dw|²
                    ChartData { phi: 0.0, alpha: C64::new(0.0, 0.0), metric: s * s }
                } else if s <= 1.0 + 1e-12 {
                    ChartData { phi: 0.0, alpha: C64::new(0.0, 0.0), metric: 1.0 }
                } else {
                    ChartData { phi: s.ln(), alpha: -t.inv(), metric: 1.0 }
                }
            }
            Weight::Radial(c) => {
                let sign = if outer { -1.0 } else { 1.0 };
                let f = |s: f64| s.ln_1p() + Self::radial_poly(c, sign * (2.0 * s / (1.0 + s) - 1.0));
                let h = 1e-5 * s.max(1.0);
                let lo = (s - h).max(0.0);
                let df = (f(s + h) - f(lo)) / (s + h - lo);
                ChartData { phi: f(s), alpha: -t.conj() * df, metric: (1.0 + s) * (1.0 + s) }
            }
        }
    }
}

/// A ring of equally spaced nodes `ρ e^{i(phase + 2πm/count)}` carrying total mass `mass`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ring {
    pub radius: f64,
    pub count: usize,
    pub phase: f64,
    pub mass: f64,
}

impl Ring {
    pub fn u(&self) -> f64 {
        let t = self.radius * self.radius;
        t / (1.0 + t)
    }
}

/// Nodes and nonnegative weights. `rings`, when present, lists the nodes in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<CP1Point>,
    pub weights: Vec<f64>,
    pub rings: Option<Vec<Ring>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadratureKind {
    Circle(usize),
    SphereGrid(usize, usize),
    Curvature(usize),
}

impl Quadrature {
    pub fn new(nodes: Vec<CP1Point>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(invalid("node and weight counts differ"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid("negative quadrature weight"));
        }
        Ok(Self { nodes, weights, rings: None })
    }

    pub fn from_rings(rings: Vec<Ring>) -> Self {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for r in &rings {
            for m in 0..r.count {
                let ang = r.phase + 2.0 * PI * m as f64 / r.count as f64;
                nodes.push(CP1Point::Finite(C64::from_polar(r.radius, ang)));
                weights.push(r.mass / r.count as f64);
            }
        }
        Self { nodes, weights, rings: Some(rings) }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, mut f: impl FnMut(CP1Point) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }

    pub fn integrate_complex(&self, mut f: impl FnMut(CP1Point) -> C64) -> C64 {
        self.nodes.iter().zip(&self.weights).map(|(&p, &w)| f(p) * w).sum()
    }

    /// `n` equispaced unit-circle nodes of weight `1/n`: the measure `δ_{S¹}`.
    pub fn circle(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("circle quadrature needs n >= 1"));
        }
        Ok(Self::from_rings(vec![Ring { radius: 1.0, count: n, phase: 0.0, mass: 1.0 }]))
    }

    /// Midpoint product rule for ω_FS in `(θ, arg z)`, `θ` the polar angle.
    pub fn sphere_grid(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta == 0 || n_phi == 0 {
            return Err(invalid("sphere grid needs positive sizes"));
        }
        let h = PI / n_theta as f64;
        let u_of = |th: f64| {
            let s = (0.5 * th).sin();
            s * s
        };
        let rings = (0..n_theta)
            .map(|i| {
                let th = (i as f64 + 0.5) * h;
                Ring {
                    radius: (0.5 * th).tan(),
                    count: n_phi,
                    phase: 0.0,
                    mass: u_of((i + 1) as f64 * h) - u_of(i as f64 * h),
                }
            })
            .collect();
        Ok(Self::from_rings(rings))
    }

    /// A rule for `ω_h`: Gauss–Legendre in `u` with `n` nodes and `2n` angles.
    pub fn curvature(weight: &Weight, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("curvature quadrature needs n >= 1"));
        }
        if *weight == Weight::FlatOnDisk {
            return Self::circle(n);
        }
        let (us, ws) = gauss_legendre_on(n, 0.0, 1.0);
        let rings = us
            .iter()
            .zip(&ws)
            .map(|(&u, &w)| Ring {
                radius: (u / (1.0 - u)).sqrt(),
                count: 2 * n,
                phase: 0.0,
                mass: w * weight.omega_density(u),
            })
            .collect();
        Ok(Self::from_rings(rings))
    }

    pub fn build(kind: QuadratureKind, weight: &Weight) -> Result<Self> {
        match kind {
            QuadratureKind::Circle(n) => Self::circle(n),
            QuadratureKind::SphereGrid(a, b) => Self::sphere_grid(a, b),
            QuadratureKind::Curvature(n) => Self::curvature(weight, n),
        }
    }

    /// The ring, when the rule is a single ring on the unit circle.
    pub fn unit_circle_ring(&self) -> Option<Ring> {
        match self.rings.as_deref() {
            Some([r]) if r.radius == 1.0 => Some(*r),
            _ => None,
        }
    }
}

/// What the compact set `K = supp ν` is taken to be.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupportSpec {
    Full,
    Circle,
    DiskRadius(f64),
}

/// A finite point set sampling `K`, with a non-overlapping chordal cap around each point.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportGrid {
    pub spec: SupportSpec,
    pub points: Vec<CP1Point>,
    /// ω_FS mass of the cell each point represents.
    pub cell_mass: Vec<f64>,
    /// Chordal radius of the smoothing cap of each point.
    pub cap_radius: Vec<f64>,
    /// Largest nearest-neighbour chordal distance.
    pub spacing: f64,
}

impl SupportGrid {
    /// About `n` points covering `K`.
    pub fn new(spec: SupportSpec, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid("support grid needs at least 2 points"));
        }
        let (points, cell_mass) = match spec {
            SupportSpec::Circle => {
                let pts = (0..n)
                    .map(|m| CP1Point::Finite(C64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64)))
                    .collect();
                (pts, vec![1.0 / n as f64; n])
            }
            SupportSpec::Full => band_grid(PI, n),
            SupportSpec::DiskRadius(r) => {
                if !(r > 0.0) {
                    return Err(invalid("disk radius must be positive"));
                }
                band_grid(2.0 * r.atan(), n)
            }
        };
        let nn = nearest_neighbour(&points);
        let spacing = nn.iter().cloned().fold(0.0, f64::max);
        let cap_radius = match spec {
            // self-energy ln ε² − ½ = −ln 4n² makes Σ_j G(ζ_i, ζ_j)/n match the
            // continuous circle, where the mean of ln chord² is −ln 4
            SupportSpec::Circle => vec![0.25f64.exp() / (2.0 * n as f64); n],
            _ => cell_mass.iter().zip(&nn).map(|(m, d)| m.sqrt().min(0.5 * d)).collect(),
        };
        Ok(Self { spec, points, cell_mass, cap_radius, spacing })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Equal-area-ish bands covering the polar cap `θ ≤ theta_max`.
fn band_grid(theta_max: f64, n: usize) -> (Vec<CP1Point>, Vec<f64>) {
    let u_of = |th: f64| {
        let s = (0.5 * th).sin();
        s * s
    };
    let total = u_of(theta_max);
    let cell_area = 4.0 * PI * total / n as f64;
    let bands = ((theta_max / cell_area.sqrt()).round() as usize).max(1);
    let h = theta_max / bands as f64;
    let mut pts = Vec::new();
    let mut mass = Vec::new();
    for i in 0..bands {
        let (u0, u1) = (u_of(i as f64 * h), u_of((i + 1) as f64 * h));
        let m = ((n as f64 * (u1 - u0) / total).round() as usize).max(1);
        let um = 0.5 * (u0 + u1);
        let r = (um / (1.0 - um)).sqrt();
        let phase = if i % 2 == 1 { PI / m as f64 } else { 0.0 };
        for j in 0..m {
            pts.push(CP1Point::Finite(C64::from_polar(r, phase + 2.0 * PI * j as f64 / m as f64)));
            mass.push((u1 - u0) / m as f64);
        }
    }
    (pts, mass)
}

fn nearest_neighbour(points: &[CP1Point]) -> Vec<f64> {
    points
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &q)| chordal_dist(p, q))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Weight, `ω_h`, `ν`, `K` and the Green constant: everything needed to integrate over CP¹.
#[derive(Debug, Clone)]
pub struct WeightedGeometry {
    pub weight: Weight,
    pub curvature_quadrature: Quadrature,
    pub nu: Quadrature,
    pub support_grid: SupportGrid,
    pub green_constant: f64,
}

impl WeightedGeometry {
    pub fn new(weight: Weight, nu: Quadrature, support_grid: SupportGrid, curvature_n: usize) -> Result<Self> {
        weight.validate()?;
        let nu_mass = nu.mass();
        if (nu_mass - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("ν has total mass {nu_mass}, expected 1")));
        }
        let curvature_quadrature = Quadrature::curvature(&weight, curvature_n)?;
        let cq_mass = curvature_quadrature.mass();
        if (cq_mass - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("ω_h quadrature has mass {cq_mass}")));
        }
        for p in nu.nodes.iter().chain(&curvature_quadrature.nodes) {
            if !weight.psi(*p).is_finite() {
                return Err(Error::InvalidWeight("weight is not finite on a quadrature node".into()));
            }
        }
        let green_constant = green_constant_for(&weight)?;
        Ok(Self { weight, curvature_quadrature, nu, support_grid, green_constant })
    }

    /// `φ = ln(1+|z|²)` with `ν` given and `K = CP¹`.
    pub fn fubini_study(nu: Quadrature, grid_size: usize) -> Result<Self> {
        Self::new(Weight::FubiniStudy, nu, SupportGrid::new(SupportSpec::Full, grid_size)?, 64)
    }

    /// The Kac–Hammersley geometry: flat weight on the disk, `ν = δ_{S¹}` with `n` nodes.
    pub fn kac_hammersley(n_nodes: usize, grid_size: usize) -> Result<Self> {
        Self::new(
            Weight::FlatOnDisk,
            Quadrature::circle(n_nodes)?,
            SupportGrid::new(SupportSpec::Circle, grid_size)?,
            n_nodes,
        )
    }

    /// Node count making `|s|^{2k}` exact on the circle for degree `n`, rounded up to a power of two.
    pub fn kh_nodes(n: usize, k: usize) -> usize {
        (2 * k * n + 2).next_power_of_two()
    }

    pub fn with_green_constant(mut self, c: f64) -> Self {
        self.green_constant = c;
        self
    }

    pub fn psi(&self, p: CP1Point) -> f64 {
        self.weight.psi(p)
    }

    /// `G_h(z, w) = ln(|z−w|² e^{−φ(z)−φ(w)}) + c_h`.
    pub fn green_function(&self, z: CP1Point, w: CP1Point) -> Result<f64> {
        let d = chordal_sq(z, w);
        if d == 0.0 {
            return Err(Error::Diagonal);
        }
        Ok(d.ln() - self.psi(z) - self.psi(w) + self.green_constant)
    }
}

/// `ln max(u, v) + ln(1 − min(u, v))`: the angular average of `ln chord²` between two circles.
pub fn ring_log_kernel(u: f64, v: f64) -> f64 {
    let (lo, hi) = if u < v { (u, v) } else { (v, u) };
    hi.ln() + (-lo).ln_1p()
}

/// `c_h` such that `∫ G_h(z, ·) ω_h = 0`; checked to be independent of `z`.
fn green_constant_for(weight: &Weight) -> Result<f64> {
    match weight {
        Weight::FubiniStudy => Ok(1.0),
        Weight::FlatOnDisk => Ok(0.0),
        Weight::Radial(_) => {
            let n = 96;
            let (ua, wa) = gauss_legendre_on(n, 0.0, 1.0);
            let mean_psi: f64 = ua.iter().zip(&wa).map(|(&u, &w)| w * weight.omega_density(u) * weight.psi_u(u)).sum();
            let at = |uz: f64| {
                let mut s = 0.0;
                for (a, b) in [(0.0, uz), (uz, 1.0)] {
                    let (us, ws) = gauss_legendre_on(n, a, b);
                    s += us
                        .iter()
                        .zip(&ws)
                        .map(|(&u, &w)| w * weight.omega_density(u) * ring_log_kernel(uz, u))
                        .sum::<f64>();
                }
                -(s - weight.psi_u(uz) - mean_psi)
            };
            let c = at(0.5);
            for uz in [0.15, 0.3, 0.7, 0.85] {
                let d = (at(uz) - c).abs();
                if d > 1e-6 {
                    return Err(Error::InvalidWeight(format!(
                        "Green constant varies by {d:e} across the sphere"
                    )));
                }
            }
            Ok(c)
        }
    }
}
