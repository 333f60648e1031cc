//! Polynomial sections of `O(N)` and the P(φ)₂ action.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::geometry::{CP1Point, Quadrature, Weight, WeightedGeometry};
use crate::special::FftPlan;
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// A degree-`N` polynomial `s(z) = Σ_j a_{N−j} z^j`, stored leading coefficient first.
#[derive(Debug, Clone, PartialEq)]
pub struct PolySection {
    pub coeffs: Vec<C64>,
}

impl PolySection {
    /// Coefficients `a_0..a_N`, leading first. The zero polynomial is allowed.
    pub fn new(coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(invalid("a section needs degree N >= 1"));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(invalid("non-finite coefficient"));
        }
        Ok(Self { coeffs })
    }

    /// From the coefficients of `1, z, …, z^N`.
    pub fn from_ascending(mut asc: Vec<C64>) -> Result<Self> {
        asc.reverse();
        Self::new(asc)
    }

    pub fn monomial(n: usize, j: usize) -> Self {
        let mut asc = vec![ZERO; n + 1];
        asc[j] = C64::new(1.0, 0.0);
        Self::from_ascending(asc).expect("degree >= 1")
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> C64 {
        self.coeffs[0]
    }

    /// Coefficients of `1, z, …, z^N`.
    pub fn ascending(&self) -> Vec<C64> {
        self.coeffs.iter().rev().copied().collect()
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().fold(ZERO, |acc, &c| acc * z + c)
    }

    pub fn scale(&self, lambda: C64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * lambda).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }
}

/// `P(x) = Σ_{j=1}^k c_j x^j` with `c_k = 1`, plus whether the kinetic term is on.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub k: usize,
    pub c: Vec<f64>,
    pub include_kinetic: bool,
}

impl PotentialSpec {
    pub fn new(c: Vec<f64>, include_kinetic: bool) -> Result<Self> {
        let k = c.len();
        if k == 0 {
            return Err(invalid("potential needs k >= 1"));
        }
        if c[k - 1] != 1.0 {
            return Err(invalid("potential must be normalized with c_k = 1"));
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(invalid("non-finite potential coefficient"));
        }
        Ok(Self { k, c, include_kinetic })
    }

    /// The Gaussian ensemble `P(x) = x`.
    pub fn gaussian() -> Self {
        Self { k: 1, c: vec![1.0], include_kinetic: false }
    }

    /// `P(x) = x²`.
    pub fn quartic(include_kinetic: bool) -> Self {
        Self { k: 2, c: vec![0.0, 1.0], include_kinetic }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, &cj| (acc + cj) * x)
    }
}

/// Per-node weight data for one quadrature rule at a fixed degree.
#[derive(Debug, Clone, Copy)]
struct NodeFrame {
    weight: f64,
    outer: bool,
    t: C64,
    /// `e^{−Nφ/2}` in the node's chart.
    sqrt_scale: f64,
    /// `N α` in the node's chart.
    n_alpha: C64,
    sqrt_metric: f64,
}

/// Evaluates `|s|²_{h^N}` and the kinetic density of degree-`N` sections on a fixed rule.
///
/// Nodes with `|z| > 1` are handled in the chart `w = 1/z` so nothing overflows at large `N`.
/// A single unit-circle ring with a power-of-two node count is evaluated by FFT.
#[derive(Debug)]
pub struct SectionEvaluator {
    degree: usize,
    frames: Vec<NodeFrame>,
    fft: Option<FftPlan>,
}

impl SectionEvaluator {
    pub fn new(quad: &Quadrature, weight: &Weight, degree: usize) -> Self {
        let n = degree as f64;
        let frames = quad
            .nodes
            .iter()
            .zip(&quad.weights)
            .map(|(&p, &w)| {
                let (t, outer) = match p {
                    // the unit circle itself belongs to the closed disk
                    CP1Point::Finite(z) if z.norm_sqr() <= 1.0 + 1e-12 => (z, false),
                    other => (other.inverted().finite().expect("inverse of a far point is finite"), true),
                };
                let cd = weight.chart(t, outer);
                NodeFrame {
                    weight: w,
                    outer,
                    t,
                    sqrt_scale: (-0.5 * n * cd.phi).exp(),
                    n_alpha: cd.alpha * n,
                    sqrt_metric: cd.metric.sqrt(),
                }
            })
            .collect();
        let fft = quad
            .unit_circle_ring()
            .filter(|r| r.phase == 0.0 && r.count.is_power_of_two() && r.count > degree)
            .map(|r| FftPlan::new(r.count));
        Self { degree, frames, fft }
    }

    pub fn for_nu(geom: &WeightedGeometry, degree: usize) -> Self {
        Self::new(&geom.nu, &geom.weight, degree)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.frames.iter().map(|f| f.weight)
    }

    /// Chart values `(q, q')` of the section at every node.
    fn values(&self, s: &PolySection) -> Vec<(C64, C64)> {
        assert_eq!(s.degree(), self.degree, "section degree does not match the evaluator");
        if let Some(plan) = &self.fft {
            let n = plan.len();
            let mut v = vec![ZERO; n];
            let mut d = vec![ZERO; n];
            for (j, c) in s.coeffs.iter().rev().enumerate() {
                v[j] = *c;
                d[j] = c * j as f64;
            }
            plan.evaluate_on_roots(&mut v);
            plan.evaluate_on_roots(&mut d);
            return self
                .frames
                .iter()
                .enumerate()
                .map(|(m, f)| (v[m], d[m] * f.t.conj()))
                .collect();
        }
        self.frames
            .iter()
            .map(|f| {
                let (mut q, mut dq) = (ZERO, ZERO);
                let mut step = |c: C64| {
                    dq = dq * f.t + q;
                    q = q * f.t + c;
                };
                if f.outer {
                    s.coeffs.iter().rev().for_each(|&c| step(c));
                } else {
                    s.coeffs.iter().for_each(|&c| step(c));
                }
                (q, dq)
            })
            .collect()
    }

    /// Per-node `|s|²_{h^N}` and, if requested, `|∇s|²_g`.
    pub fn densities(&self, s: &PolySection, kinetic: bool) -> (Vec<f64>, Vec<f64>) {
        let vals = self.values(s);
        let mut norm = Vec::with_capacity(vals.len());
        let mut kin = Vec::with_capacity(if kinetic { vals.len() } else { 0 });
        for (f, (q, dq)) in self.frames.iter().zip(vals) {
            norm.push((q * f.sqrt_scale).norm_sqr());
            if kinetic {
                kin.push(((dq + f.n_alpha * q) * (f.sqrt_scale * f.sqrt_metric)).norm_sqr());
            }
        }
        (norm, kin)
    }

    pub fn norm_sq(&self, s: &PolySection) -> f64 {
        let (norm, _) = self.densities(s, false);
        self.frames.iter().zip(norm).map(|(f, x)| f.weight * x).sum()
    }

    pub fn kinetic(&self, s: &PolySection) -> f64 {
        let (_, kin) = self.densities(s, true);
        self.frames.iter().zip(kin).map(|(f, x)| f.weight * x).sum()
    }

    pub fn action(&self, s: &PolySection, spec: &PotentialSpec) -> f64 {
        let (norm, kin) = self.densities(s, spec.include_kinetic);
        let pot: f64 = self.frames.iter().zip(&norm).map(|(f, &x)| f.weight * spec.eval(x)).sum();
        pot + self.frames.iter().zip(&kin).map(|(f, x)| f.weight * x).sum::<f64>()
    }
}

pub fn weighted_norm_sq(s: &PolySection, geom: &WeightedGeometry) -> f64 {
    SectionEvaluator::for_nu(geom, s.degree()).norm_sq(s)
}

/// `‖∇s‖²` for the Chern connection of `h^N` and the base metric `g`.
pub fn kinetic_energy(s: &PolySection, geom: &WeightedGeometry) -> f64 {
    SectionEvaluator::for_nu(geom, s.degree()).kinetic(s)
}

/// `S(s) = [kinetic] ‖∇s‖² + ∫ P(|s|²_{h^N}) dν`.
pub fn action(s: &PolySection, spec: &PotentialSpec, geom: &WeightedGeometry) -> f64 {
    SectionEvaluator::for_nu(geom, s.degree()).action(s, spec)
}

/// `‖∇s‖² / ‖s‖²`.
pub fn bernstein_ratio(s: &PolySection, geom: &WeightedGeometry) -> Result<f64> {
    let ev = SectionEvaluator::for_nu(geom, s.degree());
    let (norm, kin) = ev.densities(s, true);
    let w: Vec<f64> = ev.weights().collect();
    let n: f64 = w.iter().zip(&norm).map(|(a, b)| a * b).sum();
    if !(n > 0.0) {
        return Err(Error::DegenerateSection);
    }
    Ok(w.iter().zip(&kin).map(|(a, b)| a * b).sum::<f64>() / n)
}

/// `∫|s|² ω_h / ∫|s|² dν`.
pub fn l2_condition_ratio(s: &PolySection, geom: &WeightedGeometry) -> Result<f64> {
    let den = weighted_norm_sq(s, geom);
    if !(den > 0.0) {
        return Err(Error::DegenerateSection);
    }
    let num = SectionEvaluator::new(&geom.curvature_quadrature, &geom.weight, s.degree()).norm_sq(s);
    Ok(num / den)
}

/// Hermitian forms of `‖·‖²` and `‖∇·‖²` on the monomial basis `1, z, …, z^N`:
/// `norm[(i, j)] = ∫ z^i z̄^j e^{−Nφ} dν`, and likewise for the kinetic density.
#[derive(Debug, Clone)]
pub struct MomentMatrices {
    pub norm: DMatrix<C64>,
    pub kinetic: DMatrix<C64>,
}

impl MomentMatrices {
    pub fn new(quad: &Quadrature, weight: &Weight, degree: usize) -> Self {
        match &quad.rings {
            Some(rings) => Self::from_rings(rings, weight, degree),
            None => Self::from_nodes(quad, weight, degree),
        }
    }

    /// Exact ring sums: on a ring of `m` nodes, `Σ e^{i(i−j)θ}` vanishes unless `m | (i−j)`.
    fn from_rings(rings: &[crate::geometry::Ring], weight: &Weight, degree: usize) -> Self {
        let n1 = degree + 1;
        let nf = degree as f64;
        let mut norm = DMatrix::from_element(n1, n1, ZERO);
        let mut kinetic = DMatrix::from_element(n1, n1, ZERO);
        for r in rings {
            let rho = r.radius;
            let z = C64::new(rho, 0.0);
            let cd = weight.chart(z, false);
            // z α(z) is real for radial weights
            let lambda = (z * cd.alpha).re;
            let ln_rho = rho.ln();
            let m = r.count as i64;
            for i in 0..n1 {
                for j in 0..n1 {
                    let d = i as i64 - j as i64;
                    if d % m != 0 {
                        continue;
                    }
                    let phase = C64::from_polar(1.0, d as f64 * r.phase);
                    let g = (((i + j) as f64) * ln_rho - nf * cd.phi).exp();
                    norm[(i, j)] += phase * (r.mass * g);
                    let (ci, cj) = (i as f64 + nf * lambda, j as f64 + nf * lambda);
                    if ci != 0.0 && cj != 0.0 {
                        let k = (((i + j) as f64 - 2.0) * ln_rho - nf * cd.phi).exp() * ci * cj * cd.metric;
                        kinetic[(i, j)] += phase * (r.mass * k);
                    }
                }
            }
        }
        Self { norm, kinetic }
    }

    fn from_nodes(quad: &Quadrature, weight: &Weight, degree: usize) -> Self {
        let n1 = degree + 1;
        let ev = SectionEvaluator::new(quad, weight, degree);
        let mut norm = DMatrix::from_element(n1, n1, ZERO);
        let mut kinetic = DMatrix::from_element(n1, n1, ZERO);
        let mut v = vec![ZERO; n1];
        let mut dv = vec![ZERO; n1];
        for f in &ev.frames {
            // in the outer chart z^i is represented by w^{N−i}
            for i in 0..n1 {
                let e = if f.outer { degree - i } else { i };
                let te = f.t.powu(e as u32);
                let de = if e == 0 { ZERO } else { f.t.powu(e as u32 - 1) * e as f64 };
                v[i] = te * f.sqrt_scale;
                dv[i] = (de + f.n_alpha * te) * (f.sqrt_scale * f.sqrt_metric);
            }
            for i in 0..n1 {
                for j in 0..n1 {
                    norm[(i, j)] += v[i] * v[j].conj() * f.weight;
                    kinetic[(i, j)] += dv[i] * dv[j].conj() * f.weight;
                }
            }
        }
        Self { norm, kinetic }
    }

    /// `Σ_ij b_i b̄_j M_ij` for ascending coefficients `b`.
    pub fn form(m: &DMatrix<C64>, b: &[C64]) -> f64 {
        let mut s = ZERO;
        for i in 0..b.len() {
            for j in 0..b.len() {
                s += b[i] * b[j].conj() * m[(i, j)];
            }
        }
        s.re
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Quadrature, SupportGrid, SupportSpec, Weight};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kh(n: usize) -> WeightedGeometry {
        WeightedGeometry::kac_hammersley(WeightedGeometry::kh_nodes(n, 2), 64).unwrap()
    }

    fn fs_omega(n: usize) -> WeightedGeometry {
        WeightedGeometry::fubini_study(Quadrature::curvature(&Weight::FubiniStudy, n).unwrap(), 50).unwrap()
    }

    fn random_asc(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
        (0..=n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    #[test]
    fn kh_norm_identities() {
        let g = kh(7);
        for j in 0..=7 {
            assert_relative_eq!(weighted_norm_sq(&PolySection::monomial(7, j), &g), 1.0, epsilon = 1e-13);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_asc(&mut rng, 7);
        let s = PolySection::from_ascending(a.clone()).unwrap();
        let sq: f64 = a.iter().map(|c| c.norm_sqr()).sum();
        let kin: f64 = a.iter().enumerate().map(|(j, c)| (j * j) as f64 * c.norm_sqr()).sum();
        assert_relative_eq!(weighted_norm_sq(&s, &g), sq, max_relative = 1e-13);
        assert_relative_eq!(kinetic_energy(&s, &g), kin, max_relative = 1e-13);
        let zero = PolySection::from_ascending(vec![ZERO; 8]).unwrap();
        assert_eq!(weighted_norm_sq(&zero, &g), 0.0);
        assert_eq!(action(&zero, &PotentialSpec::quartic(true), &g), 0.0);
        assert_eq!(bernstein_ratio(&zero, &g), Err(Error::DegenerateSection));
        let c = PolySection::from_ascending(vec![C64::new(2.0, 1.0), ZERO, ZERO]).unwrap();
        assert_eq!(kinetic_energy(&c, &kh(2)), 0.0);
    }

    #[test]
    fn fft_path_matches_horner() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = PolySection::from_ascending(random_asc(&mut rng, 20)).unwrap();
        let circle = Quadrature::circle(64).unwrap();
        let mut shifted = circle.clone();
        shifted.rings = None;
        for w in [Weight::FlatOnDisk, Weight::FubiniStudy] {
            let a = SectionEvaluator::new(&circle, &w, 20);
            let b = SectionEvaluator::new(&shifted, &w, 20);
            assert!(a.fft.is_some() && b.fft.is_none());
            let spec = PotentialSpec::new(vec![0.3, -0.2, 1.0], true).unwrap();
            assert_relative_eq!(a.action(&s, &spec), b.action(&s, &spec), max_relative = 1e-12);
        }
    }

    #[test]
    fn action_examples() {
        let g = kh(5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = PolySection::from_ascending(random_asc(&mut rng, 5)).unwrap();
        assert_relative_eq!(action(&s, &PotentialSpec::gaussian(), &g), weighted_norm_sq(&s, &g), max_relative = 1e-14);
        let zn = PolySection::monomial(5, 5);
        assert_relative_eq!(action(&zn, &PotentialSpec::quartic(false), &g), 1.0, epsilon = 1e-13);
        assert!(PotentialSpec::new(vec![1.0, 2.0], false).is_err());
    }

    #[test]
    fn kh_bernstein_examples() {
        let n = 9;
        let g = kh(n);
        assert_relative_eq!(bernstein_ratio(&PolySection::monomial(n, n), &g).unwrap(), (n * n) as f64, max_relative = 1e-13);
        assert_eq!(bernstein_ratio(&PolySection::monomial(n, 0), &g).unwrap(), 0.0);
    }

    #[test]
    fn fs_kinetic_of_top_monomial_matches_a_fine_oracle() {
        // closed form: ∫ u^{N−1}(1−u)^{−1}·N²(1−u)² du = N²·B(N, 2) = N/(N+1)
        let n = 12;
        let s = PolySection::monomial(n, n);
        let coarse = kinetic_energy(&s, &fs_omega(16));
        let fine = kinetic_energy(&s, &WeightedGeometry::fubini_study(Quadrature::sphere_grid(8000, 16).unwrap(), 50).unwrap());
        assert_relative_eq!(coarse, n as f64 / (n as f64 + 1.0), max_relative = 1e-12);
        assert_relative_eq!(coarse, fine, max_relative = 1e-6);
    }

    #[test]
    fn l2_condition_examples() {
        let g = fs_omega(20);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = PolySection::from_ascending(random_asc(&mut rng, 6)).unwrap();
        assert_relative_eq!(l2_condition_ratio(&s, &g).unwrap(), 1.0, max_relative = 1e-12);
        // FS weight, ν = δ_{S¹}: ‖z^N‖² over the circle is 2^{−N}, over ω_FS it is 1/(N+1)
        let n = 8;
        let circ = WeightedGeometry::new(Weight::FubiniStudy, Quadrature::circle(32).unwrap(), SupportGrid::new(SupportSpec::Circle, 10).unwrap(), 20).unwrap();
        let r = l2_condition_ratio(&PolySection::monomial(n, n), &circ).unwrap();
        assert_relative_eq!(r, 2f64.powi(n as i32) / (n as f64 + 1.0), max_relative = 1e-12);
    }

    #[test]
    fn moment_matrices_agree_between_ring_and_node_paths() {
        let n = 6;
        for (q, w) in [
            (Quadrature::sphere_grid(12, 9).unwrap(), Weight::FubiniStudy),
            (Quadrature::circle(5).unwrap(), Weight::FlatOnDisk),
            (Quadrature::curvature(&Weight::Radial(vec![0.2]), 8).unwrap(), Weight::Radial(vec![0.2])),
        ] {
            let a = MomentMatrices::new(&q, &w, n);
            let mut flat = q.clone();
            flat.rings = None;
            let b = MomentMatrices::new(&flat, &w, n);
            assert!((&a.norm - &b.norm).norm() < 1e-12);
            assert!((&a.kinetic - &b.kinetic).norm() < 1e-6 * b.kinetic.norm());
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let asc = random_asc(&mut rng, n);
            let s = PolySection::from_ascending(asc.clone()).unwrap();
            let ev = SectionEvaluator::new(&q, &w, n);
            assert_relative_eq!(MomentMatrices::form(&a.norm, &asc), ev.norm_sq(&s), max_relative = 1e-12);
            assert_relative_eq!(MomentMatrices::form(&a.kinetic, &asc), ev.kinetic(&s), max_relative = 1e-6);
        }
    }

    proptest! {
        #[test]
        fn gaussian_action_scales_quadratically(seed in 0u64..1000, re in -3.0..3.0f64, im in -3.0..3.0f64) {
            let g = kh(6);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = PolySection::from_ascending(random_asc(&mut rng, 6)).unwrap();
            let lam = C64::new(re, im);
            let spec = PotentialSpec::gaussian();
            let a = action(&s.scale(lam), &spec, &g);
            prop_assert!((a - lam.norm_sqr() * action(&s, &spec, &g)).abs() <= 1e-12 * (1.0 + a));
        }

        #[test]
        fn kinetic_is_nonnegative(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = PolySection::from_ascending(random_asc(&mut rng, 5)).unwrap();
            prop_assert!(kinetic_energy(&s, &fs_omega(6)) >= 0.0);
            prop_assert!(kinetic_energy(&s, &kh(5)) >= 0.0);
        }

        #[test]
        fn kh_bernstein_bounded_by_n_squared(seed in 0u64..10_000, n in 5usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = PolySection::from_ascending(random_asc(&mut rng, n)).unwrap();
            prop_assert!(bernstein_ratio(&s, &kh(n)).unwrap() <= (n * n) as f64 * (1.0 + 1e-12));
        }
    }
}
