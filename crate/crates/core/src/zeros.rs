//! The zeros map: Aberth–Ehrlich root finding, reconstruction and empirical measures.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;

use crate::ensemble::PolySection;
use crate::error::{invalid, Error, Result};
use crate::geometry::CP1Point;
use crate::measures::DiscreteMeasure;
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// An unordered multiset of `N` zeros on CP¹.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroConfig {
    pub finite_zeros: Vec<C64>,
    pub zeros_at_infinity: usize,
}

impl ZeroConfig {
    pub fn new(finite_zeros: Vec<C64>) -> Self {
        Self { finite_zeros, zeros_at_infinity: 0 }
    }

    pub fn degree(&self) -> usize {
        self.finite_zeros.len() + self.zeros_at_infinity
    }

    pub fn points(&self) -> impl Iterator<Item = CP1Point> + '_ {
        self.finite_zeros
            .iter()
            .map(|&z| CP1Point::Finite(z))
            .chain(core::iter::repeat_n(CP1Point::Infinity, self.zeros_at_infinity))
    }

    pub fn conj(&self) -> Self {
        Self {
            finite_zeros: self.finite_zeros.iter().map(|z| z.conj()).collect(),
            zeros_at_infinity: self.zeros_at_infinity,
        }
    }

    pub fn rotate(&self, theta: f64) -> Self {
        let r = C64::from_polar(1.0, theta);
        Self {
            finite_zeros: self.finite_zeros.iter().map(|z| z * r).collect(),
            zeros_at_infinity: self.zeros_at_infinity,
        }
    }
}

/// `max_j |a_j − b_j| / max_j |b_j|`.
pub fn coeff_relative_error(a: &PolySection, b: &PolySection) -> f64 {
    let scale = b.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let diff = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    diff / scale
}

/// All `N` zeros of `s`, with leading-coefficient deficiency reported as zeros at ∞.
///
/// Fails if neither Aberth–Ehrlich nor the companion-matrix fallback reproduces the
/// coefficients to relative error `tol`.
pub fn find_roots(s: &PolySection, tol: f64) -> Result<ZeroConfig> {
    if s.is_zero() {
        return Err(invalid("the zero section has no zero set"));
    }
    let amax = s.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut lead = 0;
    while s.coeffs[lead].norm() < 1e-12 * amax {
        lead += 1;
    }
    let mut tail = s.coeffs.len();
    while s.coeffs[tail - 1] == ZERO {
        tail -= 1;
    }
    let core = &s.coeffs[lead..tail];
    let at_zero = s.coeffs.len() - tail;
    let target = PolySection { coeffs: core.iter().copied().chain(core::iter::repeat_n(ZERO, at_zero)).collect() };

    let assemble = |roots: Vec<C64>| {
        let mut finite = roots;
        finite.extend(core::iter::repeat_n(ZERO, at_zero));
        ZeroConfig { finite_zeros: finite, zeros_at_infinity: lead }
    };
    let error_of = |zc: &ZeroConfig| -> f64 {
        if target.coeffs.len() < 2 {
            return 0.0;
        }
        let rec = expand(&zc.finite_zeros, target.coeffs[0]);
        coeff_relative_error(&rec, &target)
    };

    if core.len() <= 2 {
        let roots = if core.len() == 2 { vec![-core[1] / core[0]] } else { Vec::new() };
        return Ok(assemble(roots));
    }
    if let Some(roots) = aberth(core) {
        let zc = assemble(roots);
        if error_of(&zc) <= tol {
            return Ok(zc);
        }
    }
    let roots = polish(core, companion_roots(core));
    let zc = assemble(roots);
    if error_of(&zc) <= tol {
        Ok(zc)
    } else {
        Err(Error::RootFinder { coeffs: s.coeffs.clone() })
    }
}

/// `a_0 ∏ (z − ζ_j)`, expanded in Leja order.
pub fn reconstruct(zc: &ZeroConfig, a0: C64) -> Result<PolySection> {
    if zc.zeros_at_infinity > 0 {
        return Err(Error::ZerosAtInfinity);
    }
    if zc.finite_zeros.is_empty() {
        return Err(invalid("reconstruction needs at least one zero"));
    }
    Ok(expand(&zc.finite_zeros, a0))
}

fn expand(roots: &[C64], a0: C64) -> PolySection {
    let ordered = leja_order(roots);
    // leading-first coefficients of the running product
    let mut c = Vec::with_capacity(ordered.len() + 1);
    c.push(a0);
    for r in ordered {
        c.push(ZERO);
        for j in (1..c.len()).rev() {
            let prev = c[j - 1];
            c[j] -= r * prev;
        }
    }
    PolySection { coeffs: c }
}

fn leja_order(roots: &[C64]) -> Vec<C64> {
    let mut rest: Vec<C64> = roots.to_vec();
    let mut out = Vec::with_capacity(rest.len());
    if rest.is_empty() {
        return out;
    }
    let first = (0..rest.len())
        .max_by(|&i, &j| rest[i].norm().total_cmp(&rest[j].norm()))
        .unwrap_or(0);
    out.push(rest.swap_remove(first));
    // running log-products of distances to the chosen points
    let mut score: Vec<f64> = rest.iter().map(|z| (z - out[0]).norm().ln()).collect();
    while !rest.is_empty() {
        let k = (0..rest.len()).max_by(|&i, &j| score[i].total_cmp(&score[j])).unwrap_or(0);
        let z = rest.swap_remove(k);
        score.swap_remove(k);
        for (s, w) in score.iter_mut().zip(&rest) {
            *s += (w - z).norm().ln();
        }
        out.push(z);
    }
    out
}

/// Value, derivative and the scale `Σ|a_j||t|^j` of a leading-first polynomial.
fn horner(c: &[C64], t: C64) -> (C64, C64, f64) {
    let (mut p, mut dp, mut s) = (ZERO, ZERO, 0.0);
    let at = t.norm();
    for &a in c {
        dp = dp * t + p;
        p = p * t + a;
        s = s * at + a.norm();
    }
    (p, dp, s)
}

/// Newton correction `p/p'` at `z` and a backward-error test, evaluated in the
/// chart `1/z` when `|z| > 1`.
fn newton_ratio(c: &[C64], rev: &[C64], z: C64) -> (C64, bool) {
    let m = (c.len() - 1) as f64;
    // Horner's own rounding is of order m·eps·Σ|a_j||t|^j
    let tiny = 2.0 * (m + 1.0) * f64::EPSILON;
    if z.norm_sqr() <= 1.0 {
        let (p, dp, s) = horner(c, z);
        let small = p.norm() <= tiny * s;
        if dp == ZERO {
            return (ZERO, small);
        }
        (p / dp, small)
    } else {
        let w = z.inv();
        let (q, dq, s) = horner(rev, w);
        let small = q.norm() <= tiny * s;
        let denom = w * (m - w * dq / q);
        if q == ZERO || denom == ZERO {
            return (ZERO, true);
        }
        (denom.inv(), small)
    }
}

fn initial_guesses(c: &[C64]) -> Vec<C64> {
    let m = c.len() - 1;
    // ascending log-moduli
    let lm: Vec<f64> = c.iter().rev().map(|a| if *a == ZERO { f64::NEG_INFINITY } else { a.norm().ln() }).collect();
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..=m {
        if lm[i] == f64::NEG_INFINITY {
            continue;
        }
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b - a) as f64 * (lm[i] - lm[a]) - (i - a) as f64 * (lm[b] - lm[a]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let sigma = 0.7;
    let mut out = Vec::with_capacity(m);
    for seg in hull.windows(2) {
        let (i, k) = (seg[0], seg[1]);
        let n = k - i;
        let r = ((lm[i] - lm[k]) / n as f64).exp();
        for j in 0..n {
            let ang = 2.0 * PI * j as f64 / n as f64 + 2.0 * PI * i as f64 / m as f64 + sigma;
            out.push(C64::from_polar(r, ang));
        }
    }
    out
}

fn aberth(c: &[C64]) -> Option<Vec<C64>> {
    let rev: Vec<C64> = c.iter().rev().copied().collect();
    let mut z = initial_guesses(c);
    let m = z.len();
    let mut done = vec![false; m];
    for _ in 0..1000 {
        for i in 0..m {
            if done[i] {
                continue;
            }
            let (ratio, small) = newton_ratio(c, &rev, z[i]);
            if small {
                done[i] = true;
                continue;
            }
            let mut sum = ZERO;
            for j in 0..m {
                if j != i {
                    let d = z[i] - z[j];
                    if d != ZERO {
                        sum += d.inv();
                    }
                }
            }
            let step = ratio / (ONE - ratio * sum);
            if !(step.re.is_finite() && step.im.is_finite()) {
                return None;
            }
            z[i] -= step;
            if step.norm() <= f64::EPSILON * z[i].norm() {
                done[i] = true;
            }
        }
        if done.iter().all(|&d| d) {
            break;
        }
    }
    // the caller's reconstruction check decides whether a stalled run is good enough
    Some(polish(c, z))
}

/// Newton steps kept only while they reduce the scaled residual.
fn polish(c: &[C64], mut z: Vec<C64>) -> Vec<C64> {
    let rev: Vec<C64> = c.iter().rev().copied().collect();
    let resid = |x: C64| {
        if x.norm_sqr() <= 1.0 {
            let (p, _, s) = horner(c, x);
            p.norm() / s
        } else {
            let (q, _, s) = horner(&rev, x.inv());
            q.norm() / s
        }
    };
    for x in z.iter_mut() {
        let mut r = resid(*x);
        for _ in 0..3 {
            let (ratio, _) = newton_ratio(c, &rev, *x);
            let y = *x - ratio;
            let ry = resid(y);
            if ry < r {
                *x = y;
                r = ry;
            } else {
                break;
            }
        }
    }
    z
}

fn companion_roots(c: &[C64]) -> Vec<C64> {
    let m = c.len() - 1;
    let mut a = DMatrix::from_element(m, m, ZERO);
    for j in 0..m {
        a[(0, j)] = -c[j + 1] / c[0];
    }
    for i in 1..m {
        a[(i, i - 1)] = ONE;
    }
    match a.clone().try_schur(1e-15, 100_000).and_then(|s| s.eigenvalues()) {
        Some(ev) => ev.iter().copied().collect(),
        None => a.schur().eigenvalues().map(|ev| ev.iter().copied().collect()).unwrap_or_default(),
    }
}

/// `Z_s = (1/N) Σ δ_ζ`, zeros at ∞ included.
pub fn empirical_measure(zc: &ZeroConfig) -> DiscreteMeasure {
    let n = zc.degree();
    let w = 1.0 / n as f64;
    DiscreteMeasure { points: zc.points().collect(), weights: vec![w; n], rings: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn sorted(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    fn gaussian_poly(rng: &mut ChaCha8Rng, n: usize) -> PolySection {
        let c = (0..=n)
            .map(|_| {
                let (a, b): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
                C64::new(a, b) * core::f64::consts::FRAC_1_SQRT_2
            })
            .collect();
        PolySection::new(c).unwrap()
    }

    #[test]
    fn small_examples() {
        let s = PolySection::new(vec![ONE, ZERO, -ONE]).unwrap();
        let zc = find_roots(&s, 1e-12).unwrap();
        let r = sorted(zc.finite_zeros.clone());
        assert!((r[0] + 1.0).norm() < 1e-14 && (r[1] - 1.0).norm() < 1e-14);
        let zn = PolySection::monomial(6, 6);
        let zc = find_roots(&zn, 1e-12).unwrap();
        assert!(zc.finite_zeros.iter().all(|z| *z == ZERO) && zc.finite_zeros.len() == 6);
        let rec = reconstruct(&ZeroConfig::new(vec![ONE, -ONE]), ONE).unwrap();
        assert_eq!(rec.coeffs, vec![ONE, ZERO, -ONE]);
        let c = C64::new(2.0, -1.0);
        assert_eq!(reconstruct(&ZeroConfig::new(vec![ZERO; 4]), c).unwrap().coeffs, vec![c, ZERO, ZERO, ZERO, ZERO]);
    }

    #[test]
    fn leading_deficiency_becomes_zeros_at_infinity() {
        // 0·z³ + z² − 1
        let s = PolySection::new(vec![ZERO, ONE, ZERO, -ONE]).unwrap();
        let zc = find_roots(&s, 1e-12).unwrap();
        assert_eq!(zc.zeros_at_infinity, 1);
        assert_eq!(zc.degree(), 3);
        assert_eq!(reconstruct(&zc, ONE), Err(Error::ZerosAtInfinity));
        let m = empirical_measure(&zc);
        assert_eq!(m.points.iter().filter(|p| p.is_infinite()).count(), 1);
        assert!((m.weights[2] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empirical_measure_examples() {
        let m = empirical_measure(&ZeroConfig::new(vec![ONE, -ONE]));
        assert_eq!(m.weights, vec![0.5, 0.5]);
        let m = empirical_measure(&ZeroConfig::new(vec![ZERO; 5]));
        assert!(m.points.iter().all(|p| *p == CP1Point::Finite(ZERO)));
        assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn round_trip_random_polynomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &n in &[10, 50, 100] {
            for _ in 0..20 {
                let s = gaussian_poly(&mut rng, n);
                let zc = find_roots(&s, 1e-8).unwrap();
                let rec = reconstruct(&zc, s.leading()).unwrap();
                assert!(coeff_relative_error(&rec, &s) <= 1e-8);
            }
        }
    }

    #[test]
    fn companion_fallback_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let s = gaussian_poly(&mut rng, 30);
        let a = sorted(aberth(&s.coeffs).unwrap());
        let b = sorted(polish(&s.coeffs, companion_roots(&s.coeffs)));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-8);
        }
    }

    #[test]
    fn conjugation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let s = gaussian_poly(&mut rng, 40);
        let sc = PolySection::new(s.coeffs.iter().map(|c| c.conj()).collect()).unwrap();
        let a = sorted(find_roots(&s, 1e-8).unwrap().conj().finite_zeros);
        let b = sorted(find_roots(&sc, 1e-8).unwrap().finite_zeros);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-8);
        }
    }

    #[test]
    fn failure_carries_the_polynomial() {
        let s = PolySection::new(vec![ONE, C64::new(3.0, 0.0), C64::new(-2.0, 1.0)]).unwrap();
        match find_roots(&s, -1.0) {
            Err(Error::RootFinder { coeffs }) => assert_eq!(coeffs, s.coeffs),
            other => panic!("{other:?}"),
        }
    }
}
