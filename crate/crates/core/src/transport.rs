//! Exact W₁ between discrete measures on CP¹ under the chordal metric.
//!
//! The transportation problem is solved by a primal network simplex on a
//! spanning-tree basis (thread/parent representation, block-search pivoting).
//! Masses are scaled to integers so the simplex is exact in its flow updates.
//! Large problems start from nearest-neighbour arcs and add every arc with a
//! negative reduced cost until none is left, which certifies optimality for the
//! complete bipartite problem.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{chordal_dist, CP1Point};

const SCALE: f64 = (1u64 << 50) as f64;
const DENSE_LIMIT: usize = 250_000;

const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const UP: i8 = 1;
const DOWN: i8 = -1;

struct NetworkSimplex {
    node_num: usize,
    source: Vec<usize>,
    target: Vec<usize>,
    cost: Vec<f64>,
    flow: Vec<i64>,
    state: Vec<i8>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i8>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pi: Vec<f64>,
    dirty_revs: Vec<usize>,
    next_arc: usize,
    // pivot state
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: i64,
}

const NONE: usize = usize::MAX;

impl NetworkSimplex {
    /// Artificial arcs occupy indices `0..node_num`; real arcs are appended later.
    fn new(supply: &[i64], art_cost: f64) -> Self {
        let n = supply.len();
        let root = n;
        let mut s = Self {
            node_num: n,
            source: vec![0; n],
            target: vec![0; n],
            cost: vec![0.0; n],
            flow: vec![0; n],
            state: vec![STATE_TREE; n],
            parent: vec![NONE; n + 1],
            pred: vec![NONE; n + 1],
            pred_dir: vec![UP; n + 1],
            thread: vec![0; n + 1],
            rev_thread: vec![0; n + 1],
            succ_num: vec![1; n + 1],
            last_succ: vec![0; n + 1],
            pi: vec![0.0; n + 1],
            dirty_revs: Vec::new(),
            next_arc: 0,
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0,
        };
        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = n + 1;
        s.last_succ[root] = root - 1;
        for u in 0..n {
            let e = u;
            s.parent[u] = root;
            s.pred[u] = e;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.last_succ[u] = u;
            if supply[u] >= 0 {
                s.pred_dir[u] = UP;
                s.source[e] = u;
                s.target[e] = root;
                s.flow[e] = supply[u];
            } else {
                s.pred_dir[u] = DOWN;
                s.pi[u] = art_cost;
                s.source[e] = root;
                s.target[e] = u;
                s.flow[e] = -supply[u];
                s.cost[e] = art_cost;
            }
        }
        s.thread[n - 1] = root;
        s.rev_thread[root] = n - 1;
        s
    }

    fn add_arc(&mut self, u: usize, v: usize, c: f64) {
        self.source.push(u);
        self.target.push(v);
        self.cost.push(c);
        self.flow.push(0);
        self.state.push(STATE_LOWER);
    }

    fn reduced_cost(&self, e: usize) -> f64 {
        self.cost[e] + self.pi[self.source[e]] - self.pi[self.target[e]]
    }

    fn find_entering_arc(&mut self) -> bool {
        let m = self.source.len();
        let block = ((m as f64).sqrt() as usize).max(10);
        let mut min = 0.0;
        let mut cnt = block;
        let mut best = NONE;
        for k in 0..m {
            let e = (self.next_arc + k) % m;
            if self.state[e] == STATE_LOWER {
                let c = self.reduced_cost(e);
                let tol = 1e-13 * (1.0 + self.pi[self.source[e]].abs() + self.pi[self.target[e]].abs());
                if c < min && c < -tol {
                    min = c;
                    best = e;
                }
            }
            cnt -= 1;
            if cnt == 0 {
                if best != NONE {
                    self.in_arc = best;
                    self.next_arc = (e + 1) % m;
                    return true;
                }
                cnt = block;
            }
        }
        if best != NONE {
            self.in_arc = best;
            return true;
        }
        false
    }

    fn find_join_node(&mut self) {
        let (mut u, mut v) = (self.source[self.in_arc], self.target[self.in_arc]);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    fn find_leaving_arc(&mut self) -> bool {
        let (first, second) = (self.source[self.in_arc], self.target[self.in_arc]);
        let mut delta = i64::MAX;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            if self.pred_dir[u] == UP {
                let d = self.flow[self.pred[u]];
                if d < delta {
                    delta = d;
                    self.u_out = u;
                    result = 1;
                }
            }
            u = self.parent[u];
        }
        u = second;
        while u != self.join {
            if self.pred_dir[u] == DOWN {
                let d = self.flow[self.pred[u]];
                if d <= delta {
                    delta = d;
                    self.u_out = u;
                    result = 2;
                }
            }
            u = self.parent[u];
        }
        self.delta = delta;
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        result != 0
    }

    fn change_flow(&mut self) {
        let val = self.delta;
        let e = self.in_arc;
        if val > 0 {
            self.flow[e] += val;
            let mut u = self.source[e];
            while u != self.join {
                self.flow[self.pred[u]] -= self.pred_dir[u] as i64 * val;
                u = self.parent[u];
            }
            u = self.target[e];
            while u != self.join {
                self.flow[self.pred[u]] += self.pred_dir[u] as i64 * val;
                u = self.parent[u];
            }
        }
        self.state[e] = STATE_TREE;
        self.state[self.pred[self.u_out]] = STATE_LOWER;
    }

    fn update_tree_structure(&mut self) {
        let (u_in, v_in, u_out, join) = (self.u_in, self.v_in, self.u_out, self.join);
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source[self.in_arc] { UP } else { DOWN };
            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in { self.thread[old_last_succ] } else { self.thread[v_in] };
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);
                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;
                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;
                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;
            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }
            for i in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[i];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }
            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source[self.in_arc] { UP } else { DOWN };
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }
        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }
        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let dir = self.pred_dir[self.u_in] as f64;
        let sigma = self.pi[self.v_in] - self.pi[self.u_in] - dir * self.cost[self.in_arc];
        let end = self.thread[self.last_succ[self.u_in]];
        let mut u = self.u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    fn run(&mut self) -> Result<()> {
        let mut guard = 0usize;
        while self.find_entering_arc() {
            self.find_join_node();
            if !self.find_leaving_arc() {
                return Err(Error::Transport);
            }
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
            guard += 1;
            if guard > 50_000_000 {
                return Err(Error::Transport);
            }
        }
        Ok(())
    }

    fn artificial_flow(&self) -> i64 {
        (0..self.node_num).map(|e| self.flow[e]).sum()
    }
}

/// Masses scaled to integers summing exactly to `2^50`.
fn integer_masses(w: &[f64]) -> Vec<i64> {
    let total: f64 = w.iter().sum();
    let scaled: Vec<f64> = w.iter().map(|x| x / total * SCALE).collect();
    let mut out: Vec<i64> = scaled.iter().map(|x| x.floor() as i64).collect();
    let deficit = SCALE as i64 - out.iter().sum::<i64>();
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| (scaled[b] - scaled[b].floor()).total_cmp(&(scaled[a] - scaled[a].floor())));
    for &i in order.iter().cycle().take(deficit.max(0) as usize) {
        out[i] += 1;
    }
    out
}

fn k_nearest(from: &[CP1Point], to: &[CP1Point], k: usize) -> Vec<Vec<usize>> {
    from.iter()
        .map(|&p| {
            let mut d: Vec<(f64, usize)> = to.iter().enumerate().map(|(j, &q)| (chordal_dist(p, q), j)).collect();
            let k = k.min(d.len());
            d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
            d[..k].iter().map(|x| x.1).collect()
        })
        .collect()
}

/// `W₁(μ, ν)` for `μ = Σ a_i δ_{x_i}`, `ν = Σ b_j δ_{y_j}` (weights are renormalized).
pub fn w1(xs: &[CP1Point], a: &[f64], ys: &[CP1Point], b: &[f64]) -> Result<f64> {
    Ok(solve(xs, a, ys, b)?.0)
}

/// Optimal value with a dual pair: `f_i + g_j ≤ d(x_i, y_j)` and `W₁ = Σ a_i f_i + Σ b_j g_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct W1Dual {
    pub value: f64,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

/// [`w1`] plus Kantorovich potentials on every atom, zero-weight ones included.
pub fn w1_dual(xs: &[CP1Point], a: &[f64], ys: &[CP1Point], b: &[f64]) -> Result<W1Dual> {
    let (value, pi_t, kept) = solve(xs, a, ys, b)?;
    // f = g^c over the kept targets, then g = f^c over every source
    let f: Vec<f64> = xs
        .iter()
        .map(|&x| kept.iter().zip(&pi_t).map(|(&j, g)| chordal_dist(x, ys[j]) - g).fold(f64::INFINITY, f64::min))
        .collect();
    let g: Vec<f64> = ys
        .iter()
        .map(|&y| xs.iter().zip(&f).map(|(&x, f)| chordal_dist(x, y) - f).fold(f64::INFINITY, f64::min))
        .collect();
    Ok(W1Dual { value, f, g })
}

/// Value, target potentials and the indices of the kept (positive-weight) targets.
fn solve(xs: &[CP1Point], a: &[f64], ys: &[CP1Point], b: &[f64]) -> Result<(f64, Vec<f64>, Vec<usize>)> {
    let kept: Vec<usize> = (0..ys.len().min(b.len())).filter(|&j| b[j] > 0.0).collect();
    let (xs, a): (Vec<CP1Point>, Vec<f64>) = xs.iter().zip(a).filter(|(_, w)| **w > 0.0).map(|(p, w)| (*p, *w)).unzip();
    let (ys, b): (Vec<CP1Point>, Vec<f64>) = ys.iter().zip(b).filter(|(_, w)| **w > 0.0).map(|(p, w)| (*p, *w)).unzip();
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::Transport);
    }
    let (ns, nt) = (xs.len(), ys.len());
    let mut supply = integer_masses(&a);
    supply.extend(integer_masses(&b).into_iter().map(|x| -x));
    let art = 2.0 * (ns + nt + 1) as f64;
    let mut net = NetworkSimplex::new(&supply, art);
    let dense = ns * nt <= DENSE_LIMIT;
    if dense {
        for i in 0..ns {
            for j in 0..nt {
                net.add_arc(i, ns + j, chordal_dist(xs[i], ys[j]));
            }
        }
    } else {
        let k = 6;
        let mut seen = alloc::collections::BTreeSet::new();
        for (i, js) in k_nearest(&xs, &ys, k).into_iter().enumerate() {
            for j in js {
                seen.insert((i, j));
            }
        }
        for (j, is) in k_nearest(&ys, &xs, k).into_iter().enumerate() {
            for i in is {
                seen.insert((i, j));
            }
        }
        for (i, j) in seen {
            net.add_arc(i, ns + j, chordal_dist(xs[i], ys[j]));
        }
    }
    loop {
        net.run()?;
        if dense {
            break;
        }
        // price every pair; add the most negative few per source
        let mut added = 0;
        for i in 0..ns {
            let mut neg: Vec<(f64, usize)> = Vec::new();
            for j in 0..nt {
                let c = chordal_dist(xs[i], ys[j]);
                let rc = c + net.pi[i] - net.pi[ns + j];
                let tol = 1e-13 * (1.0 + net.pi[i].abs() + net.pi[ns + j].abs());
                if rc < -tol {
                    neg.push((rc, j));
                }
            }
            if neg.len() > 8 {
                neg.select_nth_unstable_by(7, |a, b| a.0.total_cmp(&b.0));
                neg.truncate(8);
            }
            for (_, j) in neg {
                net.add_arc(i, ns + j, chordal_dist(xs[i], ys[j]));
                added += 1;
            }
        }
        if added == 0 {
            break;
        }
    }
    if net.artificial_flow() != 0 {
        return Err(Error::Transport);
    }
    let m = net.source.len();
    let mut total = 0.0;
    for e in net.node_num..m {
        if net.flow[e] > 0 {
            total += net.flow[e] as f64 * net.cost[e];
        }
    }
    Ok((total / SCALE, net.pi[ns..ns + nt].to_vec(), kept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<CP1Point> {
        (0..n).map(|_| CP1Point::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))).collect()
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for i in 0..n {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn trivial_cases() {
        let p = CP1Point::new(0.2, 0.1);
        assert_eq!(w1(&[p], &[1.0], &[p], &[1.0]).unwrap(), 0.0);
        assert_relative_eq!(w1(&[CP1Point::new(0.0, 0.0)], &[1.0], &[CP1Point::Infinity], &[1.0]).unwrap(), 1.0);
        let circle: Vec<CP1Point> = (0..16).map(|m| CP1Point::Finite(C64::from_polar(1.0, m as f64 * 0.39269908169872414))).collect();
        assert!(w1(&circle, &[1.0 / 16.0; 16], &circle, &[1.0 / 16.0; 16]).unwrap() < 1e-15);
    }

    #[test]
    fn matches_brute_force_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = 6;
            let (x, y) = (random_points(&mut rng, n), random_points(&mut rng, n));
            let best = permutations(n)
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| chordal_dist(x[i], y[j])).sum::<f64>() / n as f64)
                .fold(f64::INFINITY, f64::min);
            let w = w1(&x, &vec![1.0 / n as f64; n], &y, &vec![1.0 / n as f64; n]).unwrap();
            assert_relative_eq!(w, best, epsilon = 1e-12);
        }
    }

    #[test]
    fn one_dimensional_closed_form() {
        // points on the positive real axis; the quantile coupling is feasible, so it
        // bounds W₁ from above
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (n, m) = (40, 25);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
        let ys: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..3.0)).collect();
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
        let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
        let px: Vec<CP1Point> = xs.iter().map(|&x| CP1Point::new(x, 0.0)).collect();
        let py: Vec<CP1Point> = ys.iter().map(|&y| CP1Point::new(y, 0.0)).collect();
        let w = w1(&px, &a, &py, &b).unwrap();
        // quantile coupling cost
        let mut ia: Vec<usize> = (0..n).collect();
        ia.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
        let mut ib: Vec<usize> = (0..m).collect();
        ib.sort_by(|&i, &j| ys[i].total_cmp(&ys[j]));
        let (mut i, mut j) = (0, 0);
        let (mut ra, mut rb) = (a[ia[0]] / sa, b[ib[0]] / sb);
        let mut cost = 0.0;
        loop {
            let t = ra.min(rb);
            cost += t * chordal_dist(px[ia[i]], py[ib[j]]);
            ra -= t;
            rb -= t;
            if ra <= 1e-15 {
                i += 1;
                if i == n {
                    break;
                }
                ra = a[ia[i]] / sa;
            }
            if rb <= 1e-15 {
                j += 1;
                if j == m {
                    break;
                }
                rb = b[ib[j]] / sb;
            }
        }
        assert!(w <= cost + 1e-12);
    }

    #[test]
    fn dual_is_feasible_and_tight() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (n, m) in [(7, 9), (30, 12)] {
            let xs = random_points(&mut rng, n);
            let ys = random_points(&mut rng, m);
            let a: Vec<f64> = (0..n).map(|i| if i == 2 { 0.0 } else { rng.gen_range(0.1..1.0) }).collect();
            let b: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
            let d = w1_dual(&xs, &a, &ys, &b).unwrap();
            for i in 0..n {
                for j in 0..m {
                    assert!(d.f[i] + d.g[j] <= chordal_dist(xs[i], ys[j]) + 1e-12);
                }
            }
            let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
            let dual: f64 = a.iter().zip(&d.f).map(|(w, f)| w / sa * f).sum::<f64>()
                + b.iter().zip(&d.g).map(|(w, g)| w / sb * g).sum::<f64>();
            assert_relative_eq!(dual, d.value, epsilon = 1e-12);
            assert_eq!(d.value, w1(&xs, &a, &ys, &b).unwrap());
        }
    }

    #[test]
    fn column_generation_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_points(&mut rng, 700);
        let y = random_points(&mut rng, 400);
        let a: Vec<f64> = (0..700).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..400).map(|_| rng.gen_range(0.0..1.0)).collect();
        assert!(w1(&x, &a, &y, &b).unwrap() > 0.0);
        // tripling every source atom gives the same measure but forces column generation
        let dense = w1(&x[..300], &a[..300], &y[..300], &b[..300]).unwrap();
        let xx = x[..300].to_vec();
        let cg = {
            let mut rep = xx.clone();
            rep.extend_from_slice(&xx);
            rep.extend_from_slice(&xx);
            let mut aa = a[..300].to_vec();
            aa.extend_from_slice(&a[..300]);
            aa.extend_from_slice(&a[..300]);
            w1(&rep, &aa, &y[..300], &b[..300]).unwrap()
        };
        assert_relative_eq!(cg, dense, epsilon = 1e-12);
    }
}
