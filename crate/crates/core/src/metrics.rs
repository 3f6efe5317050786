//! Sample-based posterior comparison.

use std::collections::HashMap;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::series::ParameterVector;

/// Default cap on points per sample set for exact transport.
pub const SAMPLE_CAP: usize = 1000;

fn check_dims(a: &[ParameterVector], b: &[ParameterVector]) -> Result<usize> {
    let d = a.first().map(|p| p.len()).ok_or(Error::TooFewValues(0))?;
    if b.is_empty() {
        return Err(Error::TooFewValues(0));
    }
    for p in a.iter().chain(b) {
        if p.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.len(),
            });
        }
    }
    Ok(d)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Minimum total cost of moving `supply` onto `demand` (equal totals) for a
/// dense `n × m` cost matrix (row-major), by the primal network simplex.
fn transport(cost: &[f64], supply: &[f64], demand: &[f64]) -> f64 {
    NetworkSimplex::new(cost, supply, demand).solve()
}

/// Bipartite transportation problem as an uncapacitated min-cost flow.
/// Nodes `0..n` are sources, `n..n+m` sinks, `n+m` the artificial root;
/// arc `i*m + j` joins source `i` to sink `j` and arc `E + v` joins node `v`
/// to the root. The spanning tree is kept strongly feasible.
struct NetworkSimplex<'a> {
    cost: &'a [f64],
    n: usize,
    m: usize,
    art_cost: f64,
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    tree_adj: Vec<Vec<usize>>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    /// `true` when `pred[v]` points from `v` to its parent.
    up: Vec<bool>,
    depth: Vec<usize>,
    pot: Vec<f64>,
    next_arc: usize,
    block: usize,
}

impl<'a> NetworkSimplex<'a> {
    fn new(cost: &'a [f64], supply: &[f64], demand: &[f64]) -> Self {
        let (n, m) = (supply.len(), demand.len());
        let e = n * m;
        let nodes = n + m + 1;
        let root = n + m;
        let max_cost = cost.iter().fold(0.0f64, |a, &c| a.max(c));
        let mut flow = vec![0.0; e + n + m];
        let mut in_tree = vec![false; e + n + m];
        let mut tree_adj = vec![Vec::new(); nodes];
        for v in 0..n + m {
            let arc = e + v;
            flow[arc] = if v < n { supply[v] } else { demand[v - n] };
            in_tree[arc] = true;
            tree_adj[v].push(arc);
            tree_adj[root].push(arc);
        }
        let mut ns = Self {
            cost,
            n,
            m,
            art_cost: (max_cost + 1.0) * nodes as f64,
            flow,
            in_tree,
            tree_adj,
            parent: vec![usize::MAX; nodes],
            pred: vec![usize::MAX; nodes],
            up: vec![false; nodes],
            depth: vec![0; nodes],
            pot: vec![0.0; nodes],
            next_arc: 0,
            block: ((e + n + m) as f64).sqrt().ceil().max(10.0) as usize,
        };
        ns.rebuild();
        ns
    }

    fn arcs(&self) -> usize {
        self.n * self.m + self.n + self.m
    }

    /// Tail, head and cost of an arc; artificial arcs run source → root and
    /// root → sink.
    fn arc(&self, a: usize) -> (usize, usize, f64) {
        let e = self.n * self.m;
        let root = self.n + self.m;
        if a < e {
            (a / self.m, self.n + a % self.m, self.cost[a])
        } else if a - e < self.n {
            (a - e, root, self.art_cost)
        } else {
            (root, a - e, self.art_cost)
        }
    }

    fn reduced(&self, a: usize) -> f64 {
        let (u, v, c) = self.arc(a);
        c + self.pot[u] - self.pot[v]
    }

    /// Parent pointers, depths and potentials from the tree adjacency.
    fn rebuild(&mut self) {
        let root = self.n + self.m;
        self.parent[root] = usize::MAX;
        self.pred[root] = usize::MAX;
        self.depth[root] = 0;
        self.pot[root] = 0.0;
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            for k in 0..self.tree_adj[u].len() {
                let a = self.tree_adj[u][k];
                if a == self.pred[u] {
                    continue;
                }
                let (t, h, c) = self.arc(a);
                let (v, up) = if t == u { (h, false) } else { (t, true) };
                self.parent[v] = u;
                self.pred[v] = a;
                self.up[v] = up;
                self.depth[v] = self.depth[u] + 1;
                // zero reduced cost on tree arcs: pot[h] = pot[t] + c
                self.pot[v] = if up { self.pot[u] - c } else { self.pot[u] + c };
                stack.push(v);
            }
        }
    }

    /// Block-search pricing: most negative reduced cost within the first
    /// block that contains a candidate.
    fn entering(&mut self, tol: f64) -> Option<usize> {
        let total = self.arcs();
        let mut best = None;
        let mut best_rc = -tol;
        let mut scanned = 0;
        let mut a = self.next_arc;
        for _ in 0..total {
            if !self.in_tree[a] {
                let rc = self.reduced(a);
                if rc < best_rc {
                    best_rc = rc;
                    best = Some(a);
                }
            }
            a += 1;
            if a == total {
                a = 0;
            }
            scanned += 1;
            if scanned == self.block {
                if best.is_some() {
                    break;
                }
                scanned = 0;
            }
        }
        self.next_arc = a;
        best
    }

    fn pivot(&mut self, entering: usize) {
        let (first, second, _) = self.arc(entering);
        let (mut u, mut v) = (first, second);
        while u != v {
            if self.depth[u] >= self.depth[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        let join = u;
        let mut delta = f64::INFINITY;
        let mut leave_node = usize::MAX;
        // flow runs join → … → first → second → … → join
        let mut w = first;
        while w != join {
            if self.up[w] && self.flow[self.pred[w]] < delta {
                delta = self.flow[self.pred[w]];
                leave_node = w;
            }
            w = self.parent[w];
        }
        let mut w = second;
        while w != join {
            if !self.up[w] && self.flow[self.pred[w]] <= delta {
                delta = self.flow[self.pred[w]];
                leave_node = w;
            }
            w = self.parent[w];
        }
        debug_assert!(leave_node != usize::MAX, "uncapacitated cycle with nonnegative costs");
        let mut w = first;
        while w != join {
            let a = self.pred[w];
            self.flow[a] += if self.up[w] { -delta } else { delta };
            w = self.parent[w];
        }
        let mut w = second;
        while w != join {
            let a = self.pred[w];
            self.flow[a] += if self.up[w] { delta } else { -delta };
            w = self.parent[w];
        }
        self.flow[entering] = delta;
        let leaving = self.pred[leave_node];
        self.flow[leaving] = 0.0;
        self.in_tree[leaving] = false;
        self.in_tree[entering] = true;
        let (lt, lh, _) = self.arc(leaving);
        for x in [lt, lh] {
            let adj = &mut self.tree_adj[x];
            if let Some(k) = adj.iter().position(|&b| b == leaving) {
                adj.swap_remove(k);
            }
        }
        self.tree_adj[first].push(entering);
        self.tree_adj[second].push(entering);
        self.rebuild();
    }

    fn solve(mut self) -> f64 {
        let scale = self.cost.iter().fold(0.0f64, |a, &c| a.max(c)).max(f64::MIN_POSITIVE);
        let tol = 1e-12 * scale;
        while let Some(a) = self.entering(tol) {
            self.pivot(a);
        }
        let e = self.n * self.m;
        self.flow[..e].iter().zip(self.cost).map(|(f, c)| f * c).sum()
    }
}

/// Exact order-`p` Wasserstein distance between weighted point sets with
/// Euclidean ground metric. Weights are normalised internally.
pub fn wasserstein_weighted(
    a: &[ParameterVector],
    wa: &[f64],
    b: &[ParameterVector],
    wb: &[f64],
    p: f64,
) -> Result<f64> {
    check_dims(a, b)?;
    if wa.len() != a.len() || wb.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: wa.len(),
        });
    }
    if wa.iter().chain(wb).any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::NonFiniteValue("transport weight".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidConfig(format!("Wasserstein order must be ≥ 1, got {p}")));
    }
    let (sa, sb): (f64, f64) = (wa.iter().sum(), wb.iter().sum());
    if !(sa > 0.0 && sb > 0.0) {
        return Err(Error::AllWeightsDegenerate);
    }
    let supply: Vec<f64> = wa.iter().map(|w| w / sa).collect();
    let demand: Vec<f64> = wb.iter().map(|w| w / sb).collect();
    let (a, supply) = merge_atoms(a, &supply);
    let (b, demand) = merge_atoms(b, &demand);
    let cost: Vec<f64> = a
        .iter()
        .flat_map(|x| b.iter().map(move |y| euclid(x, y).powf(p)))
        .collect();
    Ok(transport(&cost, &supply, &demand).max(0.0).powf(1.0 / p))
}

/// Collapses repeated points into one atom carrying their summed weight,
/// keeping first-occurrence order.
fn merge_atoms<'p>(points: &'p [ParameterVector], weights: &[f64]) -> (Vec<&'p ParameterVector>, Vec<f64>) {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut atoms = Vec::new();
    let mut mass: Vec<f64> = Vec::new();
    for (p, w) in points.iter().zip(weights) {
        let key: Vec<u64> = p.iter().map(|v| v.to_bits()).collect();
        match index.get(&key) {
            Some(&k) => mass[k] += w,
            None => {
                index.insert(key, atoms.len());
                atoms.push(p);
                mass.push(*w);
            }
        }
    }
    (atoms, mass)
}

/// Exact W₁ between two equally weighted sample sets.
pub fn wasserstein(a: &[ParameterVector], b: &[ParameterVector]) -> Result<f64> {
    wasserstein_weighted(a, &vec![1.0; a.len()], b, &vec![1.0; b.len()], 1.0)
}

/// Uniform subsample without replacement down to `cap` points (order kept).
pub fn cap_samples<R: Rng + ?Sized>(points: &[ParameterVector], cap: usize, rng: &mut R) -> Vec<ParameterVector> {
    if points.len() <= cap {
        return points.to_vec();
    }
    let mut idx = index::sample(rng, points.len(), cap).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| points[i].clone()).collect()
}

pub fn mean_of(points: &[ParameterVector]) -> Vec<f64> {
    let pts: Vec<Vec<f64>> = points.iter().map(|p| p.0.clone()).collect();
    crate::samplers::weighted_mean(&pts, None)
}

/// `‖mean(a) − mean(b)‖₂`.
pub fn mean_distance(a: &[ParameterVector], b: &[ParameterVector]) -> Result<f64> {
    check_dims(a, b)?;
    Ok(euclid(&mean_of(a), &mean_of(b)))
}

/// Percentile bootstrap of the mean: `(low, mean, high)`.
pub fn bootstrap_ci<R: Rng + ?Sized>(
    values: &[f64],
    level: f64,
    replicates: usize,
    rng: &mut R,
) -> Result<(f64, f64, f64)> {
    if values.len() < 2 {
        return Err(Error::TooFewValues(values.len()));
    }
    if !(level > 0.0 && level < 1.0) || replicates == 0 {
        return Err(Error::InvalidConfig("level must lie in (0, 1) and replicates ≥ 1".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if values.iter().all(|v| *v == values[0]) {
        return Ok((values[0], values[0], values[0]));
    }
    let mut means: Vec<f64> = (0..replicates)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (replicates - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        means[lo] + (means[hi] - means[lo]) * (pos - lo as f64)
    };
    let alpha = (1.0 - level) / 2.0;
    Ok((q(alpha).min(mean), mean, q(1.0 - alpha).max(mean)))
}

/// Successive-shortest-path reference solver used to cross-check the simplex.
#[cfg(test)]
fn transport_ssp(cost: &[Vec<f64>], supply: &[f64], demand: &[f64]) -> f64 {
    let (n, m) = (supply.len(), demand.len());
    let mut sup = supply.to_vec();
    let mut dem = demand.to_vec();
    let mut flow = vec![vec![0.0f64; m]; n];
    // node potentials: sources 0..n, sinks n..n+m
    let mut pot = vec![0.0f64; n + m];
    let total: f64 = supply.iter().sum();
    let tiny = 1e-14 * total.max(f64::MIN_POSITIVE);
    let mut dist = vec![0.0f64; n + m];
    let mut done = vec![false; n + m];
    let mut parent = vec![usize::MAX; n + m];

    loop {
        if sup.iter().all(|&s| s <= tiny) || dem.iter().all(|&d| d <= tiny) {
            break;
        }
        dist.iter_mut().for_each(|v| *v = f64::INFINITY);
        done.iter_mut().for_each(|v| *v = false);
        parent.iter_mut().for_each(|v| *v = usize::MAX);
        for i in 0..n {
            if sup[i] > tiny {
                dist[i] = 0.0;
            }
        }
        let mut target = usize::MAX;
        loop {
            // dense Dijkstra: pick the closest unfinished node
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..n + m {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u >= n && dem[u - n] > tiny {
                target = u;
                break;
            }
            if u < n {
                for j in 0..m {
                    let v = n + j;
                    if done[v] {
                        continue;
                    }
                    let rc = (cost[u][j] + pot[u] - pot[v]).max(0.0);
                    if dist[u] + rc < dist[v] {
                        dist[v] = dist[u] + rc;
                        parent[v] = u;
                    }
                }
            } else {
                let j = u - n;
                for i in 0..n {
                    if done[i] || flow[i][j] <= tiny {
                        continue;
                    }
                    let rc = (-cost[i][j] + pot[u] - pot[i]).max(0.0);
                    if dist[u] + rc < dist[i] {
                        dist[i] = dist[u] + rc;
                        parent[i] = u;
                    }
                }
            }
        }
        if target == usize::MAX {
            break;
        }
        let dt = dist[target];
        for v in 0..n + m {
            pot[v] += dist[v].min(dt);
        }
        // bottleneck along the path
        let mut amount = dem[target - n];
        let mut v = target;
        while parent[v] != usize::MAX {
            let u = parent[v];
            if u >= n {
                amount = amount.min(flow[v][u - n]);
            }
            v = u;
        }
        amount = amount.min(sup[v]);
        sup[v] -= amount;
        dem[target - n] -= amount;
        let mut v = target;
        while parent[v] != usize::MAX {
            let u = parent[v];
            if u < n {
                flow[u][v - n] += amount;
            } else {
                flow[v][u - n] -= amount;
            }
            v = u;
        }
    }
    let mut c = 0.0;
    for i in 0..n {
        for j in 0..m {
            if flow[i][j] > 0.0 {
                c += flow[i][j] * cost[i][j];
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};
    use rand_distr::StandardNormal;

    fn pv(v: &[f64]) -> Vec<ParameterVector> {
        v.iter().map(|x| ParameterVector(vec![*x])).collect()
    }

    fn cloud(n: usize, d: usize, seed: u64) -> Vec<ParameterVector> {
        let mut rng = rng_for(seed, 0);
        (0..n)
            .map(|_| ParameterVector((0..d).map(|_| rng.sample(StandardNormal)).collect()))
            .collect()
    }

    #[test]
    fn simple_values() {
        let a = cloud(30, 2, 1);
        assert!(wasserstein(&a, &a).unwrap().abs() < 1e-12);
        assert!((wasserstein(&pv(&[0.0]), &pv(&[1.0])).unwrap() - 1.0).abs() < 1e-15);
        assert!(wasserstein(&pv(&[0.0]), &[ParameterVector(vec![0.0, 1.0])]).is_err());
    }

    #[test]
    fn one_d_order_statistics() {
        let mut rng = rng_for(2, 0);
        for _ in 0..50 {
            let n = rng.random_range(1..40);
            let mut a: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let mut b: Vec<f64> = (0..n).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal) + 0.3).collect();
            let w = wasserstein(&pv(&a), &pv(&b)).unwrap();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            let oracle = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64;
            assert!((w - oracle).abs() < 1e-10, "{w} vs {oracle}");
        }
    }

    #[test]
    fn unequal_sizes_and_weights() {
        // {0, 2} vs {1}: each half moves distance 1
        let w = wasserstein(&pv(&[0.0, 2.0]), &pv(&[1.0])).unwrap();
        assert!((w - 1.0).abs() < 1e-12);
        // weight 3:1 on {0, 4} against {1}: 0.75·1 + 0.25·3
        let w = wasserstein_weighted(&pv(&[0.0, 4.0]), &[3.0, 1.0], &pv(&[1.0]), &[1.0], 1.0).unwrap();
        assert!((w - 1.5).abs() < 1e-12);
        // 1-D quantile oracle for unequal sizes
        let a = pv(&[0.0, 1.0, 2.0]);
        let b = pv(&[0.5, 3.0]);
        let w = wasserstein(&a, &b).unwrap();
        // quantile functions: a = 0,1,2 on thirds; b = 0.5 on [0,1/2), 3 on [1/2,1)
        let oracle = (0.5 / 3.0) + (1.0 / 6.0) * 0.5 + (1.0 / 6.0) * 2.0 + (1.0 / 3.0) * 1.0;
        assert!((w - oracle).abs() < 1e-12, "{w} vs {oracle}");
    }

    #[test]
    fn order_two() {
        let w = wasserstein_weighted(&pv(&[0.0, 1.0]), &[1.0, 1.0], &pv(&[2.0, 3.0]), &[1.0, 1.0], 2.0).unwrap();
        assert!((w - 2.0).abs() < 1e-12);
    }

    #[test]
    fn metric_axioms() {
        for t in 0..20 {
            let a = cloud(15, 2, 100 + t);
            let b = cloud(15, 2, 200 + t);
            let c = cloud(15, 2, 300 + t);
            let ab = wasserstein(&a, &b).unwrap();
            assert!((ab - wasserstein(&b, &a).unwrap()).abs() < 1e-12);
            assert!(ab > 0.0);
            assert!(ab <= wasserstein(&a, &c).unwrap() + wasserstein(&c, &b).unwrap() + 1e-12);
        }
    }

    #[test]
    fn downsampling_stability() {
        let big = cloud(5000, 2, 7);
        let mut rng = rng_for(8, 0);
        let s1 = cap_samples(&big, 1000, &mut rng);
        let s2 = cap_samples(&big, 1000, &mut rng);
        let mut diam: f64 = 0.0;
        for p in big.iter().step_by(25) {
            for q in big.iter().step_by(25) {
                diam = diam.max(euclid(p, q));
            }
        }
        let w = wasserstein(&s1, &s2).unwrap();
        assert!(w <= 0.05 * diam, "{w} vs diameter {diam}");
    }

    #[test]
    fn mean_distance_values() {
        let a = cloud(10, 2, 3);
        assert_eq!(mean_distance(&a, &a).unwrap(), 0.0);
        let z = vec![ParameterVector(vec![0.0, 0.0])];
        let f = vec![ParameterVector(vec![3.0, 4.0])];
        assert!((mean_distance(&z, &f).unwrap() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn bootstrap_basics() {
        let mut rng = rng_for(4, 0);
        assert_eq!(bootstrap_ci(&[2.5; 6], 0.95, 1000, &mut rng).unwrap(), (2.5, 2.5, 2.5));
        let v = [1.0, 2.0, 4.0, 8.0];
        let (lo, m, hi) = bootstrap_ci(&v, 0.95, 2000, &mut rng).unwrap();
        assert_eq!(m, 3.75);
        assert!(lo <= m && m <= hi);
        assert_eq!(bootstrap_ci(&[1.0], 0.95, 10, &mut rng), Err(Error::TooFewValues(1)));
    }

    #[test]
    fn bootstrap_width_scales_as_root_n() {
        let mut widths = Vec::new();
        for (k, n) in [10usize, 40, 160].into_iter().enumerate() {
            let mut total = 0.0;
            for rep in 0..20 {
                let mut rng = rng_for(50 + k as u64, rep);
                let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let (lo, _, hi) = bootstrap_ci(&v, 0.95, 2000, &mut rng).unwrap();
                total += hi - lo;
            }
            widths.push(total / 20.0);
        }
        for w in widths.windows(2) {
            let r = w[0] / w[1];
            assert!(r > 1.6 && r < 2.5, "{widths:?}");
        }
    }

    #[test]
    fn simplex_matches_shortest_paths() {
        let mut rng = rng_for(9, 0);
        for _ in 0..30 {
            let (n, m) = (rng.random_range(1..25), rng.random_range(1..25));
            let a = cloud(n, 2, rng.random());
            let b = cloud(m, 2, rng.random());
            let wa: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let wb: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
            let (sa, sb): (f64, f64) = (wa.iter().sum(), wb.iter().sum());
            let supply: Vec<f64> = wa.iter().map(|w| w / sa).collect();
            let demand: Vec<f64> = wb.iter().map(|w| w / sb).collect();
            let dense: Vec<Vec<f64>> = a.iter().map(|x| b.iter().map(|y| euclid(x, y)).collect()).collect();
            let flat: Vec<f64> = dense.iter().flatten().copied().collect();
            let fast = transport(&flat, &supply, &demand);
            let slow = transport_ssp(&dense, &supply, &demand);
            assert!((fast - slow).abs() < 1e-10, "{fast} vs {slow}");
        }
    }

    #[test]
    fn duplicates_merge_exactly() {
        let a = pv(&[0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = pv(&[0.5, 2.0]);
        let merged = wasserstein(&a, &b).unwrap();
        let spread = wasserstein(&pv(&[0.0, 1e-300, 1.0, 1.0 + 1e-15, 1.0 - 1e-15]), &b).unwrap();
        assert!((merged - spread).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn translation_invariant(seed in 0u64..1000, cx in -5.0..5.0f64, cy in -5.0..5.0f64) {
            let a = cloud(12, 2, seed);
            let b = cloud(12, 2, seed + 1);
            let shift = |s: &[ParameterVector]| -> Vec<ParameterVector> {
                s.iter().map(|p| ParameterVector(vec![p[0] + cx, p[1] + cy])).collect()
            };
            let w0 = wasserstein(&a, &b).unwrap();
            let w1 = wasserstein(&shift(&a), &shift(&b)).unwrap();
            prop_assert!((w0 - w1).abs() < 1e-9);
            let m0 = mean_distance(&a, &b).unwrap();
            let m1 = mean_distance(&shift(&a), &shift(&b)).unwrap();
            prop_assert!((m0 - m1).abs() < 1e-9);
        }
    }
}
