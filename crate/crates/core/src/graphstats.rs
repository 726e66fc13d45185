//! Estimators on a [`Snapshot`]: connected components, degree assortativity,
//! degree histograms and Kolmogorov–Smirnov comparisons.

#[allow(unused_imports)] // float methods come from std when it is linked
use num_traits::Float;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::snapshot::Snapshot;
use crate::special::kolmogorov_sf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub count: u64,
    pub largest: u64,
    pub fraction: f64,
    /// Component sizes, largest first.
    pub sizes: Vec<u64>,
}

struct DisjointSets {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self { parent: (0..n as u32).collect(), size: alloc::vec![1; n] }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            core::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

/// Connected components; multiplicity and self-loops play no role.
pub fn largest_component(snapshot: &Snapshot) -> ComponentSummary {
    let n = snapshot.node_count();
    let mut sets = DisjointSets::new(n);
    for (a, b, _) in snapshot.dense_edges() {
        if a != b {
            sets.union(a as u32, b as u32);
        }
    }
    let roots: Vec<u32> = (0..n as u32).filter(|&i| sets.find(i) == i).collect();
    let mut sizes: Vec<u64> = roots.iter().map(|&i| sets.size[i as usize] as u64).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    let largest = sizes.first().copied().unwrap_or(0);
    ComponentSummary {
        count: sizes.len() as u64,
        largest,
        fraction: if n == 0 { 0.0 } else { largest as f64 / n as f64 },
        sizes,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssortativityPolicy {
    pub exclude_self_loops: bool,
    pub count_multiplicity: bool,
}

impl Default for AssortativityPolicy {
    fn default() -> Self {
        Self { exclude_self_loops: true, count_multiplicity: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AssortativityError {
    #[error("degree variance over edge ends is zero")]
    Undefined,
    #[error("fewer than two edges after filtering ({edges})")]
    TooFewEdges { edges: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssortativityEstimate {
    pub r: f64,
    /// Ordered degree pairs used, two per counted edge.
    pub pairs: u64,
    /// Jackknife over counted edges.
    pub stderr: f64,
}

/// Edge contributions `(weight, d_u, d_v)` under the policy.
fn edge_terms(snapshot: &Snapshot, policy: AssortativityPolicy) -> Vec<(u64, u64, u64)> {
    snapshot
        .dense_edges()
        .into_iter()
        .filter(|&(a, b, _)| !(policy.exclude_self_loops && a == b))
        .map(|(a, b, m)| {
            let w = if policy.count_multiplicity { m as u64 } else { 1 };
            (w, snapshot.nodes[a].degree, snapshot.nodes[b].degree)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
struct PairSums {
    w: i128,
    x: i128,
    xx: i128,
    xy: i128,
}

impl PairSums {
    fn add(&mut self, w: i128, du: i128, dv: i128, sign: i128) {
        self.w += sign * 2 * w;
        self.x += sign * w * (du + dv);
        self.xx += sign * w * (du * du + dv * dv);
        self.xy += sign * w * 2 * du * dv;
    }

    /// `(numerator, denominator)` of the Pearson coefficient, both scaled by
    /// the squared pair count.
    fn ratio(&self) -> (i128, i128) {
        (self.w * self.xy - self.x * self.x, self.w * self.xx - self.x * self.x)
    }
}

/// Newman's degree assortativity: the Pearson correlation of endpoint degrees
/// over the symmetrized edge-end pairs.
pub fn assortativity(
    snapshot: &Snapshot,
    policy: AssortativityPolicy,
) -> Result<AssortativityEstimate, AssortativityError> {
    let terms = edge_terms(snapshot, policy);
    let edges: u64 = terms.iter().map(|t| t.0).sum();
    if edges < 2 {
        return Err(AssortativityError::TooFewEdges { edges });
    }
    let mut sums = PairSums::default();
    for &(w, du, dv) in &terms {
        sums.add(w as i128, du as i128, dv as i128, 1);
    }
    let (num, den) = sums.ratio();
    if den == 0 {
        return Err(AssortativityError::Undefined);
    }
    let r = num as f64 / den as f64;

    // leave-one-edge-out; every copy of a pair leaves the same replicate
    let mut reps: Vec<(f64, u64)> = Vec::with_capacity(terms.len());
    for &(w, du, dv) in &terms {
        let mut s = sums;
        s.add(1, du as i128, dv as i128, -1);
        let (n, d) = s.ratio();
        if d != 0 {
            reps.push((n as f64 / d as f64, w));
        }
    }
    let count: u64 = reps.iter().map(|p| p.1).sum();
    let stderr = if count < 2 {
        f64::NAN
    } else {
        let mean = reps.iter().map(|&(v, w)| v * w as f64).sum::<f64>() / count as f64;
        let ss: f64 = reps.iter().map(|&(v, w)| w as f64 * (v - mean) * (v - mean)).sum();
        ((count - 1) as f64 / count as f64 * ss).sqrt()
    };
    Ok(AssortativityEstimate { r, pairs: 2 * edges, stderr })
}

/// Mean, variance and covariance of the endpoint degrees of a uniformly
/// chosen edge, from the symmetrized pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeDegreeMoments {
    pub pairs: u64,
    pub mean: f64,
    pub variance: f64,
    pub covariance: f64,
}

pub fn edge_degree_moments(snapshot: &Snapshot, policy: AssortativityPolicy) -> Option<EdgeDegreeMoments> {
    let mut sums = PairSums::default();
    for (w, du, dv) in edge_terms(snapshot, policy) {
        sums.add(w as i128, du as i128, dv as i128, 1);
    }
    if sums.w == 0 {
        return None;
    }
    let w = sums.w as f64;
    let mean = sums.x as f64 / w;
    let (num, den) = sums.ratio();
    Some(EdgeDegreeMoments {
        pairs: sums.w as u64,
        mean,
        variance: den as f64 / (w * w),
        covariance: num as f64 / (w * w),
    })
}

/// `hist[k]` = number of nodes of degree `k`.
pub fn empirical_degree_hist(snapshot: &Snapshot) -> Vec<u64> {
    let kmax = snapshot.nodes.iter().map(|n| n.degree).max().unwrap_or(0) as usize;
    let mut hist = alloc::vec![0u64; if snapshot.nodes.is_empty() { 0 } else { kmax + 1 }];
    for n in &snapshot.nodes {
        hist[n.degree as usize] += 1;
    }
    hist
}

/// Adds `other` into `acc`, growing it as needed.
pub fn merge_hist(acc: &mut Vec<u64>, other: &[u64]) {
    if acc.len() < other.len() {
        acc.resize(other.len(), 0);
    }
    for (a, b) in acc.iter_mut().zip(other) {
        *a += b;
    }
}

pub fn normalize_hist(hist: &[u64]) -> Vec<f64> {
    let total: u64 = hist.iter().sum();
    hist.iter().map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 }).collect()
}

/// `0.5 * sum |p_k - q_k|`, the shorter vector padded with zeros.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    let at = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
    0.5 * (0..n).map(|k| (at(p, k) - at(q, k)).abs()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    /// Effective sample size entering the limiting law.
    pub n: f64,
    /// Asymptotic p-value from the Kolmogorov distribution.
    pub p_value: f64,
}

impl KsResult {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value > significance
    }
}

/// One-sample KS statistic of `samples` against a continuous `cdf`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    KsResult { statistic: d, n, p_value: kolmogorov_sf(n.sqrt() * d) }
}

/// KS comparison of the snapshot's ages with `Exp(lambda)`.
pub fn empirical_age_ks(snapshot: &Snapshot, lambda: f64) -> KsResult {
    let ages: Vec<f64> = snapshot.nodes.iter().map(|n| n.age).collect();
    ks_one_sample(&ages, |a| -(-lambda * a).exp_m1())
}

/// Two-sample KS statistic between two samples given as histograms over the
/// same integer support. Ties make the asymptotic p-value conservative.
pub fn ks_two_sample_hist(a: &[u64], b: &[u64]) -> KsResult {
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let len = a.len().max(b.len());
    let (mut ca, mut cb, mut d) = (0u64, 0u64, 0.0f64);
    for k in 0..len {
        ca += a.get(k).copied().unwrap_or(0);
        cb += b.get(k).copied().unwrap_or(0);
        d = d.max((ca as f64 / na as f64 - cb as f64 / nb as f64).abs());
    }
    let n = (na as f64 * nb as f64) / (na + nb) as f64;
    KsResult { statistic: d, n, p_value: kolmogorov_sf(n.sqrt() * d) }
}

/// Two-sample KS statistic between real-valued samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len(), xb.len());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < na && j < nb {
        let x = xa[i].min(xb[j]);
        while i < na && xa[i] <= x {
            i += 1;
        }
        while j < nb && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let n = (na as f64 * nb as f64) / (na + nb) as f64;
    KsResult { statistic: d, n, p_value: kolmogorov_sf(n.sqrt() * d) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::snapshot::NodeRow;
    use rand::Rng;

    fn graph(n: u64, edges: &[(u64, u64)]) -> Snapshot {
        let nodes = (0..n).map(|id| NodeRow { id, age: 1.0, social_index: 1.0, degree: 0 }).collect();
        Snapshot::from_parts(0.0, nodes, edges.iter().copied())
    }

    #[test]
    fn components_basic() {
        let c = largest_component(&graph(5, &[]));
        assert_eq!(c.fraction, 0.2);
        assert_eq!(c.count, 5);
        let c = largest_component(&graph(4, &[(0, 1), (1, 2)]));
        assert_eq!(c.largest, 3);
        assert_eq!(c.sizes, [3, 1]);
    }

    #[test]
    fn components_ignore_loops_and_multiplicity() {
        let plain = largest_component(&graph(6, &[(0, 1), (2, 3), (3, 4)]));
        let noisy = largest_component(&graph(6, &[(0, 1), (1, 0), (2, 3), (3, 4), (4, 3), (5, 5)]));
        assert_eq!(plain, noisy);
    }

    #[test]
    fn components_of_disjoint_union_concatenate() {
        let a = graph(4, &[(0, 1), (1, 2)]);
        let b = graph(5, &[(0, 1), (2, 3), (3, 4)]);
        let u = largest_component(&a.disjoint_union(&b));
        let mut expect = [largest_component(&a).sizes, largest_component(&b).sizes].concat();
        expect.sort_unstable_by(|x, y| y.cmp(x));
        assert_eq!(u.sizes, expect);
    }

    #[test]
    fn path_is_perfectly_disassortative() {
        let est = assortativity(&graph(3, &[(0, 1), (1, 2)]), AssortativityPolicy::default()).unwrap();
        assert_eq!(est.r, -1.0);
        assert_eq!(est.pairs, 4);
    }

    #[test]
    fn regular_graphs_are_undefined() {
        let tri = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(assortativity(&tri, AssortativityPolicy::default()), Err(AssortativityError::Undefined));
        assert_eq!(
            assortativity(&graph(2, &[(0, 1)]), AssortativityPolicy::default()),
            Err(AssortativityError::TooFewEdges { edges: 1 })
        );
    }

    fn random_graph(seed: u64, n: u64, m: usize) -> Snapshot {
        let mut rng = RngStream::new(seed, 0).rng();
        let edges: Vec<(u64, u64)> = (0..m).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).collect();
        graph(n, &edges)
    }

    #[test]
    fn assortativity_invariant_under_relabeling() {
        let g = random_graph(1, 60, 150);
        let p = AssortativityPolicy::default();
        let r0 = assortativity(&g, p).unwrap();
        // reverse the ids
        let nodes = g.nodes.iter().map(|n| NodeRow { id: 59 - n.id, ..*n }).collect();
        let mut copies = Vec::new();
        for e in &g.edges {
            for _ in 0..e.multiplicity {
                copies.push((59 - e.a, 59 - e.b));
            }
        }
        let h = Snapshot::from_parts(0.0, nodes, copies);
        let r1 = assortativity(&h, p).unwrap();
        assert!((r0.r - r1.r).abs() < 1e-14);
    }

    #[test]
    fn assortativity_shift_invariant() {
        let mut g = random_graph(2, 80, 200);
        let p = AssortativityPolicy::default();
        let r0 = assortativity(&g, p).unwrap().r;
        for n in &mut g.nodes {
            n.degree += 7;
        }
        assert!((assortativity(&g, p).unwrap().r - r0).abs() < 1e-14);
    }

    #[test]
    fn assortativity_matches_float_pearson() {
        let g = random_graph(3, 200, 500);
        let p = AssortativityPolicy::default();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (a, b, m) in g.dense_edges() {
            if a == b {
                continue;
            }
            for _ in 0..m {
                let (da, db) = (g.nodes[a].degree as f64, g.nodes[b].degree as f64);
                xs.extend([da, db]);
                ys.extend([db, da]);
            }
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let vx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let vy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
        let est = assortativity(&g, p).unwrap();
        assert!((est.r - cov / (vx * vy).sqrt()).abs() < 1e-12);
        assert!(est.stderr > 0.0 && est.stderr < 0.2);
        let mom = edge_degree_moments(&g, p).unwrap();
        assert!((mom.covariance / mom.variance - est.r).abs() < 1e-12);
    }

    #[test]
    fn histogram_and_tv() {
        assert_eq!(empirical_degree_hist(&graph(4, &[])), [4]);
        let h = empirical_degree_hist(&graph(3, &[(0, 1), (1, 1)]));
        assert_eq!(h, [1, 1, 0, 1]);
        assert_eq!(total_variation(&[0.5, 0.5], &[1.0]), 0.5);
        let mut acc = alloc::vec![1, 2];
        merge_hist(&mut acc, &[0, 1, 5]);
        assert_eq!(acc, [1, 3, 5]);
    }

    #[test]
    fn ks_accepts_true_law_and_rejects_wrong_one() {
        let mut rng = RngStream::new(4, 0).rng();
        let n = 100_000;
        let nodes: Vec<NodeRow> = (0..n)
            .map(|id| NodeRow { id, age: -(-rng.random::<f64>()).ln_1p(), social_index: 1.0, degree: 0 })
            .collect();
        let snap = Snapshot::from_parts(0.0, nodes, []);
        let ks = empirical_age_ks(&snap, 1.0);
        assert!(ks.statistic < 1.63 / (n as f64).sqrt());
        assert!(ks.passes(0.01));
        assert!(!empirical_age_ks(&snap, 1.1).passes(0.01));
    }

    #[test]
    fn two_sample_ks() {
        let mut rng = RngStream::new(5, 0).rng();
        let a: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..4000).map(|_| rng.random::<f64>()).collect();
        let c: Vec<f64> = (0..4000).map(|_| rng.random::<f64>() * 1.1).collect();
        assert!(ks_two_sample(&a, &b).passes(0.01));
        assert!(!ks_two_sample(&a, &c).passes(0.01));
        let same = ks_two_sample_hist(&[10, 20, 30], &[20, 40, 60]);
        assert_eq!(same.statistic, 0.0);
    }
}
