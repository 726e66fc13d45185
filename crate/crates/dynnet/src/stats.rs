//! Per-snapshot statistics and their pooling across replicas.

use dynnet_core::graphstats::{
    assortativity, empirical_age_ks, empirical_degree_hist, ks_one_sample, largest_component, merge_hist,
    AssortativityError, AssortativityEstimate, AssortativityPolicy, KsResult,
};
use dynnet_core::Snapshot;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub count: u64,
    pub largest: u64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Assortativity {
    Defined(AssortativityEstimate),
    Undefined { reason: String },
}

impl Assortativity {
    pub fn r(&self) -> Option<f64> {
        match self {
            Assortativity::Defined(e) => Some(e.r),
            Assortativity::Undefined { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edge_copies: u64,
    pub mean_degree: f64,
    pub self_loop_copies: u64,
    pub multi_edge_extras: u64,
    pub components: Components,
    pub assortativity: Assortativity,
    pub degree_hist: Vec<u64>,
    pub age_ks: KsResult,
}

pub fn graph_stats(snap: &Snapshot, lambda: f64) -> GraphStats {
    let c = largest_component(snap);
    let assortativity = match assortativity(snap, AssortativityPolicy::default()) {
        Ok(e) => Assortativity::Defined(e),
        Err(e @ (AssortativityError::Undefined | AssortativityError::TooFewEdges { .. })) => {
            Assortativity::Undefined { reason: e.to_string() }
        }
    };
    GraphStats {
        nodes: snap.node_count(),
        edge_copies: snap.edge_copies(),
        mean_degree: snap.mean_degree(),
        self_loop_copies: snap.self_loop_copies(),
        multi_edge_extras: snap.multi_edge_extras(),
        components: Components { count: c.count, largest: c.largest, fraction: c.fraction },
        assortativity,
        degree_hist: empirical_degree_hist(snap),
        age_ks: empirical_age_ks(snap, lambda),
    }
}

/// Mean of replica values with the standard error from their spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// NaN for a single replica.
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_values(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate { mean: f64::NAN, stderr: f64::NAN, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stderr = if n < 2 {
            f64::NAN
        } else {
            let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64 / n as f64).sqrt()
        };
        Estimate { mean, stderr, n }
    }

    /// Two-sided 99% interval with the Student t quantile on `n - 1` degrees
    /// of freedom. NaN bounds for fewer than two replicas.
    pub fn ci99(&self) -> (f64, f64) {
        if self.n < 2 {
            return (f64::NAN, f64::NAN);
        }
        let t = StudentsT::new(0.0, 1.0, (self.n - 1) as f64).expect("positive dof").inverse_cdf(0.995);
        (self.mean - t * self.stderr, self.mean + t * self.stderr)
    }

    /// True when the 99% interval lies strictly on one side of zero.
    pub fn excludes_zero(&self) -> bool {
        let (lo, hi) = self.ci99();
        lo > 0.0 || hi < 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledStats {
    pub replicas: usize,
    pub nodes: usize,
    pub edge_copies: u64,
    /// Total degree over total nodes.
    pub mean_degree: f64,
    /// Spread of the per-replica mean degrees.
    pub mean_degree_estimate: Estimate,
    pub assortativity: Estimate,
    /// Replicas on which `r` was undefined and left out.
    pub assortativity_undefined: usize,
    pub largest_fraction: Estimate,
    pub self_loop_copies: u64,
    pub multi_edge_extras: u64,
    pub degree_hist: Vec<u64>,
    pub age_ks: KsResult,
}

/// Pools replica statistics in the given order. `ages` are all snapshot ages
/// concatenated in that order.
pub fn pool(stats: &[GraphStats], ages: &[f64], lambda: f64) -> PooledStats {
    let mut hist = Vec::new();
    for s in stats {
        merge_hist(&mut hist, &s.degree_hist);
    }
    let nodes: usize = stats.iter().map(|s| s.nodes).sum();
    let total_degree: f64 = hist.iter().enumerate().map(|(k, c)| k as f64 * *c as f64).sum();
    let rs: Vec<f64> = stats.iter().filter_map(|s| s.assortativity.r()).collect();
    let means: Vec<f64> = stats.iter().map(|s| s.mean_degree).collect();
    let fracs: Vec<f64> = stats.iter().map(|s| s.components.fraction).collect();
    PooledStats {
        replicas: stats.len(),
        nodes,
        edge_copies: stats.iter().map(|s| s.edge_copies).sum(),
        mean_degree: if nodes == 0 { 0.0 } else { total_degree / nodes as f64 },
        mean_degree_estimate: Estimate::from_values(&means),
        assortativity: Estimate::from_values(&rs),
        assortativity_undefined: stats.len() - rs.len(),
        largest_fraction: Estimate::from_values(&fracs),
        self_loop_copies: stats.iter().map(|s| s.self_loop_copies).sum(),
        multi_edge_extras: stats.iter().map(|s| s.multi_edge_extras).sum(),
        degree_hist: hist,
        age_ks: ks_one_sample(ages, |a| -(-lambda * a).exp_m1()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_from_values() {
        let e = Estimate::from_values(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        // sample sd sqrt(5/3), over sqrt(4)
        assert!((e.stderr - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert!(!e.excludes_zero());
        assert!(Estimate::from_values(&[1.0, 1.1, 0.9, 1.0, 1.05]).excludes_zero());
        // t_{3, 0.995} = 5.8409
        let (lo, _) = e.ci99();
        assert!((lo - (2.5 - 5.840_909_309_733_35 * e.stderr)).abs() < 1e-9);
        assert!(!Estimate::from_values(&[-1.0, 1.0]).excludes_zero());
        assert!(Estimate::from_values(&[0.5]).stderr.is_nan());
    }
}
