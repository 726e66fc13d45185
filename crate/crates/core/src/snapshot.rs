//! Frozen view of the network at an observation time.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    pub id: u64,
    pub age: f64,
    pub social_index: f64,
    /// Edge ends at this node, counting multiplicity; a self-loop adds 2.
    pub degree: u64,
}

/// An unordered pair `a <= b` with the number of parallel copies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeRow {
    pub a: u64,
    pub b: u64,
    pub multiplicity: u32,
}

impl EdgeRow {
    pub fn is_self_loop(&self) -> bool {
        self.a == self.b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    /// Sorted by id.
    pub nodes: Vec<NodeRow>,
    /// Sorted by `(a, b)`, one row per distinct pair.
    pub edges: Vec<EdgeRow>,
}

impl Snapshot {
    /// Builds a snapshot from node rows (degrees are recomputed) and raw edge
    /// copies given as id pairs.
    pub fn from_parts(time: f64, mut nodes: Vec<NodeRow>, copies: impl IntoIterator<Item = (u64, u64)>) -> Self {
        nodes.sort_by_key(|n| n.id);
        let mut pairs: Vec<(u64, u64)> = copies.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        pairs.sort_unstable();
        let mut edges: Vec<EdgeRow> = Vec::new();
        for (a, b) in pairs {
            match edges.last_mut() {
                Some(e) if e.a == a && e.b == b => e.multiplicity += 1,
                _ => edges.push(EdgeRow { a, b, multiplicity: 1 }),
            }
        }
        let mut snap = Snapshot { time, nodes, edges };
        snap.recompute_degrees();
        snap
    }

    pub fn recompute_degrees(&mut self) {
        for n in &mut self.nodes {
            n.degree = 0;
        }
        for i in 0..self.edges.len() {
            let e = self.edges[i];
            let m = e.multiplicity as u64;
            let ia = self.index_of(e.a).expect("edge endpoint is a node");
            let ib = self.index_of(e.b).expect("edge endpoint is a node");
            self.nodes[ia].degree += m;
            self.nodes[ib].degree += m;
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of edge copies (each parallel copy counted, self-loops included).
    pub fn edge_copies(&self) -> u64 {
        self.edges.iter().map(|e| e.multiplicity as u64).sum()
    }

    pub fn self_loop_copies(&self) -> u64 {
        self.edges.iter().filter(|e| e.is_self_loop()).map(|e| e.multiplicity as u64).sum()
    }

    /// Copies beyond the first on every pair that carries more than one.
    pub fn multi_edge_extras(&self) -> u64 {
        self.edges.iter().map(|e| e.multiplicity as u64 - 1).sum()
    }

    /// Dense position of node `id` in `nodes`.
    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.nodes.binary_search_by_key(&id, |n| n.id).ok()
    }

    /// Edge rows with endpoints mapped to dense node positions.
    pub fn dense_edges(&self) -> Vec<(usize, usize, u32)> {
        self.edges
            .iter()
            .map(|e| {
                (
                    self.index_of(e.a).expect("edge endpoint is a node"),
                    self.index_of(e.b).expect("edge endpoint is a node"),
                    e.multiplicity,
                )
            })
            .collect()
    }

    pub fn mean_degree(&self) -> f64 {
        if self.nodes.is_empty() {
            return 0.0;
        }
        self.nodes.iter().map(|n| n.degree as f64).sum::<f64>() / self.nodes.len() as f64
    }

    /// Disjoint union; ids of `other` are shifted past the largest id here.
    pub fn disjoint_union(&self, other: &Snapshot) -> Snapshot {
        let shift = self.nodes.iter().map(|n| n.id + 1).max().unwrap_or(0);
        let mut nodes = self.nodes.clone();
        nodes.extend(other.nodes.iter().map(|n| NodeRow { id: n.id + shift, ..*n }));
        let mut edges = self.edges.clone();
        edges.extend(other.edges.iter().map(|e| EdgeRow { a: e.a + shift, b: e.b + shift, ..*e }));
        Snapshot { time: self.time, nodes, edges }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nodes(n: u64) -> Vec<NodeRow> {
        (0..n).map(|id| NodeRow { id, age: 0.0, social_index: 1.0, degree: 0 }).collect()
    }

    #[test]
    fn degrees_count_multiplicity_and_loops() {
        let s = Snapshot::from_parts(1.0, nodes(3), [(0, 1), (1, 0), (2, 2), (1, 2)]);
        assert_eq!(s.edges.len(), 3);
        assert_eq!(s.edges[0], EdgeRow { a: 0, b: 1, multiplicity: 2 });
        let deg: Vec<u64> = s.nodes.iter().map(|n| n.degree).collect();
        assert_eq!(deg, [2, 3, 3]);
        assert_eq!(deg.iter().sum::<u64>(), 2 * s.edge_copies());
        assert_eq!(s.self_loop_copies(), 1);
        assert_eq!(s.multi_edge_extras(), 1);
    }
}
