//! Growable Fenwick tree over non-negative `f64` weights, used as the dynamic
//! weight index of the simulator: O(log n) push, pop, point update and
//! sampling by prefix sum.

use alloc::vec::Vec;

#[derive(Debug, Clone, Default)]
pub struct WeightIndex {
    // 1-based Fenwick array, tree[0] unused
    tree: Vec<f64>,
    weights: Vec<f64>,
}

#[inline]
fn lsb(i: usize) -> usize {
    i & i.wrapping_neg()
}

impl WeightIndex {
    pub fn new() -> Self {
        Self { tree: alloc::vec![0.0], weights: Vec::new() }
    }

    pub fn from_weights(weights: &[f64]) -> Self {
        let mut idx = Self::new();
        idx.rebuild_from(weights);
        idx
    }

    /// O(n) rebuild; also used to shed accumulated rounding drift.
    pub fn rebuild_from(&mut self, weights: &[f64]) {
        let n = weights.len();
        self.weights.clear();
        self.weights.extend_from_slice(weights);
        self.tree.clear();
        self.tree.push(0.0);
        self.tree.extend_from_slice(weights);
        for i in 1..=n {
            let j = i + lsb(i);
            if j <= n {
                self.tree[j] += self.tree[i];
            }
        }
    }

    pub fn rebuild(&mut self) {
        let w = core::mem::take(&mut self.weights);
        self.rebuild_from(&w);
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, pos: usize) -> f64 {
        self.weights[pos]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Sum of the first `n` weights.
    pub fn prefix(&self, n: usize) -> f64 {
        let mut i = n;
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i -= lsb(i);
        }
        s
    }

    pub fn total(&self) -> f64 {
        self.prefix(self.len())
    }

    pub fn push(&mut self, w: f64) {
        let i = self.weights.len() + 1;
        // tree[i] covers (i - lsb(i), i]
        let node = w + self.prefix(i - 1) - self.prefix(i - lsb(i));
        self.weights.push(w);
        self.tree.push(node);
    }

    /// Removes the last weight.
    pub fn pop(&mut self) -> Option<f64> {
        let w = self.weights.pop()?;
        self.tree.pop();
        Some(w)
    }

    pub fn set(&mut self, pos: usize, w: f64) {
        let delta = w - self.weights[pos];
        self.weights[pos] = w;
        let mut i = pos + 1;
        let n = self.weights.len();
        while i <= n {
            self.tree[i] += delta;
            i += lsb(i);
        }
    }

    /// Position `p` with `prefix(p) <= target < prefix(p + 1)`, skipping
    /// zero-weight slots; clamps to the last positive slot when rounding
    /// pushes `target` past the total.
    pub fn find(&self, mut target: f64) -> Option<usize> {
        let n = self.len();
        if n == 0 {
            return None;
        }
        let mut pos = 0;
        let mut step = 1usize << (usize::BITS - 1 - n.leading_zeros());
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        // pos = number of leading slots whose sum is <= target
        if pos < n {
            if self.weights[pos] > 0.0 {
                return Some(pos);
            }
            if let Some(p) = (pos..n).find(|&p| self.weights[p] > 0.0) {
                return Some(p);
            }
        }
        (0..n).rev().find(|&p| self.weights[p] > 0.0)
    }
}
