//! Binary indexed trees over leaf priorities.

/// Complete binary tree maintaining the sum of its leaves, supporting
/// prefix-sum descent in `O(log n)`.
///
/// Parents are recomputed as `left + right` on every update rather than
/// patched by deltas, so the root never drifts from the leaves by more
/// than accumulated rounding of fresh sums.
#[derive(Clone, Debug)]
pub struct SumTree {
    leaves: usize,
    tree: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> SumTree {
        let leaves = capacity.next_power_of_two().max(1);
        SumTree { leaves, tree: vec![0.0; 2 * leaves] }
    }

    pub fn set(&mut self, index: usize, value: f64) {
        debug_assert!(value >= 0.0);
        let mut node = self.leaves + index;
        self.tree[node] = value;
        while node > 1 {
            node /= 2;
            self.tree[node] = self.tree[2 * node] + self.tree[2 * node + 1];
        }
    }

    pub fn get(&self, index: usize) -> f64 {
        self.tree[self.leaves + index]
    }

    pub fn total(&self) -> f64 {
        self.tree[1]
    }

    /// Recompute the total directly from the leaves, for drift checks.
    pub fn rescan_total(&self) -> f64 {
        self.tree[self.leaves..].iter().sum()
    }

    /// Leaf index whose cumulative range contains `target in [0, total)`.
    pub fn descend(&self, mut target: f64) -> usize {
        let mut node = 1;
        while node < self.leaves {
            let left = self.tree[2 * node];
            if target < left {
                node = 2 * node;
            } else {
                target -= left;
                node = 2 * node + 1;
            }
        }
        node - self.leaves
    }
}

/// Same shape as [`SumTree`], tracking the maximum leaf instead.
#[derive(Clone, Debug)]
pub struct MaxTree {
    leaves: usize,
    tree: Vec<f64>,
}

impl MaxTree {
    pub fn new(capacity: usize) -> MaxTree {
        let leaves = capacity.next_power_of_two().max(1);
        MaxTree { leaves, tree: vec![0.0; 2 * leaves] }
    }

    pub fn set(&mut self, index: usize, value: f64) {
        let mut node = self.leaves + index;
        self.tree[node] = value;
        while node > 1 {
            node /= 2;
            self.tree[node] = self.tree[2 * node].max(self.tree[2 * node + 1]);
        }
    }

    pub fn max(&self) -> f64 {
        self.tree[1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn descend_picks_the_leaf_covering_the_prefix() {
        let mut t = SumTree::new(4);
        t.set(0, 3.0);
        t.set(1, 1.0);
        t.set(2, 0.0);
        t.set(3, 2.0);
        assert_relative_eq!(t.total(), 6.0);
        assert_eq!(t.descend(0.0), 0);
        assert_eq!(t.descend(2.999), 0);
        assert_eq!(t.descend(3.0), 1);
        assert_eq!(t.descend(3.999), 1);
        assert_eq!(t.descend(4.0), 3);
        assert_eq!(t.descend(5.999), 3);
    }

    #[test]
    fn updates_keep_the_root_consistent_under_churn() {
        let mut t = SumTree::new(1000);
        let mut rng = crate::rng::stream(5, crate::rng::StreamId::LearnerSample);
        for i in 0..1000 {
            t.set(i, rng.random_range(0.0..=2.0));
        }
        for _ in 0..100_000 {
            let i = rng.random_range(0..1000);
            t.set(i, rng.random_range(0.0..=2.0));
        }
        let rel = (t.total() - t.rescan_total()).abs() / t.rescan_total();
        assert!(rel < 1e-12, "drift {rel}");
    }

    #[test]
    fn non_power_of_two_capacity_rounds_up() {
        let mut t = SumTree::new(45000);
        t.set(44999, 7.0);
        assert_relative_eq!(t.total(), 7.0);
        assert_eq!(t.descend(3.0), 44999);
    }

    #[test]
    fn max_tree_tracks_the_running_maximum() {
        let mut t = MaxTree::new(8);
        assert_eq!(t.max(), 0.0);
        t.set(2, 5.0);
        t.set(6, 3.0);
        assert_eq!(t.max(), 5.0);
        t.set(2, 1.0);
        assert_eq!(t.max(), 3.0);
    }
}
