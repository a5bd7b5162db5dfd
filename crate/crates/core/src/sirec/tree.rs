//! CART classification trees over small dense feature matrices.
//!
//! Splits maximize the Gini gain, compared in exact integer arithmetic so the
//! chosen split never depends on floating-point summation order. Candidate
//! thresholds are midpoints between consecutive distinct values, stored as
//! `f32`; a sample goes left when `x <= threshold`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f32,
        left: usize,
        right: usize,
    },
    Leaf {
        label: i32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
        }
    }
}

/// Nodes in preorder; the root is node 0 and children always come after
/// their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

struct Grower<'a> {
    features: &'a [[f64; 3]],
    /// Class index per row, into `classes`.
    targets: &'a [usize],
    classes: &'a [i32],
    params: TreeParams,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f32,
    /// Split score as the fraction `num / den`; larger is better.
    num: u128,
    den: u128,
}

fn sum_sq(counts: &[u64]) -> u128 {
    counts.iter().map(|&c| (c as u128) * (c as u128)).sum()
}

/// `a/b > c/d` for positive denominators.
fn frac_gt(a: u128, b: u128, c: u128, d: u128) -> bool {
    a * d > c * b
}

fn quantized_threshold(a: f64, b: f64) -> Option<f32> {
    let mut t = (a + (b - a) / 2.0) as f32;
    if t as f64 >= b {
        t = t.next_down();
    }
    if (t as f64) < a {
        t = t.next_up();
    }
    (a <= t as f64 && (t as f64) < b).then_some(t)
}

impl Grower<'_> {
    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        let counts = self.counts(rows);
        let leaf = Node::Leaf {
            label: self.classes[majority(&counts)],
        };
        self.nodes.push(leaf);

        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || rows.len() < 2 * self.params.min_samples_leaf {
            return id;
        }
        let Some(best) = self.best_split(rows, &counts) else {
            return id;
        };

        let mid = partition(rows, |r| self.features[r][best.feature] <= best.threshold as f64);
        let (lrows, rrows) = rows.split_at_mut(mid);
        let left = self.grow(lrows, depth + 1);
        let right = self.grow(rrows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn counts(&self, rows: &[usize]) -> Vec<u64> {
        let mut counts = vec![0u64; self.classes.len()];
        for &r in rows {
            counts[self.targets[r]] += 1;
        }
        counts
    }

    fn best_split(&self, rows: &[usize], parent: &[u64]) -> Option<Candidate> {
        let n = rows.len();
        let min_leaf = self.params.min_samples_leaf.max(1);
        // Beating the unsplit node is required.
        let mut best: Option<Candidate> = None;
        let (mut bnum, mut bden) = (sum_sq(parent), n as u128);

        let mut order: Vec<usize> = rows.to_vec();
        for feature in 0..3 {
            let value = |r: usize| self.features[r][feature];
            order.sort_by(|&a, &b| value(a).total_cmp(&value(b)));
            let mut left = vec![0u64; parent.len()];
            let mut right = parent.to_vec();
            for i in 0..n - 1 {
                let t = self.targets[order[i]];
                left[t] += 1;
                right[t] -= 1;
                let (a, b) = (value(order[i]), value(order[i + 1]));
                let nl = i + 1;
                let nr = n - nl;
                if a == b || nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let (sl, sr) = (sum_sq(&left), sum_sq(&right));
                let (nl, nr) = (nl as u128, nr as u128);
                let num = sl * nr + sr * nl;
                let den = nl * nr;
                if !frac_gt(num, den, bnum, bden) {
                    continue;
                }
                let Some(threshold) = quantized_threshold(a, b) else {
                    continue;
                };
                best = Some(Candidate {
                    feature,
                    threshold,
                    num,
                    den,
                });
                bnum = num;
                bden = den;
            }
        }
        best.inspect(|c| debug_assert!(frac_gt(c.num, c.den, sum_sq(parent), n as u128)))
    }
}

/// Index of the largest count; the first one wins ties.
fn majority(counts: &[u64]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

fn partition(rows: &mut [usize], goes_left: impl Fn(usize) -> bool) -> usize {
    // Stable, so the row order inside each child matches the parent's.
    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&x| goes_left(x));
    let mid = l.len();
    rows[..mid].copy_from_slice(&l);
    rows[mid..].copy_from_slice(&r);
    mid
}

impl DecisionTree {
    /// Grows a tree on `features` with labels drawn from the sorted class
    /// list `classes`. With `bootstrap` the rows are resampled with
    /// replacement from `rng` first.
    pub fn fit<R: Rng + ?Sized>(
        features: &[[f64; 3]],
        labels: &[i32],
        classes: &[i32],
        params: TreeParams,
        bootstrap: Option<&mut R>,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: features.len(),
                actual: labels.len(),
            });
        }
        if features.is_empty() {
            return Err(Error::Training("no training rows".into()));
        }
        if features.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::Training("feature matrix contains NaN".into()));
        }
        let targets = labels
            .iter()
            .map(|l| classes.binary_search(l).map_err(|_| Error::UnknownLabel(*l)))
            .collect::<Result<Vec<_>>>()?;

        let mut rows: Vec<usize> = match bootstrap {
            Some(rng) => (0..features.len())
                .map(|_| rng.random_range(0..features.len()))
                .collect(),
            None => (0..features.len()).collect(),
        };
        let mut grower = Grower {
            features,
            targets: &targets,
            classes,
            params,
            nodes: Vec::new(),
        };
        grower.grow(&mut rows, 0);
        Ok(DecisionTree { nodes: grower.nodes })
    }

    /// Builds a tree from raw nodes, checking that it is a preorder-indexed
    /// binary tree in which every node is reachable exactly once.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Model("tree has no nodes".into()));
        }
        let mut seen = vec![false; nodes.len()];
        seen[0] = true;
        for (i, node) in nodes.iter().enumerate() {
            if let Node::Split {
                feature,
                threshold,
                left,
                right,
            } = *node
            {
                if feature >= 3 {
                    return Err(Error::Model(format!("node {i}: feature index {feature} out of range")));
                }
                if threshold.is_nan() {
                    return Err(Error::Model(format!("node {i}: threshold is NaN")));
                }
                for child in [left, right] {
                    if child <= i || child >= nodes.len() {
                        return Err(Error::Model(format!("node {i}: invalid child index {child}")));
                    }
                    if seen[child] {
                        return Err(Error::Model(format!("node {child} has more than one parent")));
                    }
                    seen[child] = true;
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(Error::Model(format!("node {orphan} is unreachable")));
        }
        Ok(DecisionTree { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn predict(&self, x: &[f64; 3]) -> i32 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { label } => return label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold as f64 { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_labels(&self) -> impl Iterator<Item = i32> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { label } => Some(*label),
            Node::Split { .. } => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    fn fit(x: &[[f64; 3]], y: &[i32], params: TreeParams) -> DecisionTree {
        let mut classes = y.to_vec();
        classes.sort();
        classes.dedup();
        DecisionTree::fit::<ChaCha8Rng>(x, y, &classes, params, None).unwrap()
    }

    /// Weighted Gini impurity of a split, straight from the definition.
    fn weighted_gini(x: &[[f64; 3]], y: &[i32], f: usize, t: f64) -> f64 {
        let gini = |part: Vec<i32>| {
            let n = part.len() as f64;
            let mut labels = part.clone();
            labels.sort();
            labels.dedup();
            1.0 - labels
                .iter()
                .map(|l| (part.iter().filter(|v| *v == l).count() as f64 / n).powi(2))
                .sum::<f64>()
        };
        let l: Vec<i32> = (0..y.len()).filter(|&i| x[i][f] <= t).map(|i| y[i]).collect();
        let r: Vec<i32> = (0..y.len()).filter(|&i| x[i][f] > t).map(|i| y[i]).collect();
        let n = y.len() as f64;
        (l.len() as f64 * gini(l) + r.len() as f64 * gini(r)) / n
    }

    #[test]
    fn stump_on_separable_feature() {
        let x = [[0.0, 0.0, 1.0], [0.0, 0.0, 2.0], [0.0, 0.0, 10.0], [0.0, 0.0, 11.0]];
        let y = [3, 3, 8, 8];
        let t = fit(&x, &y, TreeParams::default());
        assert_eq!(
            t.nodes()[0],
            Node::Split {
                feature: 2,
                threshold: 6.0,
                left: 1,
                right: 2
            }
        );
        assert_eq!(t.nodes().len(), 3);
        for (xi, yi) in x.iter().zip(y) {
            assert_eq!(t.predict(xi), yi);
        }
    }

    #[test]
    fn pure_node_is_leaf() {
        let t = fit(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], &[7, 7], TreeParams::default());
        assert_eq!(t.nodes(), &[Node::Leaf { label: 7 }]);
    }

    #[test]
    fn identical_rows_with_different_labels_stop() {
        let x = [[1.0, 1.0, 1.0]; 3];
        let t = fit(&x, &[5, 2, 5], TreeParams::default());
        assert_eq!(t.nodes(), &[Node::Leaf { label: 5 }]);
        let t = fit(&x[..2], &[5, 2], TreeParams::default());
        assert_eq!(t.nodes(), &[Node::Leaf { label: 2 }]);
    }

    #[test]
    fn tie_prefers_lowest_feature_then_lowest_threshold() {
        // Features 0 and 1 both separate perfectly; feature 0 wins.
        let x = [[0.0, 0.0, 0.0], [1.0, 1.0, 0.0]];
        let t = fit(&x, &[0, 1], TreeParams::default());
        assert!(matches!(t.nodes()[0], Node::Split { feature: 0, .. }));

        // On feature 0, cuts at 0.5 and 2.5 give the same gain.
        let x = [[0.0, 9.0, 9.0], [1.0, 9.0, 9.0], [2.0, 9.0, 9.0], [3.0, 9.0, 9.0]];
        let t = fit(
            &x,
            &[0, 1, 1, 0],
            TreeParams {
                max_depth: Some(1),
                min_samples_leaf: 1,
            },
        );
        assert_eq!(
            t.nodes()[0],
            Node::Split {
                feature: 0,
                threshold: 0.5,
                left: 1,
                right: 2
            }
        );
    }

    #[test]
    fn chosen_split_minimizes_gini() {
        let mut rng = rng_from_seed(3);
        let x: Vec<[f64; 3]> = (0..40)
            .map(|_| {
                [
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                ]
            })
            .collect();
        let y: Vec<i32> = x.iter().map(|r| (r[1] > 0.3) as i32 + (r[2] > 0.7) as i32).collect();
        let t = fit(
            &x,
            &y,
            TreeParams {
                max_depth: Some(1),
                min_samples_leaf: 1,
            },
        );
        let Node::Split { feature, threshold, .. } = t.nodes()[0] else {
            panic!("expected split")
        };
        let got = weighted_gini(&x, &y, feature, threshold as f64);
        for f in 0..3 {
            for r in &x {
                assert!(got <= weighted_gini(&x, &y, f, r[f]) + 1e-12);
            }
        }
    }

    #[test]
    fn limits_are_respected() {
        let mut rng = rng_from_seed(11);
        let x: Vec<[f64; 3]> = (0..200)
            .map(|_| {
                [
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                ]
            })
            .collect();
        let y: Vec<i32> = (0..200).map(|_| rng.random_range(0..4)).collect();
        let t = fit(
            &x,
            &y,
            TreeParams {
                max_depth: Some(3),
                min_samples_leaf: 1,
            },
        );
        assert!(t.depth() <= 3);

        let params = TreeParams {
            max_depth: None,
            min_samples_leaf: 7,
        };
        let t = fit(&x, &y, params);
        // count rows per leaf by routing
        let mut hits = vec![0usize; t.nodes().len()];
        for r in &x {
            let mut i = 0;
            while let Node::Split {
                feature,
                threshold,
                left,
                right,
            } = t.nodes()[i]
            {
                i = if r[feature] <= threshold as f64 { left } else { right };
            }
            hits[i] += 1;
        }
        for (i, n) in t.nodes().iter().enumerate() {
            if let Node::Leaf { .. } = n {
                assert!(hits[i] >= 7, "leaf {i} has {} rows", hits[i]);
            }
        }
    }

    #[test]
    fn close_values_get_a_separating_threshold() {
        // No f32 lies in [a, b), so no split is possible.
        let t = fit(
            &[[1.0 + 1e-12, 0.0, 0.0], [1.0 + 2e-12, 0.0, 0.0]],
            &[0, 1],
            TreeParams::default(),
        );
        assert_eq!(t.nodes().len(), 1);

        let a = 1.0f64;
        let b = 1.0 + f32::EPSILON as f64;
        let t = fit(&[[a, 0.0, 0.0], [b, 0.0, 0.0]], &[0, 1], TreeParams::default());
        assert_eq!(t.predict(&[a, 0.0, 0.0]), 0);
        assert_eq!(t.predict(&[b, 0.0, 0.0]), 1);
    }

    #[test]
    fn unknown_label_and_bad_shapes() {
        let x = [[0.0; 3]; 2];
        assert!(matches!(
            DecisionTree::fit::<ChaCha8Rng>(&x, &[1, 9], &[1, 2], TreeParams::default(), None),
            Err(Error::UnknownLabel(9))
        ));
        assert!(DecisionTree::fit::<ChaCha8Rng>(&x, &[1], &[1], TreeParams::default(), None).is_err());
        assert!(DecisionTree::fit::<ChaCha8Rng>(&[], &[], &[1], TreeParams::default(), None).is_err());
    }

    #[test]
    fn from_nodes_validation() {
        let leaf = Node::Leaf { label: 1 };
        assert!(DecisionTree::from_nodes(vec![leaf]).is_ok());
        assert!(DecisionTree::from_nodes(vec![]).is_err());
        let split = |l, r| Node::Split {
            feature: 0,
            threshold: 0.5,
            left: l,
            right: r,
        };
        assert!(DecisionTree::from_nodes(vec![split(1, 2), leaf, leaf]).is_ok());
        assert!(DecisionTree::from_nodes(vec![split(1, 1), leaf, leaf]).is_err());
        assert!(DecisionTree::from_nodes(vec![split(0, 2), leaf, leaf]).is_err());
        assert!(DecisionTree::from_nodes(vec![split(1, 3), leaf, leaf]).is_err());
        assert!(DecisionTree::from_nodes(vec![split(1, 2), leaf, leaf, leaf]).is_err());
        let bad_feature = Node::Split {
            feature: 3,
            threshold: 0.5,
            left: 1,
            right: 2,
        };
        assert!(DecisionTree::from_nodes(vec![bad_feature, leaf, leaf]).is_err());
    }

    proptest! {
        #[test]
        fn grown_tree_fits_training_rows(
            rows in prop::collection::vec((prop::array::uniform3(-100i32..100), 0i32..4), 1..80)
        ) {
            let x: Vec<[f64; 3]> = rows.iter().map(|(r, _)| r.map(|v| v as f64 * 0.37)).collect();
            let y: Vec<i32> = rows.iter().map(|(_, l)| *l).collect();
            let t = fit(&x, &y, TreeParams::default());
            for i in 0..x.len() {
                let conflict = (0..x.len()).any(|j| x[j] == x[i] && y[j] != y[i]);
                if !conflict {
                    prop_assert_eq!(t.predict(&x[i]), y[i]);
                }
            }
            prop_assert!(DecisionTree::from_nodes(t.nodes().to_vec()).is_ok());
        }
    }
}
