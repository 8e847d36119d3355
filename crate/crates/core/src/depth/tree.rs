//! Depth-limited weighted least-squares regression trees.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Column-major feature matrix with a per-feature ascending sample order,
/// computed once and shared by every tree of an ensemble.
pub struct SortedMatrix<'a> {
    columns: &'a [Vec<f64>],
    order: Vec<Vec<usize>>,
}

impl<'a> SortedMatrix<'a> {
    pub fn new(columns: &'a [Vec<f64>]) -> Self {
        let order = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<usize> = (0..col.len()).collect();
                idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { columns, order }
    }

    pub fn n_samples(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Fits a tree to `targets` under weighted squared error using exact greedy
/// search over the distinct feature values. Ties in gain keep the lowest
/// feature index, then the lowest threshold.
pub fn fit_tree(matrix: &SortedMatrix<'_>, targets: &[f64], weights: &[f64], params: TreeParams) -> RegressionTree {
    let mut builder = Builder { matrix, targets, weights, params, nodes: Vec::new(), mark: vec![false; targets.len()] };
    builder.build(matrix.order.clone(), 0);
    RegressionTree { nodes: builder.nodes }
}

struct Builder<'m, 'a> {
    matrix: &'m SortedMatrix<'a>,
    targets: &'m [f64],
    weights: &'m [f64],
    params: TreeParams,
    nodes: Vec<Node>,
    mark: Vec<bool>,
}

impl Builder<'_, '_> {
    fn build(&mut self, order: Vec<Vec<usize>>, depth: usize) -> usize {
        let members = &order[0];
        let (w_total, s_total) =
            members.iter().fold((0.0, 0.0), |(w, s), &i| (w + self.weights[i], s + self.weights[i] * self.targets[i]));
        let leaf_value = if w_total > 0.0 { s_total / w_total } else { 0.0 };
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: leaf_value });

        let count = members.len();
        if depth >= self.params.max_depth || count < 2 * self.params.min_samples_leaf.max(1) || w_total <= 0.0 {
            return id;
        }
        let Some(split) = self.best_split(&order, w_total, s_total) else {
            return id;
        };

        let col = &self.matrix.columns[split.feature];
        for &i in members {
            self.mark[i] = col[i] <= split.threshold;
        }
        let mut left = Vec::with_capacity(order.len());
        let mut right = Vec::with_capacity(order.len());
        for feat_order in &order {
            let (l, r): (Vec<usize>, Vec<usize>) = feat_order.iter().partition(|&&i| self.mark[i]);
            left.push(l);
            right.push(r);
        }
        drop(order);
        let l = self.build(left, depth + 1);
        let r = self.build(right, depth + 1);
        self.nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left: l, right: r };
        id
    }

    fn best_split(&self, order: &[Vec<usize>], w_total: f64, s_total: f64) -> Option<Split> {
        let min_leaf = self.params.min_samples_leaf.max(1);
        let parent = s_total * s_total / w_total;
        let mut best: Option<Split> = None;
        for (feature, members) in order.iter().enumerate() {
            let col = &self.matrix.columns[feature];
            let n = members.len();
            let mut w_left = 0.0;
            let mut s_left = 0.0;
            for pos in 0..n - 1 {
                let i = members[pos];
                w_left += self.weights[i];
                s_left += self.weights[i] * self.targets[i];
                let here = col[i];
                let next = col[members[pos + 1]];
                if here == next {
                    continue;
                }
                let n_left = pos + 1;
                if n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let w_right = w_total - w_left;
                if w_left <= 0.0 || w_right <= 0.0 {
                    continue;
                }
                let s_right = s_total - s_left;
                let gain = s_left * s_left / w_left + s_right * s_right / w_right - parent;
                if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = here + (next - here) / 2.0;
                    if threshold >= next {
                        threshold = here;
                    }
                    best = Some(Split { feature, threshold, gain });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_function_is_split_at_midpoint() {
        let cols = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let m = SortedMatrix::new(&cols);
        let t = fit_tree(&m, &[0.0, 0.0, 10.0, 10.0], &[1.0; 4], TreeParams { max_depth: 3, min_samples_leaf: 1 });
        match &t.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 2.5);
            }
            n => panic!("expected split, got {n:?}"),
        }
        assert_eq!(t.predict(&[1.5]), 0.0);
        assert_eq!(t.predict(&[3.5]), 10.0);
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn respects_min_leaf_and_depth() {
        let cols = vec![(0..20).map(f64::from).collect::<Vec<_>>()];
        let y: Vec<f64> = (0..20).map(|i| (i * i) as f64).collect();
        let m = SortedMatrix::new(&cols);
        let t = fit_tree(&m, &y, &[1.0; 20], TreeParams { max_depth: 2, min_samples_leaf: 5 });
        assert!(t.depth() <= 2);
        let leaves = t.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count();
        assert!(leaves <= 4);
    }

    #[test]
    fn tie_goes_to_lower_threshold_and_feature() {
        // symmetric target: splitting at 1.5 or 2.5 on feature 0 gains the same
        let cols = vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]];
        let m = SortedMatrix::new(&cols);
        let t = fit_tree(&m, &[0.0, 1.0, 0.0], &[1.0; 3], TreeParams { max_depth: 1, min_samples_leaf: 1 });
        match &t.nodes[0] {
            Node::Split { feature, threshold, .. } => assert_eq!((*feature, *threshold), (0, 1.5)),
            n => panic!("expected split, got {n:?}"),
        }
    }

    #[test]
    fn constant_target_is_single_leaf() {
        let cols = vec![vec![1.0, 2.0, 3.0]];
        let m = SortedMatrix::new(&cols);
        let t = fit_tree(&m, &[0.0; 3], &[1.0; 3], TreeParams { max_depth: 3, min_samples_leaf: 1 });
        assert_eq!(t.nodes, vec![Node::Leaf { value: 0.0 }]);
    }
}
