//! CART regression trees. Splits minimize the summed squared error of the
//! children (variance reduction) over midpoint thresholds between sorted
//! distinct feature values; ties go to the lowest feature index, then the
//! lowest threshold.

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    /// Maximum number of split levels; `usize::MAX` for unlimited.
    pub max_depth: usize,
    /// Minimum number of samples on each side of a split.
    pub min_leaf: usize,
}

/// Flat node storage. A node with `feature < 0` is a leaf whose prediction is
/// stored in `threshold`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Node {
    pub feature: i32,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
}

#[derive(Debug, Clone)]
pub(crate) struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut idx = 0usize;
        loop {
            let node = &self.nodes[idx];
            if node.feature < 0 {
                return node.threshold;
            }
            idx = if x[node.feature as usize] <= node.threshold {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }
}

struct WorkItem {
    /// Slot in the node vector to fill in.
    slot: usize,
    /// Per-feature sample indices, each sorted by that feature's value.
    order: Vec<Vec<u32>>,
    depth: usize,
}

/// Fits a tree on `m` rows stored row-major in `x` (`m * dim` values).
pub(crate) fn fit(x: &[f64], y: &[f64], dim: usize, params: &TreeParams) -> RegressionTree {
    let m = y.len();
    debug_assert_eq!(x.len(), m * dim);
    let feat = |s: u32, j: usize| x[s as usize * dim + j];

    let mut root_order = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut idx: Vec<u32> = (0..m as u32).collect();
        idx.sort_unstable_by(|&a, &b| feat(a, j).total_cmp(&feat(b, j)).then(a.cmp(&b)));
        root_order.push(idx);
    }

    let mut nodes: Vec<Node> = vec![Node {
        feature: -1,
        threshold: 0.0,
        left: 0,
        right: 0,
    }];
    let mut stack = vec![WorkItem {
        slot: 0,
        order: root_order,
        depth: 0,
    }];
    let mut side = vec![false; m];

    while let Some(item) = stack.pop() {
        let rows = &item.order[0];
        let n = rows.len();
        let (sum, sumsq) = rows.iter().fold((0.0, 0.0), |(s, q), &r| {
            let t = y[r as usize];
            (s + t, q + t * t)
        });
        let mean = sum / n as f64;
        let parent_sse = (sumsq - sum * sum / n as f64).max(0.0);

        let splittable =
            n >= 2 * params.min_leaf && item.depth < params.max_depth && parent_sse > 0.0;
        let best = if splittable {
            best_split(&item.order, y, &|s, j| feat(s, j), parent_sse, params.min_leaf)
        } else {
            None
        };

        match best {
            None => {
                nodes[item.slot] = Node {
                    feature: -1,
                    threshold: mean,
                    left: 0,
                    right: 0,
                };
            }
            Some((feature, threshold)) => {
                for &s in &item.order[feature] {
                    side[s as usize] = feat(s, feature) <= threshold;
                }
                let mut left_order = Vec::with_capacity(item.order.len());
                let mut right_order = Vec::with_capacity(item.order.len());
                for col in &item.order {
                    let mut l = Vec::new();
                    let mut r = Vec::new();
                    for &s in col {
                        if side[s as usize] {
                            l.push(s);
                        } else {
                            r.push(s);
                        }
                    }
                    left_order.push(l);
                    right_order.push(r);
                }
                let left_slot = nodes.len();
                let right_slot = nodes.len() + 1;
                nodes.push(Node {
                    feature: -1,
                    threshold: 0.0,
                    left: 0,
                    right: 0,
                });
                nodes.push(Node {
                    feature: -1,
                    threshold: 0.0,
                    left: 0,
                    right: 0,
                });
                nodes[item.slot] = Node {
                    feature: feature as i32,
                    threshold,
                    left: left_slot as u32,
                    right: right_slot as u32,
                };
                stack.push(WorkItem {
                    slot: right_slot,
                    order: right_order,
                    depth: item.depth + 1,
                });
                stack.push(WorkItem {
                    slot: left_slot,
                    order: left_order,
                    depth: item.depth + 1,
                });
            }
        }
    }

    RegressionTree { nodes }
}

/// Scans every feature in ascending index order and every boundary between
/// distinct values in ascending threshold order; strict improvement keeps the
/// first (lowest) candidate on ties.
fn best_split(
    order: &[Vec<u32>],
    y: &[f64],
    feat: &dyn Fn(u32, usize) -> f64,
    parent_sse: f64,
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let n = order[0].len();
    let total: f64 = order[0].iter().map(|&r| y[r as usize]).sum();
    let total_sq: f64 = order[0]
        .iter()
        .map(|&r| {
            let t = y[r as usize];
            t * t
        })
        .sum();

    let mut best: Option<(f64, usize, f64)> = None;
    for (j, col) in order.iter().enumerate() {
        let mut left_n = 0usize;
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for w in 0..n - 1 {
            let s = col[w];
            let t = y[s as usize];
            left_n += 1;
            left_sum += t;
            left_sq += t * t;

            let v = feat(s, j);
            let v_next = feat(col[w + 1], j);
            if v_next <= v {
                continue;
            }
            if left_n < min_leaf || n - left_n < min_leaf {
                continue;
            }
            let right_n = n - left_n;
            let right_sum = total - left_sum;
            let right_sq = total_sq - left_sq;
            let sse_l = (left_sq - left_sum * left_sum / left_n as f64).max(0.0);
            let sse_r = (right_sq - right_sum * right_sum / right_n as f64).max(0.0);
            let sse = sse_l + sse_r;
            if sse >= parent_sse {
                continue;
            }
            if best.map_or(true, |(b, _, _)| sse < b) {
                let mut threshold = v / 2.0 + v_next / 2.0;
                // Keep routing consistent with the scan when the midpoint
                // rounds onto the right value.
                if threshold >= v_next {
                    threshold = v;
                }
                best = Some((sse, j, threshold));
            }
        }
    }
    best.map(|(_, j, thr)| (j, thr))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> TreeParams {
        TreeParams {
            max_depth: usize::MAX,
            min_leaf: 1,
        }
    }

    #[test]
    fn memorizes_distinct_scalar_keys() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        let tree = fit(&x, &y, 1, &params());
        for i in 0..10 {
            assert_eq!(tree.predict(&[i as f64]), y[i]);
        }
    }

    #[test]
    fn constant_targets_make_a_single_leaf() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y = vec![3.0; 20];
        let tree = fit(&x, &y, 1, &params());
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.predict(&[12.5]), 3.0);
    }

    #[test]
    fn respects_min_leaf() {
        let x: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let tree = fit(
            &x,
            &y,
            1,
            &TreeParams {
                max_depth: usize::MAX,
                min_leaf: 4,
            },
        );
        // Only one split is possible: 4 | 4.
        assert_eq!(tree.nodes.len(), 3);
        assert_eq!(tree.predict(&[0.0]), 1.5);
        assert_eq!(tree.predict(&[7.0]), 5.5);
    }

    #[test]
    fn depth_limit_caps_the_tree() {
        let x: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let tree = fit(
            &x,
            &y,
            1,
            &TreeParams {
                max_depth: 1,
                min_leaf: 1,
            },
        );
        assert_eq!(tree.nodes.len(), 3);
    }

    #[test]
    fn tie_break_prefers_lowest_feature() {
        // Feature 0 and feature 1 both split the data perfectly.
        let x = vec![
            0.0, 0.0, //
            0.0, 0.0, //
            1.0, 1.0, //
            1.0, 1.0,
        ];
        let y = vec![0.0, 0.0, 1.0, 1.0];
        let tree = fit(&x, &y, 2, &params());
        assert_eq!(tree.nodes[0].feature, 0);
        assert_eq!(tree.nodes[0].threshold, 0.5);
    }

    #[test]
    fn split_reduces_children_sse() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 10.0, 11.0, 12.0, 13.0];
        let y = vec![1.0, 1.1, 0.9, 1.0, 5.0, 5.1, 4.9, 5.0];
        let tree = fit(&x, &y, 1, &params());
        let root = tree.nodes[0];
        assert_eq!(root.feature, 0);
        assert!(root.threshold > 3.0 && root.threshold < 10.0);
    }
}
