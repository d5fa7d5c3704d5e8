//! Neighbor statistics for the kNN mutual information estimator.
//!
//! Everything is measured in the max norm. The brute-force path is the
//! O(d P^2) baseline; the k-d tree path prunes with bounding boxes but tests
//! candidate pairs with the exact same arithmetic, so both backends return
//! identical distances and counts.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::linalg::RowMatrix;

/// Which neighbor-search implementation to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NeighborBackend {
    /// Exact pairwise scan, O(d P^2).
    #[default]
    BruteForce,
    /// k-d tree acceleration; returns identical statistics.
    KdTree,
}

/// Per-point statistics: distance to the k-th joint neighbor and the strict
/// marginal neighbor counts within that distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborStats {
    pub kth_distance: f64,
    pub n_x: usize,
    pub n_y: usize,
}

fn chebyshev(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Joint data: `P x (dx + 1)` with the target in the last column.
pub fn neighbor_stats(
    joint: &RowMatrix,
    dx: usize,
    k: usize,
    backend: NeighborBackend,
) -> Vec<NeighborStats> {
    match backend {
        NeighborBackend::BruteForce => brute_stats(joint, dx, k),
        NeighborBackend::KdTree => kdtree_stats(joint, dx, k),
    }
}

fn brute_stats(joint: &RowMatrix, dx: usize, k: usize) -> Vec<NeighborStats> {
    let p = joint.nrows();
    let mut out = Vec::with_capacity(p);
    let mut x_dist = vec![0.0; p];
    let mut y_dist = vec![0.0; p];
    let mut joint_dist = vec![0.0; p];
    for l in 0..p {
        let row_l = joint.row(l);
        for m in 0..p {
            let row_m = joint.row(m);
            let dxm = chebyshev(&row_l[..dx], &row_m[..dx]);
            let dym = (row_l[dx] - row_m[dx]).abs();
            x_dist[m] = dxm;
            y_dist[m] = dym;
            joint_dist[m] = dxm.max(dym);
        }
        let mut others: Vec<f64> = joint_dist
            .iter()
            .enumerate()
            .filter(|(m, _)| *m != l)
            .map(|(_, &d)| d)
            .collect();
        let (_, kth, _) = others.select_nth_unstable_by(k - 1, f64::total_cmp);
        let r = *kth;
        let n_x = (0..p).filter(|&m| m != l && x_dist[m] < r).count();
        let n_y = (0..p).filter(|&m| m != l && y_dist[m] < r).count();
        out.push(NeighborStats {
            kth_distance: r,
            n_x,
            n_y,
        });
    }
    out
}

fn kdtree_stats(joint: &RowMatrix, dx: usize, k: usize) -> Vec<NeighborStats> {
    let p = joint.nrows();
    let dims = joint.ncols();
    let joint_tree = KdTree::build(joint, (0..dims).collect());
    let x_tree = KdTree::build(joint, (0..dx).collect());
    let y_tree = KdTree::build(joint, vec![dx]);
    (0..p)
        .map(|l| {
            let r = joint_tree.kth_distance(joint.row(l), k, l);
            let count_self = usize::from(r > 0.0);
            let n_x = x_tree.count_within(joint.row(l), r) - count_self;
            let n_y = y_tree.count_within(joint.row(l), r) - count_self;
            NeighborStats {
                kth_distance: r,
                n_x,
                n_y,
            }
        })
        .collect()
}

// Max-heap entry ordered by distance.
struct HeapItem(f64);

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// k-d tree over a subset of the columns of a point matrix, Chebyshev metric.
struct KdTree<'a> {
    points: &'a RowMatrix,
    dims: Vec<usize>,
    nodes: Vec<KdNode>,
    root: usize,
}

struct KdNode {
    index: usize, // row in `points`
    axis: usize,  // position within `dims`
    left: usize,
    right: usize,
    // Bounding box of the subtree, per tree dimension.
    lo: Vec<f64>,
    hi: Vec<f64>,
}

const NONE: usize = usize::MAX;

impl<'a> KdTree<'a> {
    fn build(points: &'a RowMatrix, dims: Vec<usize>) -> Self {
        let mut order: Vec<usize> = (0..points.nrows()).collect();
        let mut tree = KdTree {
            points,
            dims,
            nodes: Vec::new(),
            root: NONE,
        };
        let n = order.len();
        tree.nodes.reserve(n);
        tree.root = tree.build_rec(&mut order[..], 0);
        tree
    }

    fn coord(&self, row: usize, axis: usize) -> f64 {
        self.points.get(row, self.dims[axis])
    }

    fn build_rec(&mut self, order: &mut [usize], depth: usize) -> usize {
        if order.is_empty() {
            return NONE;
        }
        let axis = depth % self.dims.len();
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            self.coord(a, axis)
                .total_cmp(&self.coord(b, axis))
                .then(a.cmp(&b))
        });
        let index = order[mid];
        let (left_slice, rest) = order.split_at_mut(mid);
        let right_slice = &mut rest[1..];
        let left = self.build_rec(left_slice, depth + 1);
        let right = self.build_rec(right_slice, depth + 1);

        let mut lo: Vec<f64> = (0..self.dims.len()).map(|a| self.coord(index, a)).collect();
        let mut hi = lo.clone();
        for &child in [left, right].iter().filter(|&&c| c != NONE) {
            let node = &self.nodes[child];
            for a in 0..self.dims.len() {
                lo[a] = lo[a].min(node.lo[a]);
                hi[a] = hi[a].max(node.hi[a]);
            }
        }
        self.nodes.push(KdNode {
            index,
            axis,
            left,
            right,
            lo,
            hi,
        });
        self.nodes.len() - 1
    }

    /// Minimum possible Chebyshev distance from `query` to the node's box.
    fn box_distance(&self, node: &KdNode, query: &[f64]) -> f64 {
        let mut dist = 0.0f64;
        for a in 0..self.dims.len() {
            let q = query[self.dims[a]];
            let d = (node.lo[a] - q).max(q - node.hi[a]).max(0.0);
            dist = dist.max(d);
        }
        dist
    }

    fn point_distance(&self, row: usize, query: &[f64]) -> f64 {
        let mut dist = 0.0f64;
        for a in 0..self.dims.len() {
            dist = dist.max((self.coord(row, a) - query[self.dims[a]]).abs());
        }
        dist
    }

    /// Distance to the k-th nearest neighbor of `query`, excluding `skip`.
    fn kth_distance(&self, query: &[f64], k: usize, skip: usize) -> f64 {
        let mut heap: BinaryHeap<HeapItem> = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(self.root, query, k, skip, &mut heap);
        heap.peek().expect("k neighbors found").0
    }

    fn knn_rec(
        &self,
        node_id: usize,
        query: &[f64],
        k: usize,
        skip: usize,
        heap: &mut BinaryHeap<HeapItem>,
    ) {
        if node_id == NONE {
            return;
        }
        let node = &self.nodes[node_id];
        if heap.len() == k && self.box_distance(node, query) > heap.peek().unwrap().0 {
            return;
        }
        if node.index != skip {
            let d = self.point_distance(node.index, query);
            if heap.len() < k {
                heap.push(HeapItem(d));
            } else if d < heap.peek().unwrap().0 {
                heap.pop();
                heap.push(HeapItem(d));
            }
        }
        // Visit the near side first to tighten the bound early.
        let q = query[self.dims[node.axis]];
        let split = self.coord(node.index, node.axis);
        let (near, far) = if q <= split {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        self.knn_rec(near, query, k, skip, heap);
        self.knn_rec(far, query, k, skip, heap);
    }

    /// Number of points strictly within `radius` of `query` (self included
    /// when its distance qualifies).
    fn count_within(&self, query: &[f64], radius: f64) -> usize {
        self.count_rec(self.root, query, radius)
    }

    fn count_rec(&self, node_id: usize, query: &[f64], radius: f64) -> usize {
        if node_id == NONE {
            return 0;
        }
        let node = &self.nodes[node_id];
        if self.box_distance(node, query) >= radius {
            return 0;
        }
        let mut count = usize::from(self.point_distance(node.index, query) < radius);
        count += self.count_rec(node.left, query, radius);
        count += self.count_rec(node.right, query, radius);
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_points(p: usize, dims: usize, seed: u64) -> RowMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        RowMatrix::from_rows(&rows)
    }

    #[test]
    fn backends_agree_on_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for case in 0..100 {
            let p = rng.random_range(10..=200);
            let dx = rng.random_range(1..=5);
            let k = rng.random_range(1..=6.min(p - 1));
            let joint = random_points(p, dx + 1, case);
            let brute = neighbor_stats(&joint, dx, k, NeighborBackend::BruteForce);
            let tree = neighbor_stats(&joint, dx, k, NeighborBackend::KdTree);
            assert_eq!(brute, tree, "case {case}: p={p} dx={dx} k={k}");
        }
    }

    #[test]
    fn handles_exact_duplicates() {
        let rows = vec![
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![2.0, 0.5],
        ];
        let joint = RowMatrix::from_rows(&rows);
        let brute = neighbor_stats(&joint, 1, 2, NeighborBackend::BruteForce);
        let tree = neighbor_stats(&joint, 1, 2, NeighborBackend::KdTree);
        assert_eq!(brute, tree);
        // Point 0's 2nd neighbor is its second duplicate at distance 0.
        assert_eq!(brute[0].kth_distance, 0.0);
        assert_eq!(brute[0].n_x, 0);
    }

    #[test]
    fn count_within_matches_linear_scan() {
        let points = random_points(150, 3, 5);
        let tree = KdTree::build(&points, vec![0, 1, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let q = points.row(rng.random_range(0..150)).to_vec();
            let r = rng.random_range(0.0..1.5);
            let expected = (0..150)
                .filter(|&m| chebyshev(points.row(m), &q) < r)
                .count();
            assert_eq!(tree.count_within(&q, r), expected);
        }
    }
}
