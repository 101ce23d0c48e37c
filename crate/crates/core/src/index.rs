//! Exact nearest-neighbour search over normalized outcome points.
//!
//! Every query orders candidates by `(key, id)`, where the key is either the
//! plain distance or the complexity-penalized performance and `id` is the
//! insertion order. Small sets are scanned linearly; larger ones use an
//! incremental k-d tree, and both paths return identical results.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::outcome::{normalized_distance, Normalized};

/// Above this many points a group is searched through its k-d tree.
pub const LINEAR_SCAN_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbour {
    pub id: usize,
    pub distance: f64,
    /// Ranking key: the distance, or the distance scaled by a length penalty.
    pub key: f64,
}

impl Neighbour {
    fn order(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key).then(self.id.cmp(&other.id))
    }
}

struct ByKey(Neighbour);

impl PartialEq for ByKey {
    fn eq(&self, other: &Self) -> bool {
        self.0.order(&other.0) == Ordering::Equal
    }
}
impl Eq for ByKey {}
impl PartialOrd for ByKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for ByKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.order(&other.0)
    }
}

#[derive(Debug, Clone)]
struct Node {
    point: Normalized,
    id: usize,
    left: Option<usize>,
    right: Option<usize>,
}

/// Points of one dimensionality, searchable by exact k-nearest queries.
#[derive(Debug, Clone)]
pub struct PointSet {
    dim: usize,
    nodes: Vec<Node>,
    linear_limit: usize,
}

impl PointSet {
    pub fn new(dim: usize) -> PointSet {
        PointSet::with_linear_limit(dim, LINEAR_SCAN_LIMIT)
    }

    pub fn with_linear_limit(dim: usize, linear_limit: usize) -> PointSet {
        assert!(dim >= 1, "point dimension must be positive");
        PointSet {
            dim,
            nodes: Vec::new(),
            linear_limit,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds a point; `id` must exceed every id inserted before.
    pub fn insert(&mut self, point: Normalized, id: usize) {
        let idx = self.nodes.len();
        self.nodes.push(Node {
            point,
            id,
            left: None,
            right: None,
        });
        if idx == 0 {
            return;
        }
        let mut cur = 0;
        let mut depth = 0;
        loop {
            let axis = depth % self.dim;
            let go_left = point[axis] < self.nodes[cur].point[axis];
            let child = if go_left {
                &mut self.nodes[cur].left
            } else {
                &mut self.nodes[cur].right
            };
            match *child {
                Some(next) => {
                    cur = next;
                    depth += 1;
                }
                None => {
                    *child = Some(idx);
                    return;
                }
            }
        }
    }

    /// The `k` points closest to `query`, ordered by `(distance * scale, id)`.
    pub fn nearest(&self, query: &Normalized, k: usize, scale: f64) -> Vec<Neighbour> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        if self.nodes.len() <= self.linear_limit {
            self.nearest_linear(query, k, scale)
        } else {
            self.nearest_tree(query, k, scale)
        }
    }

    /// Brute-force reference for [`PointSet::nearest`].
    pub fn nearest_linear(&self, query: &Normalized, k: usize, scale: f64) -> Vec<Neighbour> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        for n in &self.nodes {
            let distance = normalized_distance(&n.point, query, self.dim);
            push_bounded(&mut heap, k, Neighbour {
                id: n.id,
                distance,
                key: distance * scale,
            });
        }
        into_sorted(heap)
    }

    fn nearest_tree(&self, query: &Normalized, k: usize, scale: f64) -> Vec<Neighbour> {
        debug_assert!(scale > 0.0, "distance pruning needs a positive scale");
        let mut heap = BinaryHeap::with_capacity(k + 1);
        let mut stack = vec![(0usize, 0usize)];
        while let Some((idx, depth)) = stack.pop() {
            let node = &self.nodes[idx];
            let distance = normalized_distance(&node.point, query, self.dim);
            push_bounded(&mut heap, k, Neighbour {
                id: node.id,
                distance,
                key: distance * scale,
            });
            let axis = depth % self.dim;
            let diff = query[axis] - node.point[axis];
            let (near, far) = if diff < 0.0 {
                (node.left, node.right)
            } else {
                (node.right, node.left)
            };
            if let Some(f) = far {
                // Points on the far side are at least |diff| away; equal keys
                // must still be visited so that id tie-breaking stays exact.
                let full = heap.len() == k;
                let worst = heap.peek().map(|w: &ByKey| w.0.distance).unwrap_or(f64::INFINITY);
                if !full || diff.abs() <= worst {
                    stack.push((f, depth + 1));
                }
            }
            if let Some(n) = near {
                stack.push((n, depth + 1));
            }
        }
        into_sorted(heap)
    }
}

fn push_bounded(heap: &mut BinaryHeap<ByKey>, k: usize, n: Neighbour) {
    if heap.len() < k {
        heap.push(ByKey(n));
    } else if let Some(worst) = heap.peek() {
        if n.order(&worst.0) == Ordering::Less {
            heap.pop();
            heap.push(ByKey(n));
        }
    }
}

fn into_sorted(heap: BinaryHeap<ByKey>) -> Vec<Neighbour> {
    heap.into_sorted_vec().into_iter().map(|b| b.0).collect()
}

/// Merges per-group results into the global top `k` by `(key, id)`.
pub fn merge_top(mut all: Vec<Neighbour>, k: usize) -> Vec<Neighbour> {
    all.sort_by(|a, b| a.order(b));
    all.truncate(k);
    all
}
