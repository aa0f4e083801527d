//! Static 3D kd-tree for exact k-nearest-neighbour queries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::cloud::{dist2, Point3};

const LEAF_SIZE: usize = 8;

#[derive(Clone, Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

/// Borrowing kd-tree over a point slice. Queries return indices into it.
#[derive(Clone, Debug)]
pub struct KdTree<'a> {
    points: &'a [Point3],
    order: Vec<usize>,
    root: Node,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Point3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = build(points, &mut order, 0);
        Self { points, order, root }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` nearest points to `q`, nearest first; equal distances are
    /// ordered by index. The query point itself is included if present.
    pub fn nearest(&self, q: &Point3, k: usize) -> Vec<(usize, f64)> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 {
            self.search(&self.root, q, k, &mut heap);
        }
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| (c.index, c.d2.sqrt())).collect()
    }

    fn search(&self, node: &Node, q: &Point3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    let c = Candidate {
                        d2: dist2(q, &self.points[i]),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, heap);
                if heap.len() < k || diff * diff <= heap.peek().expect("heap is nonempty").d2 {
                    self.search(far, q, k, heap);
                }
            }
        }
    }
}

fn build(points: &[Point3], order: &mut [usize], offset: usize) -> Node {
    if order.len() <= LEAF_SIZE {
        return Node::Leaf {
            start: offset,
            end: offset + order.len(),
        };
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(points[i][a]);
            hi[a] = hi[a].max(points[i][a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .expect("three axes");
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b)));
    let value = points[order[mid]][axis];
    let (l, r) = order.split_at_mut(mid);
    Node::Split {
        axis,
        value,
        left: Box::new(build(points, l, offset)),
        right: Box::new(build(points, r, offset + mid)),
    }
}
