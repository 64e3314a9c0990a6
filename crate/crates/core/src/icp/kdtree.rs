//! Exact nearest-neighbor search over a static point set.

use crate::geometry::Vec3;

const LEAF_SIZE: usize = 8;

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Static kd-tree. Queries return the same index a linear scan would,
/// including the lowest-index rule on distance ties.
pub struct KdTree<'a> {
    points: &'a [Vec3],
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Vec3]) -> KdTree<'a> {
        let mut tree = KdTree {
            points,
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let slice = &mut self.order[start..end];
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &i in slice.iter() {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        let axis = (hi - lo).imax();
        let mid = slice.len() / 2;
        let pts = self.points;
        slice.select_nth_unstable_by(mid, |&a, &b| pts[a][axis].total_cmp(&pts[b][axis]));
        let value = pts[slice[mid]][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, start + mid);
        let right = self.build(start + mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// Index and squared distance of the nearest point, or `None` when empty.
    pub fn nearest(&self, q: &Vec3) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, q, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, q: &Vec3, best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2 = (self.points[i] - q).norm_squared();
                    if d2 < best.1 || (d2 == best.1 && i < best.0) {
                        *best = (i, d2);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // Equality still descends: an equidistant point there may have a lower index.
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

/// Linear-scan reference with the same tie rule.
pub fn nearest_linear(points: &[Vec3], q: &Vec3) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        let d2 = (p - q).norm_squared();
        if best.is_none_or(|(_, b)| d2 < b) {
            best = Some((i, d2));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_linear_scan_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.random_range(1..400);
            let pts: Vec<Vec3> = (0..n)
                .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
                .collect();
            let tree = KdTree::new(&pts);
            for _ in 0..100 {
                let q = Vec3::new(rng.random_range(-0.5..1.5), rng.random(), rng.random());
                assert_eq!(tree.nearest(&q), nearest_linear(&pts, &q));
            }
        }
    }

    #[test]
    fn grid_ties_resolve_to_lowest_index() {
        // Integer grid with duplicates; queries at cell centers are equidistant
        // to many points.
        let mut pts = Vec::new();
        for _ in 0..2 {
            for x in 0..6 {
                for y in 0..6 {
                    for z in 0..3 {
                        pts.push(Vec3::new(x as f64, y as f64, z as f64));
                    }
                }
            }
        }
        let tree = KdTree::new(&pts);
        for x in 0..11 {
            for y in 0..11 {
                for z in 0..5 {
                    let q = Vec3::new(x as f64 * 0.5, y as f64 * 0.5, z as f64 * 0.5);
                    assert_eq!(tree.nearest(&q), nearest_linear(&pts, &q), "query {q:?}");
                }
            }
        }
    }

    #[test]
    fn empty_tree() {
        assert!(KdTree::new(&[]).nearest(&Vec3::zeros()).is_none());
    }
}
