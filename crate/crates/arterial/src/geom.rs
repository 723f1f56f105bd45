//! Planar geometry primitives: coordinates, axis-aligned rectangles and
//! segment intersection tests used by the grid machinery.

/// A node position in projected planar units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coord {
    pub x: f64,
    pub y: f64,
}

impl Coord {
    pub fn new(x: f64, y: f64) -> Self {
        Coord { x, y }
    }

    /// L-infinity distance between two coordinates.
    pub fn linf(&self, other: &Coord) -> f64 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Closed axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        debug_assert!(x0 <= x1 && y0 <= y1);
        Rect { x0, y0, x1, y1 }
    }

    pub fn contains(&self, p: Coord) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    /// True if `other` lies fully inside `self` (closed containment).
    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }

    pub fn corners(&self) -> [Coord; 4] {
        [
            Coord::new(self.x0, self.y0),
            Coord::new(self.x1, self.y0),
            Coord::new(self.x1, self.y1),
            Coord::new(self.x0, self.y1),
        ]
    }

    /// The four boundary segments in counter-clockwise order.
    pub fn boundary_segments(&self) -> [(Coord, Coord); 4] {
        let [a, b, c, d] = self.corners();
        [(a, b), (b, c), (c, d), (d, a)]
    }
}

fn orient(a: Coord, b: Coord, c: Coord) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: Coord, b: Coord, p: Coord) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Segment intersection test; touching endpoints count as intersecting.
pub fn segments_intersect(p1: Coord, p2: Coord, q1: Coord, q2: Coord) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);

    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// True if the segment `a..b` touches or crosses the boundary outline of `rect`.
pub fn segment_intersects_rect_boundary(a: Coord, b: Coord, rect: &Rect) -> bool {
    rect.boundary_segments()
        .iter()
        .any(|&(q1, q2)| segments_intersect(a, b, q1, q2))
}

/// True if the segment `a..b` has any point in common with the closed `rect`.
pub fn segment_overlaps_rect(a: Coord, b: Coord, rect: &Rect) -> bool {
    rect.contains(a) || rect.contains(b) || segment_intersects_rect_boundary(a, b, rect)
}

/// Smallest pairwise L-infinity distance over a point set, `None` for fewer
/// than two points. Plane sweep over x with a y-ordered window.
pub fn closest_pair_linf(points: &[Coord]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .x
            .partial_cmp(&points[b].x)
            .unwrap()
            .then(points[a].y.partial_cmp(&points[b].y).unwrap())
    });

    use std::collections::BTreeMap;
    // Active window keyed by (y, index) so duplicate y values coexist.
    let mut active: BTreeMap<(u64, usize), usize> = BTreeMap::new();
    let key_of = |y: f64, idx: usize| (y_key(y), idx);

    let mut best = f64::INFINITY;
    let mut left = 0usize;
    for (pos, &i) in order.iter().enumerate() {
        let p = points[i];
        while left < pos && p.x - points[order[left]].x >= best {
            let q = points[order[left]];
            active.remove(&key_of(q.y, order[left]));
            left += 1;
        }
        let lo = key_of(p.y - best, usize::MIN);
        let hi = key_of(p.y + best, usize::MAX);
        for (_, &j) in active.range(lo..=hi) {
            let d = p.linf(&points[j]);
            if d < best {
                best = d;
            }
        }
        active.insert(key_of(p.y, i), i);
    }
    Some(best)
}

/// Order-preserving mapping from finite f64 to u64 for BTreeMap keys.
fn y_key(y: f64) -> u64 {
    let bits = y.to_bits() as i64;
    let flipped = if bits < 0 { !(bits as u64) } else { bits as u64 | (1 << 63) };
    flipped
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_crossing_detected() {
        let a = Coord::new(0.0, 0.0);
        let b = Coord::new(2.0, 2.0);
        let c = Coord::new(0.0, 2.0);
        let d = Coord::new(2.0, 0.0);
        assert!(segments_intersect(a, b, c, d));
        assert!(!segments_intersect(a, Coord::new(0.5, 0.5), c, d));
    }

    #[test]
    fn touching_counts_as_intersection() {
        let a = Coord::new(0.0, 0.0);
        let b = Coord::new(1.0, 0.0);
        let c = Coord::new(1.0, 0.0);
        let d = Coord::new(2.0, 5.0);
        assert!(segments_intersect(a, b, c, d));
    }

    #[test]
    fn rect_boundary_vs_overlap() {
        let r = Rect::new(0.0, 0.0, 4.0, 4.0);
        // fully inside: overlaps but does not touch the boundary
        let a = Coord::new(1.0, 1.0);
        let b = Coord::new(2.0, 2.0);
        assert!(!segment_intersects_rect_boundary(a, b, &r));
        assert!(segment_overlaps_rect(a, b, &r));
        // crossing out through the east edge
        let c = Coord::new(3.0, 1.0);
        let d = Coord::new(5.0, 1.0);
        assert!(segment_intersects_rect_boundary(c, d, &r));
        // fully outside
        let e = Coord::new(5.0, 5.0);
        let f = Coord::new(6.0, 6.0);
        assert!(!segment_overlaps_rect(e, f, &r));
    }

    #[test]
    fn closest_pair_small() {
        let pts = vec![
            Coord::new(0.0, 0.0),
            Coord::new(10.0, 0.0),
            Coord::new(10.0, 3.0),
            Coord::new(-4.0, 7.0),
        ];
        assert_eq!(closest_pair_linf(&pts), Some(3.0));
        assert_eq!(closest_pair_linf(&pts[..1]), None);
    }

    #[test]
    fn closest_pair_matches_quadratic_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let pts: Vec<Coord> = (0..40)
                .map(|_| Coord::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)))
                .collect();
            let mut brute = f64::INFINITY;
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    brute = brute.min(pts[i].linf(&pts[j]));
                }
            }
            assert_eq!(closest_pair_linf(&pts), Some(brute));
        }
    }
}
