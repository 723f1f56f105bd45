//! Nested square grids over the network, cell and region geometry, strips,
//! bisectors and border-node extraction.
//!
//! Grid `i` (for `i` in `[1, h]`) has `2^(h+2-i)` cells per side over a fixed
//! root square; grid `h` is the 4x4 root grid and grid 1 is fine enough that
//! every cell holds at most one node.

use std::collections::{BTreeSet, HashMap};

use crate::geom::{segment_intersects_rect_boundary, Coord, Rect};
use crate::road_graph::{GraphError, NodeId, RoadNetwork};

/// Address of one cell in a particular grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellCoord {
    pub level: u32,
    pub cx: u64,
    pub cy: u64,
}

/// A rectangular block of cells in one grid, anchored at its lower-left cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Region {
    pub level: u32,
    pub cx: u64,
    pub cy: u64,
    pub width: u64,
    pub height: u64,
}

impl Region {
    pub fn is_4x4(&self) -> bool {
        self.width == 4 && self.height == 4
    }

    pub fn contains_cell(&self, cx: u64, cy: u64) -> bool {
        cx >= self.cx && cx < self.cx + self.width && cy >= self.cy && cy < self.cy + self.height
    }
}

/// Strips, bisectors and the center 2x2 block of a 4x4 region.
#[derive(Debug, Clone, Copy)]
pub struct RegionAnatomy {
    pub west_strip: Rect,
    pub east_strip: Rect,
    pub south_strip: Rect,
    pub north_strip: Rect,
    pub vertical_bisector_x: f64,
    pub horizontal_bisector_y: f64,
    pub center_2x2: Rect,
    pub rect: Rect,
}

impl RegionAnatomy {
    pub fn strips(&self) -> [Rect; 4] {
        [self.west_strip, self.east_strip, self.south_strip, self.north_strip]
    }

    /// Segment of the vertical bisector clipped to the region.
    pub fn vertical_bisector(&self) -> (Coord, Coord) {
        (
            Coord::new(self.vertical_bisector_x, self.rect.y0),
            Coord::new(self.vertical_bisector_x, self.rect.y1),
        )
    }

    pub fn horizontal_bisector(&self) -> (Coord, Coord) {
        (
            Coord::new(self.rect.x0, self.horizontal_bisector_y),
            Coord::new(self.rect.x1, self.horizontal_bisector_y),
        )
    }
}

/// One uniform square grid: origin, cell side and cell count per side.
#[derive(Debug, Clone, Copy)]
pub struct UniformGrid {
    pub level: u32,
    pub origin: Coord,
    pub cell_side: f64,
    pub cells_per_side: u64,
}

impl UniformGrid {
    /// Cell containing `p`, half-open membership with the top/right boundary
    /// clamped into the last cell.
    pub fn cell_at(&self, p: Coord) -> (u64, u64) {
        let fx = ((p.x - self.origin.x) / self.cell_side).floor();
        let fy = ((p.y - self.origin.y) / self.cell_side).floor();
        let clamp = |f: f64| -> u64 {
            if f < 0.0 {
                0
            } else {
                (f as u64).min(self.cells_per_side - 1)
            }
        };
        (clamp(fx), clamp(fy))
    }

    pub fn rect_of(&self, region: &Region) -> Rect {
        let x0 = self.origin.x + region.cx as f64 * self.cell_side;
        let y0 = self.origin.y + region.cy as f64 * self.cell_side;
        Rect::new(
            x0,
            y0,
            x0 + region.width as f64 * self.cell_side,
            y0 + region.height as f64 * self.cell_side,
        )
    }

    /// Strips are the outermost single column/row of cells; bisectors evenly
    /// divide the region.
    pub fn anatomy(&self, region: &Region) -> RegionAnatomy {
        assert!(region.is_4x4(), "anatomy is defined for 4x4 regions");
        let s = self.cell_side;
        let rect = self.rect_of(region);
        RegionAnatomy {
            west_strip: Rect::new(rect.x0, rect.y0, rect.x0 + s, rect.y1),
            east_strip: Rect::new(rect.x1 - s, rect.y0, rect.x1, rect.y1),
            south_strip: Rect::new(rect.x0, rect.y0, rect.x1, rect.y0 + s),
            north_strip: Rect::new(rect.x0, rect.y1 - s, rect.x1, rect.y1),
            vertical_bisector_x: rect.x0 + 2.0 * s,
            horizontal_bisector_y: rect.y0 + 2.0 * s,
            center_2x2: Rect::new(rect.x0 + s, rect.y0 + s, rect.x1 - s, rect.y1 - s),
            rect,
        }
    }

    /// All in-bounds 4x4 anchors, lazily.
    pub fn regions_4x4(&self) -> impl Iterator<Item = Region> + '_ {
        let level = self.level;
        let max_anchor = self.cells_per_side.saturating_sub(3);
        (0..max_anchor).flat_map(move |cy| {
            (0..max_anchor).map(move |cx| Region { level, cx, cy, width: 4, height: 4 })
        })
    }

    /// In-bounds 4x4 regions containing at least one of the given occupied
    /// cells, in deterministic anchor order.
    pub fn non_empty_regions_4x4(&self, occupied: &BTreeSet<(u64, u64)>) -> Vec<Region> {
        let max_anchor = self.cells_per_side.saturating_sub(3);
        let mut anchors = BTreeSet::new();
        for &(cx, cy) in occupied {
            for ax in cx.saturating_sub(3)..=cx.min(max_anchor.saturating_sub(1)) {
                for ay in cy.saturating_sub(3)..=cy.min(max_anchor.saturating_sub(1)) {
                    anchors.insert((ax, ay));
                }
            }
        }
        anchors
            .into_iter()
            .map(|(cx, cy)| Region { level: self.level, cx, cy, width: 4, height: 4 })
            .collect()
    }

    /// True iff some in-bounds 3x3 block covers both cells; equivalent to
    /// both cell deltas being at most 2.
    pub fn same_3x3_cells(&self, a: (u64, u64), b: (u64, u64)) -> bool {
        a.0.abs_diff(b.0) <= 2 && a.1.abs_diff(b.1) <= 2
    }

    /// The 5x5 block centered at `cell`, clipped at the grid bounds.
    pub fn region_5x5_around_cell(&self, cell: (u64, u64)) -> Region {
        let lo_x = cell.0.saturating_sub(2);
        let lo_y = cell.1.saturating_sub(2);
        let hi_x = (cell.0 + 2).min(self.cells_per_side - 1);
        let hi_y = (cell.1 + 2).min(self.cells_per_side - 1);
        Region {
            level: self.level,
            cx: lo_x,
            cy: lo_y,
            width: hi_x - lo_x + 1,
            height: hi_y - lo_y + 1,
        }
    }

    /// Border nodes of a 4x4 region per the two-part rule: the node is not in
    /// the center 2x2 cells, and it is an endpoint of a supplied edge whose
    /// segment touches or crosses the boundary of one of the four strips.
    pub fn border_nodes(
        &self,
        region: &Region,
        edges: impl Iterator<Item = (NodeId, NodeId)>,
        coord_of: impl Fn(NodeId) -> Coord,
    ) -> BTreeSet<NodeId> {
        let anatomy = self.anatomy(region);
        let strips = anatomy.strips();
        let mut out = BTreeSet::new();
        for (a, b) in edges {
            let pa = coord_of(a);
            let pb = coord_of(b);
            if strips
                .iter()
                .any(|s| segment_intersects_rect_boundary(pa, pb, s))
            {
                for (v, p) in [(a, pa), (b, pb)] {
                    let cell = self.cell_at(p);
                    if !region_center_contains(region, cell) {
                        out.insert(v);
                    }
                }
            }
        }
        out
    }
}

fn region_center_contains(region: &Region, cell: (u64, u64)) -> bool {
    cell.0 >= region.cx + 1
        && cell.0 <= region.cx + 2
        && cell.1 >= region.cy + 1
        && cell.1 <= region.cy + 2
}

/// True iff `inner` (a region in a finer or equal grid) lies fully within
/// `outer`. Exact integer arithmetic on the shared cell lattice.
pub fn region_contains_region(outer: &Region, inner: &Region) -> bool {
    debug_assert!(outer.level >= inner.level);
    let shift = outer.level - inner.level;
    let scale = 1u64 << shift;
    inner.cx >= outer.cx * scale
        && inner.cx + inner.width <= (outer.cx + outer.width) * scale
        && inner.cy >= outer.cy * scale
        && inner.cy + inner.height <= (outer.cy + outer.height) * scale
}

/// The nested grid family over a network.
#[derive(Debug, Clone)]
pub struct GridHierarchy {
    h: u32,
    origin: Coord,
    root_side: f64,
    coords: Vec<Coord>,
    snapped_nodes: u32,
}

impl GridHierarchy {
    /// Builds the hierarchy: a 4x4 root grid padded to a power-of-two side,
    /// halved until every cell holds at most one node. Exactly coincident
    /// nodes are snapped apart by a tiny deterministic offset first.
    pub fn build(net: &RoadNetwork) -> Result<GridHierarchy, GraphError> {
        let (coords, snapped_nodes) = snap_coincident(net.coords().to_vec())?;
        let (origin, root_side) = root_square(&coords)?;
        let h = halving_levels(&coords, origin, root_side)?;
        Ok(GridHierarchy { h, origin, root_side, coords, snapped_nodes })
    }

    #[inline]
    pub fn h(&self) -> u32 {
        self.h
    }

    #[inline]
    pub fn origin(&self) -> Coord {
        self.origin
    }

    #[inline]
    pub fn root_side(&self) -> f64 {
        self.root_side
    }

    #[inline]
    pub fn snapped_nodes(&self) -> u32 {
        self.snapped_nodes
    }

    /// Node coordinate as used by the grids (after coincidence snapping).
    #[inline]
    pub fn node_coord(&self, v: NodeId) -> Coord {
        self.coords[v.index()]
    }

    pub fn cells_per_side(&self, level: u32) -> u64 {
        assert!((1..=self.h).contains(&level), "grid level {level} out of [1, {}]", self.h);
        1u64 << (self.h + 2 - level)
    }

    pub fn cell_side(&self, level: u32) -> f64 {
        self.root_side / self.cells_per_side(level) as f64
    }

    pub fn grid(&self, level: u32) -> UniformGrid {
        UniformGrid {
            level,
            origin: self.origin,
            cell_side: self.cell_side(level),
            cells_per_side: self.cells_per_side(level),
        }
    }

    pub fn cell_of(&self, v: NodeId, level: u32) -> CellCoord {
        let (cx, cy) = self.grid(level).cell_at(self.coords[v.index()]);
        CellCoord { level, cx, cy }
    }

    pub fn same_3x3_region(&self, a: NodeId, b: NodeId, level: u32) -> bool {
        let ca = self.cell_of(a, level);
        let cb = self.cell_of(b, level);
        self.grid(level).same_3x3_cells((ca.cx, ca.cy), (cb.cx, cb.cy))
    }

    pub fn region_5x5_around(&self, v: NodeId, level: u32) -> Region {
        let c = self.cell_of(v, level);
        self.grid(level).region_5x5_around_cell((c.cx, c.cy))
    }

    /// Occupied cells of one grid level.
    pub fn occupied_cells(&self, level: u32) -> BTreeSet<(u64, u64)> {
        let grid = self.grid(level);
        self.coords.iter().map(|&c| grid.cell_at(c)).collect()
    }

    /// Nodes grouped by cell at one level.
    pub fn nodes_by_cell(&self, level: u32) -> HashMap<(u64, u64), Vec<NodeId>> {
        let grid = self.grid(level);
        let mut map: HashMap<(u64, u64), Vec<NodeId>> = HashMap::new();
        for (i, &c) in self.coords.iter().enumerate() {
            map.entry(grid.cell_at(c)).or_default().push(NodeId(i as u32));
        }
        map
    }
}

/// Number of grids produced by the halving construction; also asserts the
/// bound `h <= ceil(log2(d_max / d_min))`.
pub fn compute_h(net: &RoadNetwork) -> Result<u32, GraphError> {
    let (coords, _) = snap_coincident(net.coords().to_vec())?;
    let (origin, root_side) = root_square(&coords)?;
    halving_levels(&coords, origin, root_side)
}

fn root_square(coords: &[Coord]) -> Result<(Coord, f64), GraphError> {
    if coords.len() < 2 {
        return Err(GraphError::Degenerate(
            "grid construction needs at least two nodes".into(),
        ));
    }
    let min_x = coords.iter().map(|c| c.x).fold(f64::INFINITY, f64::min);
    let min_y = coords.iter().map(|c| c.y).fold(f64::INFINITY, f64::min);
    let max_x = coords.iter().map(|c| c.x).fold(f64::NEG_INFINITY, f64::max);
    let max_y = coords.iter().map(|c| c.y).fold(f64::NEG_INFINITY, f64::max);
    let tight = (max_x - min_x).max(max_y - min_y);
    if tight <= 0.0 {
        return Err(GraphError::Degenerate("all nodes are coincident".into()));
    }
    // Smallest 4 * 2^j covering the tight extent, by exact halving/doubling.
    let mut side = 4.0f64;
    while side < tight {
        side *= 2.0;
    }
    while side * 0.5 >= tight {
        side *= 0.5;
    }
    Ok((Coord::new(min_x, min_y), side))
}

fn halving_levels(coords: &[Coord], origin: Coord, root_side: f64) -> Result<u32, GraphError> {
    let mut h = 0u32;
    let mut cell_side = root_side / 4.0;
    loop {
        h += 1;
        if h > 60 {
            return Err(GraphError::Degenerate(
                "grid halving did not separate all nodes; coincident coordinates remain".into(),
            ));
        }
        let mut seen = HashMap::with_capacity(coords.len());
        let cells = 4u64 << (h - 1);
        let mut multi = false;
        for c in coords {
            let fx = ((c.x - origin.x) / cell_side).floor();
            let fy = ((c.y - origin.y) / cell_side).floor();
            let cx = if fx < 0.0 { 0 } else { (fx as u64).min(cells - 1) };
            let cy = if fy < 0.0 { 0 } else { (fy as u64).min(cells - 1) };
            if seen.insert((cx, cy), ()).is_some() {
                multi = true;
                break;
            }
        }
        if !multi {
            break;
        }
        cell_side *= 0.5;
    }

    // Sanity bound relative to the point spread, with +1 slack for the
    // padded root alignment.
    if let Some(d_min) = crate::geom::closest_pair_linf(coords) {
        let d_max = {
            let min_x = coords.iter().map(|c| c.x).fold(f64::INFINITY, f64::min);
            let min_y = coords.iter().map(|c| c.y).fold(f64::INFINITY, f64::min);
            let max_x = coords.iter().map(|c| c.x).fold(f64::NEG_INFINITY, f64::max);
            let max_y = coords.iter().map(|c| c.y).fold(f64::NEG_INFINITY, f64::max);
            (max_x - min_x).max(max_y - min_y)
        };
        if d_min > 0.0 && d_min.is_finite() {
            let bound = (d_max / d_min).log2().ceil() as i64;
            debug_assert!(
                (h as i64) <= bound.max(1),
                "h = {h} exceeds ceil(log2(d_max/d_min)) = {bound}"
            );
        }
    }
    Ok(h)
}

/// Snaps exactly coincident coordinates apart by a deterministic epsilon of
/// `d_min * 1e-6`; returns the adjusted coordinates and the number of nodes
/// moved.
fn snap_coincident(mut coords: Vec<Coord>) -> Result<(Vec<Coord>, u32), GraphError> {
    let mut snapped = 0u32;
    for round in 0..8 {
        let mut groups: HashMap<(u64, u64), Vec<usize>> = HashMap::new();
        for (i, c) in coords.iter().enumerate() {
            groups.entry((c.x.to_bits(), c.y.to_bits())).or_default().push(i);
        }
        let mut dup_groups: Vec<Vec<usize>> =
            groups.into_values().filter(|g| g.len() > 1).collect();
        if dup_groups.is_empty() {
            return Ok((coords, snapped));
        }
        let d_min = crate::geom::closest_pair_linf(&coords).unwrap_or(0.0);
        if d_min <= 0.0 {
            // every pair coincides at the same point
            if coords.iter().all(|c| *c == coords[0]) {
                return Err(GraphError::Degenerate("all nodes are coincident".into()));
            }
        }
        let base = positive_min_gap(&coords).ok_or_else(|| {
            GraphError::Degenerate("all nodes are coincident".into())
        })?;
        let eps = base * 1e-6 * (round as f64 + 1.0);
        dup_groups.sort_by_key(|g| g[0]);
        for group in dup_groups {
            let mut members = group;
            members.sort_unstable();
            for (j, &idx) in members.iter().enumerate().skip(1) {
                coords[idx].x += eps * j as f64;
                snapped += 1;
            }
        }
    }
    Err(GraphError::Degenerate(
        "coincident coordinates could not be separated".into(),
    ))
}

/// Smallest positive pairwise L-infinity gap, ignoring exact coincidences.
fn positive_min_gap(coords: &[Coord]) -> Option<f64> {
    let mut distinct: Vec<Coord> = coords.to_vec();
    distinct.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    distinct.dedup_by(|a, b| a == b);
    if distinct.len() < 2 {
        return None;
    }
    crate::geom::closest_pair_linf(&distinct).filter(|d| *d > 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn two_node_net(a: Coord, b: Coord) -> RoadNetwork {
        RoadNetwork::from_parts(vec![a, b], vec![(0, 1, 1), (1, 0, 1)]).unwrap()
    }

    #[test]
    fn two_nodes_need_one_grid() {
        // spacing 16, padded root side 16, root cells of side 4 already
        // separate the two nodes
        let net = two_node_net(Coord::new(0.0, 0.0), Coord::new(16.0, 0.0));
        assert_eq!(compute_h(&net).unwrap(), 1);
        let g = GridHierarchy::build(&net).unwrap();
        assert_eq!(g.h(), 1);
        assert_eq!(g.cells_per_side(1), 4);
        assert_eq!(g.root_side(), 16.0);
    }

    #[test]
    fn cell_sides_double_per_level() {
        let net = synth::manhattan_grid(9, 9, 10, 3.0);
        let g = GridHierarchy::build(&net).unwrap();
        assert!(g.h() >= 2);
        for i in 2..=g.h() {
            assert_eq!(g.cell_side(i), 2.0 * g.cell_side(i - 1));
        }
        assert_eq!(g.cells_per_side(g.h()), 4);
        // level-1 cells hold at most one node
        let by_cell = g.nodes_by_cell(1);
        assert!(by_cell.values().all(|v| v.len() == 1));
    }

    #[test]
    fn equator_scale_instance_stays_under_26_levels() {
        let net = RoadNetwork::from_parts(
            vec![
                Coord::new(0.0, 0.0),
                Coord::new(1.0, 0.0),
                Coord::new(4.0e7, 0.0),
            ],
            vec![(0, 1, 1), (1, 0, 1), (1, 2, 1), (2, 1, 1)],
        )
        .unwrap();
        let h = compute_h(&net).unwrap();
        assert!(h <= 26, "h = {h}");
    }

    #[test]
    fn h_depends_only_on_geometry_ratio() {
        // many coincident-cluster nodes plus one distant pair: h tracks the
        // distance ratio, not the node count
        let mut coords = vec![Coord::new(0.0, 0.0), Coord::new(64.0, 0.0)];
        let mut arcs = vec![(0u32, 1u32, 1u64), (1, 0, 1)];
        for i in 0..6u32 {
            coords.push(Coord::new(i as f64, 32.0));
            arcs.push((2 + i, 0, 1));
            arcs.push((0, 2 + i, 1));
        }
        let small = two_node_net(Coord::new(0.0, 0.0), Coord::new(64.0, 0.0));
        let big = RoadNetwork::from_parts(coords, arcs).unwrap();
        // both have d_max 64, d_min 1 only in `big`; ratios differ so just
        // assert the bound holds for each
        for net in [&small, &big] {
            let h = compute_h(net).unwrap();
            let bound = (net.d_max() / net.d_min()).log2().ceil().max(1.0) as u32;
            assert!(h <= bound, "h = {h}, bound = {bound}");
        }
    }

    #[test]
    fn cell_membership_is_half_open_with_clamp() {
        let net = two_node_net(Coord::new(0.0, 0.0), Coord::new(16.0, 16.0));
        let g = GridHierarchy::build(&net).unwrap();
        let grid = g.grid(g.h());
        let s = grid.cell_side;
        // origin sits in cell (0, 0) at every level
        for lvl in 1..=g.h() {
            let c = g.cell_of(NodeId(0), lvl);
            assert_eq!((c.cx, c.cy), (0, 0));
        }
        // a point exactly on the first interior boundary belongs to cell 1
        assert_eq!(grid.cell_at(Coord::new(s, 0.0)), (1, 0));
        // the far corner of the root square clamps into the last cell
        assert_eq!(
            grid.cell_at(Coord::new(16.0, 16.0)),
            (grid.cells_per_side - 1, grid.cells_per_side - 1)
        );
    }

    #[test]
    fn region_counts_match_anchor_formula() {
        let grid = UniformGrid {
            level: 1,
            origin: Coord::new(0.0, 0.0),
            cell_side: 1.0,
            cells_per_side: 4,
        };
        assert_eq!(grid.regions_4x4().count(), 1);
        let grid8 = UniformGrid { cells_per_side: 8, ..grid };
        assert_eq!(grid8.regions_4x4().count(), 25);
    }

    #[test]
    fn non_empty_filter_keeps_only_covering_regions() {
        let grid = UniformGrid {
            level: 1,
            origin: Coord::new(0.0, 0.0),
            cell_side: 1.0,
            cells_per_side: 8,
        };
        let mut occupied = BTreeSet::new();
        occupied.insert((4u64, 4u64));
        let regions = grid.non_empty_regions_4x4(&occupied);
        assert_eq!(regions.len(), 16);
        assert!(regions.iter().all(|r| r.contains_cell(4, 4)));
    }

    #[test]
    fn anatomy_midline_and_strips() {
        let grid = UniformGrid {
            level: 2,
            origin: Coord::new(0.0, 0.0),
            cell_side: 3.0,
            cells_per_side: 8,
        };
        let region = Region { level: 2, cx: 0, cy: 0, width: 4, height: 4 };
        let a = grid.anatomy(&region);
        assert_eq!(a.vertical_bisector_x, 6.0);
        assert_eq!(a.horizontal_bisector_y, 6.0);
        assert_eq!(a.west_strip, Rect::new(0.0, 0.0, 3.0, 12.0));
        assert_eq!(a.center_2x2, Rect::new(3.0, 3.0, 9.0, 9.0));
        // north strip at the grid's top edge spans the full region width
        let top = Region { level: 2, cx: 2, cy: 4, width: 4, height: 4 };
        let at = grid.anatomy(&top);
        assert_eq!(at.north_strip, Rect::new(6.0, 21.0, 18.0, 24.0));
    }

    #[test]
    fn same_3x3_cell_arithmetic() {
        let grid = UniformGrid {
            level: 1,
            origin: Coord::new(0.0, 0.0),
            cell_side: 1.0,
            cells_per_side: 16,
        };
        assert!(grid.same_3x3_cells((5, 5), (5, 5)));
        assert!(!grid.same_3x3_cells((0, 0), (3, 0)));
        assert!(grid.same_3x3_cells((5, 5), (7, 3)));
    }

    #[test]
    fn five_by_five_centering_and_clipping() {
        let grid = UniformGrid {
            level: 1,
            origin: Coord::new(0.0, 0.0),
            cell_side: 1.0,
            cells_per_side: 32,
        };
        let r = grid.region_5x5_around_cell((10, 10));
        assert_eq!((r.cx, r.cy, r.width, r.height), (8, 8, 5, 5));
        let corner = grid.region_5x5_around_cell((0, 0));
        assert_eq!((corner.cx, corner.cy, corner.width, corner.height), (0, 0, 3, 3));
    }

    #[test]
    fn five_by_five_membership_equals_shared_3x3() {
        let grid = UniformGrid {
            level: 1,
            origin: Coord::new(0.0, 0.0),
            cell_side: 1.0,
            cells_per_side: 12,
        };
        for sx in 0..12u64 {
            for sy in 0..12u64 {
                let r = grid.region_5x5_around_cell((sx, sy));
                for vx in 0..12u64 {
                    for vy in 0..12u64 {
                        let in_region = r.contains_cell(vx, vy);
                        let shares = grid.same_3x3_cells((sx, sy), (vx, vy));
                        assert_eq!(in_region, shares, "s=({sx},{sy}) v=({vx},{vy})");
                    }
                }
            }
        }
    }

    #[test]
    fn cells_nest_under_their_parents() {
        let net = synth::manhattan_grid(13, 7, 10, 1.5);
        let g = GridHierarchy::build(&net).unwrap();
        for v in net.nodes() {
            for i in 1..g.h() {
                let child = g.cell_of(v, i);
                let parent = g.cell_of(v, i + 1);
                assert_eq!(child.cx / 2, parent.cx);
                assert_eq!(child.cy / 2, parent.cy);
            }
        }
    }

    #[test]
    fn region_containment_across_levels() {
        let outer = Region { level: 3, cx: 1, cy: 1, width: 4, height: 4 };
        let inner_ok = Region { level: 2, cx: 2, cy: 2, width: 4, height: 4 };
        let inner_bad = Region { level: 2, cx: 1, cy: 2, width: 4, height: 4 };
        assert!(region_contains_region(&outer, &inner_ok));
        assert!(!region_contains_region(&outer, &inner_bad));
        assert!(region_contains_region(&outer, &outer));
    }

    #[test]
    fn border_nodes_avoid_center_and_need_strip_crossings() {
        let grid = UniformGrid {
            level: 1,
            origin: Coord::new(0.0, 0.0),
            cell_side: 2.0,
            cells_per_side: 8,
        };
        let region = Region { level: 1, cx: 0, cy: 0, width: 4, height: 4 };
        let coords = vec![
            Coord::new(1.0, 5.0), // 0: west strip
            Coord::new(3.0, 5.0), // 1: center 2x2
            Coord::new(5.0, 5.0), // 2: center 2x2
            Coord::new(9.0, 9.0), // 3: isolated, no edges
        ];
        let coord_of = |v: NodeId| coords[v.index()];
        // edge 0 -> 1 crosses the west strip's inner boundary at x = 2
        let edges = vec![(NodeId(0), NodeId(1)), (NodeId(1), NodeId(2))];
        let border = grid.border_nodes(&region, edges.into_iter(), coord_of);
        assert!(border.contains(&NodeId(0)));
        // nodes 1 and 2 touch crossing edges but sit in the center cells
        assert!(!border.contains(&NodeId(1)));
        assert!(!border.contains(&NodeId(2)));
        // a node with no incident edges is never a border node
        assert!(!border.contains(&NodeId(3)));
    }

    #[test]
    fn coincident_nodes_are_snapped_apart() {
        let net = RoadNetwork::from_parts(
            vec![
                Coord::new(0.0, 0.0),
                Coord::new(0.0, 0.0),
                Coord::new(8.0, 0.0),
            ],
            vec![(0, 1, 1), (1, 2, 1), (2, 0, 1)],
        )
        .unwrap();
        let g = GridHierarchy::build(&net).unwrap();
        assert_eq!(g.snapped_nodes(), 1);
        assert_ne!(g.node_coord(NodeId(0)), g.node_coord(NodeId(1)));
        // snapping is tiny relative to the real geometry
        assert!(g.node_coord(NodeId(0)).linf(&g.node_coord(NodeId(1))) < 1e-3);
    }
}
