//! Local shortest paths, spanning paths, arterial edges, the
//! arterial-dimension profiler and the sliding-window algorithm.
//!
//! A path is *local* in a region when at most one of its edges touches the
//! region boundary; searches enforce that by doubling the Dijkstra state
//! with a crossed-boundary bit. A local shortest path whose endpoints lie on
//! opposite sides of a region bisector, neither endpoint in a cell adjacent
//! to that bisector, is a *spanning path*; its edges that intersect the
//! bisector are *arterial edges* of the region.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use rayon::prelude::*;

use crate::geom::{segment_overlaps_rect, segments_intersect, Coord, Rect};
use crate::grid::{Region, UniformGrid};
use crate::road_graph::{NodeId, RoadNetwork};
use crate::search::MinQueue;
use crate::weight::PathWeight;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchDir {
    Forward,
    Backward,
}

/// The bisector a spanning path crosses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Axis {
    WestEast,
    NorthSouth,
}

/// One edge of a region-restricted graph view. `id` is caller-defined and is
/// carried through search results.
#[derive(Debug, Clone, Copy)]
pub struct ViewEdge {
    pub tail: NodeId,
    pub head: NodeId,
    pub weight: PathWeight,
    pub id: u32,
}

/// Edge set restricted to one region: all supplied edges whose segments have
/// a point in common with the region rectangle.
pub struct RegionView {
    pub rect: Rect,
    pub edges: Vec<ViewEdge>,
    /// Whether each edge touches the region boundary.
    pub crosses: Vec<bool>,
    out: HashMap<u32, Vec<u32>>,
    inn: HashMap<u32, Vec<u32>>,
    pub nodes: BTreeSet<NodeId>,
}

impl RegionView {
    pub fn from_edges(
        rect: Rect,
        candidates: impl Iterator<Item = ViewEdge>,
        coord_of: &impl Fn(NodeId) -> Coord,
    ) -> RegionView {
        let mut edges = Vec::new();
        let mut crosses = Vec::new();
        let mut out: HashMap<u32, Vec<u32>> = HashMap::new();
        let mut inn: HashMap<u32, Vec<u32>> = HashMap::new();
        let mut nodes = BTreeSet::new();
        for e in candidates {
            let a = coord_of(e.tail);
            let b = coord_of(e.head);
            if !segment_overlaps_rect(a, b, &rect) {
                continue;
            }
            let idx = edges.len() as u32;
            // an edge leaves the region iff it is not fully inside the closed
            // rectangle; touching the boundary from inside is not a crossing
            crosses.push(!(rect.contains(a) && rect.contains(b)));
            out.entry(e.tail.0).or_default().push(idx);
            inn.entry(e.head.0).or_default().push(idx);
            nodes.insert(e.tail);
            nodes.insert(e.head);
            edges.push(e);
        }
        RegionView { rect, edges, crosses, out, inn, nodes }
    }

    pub fn out_edges(&self, v: NodeId) -> &[u32] {
        self.out.get(&v.0).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn in_edges(&self, v: NodeId) -> &[u32] {
        self.inn.get(&v.0).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Cell-bucketed edge index for one grid, used to gather region candidates.
pub struct EdgeIndex {
    buckets: HashMap<(u64, u64), Vec<u32>>,
}

impl EdgeIndex {
    pub fn build(
        grid: &UniformGrid,
        edges: impl Iterator<Item = (u32, Coord, Coord)>,
    ) -> EdgeIndex {
        let mut buckets: HashMap<(u64, u64), Vec<u32>> = HashMap::new();
        for (id, a, b) in edges {
            let (ax, ay) = grid.cell_at(a);
            let (bx, by) = grid.cell_at(b);
            for cx in ax.min(bx)..=ax.max(bx) {
                for cy in ay.min(by)..=ay.max(by) {
                    buckets.entry((cx, cy)).or_default().push(id);
                }
            }
        }
        EdgeIndex { buckets }
    }

    /// Candidate edge ids for a region (superset; exact overlap is re-tested
    /// by the view constructor).
    pub fn candidates(&self, region: &Region) -> Vec<u32> {
        let mut ids = Vec::new();
        for cx in region.cx..region.cx + region.width {
            for cy in region.cy..region.cy + region.height {
                if let Some(v) = self.buckets.get(&(cx, cy)) {
                    ids.extend_from_slice(v);
                }
            }
        }
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Builds the view of original network edges overlapping `region`.
pub fn network_region_view(
    net: &RoadNetwork,
    grid: &UniformGrid,
    index: &EdgeIndex,
    region: &Region,
    coord_of: &impl Fn(NodeId) -> Coord,
) -> RegionView {
    let rect = grid.rect_of(region);
    let candidates = index.candidates(region);
    RegionView::from_edges(
        rect,
        candidates.into_iter().map(|id| {
            let e = net.edge(id);
            ViewEdge {
                tail: e.tail,
                head: e.head,
                weight: PathWeight::from_edge(e.length, &e.nuance, net.nuance_k()),
                id,
            }
        }),
        coord_of,
    )
}

// ---------------------------------------------------------------------------
// Local shortest paths
// ---------------------------------------------------------------------------

/// Shortest-path tree of local paths from one source: Dijkstra over states
/// `(node, crossed)` where `crossed` records whether the one permitted
/// boundary-touching edge has been used.
pub struct LocalSpt {
    pub source: NodeId,
    pub dir: SearchDir,
    dist: HashMap<u64, PathWeight>,
    parent: HashMap<u64, (u64, u32)>,
}

#[inline]
fn state(node: NodeId, crossed: bool) -> u64 {
    ((node.0 as u64) << 1) | crossed as u64
}

#[inline]
fn state_node(s: u64) -> NodeId {
    NodeId((s >> 1) as u32)
}

impl LocalSpt {
    /// Best local-path weight to `v` (min over both crossed states).
    pub fn best(&self, v: NodeId) -> Option<(u64, PathWeight)> {
        let s0 = state(v, false);
        let s1 = state(v, true);
        match (self.dist.get(&s0), self.dist.get(&s1)) {
            (Some(&a), Some(&b)) => Some(if a <= b { (s0, a) } else { (s1, b) }),
            (Some(&a), None) => Some((s0, a)),
            (None, Some(&b)) => Some((s1, b)),
            (None, None) => None,
        }
    }

    pub fn weight_of_state(&self, s: u64) -> Option<PathWeight> {
        self.dist.get(&s).copied()
    }

    /// Settled states, for callers that post-process whole trees.
    pub fn states(&self) -> impl Iterator<Item = (u64, PathWeight)> + '_ {
        self.dist.iter().map(|(&s, &w)| (s, w))
    }

    /// Edge ids along the tree path to `state`, in travel direction
    /// (source-to-node for forward trees, node-to-source for backward ones).
    pub fn path_edges(&self, mut s: u64) -> Vec<u32> {
        let mut ids = Vec::new();
        while let Some(&(p, e)) = self.parent.get(&s) {
            ids.push(e);
            s = p;
        }
        if self.dir == SearchDir::Forward {
            ids.reverse();
        }
        ids
    }

    /// Node sequence in travel direction for the tree path to `state`.
    pub fn path_nodes(&self, s: u64, view: &RegionView) -> Vec<NodeId> {
        let edges = self.path_edges(s);
        let mut nodes = Vec::with_capacity(edges.len() + 1);
        match self.dir {
            SearchDir::Forward => {
                nodes.push(self.source);
                for id in edges {
                    nodes.push(view.edges[id as usize].head);
                }
            }
            SearchDir::Backward => {
                nodes.push(state_node(s));
                for id in edges {
                    nodes.push(view.edges[id as usize].head);
                }
            }
        }
        nodes
    }
}

/// Runs the local-path Dijkstra from `source` over `view`. `edge_ok` filters
/// relaxations (always given the candidate edge); constraints beyond the
/// crossed-boundary rule belong there. `expand_ok` controls whether a
/// settled node's edges are followed at all (the source always expands),
/// letting callers treat certain nodes as search terminals.
pub fn local_spt(
    view: &RegionView,
    k: u8,
    source: NodeId,
    dir: SearchDir,
    mut edge_ok: impl FnMut(&ViewEdge) -> bool,
    mut expand_ok: impl FnMut(NodeId) -> bool,
) -> LocalSpt {
    let mut dist: HashMap<u64, PathWeight> = HashMap::new();
    let mut parent: HashMap<u64, (u64, u32)> = HashMap::new();
    let mut done: BTreeSet<u64> = BTreeSet::new();
    let mut queue = MinQueue::new();
    let s0 = state(source, false);
    dist.insert(s0, PathWeight::zero(k));
    queue.push(PathWeight::zero(k), s0);

    while let Some((w, st)) = queue.pop() {
        if done.contains(&st) || dist.get(&st).map(|d| *d < w).unwrap_or(true) {
            continue;
        }
        done.insert(st);
        let u = state_node(st);
        if u != source && !expand_ok(u) {
            continue;
        }
        let crossed = st & 1 == 1;
        let edge_ids = match dir {
            SearchDir::Forward => view.out_edges(u),
            SearchDir::Backward => view.in_edges(u),
        };
        for &eid in edge_ids {
            let e = &view.edges[eid as usize];
            let cross = view.crosses[eid as usize];
            if cross && crossed {
                continue;
            }
            if !edge_ok(e) {
                continue;
            }
            let v = match dir {
                SearchDir::Forward => e.head,
                SearchDir::Backward => e.tail,
            };
            let ns = state(v, crossed || cross);
            if done.contains(&ns) {
                continue;
            }
            let nw = w.plus(&e.weight);
            if dist.get(&ns).map(|d| nw < *d).unwrap_or(true) {
                dist.insert(ns, nw);
                parent.insert(ns, (st, eid));
                queue.push(nw, ns);
            }
        }
    }
    LocalSpt { source, dir, dist, parent }
}

// ---------------------------------------------------------------------------
// Spanning paths and arterial edges
// ---------------------------------------------------------------------------

/// A local path with its weight and home region.
#[derive(Debug, Clone)]
pub struct LocalPath {
    pub nodes: Vec<NodeId>,
    pub weight: PathWeight,
    pub region: Region,
}

/// A spanning path with its designated arterial edge.
#[derive(Debug, Clone)]
pub struct SpanningPathRecord {
    pub path: LocalPath,
    pub axis: Axis,
    /// Deterministically designated bisector-crossing edge (smallest
    /// `(tail, head)` pair among the crossing edges).
    pub arterial_edge: (NodeId, NodeId),
}

/// Which side of a bisector value a coordinate falls on.
fn side_of(value: f64, coord: f64) -> Option<bool> {
    if coord < value {
        Some(false) // west / south
    } else if coord > value {
        Some(true) // east / north
    } else {
        None
    }
}

/// Spanning-path endpoint eligibility for one axis: strictly on one side of
/// the bisector and not in a cell line adjacent to it.
pub(crate) fn endpoint_eligible(grid: &UniformGrid, region: &Region, axis: Axis, p: Coord) -> Option<bool> {
    let anatomy = grid.anatomy(region);
    let (cx, cy) = grid.cell_at(p);
    match axis {
        Axis::WestEast => {
            let side = side_of(anatomy.vertical_bisector_x, p.x)?;
            if cx == region.cx + 1 || cx == region.cx + 2 {
                None
            } else {
                Some(side)
            }
        }
        Axis::NorthSouth => {
            let side = side_of(anatomy.horizontal_bisector_y, p.y)?;
            if cy == region.cy + 1 || cy == region.cy + 2 {
                None
            } else {
                Some(side)
            }
        }
    }
}

/// Edges of a path (as view edge ids) that intersect the given bisector
/// segment.
fn bisector_crossing_edges(
    view: &RegionView,
    coord_of: &impl Fn(NodeId) -> Coord,
    path_edges: &[u32],
    bisector: (Coord, Coord),
) -> Vec<u32> {
    path_edges
        .iter()
        .copied()
        .filter(|&eid| {
            let e = &view.edges[eid as usize];
            segments_intersect(coord_of(e.tail), coord_of(e.head), bisector.0, bisector.1)
        })
        .collect()
}

/// All spanning paths of a 4x4 region over the given view, each annotated
/// with its designated arterial edge.
pub fn spanning_paths(
    grid: &UniformGrid,
    region: &Region,
    view: &RegionView,
    k: u8,
    coord_of: &impl Fn(NodeId) -> Coord,
) -> Vec<SpanningPathRecord> {
    assert!(region.is_4x4());
    let anatomy = grid.anatomy(region);
    let mut eligibility: HashMap<u32, [Option<bool>; 2]> = HashMap::new();
    for &v in &view.nodes {
        let p = coord_of(v);
        let we = endpoint_eligible(grid, region, Axis::WestEast, p);
        let ns = endpoint_eligible(grid, region, Axis::NorthSouth, p);
        if we.is_some() || ns.is_some() {
            eligibility.insert(v.0, [we, ns]);
        }
    }

    // an axis is live only when both of its sides have eligible endpoints
    let mut live_axis = [false; 2];
    for i in 0..2 {
        let mut seen = [false; 2];
        for e in eligibility.values() {
            if let Some(side) = e[i] {
                seen[side as usize] = true;
            }
        }
        live_axis[i] = seen[0] && seen[1];
    }
    if !live_axis[0] && !live_axis[1] {
        return Vec::new();
    }

    let mut records = Vec::new();
    let mut sources: Vec<NodeId> = eligibility
        .iter()
        .filter(|(_, e)| (live_axis[0] && e[0].is_some()) || (live_axis[1] && e[1].is_some()))
        .map(|(&v, _)| NodeId(v))
        .collect();
    sources.sort_unstable();
    for s in sources {
        let spt = local_spt(view, k, s, SearchDir::Forward, |_| true, |_| true);
        let s_elig = eligibility[&s.0];
        let mut targets: Vec<NodeId> = eligibility.keys().map(|&v| NodeId(v)).collect();
        targets.sort_unstable();
        for t in targets {
            if t == s {
                continue;
            }
            let t_elig = eligibility[&t.0];
            let axes: Vec<Axis> = [Axis::WestEast, Axis::NorthSouth]
                .into_iter()
                .enumerate()
                .filter(|(i, _)| {
                    live_axis[*i]
                        && matches!((s_elig[*i], t_elig[*i]), (Some(a), Some(b)) if a != b)
                })
                .map(|(_, a)| a)
                .collect();
            if axes.is_empty() {
                continue;
            }
            let Some((state, weight)) = spt.best(t) else { continue };
            let path_edges = spt.path_edges(state);
            for axis in axes {
                let bisector = match axis {
                    Axis::WestEast => anatomy.vertical_bisector(),
                    Axis::NorthSouth => anatomy.horizontal_bisector(),
                };
                let crossing = bisector_crossing_edges(view, coord_of, &path_edges, bisector);
                let Some(designated) = crossing
                    .iter()
                    .map(|&eid| {
                        let e = &view.edges[eid as usize];
                        (e.tail, e.head)
                    })
                    .min()
                else {
                    continue;
                };
                records.push(SpanningPathRecord {
                    path: LocalPath {
                        nodes: spt.path_nodes(state, view),
                        weight,
                        region: *region,
                    },
                    axis,
                    arterial_edge: designated,
                });
            }
        }
    }
    records
}

/// The arterial edges of a region: every bisector-crossing edge of every
/// spanning path, deduplicated.
pub fn arterial_edges(
    grid: &UniformGrid,
    region: &Region,
    view: &RegionView,
    k: u8,
    coord_of: &impl Fn(NodeId) -> Coord,
) -> BTreeSet<(NodeId, NodeId)> {
    arterial_edges_filtered(grid, region, view, k, coord_of, None)
}

/// Arterial edges restricted to spanning paths of one bisector axis.
pub fn arterial_edges_on_axis(
    grid: &UniformGrid,
    region: &Region,
    view: &RegionView,
    k: u8,
    coord_of: &impl Fn(NodeId) -> Coord,
    axis: Axis,
) -> BTreeSet<(NodeId, NodeId)> {
    arterial_edges_filtered(grid, region, view, k, coord_of, Some(axis))
}

fn arterial_edges_filtered(
    grid: &UniformGrid,
    region: &Region,
    view: &RegionView,
    k: u8,
    coord_of: &impl Fn(NodeId) -> Coord,
    axis: Option<Axis>,
) -> BTreeSet<(NodeId, NodeId)> {
    let anatomy = grid.anatomy(region);
    let mut out = BTreeSet::new();
    for rec in spanning_paths(grid, region, view, k, coord_of) {
        if axis.map(|a| a != rec.axis).unwrap_or(false) {
            continue;
        }
        let bisector = match rec.axis {
            Axis::WestEast => anatomy.vertical_bisector(),
            Axis::NorthSouth => anatomy.horizontal_bisector(),
        };
        for pair in rec.path.nodes.windows(2) {
            let (a, b) = (coord_of(pair[0]), coord_of(pair[1]));
            if segments_intersect(a, b, bisector.0, bisector.1) {
                out.insert((pair[0], pair[1]));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Arterial-dimension profiler
// ---------------------------------------------------------------------------

/// Per-resolution arterial-edge statistics over non-empty 4x4 regions.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub r: u32,
    pub regions: u64,
    pub max: u64,
    pub mean: f64,
    pub q90: u64,
    pub q99: u64,
}

#[derive(Debug, Clone, Default)]
pub struct ArterialProfile {
    pub rows: Vec<ProfileRow>,
    pub skipped_resolutions: Vec<u32>,
}

impl ArterialProfile {
    /// CSV with columns `r,regions,max,mean,q90,q99`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "r,regions,max,mean,q90,q99")?;
        for row in &self.rows {
            writeln!(
                w,
                "{},{},{},{:.4},{},{}",
                row.r, row.regions, row.max, row.mean, row.q90, row.q99
            )?;
        }
        Ok(())
    }
}

fn nearest_rank(sorted: &[u64], q: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Imposes a `2^r x 2^r` grid per requested resolution and reports the
/// max / mean / 90%- and 99%-quantile arterial-edge counts over all
/// non-empty 4x4 regions. Resolutions below 2 (fewer than 4 cells per side)
/// are skipped.
pub fn arterial_profile(net: &RoadNetwork, resolutions: &[u32]) -> ArterialProfile {
    let coords = net.coords();
    let min_x = coords.iter().map(|c| c.x).fold(f64::INFINITY, f64::min);
    let min_y = coords.iter().map(|c| c.y).fold(f64::INFINITY, f64::min);
    let side = net.d_max();
    let coord_of = |v: NodeId| net.coord(v);

    let mut profile = ArterialProfile::default();
    for &r in resolutions {
        if r < 2 || side <= 0.0 {
            profile.skipped_resolutions.push(r);
            continue;
        }
        let cells = 1u64 << r;
        let grid = UniformGrid {
            level: r,
            origin: Coord::new(min_x, min_y),
            cell_side: side / cells as f64,
            cells_per_side: cells,
        };
        let occupied: BTreeSet<(u64, u64)> =
            coords.iter().map(|&c| grid.cell_at(c)).collect();
        let regions = grid.non_empty_regions_4x4(&occupied);
        let index = EdgeIndex::build(
            &grid,
            net.edges()
                .iter()
                .enumerate()
                .map(|(i, e)| (i as u32, net.coord(e.tail), net.coord(e.head))),
        );
        let counts: Vec<u64> = regions
            .par_iter()
            .map(|region| {
                let view = network_region_view(net, &grid, &index, region, &coord_of);
                arterial_edges(&grid, region, &view, net.nuance_k(), &coord_of).len() as u64
            })
            .collect();
        let mut sorted = counts.clone();
        sorted.sort_unstable();
        let total: u64 = sorted.iter().sum();
        profile.rows.push(ProfileRow {
            r,
            regions: sorted.len() as u64,
            max: sorted.last().copied().unwrap_or(0),
            mean: if sorted.is_empty() { 0.0 } else { total as f64 / sorted.len() as f64 },
            q90: nearest_rank(&sorted, 0.90),
            q99: nearest_rank(&sorted, 0.99),
        });
    }
    profile
}

// ---------------------------------------------------------------------------
// SlidingWindow
// ---------------------------------------------------------------------------

#[derive(Debug, thiserror::Error)]
pub enum SlidingWindowError {
    #[error("path too local: a 3x3-cell region covers every node at this level")]
    PathTooLocal,
    #[error("no 4x4 region satisfies the west/south-strip placement for this path")]
    Unplaceable,
}

/// Scans a shortest path until the cell bounding box of the scanned prefix
/// reaches four cells in width or height, then returns a 4x4 region and the
/// contiguous subpath between the extreme-coordinate nodes of the prefix.
///
/// The region covers the nodes scanned before the final one and places the
/// minimum-coordinate node in its west (or south) strip, following the
/// prefix/endpoint bookkeeping of the published procedure literally (the
/// final scanned node itself need not lie in the region).
pub fn sliding_window(
    grid: &UniformGrid,
    path: &[NodeId],
    coord_of: &impl Fn(NodeId) -> Coord,
) -> Result<(Region, std::ops::Range<usize>), SlidingWindowError> {
    assert!(!path.is_empty());
    let cells: Vec<(u64, u64)> = path.iter().map(|&v| grid.cell_at(coord_of(v))).collect();

    let full_bbox = bbox(&cells);
    if width(&full_bbox) < 4 && height(&full_bbox) < 4 {
        return Err(SlidingWindowError::PathTooLocal);
    }

    let mut theta = 0usize;
    let mut wide = false;
    for j in 0..path.len() {
        theta = j;
        let bb = bbox(&cells[..=j]);
        if width(&bb) >= 4 || height(&bb) >= 4 {
            wide = width(&bb) >= 4;
            break;
        }
    }

    let prefix = &path[..=theta];
    let (alpha, beta) = if wide {
        let alpha = (0..prefix.len())
            .min_by(|&a, &b| {
                coord_of(prefix[a]).x.partial_cmp(&coord_of(prefix[b]).x).unwrap()
            })
            .unwrap();
        let beta = (0..prefix.len())
            .max_by(|&a, &b| {
                coord_of(prefix[a]).x.partial_cmp(&coord_of(prefix[b]).x).unwrap()
            })
            .unwrap();
        (alpha, beta)
    } else {
        let alpha = (0..prefix.len())
            .min_by(|&a, &b| {
                coord_of(prefix[a]).y.partial_cmp(&coord_of(prefix[b]).y).unwrap()
            })
            .unwrap();
        let beta = (0..prefix.len())
            .max_by(|&a, &b| {
                coord_of(prefix[a]).y.partial_cmp(&coord_of(prefix[b]).y).unwrap()
            })
            .unwrap();
        (alpha, beta)
    };

    // region anchored so that the alpha node sits in the west (south) strip
    // while covering the prefix nodes scanned before the break
    let covered = &cells[..theta.max(1)];
    let bb = bbox(covered);
    let anchor_max = grid.cells_per_side.saturating_sub(4);
    let region = if wide {
        let ax = cells[alpha].0;
        let ay_lo = bb.3.saturating_sub(3);
        let ay = bb.1.min(anchor_max).max(ay_lo);
        Region { level: grid.level, cx: ax.min(anchor_max), cy: ay, width: 4, height: 4 }
    } else {
        let ay = cells[alpha].1;
        let ax_lo = bb.2.saturating_sub(3);
        let ax = bb.0.min(anchor_max).max(ax_lo);
        Region { level: grid.level, cx: ax, cy: ay.min(anchor_max), width: 4, height: 4 }
    };
    // the anchor must still cover the scanned prefix
    for &(cx, cy) in covered {
        if !region.contains_cell(cx, cy) {
            return Err(SlidingWindowError::Unplaceable);
        }
    }

    let (a, b) = (alpha.min(beta), alpha.max(beta));
    Ok((region, a..b + 1))
}

fn bbox(cells: &[(u64, u64)]) -> (u64, u64, u64, u64) {
    let min_x = cells.iter().map(|c| c.0).min().unwrap();
    let min_y = cells.iter().map(|c| c.1).min().unwrap();
    let max_x = cells.iter().map(|c| c.0).max().unwrap();
    let max_y = cells.iter().map(|c| c.1).max().unwrap();
    (min_x, min_y, max_x, max_y)
}

fn width(bb: &(u64, u64, u64, u64)) -> u64 {
    bb.2 - bb.0 + 1
}

fn height(bb: &(u64, u64, u64, u64)) -> u64 {
    bb.3 - bb.1 + 1
}

/// Checks that a subpath is a spanning path of `region` over `view`: weight
/// matches the local shortest path between its endpoints and the endpoint
/// side conditions hold for at least one axis; returns the satisfied axis.
pub fn verify_spanning(
    grid: &UniformGrid,
    region: &Region,
    view: &RegionView,
    k: u8,
    subpath: &[NodeId],
    coord_of: &impl Fn(NodeId) -> Coord,
) -> Option<Axis> {
    let (s, t) = (*subpath.first()?, *subpath.last()?);
    let expected = view_path_weight(view, k, subpath)?;
    let spt = local_spt(view, k, s, SearchDir::Forward, |_| true, |_| true);
    let (_, best) = spt.best(t)?;
    if best != expected {
        return None;
    }
    for axis in [Axis::WestEast, Axis::NorthSouth] {
        let a = endpoint_eligible(grid, region, axis, coord_of(s));
        let b = endpoint_eligible(grid, region, axis, coord_of(t));
        if let (Some(x), Some(y)) = (a, b) {
            if x != y {
                return Some(axis);
            }
        }
    }
    None
}

/// Weight of a node sequence within a view (edges looked up by endpoints).
pub fn view_path_weight(view: &RegionView, k: u8, path: &[NodeId]) -> Option<PathWeight> {
    let mut w = PathWeight::zero(k);
    for pair in path.windows(2) {
        let eid = view
            .out_edges(pair[0])
            .iter()
            .copied()
            .filter(|&e| view.edges[e as usize].head == pair[1])
            .min_by_key(|&e| view.edges[e as usize].weight)?;
        w = w.plus(&view.edges[eid as usize].weight);
    }
    Some(w)
}

/// Convenience: the view of all network edges overlapping one region.
pub fn full_region_view(net: &RoadNetwork, grid: &UniformGrid, region: &Region) -> RegionView {
    let rect = grid.rect_of(region);
    RegionView::from_edges(
        rect,
        net.edges().iter().enumerate().map(|(i, e)| ViewEdge {
            tail: e.tail,
            head: e.head,
            weight: PathWeight::from_edge(e.length, &e.nuance, net.nuance_k()),
            id: i as u32,
        }),
        &|v| net.coord(v),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::road_graph::RoadNetwork;
    use crate::synth;

    /// Eleven-node network laid over a 4x4-cell region: two west-east
    /// corridors crossing the vertical bisector, a slow middle detour, and
    /// stub edges poking out of the region on both sides.
    ///
    /// Region cells have side 2; the region of interest is anchored at cell
    /// (1, 1), so its rectangle is [2,10]^2, its vertical bisector x = 6 and
    /// its center 2x2 box [4,8]^2.
    fn figure_fixture() -> (RoadNetwork, UniformGrid, Region) {
        let v = |x: f64, y: f64| Coord::new(x, y);
        let coords = vec![
            v(1.0, 5.0),  // v1  (outside west)
            v(1.0, 7.0),  // v2  (outside west)
            v(11.0, 5.0), // v3  (outside east)
            v(9.0, 3.0),  // v4  (east strip)
            v(5.0, 5.0),  // v5  (center, slow detour)
            v(5.0, 7.0),  // v6  (center, west of bisector)
            v(7.0, 3.0),  // v7  (east of bisector)
            v(9.0, 7.0),  // v8  (east strip)
            v(3.0, 7.0),  // v9  (west strip)
            v(7.0, 7.0),  // v10 (center, east of bisector)
            v(3.0, 3.0),  // v11 (west strip)
        ];
        let undirected = [
            (8u32, 5u32, 2u64), // v9-v6
            (5, 9, 2),          // v6-v10
            (9, 7, 2),          // v10-v8
            (8, 4, 4),          // v9-v5
            (4, 7, 5),          // v5-v8 (crosses the bisector but never shortest)
            (10, 6, 4),         // v11-v7
            (6, 3, 2),          // v7-v4
            (0, 10, 3),         // v1-v11
            (1, 8, 3),          // v2-v9
            (7, 2, 3),          // v8-v3
            (10, 8, 4),         // v11-v9
        ];
        let mut arcs = Vec::new();
        for (a, b, w) in undirected {
            arcs.push((a, b, w));
            arcs.push((b, a, w));
        }
        let net = RoadNetwork::from_parts(coords, arcs).unwrap();
        let grid = UniformGrid {
            level: 1,
            origin: Coord::new(0.0, 0.0),
            cell_side: 2.0,
            cells_per_side: 8,
        };
        let region = Region { level: 1, cx: 1, cy: 1, width: 4, height: 4 };
        (net, grid, region)
    }

    fn n(i: u32) -> NodeId {
        NodeId(i - 1) // v_i naming
    }

    #[test]
    fn figure_local_shortest_path_takes_the_corridor() {
        let (net, grid, region) = figure_fixture();
        let view = full_region_view(&net, &grid, &region);
        let spt = local_spt(&view, 0, n(9), SearchDir::Forward, |_| true, |_| true);
        let (state, w) = spt.best(n(8)).unwrap();
        assert_eq!(w.length, 6);
        assert_eq!(spt.path_nodes(state, &view), vec![n(9), n(6), n(10), n(8)]);
    }

    #[test]
    fn figure_spanning_paths_and_designated_arterial_edges() {
        let (net, grid, region) = figure_fixture();
        let view = full_region_view(&net, &grid, &region);
        let coord_of = |v: NodeId| net.coord(v);
        let records = spanning_paths(&grid, &region, &view, 0, &coord_of);

        let find = |s: NodeId, t: NodeId| {
            records
                .iter()
                .find(|r| r.path.nodes.first() == Some(&s) && r.path.nodes.last() == Some(&t))
                .unwrap_or_else(|| panic!("no spanning path {s} -> {t}"))
        };
        let p1 = find(n(9), n(8));
        assert_eq!(p1.path.nodes, vec![n(9), n(6), n(10), n(8)]);
        assert_eq!(p1.axis, Axis::WestEast);
        assert_eq!(p1.arterial_edge, (n(6), n(10)));

        let p2 = find(n(11), n(4));
        assert_eq!(p2.path.nodes, vec![n(11), n(7), n(4)]);
        assert_eq!(p2.arterial_edge, (n(11), n(7)));

        // every record's endpoints satisfy the side conditions
        for r in &records {
            let s = *r.path.nodes.first().unwrap();
            let t = *r.path.nodes.last().unwrap();
            let es = endpoint_eligible(&grid, &region, r.axis, coord_of(s)).unwrap();
            let et = endpoint_eligible(&grid, &region, r.axis, coord_of(t)).unwrap();
            assert_ne!(es, et);
        }
    }

    #[test]
    fn figure_arterial_edge_set_is_exactly_the_two_corridor_edges() {
        let (net, grid, region) = figure_fixture();
        let view = full_region_view(&net, &grid, &region);
        let coord_of = |v: NodeId| net.coord(v);
        let set = arterial_edges(&grid, &region, &view, 0, &coord_of);
        assert!(set.contains(&(n(6), n(10))));
        assert!(set.contains(&(n(11), n(7))));
        let undirected: BTreeSet<(NodeId, NodeId)> = set
            .iter()
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect();
        assert_eq!(
            undirected,
            BTreeSet::from([(n(6), n(10)), (n(7), n(11))])
        );
        // v5-v8 crosses the bisector but lies on no spanning path
        assert!(!set.contains(&(n(5), n(8))) && !set.contains(&(n(8), n(5))));
    }

    #[test]
    fn figure_border_nodes_match_the_expected_set() {
        let (net, grid, region) = figure_fixture();
        let border = grid.border_nodes(
            &region,
            net.edges().iter().map(|e| (e.tail, e.head)),
            |v| net.coord(v),
        );
        let expected: BTreeSet<NodeId> =
            [1, 2, 3, 4, 7, 8, 9, 11].into_iter().map(n).collect();
        assert_eq!(border, expected);
        // geometric re-check: every arterial edge intersects its bisector
        let view = full_region_view(&net, &grid, &region);
        let coord_of = |v: NodeId| net.coord(v);
        let anatomy = grid.anatomy(&region);
        for (a, b) in arterial_edges(&grid, &region, &view, 0, &coord_of) {
            let (p, q) = anatomy.vertical_bisector();
            assert!(segments_intersect(net.coord(a), net.coord(b), p, q));
        }
    }

    #[test]
    fn single_source_tree_and_empty_region() {
        let net = synth::manhattan_grid(2, 1, 5, 64.0);
        let grid = UniformGrid {
            level: 1,
            origin: Coord::new(0.0, 0.0),
            cell_side: 2.0,
            cells_per_side: 64,
        };
        let region = Region { level: 1, cx: 0, cy: 0, width: 4, height: 4 };
        let view = full_region_view(&net, &grid, &region);
        let spt = local_spt(&view, 0, NodeId(0), SearchDir::Forward, |_| true, |_| true);
        assert_eq!(spt.best(NodeId(0)).unwrap().1.length, 0);
        // a region away from all nodes and edges has nothing in it
        let empty = Region { level: 1, cx: 0, cy: 8, width: 4, height: 4 };
        let view = full_region_view(&net, &grid, &empty);
        assert!(view.nodes.is_empty());
        let coord_of = |v: NodeId| net.coord(v);
        assert!(spanning_paths(&grid, &empty, &view, 0, &coord_of).is_empty());
        assert!(arterial_edges(&grid, &empty, &view, 0, &coord_of).is_empty());
    }

    #[test]
    fn bisector_adjacent_endpoints_cannot_span() {
        // all nodes inside the two middle cell columns: condition (ii) of the
        // spanning definition excludes every endpoint
        let coords = vec![
            Coord::new(2.5, 0.5),
            Coord::new(3.5, 0.5),
            Coord::new(4.5, 0.5),
        ];
        let net = RoadNetwork::from_parts(
            coords,
            vec![(0, 1, 1), (1, 0, 1), (1, 2, 1), (2, 1, 1)],
        )
        .unwrap();
        let grid = UniformGrid {
            level: 1,
            origin: Coord::new(0.0, 0.0),
            cell_side: 1.0,
            cells_per_side: 8,
        };
        let region = Region { level: 1, cx: 1, cy: 0, width: 4, height: 4 };
        let view = full_region_view(&net, &grid, &region);
        let coord_of = |v: NodeId| net.coord(v);
        assert!(spanning_paths(&grid, &region, &view, 0, &coord_of).is_empty());
    }

    /// Exhaustive oracle: all simple paths with at most one boundary-touching
    /// edge, minimum taken by path weight.
    fn brute_force_local_best(
        view: &RegionView,
        k: u8,
        s: NodeId,
        t: NodeId,
    ) -> Option<PathWeight> {
        fn dfs(
            view: &RegionView,
            t: NodeId,
            node: NodeId,
            crossed: bool,
            weight: PathWeight,
            visited: &mut Vec<u32>,
            best: &mut Option<PathWeight>,
        ) {
            if node == t {
                if best.map(|b| weight < b).unwrap_or(true) {
                    *best = Some(weight);
                }
                return;
            }
            if best.map(|b| weight >= b).unwrap_or(false) {
                return;
            }
            for &eid in view.out_edges(node) {
                let e = &view.edges[eid as usize];
                if view.crosses[eid as usize] && crossed {
                    continue;
                }
                if visited.contains(&e.head.0) {
                    continue;
                }
                visited.push(e.head.0);
                dfs(
                    view,
                    t,
                    e.head,
                    crossed || view.crosses[eid as usize],
                    weight.plus(&e.weight),
                    visited,
                    best,
                );
                visited.pop();
            }
        }
        let mut best = None;
        let mut visited = vec![s.0];
        dfs(view, t, s, false, PathWeight::zero(k), &mut visited, &mut best);
        best
    }

    #[test]
    fn local_spt_matches_exhaustive_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for seed in 0..6u64 {
            let net = crate::road_graph::perturb(
                &synth::random_geo_graph(6, 5, seed, 0.6, None),
                2,
                seed,
            )
            .unwrap();
            let g = crate::grid::GridHierarchy::build(&net).unwrap();
            let level = (g.h().saturating_sub(1)).max(1);
            let grid = g.grid(level);
            let occupied = g.occupied_cells(level);
            let regions = grid.non_empty_regions_4x4(&occupied);
            let region = regions[rng.gen_range(0..regions.len())];
            let view = full_region_view(&net, &grid, &region);
            let nodes: Vec<NodeId> = view.nodes.iter().copied().collect();
            if nodes.len() < 2 {
                continue;
            }
            for _ in 0..12 {
                let s = nodes[rng.gen_range(0..nodes.len())];
                let t = nodes[rng.gen_range(0..nodes.len())];
                let spt = local_spt(&view, 2, s, SearchDir::Forward, |_| true, |_| true);
                let fast = spt.best(t).map(|(_, w)| w);
                let brute = brute_force_local_best(&view, 2, s, t);
                assert_eq!(fast, brute, "seed {seed} {s}->{t}");
            }
        }
    }

    #[test]
    fn backward_tree_mirrors_forward_tree() {
        let (net, grid, region) = figure_fixture();
        let view = full_region_view(&net, &grid, &region);
        let fwd = local_spt(&view, 0, n(9), SearchDir::Forward, |_| true, |_| true);
        let bwd = local_spt(&view, 0, n(8), SearchDir::Backward, |_| true, |_| true);
        // network is symmetric, so v9 -> v8 forward equals v8 <- v9 backward
        assert_eq!(
            fwd.best(n(8)).map(|(_, w)| w),
            bwd.best(n(9)).map(|(_, w)| w)
        );
        let (st, _) = bwd.best(n(9)).unwrap();
        assert_eq!(bwd.path_nodes(st, &view), vec![n(9), n(6), n(10), n(8)]);
    }

    #[test]
    fn profiler_on_single_edge_network() {
        let net = RoadNetwork::from_parts(
            vec![Coord::new(0.0, 0.0), Coord::new(100.0, 0.0)],
            vec![(0, 1, 5)],
        )
        .unwrap();
        let profile = arterial_profile(&net, &[2, 3]);
        assert!(!profile.rows.is_empty());
        for row in &profile.rows {
            assert!(row.max <= 1);
            assert!(row.q90 <= row.q99 && row.q99 <= row.max);
        }
        // sub-4-cell resolutions are skipped
        let skipped = arterial_profile(&net, &[0, 1]);
        assert_eq!(skipped.skipped_resolutions, vec![0, 1]);
        assert!(skipped.rows.is_empty());
    }

    #[test]
    fn profiler_stats_ordered_and_deterministic() {
        let net = crate::road_graph::perturb(
            &synth::random_geo_graph(12, 12, 5, 0.5, None),
            2,
            5,
        )
        .unwrap();
        let a = arterial_profile(&net, &[3, 4, 5]);
        let b = arterial_profile(&net, &[3, 4, 5]);
        assert_eq!(a.rows, b.rows);
        for row in &a.rows {
            assert!(row.q90 <= row.q99 && row.q99 <= row.max);
            assert!(row.mean <= row.max as f64);
            assert!(row.regions > 0);
        }
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("r,regions,max,mean,q90,q99\n"));
        assert_eq!(text.lines().count(), 1 + a.rows.len());
    }

    #[test]
    fn comb_grid_west_east_arterial_edges_are_avenue_edges() {
        // only avenue rows carry horizontal edges, so every west-east
        // spanning path crosses a vertical bisector through an avenue edge
        let avenues = [2u32, 7, 11];
        let net = synth::comb_grid(16, 16, &avenues, 10, 2.0);
        let g = crate::grid::GridHierarchy::build(&net).unwrap();
        let avenue_y: Vec<f64> = avenues.iter().map(|&r| (2 * r + 1) as f64).collect();
        for level in (1..=g.h()).rev().take(3) {
            let grid = g.grid(level);
            let occupied = g.occupied_cells(level);
            for region in grid.non_empty_regions_4x4(&occupied) {
                let view = full_region_view(&net, &grid, &region);
                let coord_of = |v: NodeId| net.coord(v);
                let we = arterial_edges_on_axis(
                    &grid, &region, &view, 0, &coord_of, Axis::WestEast,
                );
                // two directions per avenue, doubled again when a node sits
                // exactly on the bisector line (touching arcs on both sides)
                assert!(we.len() as u64 <= 4 * avenues.len() as u64, "count {}", we.len());
                for (a, b) in we {
                    let (pa, pb) = (net.coord(a), net.coord(b));
                    assert_eq!(pa.y, pb.y, "west-east arterial edge must be an avenue arc");
                    assert!(avenue_y.contains(&pa.y));
                }
            }
        }
    }

    #[test]
    fn sliding_window_traces_the_documented_example() {
        // path whose scanned bounding box jumps from 3 to 5 cells wide at the
        // fifth node
        let coords = vec![
            Coord::new(2.5, 0.5), // p0 cell (2,0)
            Coord::new(0.5, 1.5), // p1 cell (0,1)  min x
            Coord::new(1.5, 2.5), // p2 cell (1,2)
            Coord::new(2.5, 2.5), // p3 cell (2,2)
            Coord::new(4.5, 1.5), // p4 cell (4,1)  break: width 5
            Coord::new(5.5, 1.5), // p5 cell (5,1)
        ];
        let grid = UniformGrid {
            level: 1,
            origin: Coord::new(0.0, 0.0),
            cell_side: 1.0,
            cells_per_side: 8,
        };
        let path: Vec<NodeId> = (0..6).map(NodeId).collect();
        let coord_of = |v: NodeId| coords[v.index()];
        let (region, range) = sliding_window(&grid, &path, &coord_of).unwrap();
        assert_eq!(range, 1..5); // p1 .. p4
        assert_eq!((region.cx, region.cy), (0, 0));
        // region covers the pre-break prefix and puts the min-x node in the
        // west strip
        for i in 0..4 {
            let c = grid.cell_at(coords[i]);
            assert!(region.contains_cell(c.0, c.1));
        }
        assert_eq!(grid.cell_at(coords[1]).0, region.cx);
    }

    #[test]
    fn sliding_window_straight_horizontal_path() {
        let coords: Vec<Coord> = (0..6).map(|i| Coord::new(i as f64 + 0.5, 0.5)).collect();
        let grid = UniformGrid {
            level: 1,
            origin: Coord::new(0.0, 0.0),
            cell_side: 1.0,
            cells_per_side: 8,
        };
        let path: Vec<NodeId> = (0..6).map(NodeId).collect();
        let coord_of = |v: NodeId| coords[v.index()];
        let (region, range) = sliding_window(&grid, &path, &coord_of).unwrap();
        // endpoints are the extreme-x nodes of the first 4-cell-wide prefix
        assert_eq!(range, 0..4);
        assert_eq!((region.cx, region.cy), (0, 0));
    }

    #[test]
    fn sliding_window_rejects_local_paths() {
        let coords = vec![Coord::new(0.5, 0.5), Coord::new(1.5, 1.5)];
        let grid = UniformGrid {
            level: 1,
            origin: Coord::new(0.0, 0.0),
            cell_side: 1.0,
            cells_per_side: 8,
        };
        let path = vec![NodeId(0), NodeId(1)];
        let coord_of = |v: NodeId| coords[v.index()];
        assert!(matches!(
            sliding_window(&grid, &path, &coord_of),
            Err(SlidingWindowError::PathTooLocal)
        ));
    }
}
