//! Hierarchy construction: core selection, node ranking and shortcut
//! creation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::arterial::{local_spt, RegionView, SearchDir, ViewEdge};
use crate::geom::{segment_overlaps_rect, segments_intersect, Coord};
use crate::grid::{region_contains_region, GridHierarchy, Region, UniformGrid};
use crate::road_graph::{NodeId, RoadNetwork};
use crate::search::MinQueue;
use crate::weight::PathWeight;

use super::{
    AhError, AhHierarchy, CoreAssignment, EdgeEntry, QueryMode, ShortcutKind, UnpackInfo,
};

// ---------------------------------------------------------------------------
// Border-node sets
// ---------------------------------------------------------------------------

/// Nodes that are border nodes of at least one 4x4 region of one grid level,
/// per the strip-boundary rule over the original network edges.
fn border_set(net: &RoadNetwork, grids: &GridHierarchy, level: u32) -> Vec<bool> {
    let grid = grids.grid(level);
    let mut out = vec![false; net.node_count()];
    let max_anchor = grid.cells_per_side.saturating_sub(4);
    for e in net.edges() {
        let pa = grids.node_coord(e.tail);
        let pb = grids.node_coord(e.head);
        let ca = grid.cell_at(pa);
        let cb = grid.cell_at(pb);
        let lo_x = ca.0.min(cb.0).saturating_sub(4);
        let hi_x = (ca.0.max(cb.0) + 1).min(max_anchor);
        let lo_y = ca.1.min(cb.1).saturating_sub(4);
        let hi_y = (ca.1.max(cb.1) + 1).min(max_anchor);
        for cx in lo_x..=hi_x {
            for cy in lo_y..=hi_y {
                let region = Region { level, cx, cy, width: 4, height: 4 };
                let anatomy = grid.anatomy(&region);
                if !anatomy
                    .strips()
                    .iter()
                    .any(|s| crate::geom::segment_intersects_rect_boundary(pa, pb, s))
                {
                    continue;
                }
                for (v, cell) in [(e.tail, ca), (e.head, cb)] {
                    let in_center = cell.0 >= region.cx + 1
                        && cell.0 <= region.cx + 2
                        && cell.1 >= region.cy + 1
                        && cell.1 <= region.cy + 2;
                    if !in_center {
                        out[v.index()] = true;
                    }
                }
                if out[e.tail.index()] && out[e.head.index()] {
                    break;
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Phase 1: core selection
// ---------------------------------------------------------------------------

/// Provenance of a working edge during core selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Provenance {
    Original,
    /// Grid level and anchor of the generating region.
    Shortcut(u32, u64, u64),
}

#[derive(Debug, Clone, Copy)]
struct WorkEdge {
    tail: NodeId,
    head: NodeId,
    weight: PathWeight,
    provenance: Provenance,
}

/// An edge passes the coverage test for region `B` when it is an original
/// edge whose tail cell lies in `B`, or a shortcut generated from a region
/// completely covered by `B`.
fn coverage_ok(
    grids: &GridHierarchy,
    edge: &WorkEdge,
    region: &Region,
    region_grid: &UniformGrid,
) -> bool {
    match edge.provenance {
        Provenance::Original => {
            let cell = region_grid.cell_at(grids.node_coord(edge.tail));
            region.contains_cell(cell.0, cell.1)
        }
        Provenance::Shortcut(level, cx, cy) => {
            let inner = Region { level, cx, cy, width: 4, height: 4 };
            region.level >= level && region_contains_region(region, &inner)
        }
    }
}

/// Output of core selection: raw marks (highest core level per node) and the
/// per-level sets of designated arterial / pseudo-arterial edges.
pub struct CoreSelection {
    pub marks: Vec<u32>,
    /// `pseudo_sets[i]` holds the endpoint pairs whose designation produced
    /// the level-`i` cores (index 0 unused).
    pub pseudo_sets: Vec<BTreeSet<(u32, u32)>>,
    /// Alive node count entering each selection round.
    pub alive_trace: Vec<usize>,
}

pub fn select_cores(net: &RoadNetwork, grids: &GridHierarchy) -> CoreSelection {
    let h = grids.h();
    let n = net.node_count();
    let k = net.nuance_k();
    let coord_of = |v: NodeId| grids.node_coord(v);

    let mut marks = vec![0u32; n];
    let mut pseudo_sets: Vec<BTreeSet<(u32, u32)>> = vec![BTreeSet::new(); h as usize + 1];
    let mut alive: Vec<bool> = vec![true; n];
    let mut alive_trace = Vec::new();

    let mut work: Vec<WorkEdge> = net
        .edges()
        .iter()
        .map(|e| WorkEdge {
            tail: e.tail,
            head: e.head,
            weight: PathWeight::from_edge(e.length, &e.nuance, k),
            provenance: Provenance::Original,
        })
        .collect();

    // Base round on the finest grid: real arterial edges seed level-1 cores.
    {
        let grid = grids.grid(1);
        let occupied = grids.occupied_cells(1);
        let regions = grid.non_empty_regions_4x4(&occupied);
        let index = work_index(&grid, &work, &coord_of);
        let per_region: Vec<BTreeSet<(NodeId, NodeId)>> = regions
            .par_iter()
            .map(|region| {
                let view = work_view(&grid, &index, &work, region, &coord_of);
                crate::arterial::arterial_edges(&grid, region, &view, k, &coord_of)
            })
            .collect();
        for set in per_region {
            for (a, b) in set {
                marks[a.index()] = marks[a.index()].max(1);
                marks[b.index()] = marks[b.index()].max(1);
                pseudo_sets[1].insert((a.0, b.0));
            }
        }

        // shortcuts between level-1 cores over unmarked interiors
        let shortcuts: Vec<Vec<WorkEdge>> = regions
            .par_iter()
            .map(|region| {
                let view = work_view(&grid, &index, &work, region, &coord_of);
                let mut local = Vec::new();
                let mut cores: Vec<NodeId> = view
                    .nodes
                    .iter()
                    .copied()
                    .filter(|v| marks[v.index()] >= 1)
                    .collect();
                cores.sort_unstable();
                for &u in &cores {
                    // tree over unmarked nodes, terminal hops into cores
                    let spt = local_spt(
                        &view,
                        k,
                        u,
                        SearchDir::Forward,
                        |e| marks[e.head.index()] == 0,
                        |_| true,
                    );
                    let mut best: BTreeMap<u32, PathWeight> = BTreeMap::new();
                    for (state, w) in spt.states() {
                        let node = NodeId((state >> 1) as u32);
                        let crossed = state & 1 == 1;
                        for &eid in view.out_edges(node) {
                            let e = &view.edges[eid as usize];
                            if marks[e.head.index()] == 0 || e.head == u {
                                continue;
                            }
                            if view.crosses[eid as usize] && crossed {
                                continue;
                            }
                            let cand = w.plus(&e.weight);
                            let slot = best.entry(e.head.0).or_insert(cand);
                            if cand < *slot {
                                *slot = cand;
                            }
                        }
                    }
                    for (v, w) in best {
                        local.push(WorkEdge {
                            tail: u,
                            head: NodeId(v),
                            weight: w,
                            provenance: Provenance::Shortcut(1, region.cx, region.cy),
                        });
                    }
                }
                local
            })
            .collect();
        append_shortcuts(&mut work, shortcuts.into_iter().flatten());
    }

    // Rounds over coarser grids: spanning paths in reduced graphs.
    for i in 1..h {
        let target = i + 1; // cores being selected this round
        let border = border_set(net, grids, target);
        for v in 0..n {
            alive[v] = alive[v] && (marks[v] >= i || border[v]);
        }
        alive_trace.push(alive.iter().filter(|&&a| a).count());
        work.retain(|e| alive[e.tail.index()] && alive[e.head.index()]);

        let grid = grids.grid(target);
        let occupied: BTreeSet<(u64, u64)> = (0..n)
            .filter(|&v| alive[v])
            .map(|v| grid.cell_at(coord_of(NodeId(v as u32))))
            .collect();
        let regions = grid.non_empty_regions_4x4(&occupied);
        let index = work_index(&grid, &work, &coord_of);

        // spanning paths satisfying the border and coverage conditions
        let found: Vec<BTreeSet<(u32, u32)>> = regions
            .par_iter()
            .map(|region| {
                let view = work_view(&grid, &index, &work, region, &coord_of);
                let border_b: Vec<NodeId> = grid
                    .border_nodes(
                        region,
                        net.edges().iter().map(|e| (e.tail, e.head)),
                        |v| coord_of(v),
                    )
                    .into_iter()
                    .filter(|v| alive[v.index()] && view.nodes.contains(v))
                    .collect();
                designate_pseudo_arterial(
                    grids, &grid, region, &view, &work, &border_b, &marks, i, k, &coord_of,
                )
            })
            .collect();
        for set in found {
            for (a, b) in set {
                marks[a as usize] = marks[a as usize].max(target);
                marks[b as usize] = marks[b as usize].max(target);
                pseudo_sets[target as usize].insert((a, b));
            }
        }

        // next-round shortcuts: from future border nodes and fresh cores,
        // through level-i cores, stopping at the first fresh core
        let next_border = if target < h {
            border_set(net, grids, target + 1)
        } else {
            vec![false; n]
        };
        let shortcuts: Vec<Vec<WorkEdge>> = regions
            .par_iter()
            .map(|region| {
                let view = work_view(&grid, &index, &work, region, &coord_of);
                let mut local = Vec::new();
                let mut sources: Vec<NodeId> = view
                    .nodes
                    .iter()
                    .copied()
                    .filter(|v| {
                        if !alive[v.index()] {
                            return false;
                        }
                        let cell = grid.cell_at(coord_of(*v));
                        if !region.contains_cell(cell.0, cell.1) {
                            return false;
                        }
                        marks[v.index()] >= target || next_border[v.index()]
                    })
                    .collect();
                sources.sort_unstable();
                for &u in &sources {
                    for dir in [SearchDir::Forward, SearchDir::Backward] {
                        let spt = local_spt(
                            &view,
                            k,
                            u,
                            dir,
                            |e| {
                                let t = match dir {
                                    SearchDir::Forward => e.head,
                                    SearchDir::Backward => e.tail,
                                };
                                marks[t.index()] >= i
                                    && coverage_ok(
                                        grids,
                                        &work[e.id as usize],
                                        region,
                                        &grid,
                                    )
                            },
                            |w| marks[w.index()] < target,
                        );
                        let mut best: BTreeMap<u32, PathWeight> = BTreeMap::new();
                        for (state, w) in spt.states() {
                            let node = (state >> 1) as u32;
                            if node == u.0 || marks[node as usize] < target {
                                continue;
                            }
                            let slot = best.entry(node).or_insert(w);
                            if w < *slot {
                                *slot = w;
                            }
                        }
                        for (v, w) in best {
                            let (tail, head) = match dir {
                                SearchDir::Forward => (u, NodeId(v)),
                                SearchDir::Backward => (NodeId(v), u),
                            };
                            local.push(WorkEdge {
                                tail,
                                head,
                                weight: w,
                                provenance: Provenance::Shortcut(
                                    target, region.cx, region.cy,
                                ),
                            });
                        }
                    }
                }
                local
            })
            .collect();
        append_shortcuts(&mut work, shortcuts.into_iter().flatten());
    }

    CoreSelection { marks, pseudo_sets, alive_trace }
}

/// Deduplicates per (tail, head, provenance), keeping the shortest.
fn append_shortcuts(work: &mut Vec<WorkEdge>, fresh: impl Iterator<Item = WorkEdge>) {
    let mut best: BTreeMap<(u32, u32, u32, u64, u64), PathWeight> = BTreeMap::new();
    for e in fresh {
        let Provenance::Shortcut(l, cx, cy) = e.provenance else { continue };
        let key = (e.tail.0, e.head.0, l, cx, cy);
        let slot = best.entry(key).or_insert(e.weight);
        if e.weight < *slot {
            *slot = e.weight;
        }
    }
    for ((t, hd, l, cx, cy), w) in best {
        work.push(WorkEdge {
            tail: NodeId(t),
            head: NodeId(hd),
            weight: w,
            provenance: Provenance::Shortcut(l, cx, cy),
        });
    }
}

fn work_index(
    grid: &UniformGrid,
    work: &[WorkEdge],
    coord_of: &impl Fn(NodeId) -> Coord,
) -> crate::arterial::EdgeIndex {
    crate::arterial::EdgeIndex::build(
        grid,
        work.iter()
            .enumerate()
            .map(|(i, e)| (i as u32, coord_of(e.tail), coord_of(e.head))),
    )
}

fn work_view(
    grid: &UniformGrid,
    index: &crate::arterial::EdgeIndex,
    work: &[WorkEdge],
    region: &Region,
    coord_of: &impl Fn(NodeId) -> Coord,
) -> RegionView {
    let rect = grid.rect_of(region);
    RegionView::from_edges(
        rect,
        index.candidates(region).into_iter().map(|id| {
            let e = &work[id as usize];
            ViewEdge { tail: e.tail, head: e.head, weight: e.weight, id }
        }),
        coord_of,
    )
}

/// Constrained traversals from every border node of one region; returns the
/// endpoint pairs of the designated pseudo-arterial edges.
#[allow(clippy::too_many_arguments)]
fn designate_pseudo_arterial(
    grids: &GridHierarchy,
    grid: &UniformGrid,
    region: &Region,
    view: &RegionView,
    work: &[WorkEdge],
    border_b: &[NodeId],
    marks: &[u32],
    interior_level: u32,
    k: u8,
    coord_of: &impl Fn(NodeId) -> Coord,
) -> BTreeSet<(u32, u32)> {
    let anatomy = grid.anatomy(region);
    let border_set: BTreeSet<NodeId> = border_b.iter().copied().collect();
    let mut designated = BTreeSet::new();

    let mut consider = |path_edges: &[u32], s: NodeId, t: NodeId| {
        for (axis_idx, axis) in
            [crate::arterial::Axis::WestEast, crate::arterial::Axis::NorthSouth]
                .into_iter()
                .enumerate()
        {
            let es = crate::arterial::endpoint_eligible(grid, region, axis, coord_of(s));
            let et = crate::arterial::endpoint_eligible(grid, region, axis, coord_of(t));
            let (Some(a), Some(b)) = (es, et) else { continue };
            if a == b {
                continue;
            }
            let bisector = if axis_idx == 0 {
                anatomy.vertical_bisector()
            } else {
                anatomy.horizontal_bisector()
            };
            let crossing = path_edges
                .iter()
                .copied()
                .filter(|&eid| {
                    let e = &view.edges[eid as usize];
                    segments_intersect(
                        coord_of(e.tail),
                        coord_of(e.head),
                        bisector.0,
                        bisector.1,
                    )
                })
                .map(|eid| {
                    let e = &view.edges[eid as usize];
                    (e.tail.0, e.head.0)
                })
                .min();
            if let Some(pair) = crossing {
                designated.insert(pair);
            }
        }
    };

    for &s in border_b {
        for dir in [SearchDir::Forward, SearchDir::Backward] {
            let spt = local_spt(
                view,
                k,
                s,
                dir,
                |e| {
                    let t = match dir {
                        SearchDir::Forward => e.head,
                        SearchDir::Backward => e.tail,
                    };
                    marks[t.index()] >= interior_level
                        && coverage_ok(grids, &work[e.id as usize], region, grid)
                },
                |_| true,
            );

            // candidate endpoints: settled cores outside the region, plus
            // terminal hops onto border nodes
            let mut best_outside: BTreeMap<u32, (PathWeight, u64)> = BTreeMap::new();
            let mut best_border: BTreeMap<u32, (PathWeight, u64, u32)> = BTreeMap::new();
            for (state, w) in spt.states() {
                let node = NodeId((state >> 1) as u32);
                if node == s {
                    continue;
                }
                let cell = grid.cell_at(coord_of(node));
                if !region.contains_cell(cell.0, cell.1) {
                    let slot = best_outside.entry(node.0).or_insert((w, state));
                    if w < slot.0 {
                        *slot = (w, state);
                    }
                }
            }
            for (state, w) in spt.states() {
                let node = NodeId((state >> 1) as u32);
                let crossed = state & 1 == 1;
                let edge_ids = match dir {
                    SearchDir::Forward => view.out_edges(node),
                    SearchDir::Backward => view.in_edges(node),
                };
                for &eid in edge_ids {
                    let e = &view.edges[eid as usize];
                    let t = match dir {
                        SearchDir::Forward => e.head,
                        SearchDir::Backward => e.tail,
                    };
                    if t == s || !border_set.contains(&t) {
                        continue;
                    }
                    if view.crosses[eid as usize] && crossed {
                        continue;
                    }
                    if !coverage_ok(grids, &work[e.id as usize], region, grid) {
                        continue;
                    }
                    let cand = w.plus(&e.weight);
                    let slot = best_border.entry(t.0).or_insert((cand, state, eid));
                    if cand < slot.0 {
                        *slot = (cand, state, eid);
                    }
                }
            }

            for (node, (_, state)) in best_outside {
                let path = spt.path_edges(state);
                let (a, b) = match dir {
                    SearchDir::Forward => (s, NodeId(node)),
                    SearchDir::Backward => (NodeId(node), s),
                };
                consider(&path, a, b);
            }
            for (node, (_, state, eid)) in best_border {
                let mut path = spt.path_edges(state);
                match dir {
                    SearchDir::Forward => path.push(eid),
                    SearchDir::Backward => path.insert(0, eid),
                }
                let (a, b) = match dir {
                    SearchDir::Forward => (s, NodeId(node)),
                    SearchDir::Backward => (NodeId(node), s),
                };
                consider(&path, a, b);
            }
        }
    }
    designated
}

// ---------------------------------------------------------------------------
// Ranking and downgrading
// ---------------------------------------------------------------------------

/// Greedy vertex-cover sequence: repeatedly the node covering the most
/// remaining edges, smallest id on ties.
fn greedy_cover(pairs: &BTreeSet<(u32, u32)>) -> Vec<u32> {
    let mut edges: Vec<(u32, u32)> = pairs
        .iter()
        .map(|&(a, b)| (a.min(b), a.max(b)))
        .filter(|&(a, b)| a != b)
        .collect();
    edges.sort_unstable();
    edges.dedup();
    let mut degree: BTreeMap<u32, usize> = BTreeMap::new();
    for &(a, b) in &edges {
        *degree.entry(a).or_default() += 1;
        *degree.entry(b).or_default() += 1;
    }
    let mut xi = Vec::new();
    let mut alive: Vec<bool> = vec![true; edges.len()];
    let mut remaining = edges.len();
    while remaining > 0 {
        let (&best, _) = degree
            .iter()
            .filter(|&(_, &d)| d > 0)
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .expect("edges remain, so some node has positive degree");
        xi.push(best);
        for (idx, &(a, b)) in edges.iter().enumerate() {
            if alive[idx] && (a == best || b == best) {
                alive[idx] = false;
                remaining -= 1;
                *degree.get_mut(&a).unwrap() -= 1;
                *degree.get_mut(&b).unwrap() -= 1;
            }
        }
        degree.remove(&best);
    }
    xi
}

/// Ranks the cores: level-0 nodes get a seeded random order, and each level
/// `i >= 1` orders its survivors by the greedy vertex-cover sequence of its
/// pseudo-arterial edge set. A core absent from its level's cover sequence
/// drops one level and is reconsidered there.
pub fn rank_and_downgrade(selection: &CoreSelection, seed: u64) -> CoreAssignment {
    let n = selection.marks.len();
    let h = selection.pseudo_sets.len() - 1;
    let mut level = selection.marks.clone();
    let covers: Vec<Vec<u32>> = (0..=h)
        .map(|i| {
            if i == 0 {
                Vec::new()
            } else {
                greedy_cover(&selection.pseudo_sets[i])
            }
        })
        .collect();
    let cover_sets: Vec<BTreeSet<u32>> =
        covers.iter().map(|c| c.iter().copied().collect()).collect();

    for i in (1..=h as u32).rev() {
        for v in 0..n {
            if level[v] == i && !cover_sets[i as usize].contains(&(v as u32)) {
                level[v] = i - 1;
            }
        }
    }

    // ranks: levels ascending; within a level the cover sequence runs from
    // highest rank (first pick) down, so it is assigned in reverse
    let mut rank = vec![0u64; n];
    let mut next = 0u64;
    let mut level0: Vec<u32> = (0..n as u32).filter(|&v| level[v as usize] == 0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0001);
    level0.shuffle(&mut rng);
    for v in level0 {
        rank[v as usize] = next;
        next += 1;
    }
    for i in 1..=h as u32 {
        for &v in covers[i as usize].iter().rev() {
            if level[v as usize] == i {
                rank[v as usize] = next;
                next += 1;
            }
        }
    }
    CoreAssignment { level, rank }
}

// ---------------------------------------------------------------------------
// Phase 2: shortcut creation
// ---------------------------------------------------------------------------

/// Build statistics reported alongside the hierarchy.
#[derive(Debug, Clone, Default)]
pub struct AhBuildReport {
    pub level_histogram: Vec<usize>,
    pub level_edges: usize,
    pub connectivity_edges: usize,
    pub elevating_edges: usize,
    pub via_fallbacks: usize,
    pub materialized_helpers: usize,
    pub elevating_branches_without_high_node: usize,
    pub build_seconds: f64,
    pub approx_index_bytes: usize,
    pub alive_trace: Vec<usize>,
}

struct Candidate {
    tail: NodeId,
    head: NodeId,
    weight: PathWeight,
    kind: ShortcutKind,
    region: (u32, u64, u64),
    /// Node sequence tail..head and the instance ids between them.
    path_nodes: Vec<NodeId>,
    path_insts: Vec<u32>,
    /// Prefix weights per path node.
    path_prefix: Vec<PathWeight>,
    /// Prescribed association for elevating edges.
    prescribed_via: Option<NodeId>,
}

/// Plain Dijkstra over a set of edge instances restricted to one rectangle,
/// with forced inclusion of extra instances.
struct SubGraph {
    edges: Vec<(NodeId, NodeId, PathWeight, u32)>,
    out: HashMap<u32, Vec<u32>>,
    inn: HashMap<u32, Vec<u32>>,
}

impl SubGraph {
    fn new(edges: Vec<(NodeId, NodeId, PathWeight, u32)>) -> SubGraph {
        let mut out: HashMap<u32, Vec<u32>> = HashMap::new();
        let mut inn: HashMap<u32, Vec<u32>> = HashMap::new();
        for (i, e) in edges.iter().enumerate() {
            out.entry(e.0 .0).or_default().push(i as u32);
            inn.entry(e.1 .0).or_default().push(i as u32);
        }
        SubGraph { edges, out, inn }
    }

    fn dijkstra(&self, source: NodeId, dir: SearchDir, k: u8) -> SptResult {
        let mut dist: HashMap<u32, PathWeight> = HashMap::new();
        let mut parent: HashMap<u32, (u32, u32)> = HashMap::new();
        let mut done: BTreeSet<u32> = BTreeSet::new();
        let mut queue = MinQueue::new();
        let zero = PathWeight::zero(k);
        dist.insert(source.0, zero);
        queue.push(zero, source.0);
        while let Some((w, v)) = queue.pop() {
            if done.contains(&v) || dist.get(&v).map(|d| *d < w).unwrap_or(true) {
                continue;
            }
            done.insert(v);
            let local = match dir {
                SearchDir::Forward => self.out.get(&v),
                SearchDir::Backward => self.inn.get(&v),
            };
            for &ei in local.map(Vec::as_slice).unwrap_or(&[]) {
                let (t, hd, ew, _) = self.edges[ei as usize];
                let x = match dir {
                    SearchDir::Forward => hd,
                    SearchDir::Backward => t,
                };
                if done.contains(&x.0) {
                    continue;
                }
                let nw = w.plus(&ew);
                if dist.get(&x.0).map(|d| nw < *d).unwrap_or(true) {
                    dist.insert(x.0, nw);
                    parent.insert(x.0, (v, ei));
                    queue.push(nw, x.0);
                }
            }
        }
        SptResult { source, dir, dist, parent }
    }
}

struct SptResult {
    source: NodeId,
    dir: SearchDir,
    dist: HashMap<u32, PathWeight>,
    parent: HashMap<u32, (u32, u32)>,
}

impl SptResult {
    /// Nodes from source to `v` in tree order (root first), with the
    /// subgraph-edge index used to enter each node.
    fn chain(&self, v: u32) -> Vec<(u32, Option<u32>)> {
        let mut rev = vec![(v, self.parent.get(&v).map(|&(_, e)| e))];
        let mut cur = v;
        while let Some(&(p, _)) = self.parent.get(&cur) {
            rev.push((p, self.parent.get(&p).map(|&(_, e)| e)));
            cur = p;
        }
        rev.reverse();
        rev
    }
}

/// Builds the full hierarchy from the ranked cores.
pub fn build_shortcuts(
    net: &RoadNetwork,
    grids: &GridHierarchy,
    cores: CoreAssignment,
    seed: u64,
    report: &mut AhBuildReport,
) -> Result<AhHierarchy, AhError> {
    let n = net.node_count();
    let k = net.nuance_k();
    let h = grids.h();
    let coord_of = |v: NodeId| grids.node_coord(v);

    let mut entries: Vec<EdgeEntry> = net
        .edges()
        .iter()
        .map(|e| EdgeEntry {
            tail: e.tail,
            head: e.head,
            weight: PathWeight::from_edge(e.length, &e.nuance, k),
            created_level: -1,
            kind: None,
            source_region: (0, 0, 0),
        })
        .collect();
    let mut unpack: Vec<UnpackInfo> = vec![UnpackInfo::Original; entries.len()];
    let mut by_pair: BTreeMap<(u32, u32), Vec<u32>> = BTreeMap::new();
    for (i, e) in entries.iter().enumerate() {
        by_pair.entry((e.tail.0, e.head.0)).or_default().push(i as u32);
    }

    let mut alive: Vec<bool> = vec![true; n];

    for i in 0..h {
        let grid_up = grids.grid(i + 1);
        // instances eligible for this round's shortest-path trees
        let sub: Vec<u32> = entries
            .iter()
            .enumerate()
            .filter(|(idx, e)| {
                alive[e.tail.index()]
                    && alive[e.head.index()]
                    && e.created_level == i as i32 - 1
                    && e.kind != Some(ShortcutKind::Elevating)
                    && *idx < entries.len()
            })
            .map(|(idx, _)| idx as u32)
            .collect();
        let sub_index = crate::arterial::EdgeIndex::build(
            &grid_up,
            sub.iter().map(|&idx| {
                let e = &entries[idx as usize];
                (idx, coord_of(e.tail), coord_of(e.head))
            }),
        );

        let alive_nodes: Vec<NodeId> = (0..n as u32)
            .map(NodeId)
            .filter(|v| alive[v.index()])
            .collect();

        // level edges and connectivity shortcuts
        let per_node: Vec<Vec<Candidate>> = alive_nodes
            .par_iter()
            .map(|&u| {
                level_edge_candidates(
                    &entries, &sub_index, &grid_up, grids, &cores, u, i, k, &coord_of,
                )
            })
            .collect();
        let mut batch = dedup_candidates(per_node.into_iter().flatten());
        batch.sort_by_key(|c| (c.path_insts.len(), c.tail, c.head));
        let level_batch_counts =
            append_batch(&mut entries, &mut unpack, &mut by_pair, &cores, batch, i, report)?;
        report.level_edges += level_batch_counts.0;
        report.connectivity_edges += level_batch_counts.1;

        // elevating edges from low nodes toward level i
        if i >= 1 {
            let lev: Vec<u32> = entries
                .iter()
                .enumerate()
                .filter(|(_, e)| {
                    alive[e.tail.index()]
                        && alive[e.head.index()]
                        && e.created_level == i as i32
                        && e.kind != Some(ShortcutKind::Elevating)
                })
                .map(|(idx, _)| idx as u32)
                .collect();
            let grid_i = grids.grid(i);
            let lev_index = crate::arterial::EdgeIndex::build(
                &grid_i,
                lev.iter().map(|&idx| {
                    let e = &entries[idx as usize];
                    (idx, coord_of(e.tail), coord_of(e.head))
                }),
            );
            // incidence over all alive instances, for the u-to-high edges
            let mut incident: HashMap<u32, Vec<u32>> = HashMap::new();
            for (idx, e) in entries.iter().enumerate() {
                if alive[e.tail.index()] && alive[e.head.index()] {
                    incident.entry(e.tail.0).or_default().push(idx as u32);
                    incident.entry(e.head.0).or_default().push(idx as u32);
                }
            }
            let low_nodes: Vec<NodeId> = alive_nodes
                .iter()
                .copied()
                .filter(|v| cores.level[v.index()] < i)
                .collect();
            let skipped = std::sync::atomic::AtomicUsize::new(0);
            let per_node: Vec<Vec<Candidate>> = low_nodes
                .par_iter()
                .map(|&u| {
                    elevating_candidates(
                        &entries, &lev, &lev_index, &incident, &grid_i, grids, &cores, u, i,
                        k, &coord_of, &skipped,
                    )
                })
                .collect();
            report.elevating_branches_without_high_node +=
                skipped.load(std::sync::atomic::Ordering::Relaxed);
            let mut batch = dedup_candidates(per_node.into_iter().flatten());
            batch.sort_by_key(|c| (c.path_insts.len(), c.tail, c.head));
            let counts =
                append_batch(&mut entries, &mut unpack, &mut by_pair, &cores, batch, i, report)?;
            report.elevating_edges += counts.2;
        }

        // reduction: toward the next round
        if i + 1 < h {
            let border = border_set(net, grids, i + 2);
            for v in 0..n {
                alive[v] = alive[v] && (cores.level[v] >= i + 1 || border[v]);
            }
            report.alive_trace.push(alive.iter().filter(|&&a| a).count());
        }
    }

    // query adjacency: rank-increasing instances, elevating split out,
    // parallel pairs deduplicated to the lightest instance
    let mut fwd_plain: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut fwd_elevating: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut bwd_plain: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut bwd_elevating: Vec<Vec<u32>> = vec![Vec::new(); n];
    {
        let mut best_fwd: Vec<HashMap<(u32, bool), u32>> = vec![HashMap::new(); n];
        let mut best_bwd: Vec<HashMap<(u32, bool), u32>> = vec![HashMap::new(); n];
        for (idx, e) in entries.iter().enumerate() {
            let elevating = e.kind == Some(ShortcutKind::Elevating);
            // forward traversals climb out-edges toward higher ranks,
            // backward traversals climb in-edges toward higher ranks
            if cores.rank[e.head.index()] > cores.rank[e.tail.index()] {
                let fkey = (e.head.0, elevating);
                let slot = best_fwd[e.tail.index()].entry(fkey).or_insert(idx as u32);
                if entries[idx].weight < entries[*slot as usize].weight {
                    *slot = idx as u32;
                }
            }
            if cores.rank[e.tail.index()] > cores.rank[e.head.index()] {
                let bkey = (e.tail.0, elevating);
                let slot = best_bwd[e.head.index()].entry(bkey).or_insert(idx as u32);
                if entries[idx].weight < entries[*slot as usize].weight {
                    *slot = idx as u32;
                }
            }
        }
        for v in 0..n {
            let mut f: Vec<u32> = best_fwd[v].values().copied().collect();
            f.sort_unstable();
            for idx in f {
                if entries[idx as usize].kind == Some(ShortcutKind::Elevating) {
                    fwd_elevating[v].push(idx);
                } else {
                    fwd_plain[v].push(idx);
                }
            }
            let mut b: Vec<u32> = best_bwd[v].values().copied().collect();
            b.sort_unstable();
            for idx in b {
                if entries[idx as usize].kind == Some(ShortcutKind::Elevating) {
                    bwd_elevating[v].push(idx);
                } else {
                    bwd_plain[v].push(idx);
                }
            }
        }
    }

    report.level_histogram = {
        let mut hist = vec![0usize; h as usize + 1];
        for &l in &cores.level {
            hist[l as usize] += 1;
        }
        hist
    };
    report.approx_index_bytes = entries.len() * std::mem::size_of::<EdgeEntry>()
        + unpack.len() * std::mem::size_of::<UnpackInfo>()
        + n * 16;

    Ok(AhHierarchy {
        cores,
        edges: entries,
        unpack,
        fwd_plain,
        fwd_elevating,
        bwd_plain,
        bwd_elevating,
        grids: grids.clone(),
        k,
        h,
        original_edge_count: net.edge_count() as u32,
        build_seed: seed,
        query_mode: QueryMode::Union,
    })
}

/// Level-edge and connectivity candidates from one node's two shortest-path
/// trees over the previous round's edges in the surrounding 5x5 region.
#[allow(clippy::too_many_arguments)]
fn level_edge_candidates(
    entries: &[EdgeEntry],
    sub_index: &crate::arterial::EdgeIndex,
    grid_up: &UniformGrid,
    grids: &GridHierarchy,
    cores: &CoreAssignment,
    u: NodeId,
    i: u32,
    k: u8,
    coord_of: &impl Fn(NodeId) -> Coord,
) -> Vec<Candidate> {
    let cell = grid_up.cell_at(coord_of(u));
    let c_region = grid_up.region_5x5_around_cell(cell);
    let crect = grid_up.rect_of(&c_region);
    let edges: Vec<(NodeId, NodeId, PathWeight, u32)> = sub_index
        .candidates(&c_region)
        .into_iter()
        .filter_map(|idx| {
            let e = &entries[idx as usize];
            let (a, b) = (coord_of(e.tail), coord_of(e.head));
            segment_overlaps_rect(a, b, &crect)
                .then_some((e.tail, e.head, e.weight, idx))
        })
        .collect();
    let sg = SubGraph::new(edges);
    let region_key = (grid_up.level, c_region.cx, c_region.cy);

    let mut out = Vec::new();
    for dir in [SearchDir::Forward, SearchDir::Backward] {
        let spt = sg.dijkstra(u, dir, k);
        let mut targets: Vec<u32> = spt.dist.keys().copied().filter(|&v| v != u.0).collect();
        targets.sort_unstable();
        for v in targets {
            let chain = spt.chain(v);
            let interior = &chain[1..chain.len() - 1];
            let ru = cores.rank[u.index()];
            let rv = cores.rank[v as usize];
            let max_int_rank = interior.iter().map(|&(w, _)| cores.rank[w as usize]).max();
            let max_int_level =
                interior.iter().map(|&(w, _)| cores.level[w as usize]).max();
            let lvl_edge =
                ru < rv && max_int_rank.map_or(true, |r| r < ru);
            let conn = cores.level[u.index()] >= i
                && cores.level[v as usize] >= i
                && max_int_level.map_or(true, |l| l < i);
            if !lvl_edge && !conn {
                continue;
            }
            let kind = if lvl_edge {
                ShortcutKind::LevelEdge
            } else {
                ShortcutKind::Connectivity
            };
            out.push(candidate_from_chain(
                &sg, &spt, grids, u, NodeId(v), &chain, kind, region_key, k, None,
            ));
        }
    }
    out
}

/// Elevating-edge candidates from one low node: over the level-`i` edges in
/// the surrounding 5x5 region of the level-`i` grid, plus the node's own
/// edges to high nodes, each tree branch leaving the region contributes a
/// shortcut to the first node at level `i` or above on it.
#[allow(clippy::too_many_arguments)]
fn elevating_candidates(
    entries: &[EdgeEntry],
    lev: &[u32],
    lev_index: &crate::arterial::EdgeIndex,
    incident: &HashMap<u32, Vec<u32>>,
    grid_i: &UniformGrid,
    grids: &GridHierarchy,
    cores: &CoreAssignment,
    u: NodeId,
    i: u32,
    k: u8,
    coord_of: &impl Fn(NodeId) -> Coord,
    skipped: &std::sync::atomic::AtomicUsize,
) -> Vec<Candidate> {
    let _ = lev;
    let cell = grid_i.cell_at(coord_of(u));
    let c_region = grid_i.region_5x5_around_cell(cell);
    let crect = grid_i.rect_of(&c_region);
    let mut ids: Vec<u32> = lev_index
        .candidates(&c_region)
        .into_iter()
        .filter(|&idx| {
            let e = &entries[idx as usize];
            segment_overlaps_rect(coord_of(e.tail), coord_of(e.head), &crect)
        })
        .collect();
    for &idx in incident.get(&u.0).map(Vec::as_slice).unwrap_or(&[]) {
        let e = &entries[idx as usize];
        let other = if e.tail == u { e.head } else { e.tail };
        if cores.level[other.index()] >= i {
            ids.push(idx);
        }
    }
    ids.sort_unstable();
    ids.dedup();
    let edges: Vec<(NodeId, NodeId, PathWeight, u32)> = ids
        .into_iter()
        .map(|idx| {
            let e = &entries[idx as usize];
            (e.tail, e.head, e.weight, idx)
        })
        .collect();
    let sg = SubGraph::new(edges);
    let region_key = (grid_i.level, c_region.cx, c_region.cy);

    let mut out = Vec::new();
    for dir in [SearchDir::Forward, SearchDir::Backward] {
        let spt = sg.dijkstra(u, dir, k);
        // branches leaving the region: any settled node outside the rect
        let mut best: BTreeMap<u32, PathWeight> = BTreeMap::new();
        let mut outside: Vec<u32> = spt
            .dist
            .keys()
            .copied()
            .filter(|&v| v != u.0 && !crect.contains(coord_of(NodeId(v))))
            .collect();
        outside.sort_unstable();
        for x in outside {
            let chain = spt.chain(x);
            let first_high = chain[1..]
                .iter()
                .find(|&&(w, _)| cores.level[w as usize] >= i)
                .map(|&(w, _)| w);
            let Some(vh) = first_high else {
                skipped.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                continue;
            };
            let w = spt.dist[&vh];
            let slot = best.entry(vh).or_insert(w);
            if w < *slot {
                *slot = w;
            }
        }
        for (vh, _) in best {
            let chain = spt.chain(vh);
            // association: strictly-below-(i-1) nodes point at their first
            // hop; level-(i-1) nodes point at the first higher-ranked node
            let prescribed = if cores.level[u.index()] + 1 < i {
                Some(NodeId(chain[1].0))
            } else {
                chain[1..chain.len() - 1]
                    .iter()
                    .find(|&&(w, _)| cores.rank[w as usize] > cores.rank[u.index()])
                    .map(|&(w, _)| NodeId(w))
            };
            out.push(candidate_from_chain(
                &sg,
                &spt,
                grids,
                u,
                NodeId(vh),
                &chain,
                ShortcutKind::Elevating,
                region_key,
                k,
                prescribed,
            ));
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn candidate_from_chain(
    sg: &SubGraph,
    spt: &SptResult,
    _grids: &GridHierarchy,
    u: NodeId,
    v: NodeId,
    chain: &[(u32, Option<u32>)],
    kind: ShortcutKind,
    region_key: (u32, u64, u64),
    _k: u8,
    prescribed_via: Option<NodeId>,
) -> Candidate {
    // chain runs root..v; travel order depends on the tree direction
    let mut nodes: Vec<NodeId> = chain.iter().map(|&(w, _)| NodeId(w)).collect();
    let mut insts: Vec<u32> = chain[1..]
        .iter()
        .map(|&(_, e)| sg.edges[e.unwrap() as usize].3)
        .collect();
    let mut prefix: Vec<PathWeight> = chain
        .iter()
        .map(|&(w, _)| spt.dist[&w])
        .collect();
    let total = spt.dist[&v.0];
    let (tail, head) = match spt.dir {
        SearchDir::Forward => (u, v),
        SearchDir::Backward => {
            nodes.reverse();
            insts.reverse();
            // prefix weights flip: distance from v along the travel direction
            prefix = prefix
                .iter()
                .rev()
                .map(|w| total.minus(w).expect("prefix within total"))
                .collect();
            (v, u)
        }
    };
    debug_assert_eq!(nodes.first(), Some(&tail));
    debug_assert_eq!(nodes.last(), Some(&head));
    Candidate {
        tail,
        head,
        weight: total,
        kind,
        region: region_key,
        path_nodes: nodes,
        path_insts: insts,
        path_prefix: prefix,
        prescribed_via,
    }
}

/// Per (tail, head) keep the lightest candidate; ties prefer level edges and
/// the first producer in deterministic order.
fn dedup_candidates(cands: impl Iterator<Item = Candidate>) -> Vec<Candidate> {
    let mut best: BTreeMap<(u32, u32), Candidate> = BTreeMap::new();
    for c in cands {
        let key = (c.tail.0, c.head.0);
        match best.entry(key) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let cur = e.get();
                let better = c.weight < cur.weight
                    || (c.weight == cur.weight
                        && c.kind == ShortcutKind::LevelEdge
                        && cur.kind != ShortcutKind::LevelEdge);
                if better {
                    e.insert(c);
                }
            }
        }
    }
    best.into_values().collect()
}

/// Resolves via associations and appends a candidate batch to the edge
/// table. Returns (level, connectivity, elevating) counts appended.
///
/// Every multi-edge shortcut ends up annotated with a node `w` and two edge
/// instances whose weights sum exactly to its own. Preference order:
/// the prescribed association (elevating edges), then interiors by
/// descending rank. When none of the interiors has both halves in the table
/// already, the halves are materialized recursively from the candidate's
/// own path, which always grounds out in single edges.
fn append_batch(
    entries: &mut Vec<EdgeEntry>,
    unpack: &mut Vec<UnpackInfo>,
    by_pair: &mut BTreeMap<(u32, u32), Vec<u32>>,
    cores: &CoreAssignment,
    batch: Vec<Candidate>,
    step: u32,
    report: &mut AhBuildReport,
) -> Result<(usize, usize, usize), AhError> {
    let mut counts = (0usize, 0usize, 0usize);
    for c in batch {
        let info = if c.path_insts.len() == 1 {
            UnpackInfo::Mirror(compress_mirror(unpack, c.path_insts[0]))
        } else {
            // interiors in association preference order: highest rank first
            let interiors: Vec<usize> = {
                let mut idxs: Vec<usize> = (1..c.path_nodes.len() - 1).collect();
                idxs.sort_by_key(|&p| {
                    std::cmp::Reverse(cores.rank[c.path_nodes[p].index()])
                });
                idxs
            };
            let preferred: Vec<usize> = match c.prescribed_via {
                Some(w) if w != c.head && w != c.tail => {
                    let pos = c.path_nodes.iter().position(|&x| x == w);
                    pos.into_iter().chain(interiors.iter().copied()).collect()
                }
                _ => interiors.clone(),
            };
            let mut found = None;
            for (attempt, &pos) in preferred.iter().enumerate() {
                let w = c.path_nodes[pos];
                let wl = c.path_prefix[pos];
                let Some(wr) = c.weight.minus(&wl) else { continue };
                let left = lookup_exact(entries, by_pair, c.tail, w, &wl);
                let right = lookup_exact(entries, by_pair, w, c.head, &wr);
                if let (Some(l), Some(r)) = (left, right) {
                    if attempt > 0 {
                        report.via_fallbacks += 1;
                    }
                    found = Some(UnpackInfo::TwoHop { via: w, left: l, right: r });
                    break;
                }
            }
            match found {
                Some(info) => info,
                None => {
                    // the preferred association with both halves materialized
                    let pos = *preferred.first().expect("multi-edge path has interiors");
                    let seg = Segment {
                        nodes: &c.path_nodes,
                        insts: &c.path_insts,
                        prefix: &c.path_prefix,
                    };
                    let left = materialize_segment(
                        entries, unpack, by_pair, cores, &seg, 0, pos, step, c.region, report,
                    );
                    let right = materialize_segment(
                        entries,
                        unpack,
                        by_pair,
                        cores,
                        &seg,
                        pos,
                        c.path_nodes.len() - 1,
                        step,
                        c.region,
                        report,
                    );
                    UnpackInfo::TwoHop { via: c.path_nodes[pos], left, right }
                }
            }
        };
        let idx = entries.len() as u32;
        entries.push(EdgeEntry {
            tail: c.tail,
            head: c.head,
            weight: c.weight,
            created_level: step as i32,
            kind: Some(c.kind),
            source_region: c.region,
        });
        unpack.push(info);
        by_pair.entry((c.tail.0, c.head.0)).or_default().push(idx);
        match c.kind {
            ShortcutKind::LevelEdge => counts.0 += 1,
            ShortcutKind::Connectivity => counts.1 += 1,
            ShortcutKind::Elevating => counts.2 += 1,
        }
    }
    Ok(counts)
}

struct Segment<'a> {
    nodes: &'a [NodeId],
    insts: &'a [u32],
    prefix: &'a [PathWeight],
}

/// Returns an instance representing the path segment `[a, b]` exactly,
/// creating a connectivity helper shortcut (recursively split at the
/// highest-ranked interior node) if the table has no matching instance.
#[allow(clippy::too_many_arguments)]
fn materialize_segment(
    entries: &mut Vec<EdgeEntry>,
    unpack: &mut Vec<UnpackInfo>,
    by_pair: &mut BTreeMap<(u32, u32), Vec<u32>>,
    cores: &CoreAssignment,
    seg: &Segment<'_>,
    a: usize,
    b: usize,
    step: u32,
    region: (u32, u64, u64),
    report: &mut AhBuildReport,
) -> u32 {
    debug_assert!(a < b);
    if b - a == 1 {
        return compress_mirror(unpack, seg.insts[a]);
    }
    let tail = seg.nodes[a];
    let head = seg.nodes[b];
    let weight = seg.prefix[b]
        .minus(&seg.prefix[a])
        .expect("segment weight within path weight");
    if let Some(idx) = lookup_exact(entries, by_pair, tail, head, &weight) {
        return idx;
    }
    let pos = (a + 1..b)
        .max_by_key(|&p| cores.rank[seg.nodes[p].index()])
        .expect("segment of length >= 2 has an interior");
    let left = materialize_segment(
        entries, unpack, by_pair, cores, seg, a, pos, step, region, report,
    );
    let right = materialize_segment(
        entries, unpack, by_pair, cores, seg, pos, b, step, region, report,
    );
    let idx = entries.len() as u32;
    entries.push(EdgeEntry {
        tail,
        head,
        weight,
        created_level: step as i32,
        kind: Some(ShortcutKind::Connectivity),
        source_region: region,
    });
    unpack.push(UnpackInfo::TwoHop { via: seg.nodes[pos], left, right });
    by_pair.entry((tail.0, head.0)).or_default().push(idx);
    report.materialized_helpers += 1;
    idx
}

/// Follows mirror chains so unpacking is a single redirect.
fn compress_mirror(unpack: &[UnpackInfo], idx: u32) -> u32 {
    match unpack[idx as usize] {
        UnpackInfo::Mirror(child) => compress_mirror(unpack, child),
        _ => idx,
    }
}

fn lookup_exact(
    entries: &[EdgeEntry],
    by_pair: &BTreeMap<(u32, u32), Vec<u32>>,
    a: NodeId,
    b: NodeId,
    weight: &PathWeight,
) -> Option<u32> {
    by_pair
        .get(&(a.0, b.0))?
        .iter()
        .copied()
        .find(|&idx| entries[idx as usize].weight == *weight)
}

/// Composes the three phases into a ready-to-query hierarchy.
pub fn build_ah(
    net: &RoadNetwork,
    grids: &GridHierarchy,
    seed: u64,
) -> Result<(AhHierarchy, AhBuildReport), AhError> {
    let started = Instant::now();
    let mut report = AhBuildReport::default();
    let selection = select_cores(net, grids);
    report.alive_trace = selection.alive_trace.clone();
    let cores = rank_and_downgrade(&selection, seed);
    let hier = build_shortcuts(net, grids, cores, seed, &mut report)?;
    report.build_seconds = started.elapsed().as_secs_f64();
    Ok((hier, report))
}
