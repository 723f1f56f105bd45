//! The first-cut index: arterial-edge level assignment, distance shortcuts
//! and the level- plus proximity-constrained bidirectional query.
//!
//! Every edge gets the highest grid level at which it is an arterial edge of
//! some 4x4 region (0 if none); a node's level is the maximum level of its
//! incident edges. A shortcut `(u, v)` exists exactly when the shortest path
//! from `u` to `v` passes only through nodes at levels below both endpoints,
//! and carries that distance. Preprocessing is quadratic-ish by design; the
//! builder refuses networks above a configurable node cap.

use std::collections::BinaryHeap;
use std::collections::HashMap;

use rayon::prelude::*;

use crate::arterial::{arterial_edges, network_region_view, EdgeIndex};
use crate::grid::GridHierarchy;
use crate::road_graph::{GraphError, NodeId, RoadNetwork};
use crate::weight::PathWeight;

#[derive(Debug, thiserror::Error)]
pub enum FcError {
    #[error(
        "network has {n} nodes, above the first-cut cap of {cap}; \
         build the scalable index instead"
    )]
    TooLarge { n: usize, cap: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Node and edge levels.
#[derive(Debug, Clone)]
pub struct LevelAssignment {
    pub node_level: Vec<u32>,
    pub edge_level: Vec<u32>,
}

/// A distance shortcut.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FcShortcut {
    pub tail: NodeId,
    pub head: NodeId,
    pub weight: PathWeight,
}

/// Default node cap for the first-cut builder.
pub const FC_DEFAULT_NODE_CAP: usize = 50_000;

/// The built first-cut hierarchy: levels, shortcuts and level-pruned
/// adjacency in both directions.
pub struct FcHierarchy {
    levels: LevelAssignment,
    shortcuts: Vec<FcShortcut>,
    grids: GridHierarchy,
    k: u8,
    h: u32,
    fwd: Vec<Vec<(NodeId, PathWeight)>>,
    bwd: Vec<Vec<(NodeId, PathWeight)>>,
}

/// Query counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FcStats {
    pub distance: Option<PathWeight>,
    pub settled: u64,
    pub relaxed: u64,
}

pub fn build_fc(net: &RoadNetwork, grids: &GridHierarchy) -> Result<FcHierarchy, FcError> {
    build_fc_with_cap(net, grids, FC_DEFAULT_NODE_CAP)
}

pub fn build_fc_with_cap(
    net: &RoadNetwork,
    grids: &GridHierarchy,
    cap: usize,
) -> Result<FcHierarchy, FcError> {
    if net.node_count() > cap {
        return Err(FcError::TooLarge { n: net.node_count(), cap });
    }
    let levels = assign_levels(net, grids);
    let shortcuts = build_shortcuts(net, &levels.node_level);
    Ok(assemble(net, grids.clone(), levels, shortcuts))
}

/// Edge level = highest grid level at which the edge is arterial for some
/// non-empty 4x4 region; node level = max incident edge level.
fn assign_levels(net: &RoadNetwork, grids: &GridHierarchy) -> LevelAssignment {
    let coord_of = |v: NodeId| grids.node_coord(v);
    let mut edge_level = vec![0u32; net.edge_count()];
    for level in 1..=grids.h() {
        let grid = grids.grid(level);
        let occupied = grids.occupied_cells(level);
        let regions = grid.non_empty_regions_4x4(&occupied);
        let index = EdgeIndex::build(
            &grid,
            net.edges()
                .iter()
                .enumerate()
                .map(|(i, e)| (i as u32, coord_of(e.tail), coord_of(e.head))),
        );
        let per_region: Vec<Vec<(NodeId, NodeId)>> = regions
            .par_iter()
            .map(|region| {
                let view = network_region_view(net, &grid, &index, region, &coord_of);
                arterial_edges(&grid, region, &view, net.nuance_k(), &coord_of)
                    .into_iter()
                    .collect()
            })
            .collect();
        for pairs in per_region {
            for (a, b) in pairs {
                if let Some(idx) = edge_index_of(net, a, b) {
                    edge_level[idx as usize] = edge_level[idx as usize].max(level);
                }
            }
        }
    }
    let mut node_level = vec![0u32; net.node_count()];
    for (idx, e) in net.edges().iter().enumerate() {
        let l = edge_level[idx];
        node_level[e.tail.index()] = node_level[e.tail.index()].max(l);
        node_level[e.head.index()] = node_level[e.head.index()].max(l);
    }
    LevelAssignment { node_level, edge_level }
}

fn edge_index_of(net: &RoadNetwork, a: NodeId, b: NodeId) -> Option<u32> {
    net.out_edge_ids(a)
        .iter()
        .copied()
        .find(|&i| net.edge(i).head == b)
}

/// Materializes the declarative shortcut set: one shortest-path tree per
/// node, tracking the maximum interior level along each tree path, emitting
/// `(u, v)` whenever that maximum stays below both endpoint levels. The
/// sweep from `u` stops once no queued candidate path has interior levels
/// below `level(u)` (no further target can qualify).
fn build_shortcuts(net: &RoadNetwork, node_level: &[u32]) -> Vec<FcShortcut> {
    let per_node: Vec<Vec<FcShortcut>> = net
        .nodes()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&u| shortcuts_from(net, node_level, u))
        .collect();
    per_node.into_iter().flatten().collect()
}

/// Interior-level mark: `None` means the tree path is a single edge.
type Interior = Option<u32>;

fn shortcuts_from(net: &RoadNetwork, node_level: &[u32], u: NodeId) -> Vec<FcShortcut> {
    let lu = node_level[u.index()];
    let n = net.node_count();
    let mut dist: Vec<Option<PathWeight>> = vec![None; n];
    let mut done = vec![false; n];
    // entries carry the candidate interior mark; ties break on node id
    let mut heap: BinaryHeap<std::cmp::Reverse<(PathWeight, u32, u64)>> = BinaryHeap::new();
    let zero = PathWeight::zero(net.nuance_k());
    dist[u.index()] = Some(zero);
    heap.push(std::cmp::Reverse((zero, u.0, encode_interior(None))));
    let mut alive_small: i64 = 1;

    let mut out = Vec::new();
    while let Some(std::cmp::Reverse((w, v, enc))) = heap.pop() {
        if interior_below(decode_interior(enc), lu) {
            alive_small -= 1;
        }
        let vi = v as usize;
        if done[vi] || dist[vi].map(|d| d < w).unwrap_or(true) {
            if alive_small == 0 {
                break;
            }
            continue;
        }
        done[vi] = true;
        let m = decode_interior(enc);

        if v != u.0 {
            let lv = node_level[vi];
            if let Some(maxlvl) = m {
                if maxlvl < lu.min(lv) {
                    out.push(FcShortcut { tail: u, head: NodeId(v), weight: w });
                }
            }
        }

        for &eid in net.out_edge_ids(NodeId(v)) {
            let e = net.edge(eid);
            let xi = e.head.index();
            if done[xi] {
                continue;
            }
            let nw = w.plus_edge(e.length, &e.nuance);
            if dist[xi].map(|d| nw < d).unwrap_or(true) {
                dist[xi] = Some(nw);
                let nm = if v == u.0 {
                    None
                } else {
                    Some(m.map_or(node_level[vi], |prev| prev.max(node_level[vi])))
                };
                if interior_below(nm, lu) {
                    alive_small += 1;
                }
                heap.push(std::cmp::Reverse((nw, e.head.0, encode_interior(nm))));
            }
        }
        if alive_small == 0 {
            break;
        }
    }
    out.sort_by_key(|s| (s.tail, s.head));
    out
}

fn encode_interior(m: Interior) -> u64 {
    match m {
        None => 0,
        Some(l) => l as u64 + 1,
    }
}

fn decode_interior(enc: u64) -> Interior {
    if enc == 0 {
        None
    } else {
        Some((enc - 1) as u32)
    }
}

/// A path with this interior mark can still produce qualifying targets.
fn interior_below(m: Interior, lu: u32) -> bool {
    match m {
        None => true,
        Some(l) => l < lu,
    }
}

fn assemble(
    net: &RoadNetwork,
    grids: GridHierarchy,
    levels: LevelAssignment,
    shortcuts: Vec<FcShortcut>,
) -> FcHierarchy {
    let n = net.node_count();
    let h = grids.h();
    let mut fwd: Vec<HashMap<u32, PathWeight>> = vec![HashMap::new(); n];
    let mut bwd: Vec<HashMap<u32, PathWeight>> = vec![HashMap::new(); n];
    {
        let mut add = |tail: NodeId, head: NodeId, w: PathWeight| {
            let lt = levels.node_level[tail.index()];
            let lh = levels.node_level[head.index()];
            // level constraint pruned at build time, in both travel directions
            if lh >= lt {
                let e = fwd[tail.index()].entry(head.0).or_insert(w);
                if w < *e {
                    *e = w;
                }
            }
            if lt >= lh {
                let e = bwd[head.index()].entry(tail.0).or_insert(w);
                if w < *e {
                    *e = w;
                }
            }
        };
        for e in net.edges() {
            let w = PathWeight::from_edge(e.length, &e.nuance, net.nuance_k());
            add(e.tail, e.head, w);
        }
        for s in &shortcuts {
            add(s.tail, s.head, s.weight);
        }
    }
    let finish = |adj: Vec<HashMap<u32, PathWeight>>| -> Vec<Vec<(NodeId, PathWeight)>> {
        adj.into_iter()
            .map(|m| {
                let mut v: Vec<(NodeId, PathWeight)> =
                    m.into_iter().map(|(n, w)| (NodeId(n), w)).collect();
                v.sort_by_key(|&(n, _)| n);
                v
            })
            .collect()
    };
    FcHierarchy {
        levels,
        shortcuts,
        grids,
        k: net.nuance_k(),
        h,
        fwd: finish(fwd),
        bwd: finish(bwd),
    }
}

impl FcHierarchy {
    pub fn levels(&self) -> &LevelAssignment {
        &self.levels
    }

    pub fn shortcuts(&self) -> &[FcShortcut] {
        &self.shortcuts
    }

    pub fn h(&self) -> u32 {
        self.h
    }

    pub fn node_level(&self, v: NodeId) -> u32 {
        self.levels.node_level[v.index()]
    }

    pub fn grids(&self) -> &GridHierarchy {
        &self.grids
    }

    pub(crate) fn from_raw_parts(
        levels: LevelAssignment,
        shortcuts: Vec<FcShortcut>,
        grids: GridHierarchy,
        net: &RoadNetwork,
    ) -> FcHierarchy {
        assemble(net, grids, levels, shortcuts)
    }

    /// Exact distance from `s` to `t`.
    pub fn distance(&self, s: NodeId, t: NodeId) -> Option<PathWeight> {
        self.query(s, t).distance
    }

    /// Same traversal with counters.
    pub fn visit_stats(&self, s: NodeId, t: NodeId) -> FcStats {
        let r = self.query(s, t);
        FcStats { distance: r.distance, settled: r.settled, relaxed: r.relaxed }
    }

    fn query(&self, s: NodeId, t: NodeId) -> crate::search::BidiResult {
        let proximity_ok = |v: NodeId, anchor: NodeId| -> bool {
            let lvl = self.levels.node_level[v.index()];
            if lvl >= self.h {
                return true;
            }
            self.grids.same_3x3_region(v, anchor, lvl + 1)
        };
        crate::search::bidirectional_search(
            self.k,
            s,
            t,
            crate::search::Termination::PerSide,
            |u, out| {
                for &(v, w) in &self.fwd[u.index()] {
                    if proximity_ok(v, s) {
                        out.push(crate::search::Candidate { head: v, edge_weight: w, edge_id: 0 });
                    }
                }
            },
            |u, out| {
                for &(v, w) in &self.bwd[u.index()] {
                    if proximity_ok(v, t) {
                        out.push(crate::search::Candidate { head: v, edge_weight: w, edge_id: 0 });
                    }
                }
            },
        )
    }

    /// Query that also reports which nodes each side settled, for traversal
    /// trace assertions.
    pub fn query_trace(&self, s: NodeId, t: NodeId) -> FcTrace {
        let mut fwd_settled = Vec::new();
        let mut bwd_settled = Vec::new();
        let proximity_ok = |v: NodeId, anchor: NodeId| -> bool {
            let lvl = self.levels.node_level[v.index()];
            if lvl >= self.h {
                return true;
            }
            self.grids.same_3x3_region(v, anchor, lvl + 1)
        };
        let r = crate::search::bidirectional_search(
            self.k,
            s,
            t,
            crate::search::Termination::PerSide,
            |u, out| {
                fwd_settled.push(u);
                for &(v, w) in &self.fwd[u.index()] {
                    if proximity_ok(v, s) {
                        out.push(crate::search::Candidate { head: v, edge_weight: w, edge_id: 0 });
                    }
                }
            },
            |u, out| {
                bwd_settled.push(u);
                for &(v, w) in &self.bwd[u.index()] {
                    if proximity_ok(v, t) {
                        out.push(crate::search::Candidate { head: v, edge_weight: w, edge_id: 0 });
                    }
                }
            },
        );
        FcTrace { distance: r.distance, fwd_settled, bwd_settled }
    }
}

/// Settled-node trace of one query.
pub struct FcTrace {
    pub distance: Option<PathWeight>,
    pub fwd_settled: Vec<NodeId>,
    pub bwd_settled: Vec<NodeId>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Coord;
    use crate::oracle;
    use crate::road_graph::perturb;
    use crate::synth;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn build(net: &RoadNetwork) -> FcHierarchy {
        let grids = GridHierarchy::build(net).unwrap();
        build_fc(net, &grids).unwrap()
    }

    #[test]
    fn three_node_path_gets_the_forced_shortcut() {
        // when the middle node sits at the lowest level, the endpoints are
        // bridged by one shortcut whose length is the sum of the two edges
        let coords = vec![
            Coord::new(0.0, 0.0),
            Coord::new(8.0, 0.0),
            Coord::new(16.0, 0.0),
        ];
        let net = RoadNetwork::from_parts(
            coords,
            vec![(0, 1, 3), (1, 0, 3), (1, 2, 4), (2, 1, 4)],
        )
        .unwrap();
        let fc = build(&net);
        let lvl = &fc.levels().node_level;
        if lvl[1] < lvl[0].min(lvl[2]) {
            assert!(fc
                .shortcuts()
                .iter()
                .any(|s| s.tail == NodeId(0) && s.head == NodeId(2) && s.weight.length == 7));
            assert!(fc
                .shortcuts()
                .iter()
                .any(|s| s.tail == NodeId(2) && s.head == NodeId(0) && s.weight.length == 7));
        }
        // distances are exact regardless of the level outcome
        assert_eq!(fc.distance(NodeId(0), NodeId(2)).unwrap().length, 7);
    }

    #[test]
    fn shortcut_lengths_equal_oracle_distances() {
        for seed in 0..4u64 {
            let net = perturb(&synth::random_geo_graph(14, 14, seed, 0.55, None), 2, seed)
                .unwrap();
            let fc = build(&net);
            for s in fc.shortcuts() {
                let d = oracle::dijkstra(&net, s.tail, Some(s.head)).distance.unwrap();
                assert_eq!(s.weight, d, "seed {seed} shortcut {} -> {}", s.tail, s.head);
            }
            // shortcut rule: interior of the true shortest path stays below
            // both endpoint levels
            for s in fc.shortcuts().iter().take(50) {
                let path = oracle::dijkstra(&net, s.tail, Some(s.head)).path.unwrap();
                let bound = fc.node_level(s.tail).min(fc.node_level(s.head));
                for v in &path[1..path.len() - 1] {
                    assert!(fc.node_level(*v) < bound);
                }
            }
        }
    }

    #[test]
    fn distances_match_oracle_exhaustively_on_small_graphs() {
        for seed in 0..6u64 {
            let net = perturb(&synth::small_random_network(40, seed), 2, seed).unwrap();
            let fc = build(&net);
            let matrix = oracle::all_pairs_small(&net, None).unwrap();
            for s in net.nodes() {
                for t in net.nodes() {
                    assert_eq!(
                        fc.distance(s, t),
                        matrix[s.index()][t.index()],
                        "seed {seed} {s} -> {t}"
                    );
                }
            }
        }
    }

    #[test]
    fn self_query_is_zero_with_one_settled_node() {
        let net = perturb(&synth::manhattan_grid(5, 5, 10, 2.0), 2, 9).unwrap();
        let fc = build(&net);
        let stats = fc.visit_stats(NodeId(7), NodeId(7));
        assert_eq!(stats.distance.unwrap().length, 0);
        assert_eq!(stats.settled, 1);
        assert_eq!(stats.relaxed, 0);
    }

    #[test]
    fn sampled_queries_match_oracle_on_a_bigger_network() {
        let net = perturb(&synth::random_geo_graph(18, 18, 77, 0.55, None), 2, 77).unwrap();
        let fc = build(&net);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..400 {
            let s = NodeId(rng.gen_range(0..net.node_count() as u32));
            let t = NodeId(rng.gen_range(0..net.node_count() as u32));
            let d = oracle::dijkstra(&net, s, Some(t)).distance;
            assert_eq!(fc.distance(s, t), d, "{s} -> {t}");
        }
    }

    #[test]
    fn forward_expansion_is_level_monotone() {
        // the pruned adjacency only ever climbs levels
        let net = perturb(&synth::random_geo_graph(10, 10, 5, 0.5, None), 2, 5).unwrap();
        let fc = build(&net);
        for u in net.nodes() {
            for &(v, _) in &fc.fwd[u.index()] {
                assert!(fc.node_level(v) >= fc.node_level(u));
            }
            for &(v, _) in &fc.bwd[u.index()] {
                assert!(fc.node_level(v) >= fc.node_level(u));
            }
        }
    }

    #[test]
    fn settled_nodes_stay_inside_the_proximity_regions() {
        let net = perturb(&synth::random_geo_graph(12, 12, 21, 0.5, None), 2, 21).unwrap();
        let fc = build(&net);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..60 {
            let s = NodeId(rng.gen_range(0..net.node_count() as u32));
            let t = NodeId(rng.gen_range(0..net.node_count() as u32));
            let trace = fc.query_trace(s, t);
            for &v in trace.fwd_settled.iter().filter(|&&v| v != s) {
                let lvl = fc.node_level(v);
                if lvl < fc.h() {
                    assert!(
                        fc.grids().same_3x3_region(v, s, lvl + 1),
                        "{v} settled outside the 5x5 region of {s} at level {lvl}"
                    );
                }
            }
        }
    }
}
