//! Distance and shortest-path queries over the built hierarchy.

use std::cell::Cell;

use crate::road_graph::NodeId;
use crate::search::{bidirectional_search, BidiResult, Candidate, Termination};
use crate::weight::PathWeight;

use super::AhHierarchy;

/// How elevating edges interact with the rank/proximity relaxation at query
/// time.
///
/// `Union` relaxes elevating edges in addition to the rank- and
/// proximity-filtered edges, which keeps the search exact regardless of how
/// completely the elevating edges cover a node's escape routes. `Strict`
/// follows only the elevating edges of a below-target-level node that has
/// any, as the narrower published traversal strategy describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryMode {
    Union,
    Strict,
}

/// Query counters.
#[derive(Debug, Clone, Copy)]
pub struct AhStats {
    pub distance: Option<PathWeight>,
    pub settled: u64,
    pub relaxed: u64,
    pub max_level_touched: u32,
    pub elevations_taken: u64,
}

impl AhHierarchy {
    /// Exact distance from `s` to `t`.
    pub fn distance(&self, s: NodeId, t: NodeId) -> Option<PathWeight> {
        self.run_query(s, t).0.distance
    }

    /// Same traversal with counters.
    pub fn visit_stats(&self, s: NodeId, t: NodeId) -> AhStats {
        let (res, elevations, max_level) = self.run_query(s, t);
        AhStats {
            distance: res.distance,
            settled: res.settled,
            relaxed: res.relaxed,
            max_level_touched: max_level,
            elevations_taken: elevations,
        }
    }

    /// Exact shortest path: the distance query's hierarchy path with every
    /// shortcut recursively replaced by its two-hop expansion. Returns the
    /// weight, the node sequence and the number of replacement steps.
    pub fn shortest_path(&self, s: NodeId, t: NodeId) -> Option<(PathWeight, Vec<NodeId>, u64)> {
        let (res, _, _) = self.run_query(s, t);
        let distance = res.distance?;
        let edge_ids = res.path_edge_ids(s, t)?;
        let mut nodes = vec![s];
        let mut substitutions = 0u64;
        for idx in edge_ids {
            self.unpack_edge(idx, &mut nodes, &mut substitutions);
        }
        Some((distance, nodes, substitutions))
    }

    /// The coarsest grid level at which no 3x3-cell block covers both nodes
    /// (0 when they are co-covered everywhere).
    pub fn separation_level(&self, s: NodeId, t: NodeId) -> u32 {
        for level in (1..=self.h).rev() {
            if !self.grids.same_3x3_region(s, t, level) {
                return level;
            }
        }
        0
    }

    fn run_query(&self, s: NodeId, t: NodeId) -> (BidiResult, u64, u32) {
        let j = self.separation_level(s, t);
        let elevations = Cell::new(0u64);
        let max_level = Cell::new(0u32);

        let expand = |u: NodeId,
                      anchor: NodeId,
                      plain: &Vec<Vec<u32>>,
                      elevating: &Vec<Vec<u32>>,
                      out: &mut Vec<Candidate>| {
            max_level.set(max_level.get().max(self.cores.level[u.index()]));
            let low = self.cores.level[u.index()] < j;
            let mut took_elevating = false;
            if low {
                for &idx in &elevating[u.index()] {
                    let e = &self.edges[idx as usize];
                    let head = if e.tail == u { e.head } else { e.tail };
                    if self.cores.level[head.index()] <= j {
                        took_elevating = true;
                        elevations.set(elevations.get() + 1);
                        out.push(Candidate { head, edge_weight: e.weight, edge_id: idx });
                    }
                }
            }
            let use_plain = match self.query_mode {
                QueryMode::Union => true,
                QueryMode::Strict => !took_elevating,
            };
            if use_plain {
                for &idx in &plain[u.index()] {
                    let e = &self.edges[idx as usize];
                    let head = if e.tail == u { e.head } else { e.tail };
                    let lvl = self.cores.level[head.index()];
                    if lvl < self.h && !self.grids.same_3x3_region(head, anchor, lvl + 1) {
                        continue;
                    }
                    out.push(Candidate { head, edge_weight: e.weight, edge_id: idx });
                }
            }
        };

        let res = bidirectional_search(
            self.k,
            s,
            t,
            Termination::PerSide,
            |u, out| expand(u, s, &self.fwd_plain, &self.fwd_elevating, out),
            |u, out| expand(u, t, &self.bwd_plain, &self.bwd_elevating, out),
        );
        (res, elevations.get(), max_level.get())
    }
}
