//! The scalable ranked hierarchy: incremental core selection through graph
//! reductions, vertex-cover ranking with downgrading, three kinds of
//! annotated shortcuts, and exact distance / shortest-path queries.
//!
//! Construction runs in two passes over the grid levels. The first pass
//! selects *cores* level by level: arterial edges of the finest grid seed
//! the level-1 cores, and each subsequent round finds spanning paths in a
//! reduced graph whose designated bisector-crossing (*pseudo-arterial*)
//! edges promote their endpoints one level. The second pass creates the
//! query hierarchy: per-node shortest-path trees over the previous round's
//! edges yield rank-increasing *level edges* and *connectivity* shortcuts,
//! plus *elevating* edges that jump border nodes straight to high levels.
//! Every shortcut is annotated for exact two-hop unpacking, so shortest
//! paths are reconstructed in time linear in their edge count.

mod build;
mod query;

pub use build::{build_ah, rank_and_downgrade, select_cores, AhBuildReport, CoreSelection};
pub use query::{AhStats, QueryMode};

use std::collections::HashMap;

use crate::grid::GridHierarchy;
use crate::road_graph::NodeId;
use crate::weight::PathWeight;

#[derive(Debug, thiserror::Error)]
pub enum AhError {
    #[error(transparent)]
    Graph(#[from] crate::road_graph::GraphError),
    #[error(
        "no two-hop decomposition for shortcut {tail} -> {head} (level {level}): \
         construction invariant violated"
    )]
    ViaMissing { tail: NodeId, head: NodeId, level: u32 },
}

/// Final node levels and the strict total rank order.
#[derive(Debug, Clone)]
pub struct CoreAssignment {
    pub level: Vec<u32>,
    pub rank: Vec<u64>,
}

impl CoreAssignment {
    pub fn level_of(&self, v: NodeId) -> u32 {
        self.level[v.index()]
    }

    pub fn rank_of(&self, v: NodeId) -> u64 {
        self.rank[v.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ShortcutKind {
    LevelEdge,
    Connectivity,
    Elevating,
}

/// Public description of one hierarchy shortcut.
#[derive(Debug, Clone, Copy)]
pub struct AhShortcut {
    pub tail: NodeId,
    pub head: NodeId,
    pub weight: PathWeight,
    pub via: Option<NodeId>,
    pub kind: ShortcutKind,
    pub created_level: u32,
    /// The search region the shortcut was generated from
    /// (grid level, anchor cell).
    pub source_region: (u32, u64, u64),
}

/// One edge instance of the hierarchy: an original arc or a shortcut.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EdgeEntry {
    pub tail: NodeId,
    pub head: NodeId,
    pub weight: PathWeight,
    /// -1 for original arcs, otherwise the creation step.
    pub created_level: i32,
    pub kind: Option<ShortcutKind>,
    pub source_region: (u32, u64, u64),
}

/// How an edge instance expands during path reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum UnpackInfo {
    /// An arc of the road network.
    Original,
    /// Same endpoints and weight as an earlier instance.
    Mirror(u32),
    /// Replace with the two-hop path through `via`.
    TwoHop { via: NodeId, left: u32, right: u32 },
}

/// The built hierarchy.
pub struct AhHierarchy {
    pub(crate) cores: CoreAssignment,
    pub(crate) edges: Vec<EdgeEntry>,
    pub(crate) unpack: Vec<UnpackInfo>,
    /// Rank-increasing out/in instances per node, elevating edges split out.
    pub(crate) fwd_plain: Vec<Vec<u32>>,
    pub(crate) fwd_elevating: Vec<Vec<u32>>,
    pub(crate) bwd_plain: Vec<Vec<u32>>,
    pub(crate) bwd_elevating: Vec<Vec<u32>>,
    pub(crate) grids: GridHierarchy,
    pub(crate) k: u8,
    pub(crate) h: u32,
    pub(crate) original_edge_count: u32,
    pub(crate) build_seed: u64,
    pub(crate) query_mode: QueryMode,
}

impl AhHierarchy {
    pub fn cores(&self) -> &CoreAssignment {
        &self.cores
    }

    pub fn grids(&self) -> &GridHierarchy {
        &self.grids
    }

    pub fn h(&self) -> u32 {
        self.h
    }

    pub fn build_seed(&self) -> u64 {
        self.build_seed
    }

    pub fn level_of(&self, v: NodeId) -> u32 {
        self.cores.level[v.index()]
    }

    pub fn rank_of(&self, v: NodeId) -> u64 {
        self.cores.rank[v.index()]
    }

    pub fn query_mode(&self) -> QueryMode {
        self.query_mode
    }

    pub fn set_query_mode(&mut self, mode: QueryMode) {
        self.query_mode = mode;
    }

    pub fn shortcut_count(&self) -> usize {
        self.edges.len() - self.original_edge_count as usize
    }

    /// All shortcuts as public rows, in creation order.
    pub fn shortcuts(&self) -> impl Iterator<Item = AhShortcut> + '_ {
        self.edges
            .iter()
            .enumerate()
            .skip(self.original_edge_count as usize)
            .map(|(i, e)| AhShortcut {
                tail: e.tail,
                head: e.head,
                weight: e.weight,
                via: match self.unpack[i] {
                    UnpackInfo::TwoHop { via, .. } => Some(via),
                    _ => None,
                },
                kind: e.kind.expect("shortcut entries carry a kind"),
                created_level: e.created_level as u32,
                source_region: e.source_region,
            })
    }

    pub fn shortcut_counts_by_kind(&self) -> HashMap<ShortcutKind, usize> {
        let mut out = HashMap::new();
        for s in self.shortcuts() {
            *out.entry(s.kind).or_insert(0) += 1;
        }
        out
    }

    /// Per-level node counts (levels 0..=h).
    pub fn level_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0usize; self.h as usize + 1];
        for &l in &self.cores.level {
            hist[l as usize] += 1;
        }
        hist
    }

    /// Expands one edge instance into the original arcs it contracts,
    /// appending the interior and head nodes to `out` and counting each
    /// replacement step.
    pub(crate) fn unpack_edge(&self, idx: u32, out: &mut Vec<NodeId>, substitutions: &mut u64) {
        match self.unpack[idx as usize] {
            UnpackInfo::Original => out.push(self.edges[idx as usize].head),
            UnpackInfo::Mirror(child) => {
                *substitutions += 1;
                self.unpack_edge(child, out, substitutions);
            }
            UnpackInfo::TwoHop { left, right, .. } => {
                *substitutions += 1;
                self.unpack_edge(left, out, substitutions);
                self.unpack_edge(right, out, substitutions);
            }
        }
    }
}
