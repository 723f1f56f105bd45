//! Shared search machinery: a lazy-deletion priority queue keyed by path
//! weight and the bidirectional round-robin engine with theta termination
//! used by the constrained index queries and the bidirectional oracle.

use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};

use crate::road_graph::NodeId;
use crate::weight::PathWeight;

/// Min-heap over `(weight, state)` with deterministic ties by state id.
pub struct MinQueue<S: Ord + Copy> {
    heap: BinaryHeap<std::cmp::Reverse<(PathWeight, S)>>,
}

impl<S: Ord + Copy> MinQueue<S> {
    pub fn new() -> Self {
        MinQueue { heap: BinaryHeap::new() }
    }

    pub fn push(&mut self, weight: PathWeight, state: S) {
        self.heap.push(std::cmp::Reverse((weight, state)));
    }

    pub fn pop(&mut self) -> Option<(PathWeight, S)> {
        self.heap.pop().map(|std::cmp::Reverse(x)| x)
    }

    pub fn peek(&self) -> Option<&(PathWeight, S)> {
        self.heap.peek().map(|std::cmp::Reverse(x)| x)
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

impl<S: Ord + Copy> Default for MinQueue<S> {
    fn default() -> Self {
        Self::new()
    }
}

/// A relaxation candidate produced by an expansion callback.
#[derive(Debug, Clone, Copy)]
pub struct Candidate {
    pub head: NodeId,
    pub edge_weight: PathWeight,
    /// Caller-defined edge identifier, kept in the parent links.
    pub edge_id: u32,
}

/// Per-side state of the bidirectional engine.
struct Side {
    dist: HashMap<u32, PathWeight>,
    parent: HashMap<u32, (u32, u32)>,
    settled: HashMap<u32, PathWeight>,
    queue: MinQueue<u32>,
    stopped: bool,
}

impl Side {
    fn new(source: NodeId, zero: PathWeight) -> Self {
        let mut dist = HashMap::new();
        dist.insert(source.0, zero);
        let mut queue = MinQueue::new();
        queue.push(zero, source.0);
        Side {
            dist,
            parent: HashMap::new(),
            settled: HashMap::new(),
            queue,
            stopped: false,
        }
    }

    /// Smallest non-stale key currently queued.
    fn min_key(&mut self) -> Option<PathWeight> {
        while let Some(&(w, v)) = self.queue.peek() {
            if self.settled.contains_key(&v) || self.dist.get(&v).map(|d| *d < w).unwrap_or(true) {
                self.queue.pop();
            } else {
                return Some(w);
            }
        }
        None
    }
}

/// Termination rule for the bidirectional engine.
///
/// Constrained hierarchy searches must stop each side on its own once
/// `theta` is no more than the side's smallest queued key: the two searches
/// relax different edge subsets, so a path prefix found by one side says
/// nothing about the other side's remaining work. A plain unconstrained
/// search can instead stop both sides as soon as the frontier keys sum to at
/// least `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    PerSide,
    FrontierSum,
}

/// Result of a bidirectional run.
pub struct BidiResult {
    pub distance: Option<PathWeight>,
    pub meet: Option<NodeId>,
    pub settled: u64,
    pub relaxed: u64,
    fwd_parent: HashMap<u32, (u32, u32)>,
    bwd_parent: HashMap<u32, (u32, u32)>,
}

impl BidiResult {
    /// Edge ids of the forward half-path `s .. meet`, in path order, followed
    /// by the backward half `meet .. t`. Empty for `s == t` or no path.
    pub fn path_edge_ids(&self, s: NodeId, t: NodeId) -> Option<Vec<u32>> {
        let meet = self.meet?;
        let mut fwd = Vec::new();
        let mut v = meet.0;
        while v != s.0 {
            let &(p, e) = self.fwd_parent.get(&v)?;
            fwd.push(e);
            v = p;
        }
        fwd.reverse();
        let mut v = meet.0;
        while v != t.0 {
            let &(p, e) = self.bwd_parent.get(&v)?;
            fwd.push(e);
            v = p;
        }
        Some(fwd)
    }
}

/// Bidirectional Dijkstra skeleton: round-robin extraction starting with the
/// forward side, a best-meeting value `theta` updated at extraction time, and
/// per-side termination as soon as `theta` is no more than the side's
/// smallest queued key.
///
/// `expand_fwd` is handed each settled forward node and pushes the out-edge
/// candidates that pass the caller's constraints; `expand_bwd` does the same
/// over in-edges (candidates point from the settled node toward the source of
/// the inspected arc).
pub fn bidirectional_search(
    k: u8,
    s: NodeId,
    t: NodeId,
    termination: Termination,
    mut expand_fwd: impl FnMut(NodeId, &mut Vec<Candidate>),
    mut expand_bwd: impl FnMut(NodeId, &mut Vec<Candidate>),
) -> BidiResult {
    let zero = PathWeight::zero(k);
    if s == t {
        return BidiResult {
            distance: Some(zero),
            meet: Some(s),
            settled: 1,
            relaxed: 0,
            fwd_parent: HashMap::new(),
            bwd_parent: HashMap::new(),
        };
    }

    let mut fwd = Side::new(s, zero);
    let mut bwd = Side::new(t, zero);
    let mut theta: Option<PathWeight> = None;
    let mut meet: Option<NodeId> = None;
    let mut settled_count = 0u64;
    let mut relaxed_count = 0u64;
    let mut scratch = Vec::new();
    let mut forward_turn = true;

    loop {
        // check termination against the current theta
        let fwd_min = if fwd.stopped { None } else { fwd.min_key() };
        let bwd_min = if bwd.stopped { None } else { bwd.min_key() };
        if !fwd.stopped && fwd_min.is_none() {
            fwd.stopped = true;
        }
        if !bwd.stopped && bwd_min.is_none() {
            bwd.stopped = true;
        }
        if let Some(th) = theta {
            match termination {
                Termination::PerSide => {
                    if fwd_min.map(|m| th <= m).unwrap_or(false) {
                        fwd.stopped = true;
                    }
                    if bwd_min.map(|m| th <= m).unwrap_or(false) {
                        bwd.stopped = true;
                    }
                }
                Termination::FrontierSum => {
                    let done = match (fwd_min, bwd_min) {
                        (Some(a), Some(b)) => th <= a.plus(&b),
                        _ => true,
                    };
                    if done {
                        fwd.stopped = true;
                        bwd.stopped = true;
                    }
                }
            }
        }
        if fwd.stopped && bwd.stopped {
            break;
        }

        let take_forward = if fwd.stopped {
            false
        } else if bwd.stopped {
            true
        } else {
            forward_turn
        };
        forward_turn = !take_forward;

        let (this, other, is_fwd): (&mut Side, &mut Side, bool) = if take_forward {
            (&mut fwd, &mut bwd, true)
        } else {
            (&mut bwd, &mut fwd, false)
        };

        let (w, u) = loop {
            match this.queue.pop() {
                None => {
                    this.stopped = true;
                    break (zero, u32::MAX);
                }
                Some((w, v)) => {
                    if this.settled.contains_key(&v) {
                        continue;
                    }
                    if this.dist.get(&v).map(|d| *d < w).unwrap_or(true) {
                        continue;
                    }
                    break (w, v);
                }
            }
        };
        if u == u32::MAX {
            continue;
        }

        this.settled.insert(u, w);
        settled_count += 1;

        // theta update from the tentative distance on the opposite side
        if let Some(&dw) = other.dist.get(&u) {
            let total = w.plus(&dw);
            if theta.map(|th| total < th).unwrap_or(true) {
                theta = Some(total);
                meet = Some(NodeId(u));
            }
        }

        scratch.clear();
        if is_fwd {
            expand_fwd(NodeId(u), &mut scratch);
        } else {
            expand_bwd(NodeId(u), &mut scratch);
        }
        for cand in &scratch {
            relaxed_count += 1;
            let v = cand.head.0;
            if this.settled.contains_key(&v) {
                continue;
            }
            let nw = w.plus(&cand.edge_weight);
            let improved = match this.dist.entry(v) {
                Entry::Vacant(e) => {
                    e.insert(nw);
                    true
                }
                Entry::Occupied(mut e) => {
                    if nw < *e.get() {
                        e.insert(nw);
                        true
                    } else {
                        false
                    }
                }
            };
            if improved {
                this.parent.insert(v, (u, cand.edge_id));
                this.queue.push(nw, v);
            }
        }
    }

    BidiResult {
        distance: theta,
        meet,
        settled: settled_count,
        relaxed: relaxed_count,
        fwd_parent: fwd.parent,
        bwd_parent: bwd.parent,
    }
}
