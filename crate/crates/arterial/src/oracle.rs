//! Reference Dijkstra and bidirectional Dijkstra plus an exhaustive
//! small-graph all-pairs oracle: the ground truth for correctness tests.

use std::collections::HashMap;

use crate::road_graph::{GraphError, NodeId, RoadNetwork};
use crate::search::{bidirectional_search, Candidate, MinQueue, Termination};
use crate::weight::PathWeight;

/// Outcome of a point-to-point search.
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub distance: Option<PathWeight>,
    pub path: Option<Vec<NodeId>>,
    pub settled: u64,
    pub relaxed: u64,
}

/// Single-source Dijkstra by path weight. With a target the search stops as
/// soon as the target settles; without one it sweeps the whole graph.
pub fn dijkstra(net: &RoadNetwork, s: NodeId, t: Option<NodeId>) -> SearchResult {
    let k = net.nuance_k();
    let zero = PathWeight::zero(k);
    if t == Some(s) {
        return SearchResult {
            distance: Some(zero),
            path: Some(vec![s]),
            settled: 1,
            relaxed: 0,
        };
    }

    let mut dist: HashMap<u32, PathWeight> = HashMap::new();
    let mut parent: HashMap<u32, u32> = HashMap::new();
    let mut settled: HashMap<u32, PathWeight> = HashMap::new();
    let mut queue = MinQueue::new();
    dist.insert(s.0, zero);
    queue.push(zero, s.0);
    let mut settled_count = 0u64;
    let mut relaxed_count = 0u64;

    while let Some((w, u)) = queue.pop() {
        if settled.contains_key(&u) || dist.get(&u).map(|d| *d < w).unwrap_or(true) {
            continue;
        }
        settled.insert(u, w);
        settled_count += 1;
        if t == Some(NodeId(u)) {
            break;
        }
        for &eid in net.out_edge_ids(NodeId(u)) {
            relaxed_count += 1;
            let e = net.edge(eid);
            let v = e.head.0;
            if settled.contains_key(&v) {
                continue;
            }
            let nw = w.plus_edge(e.length, &e.nuance);
            if dist.get(&v).map(|d| nw < *d).unwrap_or(true) {
                dist.insert(v, nw);
                parent.insert(v, u);
                queue.push(nw, v);
            }
        }
    }

    let (distance, path) = match t {
        Some(t) => match settled.get(&t.0) {
            Some(&d) => {
                let mut path = vec![t];
                let mut v = t.0;
                while v != s.0 {
                    v = parent[&v];
                    path.push(NodeId(v));
                }
                path.reverse();
                (Some(d), Some(path))
            }
            None => (None, None),
        },
        None => (None, None),
    };
    SearchResult { distance, path, settled: settled_count, relaxed: relaxed_count }
}

/// Full single-source sweep: settled distance per node.
pub fn dijkstra_sweep(net: &RoadNetwork, s: NodeId) -> Vec<Option<PathWeight>> {
    let k = net.nuance_k();
    let zero = PathWeight::zero(k);
    let n = net.node_count();
    let mut dist: Vec<Option<PathWeight>> = vec![None; n];
    let mut done = vec![false; n];
    let mut queue = MinQueue::new();
    dist[s.index()] = Some(zero);
    queue.push(zero, s.0);
    while let Some((w, u)) = queue.pop() {
        let ui = u as usize;
        if done[ui] || dist[ui].map(|d| d < w).unwrap_or(true) {
            continue;
        }
        done[ui] = true;
        for &eid in net.out_edge_ids(NodeId(u)) {
            let e = net.edge(eid);
            let vi = e.head.index();
            if done[vi] {
                continue;
            }
            let nw = w.plus_edge(e.length, &e.nuance);
            if dist[vi].map(|d| nw < d).unwrap_or(true) {
                dist[vi] = Some(nw);
                queue.push(nw, e.head.0);
            }
        }
    }
    dist
}

/// Plain bidirectional Dijkstra with the same round-robin and theta
/// termination conventions as the index queries; no constraints.
pub fn bidirectional_dijkstra(net: &RoadNetwork, s: NodeId, t: NodeId) -> SearchResult {
    let res = bidirectional_search(
        net.nuance_k(),
        s,
        t,
        Termination::FrontierSum,
        |u, out| {
            for &eid in net.out_edge_ids(u) {
                let e = net.edge(eid);
                out.push(Candidate {
                    head: e.head,
                    edge_weight: net.edge_weight(eid),
                    edge_id: eid,
                });
            }
        },
        |u, out| {
            for &eid in net.in_edge_ids(u) {
                let e = net.edge(eid);
                out.push(Candidate {
                    head: e.tail,
                    edge_weight: net.edge_weight(eid),
                    edge_id: eid,
                });
            }
        },
    );

    let path = res.path_edge_ids(s, t).map(|edges| {
        let mut nodes = vec![s];
        for eid in edges {
            nodes.push(net.edge(eid).head);
        }
        nodes
    });
    SearchResult {
        distance: res.distance,
        path,
        settled: res.settled,
        relaxed: res.relaxed,
    }
}

/// Exact all-pairs distance matrix via repeated Dijkstra; refuses networks
/// larger than `cap` nodes (default 64).
pub fn all_pairs_small(
    net: &RoadNetwork,
    cap: Option<usize>,
) -> Result<Vec<Vec<Option<PathWeight>>>, GraphError> {
    let cap = cap.unwrap_or(64);
    if net.node_count() > cap {
        return Err(GraphError::Validation(format!(
            "all-pairs oracle capped at {cap} nodes, network has {}",
            net.node_count()
        )));
    }
    Ok(net.nodes().map(|s| dijkstra_sweep(net, s)).collect())
}
