//! Deterministic synthetic road networks for tests, examples and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::Coord;
use crate::road_graph::RoadNetwork;

/// Rectangular Manhattan grid: `cols x rows` nodes with bidirectional arcs
/// between 4-neighbors, uniform arc length `weight`, nodes `spacing` apart.
pub fn manhattan_grid(cols: u32, rows: u32, weight: u64, spacing: f64) -> RoadNetwork {
    let id = |c: u32, r: u32| r * cols + c;
    let mut coords = Vec::with_capacity((cols * rows) as usize);
    for r in 0..rows {
        for c in 0..cols {
            coords.push(Coord::new(c as f64 * spacing, r as f64 * spacing));
        }
    }
    let mut arcs = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                arcs.push((id(c, r), id(c + 1, r), weight));
                arcs.push((id(c + 1, r), id(c, r), weight));
            }
            if r + 1 < rows {
                arcs.push((id(c, r), id(c, r + 1), weight));
                arcs.push((id(c, r + 1), id(c, r), weight));
            }
        }
    }
    RoadNetwork::from_parts(coords, arcs).expect("grid construction is well-formed")
}

/// Comb-shaped grid: all vertical column edges exist, horizontal edges exist
/// only on the given avenue rows. Node coordinates sit at odd multiples of
/// half the spacing so no node ever lies on a power-of-two grid line.
pub fn comb_grid(cols: u32, rows: u32, avenue_rows: &[u32], weight: u64, spacing: f64) -> RoadNetwork {
    let id = |c: u32, r: u32| r * cols + c;
    let mut coords = Vec::with_capacity((cols * rows) as usize);
    for r in 0..rows {
        for c in 0..cols {
            coords.push(Coord::new(
                (2 * c + 1) as f64 * spacing / 2.0,
                (2 * r + 1) as f64 * spacing / 2.0,
            ));
        }
    }
    let mut arcs = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if r + 1 < rows {
                arcs.push((id(c, r), id(c, r + 1), weight));
                arcs.push((id(c, r + 1), id(c, r), weight));
            }
            if c + 1 < cols && avenue_rows.contains(&r) {
                arcs.push((id(c, r), id(c + 1, r), weight));
                arcs.push((id(c + 1, r), id(c, r), weight));
            }
        }
    }
    RoadNetwork::from_parts(coords, arcs).expect("comb construction is well-formed")
}

/// Random connected degree-bounded geo-embedded network: a jittered grid
/// whose edge set is a random spanning tree plus a random fraction of the
/// remaining grid edges. Arc lengths are the rounded Euclidean distances
/// unless `uniform_weight` pins them to a constant (tie-heavy variant).
pub fn random_geo_graph(
    cols: u32,
    rows: u32,
    seed: u64,
    extra_edge_fraction: f64,
    uniform_weight: Option<u64>,
) -> RoadNetwork {
    assert!(cols >= 2 && rows >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spacing = 10.0;
    let id = |c: u32, r: u32| (r * cols + c) as usize;
    let n = (cols * rows) as usize;

    let mut coords = Vec::with_capacity(n);
    for r in 0..rows {
        for c in 0..cols {
            let jx = rng.gen_range(-0.3..0.3) * spacing;
            let jy = rng.gen_range(-0.3..0.3) * spacing;
            coords.push(Coord::new(c as f64 * spacing + jx, r as f64 * spacing + jy));
        }
    }

    let mut grid_edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                grid_edges.push((id(c, r), id(c + 1, r)));
            }
            if r + 1 < rows {
                grid_edges.push((id(c, r), id(c, r + 1)));
            }
        }
    }
    grid_edges.shuffle(&mut rng);

    // randomized Kruskal: a spanning tree first, then a sample of the rest
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    let mut chosen = Vec::new();
    let mut rest = Vec::new();
    for (a, b) in grid_edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            chosen.push((a, b));
        } else {
            rest.push((a, b));
        }
    }
    for (a, b) in rest {
        if rng.gen_bool(extra_edge_fraction) {
            chosen.push((a, b));
        }
    }

    let mut arcs = Vec::with_capacity(chosen.len() * 2);
    for (a, b) in chosen {
        let w = match uniform_weight {
            Some(w) => w,
            None => {
                let d = ((coords[a].x - coords[b].x).powi(2)
                    + (coords[a].y - coords[b].y).powi(2))
                .sqrt();
                (d.round() as u64).max(1)
            }
        };
        arcs.push((a as u32, b as u32, w));
        arcs.push((b as u32, a as u32, w));
    }
    RoadNetwork::from_parts(coords, arcs).expect("generator output is well-formed")
}

/// Small random connected network with at most `max_nodes` nodes, for
/// exhaustive oracle tests.
pub fn small_random_network(max_nodes: u32, seed: u64) -> RoadNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = rng.gen_range(2..=8u32);
    let rows = ((max_nodes / cols).max(2)).min(8);
    random_geo_graph(cols, rows, seed.wrapping_mul(31).wrapping_add(7), 0.5, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manhattan_grid_shape() {
        let net = manhattan_grid(4, 3, 10, 2.0);
        assert_eq!(net.node_count(), 12);
        // 2 * (3*3 + 4*2) directed arcs
        assert_eq!(net.edge_count(), 34);
        assert!(net.is_weakly_connected());
        assert_eq!(net.max_degree(), 8);
    }

    #[test]
    fn random_graphs_are_connected_and_degree_bounded() {
        for seed in 0..10 {
            let net = random_geo_graph(6, 6, seed, 0.5, None);
            assert!(net.is_weakly_connected(), "seed {seed}");
            // undirected degree bound 4 = arc degree bound 8
            assert!(net.max_degree() <= 8, "seed {seed}");
        }
    }

    #[test]
    fn comb_grid_has_horizontal_edges_only_on_avenues() {
        let net = comb_grid(6, 5, &[2], 10, 2.0);
        for e in net.edges() {
            let a = net.coord(e.tail);
            let b = net.coord(e.head);
            if a.y == b.y {
                assert_eq!(a.y, 5.0); // row 2 at spacing 2 => y = 5
            }
        }
        assert!(net.is_weakly_connected());
    }
}
