//! Exact shortest-path and distance queries on road networks through
//! hierarchical indices.
//!
//! The crate builds two indices over a directed, geo-embedded road network:
//!
//! - [`fc::FcHierarchy`]: a level-per-node hierarchy with distance shortcuts,
//!   queried by a level- and proximity-constrained bidirectional search.
//!   Exact but expensive to build; intended for small networks.
//! - [`ah::AhHierarchy`]: a ranked hierarchy built incrementally through
//!   graph reductions, with two-hop-annotated shortcuts that support exact
//!   distance queries and O(k) shortest-path reconstruction.
//!
//! Supporting machinery: DIMACS ingestion and weight perturbation
//! ([`road_graph`]), the nested grid geometry ([`grid`]), local shortest
//! paths and the arterial-dimension profiler ([`arterial`]), reference
//! Dijkstra oracles ([`oracle`]), a query benchmark harness ([`bench`]) and
//! binary snapshots ([`snapshot`]).
//!
//! See the `examples/` directory for one runnable program per capability,
//! and the `arterial` binary for the command-line interface.

pub mod arterial;
pub mod bench;
pub mod cli;
pub mod fc;
pub mod geom;
pub mod grid;
pub mod oracle;
pub mod road_graph;
pub mod search;
pub mod snapshot;
pub mod synth;
pub mod weight;

pub mod ah;

pub use road_graph::{EdgeRecord, NodeId, RoadNetwork};
pub use weight::{Nuance, PathWeight};
