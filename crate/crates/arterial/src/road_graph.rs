//! Road-network data model, DIMACS ingestion and the weight-perturbation
//! scheme that makes local shortest paths unique.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::Coord;
use crate::weight::{Nuance, PathWeight, MAX_NUANCE_COMPONENTS};

/// Dense node index in `[0, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A directed arc with a positive integer length and an optional nuance
/// vector assigned by [`perturb`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeRecord {
    pub tail: NodeId,
    pub head: NodeId,
    pub length: u64,
    pub nuance: Nuance,
}

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("structural error: {0}")]
    Structural(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error(
        "perturbation range {tau_prime} does not fit an integer component; \
         increase the component count k (got k = {k})"
    )]
    PerturbOverflow { tau_prime: u128, k: u8 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Directed, geo-embedded road network with CSR adjacency in both directions.
///
/// Immutable after construction; parsing and perturbation build new values.
#[derive(Debug, Clone)]
pub struct RoadNetwork {
    coords: Vec<Coord>,
    edges: Vec<EdgeRecord>,
    out_start: Vec<u32>,
    out_edges: Vec<u32>,
    in_start: Vec<u32>,
    in_edges: Vec<u32>,
    nuance_k: u8,
    max_degree: u32,
    d_max: f64,
    d_min: f64,
    weakly_connected: bool,
    dropped_self_loops: u32,
    merged_parallel_arcs: u32,
}

impl RoadNetwork {
    /// Builds a network from raw parts, dropping self-loops and merging
    /// parallel arcs down to the minimum length.
    pub fn from_parts(
        coords: Vec<Coord>,
        arcs: Vec<(u32, u32, u64)>,
    ) -> Result<RoadNetwork, GraphError> {
        let nuanced = arcs
            .into_iter()
            .map(|(t, h, w)| (t, h, w, Nuance::ZERO))
            .collect();
        Self::from_parts_with_nuance(coords, nuanced, 0)
    }

    pub fn from_parts_with_nuance(
        coords: Vec<Coord>,
        arcs: Vec<(u32, u32, u64, Nuance)>,
        nuance_k: u8,
    ) -> Result<RoadNetwork, GraphError> {
        let n = coords.len();
        if nuance_k as usize > MAX_NUANCE_COMPONENTS {
            return Err(GraphError::Validation(format!(
                "nuance dimension {nuance_k} exceeds the supported maximum {MAX_NUANCE_COMPONENTS}"
            )));
        }
        for (i, c) in coords.iter().enumerate() {
            if !c.is_finite() {
                return Err(GraphError::Validation(format!(
                    "node {i} has a non-finite coordinate"
                )));
            }
        }

        let mut dropped_self_loops = 0u32;
        let mut merged_parallel_arcs = 0u32;
        let mut dedup: BTreeMap<(u32, u32), (u64, Nuance)> = BTreeMap::new();
        for (t, h, w, nu) in arcs {
            if t as usize >= n || h as usize >= n {
                return Err(GraphError::Structural(format!(
                    "arc ({t}, {h}) references a node outside [0, {n})"
                )));
            }
            if w == 0 {
                return Err(GraphError::Validation(format!(
                    "arc ({t}, {h}) has non-positive length"
                )));
            }
            if t == h {
                dropped_self_loops += 1;
                continue;
            }
            match dedup.entry((t, h)) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert((w, nu));
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    merged_parallel_arcs += 1;
                    if w < e.get().0 {
                        e.insert((w, nu));
                    }
                }
            }
        }

        let edges: Vec<EdgeRecord> = dedup
            .into_iter()
            .map(|((t, h), (w, nu))| EdgeRecord {
                tail: NodeId(t),
                head: NodeId(h),
                length: w,
                nuance: nu,
            })
            .collect();

        let mut out_deg = vec![0u32; n];
        let mut in_deg = vec![0u32; n];
        for e in &edges {
            out_deg[e.tail.index()] += 1;
            in_deg[e.head.index()] += 1;
        }
        let mut out_start = vec![0u32; n + 1];
        let mut in_start = vec![0u32; n + 1];
        for i in 0..n {
            out_start[i + 1] = out_start[i] + out_deg[i];
            in_start[i + 1] = in_start[i] + in_deg[i];
        }
        let mut out_edges = vec![0u32; edges.len()];
        let mut in_edges = vec![0u32; edges.len()];
        let mut out_pos = out_start.clone();
        let mut in_pos = in_start.clone();
        for (idx, e) in edges.iter().enumerate() {
            out_edges[out_pos[e.tail.index()] as usize] = idx as u32;
            out_pos[e.tail.index()] += 1;
            in_edges[in_pos[e.head.index()] as usize] = idx as u32;
            in_pos[e.head.index()] += 1;
        }

        let max_degree = (0..n)
            .map(|i| out_deg[i] + in_deg[i])
            .max()
            .unwrap_or(0);

        let (d_max, d_min) = extremal_linf(&coords);
        let weakly_connected = weakly_connected(n, &edges);

        Ok(RoadNetwork {
            coords,
            edges,
            out_start,
            out_edges,
            in_start,
            in_edges,
            nuance_k,
            max_degree,
            d_max,
            d_min,
            weakly_connected,
            dropped_self_loops,
            merged_parallel_arcs,
        })
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn coord(&self, v: NodeId) -> Coord {
        self.coords[v.index()]
    }

    #[inline]
    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    #[inline]
    pub fn edge(&self, idx: u32) -> &EdgeRecord {
        &self.edges[idx as usize]
    }

    #[inline]
    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.coords.len() as u32).map(NodeId)
    }

    /// Indices of arcs leaving `v`.
    pub fn out_edge_ids(&self, v: NodeId) -> &[u32] {
        let a = self.out_start[v.index()] as usize;
        let b = self.out_start[v.index() + 1] as usize;
        &self.out_edges[a..b]
    }

    /// Indices of arcs entering `v`.
    pub fn in_edge_ids(&self, v: NodeId) -> &[u32] {
        let a = self.in_start[v.index()] as usize;
        let b = self.in_start[v.index() + 1] as usize;
        &self.in_edges[a..b]
    }

    /// Looks up the arc `(u, v)` if present.
    pub fn find_arc(&self, u: NodeId, v: NodeId) -> Option<&EdgeRecord> {
        self.out_edge_ids(u)
            .iter()
            .map(|&i| &self.edges[i as usize])
            .find(|e| e.head == v)
    }

    #[inline]
    pub fn nuance_k(&self) -> u8 {
        self.nuance_k
    }

    #[inline]
    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    #[inline]
    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    #[inline]
    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    #[inline]
    pub fn is_weakly_connected(&self) -> bool {
        self.weakly_connected
    }

    #[inline]
    pub fn dropped_self_loops(&self) -> u32 {
        self.dropped_self_loops
    }

    #[inline]
    pub fn merged_parallel_arcs(&self) -> u32 {
        self.merged_parallel_arcs
    }

    /// Path weight of a single arc.
    #[inline]
    pub fn edge_weight(&self, idx: u32) -> PathWeight {
        let e = &self.edges[idx as usize];
        PathWeight::from_edge(e.length, &e.nuance, self.nuance_k)
    }

    /// Sums the weight of a node sequence, checking that every hop is an arc.
    pub fn path_weight(&self, path: &[NodeId]) -> Option<PathWeight> {
        let mut w = PathWeight::zero(self.nuance_k);
        for pair in path.windows(2) {
            let e = self.find_arc(pair[0], pair[1])?;
            w = w.plus_edge(e.length, &e.nuance);
        }
        Some(w)
    }
}

fn extremal_linf(coords: &[Coord]) -> (f64, f64) {
    if coords.len() < 2 {
        return (0.0, f64::INFINITY);
    }
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in coords {
        min_x = min_x.min(c.x);
        max_x = max_x.max(c.x);
        min_y = min_y.min(c.y);
        max_y = max_y.max(c.y);
    }
    let d_max = (max_x - min_x).max(max_y - min_y);
    let d_min = crate::geom::closest_pair_linf(coords).unwrap_or(f64::INFINITY);
    (d_max, d_min)
}

fn weakly_connected(n: usize, edges: &[EdgeRecord]) -> bool {
    if n == 0 {
        return true;
    }
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.tail.index()].push(e.head.index());
        adj[e.head.index()].push(e.tail.index());
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == n
}

// ---------------------------------------------------------------------------
// DIMACS 9th-Challenge ingestion
// ---------------------------------------------------------------------------

/// Parses a DIMACS `.gr` arc list plus its matching `.co` coordinate file.
///
/// DIMACS node ids are 1-based; internal ids are 0-based. Parallel arcs keep
/// the minimum length and self-loops are dropped.
pub fn parse_dimacs(
    gr: impl BufRead,
    co: impl BufRead,
) -> Result<RoadNetwork, GraphError> {
    let (n_gr, arcs) = parse_gr(gr)?;
    let (n_co, coords) = parse_co(co)?;
    if n_gr != n_co {
        return Err(GraphError::Structural(format!(
            "node-count mismatch between .gr ({n_gr}) and .co ({n_co})"
        )));
    }
    RoadNetwork::from_parts(coords, arcs)
}

fn parse_gr(reader: impl BufRead) -> Result<(usize, Vec<(u32, u32, u64)>), GraphError> {
    let mut n: Option<usize> = None;
    let mut m: Option<usize> = None;
    let mut arcs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        let mut it = line.split_whitespace();
        match it.next() {
            Some("p") => {
                if it.next() != Some("sp") {
                    return Err(err_at(lineno, "expected `p sp <n> <m>`"));
                }
                n = Some(parse_field(it.next(), lineno, "node count")?);
                m = Some(parse_field(it.next(), lineno, "arc count")?);
            }
            Some("a") => {
                let n = n.ok_or_else(|| err_at(lineno, "arc before `p sp` header"))?;
                let u: u64 = parse_field(it.next(), lineno, "arc tail")?;
                let v: u64 = parse_field(it.next(), lineno, "arc head")?;
                let w: i64 = parse_field(it.next(), lineno, "arc weight")?;
                if u == 0 || v == 0 || u as usize > n || v as usize > n {
                    return Err(err_at(lineno, format!("node id out of range [1, {n}]")));
                }
                if w <= 0 {
                    return Err(GraphError::Validation(format!(
                        "line {lineno}: non-positive arc weight {w}"
                    )));
                }
                arcs.push((u as u32 - 1, v as u32 - 1, w as u64));
            }
            Some(tok) => {
                return Err(err_at(lineno, format!("unknown record type `{tok}`")));
            }
            None => unreachable!(),
        }
    }
    let n = n.ok_or_else(|| GraphError::Structural("missing `p sp` header".into()))?;
    if let Some(m) = m {
        if arcs.len() != m {
            return Err(GraphError::Structural(format!(
                "header declares {m} arcs but the file contains {}",
                arcs.len()
            )));
        }
    }
    Ok((n, arcs))
}

fn parse_co(reader: impl BufRead) -> Result<(usize, Vec<Coord>), GraphError> {
    let mut n: Option<usize> = None;
    let mut coords: Vec<Option<Coord>> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        let mut it = line.split_whitespace();
        match it.next() {
            Some("p") => {
                // `p aux sp co <n>`
                let rest: Vec<&str> = it.collect();
                let count = rest
                    .last()
                    .ok_or_else(|| err_at(lineno, "truncated `p` header"))?;
                let count: usize = count
                    .parse()
                    .map_err(|_| err_at(lineno, "bad node count in `p` header"))?;
                n = Some(count);
                coords = vec![None; count];
            }
            Some("v") => {
                let n = n.ok_or_else(|| err_at(lineno, "`v` line before `p` header"))?;
                let id: u64 = parse_field(it.next(), lineno, "node id")?;
                let x: f64 = parse_field(it.next(), lineno, "x coordinate")?;
                let y: f64 = parse_field(it.next(), lineno, "y coordinate")?;
                if id == 0 || id as usize > n {
                    return Err(err_at(lineno, format!("node id out of range [1, {n}]")));
                }
                coords[id as usize - 1] = Some(Coord::new(x, y));
            }
            Some(tok) => {
                return Err(err_at(lineno, format!("unknown record type `{tok}`")));
            }
            None => unreachable!(),
        }
    }
    let n = n.ok_or_else(|| GraphError::Structural("missing `p` header in .co".into()))?;
    let mut out = Vec::with_capacity(n);
    for (i, c) in coords.into_iter().enumerate() {
        out.push(c.ok_or_else(|| {
            GraphError::Structural(format!("node {} has no coordinate line", i + 1))
        })?);
    }
    Ok((n, out))
}

fn err_at(line: usize, msg: impl Into<String>) -> GraphError {
    GraphError::Parse { line, msg: msg.into() }
}

fn parse_field<T: std::str::FromStr>(
    tok: Option<&str>,
    line: usize,
    what: &str,
) -> Result<T, GraphError> {
    tok.ok_or_else(|| err_at(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| err_at(line, format!("malformed {what}")))
}

/// Writes the network back out as a normalized DIMACS `.gr` arc list
/// (arcs sorted by tail then head, 1-based ids).
pub fn write_gr(net: &RoadNetwork, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "p sp {} {}", net.node_count(), net.edge_count())?;
    for e in net.edges() {
        writeln!(w, "a {} {} {}", e.tail.0 + 1, e.head.0 + 1, e.length)?;
    }
    Ok(())
}

/// Writes the matching normalized `.co` coordinate file.
pub fn write_co(net: &RoadNetwork, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "p aux sp co {}", net.node_count())?;
    for (i, c) in net.coords().iter().enumerate() {
        writeln!(w, "v {} {} {}", i + 1, c.x, c.y)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Weight perturbation
// ---------------------------------------------------------------------------

/// The perturbation threshold `32 * h * n^3 * C(max_degree, 2)`.
pub fn perturbation_threshold(n: u64, h: u32, max_degree: u32) -> u128 {
    let pairs = (max_degree as u128) * (max_degree.saturating_sub(1) as u128) / 2;
    32u128 * h as u128 * (n as u128).pow(3) * pairs
}

/// Smallest integer `r >= 1` with `r^k >= tau`.
pub fn component_range(tau: u128, k: u8) -> u128 {
    assert!(k >= 1);
    if tau <= 1 {
        return 1;
    }
    let mut lo = 1u128;
    let mut hi = tau;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pow_at_least(mid, k, tau) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

fn pow_at_least(base: u128, k: u8, target: u128) -> bool {
    let mut acc: u128 = 1;
    for _ in 0..k {
        acc = match acc.checked_mul(base) {
            Some(v) => v,
            None => return true,
        };
        if acc >= target {
            return true;
        }
    }
    acc >= target
}

/// Assigns every edge a fresh k-component nuance vector drawn uniformly from
/// `[0, tau' - 1]`, where `tau'` is derived from the uniqueness threshold.
/// Edge lengths are unchanged; the result is deterministic for a fixed seed.
pub fn perturb(net: &RoadNetwork, k: u8, seed: u64) -> Result<RoadNetwork, GraphError> {
    let h = crate::grid::compute_h(net)?;
    let tau = perturbation_threshold(net.node_count() as u64, h, net.max_degree());
    let tau_prime = component_range(tau, k);
    perturb_with_range(net, k, tau_prime, seed)
}

/// Perturbation with an explicit component range; `tau_prime = 1` degenerates
/// to all-zero nuances (ties left unbroken).
pub fn perturb_with_range(
    net: &RoadNetwork,
    k: u8,
    tau_prime: u128,
    seed: u64,
) -> Result<RoadNetwork, GraphError> {
    if k == 0 || k as usize > MAX_NUANCE_COMPONENTS {
        return Err(GraphError::Validation(format!(
            "nuance dimension k must be in [1, {MAX_NUANCE_COMPONENTS}], got {k}"
        )));
    }
    if tau_prime > u64::MAX as u128 {
        return Err(GraphError::PerturbOverflow { tau_prime, k });
    }
    let tau_prime = tau_prime as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arcs = net
        .edges()
        .iter()
        .map(|e| {
            let mut nu = Nuance::ZERO;
            for c in nu.components.iter_mut().take(k as usize) {
                *c = if tau_prime <= 1 { 0 } else { rng.gen_range(0..tau_prime) };
            }
            (e.tail.0, e.head.0, e.length, nu)
        })
        .collect();
    RoadNetwork::from_parts_with_nuance(net.coords().to_vec(), arcs, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn tiny_gr() -> &'static str {
        "c tiny\np sp 2 2\na 1 2 5\na 2 1 5\n"
    }

    fn tiny_co() -> &'static str {
        "p aux sp co 2\nv 1 0 0\nv 2 30 40\n"
    }

    #[test]
    fn parses_two_node_network() {
        let net = parse_dimacs(Cursor::new(tiny_gr()), Cursor::new(tiny_co())).unwrap();
        assert_eq!(net.node_count(), 2);
        assert_eq!(net.edge_count(), 2);
        // d_max is the L-infinity extent of the two coordinates
        assert_eq!(net.d_max(), 40.0);
        assert_eq!(net.d_min(), 40.0);
        assert_eq!(net.find_arc(NodeId(0), NodeId(1)).unwrap().length, 5);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "p sp 2 1\na 1 oops 5\n";
        let err = parse_dimacs(Cursor::new(bad), Cursor::new(tiny_co())).unwrap_err();
        match err {
            GraphError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn node_count_mismatch_is_structural() {
        let co = "p aux sp co 3\nv 1 0 0\nv 2 1 0\nv 3 2 0\n";
        let err = parse_dimacs(Cursor::new(tiny_gr()), Cursor::new(co)).unwrap_err();
        assert!(matches!(err, GraphError::Structural(_)));
    }

    #[test]
    fn non_positive_weight_rejected() {
        let gr = "p sp 2 1\na 1 2 0\n";
        let err = parse_dimacs(Cursor::new(gr), Cursor::new(tiny_co())).unwrap_err();
        assert!(matches!(err, GraphError::Validation(_)));
    }

    #[test]
    fn parallel_arcs_keep_minimum() {
        let gr = "p sp 2 3\na 1 2 9\na 1 2 4\na 2 1 7\n";
        let net = parse_dimacs(Cursor::new(gr), Cursor::new(tiny_co())).unwrap();
        assert_eq!(net.edge_count(), 2);
        assert_eq!(net.find_arc(NodeId(0), NodeId(1)).unwrap().length, 4);
        assert_eq!(net.merged_parallel_arcs(), 1);
    }

    #[test]
    fn writer_parser_round_trip() {
        let net = crate::synth::manhattan_grid(4, 3, 10, 2.0);
        let mut gr = Vec::new();
        let mut co = Vec::new();
        write_gr(&net, &mut gr).unwrap();
        write_co(&net, &mut co).unwrap();
        let back = parse_dimacs(Cursor::new(gr), Cursor::new(co)).unwrap();
        assert_eq!(back.node_count(), net.node_count());
        assert_eq!(back.edge_count(), net.edge_count());
        for (a, b) in net.edges().iter().zip(back.edges()) {
            assert_eq!((a.tail, a.head, a.length), (b.tail, b.head, b.length));
        }
        for (a, b) in net.coords().iter().zip(back.coords()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn threshold_arithmetic_matches_formula() {
        // n = 100, max degree 4, h = 10: tau = 32 * 10 * 10^6 * 6
        let tau = perturbation_threshold(100, 10, 4);
        assert_eq!(tau, 1_920_000_000);
        // two components split the range near sqrt(tau)
        let tp = component_range(tau, 2);
        assert_eq!(tp, 43_818);
        assert!(tp * tp >= tau && (tp - 1) * (tp - 1) < tau);
    }

    #[test]
    fn perturb_preserves_lengths_and_is_deterministic() {
        let net = crate::synth::manhattan_grid(5, 5, 10, 2.0);
        let a = perturb(&net, 2, 42).unwrap();
        let b = perturb(&net, 2, 42).unwrap();
        let c = perturb(&net, 2, 43).unwrap();
        assert_eq!(a.nuance_k(), 2);
        let mut any_nonzero = false;
        let mut differs_from_c = false;
        for i in 0..net.edge_count() {
            assert_eq!(a.edges()[i].length, net.edges()[i].length);
            assert_eq!(a.edges()[i].nuance, b.edges()[i].nuance);
            any_nonzero |= a.edges()[i].nuance != Nuance::ZERO;
            differs_from_c |= a.edges()[i].nuance != c.edges()[i].nuance;
        }
        assert!(any_nonzero);
        assert!(differs_from_c);
    }

    #[test]
    fn degenerate_range_leaves_ties() {
        let net = crate::synth::manhattan_grid(3, 3, 10, 2.0);
        let p = perturb_with_range(&net, 1, 1, 7).unwrap();
        assert!(p.edges().iter().all(|e| e.nuance == Nuance::ZERO));
    }

    #[test]
    fn overflowing_range_requests_larger_k() {
        let net = crate::synth::manhattan_grid(3, 3, 10, 2.0);
        let err = perturb_with_range(&net, 1, u128::from(u64::MAX) + 10, 7).unwrap_err();
        assert!(matches!(err, GraphError::PerturbOverflow { .. }));
    }
}
