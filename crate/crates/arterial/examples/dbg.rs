use arterial::ah::build_ah;
use arterial::grid::GridHierarchy;
use arterial::oracle;
use arterial::road_graph::{perturb, NodeId};
use arterial::synth;
use rand::{Rng, SeedableRng};
use std::time::Instant;

fn main() {
    for (cols, rows) in [(32u32, 32u32), (71, 71), (100, 100)] {
        let t0 = Instant::now();
        let net = perturb(&synth::random_geo_graph(cols, rows, 7, 0.55, None), 2, 7).unwrap();
        let grids = GridHierarchy::build(&net).unwrap();
        let t1 = Instant::now();
        let (ah, report) = build_ah(&net, &grids, 7).unwrap();
        let t2 = Instant::now();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut bad = 0;
        let mut settled_ah = Vec::new();
        let mut settled_bi = Vec::new();
        for _ in 0..300 {
            let s = NodeId(rng.gen_range(0..net.node_count() as u32));
            let t = NodeId(rng.gen_range(0..net.node_count() as u32));
            let a = ah.visit_stats(s, t);
            let o = oracle::bidirectional_dijkstra(&net, s, t);
            if a.distance != o.distance {
                bad += 1;
            }
            settled_ah.push(a.settled);
            settled_bi.push(o.settled);
        }
        let t3 = Instant::now();
        settled_ah.sort();
        settled_bi.sort();
        println!(
            "n={} m={} h={} | grids {:?} build {:?} queries {:?} | bad={} | med settled ah {} bi {} | helpers {} shortcuts {} hist {:?}",
            net.node_count(), net.edge_count(), grids.h(),
            t1 - t0, t2 - t1, t3 - t2, bad,
            settled_ah[150], settled_bi[150],
            report.materialized_helpers, ah.shortcut_count(),
            report.level_histogram,
        );
    }
}
