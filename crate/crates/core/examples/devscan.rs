//! Temporary development scan; not part of the library.

use entmux_core::linkgen::{DecoherenceMode, Snapshot, SnapshotParams};
use entmux_core::oracle;
use entmux_core::routing::{dynamic_internal_phase, snapshot_yield, trace_chains};
use entmux_core::topology::{grid_topology, six_node_topology, Metric, SixNode, Topology};

fn local_exact(topo: &Topology, p: f64, k: u32) -> f64 {
    let mut acc = 0.0;
    oracle::enumerate_snapshots(topo, p, k, 24, |snap, prob| {
        let plan = dynamic_internal_phase(snap, topo, Metric::Hop, false)?;
        let chains = trace_chains(&plan, snap, topo);
        acc += prob * snapshot_yield(&chains, topo);
        Ok(())
    })
    .unwrap();
    acc / f64::from(k)
}

fn full_snapshot(topo: &Topology) -> Snapshot {
    let links = vec![vec![1u32]; topo.edge_count()];
    Snapshot::from_parts(
        1,
        links,
        SnapshotParams {
            p: 1.0,
            mu: f64::INFINITY,
            mode: DecoherenceMode::PerQubit,
            seed: None,
        },
    )
    .unwrap()
}

fn main() {
    println!("=== six-node: exact local rate, base vs no23, q=0.9, hop ===");
    for k in [1u32, 2] {
        for pi in [3, 4, 5, 6, 7, 8, 9] {
            let p = pi as f64 / 10.0;
            let base = local_exact(
                &six_node_topology(SixNode::Base).with_uniform_q(0.9).unwrap(),
                p,
                k,
            );
            let no23 = local_exact(
                &six_node_topology(SixNode::No23).with_uniform_q(0.9).unwrap(),
                p,
                k,
            );
            println!(
                "k={k} p={p:.1} base={base:.8} no23={no23:.8} no23-base={:+.3e}",
                no23 - base
            );
        }
    }
    for p in [0.3f64, 0.5, 0.7, 0.9] {
        let k = 3;
        let base = local_exact(
            &six_node_topology(SixNode::Base).with_uniform_q(0.9).unwrap(),
            p,
            k,
        );
        let no23 = local_exact(
            &six_node_topology(SixNode::No23).with_uniform_q(0.9).unwrap(),
            p,
            k,
        );
        println!(
            "k={k} p={p:.1} base={base:.8} no23={no23:.8} no23-base={:+.3e}",
            no23 - base
        );
    }

    println!();
    println!("=== 6x6 grid, p=q=1, k=1, euclidean: straight-path scan by class ===");
    let (w, h) = (6usize, 6usize);
    use std::collections::BTreeMap;
    // class -> (count, on: [min,max,#<3], off: [min,#<3], #on!=off)
    let mut classes: BTreeMap<(i64, i64), (usize, f64, f64, usize, f64, usize, usize)> =
        BTreeMap::new();
    let mut off_low_examples: Vec<String> = Vec::new();
    for ay in 1..h - 1 {
        for ax in 1..w - 1 {
            for by in 1..h - 1 {
                for bx in 1..w - 1 {
                    if (ax, ay) >= (bx, by) {
                        continue;
                    }
                    let dx = (bx as i64 - ax as i64).abs();
                    let dy = (by as i64 - ay as i64).abs();
                    let class = (dx.min(dy), dx.max(dy));
                    let topo = grid_topology(w, h, (ax, ay), (bx, by)).unwrap();
                    let snap = full_snapshot(&topo);
                    let mut n = [0.0f64; 2];
                    for (i, sp) in [true, false].into_iter().enumerate() {
                        let plan =
                            dynamic_internal_phase(&snap, &topo, Metric::Euclidean, sp).unwrap();
                        let chains = trace_chains(&plan, &snap, &topo);
                        n[i] = snapshot_yield(&chains, &topo);
                    }
                    let e = classes
                        .entry(class)
                        .or_insert((0, f64::INFINITY, 0.0, 0, f64::INFINITY, 0, 0));
                    e.0 += 1;
                    e.1 = e.1.min(n[0]);
                    e.2 = e.2.max(n[0]);
                    if n[0] < 3.0 {
                        e.3 += 1;
                    }
                    e.4 = e.4.min(n[1]);
                    if n[1] < 3.0 {
                        e.5 += 1;
                        if off_low_examples.len() < 12 {
                            off_low_examples
                                .push(format!("({ax},{ay})-({bx},{by}) off={} on={}", n[1], n[0]));
                        }
                    }
                    if n[0] != n[1] {
                        e.6 += 1;
                    }
                }
            }
        }
    }
    println!("class  count  on[min..max] on<3 | off[min] off<3 | on!=off");
    for ((a, b), (cnt, on_min, on_max, on_low, off_min, off_low, diff)) in &classes {
        println!(
            "({a},{b})  {cnt:4}   [{on_min}..{on_max}]  {on_low:3}  |  {off_min}  {off_low:3}  |  {diff:3}"
        );
    }
    println!("sample off<3 placements:");
    for t in &off_low_examples {
        println!("  {t}");
    }
}
