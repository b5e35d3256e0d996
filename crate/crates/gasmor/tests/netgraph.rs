mod common;

use gasmor::netgraph::*;
use gasmor::Error;
use proptest::prelude::*;

#[test]
fn yamal_file_parses_to_one_pipe() {
    let net = parse_net(&common::read("networks/yamal/yamal.net")).unwrap();
    assert_eq!(net.edges.len(), 1);
    let e = &net.edges[0];
    assert_eq!(e.kind, EdgeKind::Pipe);
    assert_eq!(e.length, 363000.0);
    assert_eq!(e.diameter, 1.422);
    assert_eq!(e.roughness, 1e-5);
    assert_eq!(net.supply.len(), 1);
    assert_eq!(net.demand.len(), 1);
}

#[test]
fn shipped_networks_classify() {
    let letters = parse_net(&common::read("networks/letters/letters.net")).unwrap();
    assert_eq!(letters.supply.len() + letters.demand.len(), 6);
    assert_eq!(letters.count(EdgeKind::Compressor), 1);
    let tree = parse_net(&common::read("networks/tree134/tree134.net")).unwrap();
    assert_eq!(tree.nodes.len(), 134);
    assert_eq!(tree.supply.len(), 1);
}

#[test]
fn valve_and_shortcut_refine_frictionless() {
    let net = parse_net("pipe,s,a,2000,0.5,0,1e-5\nvalve,a,b,0,0,0,0\nshortcut,b,d,0,0,0,0\n").unwrap();
    let r = refine(&net, 1000.0);
    assert_eq!(r.friction_scale, vec![1.0, 1.0, 0.0, 0.0]);
    assert!(r.refined.edges.iter().all(|e| e.length == 1000.0));
    assert_eq!(r.refined.edges[2].kind, EdgeKind::Shortcut);
    assert_eq!(r.virtual_of, vec![0, 0, 1, 2]);
}

#[test]
fn closed_valve_is_unsupported() {
    let text = "T0=283\nRS=530\ntH=60\nut=0\nup=60\nuq=10\nvs=0\n";
    assert!(matches!(gasmor::Scenario::parse(text), Err(Error::Unsupported(_))));
}

#[test]
fn isolated_or_disconnected_graphs_fail() {
    assert!(matches!(parse_net("pipe,a,b,1,1,0,0\npipe,c,d,1,1,0,0\n"), Err(Error::Topology(_))));
    assert!(matches!(parse_net(""), Err(Error::Parse { .. })));
    assert!(matches!(parse_net("pipe,a,a,1,1,0,0\n"), Err(Error::Parse { .. })));
}

/// Random rooted tree: edge k connects a parent among earlier nodes to node k+1,
/// oriented away from the root, with random lengths.
fn tree_text(parents: &[usize], lengths: &[f64]) -> String {
    let mut s = String::new();
    for (k, (&p, &l)) in parents.iter().zip(lengths).enumerate() {
        let parent = if k == 0 { 0 } else { p % (k + 1) };
        s.push_str(&format!("pipe,n{parent},n{},{l},0.8,{},1e-5\n", k + 1, (k as f64) - 2.0));
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn incidence_identities(parents in prop::collection::vec(0usize..50, 1..30),
                            lengths in prop::collection::vec(50.0f64..5000.0, 30)) {
        let text = tree_text(&parents, &lengths[..parents.len()]);
        let Ok(net) = parse_net(&text) else { return Ok(()) };
        let t = incidence::<f64>(&net);
        let a = t.a.to_dense();
        let (ar, al) = (t.ar.to_dense(), t.al.to_dense());
        prop_assert_eq!(&a, &(&ar + &al));
        prop_assert_eq!(a.abs(), &ar - &al);
        prop_assert!(ar.iter().all(|v| *v == 0.0 || *v == 1.0));
        prop_assert!(al.iter().all(|v| *v == 0.0 || *v == -1.0));
        for c in 0..a.ncols() {
            prop_assert_eq!(a.column(c).sum(), 0.0);
            prop_assert_eq!(a.column(c).iter().filter(|v| **v == 1.0).count(), 1);
            prop_assert_eq!(a.column(c).iter().filter(|v| **v == -1.0).count(), 1);
        }
        prop_assert_eq!(&t.a0.to_dense(), &(t.a0r.to_dense() + t.a0l.to_dense()));
        // A_0 rows are the node order with supply rows deleted
        let expected: Vec<usize> = (0..net.nodes.len()).filter(|i| !net.supply.contains(i)).collect();
        prop_assert_eq!(&t.a0_rows, &expected);
        let a0 = t.a0.to_dense();
        for (r, &node) in t.a0_rows.iter().enumerate() {
            prop_assert_eq!(t.node_to_row[node], Some(r));
            prop_assert_eq!(a0.row(r), a.row(node));
        }
        // every supply leaf has its single edge leaving it, every demand leaf entering it
        for &s in &net.supply {
            prop_assert!(net.edges.iter().filter(|e| e.from == s || e.to == s).all(|e| e.from == s));
        }
        for &d in &net.demand {
            prop_assert!(net.edges.iter().filter(|e| e.from == d || e.to == d).all(|e| e.to == d));
        }
    }

    #[test]
    fn refinement_preserves_length(parents in prop::collection::vec(0usize..50, 1..20),
                                   lengths in prop::collection::vec(10.0f64..9000.0, 20),
                                   dx in 100.0f64..2000.0) {
        let text = tree_text(&parents, &lengths[..parents.len()]);
        let Ok(net) = parse_net(&text) else { return Ok(()) };
        let r = refine(&net, dx);
        prop_assert!(r.refined.edges.iter().all(|e| e.length == dx));
        for (k, e) in net.edges.iter().enumerate() {
            let segs: Vec<usize> = (0..r.virtual_of.len()).filter(|&i| r.virtual_of[i] == k).collect();
            let total = segs.len() as f64 * dx;
            prop_assert!(total >= e.length - 1e-6);
            prop_assert!(total - e.length < dx);
            let scaled: f64 = segs.iter().map(|&i| r.friction_scale[i] * dx).sum();
            prop_assert!((scaled - e.length).abs() < 1e-6 * e.length.max(1.0));
            let incl: f64 = segs.iter().map(|&i| r.refined.edges[i].incline).sum();
            prop_assert!((incl - e.incline).abs() < 1e-9 * e.incline.abs().max(1.0));
            for &i in &segs {
                prop_assert!(r.friction_scale[i] > 0.0 && r.friction_scale[i] <= 1.0);
            }
        }
        // refinement keeps the boundary classification
        let again = classify_boundary(r.refined.clone()).unwrap();
        prop_assert_eq!(&again.supply, &net.supply);
        prop_assert_eq!(&again.demand, &net.demand);
    }
}
