mod common;

use proptest::prelude::*;
use rcm_core::lattice::{
    cluster_vertices, connected, open_cluster, ClusterIndex, EdgeBits, EdgeConfig, EdgeId, Vertex,
    Window,
};
use rcm_core::Error;

#[test]
fn window_rejects_bad_half_width() {
    assert!(matches!(Window::new(0), Err(Error::InvalidInput(_))));
    assert!(matches!(Window::new(-3), Err(Error::InvalidInput(_))));
    assert!(Window::new(rcm_core::lattice::MAX_HALF_WIDTH + 1).is_err());
}

#[test]
fn window_counts() {
    let w = Window::new(1).unwrap();
    assert_eq!(w.vertex_count(), 9);
    assert_eq!(w.edge_count(), 12);
    let w = Window::new(3).unwrap();
    assert_eq!(w.vertex_count(), 49);
    assert_eq!(w.edge_count(), 2 * 7 * 6);
}

#[test]
fn outside_vertices_are_reported() {
    let w = Window::new(2).unwrap();
    let c = EdgeConfig::open(w);
    let err = connected(&c, Vertex::ORIGIN, Vertex::new(3, 0), None).unwrap_err();
    assert!(matches!(err, Error::OutsideWindow { half_width: 2, .. }));
    assert!(w.edge_index(EdgeId::east(Vertex::new(2, 0))).is_err());
}

#[test]
fn path_opening_connects_endpoints() {
    let w = Window::new(3).unwrap();
    let mut c = EdgeConfig::closed(w);
    let path = [
        Vertex::new(-2, 0),
        Vertex::new(-1, 0),
        Vertex::new(-1, 1),
        Vertex::new(0, 1),
        Vertex::new(1, 1),
    ];
    c.open_path(&path).unwrap();
    assert_eq!(c.open_count(), 4);
    assert!(connected(&c, path[0], path[4], None).unwrap());
    assert!(!connected(&c, path[0], Vertex::ORIGIN, None).unwrap());
    assert_eq!(open_cluster(&c, path[2], None).unwrap().len(), 4);
    assert!(c.open_path(&[Vertex::ORIGIN, Vertex::new(2, 0)]).is_err());
}

#[test]
fn region_restricts_paths() {
    let w = Window::new(2).unwrap();
    let mut c = EdgeConfig::closed(w);
    c.open_path(&[
        Vertex::new(-1, 0),
        Vertex::new(-1, 1),
        Vertex::new(0, 1),
        Vertex::new(1, 1),
        Vertex::new(1, 0),
    ])
    .unwrap();
    let top = w
        .edge_between(Vertex::new(0, 1), Vertex::new(1, 1))
        .unwrap();
    let region = EdgeBits::from_indices(w.edge_count(), (0..w.edge_count()).filter(|&e| e != top));
    assert!(connected(&c, Vertex::new(-1, 0), Vertex::new(1, 0), None).unwrap());
    assert!(!connected(&c, Vertex::new(-1, 0), Vertex::new(1, 0), Some(&region)).unwrap());
}

#[test]
fn snapshot_rejects_malformed_input() {
    let w = Window::new(1).unwrap();
    let good = EdgeConfig::open(w).to_snapshot();
    assert!(EdgeConfig::from_snapshot(&good).is_ok());
    assert!(matches!(
        EdgeConfig::from_snapshot(""),
        Err(Error::Snapshot(_))
    ));
    assert!(matches!(
        EdgeConfig::from_snapshot("rcmsnap v2 L=1\nfff\n"),
        Err(Error::Snapshot(_))
    ));
    assert!(matches!(
        EdgeConfig::from_snapshot("rcmsnap v1 L=1\nff\n"),
        Err(Error::Snapshot(_))
    ));
    assert!(matches!(
        EdgeConfig::from_snapshot("rcmsnap v1 L=1\nFFF\n"),
        Err(Error::Snapshot(_))
    ));
    assert!(matches!(
        EdgeConfig::from_snapshot("rcmsnap v1 L=1\nfgf\n"),
        Err(Error::Snapshot(_))
    ));
}

proptest! {
    #[test]
    fn vertex_and_edge_indices_round_trip(l in 1i32..12, seed in any::<u64>()) {
        let w = Window::new(l).unwrap();
        let mut rng = common::rng(seed);
        use rand::Rng;
        for _ in 0..50 {
            let i = rng.gen_range(0..w.vertex_count());
            prop_assert_eq!(w.vertex_index(w.vertex_at(i)), i);
            let e = rng.gen_range(0..w.edge_count());
            let id = w.edge_at(e);
            prop_assert_eq!(w.edge_index(id).unwrap(), e);
            let (a, b) = w.edge_endpoints(e);
            prop_assert!(a.is_neighbour(b));
            prop_assert!(w.contains(a) && w.contains(b));
            prop_assert_eq!(w.edge_between(a, b), Some(e));
            prop_assert_eq!(w.edge_between(b, a), Some(e));
        }
    }

    #[test]
    fn snapshot_round_trip(l in 1i32..8, p in 0.0f64..1.0, seed in any::<u64>()) {
        let w = Window::new(l).unwrap();
        let c = common::random_config(w, p, &mut common::rng(seed));
        let back = EdgeConfig::from_snapshot(&c.to_snapshot()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn connectivity_matches_component_oracle(l in 1i32..5, p in 0.2f64..0.8, seed in any::<u64>()) {
        let w = Window::new(l).unwrap();
        let c = common::random_config(w, p, &mut common::rng(seed));
        let (n, edges, _) = common::window_graph(w);
        let mask_bits: Vec<bool> = (0..w.edge_count()).map(|e| c.is_open(e)).collect();
        // labels from an independent flood fill
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        for s in 0..n {
            if label[s] != usize::MAX { continue; }
            label[s] = next;
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for (i, &(a, b)) in edges.iter().enumerate() {
                    if !mask_bits[i] { continue; }
                    let u = if a == v { b } else if b == v { a } else { continue };
                    if label[u] == usize::MAX { label[u] = next; stack.push(u); }
                }
            }
            next += 1;
        }
        let mut index = ClusterIndex::build(&c);
        prop_assert_eq!(index.cluster_count(), next);
        let origin = w.vertex_index(Vertex::ORIGIN);
        for i in 0..n {
            let v = w.vertex_at(i);
            let same = label[i] == label[origin];
            prop_assert_eq!(connected(&c, Vertex::ORIGIN, v, None).unwrap(), same);
            prop_assert_eq!(index.connected(Vertex::ORIGIN, v), same);
        }
        let members = cluster_vertices(&c, Vertex::ORIGIN, None).unwrap();
        prop_assert_eq!(members.len(), label.iter().filter(|&&x| x == label[origin]).count());
        for e in open_cluster(&c, Vertex::ORIGIN, None).unwrap() {
            prop_assert!(c.is_open(e));
            let (a, _) = w.edge_endpoints(e);
            prop_assert_eq!(label[w.vertex_index(a)], label[origin]);
        }
    }
}
