mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use proptest::prelude::*;
use rcm_core::cones::{
    angle_between, arg, cyclic_distance, in_angular_window, in_backward_cone, in_forward_cone,
    in_sector, is_regeneration_site, max_angular_gap, regeneration_sites,
    regeneration_sites_with_density, AngularIndex, ConeSpec, RegenerationReport, Shape,
};
use rcm_core::geometry::Circuit;
use rcm_core::lattice::{EdgeConfig, Vertex, Window};

fn v(x: i32, y: i32) -> Vertex {
    Vertex::new(x, y)
}

fn square(r: i32) -> Circuit {
    let mut pts = Vec::new();
    for x in -r..r {
        pts.push(v(x, -r));
    }
    for y in -r..r {
        pts.push(v(r, y));
    }
    for x in (-r + 1..=r).rev() {
        pts.push(v(x, r));
    }
    for y in (-r + 1..=r).rev() {
        pts.push(v(-r, y));
    }
    Circuit::new(pts).unwrap()
}

/// Direct site test: every sampled point of every edge inside the angular
/// window of `v` must sit in one of the two cones at `v`.
fn brute_site(
    edges: &[(Vertex, Vertex)],
    site: Vertex,
    q: f64,
    c: f64,
    origin: [f64; 2],
    density: usize,
) -> bool {
    let rel = |p: Vertex| [p.x as f64 - origin[0], p.y as f64 - origin[1]];
    let vr = rel(site);
    let theta_v = vr[1].atan2(vr[0]);
    let axis = [-vr[1], vr[0]];
    let half = FRAC_PI_2 - q;
    let angle = |d: [f64; 2], a: [f64; 2]| {
        let n = (d[0] * d[0] + d[1] * d[1]).sqrt() * (a[0] * a[0] + a[1] * a[1]).sqrt();
        ((d[0] * a[0] + d[1] * a[1]) / n).clamp(-1.0, 1.0).acos()
    };
    edges.iter().all(|&(a, b)| {
        let (a, b) = (rel(a), rel(b));
        (0..=density + 1).all(|k| {
            let t = k as f64 / (density + 1) as f64;
            let z = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            if z == [0.0, 0.0] {
                return true;
            }
            let mut dz = (z[1].atan2(z[0]) - theta_v).abs() % TAU;
            dz = dz.min(TAU - dz);
            if dz > c + 1e-9 {
                return true;
            }
            let d = [z[0] - vr[0], z[1] - vr[1]];
            if d == [0.0, 0.0] {
                return true;
            }
            angle(d, axis) <= half + 1e-9 || angle(d, [-axis[0], -axis[1]]) <= half + 1e-9
        })
    })
}

#[test]
fn angle_helpers() {
    assert_eq!(arg([1.0, 0.0]), 0.0);
    assert!((arg([0.0, -1.0]) - 1.5 * PI).abs() < 1e-15);
    assert!(arg([1.0, -1e-300]) < TAU);
    assert!((angle_between([1.0, 0.0], [-1.0, 1.0]) - 0.75 * PI).abs() < 1e-15);
    assert!((cyclic_distance(0.1, TAU - 0.1) - 0.2).abs() < 1e-12);
}

#[test]
fn sector_membership() {
    let (e, n) = ([1.0, 0.0], [0.0, 1.0]);
    assert!(in_sector(e, n, [1.0, 1.0]).unwrap());
    assert!(in_sector(e, n, [3.0, 0.0]).unwrap());
    assert!(!in_sector(e, n, [-1.0, -1.0]).unwrap());
    // sectors may wrap through angle zero
    assert!(in_sector([0.0, -1.0], n, [1.0, 0.0]).unwrap());
    assert!(!in_sector([0.0, -1.0], n, [-1.0, 0.0]).unwrap());
    assert!(in_sector(e, n, [0.0, 0.0]).unwrap());
    assert!(in_sector([0.0, 0.0], n, e).is_err());
}

#[test]
fn cone_fixtures() {
    let vtx = [1.0, 0.0];
    assert!(in_forward_cone(vtx, FRAC_PI_4, [1.0, 1.0]));
    assert!(in_forward_cone(vtx, FRAC_PI_4, [2.0, 1.0]));
    assert!(!in_forward_cone(vtx, FRAC_PI_4, [2.0, 0.9]));
    assert!(in_backward_cone(vtx, FRAC_PI_4, [1.0, -3.0]));
    assert!(!in_backward_cone(vtx, FRAC_PI_4, [1.0, 3.0]));
    assert!(in_angular_window(vtx, 0.2, [5.0, 0.9]));
    assert!(!in_angular_window(vtx, 0.2, [5.0, 1.2]));
    assert!(ConeSpec::new([0.0, 0.0], [0.0, 0.0], 0.3).is_err());
    assert!(ConeSpec::new([0.0, 0.0], [1.0, 0.0], PI).is_err());
}

#[test]
fn convex_square_is_all_sites() {
    let c = square(6);
    let r = regeneration_sites(Shape::Circuit(&c), 0.1, 0.3, [0.0, 0.0]).unwrap();
    assert_eq!(r.sites.len(), c.len());
    let args: Vec<f64> = c
        .vertices()
        .iter()
        .map(|p| arg([p.x as f64, p.y as f64]))
        .collect();
    assert!((r.theta_max - common::max_gap(&args)).abs() < 1e-12);
    assert!(r.theta_max < (1.0f64 / 6.0).atan() + 1e-12);
}

#[test]
fn notch_removes_sites() {
    // a deep slit into the square from the east side
    let mut pts: Vec<Vertex> = Vec::new();
    let r = 6;
    for x in -r..r {
        pts.push(v(x, -r));
    }
    pts.extend((-r..=0).map(|y| v(r, y)));
    pts.extend((1..r).rev().map(|x| v(x, 0)));
    pts.extend((1..r).map(|x| v(x, 1)));
    pts.extend((1..r).map(|y| v(r, y)));
    for x in (-r + 1..=r).rev() {
        pts.push(v(x, r));
    }
    for y in (-r + 1..=r).rev() {
        pts.push(v(-r, y));
    }
    let c = Circuit::new(pts).unwrap();
    let full = regeneration_sites(Shape::Circuit(&square(6)), 0.1, 0.3, [0.0, -3.0]).unwrap();
    let notched = regeneration_sites(Shape::Circuit(&c), 0.1, 0.3, [0.0, -3.0]).unwrap();
    assert!(notched.sites.len() < c.len());
    assert!(notched.theta_max > full.theta_max);
}

#[test]
fn site_inputs_are_validated() {
    let c = square(3);
    assert!(regeneration_sites(Shape::Circuit(&c), 0.0, 0.3, [0.0, 0.0]).is_err());
    assert!(regeneration_sites(Shape::Circuit(&c), 0.2, PI, [0.0, 0.0]).is_err());
    assert!(regeneration_sites(Shape::Circuit(&c), 0.2, 0.3, [9.0, 0.0]).is_err());
}

#[test]
fn cluster_shape_uses_edges() {
    let c = square(4);
    let edges: Vec<(Vertex, Vertex)> = c.edges().collect();
    let a = regeneration_sites(Shape::Circuit(&c), 0.2, 0.3, [0.5, 0.5]).unwrap();
    let b = regeneration_sites(Shape::Cluster(&edges), 0.2, 0.3, [0.5, 0.5]).unwrap();
    assert_eq!(a, b);
    // far along a near-radial spoke the neighbours leave both cones
    let w = Window::new(5).unwrap();
    let mut config = EdgeConfig::closed(w);
    config
        .open_path(&[v(1, 0), v(2, 0), v(3, 0), v(4, 0)])
        .unwrap();
    let spoke: Vec<(Vertex, Vertex)> = config.open_edges().map(|e| w.edge_endpoints(e)).collect();
    let r = regeneration_sites(Shape::Cluster(&spoke), 0.2, 0.3, [0.0, 0.5]).unwrap();
    assert!(r
        .sites
        .iter()
        .all(|s| s.vertex != v(3, 0) && s.vertex != v(4, 0)));
}

#[test]
fn report_json_round_trip() {
    let r = regeneration_sites(Shape::Circuit(&square(4)), 0.1, 0.3, [0.5, 0.0]).unwrap();
    let back: RegenerationReport =
        serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back.sites.len(), r.sites.len());
    assert_eq!(back.theta_max, r.theta_max);
}

proptest! {
    #[test]
    fn max_gap_matches_pairwise_oracle(args in prop::collection::vec(0.0f64..TAU, 1..40)) {
        prop_assert!((max_angular_gap(&args) - common::max_gap(&args)).abs() < 1e-12);
    }

    #[test]
    fn empty_gap_is_full_turn(_x in 0..1) {
        prop_assert_eq!(max_angular_gap(&[]), TAU);
    }

    #[test]
    fn cone_spec_agrees_with_predicates(vx in -5.0f64..5.0, vy in -5.0f64..5.0, wx in -9.0f64..9.0, wy in -9.0f64..9.0, q in 0.01f64..1.5) {
        prop_assume!(vx.abs() + vy.abs() > 0.1);
        let (vv, w) = ([vx, vy], [wx, wy]);
        prop_assert_eq!(ConeSpec::forward(vv, q).unwrap().contains(w), in_forward_cone(vv, q, w));
        prop_assert_eq!(ConeSpec::backward(vv, q).unwrap().contains(w), in_backward_cone(vv, q, w));
    }

    #[test]
    fn sites_match_direct_test(seed in any::<u64>(), q in 0.05f64..0.6, c in 0.05f64..0.8) {
        let mut rng = common::rng(seed);
        let faces = common::random_blob(&mut rng, 40, 8);
        let w = Window::new(10).unwrap();
        let config = common::blob_config(w, &faces);
        let circuit = rcm_core::geometry::outermost_around_face(w, &|e| config.is_open(e), v(0, 0)).unwrap();
        let origin = [0.5, 0.5];
        let edges: Vec<(Vertex, Vertex)> = circuit.edges().collect();
        let density = 8;
        let report = regeneration_sites_with_density(Shape::Circuit(&circuit), q, c, origin, density).unwrap();
        let index = AngularIndex::new(edges.clone(), c, origin);
        for &p in circuit.vertices() {
            let direct = is_regeneration_site(&edges, p, q, c, origin, density);
            prop_assert_eq!(index.is_site(p, q, density), direct);
            prop_assert_eq!(brute_site(&edges, p, q, c, origin, density), direct, "vertex {}", p);
            prop_assert_eq!(report.sites.iter().any(|s| s.vertex == p), direct);
        }
        let args: Vec<f64> = report.sites.iter().map(|s| s.arg).collect();
        prop_assert!((report.theta_max - common::max_gap(&args)).abs() < 1e-12);
    }
}
