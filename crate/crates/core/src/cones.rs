//! Angular sectors, forward/backward cones and regeneration sites.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Result};
use crate::geometry::Circuit;
use crate::lattice::Vertex;

const TOL: f64 = 1e-12;

pub const DEFAULT_DENSITY: usize = 8;
pub const VERIFY_DENSITY: usize = 64;

/// Argument in `[0, 2π)`.
pub fn arg(p: [f64; 2]) -> f64 {
    let a = p[1].atan2(p[0]);
    if a < 0.0 {
        (a + TAU).min(TAU.next_down())
    } else {
        a
    }
}

/// Unsigned angle between two nonzero vectors, in `[0, π]`.
pub fn angle_between(a: [f64; 2], b: [f64; 2]) -> f64 {
    let cross = a[0] * b[1] - a[1] * b[0];
    let dot = a[0] * b[0] + a[1] * b[1];
    cross.abs().atan2(dot)
}

/// Counterclockwise perpendicular.
pub fn perp(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

/// Distance between two angles on the circle, in `[0, π]`.
pub fn cyclic_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn is_zero(p: [f64; 2]) -> bool {
    p[0] == 0.0 && p[1] == 0.0
}

/// Membership of `z` in the closed sector from `arg x` counterclockwise to `arg y`, apex 0.
pub fn in_sector(x: [f64; 2], y: [f64; 2], z: [f64; 2]) -> Result<bool> {
    if is_zero(x) || is_zero(y) {
        return invalid("sector rays need nonzero points");
    }
    if is_zero(z) {
        return Ok(true);
    }
    let (ax, ay, az) = (arg(x), arg(y), arg(z));
    let width = (ay - ax).rem_euclid(TAU);
    let offset = (az - ax).rem_euclid(TAU);
    Ok(offset <= width + TOL || TAU - offset <= TOL)
}

/// Closed cone with apex `v`, axis `v⊥` and half-aperture `π/2 − q`.
pub fn in_forward_cone(v: [f64; 2], q: f64, w: [f64; 2]) -> bool {
    debug_assert!(q > 0.0 && q < FRAC_PI_2);
    let d = sub(w, v);
    is_zero(d) || angle_between(d, perp(v)) <= FRAC_PI_2 - q + TOL
}

/// Closed cone with apex `v`, axis `−v⊥` and half-aperture `π/2 − q`.
pub fn in_backward_cone(v: [f64; 2], q: f64, w: [f64; 2]) -> bool {
    debug_assert!(q > 0.0 && q < FRAC_PI_2);
    let d = sub(w, v);
    let p = perp(v);
    is_zero(d) || angle_between(d, [-p[0], -p[1]]) <= FRAC_PI_2 - q + TOL
}

/// Whether `z` lies in the double-sided angular window around `arg v`.
pub fn in_angular_window(v: [f64; 2], c: f64, z: [f64; 2]) -> bool {
    is_zero(z) || cyclic_distance(arg(z), arg(v)) <= c + TOL
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub apex: [f64; 2],
    pub axis: [f64; 2],
    pub half_aperture: f64,
}

impl ConeSpec {
    pub fn new(apex: [f64; 2], axis: [f64; 2], half_aperture: f64) -> Result<Self> {
        if is_zero(axis) {
            return invalid("cone axis must be nonzero");
        }
        if !(0.0..PI).contains(&half_aperture) {
            return invalid(format!("half-aperture {half_aperture} outside [0, π)"));
        }
        Ok(ConeSpec {
            apex,
            axis,
            half_aperture,
        })
    }

    pub fn forward(v: [f64; 2], q: f64) -> Result<Self> {
        ConeSpec::new(v, perp(v), FRAC_PI_2 - q)
    }

    pub fn backward(v: [f64; 2], q: f64) -> Result<Self> {
        let p = perp(v);
        ConeSpec::new(v, [-p[0], -p[1]], FRAC_PI_2 - q)
    }

    pub fn contains(&self, w: [f64; 2]) -> bool {
        let d = sub(w, self.apex);
        is_zero(d) || angle_between(d, self.axis) <= self.half_aperture + TOL
    }
}

/// A shape tested for regeneration sites: a circuit or an edge-set cluster.
#[derive(Clone, Copy, Debug)]
pub enum Shape<'a> {
    Circuit(&'a Circuit),
    Cluster(&'a [(Vertex, Vertex)]),
}

impl Shape<'_> {
    fn edges(&self) -> Vec<(Vertex, Vertex)> {
        match self {
            Shape::Circuit(c) => c.edges().collect(),
            Shape::Cluster(e) => e.to_vec(),
        }
    }

    fn vertices(&self) -> Vec<Vertex> {
        match self {
            Shape::Circuit(c) => c.vertices().to_vec(),
            Shape::Cluster(e) => {
                let mut v: Vec<Vertex> = e.iter().flat_map(|&(a, b)| [a, b]).collect();
                v.sort_unstable();
                v.dedup();
                v
            }
        }
    }
}

/// Whether the closed arc of arguments swept by the segment `[a, b]`
/// (origin not on it) comes within `c` of `theta`.
fn segment_near_angle(a: [f64; 2], b: [f64; 2], theta: f64, c: f64) -> bool {
    let (aa, ab) = (arg(a), arg(b));
    let span = (ab - aa).rem_euclid(TAU);
    let (lo, width) = if span <= PI {
        (aa, span)
    } else {
        (ab, TAU - span)
    };
    let off = (theta - lo).rem_euclid(TAU);
    if off <= width {
        return true;
    }
    cyclic_distance(theta, aa).min(cyclic_distance(theta, ab)) <= c + 1e-9
}

/// Whether every sample point of edge `[a, b]` lying in the angular window is in the
/// forward or backward cone at `v`. Coordinates are relative to `origin`.
pub fn edge_respects_site(
    v: Vertex,
    edge: (Vertex, Vertex),
    q: f64,
    c: f64,
    origin: [f64; 2],
    density: usize,
) -> bool {
    let rel = |p: Vertex| [p.x as f64 - origin[0], p.y as f64 - origin[1]];
    let (vr, a, b) = (rel(v), rel(edge.0), rel(edge.1));
    let through_origin = crate::geometry::point_segment_distance([0.0, 0.0], a, b) < TOL;
    if !through_origin && !segment_near_angle(a, b, arg(vr), c) {
        return true;
    }
    (0..=density + 1).all(|k| {
        let t = k as f64 / (density + 1) as f64;
        let z = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        !in_angular_window(vr, c, z) || in_forward_cone(vr, q, z) || in_backward_cone(vr, q, z)
    })
}

pub fn is_regeneration_site(
    edges: &[(Vertex, Vertex)],
    v: Vertex,
    q: f64,
    c: f64,
    origin: [f64; 2],
    density: usize,
) -> bool {
    edges
        .iter()
        .all(|&e| edge_respects_site(v, e, q, c, origin, density))
}

const BINS: usize = 2048;

/// Edges bucketed by the arguments they sweep, widened by `c`, so that a
/// site query only inspects edges able to meet its angular window.
#[derive(Clone, Debug)]
pub struct AngularIndex {
    edges: Vec<(Vertex, Vertex)>,
    bins: Vec<Vec<u32>>,
    always: Vec<u32>,
    origin: [f64; 2],
    c: f64,
}

impl AngularIndex {
    pub fn new(edges: Vec<(Vertex, Vertex)>, c: f64, origin: [f64; 2]) -> Self {
        let mut bins = vec![Vec::new(); BINS];
        let mut always = Vec::new();
        let bw = TAU / BINS as f64;
        let rel = |p: Vertex| [p.x as f64 - origin[0], p.y as f64 - origin[1]];
        for (i, &(a, b)) in edges.iter().enumerate() {
            let (ra, rb) = (rel(a), rel(b));
            if crate::geometry::point_segment_distance([0.0, 0.0], ra, rb) < 1e-6 {
                always.push(i as u32);
                continue;
            }
            let (aa, ab) = (arg(ra), arg(rb));
            let span = (ab - aa).rem_euclid(TAU);
            let (lo, width) = if span <= PI {
                (aa, span)
            } else {
                (ab, TAU - span)
            };
            let pad = c + 1e-6;
            if width + 2.0 * pad >= TAU {
                always.push(i as u32);
                continue;
            }
            let first = ((lo - pad) / bw).floor() as i64;
            let last = ((lo + width + pad) / bw).floor() as i64;
            for k in first..=last {
                bins[k.rem_euclid(BINS as i64) as usize].push(i as u32);
            }
        }
        AngularIndex {
            edges,
            bins,
            always,
            origin,
            c,
        }
    }

    pub fn edges(&self) -> &[(Vertex, Vertex)] {
        &self.edges
    }

    /// Same answer as [`is_regeneration_site`] on the indexed edges with the indexed `c`.
    pub fn is_site(&self, v: Vertex, q: f64, density: usize) -> bool {
        let rel = [v.x as f64 - self.origin[0], v.y as f64 - self.origin[1]];
        let k = ((arg(rel) / (TAU / BINS as f64)).floor() as usize).min(BINS - 1);
        self.bins[k].iter().chain(&self.always).all(|&i| {
            edge_respects_site(v, self.edges[i as usize], q, self.c, self.origin, density)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Site {
    pub vertex: Vertex,
    pub arg: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegenerationReport {
    pub sites: Vec<Site>,
    pub theta_max: f64,
}

#[derive(Serialize, Deserialize)]
struct ReportJson {
    #[serde(serialize_with = "ser_sites", deserialize_with = "de_sites")]
    sites: Vec<Site>,
    theta_max: f64,
}

fn ser_sites<S: Serializer>(sites: &[Site], s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(sites.len()))?;
    for site in sites {
        seq.serialize_element(&(site.vertex.x as f64, site.vertex.y as f64, site.arg))?;
    }
    seq.end()
}

fn de_sites<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Site>, D::Error> {
    let raw: Vec<(f64, f64, f64)> = Deserialize::deserialize(d)?;
    Ok(raw
        .into_iter()
        .map(|(x, y, a)| Site {
            vertex: Vertex::new(x as i32, y as i32),
            arg: a,
        })
        .collect())
}

impl Serialize for RegenerationReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ReportJson {
            sites: self.sites.clone(),
            theta_max: self.theta_max,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RegenerationReport {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ReportJson::deserialize(d)?;
        Ok(RegenerationReport {
            sites: r.sites,
            theta_max: r.theta_max,
        })
    }
}

pub fn regeneration_sites_with_density(
    shape: Shape<'_>,
    q: f64,
    c: f64,
    origin: [f64; 2],
    density: usize,
) -> Result<RegenerationReport> {
    if !(q > 0.0 && q < FRAC_PI_2) || !(c > 0.0 && c < PI) {
        return invalid(format!("cone parameters q = {q}, c = {c} out of range"));
    }
    if let Shape::Circuit(circuit) = shape {
        if !circuit.encloses_point(origin) {
            return invalid("origin must lie strictly inside the circuit");
        }
    }
    let index = AngularIndex::new(shape.edges(), c, origin);
    let mut sites = Vec::new();
    for v in shape.vertices() {
        let rel = [v.x as f64 - origin[0], v.y as f64 - origin[1]];
        if is_zero(rel) {
            continue;
        }
        if index.is_site(v, q, density) {
            sites.push(Site {
                vertex: v,
                arg: arg(rel),
            });
        }
    }
    sites.sort_by(|a, b| a.arg.total_cmp(&b.arg).then(a.vertex.cmp(&b.vertex)));
    let args: Vec<f64> = sites.iter().map(|s| s.arg).collect();
    Ok(RegenerationReport {
        theta_max: max_angular_gap(&args),
        sites,
    })
}

pub fn regeneration_sites(
    shape: Shape<'_>,
    q: f64,
    c: f64,
    origin: [f64; 2],
) -> Result<RegenerationReport> {
    regeneration_sites_with_density(shape, q, c, origin, DEFAULT_DENSITY)
}

/// Largest cyclic gap between consecutive arguments; `2π` when empty.
pub fn max_angular_gap(args: &[f64]) -> f64 {
    if args.is_empty() {
        return TAU;
    }
    let mut a: Vec<f64> = args.iter().map(|x| x.rem_euclid(TAU)).collect();
    a.sort_by(f64::total_cmp);
    let wrap = a[0] + TAU - a[a.len() - 1];
    a.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::max)
}
