use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::ResampleParams;
use super::psi::SelectionRule;
use crate::cones::{is_regeneration_site, DEFAULT_DENSITY};
use crate::error::{Error, Result};
use crate::geometry::Circuit;
use crate::lattice::{open_cluster, EdgeConfig, Vertex};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayHit {
    pub t: f64,
    pub edge: (Vertex, Vertex),
}

fn cross(a: Vertex, b: Vertex) -> i64 {
    a.x as i64 * b.y as i64 - a.y as i64 * b.x as i64
}

/// First circuit edge met by the ray from the origin at `angle`: minimal
/// ray parameter, ties by the lexicographically smaller edge.
pub fn first_hit(circuit: &Circuit, angle: f64) -> Option<RayHit> {
    let d = [angle.cos(), angle.sin()];
    let mut best: Option<RayHit> = None;
    for (a, b) in circuit.edges() {
        let edge = if a < b { (a, b) } else { (b, a) };
        let (p, q) = (edge.0.to_f64(), edge.1.to_f64());
        let e = [q[0] - p[0], q[1] - p[1]];
        let den = d[0] * e[1] - d[1] * e[0];
        if den.abs() < 1e-15 {
            continue;
        }
        let t = (p[0] * e[1] - p[1] * e[0]) / den;
        let s = (p[0] * d[1] - p[1] * d[0]) / den;
        if t <= 0.0 || !(-1e-12..=1.0 + 1e-12).contains(&s) {
            continue;
        }
        let better = match best {
            None => true,
            Some(h) => t < h.t - 1e-12 || ((t - h.t).abs() <= 1e-12 && edge < h.edge),
        };
        if better {
            best = Some(RayHit { t, edge });
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Endpoints {
    pub x: Vertex,
    pub y: Vertex,
    pub v_minus: (Vertex, Vertex),
    pub v_plus: (Vertex, Vertex),
}

/// `x` = greater-argument endpoint of the edge hit at `u_minus`,
/// `y` = smaller-argument endpoint of the edge hit at `u_plus`.
pub fn locate_endpoints(circuit: &Circuit, u_minus: f64, u_plus: f64) -> Result<Endpoints> {
    let lo = first_hit(circuit, u_minus).ok_or(Error::RayMiss { angle: u_minus })?;
    let hi = first_hit(circuit, u_plus).ok_or(Error::RayMiss { angle: u_plus })?;
    let (a, b) = lo.edge;
    let x = if cross(a, b) > 0 { b } else { a };
    let (a, b) = hi.edge;
    let y = if cross(a, b) > 0 { a } else { b };
    Ok(Endpoints {
        x,
        y,
        v_minus: lo.edge,
        v_plus: hi.edge,
    })
}

/// Both points are regeneration sites of the open cluster through them.
pub fn cluster_regeneration_ok(
    config: &EdgeConfig,
    x: Vertex,
    y: Vertex,
    q: f64,
    c: f64,
) -> Result<bool> {
    let w = config.window();
    let edges: Vec<(Vertex, Vertex)> = open_cluster(config, x, None)?
        .into_iter()
        .map(|e| w.edge_endpoints(e))
        .collect();
    if !edges.iter().any(|&(a, b)| a == y || b == y) && x != y {
        return Ok(false);
    }
    Ok(
        is_regeneration_site(&edges, x, q, c, [0.0, 0.0], DEFAULT_DENSITY)
            && is_regeneration_site(&edges, y, q, c, [0.0, 0.0], DEFAULT_DENSITY),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub u_minus: f64,
    pub u_plus: f64,
    pub endpoints: Endpoints,
    pub success: bool,
}

/// Draws the two uniform search angles and locates the endpoints on `circuit`; success iff both
/// are regeneration sites, at the cluster parameters, of the shape named by `rule`.
pub fn select_endpoints<R: Rng + ?Sized>(
    config: &EdgeConfig,
    circuit: &Circuit,
    j: usize,
    params: &ResampleParams,
    rule: SelectionRule,
    rng: &mut R,
) -> Result<Selection> {
    let t = params.theta();
    let w = params.search_width();
    let base_lo = j as f64 * t + t / 4.0;
    let base_hi = (j + 1) as f64 * t - t / 4.0;
    let u_minus = base_lo - w * rng.gen::<f64>();
    let u_plus = base_hi + w * rng.gen::<f64>();
    let endpoints = locate_endpoints(circuit, u_minus, u_plus)?;
    let (x, y) = (endpoints.x, endpoints.y);
    let (q, c) = (params.cluster_q(), params.cluster_c());
    let success = x != y
        && cross(x, y) > 0
        && match rule {
            SelectionRule::Cluster => cluster_regeneration_ok(config, x, y, q, c)?,
            SelectionRule::Circuit => {
                let edges: Vec<(Vertex, Vertex)> = circuit.edges().collect();
                is_regeneration_site(&edges, x, q, c, [0.0, 0.0], DEFAULT_DENSITY)
                    && is_regeneration_site(&edges, y, q, c, [0.0, 0.0], DEFAULT_DENSITY)
            }
        };
    Ok(Selection {
        u_minus,
        u_plus,
        endpoints,
        success,
    })
}
