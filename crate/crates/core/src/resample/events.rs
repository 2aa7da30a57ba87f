use serde::{Deserialize, Serialize};

use super::psi::{PsiFrame, SectorRegion};
use crate::geometry::{convex_hull_points, distance_to_polygon_boundary, signed_area2};
use crate::lattice::{EdgeConfig, Vertex};

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

fn dist(a: Vertex, b: Vertex) -> f64 {
    ((a - b).norm_sq() as f64).sqrt()
}

/// `√ln` clamped at zero for short separations.
fn sqrt_log(d: f64) -> f64 {
    d.ln().max(0.0).sqrt()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GacReport {
    pub connected: bool,
    pub cone: bool,
    pub diameter: bool,
    pub area: bool,
    pub captured: f64,
    pub triangle: f64,
    pub required: f64,
}

impl GacReport {
    pub fn holds(&self) -> bool {
        self.connected && self.cone && self.diameter && self.area
    }
}

/// Largest pairwise distance of a vertex set.
pub fn diameter(points: &[Vertex]) -> f64 {
    let hull = convex_hull_points(points);
    let mut best = 0i64;
    for (i, a) in hull.iter().enumerate() {
        for b in &hull[i + 1..] {
            best = best.max((*a - *b).norm_sq());
        }
    }
    (best as f64).sqrt()
}

/// Area of the region bounded by `[0, x]`, the path and `[y, 0]`.
pub fn captured_area(gamma: &[Vertex]) -> f64 {
    let mut poly = Vec::with_capacity(gamma.len() + 1);
    poly.push(Vertex::ORIGIN);
    poly.extend_from_slice(gamma);
    signed_area2(&poly) as f64 / 2.0
}

pub fn triangle_area(x: Vertex, y: Vertex) -> f64 {
    (x.x as f64 * y.y as f64 - x.y as f64 * y.x as f64).abs() / 2.0
}

/// Bullet evaluation of the good-area-capture event on a known path.
pub fn gac_from_path(
    gamma: Option<&[Vertex]>,
    cone: bool,
    x: Vertex,
    y: Vertex,
    delta: f64,
) -> GacReport {
    let sep = dist(x, y);
    let triangle = triangle_area(x, y);
    let required = triangle + delta * sep.powf(1.5) * sqrt_log(sep);
    let Some(g) = gamma else {
        return GacReport {
            cone,
            triangle,
            required,
            ..Default::default()
        };
    };
    let captured = captured_area(g);
    GacReport {
        connected: true,
        cone,
        diameter: diameter(g) <= 2.0 * sep + 1e-9,
        area: captured >= required,
        captured,
        triangle,
        required,
    }
}

pub fn check_gac(config: &EdgeConfig, frame: &PsiFrame, delta: f64) -> GacReport {
    let mut mark = Vec::new();
    let (ev, gamma) = frame.events(config, &mut mark);
    gac_from_path(
        gamma.as_deref(),
        ev.cone,
        frame.region.x,
        frame.region.y,
        delta,
    )
}

/// Distance from `z` (inside the sector) to the complement of the sector.
pub fn distance_to_sector_complement(x: Vertex, y: Vertex, z: [f64; 2]) -> f64 {
    let ray = |r: Vertex| {
        let d = r.to_f64();
        let n = norm(d);
        let u = [d[0] / n, d[1] / n];
        let t = z[0] * u[0] + z[1] * u[1];
        if t <= 0.0 {
            norm(z)
        } else {
            (z[0] * u[1] - z[1] * u[0]).abs()
        }
    };
    ray(x).min(ray(y))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SidReport {
    pub holds: bool,
    pub depth_required: f64,
    pub deviation_required: f64,
    pub best_deviation: f64,
}

/// Significant inward deviation: some point of the path is deep inside the
/// sector and far from the boundary of `conv({0, x, y} ∪ γ)`.
pub fn sid_from_path(gamma: &[Vertex], x: Vertex, y: Vertex, delta: f64, q0: f64) -> SidReport {
    let sep = dist(x, y);
    let depth_required = sep * q0.sin() / 3.0;
    let deviation_required = delta * sep.sqrt() * sqrt_log(sep);
    let mut pts = gamma.to_vec();
    pts.push(Vertex::ORIGIN);
    let hull: Vec<[f64; 2]> = convex_hull_points(&pts)
        .iter()
        .map(|v| v.to_f64())
        .collect();
    let mut best: f64 = 0.0;
    let mut holds = false;
    for w in gamma.windows(2) {
        let (a, b) = (w[0].to_f64(), w[1].to_f64());
        for k in 0..8 {
            let t = k as f64 / 8.0;
            let z = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            if distance_to_sector_complement(x, y, z) < depth_required {
                continue;
            }
            let d = distance_to_polygon_boundary(z, &hull);
            best = best.max(d);
            if d >= deviation_required {
                holds = true;
            }
        }
    }
    SidReport {
        holds,
        depth_required,
        deviation_required,
        best_deviation: best,
    }
}

pub fn check_sid(config: &EdgeConfig, region: &SectorRegion, delta: f64, q0: f64) -> SidReport {
    match super::psi::gamma_path(config, region) {
        Some(g) => sid_from_path(&g, region.x, region.y, delta, q0),
        None => SidReport::default(),
    }
}
