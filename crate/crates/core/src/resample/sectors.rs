use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::params::{sector_of, ResampleParams};
use crate::cones::{angle_between, arg};
use crate::geometry::{convex_hull, local_roughness_with_hull, Circuit};
use crate::lattice::Vertex;
use crate::wulff::clip_halfplane;

/// Point where the ray at `angle` leaves a polygon containing the origin,
/// with the tangent direction there (outgoing edge at vertices).
pub fn hull_ray_point(hull: &[[f64; 2]], angle: f64) -> Option<([f64; 2], [f64; 2])> {
    let d = [angle.cos(), angle.sin()];
    let n = hull.len();
    let mut best: Option<(f64, f64, usize)> = None;
    for i in 0..n {
        let (a, b) = (hull[i], hull[(i + 1) % n]);
        let e = [b[0] - a[0], b[1] - a[1]];
        let den = d[0] * e[1] - d[1] * e[0];
        if den.abs() < 1e-15 {
            continue;
        }
        let t = (a[0] * e[1] - a[1] * e[0]) / den;
        let s = (a[0] * d[1] - a[1] * d[0]) / den;
        if t > 0.0
            && (-1e-12..=1.0 + 1e-12).contains(&s)
            && best.is_none_or(|(bt, _, _)| t < bt - 1e-12)
        {
            best = Some((t, s, i));
        }
    }
    let (t, s, i) = best?;
    let point = [t * d[0], t * d[1]];
    let edge = if s >= 1.0 - 1e-9 { (i + 1) % n } else { i };
    let (a, b) = (hull[edge], hull[(edge + 1) % n]);
    Some((point, [b[0] - a[0], b[1] - a[1]]))
}

fn hull_f64(c: &Circuit) -> Vec<[f64; 2]> {
    convex_hull(c).iter().map(|v| v.to_f64()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurningSample {
    pub j: usize,
    pub chord: f64,
    pub turn: f64,
}

/// Chord and tangent turning between consecutive sector hull points.
pub fn turning_profile(c: &Circuit, params: &ResampleParams) -> Vec<TurningSample> {
    let hull = hull_f64(c);
    let t = params.theta();
    let pts: Vec<Option<([f64; 2], [f64; 2])>> = (1..=params.m_n() + 1)
        .map(|j| hull_ray_point(&hull, j as f64 * t))
        .collect();
    (1..=params.m_n())
        .filter_map(|j| {
            let (z0, w0) = pts[j - 1]?;
            let (z1, w1) = pts[j]?;
            Some(TurningSample {
                j,
                chord: (z1[0] - z0[0]).hypot(z1[1] - z0[1]),
                turn: angle_between(w0, w1),
            })
        })
        .collect()
}

/// Sectors with moderate boundary turning.
pub fn classify_mbt(c: &Circuit, params: &ResampleParams) -> BTreeSet<usize> {
    let (len, ang) = (params.mbt_length(), params.mbt_angle());
    turning_profile(c, params)
        .into_iter()
        .filter(|s| s.chord <= len + 1e-9 && s.turn <= ang + 1e-12)
        .map(|s| s.j)
        .collect()
}

/// Sectors holding a circuit vertex whose local roughness reaches the threshold.
pub fn favourable_sectors(c: &Circuit, params: &ResampleParams) -> BTreeSet<usize> {
    let hull = convex_hull(c);
    let thr = params.roughness_threshold();
    let mut fav = BTreeSet::new();
    for &v in c.vertices() {
        if v == Vertex::ORIGIN || local_roughness_with_hull(v, &hull) < thr {
            continue;
        }
        let a = arg(v.to_f64());
        if let Some(j) = sector_of(params, a) {
            fav.insert(j);
        }
        let r = a / params.theta();
        if (r - r.round()).abs() < 1e-12 {
            if let Some(j) = sector_of(params, (r.round() - 0.5) * params.theta()) {
                fav.insert(j);
            }
        }
    }
    fav
}

pub fn classify_unfav(c: &Circuit, params: &ResampleParams) -> BTreeSet<usize> {
    let fav = favourable_sectors(c, params);
    (1..=params.m_n()).filter(|j| !fav.contains(j)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PentagonReport {
    pub area_t: f64,
    pub area_e0: f64,
    pub area_e1: f64,
    pub criterion_rhs: f64,
    pub e0_bound: f64,
    pub e1_bound: f64,
    pub tz_bound: f64,
    pub e_region: Vec<[f64; 2]>,
}

impl PentagonReport {
    pub fn bounds_hold(&self) -> bool {
        self.area_e0 <= self.e0_bound && self.area_e1 <= self.e1_bound
    }
}

fn area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    (0..n)
        .map(|i| poly[i][0] * poly[(i + 1) % n][1] - poly[(i + 1) % n][0] * poly[i][1])
        .sum::<f64>()
        .abs()
        / 2.0
}

/// Half-plane `{t : (t, u) <= h}` holding the origin side of the line through
/// `a` with direction `d` (the far side when `far`).
fn side_of_line(a: [f64; 2], d: [f64; 2], far: bool) -> ([f64; 2], f64) {
    let mut u = [d[1], -d[0]];
    let mut h = u[0] * a[0] + u[1] * a[1];
    if h < 0.0 {
        u = [-u[0], -u[1]];
        h = -h;
    }
    if far {
        ([-u[0], -u[1]], -h)
    } else {
        (u, h)
    }
}

/// Triangle on the origin, `x` and `y`, plus the part of the sector region
/// inside both tangent lines and beyond the chord `[x, y]`, split in two.
pub fn pentagon_bound(
    c: &Circuit,
    j: usize,
    x: Vertex,
    y: Vertex,
    params: &ResampleParams,
) -> Option<PentagonReport> {
    let hull = hull_f64(c);
    let t = params.theta();
    let (zj, wj) = hull_ray_point(&hull, j as f64 * t)?;
    let (zk, wk) = hull_ray_point(&hull, (j + 1) as f64 * t)?;
    let (xf, yf) = (x.to_f64(), y.to_f64());
    let big = 4.0 * hull.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
    let scale = |p: [f64; 2]| {
        let r = p[0].hypot(p[1]);
        [p[0] / r * big, p[1] / r * big]
    };
    let mut region = vec![[0.0, 0.0], scale(xf), scale(yf)];
    for (z, w) in [(zj, wj), (zk, wk)] {
        let (u, h) = side_of_line(z, w, false);
        region = clip_halfplane(&region, u, h);
    }
    let chord = [yf[0] - xf[0], yf[1] - xf[1]];
    let (u, h) = side_of_line(xf, chord, true);
    let e = clip_halfplane(&region, u, h);
    let split = [zk[0] - zj[0], zk[1] - zj[1]];
    let (e0, e1) = if split[0].hypot(split[1]) < 1e-12 {
        (e.clone(), Vec::new())
    } else {
        let (u0, h0) = side_of_line(zj, split, false);
        let (u1, h1) = side_of_line(zj, split, true);
        (clip_halfplane(&e, u0, h0), clip_halfplane(&e, u1, h1))
    };
    let chord_len = split[0].hypot(split[1]);
    Some(PentagonReport {
        area_t: super::events::triangle_area(x, y),
        area_e0: area(&e0),
        area_e1: area(&e1),
        criterion_rhs: params.e0_bound() + params.e1_bound(),
        e0_bound: params.e0_bound(),
        e1_bound: params.e1_bound(),
        tz_bound: 0.5 * chord_len * chord_len * angle_between(wj, wk),
        e_region: e,
    })
}

/// Point-in-convex-polygon test with tolerance.
pub fn in_convex(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let sign = if area_signed(poly) >= 0.0 { 1.0 } else { -1.0 };
    (0..n).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        sign * ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) >= -1e-9
    })
}

fn area_signed(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| poly[i][0] * poly[(i + 1) % n][1] - poly[(i + 1) % n][0] * poly[i][1])
        .sum::<f64>()
        / 2.0
}
