//! Inverse correlation length, the unit-area Wulff polygon, global
//! distortion and radial constants.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::{arg, max_angular_gap};
use crate::dynamics::{estimate_connectivity_in, Equilibration, RcmParams};
use crate::error::{invalid, Error, Result};
use crate::geometry::{extract_outermost_circuit, mfl, Circuit};
use crate::lattice::{EdgeConfig, Vertex, Window};
use crate::rng::substream;
use crate::stats::weighted_linear_fit;

pub const OCTANT_DIRECTIONS: usize = 9;
pub const MIN_BOUNDARY_SAMPLES: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRange {
    pub k_min: u32,
    pub k_max: u32,
}

impl FitRange {
    pub fn validate(&self) -> Result<()> {
        if self.k_min == 0 || self.k_max <= self.k_min {
            return invalid(format!(
                "fit range [{}, {}] needs 1 <= k_min < k_max",
                self.k_min, self.k_max
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiSettings {
    pub fit: FitRange,
    pub trials: u64,
    #[serde(default)]
    pub equilibration: Equilibration,
}

impl XiSettings {
    /// Window large enough that the farthest target sits well inside.
    pub fn window(&self) -> Result<Window> {
        Window::new(self.fit.k_max as i32 + 6)
    }
}

/// Lattice point `k·u` truncated toward zero, so the eight lattice
/// symmetries map targets onto targets.
pub fn lattice_target(direction: [f64; 2], k: u32) -> Vertex {
    let f = |c: f64| ((k as f64 * c.abs() + 1e-9).floor() * c.signum()) as i32;
    Vertex::new(f(direction[0]), f(direction[1]))
}

/// Weighted least-squares slope of `−ln P̂(0 ↔ ⌊k u⌋)` against `k`.
pub fn estimate_xi<R: rand::Rng + ?Sized>(
    params: &RcmParams,
    window: Window,
    direction: [f64; 2],
    fit: FitRange,
    trials: u64,
    schedule: Equilibration,
    rng: &mut R,
) -> Result<(f64, f64)> {
    fit.validate()?;
    let norm = direction[0].hypot(direction[1]);
    if !(norm > 0.0) {
        return invalid("direction must be nonzero");
    }
    let u = [direction[0] / norm, direction[1] / norm];
    let (mut xs, mut ys, mut ws) = (Vec::new(), Vec::new(), Vec::new());
    for k in fit.k_min..=fit.k_max {
        let target = lattice_target(u, k);
        let est = estimate_connectivity_in(params, window, target, None, trials, schedule, rng)?;
        if est.hits == 0 {
            return Err(Error::InsufficientTrials { k });
        }
        let se = est.stderr.max(1.0 / trials as f64);
        xs.push(k as f64);
        ys.push(-est.value.ln());
        ws.push((est.value / se).powi(2));
    }
    let f = weighted_linear_fit(&xs, &ys, &ws)?;
    Ok((f.slope, f.slope_stderr))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiSamples {
    pub directions: Vec<[f64; 2]>,
    pub xi: Vec<f64>,
    pub stderr: Vec<f64>,
    pub fit: FitRange,
}

impl XiSamples {
    pub fn constant(count: usize, value: f64) -> Self {
        let directions = (0..count)
            .map(|i| unit(TAU * i as f64 / count as f64))
            .collect();
        XiSamples {
            directions,
            xi: vec![value; count],
            stderr: vec![0.0; count],
            fit: FitRange { k_min: 1, k_max: 2 },
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        XiSamples {
            xi: self.xi.iter().map(|x| x * factor).collect(),
            stderr: self.stderr.iter().map(|s| s * factor).collect(),
            ..self.clone()
        }
    }
}

fn unit(angle: f64) -> [f64; 2] {
    [angle.cos(), angle.sin()]
}

pub fn octant_angle(i: usize) -> f64 {
    i as f64 * PI / 32.0
}

/// The eight images of an angle under the lattice symmetry group.
pub fn symmetry_images(angle: f64) -> [f64; 8] {
    let mut out = [0.0; 8];
    for r in 0..4 {
        let rot = r as f64 * PI / 2.0;
        out[2 * r] = (angle + rot).rem_euclid(TAU);
        out[2 * r + 1] = (PI / 2.0 - angle + rot).rem_euclid(TAU);
    }
    out
}

/// Measures ξ on the nine first-octant directions and unfolds by symmetry.
pub fn measure_xi_octant(
    params: &RcmParams,
    settings: &XiSettings,
    seed: u64,
) -> Result<XiSamples> {
    let window = settings.window()?;
    let measured: Vec<(f64, f64)> = (0..OCTANT_DIRECTIONS)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            estimate_xi(
                params,
                window,
                unit(octant_angle(i)),
                settings.fit,
                settings.trials,
                settings.equilibration,
                &mut rng,
            )
        })
        .collect::<Result<_>>()?;
    let mut entries: Vec<(f64, f64, f64)> = Vec::new();
    for (i, &(xi, se)) in measured.iter().enumerate() {
        for a in symmetry_images(octant_angle(i)) {
            if !entries
                .iter()
                .any(|e| (e.0 - a).abs() < 1e-9 || (TAU - (e.0 - a).abs()) < 1e-9)
            {
                entries.push((a, xi, se));
            }
        }
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(XiSamples {
        directions: entries.iter().map(|e| unit(e.0)).collect(),
        xi: entries.iter().map(|e| e.1).collect(),
        stderr: entries.iter().map(|e| e.2).collect(),
        fit: settings.fit,
    })
}

/// z-scores of ξ at the eight images of `angle` against the first image.
pub fn symmetry_residuals(
    params: &RcmParams,
    settings: &XiSettings,
    angle: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let window = settings.window()?;
    let est: Vec<(f64, f64)> = symmetry_images(angle)
        .into_par_iter()
        .enumerate()
        .map(|(i, a)| {
            let mut rng = substream(seed, 100 + i as u64);
            estimate_xi(
                params,
                window,
                unit(a),
                settings.fit,
                settings.trials,
                settings.equilibration,
                &mut rng,
            )
        })
        .collect::<Result<_>>()?;
    let (x0, s0) = est[0];
    Ok(est[1..]
        .iter()
        .map(|&(x, s)| (x - x0).abs() / (s * s + s0 * s0).sqrt().max(1e-300))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WulffKey {
    pub p: f64,
    pub q: f64,
    pub k_min: u32,
    pub k_max: u32,
    pub trials: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WulffProfile {
    pub lambda: f64,
    pub polygon: Vec<[f64; 2]>,
    pub xi: XiSamples,
    pub params: Option<WulffKey>,
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        / 2.0
}

/// Keeps the part of a convex polygon with `(t, u) <= h`.
pub fn clip_halfplane(poly: &[[f64; 2]], u: [f64; 2], h: f64) -> Vec<[f64; 2]> {
    let side = |p: [f64; 2]| p[0] * u[0] + p[1] * u[1] - h;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let (sa, sb) = (side(a), side(b));
        if sa <= 0.0 {
            out.push(a);
        }
        if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
            let t = sa / (sa - sb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out.dedup_by(|a, b| (a[0] - b[0]).hypot(a[1] - b[1]) < 1e-12);
    if out.len() > 1
        && (out[0][0] - out[out.len() - 1][0]).hypot(out[0][1] - out[out.len() - 1][1]) < 1e-12
    {
        out.pop();
    }
    out
}

pub fn build_wulff(xi: &XiSamples) -> Result<WulffProfile> {
    if xi.directions.len() < 16 || xi.directions.len() != xi.xi.len() {
        return invalid("Wulff construction needs at least 16 directions with one xi each");
    }
    if xi.xi.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return invalid("xi values must be positive");
    }
    let args: Vec<f64> = xi.directions.iter().map(|&d| arg(d)).collect();
    let gap = max_angular_gap(&args);
    if gap >= PI * 0.9 {
        return invalid("directions must span the circle");
    }
    let xmax = xi.xi.iter().cloned().fold(0.0, f64::max);
    let r = 2.0 * xmax / (gap / 2.0).cos();
    let mut poly = vec![[-r, -r], [r, -r], [r, r], [-r, r]];
    for (d, &h) in xi.directions.iter().zip(&xi.xi) {
        let n = d[0].hypot(d[1]);
        poly = clip_halfplane(&poly, [d[0] / n, d[1] / n], h);
    }
    let area = polygon_area(&poly);
    if !(area > 0.0) {
        return invalid("degenerate Wulff polygon");
    }
    let lambda = 1.0 / area.sqrt();
    let polygon = poly
        .iter()
        .map(|p| [p[0] * lambda, p[1] * lambda])
        .collect();
    Ok(WulffProfile {
        lambda,
        polygon,
        xi: xi.clone(),
        params: None,
    })
}

impl WulffProfile {
    pub fn area(&self) -> f64 {
        polygon_area(&self.polygon)
    }

    /// Distance from the origin to the boundary along the ray at `angle`.
    pub fn radius_at(&self, angle: f64) -> f64 {
        let d = unit(angle);
        let n = self.polygon.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            let (a, b) = (self.polygon[i], self.polygon[(i + 1) % n]);
            let e = [b[0] - a[0], b[1] - a[1]];
            let den = d[0] * e[1] - d[1] * e[0];
            if den.abs() < 1e-15 {
                continue;
            }
            let t = (a[0] * e[1] - a[1] * e[0]) / den;
            let s = (a[0] * d[1] - a[1] * d[0]) / den;
            if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s) {
                best = best.min(t);
            }
        }
        best
    }

    pub fn boundary_point(&self, angle: f64) -> [f64; 2] {
        let r = self.radius_at(angle);
        [r * angle.cos(), r * angle.sin()]
    }

    pub fn perimeter(&self) -> f64 {
        let n = self.polygon.len();
        (0..n)
            .map(|i| {
                let (a, b) = (self.polygon[i], self.polygon[(i + 1) % n]);
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .sum()
    }

    /// At least `count` boundary points, spread by arc length, dilated by `scale`.
    pub fn densify(&self, count: usize, scale: f64) -> Vec<[f64; 2]> {
        let count = count.max(MIN_BOUNDARY_SAMPLES);
        let per = self.perimeter() / count as f64;
        let n = self.polygon.len();
        let mut out = Vec::with_capacity(count + n);
        for i in 0..n {
            let (a, b) = (self.polygon[i], self.polygon[(i + 1) % n]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            let k = (len / per).ceil().max(1.0) as usize;
            for s in 0..k {
                let t = s as f64 / k as f64;
                out.push([
                    scale * (a[0] + t * (b[0] - a[0])),
                    scale * (a[1] + t * (b[1] - a[1])),
                ]);
            }
        }
        out
    }

    /// Vertices with three consecutive points collinear within `tol`.
    pub fn collinear_violations(&self, tol: f64) -> usize {
        let n = self.polygon.len();
        (0..n)
            .filter(|&i| {
                let (a, b, c) = (
                    self.polygon[(i + n - 1) % n],
                    self.polygon[i],
                    self.polygon[(i + 1) % n],
                );
                ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs() < tol
            })
            .count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Inner and outer radial constants: 0.8 times the smallest and 1.25 times the
/// largest boundary radius along the ξ directions.
pub fn derive_radial_constants(w: &WulffProfile) -> (f64, f64) {
    let radii: Vec<f64> =
        w.xi.directions
            .iter()
            .map(|&d| w.radius_at(arg(d)))
            .collect();
    let min = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = radii.iter().cloned().fold(0.0, f64::max);
    (0.8 * min, 1.25 * max)
}

/// Uniform bucket grid for capped nearest-neighbour queries.
struct PointGrid {
    origin: [f64; 2],
    cell: f64,
    nx: i64,
    ny: i64,
    buckets: Vec<Vec<[f64; 2]>>,
}

impl PointGrid {
    fn new(points: &[[f64; 2]], cell: f64) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let nx = ((hi[0] - lo[0]) / cell).floor() as i64 + 1;
        let ny = ((hi[1] - lo[1]) / cell).floor() as i64 + 1;
        let mut buckets = vec![Vec::new(); (nx * ny) as usize];
        for p in points {
            let cx = ((p[0] - lo[0]) / cell).floor() as i64;
            let cy = ((p[1] - lo[1]) / cell).floor() as i64;
            buckets[(cy * nx + cx) as usize].push(*p);
        }
        PointGrid {
            origin: lo,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    /// Nearest distance from `p`, or any value above `cap` once it is known to exceed it.
    fn nearest(&self, p: [f64; 2], cap: f64) -> f64 {
        let fx = (p[0] - self.origin[0]) / self.cell;
        let fy = (p[1] - self.origin[1]) / self.cell;
        let (cx, cy) = (fx.floor() as i64, fy.floor() as i64);
        // Distance from p to the grid's bounding box, in cells.
        let gap_x = (-fx).max(fx - self.nx as f64).max(0.0);
        let gap_y = (-fy).max(fy - self.ny as f64).max(0.0);
        let outside = gap_x.hypot(gap_y) * self.cell;
        if outside > cap {
            return outside;
        }
        let mut best2 = f64::INFINITY;
        let rmax = self.nx.max(self.ny) + cx.abs().max(cy.abs()) + 1;
        for r in 0..=rmax {
            let ring = ((r - 1).max(0)) as f64 * self.cell;
            if best2.sqrt() <= ring || ring > cap {
                break;
            }
            for gy in (cy - r)..=(cy + r) {
                if gy < 0 || gy >= self.ny {
                    continue;
                }
                let edge_row = gy == cy - r || gy == cy + r;
                let step = if edge_row { 1 } else { (2 * r).max(1) };
                let mut gx = cx - r;
                while gx <= cx + r {
                    if gx >= 0 && gx < self.nx {
                        for q in &self.buckets[(gy * self.nx + gx) as usize] {
                            best2 = best2.min((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2));
                        }
                    }
                    gx += step;
                }
            }
        }
        best2.sqrt()
    }
}

fn directed_capped(points: &[[f64; 2]], shift: [f64; 2], grid: &PointGrid, cap: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for p in points {
        let d = grid.nearest([p[0] + shift[0], p[1] + shift[1]], cap);
        worst = worst.max(d);
        if worst > cap {
            break;
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distortion {
    pub gd: f64,
    pub centre: Vertex,
}

/// Minimal Hausdorff distance between the circuit and the boundary of the
/// Wulff shape scaled by `n` and shifted by an integer
/// vector `z`, searched coarse (stride 4) then fine; ties go to the smaller `z`.
pub fn global_distortion(c: &Circuit, w: &WulffProfile, n: f64) -> Result<Distortion> {
    if !(n > 0.0) {
        return invalid("scale n must be positive");
    }
    let circ = c.densify(3);
    let wulff = w.densify((4.0 * n * w.perimeter()).ceil() as usize, n);
    let circ_grid = PointGrid::new(&circ, 2.0);
    let wulff_grid = PointGrid::new(&wulff, 2.0);
    let eval = |z: Vertex, cap: f64| -> f64 {
        let zf = [z.x as f64, z.y as f64];
        let a = directed_capped(&wulff, zf, &circ_grid, cap);
        if a > cap {
            return a;
        }
        a.max(directed_capped(&circ, [-zf[0], -zf[1]], &wulff_grid, cap))
    };
    let pad = mfl(c).ceil() as i32;
    let (mut lo, mut hi) = (
        Vertex::new(i32::MAX, i32::MAX),
        Vertex::new(i32::MIN, i32::MIN),
    );
    for v in c.vertices() {
        lo = Vertex::new(lo.x.min(v.x), lo.y.min(v.y));
        hi = Vertex::new(hi.x.max(v.x), hi.y.max(v.y));
    }
    let (lo, hi) = (
        Vertex::new(lo.x - pad, lo.y - pad),
        Vertex::new(hi.x + pad, hi.y + pad),
    );
    let mut best = (f64::INFINITY, Vertex::new(lo.x, lo.y));
    let consider = |z: Vertex, best: &mut (f64, Vertex)| {
        let d = eval(z, best.0);
        if d < best.0 || (d == best.0 && z < best.1) {
            *best = (d, z);
        }
    };
    let mut x = lo.x;
    while x <= hi.x {
        let mut y = lo.y;
        while y <= hi.y {
            consider(Vertex::new(x, y), &mut best);
            y += 4;
        }
        x += 4;
    }
    let coarse = best.1;
    for dx in -4..=4 {
        for dy in -4..=4 {
            let z = Vertex::new(coarse.x + dx, coarse.y + dy);
            if z.x < lo.x || z.x > hi.x || z.y < lo.y || z.y > hi.y {
                continue;
            }
            consider(z, &mut best);
        }
    }
    Ok(Distortion {
        gd: best.0,
        centre: best.1,
    })
}

/// Lattice circuit tracing the boundary of the unit faces whose centres lie
/// in the Wulff shape scaled by `n` around `centre`.
pub fn wulff_circuit(w: &WulffProfile, n: f64, centre: Vertex) -> Result<Circuit> {
    if !(n > 0.0) {
        return invalid("scale n must be positive");
    }
    let rmax = w
        .polygon
        .iter()
        .map(|p| p[0].hypot(p[1]))
        .fold(0.0, f64::max)
        * n;
    let l = rmax.ceil() as i32 + centre.x.abs().max(centre.y.abs()) + 3;
    let window = Window::new(l)?;
    let poly: Vec<[f64; 2]> = w
        .polygon
        .iter()
        .map(|p| [n * p[0] + centre.x as f64, n * p[1] + centre.y as f64])
        .collect();
    let inside = |fx: i32, fy: i32| point_in_convex(&poly, [fx as f64 + 0.5, fy as f64 + 0.5]);
    let mut config = EdgeConfig::closed(window);
    for e in 0..window.edge_count() {
        let (a, b) = window.edge_endpoints(e);
        // faces on either side of the edge
        let (f1, f2) = if a.y == b.y {
            ((a.x, a.y), (a.x, a.y - 1))
        } else {
            ((a.x, a.y), (a.x - 1, a.y))
        };
        if inside(f1.0, f1.1) != inside(f2.0, f2.1) {
            config.set(e, true);
        }
    }
    extract_outermost_circuit(&config, centre)?.ok_or_else(|| {
        Error::InvalidInput("scaled profile too small to enclose a lattice face".into())
    })
}

fn point_in_convex(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = poly.len();
    (0..n).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0
    })
}

/// Directory-backed store of profiles keyed by their measurement parameters.
#[derive(Clone, Debug)]
pub struct WulffCache {
    dir: PathBuf,
}

impl WulffCache {
    pub fn new(dir: impl AsRef<Path>) -> Self {
        WulffCache {
            dir: dir.as_ref().to_path_buf(),
        }
    }

    pub fn path_for(&self, key: &WulffKey) -> PathBuf {
        self.dir.join(format!(
            "wulff_p{:.6}_q{:.6}_k{}-{}_t{}.json",
            key.p, key.q, key.k_min, key.k_max, key.trials
        ))
    }

    pub fn load_or_build(
        &self,
        key: WulffKey,
        build: impl FnOnce() -> Result<WulffProfile>,
    ) -> Result<WulffProfile> {
        let path = self.path_for(&key);
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(w) = WulffProfile::from_json(&text) {
                if w.params == Some(key) {
                    return Ok(w);
                }
            }
        }
        let mut w = build()?;
        w.params = Some(key);
        std::fs::create_dir_all(&self.dir)?;
        std::fs::write(&path, w.to_json()?)?;
        Ok(w)
    }
}

/// Measures ξ on the octant and builds the profile.
pub fn measure_wulff(params: &RcmParams, settings: &XiSettings, seed: u64) -> Result<WulffProfile> {
    let xi = measure_xi_octant(params, settings, seed)?;
    let mut w = build_wulff(&xi)?;
    w.params = Some(WulffKey {
        p: params.p(),
        q: params.q(),
        k_min: settings.fit.k_min,
        k_max: settings.fit.k_max,
        trials: settings.trials,
    });
    Ok(w)
}
