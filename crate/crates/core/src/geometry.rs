//! Circuit extraction by face flood-fill and exact lattice geometry of
//! circuits: area, convex hull, roughness, facet length, Hausdorff distance.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{EdgeConfig, Vertex, Window};

/// Closed simple lattice polygon, counterclockwise, stored from its
/// southwest corner.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<[i32; 2]>", into = "Vec<[i32; 2]>")]
pub struct Circuit {
    vertices: Vec<Vertex>,
}

impl TryFrom<Vec<[i32; 2]>> for Circuit {
    type Error = crate::error::Error;
    fn try_from(v: Vec<[i32; 2]>) -> Result<Self> {
        Circuit::new(v.into_iter().map(|[x, y]| Vertex::new(x, y)).collect())
    }
}

impl From<Circuit> for Vec<[i32; 2]> {
    fn from(c: Circuit) -> Self {
        c.vertices.iter().map(|v| [v.x, v.y]).collect()
    }
}

impl Circuit {
    pub fn new(mut vertices: Vec<Vertex>) -> Result<Self> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 4 {
            return invalid("a circuit needs at least 4 vertices");
        }
        let n = vertices.len();
        for i in 0..n {
            if !vertices[i].is_neighbour(vertices[(i + 1) % n]) {
                return invalid(format!(
                    "{} and {} are not neighbours",
                    vertices[i],
                    vertices[(i + 1) % n]
                ));
            }
        }
        let distinct: HashSet<Vertex> = vertices.iter().copied().collect();
        if distinct.len() != n {
            return invalid("circuit revisits a vertex");
        }
        if signed_area2(&vertices) <= 0 {
            return invalid("circuit must be counterclockwise");
        }
        let sw = (0..n).min_by_key(|&i| vertices[i]).expect("nonempty");
        vertices.rotate_left(sw);
        Ok(Circuit { vertices })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Directed edges in traversal order.
    pub fn edges(&self) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Undirected edges as ordered (lo, hi) pairs.
    pub fn edge_set(&self) -> HashSet<(Vertex, Vertex)> {
        self.edges()
            .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect()
    }

    pub fn contains_vertex(&self, v: Vertex) -> bool {
        self.vertices.contains(&v)
    }

    pub fn position(&self, v: Vertex) -> Option<usize> {
        self.vertices.iter().position(|&u| u == v)
    }

    pub fn translate(&self, t: Vertex) -> Circuit {
        Circuit {
            vertices: self.vertices.iter().map(|&v| v + t).collect(),
        }
    }

    /// Quarter-turn counterclockwise about the origin.
    pub fn rotate90(&self) -> Circuit {
        Circuit::new(
            self.vertices
                .iter()
                .map(|v| Vertex::new(-v.y, v.x))
                .collect(),
        )
        .expect("rotation preserves validity")
    }

    /// Whether the lattice point lies in the open interior.
    pub fn encloses(&self, p: Vertex) -> bool {
        if self.contains_vertex(p) {
            return false;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if a.x == b.x && a.x > p.x && a.y.min(b.y) == p.y {
                inside = !inside;
            }
        }
        inside
    }

    /// Even-odd test for an arbitrary point; points on the curve count as outside.
    pub fn encloses_point(&self, p: [f64; 2]) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            let (ax, ay, bx, by) = (a.x as f64, a.y as f64, b.x as f64, b.y as f64);
            if point_segment_distance(p, [ax, ay], [bx, by]) < 1e-12 {
                return false;
            }
            if (ay > p[1]) != (by > p[1]) {
                let x = ax + (p[1] - ay) * (bx - ax) / (by - ay);
                if x > p[0] {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Points along every edge: both endpoints plus `per_edge` interior points.
    pub fn densify(&self, per_edge: usize) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.len() * (per_edge + 1));
        for (a, b) in self.edges() {
            for k in 0..=per_edge {
                let t = k as f64 / (per_edge + 1) as f64;
                out.push([
                    a.x as f64 + t * (b.x - a.x) as f64,
                    a.y as f64 + t * (b.y - a.y) as f64,
                ]);
            }
        }
        out
    }
}

/// Twice the signed shoelace area of a closed vertex polygon.
pub fn signed_area2(vertices: &[Vertex]) -> i64 {
    let n = vertices.len();
    (0..n)
        .map(|i| {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            a.x as i64 * b.y as i64 - b.x as i64 * a.y as i64
        })
        .sum()
}

pub fn interior_area(c: &Circuit) -> f64 {
    signed_area2(&c.vertices) as f64 / 2.0
}

pub fn sw_corner(c: &Circuit) -> Vertex {
    c.vertices[0]
}

#[inline]
fn cross(o: Vertex, a: Vertex, b: Vertex) -> i64 {
    (a.x - o.x) as i64 * (b.y - o.y) as i64 - (a.y - o.y) as i64 * (b.x - o.x) as i64
}

/// Counterclockwise hull with collinear points removed, starting at the
/// lexicographically smallest point. Fewer than 3 points when degenerate.
pub fn convex_hull_points(points: &[Vertex]) -> Vec<Vertex> {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vertex> = Vec::with_capacity(pts.len() + 1);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

pub fn convex_hull(c: &Circuit) -> Vec<Vertex> {
    let h = convex_hull_points(&c.vertices);
    assert!(h.len() >= 3, "circuit vertices are never collinear");
    h
}

/// Squared distance from `p` to segment `[a, b]` as an exact fraction.
fn segment_dist2(p: Vertex, a: Vertex, b: Vertex) -> (i128, i128) {
    let (dx, dy) = ((b.x - a.x) as i128, (b.y - a.y) as i128);
    let (wx, wy) = ((p.x - a.x) as i128, (p.y - a.y) as i128);
    let t = wx * dx + wy * dy;
    let den = dx * dx + dy * dy;
    if den == 0 || t <= 0 {
        return (wx * wx + wy * wy, 1);
    }
    if t >= den {
        let (ux, uy) = ((p.x - b.x) as i128, (p.y - b.y) as i128);
        return (ux * ux + uy * uy, 1);
    }
    let c = dx * wy - dy * wx;
    (c * c, den)
}

fn frac_lt(a: (i128, i128), b: (i128, i128)) -> bool {
    a.0 * b.1 < b.0 * a.1
}

fn boundary_dist2(p: Vertex, hull: &[Vertex]) -> (i128, i128) {
    let n = hull.len();
    let mut best = segment_dist2(p, hull[n - 1], hull[0]);
    for i in 0..n - 1 {
        let d = segment_dist2(p, hull[i], hull[i + 1]);
        if frac_lt(d, best) {
            best = d;
        }
    }
    best
}

fn frac_sqrt(f: (i128, i128)) -> f64 {
    (f.0 as f64 / f.1 as f64).sqrt()
}

pub fn local_roughness_with_hull(v: Vertex, hull: &[Vertex]) -> f64 {
    frac_sqrt(boundary_dist2(v, hull))
}

pub fn local_roughness(c: &Circuit, v: Vertex) -> Result<f64> {
    if !c.contains_vertex(v) {
        return invalid(format!("{v} is not a circuit vertex"));
    }
    Ok(local_roughness_with_hull(v, &convex_hull(c)))
}

pub fn mlr_with_hull(c: &Circuit, hull: &[Vertex]) -> f64 {
    let mut best = (0i128, 1i128);
    for &v in &c.vertices {
        let d = boundary_dist2(v, hull);
        if frac_lt(best, d) {
            best = d;
        }
    }
    frac_sqrt(best)
}

pub fn mlr(c: &Circuit) -> f64 {
    mlr_with_hull(c, &convex_hull(c))
}

pub fn mfl_of_hull(hull: &[Vertex]) -> f64 {
    let n = hull.len();
    (0..n)
        .map(|i| (hull[(i + 1) % n] - hull[i]).norm_sq())
        .max()
        .map_or(0.0, |d| (d as f64).sqrt())
}

pub fn mfl(c: &Circuit) -> f64 {
    mfl_of_hull(&convex_hull(c))
}

pub fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let (wx, wy) = (p[0] - a[0], p[1] - a[1]);
    let den = dx * dx + dy * dy;
    let t = if den > 0.0 {
        ((wx * dx + wy * dy) / den).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((wx - t * dx).powi(2) + (wy - t * dy).powi(2)).sqrt()
}

/// Distance from a point to the boundary of a closed polygon.
pub fn distance_to_polygon_boundary(p: [f64; 2], polygon: &[[f64; 2]]) -> f64 {
    let n = polygon.len();
    (0..n)
        .map(|i| point_segment_distance(p, polygon[i], polygon[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

fn directed_hausdorff(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let mut worst = 0.0f64;
    for p in a {
        let mut best = f64::INFINITY;
        for q in b {
            let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
            if d < best {
                best = d;
                if best <= worst {
                    break;
                }
            }
        }
        worst = worst.max(best);
    }
    worst.sqrt()
}

pub fn hausdorff_distance(a: &[[f64; 2]], b: &[[f64; 2]]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return invalid("Hausdorff distance needs nonempty point sets");
    }
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometrySummary {
    pub area: f64,
    pub mlr: f64,
    pub mfl: f64,
    pub sw: Vertex,
    pub hull: Vec<Vertex>,
}

impl GeometrySummary {
    pub fn of(c: &Circuit) -> Self {
        let hull = convex_hull(c);
        GeometrySummary {
            area: interior_area(c),
            mlr: mlr_with_hull(c, &hull),
            mfl: mfl_of_hull(&hull),
            sw: sw_corner(c),
            hull,
        }
    }
}

/// Unit faces of a window, indexed by their lower-left corner.
struct Faces {
    window: Window,
    side: i32,
}

const DX: [i32; 4] = [1, 0, -1, 0];
const DY: [i32; 4] = [0, 1, 0, -1];

impl Faces {
    fn new(window: Window) -> Self {
        Faces {
            window,
            side: 2 * window.half_width(),
        }
    }

    fn count(&self) -> usize {
        (self.side * self.side) as usize
    }

    fn contains(&self, fx: i32, fy: i32) -> bool {
        let l = self.window.half_width();
        fx >= -l && fx < l && fy >= -l && fy < l
    }

    fn index(&self, fx: i32, fy: i32) -> usize {
        let l = self.window.half_width();
        ((fy + l) * self.side + (fx + l)) as usize
    }

    fn at(&self, i: usize) -> (i32, i32) {
        let l = self.window.half_width();
        ((i as i32) % self.side - l, (i as i32) / self.side - l)
    }

    /// Edge crossed when stepping from face (fx, fy) in direction d.
    fn crossing(&self, fx: i32, fy: i32, d: usize) -> usize {
        let w = &self.window;
        match d {
            0 => w.north_index(fx + 1, fy),
            1 => w.east_index(fx, fy + 1),
            2 => w.north_index(fx, fy),
            _ => w.east_index(fx, fy),
        }
    }

    /// Faces reachable from outside the window crossing only non-open edges.
    fn reachable(&self, open: &dyn Fn(usize) -> bool) -> Vec<bool> {
        let mut seen = vec![false; self.count()];
        let mut queue = VecDeque::new();
        for (i, s) in seen.iter_mut().enumerate() {
            let (fx, fy) = self.at(i);
            if (0..4)
                .any(|d| !self.contains(fx + DX[d], fy + DY[d]) && !open(self.crossing(fx, fy, d)))
            {
                *s = true;
                queue.push_back(i);
            }
        }
        while let Some(i) = queue.pop_front() {
            let (fx, fy) = self.at(i);
            for d in 0..4 {
                let (gx, gy) = (fx + DX[d], fy + DY[d]);
                if self.contains(gx, gy) {
                    let j = self.index(gx, gy);
                    if !seen[j] && !open(self.crossing(fx, fy, d)) {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        seen
    }

    /// Face-adjacency component of `start` within `allowed`.
    fn component(&self, start: usize, allowed: &[bool]) -> Vec<bool> {
        let mut comp = vec![false; self.count()];
        comp[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let (fx, fy) = self.at(i);
            for d in 0..4 {
                let (gx, gy) = (fx + DX[d], fy + DY[d]);
                if self.contains(gx, gy) {
                    let j = self.index(gx, gy);
                    if allowed[j] && !comp[j] {
                        comp[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        comp
    }

    /// `comp` with its holes filled.
    fn fill(&self, comp: &[bool]) -> Vec<bool> {
        let mut outside = vec![false; self.count()];
        let mut queue = VecDeque::new();
        for i in 0..self.count() {
            let (fx, fy) = self.at(i);
            let on_rim = (0..4).any(|d| !self.contains(fx + DX[d], fy + DY[d]));
            if on_rim && !comp[i] {
                outside[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(i) = queue.pop_front() {
            let (fx, fy) = self.at(i);
            for d in 0..4 {
                let (gx, gy) = (fx + DX[d], fy + DY[d]);
                if self.contains(gx, gy) {
                    let j = self.index(gx, gy);
                    if !comp[j] && !outside[j] {
                        outside[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        outside.iter().map(|&o| !o).collect()
    }

    fn inside(&self, mask: &[bool], fx: i32, fy: i32) -> bool {
        self.contains(fx, fy) && mask[self.index(fx, fy)]
    }

    /// Counterclockwise boundary of a filled face set (inside on the left).
    fn trace(&self, mask: &[bool]) -> Option<Vec<Vertex>> {
        let start = (0..self.count())
            .filter(|&i| mask[i])
            .min_by_key(|&i| self.at(i))?;
        trace_boundary(
            self.at(start),
            &|fx, fy| self.inside(mask, fx, fy),
            4 * self.count() + 8,
        )
    }
}

/// Boundary walk of a filled face set from its lexicographically least face.
fn trace_boundary(
    start: (i32, i32),
    inside: &dyn Fn(i32, i32) -> bool,
    limit: usize,
) -> Option<Vec<Vertex>> {
    let origin = Vertex::new(start.0, start.1);
    let (mut v, mut heading) = (origin, 0usize);
    let mut path = vec![origin];
    loop {
        let mut next = None;
        for turn in [3usize, 0, 1, 2] {
            let d = (heading + turn) % 4;
            let (lf, rf) = side_faces(v, d);
            if inside(lf.0, lf.1) && !inside(rf.0, rf.1) {
                next = Some(d);
                break;
            }
        }
        let d = next?;
        v = Vertex::new(v.x + DX[d], v.y + DY[d]);
        heading = d;
        if v == origin {
            return Some(path);
        }
        path.push(v);
        if path.len() > limit {
            return None;
        }
    }
}

/// Faces on the left and right of the unit step from `v` in direction `d`.
fn side_faces(v: Vertex, d: usize) -> ((i32, i32), (i32, i32)) {
    let (x, y) = (v.x, v.y);
    match d {
        0 => ((x, y), (x, y - 1)),
        1 => ((x - 1, y), (x, y)),
        2 => ((x - 1, y - 1), (x - 1, y)),
        _ => ((x, y - 1), (x - 1, y - 1)),
    }
}

/// Outermost open circuit whose interior contains the unit face with
/// lower-left corner `face`, for the configuration given by `open`.
pub fn outermost_around_face(
    window: Window,
    open: &dyn Fn(usize) -> bool,
    face: Vertex,
) -> Option<Circuit> {
    let faces = Faces::new(window);
    if !faces.contains(face.x, face.y) {
        return None;
    }
    let reach = faces.reachable(open);
    let seed = faces.index(face.x, face.y);
    if reach[seed] {
        return None;
    }
    let unreachable: Vec<bool> = reach.iter().map(|&r| !r).collect();
    let comp = faces.component(seed, &unreachable);
    let filled = faces.fill(&comp);
    let path = faces.trace(&filled)?;
    let circuit = Circuit::new(path).ok()?;
    let all_open = circuit
        .edges()
        .all(|(a, b)| window.edge_between(a, b).is_some_and(open));
    all_open.then_some(circuit)
}

/// The outermost open circuit strictly enclosing `point`, if any.
pub fn extract_outermost_circuit(config: &EdgeConfig, point: Vertex) -> Result<Option<Circuit>> {
    let w = config.window();
    let l = w.half_width();
    if point.x.abs() >= l || point.y.abs() >= l {
        return invalid(format!("{point} must lie strictly inside the window"));
    }
    let open = |e: usize| config.is_open(e);
    let faces = Faces::new(w);
    let reach = faces.reachable(&open);
    let around = [
        (point.x - 1, point.y - 1),
        (point.x, point.y - 1),
        (point.x - 1, point.y),
        (point.x, point.y),
    ];
    if around.iter().any(|&(fx, fy)| reach[faces.index(fx, fy)]) {
        return Ok(None);
    }
    let c = outermost_around_face(w, &open, Vertex::new(point.x, point.y));
    Ok(c.filter(|c| c.encloses(point)))
}

/// Whether `v` is lexicographically at least `c` (the southwest half-plane).
#[inline]
pub fn in_sw_halfplane(v: Vertex, c: Vertex) -> bool {
    v.x > c.x || (v.x == c.x && v.y >= c.y)
}

/// The outermost open circuit with southwest corner `c_sw`: computed on the
/// configuration restricted to vertices lexicographically at least `c_sw`,
/// enclosing the face north-east of `c_sw`.
pub fn extract_sw_circuit(config: &EdgeConfig, c_sw: Vertex) -> Result<Option<Circuit>> {
    let w = config.window();
    let l = w.half_width();
    if c_sw.x.abs() >= l || c_sw.y.abs() >= l {
        return invalid(format!("{c_sw} must lie strictly inside the window"));
    }
    let open = |e: usize| {
        if !config.is_open(e) {
            return false;
        }
        let (a, b) = w.edge_endpoints(e);
        in_sw_halfplane(a, c_sw) && in_sw_halfplane(b, c_sw)
    };
    Ok(outermost_around_face(w, &open, c_sw).filter(|c| sw_corner(c) == c_sw))
}

/// Which circuit a [`FaceTracker`] follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrackedCircuit {
    /// Outermost circuit strictly enclosing a vertex.
    AroundPoint(Vertex),
    /// Outermost circuit of the configuration restricted to the half-plane
    /// at `c`, with southwest corner `c`.
    Southwest(Vertex),
}

/// Faces whose exterior reachability flipped in one update.
#[derive(Clone, Debug, Default)]
pub struct FaceChange {
    faces: Vec<usize>,
    now_reachable: bool,
}

impl FaceChange {
    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }
}

/// Exterior-reachable faces maintained under single-edge flips, so the
/// extracted circuit can be refreshed locally. By planar duality, opening
/// an edge can cut faces off only when its endpoints are already joined,
/// and closing one can only expose the region behind it.
#[derive(Clone, Debug)]
pub struct FaceTracker {
    faces: Faces,
    target: TrackedCircuit,
    reach: Vec<bool>,
    inner: Vec<bool>,
    inner_list: Vec<usize>,
    mark: Vec<u32>,
    vmark: Vec<u32>,
    epoch: u32,
}

impl Clone for Faces {
    fn clone(&self) -> Self {
        Faces {
            window: self.window,
            side: self.side,
        }
    }
}

impl std::fmt::Debug for Faces {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Faces(L = {})", self.window.half_width())
    }
}

impl FaceTracker {
    pub fn new(config: &EdgeConfig, target: TrackedCircuit) -> Result<Self> {
        let w = config.window();
        let (TrackedCircuit::AroundPoint(p) | TrackedCircuit::Southwest(p)) = target;
        if p.x.abs() >= w.half_width() || p.y.abs() >= w.half_width() {
            return invalid(format!("{p} must lie strictly inside the window"));
        }
        let faces = Faces::new(w);
        let n = faces.count();
        let mut t = FaceTracker {
            faces,
            target,
            reach: Vec::new(),
            inner: vec![false; n],
            inner_list: Vec::new(),
            mark: vec![0; n],
            vmark: vec![0; w.vertex_count()],
            epoch: 0,
        };
        t.reach = t.faces.reachable(&|e| t.is_open(config, e));
        if let Some((_, filled)) = t.extract(config) {
            t.set_inner(filled);
        }
        Ok(t)
    }

    fn is_open(&self, config: &EdgeConfig, e: usize) -> bool {
        if !config.is_open(e) {
            return false;
        }
        match self.target {
            TrackedCircuit::AroundPoint(_) => true,
            TrackedCircuit::Southwest(c) => {
                let (a, b) = self.faces.window.edge_endpoints(e);
                in_sw_halfplane(a, c) && in_sw_halfplane(b, c)
            }
        }
    }

    fn next_epoch(&mut self) -> u32 {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.vmark.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
        self.epoch
    }

    /// Faces on either side of edge `e`; `None` is the exterior.
    fn sides(&self, e: usize) -> [Option<usize>; 2] {
        let (a, b) = self.faces.window.edge_endpoints(e);
        let (f1, f2) = if a.y == b.y {
            let x = a.x.min(b.x);
            ((x, a.y), (x, a.y - 1))
        } else {
            let y = a.y.min(b.y);
            ((a.x - 1, y), (a.x, y))
        };
        let idx = |(fx, fy): (i32, i32)| {
            self.faces
                .contains(fx, fy)
                .then(|| self.faces.index(fx, fy))
        };
        [idx(f1), idx(f2)]
    }

    fn reachable_side(&self, f: Option<usize>) -> bool {
        f.is_none_or(|i| self.reach[i])
    }

    /// Updates reachability after edge `e` was flipped in `config`.
    pub fn apply(&mut self, config: &EdgeConfig, e: usize) -> FaceChange {
        let [f1, f2] = self.sides(e);
        let (r1, r2) = (self.reachable_side(f1), self.reachable_side(f2));
        if self.is_open(config, e) {
            if r1 && r2 && self.joined_without(config, e) {
                return self.cut_off(config, f1, f2);
            }
        } else if r1 != r2 {
            let start = if r1 { f2 } else { f1 }.expect("unreachable side is a window face");
            return self.expose(config, start);
        }
        FaceChange::default()
    }

    pub fn undo(&mut self, change: &FaceChange) {
        for &f in &change.faces {
            self.reach[f] = !change.now_reachable;
        }
    }

    /// Whether the change can alter the tracked circuit.
    pub fn touches_inner(&self, change: &FaceChange) -> bool {
        change.faces.iter().any(|&f| {
            if self.inner[f] {
                return true;
            }
            let (fx, fy) = self.faces.at(f);
            (0..4).any(|d| {
                let (gx, gy) = (fx + DX[d], fy + DY[d]);
                self.faces.contains(gx, gy) && self.inner[self.faces.index(gx, gy)]
            })
        })
    }

    /// Whether the endpoints of `e` are joined by an open path avoiding `e`.
    /// Searches from both ends in lockstep, so the cost is bounded by the
    /// smaller cluster when they are not.
    fn joined_without(&mut self, config: &EdgeConfig, e: usize) -> bool {
        let w = self.faces.window;
        let (a, b) = w.edge_endpoints(e);
        let eps = [self.next_epoch(), self.next_epoch()];
        let mut queues = [VecDeque::from([a]), VecDeque::from([b])];
        self.vmark[w.vertex_index(a)] = eps[0];
        self.vmark[w.vertex_index(b)] = eps[1];
        loop {
            for k in 0..2 {
                let Some(v) = queues[k].pop_front() else {
                    return false;
                };
                let mut met = false;
                w.for_each_incident(v, |idx, nb| {
                    if met || idx == e || !self.is_open(config, idx) {
                        return;
                    }
                    let j = w.vertex_index(nb);
                    if self.vmark[j] == eps[1 - k] {
                        met = true;
                    } else if self.vmark[j] != eps[k] {
                        self.vmark[j] = eps[k];
                        queues[k].push_back(nb);
                    }
                });
                if met {
                    return true;
                }
            }
        }
    }

    /// Searches from both sides of a newly opened edge in lockstep; the side
    /// that exhausts without reaching the exterior is no longer reachable.
    fn cut_off(&mut self, config: &EdgeConfig, f1: Option<usize>, f2: Option<usize>) -> FaceChange {
        let ep1 = self.next_epoch();
        let ep2 = self.next_epoch();
        let mut sides: Vec<(u32, VecDeque<usize>, Vec<usize>, bool)> = Vec::new();
        for (f, ep) in [(f1, ep1), (f2, ep2)] {
            match f {
                Some(i) => {
                    self.mark[i] = ep;
                    sides.push((ep, VecDeque::from([i]), vec![i], false));
                }
                None => sides.push((ep, VecDeque::new(), Vec::new(), true)),
            }
        }
        loop {
            for k in 0..2 {
                if sides[k].3 {
                    continue;
                }
                let Some(i) = sides[k].1.pop_front() else {
                    let faces = std::mem::take(&mut sides[k].2);
                    for &f in &faces {
                        self.reach[f] = false;
                    }
                    return FaceChange {
                        faces,
                        now_reachable: false,
                    };
                };
                let ep = sides[k].0;
                let (fx, fy) = self.faces.at(i);
                for d in 0..4 {
                    if self.is_open(config, self.faces.crossing(fx, fy, d)) {
                        continue;
                    }
                    let (gx, gy) = (fx + DX[d], fy + DY[d]);
                    if !self.faces.contains(gx, gy) {
                        sides[k].3 = true;
                        break;
                    }
                    let j = self.faces.index(gx, gy);
                    if self.mark[j] == ep || !self.reach[j] {
                        continue;
                    }
                    if self.mark[j] == sides[1 - k].0 {
                        // The sides still meet: nothing was cut off.
                        return FaceChange::default();
                    }
                    self.mark[j] = ep;
                    sides[k].1.push_back(j);
                    sides[k].2.push(j);
                }
            }
            if sides[0].3 && sides[1].3 {
                return FaceChange::default();
            }
        }
    }

    /// Floods the unreachable region behind a newly closed edge.
    fn expose(&mut self, config: &EdgeConfig, start: usize) -> FaceChange {
        self.reach[start] = true;
        let mut faces = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let (fx, fy) = self.faces.at(i);
            for d in 0..4 {
                let (gx, gy) = (fx + DX[d], fy + DY[d]);
                if !self.faces.contains(gx, gy) {
                    continue;
                }
                let j = self.faces.index(gx, gy);
                if !self.reach[j] && !self.is_open(config, self.faces.crossing(fx, fy, d)) {
                    self.reach[j] = true;
                    faces.push(j);
                    queue.push_back(j);
                }
            }
        }
        FaceChange {
            faces,
            now_reachable: true,
        }
    }

    /// The tracked circuit under the current reachability, with its filled
    /// face set; agrees with [`extract_outermost_circuit`] or
    /// [`extract_sw_circuit`] on the same configuration.
    pub fn extract(&mut self, config: &EdgeConfig) -> Option<(Circuit, Vec<usize>)> {
        let seed = match self.target {
            TrackedCircuit::AroundPoint(p) => {
                let around = [
                    (p.x - 1, p.y - 1),
                    (p.x, p.y - 1),
                    (p.x - 1, p.y),
                    (p.x, p.y),
                ];
                if around
                    .iter()
                    .any(|&(fx, fy)| self.reach[self.faces.index(fx, fy)])
                {
                    return None;
                }
                self.faces.index(p.x, p.y)
            }
            TrackedCircuit::Southwest(c) => self.faces.index(c.x, c.y),
        };
        if self.reach[seed] {
            return None;
        }
        // Face-adjacency component of the seed among unreachable faces.
        let ep = self.next_epoch();
        self.mark[seed] = ep;
        let mut comp = vec![seed];
        let mut k = 0;
        let (mut lo, mut hi) = (self.faces.at(seed), self.faces.at(seed));
        while k < comp.len() {
            let (fx, fy) = self.faces.at(comp[k]);
            k += 1;
            lo = (lo.0.min(fx), lo.1.min(fy));
            hi = (hi.0.max(fx), hi.1.max(fy));
            for d in 0..4 {
                let (gx, gy) = (fx + DX[d], fy + DY[d]);
                if self.faces.contains(gx, gy) {
                    let j = self.faces.index(gx, gy);
                    if !self.reach[j] && self.mark[j] != ep {
                        self.mark[j] = ep;
                        comp.push(j);
                    }
                }
            }
        }
        // Fill holes: flood the complement inside the box grown by one.
        let l = self.faces.window.half_width();
        let (bx0, by0) = ((lo.0 - 1).max(-l), (lo.1 - 1).max(-l));
        let (bx1, by1) = ((hi.0 + 1).min(l - 1), (hi.1 + 1).min(l - 1));
        let outside = self.next_epoch();
        let mut queue = VecDeque::new();
        for fx in bx0..=bx1 {
            for fy in by0..=by1 {
                let border = fx == bx0 || fx == bx1 || fy == by0 || fy == by1;
                let j = self.faces.index(fx, fy);
                if border && self.mark[j] != ep {
                    self.mark[j] = outside;
                    queue.push_back(j);
                }
            }
        }
        while let Some(i) = queue.pop_front() {
            let (fx, fy) = self.faces.at(i);
            for d in 0..4 {
                let (gx, gy) = (fx + DX[d], fy + DY[d]);
                if gx < bx0 || gx > bx1 || gy < by0 || gy > by1 {
                    continue;
                }
                let j = self.faces.index(gx, gy);
                if self.mark[j] != ep && self.mark[j] != outside {
                    self.mark[j] = outside;
                    queue.push_back(j);
                }
            }
        }
        let mut filled = Vec::new();
        for fx in bx0..=bx1 {
            for fy in by0..=by1 {
                let j = self.faces.index(fx, fy);
                if self.mark[j] != outside {
                    filled.push(j);
                }
            }
        }
        let start = filled.iter().map(|&j| self.faces.at(j)).min()?;
        let in_box = |fx: i32, fy: i32| fx >= bx0 && fx <= bx1 && fy >= by0 && fy <= by1;
        let inside =
            |fx: i32, fy: i32| in_box(fx, fy) && self.mark[self.faces.index(fx, fy)] != outside;
        let path = trace_boundary(start, &inside, 4 * filled.len() + 8)?;
        let circuit = Circuit::new(path).ok()?;
        let w = self.faces.window;
        if !circuit.edges().all(|(a, b)| {
            w.edge_between(a, b)
                .is_some_and(|e| self.is_open(config, e))
        }) {
            return None;
        }
        let ok = match self.target {
            TrackedCircuit::AroundPoint(p) => circuit.encloses(p),
            TrackedCircuit::Southwest(c) => sw_corner(&circuit) == c,
        };
        ok.then_some((circuit, filled))
    }

    /// Records the filled face set of the accepted circuit.
    pub fn set_inner(&mut self, filled: Vec<usize>) {
        for &f in &self.inner_list {
            self.inner[f] = false;
        }
        for &f in &filled {
            self.inner[f] = true;
        }
        self.inner_list = filled;
    }
}
