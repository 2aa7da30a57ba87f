//! Independent reference implementations used by the integration tests.
//! Nothing here calls the routine it is checking.
#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};

use rand::Rng;
use rcm_core::lattice::{EdgeBits, EdgeConfig, Vertex, Window};

pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_config<R: Rng>(window: Window, p: f64, rng: &mut R) -> EdgeConfig {
    let m = window.edge_count();
    let bits = EdgeBits::from_indices(
        m,
        (0..m).filter(|_| rng.gen::<f64>() < p).collect::<Vec<_>>(),
    );
    EdgeConfig::from_bits(window, bits).unwrap()
}

/// Edge list and rim flags of a window, by vertex index.
pub fn window_graph(window: Window) -> (usize, Vec<(usize, usize)>, Vec<bool>) {
    let n = window.vertex_count();
    let edges = (0..window.edge_count())
        .map(|e| {
            let (a, b) = window.edge_endpoints(e);
            (window.vertex_index(a), window.vertex_index(b))
        })
        .collect();
    let rim = (0..n).map(|i| window.on_rim(window.vertex_at(i))).collect();
    (n, edges, rim)
}

/// Components of the open subgraph; with `wired`, all flagged vertices
/// count as one.
pub fn components(
    n: usize,
    edges: &[(usize, usize)],
    mask: u64,
    boundary: &[bool],
    wired: bool,
) -> usize {
    let mut adj = vec![Vec::new(); n + 1];
    for (i, &(a, b)) in edges.iter().enumerate() {
        if mask >> i & 1 == 1 {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let ghost = n;
    let any_boundary = wired && boundary.iter().any(|&b| b);
    if any_boundary {
        for v in 0..n {
            if boundary[v] {
                adj[v].push(ghost);
                adj[ghost].push(v);
            }
        }
    }
    let total = if any_boundary { n + 1 } else { n };
    let mut seen = vec![false; total];
    let mut count = 0;
    for s in 0..total {
        if seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
    }
    count
}

/// FK probabilities of every edge mask by direct summation of the weights.
pub fn fk_law(
    n: usize,
    edges: &[(usize, usize)],
    boundary: &[bool],
    wired: bool,
    p: f64,
    q: f64,
) -> Vec<f64> {
    let m = edges.len();
    let mut w: Vec<f64> = (0..1u64 << m)
        .map(|mask| {
            let open = mask.count_ones() as i32;
            let k = components(n, edges, mask, boundary, wired) as i32;
            p.powi(open) * (1.0 - p).powi(m as i32 - open) * q.powi(k)
        })
        .collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= z);
    w
}

/// Every simple cycle of open edges, as vertex lists, each listed once.
pub fn simple_cycles(config: &EdgeConfig) -> Vec<Vec<Vertex>> {
    let w = config.window();
    let n = w.vertex_count();
    let mut adj = vec![Vec::new(); n];
    for e in config.open_edges() {
        let (a, b) = w.edge_endpoints(e);
        let (a, b) = (w.vertex_index(a), w.vertex_index(b));
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen_keys = HashSet::new();
    let mut out = Vec::new();
    for s in 0..n {
        let mut path = vec![s];
        let mut on = vec![false; n];
        on[s] = true;
        cycles_from(s, &adj, &mut path, &mut on, &mut |cyc: &[usize]| {
            let mut key: Vec<usize> = cyc.to_vec();
            key.sort_unstable();
            if seen_keys.insert(key) {
                out.push(cyc.iter().map(|&i| w.vertex_at(i)).collect());
            }
        });
    }
    out
}

fn cycles_from(
    s: usize,
    adj: &[Vec<usize>],
    path: &mut Vec<usize>,
    on: &mut [bool],
    emit: &mut dyn FnMut(&[usize]),
) {
    let v = *path.last().unwrap();
    for &u in &adj[v] {
        if u == s && path.len() >= 4 {
            emit(path);
        } else if u > s && !on[u] {
            on[u] = true;
            path.push(u);
            cycles_from(s, adj, path, on, emit);
            path.pop();
            on[u] = false;
        }
    }
}

/// Winding number of a closed polygon around a point off the polygon.
pub fn winding(poly: &[Vertex], p: [f64; 2]) -> i32 {
    let mut total = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (ax, ay) = (a.x as f64 - p[0], a.y as f64 - p[1]);
        let (bx, by) = (b.x as f64 - p[0], b.y as f64 - p[1]);
        total += (ax * by - ay * bx).atan2(ax * bx + ay * by);
    }
    (total / std::f64::consts::TAU).round() as i32
}

pub fn shoelace(poly: &[Vertex]) -> f64 {
    let mut s = 0i64;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        s += a.x as i64 * b.y as i64 - b.x as i64 * a.y as i64;
    }
    s as f64 / 2.0
}

pub fn edge_key(poly: &[Vertex]) -> HashSet<(Vertex, Vertex)> {
    (0..poly.len())
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
            if a < b {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect()
}

/// The largest-area open cycle around a lattice point not on it.
pub fn brute_outermost(config: &EdgeConfig, p: Vertex) -> Option<Vec<Vertex>> {
    outermost_among(&simple_cycles(config), p)
}

pub fn outermost_among(cycles: &[Vec<Vertex>], p: Vertex) -> Option<Vec<Vertex>> {
    cycles
        .iter()
        .filter(|c| !c.contains(&p) && winding(c, [p.x as f64, p.y as f64]) != 0)
        .max_by(|a, b| shoelace(a).abs().total_cmp(&shoelace(b).abs()))
        .cloned()
}

fn cross(o: Vertex, a: Vertex, b: Vertex) -> i64 {
    (a.x - o.x) as i64 * (b.y - o.y) as i64 - (a.y - o.y) as i64 * (b.x - o.x) as i64
}

/// Strict extreme points of a point set: `i` is one exactly when some
/// directed line through it has every other point on its left or on the
/// segment to a neighbour hull point.
pub fn brute_hull(points: &[Vertex]) -> HashSet<Vertex> {
    let pts: Vec<Vertex> = points
        .iter()
        .copied()
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    let mut out = HashSet::new();
    for &a in &pts {
        for &b in &pts {
            if a == b {
                continue;
            }
            let ok = pts.iter().all(|&k| {
                let c = cross(a, b, k);
                c > 0 || (c == 0 && between(a, b, k))
            });
            if ok {
                out.insert(a);
                out.insert(b);
            }
        }
    }
    out
}

fn between(a: Vertex, b: Vertex, k: Vertex) -> bool {
    k.x >= a.x.min(b.x) && k.x <= a.x.max(b.x) && k.y >= a.y.min(b.y) && k.y <= a.y.max(b.y)
}

pub fn seg_dist(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    let (x, y) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    (x * x + y * y).sqrt()
}

/// Hull points in counterclockwise order around their centroid.
pub fn ordered_hull(points: &[Vertex]) -> Vec<Vertex> {
    let h: Vec<Vertex> = brute_hull(points).into_iter().collect();
    let cx = h.iter().map(|v| v.x as f64).sum::<f64>() / h.len() as f64;
    let cy = h.iter().map(|v| v.y as f64).sum::<f64>() / h.len() as f64;
    let mut h = h;
    h.sort_by(|a, b| {
        let ta = (a.y as f64 - cy).atan2(a.x as f64 - cx);
        let tb = (b.y as f64 - cy).atan2(b.x as f64 - cx);
        ta.total_cmp(&tb)
    });
    h
}

/// Largest distance from a circuit vertex to the hull boundary.
pub fn brute_mlr(points: &[Vertex]) -> f64 {
    let h = ordered_hull(points);
    points
        .iter()
        .map(|v| {
            let p = [v.x as f64, v.y as f64];
            (0..h.len())
                .map(|i| {
                    let (a, b) = (h[i], h[(i + 1) % h.len()]);
                    seg_dist(p, [a.x as f64, a.y as f64], [b.x as f64, b.y as f64])
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

pub fn brute_mfl(points: &[Vertex]) -> f64 {
    let h = ordered_hull(points);
    (0..h.len())
        .map(|i| {
            let (a, b) = (h[i], h[(i + 1) % h.len()]);
            (((a.x - b.x) as f64).powi(2) + ((a.y - b.y) as f64).powi(2)).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Random simply connected union of unit faces (by lower-left corner),
/// grown from the origin face, with holes filled.
pub fn random_blob<R: Rng>(rng: &mut R, size: usize, radius: i32) -> HashSet<Vertex> {
    let mut set = HashSet::from([Vertex::new(0, 0)]);
    let mut list = vec![Vertex::new(0, 0)];
    let steps = [(1, 0), (-1, 0), (0, 1), (0, -1)];
    while set.len() < size {
        let f = list[rng.gen_range(0..list.len())];
        let (dx, dy) = steps[rng.gen_range(0..4)];
        let g = Vertex::new(f.x + dx, f.y + dy);
        if g.x.abs() < radius && g.y.abs() < radius && set.insert(g) {
            list.push(g);
        }
    }
    fill_holes(&set, radius)
}

/// Adds every face not 4-connected to the far outside.
pub fn fill_holes(set: &HashSet<Vertex>, radius: i32) -> HashSet<Vertex> {
    let r = radius + 1;
    let mut outside = HashSet::new();
    let start = Vertex::new(-r, -r);
    let mut queue = VecDeque::from([start]);
    outside.insert(start);
    while let Some(f) = queue.pop_front() {
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let g = Vertex::new(f.x + dx, f.y + dy);
            if g.x.abs() <= r && g.y.abs() <= r && !set.contains(&g) && outside.insert(g) {
                queue.push_back(g);
            }
        }
    }
    let mut out = HashSet::new();
    for x in -r..=r {
        for y in -r..=r {
            let f = Vertex::new(x, y);
            if !outside.contains(&f) {
                out.insert(f);
            }
        }
    }
    out
}

/// Configuration whose open edges are exactly those separating the face set
/// from its complement.
pub fn blob_config(window: Window, faces: &HashSet<Vertex>) -> EdgeConfig {
    let mut config = EdgeConfig::closed(window);
    for &f in faces {
        let sides = [
            (
                Vertex::new(f.x, f.y),
                Vertex::new(f.x + 1, f.y),
                Vertex::new(f.x, f.y - 1),
            ),
            (
                Vertex::new(f.x, f.y + 1),
                Vertex::new(f.x + 1, f.y + 1),
                Vertex::new(f.x, f.y + 1),
            ),
            (
                Vertex::new(f.x, f.y),
                Vertex::new(f.x, f.y + 1),
                Vertex::new(f.x - 1, f.y),
            ),
            (
                Vertex::new(f.x + 1, f.y),
                Vertex::new(f.x + 1, f.y + 1),
                Vertex::new(f.x + 1, f.y),
            ),
        ];
        for (a, b, other) in sides {
            if !faces.contains(&other) {
                let e = window.edge_between(a, b).expect("blob inside window");
                config.set(e, true);
            }
        }
    }
    config
}

/// Whether the face set touches itself only through shared edges: no vertex
/// has exactly two diagonal member faces.
pub fn is_pinch_free(faces: &HashSet<Vertex>) -> bool {
    faces.iter().all(|f| {
        [(1, 1), (1, -1), (-1, 1), (-1, -1)]
            .iter()
            .all(|&(dx, dy)| {
                let d = faces.contains(&Vertex::new(f.x + dx, f.y + dy));
                let a = faces.contains(&Vertex::new(f.x + dx, f.y));
                let b = faces.contains(&Vertex::new(f.x, f.y + dy));
                !(d && !a && !b)
            })
    })
}

/// Largest angular gap of a set of directions, in radians.
pub fn max_gap(args: &[f64]) -> f64 {
    use std::f64::consts::TAU;
    let mut best: f64 = 0.0;
    for &a in args {
        // smallest counterclockwise distance from `a` to another direction
        let next = args
            .iter()
            .map(|&b| (b - a).rem_euclid(TAU))
            .filter(|&d| d > 0.0)
            .fold(TAU, f64::min);
        best = best.max(next);
    }
    if args.len() <= 1 {
        TAU
    } else {
        best
    }
}
