//! Finite square-lattice windows, canonical edge order, configurations and
//! connectivity queries.

use std::collections::VecDeque;
use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const MAX_HALF_WIDTH: i32 = 30_000;

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct Vertex {
    pub x: i32,
    pub y: i32,
}

impl Vertex {
    pub const ORIGIN: Vertex = Vertex { x: 0, y: 0 };

    pub const fn new(x: i32, y: i32) -> Self {
        Vertex { x, y }
    }

    pub fn to_f64(self) -> [f64; 2] {
        [self.x as f64, self.y as f64]
    }

    pub fn is_neighbour(self, other: Vertex) -> bool {
        (self.x - other.x).abs() + (self.y - other.y).abs() == 1
    }

    pub fn norm_sq(self) -> i64 {
        let (x, y) = (self.x as i64, self.y as i64);
        x * x + y * y
    }
}

impl Add for Vertex {
    type Output = Vertex;
    fn add(self, o: Vertex) -> Vertex {
        Vertex::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vertex {
    type Output = Vertex;
    fn sub(self, o: Vertex) -> Vertex {
        Vertex::new(self.x - o.x, self.y - o.y)
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    East,
    North,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeId {
    pub base: Vertex,
    pub dir: Direction,
}

impl EdgeId {
    pub fn east(base: Vertex) -> Self {
        EdgeId {
            base,
            dir: Direction::East,
        }
    }

    pub fn north(base: Vertex) -> Self {
        EdgeId {
            base,
            dir: Direction::North,
        }
    }

    pub fn endpoints(self) -> (Vertex, Vertex) {
        let b = self.base;
        match self.dir {
            Direction::East => (b, Vertex::new(b.x + 1, b.y)),
            Direction::North => (b, Vertex::new(b.x, b.y + 1)),
        }
    }

    /// The edge joining two nearest neighbours.
    pub fn between(a: Vertex, b: Vertex) -> Option<Self> {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if hi.x == lo.x + 1 && hi.y == lo.y {
            Some(EdgeId::east(lo))
        } else if hi.x == lo.x && hi.y == lo.y + 1 {
            Some(EdgeId::north(lo))
        } else {
            None
        }
    }
}

/// Vertices with both coordinates in `[-L, L]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub struct Window {
    l: i32,
}

impl TryFrom<i32> for Window {
    type Error = Error;
    fn try_from(l: i32) -> Result<Self> {
        Window::new(l)
    }
}

impl From<Window> for i32 {
    fn from(w: Window) -> i32 {
        w.l
    }
}

impl Window {
    pub fn new(half_width: i32) -> Result<Self> {
        if !(1..=MAX_HALF_WIDTH).contains(&half_width) {
            return invalid(format!(
                "half-width {half_width} outside [1, {MAX_HALF_WIDTH}]"
            ));
        }
        Ok(Window { l: half_width })
    }

    pub fn half_width(&self) -> i32 {
        self.l
    }

    pub fn side(&self) -> usize {
        (2 * self.l + 1) as usize
    }

    pub fn vertex_count(&self) -> usize {
        self.side() * self.side()
    }

    pub fn edge_count(&self) -> usize {
        let l = self.l as usize;
        8 * l * l + 4 * l
    }

    pub fn contains(&self, v: Vertex) -> bool {
        v.x.abs() <= self.l && v.y.abs() <= self.l
    }

    pub fn on_rim(&self, v: Vertex) -> bool {
        self.contains(v) && (v.x.abs() == self.l || v.y.abs() == self.l)
    }

    pub fn check(&self, v: Vertex) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::OutsideWindow {
                vertex: v,
                half_width: self.l,
            })
        }
    }

    #[inline]
    pub fn vertex_index(&self, v: Vertex) -> usize {
        (v.y + self.l) as usize * self.side() + (v.x + self.l) as usize
    }

    #[inline]
    pub fn vertex_at(&self, i: usize) -> Vertex {
        let s = self.side();
        Vertex::new((i % s) as i32 - self.l, (i / s) as i32 - self.l)
    }

    #[inline]
    fn row_stride(&self) -> usize {
        4 * self.l as usize + 1
    }

    /// Index of the east edge at `(x, y)`; requires `x < L`.
    #[inline]
    pub(crate) fn east_index(&self, x: i32, y: i32) -> usize {
        let l = self.l;
        if y < l {
            (y + l) as usize * self.row_stride() + 2 * (x + l) as usize
        } else {
            2 * l as usize * self.row_stride() + (x + l) as usize
        }
    }

    /// Index of the north edge at `(x, y)`; requires `y < L`.
    #[inline]
    pub(crate) fn north_index(&self, x: i32, y: i32) -> usize {
        let l = self.l;
        let row = (y + l) as usize * self.row_stride();
        if x < l {
            row + 2 * (x + l) as usize + 1
        } else {
            row + 4 * l as usize
        }
    }

    pub fn edge_in_window(&self, e: EdgeId) -> bool {
        let (a, b) = e.endpoints();
        self.contains(a) && self.contains(b)
    }

    pub fn edge_index(&self, e: EdgeId) -> Result<usize> {
        if !self.edge_in_window(e) {
            let (_, b) = e.endpoints();
            let v = if self.contains(e.base) { b } else { e.base };
            return Err(Error::OutsideWindow {
                vertex: v,
                half_width: self.l,
            });
        }
        Ok(match e.dir {
            Direction::East => self.east_index(e.base.x, e.base.y),
            Direction::North => self.north_index(e.base.x, e.base.y),
        })
    }

    pub fn edge_at(&self, idx: usize) -> EdgeId {
        let l = self.l;
        let stride = self.row_stride();
        let lower = 2 * l as usize * stride;
        if idx < lower {
            let y = (idx / stride) as i32 - l;
            let o = idx % stride;
            if o == 4 * l as usize {
                EdgeId::north(Vertex::new(l, y))
            } else {
                let x = (o / 2) as i32 - l;
                if o % 2 == 0 {
                    EdgeId::east(Vertex::new(x, y))
                } else {
                    EdgeId::north(Vertex::new(x, y))
                }
            }
        } else {
            EdgeId::east(Vertex::new((idx - lower) as i32 - l, l))
        }
    }

    pub fn edge_endpoints(&self, idx: usize) -> (Vertex, Vertex) {
        self.edge_at(idx).endpoints()
    }

    /// Index of the edge joining two neighbouring window vertices.
    pub fn edge_between(&self, a: Vertex, b: Vertex) -> Option<usize> {
        let e = EdgeId::between(a, b)?;
        self.edge_index(e).ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.edge_count()).map(move |i| self.edge_at(i))
    }

    /// Calls `f(edge index, neighbour)` for each window edge at `v`.
    #[inline]
    pub fn for_each_incident(&self, v: Vertex, mut f: impl FnMut(usize, Vertex)) {
        let l = self.l;
        if v.x < l {
            f(self.east_index(v.x, v.y), Vertex::new(v.x + 1, v.y));
        }
        if v.y < l {
            f(self.north_index(v.x, v.y), Vertex::new(v.x, v.y + 1));
        }
        if v.x > -l {
            f(self.east_index(v.x - 1, v.y), Vertex::new(v.x - 1, v.y));
        }
        if v.y > -l {
            f(self.north_index(v.x, v.y - 1), Vertex::new(v.x, v.y - 1));
        }
    }
}

/// Dense bit vector indexed by edge.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct EdgeBits {
    words: Vec<u64>,
    len: usize,
}

impl EdgeBits {
    pub fn new(len: usize) -> Self {
        EdgeBits {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut b = EdgeBits {
            words: vec![u64::MAX; len.div_ceil(64)],
            len,
        };
        b.clear_tail();
        b
    }

    pub fn from_indices(len: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut b = EdgeBits::new(len);
        for i in idx {
            b.set(i, true);
        }
        b
    }

    fn clear_tail(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(w) = self.words.last_mut() {
                *w &= (1u64 << r) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        let m = 1u64 << (i & 63);
        if v {
            self.words[i >> 6] |= m;
        } else {
            self.words[i >> 6] &= !m;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i >> 6] ^= 1u64 << (i & 63);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let t = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(k * 64 + t)
                }
            })
        })
    }
}

/// Open/closed state of every edge of a window.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct EdgeConfig {
    window: Window,
    bits: EdgeBits,
}

impl EdgeConfig {
    pub fn closed(window: Window) -> Self {
        EdgeConfig {
            window,
            bits: EdgeBits::new(window.edge_count()),
        }
    }

    pub fn open(window: Window) -> Self {
        EdgeConfig {
            window,
            bits: EdgeBits::full(window.edge_count()),
        }
    }

    pub fn from_bits(window: Window, bits: EdgeBits) -> Result<Self> {
        if bits.len() != window.edge_count() {
            return invalid(format!(
                "{} flags for {} edges",
                bits.len(),
                window.edge_count()
            ));
        }
        Ok(EdgeConfig { window, bits })
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn bits(&self) -> &EdgeBits {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut EdgeBits {
        &mut self.bits
    }

    #[inline]
    pub fn is_open(&self, idx: usize) -> bool {
        self.bits.get(idx)
    }

    #[inline]
    pub fn set(&mut self, idx: usize, open: bool) {
        self.bits.set(idx, open);
    }

    pub fn is_open_edge(&self, e: EdgeId) -> Result<bool> {
        Ok(self.bits.get(self.window.edge_index(e)?))
    }

    pub fn set_edge(&mut self, e: EdgeId, open: bool) -> Result<()> {
        let i = self.window.edge_index(e)?;
        self.bits.set(i, open);
        Ok(())
    }

    /// Opens every edge of a closed vertex path.
    pub fn open_path(&mut self, path: &[Vertex]) -> Result<()> {
        for w in path.windows(2) {
            let e = EdgeId::between(w[0], w[1]).ok_or_else(|| {
                Error::InvalidInput(format!("{} and {} are not neighbours", w[0], w[1]))
            })?;
            self.set_edge(e, true)?;
        }
        Ok(())
    }

    pub fn open_count(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn open_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter_ones()
    }

    pub fn to_snapshot(&self) -> String {
        let n = self.window.edge_count();
        let mut s = format!("rcmsnap v1 L={}\n", self.window.half_width());
        for k in 0..n.div_ceil(4) {
            let mut d = 0u32;
            for b in 0..4 {
                let i = 4 * k + b;
                if i < n && self.bits.get(i) {
                    d |= 1 << (3 - b);
                }
            }
            s.push(char::from_digit(d, 16).expect("nibble"));
        }
        s.push('\n');
        s
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Snapshot("empty input".into()))?;
        let l: i32 = header
            .strip_prefix("rcmsnap v1 L=")
            .ok_or_else(|| Error::Snapshot(format!("bad header {header:?}")))?
            .trim()
            .parse()
            .map_err(|_| Error::Snapshot(format!("bad half-width in {header:?}")))?;
        let window = Window::new(l).map_err(|e| Error::Snapshot(e.to_string()))?;
        let body = lines
            .next()
            .ok_or_else(|| Error::Snapshot("missing bitmap line".into()))?
            .trim();
        let n = window.edge_count();
        if body.len() != n.div_ceil(4) {
            return Err(Error::Snapshot(format!(
                "expected {} hex digits, found {}",
                n.div_ceil(4),
                body.len()
            )));
        }
        let mut bits = EdgeBits::new(n);
        for (k, ch) in body.chars().enumerate() {
            if ch.is_ascii_uppercase() {
                return Err(Error::Snapshot(format!("uppercase digit {ch:?}")));
            }
            let d = ch
                .to_digit(16)
                .ok_or_else(|| Error::Snapshot(format!("non-hex digit {ch:?}")))?;
            for b in 0..4 {
                if d & (1 << (3 - b)) != 0 {
                    let i = 4 * k + b;
                    if i >= n {
                        return Err(Error::Snapshot("nonzero padding bits".into()));
                    }
                    bits.set(i, true);
                }
            }
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(Error::Snapshot("trailing content".into()));
        }
        Ok(EdgeConfig { window, bits })
    }
}

fn check_region(config: &EdgeConfig, region: Option<&EdgeBits>) -> Result<()> {
    match region {
        Some(r) if r.len() != config.window.edge_count() => invalid(format!(
            "region has {} flags for {} edges",
            r.len(),
            config.window.edge_count()
        )),
        _ => Ok(()),
    }
}

#[inline]
fn usable(config: &EdgeConfig, region: Option<&EdgeBits>, e: usize) -> bool {
    config.is_open(e) && region.is_none_or(|r| r.get(e))
}

fn reach(
    config: &EdgeConfig,
    a: Vertex,
    region: Option<&EdgeBits>,
    stop: Option<Vertex>,
) -> (Vec<bool>, bool) {
    let w = config.window;
    let mut seen = vec![false; w.vertex_count()];
    seen[w.vertex_index(a)] = true;
    let mut queue = VecDeque::from([a]);
    while let Some(v) = queue.pop_front() {
        if Some(v) == stop {
            return (seen, true);
        }
        w.for_each_incident(v, |e, u| {
            let ui = w.vertex_index(u);
            if !seen[ui] && usable(config, region, e) {
                seen[ui] = true;
                queue.push_back(u);
            }
        });
    }
    (seen, false)
}

/// Whether an open path inside `region` joins `a` and `b`.
pub fn connected(
    config: &EdgeConfig,
    a: Vertex,
    b: Vertex,
    region: Option<&EdgeBits>,
) -> Result<bool> {
    config.window.check(a)?;
    config.window.check(b)?;
    check_region(config, region)?;
    if a == b {
        return Ok(true);
    }
    Ok(reach(config, a, region, Some(b)).1)
}

/// Edges of the open cluster of `a` inside `region`, sorted by index.
pub fn open_cluster(
    config: &EdgeConfig,
    a: Vertex,
    region: Option<&EdgeBits>,
) -> Result<Vec<usize>> {
    config.window.check(a)?;
    check_region(config, region)?;
    let w = config.window;
    let (seen, _) = reach(config, a, region, None);
    let mut edges = Vec::new();
    for (i, &s) in seen.iter().enumerate() {
        if !s {
            continue;
        }
        let v = w.vertex_at(i);
        let l = w.half_width();
        if v.x < l {
            let e = w.east_index(v.x, v.y);
            if usable(config, region, e) {
                edges.push(e);
            }
        }
        if v.y < l {
            let e = w.north_index(v.x, v.y);
            if usable(config, region, e) {
                edges.push(e);
            }
        }
    }
    edges.sort_unstable();
    Ok(edges)
}

/// Vertices of the open cluster of `a` inside `region`.
pub fn cluster_vertices(
    config: &EdgeConfig,
    a: Vertex,
    region: Option<&EdgeBits>,
) -> Result<Vec<Vertex>> {
    config.window.check(a)?;
    check_region(config, region)?;
    let w = config.window;
    let (seen, _) = reach(config, a, region, None);
    Ok(seen
        .iter()
        .enumerate()
        .filter(|(_, &s)| s)
        .map(|(i, _)| w.vertex_at(i))
        .collect())
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
    sets: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
            sets: n,
        }
    }

    pub fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] as usize != a {
            let g = self.parent[self.parent[a] as usize];
            self.parent[a] = g;
            a = g as usize;
        }
        a
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
        self.sets -= 1;
        true
    }

    pub fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }

    pub fn set_count(&self) -> usize {
        self.sets
    }
}

/// Cluster labels of a configuration for batched connectivity queries.
/// Rebuilt from scratch after flips.
#[derive(Clone, Debug)]
pub struct ClusterIndex {
    window: Window,
    uf: UnionFind,
}

impl ClusterIndex {
    pub fn build(config: &EdgeConfig) -> Self {
        let w = config.window;
        let mut uf = UnionFind::new(w.vertex_count());
        for e in config.open_edges() {
            let (a, b) = w.edge_endpoints(e);
            uf.union(w.vertex_index(a), w.vertex_index(b));
        }
        ClusterIndex { window: w, uf }
    }

    pub fn rebuild(&mut self, config: &EdgeConfig) {
        *self = ClusterIndex::build(config);
    }

    pub fn connected(&mut self, a: Vertex, b: Vertex) -> bool {
        let (ia, ib) = (self.window.vertex_index(a), self.window.vertex_index(b));
        self.uf.same(ia, ib)
    }

    /// Number of clusters, isolated vertices included.
    pub fn cluster_count(&self) -> usize {
        self.uf.set_count()
    }
}
