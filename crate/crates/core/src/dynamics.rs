//! Heat-bath dynamics for the random cluster measure, the exact enumeration
//! oracle, connectivity estimates and hypothesis diagnostics.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{EdgeBits, EdgeConfig, EdgeId, UnionFind, Vertex, Window};
use crate::stats::{weighted_linear_fit, LinearFit};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Free,
    Wired,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct RcmParams {
    p: f64,
    q: f64,
    boundary: Boundary,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    #[serde(default)]
    p: Option<f64>,
    #[serde(default)]
    beta: Option<f64>,
    q: f64,
    #[serde(default)]
    boundary: Boundary,
}

impl TryFrom<RawParams> for RcmParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        match (r.p, r.beta) {
            (Some(p), None) => RcmParams::new(p, r.q, r.boundary),
            (None, Some(b)) => RcmParams::from_beta(b, r.q, r.boundary),
            (Some(p), Some(b)) => {
                let from_beta = 1.0 - (-2.0 * b).exp();
                if (from_beta - p).abs() > 1e-9 {
                    return invalid(format!("p = {p} disagrees with beta = {b}"));
                }
                RcmParams::new(p, r.q, r.boundary)
            }
            (None, None) => invalid("params need p or beta"),
        }
    }
}

impl From<RcmParams> for RawParams {
    fn from(p: RcmParams) -> Self {
        RawParams {
            p: Some(p.p),
            beta: Some(p.beta()),
            q: p.q,
            boundary: p.boundary,
        }
    }
}

impl RcmParams {
    pub fn new(p: f64, q: f64, boundary: Boundary) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return invalid(format!("p = {p} outside (0, 1)"));
        }
        if !(q >= 1.0 && q.is_finite()) {
            return invalid(format!("q = {q} must be a finite real >= 1"));
        }
        Ok(RcmParams { p, q, boundary })
    }

    pub fn from_beta(beta: f64, q: f64, boundary: Boundary) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return invalid(format!("beta = {beta} must be positive"));
        }
        RcmParams::new(1.0 - (-2.0 * beta).exp(), q, boundary)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn beta(&self) -> f64 {
        -0.5 * (1.0 - self.p).ln()
    }

    pub fn critical_p(q: f64) -> f64 {
        q.sqrt() / (1.0 + q.sqrt())
    }

    pub fn is_subcritical(&self) -> bool {
        self.p < Self::critical_p(self.q)
    }

    /// Open probability for an edge whose endpoints are not otherwise joined.
    pub fn isolated_open_prob(&self) -> f64 {
        self.p / (self.p + (1.0 - self.p) * self.q)
    }

    pub fn is_bernoulli(&self) -> bool {
        self.q == 1.0
    }
}

/// Graph interface shared by lattice windows and small fixture graphs.
pub trait EdgeGraph {
    fn vertex_count(&self) -> usize;
    fn edge_count(&self) -> usize;
    fn endpoints(&self, e: usize) -> (usize, usize);
    fn for_each_incident<F: FnMut(usize, usize)>(&self, v: usize, f: F);
    /// Membership of the interior boundary used by the wired convention.
    fn is_boundary(&self, v: usize) -> bool;
}

impl EdgeGraph for Window {
    fn vertex_count(&self) -> usize {
        Window::vertex_count(self)
    }

    fn edge_count(&self) -> usize {
        Window::edge_count(self)
    }

    fn endpoints(&self, e: usize) -> (usize, usize) {
        let (a, b) = self.edge_endpoints(e);
        (self.vertex_index(a), self.vertex_index(b))
    }

    #[inline]
    fn for_each_incident<F: FnMut(usize, usize)>(&self, v: usize, mut f: F) {
        let vx = self.vertex_at(v);
        Window::for_each_incident(self, vx, |e, u| f(e, self.vertex_index(u)));
    }

    fn is_boundary(&self, v: usize) -> bool {
        self.on_rim(self.vertex_at(v))
    }
}

/// Explicit edge-list graph.
#[derive(Clone, Debug)]
pub struct SmallGraph {
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<(usize, usize)>>,
    boundary: Vec<bool>,
}

impl SmallGraph {
    pub fn new(
        vertex_count: usize,
        edges: Vec<(usize, usize)>,
        boundary: Vec<bool>,
    ) -> Result<Self> {
        if boundary.len() != vertex_count {
            return invalid("boundary flags must cover every vertex");
        }
        let mut adjacency = vec![Vec::new(); vertex_count];
        for (i, &(a, b)) in edges.iter().enumerate() {
            if a >= vertex_count || b >= vertex_count || a == b {
                return invalid(format!("bad edge ({a}, {b})"));
            }
            adjacency[a].push((i, b));
            adjacency[b].push((i, a));
        }
        Ok(SmallGraph {
            edges,
            adjacency,
            boundary,
        })
    }

    /// Cycle on `n` vertices; every vertex is a boundary vertex.
    pub fn cycle(n: usize) -> Self {
        let edges = (0..n).map(|i| (i, (i + 1) % n)).collect();
        SmallGraph::new(n, edges, vec![true; n]).expect("valid cycle")
    }

    pub fn single_edge() -> Self {
        SmallGraph::new(2, vec![(0, 1)], vec![true; 2]).expect("valid edge")
    }
}

impl EdgeGraph for SmallGraph {
    fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    fn edge_count(&self) -> usize {
        self.edges.len()
    }

    fn endpoints(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    fn for_each_incident<F: FnMut(usize, usize)>(&self, v: usize, mut f: F) {
        for &(e, u) in &self.adjacency[v] {
            f(e, u);
        }
    }

    fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }
}

/// Reusable scratch for bidirectional connectivity probes.
#[derive(Clone, Debug, Default)]
pub struct PathProbe {
    seen_a: Vec<u32>,
    seen_b: Vec<u32>,
    stamp: u32,
    qa: Vec<usize>,
    qb: Vec<usize>,
}

impl PathProbe {
    pub fn new() -> Self {
        Self::default()
    }

    fn reset(&mut self, n: usize) {
        if self.seen_a.len() != n || self.stamp == u32::MAX {
            self.seen_a = vec![0; n];
            self.seen_b = vec![0; n];
            self.stamp = 0;
        }
        self.stamp += 1;
        self.qa.clear();
        self.qb.clear();
    }

    /// Whether `u` and `v` are joined by open edges other than `skip`;
    /// with `wired`, all boundary vertices count as one vertex.
    pub fn connected_without<G: EdgeGraph>(
        &mut self,
        g: &G,
        open: &EdgeBits,
        u: usize,
        v: usize,
        skip: usize,
        wired: bool,
    ) -> bool {
        if u == v {
            return true;
        }
        self.reset(g.vertex_count());
        let stamp = self.stamp;
        self.seen_a[u] = stamp;
        self.seen_b[v] = stamp;
        self.qa.push(u);
        self.qb.push(v);
        let mut rim = [wired && g.is_boundary(u), wired && g.is_boundary(v)];
        if rim[0] && rim[1] {
            return true;
        }
        let mut head = [0usize, 0usize];
        loop {
            let live = [head[0] < self.qa.len(), head[1] < self.qb.len()];
            let side = match live {
                [false, false] => return false,
                [false, true] => {
                    if !rim[0] {
                        return false;
                    }
                    1
                }
                [true, false] => {
                    if !rim[1] {
                        return false;
                    }
                    0
                }
                [true, true] => {
                    if self.qa.len() - head[0] <= self.qb.len() - head[1] {
                        0
                    } else {
                        1
                    }
                }
            };
            let (queue, mine, other) = if side == 0 {
                (&mut self.qa, &mut self.seen_a, &self.seen_b)
            } else {
                (&mut self.qb, &mut self.seen_b, &self.seen_a)
            };
            let w = queue[head[side]];
            head[side] += 1;
            let mut met = false;
            let mut touched_rim = false;
            g.for_each_incident(w, |e, z| {
                if met || e == skip || !open.get(e) {
                    return;
                }
                if other[z] == stamp {
                    met = true;
                    return;
                }
                if mine[z] != stamp {
                    mine[z] = stamp;
                    queue.push(z);
                    if wired && g.is_boundary(z) {
                        touched_rim = true;
                    }
                }
            });
            if met {
                return true;
            }
            if touched_rim {
                rim[side] = true;
                if rim[1 - side] {
                    return true;
                }
            }
        }
    }
}

/// Heat-bath open probability of edge `e` given every other edge.
pub fn conditional_open_prob_on<G: EdgeGraph>(
    g: &G,
    open: &EdgeBits,
    e: usize,
    params: &RcmParams,
    probe: &mut PathProbe,
) -> f64 {
    if params.is_bernoulli() {
        return params.p;
    }
    let (a, b) = g.endpoints(e);
    let wired = params.boundary == Boundary::Wired;
    if probe.connected_without(g, open, a, b, e, wired) {
        params.p
    } else {
        params.isolated_open_prob()
    }
}

pub fn conditional_open_prob(config: &EdgeConfig, e: EdgeId, params: &RcmParams) -> Result<f64> {
    let w = config.window();
    let idx = w.edge_index(e)?;
    Ok(conditional_open_prob_on(
        &w,
        config.bits(),
        idx,
        params,
        &mut PathProbe::new(),
    ))
}

/// Single-edge heat-bath updater with reusable scratch.
#[derive(Clone, Debug, Default)]
pub struct HeatBath {
    probe: PathProbe,
}

impl HeatBath {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn probe(&mut self) -> &mut PathProbe {
        &mut self.probe
    }

    #[inline]
    pub fn update_edge<G: EdgeGraph, R: Rng + ?Sized>(
        &mut self,
        g: &G,
        open: &mut EdgeBits,
        e: usize,
        params: &RcmParams,
        rng: &mut R,
    ) {
        let u: f64 = rng.gen();
        let pr = conditional_open_prob_on(g, open, e, params, &mut self.probe);
        open.set(e, u < pr);
    }

    pub fn sweep_graph<G: EdgeGraph, R: Rng + ?Sized>(
        &mut self,
        g: &G,
        open: &mut EdgeBits,
        params: &RcmParams,
        rng: &mut R,
    ) {
        for e in 0..g.edge_count() {
            self.update_edge(g, open, e, params, rng);
        }
    }

    pub fn sweep<R: Rng + ?Sized>(
        &mut self,
        config: &mut EdgeConfig,
        params: &RcmParams,
        rng: &mut R,
    ) {
        let w = config.window();
        self.sweep_graph(&w, config.bits_mut(), params, rng);
    }
}

/// One canonical-order heat-bath sweep over every edge.
pub fn heat_bath_sweep<R: Rng + ?Sized>(config: &mut EdgeConfig, params: &RcmParams, rng: &mut R) {
    HeatBath::new().sweep(config, params, rng);
}

pub const ENUMERATION_LIMIT: usize = 24;

/// Number of clusters, with boundary vertices contracted under wired.
pub fn cluster_count<G: EdgeGraph>(
    g: &G,
    open: impl Fn(usize) -> bool,
    boundary: Boundary,
) -> usize {
    let n = g.vertex_count();
    let mut uf = UnionFind::new(n + 1);
    if boundary == Boundary::Wired {
        for v in 0..n {
            if g.is_boundary(v) {
                uf.union(v, n);
            }
        }
    } else {
        // Absorb the unused virtual vertex.
        uf.union(n, 0);
    }
    for e in 0..g.edge_count() {
        if open(e) {
            let (a, b) = g.endpoints(e);
            uf.union(a, b);
        }
    }
    uf.set_count()
}

/// Exact FK law on a small graph, indexed by bitmask (bit i = edge i open).
#[derive(Clone, Debug)]
pub struct ExactDistribution {
    pub edges: usize,
    pub probs: Vec<f64>,
}

impl ExactDistribution {
    pub fn prob(&self, mask: usize) -> f64 {
        self.probs[mask]
    }

    /// Marginal open probability of edge `e`.
    pub fn marginal(&self, e: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(m, _)| m >> e & 1 == 1)
            .map(|(_, p)| p)
            .sum()
    }

    /// Conditional law restricted to the masks where `keep` holds.
    pub fn restricted(&self, keep: impl Fn(usize) -> bool) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .probs
            .iter()
            .enumerate()
            .map(|(m, &p)| if keep(m) { p } else { 0.0 })
            .collect();
        let z: f64 = out.iter().sum();
        if z > 0.0 {
            out.iter_mut().for_each(|p| *p /= z);
        }
        out
    }
}

pub fn exact_enumerate<G: EdgeGraph>(g: &G, params: &RcmParams) -> Result<ExactDistribution> {
    let m = g.edge_count();
    if m > ENUMERATION_LIMIT {
        return Err(Error::Capacity {
            edges: m,
            limit: ENUMERATION_LIMIT,
        });
    }
    let (lp, lq, lq1) = (params.p.ln(), params.q.ln(), (1.0 - params.p).ln());
    let mut logw = Vec::with_capacity(1 << m);
    for mask in 0..(1usize << m) {
        let open = mask.count_ones() as f64;
        let k = cluster_count(g, |e| mask >> e & 1 == 1, params.boundary) as f64;
        logw.push(open * lp + (m as f64 - open) * lq1 + k * lq);
    }
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= z);
    Ok(ExactDistribution { edges: m, probs })
}

pub fn config_mask(config: &EdgeConfig) -> usize {
    config.open_edges().fold(0usize, |m, e| m | 1 << e)
}

/// Burn-in and spacing of equilibrated samples, in sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Equilibration {
    pub burn_in_sweeps: usize,
    pub spacing_sweeps: usize,
}

impl Default for Equilibration {
    fn default() -> Self {
        Equilibration {
            burn_in_sweeps: 200,
            spacing_sweeps: 10,
        }
    }
}

/// Stream of equilibrated configurations. At q = 1 each sample is a fresh
/// product-measure draw; otherwise a heat-bath chain with burn-in and spacing.
#[derive(Clone, Debug)]
pub struct EquilibriumSampler {
    params: RcmParams,
    schedule: Equilibration,
    state: EdgeConfig,
    bath: HeatBath,
    warmed: bool,
}

impl EquilibriumSampler {
    pub fn new(window: Window, params: RcmParams, schedule: Equilibration) -> Self {
        EquilibriumSampler {
            params,
            schedule,
            state: EdgeConfig::closed(window),
            bath: HeatBath::new(),
            warmed: false,
        }
    }

    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &EdgeConfig {
        if self.params.is_bernoulli() {
            let p = self.params.p;
            let bits = self.state.bits_mut();
            for e in 0..bits.len() {
                bits.set(e, rng.gen::<f64>() < p);
            }
            return &self.state;
        }
        let sweeps = if self.warmed {
            self.schedule.spacing_sweeps
        } else {
            self.schedule.burn_in_sweeps
        };
        self.warmed = true;
        for _ in 0..sweeps.max(1) {
            self.bath.sweep(&mut self.state, &self.params, rng);
        }
        &self.state
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub trials: u64,
    pub hits: u64,
}

impl Estimate {
    fn from_counts(hits: u64, trials: u64) -> Self {
        let p = hits as f64 / trials as f64;
        Estimate {
            value: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
            hits,
        }
    }
}

/// Lazily explores the open cluster of `start` under the product measure,
/// sampling each edge on first touch. Stops early when `target` returns true.
pub fn explore_bernoulli<R: Rng + ?Sized>(
    window: Window,
    p: f64,
    start: Vertex,
    region: Option<&EdgeBits>,
    rng: &mut R,
    mut target: impl FnMut(Vertex) -> bool,
) -> bool {
    let mut decided = vec![0u8; window.edge_count()];
    let mut seen = vec![false; window.vertex_count()];
    seen[window.vertex_index(start)] = true;
    if target(start) {
        return true;
    }
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        let mut found = false;
        window.for_each_incident(v, |e, u| {
            if found || region.is_some_and(|r| !r.get(e)) {
                return;
            }
            let ui = window.vertex_index(u);
            if seen[ui] {
                return;
            }
            if decided[e] == 0 {
                decided[e] = if rng.gen::<f64>() < p { 1 } else { 2 };
            }
            if decided[e] == 1 {
                seen[ui] = true;
                if target(u) {
                    found = true;
                }
                queue.push_back(u);
            }
        });
        if found {
            return true;
        }
    }
    false
}

/// Monte Carlo estimate of P(0 ↔ x) in `window`, optionally with paths
/// restricted to `region`.
pub fn estimate_connectivity_in<R: Rng + ?Sized>(
    params: &RcmParams,
    window: Window,
    x: Vertex,
    region: Option<&EdgeBits>,
    trials: u64,
    schedule: Equilibration,
    rng: &mut R,
) -> Result<Estimate> {
    window.check(x)?;
    if trials == 0 {
        return invalid("trials must be positive");
    }
    if x == Vertex::ORIGIN {
        return Ok(Estimate {
            value: 1.0,
            stderr: 0.0,
            trials,
            hits: trials,
        });
    }
    let mut hits = 0u64;
    if params.is_bernoulli() {
        for _ in 0..trials {
            if explore_bernoulli(window, params.p, Vertex::ORIGIN, region, rng, |v| v == x) {
                hits += 1;
            }
        }
    } else {
        let mut sampler = EquilibriumSampler::new(window, *params, schedule);
        let mut probe = PathProbe::new();
        let wired = params.boundary == Boundary::Wired;
        let (a, b) = (window.vertex_index(Vertex::ORIGIN), window.vertex_index(x));
        for _ in 0..trials {
            let cfg = sampler.next(rng);
            let joined = match region {
                None => probe.connected_without(&window, cfg.bits(), a, b, usize::MAX, wired),
                Some(r) => {
                    let mut masked = cfg.bits().clone();
                    for e in 0..masked.len() {
                        if !r.get(e) {
                            masked.set(e, false);
                        }
                    }
                    probe.connected_without(&window, &masked, a, b, usize::MAX, false)
                }
            };
            if joined {
                hits += 1;
            }
        }
    }
    Ok(Estimate::from_counts(hits, trials))
}

pub fn estimate_connectivity<R: Rng + ?Sized>(
    params: &RcmParams,
    window: Window,
    x: Vertex,
    trials: u64,
    rng: &mut R,
) -> Result<Estimate> {
    estimate_connectivity_in(
        params,
        window,
        x,
        None,
        trials,
        Equilibration::default(),
        rng,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticSettings {
    pub k_min: u32,
    pub k_max: u32,
    pub decay_trials: u64,
    pub energy_samples: usize,
    pub fkg_samples: usize,
    pub equilibration: Equilibration,
}

impl Default for DiagnosticSettings {
    fn default() -> Self {
        DiagnosticSettings {
            k_min: 1,
            k_max: 6,
            decay_trials: 20_000,
            energy_samples: 20,
            fkg_samples: 100_000,
            equilibration: Equilibration::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub slope: f64,
    pub slope_stderr: f64,
    pub slope_negative: bool,
    pub energy_min: f64,
    pub energy_max: f64,
    pub energy_within_bounds: bool,
    pub fkg_cov: f64,
    pub fkg_sigma: f64,
    pub fkg_nonnegative: bool,
}

fn reaches_box_boundary<R: Rng + ?Sized>(
    params: &RcmParams,
    window: Window,
    cfg: Option<&EdgeConfig>,
    k: i32,
    rng: &mut R,
) -> bool {
    let on_box = |v: Vertex| v.x.abs().max(v.y.abs()) >= k;
    match cfg {
        None => explore_bernoulli(window, params.p, Vertex::ORIGIN, None, rng, on_box),
        Some(c) => {
            let mut seen = vec![false; window.vertex_count()];
            seen[window.vertex_index(Vertex::ORIGIN)] = true;
            let mut queue = VecDeque::from([Vertex::ORIGIN]);
            while let Some(v) = queue.pop_front() {
                if on_box(v) {
                    return true;
                }
                window.for_each_incident(v, |e, u| {
                    let ui = window.vertex_index(u);
                    if !seen[ui] && c.is_open(e) {
                        seen[ui] = true;
                        queue.push_back(u);
                    }
                });
            }
            false
        }
    }
}

/// Exponential-decay slope, bounded-energy range and an FKG covariance probe.
pub fn check_hypotheses<R: Rng + ?Sized>(
    params: &RcmParams,
    window: Window,
    settings: &DiagnosticSettings,
    rng: &mut R,
) -> Result<Diagnostics> {
    let l = window.half_width();
    if settings.k_min < 1 || settings.k_max <= settings.k_min || settings.k_max as i32 > l {
        return invalid("decay range must satisfy 1 <= k_min < k_max <= L");
    }
    // (a) decay of P(0 <-> boundary of B_k)
    let mut ks = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    let mut sampler = EquilibriumSampler::new(window, *params, settings.equilibration);
    for k in settings.k_min..=settings.k_max {
        let mut hits = 0u64;
        for _ in 0..settings.decay_trials {
            let hit = if params.is_bernoulli() {
                reaches_box_boundary(params, window, None, k as i32, rng)
            } else {
                let cfg = sampler.next(rng).clone();
                reaches_box_boundary(params, window, Some(&cfg), k as i32, rng)
            };
            hits += hit as u64;
        }
        if hits == 0 {
            return Err(Error::InsufficientTrials { k });
        }
        let est = Estimate::from_counts(hits, settings.decay_trials);
        ks.push(k as f64);
        ys.push(est.value.ln());
        let rel = (est.stderr / est.value).max(1e-12);
        ws.push(1.0 / (rel * rel));
    }
    let fit: LinearFit = weighted_linear_fit(&ks, &ys, &ws)?;

    // (b) bounded energy: the heat-bath probability over sampled (config, edge)
    let mut emin = f64::INFINITY;
    let mut emax = f64::NEG_INFINITY;
    let mut probe = PathProbe::new();
    let mut energy_sampler = EquilibriumSampler::new(window, *params, settings.equilibration);
    for _ in 0..settings.energy_samples.max(1) {
        let cfg = energy_sampler.next(rng).clone();
        for e in 0..window.edge_count() {
            let pr = conditional_open_prob_on(&window, cfg.bits(), e, params, &mut probe);
            emin = emin.min(pr);
            emax = emax.max(pr);
        }
    }
    let lower = params.p.min(params.isolated_open_prob());
    let energy_within_bounds = emin >= lower && emax <= params.p && emin > 0.0 && emax < 1.0;

    // (c) FKG covariance of two increasing events at the origin
    let e1 = window.edge_index(EdgeId::east(Vertex::ORIGIN))?;
    let e2 = window.edge_index(EdgeId::north(Vertex::ORIGIN))?;
    let mut fkg_sampler = EquilibriumSampler::new(window, *params, settings.equilibration);
    let n = settings.fkg_samples.max(2);
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for _ in 0..n {
        let cfg = fkg_sampler.next(rng);
        a.push(cfg.is_open(e1) as u8 as f64);
        b.push(cfg.is_open(e2) as u8 as f64);
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let prods: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let cov = prods.iter().sum::<f64>() / (n - 1) as f64;
    let var = prods.iter().map(|p| (p - cov).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sigma = (var / n as f64).sqrt();

    Ok(Diagnostics {
        slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        slope_negative: fit.slope < 0.0,
        energy_min: emin,
        energy_max: emax,
        energy_within_bounds,
        fkg_cov: cov,
        fkg_sigma: sigma,
        fkg_nonnegative: cov >= -3.0 * sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn params_validation() {
        assert!(RcmParams::new(0.0, 1.0, Boundary::Free).is_err());
        assert!(RcmParams::new(0.5, 0.9, Boundary::Free).is_err());
        let p = RcmParams::from_beta(0.3, 2.0, Boundary::Free).unwrap();
        assert!((p.p() - (1.0 - (-0.6f64).exp())).abs() < 1e-15);
        assert!((p.beta() - 0.3).abs() < 1e-12);
        assert!((RcmParams::critical_p(1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn params_json_accepts_beta() {
        let p: RcmParams =
            serde_json::from_str(r#"{"beta": 0.25, "q": 2.0, "boundary": "wired"}"#).unwrap();
        assert_eq!(p.boundary(), Boundary::Wired);
        assert!(
            serde_json::from_str::<RcmParams>(r#"{"p": 0.25, "beta": 0.9, "q": 2.0}"#).is_err()
        );
    }

    #[test]
    fn single_edge_enumeration() {
        let g = SmallGraph::single_edge();
        let d = exact_enumerate(&g, &RcmParams::new(0.3, 1.0, Boundary::Free).unwrap()).unwrap();
        assert!((d.prob(1) - 0.3).abs() < 1e-12 && (d.prob(0) - 0.7).abs() < 1e-12);
        let d = exact_enumerate(&g, &RcmParams::new(0.5, 2.0, Boundary::Free).unwrap()).unwrap();
        assert!((d.prob(1) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn enumeration_normalised() {
        let w = Window::new(1).unwrap();
        let d = exact_enumerate(&w, &RcmParams::new(0.45, 1.5, Boundary::Free).unwrap()).unwrap();
        assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(matches!(
            exact_enumerate(
                &Window::new(2).unwrap(),
                &RcmParams::new(0.45, 1.5, Boundary::Free).unwrap()
            ),
            Err(Error::Capacity { edges: 40, .. })
        ));
    }

    #[test]
    fn wired_contracts_rim() {
        // Under wired boundary two rim vertices are joined through the rim.
        let w = Window::new(1).unwrap();
        let cfg = EdgeConfig::closed(w);
        let params = RcmParams::new(0.5, 2.0, Boundary::Wired).unwrap();
        let e = w.edge_index(EdgeId::east(Vertex::new(-1, -1))).unwrap();
        let pr = conditional_open_prob_on(&w, cfg.bits(), e, &params, &mut PathProbe::new());
        assert_eq!(pr, 0.5);
        let free = RcmParams::new(0.5, 2.0, Boundary::Free).unwrap();
        let pr = conditional_open_prob_on(&w, cfg.bits(), e, &free, &mut PathProbe::new());
        assert!((pr - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn bernoulli_sweep_is_product() {
        let w = Window::new(6).unwrap();
        let params = RcmParams::new(0.3, 1.0, Boundary::Free).unwrap();
        let mut rng = seeded(5);
        let mut open = 0usize;
        let mut total = 0usize;
        for _ in 0..50 {
            let mut c = EdgeConfig::open(w);
            heat_bath_sweep(&mut c, &params, &mut rng);
            open += c.open_count();
            total += w.edge_count();
        }
        let f = open as f64 / total as f64;
        let se = (0.3f64 * 0.7 / total as f64).sqrt();
        assert!((f - 0.3).abs() < 4.0 * se);
    }

    #[test]
    fn sweep_deterministic() {
        let w = Window::new(3).unwrap();
        let params = RcmParams::new(0.4, 2.0, Boundary::Free).unwrap();
        let run = || {
            let mut c = EdgeConfig::closed(w);
            let mut rng = seeded(11);
            for _ in 0..5 {
                heat_bath_sweep(&mut c, &params, &mut rng);
            }
            c
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn connectivity_origin_is_one() {
        let w = Window::new(3).unwrap();
        let params = RcmParams::new(0.4, 2.0, Boundary::Free).unwrap();
        let e = estimate_connectivity(&params, w, Vertex::ORIGIN, 10, &mut seeded(1)).unwrap();
        assert_eq!(e.value, 1.0);
        assert!(estimate_connectivity(&params, w, Vertex::new(1, 0), 0, &mut seeded(1)).is_err());
    }
}
