use std::collections::{HashMap, VecDeque};
use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cones::{is_regeneration_site, DEFAULT_DENSITY};
use crate::dynamics::{conditional_open_prob_on, PathProbe, RcmParams};
use crate::error::{invalid, Result};
use crate::geometry::{extract_sw_circuit, in_sw_halfplane, Circuit};
use crate::lattice::{EdgeBits, EdgeConfig, Vertex, Window};

#[inline]
fn cross(a: Vertex, b: Vertex) -> i64 {
    a.x as i64 * b.y as i64 - a.y as i64 * b.x as i64
}

/// Membership in the closed sector from ray `x` ccw to ray `y`, origin excluded.
#[inline]
pub fn in_closed_sector(x: Vertex, y: Vertex, z: Vertex) -> bool {
    z != Vertex::ORIGIN && cross(x, z) >= 0 && cross(z, y) >= 0
}

/// Window edges with both endpoints in the sector.
#[derive(Clone, Debug)]
pub struct SectorRegion {
    pub x: Vertex,
    pub y: Vertex,
    pub edges: Vec<usize>,
    pub mask: EdgeBits,
}

impl SectorRegion {
    /// Needs `x`, `y` in the closed right half-plane with
    /// `0 < arg y − arg x < π/2`.
    pub fn new(window: Window, x: Vertex, y: Vertex, c_sw: Vertex) -> Result<Self> {
        window.check(x)?;
        window.check(y)?;
        if x.x < 0 || y.x < 0 || x == Vertex::ORIGIN || y == Vertex::ORIGIN {
            return invalid("sector endpoints must be nonzero and in the right half-plane");
        }
        if cross(x, y) <= 0 || (x.x as i64 * y.x as i64 + x.y as i64 * y.y as i64) <= 0 {
            return invalid("sector endpoints need 0 < arg(y) - arg(x) < pi/2");
        }
        let mut edges = Vec::new();
        for e in 0..window.edge_count() {
            let (a, b) = window.edge_endpoints(e);
            if in_closed_sector(x, y, a)
                && in_closed_sector(x, y, b)
                && in_sw_halfplane(a, c_sw)
                && in_sw_halfplane(b, c_sw)
            {
                edges.push(e);
            }
        }
        let mask = EdgeBits::from_indices(window.edge_count(), edges.iter().copied());
        Ok(SectorRegion { x, y, edges, mask })
    }
}

fn angle_of(d: [f64; 2]) -> f64 {
    d[1].atan2(d[0])
}

/// Outermost open path from `x` to `y` inside the sector: a right-hand wall
/// walk from `x` followed by chronological loop erasure.
pub fn gamma_path(config: &EdgeConfig, region: &SectorRegion) -> Option<Vec<Vertex>> {
    let w = config.window();
    let (x, y) = (region.x, region.y);
    let mut back = [-(x.x as f64), -(x.y as f64)];
    let mut v = x;
    let mut walk = vec![x];
    let limit = 2 * region.edges.len() + 4;
    for _ in 0..limit {
        let base = angle_of(back);
        let mut best: Option<(f64, Vertex)> = None;
        w.for_each_incident(v, |e, u| {
            if !region.mask.get(e) || !config.is_open(e) {
                return;
            }
            let d = [(u.x - v.x) as f64, (u.y - v.y) as f64];
            let mut a = (angle_of(d) - base).rem_euclid(TAU);
            if a < 1e-12 {
                a = TAU;
            }
            if best.is_none_or(|(b, _)| a < b) {
                best = Some((a, u));
            }
        });
        let (_, u) = best?;
        back = [(v.x - u.x) as f64, (v.y - u.y) as f64];
        v = u;
        walk.push(v);
        if v == y {
            return Some(loop_erase(&walk));
        }
    }
    None
}

pub fn loop_erase(walk: &[Vertex]) -> Vec<Vertex> {
    let mut out: Vec<Vertex> = Vec::with_capacity(walk.len());
    let mut pos: HashMap<Vertex, usize> = HashMap::new();
    for &v in walk {
        if let Some(&i) = pos.get(&v) {
            for u in out.drain(i + 1..) {
                pos.remove(&u);
            }
        } else {
            pos.insert(v, out.len());
            out.push(v);
        }
    }
    out
}

/// Arc of the circuit from `y` counterclockwise to `x`, inclusive.
pub fn exterior_arc(circuit: &Circuit, x: Vertex, y: Vertex) -> Option<Vec<Vertex>> {
    let (px, py) = (circuit.position(x)?, circuit.position(y)?);
    let v = circuit.vertices();
    let n = v.len();
    let len = (px + n - py) % n + 1;
    Some((0..len).map(|k| v[(py + k) % n]).collect())
}

fn open_chain_area2(path: &[Vertex]) -> i64 {
    path.windows(2).map(|w| cross(w[0], w[1])).sum()
}

/// Twice the area of the arc closed by `gamma` (`x` to `y`).
pub fn spliced_area2(arc_area2: i64, gamma: &[Vertex]) -> i64 {
    arc_area2 + open_chain_area2(gamma)
}

/// Vertex marks and edges of the open cluster of `start`.
pub(crate) fn scan_cluster(
    config: &EdgeConfig,
    start: Vertex,
    mark: &mut Vec<bool>,
) -> Vec<(Vertex, Vertex)> {
    let w = config.window();
    mark.clear();
    mark.resize(w.vertex_count(), false);
    mark[w.vertex_index(start)] = true;
    let mut queue = VecDeque::from([start]);
    let mut edges = Vec::new();
    while let Some(v) = queue.pop_front() {
        w.for_each_incident(v, |e, u| {
            if !config.is_open(e) {
                return;
            }
            if v < u {
                edges.push((v, u));
            }
            let ui = w.vertex_index(u);
            if !mark[ui] {
                mark[ui] = true;
                queue.push_back(u);
            }
        });
    }
    edges.sort_unstable();
    edges
}

/// Which shape the endpoint regeneration test is applied to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Regeneration sites of the whole open cluster of `x`.
    #[default]
    Cluster,
    /// Regeneration sites of the circuit, with the splice identity imposed
    /// as an extra conditioning event.
    Circuit,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsiEvents {
    pub connected: bool,
    pub cone: bool,
    pub area: bool,
    /// Imposed only under [`SelectionRule::Circuit`]; `true` otherwise.
    pub splice: bool,
}

impl PsiEvents {
    pub fn all(&self) -> bool {
        self.connected && self.cone && self.area && self.splice
    }

    fn admissible(&self, options: PsiOptions) -> bool {
        (!options.enforce_events || (self.connected && self.cone && self.splice))
            && (!options.enforce_area || self.area)
    }
}

/// The fixed data of one ψ action: sector, exterior arc and event parameters.
#[derive(Clone, Debug)]
pub struct PsiFrame {
    pub region: SectorRegion,
    pub arc: Vec<Vertex>,
    pub arc_area2: i64,
    pub area_min2: i64,
    pub q: f64,
    pub c: f64,
    pub c_sw: Vertex,
    pub rule: SelectionRule,
}

impl PsiFrame {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        window: Window,
        circuit: &Circuit,
        x: Vertex,
        y: Vertex,
        c_sw: Vertex,
        n: u32,
        q: f64,
        c: f64,
        rule: SelectionRule,
    ) -> Result<Self> {
        let region = SectorRegion::new(window, x, y, c_sw)?;
        let arc = match exterior_arc(circuit, x, y) {
            Some(a) => a,
            None => return invalid("sector endpoints must lie on the circuit"),
        };
        let arc_area2 = open_chain_area2(&arc);
        Ok(PsiFrame {
            region,
            arc,
            arc_area2,
            area_min2: 2 * (n as i64) * (n as i64),
            q,
            c,
            c_sw,
            rule,
        })
    }

    /// `arc ∪ γ` as a circuit, when simple.
    pub fn spliced(&self, gamma: &[Vertex]) -> Option<Circuit> {
        let mut v = self.arc.clone();
        v.extend_from_slice(&gamma[1..gamma.len().saturating_sub(1)]);
        Circuit::new(v).ok()
    }

    /// Evaluates the conditioning events; `mark` receives the cluster of `x`.
    pub fn events(
        &self,
        config: &EdgeConfig,
        mark: &mut Vec<bool>,
    ) -> (PsiEvents, Option<Vec<Vertex>>) {
        let (x, y) = (self.region.x, self.region.y);
        let cluster = scan_cluster(config, x, mark);
        let gamma = gamma_path(config, &self.region);
        let connected = gamma.is_some();
        let area = gamma
            .as_ref()
            .is_some_and(|g| spliced_area2(self.arc_area2, g) >= self.area_min2);
        let (cone, splice) = match (self.rule, gamma.as_deref()) {
            (_, None) => (false, false),
            (SelectionRule::Cluster, Some(_)) => (
                is_regeneration_site(&cluster, x, self.q, self.c, [0.0, 0.0], DEFAULT_DENSITY)
                    && is_regeneration_site(
                        &cluster,
                        y,
                        self.q,
                        self.c,
                        [0.0, 0.0],
                        DEFAULT_DENSITY,
                    ),
                true,
            ),
            (SelectionRule::Circuit, Some(g)) => match self.spliced(g) {
                None => (false, false),
                Some(new) => {
                    let splice = extract_sw_circuit(config, self.c_sw)
                        .ok()
                        .flatten()
                        .is_some_and(|c| c == new);
                    let edges: Vec<(Vertex, Vertex)> = new.edges().collect();
                    let cone = is_regeneration_site(
                        &edges,
                        x,
                        self.q,
                        self.c,
                        [0.0, 0.0],
                        DEFAULT_DENSITY,
                    ) && is_regeneration_site(
                        &edges,
                        y,
                        self.q,
                        self.c,
                        [0.0, 0.0],
                        DEFAULT_DENSITY,
                    );
                    (cone, splice)
                }
            },
        };
        (
            PsiEvents {
                connected,
                cone,
                area,
                splice,
            },
            gamma,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiOptions {
    pub budget: usize,
    pub enforce_area: bool,
    /// Connection, cone and splice events; switched off only in controls.
    #[serde(default = "yes")]
    pub enforce_events: bool,
}

fn yes() -> bool {
    true
}

impl Default for PsiOptions {
    fn default() -> Self {
        PsiOptions {
            budget: 4,
            enforce_area: true,
            enforce_events: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PsiOutcome {
    pub config: EdgeConfig,
    pub acted: bool,
    pub noop: Option<String>,
    pub accepted: u64,
    pub rejected: u64,
    pub events: PsiEvents,
    pub gamma: Option<Vec<Vertex>>,
}

/// Resamples the sector edges by a heat-bath chain that rejects any flip
/// breaking one of the conditioning events. Edges outside the sector are
/// never touched.
pub fn psi_resample<R: Rng + ?Sized>(
    config: &EdgeConfig,
    frame: &PsiFrame,
    rcm: &RcmParams,
    options: PsiOptions,
    rng: &mut R,
) -> Result<PsiOutcome> {
    if options.budget == 0 {
        return invalid("psi budget must be positive");
    }
    let w = config.window();
    let mut mark = Vec::new();
    let (start, _) = frame.events(config, &mut mark);
    if !start.admissible(options) {
        return Ok(PsiOutcome {
            config: config.clone(),
            acted: false,
            noop: Some(format!("input violates conditioning events {start:?}")),
            accepted: 0,
            rejected: 0,
            events: start,
            gamma: None,
        });
    }
    let mut cfg = config.clone();
    let mut probe = PathProbe::new();
    let (mut accepted, mut rejected) = (0u64, 0u64);
    for _ in 0..options.budget {
        for &e in &frame.region.edges {
            let pr = conditional_open_prob_on(&w, cfg.bits(), e, rcm, &mut probe);
            let new = rng.gen::<f64>() < pr;
            if new == cfg.is_open(e) {
                continue;
            }
            cfg.set(e, new);
            let (a, b) = w.edge_endpoints(e);
            let unconstrained = !options.enforce_area && !options.enforce_events;
            if unconstrained || (!mark[w.vertex_index(a)] && !mark[w.vertex_index(b)]) {
                accepted += 1;
                continue;
            }
            let mut trial_mark = Vec::new();
            let (ev, _) = frame.events(&cfg, &mut trial_mark);
            if ev.admissible(options) {
                accepted += 1;
                mark = trial_mark;
            } else {
                cfg.set(e, !new);
                rejected += 1;
            }
        }
    }
    let (events, gamma) = frame.events(&cfg, &mut mark);
    Ok(PsiOutcome {
        config: cfg,
        acted: true,
        noop: None,
        accepted,
        rejected,
        events,
        gamma,
    })
}

/// Recomputes both sides of the splice rule: after the action, the sw-anchored
/// circuit is its old part outside the sector joined with the new path.
pub fn circuit_update_identity(
    before: &EdgeConfig,
    after: &EdgeConfig,
    x: Vertex,
    y: Vertex,
    c_sw: Vertex,
) -> Result<bool> {
    if before == after {
        return Ok(true);
    }
    let (Some(old), Some(new)) = (
        extract_sw_circuit(before, c_sw)?,
        extract_sw_circuit(after, c_sw)?,
    ) else {
        return Ok(false);
    };
    let Some(arc) = exterior_arc(&old, x, y) else {
        return Ok(false);
    };
    let region = SectorRegion::new(after.window(), x, y, c_sw)?;
    let Some(gamma) = gamma_path(after, &region) else {
        return Ok(false);
    };
    let mut vertices = arc;
    vertices.extend_from_slice(&gamma[1..gamma.len() - 1]);
    Ok(Circuit::new(vertices).is_ok_and(|c| c == new))
}
