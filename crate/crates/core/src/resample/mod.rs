//! Sector-resampling chain: partition, endpoint selection, the constrained
//! sector resampler, event predicates, sector classes and the full sweep.

mod events;
mod params;
mod psi;
mod sectors;
mod select;

use std::collections::BTreeSet;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use events::{
    captured_area, check_gac, check_sid, diameter, distance_to_sector_complement, gac_from_path,
    sid_from_path, triangle_area, GacReport, SidReport,
};
pub use params::{
    sector_of, sector_partition, ResampleParams, Sector, DEFAULT_CHI, DEFAULT_EPS, DEFAULT_EPS0,
};
pub use psi::{
    circuit_update_identity, exterior_arc, gamma_path, in_closed_sector, loop_erase, psi_resample,
    spliced_area2, PsiEvents, PsiFrame, PsiOptions, PsiOutcome, SectorRegion, SelectionRule,
};
pub use sectors::{
    classify_mbt, classify_unfav, favourable_sectors, hull_ray_point, in_convex, pentagon_bound,
    turning_profile, PentagonReport, TurningSample,
};
pub use select::{
    cluster_regeneration_ok, first_hit, locate_endpoints, select_endpoints, Endpoints, RayHit,
    Selection,
};

use crate::cones::{regeneration_sites, Shape};
use crate::dynamics::RcmParams;
use crate::error::Result;
use crate::geometry::{convex_hull, extract_sw_circuit, mfl_of_hull, mlr_with_hull, Circuit};
use crate::lattice::{EdgeConfig, Vertex};

pub const RESLOG_SCHEMA: &str = "reslog v1";

/// Everything a stage needs besides the configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResampleEngine {
    pub params: ResampleParams,
    pub rcm: RcmParams,
    pub c_sw: Vertex,
    pub psi: PsiOptions,
    /// Deviation constant used for the GAC/SID flags.
    pub delta: f64,
    /// Recompute the splice identity on every action.
    pub check_splice: bool,
    #[serde(default)]
    pub rule: SelectionRule,
}

impl ResampleEngine {
    pub fn new(params: ResampleParams, rcm: RcmParams, c_sw: Vertex) -> Self {
        ResampleEngine {
            params,
            rcm,
            c_sw,
            psi: PsiOptions::default(),
            delta: 0.5,
            check_splice: true,
            rule: SelectionRule::Cluster,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodEvents {
    pub g1: bool,
    pub g2: bool,
    pub g3: bool,
    pub g4: bool,
}

impl GoodEvents {
    pub fn all(&self) -> bool {
        self.g1 && self.g2 && self.g3 && self.g4
    }
}

/// Per-configuration quantities entering the stage records.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitState {
    pub circuit: Circuit,
    pub hull: Vec<Vertex>,
    pub favourable: BTreeSet<usize>,
    pub mfl: f64,
    pub mlr: f64,
}

impl CircuitState {
    pub fn of(circuit: Circuit, params: &ResampleParams) -> Self {
        let hull = convex_hull(&circuit);
        let favourable = favourable_sectors(&circuit, params);
        let (mfl, mlr) = (mfl_of_hull(&hull), mlr_with_hull(&circuit, &hull));
        CircuitState {
            circuit,
            hull,
            favourable,
            mfl,
            mlr,
        }
    }

    /// Between the inner and outer radii `c1·n` and `c1_big·n` with the origin enclosed.
    pub fn annulus_ok(&self, params: &ResampleParams) -> bool {
        let (lo, hi) = (params.c1 * params.nf(), params.c1_big * params.nf());
        self.circuit.encloses(Vertex::ORIGIN)
            && self.circuit.vertices().iter().all(|v| {
                let r = (v.norm_sq() as f64).sqrt();
                r > lo && r <= hi
            })
    }

    pub fn avoids_inner_ball(&self, params: &ResampleParams) -> bool {
        let lo = params.c1 * params.nf();
        self.circuit
            .vertices()
            .iter()
            .all(|v| (v.norm_sq() as f64).sqrt() > lo)
    }

    /// Radial function of the hull at `count + 1` angles across sector `k`.
    pub fn hull_profile(
        &self,
        params: &ResampleParams,
        k: usize,
        count: usize,
    ) -> Vec<Option<[f64; 2]>> {
        let hull: Vec<[f64; 2]> = self.hull.iter().map(|v| v.to_f64()).collect();
        let t = params.theta();
        (0..=count)
            .map(|i| {
                hull_ray_point(&hull, (k as f64 + i as f64 / count as f64) * t).map(|(p, _)| p)
            })
            .collect()
    }
}

pub fn good_events(
    config: &EdgeConfig,
    state: &CircuitState,
    params: &ResampleParams,
) -> Result<GoodEvents> {
    let g1 = state.mfl <= params.mfl_bound();
    let g2 = state.mlr <= params.mlr_bound();
    let g4 = state.annulus_ok(params);
    let g3 = if state.circuit.encloses(Vertex::ORIGIN) {
        let w = config.window();
        let start = state.circuit.vertices()[0];
        let edges: Vec<(Vertex, Vertex)> = crate::lattice::open_cluster(config, start, None)?
            .into_iter()
            .map(|e| w.edge_endpoints(e))
            .collect();
        let report = regeneration_sites(
            Shape::Cluster(&edges),
            params.cluster_q(),
            params.cluster_c(),
            [0.0, 0.0],
        )?;
        report.theta_max <= params.theta_max_bound()
    } else {
        false
    };
    Ok(GoodEvents { g1, g2, g3, g4 })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersistenceCounts {
    pub checked: u64,
    pub favourability_violations: u64,
    pub hull_violations: u64,
}

impl PersistenceCounts {
    pub fn add(&mut self, other: PersistenceCounts) {
        self.checked += other.checked;
        self.favourability_violations += other.favourability_violations;
        self.hull_violations += other.hull_violations;
    }

    pub fn violations(&self) -> u64 {
        self.favourability_violations + self.hull_violations
    }
}

/// One stage record of the sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub schema: String,
    pub j: usize,
    pub coin: bool,
    pub selected: Option<[[i32; 2]; 2]>,
    pub success: bool,
    pub acted: bool,
    pub gac: bool,
    pub sid: bool,
    pub events_ok: Option<bool>,
    pub splice_ok: Option<bool>,
    pub exterior_ok: Option<bool>,
    pub noop: Option<String>,
    pub favourable_before: Vec<usize>,
    pub favourable_after: Vec<usize>,
    pub good: GoodEvents,
    pub persistence: PersistenceCounts,
}

impl StageRecord {
    fn idle(j: usize, coin: bool, fav: &BTreeSet<usize>) -> Self {
        let fav: Vec<usize> = fav.iter().copied().collect();
        StageRecord {
            schema: RESLOG_SCHEMA.to_string(),
            j,
            coin,
            selected: None,
            success: false,
            acted: false,
            gac: false,
            sid: false,
            events_ok: None,
            splice_ok: None,
            exterior_ok: None,
            noop: None,
            favourable_before: fav.clone(),
            favourable_after: fav,
            good: GoodEvents::default(),
            persistence: PersistenceCounts::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResLog {
    pub records: Vec<StageRecord>,
}

impl ResLog {
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<Vec<StageRecord>, _>>()?;
        Ok(ResLog { records })
    }

    pub fn persistence(&self) -> PersistenceCounts {
        let mut total = PersistenceCounts::default();
        for r in &self.records {
            total.add(r.persistence);
        }
        total
    }
}

/// Favourability and hull-locality comparison for every sector `k` at index
/// distance at least `s3()` from the acted sector, when the facet-length and
/// inner-ball hypotheses hold before and after.
pub fn persistence_check(
    j: usize,
    before: &CircuitState,
    after: &CircuitState,
    params: &ResampleParams,
) -> PersistenceCounts {
    let mut counts = PersistenceCounts::default();
    let bound = params.mfl_bound();
    let hyp = before.mfl <= bound
        && after.mfl <= bound
        && before.avoids_inner_ball(params)
        && after.avoids_inner_ball(params);
    if !hyp {
        return counts;
    }
    for k in 1..=params.m_n() {
        if j.abs_diff(k) < params.s3() {
            continue;
        }
        counts.checked += 1;
        if before.favourable.contains(&k) != after.favourable.contains(&k) {
            counts.favourability_violations += 1;
        }
        let (a, b) = (
            before.hull_profile(params, k, 8),
            after.hull_profile(params, k, 8),
        );
        let same = a.iter().zip(&b).all(|(p, q)| match (p, q) {
            (Some(p), Some(q)) => (p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9,
            (None, None) => true,
            _ => false,
        });
        if !same {
            counts.hull_violations += 1;
        }
    }
    counts
}

fn exterior_unchanged(before: &EdgeConfig, after: &EdgeConfig, region: &SectorRegion) -> bool {
    (0..before.window().edge_count())
        .all(|e| region.mask.get(e) || before.is_open(e) == after.is_open(e))
}

/// One resampling stage: identity on tails; otherwise endpoint selection and,
/// on success, the constrained sector resampling.
pub fn res_step<R: Rng + ?Sized>(
    config: &EdgeConfig,
    j: usize,
    engine: &ResampleEngine,
    rng: &mut R,
    coin: bool,
) -> Result<(EdgeConfig, StageRecord)> {
    let p = &engine.params;
    let Some(circuit) = extract_sw_circuit(config, engine.c_sw)? else {
        let mut rec = StageRecord::idle(j, coin, &BTreeSet::new());
        rec.noop = Some("no southwest circuit".into());
        return Ok((config.clone(), rec));
    };
    let before = CircuitState::of(circuit, p);
    let mut rec = StageRecord::idle(j, coin, &before.favourable);
    if !coin {
        rec.good = good_events(config, &before, p)?;
        return Ok((config.clone(), rec));
    }
    if !before.circuit.encloses(Vertex::ORIGIN) {
        rec.noop = Some("origin outside the southwest circuit".into());
        rec.good = good_events(config, &before, p)?;
        return Ok((config.clone(), rec));
    }
    let sel = select_endpoints(config, &before.circuit, j, p, engine.rule, rng)?;
    let (x, y) = (sel.endpoints.x, sel.endpoints.y);
    rec.selected = Some([[x.x, x.y], [y.x, y.y]]);
    rec.success = sel.success;
    if !sel.success {
        rec.good = good_events(config, &before, p)?;
        return Ok((config.clone(), rec));
    }
    let frame = match PsiFrame::new(
        config.window(),
        &before.circuit,
        x,
        y,
        engine.c_sw,
        p.n,
        p.cluster_q(),
        p.cluster_c(),
        engine.rule,
    ) {
        Ok(f) => f,
        Err(e) => {
            rec.noop = Some(e.to_string());
            rec.good = good_events(config, &before, p)?;
            return Ok((config.clone(), rec));
        }
    };
    let out = psi_resample(config, &frame, &engine.rcm, engine.psi, rng)?;
    rec.noop = out.noop.clone();
    if !out.acted {
        rec.good = good_events(config, &before, p)?;
        return Ok((config.clone(), rec));
    }
    rec.acted = true;
    rec.events_ok = Some(match (engine.psi.enforce_area, engine.psi.enforce_events) {
        (true, true) => out.events.all(),
        (false, true) => out.events.connected && out.events.cone && out.events.splice,
        (true, false) => out.events.area,
        (false, false) => true,
    });
    rec.exterior_ok = Some(exterior_unchanged(config, &out.config, &frame.region));
    if let Some(g) = &out.gamma {
        rec.gac = gac_from_path(Some(g), out.events.cone, x, y, engine.delta).holds();
        rec.sid = sid_from_path(g, x, y, engine.delta, p.q0).holds;
    }
    if engine.check_splice {
        rec.splice_ok = Some(circuit_update_identity(
            config,
            &out.config,
            x,
            y,
            engine.c_sw,
        )?);
    }
    match extract_sw_circuit(&out.config, engine.c_sw)? {
        Some(c) => {
            let after = CircuitState::of(c, p);
            rec.favourable_after = after.favourable.iter().copied().collect();
            rec.persistence = persistence_check(j, &before, &after, p);
            rec.good = good_events(&out.config, &after, p)?;
        }
        None => {
            rec.favourable_after.clear();
        }
    }
    Ok((out.config, rec))
}

/// The full sweep over the first-quadrant sectors, each gated by a coin of
/// probability `1/s3()`.
pub fn res_full<R: Rng + ?Sized>(
    config: &EdgeConfig,
    engine: &ResampleEngine,
    rng: &mut R,
) -> Result<(EdgeConfig, ResLog)> {
    let prob = 1.0 / engine.params.s3() as f64;
    let mut cfg = config.clone();
    let mut log = ResLog::default();
    for j in 1..=engine.params.m_n_prime() {
        let coin = rng.gen_bool(prob);
        let (next, rec) = res_step(&cfg, j, engine, rng, coin)?;
        cfg = next;
        log.records.push(rec);
    }
    Ok((cfg, log))
}

/// `res_full` with every coin fixed in advance.
pub fn res_full_with_coins<R: Rng + ?Sized>(
    config: &EdgeConfig,
    engine: &ResampleEngine,
    coins: &[bool],
    rng: &mut R,
) -> Result<(EdgeConfig, ResLog)> {
    let mut cfg = config.clone();
    let mut log = ResLog::default();
    for (idx, j) in (1..=engine.params.m_n_prime()).enumerate() {
        let coin = coins.get(idx).copied().unwrap_or(false);
        let (next, rec) = res_step(&cfg, j, engine, rng, coin)?;
        cfg = next;
        log.records.push(rec);
    }
    Ok((cfg, log))
}
