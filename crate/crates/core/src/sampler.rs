//! Samples of the area-conditioned measures: exact rejection and a
//! constrained single-edge heat-bath chain.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    conditional_open_prob_on, Equilibration, EquilibriumSampler, PathProbe, RcmParams,
};
use crate::error::{invalid, Error, Result};
use crate::geometry::{
    extract_outermost_circuit, extract_sw_circuit, in_sw_halfplane, interior_area,
    outermost_around_face, sw_corner, Circuit, FaceTracker, GeometrySummary, TrackedCircuit,
};
use crate::lattice::{EdgeBits, EdgeConfig, Vertex, Window};
use crate::wulff::{global_distortion, WulffProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditioningMode {
    SwCentred,
    OriginCentred,
    AreaOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditioningSpec {
    pub mode: ConditioningMode,
    pub area_min: f64,
    #[serde(default)]
    pub c_sw: Option<Vertex>,
    /// Dilation of the Wulff shape for the centring test.
    #[serde(default)]
    pub n: Option<f64>,
}

impl ConditioningSpec {
    pub fn sw_centred(area_min: f64, c_sw: Vertex) -> Self {
        ConditioningSpec {
            mode: ConditioningMode::SwCentred,
            area_min,
            c_sw: Some(c_sw),
            n: None,
        }
    }

    pub fn area_only(area_min: f64) -> Self {
        ConditioningSpec {
            mode: ConditioningMode::AreaOnly,
            area_min,
            c_sw: None,
            n: None,
        }
    }

    pub fn origin_centred(area_min: f64, n: f64) -> Self {
        ConditioningSpec {
            mode: ConditioningMode::OriginCentred,
            area_min,
            c_sw: None,
            n: Some(n),
        }
    }

    pub fn validate(&self, window: Window) -> Result<()> {
        if !(self.area_min >= 0.0) || !self.area_min.is_finite() {
            return invalid("area_min must be a finite nonnegative number");
        }
        let l = window.half_width();
        match self.mode {
            ConditioningMode::SwCentred => {
                let Some(c) = self.c_sw else {
                    return invalid("sw_centred mode needs c_sw");
                };
                if c.x.abs() >= l - 1 || c.y.abs() >= l - 1 {
                    return invalid(format!("c_sw {c} needs a margin inside the window"));
                }
            }
            ConditioningMode::OriginCentred => {
                if !self.n.is_some_and(|n| n > 0.0) {
                    return invalid("origin_centred mode needs a positive n");
                }
            }
            ConditioningMode::AreaOnly => {}
        }
        Ok(())
    }

    /// The circuit certifying the event, when it holds.
    pub fn witness(
        &self,
        config: &EdgeConfig,
        wulff: Option<&WulffProfile>,
    ) -> Result<Option<Circuit>> {
        let circuit = match self.mode {
            ConditioningMode::SwCentred => {
                let c = self
                    .c_sw
                    .ok_or_else(|| Error::InvalidInput("sw_centred mode needs c_sw".into()))?;
                extract_sw_circuit(config, c)?
            }
            _ => extract_outermost_circuit(config, Vertex::ORIGIN)?,
        };
        match circuit {
            Some(c) if self.admits(&c, wulff)? => Ok(Some(c)),
            _ => Ok(None),
        }
    }

    /// Whether an extracted circuit meets the area and centring requirements.
    pub fn admits(&self, circuit: &Circuit, wulff: Option<&WulffProfile>) -> Result<bool> {
        if interior_area(circuit) < self.area_min {
            return Ok(false);
        }
        if self.mode == ConditioningMode::OriginCentred {
            let w = wulff.ok_or_else(|| {
                Error::InvalidInput("origin_centred mode needs a Wulff profile".into())
            })?;
            let d = global_distortion(circuit, w, self.n.unwrap_or(1.0))?;
            return Ok(d.centre == Vertex::ORIGIN);
        }
        Ok(true)
    }

    fn tracked(&self) -> TrackedCircuit {
        match (self.mode, self.c_sw) {
            (ConditioningMode::SwCentred, Some(c)) => TrackedCircuit::Southwest(c),
            _ => TrackedCircuit::AroundPoint(Vertex::ORIGIN),
        }
    }

    /// Centre mode without a profile falls back to the area-only event.
    pub fn effective(&self, wulff: Option<&WulffProfile>) -> (ConditioningSpec, bool) {
        if self.mode == ConditioningMode::OriginCentred && wulff.is_none() {
            (
                ConditioningSpec {
                    mode: ConditioningMode::AreaOnly,
                    ..*self
                },
                true,
            )
        } else {
            (*self, false)
        }
    }
}

#[derive(Clone, Debug)]
pub struct RejectionSample {
    pub config: EdgeConfig,
    pub circuit: Circuit,
    pub attempts: u64,
}

/// Product-measure draw that explores the cluster of `c_sw` inside the
/// southwest half-plane first and rejects early when it is too small to
/// carry a circuit of the required area.
fn bernoulli_sw_attempt<R: Rng + ?Sized>(
    window: Window,
    p: f64,
    c_sw: Vertex,
    area_min: f64,
    rng: &mut R,
    decided: &mut Vec<u8>,
    seen: &mut Vec<bool>,
) -> Option<(EdgeConfig, Circuit)> {
    decided.clear();
    decided.resize(window.edge_count(), 0);
    seen.clear();
    seen.resize(window.vertex_count(), false);
    seen[window.vertex_index(c_sw)] = true;
    // The southwest corner of the circuit uses both its east and north edges.
    for u in [
        Vertex::new(c_sw.x + 1, c_sw.y),
        Vertex::new(c_sw.x, c_sw.y + 1),
    ] {
        let e = window.edge_between(c_sw, u).expect("c_sw has a margin");
        decided[e] = if rng.gen::<f64>() < p { 1 } else { 2 };
        if decided[e] == 2 {
            return None;
        }
    }
    let mut queue = VecDeque::from([c_sw]);
    let (mut lo, mut hi) = (c_sw, c_sw);
    let mut open_edges = 2usize;
    while let Some(v) = queue.pop_front() {
        window.for_each_incident(v, |e, u| {
            if !in_sw_halfplane(u, c_sw) {
                return;
            }
            if decided[e] == 0 {
                decided[e] = if rng.gen::<f64>() < p { 1 } else { 2 };
                if decided[e] == 1 {
                    open_edges += 1;
                }
            }
            let ui = window.vertex_index(u);
            if decided[e] == 1 && !seen[ui] {
                seen[ui] = true;
                lo = Vertex::new(lo.x.min(u.x), lo.y.min(u.y));
                hi = Vertex::new(hi.x.max(u.x), hi.y.max(u.y));
                queue.push_back(u);
            }
        });
    }
    let side = area_min.sqrt();
    if ((hi.x - lo.x) as f64) * ((hi.y - lo.y) as f64) < area_min
        || (open_edges as f64) < 4.0 * side
    {
        return None;
    }
    // Extract on a small window around the cluster bounding box.
    let shift = Vertex::new((lo.x + hi.x).div_euclid(2), (lo.y + hi.y).div_euclid(2));
    let h = (hi.x - shift.x)
        .max(shift.x - lo.x)
        .max(hi.y - shift.y)
        .max(shift.y - lo.y)
        + 2;
    let local = Window::new(h).ok()?;
    let open = |e: usize| {
        let (a, b) = local.edge_endpoints(e);
        window
            .edge_between(a + shift, b + shift)
            .is_some_and(|g| decided[g] == 1)
    };
    let circuit = outermost_around_face(local, &open, c_sw - shift)?.translate(shift);
    if sw_corner(&circuit) != c_sw || interior_area(&circuit) < area_min {
        return None;
    }
    let mut bits = EdgeBits::new(window.edge_count());
    for (e, d) in decided.iter_mut().enumerate() {
        if *d == 0 {
            *d = if rng.gen::<f64>() < p { 1 } else { 2 };
        }
        bits.set(e, *d == 1);
    }
    Some((
        EdgeConfig::from_bits(window, bits).expect("sized to window"),
        circuit,
    ))
}

/// Draws equilibrated samples until the conditioning event holds.
pub fn sample_rejection<R: Rng + ?Sized>(
    window: Window,
    params: &RcmParams,
    spec: &ConditioningSpec,
    wulff: Option<&WulffProfile>,
    rng: &mut R,
    max_attempts: u64,
) -> Result<RejectionSample> {
    spec.validate(window)?;
    if spec.mode == ConditioningMode::SwCentred && params.is_bernoulli() {
        let c = spec.c_sw.expect("validated");
        let (mut decided, mut seen) = (Vec::new(), Vec::new());
        for attempt in 1..=max_attempts {
            if let Some((config, circuit)) = bernoulli_sw_attempt(
                window,
                params.p(),
                c,
                spec.area_min,
                rng,
                &mut decided,
                &mut seen,
            ) {
                return Ok(RejectionSample {
                    config,
                    circuit,
                    attempts: attempt,
                });
            }
        }
        return Err(Error::RejectionExhausted {
            attempts: max_attempts,
        });
    }
    let mut sampler = EquilibriumSampler::new(window, *params, Equilibration::default());
    for attempt in 1..=max_attempts {
        let config = sampler.next(rng);
        if let Some(circuit) = spec.witness(config, wulff)? {
            return Ok(RejectionSample {
                config: config.clone(),
                circuit,
                attempts: attempt,
            });
        }
    }
    Err(Error::RejectionExhausted {
        attempts: max_attempts,
    })
}

/// Square seed circuit meeting the area requirement: southwest corner at
/// `c_sw` in sw mode, roughly centred on the origin otherwise.
pub fn seed_circuit(window: Window, spec: &ConditioningSpec) -> Result<Circuit> {
    let s = (spec.area_min.sqrt().ceil() as i32).max(2);
    let corner = match spec.mode {
        ConditioningMode::SwCentred => spec
            .c_sw
            .ok_or_else(|| Error::InvalidInput("sw_centred mode needs c_sw".into()))?,
        _ => Vertex::new(-s / 2, -s / 2),
    };
    let l = window.half_width();
    if corner.x <= -l || corner.y <= -l || corner.x + s >= l || corner.y + s >= l {
        return invalid(format!(
            "window L = {l} too small for a seed square of side {s}"
        ));
    }
    let mut v = Vec::new();
    for x in corner.x..corner.x + s {
        v.push(Vertex::new(x, corner.y));
    }
    for y in corner.y..corner.y + s {
        v.push(Vertex::new(corner.x + s, y));
    }
    for x in (corner.x + 1..=corner.x + s).rev() {
        v.push(Vertex::new(x, corner.y + s));
    }
    for y in (corner.y + 1..=corner.y + s).rev() {
        v.push(Vertex::new(corner.x, y));
    }
    Circuit::new(v)
}

/// Heat-bath chain from a seed square, rejecting flips that break the event.
/// Exterior reachability is tracked incrementally, and the witness is
/// re-extracted only when a flip changes reachability next to it.
pub fn sample_constrained_mcmc<R: Rng + ?Sized>(
    window: Window,
    params: &RcmParams,
    spec: &ConditioningSpec,
    wulff: Option<&WulffProfile>,
    sweeps: usize,
    rng: &mut R,
) -> Result<EdgeConfig> {
    Ok(
        ConstrainedChain::new(window, *params, *spec, wulff.cloned())?
            .run(sweeps, rng)?
            .clone(),
    )
}

/// Persistent constrained chain, for drawing spaced samples.
#[derive(Clone, Debug)]
pub struct ConstrainedChain {
    params: RcmParams,
    spec: ConditioningSpec,
    wulff: Option<WulffProfile>,
    config: EdgeConfig,
    witness: Circuit,
    tracker: FaceTracker,
    probe: PathProbe,
}

impl ConstrainedChain {
    pub fn new(
        window: Window,
        params: RcmParams,
        spec: ConditioningSpec,
        wulff: Option<WulffProfile>,
    ) -> Result<Self> {
        spec.validate(window)?;
        let seed = seed_circuit(window, &spec)?;
        let mut config = EdgeConfig::closed(window);
        let mut path = seed.vertices().to_vec();
        path.push(path[0]);
        config.open_path(&path)?;
        let witness = spec.witness(&config, wulff.as_ref())?.ok_or_else(|| {
            Error::InvalidInput("seed square does not satisfy the conditioning".into())
        })?;
        let tracker = FaceTracker::new(&config, spec.tracked())?;
        Ok(ConstrainedChain {
            params,
            spec,
            wulff,
            config,
            witness,
            tracker,
            probe: PathProbe::new(),
        })
    }

    pub fn config(&self) -> &EdgeConfig {
        &self.config
    }

    pub fn witness(&self) -> &Circuit {
        &self.witness
    }

    pub fn run<R: Rng + ?Sized>(&mut self, sweeps: usize, rng: &mut R) -> Result<&EdgeConfig> {
        let w = self.config.window();
        for _ in 0..sweeps {
            for e in 0..w.edge_count() {
                let pr = conditional_open_prob_on(
                    &w,
                    self.config.bits(),
                    e,
                    &self.params,
                    &mut self.probe,
                );
                let new = rng.gen::<f64>() < pr;
                if new == self.config.is_open(e) {
                    continue;
                }
                self.config.set(e, new);
                let change = self.tracker.apply(&self.config, e);
                if change.is_empty() || !self.tracker.touches_inner(&change) {
                    continue;
                }
                let candidate = match self.tracker.extract(&self.config) {
                    Some((c, filled)) if self.spec.admits(&c, self.wulff.as_ref())? => {
                        Some((c, filled))
                    }
                    _ => None,
                };
                match candidate {
                    Some((c, filled)) => {
                        self.tracker.set_inner(filled);
                        self.witness = c;
                    }
                    None => {
                        self.config.set(e, !new);
                        self.tracker.undo(&change);
                    }
                }
            }
        }
        Ok(&self.config)
    }
}

/// Most frequent corner, ties to the lexicographically smallest.
pub fn sw_mode(corners: &[Vertex]) -> Result<Vertex> {
    if corners.is_empty() {
        return invalid("no samples for the southwest mode");
    }
    let mut counts: BTreeMap<Vertex, usize> = BTreeMap::new();
    for &c in corners {
        *counts.entry(c).or_default() += 1;
    }
    let best = counts.values().copied().max().expect("nonempty");
    Ok(*counts
        .iter()
        .find(|(_, &n)| n == best)
        .expect("max exists")
        .0)
}

/// Empirical mode of the outermost circuit's southwest corner under the area event (centred when a profile is given).
pub fn estimate_c_sw<R: Rng + ?Sized>(
    window: Window,
    params: &RcmParams,
    n: f64,
    samples: usize,
    wulff: Option<&WulffProfile>,
    rng: &mut R,
    max_attempts: u64,
) -> Result<Vertex> {
    if samples == 0 {
        return invalid("samples must be positive");
    }
    let spec = ConditioningSpec::origin_centred(n * n, n);
    let (spec, _) = spec.effective(wulff);
    let mut corners = Vec::with_capacity(samples);
    for _ in 0..samples {
        let s = sample_rejection(window, params, &spec, wulff, rng, max_attempts)?;
        corners.push(sw_corner(&s.circuit));
    }
    sw_mode(&corners)
}

/// Deterministic surrogate: the floored westmost point of the Wulff shape scaled by `n`.
pub fn wulff_c_sw(w: &WulffProfile, n: f64) -> Vertex {
    let p = w.boundary_point(std::f64::consts::PI);
    Vertex::new(
        (n * p[0] + 1e-9).floor() as i32,
        (n * p[1] + 1e-9).floor() as i32,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveManifest {
    pub version: String,
    pub params: RcmParams,
    pub spec: ConditioningSpec,
    pub seed: u64,
    pub sweeps: usize,
    pub files: Vec<String>,
    pub summary: Vec<GeometrySummary>,
}

/// Writes snapshot files plus `manifest.json` into `dir`.
pub fn write_archive(
    dir: &Path,
    configs: &[EdgeConfig],
    params: RcmParams,
    spec: ConditioningSpec,
    seed: u64,
    sweeps: usize,
    summary: Vec<GeometrySummary>,
) -> Result<ArchiveManifest> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::with_capacity(configs.len());
    for (i, c) in configs.iter().enumerate() {
        let name = format!("sample_{i:05}.snap");
        std::fs::write(dir.join(&name), c.to_snapshot())?;
        files.push(name);
    }
    let manifest = ArchiveManifest {
        version: crate::ARTIFACT_VERSION.to_string(),
        params,
        spec,
        seed,
        sweeps,
        files,
        summary,
    };
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

pub fn read_archive(dir: &Path) -> Result<(ArchiveManifest, Vec<EdgeConfig>)> {
    let manifest: ArchiveManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
    let configs = manifest
        .files
        .iter()
        .map(|f| EdgeConfig::from_snapshot(&std::fs::read_to_string(dir.join(f))?))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, configs))
}
