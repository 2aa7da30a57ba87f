use serde::{Deserialize, Serialize};

use super::config::{ControlKind, ExperimentConfig, ExperimentKind};
use super::{
    c_sw_for, critical_note, draw_samples, fan_out, pool, prepare_output, resolve_wulff, write_csv,
    Check, Report,
};
use crate::error::{invalid, Result};
use crate::geometry::{
    extract_outermost_circuit, extract_sw_circuit, interior_area, GeometrySummary,
};
use crate::lattice::{EdgeConfig, Vertex};
use crate::resample::{res_step, ResLog, ResampleEngine, StageRecord};
use crate::rng::substream;
use crate::sampler::ConditioningSpec;
use crate::stats::ks_two_sample;
use crate::wulff::derive_radial_constants;

/// Offset separating resampling streams from sampling streams.
const RES_STREAM: u64 = 1 << 40;

/// Summary statistics compared before and after a stage: area, MLR and MFL
/// of the sw-anchored circuit (zero when it is gone) and the SW-corner
/// abscissa of the outermost circuit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitStats {
    pub area: f64,
    pub mlr: f64,
    pub mfl: f64,
    pub sw_x: Option<i32>,
}

impl CircuitStats {
    pub fn of(config: &EdgeConfig, c_sw: Vertex) -> Result<Self> {
        let (area, mlr, mfl) = match extract_sw_circuit(config, c_sw)? {
            Some(c) => {
                let s = GeometrySummary::of(&c);
                (interior_area(&c), s.mlr, s.mfl)
            }
            None => (0.0, 0.0, 0.0),
        };
        let sw_x = extract_outermost_circuit(config, Vertex::ORIGIN)?
            .map(|c| crate::geometry::sw_corner(&c).x);
        Ok(CircuitStats {
            area,
            mlr,
            mfl,
            sw_x,
        })
    }

    fn get(&self, stat: &str) -> Option<f64> {
        match stat {
            "area" => Some(self.area),
            "mlr" => Some(self.mlr),
            "mfl" => Some(self.mfl),
            _ => self.sw_x.map(f64::from),
        }
    }
}

const STATS: [&str; 4] = ["area", "mlr", "mfl", "sw_x"];

#[derive(Serialize)]
struct SampleRow {
    seed: u64,
    version: &'static str,
    sample: usize,
    phase: &'static str,
    acted: bool,
    area: f64,
    mlr: f64,
    mfl: f64,
    sw_x: Option<i32>,
}

#[derive(Serialize)]
struct KsRow {
    seed: u64,
    version: &'static str,
    comparison: &'static str,
    stat: &'static str,
    n_pre: usize,
    n_post: usize,
    statistic: f64,
    p_value: f64,
}

struct Outcome {
    pre: CircuitStats,
    post: CircuitStats,
    record: StageRecord,
    control: Option<(CircuitStats, bool)>,
}

fn column(rows: &[&CircuitStats], stat: &str) -> Vec<f64> {
    rows.iter().filter_map(|s| s.get(stat)).collect()
}

/// Stationarity of one forced-heads resampling stage on the sw-conditioned law: KS
/// comparisons of pre/post summaries, ψ event and splice audits, and a
/// deliberately broken ψ that must be detected.
pub fn run_invariance(cfg: &ExperimentConfig) -> Result<Report> {
    let out = prepare_output(cfg)?;
    let pool = pool(cfg)?;
    let inv = &cfg.invariance;
    let params = cfg.params;
    let n = cfg.resample.n;
    let window = cfg.sampling.window_for(n)?;
    let mut report = Report::new(ExperimentKind::Invariance, cfg);
    report.notes.extend(critical_note(&params));
    let mut sample_rows = Vec::new();
    let mut ks_rows = Vec::new();
    let mut log = ResLog::default();
    for &seed in &cfg.seeds {
        let wulff = resolve_wulff(cfg, &params, seed)?;
        let rp = cfg.resample.resolve(n, derive_radial_constants(&wulff))?;
        if inv.j == 0 || inv.j > rp.m_n_prime() {
            return invalid(format!(
                "invariance.j = {} outside 1..={}",
                inv.j,
                rp.m_n_prime()
            ));
        }
        let c_sw = c_sw_for(cfg, &wulff, n);
        let spec = ConditioningSpec::sw_centred((n * n) as f64, c_sw);
        let mut engine = ResampleEngine::new(rp, params, c_sw);
        engine.psi.budget = cfg.resample.budget;
        engine.delta = cfg.resample.delta;
        engine.rule = inv.rule;
        let mut broken = engine.clone();
        broken.psi.enforce_area = false;
        broken.psi.enforce_events = inv.control == ControlKind::DropArea;
        report.notes.push(format!(
            "seed {seed}: c_sw = {c_sw}, L = {}, m_n' = {}",
            window.half_width(),
            rp.m_n_prime()
        ));

        let samples = draw_samples(
            &pool,
            window,
            &params,
            &spec,
            Some(&wulff),
            &cfg.sampling,
            seed,
            inv.samples,
        )?;
        let missing = samples.iter().filter(|s| s.is_none()).count();
        if missing > 0 {
            report.incomplete = true;
            report.notes.push(format!(
                "seed {seed}: {missing} samples exhausted the rejection budget"
            ));
        }
        let outcomes: Vec<Result<Option<Outcome>>> = fan_out(&pool, samples.len(), |i| {
            let Some(config) = &samples[i] else {
                return Ok(None);
            };
            let pre = CircuitStats::of(config, c_sw)?;
            let mut rng = substream(seed, RES_STREAM + i as u64);
            let mut control_rng = rng.clone();
            let coin = !inv.identity;
            let (after, record) = res_step(config, inv.j, &engine, &mut rng, coin)?;
            let post = CircuitStats::of(&after, c_sw)?;
            let control = if inv.negative_control {
                let (c_after, c_rec) = res_step(config, inv.j, &broken, &mut control_rng, coin)?;
                Some((CircuitStats::of(&c_after, c_sw)?, c_rec.acted))
            } else {
                None
            };
            Ok(Some(Outcome {
                pre,
                post,
                record,
                control,
            }))
        });
        let mut done = Vec::new();
        for o in outcomes {
            if let Some(o) = o? {
                done.push(o);
            }
        }
        for (i, o) in done.iter().enumerate() {
            let mut push = |phase, acted, s: &CircuitStats| {
                sample_rows.push(SampleRow {
                    seed,
                    version: crate::ARTIFACT_VERSION,
                    sample: i,
                    phase,
                    acted,
                    area: s.area,
                    mlr: s.mlr,
                    mfl: s.mfl,
                    sw_x: s.sw_x,
                })
            };
            push("pre", false, &o.pre);
            push("post", o.record.acted, &o.post);
            if let Some((c, acted)) = &o.control {
                push("control", *acted, c);
            }
        }

        let pre: Vec<&CircuitStats> = done.iter().map(|o| &o.pre).collect();
        let post: Vec<&CircuitStats> = done.iter().map(|o| &o.post).collect();
        for stat in STATS {
            let (a, b) = (column(&pre, stat), column(&post, stat));
            if a.is_empty() || b.is_empty() {
                report.incomplete = true;
                report
                    .notes
                    .push(format!("seed {seed}: no values for {stat}"));
                continue;
            }
            let ks = ks_two_sample(&a, &b)?;
            ks_rows.push(KsRow {
                seed,
                version: crate::ARTIFACT_VERSION,
                comparison: "post",
                stat,
                n_pre: a.len(),
                n_post: b.len(),
                statistic: ks.statistic,
                p_value: ks.p_value,
            });
            report.checks.push(Check::new(
                format!("seed {seed} ks {stat}"),
                ks.p_value,
                inv.alpha,
                ks.p_value > inv.alpha,
            ));
        }
        if inv.negative_control {
            let ctrl: Vec<&CircuitStats> = done
                .iter()
                .filter_map(|o| o.control.as_ref().map(|c| &c.0))
                .collect();
            let (a, b) = (column(&pre, "area"), column(&ctrl, "area"));
            let ks = ks_two_sample(&a, &b)?;
            ks_rows.push(KsRow {
                seed,
                version: crate::ARTIFACT_VERSION,
                comparison: "control",
                stat: "area",
                n_pre: a.len(),
                n_post: b.len(),
                statistic: ks.statistic,
                p_value: ks.p_value,
            });
            report.checks.push(Check::new(
                format!("seed {seed} control detected"),
                ks.p_value,
                inv.alpha,
                ks.p_value < inv.alpha,
            ));
        }

        let acted: Vec<&StageRecord> = done.iter().map(|o| &o.record).filter(|r| r.acted).collect();
        let frac = acted.len() as f64 / done.len().max(1) as f64;
        report
            .checks
            .push(Check::new(format!("seed {seed} acted fraction"), frac, 0.0, true).exploratory());
        let events_ok = acted.iter().filter(|r| r.events_ok == Some(true)).count();
        let splice_ok = acted.iter().filter(|r| r.splice_ok != Some(false)).count();
        let exterior_ok = acted.iter().filter(|r| r.exterior_ok == Some(true)).count();
        let all = acted.len() as f64;
        let share = |k: usize| {
            if acted.is_empty() {
                1.0
            } else {
                k as f64 / all
            }
        };
        report.checks.push(Check::new(
            format!("seed {seed} psi events"),
            share(events_ok),
            1.0,
            events_ok == acted.len(),
        ));
        report.checks.push(Check::new(
            format!("seed {seed} splice identity"),
            share(splice_ok),
            1.0,
            splice_ok == acted.len(),
        ));
        report.checks.push(Check::new(
            format!("seed {seed} exterior untouched"),
            share(exterior_ok),
            1.0,
            exterior_ok == acted.len(),
        ));
        log.records.extend(done.into_iter().map(|o| o.record));
    }
    write_csv(&out, "invariance_samples.csv", &sample_rows, &mut report)?;
    write_csv(&out, "invariance_ks.csv", &ks_rows, &mut report)?;
    let mut buf = Vec::new();
    log.write_jsonl(&mut buf)?;
    std::fs::write(out.join("invariance_reslog.jsonl"), buf)?;
    report.files.push("invariance_reslog.jsonl".into());
    report.finish(&out)
}
