use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use super::{critical_note, prepare_output, resolve_wulff, write_csv, Check, Report};
use crate::dynamics::check_hypotheses;
use crate::error::Result;
use crate::lattice::{Vertex, Window};
use crate::rng::substream;
use crate::wulff::{global_distortion, octant_angle, symmetry_residuals, wulff_circuit};

/// Scale and centre of the planted Wulff circuit.
const PLANT_N: f64 = 8.0;
const PLANT_CENTRE: Vertex = Vertex::new(3, -2);
/// Off-axis direction for the symmetry check.
const SYMMETRY_OCTANT: usize = 4;

#[derive(Serialize)]
struct ResidualRow {
    seed: u64,
    version: &'static str,
    angle: f64,
    image: usize,
    z: f64,
}

/// Measures (or loads) the Wulff profile, checks its area and lattice
/// symmetry, and recovers a planted centre by global distortion.
pub fn run_wulff(cfg: &ExperimentConfig) -> Result<Report> {
    let out = prepare_output(cfg)?;
    let params = cfg.params;
    let mut report = Report::new(ExperimentKind::Wulff, cfg);
    report.notes.extend(critical_note(&params));
    let mut residual_rows = Vec::new();
    for (idx, &seed) in cfg.seeds.iter().enumerate() {
        let w = resolve_wulff(cfg, &params, seed)?;
        let name = if idx == 0 {
            "wulff_profile.json".to_string()
        } else {
            format!("wulff_profile_{seed}.json")
        };
        std::fs::write(out.join(&name), w.to_json()?)?;
        report.files.push(name);
        let err = (w.area() - 1.0).abs();
        report.checks.push(Check::new(
            format!("seed {seed} unit area"),
            err,
            1e-6,
            err <= 1e-6,
        ));

        let angle = octant_angle(SYMMETRY_OCTANT);
        let z = symmetry_residuals(&params, &cfg.wulff.xi_settings(), angle, seed)?;
        let worst = z.iter().cloned().fold(0.0, f64::max);
        for (i, &v) in z.iter().enumerate() {
            residual_rows.push(ResidualRow {
                seed,
                version: crate::ARTIFACT_VERSION,
                angle,
                image: i + 1,
                z: v,
            });
        }
        let sigma = cfg.wulff.residual_sigma;
        report.checks.push(Check::new(
            format!("seed {seed} symmetry residual"),
            worst,
            sigma,
            worst <= sigma,
        ));

        let planted = wulff_circuit(&w, PLANT_N, PLANT_CENTRE)?;
        let d = global_distortion(&planted, &w, PLANT_N)?;
        report.checks.push(Check::new(
            format!("seed {seed} planted gd"),
            d.gd,
            1.0,
            d.gd <= 1.0,
        ));
        let hit = d.centre == PLANT_CENTRE;
        report.checks.push(Check::new(
            format!("seed {seed} planted centre"),
            hit as u8 as f64,
            1.0,
            hit,
        ));
    }
    write_csv(&out, "wulff_symmetry.csv", &residual_rows, &mut report)?;
    report.finish(&out)
}

#[derive(Serialize)]
struct HypothesisRow {
    seed: u64,
    version: &'static str,
    slope: f64,
    slope_stderr: f64,
    t_stat: f64,
    energy_min: f64,
    energy_max: f64,
    fkg_cov: f64,
    fkg_sigma: f64,
}

/// Connectivity decay, bounded energy and FKG diagnostics at `cfg.params`.
pub fn run_hypotheses(cfg: &ExperimentConfig) -> Result<Report> {
    let out = prepare_output(cfg)?;
    let params = cfg.params;
    let settings = &cfg.hypotheses;
    let window = Window::new(settings.k_max as i32 + 2)?;
    let mut report = Report::new(ExperimentKind::Hypotheses, cfg);
    report.notes.extend(critical_note(&params));
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let mut rng = substream(seed, 0);
        let d = check_hypotheses(&params, window, settings, &mut rng)?;
        let t = d.slope / d.slope_stderr;
        report.checks.push(Check::new(
            format!("seed {seed} decay slope"),
            t,
            -3.0,
            d.slope_negative && t < -3.0,
        ));
        report.checks.push(Check::new(
            format!("seed {seed} bounded energy"),
            d.energy_max,
            params.p(),
            d.energy_within_bounds,
        ));
        report.checks.push(Check::new(
            format!("seed {seed} fkg covariance"),
            d.fkg_cov,
            -3.0 * d.fkg_sigma,
            d.fkg_nonnegative,
        ));
        rows.push(HypothesisRow {
            seed,
            version: crate::ARTIFACT_VERSION,
            slope: d.slope,
            slope_stderr: d.slope_stderr,
            t_stat: t,
            energy_min: d.energy_min,
            energy_max: d.energy_max,
            fkg_cov: d.fkg_cov,
            fkg_sigma: d.fkg_sigma,
        });
    }
    write_csv(&out, "hypotheses.csv", &rows, &mut report)?;
    report.finish(&out)
}
