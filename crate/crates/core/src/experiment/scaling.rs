use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind, SamplerKind};
use super::{
    critical_note, draw_samples, fan_out, pool, prepare_output, resolve_wulff, write_csv, Check,
    Report,
};
use crate::cones::{regeneration_sites, Shape};
use crate::dynamics::RcmParams;
use crate::error::{Error, Result};
use crate::geometry::{extract_outermost_circuit, GeometrySummary};
use crate::lattice::Vertex;
use crate::resample::ResampleParams;
use crate::sampler::ConditioningSpec;
use crate::stats::{linear_fit, quartiles, LinearFit};
use crate::wulff::{derive_radial_constants, global_distortion, wulff_circuit, WulffProfile};

/// Per-sample geometry of the outermost circuit under area at least `n²`.
#[derive(Clone, Debug, Serialize)]
struct SampleRow {
    seed: u64,
    version: &'static str,
    n: u32,
    sample: usize,
    area: f64,
    mlr: f64,
    mfl: f64,
    gd: f64,
    theta_max: f64,
}

#[derive(Serialize)]
struct SummaryRow {
    seed: u64,
    version: &'static str,
    n: u32,
    stat: &'static str,
    median: f64,
    q25: f64,
    q75: f64,
    count: usize,
}

#[derive(Serialize)]
struct FitRow {
    seed: u64,
    version: &'static str,
    stat: &'static str,
    exponent: f64,
    stderr: f64,
    ci_lo: f64,
    ci_hi: f64,
}

const FIT_LEVEL: f64 = 0.95;

/// Draws `count` samples of the outermost circuit conditioned on enclosing area `n²` and
/// measures them. Always uses the constrained chain: exact rejection is
/// hopeless beyond `n ≈ 10`.
#[allow(clippy::too_many_arguments)]
fn measure(
    cfg: &ExperimentConfig,
    pool: &rayon::ThreadPool,
    params: &RcmParams,
    wulff: &WulffProfile,
    cone: (f64, f64),
    n: u32,
    count: usize,
    seed: u64,
) -> Result<Vec<SampleRow>> {
    let window = cfg.sampling.window_for(n)?;
    let spec = ConditioningSpec::area_only((n * n) as f64);
    let mut sampling = cfg.sampling.clone();
    sampling.method = SamplerKind::Mcmc;
    let stream = seed.wrapping_mul(1_000_003).wrapping_add(n as u64);
    let configs = draw_samples(
        pool,
        window,
        params,
        &spec,
        Some(wulff),
        &sampling,
        stream,
        count,
    )?;
    fan_out(pool, configs.len(), |i| {
        let config = configs[i].as_ref().expect("chains always yield");
        let c = extract_outermost_circuit(config, Vertex::ORIGIN)?
            .ok_or_else(|| Error::InvalidInput("conditioned sample lost its circuit".into()))?;
        let s = GeometrySummary::of(&c);
        let gd = global_distortion(&c, wulff, n as f64)?.gd;
        let theta_max =
            regeneration_sites(Shape::Circuit(&c), cone.0, cone.1, [0.0, 0.0])?.theta_max;
        Ok(SampleRow {
            seed,
            version: crate::ARTIFACT_VERSION,
            n,
            sample: i,
            area: s.area,
            mlr: s.mlr,
            mfl: s.mfl,
            gd,
            theta_max,
        })
    })
    .into_iter()
    .collect()
}

/// Cone parameters for regeneration sites: the configured values, else the
/// cluster criterion of the resampling parameters.
fn cone_params(cfg: &ExperimentConfig, wulff: &WulffProfile, n: u32) -> Result<(f64, f64)> {
    let rp: ResampleParams = cfg.resample.resolve(n, derive_radial_constants(wulff))?;
    Ok((
        cfg.regeneration.q.unwrap_or(rp.cluster_q()),
        cfg.regeneration.c.unwrap_or(rp.cluster_c()),
    ))
}

fn fit_exponent(ns: &[u32], medians: &[f64]) -> Result<LinearFit> {
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = medians.iter().map(|m| m.max(1e-12).ln()).collect();
    linear_fit(&x, &y)
}

/// Medians and quartiles of MLR, MFL, GD and the largest regeneration gap over an `n` grid, with
/// log-log exponent fits. All checks are exploratory.
pub fn run_scaling(cfg: &ExperimentConfig) -> Result<Report> {
    let out = prepare_output(cfg)?;
    let pool = pool(cfg)?;
    let sc = &cfg.scaling;
    let params = cfg.params;
    let mut report = Report::new(ExperimentKind::Scaling, cfg);
    report.notes.extend(critical_note(&params));
    report
        .notes
        .push("samples come from the constrained chain".into());
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut fits = Vec::new();
    for &seed in &cfg.seeds {
        let wulff = resolve_wulff(cfg, &params, seed)?;
        let mut medians: Vec<[f64; 4]> = Vec::new();
        for &n in &sc.n_grid {
            let cone = cone_params(cfg, &wulff, n)?;
            let sample = measure(cfg, &pool, &params, &wulff, cone, n, sc.samples, seed)?;
            let mut med = [0.0; 4];
            for (k, stat) in ["mlr", "mfl", "gd", "theta_max"].into_iter().enumerate() {
                let v: Vec<f64> = sample
                    .iter()
                    .map(|r| match k {
                        0 => r.mlr,
                        1 => r.mfl,
                        2 => r.gd,
                        _ => r.theta_max,
                    })
                    .collect();
                let q = quartiles(&v);
                med[k] = q.median;
                summary.push(SummaryRow {
                    seed,
                    version: crate::ARTIFACT_VERSION,
                    n,
                    stat,
                    median: q.median,
                    q25: q.q25,
                    q75: q.q75,
                    count: v.len(),
                });
            }
            medians.push(med);
            rows.extend(sample);
        }
        let ratios: Vec<f64> = sc
            .n_grid
            .iter()
            .zip(&medians)
            .map(|(&n, m)| {
                let nf = n as f64;
                m[0] / (nf.cbrt() * nf.ln().powf(2.0 / 3.0))
            })
            .collect();
        let spread = ratios.iter().cloned().fold(f64::MIN, f64::max)
            / ratios.iter().cloned().fold(f64::MAX, f64::min);
        report.checks.push(
            Check::new(
                format!("seed {seed} mlr ratio spread"),
                spread,
                sc.ratio_factor,
                spread < sc.ratio_factor,
            )
            .exploratory(),
        );
        for (k, stat, band) in [
            (0, "mlr", Some(sc.mlr_band)),
            (1, "mfl", Some(sc.mfl_band)),
            (2, "gd", None),
            (3, "theta_max", None),
        ] {
            let col: Vec<f64> = medians.iter().map(|m| m[k]).collect();
            let fit = fit_exponent(&sc.n_grid, &col)?;
            let (lo, hi) = fit.slope_ci(FIT_LEVEL);
            fits.push(FitRow {
                seed,
                version: crate::ARTIFACT_VERSION,
                stat,
                exponent: fit.slope,
                stderr: fit.slope_stderr,
                ci_lo: lo,
                ci_hi: hi,
            });
            if let Some([a, b]) = band {
                let pass = fit.slope >= a && fit.slope <= b;
                report.checks.push(
                    Check::new(format!("seed {seed} {stat} exponent"), fit.slope, b, pass)
                        .exploratory(),
                );
            }
        }
    }
    write_csv(&out, "scaling_samples.csv", &rows, &mut report)?;
    write_csv(&out, "scaling_summary.csv", &summary, &mut report)?;
    write_csv(&out, "scaling_fits.csv", &fits, &mut report)?;
    report.finish(&out)
}

#[derive(Serialize)]
struct TailRow {
    seed: u64,
    version: &'static str,
    n: u32,
    u: f64,
    survival: f64,
}

/// Empirical survival function at each distinct value, ascending.
fn survival(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let total = v.len() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let u = v[i];
        out.push((u, (v.len() - i) as f64 / total));
        while i < v.len() && v[i] == u {
            i += 1;
        }
    }
    out
}

/// Tail of `n` times the largest regeneration gap over conditioned samples, its log-linear fit, growth
/// of the median in `ln n`, and a convex fixture sanity value.
pub fn run_regeneration(cfg: &ExperimentConfig) -> Result<Report> {
    let out = prepare_output(cfg)?;
    let pool = pool(cfg)?;
    let rg = &cfg.regeneration;
    let params = cfg.params;
    let mut report = Report::new(ExperimentKind::Regeneration, cfg);
    report.notes.extend(critical_note(&params));
    report
        .notes
        .push("samples come from the constrained chain".into());
    let mut rows = Vec::new();
    let mut tails = Vec::new();
    for &seed in &cfg.seeds {
        let wulff = resolve_wulff(cfg, &params, seed)?;
        let mut medians = Vec::new();
        let mut last_theta = Vec::new();
        let mut monotone = true;
        let (mut tx, mut ty) = (Vec::new(), Vec::new());
        for &n in &rg.n_grid {
            let cone = cone_params(cfg, &wulff, n)?;
            let sample = measure(cfg, &pool, &params, &wulff, cone, n, rg.samples, seed)?;
            let u: Vec<f64> = sample.iter().map(|r| n as f64 * r.theta_max).collect();
            last_theta = sample.iter().map(|r| r.theta_max).collect();
            medians.push(quartiles(&u).median);
            let tail = survival(&u);
            monotone &= tail.windows(2).all(|w| w[1].1 <= w[0].1);
            for &(u, s) in &tail {
                tx.push(u);
                ty.push(s.ln());
                tails.push(TailRow {
                    seed,
                    version: crate::ARTIFACT_VERSION,
                    n,
                    u,
                    survival: s,
                });
            }
            rows.extend(sample);
        }
        report.checks.push(Check::new(
            format!("seed {seed} tail monotone"),
            monotone as u8 as f64,
            1.0,
            monotone,
        ));
        if tx.len() >= 3 {
            let fit = linear_fit(&tx, &ty)?;
            report.checks.push(
                Check::new(
                    format!("seed {seed} tail log-slope"),
                    fit.slope,
                    0.0,
                    fit.slope < 0.0,
                )
                .exploratory(),
            );
        }
        if rg.n_grid.len() >= 2 {
            let ln_n: Vec<f64> = rg.n_grid.iter().map(|&n| (n as f64).ln()).collect();
            let fit = linear_fit(&ln_n, &medians)?;
            report.notes.push(format!(
                "seed {seed}: median n*theta_max vs ln n slope {:.4} +- {:.4}",
                fit.slope, fit.slope_stderr
            ));
            // Linear growth in n would mean the gap does not shrink at all.
            let growth = fit_exponent(&rg.n_grid, &medians)?.slope;
            report.checks.push(
                Check::new(
                    format!("seed {seed} median growth exponent"),
                    growth,
                    1.0,
                    growth < 1.0,
                )
                .exploratory(),
            );
        }
        // A convex droplet should leave smaller gaps than typical samples at
        // the largest n.
        let n_fix = *rg.n_grid.last().expect("validated nonempty");
        let cone = cone_params(cfg, &wulff, n_fix)?;
        let fixture = wulff_circuit(&wulff, n_fix as f64, Vertex::ORIGIN)?;
        let theta =
            regeneration_sites(Shape::Circuit(&fixture), cone.0, cone.1, [0.0, 0.0])?.theta_max;
        let typical = quartiles(&last_theta).median;
        report.checks.push(Check::new(
            format!("seed {seed} convex fixture theta_max"),
            theta,
            typical,
            theta <= typical,
        ));
    }
    write_csv(&out, "regeneration_samples.csv", &rows, &mut report)?;
    write_csv(&out, "regeneration_tail.csv", &tails, &mut report)?;
    report.finish(&out)
}
