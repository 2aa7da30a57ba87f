mod common;

use proptest::prelude::*;
use rcm_core::dynamics::{Equilibration, EquilibriumSampler};
use rcm_core::geometry::{interior_area, sw_corner, GeometrySummary};
use rcm_core::lattice::{Vertex, Window};
use rcm_core::sampler::{
    estimate_c_sw, read_archive, sample_constrained_mcmc, sample_rejection, seed_circuit, sw_mode,
    write_archive, wulff_c_sw, ConditioningMode, ConditioningSpec, ConstrainedChain,
};
use rcm_core::stats::ks_two_sample;
use rcm_core::wulff::{build_wulff, XiSamples};
use rcm_core::{Boundary, Error, RcmParams};

fn params(p: f64, q: f64) -> RcmParams {
    RcmParams::new(p, q, Boundary::Free).unwrap()
}

fn v(x: i32, y: i32) -> Vertex {
    Vertex::new(x, y)
}

#[test]
fn spec_validation() {
    let w = Window::new(6).unwrap();
    assert!(ConditioningSpec::area_only(-1.0).validate(w).is_err());
    assert!(ConditioningSpec::area_only(f64::NAN).validate(w).is_err());
    assert!(ConditioningSpec::area_only(f64::INFINITY)
        .validate(w)
        .is_err());
    assert!(ConditioningSpec::area_only(0.0).validate(w).is_ok());
    assert!(ConditioningSpec::sw_centred(4.0, v(-5, 0))
        .validate(w)
        .is_err());
    assert!(ConditioningSpec::sw_centred(4.0, v(-4, 0))
        .validate(w)
        .is_ok());
    let no_corner = ConditioningSpec {
        c_sw: None,
        ..ConditioningSpec::sw_centred(4.0, v(0, 0))
    };
    assert!(no_corner.validate(w).is_err());
    assert!(ConditioningSpec::origin_centred(4.0, 0.0)
        .validate(w)
        .is_err());
    let spec: ConditioningSpec =
        serde_json::from_str(r#"{"mode": "area_only", "area_min": 9}"#).unwrap();
    assert_eq!(spec, ConditioningSpec::area_only(9.0));
}

#[test]
fn seed_square_fits_or_fails() {
    let w = Window::new(6).unwrap();
    let c = seed_circuit(w, &ConditioningSpec::area_only(10.0)).unwrap();
    assert!(interior_area(&c) >= 10.0);
    assert!(c.encloses(Vertex::ORIGIN));
    let s = seed_circuit(w, &ConditioningSpec::sw_centred(9.0, v(-3, -2))).unwrap();
    assert_eq!(sw_corner(&s), v(-3, -2));
    assert!(seed_circuit(w, &ConditioningSpec::area_only(200.0)).is_err());
}

#[test]
fn rejection_samples_meet_the_event() {
    let w = Window::new(6).unwrap();
    let mut rng = common::rng(1);
    for (q, spec) in [
        (1.0, ConditioningSpec::area_only(9.0)),
        (1.0, ConditioningSpec::sw_centred(6.0, v(-2, -1))),
        (2.0, ConditioningSpec::area_only(4.0)),
        (1.0, ConditioningSpec::area_only(0.0)),
    ] {
        for _ in 0..20 {
            let s =
                sample_rejection(w, &params(0.45, q), &spec, None, &mut rng, 1_000_000).unwrap();
            assert!(interior_area(&s.circuit) >= spec.area_min);
            assert_eq!(
                spec.witness(&s.config, None).unwrap(),
                Some(s.circuit.clone())
            );
            if spec.mode == ConditioningMode::SwCentred {
                assert_eq!(sw_corner(&s.circuit), spec.c_sw.unwrap());
            }
            assert!(s.attempts >= 1);
        }
    }
}

#[test]
fn rejection_gives_up() {
    let w = Window::new(6).unwrap();
    let err = sample_rejection(
        w,
        &params(0.1, 1.0),
        &ConditioningSpec::area_only(100.0),
        None,
        &mut common::rng(0),
        50,
    )
    .unwrap_err();
    assert!(matches!(err, Error::RejectionExhausted { attempts: 50 }));
    let err = sample_rejection(
        w,
        &params(0.1, 1.0),
        &ConditioningSpec::sw_centred(100.0, v(-4, -4)),
        None,
        &mut common::rng(0),
        50,
    )
    .unwrap_err();
    assert!(matches!(err, Error::RejectionExhausted { attempts: 50 }));
}

#[test]
fn lazy_sw_rejection_matches_plain_rejection() {
    // the early-exit product sampler must draw from the same conditional law
    let w = Window::new(6).unwrap();
    let pr = params(0.5, 1.0);
    let spec = ConditioningSpec::sw_centred(4.0, v(-2, -2));
    let mut rng = common::rng(21);
    let fast: Vec<f64> = (0..1500)
        .map(|_| {
            interior_area(
                &sample_rejection(w, &pr, &spec, None, &mut rng, 1_000_000)
                    .unwrap()
                    .circuit,
            )
        })
        .collect();
    let mut plain = Vec::new();
    let mut sampler = EquilibriumSampler::new(w, pr, Equilibration::default());
    while plain.len() < 1500 {
        if let Some(c) = spec.witness(sampler.next(&mut rng), None).unwrap() {
            plain.push(interior_area(&c));
        }
    }
    let ks = ks_two_sample(&fast, &plain).unwrap();
    assert!(ks.p_value > 0.001, "KS p = {}", ks.p_value);
}

#[test]
fn chain_matches_rejection_on_a_small_window() {
    let w = Window::new(4).unwrap();
    let pr = params(0.5, 1.0);
    let spec = ConditioningSpec::area_only(4.0);
    let mut rng = common::rng(8);
    let exact: Vec<f64> = (0..800)
        .map(|_| {
            interior_area(
                &sample_rejection(w, &pr, &spec, None, &mut rng, 1_000_000)
                    .unwrap()
                    .circuit,
            )
        })
        .collect();
    let mut chain = ConstrainedChain::new(w, pr, spec, None).unwrap();
    chain.run(100, &mut rng).unwrap();
    let mut mcmc = Vec::new();
    for _ in 0..800 {
        chain.run(5, &mut rng).unwrap();
        mcmc.push(interior_area(chain.witness()));
    }
    let ks = ks_two_sample(&exact, &mcmc).unwrap();
    assert!(ks.p_value > 0.001, "KS p = {}", ks.p_value);
}

#[test]
fn chain_keeps_the_event_at_q2() {
    let w = Window::new(8).unwrap();
    let spec = ConditioningSpec::sw_centred(16.0, v(-3, -3));
    let mut chain = ConstrainedChain::new(w, params(0.55, 2.0), spec, None).unwrap();
    let mut rng = common::rng(4);
    for _ in 0..10 {
        chain.run(3, &mut rng).unwrap();
        let c = spec
            .witness(chain.config(), None)
            .unwrap()
            .expect("event holds");
        assert_eq!(&c, chain.witness());
        assert!(interior_area(&c) >= 16.0);
        assert_eq!(sw_corner(&c), v(-3, -3));
    }
}

#[test]
fn samplers_are_deterministic() {
    let w = Window::new(6).unwrap();
    let spec = ConditioningSpec::area_only(9.0);
    let a = sample_rejection(
        w,
        &params(0.45, 1.0),
        &spec,
        None,
        &mut common::rng(5),
        100_000,
    )
    .unwrap();
    let b = sample_rejection(
        w,
        &params(0.45, 1.0),
        &spec,
        None,
        &mut common::rng(5),
        100_000,
    )
    .unwrap();
    assert_eq!(a.config, b.config);
    let a = sample_constrained_mcmc(w, &params(0.45, 2.0), &spec, None, 20, &mut common::rng(5))
        .unwrap();
    let b = sample_constrained_mcmc(w, &params(0.45, 2.0), &spec, None, 20, &mut common::rng(5))
        .unwrap();
    assert_eq!(a, b);
}

#[test]
fn centred_mode_needs_a_profile() {
    let w = Window::new(8).unwrap();
    let spec = ConditioningSpec::origin_centred(9.0, 3.0);
    let (eff, fell_back) = spec.effective(None);
    assert!(fell_back);
    assert_eq!(eff.mode, ConditioningMode::AreaOnly);
    let profile = build_wulff(&XiSamples::constant(32, 1.0)).unwrap();
    assert!(!spec.effective(Some(&profile)).1);
    let circuit = seed_circuit(w, &ConditioningSpec::area_only(9.0)).unwrap();
    assert!(spec.admits(&circuit, None).is_err());
    let s = sample_rejection(
        w,
        &params(0.5, 1.0),
        &spec,
        Some(&profile),
        &mut common::rng(2),
        1_000_000,
    )
    .unwrap();
    let d = rcm_core::wulff::global_distortion(&s.circuit, &profile, 3.0).unwrap();
    assert_eq!(d.centre, Vertex::ORIGIN);
}

#[test]
fn sw_mode_breaks_ties_lexicographically() {
    assert_eq!(
        sw_mode(&[v(1, 0), v(0, 5), v(1, 0), v(0, 5)]).unwrap(),
        v(0, 5)
    );
    assert_eq!(sw_mode(&[v(2, 2), v(-1, 0), v(2, 2)]).unwrap(), v(2, 2));
    assert!(sw_mode(&[]).is_err());
}

#[test]
fn c_sw_estimates() {
    let profile = build_wulff(&XiSamples::constant(32, 1.0)).unwrap();
    let r = profile.radius_at(std::f64::consts::PI);
    assert_eq!(wulff_c_sw(&profile, 10.0), v((-10.0 * r).floor() as i32, 0));
    let w = Window::new(8).unwrap();
    let c = estimate_c_sw(
        w,
        &params(0.5, 1.0),
        2.0,
        15,
        None,
        &mut common::rng(3),
        1_000_000,
    )
    .unwrap();
    assert!(c.x < 0 && c.y < 0 && c.x > -8 && c.y > -8);
    assert!(estimate_c_sw(w, &params(0.5, 1.0), 2.0, 0, None, &mut common::rng(3), 10).is_err());
}

#[test]
fn archive_round_trip() {
    let dir = std::env::temp_dir().join(format!("rcm-archive-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    let w = Window::new(5).unwrap();
    let spec = ConditioningSpec::area_only(4.0);
    let pr = params(0.45, 1.0);
    let mut rng = common::rng(6);
    let samples: Vec<_> = (0..4)
        .map(|_| sample_rejection(w, &pr, &spec, None, &mut rng, 100_000).unwrap())
        .collect();
    let configs: Vec<_> = samples.iter().map(|s| s.config.clone()).collect();
    let summary: Vec<_> = samples
        .iter()
        .map(|s| GeometrySummary::of(&s.circuit))
        .collect();
    let written = write_archive(&dir, &configs, pr, spec, 6, 0, summary).unwrap();
    let (manifest, back) = read_archive(&dir).unwrap();
    assert_eq!(manifest, written);
    assert_eq!(back, configs);
    std::fs::remove_dir_all(&dir).unwrap();
    assert!(read_archive(&dir).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chain_witness_is_always_current(seed in any::<u64>(), p in 0.3f64..0.7, q in 1.0f64..3.0, area in 0.0f64..20.0, sw in any::<bool>()) {
        let w = Window::new(7).unwrap();
        let spec = if sw { ConditioningSpec::sw_centred(area, v(-3, -2)) } else { ConditioningSpec::area_only(area) };
        let mut chain = ConstrainedChain::new(w, params(p, q), spec, None).unwrap();
        let mut rng = common::rng(seed);
        for _ in 0..4 {
            chain.run(2, &mut rng).unwrap();
            let c = spec.witness(chain.config(), None).unwrap();
            prop_assert_eq!(c.as_ref(), Some(chain.witness()));
        }
    }
}
