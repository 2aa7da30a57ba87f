//! Seeded fixtures shared by the benchmarks.

use rcm_core::dynamics::{Equilibration, EquilibriumSampler};
use rcm_core::resample::{ResampleEngine, ResampleParams};
use rcm_core::rng::{seeded, SimRng};
use rcm_core::sampler::{sample_rejection, ConditioningSpec};
use rcm_core::{Boundary, EdgeConfig, RcmParams, Vertex, Window};

pub fn params(p: f64, q: f64) -> RcmParams {
    RcmParams::new(p, q, Boundary::Free).expect("valid parameters")
}

pub fn rng(seed: u64) -> SimRng {
    seeded(seed)
}

/// An independent bond configuration at density `p`.
pub fn bernoulli_config(half_width: i32, p: f64, seed: u64) -> EdgeConfig {
    let w = Window::new(half_width).expect("valid window");
    let mut sampler = EquilibriumSampler::new(w, params(p, 1.0), Equilibration::default());
    sampler.next(&mut rng(seed)).clone()
}

/// A configuration holding a southwest circuit of area at least `n²`, with an
/// engine for the resampling chain at scale `n`.
pub fn droplet(n: u32, seed: u64) -> (EdgeConfig, ResampleEngine) {
    let w = Window::new((3.6 * n as f64).ceil() as i32).expect("valid window");
    let c_sw = Vertex::new(-(n as i32) / 2 - 1, -(n as i32) / 2 - 1);
    let pr = params(0.5, 1.0);
    let spec = ConditioningSpec::sw_centred((n * n) as f64, c_sw);
    let s = sample_rejection(w, &pr, &spec, None, &mut rng(seed), 10_000_000).expect("sample");
    let rp = ResampleParams::with_defaults(n, 0.3, 2.5).expect("resample constants");
    (s.config, ResampleEngine::new(rp, pr, c_sw))
}
