use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{DiagnosticSettings, Equilibration, RcmParams};
use crate::error::{Error, Result};
use crate::lattice::{Vertex, Window};
use crate::resample::{ResampleParams, SelectionRule, DEFAULT_CHI, DEFAULT_EPS, DEFAULT_EPS0};
use crate::wulff::{FitRange, XiSettings};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Invariance,
    Scaling,
    Regeneration,
    Wulff,
    Hypotheses,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Invariance => "invariance",
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::Regeneration => "regeneration",
            ExperimentKind::Wulff => "wulff",
            ExperimentKind::Hypotheses => "hypotheses",
        }
    }
}

/// Resampling constants; `c1`/`C1` default to the values read off the Wulff profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResampleSettings {
    pub n: u32,
    pub chi: f64,
    pub eps: f64,
    pub eps0: f64,
    pub q0: Option<f64>,
    pub c1: Option<f64>,
    #[serde(rename = "C1")]
    pub c1_big: Option<f64>,
    pub budget: usize,
    pub delta: f64,
}

impl Default for ResampleSettings {
    fn default() -> Self {
        ResampleSettings {
            n: 10,
            chi: DEFAULT_CHI,
            eps: DEFAULT_EPS,
            eps0: DEFAULT_EPS0,
            q0: None,
            c1: None,
            c1_big: None,
            budget: 4,
            delta: 0.5,
        }
    }
}

impl ResampleSettings {
    pub fn resolve(&self, n: u32, radial: (f64, f64)) -> Result<ResampleParams> {
        let c1 = self.c1.unwrap_or(radial.0);
        let c1_big = self.c1_big.unwrap_or(radial.1);
        let mut p = ResampleParams::with_defaults(n, c1, c1_big)?;
        p.chi = self.chi;
        p.eps = self.eps;
        p.eps0 = self.eps0;
        p.eps1 = 2.0 * self.eps / 3.0;
        p.u_chi = self.chi.powf(2.0 / 3.0);
        if let Some(q0) = self.q0 {
            p.q0 = q0;
            p.c0 = q0 / 4.0;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Rejection,
    Mcmc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSettings {
    pub method: SamplerKind,
    pub max_attempts: u64,
    /// Burn-in sweeps of each constrained chain.
    pub mcmc_sweeps: usize,
    pub mcmc_spacing: usize,
    pub mcmc_chains: usize,
    /// Window half-width as a multiple of `n`.
    pub window_factor: f64,
    pub window: Option<i32>,
    pub c_sw: Option<[i32; 2]>,
}

impl Default for SamplingSettings {
    fn default() -> Self {
        SamplingSettings {
            method: SamplerKind::Rejection,
            max_attempts: 50_000_000,
            mcmc_sweeps: 400,
            mcmc_spacing: 20,
            mcmc_chains: 8,
            window_factor: 3.6,
            window: None,
            c_sw: None,
        }
    }
}

impl SamplingSettings {
    pub fn window_for(&self, n: u32) -> Result<Window> {
        let l = self
            .window
            .unwrap_or((self.window_factor * n as f64).ceil() as i32);
        Window::new(l)
    }

    pub fn c_sw(&self) -> Option<Vertex> {
        self.c_sw.map(|[x, y]| Vertex::new(x, y))
    }
}

/// What the deliberately broken ψ of the negative control drops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlKind {
    /// Only the area event.
    DropArea,
    /// Every conditioning event, so the sector is resampled freely.
    DropAll,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvarianceSettings {
    pub samples: usize,
    pub j: usize,
    pub alpha: f64,
    /// Force every coin to tails, so the chain is the identity.
    pub identity: bool,
    pub rule: SelectionRule,
    pub negative_control: bool,
    pub control: ControlKind,
}

impl Default for InvarianceSettings {
    fn default() -> Self {
        InvarianceSettings {
            samples: 2000,
            j: 1,
            alpha: 0.01,
            identity: false,
            rule: SelectionRule::Circuit,
            negative_control: true,
            control: ControlKind::DropAll,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSettings {
    pub n_grid: Vec<u32>,
    pub samples: usize,
    pub ratio_factor: f64,
    pub mlr_band: [f64; 2],
    pub mfl_band: [f64; 2],
}

impl Default for ScalingSettings {
    fn default() -> Self {
        ScalingSettings {
            n_grid: vec![12, 16, 24, 32],
            samples: 200,
            ratio_factor: 3.0,
            mlr_band: [0.15, 0.55],
            mfl_band: [0.45, 0.85],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegenerationSettings {
    pub n_grid: Vec<u32>,
    pub samples: usize,
    /// Cone parameters; `None` uses the cluster values of the resampling parameters.
    pub q: Option<f64>,
    pub c: Option<f64>,
}

impl Default for RegenerationSettings {
    fn default() -> Self {
        RegenerationSettings {
            n_grid: vec![10, 12, 16],
            samples: 100,
            q: None,
            c: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WulffSettings {
    pub k_min: u32,
    pub k_max: u32,
    pub trials: u64,
    pub cache_dir: Option<PathBuf>,
    /// Profile file used by the other experiments; the isotropic disc when absent.
    pub profile: Option<PathBuf>,
    pub residual_sigma: f64,
    pub equilibration: Equilibration,
}

impl Default for WulffSettings {
    fn default() -> Self {
        WulffSettings {
            k_min: 2,
            k_max: 8,
            trials: 20_000,
            cache_dir: None,
            profile: None,
            residual_sigma: 3.0,
            equilibration: Equilibration::default(),
        }
    }
}

impl WulffSettings {
    pub fn xi_settings(&self) -> XiSettings {
        XiSettings {
            fit: FitRange {
                k_min: self.k_min,
                k_max: self.k_max,
            },
            trials: self.trials,
            equilibration: self.equilibration,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    pub params: RcmParams,
    #[serde(default)]
    pub resample: ResampleSettings,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub sampling: SamplingSettings,
    #[serde(default)]
    pub invariance: InvarianceSettings,
    #[serde(default)]
    pub scaling: ScalingSettings,
    #[serde(default)]
    pub regeneration: RegenerationSettings,
    #[serde(default)]
    pub wulff: WulffSettings,
    #[serde(default)]
    pub hypotheses: DiagnosticSettings,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn new(params: RcmParams) -> Self {
        serde_json::from_value(serde_json::json!({ "params": params }))
            .expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.seeds.is_empty() {
            return bad("seeds must be nonempty".into());
        }
        if self.jobs == Some(0) {
            return bad("jobs must be positive".into());
        }
        if self.resample.n < 8 {
            return bad(format!("resample.n = {} is below 8", self.resample.n));
        }
        if self.resample.budget == 0 {
            return bad("resample.budget must be positive".into());
        }
        if self.invariance.samples < 2 {
            return bad("invariance.samples must be at least 2".into());
        }
        if !(self.invariance.alpha > 0.0 && self.invariance.alpha < 1.0) {
            return bad("invariance.alpha must lie in (0, 1)".into());
        }
        if self.scaling.n_grid.len() < 2 || self.scaling.n_grid.iter().any(|&n| n < 8) {
            return bad("scaling.n_grid needs at least two values, each >= 8".into());
        }
        if self.regeneration.n_grid.is_empty() || self.regeneration.n_grid.iter().any(|&n| n < 8) {
            return bad("regeneration.n_grid values must be >= 8".into());
        }
        if self.scaling.samples == 0 || self.regeneration.samples == 0 {
            return bad("sample counts must be positive".into());
        }
        if self.wulff.k_min < 1 || self.wulff.k_max <= self.wulff.k_min {
            return bad("wulff fit range must satisfy 1 <= k_min < k_max".into());
        }
        if !(self.sampling.window_factor > 1.0) {
            return bad("sampling.window_factor must exceed 1".into());
        }
        Ok(())
    }

    /// Applies command-line overrides.
    pub fn with_overrides(
        mut self,
        seed: Option<u64>,
        out: Option<PathBuf>,
        jobs: Option<usize>,
    ) -> Self {
        if let Some(s) = seed {
            self.seeds = vec![s];
        }
        if let Some(o) = out {
            self.output_dir = o;
        }
        if jobs.is_some() {
            self.jobs = jobs;
        }
        self
    }
}
