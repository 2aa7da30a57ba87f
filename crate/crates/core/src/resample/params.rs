use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Constants of the sector-resampling chain and their derived schedules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResampleParams {
    pub n: u32,
    pub chi: f64,
    pub eps: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub q0: f64,
    pub c0: f64,
    pub c1: f64,
    #[serde(rename = "C1")]
    pub c1_big: f64,
    pub u_chi: f64,
}

pub const DEFAULT_CHI: f64 = 0.5;
pub const DEFAULT_EPS: f64 = 0.07;
pub const DEFAULT_EPS0: f64 = 0.1;

impl ResampleParams {
    /// Default constants for scale `n` and inner and outer radial constants.
    pub fn with_defaults(n: u32, c1: f64, c1_big: f64) -> Result<Self> {
        let q0 = (0.1f64).min(0.375 * c1 / c1_big);
        let p = ResampleParams {
            n,
            chi: DEFAULT_CHI,
            eps: DEFAULT_EPS,
            eps0: DEFAULT_EPS0,
            eps1: 2.0 * DEFAULT_EPS / 3.0,
            q0,
            c0: q0 / 4.0,
            c1,
            c1_big,
            u_chi: DEFAULT_CHI.powf(2.0 / 3.0),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 {
            return invalid(format!("n = {} is below the minimum scale 8", self.n));
        }
        if !(self.chi > 0.0) {
            return invalid("chi must be positive");
        }
        let third = 2.0 / 3.0;
        if !(self.eps > 0.0 && self.eps < third) || !(self.eps1 > 0.0 && self.eps1 < third) {
            return invalid("eps and eps1 must lie in (0, 2/3)");
        }
        if !(self.eps0 > 0.0) {
            return invalid("eps0 must be positive");
        }
        if !(self.q0 > 0.0 && self.q0 < FRAC_PI_2) || !(self.c0 > 0.0 && self.c0 < self.q0 / 2.0) {
            return invalid("need 0 < q0 < pi/2 and 0 < c0 < q0/2");
        }
        if !(self.c1 > 0.0 && self.c1 < self.c1_big) {
            return invalid("need 0 < c1 < C1");
        }
        if !(self.u_chi > 0.0) {
            return invalid("u_chi must be positive");
        }
        Ok(())
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    pub fn ln_n(&self) -> f64 {
        self.nf().ln()
    }

    pub fn theta(&self) -> f64 {
        self.chi * self.nf().powf(-1.0 / 3.0) * self.ln_n().powf(1.0 / 3.0)
    }

    pub fn m_n(&self) -> usize {
        ((TAU / self.theta()).floor() as usize).saturating_sub(1)
    }

    /// Number of sectors inside the first quadrant.
    pub fn m_n_prime(&self) -> usize {
        let t = self.theta();
        (1..=self.m_n())
            .filter(|&j| (j + 1) as f64 * t <= FRAC_PI_2 + 1e-12)
            .count()
    }

    pub fn s2(&self) -> f64 {
        self.chi / 4.0 * self.nf().powf(self.eps1)
    }

    pub fn s3(&self) -> usize {
        (self.nf().powf(self.eps1).ceil() as usize).max(2)
    }

    /// Half-width of the endpoint search intervals, `n^(eps - 1)`.
    pub fn search_width(&self) -> f64 {
        self.nf().powf(self.eps - 1.0)
    }

    pub fn mfl_bound(&self) -> f64 {
        self.s2() * self.nf().powf(2.0 / 3.0) * self.ln_n().powf(1.0 / 3.0)
    }

    pub fn mlr_bound(&self) -> f64 {
        self.nf().powf(2.0 / 3.0)
    }

    pub fn theta_max_bound(&self) -> f64 {
        self.search_width() / 2.0
    }

    pub fn roughness_threshold(&self) -> f64 {
        self.u_chi * self.nf().powf(1.0 / 3.0) * self.ln_n().powf(2.0 / 3.0)
    }

    pub fn mbt_length(&self) -> f64 {
        40.0 * PI * self.c1_big * self.nf() / self.m_n() as f64
    }

    pub fn mbt_angle(&self) -> f64 {
        40.0 * PI / self.m_n() as f64
    }

    pub fn e1_bound(&self) -> f64 {
        125.0 * 64.0 * self.c1_big.powi(2) * self.chi.powi(3) * self.nf() * self.ln_n()
    }

    pub fn e0_bound(&self) -> f64 {
        40.0 * self.c1_big * self.u_chi * self.chi * self.nf() * self.ln_n()
    }

    pub fn cluster_q(&self) -> f64 {
        self.q0 / 2.0
    }

    pub fn cluster_c(&self) -> f64 {
        self.c0 / 2.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub j: usize,
    pub lo: f64,
    pub hi: f64,
    pub first_quadrant: bool,
}

impl Sector {
    pub fn contains_angle(&self, a: f64) -> bool {
        a >= self.lo - 1e-12 && a <= self.hi + 1e-12
    }
}

/// Angular sectors of width `theta()`, indexed from 1.
pub fn sector_partition(p: &ResampleParams) -> Vec<Sector> {
    let t = p.theta();
    let mp = p.m_n_prime();
    (1..=p.m_n())
        .map(|j| Sector {
            j,
            lo: j as f64 * t,
            hi: (j + 1) as f64 * t,
            first_quadrant: j <= mp,
        })
        .collect()
}

/// Sector index whose closed arc holds `a`, if any.
pub fn sector_of(p: &ResampleParams, a: f64) -> Option<usize> {
    let j = (a / p.theta()).floor() as usize;
    (j >= 1 && j <= p.m_n()).then_some(j)
}
