//! Small statistical toolkit: two-sample KS, chi-square goodness of fit,
//! total variation, least-squares fits and quantiles.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Small-argument form converges faster.
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        let mut s = 0.0;
        let mut k = 1.0;
        loop {
            let t = y.powf(k * k);
            s += t;
            if t < 1e-17 {
                break;
            }
            k += 2.0;
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    let mut sign = 1.0;
    for k in 1..200 {
        let t = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += sign * t;
        if t < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value
/// (Stephens' small-sample correction).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return invalid("KS test needs two nonempty samples");
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return invalid("KS test input contains NaN");
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let p_value = kolmogorov_survival((en + 0.12 + 0.11 / en) * d);
    Ok(KsResult {
        statistic: d,
        p_value,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> Result<ChiSquareResult> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return invalid("chi-square needs matching category lists of length >= 2");
    }
    if expected.iter().any(|&e| e <= 0.0) {
        return invalid("expected counts must be positive");
    }
    let statistic: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let dof = observed.len() - 1;
    let dist = ChiSquared::new(dof as f64).expect("positive dof");
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: 1.0 - dist.cdf(statistic),
    })
}

/// Half the L1 distance between two distributions on the same index set.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    (0..n)
        .map(|i| (p.get(i).copied().unwrap_or(0.0) - q.get(i).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
        / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    pub points: usize,
}

impl LinearFit {
    pub fn t_stat(&self) -> f64 {
        self.slope / self.slope_stderr
    }

    /// Two-sided confidence interval for the slope from residual scatter.
    pub fn slope_ci(&self, level: f64) -> (f64, f64) {
        let dof = self.points.saturating_sub(2).max(1) as f64;
        let t = StudentsT::new(0.0, 1.0, dof)
            .expect("valid t")
            .inverse_cdf(0.5 + level / 2.0);
        (
            self.slope - t * self.slope_stderr,
            self.slope + t * self.slope_stderr,
        )
    }
}

/// Weighted least squares with known variances (`weights` = 1/σ²);
/// standard errors come from the weights, not the residuals.
pub fn weighted_linear_fit(x: &[f64], y: &[f64], weights: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() != weights.len() || x.len() < 2 {
        return invalid("fit needs at least two matched points");
    }
    if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return invalid("weights must be positive and finite");
    }
    let s: f64 = weights.iter().sum();
    let sx: f64 = weights.iter().zip(x).map(|(w, x)| w * x).sum();
    let sy: f64 = weights.iter().zip(y).map(|(w, y)| w * y).sum();
    let sxx: f64 = weights.iter().zip(x).map(|(w, x)| w * x * x).sum();
    let sxy: f64 = weights
        .iter()
        .zip(x.iter().zip(y))
        .map(|(w, (x, y))| w * x * y)
        .sum();
    let det = s * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return invalid("degenerate abscissae");
    }
    let slope = (s * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr: (s / det).sqrt(),
        intercept_stderr: (sxx / det).sqrt(),
        points: x.len(),
    })
}

/// Ordinary least squares with residual-based standard errors.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let w = vec![1.0; x.len()];
    let mut fit = weighted_linear_fit(x, y, &w)?;
    let n = x.len();
    if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(x, y)| (y - fit.intercept - fit.slope * x).powi(2))
            .sum();
        let sigma2 = rss / (n - 2) as f64;
        fit.slope_stderr *= sigma2.sqrt();
        fit.intercept_stderr *= sigma2.sqrt();
    } else {
        fit.slope_stderr = f64::INFINITY;
        fit.intercept_stderr = f64::INFINITY;
    }
    Ok(fit)
}

/// Linear-interpolation quantile of an ascending sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

pub fn quartiles(values: &[f64]) -> Quartiles {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Quartiles {
        q25: quantile_sorted(&v, 0.25),
        median: quantile_sorted(&v, 0.5),
        q75: quantile_sorted(&v, 0.75),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_branches_agree() {
        for &l in &[1.1, 1.15, 1.18, 1.2, 1.25] {
            let mut alt = 0.0;
            let mut sign = 1.0;
            for k in 1..100 {
                alt += sign * (-2.0 * (k * k) as f64 * l * l).exp();
                sign = -sign;
            }
            assert!((kolmogorov_survival(l) - 2.0 * alt).abs() < 1e-12);
        }
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-3);
    }

    #[test]
    fn ks_identical_samples() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn ks_shifted_samples() {
        let a: Vec<f64> = (0..500).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..500).map(|i| i as f64 + 100.0).collect();
        let r = ks_two_sample(&a, &b).unwrap();
        assert!((r.statistic - 0.2).abs() < 1e-12);
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn ks_handles_ties() {
        let a = vec![1.0, 1.0, 2.0, 2.0];
        let b = vec![1.0, 2.0, 2.0, 2.0];
        assert!((ks_two_sample(&a, &b).unwrap().statistic - 0.25).abs() < 1e-12);
    }

    #[test]
    fn exact_line_recovered() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!(f.slope_stderr < 1e-9);
    }

    #[test]
    fn chi_square_uniform() {
        let r = chi_square_gof(&[25, 25, 25, 25], &[25.0; 4]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quartile_interpolation() {
        let q = quartiles(&[4.0, 1.0, 3.0, 2.0, 5.0]);
        assert_eq!((q.q25, q.median, q.q75), (2.0, 3.0, 4.0));
    }
}
