//! Small statistical helpers for Monte Carlo summaries and
//! goodness-of-fit checks.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// A point estimate with its standard error. Serializes as
/// `{"est": ..., "stderr": ...}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    #[serde(rename = "est")]
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Binomial proportion estimate `k/n` with the usual standard error
    /// `sqrt(p(1-p)/n)`.
    pub fn binomial(successes: u64, trials: u64) -> Estimate {
        assert!(trials > 0, "binomial estimate needs at least one trial");
        let p = successes as f64 / trials as f64;
        Estimate {
            value: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
        }
    }

    /// Sample mean with standard error of the mean.
    pub fn mean(samples: &[f64]) -> Estimate {
        assert!(!samples.is_empty(), "mean estimate needs samples");
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        if samples.len() == 1 {
            return Estimate {
                value: mean,
                stderr: 0.0,
            };
        }
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Estimate {
            value: mean,
            stderr: (var / n).sqrt(),
        }
    }

    /// |value - reference| ≤ k·stderr.
    pub fn within_sigma(&self, reference: f64, k: f64) -> bool {
        (self.value - reference).abs() <= k * self.stderr
    }
}

/// Kolmogorov-Smirnov test of `samples` against the exponential distribution
/// with the given rate. Returns the asymptotic p-value.
pub fn ks_exponential_pvalue(samples: &[f64], rate: f64) -> f64 {
    assert!(!samples.is_empty() && rate > 0.0);
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let cdf = 1.0 - (-rate * x).exp();
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((cdf - lo).abs()).max((hi - cdf).abs());
    }
    // Asymptotic distribution with the Stephens small-sample correction.
    let t = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    kolmogorov_tail(t)
}

/// Q(t) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2 k² t²), the Kolmogorov tail
/// probability.
fn kolmogorov_tail(t: f64) -> f64 {
    if t < 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64).powi(2) * t * t).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Chi-square goodness-of-fit of observed event counts against a Poisson law
/// with known mean. Bins with expected count below 5 are pooled into their
/// neighbors. Returns the p-value.
pub fn poisson_chi_square_pvalue(counts: &[u64], lambda: f64) -> f64 {
    assert!(!counts.is_empty() && lambda > 0.0);
    let n = counts.len() as f64;
    let k_max = *counts.iter().max().unwrap() as usize;

    // Poisson pmf, computed iteratively.
    let mut pmf = Vec::with_capacity(k_max + 1);
    let mut p = (-lambda).exp();
    pmf.push(p);
    for k in 1..=k_max {
        p *= lambda / k as f64;
        pmf.push(p);
    }
    let tail = (1.0 - pmf.iter().sum::<f64>()).max(0.0);

    let mut observed = vec![0.0_f64; k_max + 2];
    for &c in counts {
        observed[c as usize] += 1.0;
    }
    let mut expected: Vec<f64> = pmf.iter().map(|q| q * n).collect();
    expected.push(tail * n);

    // Pool low-expectation bins left to right so every kept bin has E ≥ 5.
    let mut pooled_obs = Vec::new();
    let mut pooled_exp = Vec::new();
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    for (o, e) in observed.iter().zip(&expected) {
        acc_o += o;
        acc_e += e;
        if acc_e >= 5.0 {
            pooled_obs.push(acc_o);
            pooled_exp.push(acc_e);
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 {
        if let (Some(o), Some(e)) = (pooled_obs.last_mut(), pooled_exp.last_mut()) {
            *o += acc_o;
            *e += acc_e;
        }
    }
    if pooled_obs.len() < 2 {
        return 1.0;
    }

    let stat: f64 = pooled_obs
        .iter()
        .zip(&pooled_exp)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let dof = (pooled_obs.len() - 1) as f64;
    let chi2 = ChiSquared::new(dof).expect("valid dof");
    1.0 - chi2.cdf(stat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Exp, Poisson};

    #[test]
    fn binomial_estimate_basics() {
        let e = Estimate::binomial(50, 200);
        assert!((e.value - 0.25).abs() < 1e-12);
        assert!((e.stderr - (0.25 * 0.75 / 200.0_f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ks_accepts_true_exponential() {
        let mut rng = crate::rng::derived_stream(11, 0);
        let exp = Exp::new(2.5).unwrap();
        let samples: Vec<f64> = (0..5000).map(|_| exp.sample(&mut rng)).collect();
        assert!(ks_exponential_pvalue(&samples, 2.5) > 0.001);
    }

    #[test]
    fn ks_rejects_wrong_rate() {
        let mut rng = crate::rng::derived_stream(11, 1);
        let exp = Exp::new(2.5).unwrap();
        let samples: Vec<f64> = (0..5000).map(|_| exp.sample(&mut rng)).collect();
        assert!(ks_exponential_pvalue(&samples, 1.0) < 1e-6);
    }

    #[test]
    fn chi_square_accepts_true_poisson() {
        let mut rng = crate::rng::derived_stream(13, 0);
        let pois = Poisson::new(4.0).unwrap();
        let counts: Vec<u64> = (0..5000).map(|_| pois.sample(&mut rng) as u64).collect();
        assert!(poisson_chi_square_pvalue(&counts, 4.0) > 0.001);
    }

    #[test]
    fn chi_square_rejects_uniform_counts() {
        let mut rng = crate::rng::derived_stream(13, 1);
        let counts: Vec<u64> = (0..5000).map(|_| rng.random_range(0..9_u64)).collect();
        assert!(poisson_chi_square_pvalue(&counts, 4.0) < 1e-6);
    }
}
