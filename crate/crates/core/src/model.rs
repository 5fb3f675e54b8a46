//! The generalized δ-shock model.
//!
//! The start of operation acts as a virtual shock at `t = 0`, so every gap,
//! including the first, is classified the same way. With `p = P(Z ≤ δ)` the
//! number of gaps up to failure is negative binomial, and `W` splits into `k`
//! i.i.d. segments, each running from one lethal shock to the next.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::distributions::{ArrivalLaw, ThresholdLaw, Weight};
use crate::quad::{self, Tolerance};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShockModel {
    k: u32,
    arrivals: ArrivalLaw,
    threshold: ThresholdLaw,
    p: f64,
}

/// Mean and variance of `W`, together with those of a single segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub k: u32,
    pub mean: f64,
    pub variance: f64,
    pub segment_mean: f64,
    pub segment_variance: f64,
}

impl MomentSummary {
    pub fn from_segment(k: u32, segment_mean: f64, segment_variance: f64) -> Self {
        MomentSummary {
            k,
            mean: k as f64 * segment_mean,
            variance: k as f64 * segment_variance,
            segment_mean,
            segment_variance,
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

impl ShockModel {
    /// Builds a model, rejecting `k = 0`, invalid laws and models whose
    /// lethal probability is zero.
    pub fn new(k: u32, arrivals: ArrivalLaw, threshold: ThresholdLaw) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k", "must be ≥ 1"));
        }
        arrivals.validate()?;
        threshold.validate()?;
        let p = arrivals
            .weighted_mass_upto(&threshold, Weight::Survival, f64::INFINITY)
            .clamp(0.0, 1.0);
        if !(p > 0.0) {
            return Err(Error::UnrealizableModel { p });
        }
        Ok(ShockModel {
            k,
            arrivals,
            threshold,
            p,
        })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn arrivals(&self) -> &ArrivalLaw {
        &self.arrivals
    }

    pub fn threshold(&self) -> &ThresholdLaw {
        &self.threshold
    }

    /// Same laws, different `k`.
    pub fn with_k(&self, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k", "must be ≥ 1"));
        }
        Ok(ShockModel { k, ..*self })
    }

    /// `p = P(Z ≤ δ) = ∫ f(t) Ḡ(t) dt`.
    pub fn lethal_prob(&self) -> f64 {
        self.p
    }

    /// `q = 1 − p`, computed directly from `∫ f G` to avoid cancellation.
    pub fn survival_prob(&self) -> f64 {
        self.arrivals
            .weighted_mass_upto(&self.threshold, Weight::Cdf, f64::INFINITY)
            .clamp(0.0, 1.0)
    }

    /// Density of a non-lethal gap, `f(t) G(t) / q`.
    pub fn alpha_density(&self, t: f64) -> Result<f64> {
        let q = self.survival_prob();
        if q <= 0.0 {
            return Err(Error::Undefined("non-lethal gap density (q = 0)"));
        }
        Ok(self.arrivals.density(t)? * self.threshold.cdf(t) / q)
    }

    /// Density of a lethal gap, `f(t) Ḡ(t) / p`.
    pub fn beta_density(&self, t: f64) -> Result<f64> {
        Ok(self.arrivals.density(t)? * self.threshold.survival(t) / self.p)
    }

    /// Cdf of a non-lethal gap.
    pub fn alpha_cdf(&self, t: f64) -> Result<f64> {
        let q = self.survival_prob();
        if q <= 0.0 {
            return Err(Error::Undefined("non-lethal gap law (q = 0)"));
        }
        if t <= 0.0 {
            return Ok(0.0);
        }
        let mass = self.arrivals.weighted_mass_upto(&self.threshold, Weight::Cdf, t);
        Ok((mass / q).clamp(0.0, 1.0))
    }

    /// Cdf of a lethal gap.
    pub fn beta_cdf(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let mass = self.arrivals.weighted_mass_upto(&self.threshold, Weight::Survival, t);
        Ok((mass / self.p).clamp(0.0, 1.0))
    }

    /// `P(N = n) = C(n−1, k−1) p^k q^(n−k)`; zero for `n < k`.
    pub fn shock_count_pmf(&self, n: u64) -> f64 {
        negative_binomial_pmf(self.k, self.p, n)
    }

    /// `E(Z | Z > δ) = ∫ t α(t) dt`.
    pub fn nonlethal_mean(&self) -> Result<f64> {
        let q = self.survival_prob();
        if q <= 0.0 {
            return Err(Error::Undefined("E(Z | Z > δ) (q = 0)"));
        }
        if let (ArrivalLaw::Exponential { rate }, ThresholdLaw::Constant { tau }) = (self.arrivals, self.threshold) {
            // memoryless overshoot
            return Ok(tau + 1.0 / rate);
        }
        let mut cuts = self.arrivals.breakpoints();
        cuts.extend(self.threshold.breakpoints());
        let integrand = |t: f64| t * self.arrivals.density(t).unwrap_or(0.0) * self.threshold.cdf(t);
        let tol = Tolerance {
            rel: 1e-13,
            ..Tolerance::default()
        };
        let first = quad::integrate_real(integrand, 0.0, self.arrivals.cutoff(), &cuts, tol)?;
        Ok(first / q)
    }

    /// Mean and variance of `W`:
    ///
    /// ```text
    /// E(W)   = k E(Z) / p
    /// Var(W) = k ( E(Z²)/p + (2 E(Z) E(Z|Z>δ) q − E(Z)²) / p² )
    /// ```
    pub fn failure_moments(&self) -> Result<MomentSummary> {
        let p = self.p;
        let q = self.survival_prob();
        let m1 = self.arrivals.raw_moment(1)?;
        let m2 = self.arrivals.raw_moment(2)?;
        let overshoot = if q > 0.0 {
            2.0 * m1 * self.nonlethal_mean()? * q
        } else {
            0.0
        };
        let segment_mean = m1 / p;
        let segment_variance = m2 / p + (overshoot - m1 * m1) / (p * p);
        Ok(MomentSummary::from_segment(self.k, segment_mean, segment_variance))
    }
}

pub fn negative_binomial_pmf(k: u32, p: f64, n: u64) -> f64 {
    let k64 = u64::from(k);
    if n < k64 {
        return 0.0;
    }
    let q = 1.0 - p;
    let failures = n - k64;
    if failures == 0 {
        return p.powi(k as i32);
    }
    if q <= 0.0 {
        return 0.0;
    }
    let ln = ln_binomial(n - 1, k64 - 1) + k as f64 * p.ln() + failures as f64 * q.ln();
    ln.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::LN_2;

    fn exp_const(k: u32, rate: f64, tau: f64) -> ShockModel {
        ShockModel::new(
            k,
            ArrivalLaw::exponential(rate).unwrap(),
            ThresholdLaw::constant(tau).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn lethal_probability_examples() {
        assert_abs_diff_eq!(exp_const(1, 1.0, LN_2).lethal_prob(), 0.5, epsilon = 1e-15);
        let u = ShockModel::new(1, ArrivalLaw::uniform(0.0, 2.0).unwrap(), ThresholdLaw::constant(1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(u.lethal_prob(), 0.5, epsilon = 1e-15);
        let all = ShockModel::new(2, ArrivalLaw::uniform(0.0, 2.0).unwrap(), ThresholdLaw::constant(5.0).unwrap()).unwrap();
        assert_eq!(all.lethal_prob(), 1.0);
        assert_eq!(all.survival_prob(), 0.0);
    }

    #[test]
    fn unrealizable_and_invalid_models() {
        let r = ShockModel::new(1, ArrivalLaw::uniform(1.0, 2.0).unwrap(), ThresholdLaw::constant(0.5).unwrap());
        assert!(matches!(r, Err(Error::UnrealizableModel { .. })));
        let r = ShockModel::new(0, ArrivalLaw::exponential(1.0).unwrap(), ThresholdLaw::constant(0.5).unwrap());
        assert!(matches!(r, Err(Error::InvalidParameter { name: "k", .. })));
    }

    #[test]
    fn conditional_densities() {
        let m = exp_const(1, 1.0, 1.0);
        assert_eq!(m.alpha_density(0.5).unwrap(), 0.0);
        let p = 1.0 - (-1.0f64).exp();
        assert_relative_eq!(m.beta_density(0.3).unwrap(), (-0.3f64).exp() / p, max_relative = 1e-14);
        assert_eq!(m.beta_density(1.0).unwrap(), 0.0);
        let tol = Tolerance::default();
        let ia = quad::integrate_real(|t| m.alpha_density(t).unwrap(), 0.0, 40.0, &[1.0], tol).unwrap();
        let ib = quad::integrate_real(|t| m.beta_density(t).unwrap(), 0.0, 40.0, &[1.0], tol).unwrap();
        assert_abs_diff_eq!(ia, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(ib, 1.0, epsilon = 1e-10);

        let all = ShockModel::new(2, ArrivalLaw::uniform(0.0, 2.0).unwrap(), ThresholdLaw::constant(5.0).unwrap()).unwrap();
        assert!(matches!(all.alpha_density(1.0), Err(Error::Undefined(_))));
    }

    #[test]
    fn density_reconstruction() {
        let models = [
            exp_const(1, 1.3, 0.7),
            ShockModel::new(1, ArrivalLaw::uniform(0.5, 2.0).unwrap(), ThresholdLaw::uniform(0.2, 1.5).unwrap()).unwrap(),
            ShockModel::new(1, ArrivalLaw::exponential(2.0).unwrap(), ThresholdLaw::exponential(0.5).unwrap()).unwrap(),
        ];
        for m in models {
            let (p, q) = (m.lethal_prob(), m.survival_prob());
            for i in 0..200 {
                let t = i as f64 * 0.0173;
                let f = m.arrivals().density(t).unwrap();
                let r = p * m.beta_density(t).unwrap() + q * m.alpha_density(t).unwrap();
                assert!((r - f).abs() < 1e-12, "t={t}: {r} vs {f}");
            }
        }
    }

    /// Enumerate all lethal/non-lethal labelings of `n` gaps and sum the
    /// probability of those where gap `n` is the `k`-th lethal one.
    fn enumerate_pmf(k: u32, p: f64, n: u32) -> f64 {
        (0u32..1 << n)
            .filter(|mask| mask >> (n - 1) & 1 == 1 && mask.count_ones() == k)
            .map(|mask| p.powi(mask.count_ones() as i32) * (1.0 - p).powi((n - mask.count_ones()) as i32))
            .sum()
    }

    #[test]
    fn shock_count_pmf_examples() {
        assert_abs_diff_eq!(negative_binomial_pmf(3, 0.5, 3), 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(negative_binomial_pmf(3, 0.5, 4), 0.1875, epsilon = 1e-14);
        assert_abs_diff_eq!(enumerate_pmf(3, 0.5, 4), 0.1875, epsilon = 1e-15);
        assert_eq!(negative_binomial_pmf(3, 0.5, 2), 0.0);
        for n in 1..12 {
            assert_relative_eq!(negative_binomial_pmf(1, 0.3, n), 0.3 * 0.7f64.powi(n as i32 - 1), max_relative = 1e-13);
        }
        for k in 1..5 {
            for n in k..14 {
                assert_abs_diff_eq!(negative_binomial_pmf(k, 0.37, n as u64), enumerate_pmf(k, 0.37, n), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn shock_count_pmf_sums_to_one() {
        for &(k, p) in &[(1u32, 0.5f64), (3, 0.2), (10, 0.63)] {
            let n_max = k as u64 + (50.0 / p).ceil() as u64;
            let total: f64 = (k as u64..=n_max).map(|n| negative_binomial_pmf(k, p, n)).sum();
            assert!((total - 1.0).abs() < 1e-8, "k={k} p={p}: {total}");
        }
    }

    #[test]
    fn failure_moments_examples() {
        let m3 = exp_const(3, 1.0, LN_2).failure_moments().unwrap();
        assert_abs_diff_eq!(m3.mean, 6.0, epsilon = 1e-12);
        let m1 = exp_const(1, 1.0, LN_2).failure_moments().unwrap();
        assert_abs_diff_eq!(m1.variance, 4.0 * (1.0 + LN_2), epsilon = 1e-12);

        let u = ArrivalLaw::uniform(0.5, 3.0).unwrap();
        let all = ShockModel::new(4, u, ThresholdLaw::constant(3.0).unwrap()).unwrap();
        let m = all.failure_moments().unwrap();
        assert_relative_eq!(m.mean, 4.0 * u.mean(), max_relative = 1e-14);
        assert_relative_eq!(m.variance, 4.0 * u.variance(), max_relative = 1e-12);
    }

    #[test]
    fn uniform_constant_general_variance() {
        let m = ShockModel::new(1, ArrivalLaw::uniform(0.0, 2.0).unwrap(), ThresholdLaw::constant(1.0).unwrap()).unwrap();
        let s = m.failure_moments().unwrap();
        assert_relative_eq!(s.mean, 2.0, max_relative = 1e-14);
        assert_relative_eq!(s.variance, 14.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn nonlethal_mean_quadrature_matches_memorylessness() {
        // Exponential + constant takes the closed-form path; force quadrature
        // through a threshold uniform on a tiny interval around tau.
        let tau = 0.8;
        let m = ShockModel::new(
            1,
            ArrivalLaw::exponential(1.5).unwrap(),
            ThresholdLaw::uniform(tau - 1e-7, tau + 1e-7).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(m.nonlethal_mean().unwrap(), tau + 1.0 / 1.5, epsilon = 1e-7);
    }

    #[test]
    fn moments_scale_linearly_in_k() {
        let base = ShockModel::new(1, ArrivalLaw::uniform(0.2, 1.9).unwrap(), ThresholdLaw::exponential(0.9).unwrap()).unwrap();
        let one = base.failure_moments().unwrap();
        for k in [2, 7, 40] {
            let mk = base.with_k(k).unwrap().failure_moments().unwrap();
            assert_eq!(mk.mean, k as f64 * one.mean);
            assert_eq!(mk.variance, k as f64 * one.variance);
        }
    }

    #[test]
    fn k_one_reduces_to_single_segment() {
        for m in [
            exp_const(1, 2.0, 0.3),
            ShockModel::new(1, ArrivalLaw::uniform(1.0, 3.0).unwrap(), ThresholdLaw::constant(2.0).unwrap()).unwrap(),
            ShockModel::new(1, ArrivalLaw::exponential(1.0).unwrap(), ThresholdLaw::uniform(0.0, 2.0).unwrap()).unwrap(),
        ] {
            let s = m.failure_moments().unwrap();
            assert_relative_eq!(s.mean, m.arrivals().mean() / m.lethal_prob(), max_relative = 1e-14);
        }
    }
}
