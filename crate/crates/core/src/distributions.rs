//! Arrival and threshold laws.
//!
//! [`ArrivalLaw`] is the law `F` of the gap `Z` between successive shocks and
//! [`ThresholdLaw`] the law `G` of the recovery threshold `δ`. Both are plain
//! immutable values. A gap is lethal when `Z ≤ δ`, so the lethal weight of a
//! gap of length `t` is the threshold survival `Ḡ(t) = P(δ > t)` (equal to
//! `P(δ ≥ t)` almost everywhere) and the non-lethal weight is `G(t)`.
//!
//! New laws are added as enum variants: each needs density/cdf, sampling,
//! raw moments and, when it has one, an exponential-linear term expansion
//! (see [`ArrivalLaw::weighted_laplace`]). Laws without an expansion fall back
//! to adaptive quadrature.

use num_complex::Complex64;
use rand::distr::{Distribution, Open01};
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::piecewise::{Term, TermSum};
use crate::quad::{self, Tolerance, TAIL_CUTOFF};
use crate::{Error, Result};

/// Law of the gap between successive shocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ArrivalLaw {
    Exponential { rate: f64 },
    Uniform { lower: f64, upper: f64 },
}

/// Law of the threshold `δ`, drawn afresh for every gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ThresholdLaw {
    /// Degenerate threshold: `G(t) = 0` for `t < tau`, `1` for `t ≥ tau`.
    Constant { tau: f64 },
    Exponential { rate: f64 },
    Uniform { lower: f64, upper: f64 },
}

/// Which threshold factor multiplies the arrival density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weight {
    /// `G(t)`: gap survives the threshold (non-lethal).
    Cdf,
    /// `Ḡ(t) = 1 − G(t)`: gap is lethal.
    Survival,
}

fn check_time(t: f64) -> Result<()> {
    if t < 0.0 || t.is_nan() {
        Err(Error::NegativeTime(t))
    } else {
        Ok(())
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

fn check_interval(lower: f64, upper: f64) -> Result<()> {
    if !(lower.is_finite() && lower >= 0.0) {
        return Err(Error::invalid("lower", format!("must be finite and ≥ 0, got {lower}")));
    }
    if !(upper.is_finite() && upper > lower) {
        return Err(Error::invalid(
            "upper",
            format!("must be finite and > lower ({lower}), got {upper}"),
        ));
    }
    Ok(())
}

impl ArrivalLaw {
    pub fn exponential(rate: f64) -> Result<Self> {
        let law = ArrivalLaw::Exponential { rate };
        law.validate()?;
        Ok(law)
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        let law = ArrivalLaw::Uniform { lower, upper };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ArrivalLaw::Exponential { rate } => check_positive("rate", rate),
            ArrivalLaw::Uniform { lower, upper } => check_interval(lower, upper),
        }
    }

    pub fn density(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(match *self {
            ArrivalLaw::Exponential { rate } => rate * (-rate * t).exp(),
            ArrivalLaw::Uniform { lower, upper } => {
                if t > lower && t < upper {
                    1.0 / (upper - lower)
                } else {
                    0.0
                }
            }
        })
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(match *self {
            ArrivalLaw::Exponential { rate } => -(-rate * t).exp_m1(),
            ArrivalLaw::Uniform { lower, upper } => ((t - lower) / (upper - lower)).clamp(0.0, 1.0),
        })
    }

    pub fn survival(&self, t: f64) -> Result<f64> {
        self.cdf(t).map(|c| 1.0 - c)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ArrivalLaw::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
            ArrivalLaw::Uniform { lower, upper } => {
                let u: f64 = Open01.sample(rng);
                lower + (upper - lower) * u
            }
        }
    }

    /// `E(Z^order)` for order 1 or 2.
    pub fn raw_moment(&self, order: u32) -> Result<f64> {
        match (order, *self) {
            (1, ArrivalLaw::Exponential { rate }) => Ok(1.0 / rate),
            (2, ArrivalLaw::Exponential { rate }) => Ok(2.0 / (rate * rate)),
            (1, ArrivalLaw::Uniform { lower, upper }) => Ok(0.5 * (lower + upper)),
            (2, ArrivalLaw::Uniform { lower, upper }) => {
                Ok((lower * lower + lower * upper + upper * upper) / 3.0)
            }
            _ => Err(Error::UnsupportedMomentOrder(order)),
        }
    }

    pub fn mean(&self) -> f64 {
        self.raw_moment(1).expect("order 1 is supported")
    }

    pub fn variance(&self) -> f64 {
        match *self {
            ArrivalLaw::Exponential { rate } => 1.0 / (rate * rate),
            ArrivalLaw::Uniform { lower, upper } => (upper - lower).powi(2) / 12.0,
        }
    }

    /// End of the integration domain: the support end, or the point where
    /// the survival drops below [`TAIL_CUTOFF`].
    pub fn cutoff(&self) -> f64 {
        match *self {
            ArrivalLaw::Exponential { rate } => -TAIL_CUTOFF.ln() / rate,
            ArrivalLaw::Uniform { upper, .. } => upper,
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            ArrivalLaw::Exponential { .. } => vec![],
            ArrivalLaw::Uniform { lower, upper } => vec![lower, upper],
        }
    }

    pub(crate) fn terms(&self) -> TermSum {
        match *self {
            ArrivalLaw::Exponential { rate } => TermSum(vec![Term {
                lo: 0.0,
                hi: f64::INFINITY,
                rate,
                c0: rate,
                c1: 0.0,
            }]),
            ArrivalLaw::Uniform { lower, upper } => {
                TermSum(vec![Term::constant(lower, upper, 1.0 / (upper - lower))])
            }
        }
    }

    pub(crate) fn weighted_terms(&self, threshold: &ThresholdLaw, weight: Weight) -> TermSum {
        self.terms().times(&threshold.terms(weight))
    }

    /// Plain Laplace transform `∫ e^{-st} f(t) dt`.
    pub fn laplace(&self, s: Complex64) -> Result<Complex64> {
        check_half_plane(s)?;
        Ok(self.terms().laplace(s))
    }

    /// `∫₀^∞ e^{-st} f(t) w(t) dt` with `w = G` or `Ḡ`, in closed form.
    pub fn weighted_laplace(&self, threshold: &ThresholdLaw, s: Complex64, weight: Weight) -> Result<Complex64> {
        check_half_plane(s)?;
        Ok(self.weighted_laplace_unchecked(threshold, s, weight))
    }

    /// Same as [`weighted_laplace`](Self::weighted_laplace) without the
    /// half-plane check; used for two-sided differences around `s = 0`.
    pub(crate) fn weighted_laplace_unchecked(&self, threshold: &ThresholdLaw, s: Complex64, weight: Weight) -> Complex64 {
        self.weighted_terms(threshold, weight).laplace(s)
    }

    /// The weighted transform by adaptive quadrature on `[0, cutoff]`.
    /// Independent of the closed-form route.
    pub fn weighted_laplace_quadrature(
        &self,
        threshold: &ThresholdLaw,
        s: Complex64,
        weight: Weight,
        tol: Tolerance,
    ) -> Result<Complex64> {
        check_half_plane(s)?;
        let integrand = |t: f64| {
            let f = self.density(t).unwrap_or(0.0);
            (-s * t).exp() * (f * threshold.weight(t, weight))
        };
        let mut cuts = self.breakpoints();
        cuts.extend(threshold.breakpoints());
        quad::integrate(integrand, 0.0, self.cutoff(), &cuts, tol).map(|e| e.value)
    }

    /// `∫₀^x f(t) w(t) dt`.
    pub(crate) fn weighted_mass_upto(&self, threshold: &ThresholdLaw, weight: Weight, x: f64) -> f64 {
        self.weighted_terms(threshold, weight).integral_upto(x)
    }
}

fn check_half_plane(s: Complex64) -> Result<()> {
    if s.re < 0.0 || s.re.is_nan() || s.im.is_nan() {
        Err(Error::OutsideHalfPlane { s })
    } else {
        Ok(())
    }
}

impl ThresholdLaw {
    pub fn constant(tau: f64) -> Result<Self> {
        let law = ThresholdLaw::Constant { tau };
        law.validate()?;
        Ok(law)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        let law = ThresholdLaw::Exponential { rate };
        law.validate()?;
        Ok(law)
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        let law = ThresholdLaw::Uniform { lower, upper };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ThresholdLaw::Constant { tau } => check_positive("tau", tau),
            ThresholdLaw::Exponential { rate } => check_positive("rate", rate),
            ThresholdLaw::Uniform { lower, upper } => check_interval(lower, upper),
        }
    }

    /// `G(t) = P(δ ≤ t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        match *self {
            ThresholdLaw::Constant { tau } => {
                if t >= tau {
                    1.0
                } else {
                    0.0
                }
            }
            ThresholdLaw::Exponential { rate } => {
                if t <= 0.0 {
                    0.0
                } else {
                    -(-rate * t).exp_m1()
                }
            }
            ThresholdLaw::Uniform { lower, upper } => ((t - lower) / (upper - lower)).clamp(0.0, 1.0),
        }
    }

    /// `Ḡ(t) = 1 − G(t)`.
    pub fn survival(&self, t: f64) -> f64 {
        1.0 - self.cdf(t)
    }

    pub fn weight(&self, t: f64, weight: Weight) -> f64 {
        match weight {
            Weight::Cdf => self.cdf(t),
            Weight::Survival => self.survival(t),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ThresholdLaw::Constant { tau } => tau,
            ThresholdLaw::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
            ThresholdLaw::Uniform { lower, upper } => {
                let u: f64 = Open01.sample(rng);
                lower + (upper - lower) * u
            }
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            ThresholdLaw::Constant { tau } => vec![tau],
            ThresholdLaw::Exponential { .. } => vec![],
            ThresholdLaw::Uniform { lower, upper } => vec![lower, upper],
        }
    }

    fn survival_terms(&self) -> TermSum {
        match *self {
            ThresholdLaw::Constant { tau } => TermSum(vec![Term::constant(0.0, tau, 1.0)]),
            ThresholdLaw::Exponential { rate } => TermSum(vec![Term {
                lo: 0.0,
                hi: f64::INFINITY,
                rate,
                c0: 1.0,
                c1: 0.0,
            }]),
            ThresholdLaw::Uniform { lower, upper } => {
                let width = upper - lower;
                let mut terms = vec![Term {
                    lo: lower,
                    hi: upper,
                    rate: 0.0,
                    c0: upper / width,
                    c1: -1.0 / width,
                }];
                if lower > 0.0 {
                    terms.insert(0, Term::constant(0.0, lower, 1.0));
                }
                TermSum(terms)
            }
        }
    }

    fn cdf_terms(&self) -> TermSum {
        match *self {
            ThresholdLaw::Constant { tau } => TermSum(vec![Term::constant(tau, f64::INFINITY, 1.0)]),
            ThresholdLaw::Exponential { rate } => TermSum(vec![
                Term::constant(0.0, f64::INFINITY, 1.0),
                Term {
                    lo: 0.0,
                    hi: f64::INFINITY,
                    rate,
                    c0: -1.0,
                    c1: 0.0,
                },
            ]),
            ThresholdLaw::Uniform { lower, upper } => {
                let width = upper - lower;
                TermSum(vec![
                    Term {
                        lo: lower,
                        hi: upper,
                        rate: 0.0,
                        c0: -lower / width,
                        c1: 1.0 / width,
                    },
                    Term::constant(upper, f64::INFINITY, 1.0),
                ])
            }
        }
    }

    pub(crate) fn terms(&self, weight: Weight) -> TermSum {
        match weight {
            Weight::Cdf => self.cdf_terms(),
            Weight::Survival => self.survival_terms(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn density_values() {
        let e1 = ArrivalLaw::exponential(1.0).unwrap();
        assert_eq!(e1.density(0.0).unwrap(), 1.0);
        assert_eq!(ArrivalLaw::uniform(0.0, 2.0).unwrap().density(1.0).unwrap(), 0.5);
        let e2 = ArrivalLaw::exponential(2.0).unwrap();
        assert_abs_diff_eq!(e2.density(1.0).unwrap(), 0.270_670_566_473_225_4, epsilon = 1e-15);
        // numeric derivative of the cdf
        let h = 1e-5;
        let fd = (e2.cdf(1.0 + h).unwrap() - e2.cdf(1.0 - h).unwrap()) / (2.0 * h);
        assert_abs_diff_eq!(fd, e2.density(1.0).unwrap(), epsilon = 1e-9);
    }

    #[test]
    fn negative_time_rejected() {
        let e1 = ArrivalLaw::exponential(1.0).unwrap();
        assert_eq!(e1.density(-0.1), Err(Error::NegativeTime(-0.1)));
        assert!(e1.cdf(-1.0).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(ArrivalLaw::exponential(0.0).is_err());
        assert!(ArrivalLaw::exponential(f64::NAN).is_err());
        assert!(ArrivalLaw::uniform(2.0, 1.0).is_err());
        assert!(ArrivalLaw::uniform(-1.0, 1.0).is_err());
        assert!(ThresholdLaw::constant(0.0).is_err());
        assert!(ThresholdLaw::uniform(1.0, 1.0).is_err());
    }

    #[test]
    fn constant_threshold_step_convention() {
        let g = ThresholdLaw::constant(1.0).unwrap();
        assert_eq!(g.survival(0.5), 1.0);
        assert_eq!(g.survival(1.0), 0.0);
        assert_eq!(g.cdf(1.0), 1.0);
        assert_eq!(g.cdf(0.999_999), 0.0);
    }

    #[test]
    fn exponential_median_by_quadrature() {
        let e1 = ArrivalLaw::exponential(1.0).unwrap();
        let q = quad::integrate_real(|t| e1.density(t).unwrap(), 0.0, LN_2, &[], Tolerance::default()).unwrap();
        assert_abs_diff_eq!(q, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(e1.cdf(LN_2).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn raw_moments() {
        assert_eq!(ArrivalLaw::exponential(1.0).unwrap().raw_moment(2).unwrap(), 2.0);
        let u02 = ArrivalLaw::uniform(0.0, 2.0).unwrap();
        let q = quad::integrate_real(|t| t * t * u02.density(t).unwrap(), 0.0, 2.0, &[], Tolerance::default()).unwrap();
        assert_abs_diff_eq!(u02.raw_moment(2).unwrap(), q, epsilon = 1e-13);
        assert_abs_diff_eq!(u02.raw_moment(2).unwrap(), 4.0 / 3.0, epsilon = 1e-15);
        assert_eq!(ArrivalLaw::uniform(1.0, 3.0).unwrap().raw_moment(1).unwrap(), 2.0);
        assert_eq!(u02.raw_moment(3), Err(Error::UnsupportedMomentOrder(3)));
    }

    #[test]
    fn sampling() {
        let mut rng = stream(1, 0);
        assert_eq!(ThresholdLaw::constant(1.0).unwrap().sample(&mut rng), 1.0);

        let n = 1_000_000;
        let e1 = ArrivalLaw::exponential(1.0).unwrap();
        let mean = (0..n).map(|_| e1.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 4e-3, "{mean}");

        let u = ArrivalLaw::uniform(0.0, 2.0).unwrap();
        let draws: Vec<f64> = (0..n).map(|_| u.sample(&mut rng)).collect();
        assert!(draws.iter().all(|&x| x > 0.0 && x < 2.0));
        let mean = draws.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 2e-3, "{mean}");
    }

    #[test]
    fn weighted_laplace_exponential_constant_matches_reduced_form() {
        let lambda = 1.7;
        let tau = 0.4;
        let f = ArrivalLaw::exponential(lambda).unwrap();
        let g = ThresholdLaw::constant(tau).unwrap();
        for &s in &[c(0.0, 0.0), c(0.3, 0.0), c(1.2, -4.0), c(0.0, 9.0), c(20.0, 100.0)] {
            let got = f.weighted_laplace(&g, s, Weight::Survival).unwrap();
            let want = lambda / (s + lambda) * (1.0 - (-(s + lambda) * tau).exp());
            assert!((got - want).norm() < 1e-14, "s={s}: {got} vs {want}");
        }
        let s0 = f
            .weighted_laplace(&ThresholdLaw::constant(1.0).unwrap(), c(0.0, 0.0), Weight::Survival)
            .unwrap();
        let e1 = ArrivalLaw::exponential(1.0).unwrap();
        let s1 = e1
            .weighted_laplace(&ThresholdLaw::constant(1.0).unwrap(), c(0.0, 0.0), Weight::Survival)
            .unwrap();
        assert!(s0.re > 0.0);
        assert_abs_diff_eq!(s1.re, 0.632_120_558_828_557_7, epsilon = 1e-15);
        let q = e1
            .weighted_laplace_quadrature(&ThresholdLaw::constant(1.0).unwrap(), c(0.0, 0.0), Weight::Survival, Tolerance::default())
            .unwrap();
        assert_abs_diff_eq!(q.re, s1.re, epsilon = 1e-12);
    }

    #[test]
    fn huge_constant_threshold_gives_no_survivors() {
        let g = ThresholdLaw::constant(1e300).unwrap();
        for f in [ArrivalLaw::exponential(1.0).unwrap(), ArrivalLaw::uniform(0.5, 3.0).unwrap()] {
            let v = f.weighted_laplace(&g, c(0.0, 0.0), Weight::Cdf).unwrap();
            assert_eq!(v.norm(), 0.0);
        }
    }

    #[test]
    fn negative_real_part_rejected() {
        let f = ArrivalLaw::exponential(1.0).unwrap();
        let g = ThresholdLaw::constant(1.0).unwrap();
        assert!(matches!(
            f.weighted_laplace(&g, c(-0.1, 0.0), Weight::Cdf),
            Err(Error::OutsideHalfPlane { .. })
        ));
    }
}
