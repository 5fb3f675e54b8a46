//! Exact results for a constant threshold `τ` with exponential or uniform
//! arrivals.
//!
//! For exponential arrivals the transform expands into shifted Erlang terms,
//!
//! ```text
//! h(t) = λ^k e^{−λt}/(k−1)! Σ_{j≥0} Σ_{i=0}^{k} (−1)^i C(k,i) λ^j/j! [(t − (j+i)τ) U(t − (j+i)τ)]^{j+k−1}
//! ```
//!
//! where `[x U(x)]^0` means `U(x)` and `U(x) = 1` for `x ≥ 0`. Only terms with
//! `(j+i)τ ≤ t` survive, so the `j` sum is finite. The alternating `i` sum is
//! evaluated term by term in log space with compensated accumulation; the
//! ratio `Σ|term| / |h|` is reported as a condition number because the
//! cancellation grows with `k` and `λt`.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::distributions::{ArrivalLaw, ThresholdLaw};
use crate::model::{MomentSummary, ShockModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpConstParams {
    pub rate: f64,
    pub tau: f64,
    pub k: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnifConstParams {
    pub lower: f64,
    pub upper: f64,
    pub tau: f64,
    pub k: u32,
}

/// A series value together with `Σ|term| / |value|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub condition: f64,
    pub abs_sum: f64,
}

impl SeriesValue {
    fn exact(value: f64) -> Self {
        SeriesValue {
            value,
            condition: 1.0,
            abs_sum: value.abs(),
        }
    }

    /// Rough bound on the absolute rounding error: each term carries a few
    /// ulps from its log-space evaluation.
    pub fn error_bound(&self) -> f64 {
        64.0 * f64::EPSILON * self.abs_sum
    }
}

/// Both uniform-case variances side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformVarianceAudit {
    /// The reduced uniform-case expression, evaluated as written.
    pub reduced_formula: f64,
    /// The general variance formula, which matches simulation.
    pub general: f64,
    pub abs_difference: f64,
}

#[derive(Default)]
struct Kahan {
    sum: f64,
    carry: f64,
    abs: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        self.abs += x.abs();
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn finish(self) -> SeriesValue {
        let condition = if self.sum != 0.0 {
            self.abs / self.sum.abs()
        } else if self.abs == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
        SeriesValue {
            value: self.sum,
            condition,
            abs_sum: self.abs,
        }
    }
}

impl ExpConstParams {
    pub fn new(rate: f64, tau: f64, k: u32) -> Result<Self> {
        ArrivalLaw::exponential(rate)?;
        ThresholdLaw::constant(tau)?;
        if k == 0 {
            return Err(Error::invalid("k", "must be ≥ 1"));
        }
        Ok(ExpConstParams { rate, tau, k })
    }

    pub fn from_model(model: &ShockModel) -> Option<Self> {
        match (*model.arrivals(), *model.threshold()) {
            (ArrivalLaw::Exponential { rate }, ThresholdLaw::Constant { tau }) => Some(ExpConstParams {
                rate,
                tau,
                k: model.k(),
            }),
            _ => None,
        }
    }

    pub fn to_model(&self) -> Result<ShockModel> {
        ShockModel::new(self.k, ArrivalLaw::exponential(self.rate)?, ThresholdLaw::constant(self.tau)?)
    }

    /// `p = 1 − e^{−λτ}`.
    pub fn lethal_prob(&self) -> f64 {
        -(-self.rate * self.tau).exp_m1()
    }

    /// Highest `j + i` shift that is active at time `t`.
    fn max_shift(&self, t: f64) -> u64 {
        (t / self.tau).floor() as u64
    }
}

/// Failure-time density for exponential arrivals and constant threshold.
pub fn exp_const_pdf(params: &ExpConstParams, t: f64) -> f64 {
    exp_const_pdf_series(params, t).value.max(0.0)
}

pub fn exp_const_pdf_series(params: &ExpConstParams, t: f64) -> SeriesValue {
    if !(t > 0.0) {
        return SeriesValue::exact(0.0);
    }
    let ExpConstParams { rate, tau, k } = *params;
    let ln_rate = rate.ln();
    let ln_prefix = k as f64 * ln_rate - rate * t - ln_gamma(k as f64);
    let max_shift = params.max_shift(t);
    let mut acc = Kahan::default();
    for j in 0..=max_shift {
        let power = j + k as u64 - 1;
        let ln_j = j as f64 * ln_rate - ln_gamma(j as f64 + 1.0);
        for i in 0..=u64::from(k).min(max_shift - j) {
            let x = t - (j + i) as f64 * tau;
            if x < 0.0 {
                break;
            }
            let ln_x_pow = if power == 0 {
                0.0
            } else if x == 0.0 {
                continue;
            } else {
                power as f64 * x.ln()
            };
            let magnitude = (ln_prefix + ln_j + ln_binomial(u64::from(k), i) + ln_x_pow).exp();
            acc.add(if i % 2 == 0 { magnitude } else { -magnitude });
        }
    }
    acc.finish()
}

/// Failure-time cdf for exponential arrivals and constant threshold: the
/// density series integrated term by term, each shifted Erlang term giving
/// a regularized incomplete gamma function.
pub fn exp_const_cdf(params: &ExpConstParams, t: f64) -> f64 {
    exp_const_cdf_series(params, t).value.clamp(0.0, 1.0)
}

pub fn exp_const_cdf_series(params: &ExpConstParams, t: f64) -> SeriesValue {
    if !(t > 0.0) {
        return SeriesValue::exact(0.0);
    }
    let ExpConstParams { rate, tau, k } = *params;
    let max_shift = params.max_shift(t);
    let mut acc = Kahan::default();
    for j in 0..=max_shift {
        let shape = (j + u64::from(k)) as f64;
        let ln_j = ln_binomial(j + u64::from(k) - 1, j);
        for i in 0..=u64::from(k).min(max_shift - j) {
            let shift = (j + i) as f64 * tau;
            let x = t - shift;
            if x <= 0.0 {
                break;
            }
            let tail = gamma_lr(shape, rate * x);
            if tail == 0.0 {
                continue;
            }
            let magnitude = (ln_binomial(u64::from(k), i) + ln_j - rate * shift + tail.ln()).exp();
            acc.add(if i % 2 == 0 { magnitude } else { -magnitude });
        }
    }
    acc.finish()
}

/// `E(W) = k / (λ(1 − e^{−λτ}))`, `Var(W) = k (1 + 2λτ e^{−λτ}) / (λ²(1 − e^{−λτ})²)`.
pub fn exp_const_moments(params: &ExpConstParams) -> MomentSummary {
    let ExpConstParams { rate, tau, k } = *params;
    let p = params.lethal_prob();
    let segment_mean = 1.0 / (rate * p);
    let segment_variance = (1.0 + 2.0 * rate * tau * (-rate * tau).exp()) / (rate * rate * p * p);
    MomentSummary::from_segment(k, segment_mean, segment_variance)
}

impl UnifConstParams {
    pub fn new(lower: f64, upper: f64, tau: f64, k: u32) -> Result<Self> {
        ArrivalLaw::uniform(lower, upper)?;
        if !(tau > lower && tau < upper) {
            return Err(Error::invalid(
                "tau",
                format!("must lie strictly inside ({lower}, {upper}), got {tau}"),
            ));
        }
        if k == 0 {
            return Err(Error::invalid("k", "must be ≥ 1"));
        }
        Ok(UnifConstParams { lower, upper, tau, k })
    }

    pub fn from_model(model: &ShockModel) -> Option<Self> {
        match (*model.arrivals(), *model.threshold()) {
            (ArrivalLaw::Uniform { lower, upper }, ThresholdLaw::Constant { tau }) => {
                UnifConstParams::new(lower, upper, tau, model.k()).ok()
            }
            _ => None,
        }
    }

    pub fn to_model(&self) -> Result<ShockModel> {
        ShockModel::new(
            self.k,
            ArrivalLaw::uniform(self.lower, self.upper)?,
            ThresholdLaw::constant(self.tau)?,
        )
    }

    fn raw_moments(&self) -> (f64, f64) {
        let (a, b) = (self.lower, self.upper);
        (0.5 * (a + b), (a * a + a * b + b * b) / 3.0)
    }
}

/// `E(W) = k (b² − a²) / (2(τ − a))`.
pub fn unif_const_mean(params: &UnifConstParams) -> f64 {
    let UnifConstParams { lower: a, upper: b, tau, k } = *params;
    k as f64 * (b * b - a * a) / (2.0 * (tau - a))
}

/// The reduced uniform-case variance expression,
/// `k [2μ₂(τ − a) + μ₁(b² − 2τ² + a²)] / (2μ₁(τ − a))`, evaluated as written.
/// It does not reproduce `Var(W)`; use [`unif_const_variance_general`].
pub fn unif_const_variance_reduced(params: &UnifConstParams) -> f64 {
    let UnifConstParams { lower: a, upper: b, tau, k } = *params;
    let (mu1, mu2) = params.raw_moments();
    k as f64 * (2.0 * mu2 * (tau - a) + mu1 * (b * b - 2.0 * tau * tau + a * a)) / (2.0 * mu1 * (tau - a))
}

/// `Var(W)` from the general moment formula of the shock model.
pub fn unif_const_variance_general(params: &UnifConstParams) -> Result<f64> {
    Ok(params.to_model()?.failure_moments()?.variance)
}

pub fn unif_const_variance_audit(params: &UnifConstParams) -> Result<UniformVarianceAudit> {
    let reduced_formula = unif_const_variance_reduced(params);
    let general = unif_const_variance_general(params)?;
    Ok(UniformVarianceAudit {
        reduced_formula,
        general,
        abs_difference: (reduced_formula - general).abs(),
    })
}
