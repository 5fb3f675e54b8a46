//! Failure-time Laplace transform and its numerical inversion.
//!
//! `W` is the sum of `k` i.i.d. segments, each with transform
//! `L_S(s) = L_{fḠ}(s) / (1 − L_{fG}(s))`, hence `L_h(s) = L_S(s)^k`.
//!
//! Inversion uses the Euler-accelerated Fourier-series method: the Bromwich
//! integral is discretized by the trapezoidal rule on the line
//! `Re s = A / (2t)`, which turns it into the alternating series
//!
//! ```text
//! f(t) ≈ e^{A/2}/t · [ ½ Re f̂(A/2t) + Σ_{j≥1} (−1)^j Re f̂((A + 2jπi)/2t) ]
//! ```
//!
//! whose aliasing error is about `e^{−A}` times a bound on `f`, and the
//! series tail is accelerated with binomial (Euler) averaging of the partial
//! sums.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::exec;
use crate::model::{MomentSummary, ShockModel};
use crate::piecewise::TermSum;
use crate::quad;
use crate::{Error, Result, Weight};

/// Denominators `1 − L_{fG}(s)` smaller than this are treated as poles.
pub const POLE_GUARD: f64 = 1e-14;

/// Inverted densities below this are reported as exactly zero.
pub const DENSITY_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    /// Absolute error aimed for at each point.
    pub target_error: f64,
    /// Number of partial sums averaged by the Euler step.
    pub euler_depth: usize,
    /// Contour abscissa parameter `A`; derived from the target when `None`.
    pub discretization: Option<f64>,
    /// Series terms summed before the first Euler estimate.
    pub initial_terms: usize,
    /// Give up once this many series terms have been used.
    pub max_terms: usize,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            target_error: 1e-8,
            euler_depth: 11,
            discretization: None,
            initial_terms: 15,
            max_terms: 1 << 18,
        }
    }
}

impl InversionConfig {
    pub fn with_target(target_error: f64) -> Self {
        InversionConfig {
            target_error,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_error > 0.0 && self.target_error < 1.0) {
            return Err(Error::invalid("target_error", format!("must lie in (0, 1), got {}", self.target_error)));
        }
        if self.euler_depth < 8 {
            return Err(Error::invalid("euler_depth", format!("must be ≥ 8, got {}", self.euler_depth)));
        }
        if let Some(a) = self.discretization {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::invalid("discretization", format!("must be finite and > 0, got {a}")));
            }
        }
        if self.initial_terms == 0 || self.max_terms <= self.initial_terms + self.euler_depth {
            return Err(Error::invalid("max_terms", "must exceed initial_terms + euler_depth"));
        }
        Ok(())
    }

    /// `A`, chosen so the aliasing error `≈ e^{−A}` is half the target.
    pub fn abscissa(&self) -> f64 {
        self.discretization
            .unwrap_or_else(|| (2.0 / self.target_error).ln())
    }
}

/// One inverted value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionPoint {
    pub t: f64,
    pub value: f64,
    /// Difference between successive Euler estimates, scaled to `f(t)` units.
    pub error_estimate: f64,
    pub terms: usize,
    /// Set when the raw value fell outside the admissible range and was
    /// replaced by the nearest bound.
    pub clamped: bool,
}

/// Inverts an arbitrary transform at `t > 0`.
pub fn invert<F>(transform: F, t: f64, config: &InversionConfig) -> Result<InversionPoint>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    config.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid("t", format!("inversion needs finite t > 0, got {t}")));
    }
    let a = config.abscissa();
    let scale = (0.5 * a).exp() / t;
    let m = config.euler_depth;
    let tolerance = 0.5 * config.target_error;

    let node = |j: usize| Complex64::new(a, 2.0 * PI * j as f64) / (2.0 * t);
    let mut partial = Vec::with_capacity(4 * (config.initial_terms + m));
    partial.push(0.5 * transform(node(0))?.re);

    let euler = |partial: &[f64], n: usize| -> f64 {
        // Σ_{j=0}^{m} C(m, j) 2^{-m} S_{n+j}
        let mut coef = 0.5f64.powi(m as i32);
        let mut sum = 0.0;
        for j in 0..=m {
            sum += coef * partial[n + j];
            coef *= (m - j) as f64 / (j + 1) as f64;
        }
        sum
    };

    // Successive Euler estimates can agree while a slowly rotating tail
    // (a density jump close to t) is still unresolved, so each estimate is
    // also compared with the one at half the number of terms.
    let mut n = config.initial_terms;
    let mut previous: Option<f64> = None;
    let mut best_error = f64::INFINITY;
    loop {
        let needed = n + m + 2;
        if needed > config.max_terms {
            return Err(Error::InversionNonConvergence {
                t,
                achieved: best_error,
                target: config.target_error,
            });
        }
        while partial.len() < needed {
            let j = partial.len();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let prev = partial[j - 1];
            partial.push(prev + sign * transform(node(j))?.re);
        }
        let e1 = euler(&partial, n);
        let e2 = euler(&partial, n + 1);
        let mut error = scale * (e2 - e1).abs();
        if let Some(half) = previous {
            error = error.max(scale * (e2 - half).abs());
        }
        best_error = best_error.min(error);
        if previous.is_some() && error <= tolerance {
            return Ok(InversionPoint {
                t,
                value: scale * e2,
                error_estimate: error,
                terms: needed,
                clamped: false,
            });
        }
        previous = Some(e2);
        n *= 2;
    }
}

/// `(a ∗ b)(t)` by quadrature between the breakpoints of both factors.
fn convolve(a: &TermSum, b: &TermSum, t: f64) -> Result<f64> {
    let mut cuts: Vec<f64> = a.0.iter().flat_map(|term| [term.lo, term.hi]).collect();
    cuts.extend(b.0.iter().flat_map(|term| [t - term.lo, t - term.hi]));
    cuts.retain(|&c| c > 0.0 && c < t);
    quad::integrate_real(|u| a.value(u) * b.value(t - u), 0.0, t, &cuts, quad::Tolerance::default())
}

/// Evaluates `L_h(s)` for one model.
#[derive(Debug, Clone)]
pub struct TransformEvaluator {
    model: ShockModel,
    lethal: TermSum,
    surviving: TermSum,
}

impl TransformEvaluator {
    pub fn new(model: ShockModel) -> Self {
        let lethal = model.arrivals().weighted_terms(model.threshold(), Weight::Survival);
        let surviving = model.arrivals().weighted_terms(model.threshold(), Weight::Cdf);
        TransformEvaluator {
            model,
            lethal,
            surviving,
        }
    }

    pub fn model(&self) -> &ShockModel {
        &self.model
    }

    /// `L_S(s) = L_{fḠ}(s) / (1 − L_{fG}(s))`, the transform of one segment.
    /// No half-plane check.
    fn segment_unchecked(&self, s: Complex64) -> Result<Complex64> {
        let denom = 1.0 - self.surviving.laplace(s);
        if denom.norm() < POLE_GUARD {
            return Err(Error::TransformPole { s });
        }
        Ok(self.lethal.laplace(s) / denom)
    }

    pub fn segment_transform(&self, s: Complex64) -> Result<Complex64> {
        check_half_plane(s)?;
        self.segment_unchecked(s)
    }

    /// `L_h(s) = L_S(s)^k`.
    pub fn laplace_h(&self, s: Complex64) -> Result<Complex64> {
        check_half_plane(s)?;
        Ok(self.segment_unchecked(s)?.powu(self.model.k()))
    }

    /// `L_{fḠ} L_{fG}^n / (1 − L_{fG})`, the transform of one segment
    /// minus its first `n` terms `fḠ ∗ fG^{∗i}`.
    fn segment_tail(&self, s: Complex64, n: u32) -> Result<Complex64> {
        let surviving = self.surviving.laplace(s);
        let denom = 1.0 - surviving;
        if denom.norm() < POLE_GUARD {
            return Err(Error::TransformPole { s });
        }
        Ok(self.lethal.laplace(s) * surviving.powu(n) / denom)
    }

    /// A jump in the density makes the transform decay like `1/s`, and a kink
    /// sitting exactly at `t` cancels the alternation of the Euler series;
    /// either way the summation stalls. `fḠ` and `fG` have jumps, so for
    /// `k = 1` the density carries jumps and kinks and for `k = 2` kinks,
    /// while for `k ≥ 3` it is `C¹`. The offending terms are evaluated
    /// directly here and [`Self::smooth_density_transform`] is what remains.
    fn rough_density(&self, t: f64) -> Result<f64> {
        match self.model.k() {
            1 => Ok(self.lethal.value(t) + convolve(&self.lethal, &self.surviving, t)?),
            2 => convolve(&self.lethal, &self.lethal, t),
            _ => Ok(0.0),
        }
    }

    fn smooth_density_transform(&self, s: Complex64) -> Result<Complex64> {
        match self.model.k() {
            1 => self.segment_tail(s, 2),
            2 => {
                // L_S² − L_{fḠ}² without the cancellation
                let tail = self.segment_tail(s, 1)?;
                Ok(tail * (tail + 2.0 * self.lethal.laplace(s)))
            }
            _ => self.laplace_h(s),
        }
    }

    pub fn invert_density(&self, t: f64, config: &InversionConfig) -> Result<InversionPoint> {
        let mut point = invert(|s| self.smooth_density_transform(s), t, config)?;
        point.value += self.rough_density(t)?;
        if point.value < DENSITY_FLOOR {
            point.value = 0.0;
            point.clamped = true;
        }
        Ok(point)
    }

    /// `P(W ≤ t)`, by inverting `L_h(s) / s`.
    pub fn invert_cdf(&self, t: f64, config: &InversionConfig) -> Result<InversionPoint> {
        // only k = 1 has jumps, which would leave the cdf with kinks
        let mut point = if self.model.k() == 1 {
            let mut p = invert(|s| Ok(self.segment_tail(s, 1)? / s), t, config)?;
            p.value += self.lethal.integral_upto(t);
            p
        } else {
            invert(|s| Ok(self.laplace_h(s)? / s), t, config)?
        };
        let clamped = point.value.clamp(0.0, 1.0);
        if clamped != point.value {
            point.value = clamped;
            point.clamped = true;
        }
        Ok(point)
    }

    /// Inverts the density on a grid; points may run concurrently.
    pub fn invert_density_grid(&self, ts: &[f64], config: &InversionConfig, workers: usize) -> Vec<Result<InversionPoint>> {
        exec::map_indexed(ts.len(), workers, |i| self.invert_density(ts[i], config))
    }

    pub fn invert_cdf_grid(&self, ts: &[f64], config: &InversionConfig, workers: usize) -> Vec<Result<InversionPoint>> {
        exec::map_indexed(ts.len(), workers, |i| self.invert_cdf(ts[i], config))
    }

    /// Mean and variance from derivatives of `ln L_h` at `s = 0`, by central
    /// differences with one Richardson step. `relative_step` is measured in
    /// units of `1 / E(segment)`.
    pub fn moments_from_transform_with_step(&self, relative_step: f64) -> Result<MomentSummary> {
        let arrivals = self.model.arrivals();
        let time_scale = arrivals.mean() / self.model.lethal_prob();
        let h = relative_step / time_scale;
        let k = self.model.k() as f64;
        let log_h = |s: f64| -> Result<f64> { Ok(k * self.segment_unchecked(Complex64::new(s, 0.0))?.re.ln()) };

        let centre = log_h(0.0)?;
        let diffs = |h: f64| -> Result<(f64, f64)> {
            let (up, down) = (log_h(h)?, log_h(-h)?);
            Ok(((up - down) / (2.0 * h), (up - 2.0 * centre + down) / (h * h)))
        };
        let (d1_h, d2_h) = diffs(h)?;
        let (d1_half, d2_half) = diffs(0.5 * h)?;
        let first = (4.0 * d1_half - d1_h) / 3.0;
        let second = (4.0 * d2_half - d2_h) / 3.0;

        let mean = -first;
        let variance = second;
        Ok(MomentSummary {
            k: self.model.k(),
            mean,
            variance,
            segment_mean: mean / k,
            segment_variance: variance / k,
        })
    }

    pub fn moments_from_transform(&self) -> Result<MomentSummary> {
        self.moments_from_transform_with_step(1e-3)
    }
}

fn check_half_plane(s: Complex64) -> Result<()> {
    if s.re < 0.0 || s.re.is_nan() || s.im.is_nan() {
        Err(Error::OutsideHalfPlane { s })
    } else {
        Ok(())
    }
}

pub fn laplace_h(model: &ShockModel, s: Complex64) -> Result<Complex64> {
    TransformEvaluator::new(*model).laplace_h(s)
}

pub fn invert_density(model: &ShockModel, t: f64, config: &InversionConfig) -> Result<InversionPoint> {
    TransformEvaluator::new(*model).invert_density(t, config)
}

pub fn invert_cdf(model: &ShockModel, t: f64, config: &InversionConfig) -> Result<InversionPoint> {
    TransformEvaluator::new(*model).invert_cdf(t, config)
}

pub fn moments_from_transform(model: &ShockModel) -> Result<MomentSummary> {
    TransformEvaluator::new(*model).moments_from_transform()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{ArrivalLaw, ThresholdLaw};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn exp_const(k: u32, rate: f64, tau: f64) -> ShockModel {
        ShockModel::new(k, ArrivalLaw::exponential(rate).unwrap(), ThresholdLaw::constant(tau).unwrap()).unwrap()
    }

    #[test]
    fn known_pair_self_test() {
        let p = invert(|s| Ok(1.0 / (s + 1.0)), 1.0, &InversionConfig::default()).unwrap();
        assert_abs_diff_eq!(p.value, (-1.0f64).exp(), epsilon = 1e-6);
        assert_abs_diff_eq!(p.value, (-1.0f64).exp(), epsilon = 1e-8);
        // t e^{-2t} <-> 1/(s+2)^2
        let p = invert(|s| Ok((s + 2.0).powu(2).inv()), 3.0, &InversionConfig::default()).unwrap();
        assert_abs_diff_eq!(p.value, 3.0 * (-6.0f64).exp(), epsilon = 1e-8);
    }

    #[test]
    fn transform_is_one_at_origin() {
        for m in [
            exp_const(3, 1.0, LN_2),
            ShockModel::new(2, ArrivalLaw::uniform(0.0, 2.0).unwrap(), ThresholdLaw::uniform(0.5, 1.5).unwrap()).unwrap(),
            ShockModel::new(5, ArrivalLaw::uniform(1.0, 2.0).unwrap(), ThresholdLaw::exponential(0.3).unwrap()).unwrap(),
        ] {
            let v = laplace_h(&m, c(0.0, 0.0)).unwrap();
            assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn invalid_inputs() {
        let e = TransformEvaluator::new(exp_const(1, 1.0, 1.0));
        assert!(e.laplace_h(c(-1.0, 0.0)).is_err());
        assert!(e.invert_density(0.0, &InversionConfig::default()).is_err());
        let bad = InversionConfig {
            euler_depth: 4,
            ..InversionConfig::default()
        };
        assert!(e.invert_density(1.0, &bad).is_err());
        assert!(InversionConfig::with_target(0.0).validate().is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        let cfg = InversionConfig {
            max_terms: 30,
            target_error: 1e-14,
            ..InversionConfig::default()
        };
        // 1/sqrt(s) inverts to 1/sqrt(pi t): slowly decaying terms
        let r = invert(|s| Ok(s.sqrt().inv()), 1.0, &cfg);
        assert!(matches!(r, Err(Error::InversionNonConvergence { .. })), "{r:?}");
    }

    #[test]
    fn exponential_k1_density_and_cdf() {
        let e = TransformEvaluator::new(exp_const(1, 1.0, 1.0));
        let cfg = InversionConfig::default();
        assert_abs_diff_eq!(e.invert_density(0.5, &cfg).unwrap().value, (-0.5f64).exp(), epsilon = 1e-7);
        assert_abs_diff_eq!(e.invert_cdf(0.9, &cfg).unwrap().value, 1.0 - (-0.9f64).exp(), epsilon = 1e-8);
        // t = tau sits on the density jump
        assert_abs_diff_eq!(e.invert_cdf(1.0, &cfg).unwrap().value, 1.0 - (-1.0f64).exp(), epsilon = 1e-8);
        // for τ < t < 2τ only the j + i ≤ 1 shifted terms are active: h = e^{-t} (t - τ)
        let beyond = e.invert_density(1.5, &cfg).unwrap();
        assert_abs_diff_eq!(beyond.value, 0.5 * (-1.5f64).exp(), epsilon = 1e-8);
        assert!(e.invert_cdf(1e-6, &cfg).unwrap().value < 1e-5);
        // kinks of the remainder at τ and 2τ fall on the evaluation point
        assert_abs_diff_eq!(e.invert_density(1.0, &cfg).unwrap().value, 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(e.invert_density(2.0, &cfg).unwrap().value, (-2.0f64).exp(), epsilon = 1e-8);
        assert_abs_diff_eq!(e.invert_density(2.5, &cfg).unwrap().value, 1.125 * (-2.5f64).exp(), epsilon = 1e-8);
    }

    #[test]
    fn k2_density_at_kinks() {
        let m = exp_const(2, 1.0, 1.0);
        let e = TransformEvaluator::new(m);
        let params = crate::closed_form::ExpConstParams::from_model(&m).unwrap();
        for t in [1.0, 2.0, 3.0] {
            let exact = crate::closed_form::exp_const_pdf_series(&params, t).value;
            assert_abs_diff_eq!(e.invert_density(t, &InversionConfig::default()).unwrap().value, exact, epsilon = 1e-8);
        }
    }

    #[test]
    fn moments_from_transform_examples() {
        let m = moments_from_transform(&exp_const(3, 1.0, LN_2)).unwrap();
        assert_abs_diff_eq!(m.mean, 6.0, epsilon = 1e-5);
        let u = ShockModel::new(1, ArrivalLaw::uniform(0.0, 2.0).unwrap(), ThresholdLaw::constant(1.0).unwrap()).unwrap();
        let mu = moments_from_transform(&u).unwrap();
        assert_abs_diff_eq!(mu.variance, 14.0 / 3.0, epsilon = 1e-4);

        let base = ShockModel::new(4, ArrivalLaw::uniform(0.3, 1.1).unwrap(), ThresholdLaw::uniform(0.1, 0.9).unwrap()).unwrap();
        let m4 = moments_from_transform(&base).unwrap();
        let m8 = moments_from_transform(&base.with_k(8).unwrap()).unwrap();
        assert!((m8.mean - 2.0 * m4.mean).abs() < 1e-8);
    }
}
