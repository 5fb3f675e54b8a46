//! Normal approximation to the failure-time law.
//!
//! `W` is a sum of `k` i.i.d. segments with mean `μ` and variance `σ²`, so
//! for large `k` it is close to `N(kμ, kσ²)`. The approximation is never
//! selected automatically; [`approx_error`] quantifies how far it is from a
//! reference distribution.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

use crate::closed_form::{self, ExpConstParams};
use crate::exec;
use crate::laplace::{InversionConfig, TransformEvaluator};
use crate::model::{MomentSummary, ShockModel};
use crate::simulator::SimulationReport;
use crate::{Error, Result};

pub const GRID_POINTS: usize = 400;
pub const GRID_HALF_WIDTH: f64 = 5.0;

/// Largest tolerated absolute rounding error of the closed-form series.
const SERIES_ERROR_BUDGET: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalApprox {
    pub center: f64,
    pub scale: f64,
    pub source: MomentSummary,
}

impl NormalApprox {
    pub fn from_moments(source: MomentSummary) -> Result<Self> {
        let scale = source.variance.sqrt();
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid("variance", format!("must be finite and > 0, got {}", source.variance)));
        }
        Ok(NormalApprox {
            center: source.mean,
            scale,
            source,
        })
    }

    pub fn for_model(model: &ShockModel) -> Result<Self> {
        Self::from_moments(model.failure_moments()?)
    }

    pub fn pdf(&self, t: f64) -> f64 {
        let z = (t - self.center) / self.scale;
        (-0.5 * z * z).exp() / (self.scale * (2.0 * PI).sqrt())
    }

    pub fn cdf(&self, t: f64) -> f64 {
        0.5 * erfc(-(t - self.center) / (self.scale * SQRT_2))
    }

    /// Evaluation grid `[kμ − 5√k σ, kμ + 5√k σ]`, [`GRID_POINTS`] points.
    pub fn grid(&self) -> Vec<f64> {
        let lo = self.center - GRID_HALF_WIDTH * self.scale;
        let hi = self.center + GRID_HALF_WIDTH * self.scale;
        let step = (hi - lo) / (GRID_POINTS - 1) as f64;
        (0..GRID_POINTS).map(|i| lo + i as f64 * step).collect()
    }
}

/// What the approximation is compared against.
pub enum Reference<'a> {
    /// Exponential arrivals with a constant threshold only.
    ClosedForm,
    Inversion(InversionConfig),
    Simulation(&'a SimulationReport),
    /// Arbitrary density and cdf.
    Functions {
        pdf: &'a (dyn Fn(f64) -> f64 + Sync),
        cdf: &'a (dyn Fn(f64) -> f64 + Sync),
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxError {
    /// `max |φ(t) − h(t)|` over the grid.
    pub sup_norm: f64,
    /// `max |Φ(t) − F(t)|` over the grid.
    pub ks: f64,
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

pub fn approx_error(model: &ShockModel, approx: &NormalApprox, reference: Reference<'_>) -> Result<ApproxError> {
    let grid = approx.grid();
    let (pdf, cdf): (Vec<f64>, Vec<f64>) = match reference {
        Reference::ClosedForm => {
            let params = ExpConstParams::from_model(model).ok_or_else(|| {
                Error::ReferenceUnavailable("closed form needs exponential arrivals and a constant threshold".into())
            })?;
            let mut pdf = Vec::with_capacity(grid.len());
            let mut cdf = Vec::with_capacity(grid.len());
            for &t in &grid {
                let d = closed_form::exp_const_pdf_series(&params, t);
                let c = closed_form::exp_const_cdf_series(&params, t);
                let worst = d.error_bound().max(c.error_bound());
                if worst > SERIES_ERROR_BUDGET {
                    return Err(Error::ReferenceUnavailable(format!(
                        "closed-form series too cancellation-prone at t = {t} (error bound {worst:.3e})"
                    )));
                }
                pdf.push(d.value.max(0.0));
                cdf.push(c.value.clamp(0.0, 1.0));
            }
            (pdf, cdf)
        }
        Reference::Inversion(config) => {
            let evaluator = TransformEvaluator::new(*model);
            let points = exec::map_indexed(grid.len(), exec::ALL_WORKERS, |i| -> Result<(f64, f64)> {
                let t = grid[i];
                if t <= 0.0 {
                    return Ok((0.0, 0.0));
                }
                Ok((
                    evaluator.invert_density(t, &config)?.value,
                    evaluator.invert_cdf(t, &config)?.value,
                ))
            });
            points.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip()
        }
        Reference::Simulation(report) => {
            if report.samples.is_empty() {
                return Err(Error::ReferenceUnavailable("simulation report holds no samples".into()));
            }
            grid.iter()
                .map(|&t| (report.histogram.density(t), report.ecdf(t)))
                .unzip()
        }
        Reference::Functions { pdf, cdf } => grid.iter().map(|&t| (pdf(t), cdf(t))).unzip(),
    };

    let mut sup_norm: f64 = 0.0;
    let mut ks: f64 = 0.0;
    for (i, &t) in grid.iter().enumerate() {
        sup_norm = sup_norm.max((approx.pdf(t) - pdf[i]).abs());
        ks = ks.max((approx.cdf(t) - cdf[i]).abs());
    }
    Ok(ApproxError {
        sup_norm,
        ks,
        lower: grid[0],
        upper: grid[grid.len() - 1],
        points: grid.len(),
    })
}
