#![allow(dead_code)]

use deltashock::{ArrivalLaw, ShockModel, ThresholdLaw};

pub fn arrivals() -> Vec<ArrivalLaw> {
    vec![ArrivalLaw::exponential(1.0).unwrap(), ArrivalLaw::uniform(0.5, 2.5).unwrap()]
}

pub fn thresholds() -> Vec<ThresholdLaw> {
    vec![
        ThresholdLaw::constant(1.2).unwrap(),
        ThresholdLaw::exponential(0.8).unwrap(),
        ThresholdLaw::uniform(0.3, 1.7).unwrap(),
    ]
}

/// Every built-in arrival/threshold pairing.
pub fn all_pairs(k: u32) -> Vec<ShockModel> {
    let mut out = Vec::new();
    for a in arrivals() {
        for g in thresholds() {
            out.push(ShockModel::new(k, a, g).unwrap());
        }
    }
    out
}

pub fn exp_const(k: u32, rate: f64, tau: f64) -> ShockModel {
    ShockModel::new(k, ArrivalLaw::exponential(rate).unwrap(), ThresholdLaw::constant(tau).unwrap()).unwrap()
}

pub fn unif_const(k: u32, a: f64, b: f64, tau: f64) -> ShockModel {
    ShockModel::new(k, ArrivalLaw::uniform(a, b).unwrap(), ThresholdLaw::constant(tau).unwrap()).unwrap()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
