//! Seeded Monte Carlo engine for the δ-shock process.
//!
//! Runs are grouped in fixed chunks of [`CHUNK_SIZE`]; chunk `c` draws from
//! stream `c` of the seed and chunk summaries are merged in chunk order, so
//! a report depends only on `(model, seed, runs)` and never on the worker
//! count.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::exec;
use crate::model::ShockModel;
use crate::rng::{self, Stream};
use crate::stats::{self, Histogram, RunningMoments};
use crate::{Error, Result};

pub const CHUNK_SIZE: u64 = 1 << 16;
pub const DEFAULT_GAP_CAP: u64 = 1_000_000_000;
pub const DEFAULT_RETAINED: usize = 1_000_000;

// Stream indices above every chunk index, for auxiliary experiments.
const GAP_STREAM: u64 = u64::MAX;
const SEGMENT_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramPolicy {
    pub bins: usize,
    /// Upper edge; `None` puts it ten analytic standard deviations above
    /// the analytic mean.
    pub upper: Option<f64>,
}

impl Default for HistogramPolicy {
    fn default() -> Self {
        HistogramPolicy { bins: 200, upper: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub runs: u64,
    pub seed: u64,
    /// 0 uses every core, 1 runs sequentially.
    pub workers: usize,
    pub histogram: HistogramPolicy,
    /// Failure times kept for the empirical cdf (the first runs in order).
    pub retained_samples: usize,
    pub gap_cap: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            runs: 100_000,
            seed: 0,
            workers: exec::ALL_WORKERS,
            histogram: HistogramPolicy::default(),
            retained_samples: DEFAULT_RETAINED,
            gap_cap: DEFAULT_GAP_CAP,
        }
    }
}

impl SimulationConfig {
    pub fn new(runs: u64, seed: u64) -> Self {
        SimulationConfig {
            runs,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::invalid("runs", "must be ≥ 1"));
        }
        if self.histogram.bins == 0 {
            return Err(Error::invalid("bins", "must be ≥ 1"));
        }
        if let Some(u) = self.histogram.upper {
            if !(u.is_finite() && u > 0.0) {
                return Err(Error::invalid("upper", format!("histogram upper edge must be > 0, got {u}")));
            }
        }
        if self.gap_cap == 0 {
            return Err(Error::invalid("gap_cap", "must be ≥ 1"));
        }
        Ok(())
    }
}

/// Outcome of one simulated system.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureRecord {
    pub time: f64,
    pub shocks: u64,
    /// 1-based indices of the lethal gaps; the last one is `shocks`.
    pub lethal_positions: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub runs: u64,
    pub seed: u64,
    pub mean: f64,
    pub variance: Option<f64>,
    pub std_error_mean: Option<f64>,
    pub std_error_variance: Option<f64>,
    pub shock_count_mean: f64,
    pub shock_count_variance: Option<f64>,
    /// `(n, number of runs that failed at the n-th shock)`, ascending in `n`.
    pub shock_counts: Vec<(u64, u64)>,
    pub histogram: Histogram,
    /// Sorted failure times of the first `retained_samples` runs.
    #[serde(skip)]
    pub samples: Vec<f64>,
}

impl SimulationReport {
    pub fn ecdf(&self, t: f64) -> f64 {
        stats::ecdf(&self.samples, t)
    }

    /// KS distance between the retained samples and `cdf`.
    pub fn ks_statistic<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        stats::ks_statistic(&self.samples, cdf)
    }

    /// Empirical `P(N = n)`.
    pub fn shock_count_frequency(&self, n: u64) -> f64 {
        let count = self
            .shock_counts
            .binary_search_by_key(&n, |&(m, _)| m)
            .map(|i| self.shock_counts[i].1)
            .unwrap_or(0);
        count as f64 / self.runs as f64
    }
}

/// Drives one system to failure, reporting every gap and whether it was
/// lethal. Returns `(W, N)`.
pub fn simulate_path<R, V>(model: &ShockModel, rng: &mut R, gap_cap: u64, mut visit: V) -> Result<(f64, u64)>
where
    R: Rng + ?Sized,
    V: FnMut(f64, bool),
{
    let k = u64::from(model.k());
    let arrivals = model.arrivals();
    let threshold = model.threshold();
    let mut lethal = 0;
    let mut gaps = 0;
    let mut time = 0.0;
    while lethal < k {
        if gaps >= gap_cap {
            return Err(Error::RunLengthCap { cap: gap_cap });
        }
        let gap = arrivals.sample(rng);
        let delta = threshold.sample(rng);
        gaps += 1;
        time += gap;
        let is_lethal = gap <= delta;
        if is_lethal {
            lethal += 1;
        }
        visit(gap, is_lethal);
    }
    Ok((time, gaps))
}

pub fn simulate_one<R: Rng + ?Sized>(model: &ShockModel, rng: &mut R) -> Result<FailureRecord> {
    let mut positions = Vec::with_capacity(model.k() as usize);
    let mut index = 0;
    let (time, shocks) = simulate_path(model, rng, DEFAULT_GAP_CAP, |_, lethal| {
        index += 1;
        if lethal {
            positions.push(index);
        }
    })?;
    Ok(FailureRecord {
        time,
        shocks,
        lethal_positions: positions,
    })
}

struct ChunkSummary {
    time: RunningMoments,
    shocks: RunningMoments,
    counts: BTreeMap<u64, u64>,
    histogram: Histogram,
    samples: Vec<f64>,
}

fn run_chunk(model: &ShockModel, config: &SimulationConfig, chunk: u64, template: &Histogram) -> Result<ChunkSummary> {
    let first = chunk * CHUNK_SIZE;
    let last = (first + CHUNK_SIZE).min(config.runs);
    let mut rng: Stream = rng::stream(config.seed, chunk);
    let mut summary = ChunkSummary {
        time: RunningMoments::new(),
        shocks: RunningMoments::new(),
        counts: BTreeMap::new(),
        histogram: template.clone(),
        samples: Vec::new(),
    };
    for run in first..last {
        let (w, n) = simulate_path(model, &mut rng, config.gap_cap, |_, _| {})?;
        summary.time.push(w);
        summary.shocks.push(n as f64);
        *summary.counts.entry(n).or_insert(0) += 1;
        summary.histogram.push(w);
        if run < config.retained_samples as u64 {
            summary.samples.push(w);
        }
    }
    Ok(summary)
}

/// Simulates `config.runs` independent systems.
pub fn run_batch(model: &ShockModel, config: &SimulationConfig) -> Result<SimulationReport> {
    config.validate()?;
    let upper = match config.histogram.upper {
        Some(u) => u,
        None => {
            let m = model.failure_moments()?;
            m.mean + 10.0 * m.std_dev()
        }
    };
    let template = Histogram::new(0.0, upper, config.histogram.bins);
    let chunks = config.runs.div_ceil(CHUNK_SIZE);
    let results = exec::map_indexed(chunks as usize, config.workers, |c| {
        run_chunk(model, config, c as u64, &template)
    });

    let mut time = RunningMoments::new();
    let mut shocks = RunningMoments::new();
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    let mut histogram = template.clone();
    let mut samples = Vec::with_capacity(config.runs.min(config.retained_samples as u64) as usize);
    for result in results {
        let chunk = result?;
        time.merge(&chunk.time);
        shocks.merge(&chunk.shocks);
        for (n, c) in chunk.counts {
            *counts.entry(n).or_insert(0) += c;
        }
        histogram.merge(&chunk.histogram);
        samples.extend(chunk.samples);
    }
    samples.sort_by(f64::total_cmp);

    Ok(SimulationReport {
        runs: config.runs,
        seed: config.seed,
        mean: time.mean,
        variance: time.variance(),
        std_error_mean: time.std_error_mean(),
        std_error_variance: time.std_error_variance(),
        shock_count_mean: shocks.mean,
        shock_count_variance: shocks.variance(),
        shock_counts: counts.into_iter().collect(),
        histogram,
        samples,
    })
}

/// Lethal and non-lethal gap lengths, at least `per_class` of each.
#[derive(Debug, Clone, PartialEq)]
pub struct GapSample {
    pub lethal: Vec<f64>,
    pub nonlethal: Vec<f64>,
}

/// Simulates systems until both gap classes hold `per_class` values; a class
/// that cannot occur (probability zero) is left short. Both vectors are
/// sorted and truncated to `per_class`.
pub fn collect_gaps(model: &ShockModel, seed: u64, per_class: usize) -> Result<GapSample> {
    let mut rng = rng::stream(seed, GAP_STREAM);
    let mut lethal = Vec::with_capacity(per_class);
    let mut nonlethal = Vec::with_capacity(per_class);
    let q = model.survival_prob();
    let need_nonlethal = if q > 0.0 { per_class } else { 0 };
    while lethal.len() < per_class || nonlethal.len() < need_nonlethal {
        simulate_path(model, &mut rng, DEFAULT_GAP_CAP, |gap, is_lethal| {
            if is_lethal {
                lethal.push(gap);
            } else {
                nonlethal.push(gap);
            }
        })?;
    }
    for v in [&mut lethal, &mut nonlethal] {
        v.truncate(per_class);
        v.sort_by(f64::total_cmp);
    }
    Ok(GapSample { lethal, nonlethal })
}

/// Lengths `S_1, …, S_k` of the segments between successive lethal shocks
/// (the first measured from `t = 0`) for `runs` systems.
pub fn segment_lengths(model: &ShockModel, seed: u64, runs: usize) -> Result<Vec<Vec<f64>>> {
    let mut rng = rng::stream(seed, SEGMENT_STREAM);
    let mut out = Vec::with_capacity(runs);
    for _ in 0..runs {
        let mut segments = Vec::with_capacity(model.k() as usize);
        let mut current = 0.0;
        simulate_path(model, &mut rng, DEFAULT_GAP_CAP, |gap, is_lethal| {
            current += gap;
            if is_lethal {
                segments.push(current);
                current = 0.0;
            }
        })?;
        out.push(segments);
    }
    Ok(out)
}

/// Pooled lag-1 correlation of successive segment lengths.
pub fn segment_lag1_correlation(segments: &[Vec<f64>]) -> f64 {
    let pairs: Vec<(f64, f64)> = segments
        .iter()
        .flat_map(|s| s.windows(2).map(|w| (w[0], w[1])))
        .collect();
    stats::correlation(&pairs)
}
