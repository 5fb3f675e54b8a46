//! Streaming moments, histograms and Kolmogorov–Smirnov distances.

use serde::{Deserialize, Serialize};

/// α = 0.01 coefficient of the large-sample one-sample KS critical value.
pub const KS_COEFFICIENT_1PCT: f64 = 1.63;

/// One-pass mean and central moments up to order four, mergeable in any
/// grouping (pairwise update of Chan et al. / Pébay).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningMoments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl RunningMoments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.count as f64;
        self.count += 1;
        let n = self.count as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2 - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    pub fn merge(&mut self, other: &RunningMoments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let d4 = d2 * d2;

        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3 + other.m3 + d3 * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n;

        self.count += other.count;
        self.mean += delta * nb / n;
        self.m2 = m2;
        self.m3 = m3;
        self.m4 = m4;
    }

    /// Unbiased sample variance; `None` below two samples.
    pub fn variance(&self) -> Option<f64> {
        (self.count > 1).then(|| self.m2 / (self.count - 1) as f64)
    }

    pub fn std_error_mean(&self) -> Option<f64> {
        self.variance().map(|v| (v / self.count as f64).sqrt())
    }

    /// Large-sample standard error of the sample variance,
    /// `sqrt((μ₄ − σ⁴ (n−3)/(n−1)) / n)`.
    pub fn std_error_variance(&self) -> Option<f64> {
        if self.count < 4 {
            return None;
        }
        let n = self.count as f64;
        let sigma2 = self.m2 / n;
        let mu4 = self.m4 / n;
        let v = (mu4 - sigma2 * sigma2 * (n - 3.0) / (n - 1.0)) / n;
        Some(v.max(0.0).sqrt())
    }
}

/// Fixed-width histogram on `[lower, upper)` with an overflow counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lower: f64,
    pub upper: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(lower: f64, upper: f64, bins: usize) -> Self {
        Histogram {
            lower,
            upper,
            counts: vec![0; bins.max(1)],
            underflow: 0,
            overflow: 0,
        }
    }

    pub fn bin_width(&self) -> f64 {
        (self.upper - self.lower) / self.counts.len() as f64
    }

    pub fn push(&mut self, x: f64) {
        if x < self.lower {
            self.underflow += 1;
        } else if x >= self.upper {
            self.overflow += 1;
        } else {
            let last = self.counts.len() - 1;
            let i = ((x - self.lower) / self.bin_width()) as usize;
            self.counts[i.min(last)] += 1;
        }
    }

    pub fn merge(&mut self, other: &Histogram) {
        debug_assert_eq!(self.counts.len(), other.counts.len());
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    /// Density estimate at `x` (count / (total · width)); zero outside range.
    pub fn density(&self, x: f64) -> f64 {
        if x < self.lower || x >= self.upper || self.total() == 0 {
            return 0.0;
        }
        let i = (((x - self.lower) / self.bin_width()) as usize).min(self.counts.len() - 1);
        self.counts[i] as f64 / (self.total() as f64 * self.bin_width())
    }
}

/// `sup_x |F_n(x) − F(x)|` for sorted samples.
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Critical value of the one-sample KS statistic at α = 0.01.
pub fn ks_critical_1pct(n: usize) -> f64 {
    KS_COEFFICIENT_1PCT / (n as f64).sqrt()
}

/// Large-sample critical value `sqrt(−ln(α/2) / 2) / √n` at level `alpha`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(0.5 * alpha).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Right-continuous empirical cdf of sorted samples.
pub fn ecdf(sorted: &[f64], t: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    sorted.partition_point(|&x| x <= t) as f64 / sorted.len() as f64
}

/// Pearson correlation of paired samples.
pub fn correlation(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let (mx, my) = pairs
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x / n, b + y / n));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}
