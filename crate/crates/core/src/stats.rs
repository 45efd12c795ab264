//! Sample statistics: streaming moments, batch-means standard errors and the
//! empirical CDF.

use serde::{Deserialize, Serialize};

/// Number of batches used for batch-means standard errors.
pub const BATCHES: usize = 100;

/// Welford accumulator with Chan's parallel merge.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningMoments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningMoments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        self.mean += delta * nb / n as f64;
        self.m2 += other.m2 + delta * delta * na * nb / n as f64;
        self.n = n;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for RunningMoments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = RunningMoments::default();
        iter.into_iter().for_each(|x| acc.push(x));
        acc
    }
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Standard error of the mean and of the variance from contiguous batches.
/// Falls back to i.i.d. formulas when there are too few samples to batch.
pub fn batch_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n < 2 * BATCHES {
        let acc: RunningMoments = samples.iter().copied().collect();
        let var = acc.variance();
        let m4 = if n > 1 {
            samples.iter().map(|x| (x - acc.mean).powi(4)).sum::<f64>() / n as f64
        } else {
            0.0
        };
        let var_se = if n > 1 {
            ((m4 - var * var).max(0.0) / n as f64).sqrt()
        } else {
            0.0
        };
        return (acc.stderr(), var_se);
    }
    let size = n / BATCHES;
    let mut means = RunningMoments::default();
    let mut vars = RunningMoments::default();
    for b in 0..BATCHES {
        let end = if b + 1 == BATCHES { n } else { (b + 1) * size };
        let acc: RunningMoments = samples[b * size..end].iter().copied().collect();
        means.push(acc.mean);
        vars.push(acc.variance());
    }
    (means.stderr(), vars.stderr())
}

/// Monte Carlo samples of one scalar, kept sorted for CDF queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    /// Batch-means standard error of the mean.
    pub stderr: f64,
    /// Batch-means standard error of the variance.
    pub variance_stderr: f64,
}

impl EmpiricalDistribution {
    /// `samples` must be in trial order; batches are formed before sorting.
    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        let (stderr, variance_stderr) = batch_stderr(&samples);
        let n = samples.len();
        let mut sum = CompensatedSum::default();
        samples.iter().for_each(|&x| sum.add(x));
        let mean = if n > 0 {
            sum.value() / n as f64
        } else {
            f64::NAN
        };
        let mut sq = CompensatedSum::default();
        samples
            .iter()
            .for_each(|&x| sq.add((x - mean) * (x - mean)));
        let variance = if n > 1 {
            sq.value() / (n - 1) as f64
        } else {
            0.0
        };
        samples.sort_by(f64::total_cmp);
        Self {
            samples,
            n,
            mean,
            variance,
            stderr,
            variance_stderr,
        }
    }

    pub fn sorted(&self) -> &[f64] {
        &self.samples
    }

    /// Fraction of samples `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        self.samples.partition_point(|&s| s <= x) as f64 / self.n as f64
    }

    /// Smallest sample `s` with `cdf(s) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        let rank = (p * self.n as f64).ceil() as usize;
        self.samples[rank.clamp(1, self.n) - 1]
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// `(value, cdf)` at every sample, i.e. the ECDF's jump points.
    pub fn steps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.n as f64;
        self.samples
            .iter()
            .enumerate()
            .map(move |(i, &x)| (x, (i + 1) as f64 / n))
    }
}
