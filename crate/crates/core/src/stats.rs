//! Sample statistics shared by the Monte-Carlo code paths.

use crate::{Error, Result};

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_dev: f64,
    pub std_error: f64,
    pub count: usize,
}

impl Estimate {
    /// Builds the estimate from a sample. Needs at least two values for the
    /// standard error.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let mut acc = Accumulator::default();
        samples.iter().for_each(|&x| acc.push(x));
        acc.finish()
    }

    /// `|mean - target| <= sigmas * std_error`
    pub fn within_sigmas(&self, target: f64, sigmas: f64) -> bool {
        (self.mean - target).abs() <= sigmas * self.std_error
    }

    pub fn relative_error(&self, target: f64) -> f64 {
        ((self.mean - target) / target).abs()
    }
}

/// Welford accumulator. Summation order is the push order, so a fixed push
/// order gives bit-identical results.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn finish(&self) -> Result<Estimate> {
        if self.count < 2 {
            return Err(Error::Statistics(format!(
                "need at least 2 samples, got {}",
                self.count
            )));
        }
        let var = self.m2 / (self.count - 1) as f64;
        let std_dev = var.max(0.0).sqrt();
        Ok(Estimate {
            mean: self.mean,
            std_dev,
            std_error: std_dev / (self.count as f64).sqrt(),
            count: self.count,
        })
    }
}

/// Right-continuous empirical distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Statistics("empirical CDF of an empty sample".into()));
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::Statistics("NaN in CDF sample".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of samples `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let count = self.sorted.partition_point(|&s| s <= x);
        count as f64 / self.sorted.len() as f64
    }

    /// Smallest sample `s` with `cdf(s) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let p = p.clamp(0.0, 1.0);
        let idx = ((p * n as f64).ceil() as usize).clamp(1, n) - 1;
        self.sorted[idx]
    }

    /// `(value, cdf)` pairs at every sample point.
    pub fn steps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.sorted.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(move |(i, &v)| (v, (i + 1) as f64 / n))
    }

    /// Two-sample Kolmogorov-Smirnov statistic.
    pub fn ks_distance(&self, other: &EmpiricalCdf) -> f64 {
        self.sorted
            .iter()
            .chain(other.sorted.iter())
            .map(|&x| (self.cdf(x) - other.cdf(x)).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn cdf_small_sample() {
        let cdf = EmpiricalCdf::new(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(cdf.samples(), &[1.0, 2.0, 3.0]);
        assert!((cdf.cdf(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(cdf.cdf(0.5), 0.0);
        assert_eq!(cdf.cdf(3.0), 1.0);
        assert_eq!(cdf.quantile(0.5), 2.0);
    }

    #[test]
    fn cdf_constant_is_a_single_step() {
        let cdf = EmpiricalCdf::new(&[4.0; 5]).unwrap();
        assert_eq!(cdf.cdf(4.0 - 1e-12), 0.0);
        assert_eq!(cdf.cdf(4.0), 1.0);
    }

    #[test]
    fn cdf_rejects_empty() {
        assert!(EmpiricalCdf::new(&[]).is_err());
    }

    #[test]
    fn cdf_uniform_glivenko_cantelli() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let cdf = EmpiricalCdf::new(&xs).unwrap();
        // sup distance attained at the jump points
        let sup = cdf
            .steps()
            .enumerate()
            .map(|(i, (v, f))| (f - v).abs().max((v - i as f64 / xs.len() as f64).abs()))
            .fold(0.0, f64::max);
        assert!(sup < 0.01, "sup distance {sup}");
    }

    #[test]
    fn ks_identical_is_zero() {
        let a = EmpiricalCdf::new(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(a.ks_distance(&a), 0.0);
        let b = EmpiricalCdf::new(&[10.0, 11.0]).unwrap();
        assert_eq!(a.ks_distance(&b), 1.0);
    }

    #[test]
    fn estimate_needs_two_samples() {
        assert!(Estimate::from_samples(&[1.0]).is_err());
        let e = Estimate::from_samples(&[1.0, 3.0]).unwrap();
        assert_eq!(e.mean, 2.0);
        assert!((e.std_dev - 2f64.sqrt()).abs() < 1e-15);
    }
}
