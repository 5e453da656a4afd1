//! Randomized quasi-Monte Carlo: Halton points with Cranley-Patterson shifts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Largest dimension supported by the Halton generator.
pub const MAX_DIM: usize = PRIMES.len();

fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % b) as f64 * scale;
        index /= b;
        scale *= inv;
    }
    out
}

/// `replicates` independently shifted copies of the first `per_replicate`
/// Halton points in `dim` dimensions.
#[derive(Debug, Clone)]
pub struct RqmcDesign {
    dim: usize,
    per_replicate: usize,
    shifts: Vec<Vec<f64>>,
}

impl RqmcDesign {
    pub fn new(dim: usize, replicates: usize, per_replicate: usize, seed: u64) -> Result<Self> {
        if dim > MAX_DIM {
            return Err(Error::config(format!(
                "quasi-random design supports at most {MAX_DIM} dimensions, got {dim}"
            )));
        }
        if replicates == 0 || per_replicate == 0 {
            return Err(Error::config(
                "quasi-random design needs at least one point",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shifts = (0..replicates)
            .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
            .collect();
        Ok(Self {
            dim,
            per_replicate,
            shifts,
        })
    }

    /// Splits `total` points into `replicates` equal blocks.
    pub fn with_total(dim: usize, total: usize, replicates: usize, seed: u64) -> Result<Self> {
        let replicates = replicates.max(1).min(total.max(1));
        Self::new(dim, replicates, (total / replicates).max(1), seed)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn replicates(&self) -> usize {
        self.shifts.len()
    }

    pub fn per_replicate(&self) -> usize {
        self.per_replicate
    }

    pub fn total(&self) -> usize {
        self.replicates() * self.per_replicate
    }

    /// Writes point `k` of replicate `r` into `out`; coordinates lie in `(0, 1)`.
    pub fn point(&self, r: usize, k: usize, out: &mut [f64]) {
        let shift = &self.shifts[r];
        for (d, slot) in out.iter_mut().enumerate().take(self.dim) {
            let u = radical_inverse(k as u64 + 1, PRIMES[d]) + shift[d];
            let u = u - u.floor();
            *slot = u.clamp(1e-15, 1.0 - 1e-15);
        }
    }
}

/// Mean of replicate means and its standard error.
pub fn replicate_estimate(replicate_means: &[f64]) -> (f64, f64) {
    let r = replicate_means.len() as f64;
    let mean = replicate_means.iter().sum::<f64>() / r;
    if replicate_means.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = replicate_means
        .iter()
        .map(|m| (m - mean).powi(2))
        .sum::<f64>()
        / (r - 1.0);
    (mean, (var / r).sqrt())
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn estimates_a_smooth_integral() {
        let design = RqmcDesign::new(2, 16, 1024, 3).unwrap();
        let mut p = [0.0; 2];
        let means: Vec<f64> = (0..design.replicates())
            .map(|r| {
                (0..design.per_replicate())
                    .map(|k| {
                        design.point(r, k, &mut p);
                        p[0] * p[1]
                    })
                    .sum::<f64>()
                    / design.per_replicate() as f64
            })
            .collect();
        let (m, se) = replicate_estimate(&means);
        assert!((m - 0.25).abs() < 1e-3);
        assert!(se < 1e-3);
    }

    #[test]
    fn same_seed_same_points() {
        let a = RqmcDesign::new(3, 4, 8, 11).unwrap();
        let b = RqmcDesign::new(3, 4, 8, 11).unwrap();
        let (mut pa, mut pb) = ([0.0; 3], [0.0; 3]);
        a.point(2, 5, &mut pa);
        b.point(2, 5, &mut pb);
        assert_eq!(pa, pb);
    }
}
