//! Discrete samplers for very large parameters.
//!
//! Each sampler is exact (inversion or rejection, via `rand_distr`) while the
//! variance of the draw stays below [`NORMAL_SWITCH_VARIANCE`]; above it the
//! draw is a rounded normal with matching mean and variance. At a variance of
//! 2^40 the normal approximation is off by less than 1e-6 in Kolmogorov
//! distance.

use rand::{Rng, RngCore};
use rand_distr::{Binomial, Distribution, Gamma, Poisson, StandardNormal};

use crate::error::{Error, Result};

pub const NORMAL_SWITCH_VARIANCE: f64 = 1_099_511_627_776.0; // 2^40

/// Largest count any sampler returns.
pub const MAX_COUNT: f64 = 9_007_199_254_740_992.0 * 512.0; // 2^62

fn rounded_normal<R: RngCore + ?Sized>(
    mean: f64,
    variance: f64,
    upper: f64,
    rng: &mut R,
) -> Result<u64> {
    let g: f64 = rng.sample(StandardNormal);
    let x = (mean + variance.sqrt() * g).round().clamp(0.0, upper);
    to_count(x)
}

fn to_count(x: f64) -> Result<u64> {
    if !(x < MAX_COUNT) {
        return Err(Error::CapExceeded(format!("count {x:e} exceeds 2^62")));
    }
    Ok(x as u64)
}

pub fn poisson<R: RngCore + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(Error::ParameterDomain(format!("poisson mean {mean}")));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    if mean >= MAX_COUNT / 2.0 {
        return Err(Error::CapExceeded(format!("poisson mean {mean:e}")));
    }
    if mean < NORMAL_SWITCH_VARIANCE {
        let d = Poisson::new(mean).map_err(|e| Error::ParameterDomain(e.to_string()))?;
        to_count(d.sample(rng))
    } else {
        rounded_normal(mean, mean, f64::INFINITY, rng)
    }
}

pub fn binomial<R: RngCore + ?Sized>(trials: u64, q: f64, rng: &mut R) -> Result<u64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::ParameterDomain(format!("binomial probability {q}")));
    }
    if q == 0.0 || trials == 0 {
        return Ok(0);
    }
    if q == 1.0 {
        return Ok(trials);
    }
    let n = trials as f64;
    let variance = n * q * (1.0 - q);
    if variance < NORMAL_SWITCH_VARIANCE {
        let d = Binomial::new(trials, q).map_err(|e| Error::ParameterDomain(e.to_string()))?;
        Ok(d.sample(rng))
    } else {
        rounded_normal(n * q, variance, n, rng)
    }
}

/// Number of failures before the `successes`-th success in Bernoulli(p) trials.
pub fn negative_binomial_failures<R: RngCore + ?Sized>(
    successes: u64,
    p: f64,
    rng: &mut R,
) -> Result<u64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::ParameterDomain(format!(
            "negative binomial probability {p}"
        )));
    }
    if p == 1.0 || successes == 0 {
        return Ok(0);
    }
    let s = successes as f64;
    let mean = s * (1.0 - p) / p;
    let variance = mean / p;
    if mean >= MAX_COUNT / 2.0 {
        return Err(Error::CapExceeded(format!(
            "negative binomial mean {mean:e}"
        )));
    }
    if variance < NORMAL_SWITCH_VARIANCE {
        // Gamma-Poisson mixture.
        let rate =
            Gamma::new(s, (1.0 - p) / p).map_err(|e| Error::ParameterDomain(e.to_string()))?;
        poisson(rate.sample(rng), rng)
    } else {
        rounded_normal(mean, variance, f64::INFINITY, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RandomStream, StreamRole};

    fn moments(draws: &[u64]) -> (f64, f64) {
        let n = draws.len() as f64;
        let mean = draws.iter().map(|&x| x as f64).sum::<f64>() / n;
        let var = draws
            .iter()
            .map(|&x| (x as f64 - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn degenerate_parameters() {
        let mut rng = RandomStream::new(1, 0, StreamRole::Auxiliary);
        assert_eq!(poisson(0.0, &mut rng).unwrap(), 0);
        assert_eq!(binomial(17, 1.0, &mut rng).unwrap(), 17);
        assert_eq!(binomial(17, 0.0, &mut rng).unwrap(), 0);
        assert_eq!(negative_binomial_failures(5, 1.0, &mut rng).unwrap(), 0);
        assert!(poisson(-1.0, &mut rng).is_err());
        assert!(binomial(3, 1.5, &mut rng).is_err());
        assert!(negative_binomial_failures(3, 0.0, &mut rng).is_err());
    }

    #[test]
    fn normal_branch_moments() {
        let mut rng = RandomStream::new(2, 0, StreamRole::Auxiliary);
        let mean = 1e13;
        let draws: Vec<u64> = (0..20_000)
            .map(|_| poisson(mean, &mut rng).unwrap())
            .collect();
        let (m, v) = moments(&draws);
        let se = (mean / draws.len() as f64).sqrt();
        assert!((m - mean).abs() < 4.0 * se, "{m} vs {mean}");
        assert!((v / mean - 1.0).abs() < 0.05);

        let trials = 1u64 << 50;
        let draws: Vec<u64> = (0..20_000)
            .map(|_| binomial(trials, 0.5, &mut rng).unwrap())
            .collect();
        let (m, v) = moments(&draws);
        let var = trials as f64 * 0.25;
        assert!((m - trials as f64 * 0.5).abs() < 4.0 * (var / 20_000.0).sqrt());
        assert!((v / var - 1.0).abs() < 0.05);
    }

    #[test]
    fn exact_branch_moments() {
        let mut rng = RandomStream::new(3, 0, StreamRole::Auxiliary);
        let draws: Vec<u64> = (0..100_000)
            .map(|_| negative_binomial_failures(6, 0.3, &mut rng).unwrap())
            .collect();
        let (m, v) = moments(&draws);
        let mean = 6.0 * 0.7 / 0.3;
        let var = mean / 0.3;
        assert!((m - mean).abs() < 4.0 * (var / 1e5).sqrt(), "{m}");
        assert!((v / var - 1.0).abs() < 0.05, "{v}");
    }
}
