//! The standardized statistic Z_{n0,n} and functionals of its empirical law.

mod normal;

pub use normal::{normal_cdf, normal_pdf, normal_quantile, normal_sf};
use serde::{Deserialize, Serialize};

use crate::environment::EnvMoments;
use crate::error::{Error, Result};
use crate::simulator::Trajectory;

pub const MIN_TAIL_SAMPLE: usize = 1_000;
pub const MIN_EXPECTED_TAIL_HITS: f64 = 10.0;

/// Replicate draws of Z_{n0,n} for one (n0, n) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedSample {
    pub values: Vec<f64>,
    pub n0: usize,
    pub n: usize,
    pub mu: f64,
    pub sigma: f64,
    pub seed: u64,
    pub model_id: String,
}

impl StandardizedSample {
    pub fn new(
        values: Vec<f64>,
        n0: usize,
        n: usize,
        mu: f64,
        sigma: f64,
        seed: u64,
        model_id: String,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("standardized sample is empty".into()));
        }
        if !(sigma > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "sigma must be > 0, got {sigma}"
            )));
        }
        Ok(Self {
            values,
            n0,
            n,
            mu,
            sigma,
            seed,
            model_id,
        })
    }

    /// Wraps raw values with no provenance, e.g. a control sample.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(values, 0, 1, 0.0, 1.0, 0, String::new())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// (increment − nμ)/(σ√n).
#[inline]
pub fn standardize_increment(increment: f64, n: usize, mu: f64, sigma: f64) -> f64 {
    let n = n as f64;
    (increment - n * mu) / (sigma * n.sqrt())
}

/// Z_{n0,n} for one trajectory.
pub fn standardize(traj: &Trajectory, n0: usize, n: usize, moments: &EnvMoments) -> Result<f64> {
    if !(moments.sigma2 > 0.0) {
        return Err(Error::ParameterDomain("sigma2 must be > 0".into()));
    }
    let increment = traj.increment_log_ratio(n0, n)?;
    Ok(standardize_increment(
        increment,
        n,
        moments.mu,
        moments.sigma(),
    ))
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Exact one-sample Kolmogorov–Smirnov distance to Φ.
pub fn ks_distance(sample: &StandardizedSample) -> f64 {
    ks_distance_values(&sample.values)
}

pub fn ks_distance_values(values: &[f64]) -> f64 {
    let v = sorted(values);
    let m = v.len() as f64;
    v.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = normal_cdf(x);
        let above = (i + 1) as f64 / m - f;
        let below = f - i as f64 / m;
        d.max(above).max(below)
    })
}

/// Two-sample Kolmogorov–Smirnov distance between empirical laws.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailSide {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRatio {
    pub ratio: f64,
    pub se: f64,
    pub hits: usize,
}

/// Empirical tail probability divided by the normal tail at `x`.
///
/// Refuses cells where fewer than 10 tail hits are expected.
pub fn tail_ratio(sample: &StandardizedSample, x: f64, side: TailSide) -> Result<TailRatio> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("tail point must be >= 0, got {x}")));
    }
    let m = sample.len();
    let normal_tail = normal_sf(x);
    let expected = normal_tail * m as f64;
    if m < MIN_TAIL_SAMPLE || expected < MIN_EXPECTED_TAIL_HITS {
        return Err(Error::InsufficientTail {
            expected,
            required: MIN_EXPECTED_TAIL_HITS,
        });
    }
    let hits = match side {
        TailSide::Upper => sample.values.iter().filter(|&&v| v >= x).count(),
        TailSide::Lower => sample.values.iter().filter(|&&v| v <= -x).count(),
    };
    let p = hits as f64 / m as f64;
    Ok(TailRatio {
        ratio: p / normal_tail,
        se: (p * (1.0 - p) / m as f64).sqrt() / normal_tail,
        hits,
    })
}
