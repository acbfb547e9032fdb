//! BPRE trajectories in log space.
//!
//! Z is carried as an exact integer while it stays at or below
//! `SimCaps::exact_cap`. Past the cap each generation advances ln Z by the CLT
//! increment ln m + ln(1 + G·√(v/(Z m²))), where m and v are the mean and
//! variance of the drawn offspring law and G is standard normal. The
//! associated random walk S advances by ln m in both regimes.

use serde::{Deserialize, Serialize};

use crate::environment::{DrawnLaw, EnvironmentModel};
use crate::error::{Error, Result};
use crate::rng::{RandomStream, ReplicateStreams};

pub const DEFAULT_EXACT_CAP: u64 = 1 << 52;
pub const MIN_EXACT_CAP: u64 = 1 << 20;
pub const DEFAULT_MAX_GENERATIONS: usize = 1 << 16;

/// Bound on |G| for the normal sampler in use (its ziggurat tail cannot
/// exceed ~15 from 53-bit uniforms).
const NORMAL_ABS_BOUND: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimCaps {
    pub exact_cap: u64,
    pub max_generations: usize,
}

impl Default for SimCaps {
    fn default() -> Self {
        Self {
            exact_cap: DEFAULT_EXACT_CAP,
            max_generations: DEFAULT_MAX_GENERATIONS,
        }
    }
}

impl SimCaps {
    pub fn with_exact_cap(exact_cap: u64) -> Self {
        Self {
            exact_cap,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.exact_cap < MIN_EXACT_CAP {
            return Err(Error::ParameterDomain(format!(
                "exact_cap {} below minimum 2^20",
                self.exact_cap
            )));
        }
        Ok(())
    }
}

/// One realized path. `ln_w[k] = ln_z[k] - s[k]` for every k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n_total: usize,
    pub ln_z: Vec<f64>,
    pub s: Vec<f64>,
    pub ln_w: Vec<f64>,
    /// Last generation whose Z was an exact integer.
    pub exact_upto: usize,
    pub gaussian_resamples: u64,
    pub seed: u64,
    pub replicate: u64,
    pub model_id: String,
}

impl Trajectory {
    /// ln(Z_{n0+n} / Z_{n0}).
    pub fn increment_log_ratio(&self, n0: usize, n: usize) -> Result<f64> {
        if n < 1 {
            return Err(Error::Domain("increment length n must be >= 1".into()));
        }
        let end = n0
            .checked_add(n)
            .filter(|&e| e <= self.n_total)
            .ok_or_else(|| {
                Error::Domain(format!(
                    "n0 + n = {n0} + {n} exceeds n_total = {}",
                    self.n_total
                ))
            })?;
        Ok(self.ln_z[end] - self.ln_z[n0])
    }

    /// W_{n0,n} = W_{n0+n} / W_{n0}.
    pub fn martingale_ratio(&self, n0: usize, n: usize) -> Result<f64> {
        self.increment_log_ratio(n0, n)?;
        Ok((self.ln_w[n0 + n] - self.ln_w[n0]).exp())
    }
}

/// Running state of one replicate.
#[derive(Debug, Clone)]
pub struct Population {
    exact: Option<u64>,
    ln_z: f64,
    s: f64,
    generation: usize,
    exact_upto: usize,
    resamples: u64,
}

impl Default for Population {
    fn default() -> Self {
        Self {
            exact: Some(1),
            ln_z: 0.0,
            s: 0.0,
            generation: 0,
            exact_upto: 0,
            resamples: 0,
        }
    }
}

impl Population {
    pub fn ln_z(&self) -> f64 {
        self.ln_z
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn ln_w(&self) -> f64 {
        self.ln_z - self.s
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn exact_upto(&self) -> usize {
        self.exact_upto
    }

    pub fn resamples(&self) -> u64 {
        self.resamples
    }

    /// Advances one generation.
    pub fn step(
        &mut self,
        model: &EnvironmentModel,
        caps: &SimCaps,
        streams: &mut ReplicateStreams,
    ) -> Result<()> {
        let drawn = model.draw(&mut streams.environment);
        self.generation += 1;
        self.s += drawn.ln_mean;
        if let Some(z) = self.exact {
            match drawn.law.sample_sum(z, &mut streams.offspring) {
                Ok(next) => {
                    self.ln_z = (next as f64).ln();
                    self.exact_upto = self.generation;
                    self.exact = (next <= caps.exact_cap).then_some(next);
                    return Ok(());
                }
                Err(Error::CapExceeded(_)) => self.exact = None,
                Err(e) => return Err(e),
            }
        }
        self.gaussian_step(&drawn, &mut streams.offspring);
        Ok(())
    }

    fn gaussian_step(&mut self, drawn: &DrawnLaw, rng: &mut RandomStream) {
        let base = self.ln_z + drawn.ln_mean;
        if drawn.variance == 0.0 {
            self.ln_z = base;
            return;
        }
        // relative sd of Z'/(Z m): sqrt(v / (Z m^2))
        let rel_sd = (0.5 * (drawn.variance.ln() - self.ln_z) - drawn.ln_mean).exp();
        let quarter_ulp = (base.next_up() - base) * 0.25;
        if rel_sd * NORMAL_ABS_BOUND < quarter_ulp {
            // No draw of G can move ln Z by a representable amount.
            self.ln_z = base;
            return;
        }
        loop {
            let eps = rng.standard_normal() * rel_sd;
            // Z' >= Z is certain for p0 = 0, so reject draws implying shrinkage.
            if eps > -1.0 && drawn.mean * (1.0 + eps) >= 1.0 {
                self.ln_z = (base + eps.ln_1p()).max(self.ln_z);
                return;
            }
            self.resamples += 1;
        }
    }
}

fn check_horizon(n_total: usize, caps: &SimCaps) -> Result<()> {
    caps.validate()?;
    if n_total < 1 {
        return Err(Error::Domain("n_total must be >= 1".into()));
    }
    if n_total > caps.max_generations {
        return Err(Error::Domain(format!(
            "n_total {n_total} exceeds max_generations {}",
            caps.max_generations
        )));
    }
    Ok(())
}

/// Simulates one replicate for `n_total` generations and keeps the full path.
pub fn simulate(
    model: &EnvironmentModel,
    n_total: usize,
    caps: &SimCaps,
    master_seed: u64,
    replicate: u64,
) -> Result<Trajectory> {
    check_horizon(n_total, caps)?;
    let mut streams = ReplicateStreams::new(master_seed, replicate);
    let mut pop = Population::default();
    let mut ln_z = Vec::with_capacity(n_total + 1);
    let mut s = Vec::with_capacity(n_total + 1);
    ln_z.push(0.0);
    s.push(0.0);
    for _ in 0..n_total {
        pop.step(model, caps, &mut streams)?;
        ln_z.push(pop.ln_z);
        s.push(pop.s);
    }
    let ln_w = ln_z.iter().zip(&s).map(|(z, s)| z - s).collect();
    Ok(Trajectory {
        n_total,
        ln_z,
        s,
        ln_w,
        exact_upto: pop.exact_upto,
        gaussian_resamples: pop.resamples,
        seed: master_seed,
        replicate,
        model_id: model.model_id(),
    })
}

/// Summary of a replicate simulated through [`simulate_observed`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunSummary {
    pub exact_upto: usize,
    pub gaussian_resamples: u64,
}

/// Simulates to the last entry of `observe` (sorted, ascending) and writes
/// ln Z and S at each observed generation into `ln_z_out` / `s_out`.
pub fn simulate_observed(
    model: &EnvironmentModel,
    caps: &SimCaps,
    streams: &mut ReplicateStreams,
    observe: &[usize],
    ln_z_out: &mut [f64],
    s_out: &mut [f64],
) -> Result<RunSummary> {
    debug_assert!(observe.windows(2).all(|w| w[0] < w[1]));
    debug_assert!(ln_z_out.len() == observe.len() && s_out.len() == observe.len());
    let Some(&horizon) = observe.last() else {
        return Ok(RunSummary::default());
    };
    if horizon > caps.max_generations {
        return Err(Error::Domain(format!(
            "horizon {horizon} exceeds max_generations {}",
            caps.max_generations
        )));
    }
    let mut pop = Population::default();
    for (i, &k) in observe.iter().enumerate() {
        while pop.generation < k {
            pop.step(model, caps, streams)?;
        }
        ln_z_out[i] = pop.ln_z;
        s_out[i] = pop.s;
    }
    Ok(RunSummary {
        exact_upto: pop.exact_upto,
        gaussian_resamples: pop.resamples,
    })
}
