//! Replicate batches: every replicate is simulated once to the largest
//! generation any section needs, and only the observed generations are kept.

use rayon::prelude::*;

use crate::environment::EnvironmentModel;
use crate::error::{Error, Result};
use crate::rng::ReplicateStreams;
use crate::simulator::{simulate_observed, RunSummary, SimCaps};

#[derive(Debug, Clone)]
pub struct Batch {
    observe: Vec<usize>,
    replicates: usize,
    ln_z: Vec<f64>,
    s: Vec<f64>,
    summaries: Vec<RunSummary>,
}

impl Batch {
    /// Replicate `r` uses the streams addressed by `(master_seed, r)`, so the
    /// result does not depend on how rayon schedules the work.
    pub fn simulate(
        model: &EnvironmentModel,
        caps: &SimCaps,
        master_seed: u64,
        replicates: usize,
        observe: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let mut observe: Vec<usize> = observe.into_iter().collect();
        observe.sort_unstable();
        observe.dedup();
        let k = observe.len();
        let mut ln_z = vec![0.0; replicates * k];
        let mut s = vec![0.0; replicates * k];
        let mut summaries = vec![RunSummary::default(); replicates];
        if k > 0 {
            ln_z.par_chunks_mut(k)
                .zip(s.par_chunks_mut(k))
                .zip(summaries.par_iter_mut())
                .enumerate()
                .try_for_each(|(r, ((z_out, s_out), summary))| -> Result<()> {
                    let mut streams = ReplicateStreams::new(master_seed, r as u64);
                    *summary =
                        simulate_observed(model, caps, &mut streams, &observe, z_out, s_out)?;
                    Ok(())
                })?;
        }
        Ok(Self {
            observe,
            replicates,
            ln_z,
            s,
            summaries,
        })
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn observed(&self) -> &[usize] {
        &self.observe
    }

    fn column(&self, generation: usize) -> Result<usize> {
        self.observe
            .binary_search(&generation)
            .map_err(|_| Error::Domain(format!("generation {generation} was not observed")))
    }

    /// ln(Z_{n0+n}/Z_{n0}) for every replicate.
    pub fn increments(&self, n0: usize, n: usize) -> Result<Vec<f64>> {
        let (a, b) = (self.column(n0)?, self.column(n0 + n)?);
        let k = self.observe.len();
        Ok(self
            .ln_z
            .chunks_exact(k)
            .map(|row| row[b] - row[a])
            .collect())
    }

    /// ln W_N = ln Z_N − S_N for every replicate.
    pub fn ln_w(&self, generation: usize) -> Result<Vec<f64>> {
        let c = self.column(generation)?;
        let k = self.observe.len();
        Ok(self
            .ln_z
            .chunks_exact(k)
            .zip(self.s.chunks_exact(k))
            .map(|(z, s)| z[c] - s[c])
            .collect())
    }

    pub fn ln_z(&self, generation: usize) -> Result<Vec<f64>> {
        let c = self.column(generation)?;
        Ok(self
            .ln_z
            .chunks_exact(self.observe.len())
            .map(|row| row[c])
            .collect())
    }

    pub fn s(&self, generation: usize) -> Result<Vec<f64>> {
        let c = self.column(generation)?;
        Ok(self
            .s
            .chunks_exact(self.observe.len())
            .map(|row| row[c])
            .collect())
    }

    pub fn summaries(&self) -> &[RunSummary] {
        &self.summaries
    }

    pub fn total_resamples(&self) -> u64 {
        self.summaries.iter().map(|s| s.gaussian_resamples).sum()
    }

    pub fn min_exact_upto(&self) -> usize {
        self.summaries
            .iter()
            .map(|s| s.exact_upto)
            .min()
            .unwrap_or(0)
    }

    pub fn max_exact_upto(&self) -> usize {
        self.summaries
            .iter()
            .map(|s| s.exact_upto)
            .max()
            .unwrap_or(0)
    }
}
