use serde::{Deserialize, Serialize};

use crate::environment::EnvironmentModel;
use crate::error::{Error, Result};
use crate::simulator::SimCaps;

pub const MIN_REPLICATES: usize = 1_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    #[serde(rename = "environment")]
    pub model: EnvironmentModel,
    pub n_grid: Vec<usize>,
    pub n0_grid: Vec<usize>,
    pub replicates: usize,
    pub master_seed: u64,
    pub x_grid: Vec<f64>,
    pub kappa_grid: Vec<f64>,
    #[serde(default)]
    pub caps: SimCaps,
    #[serde(default)]
    pub mdp: MdpSettings,
    #[serde(default)]
    pub probes: ProbeSettings,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdpSettings {
    /// a_n = n^a_exponent.
    pub a_exponent: f64,
    pub t_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub n0: usize,
}

impl Default for MdpSettings {
    fn default() -> Self {
        Self {
            a_exponent: 0.25,
            t_grid: vec![0.5],
            n_grid: vec![256, 1024, 4096],
            n0: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSettings {
    /// Orders a of E W_N^{-a}.
    pub a_grid: Vec<f64>,
    /// Orders p of E |ln W_N|^p.
    pub p_grid: Vec<f64>,
    pub burn_in: usize,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            a_grid: vec![0.1],
            p_grid: vec![1.0],
            burn_in: 50,
        }
    }
}

/// Thresholds behind the pass/fail flags in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// KS(n) <= envelope_c * n^(-envelope_exponent)
    pub envelope_c: f64,
    pub envelope_exponent: f64,
    pub slope_target: f64,
    pub slope_tolerance: f64,
    /// max over n0 / min over n0 of KS at fixed n
    pub uniformity_max_ratio: f64,
    /// |ratio - 1| allowed at the largest n
    pub tail_ratio_band: f64,
    /// |coverage - (1 - kappa)| allowed for the normal-quantile interval
    pub coverage_band: f64,
    /// MDP-width coverage must reach 1 - kappa + mdp_coverage_margin
    pub mdp_coverage_margin: f64,
    /// Largest share of a moment estimate one replicate may contribute.
    pub top_share_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            envelope_c: 3.0,
            envelope_exponent: 0.35,
            slope_target: -0.5,
            slope_tolerance: 0.15,
            uniformity_max_ratio: 2.0,
            tail_ratio_band: 0.03,
            coverage_band: 0.02,
            mdp_coverage_margin: 0.02,
            top_share_max: 0.05,
        }
    }
}

impl ExperimentPlan {
    pub const DEFAULT_SEED: u64 = 20_240_611;

    /// The default campaign on the two-atom environment.
    pub fn default_campaign() -> Self {
        Self {
            model: EnvironmentModel::two_atom(),
            n_grid: vec![64, 256, 1024],
            n0_grid: vec![0, 1, 10, 100, 1000],
            replicates: 100_000,
            master_seed: Self::DEFAULT_SEED,
            x_grid: vec![0.0, 0.5, 1.0, 1.5, 2.0],
            kappa_grid: vec![0.05, 0.01],
            caps: SimCaps::default(),
            mdp: MdpSettings::default(),
            probes: ProbeSettings::default(),
            tolerances: Tolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPlan(m));
        self.model.validate_nondegenerate()?;
        self.caps.validate()?;
        if self.n_grid.is_empty()
            || self.n0_grid.is_empty()
            || self.x_grid.is_empty()
            || self.kappa_grid.is_empty()
        {
            return bad("n_grid, n0_grid, x_grid and kappa_grid must be non-empty".into());
        }
        if self.replicates < MIN_REPLICATES {
            return bad(format!(
                "replicates = {} below minimum {MIN_REPLICATES}",
                self.replicates
            ));
        }
        if self.n_grid.iter().chain(&self.mdp.n_grid).any(|&n| n == 0) {
            return bad("every n must be >= 1".into());
        }
        if self.x_grid.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return bad("x_grid entries must be finite and >= 0".into());
        }
        if self.kappa_grid.iter().any(|&k| !(k > 0.0 && k < 1.0)) {
            return bad("kappa_grid entries must lie in (0, 1)".into());
        }
        if !(self.mdp.a_exponent > 0.0 && self.mdp.a_exponent < 0.5) {
            return bad(format!(
                "mdp.a_exponent = {} outside (0, 0.5)",
                self.mdp.a_exponent
            ));
        }
        if self.mdp.t_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return bad("mdp.t_grid entries must be > 0".into());
        }
        if self.probes.burn_in == 0 {
            return bad("probes.burn_in must be >= 1".into());
        }
        if self
            .probes
            .a_grid
            .iter()
            .chain(&self.probes.p_grid)
            .any(|&a| !(a >= 0.0 && a.is_finite()))
        {
            return bad("probe orders must be finite and >= 0".into());
        }
        let horizon = self.max_horizon();
        if horizon > self.caps.max_generations {
            return bad(format!(
                "horizon {horizon} exceeds caps.max_generations {}",
                self.caps.max_generations
            ));
        }
        Ok(())
    }

    fn max_horizon(&self) -> usize {
        let main = self.n0_grid.iter().max().unwrap_or(&0) + self.n_grid.iter().max().unwrap_or(&0);
        let mdp = self.mdp.n0 + self.mdp.n_grid.iter().max().unwrap_or(&0);
        main.max(mdp).max(self.probes.burn_in)
    }
}
