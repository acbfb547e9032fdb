//! Report records. Every cell carries its replicate count, seed and model digest.

use serde::{Deserialize, Serialize};

use crate::environment::{EnvMoments, EnvironmentConfig};
use crate::inference::CiMethod;
use crate::simulator::SimCaps;
use crate::stats::TailSide;

use super::ExperimentPlan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTag {
    pub m: usize,
    pub seed: u64,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub replicates: usize,
    pub model_id: String,
    pub environment: EnvironmentConfig,
    pub moments: EnvMoments,
    pub caps: SimCaps,
    pub observed_generations: Vec<usize>,
    pub exact_upto_min: usize,
    pub exact_upto_max: usize,
    pub gaussian_resamples: u64,
    pub plan: ExperimentPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub section: String,
    pub n0: usize,
    pub n: usize,
    pub detail: String,
    pub reason: String,
}

/// Least-squares fit of ln y on ln n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// None with fewer than three points.
    pub slope_se: Option<f64>,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsCell {
    pub n0: usize,
    pub n: usize,
    #[serde(flatten)]
    pub tag: CellTag,
    pub ks: f64,
    pub envelope: f64,
    pub within_envelope: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsDecay {
    pub n0: usize,
    pub fit: Option<LogLogFit>,
    pub slope_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityRow {
    pub n: usize,
    pub max_ks: f64,
    pub max_n0: usize,
    pub min_ks: f64,
    pub min_n0: usize,
    pub ratio: f64,
    pub within_tolerance: bool,
}

/// KS of the plug-in sample Φ⁻¹((i − ½)/M): the floor 1/(2M).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsControl {
    pub m: usize,
    pub ks: f64,
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerryEsseenSection {
    pub cells: Vec<KsCell>,
    pub decay: Vec<KsDecay>,
    pub pooled: Option<LogLogFit>,
    pub uniformity: Vec<UniformityRow>,
    pub control: KsControl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCell {
    pub n0: usize,
    pub n: usize,
    pub x: f64,
    pub side: TailSide,
    #[serde(flatten)]
    pub tag: CellTag,
    pub hits: usize,
    pub ratio: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailConvergence {
    pub n0: usize,
    pub x: f64,
    pub side: TailSide,
    pub n: Vec<usize>,
    pub deviation: Vec<f64>,
    pub decreasing: bool,
    pub final_within_band: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRatioSection {
    pub cells: Vec<TailCell>,
    pub convergence: Vec<TailConvergence>,
    pub skipped: Vec<SkippedCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpCell {
    pub n0: usize,
    pub n: usize,
    pub t: f64,
    pub a_n: f64,
    #[serde(flatten)]
    pub tag: CellTag,
    pub hits: usize,
    pub probability: f64,
    /// (1/a_n²) ln P̂(Z_{n0,n} / a_n ≥ t)
    pub y: f64,
    pub target: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpTrend {
    pub n0: usize,
    pub t: f64,
    pub n: Vec<usize>,
    pub y: Vec<f64>,
    pub monotone_approach: bool,
    pub final_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpSection {
    pub a_exponent: f64,
    pub cells: Vec<MdpCell>,
    pub trends: Vec<MdpTrend>,
    pub skipped: Vec<SkippedCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub n0: usize,
    pub n: usize,
    pub kappa: f64,
    pub method: CiMethod,
    #[serde(flatten)]
    pub tag: CellTag,
    pub nominal: f64,
    pub delta_n: f64,
    pub coverage: f64,
    pub se: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSection {
    pub mu: f64,
    pub sigma: f64,
    pub cells: Vec<CoverageCell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeKind {
    /// E W_N^{-a}
    Harmonic { a: f64 },
    /// E |ln W_N|^p
    LogAbs { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeCell {
    pub probe: ProbeKind,
    pub burn_in: usize,
    #[serde(flatten)]
    pub tag: CellTag,
    pub estimate: f64,
    pub se: f64,
    /// Largest single-replicate share of the summed values.
    pub top_share: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSection {
    pub cells: Vec<ProbeCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Option<Provenance>,
    pub berry_esseen: Option<BerryEsseenSection>,
    pub tail_ratio: Option<TailRatioSection>,
    pub mdp: Option<MdpSection>,
    pub coverage: Option<CoverageSection>,
    pub probes: Option<ProbeSection>,
}

impl ExperimentReport {
    pub fn empty() -> Self {
        Self {
            provenance: None,
            berry_esseen: None,
            tail_ratio: None,
            mdp: None,
            coverage: None,
            probes: None,
        }
    }

    /// Skipped cells across all sections.
    pub fn skipped(&self) -> Vec<&SkippedCell> {
        let tail = self.tail_ratio.iter().flat_map(|s| &s.skipped);
        let mdp = self.mdp.iter().flat_map(|s| &s.skipped);
        tail.chain(mdp).collect()
    }
}
