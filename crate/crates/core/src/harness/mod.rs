//! Monte Carlo campaigns that check the normal approximation of Z_{n0,n}.
//!
//! A [`Campaign`] simulates one batch of replicates covering every generation
//! the requested sections need and derives all sections from it. The whole
//! report is a pure function of the plan (including its master seed): worker
//! count and scheduling do not affect any output.

mod batch;
pub mod emit;
mod plan;
mod report;
mod svg;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

pub use batch::Batch;
pub use emit::{write_report, ReportFormat};
pub use plan::{ExperimentPlan, MdpSettings, ProbeSettings, Tolerances, MIN_REPLICATES};
pub use report::*;
use serde::{Deserialize, Serialize};

use crate::environment::EnvMoments;
use crate::error::{Error, Result};
use crate::inference::CiMethod;
use crate::stats::{
    ks_distance, normal_quantile, standardize_increment, tail_ratio, StandardizedSample, TailSide,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    BerryEsseen,
    TailRatio,
    Mdp,
    Coverage,
    Probes,
}

impl Section {
    pub const ALL: [Section; 5] = [
        Section::BerryEsseen,
        Section::TailRatio,
        Section::Mdp,
        Section::Coverage,
        Section::Probes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Section::BerryEsseen => "berry_esseen",
            Section::TailRatio => "tail_ratio",
            Section::Mdp => "mdp",
            Section::Coverage => "coverage",
            Section::Probes => "probes",
        }
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Section {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Section::ALL
            .into_iter()
            .find(|sec| sec.name() == s.replace('-', "_"))
            .ok_or_else(|| Error::Domain(format!("unknown section {s:?}")))
    }
}

pub struct Campaign<'p> {
    plan: &'p ExperimentPlan,
    sections: BTreeSet<Section>,
    moments: EnvMoments,
    model_id: String,
    batch: Batch,
}

impl<'p> Campaign<'p> {
    /// Validates the plan and simulates the replicate batch for `sections`.
    pub fn run(plan: &'p ExperimentPlan, sections: &[Section]) -> Result<Self> {
        plan.validate()?;
        let moments = plan.model.moments()?;
        let sections: BTreeSet<Section> = sections.iter().copied().collect();
        let mut observe = BTreeSet::new();
        for section in &sections {
            match section {
                Section::BerryEsseen | Section::TailRatio | Section::Coverage => {
                    for &n0 in &plan.n0_grid {
                        observe.insert(n0);
                        observe.extend(plan.n_grid.iter().map(|&n| n0 + n));
                    }
                }
                Section::Mdp => {
                    observe.insert(plan.mdp.n0);
                    observe.extend(plan.mdp.n_grid.iter().map(|&n| plan.mdp.n0 + n));
                }
                Section::Probes => {
                    observe.insert(plan.probes.burn_in);
                }
            }
        }
        let batch = Batch::simulate(
            &plan.model,
            &plan.caps,
            plan.master_seed,
            plan.replicates,
            observe,
        )?;
        Ok(Self {
            plan,
            sections,
            moments,
            model_id: plan.model.model_id(),
            batch,
        })
    }

    pub fn moments(&self) -> &EnvMoments {
        &self.moments
    }

    pub fn batch(&self) -> &Batch {
        &self.batch
    }

    fn tag(&self) -> CellTag {
        CellTag {
            m: self.plan.replicates,
            seed: self.plan.master_seed,
            model_id: self.model_id.clone(),
        }
    }

    /// Replicate values of Z_{n0,n}.
    pub fn standardized(&self, n0: usize, n: usize) -> Result<StandardizedSample> {
        let (mu, sigma) = (self.moments.mu, self.moments.sigma());
        let values = self
            .batch
            .increments(n0, n)?
            .into_iter()
            .map(|inc| standardize_increment(inc, n, mu, sigma))
            .collect();
        StandardizedSample::new(
            values,
            n0,
            n,
            mu,
            sigma,
            self.plan.master_seed,
            self.model_id.clone(),
        )
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            master_seed: self.plan.master_seed,
            replicates: self.plan.replicates,
            model_id: self.model_id.clone(),
            environment: self.plan.model.to_config(),
            moments: self.moments,
            caps: self.plan.caps,
            observed_generations: self.batch.observed().to_vec(),
            exact_upto_min: self.batch.min_exact_upto(),
            exact_upto_max: self.batch.max_exact_upto(),
            gaussian_resamples: self.batch.total_resamples(),
            plan: self.plan.clone(),
        }
    }

    pub fn berry_esseen(&self) -> Result<BerryEsseenSection> {
        let tol = &self.plan.tolerances;
        let mut n_grid = self.plan.n_grid.clone();
        n_grid.sort_unstable();
        let mut cells = Vec::new();
        for &n0 in &self.plan.n0_grid {
            for &n in &n_grid {
                let ks = ks_distance(&self.standardized(n0, n)?);
                let envelope = tol.envelope_c * (n as f64).powf(-tol.envelope_exponent);
                cells.push(KsCell {
                    n0,
                    n,
                    tag: self.tag(),
                    ks,
                    envelope,
                    within_envelope: ks <= envelope,
                });
            }
        }
        let decay = self
            .plan
            .n0_grid
            .iter()
            .map(|&n0| {
                let pts: Vec<(f64, f64)> = cells
                    .iter()
                    .filter(|c| c.n0 == n0)
                    .map(|c| (c.n as f64, c.ks))
                    .collect();
                let fit = log_log_fit(&pts);
                let slope_ok = fit
                    .as_ref()
                    .is_some_and(|f| (f.slope - tol.slope_target).abs() <= tol.slope_tolerance);
                KsDecay { n0, fit, slope_ok }
            })
            .collect();
        let pooled = log_log_fit(&cells.iter().map(|c| (c.n as f64, c.ks)).collect::<Vec<_>>());
        let uniformity = n_grid
            .iter()
            .map(|&n| {
                let row: Vec<&KsCell> = cells.iter().filter(|c| c.n == n).collect();
                let max = row
                    .iter()
                    .copied()
                    .max_by(|a, b| a.ks.total_cmp(&b.ks))
                    .expect("n0 grid non-empty");
                let min = row
                    .iter()
                    .copied()
                    .min_by(|a, b| a.ks.total_cmp(&b.ks))
                    .expect("n0 grid non-empty");
                let ratio = max.ks / min.ks;
                UniformityRow {
                    n,
                    max_ks: max.ks,
                    max_n0: max.n0,
                    min_ks: min.ks,
                    min_n0: min.n0,
                    ratio,
                    within_tolerance: ratio <= tol.uniformity_max_ratio,
                }
            })
            .collect();
        Ok(BerryEsseenSection {
            cells,
            decay,
            pooled,
            uniformity,
            control: ks_control(self.plan.replicates)?,
        })
    }

    pub fn tail_ratio(&self) -> Result<TailRatioSection> {
        let band = self.plan.tolerances.tail_ratio_band;
        let mut n_grid = self.plan.n_grid.clone();
        n_grid.sort_unstable();
        let mut cells = Vec::new();
        let mut skipped = Vec::new();
        for &n0 in &self.plan.n0_grid {
            for &n in &n_grid {
                let sample = self.standardized(n0, n)?;
                for &x in &self.plan.x_grid {
                    for side in [TailSide::Upper, TailSide::Lower] {
                        match tail_ratio(&sample, x, side) {
                            Ok(r) => cells.push(TailCell {
                                n0,
                                n,
                                x,
                                side,
                                tag: self.tag(),
                                hits: r.hits,
                                ratio: r.ratio,
                                se: r.se,
                            }),
                            Err(e @ Error::InsufficientTail { .. }) => skipped.push(SkippedCell {
                                section: Section::TailRatio.to_string(),
                                n0,
                                n,
                                detail: format!("x={x} side={side:?}"),
                                reason: e.to_string(),
                            }),
                            Err(e) => return Err(e),
                        }
                    }
                }
            }
        }
        let mut convergence = Vec::new();
        for &n0 in &self.plan.n0_grid {
            for &x in &self.plan.x_grid {
                for side in [TailSide::Upper, TailSide::Lower] {
                    let series: Vec<&TailCell> = cells
                        .iter()
                        .filter(|c| c.n0 == n0 && c.x == x && c.side == side)
                        .collect();
                    if series.is_empty() {
                        continue;
                    }
                    let deviation: Vec<f64> =
                        series.iter().map(|c| (c.ratio - 1.0).abs()).collect();
                    convergence.push(TailConvergence {
                        n0,
                        x,
                        side,
                        n: series.iter().map(|c| c.n).collect(),
                        decreasing: deviation.len() >= 2
                            && deviation.windows(2).all(|w| w[1] < w[0]),
                        final_within_band: deviation.last().is_some_and(|&d| d <= band),
                        deviation,
                    });
                }
            }
        }
        Ok(TailRatioSection {
            cells,
            convergence,
            skipped,
        })
    }

    pub fn mdp(&self) -> Result<MdpSection> {
        let settings = &self.plan.mdp;
        let mut n_grid = settings.n_grid.clone();
        n_grid.sort_unstable();
        let m = self.plan.replicates as f64;
        let mut cells = Vec::new();
        let mut skipped = Vec::new();
        for &n in &n_grid {
            let sample = self.standardized(settings.n0, n)?;
            let a_n = (n as f64).powf(settings.a_exponent);
            for &t in &settings.t_grid {
                let hits = sample.values.iter().filter(|&&v| v / a_n >= t).count();
                if hits == 0 {
                    skipped.push(SkippedCell {
                        section: Section::Mdp.to_string(),
                        n0: settings.n0,
                        n,
                        detail: format!("t={t}"),
                        reason: "no replicate reached the threshold".into(),
                    });
                    continue;
                }
                let probability = hits as f64 / m;
                let y = probability.ln() / (a_n * a_n);
                let target = -t * t / 2.0;
                cells.push(MdpCell {
                    n0: settings.n0,
                    n,
                    t,
                    a_n,
                    tag: self.tag(),
                    hits,
                    probability,
                    y,
                    target,
                    gap: y - target,
                });
            }
        }
        let trends = settings
            .t_grid
            .iter()
            .map(|&t| {
                let series: Vec<&MdpCell> = cells.iter().filter(|c| c.t == t).collect();
                let gaps: Vec<f64> = series.iter().map(|c| c.gap.abs()).collect();
                MdpTrend {
                    n0: settings.n0,
                    t,
                    n: series.iter().map(|c| c.n).collect(),
                    y: series.iter().map(|c| c.y).collect(),
                    monotone_approach: gaps.len() >= 2 && gaps.windows(2).all(|w| w[1] < w[0]),
                    final_gap: series.last().map(|c| c.gap),
                }
            })
            .collect();
        Ok(MdpSection {
            a_exponent: settings.a_exponent,
            cells,
            trends,
            skipped,
        })
    }

    pub fn coverage(&self) -> Result<CoverageSection> {
        let tol = &self.plan.tolerances;
        let (mu, sigma) = (self.moments.mu, self.moments.sigma());
        let m = self.plan.replicates as f64;
        let mut cells = Vec::new();
        for &n0 in &self.plan.n0_grid {
            for &n in &self.plan.n_grid {
                let increments = self.batch.increments(n0, n)?;
                for &kappa in &self.plan.kappa_grid {
                    for method in [CiMethod::NormalQuantile, CiMethod::MdpWidth] {
                        let delta_n = sigma / (n as f64).sqrt() * method.width_constant(kappa)?;
                        let covered = increments
                            .iter()
                            .filter(|&&inc| (inc / n as f64 - mu).abs() <= delta_n)
                            .count();
                        let coverage = covered as f64 / m;
                        let nominal = 1.0 - kappa;
                        let pass = match method {
                            CiMethod::NormalQuantile => {
                                (coverage - nominal).abs() <= tol.coverage_band
                            }
                            CiMethod::MdpWidth if nominal + tol.mdp_coverage_margin < 1.0 => {
                                coverage >= nominal + tol.mdp_coverage_margin
                            }
                            CiMethod::MdpWidth => coverage >= nominal,
                        };
                        cells.push(CoverageCell {
                            n0,
                            n,
                            kappa,
                            method,
                            tag: self.tag(),
                            nominal,
                            delta_n,
                            coverage,
                            se: (coverage * (1.0 - coverage) / m).sqrt(),
                            pass,
                        });
                    }
                }
            }
        }
        Ok(CoverageSection { mu, sigma, cells })
    }

    pub fn probes(&self) -> Result<ProbeSection> {
        let settings = &self.plan.probes;
        let ln_w = self.batch.ln_w(settings.burn_in)?;
        let kinds = settings
            .a_grid
            .iter()
            .map(|&a| ProbeKind::Harmonic { a })
            .chain(settings.p_grid.iter().map(|&p| ProbeKind::LogAbs { p }));
        let cells = kinds
            .map(|probe| {
                let values: Vec<f64> = ln_w
                    .iter()
                    .map(|&lw| match probe {
                        ProbeKind::Harmonic { a } => (-a * lw).exp(),
                        ProbeKind::LogAbs { p } => lw.abs().powf(p),
                    })
                    .collect();
                let (estimate, se) = mean_and_se(&values);
                let total: f64 = values.iter().sum();
                let top = values.iter().copied().fold(0.0, f64::max);
                let top_share = if total > 0.0 { top / total } else { 0.0 };
                ProbeCell {
                    probe,
                    burn_in: settings.burn_in,
                    tag: self.tag(),
                    estimate,
                    se,
                    top_share,
                    stable: estimate.is_finite() && top_share < self.plan.tolerances.top_share_max,
                }
            })
            .collect();
        Ok(ProbeSection { cells })
    }

    /// Report with every section the campaign was run for.
    pub fn report(&self) -> Result<ExperimentReport> {
        let has = |s| self.sections.contains(&s);
        Ok(ExperimentReport {
            provenance: Some(self.provenance()),
            berry_esseen: has(Section::BerryEsseen)
                .then(|| self.berry_esseen())
                .transpose()?,
            tail_ratio: has(Section::TailRatio)
                .then(|| self.tail_ratio())
                .transpose()?,
            mdp: has(Section::Mdp).then(|| self.mdp()).transpose()?,
            coverage: has(Section::Coverage)
                .then(|| self.coverage())
                .transpose()?,
            probes: has(Section::Probes).then(|| self.probes()).transpose()?,
        })
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// OLS of ln y on ln x. None if fewer than two points or any y <= 0.
pub fn log_log_fit(points: &[(f64, f64)]) -> Option<LogLogFit> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return None;
    }
    let k = points.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = (points.len() > 2).then(|| {
        let ssr: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (ssr / (k - 2.0) / sxx).sqrt()
    });
    Some(LogLogFit {
        slope,
        intercept,
        slope_se,
        points: points.len(),
    })
}

fn ks_control(m: usize) -> Result<KsControl> {
    let values = (1..=m)
        .map(|i| normal_quantile((i as f64 - 0.5) / m as f64))
        .collect::<Result<Vec<_>>>()?;
    Ok(KsControl {
        m,
        ks: crate::stats::ks_distance_values(&values),
        floor: 0.5 / m as f64,
    })
}

pub fn run_campaign(plan: &ExperimentPlan, sections: &[Section]) -> Result<ExperimentReport> {
    Campaign::run(plan, sections)?.report()
}

pub fn run_berry_esseen(plan: &ExperimentPlan) -> Result<BerryEsseenSection> {
    Campaign::run(plan, &[Section::BerryEsseen])?.berry_esseen()
}

pub fn run_tail_ratio(plan: &ExperimentPlan) -> Result<TailRatioSection> {
    Campaign::run(plan, &[Section::TailRatio])?.tail_ratio()
}

pub fn run_mdp(plan: &ExperimentPlan, a_exponent: f64, t_grid: &[f64]) -> Result<MdpSection> {
    let mut plan = plan.clone();
    plan.mdp.a_exponent = a_exponent;
    plan.mdp.t_grid = t_grid.to_vec();
    Campaign::run(&plan, &[Section::Mdp])?.mdp()
}

pub fn run_coverage(plan: &ExperimentPlan) -> Result<CoverageSection> {
    Campaign::run(plan, &[Section::Coverage])?.coverage()
}

pub fn run_w_moment_probes(
    plan: &ExperimentPlan,
    a_grid: &[f64],
    p_grid: &[f64],
    burn_in: usize,
) -> Result<ProbeSection> {
    let mut plan = plan.clone();
    plan.probes = ProbeSettings {
        a_grid: a_grid.to_vec(),
        p_grid: p_grid.to_vec(),
        burn_in,
    };
    Campaign::run(&plan, &[Section::Probes])?.probes()
}
