//! iid random environments: one offspring law drawn independently per generation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::offspring::OffspringLaw;
use crate::rng::{RandomStream, StreamRole};

pub const PROB_SUM_TOLERANCE: f64 = 1e-12;
pub const MC_MOMENT_SAMPLES: usize = 1_000_000;
const MC_MOMENT_SEED: u64 = 0x6d6f_6d65_6e74_7321;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub law: OffspringLaw,
    pub prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ContinuousFamily {
    /// ShiftedPoisson(λ) with ln λ uniform on [ln λ_lo, ln λ_hi].
    LogUniformShiftedPoisson { lambda_lo: f64, lambda_hi: f64 },
}

/// Moment condition declared for a model. Not verified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capability {
    /// E exp(λ₀ X) < ∞ for some λ₀ > 0.
    A1,
    /// Sub-exponential moment with exponent 4γ/(1−2γ), γ ∈ (0, 1/6].
    A2 { gamma: f64 },
    /// E X^{2+ρ} < ∞.
    A3 { rho: f64 },
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Capability::A1 => write!(f, "A1"),
            Capability::A2 { gamma } => write!(f, "A2({gamma})"),
            Capability::A3 { rho } => write!(f, "A3({rho})"),
        }
    }
}

impl FromStr for Capability {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "A1" {
            return Ok(Capability::A1);
        }
        let bad = || Error::ParameterDomain(format!("unknown capability tag {s:?}"));
        let (tag, rest) = s.split_once('(').ok_or_else(bad)?;
        let value: f64 = rest
            .strip_suffix(')')
            .ok_or_else(bad)?
            .trim()
            .parse()
            .map_err(|_| bad())?;
        match tag.trim() {
            "A2" if value > 0.0 && value <= 1.0 / 6.0 + 1e-12 => {
                Ok(Capability::A2 { gamma: value })
            }
            "A3" if value > 0.0 => Ok(Capability::A3 { rho: value }),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Capability {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Capability {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    Atoms(Vec<Atom>),
    Continuous(ContinuousFamily),
}

/// On-disk form: `{atoms: [{law, prob}], capabilities: [...]}` or
/// `{continuous: {family, ...}, capabilities: [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<Atom>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuous: Option<ContinuousFamily>,
    #[serde(default)]
    pub capabilities: Vec<Capability>,
}

/// A law drawn for one generation, with the quantities the simulator needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrawnLaw {
    pub law: OffspringLaw,
    pub mean: f64,
    pub ln_mean: f64,
    pub variance: f64,
}

impl DrawnLaw {
    fn new(law: OffspringLaw) -> Self {
        let mean = law.mean_unchecked();
        Self {
            law,
            mean,
            ln_mean: mean.ln(),
            variance: law.variance_unchecked(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MomentSource {
    Analytic,
    MonteCarlo {
        samples: usize,
        se_mu: f64,
        se_sigma2: f64,
    },
}

/// μ = E ln m₀ and σ² = Var ln m₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvMoments {
    pub mu: f64,
    pub sigma2: f64,
    pub source: MomentSource,
}

impl EnvMoments {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

/// Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnvironmentConfig", into = "EnvironmentConfig")]
pub struct EnvironmentModel {
    support: Support,
    capabilities: Vec<Capability>,
    cumulative: Vec<f64>,
    drawn: Vec<DrawnLaw>,
}

impl EnvironmentModel {
    /// Builds a model, checking laws and probabilities but not σ² > 0.
    pub fn new(support: Support, capabilities: Vec<Capability>) -> Result<Self> {
        let (cumulative, drawn) = match &support {
            Support::Atoms(atoms) => {
                if atoms.is_empty() {
                    return Err(Error::ParameterDomain("environment has no atoms".into()));
                }
                let mut cumulative = Vec::with_capacity(atoms.len());
                let mut total = 0.0;
                for atom in atoms {
                    atom.law.validate()?;
                    if !(atom.prob > 0.0) {
                        return Err(Error::ParameterDomain(format!(
                            "atom probability {} must be > 0",
                            atom.prob
                        )));
                    }
                    total += atom.prob;
                    cumulative.push(total);
                }
                if (total - 1.0).abs() > PROB_SUM_TOLERANCE {
                    return Err(Error::ParameterDomain(format!(
                        "atom probabilities sum to {total}"
                    )));
                }
                (
                    cumulative,
                    atoms.iter().map(|a| DrawnLaw::new(a.law)).collect(),
                )
            }
            Support::Continuous(ContinuousFamily::LogUniformShiftedPoisson {
                lambda_lo,
                lambda_hi,
            }) => {
                if !(*lambda_lo > 0.0 && lambda_hi > lambda_lo && lambda_hi.is_finite()) {
                    return Err(Error::ParameterDomain(format!(
                        "log-uniform range [{lambda_lo}, {lambda_hi}] must satisfy 0 < lo < hi"
                    )));
                }
                (Vec::new(), Vec::new())
            }
        };
        Ok(Self {
            support,
            capabilities,
            cumulative,
            drawn,
        })
    }

    pub fn from_atoms(atoms: Vec<Atom>, capabilities: Vec<Capability>) -> Result<Self> {
        Self::new(Support::Atoms(atoms), capabilities)
    }

    /// The default test vehicle: m = 2 or m = 4 with probability ½ each.
    /// Poor generations split in two; rich ones draw 1 + Poisson(3).
    ///
    /// X is bounded, so every moment condition holds.
    pub fn two_atom() -> Self {
        Self::from_atoms(
            vec![
                Atom {
                    law: OffspringLaw::TwoPoint { b: 2, q: 1.0 },
                    prob: 0.5,
                },
                Atom {
                    law: OffspringLaw::ShiftedPoisson { lambda: 3.0 },
                    prob: 0.5,
                },
            ],
            Self::bounded_capabilities(),
        )
        .expect("built-in model is valid")
    }

    /// m = 1.5 or m = 2: slow enough growth that Z₄₀ stays below 2^52.
    pub fn slow_growth() -> Self {
        Self::from_atoms(
            vec![
                Atom {
                    law: OffspringLaw::ShiftedPoisson { lambda: 0.5 },
                    prob: 0.5,
                },
                Atom {
                    law: OffspringLaw::TwoPoint { b: 3, q: 0.5 },
                    prob: 0.5,
                },
            ],
            Self::bounded_capabilities(),
        )
        .expect("built-in model is valid")
    }

    fn bounded_capabilities() -> Vec<Capability> {
        vec![
            Capability::A1,
            Capability::A2 { gamma: 1.0 / 6.0 },
            Capability::A3 { rho: 0.5 },
        ]
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn capabilities(&self) -> &[Capability] {
        &self.capabilities
    }

    /// Rejects models with σ² = 0.
    pub fn validate_nondegenerate(&self) -> Result<()> {
        match &self.support {
            Support::Atoms(atoms) => {
                let first = self.drawn[0].ln_mean;
                if self.drawn.iter().all(|d| d.ln_mean == first) {
                    return Err(Error::Degenerate(format!(
                        "all {} atoms have ln m = {first}; σ² = 0",
                        atoms.len()
                    )));
                }
                Ok(())
            }
            Support::Continuous(_) => Ok(()),
        }
    }

    pub fn draw_law(&self, rng: &mut RandomStream) -> OffspringLaw {
        self.draw(rng).law
    }

    #[inline]
    pub(crate) fn draw(&self, rng: &mut RandomStream) -> DrawnLaw {
        let u = rng.uniform();
        match &self.support {
            Support::Atoms(_) => {
                let idx = self
                    .cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(self.drawn.len() - 1);
                self.drawn[idx]
            }
            Support::Continuous(ContinuousFamily::LogUniformShiftedPoisson {
                lambda_lo,
                lambda_hi,
            }) => {
                let (lo, hi) = (lambda_lo.ln(), lambda_hi.ln());
                let lambda = (lo + u * (hi - lo)).exp().clamp(*lambda_lo, *lambda_hi);
                DrawnLaw::new(OffspringLaw::ShiftedPoisson { lambda })
            }
        }
    }

    pub fn moments(&self) -> Result<EnvMoments> {
        self.validate_nondegenerate()?;
        match &self.support {
            Support::Atoms(atoms) => {
                let mu: f64 = atoms
                    .iter()
                    .zip(&self.drawn)
                    .map(|(a, d)| a.prob * d.ln_mean)
                    .sum();
                let sigma2: f64 = atoms
                    .iter()
                    .zip(&self.drawn)
                    .map(|(a, d)| a.prob * (d.ln_mean - mu).powi(2))
                    .sum();
                Ok(EnvMoments {
                    mu,
                    sigma2,
                    source: MomentSource::Analytic,
                })
            }
            Support::Continuous(_) => self.monte_carlo_moments(MC_MOMENT_SAMPLES, MC_MOMENT_SEED),
        }
    }

    /// Moments of ln m₀ estimated from `samples` draws, with standard errors.
    pub fn monte_carlo_moments(&self, samples: usize, seed: u64) -> Result<EnvMoments> {
        if samples < 2 {
            return Err(Error::Domain("need at least two samples".into()));
        }
        let mut rng = RandomStream::new(seed, 0, StreamRole::Environment);
        let xs: Vec<f64> = (0..samples).map(|_| self.draw(&mut rng).ln_mean).collect();
        let n = samples as f64;
        let mu = xs.iter().sum::<f64>() / n;
        let (m2, m4) = xs.iter().fold((0.0, 0.0), |(m2, m4), &x| {
            let d2 = (x - mu).powi(2);
            (m2 + d2, m4 + d2 * d2)
        });
        let sigma2 = m2 / (n - 1.0);
        if !(sigma2 > 0.0) {
            return Err(Error::Degenerate("sampled ln m has zero variance".into()));
        }
        let se_sigma2 = ((m4 / n - sigma2 * sigma2).max(0.0) / n).sqrt();
        Ok(EnvMoments {
            mu,
            sigma2,
            source: MomentSource::MonteCarlo {
                samples,
                se_mu: (sigma2 / n).sqrt(),
                se_sigma2,
            },
        })
    }

    pub fn to_config(&self) -> EnvironmentConfig {
        self.clone().into()
    }

    /// Short hex digest of the canonical JSON form.
    pub fn model_id(&self) -> String {
        let canonical = serde_json::to_vec(&self.to_config()).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl TryFrom<EnvironmentConfig> for EnvironmentModel {
    type Error = Error;

    fn try_from(cfg: EnvironmentConfig) -> Result<Self> {
        let support = match (cfg.atoms, cfg.continuous) {
            (Some(atoms), None) => Support::Atoms(atoms),
            (None, Some(family)) => Support::Continuous(family),
            _ => {
                return Err(Error::ParameterDomain(
                    "environment needs exactly one of `atoms` or `continuous`".into(),
                ))
            }
        };
        Self::new(support, cfg.capabilities)
    }
}

impl From<EnvironmentModel> for EnvironmentConfig {
    fn from(model: EnvironmentModel) -> Self {
        let (atoms, continuous) = match model.support {
            Support::Atoms(atoms) => (Some(atoms), None),
            Support::Continuous(family) => (None, Some(family)),
        };
        EnvironmentConfig {
            atoms,
            continuous,
            capabilities: model.capabilities,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(m: f64) -> OffspringLaw {
        // m = 1 + (b-1) q with b = 5
        OffspringLaw::TwoPoint {
            b: 5,
            q: (m - 1.0) / 4.0,
        }
    }

    #[test]
    fn two_atom_moments() {
        let m = EnvironmentModel::from_atoms(
            vec![
                Atom {
                    law: two_point(2.0),
                    prob: 0.5,
                },
                Atom {
                    law: two_point(4.0),
                    prob: 0.5,
                },
            ],
            vec![Capability::A1],
        )
        .unwrap()
        .moments()
        .unwrap();
        assert!((m.mu - 1.039720770839918).abs() < 1e-12);
        assert!((m.sigma2 - 0.12011325347955035).abs() < 1e-12);
        assert_eq!(m.source, MomentSource::Analytic);
        let builtin = EnvironmentModel::two_atom().moments().unwrap();
        assert!((builtin.mu - m.mu).abs() < 1e-15 && (builtin.sigma2 - m.sigma2).abs() < 1e-15);
    }

    #[test]
    fn symmetric_log_means() {
        let e = std::f64::consts::E;
        let m = EnvironmentModel::from_atoms(
            vec![
                Atom {
                    law: OffspringLaw::ShiftedPoisson { lambda: e - 1.0 },
                    prob: 0.5,
                },
                Atom {
                    law: OffspringLaw::ShiftedPoisson {
                        lambda: e.powi(3) - 1.0,
                    },
                    prob: 0.5,
                },
            ],
            vec![],
        )
        .unwrap()
        .moments()
        .unwrap();
        assert!((m.mu - 2.0).abs() < 1e-12);
        assert!((m.sigma2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_rejected() {
        let model = EnvironmentModel::from_atoms(
            vec![Atom {
                law: two_point(2.0),
                prob: 1.0,
            }],
            vec![],
        )
        .unwrap();
        assert!(matches!(model.moments(), Err(Error::Degenerate(_))));
        // raw draws still work
        let mut rng = RandomStream::new(1, 0, StreamRole::Environment);
        assert_eq!(model.draw_law(&mut rng), two_point(2.0));
    }

    #[test]
    fn probabilities_must_sum_to_one() {
        let atoms = vec![
            Atom {
                law: two_point(2.0),
                prob: 0.5,
            },
            Atom {
                law: two_point(3.0),
                prob: 0.4,
            },
        ];
        assert!(matches!(
            EnvironmentModel::from_atoms(atoms, vec![]),
            Err(Error::ParameterDomain(_))
        ));
        let atoms = vec![
            Atom {
                law: two_point(2.0),
                prob: 1.0,
            },
            Atom {
                law: two_point(3.0),
                prob: 0.0,
            },
        ];
        assert!(EnvironmentModel::from_atoms(atoms, vec![]).is_err());
    }

    #[test]
    fn atom_frequency() {
        let model = EnvironmentModel::two_atom();
        let first = match model.support() {
            Support::Atoms(a) => a[0].law,
            _ => unreachable!(),
        };
        let mut rng = RandomStream::new(5, 0, StreamRole::Environment);
        let draws = 1_000_000;
        let hits = (0..draws)
            .filter(|_| model.draw_law(&mut rng) == first)
            .count();
        assert!((hits as f64 / draws as f64 - 0.5).abs() < 0.0015);
    }

    #[test]
    fn log_uniform_support() {
        let model = EnvironmentModel::new(
            Support::Continuous(ContinuousFamily::LogUniformShiftedPoisson {
                lambda_lo: 1.0,
                lambda_hi: 3.0,
            }),
            vec![Capability::A1],
        )
        .unwrap();
        let mut rng = RandomStream::new(6, 0, StreamRole::Environment);
        for _ in 0..100_000 {
            match model.draw_law(&mut rng) {
                OffspringLaw::ShiftedPoisson { lambda } => assert!((1.0..=3.0).contains(&lambda)),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn log_uniform_moments_close_to_quadrature() {
        let model = EnvironmentModel::new(
            Support::Continuous(ContinuousFamily::LogUniformShiftedPoisson {
                lambda_lo: 1.0,
                lambda_hi: 3.0,
            }),
            vec![],
        )
        .unwrap();
        let m = model.moments().unwrap();
        // midpoint rule on u ∈ [0,1], X = ln(1 + exp(u ln 3))
        let k = 200_000;
        let xs: Vec<f64> = (0..k)
            .map(|i| (1.0 + ((i as f64 + 0.5) / k as f64 * 3f64.ln()).exp()).ln())
            .collect();
        let mu = xs.iter().sum::<f64>() / k as f64;
        let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / k as f64;
        let MomentSource::MonteCarlo {
            se_mu,
            se_sigma2,
            samples,
        } = m.source
        else {
            panic!("expected Monte Carlo moments")
        };
        assert_eq!(samples, MC_MOMENT_SAMPLES);
        assert!((m.mu - mu).abs() < 4.0 * se_mu);
        assert!((m.sigma2 - var).abs() < 4.0 * se_sigma2);
    }

    #[test]
    fn capability_tags_round_trip() {
        for tag in ["A1", "A2(0.1)", "A3(0.5)"] {
            let cap: Capability = tag.parse().unwrap();
            assert_eq!(cap.to_string(), tag);
        }
        assert!("A2(0.5)".parse::<Capability>().is_err());
        assert!("B7".parse::<Capability>().is_err());
    }

    #[test]
    fn config_round_trip_and_digest() {
        let model = EnvironmentModel::two_atom();
        let json = serde_json::to_string(&model).unwrap();
        let back: EnvironmentModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.model_id(), model.model_id());
        assert_ne!(model.model_id(), EnvironmentModel::slow_growth().model_id());
        assert_eq!(model.model_id().len(), 16);
    }
}
