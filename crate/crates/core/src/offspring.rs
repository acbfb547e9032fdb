//! Offspring laws supported on {1, 2, ...}.
//!
//! Every family here has a closed form for the law of the sum of `z`
//! independent copies, so one generation of a population of size `z` costs a
//! single draw no matter how large `z` is:
//!
//! | family | one individual | sum of `z` copies |
//! |---|---|---|
//! | `ShiftedPoisson(λ)` | 1 + Poisson(λ) | z + Poisson(zλ) |
//! | `GeometricOnOne(p)` | Geometric on {1,2,..} | z + NegBinomial(z, p) failures |
//! | `TwoPoint(b, q)` | 1 or b, P(b) = q | z + (b−1)·Binomial(z, q) |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::sampling;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum OffspringLaw {
    ShiftedPoisson { lambda: f64 },
    GeometricOnOne { p: f64 },
    TwoPoint { b: u64, q: f64 },
}

impl OffspringLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            OffspringLaw::ShiftedPoisson { lambda } => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return Err(Error::ParameterDomain(format!(
                        "shifted_poisson lambda must be > 0, got {lambda}"
                    )));
                }
            }
            OffspringLaw::GeometricOnOne { p } => {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(Error::ParameterDomain(format!(
                        "geometric_on_one p must be in (0, 1], got {p}"
                    )));
                }
            }
            OffspringLaw::TwoPoint { b, q } => {
                if b < 2 {
                    return Err(Error::ParameterDomain(format!(
                        "two_point b must be >= 2, got {b}"
                    )));
                }
                if !(0.0..=1.0).contains(&q) {
                    return Err(Error::ParameterDomain(format!(
                        "two_point q must be in [0, 1], got {q}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Mean offspring count m.
    pub fn mean(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.mean_unchecked())
    }

    /// X = ln m.
    pub fn log_mean(&self) -> Result<f64> {
        self.mean().map(f64::ln)
    }

    pub fn variance(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.variance_unchecked())
    }

    pub(crate) fn mean_unchecked(&self) -> f64 {
        match *self {
            OffspringLaw::ShiftedPoisson { lambda } => 1.0 + lambda,
            OffspringLaw::GeometricOnOne { p } => 1.0 / p,
            OffspringLaw::TwoPoint { b, q } => 1.0 + (b - 1) as f64 * q,
        }
    }

    pub(crate) fn variance_unchecked(&self) -> f64 {
        match *self {
            OffspringLaw::ShiftedPoisson { lambda } => lambda,
            OffspringLaw::GeometricOnOne { p } => (1.0 - p) / (p * p),
            OffspringLaw::TwoPoint { b, q } => {
                let jump = (b - 1) as f64;
                jump * jump * q * (1.0 - q)
            }
        }
    }

    /// P(offspring = k) for k >= 1.
    pub fn pmf(&self, k: u64) -> Result<f64> {
        self.validate()?;
        if k < 1 {
            return Err(Error::Domain("offspring support starts at 1".into()));
        }
        Ok(match *self {
            OffspringLaw::ShiftedPoisson { lambda } => poisson_pmf(lambda, k - 1),
            OffspringLaw::GeometricOnOne { p } => {
                if p == 1.0 {
                    if k == 1 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    p * (1.0 - p).powf((k - 1) as f64)
                }
            }
            OffspringLaw::TwoPoint { b, q } => {
                if k == 1 {
                    1.0 - q
                } else if k == b {
                    q
                } else {
                    0.0
                }
            }
        })
    }

    /// P(sum of `z` iid copies = k), from the closed-form sum law.
    pub fn sum_pmf(&self, z: u64, k: u64) -> Result<f64> {
        self.validate()?;
        if z < 1 {
            return Err(Error::Domain("sum of zero individuals".into()));
        }
        if k < z {
            return Ok(0.0);
        }
        let extra = k - z;
        Ok(match *self {
            OffspringLaw::ShiftedPoisson { lambda } => poisson_pmf(z as f64 * lambda, extra),
            OffspringLaw::GeometricOnOne { p } => negative_binomial_pmf(z, p, extra),
            OffspringLaw::TwoPoint { b, q } => {
                let jump = b - 1;
                if !extra.is_multiple_of(jump) {
                    0.0
                } else {
                    binomial_pmf(z, q, extra / jump)
                }
            }
        })
    }

    /// One draw of the sum of `z` iid copies of this law.
    ///
    /// Returns [`Error::CapExceeded`] when the result (or the sampler's
    /// parameters) would not fit the exact integer range; the simulator then
    /// falls back to a Gaussian increment.
    pub fn sample_sum(&self, z: u64, rng: &mut RandomStream) -> Result<u64> {
        if z < 1 {
            return Err(Error::Domain("sum of zero individuals".into()));
        }
        let extra = match *self {
            // λ = 0 is accepted here as the degenerate law at 1.
            OffspringLaw::ShiftedPoisson { lambda: 0.0 } => 0,
            law => {
                law.validate()?;
                match law {
                    OffspringLaw::ShiftedPoisson { lambda } => {
                        sampling::poisson(z as f64 * lambda, rng)?
                    }
                    OffspringLaw::GeometricOnOne { p } => {
                        sampling::negative_binomial_failures(z, p, rng)?
                    }
                    OffspringLaw::TwoPoint { b, q } => {
                        let hits = sampling::binomial(z, q, rng)?;
                        hits.checked_mul(b - 1).ok_or_else(|| {
                            Error::CapExceeded(format!("two_point sum for z = {z}"))
                        })?
                    }
                }
            }
        };
        z.checked_add(extra)
            .filter(|&total| (total as f64) < sampling::MAX_COUNT)
            .ok_or_else(|| Error::CapExceeded(format!("offspring sum for z = {z}")))
    }
}

fn ln_factorial(k: u64) -> f64 {
    libm::lgamma(k as f64 + 1.0)
}

fn poisson_pmf(mean: f64, j: u64) -> f64 {
    if mean == 0.0 {
        return if j == 0 { 1.0 } else { 0.0 };
    }
    (-mean + j as f64 * mean.ln() - ln_factorial(j)).exp()
}

fn negative_binomial_pmf(successes: u64, p: f64, failures: u64) -> f64 {
    if p == 1.0 {
        return if failures == 0 { 1.0 } else { 0.0 };
    }
    let (s, j) = (successes as f64, failures as f64);
    let ln_choose = libm::lgamma(s + j) - ln_factorial(failures) - libm::lgamma(s);
    (ln_choose + s * p.ln() + j * (1.0 - p).ln()).exp()
}

fn binomial_pmf(trials: u64, q: f64, hits: u64) -> f64 {
    if hits > trials {
        return 0.0;
    }
    if q == 0.0 || q == 1.0 {
        let certain = if q == 0.0 { 0 } else { trials };
        return if hits == certain { 1.0 } else { 0.0 };
    }
    let ln_choose = ln_factorial(trials) - ln_factorial(hits) - ln_factorial(trials - hits);
    (ln_choose + hits as f64 * q.ln() + (trials - hits) as f64 * (1.0 - q).ln()).exp()
}

/// Brute-force z-fold convolution of the single-individual pmf, for checking
/// the closed-form sum laws.
pub mod oracle {
    use super::OffspringLaw;
    use crate::error::{Error, Result};

    pub const TAIL_MASS: f64 = 1e-12;
    pub const MAX_SUPPORT: usize = 100_000;
    pub const MAX_Z: u64 = 8;

    /// pmf of the sum of `z` copies, indexed by k (entries below z are zero).
    pub fn sum_pmf_table(law: &OffspringLaw, z: u64) -> Result<Vec<f64>> {
        if !(1..=MAX_Z).contains(&z) {
            return Err(Error::Domain(format!(
                "oracle supports z in [1, {MAX_Z}], got {z}"
            )));
        }
        let single = truncated_pmf(law)?;
        let mut acc = single.clone();
        for _ in 1..z {
            let mut next = vec![0.0; acc.len() + single.len() - 1];
            for (i, &a) in acc.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (j, &s) in single.iter().enumerate() {
                    next[i + j] += a * s;
                }
            }
            acc = next;
        }
        Ok(acc)
    }

    pub fn sum_pmf_oracle(law: &OffspringLaw, z: u64, k: u64) -> Result<f64> {
        let table = sum_pmf_table(law, z)?;
        Ok(table.get(k as usize).copied().unwrap_or(0.0))
    }

    fn truncated_pmf(law: &OffspringLaw) -> Result<Vec<f64>> {
        let mut table = vec![0.0];
        let mut mass = 0.0;
        for k in 1..=MAX_SUPPORT as u64 {
            let p = law.pmf(k)?;
            table.push(p);
            mass += p;
            if 1.0 - mass < TAIL_MASS {
                return Ok(table);
            }
        }
        Err(Error::OracleInfeasible(format!(
            "{law:?}: tail mass above {TAIL_MASS:e} after {MAX_SUPPORT} support points"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRole;
    use proptest::prelude::*;

    fn stream(seed: u64) -> RandomStream {
        RandomStream::new(seed, 0, StreamRole::Offspring)
    }

    #[test]
    fn means() {
        assert_eq!(
            OffspringLaw::ShiftedPoisson { lambda: 1.0 }.mean().unwrap(),
            2.0
        );
        assert_eq!(OffspringLaw::GeometricOnOne { p: 0.5 }.mean().unwrap(), 2.0);
        assert_eq!(OffspringLaw::TwoPoint { b: 3, q: 0.5 }.mean().unwrap(), 2.0);
        let law = OffspringLaw::TwoPoint { b: 5, q: 0.75 };
        assert_eq!(law.log_mean().unwrap(), 4f64.ln());
    }

    #[test]
    fn invalid_parameters_rejected() {
        for law in [
            OffspringLaw::ShiftedPoisson { lambda: 0.0 },
            OffspringLaw::ShiftedPoisson { lambda: -1.0 },
            OffspringLaw::GeometricOnOne { p: 0.0 },
            OffspringLaw::GeometricOnOne { p: 1.5 },
            OffspringLaw::TwoPoint { b: 1, q: 0.5 },
            OffspringLaw::TwoPoint { b: 3, q: -0.1 },
            OffspringLaw::TwoPoint { b: 3, q: 1.1 },
        ] {
            assert!(
                matches!(law.mean(), Err(Error::ParameterDomain(_))),
                "{law:?}"
            );
        }
    }

    #[test]
    fn pmf_examples() {
        assert_eq!(
            OffspringLaw::GeometricOnOne { p: 0.5 }.pmf(2).unwrap(),
            0.25
        );
        assert_eq!(
            OffspringLaw::TwoPoint { b: 3, q: 0.25 }.pmf(1).unwrap(),
            0.75
        );
        let p = OffspringLaw::ShiftedPoisson { lambda: 2.0 }.pmf(1).unwrap();
        assert!((p - (-2f64).exp()).abs() < 1e-15);
        assert!(matches!(
            OffspringLaw::GeometricOnOne { p: 0.5 }.pmf(0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn pmf_sums_to_one() {
        for law in [
            OffspringLaw::ShiftedPoisson { lambda: 2.5 },
            OffspringLaw::GeometricOnOne { p: 0.3 },
            OffspringLaw::TwoPoint { b: 4, q: 0.2 },
        ] {
            let total: f64 = (1..400).map(|k| law.pmf(k).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-12, "{law:?}: {total}");
        }
    }

    #[test]
    fn oracle_examples() {
        let law = OffspringLaw::TwoPoint { b: 2, q: 0.5 };
        assert!((oracle::sum_pmf_oracle(&law, 2, 3).unwrap() - 0.5).abs() < 1e-15);
        assert!((oracle::sum_pmf_oracle(&law, 2, 2).unwrap() - 0.25).abs() < 1e-15);
        let geo = OffspringLaw::GeometricOnOne { p: 0.5 };
        assert!((oracle::sum_pmf_oracle(&geo, 1, 3).unwrap() - 0.125).abs() < 1e-15);
        assert!(matches!(
            oracle::sum_pmf_oracle(&geo, 9, 3),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn oracle_infeasible_for_heavy_tail() {
        let law = OffspringLaw::GeometricOnOne { p: 1e-5 };
        assert!(matches!(
            oracle::sum_pmf_table(&law, 1),
            Err(Error::OracleInfeasible(_))
        ));
    }

    #[test]
    fn closed_form_matches_convolution() {
        for law in [
            OffspringLaw::ShiftedPoisson { lambda: 0.7 },
            OffspringLaw::GeometricOnOne { p: 0.4 },
            OffspringLaw::TwoPoint { b: 3, q: 0.3 },
        ] {
            for z in 1..=8 {
                let table = oracle::sum_pmf_table(&law, z).unwrap();
                for (k, &expected) in table.iter().enumerate() {
                    let got = law.sum_pmf(z, k as u64).unwrap();
                    assert!((got - expected).abs() < 1e-10, "{law:?} z={z} k={k}");
                }
            }
        }
    }

    #[test]
    fn degenerate_sums() {
        let mut rng = stream(11);
        for _ in 0..10 {
            assert_eq!(
                OffspringLaw::ShiftedPoisson { lambda: 0.0 }
                    .sample_sum(7, &mut rng)
                    .unwrap(),
                7
            );
            assert_eq!(
                OffspringLaw::TwoPoint { b: 2, q: 1.0 }
                    .sample_sum(5, &mut rng)
                    .unwrap(),
                10
            );
        }
        assert!(matches!(
            OffspringLaw::TwoPoint { b: 2, q: 1.0 }.sample_sum(0, &mut rng),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn geometric_sum_mean() {
        let law = OffspringLaw::GeometricOnOne { p: 0.5 };
        let mut rng = stream(12);
        let draws = 1_000_000;
        let total: f64 = (0..draws)
            .map(|_| law.sample_sum(4, &mut rng).unwrap() as f64)
            .sum();
        let mean = total / draws as f64;
        // 3 standard errors of z(1-p)/p^2 / M
        let tol = 3.0 * (4.0 * 0.5 / 0.25 / draws as f64).sqrt();
        assert!((mean - 8.0).abs() < tol.max(0.02), "{mean}");
    }

    #[test]
    fn cap_exceeded_on_overflow() {
        let law = OffspringLaw::TwoPoint {
            b: u64::MAX,
            q: 1.0,
        };
        let mut rng = stream(13);
        assert!(matches!(
            law.sample_sum(4, &mut rng),
            Err(Error::CapExceeded(_))
        ));
    }

    #[test]
    fn serde_schema() {
        let law = OffspringLaw::TwoPoint { b: 3, q: 0.5 };
        let json = serde_json::to_string(&law).unwrap();
        assert_eq!(json, r#"{"family":"two_point","params":{"b":3,"q":0.5}}"#);
        let back: OffspringLaw =
            serde_json::from_str(r#"{"family":"shifted_poisson","params":{"lambda":1.5}}"#)
                .unwrap();
        assert_eq!(back, OffspringLaw::ShiftedPoisson { lambda: 1.5 });
    }

    fn any_law() -> impl Strategy<Value = OffspringLaw> {
        prop_oneof![
            (0.01f64..20.0).prop_map(|lambda| OffspringLaw::ShiftedPoisson { lambda }),
            (0.01f64..=1.0).prop_map(|p| OffspringLaw::GeometricOnOne { p }),
            (2u64..50, 0.0f64..=1.0).prop_map(|(b, q)| OffspringLaw::TwoPoint { b, q }),
        ]
    }

    proptest! {
        #[test]
        fn sum_never_shrinks(law in any_law(), z in 1u64..1_000_000_000, seed in any::<u64>()) {
            let mut rng = stream(seed);
            let total = law.sample_sum(z, &mut rng).unwrap();
            prop_assert!(total >= z);
        }

        #[test]
        fn mean_at_least_one(law in any_law()) {
            prop_assert!(law.mean().unwrap() >= 1.0);
        }
    }
}
