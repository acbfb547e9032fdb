use bpre::harness::Batch;
use bpre::inference::{ci_from_moments, estimate_mu, CiMethod};
use bpre::{EnvironmentModel, SimCaps};

#[test]
fn mean_of_mu_hat_on_two_atom_model() {
    let model = EnvironmentModel::two_atom();
    let moments = model.moments().unwrap();
    let (n0, n, m) = (10, 400, 10_000);
    let batch = Batch::simulate(&model, &SimCaps::default(), 17, m, [n0, n0 + n]).unwrap();
    let (z0, z1) = (batch.ln_z(n0).unwrap(), batch.ln_z(n0 + n).unwrap());
    let estimates: Vec<f64> = z0
        .iter()
        .zip(&z1)
        .map(|(a, b)| estimate_mu(*a, *b, n).unwrap())
        .collect();
    let mean = estimates.iter().sum::<f64>() / m as f64;
    assert!((mean - 1.0397).abs() <= 0.0006, "mean mu_hat {mean}");

    let covered = estimates
        .iter()
        .filter(|&&mu_hat| {
            ci_from_moments(mu_hat, &moments, n, 0.05, CiMethod::NormalQuantile)
                .unwrap()
                .contains(moments.mu)
        })
        .count();
    let coverage = covered as f64 / m as f64;
    assert!((0.93..=0.97).contains(&coverage), "coverage {coverage}");
}
