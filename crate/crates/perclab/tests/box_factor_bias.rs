//! Quantifies the finite-box bias of the distance measurement: the pair is
//! conditioned on the giant component of a box whose side is `factor` times
//! the pair distance, and the measured median should barely move once the
//! factor is comfortable.

use perclab::bondspace::{BondModel, ConnectionProfile};
use perclab::lab::{run_distance_scaling, ExperimentConfig};
use perclab::lattice::NormKind;

#[test]
fn boundary_bias_is_mild_across_box_factors() {
    let mut medians = Vec::new();
    for factor in [3u64, 4, 6] {
        let cfg = ExperimentConfig {
            model: BondModel::new(
                1,
                ConnectionProfile::shifted_power(1.0, 1.5),
                0.95,
                NormKind::Euclidean,
            )
            .unwrap(),
            sides: vec![1],
            trials: 120,
            seed: 8_642,
            rho: 0.3,
            delta: 0.25,
            ell: 9,
            gamma: 0.8,
            s_prime: 1.75,
            box_factor: factor,
            threads: 0,
        };
        let (rep, est) = run_distance_scaling(&cfg, &[64, 128, 256]).unwrap();
        assert!(rep
            .summary
            .iter()
            .any(|s| s.quantity == "box_factor" && s.key == factor as f64));
        println!(
            "factor {factor}: medians {:?} dropped {:?}",
            est.medians, est.dropped_fraction
        );
        medians.push(est.medians);
    }
    // the bias from the proxy is visible but small: medians at factor 3
    // and 6 stay within 35% of the factor-4 measurement at every distance
    let reference = medians[1].clone();
    for other in [&medians[0], &medians[2]] {
        for (a, b) in other.iter().zip(&reference) {
            let ratio = a / b;
            assert!(
                (0.65..=1.35).contains(&ratio),
                "median ratio {ratio} outside the tolerance: {medians:?}"
            );
        }
    }
}
