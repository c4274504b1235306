mod common;

use common::{close, fd1, fd2};
use mfpinn::diffnet::NetworkParams;
use mfpinn::heat::{self, SolverSettings, ThermalSetup};
use mfpinn::multifidelity::{augment_cooldown, train_high, train_low, MfModel};
use mfpinn::pinn::{Normalization, PointCounts, PointSets, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn norm() -> Normalization {
    Normalization::for_setup(&ThermalSetup::composite_2(), 200.0).unwrap()
}

fn model(low: NetworkParams, high: NetworkParams) -> MfModel {
    MfModel::new(low, high, norm(), norm(), ThermalSetup::composite_1(), ThermalSetup::composite_2()).unwrap()
}

/// Single linear layer `[a, b, c] · input + d`.
fn affine(weights: &[f64], bias: f64) -> NetworkParams {
    let mut v = weights.to_vec();
    v.push(bias);
    NetworkParams::from_values(&[weights.len(), 1], 0, v).unwrap()
}

#[test]
fn identity_in_the_low_input_reproduces_the_low_jet() {
    let low = NetworkParams::init(&[2, 12, 12, 1], 5).unwrap();
    let m = model(low.clone(), affine(&[0.0, 0.0, 1.0], 0.0));
    for &(xi, tau) in &[(0.1, 0.2), (0.5, 0.5), (0.93, 0.71)] {
        let g = m.compose_jet(xi, tau);
        let l = low.forward_jet(xi, tau, &[]).unwrap();
        for (a, b) in [(g.u, l.u), (g.du_dx, l.du_dx), (g.d2u_dx2, l.d2u_dx2), (g.du_dt, l.du_dt)] {
            assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn affine_composition_by_hand() {
    // f_L = τ, f_H = ξ + 2y  →  g = ξ + 2τ
    let m = model(affine(&[0.0, 1.0], 0.0), affine(&[1.0, 0.0, 2.0], 0.0));
    let g = m.compose_jet(0.3, 0.4);
    assert!((g.u - 1.1).abs() < 1e-15);
    assert_eq!((g.du_dx, g.d2u_dx2, g.du_dt), (1.0, 0.0, 2.0));
}

#[test]
fn composed_jets_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let low = NetworkParams::init(&[2, 20, 20, 1], 21).unwrap();
    let high = NetworkParams::init(&[3, 20, 20, 1], 22).unwrap();
    let m = model(low.clone(), high.clone());
    let g = |xi: f64, tau: f64| {
        let y = low.forward(&[xi, tau]).unwrap();
        high.forward(&[xi, tau, y]).unwrap()
    };
    for _ in 0..50 {
        let (xi, tau) = (rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95));
        let jet = m.compose_jet(xi, tau);
        assert!(close(jet.u, g(xi, tau), 1e-14, 1e-14));
        assert!(close(jet.du_dx, fd1(|v| g(v, tau), xi, 1e-4), 1e-5, 1e-10), "dξ at {xi},{tau}");
        assert!(close(jet.d2u_dx2, fd2(|v| g(v, tau), xi, 1e-3), 1e-5, 1e-10), "dξξ at {xi},{tau}");
        assert!(close(jet.du_dt, fd1(|v| g(xi, v), tau, 1e-4), 1e-5, 1e-10), "dτ at {xi},{tau}");
    }
}

#[test]
fn widths_and_domain_are_checked() {
    let low = NetworkParams::init(&[2, 4, 1], 1).unwrap();
    let high = NetworkParams::init(&[3, 4, 1], 1).unwrap();
    assert!(MfModel::new(high.clone(), high.clone(), norm(), norm(), ThermalSetup::composite_1(), ThermalSetup::composite_2()).is_err());
    assert!(MfModel::new(low.clone(), low.clone(), norm(), norm(), ThermalSetup::composite_1(), ThermalSetup::composite_2()).is_err());
    let other = Normalization::new(0.02, 2500.0, 100.0).unwrap();
    assert!(MfModel::new(low.clone(), high.clone(), other, norm(), ThermalSetup::composite_1(), ThermalSetup::composite_2()).is_err());
    let m = model(low, high);
    assert!(m.predict(0.01, 1000.0).unwrap().is_finite());
    assert!(matches!(m.predict(0.03, 1000.0), Err(mfpinn::Error::Domain { .. })));
    assert!(matches!(m.predict(0.01, -1.0), Err(mfpinn::Error::Domain { .. })));
}

fn coarse_field() -> heat::FieldSolution {
    heat::solve(
        &ThermalSetup::composite_2(),
        &SolverSettings {
            dt: 0.5,
            ..Default::default()
        },
    )
    .unwrap()
}

#[test]
fn cooldown_cloud_sampling() {
    let field = coarse_field();
    let cloud = augment_cooldown(&field, 30, None, 3).unwrap();
    assert_eq!(cloud.len(), 30);
    assert!(cloud.points.iter().all(|p| p.t >= 2000.0));
    assert!(augment_cooldown(&field, 0, None, 3).unwrap().is_empty());

    let other = heat::sample_labeled(&field, 200, 3, None).unwrap();
    let merged = other.union(&cloud);
    let mut keys: Vec<_> = merged.points.iter().map(|p| (p.x.to_bits(), p.t.to_bits())).collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), merged.len());
    assert!(merged.len() <= 230 && merged.len() >= 200);
}

#[test]
fn high_fidelity_training_leaves_the_low_network_alone() {
    let field = coarse_field();
    let counts = PointCounts {
        collocation: 64,
        boundary: 8,
        initial: 4,
    };
    let points = PointSets::sample(counts, 2).unwrap();
    let config = TrainConfig {
        epochs: 3,
        seed: 2,
        ..Default::default()
    };
    let data = heat::sample_labeled(&field, 20, 2, None).unwrap();
    let low_init = NetworkParams::init(&[2, 8, 8, 1], 2).unwrap();
    let (low, _) = train_low(low_init.clone(), &ThermalSetup::composite_1(), &norm(), &data, &points, &config).unwrap();
    let (again, _) = train_low(low_init.clone(), &ThermalSetup::composite_1(), &norm(), &data, &points, &config).unwrap();
    assert_eq!(low, again);
    assert_ne!(low, low_init);

    let untouched = train_low(low_init.clone(), &ThermalSetup::composite_1(), &norm(), &data, &points, &TrainConfig { epochs: 0, ..config.clone() })
        .unwrap()
        .0;
    assert_eq!(untouched, low_init);

    let snapshot = low.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let cloud = augment_cooldown(&field, 10, None, 2).unwrap();
    let high_init = NetworkParams::init(&[3, 8, 8, 1], 2).unwrap();
    let (high, history) = train_high(&low, high_init.clone(), &ThermalSetup::composite_2(), &norm(), &cloud, &points, &config).unwrap();
    assert_eq!(history.len(), 3);
    assert_ne!(high, high_init);
    assert_eq!(snapshot, low.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert!(train_high(&low, low_init, &ThermalSetup::composite_2(), &norm(), &cloud, &points, &config).is_err());
}
