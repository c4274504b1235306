mod common;

use common::{close, dense_forward, fd1, fd2};
use mfpinn::diffnet::{grad_params, InputBatch, Jet, NetworkParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn forward_matches_dense_oracle() {
    let net = NetworkParams::init(&[2, 3, 1], 2024).unwrap();
    let got = net.forward(&[0.5, 0.25]).unwrap();
    let want = dense_forward(net.layer_sizes(), net.as_slice(), &[0.5, 0.25]);
    assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
}

#[test]
fn jets_match_finite_differences() {
    let net = NetworkParams::init(&[2, 30, 30, 30, 30, 30, 1], 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let (x, t) = (rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95));
        let jet = net.forward_jet(x, t, &[]).unwrap();
        let fx = |v: f64| net.forward(&[v, t]).unwrap();
        let ft = |v: f64| net.forward(&[x, v]).unwrap();
        assert!(close(jet.du_dx, fd1(fx, x, 1e-4), 1e-5, 1e-10), "du_dx");
        assert!(close(jet.d2u_dx2, fd2(fx, x, 1e-3), 1e-5, 1e-10), "d2u_dx2 {} {}", jet.d2u_dx2, fd2(fx, x, 1e-3));
        assert!(close(jet.du_dt, fd1(ft, t, 1e-4), 1e-5, 1e-10), "du_dt");
    }
}

#[test]
fn heat_residual_loss_gradient_matches_finite_differences() {
    let net = NetworkParams::init(&[2, 10, 10, 1], 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pts: Vec<(f64, f64)> = (0..5).map(|_| (rng.gen(), rng.gen())).collect();
    let batch = InputBatch::points(&pts);
    let loss = |jets: &[Jet]| {
        let n = jets.len() as f64;
        let mut v = 0.0;
        let adj = jets
            .iter()
            .map(|j| {
                let r = j.du_dt - 0.1 * j.d2u_dx2;
                v += r * r / n;
                Jet { du_dt: 2.0 * r / n, d2u_dx2: -0.2 * r / n, ..Jet::ZERO }
            })
            .collect();
        (v, adj)
    };
    let (_, grad) = grad_params(&net, &batch, loss).unwrap();
    let sizes = net.layer_sizes().to_vec();
    for k in 0..net.num_params() {
        let f = |v: f64| {
            let mut vals = net.as_slice().to_vec();
            vals[k] = v;
            let p = NetworkParams::from_values(&sizes, 0, vals).unwrap();
            grad_params(&p, &batch, loss).unwrap().0
        };
        let want = fd1(f, net.as_slice()[k], 1e-4);
        assert!(close(grad.as_slice()[k], want, 1e-6, 1e-10), "entry {k}: {} vs {want}", grad.as_slice()[k]);
    }
}

#[test]
fn composite_loss_gradient_matches_finite_differences() {
    use mfpinn::heat::{LabeledPoint, LabeledSet, ThermalSetup};
    use mfpinn::pinn::{composite_loss, LossWeights, Normalization, PointCounts, PointSets};

    let setup = ThermalSetup::composite_2();
    let norm = Normalization::for_setup(&setup, 200.0).unwrap();
    let counts = PointCounts {
        collocation: 10,
        boundary: 10,
        initial: 10,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let labels = LabeledSet {
        points: (0..10)
            .map(|_| LabeledPoint {
                x: rng.gen_range(0.0..0.02),
                t: rng.gen_range(0.0..2500.0),
                temperature: rng.gen_range(0.0..180.0),
            })
            .collect(),
    };
    let points = PointSets::sample(counts, 4).unwrap().with_labeled(&labels, &norm).unwrap();
    let weights = LossWeights {
        pde: 1.0,
        bc: 0.003,
        ic: 40.0,
        data: 7.0,
    };
    let net = NetworkParams::init(&[2, 10, 10, 1], 6).unwrap();
    let (_, grad) = composite_loss(&net, &points, &weights, &setup, &norm).unwrap();
    let sizes = net.layer_sizes().to_vec();
    for k in 0..net.num_params() {
        let f = |v: f64| {
            let mut vals = net.as_slice().to_vec();
            vals[k] = v;
            let p = NetworkParams::from_values(&sizes, 0, vals).unwrap();
            composite_loss(&p, &points, &weights, &setup, &norm).unwrap().0.total
        };
        let want = fd1(f, net.as_slice()[k], 1e-4);
        assert!(close(grad.as_slice()[k], want, 1e-6, 1e-10), "entry {k}: {} vs {want}", grad.as_slice()[k]);
    }
}
