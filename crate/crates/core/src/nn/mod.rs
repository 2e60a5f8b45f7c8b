//! Tandem neural network: forward net F (design → performance), inverse net
//! I (performance → design), their losses, Adam, and two-stage training.

mod adam;
mod loss;
mod mlp;
mod train;

pub use adam::{AdamState, DecayMode, BETA1, BETA2, EPSILON};
pub use loss::{
    design_error, loss_forward, loss_inverse, weighted_error, InverseLoss, LossMode, LossWeights,
};
pub use mlp::{
    parameter_count, Head, LayerDocument, Mlp, NetworkDocument, Trace, FORWARD_DIMS, HIDDEN_WIDTH,
    INVERSE_DIMS, INVERSE_HEAD, NETWORK_FORMAT_VERSION,
};
pub use train::{
    forward_loss_gradient, initial_forward, initial_inverse, inverse_loss_gradient, train_forward,
    train_inverse, EpochRecord, History, LearningSet, TandemGradient, TrainConfig, TrainedNet,
};

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::vectorize::{DESIGN_DIM, PERFORMANCE_DIM};

    fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(lo..hi)).collect()
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(parameter_count(&FORWARD_DIMS), 10_187);
        assert_eq!(parameter_count(&INVERSE_DIMS), 10_193);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(Mlp::forward_network(&mut rng).parameter_count(), 10_187);
        assert_eq!(Mlp::inverse_network(&mut rng).parameter_count(), 10_193);
    }

    #[test]
    fn zero_networks() {
        let f = Mlp::zeros(&FORWARD_DIMS, Head::Linear).unwrap();
        assert!(f
            .forward(&[0.3; DESIGN_DIM])
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let i = Mlp::zeros(&INVERSE_DIMS, INVERSE_HEAD).unwrap();
        let out = i.forward(&[0.7; PERFORMANCE_DIM]).unwrap();
        assert!(out[..11].iter().all(|&v| v == 0.5));
        assert!(out[11..].iter().all(|&v| (v - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let f = Mlp::zeros(&FORWARD_DIMS, Head::Linear).unwrap();
        assert!(matches!(
            f.forward(&[0.0; 3]),
            Err(crate::GcsError::DimensionMismatch {
                expected: 17,
                found: 3
            })
        ));
        assert!(Mlp::zeros(&[3, 4, 5], INVERSE_HEAD).is_err());
    }

    #[test]
    fn head_constraints_hold_for_random_nets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let net = Mlp::inverse_network(&mut rng);
            let x = random_vec(&mut rng, PERFORMANCE_DIM, -3.0, 3.0);
            let y = net.forward(&x).unwrap();
            let sum: f64 = y[11..].iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(y.iter().all(|&v| v > 0.0 && v < 1.0), "{y:?}");
            // saturates in floating point but never leaves [0, 1]
            let big: Vec<f64> = x.iter().map(|v| v * 1e4).collect();
            let y = net.forward(&big).unwrap();
            assert!(y.iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!((y[11..].iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn forward_loss_examples() {
        let w = LossWeights::uniform();
        let t = vec![vec![1.0; PERFORMANCE_DIM]];
        assert_eq!(
            loss_forward(&t, &t, &w, LossMode::Elementwise).unwrap(),
            0.0
        );
        let mut p = t.clone();
        p[0][10] += 1.0;
        assert_eq!(
            loss_forward(&p, &t, &w, LossMode::Elementwise).unwrap(),
            1.0
        );
        assert!(w.0[..10].iter().all(|&x| (x - 0.1).abs() < 1e-15));
    }

    #[test]
    fn forward_loss_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let eig = random_vec(&mut rng, 10, 0.0, 5.0);
        let w = LossWeights::from_eigenvalues(&eig).unwrap();
        let preds: Vec<Vec<f64>> = (0..7)
            .map(|_| random_vec(&mut rng, PERFORMANCE_DIM, -3.0, 3.0))
            .collect();
        let targets: Vec<Vec<f64>> = (0..7)
            .map(|_| random_vec(&mut rng, PERFORMANCE_DIM, -3.0, 3.0))
            .collect();
        let total: f64 = eig.iter().sum();
        let mut naive = 0.0;
        for s in 0..7 {
            for j in 0..PERFORMANCE_DIM {
                let wj = if j < 10 { eig[j] / total } else { 1.0 };
                let e = wj * (targets[s][j] - preds[s][j]);
                naive += e * e;
            }
        }
        naive /= 7.0;
        let got = loss_forward(&preds, &targets, &w, LossMode::Elementwise).unwrap();
        assert!((got - naive).abs() < 1e-12);

        let mut naive_dot = 0.0;
        for s in 0..7 {
            let mut acc = 0.0;
            for j in 0..PERFORMANCE_DIM {
                acc += w.0[j] * (targets[s][j] - preds[s][j]);
            }
            naive_dot += acc * acc;
        }
        let got_dot = loss_forward(&preds, &targets, &w, LossMode::DotProduct).unwrap();
        assert!((got_dot - naive_dot / 7.0).abs() < 1e-12);
    }

    #[test]
    fn loss_weights_sum_to_one() {
        let w =
            LossWeights::from_eigenvalues(&[9.0, 4.0, 2.0, 1.0, 0.5, 0.25, 0.1, 0.05, 0.0, 0.0])
                .unwrap();
        assert!((w.0[..10].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(w.0[10], 1.0);
        assert!(LossWeights::from_eigenvalues(&[1.0; 3]).is_err());
        assert!(LossWeights::from_eigenvalues(&[-1.0; 10]).is_err());
        let degenerate = LossWeights::from_eigenvalues(&[0.0; 10]).unwrap();
        assert!((degenerate.0[..10].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_loss_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = Mlp::forward_network(&mut rng);
        let i = Mlp::inverse_network(&mut rng);
        let w = LossWeights::uniform();
        let designs: Vec<Vec<f64>> = (0..4)
            .map(|_| random_vec(&mut rng, DESIGN_DIM, 0.0, 1.0))
            .collect();
        let perfs: Vec<Vec<f64>> = (0..4)
            .map(|_| random_vec(&mut rng, PERFORMANCE_DIM, -1.0, 1.0))
            .collect();
        let l0 = loss_inverse(&designs, &perfs, &f, &i, &w, 0.0, LossMode::Elementwise).unwrap();
        assert_eq!(l0.total(), l0.performance);

        // α = 1 against an independent computation
        let l1 = loss_inverse(&designs, &perfs, &f, &i, &w, 1.0, LossMode::Elementwise).unwrap();
        let (mut lp, mut ld) = (0.0, 0.0);
        for (d, p) in designs.iter().zip(&perfs) {
            let g = i.forward(p).unwrap();
            let q = f.forward(&g).unwrap();
            lp += (0..PERFORMANCE_DIM)
                .map(|j| (w.0[j] * (p[j] - q[j])).powi(2))
                .sum::<f64>();
            ld += (0..DESIGN_DIM).map(|j| (d[j] - g[j]).powi(2)).sum::<f64>() / DESIGN_DIM as f64;
        }
        assert!((l1.total() - (lp + ld) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_tandem_has_zero_loss_and_gradient() {
        // I constant, F constant; targets chosen as their outputs
        let f = Mlp::zeros(&FORWARD_DIMS, Head::Linear).unwrap();
        let i = Mlp::zeros(&INVERSE_DIMS, INVERSE_HEAD).unwrap();
        let p = vec![0.0; PERFORMANCE_DIM];
        let d = i.forward(&p).unwrap();
        let w = LossWeights::uniform();
        for alpha in [0.0, 0.3, 1.0] {
            let g = inverse_loss_gradient(&f, &i, &[(&d, &p)], &w, alpha, LossMode::Elementwise)
                .unwrap();
            assert_eq!(g.loss.total(), 0.0);
            assert!(g.inverse.iter().all(|&x| x == 0.0));
            assert!(g.forward.iter().all(|&x| x == 0.0));
        }
        let (loss, grad) =
            forward_loss_gradient(&f, &[(&d, &p)], &w, LossMode::Elementwise).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn stage_two_gradient_leaves_forward_block_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = Mlp::forward_network(&mut rng);
        let i = Mlp::inverse_network(&mut rng);
        let d = random_vec(&mut rng, DESIGN_DIM, 0.0, 1.0);
        let p = random_vec(&mut rng, PERFORMANCE_DIM, -1.0, 1.0);
        let g = inverse_loss_gradient(
            &f,
            &i,
            &[(&d, &p)],
            &LossWeights::uniform(),
            1.0,
            LossMode::Elementwise,
        )
        .unwrap();
        assert_eq!(g.forward.len(), f.parameter_count());
        assert!(g.forward.iter().all(|&x| x == 0.0));
        assert!(g.inverse.iter().any(|&x| x != 0.0));
    }

    #[test]
    fn network_json_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = Mlp::inverse_network(&mut rng);
        let meta = serde_json::json!({"seed": 8});
        let text = net.to_json(Some(meta.clone())).unwrap();
        let (back, m) = Mlp::from_json(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.fingerprint(), net.fingerprint());
        assert_eq!(m, Some(meta));
        let x = random_vec(&mut rng, PERFORMANCE_DIM, -1.0, 1.0);
        assert_eq!(back.forward(&x).unwrap(), net.forward(&x).unwrap());

        let wrong = text.replacen("\"version\":1", "\"version\":7", 1);
        assert!(matches!(
            Mlp::from_json(&wrong),
            Err(crate::GcsError::VersionMismatch { found: 7, .. })
        ));
        let truncated = &text[..text.len() / 2];
        assert!(Mlp::from_json(truncated).is_err());
    }

    #[test]
    fn decay_mask_covers_weights_only() {
        let net = Mlp::zeros(&[2, 3, 1], Head::Linear).unwrap();
        assert_eq!(
            net.decay_mask(),
            vec![true, true, true, true, true, true, false, false, false, true, true, true, false]
        );
    }
}
