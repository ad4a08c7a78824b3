mod common;

use common::{check_xi, random_prediction_set, xi_bound_run};
use mlkit::ensemble::fuse_average;
use mlkit::harness::{holdout_split, kfold_split};
use mlkit::metrics::{
    absolute_false, absolute_true, accuracy_ml, aiming, average_precision, coverage, hamming_loss, one_error,
    ranking_loss, recall,
};
use mlkit::numerics::{RngStream, Tensor};
use mlkit::optim::{clip_gradients_l2, cos1_lr, OptimConfig, OptimizerState, Variant};
use mlkit::pipeline::MinMaxScaler;
use proptest::prelude::*;

fn variant() -> impl Strategy<Value = Variant> {
    prop::sample::select(Variant::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn modulation_stays_in_range(v in variant(), seed in any::<u64>()) {
        let r = xi_bound_run(v, 200, &mut RngStream::from_seed(seed));
        prop_assert!(r.is_ok(), "{:?}", r);
    }

    #[test]
    fn modulation_in_range_for_constant_gradients(v in variant(), g in -1e3f64..1e3, len in 1usize..6) {
        let mut s = OptimizerState::new(v, &[len], OptimConfig::default(), Some(RngStream::from_seed(0))).unwrap();
        let mut theta = Tensor::zeros(&[len]);
        for _ in 0..40 {
            let xi = s.step(&mut theta, &Tensor::filled(&[len], g)).unwrap();
            prop_assert!(check_xi(v, &xi).is_ok());
        }
    }

    #[test]
    fn diffgrad_modulation_is_strictly_below_one_when_representable(a in -15.0f64..15.0, b in -15.0f64..15.0) {
        let mut s = OptimizerState::new(Variant::DiffGrad, &[1], OptimConfig::default(), None).unwrap();
        let mut theta = Tensor::scalar(0.0);
        for g in [a, b] {
            let xi = s.step(&mut theta, &Tensor::scalar(g)).unwrap().data()[0];
            prop_assert!((0.5..1.0).contains(&xi), "{}", xi);
        }
    }

    #[test]
    fn cos1_multiplier_is_periodic_and_bounded(t in 0u64..100_000) {
        let a = cos1_lr(t, 30);
        prop_assert!((1.0..=2.0).contains(&a));
        prop_assert_eq!(a, cos1_lr(t + 30, 30));
    }

    #[test]
    fn clipped_norm_respects_threshold(
        sizes in prop::collection::vec(1usize..20, 1..5),
        scale in 1e-6f64..1e6,
        threshold in 1e-3f64..10.0,
        seed in any::<u64>(),
    ) {
        let mut rng = RngStream::from_seed(seed);
        let mut grads: Vec<Tensor> = sizes
            .iter()
            .map(|&n| Tensor::vector((0..n).map(|_| scale * rng.normal()).collect()))
            .collect();
        let before = clip_gradients_l2(&mut grads, threshold).unwrap();
        let after = grads.iter().map(Tensor::sum_squares).sum::<f64>().sqrt();
        prop_assert!(after <= threshold + 1e-12);
        if before <= threshold {
            prop_assert_eq!(after, before);
        }
    }

    #[test]
    fn average_fusion_stays_between_members(
        members in 1usize..6,
        rows in 1usize..5,
        cols in 1usize..5,
        seed in any::<u64>(),
    ) {
        let mut rng = RngStream::from_seed(seed);
        let scores: Vec<Tensor> = (0..members)
            .map(|_| Tensor::new(vec![rows, cols], (0..rows * cols).map(|_| rng.uniform()).collect()).unwrap())
            .collect();
        let fused = fuse_average(&scores).unwrap();
        for (k, &v) in fused.data().iter().enumerate() {
            let lo = scores.iter().map(|s| s.data()[k]).fold(f64::INFINITY, f64::min);
            let hi = scores.iter().map(|s| s.data()[k]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(v >= lo - 1e-15 && v <= hi + 1e-15);
        }
    }

    #[test]
    fn kfold_is_a_partition(n in 2usize..200, k in 2usize..12, stratified: bool, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let mut rng = RngStream::from_seed(seed);
        let labels = Tensor::new(vec![n, 2], (0..2 * n).map(|_| rng.below(2) as f64).collect()).unwrap();
        let folds = kfold_split(n, k, stratified.then_some(&labels), &mut rng).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut seen = vec![0usize; n];
        for f in &folds {
            prop_assert!(!f.test.is_empty());
            prop_assert_eq!(f.train.len() + f.test.len(), n);
            for &i in &f.test {
                seen[i] += 1;
            }
            let mut all: Vec<usize> = f.train.iter().chain(&f.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
        if !stratified {
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn holdout_is_a_partition(n in 2usize..300, fraction in 0.01f64..0.99, seed in any::<u64>()) {
        let f = holdout_split(n, fraction, &mut RngStream::from_seed(seed)).unwrap();
        prop_assert!(!f.train.is_empty() && !f.test.is_empty());
        let mut all: Vec<usize> = f.train.iter().chain(&f.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn minmax_maps_into_unit_interval(
        rows in 1usize..20,
        cols in 1usize..6,
        spread in 1e-3f64..1e3,
        seed in any::<u64>(),
    ) {
        let mut rng = RngStream::from_seed(seed);
        let mut draw = |r: usize| {
            Tensor::new(vec![r, cols], (0..r * cols).map(|_| spread * rng.normal()).collect()).unwrap()
        };
        let train = draw(rows);
        let other = draw(7);
        let scaler = MinMaxScaler::fit(&train).unwrap();
        for t in [&train, &other] {
            let out = scaler.apply(t).unwrap();
            prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn metrics_lie_in_their_ranges(seed in any::<u64>()) {
        let ps = random_prediction_set(&mut RngStream::from_seed(seed));
        let unit = [
            hamming_loss(&ps),
            one_error(&ps),
            aiming(&ps),
            recall(&ps),
            accuracy_ml(&ps),
            absolute_true(&ps),
            absolute_false(&ps),
        ];
        for v in unit {
            prop_assert!((0.0..=1.0).contains(&v), "{}", v);
        }
        for v in [ranking_loss(&ps).ok(), average_precision(&ps).ok()].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let c = coverage(&ps);
        prop_assert!(c >= 0.0 && c <= (ps.labels() - 1) as f64);
    }
}
