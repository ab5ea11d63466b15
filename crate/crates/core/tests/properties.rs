use proptest::prelude::*;
use wsrgan_core::discriminator::{Discriminator, DiscriminatorConfig};
use wsrgan_core::dsp::si_snr;
use wsrgan_core::training::{lr_schedule, mixup, SiSnrProxy, QualityOracle};
use wsrgan_core::Tensor;

proptest! {
    #[test]
    fn mixup_stays_between_endpoints(
        pairs in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..64),
        lambda in 0.0..=1.0f64,
    ) {
        let n = pairs.len();
        let x = Tensor::new(&[1, 1, n], pairs.iter().map(|p| p.0).collect()).unwrap();
        let e = Tensor::new(&[1, 1, n], pairs.iter().map(|p| p.1).collect()).unwrap();
        let m = mixup(&x, &e, lambda).unwrap();
        for ((&a, &b), &v) in x.data().iter().zip(e.data()).zip(m.data()) {
            prop_assert!(v >= a.min(b) - 1e-15 && v <= a.max(b) + 1e-15);
        }
    }

    #[test]
    fn lr_stays_within_zero_and_peak(step in 0usize..5000, total in 1usize..5000, frac in 0.0..=1.0f64) {
        let lr = lr_schedule(step, total, 2e-4, frac);
        prop_assert!((0.0..=2e-4).contains(&lr));
    }

    #[test]
    fn si_snr_is_scale_invariant(
        x in prop::collection::vec(-1.0..1.0f64, 16..64),
        scale in 0.1..10.0f64,
    ) {
        let e: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + 0.1 * (i as f64).sin()).collect();
        prop_assume!(x.iter().any(|v| v.abs() > 1e-3));
        let a = si_snr(&x, &e).unwrap();
        let b = si_snr(&x, &e.iter().map(|v| v * scale).collect::<Vec<_>>()).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn proxy_score_is_a_unit_interval_value(
        x in prop::collection::vec(-1.0..1.0f64, 16..64),
        noise in 0.0..2.0f64,
    ) {
        prop_assume!(x.iter().any(|v| v.abs() > 1e-3));
        let e: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + noise * ((i * 37 % 11) as f64 - 5.0) / 5.0).collect();
        let q = SiSnrProxy.score(&x, &e).unwrap();
        prop_assert!((0.0..=1.0).contains(&q));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn discriminator_scores_stay_in_range(
        x in prop::collection::vec(-3.0..3.0f64, 128),
        u in prop::collection::vec(-3.0..3.0f64, 128),
        seed in 0u64..1000,
    ) {
        let cfg = DiscriminatorConfig::tiny();
        let sigma = cfg.sigma_max;
        let d = Discriminator::<f64>::new(cfg, seed).unwrap();
        let s = d.score(&Tensor::new(&[1, 1, 128], x).unwrap(), &Tensor::new(&[1, 1, 128], u).unwrap()).unwrap();
        prop_assert!(s.data()[0] > 0.0 && s.data()[0] < sigma);
    }
}
