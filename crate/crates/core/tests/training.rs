use wsrgan_core::discriminator::{Discriminator, DiscriminatorConfig};
use wsrgan_core::dsp::MrstftConfig;
use wsrgan_core::generator::{Generator, GeneratorConfig};
use wsrgan_core::parallel::single_threaded;
use wsrgan_core::training::{make_synthetic_dataset, train, SiSnrProxy, TrainConfig, Trainer};

fn small() -> (Generator<f32>, Discriminator<f32>, TrainConfig) {
    let gen = Generator::new(GeneratorConfig::tiny(), 3).unwrap();
    let disc = Discriminator::new(DiscriminatorConfig::tiny(), 4).unwrap();
    let cfg = TrainConfig {
        iterations: 3,
        batch_size: 2,
        crop_len: 512,
        mrstft: MrstftConfig::new([(128, 32, 128), (256, 64, 256)], 1e-7).unwrap(),
        revecho: true,
        ..TrainConfig::default()
    };
    (gen, disc, cfg)
}

fn trainable<S: wsrgan_core::Scalar>(store: &wsrgan_core::params::ParamStore<S>) -> Vec<Vec<S>> {
    store.entries().iter().filter(|e| e.trainable).map(|e| e.tensor.data().to_vec()).collect()
}

#[test]
fn zero_learning_rate_leaves_weights_unchanged() {
    let (mut gen, mut disc, mut cfg) = small();
    cfg.peak_lr = 0.0;
    let data = make_synthetic_dataset(4, 1024, 0).unwrap();
    let (g0, d0) = (trainable(&gen.store), trainable(&disc.store));
    let mut t = Trainer::new(cfg, &gen, &disc).unwrap();
    t.step(&mut gen, &mut disc, &data, &SiSnrProxy).unwrap();
    assert_eq!(g0, trainable(&gen.store));
    assert_eq!(d0, trainable(&disc.store));
}

#[test]
fn training_is_bit_reproducible_on_one_thread() {
    let data = make_synthetic_dataset(4, 1024, 0).unwrap();
    let run = || {
        single_threaded(|| {
            let (mut gen, mut disc, cfg) = small();
            let hist = train(&mut gen, &mut disc, &data, &cfg, &SiSnrProxy, &mut |_, _, _| Ok(())).unwrap();
            (hist, trainable(&gen.store), trainable(&disc.store))
        })
    };
    let (a, b) = (run(), run());
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    assert_eq!(a.2, b.2);
}

#[test]
fn checkpoints_follow_the_period() {
    let (mut gen, mut disc, mut cfg) = small();
    cfg.iterations = 5;
    cfg.checkpoint_every = 2;
    let data = make_synthetic_dataset(4, 1024, 0).unwrap();
    let mut seen = Vec::new();
    let hist = train(&mut gen, &mut disc, &data, &cfg, &SiSnrProxy, &mut |s, _, _| {
        seen.push(s);
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, vec![2, 4, 5]);
    assert_eq!(hist.len(), 5);
    assert!(hist.iter().all(|r| r.g_loss.is_finite() && r.d_loss.is_finite()));
}

#[test]
fn empty_dataset_is_an_error() {
    let (mut gen, mut disc, cfg) = small();
    assert!(train(&mut gen, &mut disc, &[], &cfg, &SiSnrProxy, &mut |_, _, _| Ok(())).is_err());
}
