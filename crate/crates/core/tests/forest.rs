use intrarc::forest::{evaluate, split_holdout, train, Node, N_INPUTS, QP_INPUT};
use intrarc::{
    generate_dataset, Error, ForestHyperparams, ForestModel, FrameFeatures, ModelFileError, SimParams, TrainingSample,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PIX: usize = 1920 * 1080;

fn ctx() -> FrameFeatures {
    FrameFeatures::new(0, [0.3, 0.5, 0.1, 0.5, 0.1, 0.5])
}

fn q_split_samples() -> Vec<TrainingSample> {
    (0..10)
        .map(|i| {
            let (q, bits) = if i < 5 { (20, 8000.0) } else { (40, 1000.0) };
            TrainingSample { features: ctx().with_index(i), q, bits }
        })
        .collect()
}

trait WithIndex {
    fn with_index(self, i: usize) -> Self;
}

impl WithIndex for FrameFeatures {
    fn with_index(mut self, i: usize) -> Self {
        self.frame_index = i;
        self
    }
}

fn hp(n_estimators: usize, max_depth: usize) -> ForestHyperparams {
    ForestHyperparams { n_estimators, max_depth, ..Default::default() }
}

fn random_features(rng: &mut impl Rng) -> FrameFeatures {
    FrameFeatures::new(
        0,
        [
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..0.5),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..0.5),
            rng.random_range(0.0..1.0),
        ],
    )
}

/// Exhaustive best split over all features and midpoints; returns (feature, threshold, sse reduction).
fn brute_force_split(samples: &[TrainingSample]) -> Vec<(usize, f64, f64)> {
    let sse = |ys: &[f64]| {
        let m = ys.iter().sum::<f64>() / ys.len() as f64;
        ys.iter().map(|y| (y - m).powi(2)).sum::<f64>()
    };
    let all: Vec<f64> = samples.iter().map(|s| s.bits).collect();
    let parent = sse(&all);
    let mut gains = Vec::new();
    for k in 0..N_INPUTS {
        let mut values: Vec<f64> = samples.iter().map(|s| s.input()[k]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let (l, r): (Vec<&TrainingSample>, Vec<&TrainingSample>) = samples.iter().partition(|s| s.input()[k] <= t);
            let yl: Vec<f64> = l.iter().map(|s| s.bits).collect();
            let yr: Vec<f64> = r.iter().map(|s| s.bits).collect();
            gains.push((k, t, parent - sse(&yl) - sse(&yr)));
        }
    }
    gains
}

#[test]
fn constant_targets_give_single_leaves() {
    let samples: Vec<_> = q_split_samples().into_iter().map(|s| TrainingSample { bits: 1000.0, ..s }).collect();
    let model = train(&samples, &hp(10, 12)).unwrap();
    for tree in model.trees() {
        assert_eq!(tree.nodes(), &[Node::Leaf { value: 1000.0 }]);
    }
    assert_eq!(model.predict(&ctx(), 33).unwrap(), 1000.0);
    assert!(model.importance().no_splits);
}

#[test]
fn qp_is_the_only_useful_split() {
    let samples = q_split_samples();
    let gains = brute_force_split(&samples);
    let useful: Vec<_> = gains.iter().filter(|g| g.2 > 0.0).collect();
    assert_eq!(useful.len(), 1);
    assert_eq!((useful[0].0, useful[0].1), (QP_INPUT, 30.0));

    let model = train(&samples, &hp(100, 1)).unwrap();
    let mut single_class = Vec::new();
    for (t, tree) in model.trees().iter().enumerate() {
        match tree.nodes()[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!((feature as usize, threshold), (QP_INPUT, 30.0));
                assert_eq!(tree.nodes().len(), 3);
            }
            Node::Leaf { value } => single_class.push((t, value)),
        }
    }
    // Tree 13 bootstraps only q = 40 rows and cannot split.
    assert_eq!(single_class, [(13, 1000.0)]);
    assert_eq!(model.predict(&ctx(), 20).unwrap(), (99.0 * 8000.0 + 1000.0) / 100.0);
    assert_eq!(model.predict(&ctx(), 40).unwrap(), 1000.0);
    let imp = model.importance();
    assert_eq!(imp.weights[QP_INPUT], 1.0);
    assert_eq!(imp.weights.iter().sum::<f64>(), 1.0);

    let small = train(&samples, &hp(10, 1)).unwrap();
    assert_eq!(small.predict(&ctx(), 20).unwrap(), 8000.0);
    assert_eq!(small.predict(&ctx(), 40).unwrap(), 1000.0);
}

#[test]
fn training_is_reproducible_across_thread_counts() {
    let data = generate_dataset(800, PIX, &SimParams { noise_sigma: 0.1, ..Default::default() }, 4).unwrap();
    let h = hp(16, 8);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| train(&data, &h)).unwrap().to_bytes();
    let b = four.install(|| train(&data, &h)).unwrap().to_bytes();
    assert_eq!(a, b);
    let c = train(&data, &ForestHyperparams { seed: 1, ..h }).unwrap().to_bytes();
    assert_ne!(a, c);
}

#[test]
fn save_load_predicts_identically() {
    let data = generate_dataset(1000, PIX, &SimParams { noise_sigma: 0.1, ..Default::default() }, 9).unwrap();
    let model = train(&data, &hp(20, 12)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    model.save(&path).unwrap();
    let back = ForestModel::load(&path).unwrap();
    assert_eq!(back, model);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let f = random_features(&mut rng);
        let q = rng.random_range(0..=63);
        assert_eq!(back.predict(&f, q).unwrap().to_bits(), model.predict(&f, q).unwrap().to_bits());
    }
}

#[test]
fn corrupted_model_files_are_rejected() {
    let model = train(&q_split_samples(), &hp(3, 1)).unwrap();
    let bytes = model.to_bytes();

    let mut flipped = bytes.clone();
    let node_byte = bytes.len() - 12;
    flipped[node_byte] ^= 0x10;
    assert!(matches!(ForestModel::from_bytes(&flipped), Err(Error::Model(ModelFileError::Checksum))));

    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(matches!(ForestModel::from_bytes(&magic), Err(Error::Model(ModelFileError::BadMagic))));

    let mut version = bytes.clone();
    version[4] = 9;
    assert!(matches!(
        ForestModel::from_bytes(&version),
        Err(Error::Model(ModelFileError::VersionMismatch { found: 9, expected: 1 }))
    ));

    assert!(matches!(ForestModel::from_bytes(&bytes[..bytes.len() - 7]), Err(Error::Model(ModelFileError::Truncated))));
}

#[test]
fn deeper_trees_fit_tighter_and_weigh_more() {
    let data = generate_dataset(3000, PIX, &SimParams { noise_sigma: 0.1, ..Default::default() }, 2).unwrap();
    let mut last_mse = f64::INFINITY;
    let mut last_len = 0;
    for depth in [4, 8, 12] {
        let model = train(&data, &hp(30, depth)).unwrap();
        let mse = evaluate(&model, &data).unwrap().mse;
        let len = model.to_bytes().len();
        assert!(mse <= last_mse, "depth {depth}: {mse} > {last_mse}");
        assert!(len > last_len);
        last_mse = mse;
        last_len = len;
    }
}

#[test]
fn predictions_fall_with_qp() {
    let data = generate_dataset(4000, PIX, &SimParams { noise_sigma: 0.1, ..Default::default() }, 6).unwrap();
    let model = train(&data, &hp(30, 12)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut lo_q, mut hi_q) = (0.0, 0.0);
    for _ in 0..100 {
        let f = random_features(&mut rng);
        lo_q += model.predict(&f, 24).unwrap();
        hi_q += model.predict(&f, 44).unwrap();
    }
    assert!(lo_q > hi_q);
}

#[test]
fn holdout_fit_is_strong() {
    let data = generate_dataset(4000, PIX, &SimParams { noise_sigma: 0.1, ..Default::default() }, 12).unwrap();
    let (fit, test) = split_holdout(&data, 0.2, 0).unwrap();
    assert_eq!((fit.len(), test.len()), (3200, 800));
    let model = train(&fit, &hp(40, 12)).unwrap();
    let scores = evaluate(&model, &test).unwrap();
    assert!(scores.r2 >= 0.90, "{scores:?}");
}

#[test]
fn importance_concentrates_on_driving_features() {
    let data = generate_dataset(3000, PIX, &SimParams::default(), 8).unwrap();
    let model = train(&data, &hp(30, 12)).unwrap();
    let w = model.importance().weights;
    assert!(w[0] + w[QP_INPUT] >= 0.95, "{w:?}");
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn rejects_bad_inputs() {
    assert!(train(&[], &hp(1, 1)).is_err());
    let mut s = q_split_samples();
    s[3].features.e_y = f64::NAN;
    assert!(train(&s, &hp(1, 1)).is_err());
    assert!(train(&q_split_samples(), &ForestHyperparams { min_samples_split: 1, ..hp(1, 1) }).is_err());
    let model = train(&q_split_samples(), &hp(1, 1)).unwrap();
    assert!(matches!(model.predict(&ctx(), 64), Err(Error::QpOutOfRange(64))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn predictions_stay_within_targets(seed in any::<u64>(), n in 10usize..120, depth in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<TrainingSample> = (0..n)
            .map(|i| TrainingSample {
                features: random_features(&mut rng).with_index(i),
                q: rng.random_range(0..=63),
                bits: rng.random_range(1.0..1e6),
            })
            .collect();
        let model = train(&data, &ForestHyperparams { n_estimators: 8, max_depth: depth, seed, ..Default::default() }).unwrap();
        let lo = data.iter().map(|s| s.bits).fold(f64::INFINITY, f64::min);
        let hi = data.iter().map(|s| s.bits).fold(0.0, f64::max);
        for _ in 0..50 {
            let p = model.predict(&random_features(&mut rng), rng.random_range(0..=63)).unwrap();
            prop_assert!(lo <= p && p <= hi);
        }
    }
}
