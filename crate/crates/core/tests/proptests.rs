//! Invariants over randomly drawn inputs.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qgan_mark::experiments::{collision_probability, CollisionQuery};
use qgan_mark::extractor::{verify_ownership, ClassifierConfig, Decision, WatermarkClassifier};
use qgan_mark::imaging::{fid, gaussian_stats, upscale_pixels, Interpolation};
use qgan_mark::qgan::{normalize_patch, Image8, LabeledImage, LabeledImageSet};
use qgan_mark::sim::{apply_readout_error, run_circuit, CircuitSpec, Gate, HardwareProfile, NoiseModel, ProbVector, Program};

fn circuit() -> impl Strategy<Value = CircuitSpec> {
    (2usize..5).prop_flat_map(|n| {
        let gate = prop_oneof![
            (0..n, -7.0f64..7.0).prop_map(|(q, t)| Gate::ry(q, t)),
            (0..n - 1).prop_map(|q| Gate::cz(q, q + 1)),
            (0..n).prop_map(|qubit| Gate::X { qubit }),
        ];
        prop::collection::vec(gate, 1..25).prop_map(move |ops| CircuitSpec::new(n, ops).unwrap())
    })
}

fn profile() -> impl Strategy<Value = HardwareProfile> {
    (10.0f64..300.0, 0.1f64..1.0, 0.0f64..0.2, 0.0f64..0.05)
        .prop_map(|(t1, r, ro, px)| HardwareProfile::new("random", 5, t1, t1 * r * 2.0, ro, px))
}

fn distribution(n: usize) -> impl Strategy<Value = ProbVector> {
    prop::collection::vec(0.001f64..1.0, 1 << n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        ProbVector::new(v.iter().map(|x| x / s).collect()).unwrap()
    })
}

fn check_distribution(p: &ProbVector) -> Result<(), TestCaseError> {
    prop_assert!(p.as_slice().iter().all(|&x| x >= -1e-15));
    prop_assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-10);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noisy_state_stays_physical(c in circuit(), prof in profile()) {
        let noise = NoiseModel::from_profile(&prof).unwrap();
        let rho = Program::compile(&c, Some(&noise)).unwrap().evolve().unwrap();
        prop_assert!(rho.check_invariants().is_ok());
        check_distribution(&run_circuit(&c, Some(&prof)).unwrap())?;
    }

    #[test]
    fn readout_preserves_distribution(p in distribution(4), prof in profile()) {
        check_distribution(&apply_readout_error(&p, &prof).unwrap())?;
    }

    #[test]
    fn fid_is_symmetric_and_non_negative(seed in any::<u64>(), d in 1usize..6) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<Vec<f64>> { (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect() };
        let (a, b) = (draw(30), draw(25));
        let ra: Vec<&[f64]> = a.iter().map(Vec::as_slice).collect();
        let rb: Vec<&[f64]> = b.iter().map(Vec::as_slice).collect();
        let (sa, sb) = (gaussian_stats(&ra).unwrap(), gaussian_stats(&rb).unwrap());
        let (ab, ba) = (fid(&sa, &sb).unwrap(), fid(&sb, &sa).unwrap());
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-9 * (1.0 + ab));
    }

    #[test]
    fn collision_decreases_with_sequence_length(n in 4usize..40, k in 0usize..38) {
        prop_assume!(k + 1 <= n - 2);
        let p = |k| collision_probability(CollisionQuery { n, k }).unwrap();
        prop_assert!(p(k + 1) < p(k));
        prop_assert!(p(k) > 0.0 && p(k) <= 1.0);
    }

    #[test]
    fn normalised_patch_peaks_at_one(p in distribution(4)) {
        let x = normalize_patch(&p).unwrap();
        prop_assert_eq!(x.iter().cloned().fold(f64::MIN, f64::max), 1.0);
        prop_assert!(x.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn upscaling_stays_within_source_range(px in prop::collection::vec(0.0f64..1.0, 64), side in 8usize..80, bilinear in any::<bool>()) {
        let method = if bilinear { Interpolation::Bilinear } else { Interpolation::Nearest };
        let out = upscale_pixels(&px, 8, side, method);
        let lo = px.iter().cloned().fold(f64::MAX, f64::min);
        let hi = px.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert_eq!(out.pixels.len(), side * side);
        prop_assert!(out.pixels.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
    }

    #[test]
    fn dataset_csv_round_trips(rows in prop::collection::vec(("[a-z_>]{1,12}", "[a-z_]{1,12}", any::<u64>(), prop::collection::vec(0.0f64..=1.0, 64)), 0..6)) {
        let set = LabeledImageSet {
            images: rows.into_iter().map(|(t, i, seed, px)| LabeledImage {
                train_label: t,
                infer_label: i,
                seed,
                image: Image8::new(px).unwrap(),
            }).collect(),
        };
        let mut buf = Vec::new();
        set.write_to(&mut buf).unwrap();
        prop_assert_eq!(LabeledImageSet::read_from(buf.as_slice(), "mem").unwrap(), set);
    }

    #[test]
    fn lowering_the_threshold_never_revokes_ownership(seed in any::<u64>(), t in 0.0f64..1.0, lower in 0.0f64..1.0) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = ClassifierConfig { input_side: 10, channels: 1, filters: vec![2], dense: 4, ..ClassifierConfig::default() };
        let mut network = cfg.build(2).unwrap();
        network.params.iter_mut().for_each(|p| *p = rng.random_range(-1.0..1.0));
        let c = WatermarkClassifier { config: cfg, labels: vec!["a".into(), "b".into()], network, history: vec![], threshold: None };
        let imgs: Vec<Image8> = (0..5).map(|_| Image8::new((0..64).map(|_| rng.random::<f64>()).collect()).unwrap()).collect();
        let hi = verify_ownership(&c, &imgs, "a", t).unwrap();
        let lo = verify_ownership(&c, &imgs, "a", t * lower).unwrap();
        prop_assert_eq!(hi.probability, lo.probability);
        prop_assert_eq!(&hi.predicted, &lo.predicted);
        if hi.decision == Decision::Owned {
            prop_assert_eq!(lo.decision, Decision::Owned);
        }
    }
}
