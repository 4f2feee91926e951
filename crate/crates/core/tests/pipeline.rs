use proptest::prelude::*;

use zigzag_trng::analysis::markov::TransitionCounts;
use zigzag_trng::postprocess::{PostprocessPlan, DEFAULT_EPSILON};
use zigzag_trng::stats::{nist, run_battery_on_file, BatteryConfig, TestStatus};
use zigzag_trng::{
    iterate_orbit, run_pipeline, sample_slope_deltas, BitStream, Error, InitialState, PiecewiseAffineMap, SimConfig,
};

fn cfg(stages: usize, n_bits: usize, seed: u64, noise_std: f64, x0: InitialState) -> SimConfig {
    SimConfig {
        noise_std,
        seed,
        stages,
        n_bits,
        discard: 0,
        x0,
    }
}

#[test]
fn identical_config_is_bit_identical() {
    let maps = sample_slope_deltas(0.02, 4, 8).unwrap().stage_maps().unwrap();
    let c = SimConfig {
        seed: 99,
        n_bits: 50_000,
        discard: 20,
        ..Default::default()
    };
    let a = run_pipeline(&maps, &c).unwrap();
    let b = run_pipeline(&maps, &c).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 50_000);
    assert_eq!(a.meta().seed, Some(99));
}

#[test]
fn different_seeds_decorrelate() {
    let maps = vec![PiecewiseAffineMap::zigzag(); 4];
    let a = run_pipeline(&maps, &SimConfig { seed: 1, n_bits: 100_000, discard: 20, ..Default::default() }).unwrap();
    let b = run_pipeline(&maps, &SimConfig { seed: 2, n_bits: 100_000, discard: 20, ..Default::default() }).unwrap();
    let agree = a.iter().zip(b.iter()).filter(|(x, y)| x == y).count() as f64 / a.len() as f64;
    assert!(agree < 0.6, "agreement {agree}");
}

#[test]
fn discard_only_drops_a_prefix() {
    let maps = sample_slope_deltas(0.02, 4, 3).unwrap().stage_maps().unwrap();
    let base = SimConfig {
        seed: 5,
        n_bits: 2_000,
        ..Default::default()
    };
    let full = run_pipeline(&maps, &SimConfig { discard: 0, n_bits: 2_037, ..base.clone() }).unwrap();
    for discard in [1, 4, 20, 37] {
        let cut = run_pipeline(&maps, &SimConfig { discard, n_bits: 2_037 - discard, ..base.clone() }).unwrap();
        assert_eq!(cut.to_bits(), full.to_bits()[discard..], "discard {discard}");
    }
}

#[test]
fn identical_zigzag_stages_match_single_stage() {
    let z = PiecewiseAffineMap::zigzag();
    let one = run_pipeline(&[z.clone()], &cfg(1, 40, 0, 0.0, InitialState::Fixed(0.3))).unwrap();
    let four = run_pipeline(&vec![z; 4], &cfg(4, 40, 0, 0.0, InitialState::Fixed(0.3))).unwrap();
    assert_eq!(one, BitStream::from_bits(&four.to_bits()).with_meta(one.meta().clone()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zigzag_bits_equal_tent_bits_without_noise(x0 in 0.001f64..0.999) {
        let z = run_pipeline(&[PiecewiseAffineMap::zigzag()], &cfg(1, 40, 0, 0.0, InitialState::Fixed(x0))).unwrap();
        let t = run_pipeline(&[PiecewiseAffineMap::tent()], &cfg(1, 40, 0, 0.0, InitialState::Fixed(x0))).unwrap();
        prop_assert_eq!(z.to_bits(), t.to_bits());
    }

    #[test]
    fn noisy_zigzag_stays_confined(seed in any::<u64>(), x0 in -0.99f64..0.99) {
        let orbit = iterate_orbit(&PiecewiseAffineMap::zigzag(), x0, 100_000, 1e-3, seed).unwrap();
        // Noise of 1e-3 can only nudge a state a few sigma past the boundary.
        prop_assert!(orbit.iter().all(|x| x.abs() <= 1.01));
    }
}

#[test]
fn zigzag_from_zero_is_lifted_by_noise() {
    let orbit = iterate_orbit(&PiecewiseAffineMap::zigzag(), 0.0, 100_000, 1e-6, 17).unwrap();
    let first_out = orbit.iter().position(|x| x.abs() >= 1e-3).unwrap();
    assert!(first_out <= 40, "left the noise floor after {first_out} steps");
}

#[test]
fn perturbed_tent_escapes_with_its_position() {
    match iterate_orbit(&PiecewiseAffineMap::tent(), 0.3, 1_000_000, 1e-3, 3) {
        Err(Error::OrbitEscape { step, .. }) => assert!(step > 0),
        other => panic!("expected an escape, got {other:?}"),
    }
}

#[test]
fn varied_pipeline_passes_frequency_after_postprocessing() {
    let maps = sample_slope_deltas(0.02, 4, 2).unwrap().stage_maps().unwrap();
    let bits = run_pipeline(&maps, &SimConfig { seed: 2, n_bits: 200_000, discard: 20, ..Default::default() }).unwrap();
    assert!(nist::frequency(&bits.to_bits()).unwrap() < 0.01);
    let post = PostprocessPlan::auto(&bits, DEFAULT_EPSILON, 4).unwrap().apply(&bits).unwrap();
    assert!(nist::frequency(&post.to_bits()).unwrap() >= 0.01);
    assert!(post.meta().postprocess.len() == 2);
    // The debiased stream carries no first-order memory worth measuring.
    let m = TransitionCounts::from_bits(&post).to_model().unwrap();
    assert!(m.lambda1 < 0.01, "lambda1 {}", m.lambda1);
}

#[test]
fn stream_files_round_trip_and_detect_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let maps = vec![PiecewiseAffineMap::zigzag(); 4];
    let bits = run_pipeline(&maps, &SimConfig { seed: 4, n_bits: 20_003, ..Default::default() }).unwrap();

    let packed = dir.path().join("s.bin");
    bits.write(&packed).unwrap();
    assert_eq!(BitStream::read(&packed).unwrap(), bits);

    let ascii = dir.path().join("s.txt");
    bits.write_ascii(&ascii).unwrap();
    assert_eq!(BitStream::read_any(&ascii).unwrap().to_bits(), bits.to_bits());

    let report = run_battery_on_file(&packed, 0.01, &BatteryConfig::default()).unwrap();
    assert_eq!(report.n_bits, 20_003);
    assert_ne!(report.get("frequency").unwrap().status, TestStatus::InsufficientData);

    let sidecar = BitStream::sidecar_path(&packed);
    let text = std::fs::read_to_string(&sidecar).unwrap();
    std::fs::write(&sidecar, text.replace("20003", "30003")).unwrap();
    assert!(matches!(BitStream::read(&packed), Err(Error::CorruptStream(_))));
    assert!(matches!(
        run_battery_on_file(&packed, 0.01, &BatteryConfig::default()),
        Err(Error::CorruptStream(_))
    ));
}
