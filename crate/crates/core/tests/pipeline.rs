use diffmon::eval::{split_data, ExperimentConfig};
use diffmon::gak::{gak_normalized, GakParams};
use diffmon::signal::{loso_splits, synth_activity_dataset, SynthConfig, TimeWindow};
use diffmon::similarity::{multi_axis_score, MetricKind, ScoreParams};
use diffmon::spectral::{istft, psd_axes, stft, StftConfig, WelchConfig};
use ndarray::Array2;
use proptest::prelude::*;

fn window<T: diffmon::Real>(values: &[f64], channels: usize) -> TimeWindow<T> {
    let len = values.len() / channels;
    let data = Array2::from_shape_fn((channels, len), |(c, t)| T::of(values[c * len + t]));
    TimeWindow::new(data, 50.0).unwrap()
}

fn small_corpus() -> diffmon::Dataset {
    let cfg = SynthConfig {
        participants: 3,
        windows_per_participant: 8,
        ..SynthConfig::four_class()
    };
    synth_activity_dataset(&cfg).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn psd_self_scores_are_one(values in proptest::collection::vec(-3.0f64..3.0, 2 * 80)) {
        let x: TimeWindow<f64> = window(&values, 2);
        let psd = psd_axes(&x, &WelchConfig::default()).unwrap();
        prop_assume!(psd.iter().all(|a| a.iter().any(|&v| v > 1e-9)));
        let cos = multi_axis_score(&psd, &psd, MetricKind::CosinePsd, &ScoreParams::default()).unwrap();
        let gak = multi_axis_score(&psd, &psd, MetricKind::COptGak, &ScoreParams::with_sigma(0.5)).unwrap();
        prop_assert!((cos - 1.0).abs() < 1e-12);
        prop_assert!((gak - 1.0).abs() < 1e-12);
    }

    #[test]
    fn f32_and_f64_pipelines_agree(values in proptest::collection::vec(-3.0f64..3.0, 3 * 72)) {
        let x64: TimeWindow<f64> = window(&values, 3);
        let x32: TimeWindow<f32> = window(&values, 3);
        let cfg = StftConfig::default();
        let back64 = istft(&stft(&x64, &cfg).unwrap()).unwrap();
        let back32 = istft(&stft(&x32, &cfg).unwrap()).unwrap();
        for c in 0..3 {
            for t in 1..71 {
                let a = back64.channel(c)[t];
                let b = f64::from(back32.channel(c)[t]);
                prop_assert!((a - values[c * 72 + t]).abs() < 1e-9);
                prop_assert!((a - b).abs() < 1e-4);
            }
        }
        let p64 = psd_axes(&x64, &WelchConfig::default()).unwrap();
        let p32 = psd_axes(&x32, &WelchConfig::default()).unwrap();
        for (a, b) in p64.iter().flatten().zip(p32.iter().flatten()) {
            prop_assert!((a - f64::from(*b)).abs() <= 1e-3 * a.abs().max(1.0));
        }
    }

    #[test]
    fn gak_on_psds_is_bounded(
        a in proptest::collection::vec(-3.0f64..3.0, 64),
        b in proptest::collection::vec(-3.0f64..3.0, 64),
        sigma in 0.05f64..2.0,
    ) {
        let pa = &psd_axes(&window::<f64>(&a, 1), &WelchConfig::default()).unwrap()[0];
        let pb = &psd_axes(&window::<f64>(&b, 1), &WelchConfig::default()).unwrap()[0];
        let k = gak_normalized(pa, pb, &GakParams::new(sigma)).unwrap();
        prop_assert!((0.0..=1.0).contains(&k));
    }
}

#[test]
fn loso_splits_keep_the_test_participant_out() {
    let ds = small_corpus();
    let cfg = ExperimentConfig::desk();
    let splits = loso_splits(&ds).unwrap();
    assert_eq!(splits.len(), 3);
    for split in &splits {
        let data = split_data(&ds, split, &cfg).unwrap();
        assert!(data.test.windows().iter().all(|w| w.participant == split.test));
        for set in [&data.full, &data.two_sample, &data.validation] {
            assert!(set.windows().iter().all(|w| w.participant != split.test));
        }
        for two in data.two_sample.windows() {
            assert!(!data.validation.windows().contains(two));
        }
        assert_eq!(data.full.windows().len() + data.test.windows().len(), ds.windows().len());
    }
}

#[test]
fn same_class_psds_score_higher_than_cross_class() {
    let ds = small_corpus();
    let welch = WelchConfig::default();
    let psds = |class| -> Vec<Vec<Vec<f64>>> {
        ds.of_class(class)
            .windows()
            .iter()
            .map(|w| psd_axes(&w.window, &welch).unwrap())
            .collect()
    };
    let (walking, cycling) = (psds(0), psds(3));
    let mean = |a: &[Vec<Vec<f64>>], b: &[Vec<Vec<f64>>]| {
        let mut total = 0.0;
        for x in a {
            for y in b {
                total += multi_axis_score(x, y, MetricKind::CosinePsd, &ScoreParams::default()).unwrap();
            }
        }
        total / (a.len() * b.len()) as f64
    };
    assert!(mean(&walking, &walking) > mean(&walking, &cycling));
}
