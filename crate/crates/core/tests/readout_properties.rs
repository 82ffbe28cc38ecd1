use nvp1_core::readout::correlation::{correlation_c, expected_c, expected_c_exact};
use nvp1_core::readout::fidelity::{init_readout_fidelity, optimize_thresholds, FidelityMode, ThresholdPolicy, ThresholdSearch};
use nvp1_core::readout::mixture::GaussianComponent;
use nvp1_core::readout::model::{binomial_pmf, state_index, state_label, ShotMixture, SpinReadoutModel, P1_STATES};
use nvp1_core::readout::record::{Bin, MeasurementRecord, OutcomePairs, OutcomeRange, RegionSpec};
use nvp1_core::bath::substream;
use proptest::prelude::*;
use rand::Rng;

fn independent_pairs(k: u32, p: f64, n: usize, seed: u64) -> OutcomePairs {
    let mut rng = substream(seed, 0);
    let mut draw = || (0..k).filter(|_| rng.random::<f64>() < p).count() as u32;
    let pairs = (0..n).map(|_| (draw(), draw())).collect();
    OutcomePairs::new(k, k, pairs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binomial_pmf_normalized(k in 0u32..2000, p in 0.0f64..=1.0) {
        let v = binomial_pmf(k, p);
        prop_assert_eq!(v.len(), k as usize + 1);
        prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let mean: f64 = v.iter().enumerate().map(|(n, w)| n as f64 * w).sum();
        prop_assert!((mean - k as f64 * p).abs() < 1e-8 * (1.0 + k as f64));
    }

    #[test]
    fn shot_mixture_normalized(raw in prop::collection::vec((0.01f64..1.0, 0.0f64..=1.0), 1..6), k in 1u32..500) {
        let total: f64 = raw.iter().map(|c| c.0).sum();
        let m = ShotMixture::new(raw.iter().map(|&(w, p)| (w / total, p)).collect()).unwrap();
        prop_assert!((m.pmf(k).iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn record_csv_round_trip(bins in prop::collection::vec((1u32..1000, 0.0f64..=1.0), 0..100)) {
        let bins = bins.into_iter().enumerate().map(|(i, (k, f))| Bin { index: i as u64, n: (k as f64 * f) as u32, k }).collect();
        let r = MeasurementRecord::new(bins, None).unwrap();
        prop_assert_eq!(MeasurementRecord::from_csv(&r.to_csv()).unwrap(), r);
    }

    #[test]
    fn expected_c_bounds(n in 1u32..50, states in 2u32..30) {
        let p = 1.0 / states as f64;
        let c = expected_c(n, p).unwrap();
        let floor = (n as f64 - 1.0) / n as f64;
        prop_assert!(c >= floor);
        prop_assert!(expected_c(n + 1, p).unwrap() > c);
        let exact = expected_c_exact(n, states);
        prop_assert!((*exact.numer() as f64 / *exact.denom() as f64 - c).abs() < 1e-14);
    }

    #[test]
    fn fwhm_range_stays_in_bounds(center in -50.0f64..900.0, sigma in 0.1f64..200.0, k in 1u32..820) {
        let g = GaussianComponent { amplitude: 1.0, center, sigma, amplitude_se: 0.0, center_se: 0.0, sigma_se: 0.0 };
        let r = g.fwhm_range(k).unwrap();
        prop_assert!(r.min <= r.max && r.max <= k);
    }

    #[test]
    fn fidelity_is_a_probability(seed in any::<u64>(), thresholds in (0u32..=8, 0u32..=8, 0u32..=8), spin in any::<bool>()) {
        let pairs = SpinReadoutModel::calibrated().simulate_pairs(8, 8, 500, &mut substream(seed, 1)).unwrap();
        let (h, l, r) = thresholds;
        let policy = ThresholdPolicy::new(8, 8, h.max(l), h.min(l), r).unwrap();
        let mode = if spin { FidelityMode::Spin } else { FidelityMode::State };
        if let Ok(rep) = init_readout_fidelity(&pairs, &policy, mode) {
            for v in [rep.f, rep.f_high, rep.f_low, rep.success_rate] {
                prop_assert!((0.0..=1.0).contains(&v), "{rep:?}");
            }
            prop_assert_eq!(init_readout_fidelity(&pairs, &policy, mode).unwrap(), rep);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn pareto_front_is_ordered(seed in any::<u64>(), frac in 0.0f64..0.5) {
        let pairs = SpinReadoutModel::calibrated().simulate_pairs(12, 12, 4000, &mut substream(seed, 2)).unwrap();
        let search = ThresholdSearch { min_relative_success: frac, joint_window: None };
        let opt = optimize_thresholds(&pairs, &search).unwrap();
        let front = opt.pareto_front();
        prop_assert!(!front.is_empty());
        for w in front.windows(2) {
            prop_assert!(w[0].success_rate >= w[1].success_rate && w[0].f < w[1].f);
        }
        prop_assert_eq!(optimize_thresholds(&pairs, &search).unwrap(), opt);
    }

    #[test]
    fn independent_pairs_are_uncorrelated(seed in any::<u64>(), p in 0.2f64..0.8) {
        let k = 20;
        let pairs = independent_pairs(k, p, 20_000, seed);
        let mid = (k as f64 * p) as u32;
        let range = OutcomeRange::new(mid, k, k).unwrap();
        let region = RegionSpec::new((0, 1), range, range);
        let est = correlation_c(&pairs, &region).unwrap();
        prop_assert!((est.c - 1.0).abs() < 5.0 * est.stderr, "{est:?}");
    }
}

#[test]
fn state_labels_round_trip() {
    for s in 0..=P1_STATES {
        assert_eq!(state_index(&state_label(s).unwrap()).unwrap(), s);
    }
    assert!(state_label(P1_STATES + 1).is_err());
    assert!(state_index("+2A").is_err());
}

#[test]
fn correlation_error_shrinks_as_inverse_root_n() {
    let range = OutcomeRange::new(6, 12, 12).unwrap();
    let region = RegionSpec::new((0, 1), range, range);
    let se = |n: usize| correlation_c(&independent_pairs(12, 0.5, n, 3), &region).unwrap().stderr;
    let ratio = se(4_000) / se(64_000);
    assert!((ratio / 4.0 - 1.0).abs() < 0.1, "{ratio}");
}
