use nvp1_core::bath::{
    coupling_distributions, linear_fit, sample_bath, sphere_radius, substream, t2_star, BathConfiguration, Binning, Histogram, SweepOptions,
};
use nvp1_core::constants::PhysicalConstants;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn t2_star_scales_inversely(b in prop::collection::vec(-1e5f64..1e5, 1..50), s in 0.01f64..100.0) {
        prop_assume!(b.iter().any(|x| x.abs() > 1e-3));
        let scaled: Vec<f64> = b.iter().map(|x| -s * x).collect();
        let (t, ts) = (t2_star(&b).unwrap(), t2_star(&scaled).unwrap());
        prop_assert!((ts * s / t - 1.0).abs() < 1e-12);
        let mut rev = b.clone();
        rev.reverse();
        prop_assert!((t2_star(&rev).unwrap() / t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn radius_scales_as_cube_root(n in 1usize..200, c in 1.0f64..500.0, f in 1.1f64..8.0) {
        let k = PhysicalConstants::default();
        let r = sphere_radius(&k, n, c).unwrap();
        prop_assert!((sphere_radius(&k, n, c * f).unwrap() * f.cbrt() / r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_bath_is_reproducible_and_consistent(seed in any::<u64>(), stream in 0u64..1000, n in 1usize..60, c in 10.0f64..300.0) {
        let k = PhysicalConstants::default();
        let a = sample_bath(&k, n, c, 1.0, &mut substream(seed, stream)).unwrap();
        let b = sample_bath(&k, n, c, 1.0, &mut substream(seed, stream)).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.positions.len(), n);
        for p in &a.positions {
            prop_assert!(p[0] >= 1.0 && p[0] <= a.radius_nm);
            prop_assert!((0.0..=std::f64::consts::PI).contains(&p[1]));
        }
        let rebuilt = BathConfiguration::from_positions(&k, a.radius_nm, a.positions.clone()).unwrap();
        for (x, y) in rebuilt.couplings.iter().zip(&a.couplings) {
            prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn histogram_density_normalized(v in prop::collection::vec(-1e3f64..1e3, 1..400), bins in 1usize..60, fd in any::<bool>()) {
        let h = Histogram::build(&v, if fd { Binning::FreedmanDiaconis } else { Binning::Fixed(bins) }).unwrap();
        prop_assert!((h.integral() - 1.0).abs() < 1e-9);
        prop_assert!(h.density.iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn linear_fit_exact_on_lines(a in -10.0f64..10.0, b in -10.0f64..10.0, xs in prop::collection::btree_set(-1000i32..1000, 3..30)) {
        let x: Vec<f64> = xs.into_iter().map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|x| a * x + b).collect();
        let (fb, fa, r2) = linear_fit(&x, &y).unwrap();
        prop_assert!((fa - a).abs() < 1e-9 && (fb - b).abs() < 1e-6);
        prop_assert!(a.abs() < 1e-3 || (r2 - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn conditioned_ranks_are_ordered(seed in any::<u64>(), lo in 1.0f64..5.0, width in 2.0f64..20.0) {
        let k = PhysicalConstants::default();
        let opts = SweepOptions { samples: 400, seed, ..SweepOptions::default() };
        match coupling_distributions(&k, 75.0, 4, Some((lo, lo + width)), Binning::FreedmanDiaconis, &opts) {
            Ok(d) => {
                prop_assert!(d.accepted <= d.drawn && d.acceptance_rate() > 0.0);
                for i in 0..d.accepted {
                    for r in 1..4 {
                        prop_assert!(d.samples[r - 1][i] >= d.samples[r][i]);
                    }
                }
                for h in &d.histograms {
                    prop_assert!((h.integral() - 1.0).abs() < 1e-9);
                }
            }
            Err(e) => prop_assert!(e.to_string().contains("acceptance rate 0")),
        }
    }
}
