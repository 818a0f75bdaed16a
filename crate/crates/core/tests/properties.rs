use amp_core::aggregate::{kb_recursion, kb_sequence};
use amp_core::source::{bin_trace, generate_timeline, theoretical_hurst};
use amp_core::spectrum::{char_fn, lrd_spectral_test, psd_model, SpectralAsymptote};
use amp_core::{BoundedParetoLaw, ParetoLaw, RateMode, SourceConfig};
use proptest::prelude::*;

fn duration_shape() -> impl Strategy<Value = f64> {
    1.05f64..1.95
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn survival_is_monotone_and_bounded(
        a in 0.2f64..4.0,
        k in 0.01f64..100.0,
        span in 1.5f64..1e4,
        mut xs in prop::collection::vec(0.0f64..1e6, 2..200),
    ) {
        let p = ParetoLaw::new(a, k).unwrap();
        let b = BoundedParetoLaw::new(a, k, k * span).unwrap();
        xs.sort_by(f64::total_cmp);
        for w in xs.windows(2) {
            for s in [(p.survival(w[0]), p.survival(w[1])), (b.survival(w[0]), b.survival(w[1]))] {
                prop_assert!((0.0..=1.0).contains(&s.0) && (0.0..=1.0).contains(&s.1));
                prop_assert!(s.1 <= s.0);
            }
        }
    }

    #[test]
    fn pareto_inverse_transform_round_trip(a in 0.2f64..4.0, k in 0.01f64..100.0, u in 1e-12f64..1.0) {
        let p = ParetoLaw::new(a, k).unwrap();
        let x = p.sample(u).unwrap();
        prop_assert!(((p.survival(x) - u) / u).abs() < 1e-12);
    }

    #[test]
    fn bounded_sample_lands_in_support(a in 0.2f64..4.0, k in 0.01f64..100.0, span in 1.5f64..1e4, u in 1e-12f64..1.0) {
        let b = BoundedParetoLaw::new(a, k, k * span).unwrap();
        let x = b.sample(u).unwrap();
        prop_assert!(x >= k && x <= b.cutoff());
        if u > b.atom_mass() {
            prop_assert!(((b.survival(x) - u) / u).abs() < 1e-12 || x == b.cutoff());
        } else {
            prop_assert_eq!(x, b.cutoff());
        }
    }

    #[test]
    fn pareto_tail_is_regularly_varying(a in 0.2f64..4.0, k in 0.01f64..10.0, t in 1.1f64..50.0, e in 2i32..7) {
        let p = ParetoLaw::new(a, k).unwrap();
        let x = 10f64.powi(e);
        let ratio = p.survival(t * x) / p.survival(x);
        prop_assert!((ratio / t.powf(-a) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn binning_conserves_volume_and_refines(
        a_on in duration_shape(),
        a_off in duration_shape(),
        seed in any::<u64>(),
        width in 0.05f64..3.0,
    ) {
        let law = BoundedParetoLaw::new(1.3, 0.5, 5.0).unwrap();
        let cfg = SourceConfig::new(
            ParetoLaw::duration(a_on, 1.0).unwrap(),
            ParetoLaw::duration(a_off, 2.0).unwrap(),
            RateMode::BoundedPareto { law },
            seed,
        ).unwrap();
        let horizon = 400.0 * width;
        let tl = generate_timeline(&cfg, horizon).unwrap();
        let coarse = bin_trace(&tl, width).unwrap();
        let fine = bin_trace(&tl, width / 2.0).unwrap();
        let whole = tl.volume(0.0, coarse.len() as f64 * width);
        prop_assert!((coarse.volume() - whole).abs() <= 1e-9 * whole.max(1.0));
        for (m, v) in coarse.values.iter().enumerate() {
            let avg = 0.5 * (fine.values[2 * m] + fine.values[2 * m + 1]);
            prop_assert!((avg - v).abs() <= 1e-9 * v.abs().max(1.0));
        }
        prop_assert!(coarse.values.iter().all(|&v| (0.0..=law.cutoff() * (1.0 + 1e-12)).contains(&v)));
    }

    #[test]
    fn hurst_is_symmetric_and_monotone(a0 in duration_shape(), a1 in duration_shape(), d in 0.0f64..0.5) {
        let h = theoretical_hurst(a0, a1).unwrap();
        prop_assert_eq!(h, theoretical_hurst(a1, a0).unwrap());
        prop_assert!(h > 0.5 && h < 1.0);
        let (lo, hi) = (a0.min(a1), a0.max(a1));
        if lo + d < 2.0 {
            prop_assert!(theoretical_hurst(lo + d, hi.max(lo + d)).unwrap() <= h);
        }
    }

    #[test]
    fn exponent_relations_agree(a0 in duration_shape(), a1 in duration_shape()) {
        let h = theoretical_hurst(a0, a1).unwrap();
        let alpha = a0.min(a1);
        let asym = SpectralAsymptote { alpha, slope: alpha - 2.0, w: 1.0, two_term: None, band: (1e-4, 1e-2), residual: 0.0 };
        let v = lrd_spectral_test(&asym);
        prop_assert!(v.lrd);
        prop_assert!((v.hurst - h).abs() < 1e-12);
        prop_assert!((v.acf_beta - (2.0 - 2.0 * h)).abs() < 1e-12);
        prop_assert!((v.spectral_exponent - (2.0 * h - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn kb_recursion_stays_in_bounds(a1 in 0.01f64..0.99, alpha in 1.05f64..3.0, k in 0.1f64..10.0, n in 1usize..40) {
        let seq = kb_sequence(n, 1.0 - a1, a1, alpha, k).unwrap();
        prop_assert_eq!(seq[0], k);
        for (i, w) in seq.windows(2).enumerate() {
            prop_assert!(w[1] >= w[0] * (1.0 - 1e-12));
            prop_assert!(w[1] <= (i + 2) as f64 * k * (1.0 + 1e-12));
        }
        prop_assert_eq!(*seq.last().unwrap(), kb_recursion(n, 1.0 - a1, a1, alpha, k).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn char_fn_is_bounded_and_hermitian(a in duration_shape(), k in 0.1f64..10.0, w in 1e-3f64..50.0) {
        let p = ParetoLaw::new(a, k).unwrap();
        let f = char_fn(&p, w).unwrap();
        prop_assert!(f.norm() <= 1.0 + 1e-8);
        let g = char_fn(&p, -w).unwrap();
        prop_assert!((f.conj() - g).norm() < 1e-12);
    }

    #[test]
    fn psd_is_even_and_positive(a0 in duration_shape(), a1 in duration_shape(), w in 1e-3f64..20.0) {
        let on = ParetoLaw::new(a1, 1.0).unwrap();
        let off = ParetoLaw::new(a0, 2.0).unwrap();
        let s = psd_model(w, &on, &off).unwrap();
        prop_assert!(s > 0.0);
        prop_assert!((s - psd_model(-w, &on, &off).unwrap()).abs() <= 1e-10 * s);
    }
}
