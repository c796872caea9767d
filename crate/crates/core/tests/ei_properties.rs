use eibnb::ei::{
    contour_mod_peak, contour_mod_scaled, ei_bounds, ei_contour_full, ei_contour_mod, ei_maxmin,
    ei_min,
};
use eibnb::{BestEstimates, FeatureTarget, PredBox};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bests() -> impl Strategy<Value = BestEstimates> {
    (-50.0..50.0f64, 0.0..30.0f64).prop_map(|(fmin, w)| BestEstimates {
        fmin,
        fmax: fmin + w,
    })
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn criteria_are_nonnegative(yhat in -100.0..100.0f64, s in 0.0..20.0f64, b in bests(),
                                a in -100.0..100.0f64, alpha in 0.1..4.0f64) {
        prop_assert!(ei_min(yhat, s, b.fmin) >= 0.0);
        prop_assert!(ei_maxmin(yhat, s, &b) >= 0.0);
        prop_assert!(ei_contour_full(yhat, s, a, alpha) >= 0.0);
        prop_assert!(ei_contour_mod(yhat, s, a, alpha) >= 0.0);
    }

    #[test]
    fn nondecreasing_in_s(yhat in -30.0..30.0f64, s in 0.0..10.0f64, ds in 0.0..5.0f64, b in bests(),
                          t in -5.0..5.0f64, alpha in 0.5..3.0f64) {
        let s2 = s + ds;
        let tol = 1e-12;
        prop_assert!(ei_min(yhat, s2, b.fmin) + tol >= ei_min(yhat, s, b.fmin));
        prop_assert!(ei_maxmin(yhat, s2, &b) + tol >= ei_maxmin(yhat, s, &b));
        // Monotone in s at fixed t = (a − yhat)/s.
        let scale = 1.0 + s2 * s2;
        prop_assert!(s2 * s2 * contour_mod_scaled(t, alpha) + tol * scale >= s * s * contour_mod_scaled(t, alpha));
    }

    #[test]
    fn maxmin_reflection(yhat in -60.0..60.0f64, s in 0.0..10.0f64, b in bests()) {
        let l = ei_maxmin(yhat, s, &b);
        let r = ei_maxmin(b.fmax + b.fmin - yhat, s, &b);
        prop_assert!((l - r).abs() <= 1e-9 * (1.0 + l.abs()));
    }

    #[test]
    fn modified_contour_dominates_full(yhat in -50.0..50.0f64, s in 0.0..10.0f64,
                                       a in -50.0..50.0f64, alpha in 0.1..4.0f64) {
        let full = ei_contour_full(yhat, s, a, alpha);
        let m = ei_contour_mod(yhat, s, a, alpha);
        prop_assert!(m + 1e-10 * (1.0 + m) >= full, "mod {m} full {full}");
    }

    #[test]
    fn maxmin_piecewise_monotone(s in 0.01..10.0f64, b in bests(), d1 in 0.0..20.0f64, d2 in 0.0..20.0f64) {
        let mid = b.midpoint();
        let (near, far) = (d1.min(d2), d1.max(d2));
        let tol = 1e-9;
        prop_assert!(ei_maxmin(mid + far, s, &b) + tol >= ei_maxmin(mid + near, s, &b));
        prop_assert!(ei_maxmin(mid - far, s, &b) + tol >= ei_maxmin(mid - near, s, &b));
    }

    #[test]
    fn contour_mod_even_and_unimodal(t1 in 0.0..8.0f64, t2 in 0.0..8.0f64, alpha in 0.05..4.0f64) {
        let peak = contour_mod_peak(alpha);
        let h = |t: f64| contour_mod_scaled(t, alpha);
        prop_assert_eq!(h(t1), h(-t1));
        let (near, far) = (t1.min(t2), t1.max(t2));
        let tol = 1e-12;
        if near >= peak {
            prop_assert!(h(near) + tol >= h(far));
        }
        if far <= peak {
            prop_assert!(h(far) + tol >= h(near));
        }
        prop_assert!(h(peak) + tol >= h(t1));
    }

    #[test]
    fn degenerate_box_is_exact(yhat in -30.0..30.0f64, s in 0.0..10.0f64, b in bests(), a in -30.0..30.0f64) {
        let pbox = PredBox::point(yhat, s);
        for target in [FeatureTarget::Minimum, FeatureTarget::MaxMin, FeatureTarget::contour_mod(a)] {
            let (lb, ub) = ei_bounds(&target, &pbox, &b).unwrap();
            let v = target.ei(yhat, s, &b);
            prop_assert_eq!(lb, v);
            prop_assert_eq!(ub, v);
        }
    }
}

/// Dense box-sampling oracle: `(yhat, s)` pairs drawn inside random boxes
/// must fall within the box's bounds. The upper bounds are always valid; the
/// MaxMin lower bound is the endpoint rule and is only guaranteed when the
/// midpoint `(fmin + fmax)/2` lies outside the `yhat` interval.
#[test]
fn box_sampling_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut maxmin_lb_violations = 0;
    let mut straddling_boxes = 0;
    for _ in 0..2000 {
        let fmin = rng.gen_range(-10.0..10.0);
        let b = BestEstimates {
            fmin,
            fmax: fmin + rng.gen_range(0.0..15.0),
        };
        let y0 = rng.gen_range(-25.0..25.0);
        let s0 = rng.gen_range(0.0..5.0);
        let pbox = PredBox {
            yhat_lb: y0,
            yhat_ub: y0 + rng.gen_range(0.0..8.0),
            s_lb: s0,
            s_ub: s0 + rng.gen_range(0.0..3.0),
        };
        let straddles = pbox.yhat_lb < b.midpoint() && b.midpoint() < pbox.yhat_ub;
        straddling_boxes += usize::from(straddles);
        let a = rng.gen_range(-25.0..25.0);
        let alpha = rng.gen_range(0.2..3.0);
        let mut violated = false;
        for target in [
            FeatureTarget::Minimum,
            FeatureTarget::MaxMin,
            FeatureTarget::ContourMod { level: a, alpha },
        ] {
            let (lb, ub) = ei_bounds(&target, &pbox, &b).unwrap();
            assert!(lb <= ub);
            for _ in 0..200 {
                let y = rng.gen_range(pbox.yhat_lb..=pbox.yhat_ub);
                let s = rng.gen_range(pbox.s_lb..=pbox.s_ub);
                let v = target.ei(y, s, &b);
                let tol = 1e-9 * (1.0 + v.abs());
                assert!(v <= ub + tol, "{target} ub {ub} < {v} in {pbox:?}");
                if v + tol < lb {
                    assert!(
                        matches!(target, FeatureTarget::MaxMin) && straddles,
                        "{target} lb {lb} > {v} in {pbox:?}"
                    );
                    violated = true;
                }
            }
        }
        maxmin_lb_violations += usize::from(violated);
    }
    eprintln!("MaxMin endpoint lower bound violated in {maxmin_lb_violations} of {straddling_boxes} midpoint-straddling boxes");
    assert!(maxmin_lb_violations <= straddling_boxes);
}
