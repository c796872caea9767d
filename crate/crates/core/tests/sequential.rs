use eibnb::lhs::{maximin_lhd, min_pairwise_distance, random_lhs};
use eibnb::seq::{
    contour_divergence, static_baseline, Optimizer, SequentialDesign, DUPLICATE_RADIUS,
};
use eibnb::{BnbConfig, DesignData, FeatureTarget, GaConfig, GpFit, GpFitter, TestFunction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn is_duplicate_point(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= DUPLICATE_RADIUS)
}

fn bnb() -> Optimizer {
    Optimizer::Bnb(BnbConfig::for_dim(2, 0))
}

#[test]
fn maximin_beats_random_sampling() {
    let (mut lhd, mut random) = (0.0, 0.0);
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        lhd += min_pairwise_distance(&maximin_lhd(20, 2, 1000, &mut rng));
        let uniform: Vec<Vec<f64>> = (0..20)
            .map(|_| vec![rand::Rng::gen(&mut rng), rand::Rng::gen(&mut rng)])
            .collect();
        random += min_pairwise_distance(&uniform);
    }
    assert!(lhd > random, "{lhd} vs {random}");
}

#[test]
fn branin_maximum_found_within_five_percent() {
    let sim = TestFunction::Branin;
    let trace = SequentialDesign::new(&sim, FeatureTarget::MaxMin, 20, 30, bnb())
        .run(1)
        .unwrap();
    assert!(!trace.failed());
    let last = trace.records.last().unwrap();
    assert_eq!(last.k, 30);
    assert!(
        (last.fmax_est - 55.6).abs() <= 0.05 * 55.6,
        "fmax_est {}",
        last.fmax_est
    );
}

#[test]
fn trace_invariants_and_reproducibility() {
    let sim = TestFunction::levy(2).unwrap();
    for opt in [bnb(), Optimizer::Ga(GaConfig::for_dim(2, 0))] {
        let design = SequentialDesign::new(&sim, FeatureTarget::contour_mod(70.0), 12, 8, opt);
        let a = design.run(5).unwrap();
        let b = design.run(5).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.records.len(), 9);

        let mut ys: Vec<f64> = a
            .initial_design
            .iter()
            .map(|p| sim.eval(p).unwrap())
            .collect();
        let mut pts = a.initial_design.clone();
        for r in &a.records {
            if let (Some(x), Some(y)) = (&r.x_new, r.y_new) {
                assert!(!pts.iter().any(|p| is_duplicate_point(p, x)));
                assert_eq!(sim.eval(x).unwrap(), y);
                pts.push(x.clone());
                ys.push(y);
            }
            assert_eq!(r.sim_evals, 12 + r.k);
            assert_eq!(pts.len(), 12 + r.k);
            assert_eq!(r.fmin_est, ys.iter().copied().fold(f64::INFINITY, f64::min));
            assert_eq!(
                r.fmax_est,
                ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            );
        }
    }
}

#[test]
fn no_new_points_gives_initial_estimates_only() {
    let sim = TestFunction::Branin;
    let t = SequentialDesign::new(&sim, FeatureTarget::MaxMin, 10, 0, bnb())
        .run(3)
        .unwrap();
    assert_eq!(t.records.len(), 1);
    assert!(t.records[0].x_new.is_none());
}

#[test]
fn constant_simulator_falls_back() {
    let sim = TestFunction::Constant { dim: 2, value: 7.0 };
    let t = SequentialDesign::new(&sim, FeatureTarget::MaxMin, 6, 5, bnb())
        .run(2)
        .unwrap();
    assert!(!t.failed());
    assert_eq!(t.records.len(), 6);
    for r in &t.records {
        assert_eq!(r.fmin_est, 7.0);
        assert_eq!(r.fmax_est, 7.0);
        if let Some(ei) = r.max_ei {
            assert_eq!(ei, 0.0);
        }
    }
}

#[test]
fn fit_failure_leaves_partial_trace() {
    let sim = TestFunction::Branin;
    let mut design = SequentialDesign::new(&sim, FeatureTarget::MaxMin, 10, 3, bnb());
    // A vanishing θ makes every correlation 1, which no allowed nugget rescues.
    design.fitter = GpFitter {
        theta_bounds: (1e-300, 1e-300),
        nugget: 0.0,
        max_nugget: 0.0,
        restarts: 1,
    };
    let t = design.run(1).unwrap();
    assert!(t.failed());
    assert!(t.records.is_empty());
}

#[test]
fn static_level_zero_matches_sequential_start() {
    let sim = TestFunction::Branin;
    let design = SequentialDesign::new(&sim, FeatureTarget::MaxMin, 15, 0, bnb());
    let seq = design.run(9).unwrap();
    let st = static_baseline(
        &sim,
        FeatureTarget::MaxMin,
        15,
        &[0, 5],
        9,
        None,
        &GpFitter::default(),
        design.lhd_candidates,
    )
    .unwrap();
    assert_eq!(
        st.levels[0].fit.as_ref().unwrap().data().points(),
        &seq.initial_design[..]
    );
    assert_eq!(st.levels[0].fmax_est, seq.records[0].fmax_est);
    assert_eq!(st.levels[1].design_size, 20);
}

#[test]
fn static_baseline_trails_sequential_bnb_on_branin() {
    let sim = TestFunction::Branin;
    let fitter = GpFitter::default();
    let (mut seq, mut st) = (0.0, 0.0);
    for seed in 0..10 {
        let design = SequentialDesign::new(&sim, FeatureTarget::MaxMin, 20, 30, bnb());
        seq += design.run(seed).unwrap().records[30].fmax_est;
        st += static_baseline(
            &sim,
            FeatureTarget::MaxMin,
            20,
            &[30],
            seed,
            None,
            &fitter,
            design.lhd_candidates,
        )
        .unwrap()
        .levels[0]
            .fmax_est;
    }
    assert!(
        st < seq,
        "static {} vs sequential {}",
        st / 10.0,
        seq / 10.0
    );
}

#[test]
fn divergence_matches_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pts = random_lhs(5, 2, &mut rng);
    let y: Vec<f64> = pts
        .iter()
        .map(|p| TestFunction::Branin.eval(p).unwrap())
        .collect();
    let fit = GpFit::at_theta(DesignData::new(pts, y).unwrap(), &[2.0, 3.0], 1e-8).unwrap();
    let contour = random_lhs(40, 2, &mut rng);
    let level = 30.0;
    let mut sum = 0.0;
    for p in &contour {
        let yhat = fit.predict(p).unwrap().0;
        sum += (yhat - level).powi(2);
    }
    let direct = (sum / 40.0).sqrt();
    assert!((contour_divergence(&fit, &contour, level).unwrap() - direct).abs() <= 1e-12);
}
