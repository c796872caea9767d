use eibnb::bnb::{bnb_maximize, bnb_maximize_with, estimate_pred_box, GridBounds};
use eibnb::lhs::maximin_lhd;
use eibnb::{
    BestEstimates, BnbConfig, DesignData, FeatureTarget, GapTolerance, GpFit, GpFitter, Rectangle,
    TestFunction,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const RES: usize = 129;

fn branin_fit(n: usize, seed: u64) -> (GpFit, BestEstimates) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = maximin_lhd(n, 2, 200, &mut rng);
    let y: Vec<f64> = pts
        .iter()
        .map(|p| TestFunction::Branin.eval(p).unwrap())
        .collect();
    let bests = BestEstimates::from_observed(&y);
    (
        GpFitter::default()
            .fit(&DesignData::new(pts, y).unwrap())
            .unwrap(),
        bests,
    )
}

fn oracle_config(seed: u64) -> BnbConfig {
    BnbConfig {
        epsilon: GapTolerance::Absolute(1e-9),
        ei_eval_budget: usize::MAX,
        samples_per_rectangle: 1,
        rng_seed: seed,
    }
}

fn targets(bests: &BestEstimates) -> [FeatureTarget; 3] {
    [
        FeatureTarget::Minimum,
        FeatureTarget::MaxMin,
        FeatureTarget::contour_mod(bests.midpoint()),
    ]
}

#[test]
fn oracle_mode_invariants() {
    for seed in [1, 2, 3] {
        let (fit, bests) = branin_fit(10, seed);
        let mut grid = GridBounds::new(&fit, RES);
        for target in targets(&bests) {
            let r = bnb_maximize_with(2, &target, &bests, &oracle_config(seed), &mut grid).unwrap();
            let grid_max = grid
                .nodes()
                .map(|(_, y, s)| target.ei(y, s, &bests))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                (r.ei_best - grid_max).abs() <= 1e-6,
                "{target}: {} vs {grid_max}",
                r.ei_best
            );

            for w in r.trace.windows(2) {
                assert!(w[1].lower >= w[0].lower, "{target}: L decreased");
                assert!(w[1].upper <= w[0].upper, "{target}: U increased");
                assert!(
                    w[1].incumbent_ei >= w[0].incumbent_ei,
                    "{target}: incumbent decreased"
                );
            }

            let volume: f64 = r.live.iter().chain(&r.pruned).map(Rectangle::volume).sum();
            assert!((volume - 1.0).abs() <= 1e-9, "{target}: volume {volume}");

            for q in &r.pruned {
                for (x, y, s) in grid.nodes() {
                    if q.contains(&x) {
                        assert!(
                            target.ei(y, s, &bests) <= r.ei_best + 1e-9,
                            "{target}: pruned better node {x:?}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn constant_ei_stops_at_first_gap_check() {
    let data = DesignData::new(
        vec![vec![0.1, 0.2], vec![0.7, 0.9], vec![0.4, 0.5]],
        vec![3.0; 3],
    )
    .unwrap();
    let fit = GpFitter::default().fit(&data).unwrap();
    let bests = BestEstimates::from_observed(data.y());
    let r = bnb_maximize(
        &fit,
        &FeatureTarget::MaxMin,
        &bests,
        &BnbConfig::for_dim(2, 4),
    )
    .unwrap();
    assert_eq!(r.gap, 0.0);
    assert_eq!(r.trace.len(), 1);
    assert_eq!(r.ei_best, 0.0);
}

#[test]
fn sampled_mode_is_reproducible_and_within_budget() {
    let (fit, bests) = branin_fit(15, 8);
    let cfg = BnbConfig::for_dim(2, 99);
    for target in targets(&bests) {
        let a = bnb_maximize(&fit, &target, &bests, &cfg).unwrap();
        let b = bnb_maximize(&fit, &target, &bests, &cfg).unwrap();
        assert_eq!(a.x_best, b.x_best);
        assert_eq!(a.ei_best.to_bits(), b.ei_best.to_bits());
        assert_eq!(a.trace, b.trace);
        assert!(a.evals_used <= cfg.ei_eval_budget);
        for w in a.trace.windows(2) {
            assert!(w[1].upper <= w[0].upper);
            assert!(w[1].incumbent_ei >= w[0].incumbent_ei);
        }
        let volume: f64 = a.live.iter().chain(&a.pruned).map(Rectangle::volume).sum();
        assert!((volume - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn sampled_boxes_cover_grid_range() {
    // Fine subdivision: 16 × 16 cells; the sampled ŷ range per cell, unioned,
    // should span the dense-grid ŷ range.
    let (fit, _) = branin_fit(12, 21);
    let grid = GridBounds::new(&fit, 201);
    let (glo, ghi) = grid
        .nodes()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, y, _)| {
            (a.min(y), b.max(y))
        });
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..16 {
        for j in 0..16 {
            let q = Rectangle::new(
                vec![i as f64 / 16.0, j as f64 / 16.0],
                vec![(i + 1) as f64 / 16.0, (j + 1) as f64 / 16.0],
            );
            let pb = estimate_pred_box(&fit, &q, 10, &mut rng);
            lo = lo.min(pb.yhat_lb);
            hi = hi.max(pb.yhat_ub);
        }
    }
    let width = ghi - glo;
    assert!(
        (lo - glo).abs() <= 0.05 * width && (hi - ghi).abs() <= 0.05 * width,
        "[{lo}, {hi}] vs [{glo}, {ghi}]"
    );
}
