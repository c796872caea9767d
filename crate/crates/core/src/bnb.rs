//! Branch and bound over axis-aligned rectangles of the unit cube,
//! minimizing `g = −EI`.
//!
//! Each rectangle carries `psi_lb ≤ min_Q g ≤ psi_ub`, derived from ranges
//! of the predictive mean and standard deviation over the rectangle. The
//! ranges come from a [`BoundProvider`]: either sampled predictions (the
//! stochastic search used in practice) or an exhaustive grid (for checking
//! the search itself).

use std::collections::HashMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ei::{ei_bounds, BestEstimates, FeatureTarget, PredBox};
use crate::error::{Error, Result};
use crate::gp::GpFit;
use crate::lhs;

/// Corners are sampled only up to this dimension.
const MAX_CORNER_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Rectangle {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub psi_lb: f64,
    pub psi_ub: f64,
}

impl Rectangle {
    pub fn unit(d: usize) -> Self {
        Self::new(vec![0.0; d], vec![1.0; d])
    }

    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self {
            lower,
            upper,
            psi_lb: f64::NEG_INFINITY,
            psi_ub: f64::INFINITY,
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = f64> + '_ {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l)
    }

    pub fn volume(&self) -> f64 {
        self.edges().product()
    }

    pub fn longest_edge(&self) -> f64 {
        self.edges().fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// The `2^d` vertices, in binary order (bit k set → upper on axis k).
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|k| {
                        if mask >> k & 1 == 1 {
                            self.upper[k]
                        } else {
                            self.lower[k]
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Bisects `q` across the midpoint of a longest edge; ties are broken
/// uniformly at random.
pub fn split_rectangle<R: Rng + ?Sized>(
    q: &Rectangle,
    rng: &mut R,
) -> Result<(Rectangle, Rectangle)> {
    if !(q.volume() > 0.0) {
        return Err(Error::DegenerateRectangle);
    }
    let longest = q.longest_edge();
    let ties: Vec<usize> = q
        .edges()
        .enumerate()
        .filter(|(_, e)| *e >= longest * (1.0 - 1e-12))
        .map(|(k, _)| k)
        .collect();
    let axis = *ties
        .choose(rng)
        .expect("a positive-volume box has a longest edge");
    let mid = 0.5 * (q.lower[axis] + q.upper[axis]);
    let mut left = Rectangle::new(q.lower.clone(), q.upper.clone());
    let mut right = left.clone();
    left.upper[axis] = mid;
    right.lower[axis] = mid;
    Ok((left, right))
}

/// Predictions gathered inside one rectangle.
#[derive(Debug, Clone, Default)]
pub struct RectSample {
    /// Candidate points with their `(yhat, s)`.
    pub points: Vec<(Vec<f64>, f64, f64)>,
    /// Fresh EI evaluations spent.
    pub evals: usize,
}

impl RectSample {
    pub fn pred_box(&self) -> Option<PredBox> {
        PredBox::enclosing(self.points.iter().map(|(_, y, s)| (*y, *s)))
    }
}

/// Supplies predictive ranges for rectangles.
pub trait BoundProvider {
    /// Fewest evaluations a rectangle can cost.
    fn min_cost(&self) -> usize;

    /// Samples `rect` without spending more than `budget_left` evaluations
    /// beyond [`Self::min_cost`]. An empty sample means the rectangle holds
    /// no candidates.
    fn sample(&mut self, rect: &Rectangle, budget_left: usize) -> RectSample;
}

/// Sampled bounds: a Latin hypercube inside each rectangle, plus its
/// vertices in low dimension. Vertex predictions are cached, since
/// neighbouring rectangles share them.
pub struct SampledBounds<'a> {
    fit: &'a GpFit,
    n_samples: usize,
    rng: ChaCha8Rng,
    corner_cache: HashMap<Vec<u64>, (f64, f64)>,
}

impl<'a> SampledBounds<'a> {
    pub fn new(fit: &'a GpFit, n_samples: usize, seed: u64) -> Self {
        Self {
            fit,
            n_samples,
            rng: ChaCha8Rng::seed_from_u64(seed),
            corner_cache: HashMap::new(),
        }
    }
}

impl BoundProvider for SampledBounds<'_> {
    fn min_cost(&self) -> usize {
        self.n_samples
    }

    fn sample(&mut self, rect: &Rectangle, budget_left: usize) -> RectSample {
        let mut out = RectSample::default();
        let n = self.n_samples.min(budget_left).max(1);
        for p in lhs::lhs_in_box(n, &rect.lower, &rect.upper, &mut self.rng) {
            let (y, s) = self.fit.predict_mean_sd(&p);
            out.points.push((p, y, s));
            out.evals += 1;
        }
        if rect.dim() <= MAX_CORNER_DIM {
            let corners = rect.corners();
            let fresh = corners
                .iter()
                .filter(|c| !self.corner_cache.contains_key(&key(c)))
                .count();
            if out.evals + fresh <= budget_left {
                for c in corners {
                    let k = key(&c);
                    let (y, s) = match self.corner_cache.get(&k) {
                        Some(v) => *v,
                        None => {
                            let v = self.fit.predict_mean_sd(&c);
                            self.corner_cache.insert(k, v);
                            out.evals += 1;
                            v
                        }
                    };
                    out.points.push((c, y, s));
                }
            }
        }
        out
    }
}

fn key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

/// Predictive box of `q` from `n_samples` Latin-hypercube points (plus the
/// vertices when `d ≤ 4`).
pub fn estimate_pred_box<R: Rng + ?Sized>(
    fit: &GpFit,
    q: &Rectangle,
    n_samples: usize,
    rng: &mut R,
) -> PredBox {
    let mut pts = lhs::lhs_in_box(n_samples.max(1), &q.lower, &q.upper, rng);
    if q.dim() <= MAX_CORNER_DIM {
        pts.extend(q.corners());
    }
    PredBox::enclosing(pts.iter().map(|p| fit.predict_mean_sd(p))).expect("at least one sample")
}

/// Exhaustive grid bounds: each rectangle's box is the exact range over the
/// grid nodes it contains. Deterministic, and exact on the grid.
pub struct GridBounds {
    resolution: usize,
    dim: usize,
    preds: Vec<(f64, f64)>,
}

impl GridBounds {
    pub fn new(fit: &GpFit, resolution: usize) -> Self {
        let dim = fit.dim();
        let total = resolution.pow(dim as u32);
        let preds = (0..total)
            .map(|flat| fit.predict_mean_sd(&grid_node(flat, resolution, dim)))
            .collect();
        Self {
            resolution,
            dim,
            preds,
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = (Vec<f64>, f64, f64)> + '_ {
        self.preds
            .iter()
            .enumerate()
            .map(|(flat, &(y, s))| (grid_node(flat, self.resolution, self.dim), y, s))
    }
}

fn grid_node(mut flat: usize, res: usize, dim: usize) -> Vec<f64> {
    let step = 1.0 / (res - 1) as f64;
    let mut x = vec![0.0; dim];
    for k in (0..dim).rev() {
        x[k] = (flat % res) as f64 * step;
        flat /= res;
    }
    x
}

impl BoundProvider for GridBounds {
    fn min_cost(&self) -> usize {
        0
    }

    fn sample(&mut self, rect: &Rectangle, _budget_left: usize) -> RectSample {
        let scale = (self.resolution - 1) as f64;
        let ranges: Vec<(usize, usize)> = rect
            .lower
            .iter()
            .zip(&rect.upper)
            .map(|(l, u)| {
                let lo = (l * scale - 1e-9).ceil().max(0.0) as usize;
                let hi = ((u * scale + 1e-9).floor() as usize).min(self.resolution - 1);
                (lo, hi)
            })
            .collect();
        let mut out = RectSample::default();
        if ranges.iter().any(|(lo, hi)| lo > hi) {
            return out;
        }
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            let flat = idx.iter().fold(0, |acc, &i| acc * self.resolution + i);
            let (y, s) = self.preds[flat];
            let x = idx.iter().map(|&i| i as f64 / scale).collect();
            out.points.push((x, y, s));
            out.evals += 1;
            let mut k = self.dim;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] <= ranges[k].1 {
                    break;
                }
                idx[k] = ranges[k].0;
            }
        }
    }
}

/// Stopping gap for `U_k − L_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GapTolerance {
    Absolute(f64),
    /// Fraction of the initial bound magnitude `max(|L_0|, |U_0|)`.
    Relative(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnbConfig {
    pub epsilon: GapTolerance,
    pub ei_eval_budget: usize,
    pub samples_per_rectangle: usize,
    pub rng_seed: u64,
}

impl BnbConfig {
    /// Defaults for a `d`-dimensional search: 10 samples per rectangle in 2D,
    /// 20 above; budget 500 in 2D and 3000 in 4D.
    pub fn for_dim(d: usize, rng_seed: u64) -> Self {
        Self {
            epsilon: GapTolerance::Relative(1e-3),
            ei_eval_budget: if d <= 2 { 500 } else { 3000 },
            samples_per_rectangle: if d <= 2 { 10 } else { 20 },
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_rectangle == 0 {
            return Err(Error::Config(
                "samples_per_rectangle must be positive".into(),
            ));
        }
        if self.ei_eval_budget == 0 {
            return Err(Error::Config("EI budget must be positive".into()));
        }
        let eps = match self.epsilon {
            GapTolerance::Absolute(e) | GapTolerance::Relative(e) => e,
        };
        if !(eps > 0.0) {
            return Err(Error::Config("gap tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// One pass of the main loop.
#[derive(Debug, Clone, PartialEq)]
pub struct BnbIteration {
    pub iteration: usize,
    pub list_size: usize,
    pub lower: f64,
    pub upper: f64,
    pub incumbent_ei: f64,
    pub evals_used: usize,
    pub pruned: usize,
}

#[derive(Debug, Clone)]
pub struct BnbResult {
    pub x_best: Vec<f64>,
    pub ei_best: f64,
    /// Final `U − L`; diagnostic only when bounds are sampled.
    pub gap: f64,
    pub evals_used: usize,
    pub trace: Vec<BnbIteration>,
    pub live: Vec<Rectangle>,
    pub pruned: Vec<Rectangle>,
}

impl BnbResult {
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "iteration",
            "list_size",
            "L",
            "U",
            "incumbent_ei",
            "evals_used",
        ])?;
        for it in &self.trace {
            out.write_record([
                it.iteration.to_string(),
                it.list_size.to_string(),
                it.lower.to_string(),
                it.upper.to_string(),
                it.incumbent_ei.to_string(),
                it.evals_used.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

struct Live {
    rect: Rectangle,
    id: usize,
}

/// Stochastic branch and bound with [`SampledBounds`].
pub fn bnb_maximize(
    fit: &GpFit,
    target: &FeatureTarget,
    bests: &BestEstimates,
    config: &BnbConfig,
) -> Result<BnbResult> {
    config.validate()?;
    let mut provider = SampledBounds::new(
        fit,
        config.samples_per_rectangle,
        config.rng_seed ^ 0x9e37_79b9_7f4a_7c15,
    );
    bnb_maximize_with(fit.dim(), target, bests, config, &mut provider)
}

/// Branch and bound with any bound provider.
pub fn bnb_maximize_with<P: BoundProvider>(
    dim: usize,
    target: &FeatureTarget,
    bests: &BestEstimates,
    config: &BnbConfig,
    provider: &mut P,
) -> Result<BnbResult> {
    target.validate()?;
    if matches!(target, FeatureTarget::ContourFull { .. }) {
        return Err(Error::UnsupportedTarget(target.to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut evals = 0usize;
    let mut incumbent: Option<(Vec<f64>, f64)> = None;

    let bound = |rect: &mut Rectangle,
                 evals: &mut usize,
                 incumbent: &mut Option<(Vec<f64>, f64)>,
                 provider: &mut P|
     -> Result<bool> {
        let left = config.ei_eval_budget.saturating_sub(*evals);
        let sample = provider.sample(rect, left);
        *evals += sample.evals;
        let Some(pbox) = sample.pred_box() else {
            rect.psi_lb = f64::INFINITY;
            rect.psi_ub = f64::INFINITY;
            return Ok(false);
        };
        for (x, y, s) in sample.points {
            let v = target.ei(y, s, bests);
            if incumbent.as_ref().is_none_or(|(_, b)| v > *b) {
                *incumbent = Some((x, v));
            }
        }
        let (lb, ub) = ei_bounds(target, &pbox, bests)?;
        rect.psi_lb = -ub;
        rect.psi_ub = -lb;
        Ok(true)
    };

    let mut root = Rectangle::unit(dim);
    let mut live: Vec<Live> = Vec::new();
    let mut pruned: Vec<Rectangle> = Vec::new();
    if bound(&mut root, &mut evals, &mut incumbent, provider)? {
        live.push(Live { rect: root, id: 0 });
    } else {
        pruned.push(root);
    }
    let mut next_id = 1;
    let mut lower = live
        .iter()
        .map(|l| l.rect.psi_lb)
        .fold(f64::INFINITY, f64::min);
    let mut upper = live
        .iter()
        .map(|l| l.rect.psi_ub)
        .fold(f64::INFINITY, f64::min);
    let eps = match config.epsilon {
        GapTolerance::Absolute(e) => e,
        GapTolerance::Relative(r) => {
            let scale = lower.abs().max(upper.abs());
            if scale.is_finite() {
                r * scale
            } else {
                r
            }
        }
    };
    let mut trace = vec![BnbIteration {
        iteration: 0,
        list_size: live.len(),
        lower,
        upper,
        incumbent_ei: incumbent.as_ref().map_or(0.0, |i| i.1),
        evals_used: evals,
        pruned: 0,
    }];

    let min_cost = provider.min_cost();
    while !live.is_empty() && upper - lower > eps {
        if evals >= config.ei_eval_budget || evals + 2 * min_cost > config.ei_eval_budget {
            break;
        }
        // Smallest psi_lb; ties go to the larger box, then the older one.
        let pick = (0..live.len())
            .min_by(|&a, &b| {
                let (ra, rb) = (&live[a].rect, &live[b].rect);
                ra.psi_lb
                    .total_cmp(&rb.psi_lb)
                    .then(rb.volume().total_cmp(&ra.volume()))
                    .then(live[a].id.cmp(&live[b].id))
            })
            .expect("live list is nonempty");
        let parent = live.swap_remove(pick).rect;
        if !(parent.volume() > 0.0) {
            pruned.push(parent);
            continue;
        }
        let (mut a, mut b) = split_rectangle(&parent, &mut rng)?;
        for child in [&mut a, &mut b] {
            bound(child, &mut evals, &mut incumbent, provider)?;
        }
        for child in [a, b] {
            if child.psi_lb.is_finite() {
                live.push(Live {
                    rect: child,
                    id: next_id,
                });
                next_id += 1;
            } else {
                pruned.push(child);
            }
        }
        lower = live
            .iter()
            .map(|l| l.rect.psi_lb)
            .fold(f64::INFINITY, f64::min);
        // Every psi_ub ever computed bounds the global minimum from above, so
        // the upper bound is kept as a running minimum.
        upper = live.iter().map(|l| l.rect.psi_ub).fold(upper, f64::min);
        let before = live.len();
        let (keep, drop): (Vec<Live>, Vec<Live>) =
            live.into_iter().partition(|l| l.rect.psi_lb <= upper);
        live = keep;
        pruned.extend(drop.into_iter().map(|l| l.rect));
        trace.push(BnbIteration {
            iteration: trace.len(),
            list_size: live.len(),
            lower,
            upper,
            incumbent_ei: incumbent.as_ref().map_or(0.0, |i| i.1),
            evals_used: evals,
            pruned: before - live.len(),
        });
    }
    if live.is_empty() {
        lower = upper;
    }

    let (x_best, ei_best) = incumbent.unwrap_or_else(|| (vec![0.5; dim], 0.0));
    Ok(BnbResult {
        x_best,
        ei_best,
        gap: (upper - lower).max(0.0),
        evals_used: evals,
        trace,
        live: live.into_iter().map(|l| l.rect).collect(),
        pruned,
    })
}
