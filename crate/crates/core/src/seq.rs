//! The sequential design loop, the static maximin-LHD baseline, and the
//! contour divergence metric.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bnb::{bnb_maximize, BnbConfig};
use crate::ei::{BestEstimates, FeatureTarget};
use crate::error::{Error, Result};
use crate::ga::{ga_maximize, GaConfig};
use crate::gp::{is_duplicate, DesignData, GpFit, GpFitter};
use crate::lhs;
use crate::testbed::TestFunction;

pub use crate::lhs::maximin_lhd;

/// Proposals within this max-norm distance of a design point are jittered.
pub const DUPLICATE_RADIUS: f64 = 1e-8;
pub const JITTER: f64 = 0.005;
pub const DEFAULT_LHD_CANDIDATES: usize = 200;
const FALLBACK_CANDIDATES: usize = 100;

/// SplitMix64 finalizer over `(base, tag, k)`; gives independent seeds for
/// each stream of a run.
pub fn derive_seed(base: u64, tag: u64, k: u64) -> u64 {
    let mut z = base
        .wrapping_add(tag.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(k.wrapping_mul(0xd1b5_4a32_d192_ed03));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const STREAM_DESIGN: u64 = 1;
const STREAM_OPTIMIZER: u64 = 2;
const STREAM_JITTER: u64 = 3;
const STREAM_STATIC: u64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Bnb(BnbConfig),
    Ga(GaConfig),
}

impl Optimizer {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Bnb(_) => "bnb",
            Self::Ga(_) => "ga",
        }
    }

    /// Maximizes EI with a fresh seed; returns `(x, ei, evals)`.
    pub fn maximize(
        &self,
        fit: &GpFit,
        target: &FeatureTarget,
        bests: &BestEstimates,
        seed: u64,
    ) -> Result<(Vec<f64>, f64, usize)> {
        match self {
            Self::Bnb(cfg) => {
                let cfg = BnbConfig {
                    rng_seed: seed,
                    ..cfg.clone()
                };
                let r = bnb_maximize(fit, target, bests, &cfg)?;
                Ok((r.x_best, r.ei_best, r.evals_used))
            }
            Self::Ga(cfg) => {
                let cfg = GaConfig {
                    rng_seed: seed,
                    ..cfg.clone()
                };
                let r = ga_maximize(fit, target, bests, &cfg)?;
                Ok((r.x_best, r.ei_best, r.evals_used))
            }
        }
    }
}

/// State after `k` added points.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// Point added at this step (none at `k = 0`).
    pub x_new: Option<Vec<f64>>,
    pub y_new: Option<f64>,
    pub fmin_est: f64,
    pub fmax_est: f64,
    /// Largest EI the optimizer found when choosing `x_new`.
    pub max_ei: Option<f64>,
    /// Contour divergence of the fit on all `n0 + k` points.
    pub divergence: Option<f64>,
    pub sim_evals: usize,
    pub ei_evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub method: String,
    pub seed: u64,
    pub initial_design: Vec<Vec<f64>>,
    pub records: Vec<IterationRecord>,
    /// Set when the run stopped early because the surrogate could not be fitted.
    pub failure: Option<String>,
}

impl RunTrace {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    /// Rows `run_id, seed, method, k, x1..xd, y, fmin_est, fmax_est, max_ei, d_k`.
    pub fn write_csv<W: Write>(&self, run_id: usize, dim: usize, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec![
            "run_id".to_string(),
            "seed".into(),
            "method".into(),
            "k".into(),
        ];
        header.extend((1..=dim).map(|i| format!("x{i}")));
        header.extend(["y", "fmin_est", "fmax_est", "max_ei", "d_k"].map(String::from));
        out.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                run_id.to_string(),
                self.seed.to_string(),
                self.method.clone(),
                r.k.to_string(),
            ];
            match &r.x_new {
                Some(x) => row.extend(x.iter().map(f64::to_string)),
                None => row.extend(std::iter::repeat_n(String::new(), dim)),
            }
            row.push(opt(r.y_new));
            row.push(r.fmin_est.to_string());
            row.push(r.fmax_est.to_string());
            row.push(opt(r.max_ei));
            row.push(opt(r.divergence));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Settings of one sequential run.
#[derive(Debug, Clone)]
pub struct SequentialDesign<'a> {
    pub sim: &'a TestFunction,
    pub target: FeatureTarget,
    pub n0: usize,
    pub n_new: usize,
    pub optimizer: Optimizer,
    pub fitter: GpFitter,
    pub lhd_candidates: usize,
    /// Discretized true contour; enables the divergence column.
    pub contour: Option<&'a [Vec<f64>]>,
}

impl<'a> SequentialDesign<'a> {
    pub fn new(
        sim: &'a TestFunction,
        target: FeatureTarget,
        n0: usize,
        n_new: usize,
        optimizer: Optimizer,
    ) -> Self {
        Self {
            sim,
            target,
            n0,
            n_new,
            optimizer,
            fitter: GpFitter::default(),
            lhd_candidates: DEFAULT_LHD_CANDIDATES,
            contour: None,
        }
    }

    pub fn with_contour(mut self, points: &'a [Vec<f64>]) -> Self {
        self.contour = Some(points);
        self
    }

    /// The initial maximin design for `seed`; shared by every method.
    pub fn initial_design(&self, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_DESIGN, 0));
        maximin_lhd(self.n0, self.sim.dim(), self.lhd_candidates, &mut rng)
    }

    pub fn run(&self, seed: u64) -> Result<RunTrace> {
        let d = self.sim.dim();
        if self.n0 < d + 2 {
            return Err(Error::Config(format!(
                "n0 = {} is below d + 2 = {}",
                self.n0,
                d + 2
            )));
        }
        self.target.validate()?;
        let level = self.target.level();
        let initial = self.initial_design(seed);
        let mut points = initial.clone();
        let mut y: Vec<f64> = points.iter().map(|p| self.sim.eval_unchecked(p)).collect();
        let mut jitter_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_JITTER, 0));
        let mut trace = RunTrace {
            method: self.optimizer.name().into(),
            seed,
            initial_design: initial,
            records: Vec::with_capacity(self.n_new + 1),
            failure: None,
        };
        let mut ei_evals = 0;
        let mut pending: Option<(Vec<f64>, f64, f64)> = None;

        for k in 0..=self.n_new {
            let data = DesignData::new(points.clone(), y.clone())?;
            let fit = match self.fitter.fit(&data) {
                Ok(f) => f,
                Err(e) => {
                    trace.failure = Some(format!("fit failed at k = {k}: {e}"));
                    return Ok(trace);
                }
            };
            let bests = BestEstimates::from_observed(&y);
            let divergence = match (self.contour, level) {
                (Some(c), Some(a)) => Some(contour_divergence(&fit, c, a)?),
                _ => None,
            };
            let (x_new, y_new, max_ei) = match pending.take() {
                Some((x, yv, ei)) => (Some(x), Some(yv), Some(ei)),
                None => (None, None, None),
            };
            trace.records.push(IterationRecord {
                k,
                x_new,
                y_new,
                fmin_est: bests.fmin,
                fmax_est: bests.fmax,
                max_ei,
                divergence,
                sim_evals: y.len(),
                ei_evals,
            });
            if k == self.n_new {
                break;
            }

            let opt_seed = derive_seed(seed, STREAM_OPTIMIZER, k as u64);
            let (mut x, ei, used) =
                self.optimizer
                    .maximize(&fit, &self.target, &bests, opt_seed)?;
            ei_evals += used;
            if !(ei > 0.0) {
                x = fallback_point(&fit, &points, &mut jitter_rng);
            }
            let x = dedupe(x, &points, &mut jitter_rng);
            let yv = self.sim.eval(&x)?;
            points.push(x.clone());
            y.push(yv);
            pending = Some((x, yv, ei));
        }
        Ok(trace)
    }
}

pub fn run_sequential(
    sim: &TestFunction,
    target: FeatureTarget,
    n0: usize,
    n_new: usize,
    optimizer: Optimizer,
    seed: u64,
    contour: Option<&[Vec<f64>]>,
) -> Result<RunTrace> {
    let mut design = SequentialDesign::new(sim, target, n0, n_new, optimizer);
    design.contour = contour;
    design.run(seed)
}

/// Used when EI vanishes everywhere: the largest-`s` point of a random
/// Latin hypercube, or its first unsampled point if `s` vanishes too.
fn fallback_point<R: Rng + ?Sized>(fit: &GpFit, points: &[Vec<f64>], rng: &mut R) -> Vec<f64> {
    let cands = lhs::random_lhs(FALLBACK_CANDIDATES, fit.dim(), rng);
    let mut best: Option<(f64, &Vec<f64>)> = None;
    for c in &cands {
        let (_, s) = fit.predict_mean_sd(c);
        if s > 0.0 && best.is_none_or(|b| s > b.0) {
            best = Some((s, c));
        }
    }
    match best {
        Some((_, c)) => c.clone(),
        None => cands
            .iter()
            .find(|c| !points.iter().any(|p| is_duplicate(p, c, DUPLICATE_RADIUS)))
            .unwrap_or(&cands[0])
            .clone(),
    }
}

fn dedupe<R: Rng + ?Sized>(mut x: Vec<f64>, points: &[Vec<f64>], rng: &mut R) -> Vec<f64> {
    for _ in 0..1000 {
        if !points.iter().any(|p| is_duplicate(p, &x, DUPLICATE_RADIUS)) {
            break;
        }
        for v in x.iter_mut() {
            *v = (*v + rng.gen_range(-JITTER..=JITTER)).clamp(0.0, 1.0);
        }
    }
    x
}

/// Root-mean-square deviation of the fitted mean from `level` over the
/// discretized true contour.
pub fn contour_divergence(fit: &GpFit, contour_points: &[Vec<f64>], level: f64) -> Result<f64> {
    if contour_points.is_empty() {
        return Err(Error::EmptyContour);
    }
    let mut sum = 0.0;
    for p in contour_points {
        let (yhat, _) = fit.predict(p)?;
        sum += (yhat - level) * (yhat - level);
    }
    Ok((sum / contour_points.len() as f64).sqrt())
}

#[derive(Debug, Clone)]
pub struct StaticLevel {
    pub k: usize,
    pub design_size: usize,
    pub fit: Option<GpFit>,
    pub fmin_est: f64,
    pub fmax_est: f64,
    pub divergence: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct StaticRun {
    pub seed: u64,
    pub levels: Vec<StaticLevel>,
}

/// One independent maximin design of size `n0 + k` per requested `k`. The
/// `k = 0` design is the sequential run's initial design for the same seed.
pub fn static_baseline(
    sim: &TestFunction,
    target: FeatureTarget,
    n0: usize,
    k_values: &[usize],
    seed: u64,
    contour: Option<&[Vec<f64>]>,
    fitter: &GpFitter,
    lhd_candidates: usize,
) -> Result<StaticRun> {
    let d = sim.dim();
    if n0 < d + 2 {
        return Err(Error::Config(format!(
            "n0 = {n0} is below d + 2 = {}",
            d + 2
        )));
    }
    let mut levels = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let stream = if k == 0 {
            derive_seed(seed, STREAM_DESIGN, 0)
        } else {
            derive_seed(seed, STREAM_STATIC, k as u64)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        let n = n0 + k;
        let pts = maximin_lhd(n, d, lhd_candidates, &mut rng);
        let y: Vec<f64> = pts.iter().map(|p| sim.eval_unchecked(p)).collect();
        let bests = BestEstimates::from_observed(&y);
        let data = DesignData::new(pts, y)?;
        let (fit, divergence, failure) = match fitter.fit(&data) {
            Ok(fit) => {
                let div = match (contour, target.level()) {
                    (Some(c), Some(a)) => Some(contour_divergence(&fit, c, a)?),
                    _ => None,
                };
                (Some(fit), div, None)
            }
            Err(e) => (None, None, Some(e.to_string())),
        };
        levels.push(StaticLevel {
            k,
            design_size: n,
            fit,
            fmin_est: bests.fmin,
            fmax_est: bests.fmax,
            divergence,
            failure,
        });
    }
    Ok(StaticRun { seed, levels })
}
