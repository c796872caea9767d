//! Genetic-algorithm baseline for maximizing EI: multistart populations
//! grown by mutation and crossover, then truncated back to the best members.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ei::{BestEstimates, FeatureTarget};
use crate::error::{Error, Result};
use crate::gp::GpFit;
use crate::lhs;

/// Largest relative perturbation applied by [`mutate`].
pub const MUTATION_SCALE: f64 = 0.05;

/// Each generation evaluates `[X; mutate(X)]` and its crossover: four times
/// the population.
pub const POOL_FACTOR: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub n_init: usize,
    pub n_generations: usize,
    pub n_multistarts: usize,
    pub mutation_fraction: f64,
    pub ei_eval_budget: usize,
    pub rng_seed: u64,
}

impl GaConfig {
    /// Splits an EI budget into population × generations × pool factor:
    /// 25 × 5 × 4 = 500 in 2D, 50 × 15 × 4 = 3000 in 4D.
    pub fn for_dim(d: usize, rng_seed: u64) -> Self {
        let (n_init, n_generations, budget) = if d <= 2 { (25, 5, 500) } else { (50, 15, 3000) };
        Self {
            n_init,
            n_generations,
            n_multistarts: 1,
            mutation_fraction: MUTATION_SCALE,
            ei_eval_budget: budget,
            rng_seed,
        }
    }

    /// Same layout rescaled to a different budget, keeping five generations
    /// per multistart in 2D.
    pub fn with_budget(d: usize, budget: usize, rng_seed: u64) -> Self {
        let mut cfg = Self::for_dim(d, rng_seed);
        let per_gen = (budget / cfg.n_generations / POOL_FACTOR).max(2);
        cfg.n_init = per_gen;
        cfg.ei_eval_budget = budget;
        cfg
    }

    pub fn evals_required(&self) -> usize {
        self.n_multistarts * self.n_generations * POOL_FACTOR * self.n_init
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_init < 2 || self.n_generations == 0 || self.n_multistarts == 0 {
            return Err(Error::Config(
                "GA needs population >= 2 and at least one generation".into(),
            ));
        }
        if !(self.mutation_fraction > 0.0 && self.mutation_fraction <= MUTATION_SCALE) {
            return Err(Error::Config(format!(
                "mutation fraction must lie in (0, {MUTATION_SCALE}], got {}",
                self.mutation_fraction
            )));
        }
        if self.evals_required() > self.ei_eval_budget {
            return Err(Error::Config(format!(
                "GA layout needs {} EI evaluations but the budget is {}",
                self.evals_required(),
                self.ei_eval_budget
            )));
        }
        Ok(())
    }
}

/// Multiplies every coordinate by `1 + u`, `u ~ U[−fraction, fraction]`,
/// and clamps to the unit interval.
pub fn mutate<R: Rng + ?Sized>(pop: &[Vec<f64>], fraction: f64, rng: &mut R) -> Vec<Vec<f64>> {
    pop.iter()
        .map(|p| {
            p.iter()
                .map(|&v| (v * (1.0 + rng.gen_range(-fraction..=fraction))).clamp(0.0, 1.0))
                .collect()
        })
        .collect()
}

/// Random disjoint pairs swap a random nonempty subset of coordinates. An
/// odd member out is copied unchanged.
pub fn crossover<R: Rng + ?Sized>(pop: &[Vec<f64>], rng: &mut R) -> Vec<Vec<f64>> {
    let mut out = pop.to_vec();
    if out.len() < 2 {
        return out;
    }
    let d = out[0].len();
    let mut order: Vec<usize> = (0..out.len()).collect();
    order.shuffle(rng);
    for pair in order.chunks_exact(2) {
        let (i, j) = (pair[0], pair[1]);
        let mut mask: Vec<bool> = (0..d).map(|_| rng.gen_bool(0.5)).collect();
        if !mask.iter().any(|&m| m) {
            mask[rng.gen_range(0..d)] = true;
        }
        for (k, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
            let tmp = out[i][k];
            out[i][k] = out[j][k];
            out[j][k] = tmp;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaGeneration {
    pub multistart: usize,
    pub generation: usize,
    pub best_ei: f64,
    pub evals_used: usize,
}

#[derive(Debug, Clone)]
pub struct GaResult {
    pub x_best: Vec<f64>,
    pub ei_best: f64,
    pub evals_used: usize,
    pub trace: Vec<GaGeneration>,
}

impl GaResult {
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["multistart", "generation", "best_ei", "evals_used"])?;
        for g in &self.trace {
            out.write_record([
                g.multistart.to_string(),
                g.generation.to_string(),
                g.best_ei.to_string(),
                g.evals_used.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn ga_maximize(
    fit: &GpFit,
    target: &FeatureTarget,
    bests: &BestEstimates,
    config: &GaConfig,
) -> Result<GaResult> {
    config.validate()?;
    target.validate()?;
    let d = fit.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut evals = 0usize;
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut trace = Vec::with_capacity(config.n_multistarts * config.n_generations);

    for start in 0..config.n_multistarts {
        let mut pop = lhs::random_lhs(config.n_init, d, &mut rng);
        for generation in 0..config.n_generations {
            let mut pool = pop.clone();
            pool.extend(mutate(&pop, config.mutation_fraction, &mut rng));
            let crossed = crossover(&pool, &mut rng);
            pool.extend(crossed);

            let mut scored: Vec<(f64, Vec<f64>)> = pool
                .into_iter()
                .map(|x| {
                    let (y, s) = fit.predict_mean_sd(&x);
                    (target.ei(y, s, bests), x)
                })
                .collect();
            evals += scored.len();
            // Stable sort keeps earlier candidates ahead on ties.
            scored.sort_by(|a, b| b.0.total_cmp(&a.0));
            scored.truncate(config.n_init);
            let (top_ei, top_x) = &scored[0];
            if best.as_ref().is_none_or(|b| *top_ei > b.1) {
                best = Some((top_x.clone(), *top_ei));
            }
            trace.push(GaGeneration {
                multistart: start,
                generation,
                best_ei: *top_ei,
                evals_used: evals,
            });
            pop = scored.into_iter().map(|(_, x)| x).collect();
        }
    }
    let (x_best, ei_best) = best.expect("at least one generation ran");
    Ok(GaResult {
        x_best,
        ei_best,
        evals_used: evals,
        trace,
    })
}
