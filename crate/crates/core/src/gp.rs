//! Gaussian-process surrogate with a constant mean and a Gaussian
//! (power-exponential, exponent 2) correlation.
//!
//! Correlation hyper-parameters are fitted by maximizing the profile
//! likelihood; the mean and process variance then have closed forms.
//! Everything goes through a Cholesky factor of `R + δI`; no inverse is
//! ever formed.

use std::collections::hash_map::DefaultHasher;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lhs;
use crate::testbed::check_unit_point;

pub const DEFAULT_NUGGET: f64 = 1e-6;
pub const MAX_NUGGET: f64 = 1e-2;
pub const DEFAULT_THETA_BOX: (f64, f64) = (1e-2, 1e3);
pub const DEFAULT_RESTARTS: usize = 5;

/// Two design rows closer than this in every coordinate count as duplicates.
const DUPLICATE_TOL: f64 = 1e-12;

/// Returned by [`profile_neg_log_likelihood`] when the response has no
/// variation left after removing the mean.
pub const DEGENERATE_NLL: f64 = f64::NEG_INFINITY;

/// Input matrix in the unit cube with its responses.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignData {
    points: Vec<Vec<f64>>,
    y: Vec<f64>,
}

impl DesignData {
    pub fn new(points: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Parameter(format!(
                "need at least 2 design points, got {}",
                points.len()
            )));
        }
        if points.len() != y.len() {
            return Err(Error::Parameter(format!(
                "{} design points but {} responses",
                points.len(),
                y.len()
            )));
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::Parameter("design points have no coordinates".into()));
        }
        for p in &points {
            check_unit_point(p, d)?;
        }
        if let Some(v) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("non-finite response {v}")));
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if is_duplicate(&points[i], &points[j], DUPLICATE_TOL) {
                    return Err(Error::Parameter(format!(
                        "design rows {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(Self { points, y })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn into_parts(self) -> (Vec<Vec<f64>>, Vec<f64>) {
        (self.points, self.y)
    }
}

pub(crate) fn is_duplicate(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpParams {
    pub mu: f64,
    pub sigma2: f64,
    pub theta: Vec<f64>,
    pub delta: f64,
}

fn check_theta(theta: &[f64], d: usize) -> Result<()> {
    if theta.len() != d {
        return Err(Error::Parameter(format!(
            "theta has {} entries for d = {d}",
            theta.len()
        )));
    }
    if let Some(t) = theta.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(Error::Parameter(format!(
            "theta entries must be positive, got {t}"
        )));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::Parameter(format!(
            "nugget must lie in [0,1), got {delta}"
        )));
    }
    Ok(())
}

#[inline]
fn corr(a: &[f64], b: &[f64], theta: &[f64]) -> f64 {
    let s: f64 = a
        .iter()
        .zip(b)
        .zip(theta)
        .map(|((x, y), t)| t * (x - y) * (x - y))
        .sum();
    (-s).exp()
}

/// `R + δI` with `R_ij = exp(−Σ_k θ_k (x_ik − x_jk)²)`.
pub fn correlation_matrix(points: &[Vec<f64>], theta: &[f64], delta: f64) -> Result<DMatrix<f64>> {
    let d = points.first().map_or(theta.len(), Vec::len);
    check_theta(theta, d)?;
    check_delta(delta)?;
    let n = points.len();
    let mut r = DMatrix::<f64>::identity(n, n) * (1.0 + delta);
    for i in 0..n {
        for j in 0..i {
            let v = corr(&points[i], &points[j], theta);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(r)
}

/// Closed-form pieces of the likelihood at fixed `θ`.
struct Profile {
    chol: Cholesky<f64, Dyn>,
    mu: f64,
    sigma2: f64,
    log_det: f64,
    resid_weights: DVector<f64>,
    ones_weights: DVector<f64>,
    ones_quad: f64,
}

fn profile(data: &DesignData, theta: &[f64], delta: f64) -> Result<Profile> {
    let r = correlation_matrix(&data.points, theta, delta)?;
    let chol = Cholesky::new(r).ok_or(Error::IllConditioned { delta })?;
    let n = data.n();
    let ones = DVector::<f64>::from_element(n, 1.0);
    let y = DVector::from_column_slice(&data.y);
    let ones_weights = chol.solve(&ones);
    let ones_quad = ones.dot(&ones_weights);
    let constant = is_constant(&data.y);
    let mu = if constant {
        data.y.iter().sum::<f64>() / n as f64
    } else {
        ones_weights.dot(&y) / ones_quad
    };
    let resid = y.add_scalar(-mu);
    let resid_weights = chol.solve(&resid);
    // Constant responses give σ̂² = 0 exactly; roundoff would otherwise leave
    // a tiny positive value and a finite, hugely negative likelihood.
    let sigma2 = if constant {
        0.0
    } else {
        (resid.dot(&resid_weights) / n as f64).max(0.0)
    };
    let log_det = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>();
    if !(mu.is_finite() && sigma2.is_finite() && log_det.is_finite() && ones_quad > 0.0) {
        return Err(Error::IllConditioned { delta });
    }
    Ok(Profile {
        chol,
        mu,
        sigma2,
        log_det,
        resid_weights,
        ones_weights,
        ones_quad,
    })
}

fn nll_from(p: &Profile, n: usize) -> f64 {
    if p.sigma2 <= 0.0 {
        return DEGENERATE_NLL;
    }
    let n = n as f64;
    0.5 * (n * (2.0 * PI * p.sigma2).ln() + p.log_det + n)
}

/// Negative log-likelihood of `y ~ N(1μ̂, σ̂²(R+δI))` with `μ̂(θ)` and
/// `σ̂²(θ)` plugged in. Returns [`DEGENERATE_NLL`] when `σ̂² = 0`.
pub fn profile_neg_log_likelihood(data: &DesignData, theta: &[f64], delta: f64) -> Result<f64> {
    let p = profile(data, theta, delta)?;
    Ok(nll_from(&p, data.n()))
}

/// A fitted surrogate. Immutable; prediction only borrows it.
#[derive(Debug, Clone)]
pub struct GpFit {
    data: DesignData,
    params: GpParams,
    lower: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    resid_weights: DVector<f64>,
    ones_weights: DVector<f64>,
    ones_quad: f64,
    neg_log_lik: f64,
    degenerate: bool,
}

impl GpFit {
    /// Builds the fit at fixed hyper-parameters.
    pub fn at_theta(data: DesignData, theta: &[f64], delta: f64) -> Result<Self> {
        check_theta(theta, data.dim())?;
        let p = profile(&data, theta, delta)?;
        let neg_log_lik = nll_from(&p, data.n());
        let degenerate = p.sigma2 <= 0.0 || is_constant(&data.y);
        let sigma2 = if degenerate { 0.0 } else { p.sigma2 };
        Ok(Self {
            lower: p.chol.l(),
            params: GpParams {
                mu: p.mu,
                sigma2,
                theta: theta.to_vec(),
                delta,
            },
            chol: p.chol,
            resid_weights: p.resid_weights,
            ones_weights: p.ones_weights,
            ones_quad: p.ones_quad,
            neg_log_lik,
            degenerate,
            data,
        })
    }

    pub fn data(&self) -> &DesignData {
        &self.data
    }

    pub fn params(&self) -> &GpParams {
        &self.params
    }

    pub fn neg_log_likelihood(&self) -> f64 {
        self.neg_log_lik
    }

    /// True when the response carried no variation (`σ̂² = 0`).
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    /// `(ŷ, s²)` at `x`, with `s²` clamped at zero.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        check_unit_point(x, self.dim())?;
        let (yhat, s2) = self.predict_raw(x);
        Ok((yhat, s2.max(0.0)))
    }

    /// `(ŷ, s)` without the domain check; callers guarantee `x ∈ [0,1]^d`.
    #[inline]
    pub(crate) fn predict_mean_sd(&self, x: &[f64]) -> (f64, f64) {
        let (yhat, s2) = self.predict_raw(x);
        (yhat, s2.max(0.0).sqrt())
    }

    /// `(ŷ, s²)` before clamping.
    pub fn predict_raw(&self, x: &[f64]) -> (f64, f64) {
        let n = self.data.n();
        let theta = &self.params.theta;
        let r = DVector::from_iterator(n, self.data.points.iter().map(|p| corr(x, p, theta)));
        let yhat = self.params.mu + r.dot(&self.resid_weights);
        if self.params.sigma2 == 0.0 {
            return (yhat, 0.0);
        }
        let v = self
            .lower
            .solve_lower_triangular(&r)
            .expect("Cholesky factor has a positive diagonal");
        let one_r = 1.0 - self.ones_weights.dot(&r);
        let s2 = self.params.sigma2 * (1.0 - v.norm_squared() + one_r * one_r / self.ones_quad);
        (yhat, s2)
    }

    /// Recomputes `(μ̂, σ̂²)` from the stored factor.
    pub fn recompute_mean_variance(&self) -> (f64, f64) {
        let n = self.data.n();
        let y = DVector::from_column_slice(&self.data.y);
        let ones = DVector::<f64>::from_element(n, 1.0);
        let w1 = self.chol.solve(&ones);
        let mu = w1.dot(&y) / ones.dot(&w1);
        let resid = y.add_scalar(-mu);
        let sigma2 = resid.dot(&self.chol.solve(&resid)) / n as f64;
        (mu, if self.degenerate { 0.0 } else { sigma2 })
    }

    /// Hash of the design and fitted parameters, for pairing checks.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for p in &self.data.points {
            for v in p {
                v.to_bits().hash(&mut h);
            }
        }
        for v in &self.data.y {
            v.to_bits().hash(&mut h);
        }
        let p = &self.params;
        for v in [p.mu, p.sigma2, p.delta].iter().chain(&p.theta) {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

fn is_constant(y: &[f64]) -> bool {
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let scale = lo.abs().max(hi.abs()).max(1.0);
    hi - lo <= 1e-12 * scale
}

/// Maximum-likelihood fit with a multistart Nelder–Mead search over
/// `log θ`, confined to `theta_box`.
pub fn fit_mle(
    data: &DesignData,
    theta_box: &[(f64, f64)],
    delta: f64,
    restarts: usize,
) -> Result<GpFit> {
    let d = data.dim();
    if theta_box.len() != d {
        return Err(Error::Parameter(format!(
            "theta box has {} intervals for d = {d}",
            theta_box.len()
        )));
    }
    if theta_box
        .iter()
        .any(|&(lo, hi)| !(lo > 0.0 && hi >= lo && hi.is_finite()))
    {
        return Err(Error::Parameter(
            "theta box must be positive and ordered".into(),
        ));
    }
    check_delta(delta)?;
    if restarts == 0 {
        return Err(Error::Parameter("need at least one restart".into()));
    }
    let log_lo: Vec<f64> = theta_box.iter().map(|b| b.0.ln()).collect();
    let log_hi: Vec<f64> = theta_box.iter().map(|b| b.1.ln()).collect();
    let to_theta = |u: &[f64]| -> Vec<f64> {
        u.iter()
            .zip(log_lo.iter().zip(&log_hi))
            .map(|(&v, (&lo, &hi))| v.clamp(lo, hi).exp())
            .collect()
    };

    if is_constant(&data.y) {
        let mid: Vec<f64> = log_lo
            .iter()
            .zip(&log_hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        return GpFit::at_theta(data.clone(), &to_theta(&mid), delta);
    }

    let objective = |u: &[f64]| -> f64 {
        match profile_neg_log_likelihood(data, &to_theta(u), delta) {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x6a09_e667);
    let starts = lhs::lhs_in_box(restarts, &log_lo, &log_hi, &mut rng);
    let steps: Vec<f64> = log_lo
        .iter()
        .zip(&log_hi)
        .map(|(a, b)| 0.1 * (b - a))
        .collect();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in starts {
        let (u, v) = nelder_mead(&objective, &start, &steps, 400 * d);
        // Restart once from the converged point to escape a collapsed simplex.
        let small: Vec<f64> = steps.iter().map(|s| 0.25 * s).collect();
        let (u, v) = if v.is_finite() {
            nelder_mead(&objective, &u, &small, 200 * d)
        } else {
            (u, v)
        };
        if v.is_finite() && best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((u, v));
        }
    }
    let (u, _) = best.ok_or_else(|| {
        Error::Fit(format!(
            "correlation matrix not factorizable at any start (nugget {delta:e})"
        ))
    })?;
    GpFit::at_theta(data.clone(), &to_theta(&u), delta)
}

/// Fitting policy: θ search box, starting nugget and escalation ceiling.
#[derive(Debug, Clone, PartialEq)]
pub struct GpFitter {
    pub theta_bounds: (f64, f64),
    pub nugget: f64,
    pub max_nugget: f64,
    pub restarts: usize,
}

impl Default for GpFitter {
    fn default() -> Self {
        Self {
            theta_bounds: DEFAULT_THETA_BOX,
            nugget: DEFAULT_NUGGET,
            max_nugget: MAX_NUGGET,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

impl GpFitter {
    /// Fits, multiplying the nugget by ten after each failure up to `max_nugget`.
    pub fn fit(&self, data: &DesignData) -> Result<GpFit> {
        let theta_box = vec![self.theta_bounds; data.dim()];
        let mut delta = self.nugget;
        loop {
            match fit_mle(data, &theta_box, delta, self.restarts) {
                Ok(fit) => return Ok(fit),
                Err(e @ (Error::Fit(_) | Error::IllConditioned { .. })) => {
                    let next = if delta == 0.0 { 1e-10 } else { delta * 10.0 };
                    if next > self.max_nugget * (1.0 + 1e-9) {
                        return Err(e);
                    }
                    delta = next;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Plain Nelder–Mead (reflection 1, expansion 2, contraction ½, shrink ½).
fn nelder_mead(
    f: &impl Fn(&[f64]) -> f64,
    x0: &[f64],
    step: &[f64],
    max_evals: usize,
) -> (Vec<f64>, f64) {
    let d = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for k in 0..d {
        let mut v = x0.to_vec();
        v[k] += step[k];
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = d + 1;
    while evals < max_evals {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = (vals[d] - vals[0]).abs();
        let size = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if vals[0].is_finite() && spread <= 1e-12 * (1.0 + vals[0].abs()) && size <= 1e-7 {
            break;
        }

        let centroid: Vec<f64> = (0..d)
            .map(|k| simplex[..d].iter().map(|v| v[k]).sum::<f64>() / d as f64)
            .collect();
        let along = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[d])
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(2.0);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[d] = xe;
                vals[d] = fe;
            } else {
                simplex[d] = xr;
                vals[d] = fr;
            }
        } else if fr < vals[d - 1] {
            simplex[d] = xr;
            vals[d] = fr;
        } else {
            let (xc, fc) = if fr < vals[d] {
                let xc = along(0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < vals[d].min(fr) {
                simplex[d] = xc;
                vals[d] = fc;
            } else {
                for i in 1..=d {
                    let shrunk: Vec<f64> = simplex[i]
                        .iter()
                        .zip(&simplex[0])
                        .map(|(v, b)| b + 0.5 * (v - b))
                        .collect();
                    vals[i] = f(&shrunk);
                    simplex[i] = shrunk;
                }
                evals += d;
            }
        }
    }
    let best = (0..=d)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .unwrap_or(0);
    (simplex[best].clone(), vals[best])
}
