//! Replicated comparisons of the EI optimizers: the one-step direct
//! comparison, the long-run sequential comparison against a static design,
//! the local/global study of the two contour criteria, and the derivative
//! tables of the modified contour criterion.
//!
//! Replications run on a rayon pool keyed by replication index; results are
//! collected in index order, so every output is independent of scheduling.

mod config;
mod stats;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{ExperimentConfig, ExperimentKind, FunctionName, PartialConfig};
pub use stats::{mean_stderr, paired_one_sided, PairedTest};

use crate::bnb::BnbConfig;
use crate::ei::{d_contour_mod_st, BestEstimates, FeatureTarget, DEFAULT_ALPHA};
use crate::error::{Error, Result};
use crate::ga::GaConfig;
use crate::gp::{DesignData, GpFit, GpFitter};
use crate::seq::{self, derive_seed, opt, static_baseline, Optimizer, RunTrace, SequentialDesign};
use crate::testbed::discretize_contour;

/// A replication is dropped when the fitted process variance exceeds the
/// sample variance of the responses by this factor.
pub const BAD_FIT_VARIANCE_RATIO: f64 = 1e6;

/// Mean and standard error of one metric over the included replications.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: String,
    pub key: usize,
    pub metric: String,
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
    pub n_included: usize,
    pub n_excluded: usize,
}

impl AggregateRow {
    pub fn from_values(
        method: &str,
        key: usize,
        metric: &str,
        values: &[f64],
        n_excluded: usize,
    ) -> Self {
        let (mean, stderr) = mean_stderr(values);
        Self {
            method: method.into(),
            key,
            metric: metric.into(),
            mean,
            stderr,
            n_included: values.len(),
            n_excluded,
        }
    }
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], key_name: &str, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "method",
        key_name,
        "metric",
        "mean",
        "stderr",
        "n_included",
        "n_excluded",
    ])?;
    for r in rows {
        out.write_record([
            r.method.clone(),
            r.key.to_string(),
            r.metric.clone(),
            opt(r.mean),
            opt(r.stderr),
            r.n_included.to_string(),
            r.n_excluded.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn pool(cfg: &ExperimentConfig) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| Error::Experiment(format!("thread pool: {e}")))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Why a fitted replication is unusable, if it is.
fn bad_fit_reason(fit: &GpFit) -> Option<String> {
    let y = fit.data().y();
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let sigma2 = fit.params().sigma2;
    (sigma2 > BAD_FIT_VARIANCE_RATIO * var).then(|| {
        format!("sigma2 {sigma2:e} exceeds {BAD_FIT_VARIANCE_RATIO:e} x sample variance {var:e}")
    })
}

fn bnb_config(cfg: &ExperimentConfig, seed: u64) -> BnbConfig {
    let d = cfg.function.dim();
    let mut bnb = BnbConfig::for_dim(d, seed);
    bnb.ei_eval_budget = cfg.budget;
    bnb
}

fn ga_config(cfg: &ExperimentConfig, seed: u64) -> GaConfig {
    GaConfig::with_budget(cfg.function.dim(), cfg.budget, seed)
}

// ---------------------------------------------------------------------------
// Direct comparison
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct DirectRow {
    pub run_id: usize,
    pub seed: u64,
    pub n0: usize,
    pub method: String,
    pub max_ei: Option<f64>,
    pub evals_used: usize,
    pub fingerprint: Option<u64>,
    pub excluded: Option<String>,
}

#[derive(Debug, Clone)]
pub struct DirectComparison {
    pub raw: Vec<DirectRow>,
    pub aggregate: Vec<AggregateRow>,
    /// BNB minus GA, per `n0`.
    pub paired: Vec<(usize, Option<PairedTest>)>,
}

/// One design and one fit per replication and `n0`, handed unchanged to
/// both optimizers. A replication whose fit is unusable is dropped for both.
pub fn run_direct_comparison(cfg: &ExperimentConfig) -> Result<DirectComparison> {
    cfg.validate()?;
    let sim = cfg.sim();
    let d = sim.dim();
    let fitter = GpFitter::default();
    let jobs: Vec<(usize, usize)> = (0..cfg.replications)
        .flat_map(|r| cfg.n0.iter().map(move |&n0| (r, n0)))
        .collect();
    let rows: Vec<Result<Vec<DirectRow>>> = pool(cfg)?.install(|| {
        jobs.par_iter()
            .map(|&(rep, n0)| {
                let seed = cfg.rep_seed(rep);
                let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(
                    derive_seed(seed, 0xd1, n0 as u64),
                );
                let pts = seq::maximin_lhd(n0, d, cfg.lhd_candidates, &mut rng);
                let y: Vec<f64> = pts.iter().map(|p| sim.eval_unchecked(p)).collect();
                let bests = BestEstimates::from_observed(&y);
                let fit = if cfg.inject_fit_failures.contains(&rep) {
                    Err(Error::Fit("injected failure".into()))
                } else {
                    fitter.fit(&DesignData::new(pts, y)?)
                };
                let fit = fit
                    .map_err(|e| e.to_string())
                    .and_then(|f| match bad_fit_reason(&f) {
                        Some(why) => Err(why),
                        None => Ok(f),
                    });
                let mut out = Vec::with_capacity(2);
                let opt_seed = derive_seed(seed, 0xd2, n0 as u64);
                for method in [
                    Optimizer::Bnb(bnb_config(cfg, opt_seed)),
                    Optimizer::Ga(ga_config(cfg, opt_seed)),
                ] {
                    let row = match &fit {
                        Ok(fit) => {
                            let (_, ei, used) =
                                method.maximize(fit, &cfg.target, &bests, opt_seed)?;
                            DirectRow {
                                run_id: rep,
                                seed,
                                n0,
                                method: method.name().into(),
                                max_ei: Some(ei),
                                evals_used: used,
                                fingerprint: Some(fit.fingerprint()),
                                excluded: None,
                            }
                        }
                        Err(why) => DirectRow {
                            run_id: rep,
                            seed,
                            n0,
                            method: method.name().into(),
                            max_ei: None,
                            evals_used: 0,
                            fingerprint: None,
                            excluded: Some(why.clone()),
                        },
                    };
                    out.push(row);
                }
                Ok(out)
            })
            .collect()
    });
    let mut raw = Vec::with_capacity(jobs.len() * 2);
    for r in rows {
        raw.extend(r?);
    }

    let mut aggregate = Vec::new();
    let mut paired = Vec::new();
    for &n0 in &cfg.n0 {
        let values = |m: &str| -> (Vec<f64>, usize) {
            let sel: Vec<&DirectRow> = raw.iter().filter(|r| r.n0 == n0 && r.method == m).collect();
            let inc: Vec<f64> = sel.iter().filter_map(|r| r.max_ei).collect();
            let exc = sel.len() - inc.len();
            (inc, exc)
        };
        let (bnb, bnb_exc) = values("bnb");
        let (ga, ga_exc) = values("ga");
        if bnb.is_empty() {
            return Err(Error::Experiment(format!(
                "no successful replications for n0 = {n0}"
            )));
        }
        aggregate.push(AggregateRow::from_values(
            "bnb", n0, "max_ei", &bnb, bnb_exc,
        ));
        aggregate.push(AggregateRow::from_values("ga", n0, "max_ei", &ga, ga_exc));
        paired.push((n0, paired_one_sided(&bnb, &ga)));
    }
    Ok(DirectComparison {
        raw,
        aggregate,
        paired,
    })
}

impl DirectComparison {
    pub fn write_raw_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "run_id",
            "seed",
            "n0",
            "method",
            "max_ei",
            "evals_used",
            "fingerprint",
            "excluded",
        ])?;
        for r in &self.raw {
            out.write_record([
                r.run_id.to_string(),
                r.seed.to_string(),
                r.n0.to_string(),
                r.method.clone(),
                opt(r.max_ei),
                r.evals_used.to_string(),
                r.fingerprint
                    .map(|f| format!("{f:016x}"))
                    .unwrap_or_default(),
                r.excluded.clone().unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_outputs(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        self.write_raw_csv(create(dir, "direct_raw.csv")?)?;
        write_aggregate_csv(&self.aggregate, "n0", create(dir, "direct_aggregate.csv")?)?;
        let mut out = csv::Writer::from_writer(create(dir, "direct_paired.csv")?);
        out.write_record(["n0", "n", "mean_diff", "t_stat", "p_value"])?;
        for (n0, t) in &self.paired {
            match t {
                Some(t) => out.write_record([
                    n0.to_string(),
                    t.n.to_string(),
                    t.mean_diff.to_string(),
                    t.t_stat.to_string(),
                    t.p_value.to_string(),
                ])?,
                None => out.write_record([
                    n0.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ])?,
            }
        }
        out.flush()?;
        Ok([
            "direct_raw.csv",
            "direct_aggregate.csv",
            "direct_paired.csv",
        ]
        .iter()
        .map(|f| dir.join(f))
        .collect())
    }
}

// ---------------------------------------------------------------------------
// Long-run comparison
// ---------------------------------------------------------------------------

/// One row of the long-run raw table.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub run_id: usize,
    pub seed: u64,
    pub method: String,
    pub k: usize,
    pub y_new: Option<f64>,
    pub fmin_est: f64,
    pub fmax_est: f64,
    pub max_ei: Option<f64>,
    pub d_k: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LongRun {
    pub raw: Vec<CurvePoint>,
    pub aggregate: Vec<AggregateRow>,
    /// `(run_id, reason)` for every excluded replication.
    pub excluded: Vec<(usize, String)>,
    pub traces: Vec<RunTrace>,
}

pub const LONGRUN_METHODS: [&str; 3] = ["bnb", "ga", "static"];

fn contour_points(cfg: &ExperimentConfig) -> Result<Option<Vec<Vec<f64>>>> {
    cfg.target
        .level()
        .map(|a| discretize_contour(&cfg.sim(), a, cfg.contour_resolution))
        .transpose()
}

/// Sequential BNB, sequential GA and the static design, per replication,
/// from a shared initial design.
pub fn run_long_run(cfg: &ExperimentConfig) -> Result<LongRun> {
    cfg.validate()?;
    let sim = cfg.sim();
    let contour = contour_points(cfg)?;
    let n0 = cfg.n0[0];
    let fitter = GpFitter::default();
    let ks: Vec<usize> = (0..=cfg.n_new).collect();

    type RepOut = (Vec<CurvePoint>, Vec<RunTrace>, Option<String>);
    let reps: Vec<Result<RepOut>> = pool(cfg)?.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = cfg.rep_seed(rep);
                let mut points = Vec::new();
                let mut traces = Vec::new();
                let mut failure = None;
                for opt in [
                    Optimizer::Bnb(bnb_config(cfg, 0)),
                    Optimizer::Ga(ga_config(cfg, 0)),
                ] {
                    let mut design = SequentialDesign::new(&sim, cfg.target, n0, cfg.n_new, opt);
                    design.lhd_candidates = cfg.lhd_candidates;
                    design.contour = contour.as_deref();
                    let trace = design.run(seed)?;
                    if let Some(f) = &trace.failure {
                        failure.get_or_insert_with(|| format!("{}: {f}", trace.method));
                    }
                    points.extend(trace.records.iter().map(|r| CurvePoint {
                        run_id: rep,
                        seed,
                        method: trace.method.clone(),
                        k: r.k,
                        y_new: r.y_new,
                        fmin_est: r.fmin_est,
                        fmax_est: r.fmax_est,
                        max_ei: r.max_ei,
                        d_k: r.divergence,
                    }));
                    traces.push(trace);
                }
                let st = static_baseline(
                    &sim,
                    cfg.target,
                    n0,
                    &ks,
                    seed,
                    contour.as_deref(),
                    &fitter,
                    cfg.lhd_candidates,
                )?;
                for lvl in &st.levels {
                    if let Some(f) = &lvl.failure {
                        failure.get_or_insert_with(|| format!("static k={}: {f}", lvl.k));
                    }
                    points.push(CurvePoint {
                        run_id: rep,
                        seed,
                        method: "static".into(),
                        k: lvl.k,
                        y_new: None,
                        fmin_est: lvl.fmin_est,
                        fmax_est: lvl.fmax_est,
                        max_ei: None,
                        d_k: lvl.divergence,
                    });
                }
                Ok((points, traces, failure))
            })
            .collect()
    });

    let mut raw = Vec::new();
    let mut traces = Vec::new();
    let mut excluded = Vec::new();
    for (rep, r) in reps.into_iter().enumerate() {
        let (pts, tr, failure) = r?;
        if let Some(why) = failure {
            excluded.push((rep, why));
        }
        raw.extend(pts);
        traces.extend(tr);
    }
    if excluded.len() == cfg.replications {
        return Err(Error::Experiment("every replication failed".into()));
    }
    let aggregate = aggregate_curves(&raw, &excluded, cfg.n_new);
    Ok(LongRun {
        raw,
        aggregate,
        excluded,
        traces,
    })
}

/// Per-(method, k) means of `fmin_est`, `fmax_est` and `d_k` over the
/// replications not listed in `excluded`.
pub fn aggregate_curves(
    raw: &[CurvePoint],
    excluded: &[(usize, String)],
    n_new: usize,
) -> Vec<AggregateRow> {
    let dropped = |id: usize| excluded.iter().any(|(r, _)| *r == id);
    let mut rows = Vec::new();
    for method in LONGRUN_METHODS {
        for k in 0..=n_new {
            let sel: Vec<&CurvePoint> = raw
                .iter()
                .filter(|p| p.method == method && p.k == k && !dropped(p.run_id))
                .collect();
            let metrics: [(&str, Vec<f64>); 3] = [
                ("fmin_est", sel.iter().map(|p| p.fmin_est).collect()),
                ("fmax_est", sel.iter().map(|p| p.fmax_est).collect()),
                ("d_k", sel.iter().filter_map(|p| p.d_k).collect()),
            ];
            for (name, vals) in metrics {
                if name == "d_k" && vals.is_empty() {
                    continue;
                }
                rows.push(AggregateRow::from_values(
                    method,
                    k,
                    name,
                    &vals,
                    excluded.len(),
                ));
            }
        }
    }
    rows
}

impl LongRun {
    pub fn mean(&self, method: &str, k: usize, metric: &str) -> Option<f64> {
        self.aggregate
            .iter()
            .find(|r| r.method == method && r.key == k && r.metric == metric)
            .and_then(|r| r.mean)
    }

    pub fn write_raw_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "run_id", "seed", "method", "k", "y_new", "fmin_est", "fmax_est", "max_ei", "d_k",
        ])?;
        for p in &self.raw {
            out.write_record([
                p.run_id.to_string(),
                p.seed.to_string(),
                p.method.clone(),
                p.k.to_string(),
                opt(p.y_new),
                p.fmin_est.to_string(),
                p.fmax_est.to_string(),
                opt(p.max_ei),
                opt(p.d_k),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_outputs(&self, dir: &Path, dim: usize) -> Result<Vec<PathBuf>> {
        self.write_raw_csv(create(dir, "longrun_raw.csv")?)?;
        write_aggregate_csv(&self.aggregate, "k", create(dir, "longrun_aggregate.csv")?)?;
        let mut w = create(dir, "longrun_traces.csv")?;
        let mut first = true;
        for (i, t) in self.traces.iter().enumerate() {
            let mut buf = Vec::new();
            t.write_csv(i / 2, dim, &mut buf)?;
            let text = String::from_utf8(buf).expect("csv output is utf-8");
            let body = if first {
                &text[..]
            } else {
                text.split_once('\n').map_or("", |x| x.1)
            };
            w.write_all(body.as_bytes())?;
            first = false;
        }
        w.flush()?;
        let mut ex = csv::Writer::from_writer(create(dir, "longrun_excluded.csv")?);
        ex.write_record(["run_id", "reason"])?;
        for (r, why) in &self.excluded {
            ex.write_record([r.to_string(), why.clone()])?;
        }
        ex.flush()?;
        Ok([
            "longrun_raw.csv",
            "longrun_aggregate.csv",
            "longrun_traces.csv",
            "longrun_excluded.csv",
        ]
        .iter()
        .map(|f| dir.join(f))
        .collect())
    }
}

// ---------------------------------------------------------------------------
// Local/global study
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub run_id: usize,
    pub seed: u64,
    pub criterion: String,
    pub k: usize,
    pub proportion: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LocalGlobalStudy {
    pub raw: Vec<StudyRow>,
    pub aggregate: Vec<AggregateRow>,
    pub excluded: Vec<(usize, String)>,
}

/// Fraction of the first `k` added points whose true response lies inside
/// the open band; undefined for `k = 0`.
pub fn band_proportion(y_new: &[f64], k: usize, band: (f64, f64)) -> Option<f64> {
    if k == 0 || y_new.len() < k {
        return None;
    }
    let hits = y_new[..k]
        .iter()
        .filter(|&&v| band.0 < v && v < band.1)
        .count();
    Some(hits as f64 / k as f64)
}

/// GA-driven contour runs under both contour criteria from shared initial
/// designs; reports how often the added points land near the contour.
pub fn run_local_global_study(cfg: &ExperimentConfig) -> Result<LocalGlobalStudy> {
    cfg.validate()?;
    let level = cfg.target.level().expect("validated contour target");
    let alpha = match cfg.target {
        FeatureTarget::ContourFull { alpha, .. } | FeatureTarget::ContourMod { alpha, .. } => alpha,
        _ => DEFAULT_ALPHA,
    };
    let sim = cfg.sim();
    let n0 = cfg.n0[0];
    let n_new = cfg
        .k_values
        .iter()
        .copied()
        .max()
        .unwrap_or(0)
        .max(cfg.n_new);
    let criteria = [
        ("ei_full", FeatureTarget::ContourFull { level, alpha }),
        ("ei_mod", FeatureTarget::ContourMod { level, alpha }),
    ];
    type RepOut = (Vec<StudyRow>, Option<String>);
    let reps: Vec<Result<RepOut>> = pool(cfg)?.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = cfg.rep_seed(rep);
                let mut rows = Vec::new();
                let mut failure = None;
                for (name, target) in criteria {
                    let mut design = SequentialDesign::new(
                        &sim,
                        target,
                        n0,
                        n_new,
                        Optimizer::Ga(ga_config(cfg, 0)),
                    );
                    design.lhd_candidates = cfg.lhd_candidates;
                    let trace = design.run(seed)?;
                    if let Some(f) = &trace.failure {
                        failure.get_or_insert_with(|| format!("{name}: {f}"));
                    }
                    let y_new: Vec<f64> = trace.records.iter().filter_map(|r| r.y_new).collect();
                    for &k in &cfg.k_values {
                        rows.push(StudyRow {
                            run_id: rep,
                            seed,
                            criterion: name.into(),
                            k,
                            proportion: band_proportion(&y_new, k, cfg.band),
                        });
                    }
                }
                Ok((rows, failure))
            })
            .collect()
    });
    let mut raw = Vec::new();
    let mut excluded = Vec::new();
    for (rep, r) in reps.into_iter().enumerate() {
        let (rows, failure) = r?;
        if let Some(why) = failure {
            excluded.push((rep, why));
        }
        raw.extend(rows);
    }
    let mut aggregate = Vec::new();
    for (name, _) in criteria {
        for &k in &cfg.k_values {
            let vals: Vec<f64> = raw
                .iter()
                .filter(|r| {
                    r.criterion == name && r.k == k && !excluded.iter().any(|(e, _)| *e == r.run_id)
                })
                .filter_map(|r| r.proportion)
                .collect();
            aggregate.push(AggregateRow::from_values(
                name,
                k,
                "local_proportion",
                &vals,
                excluded.len(),
            ));
        }
    }
    Ok(LocalGlobalStudy {
        raw,
        aggregate,
        excluded,
    })
}

impl LocalGlobalStudy {
    pub fn mean(&self, criterion: &str, k: usize) -> Option<f64> {
        self.aggregate
            .iter()
            .find(|r| r.method == criterion && r.key == k)
            .and_then(|r| r.mean)
    }

    pub fn write_outputs(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut out = csv::Writer::from_writer(create(dir, "study_raw.csv")?);
        out.write_record(["run_id", "seed", "criterion", "k", "proportion"])?;
        for r in &self.raw {
            out.write_record([
                r.run_id.to_string(),
                r.seed.to_string(),
                r.criterion.clone(),
                r.k.to_string(),
                opt(r.proportion),
            ])?;
        }
        out.flush()?;
        write_aggregate_csv(&self.aggregate, "k", create(dir, "study_aggregate.csv")?)?;
        Ok(vec![
            dir.join("study_raw.csv"),
            dir.join("study_aggregate.csv"),
        ])
    }
}

// ---------------------------------------------------------------------------
// Derivative tables
// ---------------------------------------------------------------------------

pub const DERIV_S_VALUES: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivRow {
    pub s: f64,
    pub t: f64,
    pub d_dt: f64,
    pub d_ds: f64,
    pub ei: f64,
}

/// Partials of the modified contour criterion on `t ∈ [−6, 6]` (step 0.01)
/// for each `s` in [`DERIV_S_VALUES`].
pub fn derivative_table(alpha: f64) -> Vec<DerivRow> {
    let mut rows = Vec::with_capacity(3 * 1201);
    for s in DERIV_S_VALUES {
        for i in 0..=1200 {
            let t = (i as f64 - 600.0) / 100.0;
            let (d_ds, d_dt) = d_contour_mod_st(t, s, alpha);
            rows.push(DerivRow {
                s,
                t,
                d_dt,
                d_ds,
                ei: s * s * crate::ei::contour_mod_scaled(t, alpha),
            });
        }
    }
    rows
}

pub fn write_derivative_csv<W: Write>(rows: &[DerivRow], alpha: f64, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["alpha", "s", "t", "d_dt", "d_ds", "ei"])?;
    for r in rows {
        out.write_record([
            alpha.to_string(),
            r.s.to_string(),
            r.t.to_string(),
            r.d_dt.to_string(),
            r.d_ds.to_string(),
            r.ei.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
