//! Expected-improvement criteria, their partial derivatives, and the
//! rectangle bound rules the branch-and-bound search relies on.
//!
//! All criteria take the predictive mean `yhat` and standard deviation `s`
//! of `y(x) ~ N(yhat, s²)`. At `s = 0` each criterion takes its continuous
//! limit.

use std::fmt;

use crate::error::{Error, Result};
use crate::normal::{cdf, pdf, second_moment_between};

pub const DEFAULT_ALPHA: f64 = 2.0;

/// The feature that the improvement function rewards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureTarget {
    /// Global minimum.
    Minimum,
    /// Global maximum and minimum together.
    MaxMin,
    /// Level set `y = level`, original criterion with the integral term.
    ContourFull { level: f64, alpha: f64 },
    /// Level set `y = level`, criterion without the integral term.
    ContourMod { level: f64, alpha: f64 },
}

impl FeatureTarget {
    pub fn contour_mod(level: f64) -> Self {
        Self::ContourMod {
            level,
            alpha: DEFAULT_ALPHA,
        }
    }

    pub fn contour_full(level: f64) -> Self {
        Self::ContourFull {
            level,
            alpha: DEFAULT_ALPHA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::ContourFull { level, alpha } | Self::ContourMod { level, alpha } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::Config(format!(
                        "alpha must be positive, got {alpha}"
                    )));
                }
                if !level.is_finite() {
                    return Err(Error::Config(format!(
                        "contour level must be finite, got {level}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn level(&self) -> Option<f64> {
        match *self {
            Self::ContourFull { level, .. } | Self::ContourMod { level, .. } => Some(level),
            _ => None,
        }
    }

    pub fn is_contour(&self) -> bool {
        self.level().is_some()
    }

    /// Pointwise criterion value.
    #[inline]
    pub fn ei(&self, yhat: f64, s: f64, bests: &BestEstimates) -> f64 {
        match *self {
            Self::Minimum => ei_min(yhat, s, bests.fmin),
            Self::MaxMin => ei_maxmin(yhat, s, bests),
            Self::ContourFull { level, alpha } => ei_contour_full(yhat, s, level, alpha),
            Self::ContourMod { level, alpha } => ei_contour_mod(yhat, s, level, alpha),
        }
    }
}

impl fmt::Display for FeatureTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Minimum => write!(f, "min"),
            Self::MaxMin => write!(f, "maxmin"),
            Self::ContourFull { level, alpha } => write!(f, "contour-full:{level}:{alpha}"),
            Self::ContourMod { level, alpha } => write!(f, "contour:{level}:{alpha}"),
        }
    }
}

impl std::str::FromStr for FeatureTarget {
    type Err = Error;

    /// `min`, `maxmin`, `contour:<level>[:<alpha>]` or
    /// `contour-full:<level>[:<alpha>]`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let kind = parts.next().unwrap_or_default().to_ascii_lowercase();
        let num = |p: Option<&str>, what: &str| -> Result<Option<f64>> {
            p.map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad {what} '{v}' in target '{s}'")))
            })
            .transpose()
        };
        let level = num(parts.next(), "level")?;
        let alpha = num(parts.next(), "alpha")?.unwrap_or(DEFAULT_ALPHA);
        if parts.next().is_some() {
            return Err(Error::Config(format!("too many fields in target '{s}'")));
        }
        let need_level =
            || level.ok_or_else(|| Error::Config(format!("target '{s}' needs a contour level")));
        let target = match kind.as_str() {
            "min" | "minimum" if level.is_none() => Self::Minimum,
            "maxmin" if level.is_none() => Self::MaxMin,
            "contour" | "contour-mod" => Self::ContourMod {
                level: need_level()?,
                alpha,
            },
            "contour-full" => Self::ContourFull {
                level: need_level()?,
                alpha,
            },
            _ => return Err(Error::Config(format!("unknown target '{s}'"))),
        };
        target.validate()?;
        Ok(target)
    }
}

/// Current estimates of the extremes: the observed response range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestEstimates {
    pub fmin: f64,
    pub fmax: f64,
}

impl BestEstimates {
    pub fn from_observed(y: &[f64]) -> Self {
        let (fmin, fmax) = y
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        Self { fmin, fmax }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.fmin + self.fmax)
    }
}

/// Ranges of the predictive mean and standard deviation over a region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredBox {
    pub yhat_lb: f64,
    pub yhat_ub: f64,
    pub s_lb: f64,
    pub s_ub: f64,
}

impl PredBox {
    pub fn point(yhat: f64, s: f64) -> Self {
        Self {
            yhat_lb: yhat,
            yhat_ub: yhat,
            s_lb: s,
            s_ub: s,
        }
    }

    /// Smallest box containing every `(yhat, s)` pair.
    pub fn enclosing(pairs: impl IntoIterator<Item = (f64, f64)>) -> Option<Self> {
        let mut it = pairs.into_iter();
        let (y0, s0) = it.next()?;
        Some(it.fold(Self::point(y0, s0), |b, (y, s)| Self {
            yhat_lb: b.yhat_lb.min(y),
            yhat_ub: b.yhat_ub.max(y),
            s_lb: b.s_lb.min(s),
            s_ub: b.s_ub.max(s),
        }))
    }

    pub fn is_valid(&self) -> bool {
        self.yhat_lb <= self.yhat_ub && 0.0 <= self.s_lb && self.s_lb <= self.s_ub
    }
}

/// Expected improvement for the minimum.
pub fn ei_min(yhat: f64, s: f64, fmin: f64) -> f64 {
    let gain = fmin - yhat;
    if s <= 0.0 {
        return gain.max(0.0);
    }
    let u = gain / s;
    (s * pdf(u) + gain * cdf(u)).max(0.0)
}

/// Expected improvement for the maximum and minimum jointly: the sum of the
/// one-sided criteria for each.
pub fn ei_maxmin(yhat: f64, s: f64, bests: &BestEstimates) -> f64 {
    ei_min(-yhat, s, -bests.fmax) + ei_min(yhat, s, bests.fmin)
}

/// Contour criterion including the integral of `w²φ(w)` over the band.
pub fn ei_contour_full(yhat: f64, s: f64, level: f64, alpha: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let eps = alpha * s;
    let gap = level - yhat;
    let lo = (gap - eps) / s;
    let hi = (gap + eps) / s;
    let mass = cdf(hi) - cdf(lo);
    let v = (eps * eps - gap * gap) * mass
        - 2.0 * gap * s * (pdf(hi) - pdf(lo))
        - s * s * second_moment_between(lo, hi);
    v.max(0.0)
}

/// `h(t) = (α² − t²)[Φ(t+α) − Φ(t−α)] − 2t[φ(t+α) − φ(t−α)]`, so that the
/// modified contour criterion is `s² h(t)`.
pub fn contour_mod_scaled(t: f64, alpha: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    // h is even; at −|t| the band mass is a difference of lower tails, which
    // keeps its relative accuracy far from the contour.
    let t = -t.abs();
    let mass = cdf(t + alpha) - cdf(t - alpha);
    let dens = pdf(t + alpha) - pdf(t - alpha);
    ((alpha * alpha - t * t) * mass - 2.0 * t * dens).max(0.0)
}

/// Below this `α`, `h` has a local minimum at `t = 0` (its curvature there,
/// `φ(α)(8α − 2α³) − 2(2Φ(α) − 1)`, changes sign).
pub const CONTOUR_MOD_BIMODAL_ALPHA: f64 = 1.043_311_702_108_068_5;

/// The `t ≥ 0` maximising `h`: zero for `α ≥ 1.0433`, otherwise the positive
/// root of `∂h/∂t`, which lies below `√2`.
pub fn contour_mod_peak(alpha: f64) -> f64 {
    let curvature =
        pdf(alpha) * (8.0 * alpha - 2.0 * alpha.powi(3)) - 2.0 * (2.0 * cdf(alpha) - 1.0);
    if curvature <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 2.0);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if d_contour_mod_st(mid, 1.0, alpha).1 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Contour criterion without the integral term, in `t = (a − yhat)/s`.
pub fn ei_contour_mod(yhat: f64, s: f64, level: f64, alpha: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    s * s * contour_mod_scaled((level - yhat) / s, alpha)
}

/// Partials of [`ei_maxmin`]: `(∂/∂s, ∂/∂yhat)`.
pub fn d_ei_maxmin(yhat: f64, s: f64, bests: &BestEstimates) -> Result<(f64, f64)> {
    if s <= 0.0 {
        return Err(Error::DerivativeUndefined);
    }
    let u1 = (yhat - bests.fmax) / s;
    let u2 = (bests.fmin - yhat) / s;
    Ok((pdf(u1) + pdf(u2), cdf(u1) - cdf(u2)))
}

/// Partials of [`ei_contour_mod`] in the `(s, t)` parameterization:
/// `(∂/∂s at fixed t, ∂/∂t at fixed s)`.
pub fn d_ei_contour_mod(yhat: f64, s: f64, level: f64, alpha: f64) -> Result<(f64, f64)> {
    if s <= 0.0 {
        return Err(Error::DerivativeUndefined);
    }
    let t = (level - yhat) / s;
    Ok(d_contour_mod_st(t, s, alpha))
}

/// The same partials taking `t` directly.
pub fn d_contour_mod_st(t: f64, s: f64, alpha: f64) -> (f64, f64) {
    let mass = cdf(t + alpha) - cdf(t - alpha);
    let pdf_sum = pdf(t + alpha) + pdf(t - alpha);
    let pdf_diff = pdf(t + alpha) - pdf(t - alpha);
    let s2 = s * s;
    let d_dt = -2.0 * s2 * t * mass
        + 2.0 * alpha * s2 * t * pdf_sum
        + s2 * (alpha * alpha + t * t - 2.0) * pdf_diff;
    let d_ds = 2.0 * s * (alpha * alpha - t * t) * mass - 4.0 * t * s * pdf_diff;
    (d_ds, d_dt)
}

/// Lower and upper bounds of the criterion over a region whose predictive
/// ranges are given by `pbox`.
pub fn ei_bounds(
    target: &FeatureTarget,
    pbox: &PredBox,
    bests: &BestEstimates,
) -> Result<(f64, f64)> {
    let (lb, ub) = match *target {
        FeatureTarget::Minimum => (
            ei_min(pbox.yhat_ub, pbox.s_lb, bests.fmin),
            ei_min(pbox.yhat_lb, pbox.s_ub, bests.fmin),
        ),
        FeatureTarget::MaxMin => {
            let at = |s: f64, y: f64| ei_maxmin(y, s, bests);
            (
                at(pbox.s_lb, pbox.yhat_lb).min(at(pbox.s_lb, pbox.yhat_ub)),
                at(pbox.s_ub, pbox.yhat_lb).max(at(pbox.s_ub, pbox.yhat_ub)),
            )
        }
        FeatureTarget::ContourMod { level, alpha } => {
            let (t_lb, t_ub) = t_range(level, pbox);
            // h is even and unimodal in |t| with its mode at contour_mod_peak.
            let near = if t_lb <= 0.0 && 0.0 <= t_ub {
                0.0
            } else {
                t_lb.abs().min(t_ub.abs())
            };
            let far = t_lb.abs().max(t_ub.abs());
            let h_lb = contour_mod_scaled(near, alpha).min(contour_mod_scaled(far, alpha));
            let h_ub = contour_mod_scaled(contour_mod_peak(alpha).clamp(near, far), alpha);
            (pbox.s_lb * pbox.s_lb * h_lb, pbox.s_ub * pbox.s_ub * h_ub)
        }
        FeatureTarget::ContourFull { .. } => {
            return Err(Error::UnsupportedTarget(target.to_string()));
        }
    };
    Ok((lb, ub.max(lb)))
}

/// Range of `t = (a − yhat)/s` over the corners of the `(yhat, s)` box.
fn t_range(level: f64, pbox: &PredBox) -> (f64, f64) {
    let ratio = |gap: f64, s: f64| -> f64 {
        if s > 0.0 {
            gap / s
        } else if gap > 0.0 {
            f64::INFINITY
        } else if gap < 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        }
    };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for y in [pbox.yhat_lb, pbox.yhat_ub] {
        for s in [pbox.s_lb, pbox.s_ub] {
            let t = ratio(level - y, s);
            lo = lo.min(t);
            hi = hi.max(t);
        }
    }
    (lo, hi)
}
