//! Benchmark simulators on the unit cube, true-contour discretization and
//! brute-force grid oracles for feature values.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::lhs;

/// Bisection stops once `|f(x) − a|` falls below this.
pub const CONTOUR_TOL: f64 = 1e-8;

/// A deterministic stand-in for an expensive simulator, defined on `[0,1]^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    /// Branin on `[0,5]²`.
    Branin,
    /// Levy on `[−10,10]^d`, `d ≥ 2`.
    Levy { dim: usize },
    /// Flat response; used for degenerate-case checks.
    Constant { dim: usize, value: f64 },
}

impl TestFunction {
    pub fn levy(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config(format!("Levy needs d >= 2, got {dim}")));
        }
        Ok(Self::Levy { dim })
    }

    pub fn dim(&self) -> usize {
        match *self {
            Self::Branin => 2,
            Self::Levy { dim } | Self::Constant { dim, .. } => dim,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Self::Branin => "branin".into(),
            Self::Levy { dim } => format!("levy{dim}"),
            Self::Constant { .. } => "constant".into(),
        }
    }

    /// Original per-dimension interval the unit cube is mapped onto.
    pub fn native_box(&self) -> Vec<(f64, f64)> {
        match *self {
            Self::Branin => vec![(0.0, 5.0); 2],
            Self::Levy { dim } => vec![(-10.0, 10.0); dim],
            Self::Constant { dim, .. } => vec![(0.0, 1.0); dim],
        }
    }

    /// Affine map from the unit cube to the native box.
    pub fn to_native(&self, x: &[f64]) -> Vec<f64> {
        self.native_box()
            .iter()
            .zip(x)
            .map(|(&(lo, hi), &xi)| lo + (hi - lo) * xi)
            .collect()
    }

    /// Evaluates the function at a native-box point.
    pub fn eval_native(&self, z: &[f64]) -> f64 {
        match *self {
            Self::Branin => branin_native(z[0], z[1]),
            Self::Levy { .. } => levy_native(z),
            Self::Constant { value, .. } => value,
        }
    }

    /// Evaluates at a unit-cube point; points outside `[0,1]^d` are rejected.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_unit_point(x, self.dim())?;
        Ok(self.eval_native(&self.to_native(x)))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.eval_native(&self.to_native(x))
    }
}

pub(crate) fn check_unit_point(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim || x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Domain {
            point: x.to_vec(),
            dim,
        });
    }
    Ok(())
}

pub fn branin_native(x1: f64, x2: f64) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    let q = x2 - b * x1 * x1 + c * x1 - 6.0;
    q * q + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

/// Levy with `w_k = 1 + (z_k − 1)/4`; the last term is `(w_d − 1)²`.
pub fn levy_native(z: &[f64]) -> f64 {
    let w: Vec<f64> = z.iter().map(|&zk| 1.0 + (zk - 1.0) / 4.0).collect();
    let d = w.len();
    let head = sin_pi_sq(w[0]);
    let body: f64 = w[..d - 1]
        .iter()
        .map(|&wk| (wk - 1.0).powi(2) * (1.0 + 10.0 * (PI * wk + 1.0).sin().powi(2)))
        .sum();
    head + body + (w[d - 1] - 1.0).powi(2)
}

/// `sin²(πw)`, with the argument reduced first so integer `w` gives exactly 0.
fn sin_pi_sq(w: f64) -> f64 {
    (PI * (w - w.round())).sin().powi(2)
}

/// Rescaled Branin on `[0,1]²`.
pub fn branin(x: &[f64]) -> Result<f64> {
    TestFunction::Branin.eval(x)
}

/// Rescaled Levy on `[0,1]^d`.
pub fn levy(x: &[f64], dim: usize) -> Result<f64> {
    TestFunction::levy(dim)?.eval(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Min,
    Max,
}

/// Grid extremum of `f` over the tensor grid with `resolution` nodes per axis.
///
/// Nodes are visited in lexicographic index order (first axis slowest) and
/// only a strict improvement replaces the incumbent, so ties resolve to the
/// smallest index.
pub fn grid_feature_oracle(
    f: &TestFunction,
    feature: Extremum,
    resolution: usize,
) -> Result<(f64, Vec<f64>)> {
    if resolution < 2 {
        return Err(Error::Config("grid resolution must be at least 2".into()));
    }
    let d = f.dim();
    let step = 1.0 / (resolution - 1) as f64;
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        for (xi, &i) in x.iter_mut().zip(&idx) {
            *xi = i as f64 * step;
        }
        let v = f.eval_unchecked(&x);
        let better = match &best {
            None => true,
            Some((b, _)) => match feature {
                Extremum::Min => v < *b,
                Extremum::Max => v > *b,
            },
        };
        if better {
            best = Some((v, x.clone()));
        }
        if !advance(&mut idx, resolution) {
            break;
        }
    }
    Ok(best.expect("grid has at least one node"))
}

/// Grid oracle followed by a Latin-hypercube sweep, for dimensions where a
/// fine tensor grid is out of reach.
pub fn refined_feature_oracle<R: Rng + ?Sized>(
    f: &TestFunction,
    feature: Extremum,
    resolution: usize,
    extra_points: usize,
    rng: &mut R,
) -> Result<(f64, Vec<f64>)> {
    let (mut best, mut arg) = grid_feature_oracle(f, feature, resolution)?;
    if extra_points > 0 {
        let sample = lhs::random_lhs(extra_points, f.dim(), rng);
        for p in &sample {
            let v = f.eval_unchecked(p);
            let better = match feature {
                Extremum::Min => v < best,
                Extremum::Max => v > best,
            };
            if better {
                best = v;
                arg = p.clone();
            }
        }
    }
    Ok((best, arg))
}

/// Odometer increment over `[0, n)^d`, last axis fastest. False once wrapped.
fn advance(idx: &mut [usize], n: usize) -> bool {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < n {
            return true;
        }
        idx[i] = 0;
    }
    false
}

/// Points on the level set `{x : f(x) = a}`, each within [`CONTOUR_TOL`].
///
/// In 2D every grid edge whose endpoints straddle `a` is bisected. In higher
/// dimensions axis-parallel lines through `resolution²` Latin-hypercube
/// points are scanned at `resolution` nodes each, and every bracketing
/// segment is bisected.
pub fn discretize_contour(f: &TestFunction, a: f64, resolution: usize) -> Result<Vec<Vec<f64>>> {
    if resolution < 2 {
        return Err(Error::Config(
            "contour resolution must be at least 2".into(),
        ));
    }
    let d = f.dim();
    let g = |x: &[f64]| f.eval_unchecked(x) - a;
    let mut points = Vec::new();
    if d == 2 {
        let step = 1.0 / (resolution - 1) as f64;
        let node = |i: usize| i as f64 * step;
        let vals: Vec<Vec<f64>> = (0..resolution)
            .map(|i| (0..resolution).map(|j| g(&[node(i), node(j)])).collect())
            .collect();
        for i in 0..resolution {
            for j in 0..resolution {
                let here = [node(i), node(j)];
                if vals[i][j] == 0.0 {
                    points.push(here.to_vec());
                    continue;
                }
                if i + 1 < resolution && vals[i][j] * vals[i + 1][j] < 0.0 {
                    points.push(bisect(&g, &here, &[node(i + 1), node(j)]));
                }
                if j + 1 < resolution && vals[i][j] * vals[i][j + 1] < 0.0 {
                    points.push(bisect(&g, &here, &[node(i), node(j + 1)]));
                }
            }
        }
    } else {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0x5eed_c0de);
        let anchors = lhs::random_lhs(resolution * resolution, d, &mut rng);
        let step = 1.0 / (resolution - 1) as f64;
        for (n, anchor) in anchors.iter().enumerate() {
            let axis = n % d;
            let mut prev = anchor.clone();
            prev[axis] = 0.0;
            let mut gprev = g(&prev);
            for s in 1..resolution {
                let mut next = anchor.clone();
                next[axis] = s as f64 * step;
                let gnext = g(&next);
                if gprev == 0.0 {
                    points.push(prev.clone());
                } else if gprev * gnext < 0.0 {
                    points.push(bisect(&g, &prev, &next));
                }
                prev = next;
                gprev = gnext;
            }
        }
    }
    points.retain(|p| g(p).abs() <= CONTOUR_TOL);
    if points.is_empty() {
        return Err(Error::LevelNotAttained { level: a });
    }
    Ok(points)
}

/// Bisection on the segment `lo → hi` where `g` changes sign.
fn bisect(g: &impl Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let point = |t: f64| -> Vec<f64> { lo.iter().zip(hi).map(|(a, b)| a + t * (b - a)).collect() };
    let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
    let g0 = g(lo);
    let mut mid = point(0.5);
    for _ in 0..200 {
        let tm = 0.5 * (t0 + t1);
        mid = point(tm);
        let gm = g(&mid);
        if gm.abs() <= CONTOUR_TOL || t1 - t0 < 1e-17 {
            break;
        }
        if (gm < 0.0) == (g0 < 0.0) {
            t0 = tm;
        } else {
            t1 = tm;
        }
    }
    mid
}
