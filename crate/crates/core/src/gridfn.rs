//! Sampled functions on a shared uniform grid over `[0, 1]`.
//!
//! Every L2 quantity in the crate (inner products, norms, costs) goes through
//! the trapezoidal rule on this grid, and every off-grid evaluation is
//! piecewise-linear interpolation.

use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Uniform partition of `[0, 1]` with `m` points.
#[derive(Debug, Clone)]
pub struct Grid {
    points: Arc<[f64]>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.points, &other.points) || self.points.len() == other.points.len()
    }
}

impl Grid {
    pub fn uniform(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidGrid(format!(
                "a grid needs at least 2 points, got {m}"
            )));
        }
        let last = (m - 1) as f64;
        let points: Vec<f64> = (0..m).map(|j| j as f64 / last).collect();
        Ok(Self {
            points: points.into(),
        })
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.m() - 1) as f64
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.m(),
                right: other.m(),
            })
        }
    }
}

/// A real-valued function sampled at the points of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.m() {
            return Err(Error::LengthMismatch {
                expected: grid.m(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![c; grid.m()],
        }
    }

    pub(crate) fn from_parts_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.m(), values.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Applies `f` pointwise.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &GridFunction) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            values,
        })
    }

    pub fn inner_product(&self, other: &GridFunction) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(trapezoid_product(&self.values, &other.values, self.grid.spacing()))
    }

    pub fn norm(&self) -> f64 {
        trapezoid_product(&self.values, &self.values, self.grid.spacing())
            .max(0.0)
            .sqrt()
    }

    /// `∫₀¹ f(t) dt` by the trapezoidal rule.
    pub fn integral(&self) -> f64 {
        let v = &self.values;
        let m = v.len();
        let inner: f64 = v[1..m - 1].iter().sum();
        self.grid.spacing() * (inner + 0.5 * (v[0] + v[m - 1]))
    }

    /// Piecewise-linear evaluation at `t ∈ [0, 1]`.
    pub fn eval_at(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain { value: t });
        }
        Ok(interp_uniform(&self.values, t))
    }

    /// Second-order finite-difference derivative.
    pub fn derivative(&self) -> Result<Self> {
        let m = self.grid.m();
        if m < 3 {
            return Err(Error::TooFewSamples { needed: 3, got: m });
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: finite_difference(&self.values, self.grid.spacing()),
        })
    }
}

impl Add for &GridFunction {
    type Output = GridFunction;

    fn add(self, rhs: &GridFunction) -> GridFunction {
        assert_eq!(self.grid, rhs.grid, "grid mismatch in addition");
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &GridFunction {
    type Output = GridFunction;

    fn sub(self, rhs: &GridFunction) -> GridFunction {
        assert_eq!(self.grid, rhs.grid, "grid mismatch in subtraction");
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul<f64> for &GridFunction {
    type Output = GridFunction;

    fn mul(self, rhs: f64) -> GridFunction {
        self.map(|v| v * rhs)
    }
}

pub fn inner_product(a: &GridFunction, b: &GridFunction) -> Result<f64> {
    a.inner_product(b)
}

pub fn norm(a: &GridFunction) -> f64 {
    a.norm()
}

/// Pointwise arithmetic mean of a nonempty list sharing one grid.
pub fn mean_function(fs: &[GridFunction]) -> Result<GridFunction> {
    let first = fs.first().ok_or(Error::Empty)?;
    // running mean: identical inputs reproduce themselves bit for bit
    let mut acc = first.values.clone();
    for (k, f) in fs.iter().enumerate().skip(1) {
        first.grid.check_same(&f.grid)?;
        let w = 1.0 / (k + 1) as f64;
        for (a, v) in acc.iter_mut().zip(&f.values) {
            *a += (v - *a) * w;
        }
    }
    Ok(GridFunction {
        grid: first.grid.clone(),
        values: acc,
    })
}

/// Rescales `times` affinely onto `[0, 1]` and interpolates `values` onto `target`.
pub fn resample_to_grid(values: &[f64], times: &[f64], target: &Grid) -> Result<GridFunction> {
    if values.len() != times.len() {
        return Err(Error::LengthMismatch {
            expected: times.len(),
            got: values.len(),
        });
    }
    if times.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: times.len(),
        });
    }
    if let Some(index) = times
        .iter()
        .chain(values)
        .position(|v| !v.is_finite())
    {
        return Err(Error::NonFinite {
            index: index % times.len(),
        });
    }
    if let Some(w) = times.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::NonMonotoneTimes { index: w + 1 });
    }
    let t0 = times[0];
    let span = times[times.len() - 1] - t0;
    let scaled: Vec<f64> = times.iter().map(|t| (t - t0) / span).collect();
    let out = interp_sorted(&scaled, values, target.points());
    GridFunction::new(target.clone(), out)
}

/// Linear interpolation of uniformly spaced samples on `[0, 1]`; `t` is clamped.
#[inline]
pub(crate) fn interp_uniform(values: &[f64], t: f64) -> f64 {
    let last = values.len() - 1;
    let x = t.clamp(0.0, 1.0) * last as f64;
    let j = (x.floor() as usize).min(last - 1);
    let w = x - j as f64;
    if w == 0.0 {
        values[j]
    } else {
        values[j] * (1.0 - w) + values[j + 1] * w
    }
}

/// Linear interpolation of `(xs, ys)` (strictly increasing `xs`) at sorted `queries`.
/// Queries outside `[xs[0], xs[last]]` are clamped to the boundary values.
pub(crate) fn interp_sorted(xs: &[f64], ys: &[f64], queries: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut seg = 0usize;
    queries
        .iter()
        .map(|&q| {
            if q <= xs[0] {
                return ys[0];
            }
            if q >= xs[n - 1] {
                return ys[n - 1];
            }
            while seg + 1 < n - 1 && xs[seg + 1] <= q {
                seg += 1;
            }
            while seg > 0 && xs[seg] > q {
                seg -= 1;
            }
            let (x0, x1) = (xs[seg], xs[seg + 1]);
            let w = (q - x0) / (x1 - x0);
            ys[seg] * (1.0 - w) + ys[seg + 1] * w
        })
        .collect()
}

pub(crate) fn trapezoid_product(a: &[f64], b: &[f64], spacing: f64) -> f64 {
    let m = a.len();
    let inner: f64 = a[1..m - 1]
        .iter()
        .zip(&b[1..m - 1])
        .map(|(x, y)| x * y)
        .sum();
    spacing * (inner + 0.5 * (a[0] * b[0] + a[m - 1] * b[m - 1]))
}

/// Central differences inside, one-sided second-order stencils at both ends.
pub(crate) fn finite_difference(v: &[f64], spacing: f64) -> Vec<f64> {
    let m = v.len();
    let inv2h = 0.5 / spacing;
    let mut d = vec![0.0; m];
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) * inv2h;
    d[m - 1] = (3.0 * v[m - 1] - 4.0 * v[m - 2] + v[m - 3]) * inv2h;
    for j in 1..m - 1 {
        d[j] = (v[j + 1] - v[j - 1]) * inv2h;
    }
    d
}

/// Cumulative trapezoidal integral starting at zero.
pub(crate) fn cumulative_trapezoid(v: &[f64], spacing: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in v.windows(2) {
        acc += 0.5 * spacing * (w[0] + w[1]);
        out.push(acc);
    }
    out
}
