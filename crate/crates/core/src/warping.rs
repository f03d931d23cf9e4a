//! The warping group: boundary-preserving increasing maps of `[0, 1]`,
//! the norm-preserving action `g ↦ (g∘γ)·√γ̇`, square-root slopes and
//! Karcher means under the Fisher–Rao metric.

use crate::error::{Error, Result};
use crate::gridfn::{
    cumulative_trapezoid, finite_difference, interp_sorted, interp_uniform, trapezoid_product,
    Grid, GridFunction,
};

/// Slopes are clamped to this floor before square roots.
pub const SLOPE_FLOOR: f64 = 1e-8;

/// Karcher-mean gradient step on the sphere of square-root slopes.
pub const KARCHER_STEP: f64 = 0.3;
pub const KARCHER_TOL: f64 = 1e-6;
pub const KARCHER_MAX_ITER: usize = 50;

const REPAIR_GAP: f64 = 1e-12;

/// A warping sampled at the grid points: `values[j] = γ(t_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Warping {
    grid: Grid,
    values: Vec<f64>,
}

impl Warping {
    /// Validates boundary values, range and strict monotonicity.
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
        let m = values.len();
        if values[0] != 0.0 || values[m - 1] != 1.0 {
            return Err(Error::InvalidWarping(format!(
                "boundary values must be 0 and 1, got {} and {}",
                values[0],
                values[m - 1]
            )));
        }
        if let Some(j) = values.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidWarping(format!(
                "not strictly increasing at index {}",
                j + 1
            )));
        }
        Ok(Self { grid, values })
    }

    /// Builds a warping from approximate samples: pins the endpoints, clamps to
    /// `[0, 1]` and pushes apart consecutive values that collapsed numerically.
    pub fn repaired(grid: Grid, mut values: Vec<f64>) -> Result<Self> {
        let m = values.len();
        if m != grid.m() {
            return Err(Error::LengthMismatch {
                expected: grid.m(),
                got: m,
            });
        }
        values[0] = 0.0;
        values[m - 1] = 1.0;
        for j in 1..m - 1 {
            let v = values[j].clamp(0.0, 1.0);
            values[j] = if v <= values[j - 1] {
                values[j - 1] + REPAIR_GAP
            } else {
                v
            };
        }
        if values[m - 2] >= 1.0 {
            return Err(Error::InvalidWarping(
                "monotonicity lost and could not be repaired".into(),
            ));
        }
        Self::new(grid, values)
    }

    pub fn identity(grid: &Grid) -> Self {
        let mut values = grid.points().to_vec();
        let m = values.len();
        values[0] = 0.0;
        values[m - 1] = 1.0;
        Self {
            grid: grid.clone(),
            values,
        }
    }

    /// Samples an analytic warping; the result is repaired if needed.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self::repaired(grid.clone(), values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `γ(t)` by linear interpolation.
    pub fn eval(&self, t: f64) -> f64 {
        interp_uniform(&self.values, t)
    }

    /// `γ̇` at the grid points.
    pub fn slope(&self) -> Vec<f64> {
        finite_difference(&self.values, self.grid.spacing())
    }

    pub fn as_function(&self) -> GridFunction {
        GridFunction::from_parts_unchecked(self.grid.clone(), self.values.clone())
    }

    /// Largest pointwise gap to another warping on the same grid.
    pub fn sup_distance(&self, other: &Warping) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn identity_warping(grid: &Grid) -> Warping {
    Warping::identity(grid)
}

/// `(γ1 ∘ γ2)(t_j) = γ1(γ2(t_j))`.
pub fn compose(outer: &Warping, inner: &Warping) -> Result<Warping> {
    outer.grid.check_same(&inner.grid)?;
    let values = inner.values.iter().map(|&s| outer.eval(s)).collect();
    Warping::repaired(outer.grid.clone(), values)
}

/// Numerical inverse: swap the axes and re-interpolate onto the grid.
pub fn inverse(gamma: &Warping) -> Warping {
    let values = interp_sorted(&gamma.values, gamma.grid.points(), gamma.grid.points());
    Warping::repaired(gamma.grid.clone(), values)
        .expect("inverse of a strictly increasing warping is strictly increasing")
}

/// The norm-preserving right action `(g∘γ)·√γ̇`.
pub fn action(g: &GridFunction, gamma: &Warping) -> Result<GridFunction> {
    g.grid().check_same(&gamma.grid)?;
    let slope = gamma.slope();
    let gv = g.values();
    let values = gamma
        .values
        .iter()
        .zip(&slope)
        .map(|(&s, &d)| interp_uniform(gv, s) * d.max(0.0).sqrt())
        .collect();
    Ok(GridFunction::from_parts_unchecked(g.grid().clone(), values))
}

/// Square-root slope `ψ = √γ̇` of a warping, a point on the unit sphere of L2.
#[derive(Debug, Clone, PartialEq)]
pub struct SqrtSlope {
    grid: Grid,
    values: Vec<f64>,
}

impl SqrtSlope {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn as_function(&self) -> GridFunction {
        GridFunction::from_parts_unchecked(self.grid.clone(), self.values.clone())
    }
}

/// `ψ = √max(γ̇, 1e−8)`, rescaled to unit L2 norm to absorb quadrature error.
pub fn to_sqrt_slope(gamma: &Warping) -> SqrtSlope {
    let mut values: Vec<f64> = gamma
        .slope()
        .into_iter()
        .map(|d| d.max(SLOPE_FLOOR).sqrt())
        .collect();
    let norm = trapezoid_product(&values, &values, gamma.grid.spacing()).sqrt();
    values.iter_mut().for_each(|v| *v /= norm);
    SqrtSlope {
        grid: gamma.grid.clone(),
        values,
    }
}

/// `γ(t) = ∫₀ᵗ ψ² / ∫₀¹ ψ²`.
pub fn from_sqrt_slope(psi: &SqrtSlope) -> Warping {
    warping_from_psi(&psi.grid, &psi.values)
}

fn warping_from_psi(grid: &Grid, psi: &[f64]) -> Warping {
    let sq: Vec<f64> = psi.iter().map(|p| p * p).collect();
    let mut values = cumulative_trapezoid(&sq, grid.spacing());
    let total = *values.last().unwrap();
    values.iter_mut().for_each(|v| *v /= total);
    Warping::repaired(grid.clone(), values).expect("cumulative integral of ψ² is increasing")
}

/// Geodesic distance `arccos⟨ψ₁, ψ₂⟩` between two warpings.
pub fn fisher_rao_distance(a: &Warping, b: &Warping) -> Result<f64> {
    a.grid.check_same(&b.grid)?;
    let pa = to_sqrt_slope(a);
    let pb = to_sqrt_slope(b);
    Ok(trapezoid_product(&pa.values, &pb.values, a.grid.spacing())
        .clamp(-1.0, 1.0)
        .acos())
}

/// Outcome of the Karcher-mean iteration.
#[derive(Debug, Clone)]
pub struct KarcherMean {
    pub mean: Warping,
    pub iterations: usize,
    /// Norm of the final mean shooting vector.
    pub residual: f64,
    /// `false` when `max_iter` was reached first; `mean` then holds the last iterate.
    pub converged: bool,
}

/// Intrinsic mean on the sphere of square-root slopes, by fixed-step gradient
/// iterations from the normalized extrinsic mean.
pub fn karcher_mean(gammas: &[Warping], tol: f64, max_iter: usize) -> Result<KarcherMean> {
    let first = gammas.first().ok_or(Error::Empty)?;
    let grid = first.grid.clone();
    let h = grid.spacing();
    let m = grid.m();
    let mut psis = Vec::with_capacity(gammas.len());
    for g in gammas {
        grid.check_same(&g.grid)?;
        psis.push(to_sqrt_slope(g).values);
    }
    let n = psis.len() as f64;

    let mut mean = vec![0.0; m];
    for p in &psis {
        for (a, v) in mean.iter_mut().zip(p) {
            *a += v / n;
        }
    }
    normalize(&mut mean, h);

    let mut shoot = vec![0.0; m];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations <= max_iter {
        shoot.iter_mut().for_each(|v| *v = 0.0);
        for p in &psis {
            accumulate_log(&mean, p, h, 1.0 / n, &mut shoot);
        }
        residual = trapezoid_product(&shoot, &shoot, h).sqrt();
        if residual < tol {
            converged = true;
            break;
        }
        if iterations == max_iter {
            break;
        }
        exp_map(&mut mean, &shoot, KARCHER_STEP, h);
        iterations += 1;
    }
    Ok(KarcherMean {
        mean: warping_from_psi(&grid, &mean),
        iterations,
        residual,
        converged,
    })
}

fn normalize(v: &mut [f64], h: f64) {
    let norm = trapezoid_product(v, v, h).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

/// `out += weight · log_base(p)` on the unit sphere.
fn accumulate_log(base: &[f64], p: &[f64], h: f64, weight: f64, out: &mut [f64]) {
    let cos = trapezoid_product(base, p, h).clamp(-1.0, 1.0);
    let theta = cos.acos();
    if theta < 1e-14 {
        return;
    }
    let scale = weight * theta / theta.sin();
    for ((o, &b), &x) in out.iter_mut().zip(base).zip(p) {
        *o += scale * (x - cos * b);
    }
}

/// `base ← exp_base(step · v)` on the unit sphere.
fn exp_map(base: &mut [f64], v: &[f64], step: f64, h: f64) {
    let len = step * trapezoid_product(v, v, h).sqrt();
    if len < 1e-300 {
        return;
    }
    let (s, c) = len.sin_cos();
    for (b, &x) in base.iter_mut().zip(v) {
        *b = c * *b + s * step * x / len;
    }
    normalize(base, h);
}

/// Warpings after imposing that the Karcher mean of their inverses is the identity.
#[derive(Debug, Clone)]
pub struct Centered {
    pub warpings: Vec<Warping>,
    /// Karcher mean of the input inverses; each output is `mean ∘ γ_i`.
    pub mean_inverse: Warping,
    pub karcher: KarcherMean,
}

pub fn center_warpings(gammas: &[Warping]) -> Result<Centered> {
    center_warpings_with(gammas, KARCHER_TOL, KARCHER_MAX_ITER)
}

pub fn center_warpings_with(gammas: &[Warping], tol: f64, max_iter: usize) -> Result<Centered> {
    if gammas.is_empty() {
        return Err(Error::Empty);
    }
    let inverses: Vec<Warping> = gammas.iter().map(inverse).collect();
    let karcher = karcher_mean(&inverses, tol, max_iter)?;
    let warpings = gammas
        .iter()
        .map(|g| compose(&karcher.mean, g))
        .collect::<Result<Vec<_>>>()?;
    Ok(Centered {
        warpings,
        mean_inverse: karcher.mean.clone(),
        karcher,
    })
}
