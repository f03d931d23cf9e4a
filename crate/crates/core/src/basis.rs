//! Trend subspaces: the Fourier, sine, cosine and shifted Legendre families,
//! orthonormalized on the working grid.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridfn::{trapezoid_product, Grid, GridFunction};

/// Default ceiling on the truncation level.
pub const DEFAULT_MAX_LEVEL: usize = 20;

const PIVOT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisFamily {
    /// `{1, √2 sin 2πt, √2 cos 2πt, √2 sin 4πt, ...}`
    Fourier,
    /// `{√2 sin kπt}`
    Sine,
    /// `{1, √2 cos πt, √2 cos 2πt, ...}`
    Cosine,
    /// Shifted Legendre polynomials on `[0, 1]`.
    #[serde(rename = "legendre")]
    ShiftedLegendre,
}

impl BasisFamily {
    pub const ALL: [BasisFamily; 4] = [
        BasisFamily::Fourier,
        BasisFamily::Sine,
        BasisFamily::Cosine,
        BasisFamily::ShiftedLegendre,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BasisFamily::Fourier => "fourier",
            BasisFamily::Sine => "sine",
            BasisFamily::Cosine => "cosine",
            BasisFamily::ShiftedLegendre => "legendre",
        }
    }
}

impl fmt::Display for BasisFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BasisFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fourier" => Ok(BasisFamily::Fourier),
            "sine" | "sin" => Ok(BasisFamily::Sine),
            "cosine" | "cos" => Ok(BasisFamily::Cosine),
            "legendre" | "shifted-legendre" | "shiftedlegendre" => {
                Ok(BasisFamily::ShiftedLegendre)
            }
            other => Err(Error::InvalidBasis(format!(
                "unknown family '{other}' (expected fourier, sine, cosine or legendre)"
            ))),
        }
    }
}

/// A family truncated to its first `l` elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub family: BasisFamily,
    pub l: usize,
}

impl BasisSpec {
    pub fn new(family: BasisFamily, l: usize) -> Result<Self> {
        Self::with_ceiling(family, l, DEFAULT_MAX_LEVEL)
    }

    pub fn with_ceiling(family: BasisFamily, l: usize, max_level: usize) -> Result<Self> {
        if l == 0 || l > max_level {
            return Err(Error::InvalidBasis(format!(
                "truncation level {l} outside 1..={max_level}"
            )));
        }
        Ok(Self { family, l })
    }
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(l={})", self.family, self.l)
    }
}

/// The `k`-th element (1-based) of a family, in listed order, without any normalization.
pub fn raw_basis_element(family: BasisFamily, k: usize, grid: &Grid) -> Result<GridFunction> {
    if k == 0 {
        return Err(Error::InvalidBasis("basis index starts at 1".into()));
    }
    let f = match family {
        BasisFamily::Fourier => {
            if k == 1 {
                GridFunction::constant(grid, 1.0)
            } else {
                let freq = 2.0 * PI * (k / 2) as f64;
                if k % 2 == 0 {
                    GridFunction::from_fn(grid, |t| SQRT_2 * (freq * t).sin())
                } else {
                    GridFunction::from_fn(grid, |t| SQRT_2 * (freq * t).cos())
                }
            }
        }
        BasisFamily::Sine => {
            let freq = PI * k as f64;
            GridFunction::from_fn(grid, |t| SQRT_2 * (freq * t).sin())
        }
        BasisFamily::Cosine => {
            if k == 1 {
                GridFunction::constant(grid, 1.0)
            } else {
                let freq = PI * (k - 1) as f64;
                GridFunction::from_fn(grid, |t| SQRT_2 * (freq * t).cos())
            }
        }
        BasisFamily::ShiftedLegendre => {
            let coefs = legendre_coefficients(k);
            GridFunction::from_fn(grid, |t| {
                // coefficients of (-t)^j, highest power last
                coefs.iter().rev().fold(0.0, |acc, c| acc * (-t) + c)
            })
        }
    };
    Ok(f)
}

/// Coefficients `a_j` such that `φ_k(t) = Σ_j a_j (−t)^j`, including the
/// `(−1)^{k−1} / (2k−1)` prefactor.
fn legendre_coefficients(k: usize) -> Vec<f64> {
    let n = k - 1;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let scale = sign / (2 * k - 1) as f64;
    (0..=n)
        .map(|j| scale * binomial(n, j) * binomial(n + j, j))
        .collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// An orthonormal (under the grid inner product) basis of the trend subspace.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    spec: BasisSpec,
    grid: Grid,
    functions: Vec<GridFunction>,
}

impl OrthonormalBasis {
    pub fn spec(&self) -> BasisSpec {
        self.spec
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn functions(&self) -> &[GridFunction] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Coefficients `⟨f, φ_k⟩`.
    pub fn coefficients(&self, f: &GridFunction) -> Result<Vec<f64>> {
        self.grid.check_same(f.grid())?;
        let h = self.grid.spacing();
        Ok(self
            .functions
            .iter()
            .map(|phi| trapezoid_product(f.values(), phi.values(), h))
            .collect())
    }

    pub fn project(&self, f: &GridFunction) -> Result<GridFunction> {
        let coefs = self.coefficients(f)?;
        let mut out = vec![0.0; self.grid.m()];
        for (c, phi) in coefs.iter().zip(&self.functions) {
            for (o, p) in out.iter_mut().zip(phi.values()) {
                *o += c * p;
            }
        }
        Ok(GridFunction::from_parts_unchecked(self.grid.clone(), out))
    }

    pub fn project_complement(&self, f: &GridFunction) -> Result<GridFunction> {
        let p = self.project(f)?;
        Ok(f - &p)
    }
}

/// Modified Gram–Schmidt (with one reorthogonalization pass) of the first `l`
/// raw elements under the trapezoidal inner product.
pub fn build_orthonormal(spec: BasisSpec, grid: &Grid) -> Result<OrthonormalBasis> {
    let h = grid.spacing();
    let mut functions: Vec<GridFunction> = Vec::with_capacity(spec.l);
    for k in 1..=spec.l {
        let mut v = raw_basis_element(spec.family, k, grid)?.into_values();
        let raw_norm = trapezoid_product(&v, &v, h).sqrt();
        for _ in 0..2 {
            for q in &functions {
                let c = trapezoid_product(&v, q.values(), h);
                for (x, y) in v.iter_mut().zip(q.values()) {
                    *x -= c * y;
                }
            }
        }
        let pivot = trapezoid_product(&v, &v, h).sqrt();
        if pivot < PIVOT_TOLERANCE || pivot < PIVOT_TOLERANCE * raw_norm {
            return Err(Error::RankDeficient { index: k, pivot });
        }
        v.iter_mut().for_each(|x| *x /= pivot);
        functions.push(GridFunction::from_parts_unchecked(grid.clone(), v));
    }
    Ok(OrthonormalBasis {
        spec,
        grid: grid.clone(),
        functions,
    })
}

pub fn project(f: &GridFunction, basis: &OrthonormalBasis) -> Result<GridFunction> {
    basis.project(f)
}

pub fn project_complement(f: &GridFunction, basis: &OrthonormalBasis) -> Result<GridFunction> {
    basis.project_complement(f)
}
