//! Seeded synthetic panels with known trend, seasonality and warpings, and the
//! percent-change transform used to turn exchange-rate series into fluctuations.
//!
//! Noise is drawn from `ChaCha8Rng::seed_from_u64(seed)`, one observation after
//! another, grid point by grid point.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisFamily, BasisSpec, OrthonormalBasis};
use crate::error::{Error, Result};
use crate::gridfn::{cumulative_trapezoid, interp_uniform, Grid, GridFunction};
use crate::warping::{action, center_warpings_with, fisher_rao_distance, Warping, KARCHER_MAX_ITER};

const CENTERING_ROUNDS: usize = 20;
const CENTERING_TOL: f64 = 1e-3;

/// Sub-samples per grid cell when integrating warping densities.
const DENSITY_REFINE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// `g = cos(10πt)`, `h = 1.5e^{−3t}`, exponential warpings.
    Fig1,
    /// Damped sine seasonality over an exponential trend; used for choosing `l`.
    SubspaceSelection,
    /// Two Gaussian bumps over a half sine trend; used at several noise levels.
    NoisePerturbation,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [
        Scenario::Fig1,
        Scenario::SubspaceSelection,
        Scenario::NoisePerturbation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Fig1 => "fig1",
            Scenario::SubspaceSelection => "subspace_selection",
            Scenario::NoisePerturbation => "noise_perturbation",
        }
    }

    pub fn default_sigma(self) -> f64 {
        match self {
            Scenario::Fig1 => 0.0,
            Scenario::SubspaceSelection => 0.1,
            Scenario::NoisePerturbation => 0.2,
        }
    }

    /// Trend subspace the scenario is analysed with.
    pub fn trend_basis(self) -> BasisSpec {
        let (family, l) = match self {
            Scenario::Fig1 => (BasisFamily::ShiftedLegendre, 4),
            Scenario::SubspaceSelection => (BasisFamily::ShiftedLegendre, 4),
            Scenario::NoisePerturbation => (BasisFamily::ShiftedLegendre, 3),
        };
        BasisSpec::new(family, l).expect("levels are in range")
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub n: usize,
    pub m: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    /// `n = 30`, `m = 200`, the scenario's own noise level, seed 0.
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            n: 30,
            m: 200,
            sigma: scenario.default_sigma(),
            seed: 0,
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::TooFewObservations {
                needed: 2,
                got: self.n,
            });
        }
        if self.m < 3 {
            return Err(Error::TooFewSamples {
                needed: 3,
                got: self.m,
            });
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!("sigma must be a nonnegative number, got {}", self.sigma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Truth {
    pub h: GridFunction,
    pub g: GridFunction,
    /// Centered so that the Karcher mean of the inverses is the identity.
    pub warpings: Vec<Warping>,
    /// The analytic family before centering.
    pub raw_warpings: Vec<Warping>,
}

#[derive(Debug, Clone)]
pub struct SyntheticPanel {
    pub spec: ScenarioSpec,
    pub observations: Vec<GridFunction>,
    /// `h + (g, γ_i)` without noise.
    pub noiseless: Vec<GridFunction>,
    pub truth: Truth,
}

impl SyntheticPanel {
    pub fn grid(&self) -> &Grid {
        self.truth.h.grid()
    }
}

/// `γ(t) = ∫₀ᵗ w / ∫₀¹ w` for a positive density `w`, integrated on a refined grid.
fn integral_warping(grid: &Grid, density: impl Fn(f64) -> f64) -> Result<Warping> {
    let cells = grid.m() - 1;
    let fine_m = cells * DENSITY_REFINE + 1;
    let fine_h = 1.0 / (fine_m - 1) as f64;
    let w: Vec<f64> = (0..fine_m).map(|j| density(j as f64 * fine_h)).collect();
    let cum = cumulative_trapezoid(&w, fine_h);
    let total = cum[fine_m - 1];
    if !(total > 0.0) {
        return Err(Error::InvalidWarping("warping density integrates to zero".into()));
    }
    let values = (0..grid.m())
        .map(|j| cum[j * DENSITY_REFINE] / total)
        .collect();
    Warping::repaired(grid.clone(), values)
}

fn exp_warping(grid: &Grid, a: f64) -> Result<Warping> {
    if a == 0.0 {
        return Ok(Warping::identity(grid));
    }
    Warping::from_fn(grid, |t| ((a * t).exp() - 1.0) / (a.exp() - 1.0))
}

fn raw_truth(spec: &ScenarioSpec, grid: &Grid) -> Result<(GridFunction, GridFunction, Vec<Warping>)> {
    let n = spec.n;
    let nf = n as f64;
    match spec.scenario {
        Scenario::Fig1 => {
            let h = GridFunction::from_fn(grid, |t| 1.5 * (-3.0 * t).exp());
            let g = GridFunction::from_fn(grid, |t| (10.0 * PI * t).cos());
            let warps = (1..=n)
                .map(|i| exp_warping(grid, -3.0 + 6.0 * i as f64 / nf))
                .collect::<Result<Vec<_>>>()?;
            Ok((h, g, warps))
        }
        Scenario::SubspaceSelection => {
            let h = GridFunction::from_fn(grid, |t| 0.05 * (3.0 * t).exp() - 0.5);
            let g = GridFunction::from_fn(grid, |t| {
                5.0 * (0.25 - (t - 0.5).powi(2)) * (5.0 * PI * t).sin()
            });
            let warps = (1..=n)
                .map(|i| {
                    let c = i as f64 / nf;
                    integral_warping(grid, move |t| (3.0 * (PI * t - 0.5 + c).cos()).powi(2) + 0.1)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((h, g, warps))
        }
        Scenario::NoisePerturbation => {
            let h = GridFunction::from_fn(grid, |t| (PI * t + PI / 2.0).cos());
            let g = GridFunction::from_fn(grid, |t| {
                2.0 * (-0.8 * (10.0 * t - 7.5).powi(2)).exp() + 2.0 * (-0.8 * (10.0 * t - 2.5).powi(2)).exp()
            });
            // the density changes sign for most a_i, so it is squared
            let warps = (1..=n)
                .map(|i| {
                    let a = -2.0 + 4.0 * i as f64 / nf;
                    integral_warping(grid, move |t| {
                        (3.0 * (2.0 * PI * a * t).sin() + 2.0 * (a * t).cos()).powi(2)
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((h, g, warps))
        }
    }
}

/// Repeats the centering until the Karcher mean of the inverses sits within
/// `CENTERING_TOL` of the identity; one pass leaves a visible residual when
/// some warping is nearly flat, because inverting it on the grid is lossy.
fn center_truth(raw: &[Warping]) -> Result<Vec<Warping>> {
    let mut warpings = raw.to_vec();
    for _ in 0..CENTERING_ROUNDS {
        let centered = center_warpings_with(&warpings, 1e-10, 4 * KARCHER_MAX_ITER)?;
        let offset = fisher_rao_distance(&centered.mean_inverse, &Warping::identity(raw[0].grid()))?;
        warpings = centered.warpings;
        if offset < CENTERING_TOL {
            break;
        }
    }
    Ok(warpings)
}

/// Builds the scenario's truth, centers its warpings and adds seeded Gaussian noise.
pub fn generate(spec: &ScenarioSpec) -> Result<SyntheticPanel> {
    spec.validate()?;
    let grid = Grid::uniform(spec.m)?;
    let (h, g, raw_warpings) = raw_truth(spec, &grid)?;
    let warpings = center_truth(&raw_warpings)?;

    let noiseless = warpings
        .iter()
        .map(|gamma| Ok(&h + &action(&g, gamma)?))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, spec.sigma).map_err(|e| Error::Config(e.to_string()))?;
    let observations = noiseless
        .iter()
        .map(|f| {
            if spec.sigma == 0.0 {
                return f.clone();
            }
            let values = f.values().iter().map(|v| v + normal.sample(&mut rng)).collect();
            GridFunction::new(grid.clone(), values).expect("finite samples")
        })
        .collect();

    Ok(SyntheticPanel {
        spec: *spec,
        observations,
        noiseless,
        truth: Truth {
            h,
            g,
            warpings,
            raw_warpings,
        },
    })
}

/// `⟨g, φ_k⟩` for each basis element; the scenarios' `g` are not exactly in `H^⊥`.
pub fn orthogonality_diagnostics(g: &GridFunction, basis: &OrthonormalBasis) -> Result<Vec<f64>> {
    basis.coefficients(g)
}

/// Percent change between consecutive rates: `τ_k = (R_{k+1} − R_k) / R_k × 100`.
pub fn fluctuation(rates: &[f64]) -> Result<Vec<f64>> {
    if rates.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: rates.len(),
        });
    }
    if let Some((index, &value)) = rates
        .iter()
        .enumerate()
        .find(|(_, r)| !(**r > 0.0) || !r.is_finite())
    {
        return Err(Error::NonPositiveRate { index, value });
    }
    Ok(rates.windows(2).map(|w| (w[1] - w[0]) / w[0] * 100.0).collect())
}

/// Linear interpolation of a warping at arbitrary `t`, used when comparing on a
/// coarser or finer grid.
pub fn warping_at(gamma: &Warping, t: f64) -> f64 {
    interp_uniform(gamma.values(), t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_orthonormal;
    use crate::estimator::cost;
    use crate::warping::{identity_warping, inverse, karcher_mean};

    #[test]
    fn scenario_names_round_trip() {
        for sc in Scenario::ALL {
            assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
        }
        assert!(matches!("growth".parse::<Scenario>(), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn fig1_truth_has_zero_cost() {
        let p = generate(&ScenarioSpec::new(Scenario::Fig1)).unwrap();
        let c = cost(&p.observations, &p.truth.h, &p.truth.g, &p.truth.warpings).unwrap();
        assert!(c.abs() < 1e-8);
    }

    #[test]
    fn noiseless_perturbation_equals_model() {
        let spec = ScenarioSpec::new(Scenario::NoisePerturbation).with_sigma(0.0);
        let p = generate(&spec).unwrap();
        for (f, gamma) in p.observations.iter().zip(&p.truth.warpings) {
            let model = &p.truth.h + &action(&p.truth.g, gamma).unwrap();
            assert_eq!(f.values(), model.values());
        }
    }

    #[test]
    fn truth_is_centered() {
        for sc in Scenario::ALL {
            let p = generate(&ScenarioSpec::new(sc)).unwrap();
            let inv: Vec<Warping> = p.truth.warpings.iter().map(inverse).collect();
            let km = karcher_mean(&inv, 1e-8, 200).unwrap();
            let d = fisher_rao_distance(&km.mean, &identity_warping(p.grid())).unwrap();
            assert!(d < 1e-2, "{sc}: {d}");
        }
    }

    #[test]
    fn noise_variance_matches_sigma() {
        let p = generate(&ScenarioSpec::new(Scenario::SubspaceSelection).with_seed(11)).unwrap();
        let resid: Vec<f64> = p
            .observations
            .iter()
            .zip(&p.noiseless)
            .flat_map(|(f, c)| f.values().iter().zip(c.values()).map(|(a, b)| a - b).collect::<Vec<_>>())
            .collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (resid.len() - 1) as f64;
        assert!((var - 0.01).abs() < 0.002, "{var}");
    }

    #[test]
    fn doubling_sigma_doubles_spread() {
        let sd = |sigma: f64| {
            let p = generate(&ScenarioSpec::new(Scenario::NoisePerturbation).with_sigma(sigma).with_seed(5)).unwrap();
            let r: Vec<f64> = p
                .observations
                .iter()
                .zip(&p.noiseless)
                .flat_map(|(f, c)| f.values().iter().zip(c.values()).map(|(a, b)| a - b).collect::<Vec<_>>())
                .collect();
            (r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64).sqrt()
        };
        let ratio = sd(0.4) / sd(0.2);
        assert!((ratio - 2.0).abs() < 0.2);
    }

    #[test]
    fn same_seed_same_panel() {
        let spec = ScenarioSpec::new(Scenario::NoisePerturbation).with_seed(42);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        for (x, y) in a.observations.iter().zip(&b.observations) {
            assert_eq!(x.values(), y.values());
        }
        let c = generate(&spec.with_seed(43)).unwrap();
        assert_ne!(a.observations[0].values(), c.observations[0].values());
    }

    #[test]
    fn middle_fig1_warping_is_identity_before_centering() {
        let p = generate(&ScenarioSpec::new(Scenario::Fig1)).unwrap();
        // a_15 = 0 for n = 30
        let id = identity_warping(p.grid());
        assert_eq!(p.truth.raw_warpings[14].values(), id.values());
    }

    #[test]
    fn subspace_warping_matches_closed_form() {
        let spec = ScenarioSpec::new(Scenario::SubspaceSelection).with_n(4);
        let p = generate(&spec).unwrap();
        let c = 2.0 / 4.0;
        // antiderivative of 9cos²(πt − 0.5 + c) + 0.1
        let big = |t: f64| 4.5 * t + 9.0 * (2.0 * (PI * t - 0.5 + c)).sin() / (4.0 * PI) + 0.1 * t;
        let total = big(1.0) - big(0.0);
        for (&t, &v) in p.grid().points().iter().zip(p.truth.raw_warpings[1].values()) {
            assert!(((big(t) - big(0.0)) / total - v).abs() < 1e-6);
        }
    }

    #[test]
    fn diagnostics_report_trend_leakage() {
        let p = generate(&ScenarioSpec::new(Scenario::NoisePerturbation)).unwrap();
        let basis = build_orthonormal(Scenario::NoisePerturbation.trend_basis(), p.grid()).unwrap();
        let d = orthogonality_diagnostics(&p.truth.g, &basis).unwrap();
        assert_eq!(d.len(), basis.len());
        // two positive bumps have a clear constant component
        assert!(d[0] > 0.5);
    }

    #[test]
    fn rejects_bad_specs() {
        let base = ScenarioSpec::new(Scenario::Fig1);
        assert!(generate(&base.with_n(1)).is_err());
        assert!(generate(&base.with_m(2)).is_err());
        assert!(generate(&base.with_sigma(-0.1)).is_err());
    }

    #[test]
    fn fluctuation_examples() {
        assert_eq!(fluctuation(&[3.0, 3.0, 3.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(fluctuation(&[100.0, 101.0]).unwrap(), vec![1.0]);
        assert_eq!(fluctuation(&[2.0, 1.0, 2.0]).unwrap(), vec![-50.0, 100.0]);
        assert!(matches!(
            fluctuation(&[1.0, 0.0]),
            Err(Error::NonPositiveRate { index: 1, .. })
        ));
        assert!(fluctuation(&[1.0]).is_err());
    }
}
