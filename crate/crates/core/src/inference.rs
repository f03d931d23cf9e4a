//! Case-resampling bootstrap of the decomposition, pointwise confidence bands
//! and one-sided tests on the shape of the trend.
//!
//! Replicate `b` draws its resample from `ChaCha8Rng::seed_from_u64(seed)` on
//! stream `b`, so results do not depend on how replicates are scheduled.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimator::{decompose, DecompositionResult, EstimatorConfig};
use crate::gridfn::GridFunction;

/// Attempts per replicate before it is counted as failed.
const ATTEMPTS: usize = 4;
/// Largest tolerated share of failed replicates.
const MAX_FAILED_SHARE: f64 = 0.05;
/// Below this many replicates the standard errors get a warning.
const FEW_REPLICATES: usize = 30;

pub const TEST_NULL: &str = "null";
pub const TEST_CONSTANT: &str = "constant";
pub const TEST_LINEAR: &str = "linear";

/// `‖h‖`: evidence against `h = 0`.
pub fn stat_trend_null(h: &GridFunction) -> f64 {
    h.norm()
}

/// `‖h − ∫h‖`: evidence against a constant trend.
pub fn stat_trend_constant(h: &GridFunction) -> f64 {
    let mean = h.integral();
    h.map(|v| v - mean).norm()
}

/// `‖ḣ − ∫ḣ‖`: evidence against a linear trend.
pub fn stat_trend_linear(h: &GridFunction) -> Result<f64> {
    Ok(stat_trend_constant(&h.derivative()?))
}

fn all_stats(h: &GridFunction) -> Result<[f64; 3]> {
    Ok([stat_trend_null(h), stat_trend_constant(h), stat_trend_linear(h)?])
}

/// One-sided `1 − Φ(ρ / se)`. With `se = 0` the statistic is treated as exact:
/// 0 when `ρ > 0`, 1 otherwise.
pub fn p_value(rho: f64, se: f64) -> f64 {
    if se > 0.0 {
        // 1 − Φ(x) = erfc(x/√2)/2 keeps precision in the upper tail
        (0.5 * libm::erfc(rho / (se * std::f64::consts::SQRT_2))).clamp(0.0, 1.0)
    } else if rho > 0.0 {
        0.0
    } else {
        1.0
    }
}

/// `Φ⁻¹(1 − α/2)`.
pub fn two_sided_z(alpha: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - alpha / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 500,
            alpha: 0.05,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::Config(format!(
                "need at least 2 bootstrap replicates, got {}",
                self.replicates
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    /// Statistic on the original-data estimate.
    pub statistic: f64,
    /// Sample standard deviation of the statistic over replicates.
    pub se_b: f64,
    pub p_value: f64,
}

/// Estimates from one resampled panel.
#[derive(Debug, Clone)]
pub struct Replicate {
    /// Indices of the original observations drawn.
    pub indices: Vec<usize>,
    pub h: GridFunction,
    pub g: GridFunction,
    /// `[null, constant, linear]` statistics.
    pub stats: [f64; 3],
    /// Failed attempts before this one succeeded.
    pub retries: usize,
}

#[derive(Debug, Clone)]
pub struct Band {
    pub low: GridFunction,
    pub high: GridFunction,
}

#[derive(Debug, Clone)]
pub struct BootstrapSummary {
    pub config: BootstrapConfig,
    pub estimate: DecompositionResult,
    pub h_mean: GridFunction,
    pub g_mean: GridFunction,
    pub se_h: GridFunction,
    pub se_g: GridFunction,
    pub band_h: Band,
    pub band_g: Band,
    pub stats: BTreeMap<String, TestResult>,
    pub replicates: Vec<Replicate>,
    pub failed: usize,
    pub warnings: Vec<String>,
}

impl BootstrapSummary {
    /// Pointwise bands `mean ± z^{1−α/2}·se` for trend and seasonality.
    pub fn bands(&self, alpha: f64) -> Result<(Band, Band)> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let z = two_sided_z(alpha);
        Ok((band(&self.h_mean, &self.se_h, z), band(&self.g_mean, &self.se_g, z)))
    }
}

fn band(mean: &GridFunction, se: &GridFunction, z: f64) -> Band {
    let low = mean.axpy(-z, se).expect("same grid");
    let high = mean.axpy(z, se).expect("same grid");
    Band { low, high }
}

/// Pointwise mean and sample standard deviation.
fn mean_and_se(fs: &[&GridFunction]) -> (GridFunction, GridFunction) {
    let grid = fs[0].grid();
    let n = fs.len() as f64;
    let m = grid.m();
    // running mean, so identical replicates give a zero spread exactly
    let mut mean = fs[0].values().to_vec();
    for (k, f) in fs.iter().enumerate().skip(1) {
        let w = 1.0 / (k + 1) as f64;
        for (a, v) in mean.iter_mut().zip(f.values()) {
            *a += (v - *a) * w;
        }
    }
    let mut var = vec![0.0; m];
    for f in fs {
        for ((s, v), mu) in var.iter_mut().zip(f.values()).zip(&mean) {
            *s += (v - mu) * (v - mu);
        }
    }
    let se = var.into_iter().map(|s| (s / (n - 1.0)).sqrt()).collect();
    (
        GridFunction::new(grid.clone(), mean).expect("finite"),
        GridFunction::new(grid.clone(), se).expect("finite"),
    )
}

fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn run_replicate(fs: &[GridFunction], cfg: &EstimatorConfig, seed: u64, b: usize) -> Option<Replicate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    let n = fs.len();
    for attempt in 0..ATTEMPTS {
        let indices: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let panel: Vec<GridFunction> = indices.iter().map(|&i| fs[i].clone()).collect();
        let Ok(fit) = decompose(&panel, cfg) else { continue };
        let Ok(stats) = all_stats(&fit.h_hat) else { continue };
        return Some(Replicate {
            indices,
            h: fit.h_hat,
            g: fit.g_hat,
            stats,
            retries: attempt,
        });
    }
    None
}

/// Fits the original panel, then `B` case-resampled panels with the same
/// configuration, and summarizes the replicates.
pub fn bootstrap(fs: &[GridFunction], cfg: &EstimatorConfig, bcfg: &BootstrapConfig) -> Result<BootstrapSummary> {
    bcfg.validate()?;
    let estimate = decompose(fs, cfg)?;
    let observed = all_stats(&estimate.h_hat)?;

    let outcomes: Vec<Option<Replicate>> = (0..bcfg.replicates)
        .into_par_iter()
        .map(|b| run_replicate(fs, cfg, bcfg.seed, b))
        .collect();
    let failed = outcomes.iter().filter(|o| o.is_none()).count();
    if failed as f64 > MAX_FAILED_SHARE * bcfg.replicates as f64 || bcfg.replicates - failed < 2 {
        return Err(Error::Bootstrap {
            failed,
            total: bcfg.replicates,
        });
    }
    let replicates: Vec<Replicate> = outcomes.into_iter().flatten().collect();

    let mut warnings = Vec::new();
    if bcfg.replicates < FEW_REPLICATES {
        warnings.push(format!(
            "only {} replicates: standard errors and p-values are unreliable",
            bcfg.replicates
        ));
    }
    if failed > 0 {
        warnings.push(format!("{failed} of {} replicates failed after {ATTEMPTS} attempts", bcfg.replicates));
    }
    let retried: usize = replicates.iter().filter(|r| r.retries > 0).count();
    if retried > 0 {
        warnings.push(format!("{retried} replicates needed a fresh resample"));
    }

    let hs: Vec<&GridFunction> = replicates.iter().map(|r| &r.h).collect();
    let gs: Vec<&GridFunction> = replicates.iter().map(|r| &r.g).collect();
    let (h_mean, se_h) = mean_and_se(&hs);
    let (g_mean, se_g) = mean_and_se(&gs);
    let z = two_sided_z(bcfg.alpha);
    let band_h = band(&h_mean, &se_h, z);
    let band_g = band(&g_mean, &se_g, z);

    let mut stats = BTreeMap::new();
    for (k, name) in [TEST_NULL, TEST_CONSTANT, TEST_LINEAR].into_iter().enumerate() {
        let draws: Vec<f64> = replicates.iter().map(|r| r.stats[k]).collect();
        let se_b = sample_sd(&draws);
        stats.insert(
            name.to_string(),
            TestResult {
                statistic: observed[k],
                se_b,
                p_value: p_value(observed[k], se_b),
            },
        );
    }

    Ok(BootstrapSummary {
        config: *bcfg,
        estimate,
        h_mean,
        g_mean,
        se_h,
        se_g,
        band_h,
        band_g,
        stats,
        replicates,
        failed,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisFamily, BasisSpec};
    use crate::gridfn::Grid;
    use std::f64::consts::PI;

    fn grid(m: usize) -> Grid {
        Grid::uniform(m).unwrap()
    }

    #[test]
    fn null_statistic() {
        let gr = grid(2001);
        assert_eq!(stat_trend_null(&GridFunction::zeros(&gr)), 0.0);
        let s = GridFunction::from_fn(&gr, |t| 2f64.sqrt() * (PI * t).sin());
        assert!((stat_trend_null(&s) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn constant_statistic() {
        let gr = grid(2001);
        assert!(stat_trend_constant(&GridFunction::constant(&gr, 3.7)) < 1e-9);
        let s = GridFunction::from_fn(&gr, |t| 2f64.sqrt() * (PI * t).sin());
        let expect = (1.0 - 8.0 / (PI * PI)).sqrt();
        assert!((stat_trend_constant(&s) - expect).abs() < 1e-4);
    }

    #[test]
    fn linear_statistic() {
        let gr = grid(2001);
        let line = GridFunction::from_fn(&gr, |t| 0.3 - 2.0 * t);
        assert!(stat_trend_linear(&line).unwrap() < 1e-6);
        let sq = GridFunction::from_fn(&gr, |t| t * t);
        assert!((stat_trend_linear(&sq).unwrap() - 1.0 / 3f64.sqrt()).abs() < 1e-4);
        let tiny = GridFunction::zeros(&grid(2));
        assert!(stat_trend_linear(&tiny).is_err());
    }

    #[test]
    fn p_value_against_high_precision_reference() {
        // 1 − Φ(x) from mpmath at 50 digits
        let cases = [
            (0.0, 1.0, 0.5),
            (1.0, 1.0, 0.15865525393145705),
            (1.959963984540054, 1.0, 0.025000000000000011),
            (0.5, 2.0, 0.40129367431707628),
            (3.0, 1.0, 0.0013498980316300946),
            (-1.0, 1.0, 0.84134474606854295),
            (0.61, 3.5e-3, 0.0),
        ];
        for (rho, se, expect) in cases {
            let got = p_value(rho, se);
            assert!((got - expect).abs() < 1e-12, "{rho}/{se}: {got} vs {expect}");
        }
    }

    #[test]
    fn p_value_with_zero_spread() {
        assert_eq!(p_value(0.2, 0.0), 0.0);
        assert_eq!(p_value(0.0, 0.0), 1.0);
    }

    #[test]
    fn z_quantiles() {
        assert!((two_sided_z(0.05) - 1.959963984540054).abs() < 1e-9);
        assert!((two_sided_z(0.01) - 2.5758293035489004).abs() < 1e-9);
    }

    #[test]
    fn config_validation() {
        let ok = BootstrapConfig::default();
        assert!(ok.validate().is_ok());
        assert!(BootstrapConfig { replicates: 1, ..ok }.validate().is_err());
        assert!(BootstrapConfig { alpha: 1.0, ..ok }.validate().is_err());
        assert!(BootstrapConfig { alpha: 0.0, ..ok }.validate().is_err());
    }

    fn small_panel() -> Vec<GridFunction> {
        let gr = grid(61);
        (0..6)
            .map(|i| {
                let s = 0.03 * (i as f64 - 2.5);
                GridFunction::from_fn(&gr, move |t| {
                    1.0 + 0.5 * t + (4.0 * PI * (t + s * t * (1.0 - t))).sin() + 0.02 * (i as f64)
                })
            })
            .collect()
    }

    fn small_cfg() -> EstimatorConfig {
        EstimatorConfig::new(BasisSpec::new(BasisFamily::ShiftedLegendre, 2).unwrap()).with_max_iter(4)
    }

    #[test]
    fn identical_observations_collapse_bands() {
        let gr = grid(41);
        let f = GridFunction::from_fn(&gr, |t| 1.0 + t + (2.0 * PI * t).cos());
        let fs = vec![f; 4];
        let b = bootstrap(&fs, &small_cfg(), &BootstrapConfig { replicates: 5, ..Default::default() }).unwrap();
        assert!(b.se_h.values().iter().all(|&v| v == 0.0));
        assert!(b.se_g.values().iter().all(|&v| v == 0.0));
        assert_eq!(b.band_h.low.values(), b.estimate.h_hat.values());
        assert_eq!(b.band_h.high.values(), b.estimate.h_hat.values());
    }

    #[test]
    fn summary_is_consistent_and_reproducible() {
        let fs = small_panel();
        let bcfg = BootstrapConfig {
            replicates: 8,
            alpha: 0.05,
            seed: 7,
        };
        let a = bootstrap(&fs, &small_cfg(), &bcfg).unwrap();
        let b = bootstrap(&fs, &small_cfg(), &bcfg).unwrap();
        assert_eq!(a.h_mean.values(), b.h_mean.values());
        assert_eq!(a.se_g.values(), b.se_g.values());
        for (name, t) in &a.stats {
            assert_eq!(t, &b.stats[name]);
            assert!((0.0..=1.0).contains(&t.p_value) && t.se_b >= 0.0);
        }

        // mean of stored replicates
        for j in 0..a.h_mean.values().len() {
            let avg = a.replicates.iter().map(|r| r.h.values()[j]).sum::<f64>() / a.replicates.len() as f64;
            assert!((avg - a.h_mean.values()[j]).abs() < 1e-12);
        }

        // bands are ordered and nest in alpha
        let (h99, g99) = a.bands(0.01).unwrap();
        let (h95, g95) = a.bands(0.05).unwrap();
        for (wide, narrow) in [(&h99, &h95), (&g99, &g95)] {
            for j in 0..wide.low.values().len() {
                assert!(narrow.low.values()[j] <= narrow.high.values()[j]);
                assert!(wide.low.values()[j] <= narrow.low.values()[j]);
                assert!(wide.high.values()[j] >= narrow.high.values()[j]);
            }
        }
        assert!(a.warnings.iter().any(|w| w.contains("unreliable")));

        let other = bootstrap(&fs, &small_cfg(), &BootstrapConfig { seed: 8, ..bcfg }).unwrap();
        assert_ne!(a.h_mean.values(), other.h_mean.values());
    }

    #[test]
    fn two_replicates_run() {
        let fs = small_panel();
        let b = bootstrap(&fs, &small_cfg(), &BootstrapConfig { replicates: 2, ..Default::default() }).unwrap();
        assert_eq!(b.replicates.len(), 2);
        assert!(!b.warnings.is_empty());
    }

    #[test]
    fn resamples_draw_from_the_panel() {
        let fs = small_panel();
        let b = bootstrap(&fs, &small_cfg(), &BootstrapConfig { replicates: 4, ..Default::default() }).unwrap();
        for r in &b.replicates {
            assert_eq!(r.indices.len(), fs.len());
            assert!(r.indices.iter().all(|&i| i < fs.len()));
        }
    }
}
