//! Coordinate-descent estimation of the trend `h`, the seasonal template `g`
//! and the per-observation warpings `γ_i` in
//! `f_i = h + (g∘γ_i)√γ̇_i + ε_i`, with `h ∈ H`, `g ⊥ H` and
//! `KM{γ_i⁻¹} = γ_id`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{build_orthonormal, BasisFamily, BasisSpec, OrthonormalBasis};
use crate::dpalign::{dp_align, DpConfig};
use crate::error::{Error, Result};
use crate::gridfn::{mean_function, GridFunction};
use crate::warping::{
    action, center_warpings_with, identity_warping, inverse, Warping, KARCHER_MAX_ITER,
    KARCHER_TOL,
};

#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub basis: BasisSpec,
    pub max_iter: usize,
    pub dp: DpConfig,
    pub karcher_tol: f64,
    /// Relative per-iteration cost increase tolerated before a warning is logged.
    pub cost_slack: f64,
    /// Stop once the relative cost change stays below this for two iterations.
    pub early_stop: f64,
    /// Also stop when the cost repeats with period two (see [`decompose`]).
    pub stop_on_cycles: bool,
}

impl EstimatorConfig {
    pub fn new(basis: BasisSpec) -> Self {
        Self {
            basis,
            max_iter: 20,
            dp: DpConfig::default(),
            karcher_tol: KARCHER_TOL,
            cost_slack: 1e-2,
            early_stop: 1e-8,
            stop_on_cycles: true,
        }
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_dp(mut self, dp: DpConfig) -> Self {
        self.dp = dp;
        self
    }

    pub fn with_basis(mut self, basis: BasisSpec) -> Self {
        self.basis = basis;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if !(self.karcher_tol > 0.0) {
            return Err(Error::Config("karcher_tol must be positive".into()));
        }
        if !(self.cost_slack >= 0.0) || !(self.early_stop >= 0.0) {
            return Err(Error::Config("cost_slack and early_stop must be nonnegative".into()));
        }
        self.dp.validate()
    }
}

#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub basis: BasisSpec,
    pub h_hat: GridFunction,
    pub g_hat: GridFunction,
    pub warpings: Vec<Warping>,
    pub sigma_hat: f64,
    /// Cost before the first iteration.
    pub initial_cost: f64,
    /// Cost after each completed iteration.
    pub cost_trace: Vec<f64>,
    pub neg_log_likelihood: f64,
    /// Iterations whose cost rose by more than `cost_slack` relative.
    pub slack_violations: Vec<usize>,
}

impl DecompositionResult {
    pub fn iterations(&self) -> usize {
        self.cost_trace.len()
    }
}

fn check_panel(fs: &[GridFunction]) -> Result<()> {
    let first = fs.first().ok_or(Error::Empty)?;
    for f in &fs[1..] {
        first.grid().check_same(f.grid())?;
    }
    Ok(())
}

fn squared_distance(a: &[f64], b: &[f64], c: &[f64], h: f64) -> f64 {
    // trapezoid of (a − b − c)²
    let m = a.len();
    let mut acc = 0.0;
    for j in 0..m {
        let d = a[j] - b[j] - c[j];
        let w = if j == 0 || j + 1 == m { 0.5 } else { 1.0 };
        acc += w * d * d;
    }
    acc * h
}

/// `(1/n) Σ ‖f_i − h − (g, γ_i)‖²`.
pub fn cost(fs: &[GridFunction], h: &GridFunction, g: &GridFunction, gammas: &[Warping]) -> Result<f64> {
    check_panel(fs)?;
    if fs.len() != gammas.len() {
        return Err(Error::LengthMismatch {
            expected: fs.len(),
            got: gammas.len(),
        });
    }
    let grid = fs[0].grid();
    grid.check_same(h.grid())?;
    grid.check_same(g.grid())?;
    let step = grid.spacing();
    let mut total = 0.0;
    for (f, gamma) in fs.iter().zip(gammas) {
        let warped = action(g, gamma)?;
        total += squared_distance(f.values(), h.values(), warped.values(), step);
    }
    Ok(total / fs.len() as f64)
}

/// `Π_H[(1/n) Σ (f_i − (g, γ_i))]`.
pub fn update_h(
    fs: &[GridFunction],
    g: &GridFunction,
    gammas: &[Warping],
    basis: &OrthonormalBasis,
) -> Result<GridFunction> {
    if fs.len() != gammas.len() {
        return Err(Error::LengthMismatch {
            expected: fs.len(),
            got: gammas.len(),
        });
    }
    let residuals = fs
        .iter()
        .zip(gammas)
        .map(|(f, gamma)| Ok(f - &action(g, gamma)?))
        .collect::<Result<Vec<_>>>()?;
    basis.project(&mean_function(&residuals)?)
}

/// `(I − Π_H)[(1/n) Σ ((f_i − h), γ_i⁻¹)]`.
pub fn update_g(
    fs: &[GridFunction],
    h: &GridFunction,
    gammas: &[Warping],
    basis: &OrthonormalBasis,
) -> Result<GridFunction> {
    if fs.len() != gammas.len() {
        return Err(Error::LengthMismatch {
            expected: fs.len(),
            got: gammas.len(),
        });
    }
    let unwarped = fs
        .iter()
        .zip(gammas)
        .map(|(f, gamma)| {
            f.grid().check_same(h.grid())?;
            action(&(f - h), &inverse(gamma))
        })
        .collect::<Result<Vec<_>>>()?;
    basis.project_complement(&mean_function(&unwarped)?)
}

/// Aligns `g` to each `f_i − h`, then recenters so the Karcher mean of the
/// inverses is the identity.
pub fn update_warpings(
    fs: &[GridFunction],
    h: &GridFunction,
    g: &GridFunction,
    dp: &DpConfig,
    karcher_tol: f64,
) -> Result<Vec<Warping>> {
    check_panel(fs)?;
    let scale = fs.iter().map(|f| (f - h).norm()).fold(g.norm(), f64::max);
    if g.norm() <= 1e-12 * scale.max(1.0) {
        // a vanishing template makes every warping optimal
        return Ok(vec![identity_warping(g.grid()); fs.len()]);
    }
    // repeated observations (common in bootstrap panels) are aligned once
    let mut first_seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let slot: Vec<usize> = fs
        .iter()
        .enumerate()
        .map(|(i, f)| *first_seen.entry(f.values().iter().map(|v| v.to_bits()).collect()).or_insert(i))
        .collect();
    let distinct: Vec<usize> = (0..fs.len()).filter(|&i| slot[i] == i).collect();
    let aligned = distinct
        .par_iter()
        .map(|&i| {
            fs[i].grid().check_same(h.grid())?;
            Ok(dp_align(&(&fs[i] - h), g, dp)?.warping)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut by_index: Vec<Option<Warping>> = vec![None; fs.len()];
    for (&i, w) in distinct.iter().zip(aligned) {
        by_index[i] = Some(w);
    }
    let raw: Vec<Warping> = slot
        .iter()
        .map(|&i| by_index[i].clone().expect("aligned"))
        .collect();
    Ok(center_warpings_with(&raw, karcher_tol, KARCHER_MAX_ITER)?.warpings)
}

fn initial_template(fs: &[GridFunction]) -> Result<GridFunction> {
    let mean = mean_function(fs)?;
    let mut best = (f64::INFINITY, 0);
    for (i, f) in fs.iter().enumerate() {
        let d = (f - &mean).norm();
        if d < best.0 {
            best = (d, i);
        }
    }
    Ok(fs[best.1].clone())
}

fn tag(iteration: usize, block: &'static str) -> impl FnOnce(Error) -> Error {
    move |e| Error::Estimation {
        iteration,
        block,
        source: Box::new(e),
    }
}

/// Runs the block coordinate descent from `g⁰ = f_ĩ` (the observation closest
/// to the cross-sectional mean), `h⁰ = 0`, `γ_i⁰ = γ_id`.
///
/// Each iteration updates the warpings, then `g`, then `h`. The loop ends after
/// `max_iter` iterations, or earlier once the relative cost change stays below
/// `early_stop` for two iterations. With `stop_on_cycles` it also ends when the
/// cost matches the one two iterations back, within `early_stop`, twice in a row.
pub fn decompose(fs: &[GridFunction], cfg: &EstimatorConfig) -> Result<DecompositionResult> {
    if fs.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: fs.len(),
        });
    }
    check_panel(fs)?;
    let g0 = initial_template(fs)?;
    let h0 = GridFunction::zeros(fs[0].grid());
    decompose_from(fs, cfg, h0, g0)
}

/// [`decompose`] started from a caller-supplied `(h⁰, g⁰)` instead of the
/// default initialization; the warpings still start at the identity.
pub fn decompose_from(
    fs: &[GridFunction],
    cfg: &EstimatorConfig,
    h0: GridFunction,
    g0: GridFunction,
) -> Result<DecompositionResult> {
    cfg.validate()?;
    if fs.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: fs.len(),
        });
    }
    check_panel(fs)?;
    let grid = fs[0].grid().clone();
    grid.check_same(h0.grid())?;
    grid.check_same(g0.grid())?;
    let basis = build_orthonormal(cfg.basis, &grid)?;

    let mut g = g0;
    let mut h = h0;
    let mut gammas = vec![identity_warping(&grid); fs.len()];
    let initial_cost = cost(fs, &h, &g, &gammas)?;

    let mut trace: Vec<f64> = Vec::with_capacity(cfg.max_iter);
    let mut slack_violations = Vec::new();
    // consecutive iterations whose cost matched the one `p` iterations back, p = 1, 2
    let mut quiet = [0usize; 2];
    for j in 1..=cfg.max_iter {
        gammas = update_warpings(fs, &h, &g, &cfg.dp, cfg.karcher_tol).map_err(tag(j, "warpings"))?;
        g = update_g(fs, &h, &gammas, &basis).map_err(tag(j, "seasonality"))?;
        h = update_h(fs, &g, &gammas, &basis).map_err(tag(j, "trend"))?;
        let c = cost(fs, &h, &g, &gammas).map_err(tag(j, "cost"))?;
        let previous = trace.last().copied().unwrap_or(initial_cost);
        if c > previous * (1.0 + cfg.cost_slack) {
            slack_violations.push(j);
        }
        for (p, q) in quiet.iter_mut().enumerate() {
            let back = if trace.len() > p { trace[trace.len() - 1 - p] } else { initial_cost };
            let change = (back - c).abs() / back.max(f64::MIN_POSITIVE);
            *q = if change < cfg.early_stop { *q + 1 } else { 0 };
        }
        trace.push(c);
        if c == 0.0 || quiet[0] >= 2 {
            break;
        }
        // The DP often settles into a two-state cycle of warpings. Stop once
        // it is stationary, on an iteration with the same parity as max_iter.
        if cfg.stop_on_cycles && quiet[1] >= 2 && (cfg.max_iter - j) % 2 == 0 {
            break;
        }
    }

    let final_cost = *trace.last().expect("max_iter >= 1");
    Ok(DecompositionResult {
        basis: cfg.basis,
        h_hat: h,
        g_hat: g,
        warpings: gammas,
        sigma_hat: final_cost.max(0.0).sqrt(),
        initial_cost,
        cost_trace: trace,
        neg_log_likelihood: final_cost,
        slack_violations,
    })
}

/// The no-warping baseline `f_i = h + g + ε_i`: `(Π_H f̄, (I − Π_H) f̄)`.
pub fn separation_model(fs: &[GridFunction], basis: &OrthonormalBasis) -> Result<(GridFunction, GridFunction)> {
    let mean = mean_function(fs)?;
    let h = basis.project(&mean)?;
    let g = &mean - &h;
    Ok((h, g))
}

/// Residual cost `(1/n) Σ ‖f_i − ĥ − ĝ‖²` of the separation model.
pub fn separation_cost(fs: &[GridFunction], basis: &OrthonormalBasis) -> Result<f64> {
    let (h, g) = separation_model(fs, basis)?;
    let ids = vec![identity_warping(basis.grid()); fs.len()];
    cost(fs, &h, &g, &ids)
}

/// The separation model packaged like an estimator run: identity warpings
/// and a one-entry cost trace.
pub fn decompose_separation(fs: &[GridFunction], spec: BasisSpec) -> Result<DecompositionResult> {
    check_panel(fs)?;
    let basis = build_orthonormal(spec, fs[0].grid())?;
    let (h_hat, g_hat) = separation_model(fs, &basis)?;
    let warpings = vec![identity_warping(basis.grid()); fs.len()];
    let c = cost(fs, &h_hat, &g_hat, &warpings)?;
    Ok(DecompositionResult {
        basis: spec,
        h_hat,
        g_hat,
        warpings,
        sigma_hat: c.max(0.0).sqrt(),
        initial_cost: c,
        cost_trace: vec![c],
        neg_log_likelihood: c,
        slack_violations: Vec::new(),
    })
}

/// Outcome of fitting every candidate trend dimension.
#[derive(Debug, Clone)]
pub struct Selection {
    pub selected: usize,
    pub candidates: Vec<usize>,
    pub results: Vec<DecompositionResult>,
}

impl Selection {
    /// `(l, final cost)` pairs in candidate order.
    pub fn table(&self) -> Vec<SelectionRow> {
        self.candidates
            .iter()
            .zip(&self.results)
            .map(|(&l, r)| SelectionRow {
                l,
                neg_log_likelihood: r.neg_log_likelihood,
            })
            .collect()
    }

    pub fn selected_result(&self) -> &DecompositionResult {
        let idx = self
            .candidates
            .iter()
            .position(|&l| l == self.selected)
            .expect("selected is a candidate");
        &self.results[idx]
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SelectionRow {
    pub l: usize,
    pub neg_log_likelihood: f64,
}

/// Fits each `l` in `l_range` and picks the smallest final cost (ties go to
/// the smaller `l`).
pub fn select_subspace(
    fs: &[GridFunction],
    family: BasisFamily,
    l_range: std::ops::RangeInclusive<usize>,
    cfg: &EstimatorConfig,
) -> Result<Selection> {
    let candidates: Vec<usize> = l_range.collect();
    if candidates.is_empty() {
        return Err(Error::Config("empty l range".into()));
    }
    let results = candidates
        .iter()
        .map(|&l| {
            let spec = BasisSpec::new(family, l)?;
            decompose(fs, &cfg.clone().with_basis(spec))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.neg_log_likelihood < results[best].neg_log_likelihood {
            best = i;
        }
    }
    Ok(Selection {
        selected: candidates[best],
        candidates,
        results,
    })
}
