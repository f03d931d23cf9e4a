//! Dynamic-programming search for the warping that best aligns `r` to `q`:
//! `argmin_γ ‖q − (r∘γ)√γ̇‖²` over monotone piecewise-linear lattice paths.
//!
//! The lattice has `N` nodes per axis on `[0, 1]`; node `(i, k)` means
//! `γ(i/(N−1)) = k/(N−1)`. A path moves by steps `(p, q)` drawn from a fixed
//! neighborhood, so each segment is a straight piece with slope `q/p`. The
//! cost of a segment is the trapezoidal sum of the integrand over the lattice
//! abscissae it covers, which makes the path cost the trapezoidal value of the
//! full objective at lattice resolution.

use crate::error::{Error, Result};
use crate::gridfn::{interp_sorted, interp_uniform, GridFunction};
use crate::warping::Warping;

/// Lattice resolution used when none is configured and the grid is finer.
pub const MAX_DEFAULT_LATTICE: usize = 201;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DpConfig {
    /// Nodes per axis; `None` means the grid size capped at 201.
    pub lattice_size: Option<usize>,
    /// Allowed steps `(p, q)`: `p` lattice cells in time, `q` in warped time.
    pub neighborhood: Vec<(usize, usize)>,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            lattice_size: None,
            neighborhood: coprime_neighborhood(7),
        }
    }
}

impl DpConfig {
    pub fn with_lattice(mut self, n: usize) -> Self {
        self.lattice_size = Some(n);
        self
    }

    pub fn with_neighborhood(mut self, steps: Vec<(usize, usize)>) -> Self {
        self.neighborhood = steps;
        self
    }

    /// Only the diagonal step: every alignment returns the identity.
    pub fn identity_only() -> Self {
        Self::default().with_neighborhood(vec![(1, 1)])
    }

    pub fn effective_lattice(&self, m: usize) -> usize {
        self.lattice_size
            .unwrap_or_else(|| m.min(MAX_DEFAULT_LATTICE))
    }

    pub fn validate(&self) -> Result<()> {
        if self.neighborhood.is_empty() {
            return Err(Error::Config("DP neighborhood is empty".into()));
        }
        if let Some(&(p, q)) = self.neighborhood.iter().find(|(p, q)| *p == 0 || *q == 0) {
            return Err(Error::Config(format!(
                "DP step ({p}, {q}) must be positive in both coordinates"
            )));
        }
        if let Some(n) = self.lattice_size {
            if n < 2 {
                return Err(Error::Config(format!("lattice size {n} is below 2")));
            }
        }
        Ok(())
    }
}

/// All coprime `(p, q)` with `1 ≤ p, q ≤ max_step`.
pub fn coprime_neighborhood(max_step: usize) -> Vec<(usize, usize)> {
    let mut steps = Vec::new();
    for p in 1..=max_step {
        for q in 1..=max_step {
            if gcd(p, q) == 1 {
                steps.push((p, q));
            }
        }
    }
    steps
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Precomputed quadrature layout of one step: for each abscissa `u = 0..=dt`,
/// the warped position `u·dk/dt` splits into an integer offset and interpolation
/// weights, and the trapezoid weight is folded in.
#[derive(Debug, Clone)]
struct StepTable {
    dt: usize,
    dk: usize,
    sqrt_slope: f64,
    offsets: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    quad: Vec<f64>,
}

impl StepTable {
    fn new(dt: usize, dk: usize) -> Self {
        let offsets = (0..=dt).map(|u| u * dk / dt).collect();
        let upper: Vec<f64> = (0..=dt)
            .map(|u| ((u * dk) % dt) as f64 / dt as f64)
            .collect();
        let lower = upper.iter().map(|w| 1.0 - w).collect();
        let quad = (0..=dt)
            .map(|u| if u == 0 || u == dt { 0.5 } else { 1.0 })
            .collect();
        Self {
            dt,
            dk,
            sqrt_slope: (dk as f64 / dt as f64).sqrt(),
            offsets,
            lower,
            upper,
            quad,
        }
    }
}

/// One alignment instance: `q` and `r` sampled on the lattice.
#[derive(Debug, Clone)]
pub struct Alignment {
    n: usize,
    spacing: f64,
    q: Vec<f64>,
    r: Vec<f64>,
    steps: Vec<StepTable>,
    /// `warped[s][u][k] = √slope · r(k + frac_u)` for step `s` and abscissa `u`.
    warped: Vec<Vec<Vec<f64>>>,
}

/// A lattice node `(time index, warped-time index)`.
pub type Node = (usize, usize);

impl Alignment {
    pub fn new(q: &GridFunction, r: &GridFunction, cfg: &DpConfig) -> Result<Self> {
        cfg.validate()?;
        q.grid().check_same(r.grid())?;
        let m = q.grid().m();
        let n = cfg.effective_lattice(m);
        let (qs, mut rs) = if n == m {
            (q.values().to_vec(), r.values().to_vec())
        } else {
            let nodes: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
            (
                nodes.iter().map(|&t| interp_uniform(q.values(), t)).collect(),
                nodes.iter().map(|&t| interp_uniform(r.values(), t)).collect(),
            )
        };
        rs.push(0.0);
        let mut neighborhood = cfg.neighborhood.clone();
        neighborhood.sort_by_key(|&(p, q)| (p.abs_diff(q), p, q));
        neighborhood.dedup();
        let steps: Vec<StepTable> = neighborhood
            .into_iter()
            .map(|(p, q)| StepTable::new(p, q))
            .collect();
        let warped = steps
            .iter()
            .map(|s| {
                (0..=s.dt)
                    .map(|u| {
                        let (lo, up) = (s.lower[u], s.upper[u]);
                        rs.windows(2)
                            .map(|w| s.sqrt_slope * (lo * w[0] + up * w[1]))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            n,
            spacing: 1.0 / (n - 1) as f64,
            q: qs,
            r: rs,
            steps,
            warped,
        })
    }

    pub fn lattice_size(&self) -> usize {
        self.n
    }

    /// Steps in tie-breaking order: closest to the diagonal first, then smaller `p`, then smaller `q`.
    pub fn steps(&self) -> Vec<(usize, usize)> {
        self.steps.iter().map(|s| (s.dt, s.dk)).collect()
    }

    /// Cost of the straight segment `a → b`: trapezoidal sum over the lattice
    /// abscissae `a.0..=b.0` of `(q(t) − r(γ(t))·√slope)²`.
    pub fn segment_cost(&self, a: Node, b: Node) -> Result<f64> {
        if b.0 <= a.0 || b.1 <= a.1 {
            return Err(Error::InvalidWarping(format!(
                "segment {a:?} -> {b:?} is not strictly increasing"
            )));
        }
        if b.0 >= self.n || b.1 >= self.n {
            return Err(Error::Config(format!(
                "segment endpoint {b:?} outside a {0}x{0} lattice",
                self.n
            )));
        }
        let table = self
            .steps
            .iter()
            .find(|s| s.dt == b.0 - a.0 && s.dk == b.1 - a.1)
            .cloned()
            .unwrap_or_else(|| StepTable::new(b.0 - a.0, b.1 - a.1));
        Ok(self.step_cost(&table, a.0, a.1))
    }

    #[inline]
    fn step_cost(&self, s: &StepTable, i0: usize, k0: usize) -> f64 {
        let q = &self.q[i0..=i0 + s.dt];
        // r carries one trailing pad so `off + 1` stays in bounds
        let r = &self.r[k0..=k0 + s.dk + 1];
        let c = s.sqrt_slope;
        let mut acc = 0.0;
        for u in 0..=s.dt {
            let off = s.offsets[u];
            let rv = s.lower[u] * r[off] + s.upper[u] * r[off + 1];
            let d = q[u] - c * rv;
            acc += s.quad[u] * d * d;
        }
        acc * self.spacing
    }

    /// Per time index, the range of warped indices that lie on some path from
    /// `(0,0)` to `(N−1,N−1)` whose slopes stay within the neighborhood's extremes.
    fn feasible_band(&self) -> Vec<Option<(usize, usize)>> {
        let n = self.n;
        let last = n - 1;
        // slopes as rationals dk/dt
        let (amin, bmin) = self
            .steps
            .iter()
            .map(|s| (s.dk, s.dt))
            .min_by(|x, y| (x.0 * y.1).cmp(&(y.0 * x.1)))
            .unwrap();
        let (amax, bmax) = self
            .steps
            .iter()
            .map(|s| (s.dk, s.dt))
            .max_by(|x, y| (x.0 * y.1).cmp(&(y.0 * x.1)))
            .unwrap();
        (0..n)
            .map(|i| {
                let rest = last - i;
                let lo = (i * amin).div_ceil(bmin).max(last.saturating_sub(rest * amax / bmax));
                let hi = (i * amax / bmax)
                    .min(last)
                    .min(last.saturating_sub((rest * amin).div_ceil(bmin)));
                (lo <= hi).then_some((lo, hi))
            })
            .collect()
    }

    /// Segment costs of step `s` from `(i0, k0 + j)` for every `j < out.len()`.
    fn row_costs(&self, idx: usize, i0: usize, k0: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let s = &self.steps[idx];
        let len = out.len();
        let rows: Vec<(f64, f64, &[f64])> = self.warped[idx]
            .iter()
            .enumerate()
            .map(|(u, table)| {
                let off = k0 + s.offsets[u];
                (self.q[i0 + u], s.quad[u], &table[off..off + len])
            })
            .collect();
        accumulate_rows(&rows, out);
        out.iter_mut().for_each(|v| *v *= self.spacing);
    }

    /// Total cost of a node path, summed segment by segment from the start.
    pub fn path_cost(&self, path: &[Node]) -> Result<f64> {
        let mut total = 0.0;
        for w in path.windows(2) {
            total += self.segment_cost(w[0], w[1])?;
        }
        Ok(total)
    }

    /// The diagonal path `(0,0) → (1,1) → … → (N−1,N−1)`.
    pub fn identity_path(&self) -> Vec<Node> {
        (0..self.n).map(|i| (i, i)).collect()
    }

    /// Minimum-cost path from `(0,0)` to `(N−1,N−1)` and its cost.
    ///
    /// Rows are filled one time index at a time; for each step the segment
    /// costs of a whole row of start nodes are accumulated together, in the
    /// same arithmetic order as [`Alignment::segment_cost`].
    pub fn solve(&self) -> (Vec<Node>, f64) {
        let n = self.n;
        let mut cost = vec![f64::INFINITY; n * n];
        let mut back = vec![u8::MAX; n * n];
        cost[0] = 0.0;
        let band = self.feasible_band();
        let mut seg = vec![0.0; n];
        for i in 1..n {
            let row = i * n;
            let Some((lo, hi)) = band[i] else { continue };
            for (idx, s) in self.steps.iter().enumerate() {
                if s.dt > i || s.dk > hi {
                    continue;
                }
                let pi = i - s.dt;
                let Some((plo, phi)) = band[pi] else { continue };
                // start nodes k0 with k0 in the band of row pi and k0 + dk in the band of row i
                let first = plo.max(lo.saturating_sub(s.dk));
                let last = phi.min(hi - s.dk);
                if first > last {
                    continue;
                }
                let len = last - first + 1;
                self.row_costs(idx, pi, first, &mut seg[..len]);
                let (done, current) = cost.split_at_mut(row);
                let prev = &done[pi * n + first..pi * n + first + len];
                let cur = &mut current[first + s.dk..first + s.dk + len];
                let marks = &mut back[row + first + s.dk..row + first + s.dk + len];
                for (((slot, mark), &p), &c) in cur.iter_mut().zip(marks).zip(prev).zip(&seg[..len]) {
                    let cand = p + c;
                    if cand < *slot {
                        *slot = cand;
                        *mark = idx as u8;
                    }
                }
            }
        }
        if !cost[n * n - 1].is_finite() {
            return (Vec::new(), f64::INFINITY);
        }
        let mut path = vec![(n - 1, n - 1)];
        let (mut i, mut k) = (n - 1, n - 1);
        while (i, k) != (0, 0) {
            let s = &self.steps[back[i * n + k] as usize];
            i -= s.dt;
            k -= s.dk;
            path.push((i, k));
        }
        path.reverse();
        (path, cost[n * n - 1])
    }

    /// Resamples a lattice path onto the grid of `like` as a [`Warping`].
    pub fn path_to_warping(&self, path: &[Node], like: &GridFunction) -> Result<Warping> {
        let denom = (self.n - 1) as f64;
        let xs: Vec<f64> = path.iter().map(|&(i, _)| i as f64 / denom).collect();
        let ys: Vec<f64> = path.iter().map(|&(_, k)| k as f64 / denom).collect();
        let values = interp_sorted(&xs, &ys, like.grid().points());
        Warping::repaired(like.grid().clone(), values)
    }
}

/// `out[k] += Σ_u w_u (q_u − t_u[k])²`, adding the terms in increasing `u`.
fn accumulate_rows(rows: &[(f64, f64, &[f64])], out: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the CPU supports AVX2, checked just above.
        return unsafe { accumulate_rows_avx2(rows, out) };
    }
    accumulate_rows_generic(rows, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn accumulate_rows_avx2(rows: &[(f64, f64, &[f64])], out: &mut [f64]) {
    accumulate_rows_generic(rows, out)
}

#[inline(always)]
fn accumulate_rows_generic(rows: &[(f64, f64, &[f64])], out: &mut [f64]) {
    let len = out.len();
    // four abscissae per pass over `out`; each accumulator still adds its
    // terms in increasing `u`, so results match `step_cost` bit for bit
    let mut chunks = rows.chunks_exact(4);
    for c in &mut chunks {
        let [(q0, w0, t0), (q1, w1, t1), (q2, w2, t2), (q3, w3, t3)] = [c[0], c[1], c[2], c[3]];
        let (t0, t1, t2, t3) = (&t0[..len], &t1[..len], &t2[..len], &t3[..len]);
        for k in 0..len {
            let mut acc = out[k];
            let d = q0 - t0[k];
            acc += w0 * d * d;
            let d = q1 - t1[k];
            acc += w1 * d * d;
            let d = q2 - t2[k];
            acc += w2 * d * d;
            let d = q3 - t3[k];
            acc += w3 * d * d;
            out[k] = acc;
        }
    }
    for &(qu, w, table) in chunks.remainder() {
        for (acc, &rv) in out.iter_mut().zip(table) {
            let d = qu - rv;
            *acc += w * d * d;
        }
    }
}

/// Result of a single alignment.
#[derive(Debug, Clone)]
pub struct Aligned {
    pub warping: Warping,
    pub cost: f64,
    pub path: Vec<Node>,
}

/// Best warping of `r` onto `q` over the lattice, with its attained cost.
pub fn dp_align(q: &GridFunction, r: &GridFunction, cfg: &DpConfig) -> Result<Aligned> {
    let problem = Alignment::new(q, r, cfg)?;
    let (path, cost) = problem.solve();
    if !cost.is_finite() {
        return Err(Error::Config(
            "no lattice path reaches the end node with this neighborhood".into(),
        ));
    }
    let warping = problem.path_to_warping(&path, q)?;
    Ok(Aligned {
        warping,
        cost,
        path,
    })
}

/// Free-function form of [`Alignment::segment_cost`].
pub fn segment_cost(
    q: &GridFunction,
    r: &GridFunction,
    cfg: &DpConfig,
    a: Node,
    b: Node,
) -> Result<f64> {
    Alignment::new(q, r, cfg)?.segment_cost(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::Grid;
    use crate::warping::{action, identity_warping};
    use std::f64::consts::PI;

    fn grid(m: usize) -> Grid {
        Grid::uniform(m).unwrap()
    }

    /// Exhaustive enumeration of monotone lattice paths, costs accumulated from the start.
    fn brute_force(problem: &Alignment) -> f64 {
        fn walk(p: &Alignment, node: Node, acc: f64, best: &mut f64) {
            let n = p.lattice_size();
            if node == (n - 1, n - 1) {
                *best = best.min(acc);
                return;
            }
            for (dt, dk) in p.steps() {
                let next = (node.0 + dt, node.1 + dk);
                if next.0 < n && next.1 < n {
                    let c = p.segment_cost(node, next).unwrap();
                    walk(p, next, acc + c, best);
                }
            }
        }
        let mut best = f64::INFINITY;
        walk(problem, (0, 0), 0.0, &mut best);
        best
    }

    #[test]
    fn default_neighborhood_is_full_coprime_set() {
        let steps = DpConfig::default().neighborhood;
        assert_eq!(steps.len(), 35);
        assert!(steps.contains(&(1, 1)) && steps.contains(&(7, 6)) && !steps.contains(&(2, 4)));
    }

    #[test]
    fn tie_break_order() {
        let g = grid(8);
        let f = GridFunction::zeros(&g);
        let cfg = DpConfig::default().with_neighborhood(vec![(2, 1), (1, 2), (1, 1), (2, 3)]);
        let a = Alignment::new(&f, &f, &cfg).unwrap();
        assert_eq!(a.steps(), vec![(1, 1), (1, 2), (2, 1), (2, 3)]);
        // all costs tie at zero: the diagonal wins
        let (path, cost) = a.solve();
        assert_eq!(cost, 0.0);
        assert_eq!(path, a.identity_path());
    }

    #[test]
    fn segment_cost_examples() {
        let g = grid(51);
        let q = GridFunction::from_fn(&g, |t| (3.0 * PI * t).sin() + t);
        let cfg = DpConfig::default();
        let a = Alignment::new(&q, &q, &cfg).unwrap();
        assert!(a.segment_cost((4, 4), (9, 9)).unwrap().abs() < 1e-15);

        let zero = GridFunction::zeros(&g);
        let a = Alignment::new(&q, &zero, &cfg).unwrap();
        let h = g.spacing();
        let v = q.values();
        let want = h * (0.5 * v[10] * v[10] + (11..15).map(|j| v[j] * v[j]).sum::<f64>() + 0.5 * v[15] * v[15]);
        assert!((a.segment_cost((10, 3), (15, 8)).unwrap() - want).abs() < 1e-15);

        assert!(a.segment_cost((5, 5), (5, 7)).is_err());
        assert!(a.segment_cost((5, 5), (7, 4)).is_err());
    }

    #[test]
    fn segment_on_exact_piecewise_linear_alignment_is_zero() {
        // γ: slope 2 on the first third of the lattice, then 1/2; r is piecewise linear
        // so interpolation of r∘γ is exact at lattice nodes covered by the segment.
        let m = 31;
        let g = grid(m);
        let r = GridFunction::from_fn(&g, |t| 1.0 + 2.0 * t);
        let gamma = Alignment::new(&r, &r, &DpConfig::default())
            .unwrap()
            .path_to_warping(&[(0, 0), (10, 20), (30, 30)], &r)
            .unwrap();
        let q = action(&r, &gamma).unwrap();
        let a = Alignment::new(&q, &r, &DpConfig::default()).unwrap();
        // interior of the first piece, away from the kink where the slope is averaged
        let c = a.segment_cost((1, 2), (8, 16)).unwrap();
        assert!(c < 1e-6, "{c}");
    }

    #[test]
    fn identical_inputs_give_identity() {
        let g = grid(101);
        let f = GridFunction::from_fn(&g, |t| (4.0 * PI * t).sin() * (1.0 + t));
        let out = dp_align(&f, &f, &DpConfig::default()).unwrap();
        assert!(out.cost <= 1e-8);
        assert!(out.warping.sup_distance(&identity_warping(&g)) <= 1.0 / 100.0 + 1e-12);
    }

    #[test]
    fn recovers_lattice_representable_warping() {
        let m = 101;
        let g = grid(m);
        let r = GridFunction::from_fn(&g, |t| (-40.0 * (t - 0.3f64).powi(2)).exp() - 0.7 * (-60.0 * (t - 0.7f64).powi(2)).exp());
        let helper = Alignment::new(&r, &r, &DpConfig::default()).unwrap();
        let truth = helper
            .path_to_warping(&[(0, 0), (30, 15), (60, 55), (100, 100)], &r)
            .unwrap();
        let q = action(&r, &truth).unwrap();
        let out = dp_align(&q, &r, &DpConfig::default()).unwrap();
        let n = 101.0;
        assert!(out.warping.sup_distance(&truth) <= 2.0 / n, "{}", out.warping.sup_distance(&truth));
    }

    #[test]
    fn matches_enumeration_on_small_lattice() {
        let g = grid(8);
        let cfg = DpConfig::default().with_neighborhood(vec![(1, 1), (1, 2), (2, 1)]);
        for seed in 0..10u32 {
            let s = seed as f64;
            let q = GridFunction::from_fn(&g, |t| (7.0 * t + s).sin() + 0.3 * s * t);
            let r = GridFunction::from_fn(&g, |t| (5.0 * t * t - s).cos());
            let a = Alignment::new(&q, &r, &cfg).unwrap();
            let (path, cost) = a.solve();
            assert_eq!(cost, brute_force(&a));
            assert_eq!(a.path_cost(&path).unwrap(), cost);
        }
    }

    #[test]
    fn never_worse_than_identity_and_deterministic() {
        let g = grid(120);
        let q = GridFunction::from_fn(&g, |t| (9.0 * t).sin() + t * t);
        let r = GridFunction::from_fn(&g, |t| (11.0 * t + 0.4).sin());
        let cfg = DpConfig::default();
        let a = Alignment::new(&q, &r, &cfg).unwrap();
        let out = dp_align(&q, &r, &cfg).unwrap();
        assert!(out.cost <= a.path_cost(&a.identity_path()).unwrap());
        let again = dp_align(&q, &r, &cfg).unwrap();
        assert_eq!(out.cost.to_bits(), again.cost.to_bits());
        assert_eq!(out.warping, again.warping);
    }

    #[test]
    fn coarser_lattice_resamples_inputs() {
        let g = grid(1001);
        let f = GridFunction::from_fn(&g, |t| (5.0 * t).cos());
        let out = dp_align(&f, &f, &DpConfig::default()).unwrap();
        assert_eq!(out.path.len(), MAX_DEFAULT_LATTICE);
        assert_eq!(out.warping.grid().m(), 1001);
    }

    #[test]
    fn config_validation() {
        let g = grid(10);
        let f = GridFunction::zeros(&g);
        assert!(dp_align(&f, &f, &DpConfig::default().with_neighborhood(vec![])).is_err());
        assert!(dp_align(&f, &f, &DpConfig::default().with_neighborhood(vec![(0, 1)])).is_err());
        assert!(dp_align(&f, &f, &DpConfig::default().with_lattice(1)).is_err());
        // only (2,1) steps cannot reach the far corner
        assert!(dp_align(&f, &f, &DpConfig::default().with_neighborhood(vec![(2, 1)])).is_err());
    }
}
