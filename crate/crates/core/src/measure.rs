//! Escape rates, the trajectory density and the order-by-order series
//! solution of the master equation with its truncation certificate.
//!
//! The `n`-th order term `p^n_i(t)` is the probability of reaching `i` with
//! exactly `n` jumps. It satisfies
//!
//! ```text
//! p^0_i(t) = q_i u_i(0, t)
//! p^n_i(t) = Σ_{α: j → i} ∫_0^t u_i(τ, t) k_α(τ) p^{n-1}_j(τ) dτ
//! ```
//!
//! which is evaluated on a shared uniform grid with a product trapezoid rule:
//! `u_i(τ, t) p^{n-1}_j(τ)` is sampled at the two ends of each cell and each
//! end is weighted by the exact integral of `k_α` over its half of the cell.
//! For smooth rates this is the trapezoid rule up to `O(h^3)` per cell. Rate
//! breakpoints are added to the uniform grid as extra nodes, so every cell
//! sees smooth rates and the rule stays second order for piecewise rates.
//!
//! The escape factor factors through prefix products, `u_i(a, b) = U_i(b) / U_i(a)`
//! with `U_i(s) = u_i(0, s)`, so the running integral at node `k + 1` is the
//! one at node `k` times the single-cell factor `u_i(s_k, s_{k+1})` plus the
//! new panel. Cost is `O(N · M · |edges|)`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::chain::{ChainSpec, Distribution};
use crate::error::{Error, Result};
use crate::graph::{Path, PathConstraint};
use crate::rng::Philox4x32;

/// Default tolerance on the truncated tail.
pub const DEFAULT_EPSILON: f64 = 1e-8;
/// Default quadrature grid intervals per unit time.
pub const DEFAULT_GRID_PER_UNIT: usize = 1024;
/// Default cap on the series order.
pub const DEFAULT_MAX_ORDER: usize = 2000;

/// Number of grid intervals on `[0, t]` for a per-unit-time density.
pub fn grid_intervals(grid_per_unit: usize, t: f64) -> usize {
    ((grid_per_unit as f64 * t).ceil() as usize).max(1)
}

/// A path with jump times on `[0, duration]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    path: Path,
    jump_times: Vec<f64>,
    duration: f64,
}

impl Trajectory {
    pub fn new(path: Path, jump_times: Vec<f64>, duration: f64) -> Result<Self> {
        if jump_times.len() != path.len() {
            return Err(Error::InvalidTrajectory(format!(
                "{} jump times for a path of length {}",
                jump_times.len(),
                path.len()
            )));
        }
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(Error::InvalidTrajectory(format!("duration {duration}")));
        }
        let mut prev = 0.0;
        for (k, &s) in jump_times.iter().enumerate() {
            if !s.is_finite() || s < prev || s > duration {
                return Err(Error::InvalidTrajectory(format!(
                    "jump time {k} = {s} breaks 0 <= t_1 <= ... <= t_n <= {duration}"
                )));
            }
            prev = s;
        }
        Ok(Trajectory {
            path,
            jump_times,
            duration,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    /// `w_k = t_k - t_{k-1}` for `k = 1..=n`, with `t_0 = 0`.
    pub fn wait_times(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.jump_times
            .iter()
            .map(|&s| {
                let w = s - prev;
                prev = s;
                w
            })
            .collect()
    }

    pub fn terminus(&self) -> usize {
        self.path.terminus()
    }
}

/// Probability of no jump out of `v` during `[a, b]`.
pub fn escape_rate(chain: &ChainSpec, v: usize, a: f64, b: f64) -> Result<f64> {
    chain.check_interval(a, b)?;
    if v >= chain.vertex_count() {
        return Err(Error::UnknownVertex(format!("#{v}")));
    }
    Ok((-chain.out_hazard(v, a, b)).exp())
}

/// The trajectory density `f`.
pub fn density(chain: &ChainSpec, q: &Distribution, traj: &Trajectory) -> Result<f64> {
    if q.len() != chain.vertex_count() {
        return Err(Error::InvalidDistribution(format!(
            "{} entries for {} vertices",
            q.len(),
            chain.vertex_count()
        )));
    }
    chain.check_time(traj.duration())?;
    let path = traj.path();
    let rebuilt = Path::new(chain.graph(), path.source(), path.edges().to_vec())
        .map_err(|e| Error::InvalidTrajectory(format!("path does not fit the chain: {e}")))?;
    if &rebuilt != path {
        return Err(Error::InvalidTrajectory("path does not fit the chain".into()));
    }
    Ok(density_unchecked(
        chain,
        q.values(),
        path,
        traj.jump_times(),
        traj.duration(),
    ))
}

pub(crate) fn density_unchecked(
    chain: &ChainSpec,
    q: &[f64],
    path: &Path,
    times: &[f64],
    t: f64,
) -> f64 {
    let vertices = path.vertices();
    let start = q[vertices[0]];
    if start == 0.0 {
        return 0.0;
    }
    let mut hazard = 0.0;
    let mut rate_product = 1.0;
    let mut prev = 0.0;
    for (m, (&e, &s)) in path.edges().iter().zip(times).enumerate() {
        hazard += chain.out_hazard(vertices[m], prev, s);
        rate_product *= chain.rate(e).at(s);
        prev = s;
    }
    hazard += chain.out_hazard(*vertices.last().unwrap(), prev, t);
    start * rate_product * (-hazard).exp()
}

/// Analytic truncation choice and its certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    /// Highest order kept.
    pub order: usize,
    /// `e^λ λ^{N+1} / (N+1)!` with `λ = R D t`; an upper bound on `tail_sum`.
    pub tail_bound: f64,
    /// `Σ_{n > N} λ^n / n!`.
    pub tail_sum: f64,
    /// `λ = R D t`.
    pub scale: f64,
}

/// Smallest order `N` whose tail bound `e^λ λ^{N+1}/(N+1)!` is at most
/// `epsilon`, with `λ = rate_bound · degree_bound · t`.
pub fn choose_truncation(rate_bound: f64, degree_bound: usize, t: f64, epsilon: f64) -> Result<Truncation> {
    choose_truncation_capped(rate_bound, degree_bound, t, epsilon, DEFAULT_MAX_ORDER)
}

pub fn choose_truncation_capped(
    rate_bound: f64,
    degree_bound: usize,
    t: f64,
    epsilon: f64,
    max_order: usize,
) -> Result<Truncation> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} must be positive")));
    }
    if !(rate_bound >= 0.0 && t >= 0.0 && rate_bound.is_finite() && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "rate bound {rate_bound} and time {t} must be finite and nonnegative"
        )));
    }
    let scale = rate_bound * degree_bound as f64 * t;
    if scale == 0.0 {
        return Ok(Truncation {
            order: 0,
            tail_bound: 0.0,
            tail_sum: 0.0,
            scale,
        });
    }
    let log_eps = epsilon.ln();
    let ln_scale = scale.ln();
    // log of e^λ λ^{N+1} / (N+1)! at N = 0.
    let mut log_bound = scale + ln_scale;
    let mut order = 0;
    while log_bound > log_eps {
        order += 1;
        if order > max_order {
            return Err(Error::EpsilonUnattainable {
                epsilon,
                max_order,
                scale,
            });
        }
        log_bound += ln_scale - ((order + 1) as f64).ln();
    }
    Ok(Truncation {
        order,
        tail_bound: log_bound.exp(),
        tail_sum: poisson_tail_sum(scale, order),
        scale,
    })
}

/// `Σ_{n > order} λ^n / n!`, summed directly from the first omitted term.
fn poisson_tail_sum(scale: f64, order: usize) -> f64 {
    let ln_scale = scale.ln();
    let first = order + 1;
    let mut log_term = (1..=first).map(|k| ln_scale - (k as f64).ln()).sum::<f64>();
    let mut sum = 0.0;
    let mut n = first;
    loop {
        let term = log_term.exp();
        sum += term;
        if (n as f64) > scale && term <= 1e-17 * sum {
            break;
        }
        n += 1;
        log_term += ln_scale - (n as f64).ln();
        if n > first + 100_000 {
            break;
        }
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    pub epsilon: f64,
    /// Quadrature intervals per unit time.
    pub grid: usize,
    pub max_order: usize,
    /// Keep the per-order vectors `p^n(t)`.
    pub retain_terms: bool,
    /// Re-run on the half grid, report `|p_M - p_{M/2}|_∞ / 3` as the
    /// quadrature error and return the Richardson combination
    /// `p_M + (p_M - p_{M/2}) / 3`. The reported error bounds the plain
    /// trapezoid value and is conservative for the combination. When off,
    /// the plain product-trapezoid value is returned with no estimate.
    pub extrapolate: bool,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions {
            epsilon: DEFAULT_EPSILON,
            grid: DEFAULT_GRID_PER_UNIT,
            max_order: DEFAULT_MAX_ORDER,
            retain_terms: false,
            extrapolate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesResult {
    pub distribution: Distribution,
    pub truncation: Truncation,
    pub rate_bound: f64,
    pub degree_bound: usize,
    /// Grid intervals on `[0, t]`.
    pub grid_intervals: usize,
    /// `|p_M - p_{M/2}|_∞ / 3`, present when extrapolating.
    pub quadrature_error: Option<f64>,
    /// `Σ_i p^n_i(t)` for `n = 0..=N`.
    pub order_masses: Vec<f64>,
    /// `p^n(t)` for `n = 0..=N` when retained.
    pub terms: Option<Vec<Vec<f64>>>,
}

impl SeriesResult {
    pub fn order(&self) -> usize {
        self.truncation.order
    }

    pub fn tail_bound(&self) -> f64 {
        self.truncation.tail_bound
    }
}

/// Per-node data shared by every order of the recursion.
struct Grid {
    intervals: usize,
    /// `u_v(s_k, s_{k+1})`, row-major by vertex.
    cell_escape: Vec<f64>,
    /// `U_v(s_k)`, row-major by vertex.
    prefix_escape: Vec<f64>,
    /// `∫ k_α` over the left half of cell `k`, row-major by edge.
    left_weight: Vec<f64>,
    /// `∫ k_α` over the right half of cell `k`, row-major by edge.
    right_weight: Vec<f64>,
}

/// `uniform` equal cells on `[0, t]`, with every rate breakpoint in `(0, t)`
/// added as a node so that no cell straddles a jump or kink.
fn grid_nodes(chain: &ChainSpec, t: f64, uniform: usize) -> Vec<f64> {
    let step = t / uniform as f64;
    let mut nodes: Vec<f64> = (0..uniform).map(|k| k as f64 * step).collect();
    nodes.extend(chain.rates().iter().flat_map(|k| k.breakpoints(t)));
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|b, a| *b - *a <= NODE_MERGE * t);
    if t - nodes[nodes.len() - 1] <= NODE_MERGE * t {
        nodes.pop();
    }
    nodes.push(t);
    nodes
}

/// Relative distance below which breakpoints merge with grid nodes.
const NODE_MERGE: f64 = 1e-12;

impl Grid {
    fn new(chain: &ChainSpec, t: f64, uniform: usize) -> Self {
        let node = grid_nodes(chain, t, uniform);
        let nodes = node.len();
        let intervals = nodes - 1;
        let nv = chain.vertex_count();
        let mut cell_escape = vec![1.0; nv * intervals];
        let mut prefix_escape = vec![1.0; nv * nodes];
        for v in 0..nv {
            let mut hazard = 0.0;
            for k in 0..intervals {
                let cell = chain.out_hazard(v, node[k], node[k + 1]);
                cell_escape[v * intervals + k] = (-cell).exp();
                hazard += cell;
                prefix_escape[v * nodes + k + 1] = (-hazard).exp();
            }
        }
        let ne = chain.graph().edge_count();
        let mut left_weight = vec![0.0; ne * intervals];
        let mut right_weight = vec![0.0; ne * intervals];
        for e in 0..ne {
            let k_e = chain.rate(e);
            for k in 0..intervals {
                let (a, b) = (node[k], node[k + 1]);
                let mid = 0.5 * (a + b);
                left_weight[e * intervals + k] = k_e.integral(a, mid);
                right_weight[e * intervals + k] = k_e.integral(mid, b);
            }
        }
        Grid {
            intervals,
            cell_escape,
            prefix_escape,
            left_weight,
            right_weight,
        }
    }

    fn nodes(&self) -> usize {
        self.intervals + 1
    }
}

/// Runs the recursion through `order`, returning `p^n(t)` for each order.
fn series_terms(chain: &ChainSpec, q: &[f64], grid: &Grid, order: usize) -> Vec<Vec<f64>> {
    let nv = chain.vertex_count();
    let nodes = grid.nodes();
    let m = grid.intervals;
    let g = chain.graph();

    let mut prev: Vec<f64> = (0..nv * nodes)
        .map(|idx| q[idx / nodes] * grid.prefix_escape[idx])
        .collect();
    let mut out = Vec::with_capacity(order + 1);
    out.push((0..nv).map(|v| prev[v * nodes + m]).collect::<Vec<f64>>());

    let mut cur = vec![0.0; nv * nodes];
    let mut gain_left = vec![0.0; m];
    let mut gain_right = vec![0.0; m];
    for _ in 1..=order {
        for v in 0..nv {
            gain_left.iter_mut().for_each(|x| *x = 0.0);
            gain_right.iter_mut().for_each(|x| *x = 0.0);
            for &e in g.in_edges(v) {
                let src = g.edge(e).source;
                let left = &grid.left_weight[e * m..(e + 1) * m];
                let right = &grid.right_weight[e * m..(e + 1) * m];
                let p_src = &prev[src * nodes..(src + 1) * nodes];
                for k in 0..m {
                    gain_left[k] += left[k] * p_src[k];
                    gain_right[k] += right[k] * p_src[k + 1];
                }
            }
            let row = &mut cur[v * nodes..(v + 1) * nodes];
            let escape = &grid.cell_escape[v * m..(v + 1) * m];
            row[0] = 0.0;
            for k in 0..m {
                row[k + 1] = escape[k] * (row[k] + gain_left[k]) + gain_right[k];
            }
        }
        out.push((0..nv).map(|v| cur[v * nodes + m]).collect());
        std::mem::swap(&mut prev, &mut cur);
    }
    out
}

fn check_initial(chain: &ChainSpec, q: &Distribution) -> Result<()> {
    if q.len() != chain.vertex_count() {
        return Err(Error::InvalidDistribution(format!(
            "{} entries for {} vertices",
            q.len(),
            chain.vertex_count()
        )));
    }
    Ok(())
}

fn sum_terms(terms: &[Vec<f64>], nv: usize) -> Vec<f64> {
    let mut p = vec![0.0; nv];
    for term in terms {
        for (acc, x) in p.iter_mut().zip(term) {
            *acc += x;
        }
    }
    p
}

/// Series solution of the master equation at time `t` from `q`.
pub fn series_solve(chain: &ChainSpec, q: &Distribution, t: f64, opts: &SeriesOptions) -> Result<SeriesResult> {
    check_initial(chain, q)?;
    chain.check_time(t)?;
    if opts.grid == 0 {
        return Err(Error::InvalidArgument("grid must be at least 1".into()));
    }
    let rate_bound = chain.rate_bound_at(t);
    let degree_bound = chain.degree_bound();
    let truncation =
        choose_truncation_capped(rate_bound, degree_bound, t, opts.epsilon, opts.max_order)?;
    let nv = chain.vertex_count();

    if t == 0.0 {
        let mut terms = vec![q.values().to_vec()];
        terms.extend((0..truncation.order).map(|_| vec![0.0; nv]));
        return Ok(SeriesResult {
            distribution: q.clone(),
            truncation,
            rate_bound,
            degree_bound,
            grid_intervals: 0,
            quadrature_error: Some(0.0),
            order_masses: terms.iter().map(|x| x.iter().sum()).collect(),
            terms: opts.retain_terms.then_some(terms),
        });
    }

    let mut intervals = grid_intervals(opts.grid, t);
    if opts.extrapolate {
        intervals += intervals % 2;
    }
    let grid = Grid::new(chain, t, intervals);
    let mut terms = series_terms(chain, q.values(), &grid, truncation.order);
    let mut quadrature_error = None;
    if opts.extrapolate {
        let coarse = Grid::new(chain, t, intervals / 2);
        let coarse_terms = series_terms(chain, q.values(), &coarse, truncation.order);
        let p_fine = sum_terms(&terms, nv);
        let p_coarse = sum_terms(&coarse_terms, nv);
        quadrature_error = Some(
            p_fine
                .iter()
                .zip(&p_coarse)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                / 3.0,
        );
        for (fine, coarse) in terms.iter_mut().zip(&coarse_terms) {
            for (f, c) in fine.iter_mut().zip(coarse) {
                *f = (*f + (*f - c) / 3.0).max(0.0);
            }
        }
    }
    let p = sum_terms(&terms, nv);

    Ok(SeriesResult {
        distribution: Distribution::from_raw(p),
        truncation,
        rate_bound,
        degree_bound,
        grid_intervals: grid.intervals,
        quadrature_error,
        order_masses: terms.iter().map(|x| x.iter().sum()).collect(),
        terms: opts.retain_terms.then_some(terms),
    })
}

/// Series solution started from the point mass at `v`.
pub fn fundamental_solution(chain: &ChainSpec, v: usize, t: f64, opts: &SeriesOptions) -> Result<SeriesResult> {
    if v >= chain.vertex_count() {
        return Err(Error::UnknownVertex(format!("#{v}")));
    }
    series_solve(chain, &Distribution::delta(chain.vertex_count(), v), t, opts)
}

/// `K(i, j, t)` for every pair of vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorTable {
    pub t: f64,
    /// Row `i` is the distribution at `t` of the walk started at `i`.
    pub values: DMatrix<f64>,
    pub truncation: Truncation,
    /// Worst quadrature estimate over the rows.
    pub quadrature_error: Option<f64>,
}

impl PropagatorTable {
    pub fn get(&self, start: usize, end: usize) -> f64 {
        self.values[(start, end)]
    }

    /// Largest `|Σ_j K(i, j, t) - 1|` over starts `i`.
    pub fn max_row_defect(&self) -> f64 {
        self.values
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

pub fn propagator(chain: &ChainSpec, t: f64, opts: &SeriesOptions) -> Result<PropagatorTable> {
    chain.check_time(t)?;
    let nv = chain.vertex_count();
    let rows = (0..nv)
        .into_par_iter()
        .map(|i| fundamental_solution(chain, i, t, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut values = DMatrix::zeros(nv, nv);
    for (i, row) in rows.iter().enumerate() {
        for j in 0..nv {
            values[(i, j)] = row.distribution.get(j);
        }
    }
    let quadrature_error = rows
        .iter()
        .map(|r| r.quadrature_error)
        .try_fold(0.0, |acc: f64, e| e.map(|e| acc.max(e)));
    let truncation = rows.first().map(|r| r.truncation).unwrap_or(Truncation {
        order: 0,
        tail_bound: 0.0,
        tail_sum: 0.0,
        scale: 0.0,
    });
    Ok(PropagatorTable {
        t,
        values,
        truncation,
        quadrature_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityMethod {
    /// The series recursion at this order, with `grid` intervals per unit time.
    Grid { grid: usize },
    /// Uniform points of the `n`-simplex.
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityIntegral {
    pub value: f64,
    /// Standard error of a Monte Carlo estimate; `None` for the grid.
    pub std_error: Option<f64>,
}

/// Probability of the length-`n` trajectories of duration `t` ending at `terminus`.
pub fn integrate_density(
    chain: &ChainSpec,
    q: &Distribution,
    n: usize,
    terminus: usize,
    t: f64,
    method: DensityMethod,
) -> Result<DensityIntegral> {
    check_initial(chain, q)?;
    chain.check_time(t)?;
    if terminus >= chain.vertex_count() {
        return Err(Error::UnknownVertex(format!("#{terminus}")));
    }
    match method {
        DensityMethod::Grid { grid } => {
            if grid == 0 {
                return Err(Error::InvalidArgument("grid must be at least 1".into()));
            }
            if t == 0.0 {
                let v = if n == 0 { q.get(terminus) } else { 0.0 };
                return Ok(DensityIntegral { value: v, std_error: None });
            }
            let grid = Grid::new(chain, t, grid_intervals(grid, t));
            let terms = series_terms(chain, q.values(), &grid, n);
            Ok(DensityIntegral {
                value: terms[n][terminus],
                std_error: None,
            })
        }
        DensityMethod::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidArgument("samples must be at least 1".into()));
            }
            let paths = chain
                .graph()
                .enumerate_paths(n, PathConstraint::Terminus(terminus))?;
            if n == 0 {
                let value = density_unchecked(chain, q.values(), &paths[0], &[], t);
                return Ok(DensityIntegral {
                    value,
                    std_error: Some(0.0),
                });
            }
            let volume = (1..=n).fold(1.0, |acc, k| acc * t / k as f64);
            let mut rng = Philox4x32::new(seed, 0);
            let mut times = vec![0.0; n];
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..samples {
                for s in times.iter_mut() {
                    *s = rng.next_f64() * t;
                }
                times.sort_by(f64::total_cmp);
                let f: f64 = paths
                    .iter()
                    .map(|p| density_unchecked(chain, q.values(), p, &times, t))
                    .sum();
                sum += f;
                sum_sq += f * f;
            }
            let count = samples as f64;
            let mean = sum / count;
            let var = if samples > 1 {
                ((sum_sq - count * mean * mean) / (count - 1.0)).max(0.0)
            } else {
                0.0
            };
            Ok(DensityIntegral {
                value: volume * mean,
                std_error: Some(volume * (var / count).sqrt()),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{DirectedGraph, UndirectedGraph};
    use crate::master::expm_solution;
    use crate::rates::RateFunction;

    fn two_state(a: f64, b: f64) -> ChainSpec {
        let g = DirectedGraph::new(
            ["1", "2"],
            [
                ("a".into(), "1".into(), "2".into()),
                ("b".into(), "2".into(), "1".into()),
            ],
        )
        .unwrap();
        ChainSpec::new(g, vec![RateFunction::constant(a), RateFunction::constant(b)], 2.0).unwrap()
    }

    fn triangle_chain() -> ChainSpec {
        let x = UndirectedGraph::new(
            ["1", "2", "3"],
            [
                ("a".into(), "1".into(), "2".into()),
                ("b".into(), "2".into(), "3".into()),
                ("c".into(), "3".into(), "1".into()),
            ],
        )
        .unwrap();
        ChainSpec::new(x.double(), vec![RateFunction::constant(1.0); 6], 2.0).unwrap()
    }

    #[test]
    fn escape_rate_examples() {
        let g = DirectedGraph::new(
            ["1", "2", "3"],
            [
                ("a".into(), "1".into(), "2".into()),
                ("b".into(), "1".into(), "3".into()),
            ],
        )
        .unwrap();
        let c = ChainSpec::new(g, vec![RateFunction::constant(1.5), RateFunction::constant(0.5)], 2.0)
            .unwrap();
        assert!((escape_rate(&c, 0, 0.0, 1.0).unwrap() - (-2.0f64).exp()).abs() < 1e-16);
        assert_eq!(escape_rate(&c, 0, 0.4, 0.4).unwrap(), 1.0);
        assert_eq!(escape_rate(&c, 1, 0.0, 2.0).unwrap(), 1.0);
        assert!(matches!(
            escape_rate(&c, 0, 1.0, 0.5),
            Err(Error::ReversedInterval { .. })
        ));
    }

    #[test]
    fn density_examples() {
        let c = two_state(1.0, 1.0);
        let q = Distribution::delta(2, 0);
        let empty = Trajectory::new(Path::trivial(0), vec![], 1.0).unwrap();
        assert!((density(&c, &q, &empty).unwrap() - (-1.0f64).exp()).abs() < 1e-16);
        let one = Trajectory::new(Path::new(c.graph(), 0, vec![0]).unwrap(), vec![0.5], 1.0).unwrap();
        assert!((density(&c, &q, &one).unwrap() - (-1.0f64).exp()).abs() < 1e-16);

        let tri = triangle_chain();
        let q = Distribution::delta(3, 0);
        let path = Path::new(tri.graph(), 0, vec![0, 2, 4]).unwrap();
        let traj = Trajectory::new(path, vec![0.1, 0.35, 0.9], 1.2).unwrap();
        assert!((density(&tri, &q, &traj).unwrap() - (-2.4f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn trajectory_validation() {
        let c = two_state(1.0, 1.0);
        let p = Path::new(c.graph(), 0, vec![0, 1]).unwrap();
        assert!(Trajectory::new(p.clone(), vec![0.5], 1.0).is_err());
        assert!(Trajectory::new(p.clone(), vec![0.6, 0.5], 1.0).is_err());
        assert!(Trajectory::new(p.clone(), vec![0.5, 1.5], 1.0).is_err());
        let ok = Trajectory::new(p, vec![0.5, 0.5], 1.0).unwrap();
        assert_eq!(ok.wait_times(), vec![0.5, 0.0]);
    }

    #[test]
    fn truncation_examples() {
        let z = choose_truncation(0.0, 3, 1.0, 1e-6).unwrap();
        assert_eq!((z.order, z.tail_bound), (0, 0.0));
        // λ = 2: e^2 2^14/14! = 1.39e-6 > 1e-6 >= e^2 2^15/15! = 1.85e-7.
        let t = choose_truncation(2.0, 1, 1.0, 1e-6).unwrap();
        assert_eq!(t.order, 14);
        assert!((t.tail_bound - 1.851566385139695e-7).abs() < 1e-20);
        assert!((t.tail_sum - 2.8604738631477557e-8).abs() < 1e-21);
        let mut last = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12] {
            let t = choose_truncation(1.5, 2, 1.0, eps).unwrap();
            assert!(t.tail_bound <= eps && t.tail_bound < last);
            last = t.tail_bound;
        }
        assert!(matches!(
            choose_truncation_capped(50.0, 4, 1.0, 1e-8, 20),
            Err(Error::EpsilonUnattainable { .. })
        ));
    }

    #[test]
    fn series_zero_rates() {
        let c = two_state(0.0, 0.0);
        let q = Distribution::new(vec![0.3, 0.7]).unwrap();
        let r = series_solve(&c, &q, 1.0, &SeriesOptions::default()).unwrap();
        assert_eq!(r.order(), 0);
        assert_eq!(r.distribution, q);
    }

    #[test]
    fn series_two_state() {
        let c = two_state(1.0, 1.0);
        let q = Distribution::delta(2, 0);
        let r = series_solve(&c, &q, 1.0, &SeriesOptions::default()).unwrap();
        let exact = 0.5 * (1.0 + (-2.0f64).exp());
        assert!((r.distribution.get(0) - exact).abs() < 1e-7);
        assert!(r.tail_bound() <= 1e-8);
        let e = expm_solution(&c, &q, 1.0).unwrap();
        assert!(r.distribution.max_abs_diff(&e) < 1e-7);
    }

    #[test]
    fn series_at_time_zero() {
        let c = triangle_chain();
        let r = fundamental_solution(&c, 2, 0.0, &SeriesOptions::default()).unwrap();
        assert_eq!(r.distribution, Distribution::delta(3, 2));
        let k = propagator(&c, 0.0, &SeriesOptions::default()).unwrap();
        assert_eq!(k.values, DMatrix::identity(3, 3));
    }

    #[test]
    fn grid_is_second_order() {
        let c = two_state(2.0, 0.5);
        let q = Distribution::delta(2, 0);
        let exact = expm_solution(&c, &q, 1.0).unwrap();
        let err = |grid| {
            let opts = SeriesOptions {
                epsilon: 1e-13,
                grid,
                extrapolate: false,
                ..Default::default()
            };
            series_solve(&c, &q, 1.0, &opts)
                .unwrap()
                .distribution
                .max_abs_diff(&exact)
        };
        let ratio = err(64) / err(128);
        assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn density_integral_two_state() {
        let c = two_state(1.0, 1.0);
        let q = Distribution::delta(2, 0);
        let e1 = (-1.0f64).exp();
        let g = integrate_density(&c, &q, 1, 1, 1.0, DensityMethod::Grid { grid: 1024 }).unwrap();
        assert!((g.value - e1).abs() < 1e-12);
        let zero = integrate_density(&c, &q, 0, 0, 1.0, DensityMethod::Grid { grid: 64 }).unwrap();
        assert!((zero.value - e1).abs() < 1e-16);
        let mc = integrate_density(
            &c,
            &q,
            1,
            1,
            1.0,
            DensityMethod::MonteCarlo { samples: 1000, seed: 7 },
        )
        .unwrap();
        assert!((mc.value - e1).abs() < 1e-12);
    }
}
