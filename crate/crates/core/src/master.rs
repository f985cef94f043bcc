//! The master operator and two reference solvers for `p' = H(s) p`.
//!
//! Convention: entry `(i, j)` of `H` is the total rate from `j` into `i`, so
//! column `j` holds the out-rates of `j` and sums to zero.

use nalgebra::{DMatrix, DVector};

use crate::chain::{ChainSpec, Distribution};
use crate::error::{Error, Result};

/// Fixed-step RK4 steps per unit time used when no step count is given.
pub const DEFAULT_ODE_STEPS_PER_UNIT: usize = 2048;

pub fn default_ode_steps(t: f64) -> usize {
    ((DEFAULT_ODE_STEPS_PER_UNIT as f64 * t).ceil() as usize).max(1)
}

/// Dense master operator at a fixed time.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterMatrix(DMatrix<f64>);

impl MasterMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Largest absolute column sum.
    pub fn max_column_sum(&self) -> f64 {
        self.0
            .column_iter()
            .map(|c| c.sum().abs())
            .fold(0.0, f64::max)
    }
}

/// Total rate from `source` into `target` at time `s`.
pub fn h_offdiag(chain: &ChainSpec, target: usize, source: usize, s: f64) -> Result<f64> {
    if target == source {
        return Err(Error::InvalidArgument(
            "h_offdiag needs distinct vertices".into(),
        ));
    }
    chain.check_time(s)?;
    let g = chain.graph();
    Ok(g.out_edges(source)
        .iter()
        .filter(|&&e| g.edge(e).target == target)
        .map(|&e| chain.rate(e).at(s))
        .sum())
}

pub fn assemble_h(chain: &ChainSpec, s: f64) -> Result<MasterMatrix> {
    chain.check_time(s)?;
    Ok(MasterMatrix(assemble_unchecked(chain, s)))
}

fn assemble_unchecked(chain: &ChainSpec, s: f64) -> DMatrix<f64> {
    let n = chain.vertex_count();
    let mut h = DMatrix::zeros(n, n);
    for (k, e) in chain.graph().edges().iter().enumerate() {
        let rate = chain.rate(k).at(s);
        h[(e.target, e.source)] += rate;
        h[(e.source, e.source)] -= rate;
    }
    h
}

/// `out = H(s) p`, applied edge by edge, with `H(s-)` when `left` is set.
/// Returns the total jump intensity `Σ_α k_α p_source`.
fn apply_h(chain: &ChainSpec, s: f64, left: bool, p: &[f64], out: &mut [f64]) -> f64 {
    out.iter_mut().for_each(|x| *x = 0.0);
    let mut intensity = 0.0;
    for (k, e) in chain.graph().edges().iter().enumerate() {
        let rate = if left { chain.rate(k).at_left(s) } else { chain.rate(k).at(s) };
        let flow = rate * p[e.source];
        out[e.target] += flow;
        out[e.source] -= flow;
        intensity += flow;
    }
    intensity
}

/// Sorted rate breakpoints in `(0, t)`, merged when closer than `1e-12`.
fn smoothness_breaks(chain: &ChainSpec, t: f64) -> Vec<f64> {
    let mut breaks: Vec<f64> = chain.rates().iter().flat_map(|k| k.breakpoints(t)).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|b, a| *b - *a < 1e-12);
    breaks.retain(|&b| t - b >= 1e-12);
    breaks
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

/// Classical fourth-order Runge–Kutta with about `steps` steps on `[0, t]`.
///
/// Steps are equal within each stretch between rate breakpoints, so a jump
/// in a piecewise-constant rate never falls inside a step.
pub fn solve_ode(chain: &ChainSpec, q: &Distribution, t: f64, steps: usize) -> Result<Distribution> {
    check_initial(chain, q)?;
    chain.check_time(t)?;
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    let (p, _) = rk4(chain, q.values(), t, steps, false);
    Ok(Distribution::from_raw(p))
}

/// Expected number of jumps on `[0, t]`: `∫_0^t Σ_i r_i(s) p_i(s) ds` with
/// `r_i` the total out-rate, integrated alongside the master equation.
pub fn expected_jump_count(chain: &ChainSpec, q: &Distribution, t: f64, steps: usize) -> Result<f64> {
    check_initial(chain, q)?;
    chain.check_time(t)?;
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    Ok(rk4(chain, q.values(), t, steps, true).1)
}

fn rk4(chain: &ChainSpec, q: &[f64], t: f64, steps: usize, count_jumps: bool) -> (Vec<f64>, f64) {
    let n = q.len();
    // State is `p` followed by the accumulated jump count.
    let eval = |s: f64, left: bool, y: &[f64], out: &mut [f64]| {
        let intensity = apply_h(chain, s, left, &y[..n], &mut out[..n]);
        out[n] = if count_jumps { intensity } else { 0.0 };
    };
    let rhs = |s: f64, y: &[f64], out: &mut [f64]| eval(s, false, y, out);
    let rhs_left = |s: f64, y: &[f64], out: &mut [f64]| eval(s, true, y, out);
    let mut y: Vec<f64> = q.iter().copied().chain(std::iter::once(0.0)).collect();
    if t == 0.0 {
        y.truncate(n);
        return (y, 0.0);
    }
    let mut k1 = vec![0.0; n + 1];
    let mut k2 = vec![0.0; n + 1];
    let mut k3 = vec![0.0; n + 1];
    let mut k4 = vec![0.0; n + 1];
    let mut tmp = vec![0.0; n + 1];
    // Rate breakpoints split [0, t] so that no step straddles a jump or kink.
    let mut bounds = vec![0.0];
    bounds.extend(smoothness_breaks(chain, t));
    bounds.push(t);
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        let seg_steps = ((steps as f64 * (b - a) / t).ceil() as usize).max(1);
        let h = (b - a) / seg_steps as f64;
        for step in 0..seg_steps {
            let s = a + step as f64 * h;
            rhs(s, &y, &mut k1);
            for i in 0..=n {
                tmp[i] = y[i] + 0.5 * h * k1[i];
            }
            rhs(s + 0.5 * h, &tmp, &mut k2);
            for i in 0..=n {
                tmp[i] = y[i] + 0.5 * h * k2[i];
            }
            rhs(s + 0.5 * h, &tmp, &mut k3);
            for i in 0..=n {
                tmp[i] = y[i] + h * k3[i];
            }
            // The last stage samples the left limit at the segment end.
            let s_end = if step + 1 == seg_steps { b } else { s + h };
            rhs_left(s_end, &tmp, &mut k4);
            for i in 0..=n {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
    let jumps = y[n];
    y.truncate(n);
    (y, jumps)
}

/// `p(t) = exp(t H) q` for a time-homogeneous chain.
pub fn expm_solution(chain: &ChainSpec, q: &Distribution, t: f64) -> Result<Distribution> {
    check_initial(chain, q)?;
    chain.check_time(t)?;
    if let Some(k) = chain.rates().iter().position(|k| k.constant_value().is_none()) {
        return Err(Error::NotHomogeneous(chain.graph().edge(k).id.clone()));
    }
    let generator = assemble_unchecked(chain, 0.0) * t;
    let p = matrix_exp(&generator) * DVector::from_column_slice(q.values());
    Ok(Distribution::from_raw(p.iter().copied().collect()))
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
///
/// The argument is scaled by `2^-s` until its 1-norm is at most 1/2; the
/// series is then summed until terms drop below `1e-20` relative to the sum.
pub fn matrix_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix_exp needs a square matrix");
    let norm = a
        .column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0;
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as i32;
    }
    let scaled = a / 2f64.powi(squarings);
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=40 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if term.amax() <= 1e-20 * sum.amax() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{DirectedGraph, UndirectedGraph};
    use crate::rates::RateFunction;
    use std::f64::consts::FRAC_PI_2;

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

    /// Closed form for the two-state generator with rates 1→2 = a, 2→1 = b.
    fn two_state_p1(a: f64, b: f64, t: f64) -> f64 {
        b / (a + b) + a / (a + b) * (-(a + b) * t).exp()
    }

    #[test]
    fn offdiag_examples() {
        let g = DirectedGraph::new(
            ["i", "j"],
            [
                ("x".into(), "j".into(), "i".into()),
                ("y".into(), "j".into(), "i".into()),
            ],
        )
        .unwrap();
        let c = ChainSpec::new(g, vec![RateFunction::constant(1.0), RateFunction::constant(2.0)], 1.0)
            .unwrap();
        assert_eq!(h_offdiag(&c, 0, 1, 0.3).unwrap(), 3.0);
        assert_eq!(h_offdiag(&c, 1, 0, 0.3).unwrap(), 0.0);
        assert!(h_offdiag(&c, 0, 0, 0.3).is_err());

        let g = DirectedGraph::new(["1", "2"], [("e".into(), "1".into(), "2".into())]).unwrap();
        let c = ChainSpec::new(g, vec![RateFunction::sinusoid(1.0, 1.0, 1.0, 0.0)], 2.0).unwrap();
        assert!((h_offdiag(&c, 1, 0, FRAC_PI_2).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn assemble_examples() {
        let h = assemble_h(&two_state(1.0, 1.0), 0.0).unwrap();
        assert_eq!(h.matrix(), &DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]));
        let zero = assemble_h(&two_state(0.0, 0.0), 0.5).unwrap();
        assert_eq!(zero.matrix(), &DMatrix::zeros(2, 2));
    }

    #[test]
    fn k2_double_is_negative_laplacian() {
        let x = UndirectedGraph::new(["1", "2"], [("e".into(), "1".into(), "2".into())]).unwrap();
        let c = ChainSpec::new(x.double(), vec![RateFunction::constant(1.0); 2], 1.0).unwrap();
        let h = assemble_h(&c, 0.0).unwrap();
        // Laplacian of K2 is degree minus adjacency.
        let laplacian = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert_eq!(h.matrix(), &(-laplacian));
    }

    #[test]
    fn ode_two_state() {
        let c = two_state(1.0, 1.0);
        let q = Distribution::delta(2, 0);
        assert_eq!(solve_ode(&c, &q, 0.0, 10).unwrap(), q);
        let p = solve_ode(&c, &q, 1.0, 2048).unwrap();
        assert!((p.get(0) - two_state_p1(1.0, 1.0, 1.0)).abs() < 1e-13);
        assert!((p.get(0) - 0.5676676).abs() < 1e-7);
        assert!((p.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ode_fourth_order() {
        let c = two_state(3.0, 1.0);
        let q = Distribution::delta(2, 0);
        let exact = two_state_p1(3.0, 1.0, 2.0);
        let e1 = (solve_ode(&c, &q, 2.0, 16).unwrap().get(0) - exact).abs();
        let e2 = (solve_ode(&c, &q, 2.0, 32).unwrap().get(0) - exact).abs();
        let ratio = e1 / e2;
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn expm_two_state() {
        let c = two_state(1.0, 1.0);
        let q = Distribution::delta(2, 0);
        assert_eq!(expm_solution(&c, &q, 0.0).unwrap(), q);
        let p = expm_solution(&c, &q, 1.0).unwrap();
        assert!((p.get(0) - two_state_p1(1.0, 1.0, 1.0)).abs() < 1e-14);
        assert!((p.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expm_rejects_inhomogeneous() {
        let g = DirectedGraph::new(["1", "2"], [("e".into(), "1".into(), "2".into())]).unwrap();
        let c = ChainSpec::new(g, vec![RateFunction::sinusoid(1.0, 1.0, 1.0, 0.0)], 1.0).unwrap();
        let err = expm_solution(&c, &Distribution::delta(2, 0), 0.5).unwrap_err();
        assert_eq!(err, Error::NotHomogeneous("e".into()));
    }

    #[test]
    fn expected_jumps_two_state() {
        // Symmetric unit rates: one jump per unit time on average.
        let c = two_state(1.0, 1.0);
        let j = expected_jump_count(&c, &Distribution::delta(2, 0), 1.5, 512).unwrap();
        assert!((j - 1.5).abs() < 1e-12);
    }

    #[test]
    fn out_of_horizon() {
        let c = two_state(1.0, 1.0);
        assert!(solve_ode(&c, &Distribution::delta(2, 0), 3.0, 10).is_err());
        assert!(solve_ode(&c, &Distribution::delta(2, 0), 1.0, 0).is_err());
    }
}
