//! Exact trajectory sampling by thinning.
//!
//! At vertex `i` candidate event times come from a Poisson clock with the
//! constant majorant `λ_i = Σ_{α out of i} sup_{[0,t]} k_α`. A candidate at
//! time `s` is accepted with probability `r_i(s) / λ_i`, where `r_i` is the
//! total out-rate, and the edge is then chosen with probability
//! `k_α(s) / r_i(s)`. For constant rates every candidate is accepted and the
//! scheme reduces to competing exponentials.
//!
//! Trajectory `k` of a batch draws from Philox substream `k` of the batch
//! seed, so a batch is identical however the work is split across threads.

use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::chain::{ChainSpec, Distribution};
use crate::error::{Error, Result};
use crate::graph::Path;
use crate::master::{default_ode_steps, expected_jump_count};
use crate::measure::{density_unchecked, Trajectory};
use crate::rng::Philox4x32;

fn draw_index(weights: impl Iterator<Item = f64>, total: f64, u: f64) -> Option<usize> {
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (k, w) in weights.enumerate() {
        if w > 0.0 {
            last_positive = Some(k);
        }
        acc += w;
        if target < acc {
            return Some(k);
        }
    }
    // Round-off can leave `target` just past the running sum.
    last_positive
}

/// Per-vertex majorants `λ_i` over `[0, t]`.
fn majorants(chain: &ChainSpec, t: f64) -> Vec<f64> {
    (0..chain.vertex_count())
        .map(|v| chain.out_rate_bound(v, t))
        .collect()
}

fn sample_with(
    chain: &ChainSpec,
    q: &Distribution,
    t: f64,
    majorant: &[f64],
    rng: &mut Philox4x32,
) -> Trajectory {
    let g = chain.graph();
    let start = draw_index(q.values().iter().copied(), q.mass(), rng.next_f64())
        .expect("initial distribution has positive mass");
    let mut at = start;
    let mut s = 0.0;
    let mut edges = Vec::new();
    let mut times = Vec::new();
    loop {
        let lambda = majorant[at];
        if lambda <= 0.0 {
            break;
        }
        s += rng.exponential(lambda);
        if s > t {
            break;
        }
        let out = g.out_edges(at);
        let total: f64 = out.iter().map(|&e| chain.rate(e).at(s)).sum();
        if rng.next_f64() * lambda >= total {
            continue;
        }
        let pick = draw_index(out.iter().map(|&e| chain.rate(e).at(s)), total, rng.next_f64());
        let Some(pick) = pick else { continue };
        let e = out[pick];
        edges.push(e);
        times.push(s);
        at = g.edge(e).target;
    }
    let path = Path::new(g, start, edges).expect("sampled edges are contiguous");
    Trajectory::new(path, times, t).expect("sampled times are ordered")
}

fn check_inputs(chain: &ChainSpec, q: &Distribution, t: f64) -> Result<()> {
    chain.check_time(t)?;
    if q.len() != chain.vertex_count() {
        return Err(Error::InvalidDistribution(format!(
            "{} entries for {} vertices",
            q.len(),
            chain.vertex_count()
        )));
    }
    if q.mass().is_nan() || q.mass() <= 0.0 {
        return Err(Error::InvalidDistribution("zero mass".into()));
    }
    Ok(())
}

/// One trajectory of duration `t`, drawing from `rng`.
pub fn sample_trajectory(
    chain: &ChainSpec,
    q: &Distribution,
    t: f64,
    rng: &mut Philox4x32,
) -> Result<Trajectory> {
    check_inputs(chain, q, t)?;
    Ok(sample_with(chain, q, t, &majorants(chain, t), rng))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub seed: u64,
    pub duration: f64,
    pub trajectories: Vec<Trajectory>,
    /// Count of trajectories ending at each vertex.
    pub terminal_histogram: Vec<usize>,
    /// `jump_histogram[n]` counts trajectories with `n` jumps.
    pub jump_histogram: Vec<usize>,
}

impl SampleBatch {
    pub fn count(&self) -> usize {
        self.trajectories.len()
    }

    fn from_trajectories(seed: u64, duration: f64, vertices: usize, trajectories: Vec<Trajectory>) -> Self {
        let mut terminal_histogram = vec![0; vertices];
        let mut jump_histogram = Vec::new();
        for tr in &trajectories {
            terminal_histogram[tr.terminus()] += 1;
            if jump_histogram.len() <= tr.len() {
                jump_histogram.resize(tr.len() + 1, 0);
            }
            jump_histogram[tr.len()] += 1;
        }
        SampleBatch {
            seed,
            duration,
            trajectories,
            terminal_histogram,
            jump_histogram,
        }
    }
}

/// `count` trajectories; trajectory `k` uses substream `k` of `seed`.
pub fn sample_batch(
    chain: &ChainSpec,
    q: &Distribution,
    t: f64,
    count: usize,
    seed: u64,
) -> Result<SampleBatch> {
    check_inputs(chain, q, t)?;
    let majorant = majorants(chain, t);
    let trajectories: Vec<Trajectory> = (0..count as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = Philox4x32::new(seed, k);
            sample_with(chain, q, t, &majorant, &mut rng)
        })
        .collect();
    Ok(SampleBatch::from_trajectories(
        seed,
        t,
        chain.vertex_count(),
        trajectories,
    ))
}

/// Terminal-vertex frequencies of a batch.
pub fn empirical_distribution(batch: &SampleBatch) -> Result<Distribution> {
    if batch.count() == 0 {
        return Err(Error::EmptyBatch);
    }
    let n = batch.count() as f64;
    Ok(Distribution::from_raw(
        batch
            .terminal_histogram
            .iter()
            .map(|&c| c as f64 / n)
            .collect(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    pub count: usize,
    pub min_density: f64,
    pub max_density: f64,
    pub mean_jumps: f64,
    /// `∫_0^t Σ_i r_i(s) p_i(s) ds` from the master equation.
    pub expected_jumps: f64,
}

/// Evaluates the density on every sampled trajectory. A zero density means
/// the sampler produced a trajectory the measure does not charge.
pub fn log_density_check(chain: &ChainSpec, q: &Distribution, batch: &SampleBatch) -> Result<DensityReport> {
    if batch.count() == 0 {
        return Err(Error::EmptyBatch);
    }
    check_inputs(chain, q, batch.duration)?;
    let densities: Vec<f64> = batch
        .trajectories
        .par_iter()
        .map(|tr| density_unchecked(chain, q.values(), tr.path(), tr.jump_times(), tr.duration()))
        .collect();
    if let Some(index) = densities.iter().position(|&f| f.is_nan() || f <= 0.0) {
        return Err(Error::DensityMismatch { index });
    }
    let total_jumps: usize = batch.trajectories.iter().map(Trajectory::len).sum();
    Ok(DensityReport {
        count: batch.count(),
        min_density: densities.iter().copied().fold(f64::INFINITY, f64::min),
        max_density: densities.iter().copied().fold(0.0, f64::max),
        mean_jumps: total_jumps as f64 / batch.count() as f64,
        expected_jumps: expected_jump_count(chain, q, batch.duration, default_ode_steps(batch.duration))?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Pearson chi-square of observed counts against expected probabilities.
///
/// Cells are merged from the right until each expected count is at least 5;
/// the final cell absorbs the upper tail `1 - Σ probs`.
pub fn chi_square(observed: &[usize], probabilities: &[f64]) -> Result<ChiSquareTest> {
    let total: usize = observed.iter().sum();
    if total == 0 {
        return Err(Error::EmptyBatch);
    }
    let n = total as f64;
    let len = observed.len().max(probabilities.len());
    let obs = |k: usize| observed.get(k).copied().unwrap_or(0) as f64;
    let prob = |k: usize| probabilities.get(k).copied().unwrap_or(0.0);
    // Build cells left to right, each closed once its expectation reaches 5.
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for k in 0..len {
        o += obs(k);
        e += n * prob(k);
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    let tail = (1.0 - probabilities.iter().sum::<f64>()).max(0.0);
    o += 0.0;
    e += n * tail;
    match cells.last_mut() {
        Some(last) if e < 5.0 => {
            last.0 += o;
            last.1 += e;
        }
        _ => cells.push((o, e)),
    }
    if cells.len() < 2 {
        return Err(Error::InvalidArgument(
            "chi-square needs at least two cells".into(),
        ));
    }
    let statistic: f64 = cells
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = cells.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(ChiSquareTest {
        statistic,
        degrees_of_freedom: dof,
        p_value: 1.0 - dist.cdf(statistic),
    })
}
