//! Closed forms for the unit-rate walk on the double of an `r`-regular graph.
//!
//! Every trajectory of duration `t` has density `q_{i_1} e^{-rt}`, so the
//! propagator collapses to the combinatorial heat kernel
//! `K(i, j, t) = e^{-rt} Σ_n π_n(i, j) t^n / n!`, where `π_n` counts paths of
//! length `n`. Writing `φ_n = π_n / r^n` gives the same value as a Poisson
//! expectation `Σ_n φ_n(i, j) P(n)` with `P` the Poisson(`rt`) mass function.

use nalgebra::DMatrix;

use crate::chain::ChainSpec;
use crate::error::{Error, Result};
use crate::graph::UndirectedGraph;
use crate::measure::choose_truncation;
use crate::rates::RateFunction;

#[derive(Debug, Clone, PartialEq)]
pub struct RegularChain {
    graph: UndirectedGraph,
    regularity: usize,
    chain: ChainSpec,
}

impl RegularChain {
    pub fn new(graph: UndirectedGraph, horizon: f64) -> Result<Self> {
        let degrees = graph.degrees();
        let regularity = degrees.first().copied().unwrap_or(0);
        if let Some(v) = degrees.iter().position(|&d| d != regularity) {
            return Err(Error::NotRegular(format!(
                "vertex `{}` meets {} edges, vertex `{}` meets {regularity}",
                graph.vertex_ids()[v],
                degrees[v],
                graph.vertex_ids()[0]
            )));
        }
        let double = graph.double();
        let rates = vec![RateFunction::constant(1.0); double.edge_count()];
        let chain = ChainSpec::new(double, rates, horizon)?;
        Ok(RegularChain {
            graph,
            regularity,
            chain,
        })
    }

    pub fn graph(&self) -> &UndirectedGraph {
        &self.graph
    }

    pub fn regularity(&self) -> usize {
        self.regularity
    }

    /// The unit-rate chain on the double.
    pub fn chain(&self) -> &ChainSpec {
        &self.chain
    }

    fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    /// `π_0, …, π_max` with overflow-checked integer products.
    pub fn path_count_powers(&self, max: usize) -> Result<Vec<Vec<Vec<u64>>>> {
        let n = self.vertex_count();
        let adjacency = self.chain.graph().multi_adjacency();
        let mut identity = vec![vec![0u64; n]; n];
        for (i, row) in identity.iter_mut().enumerate() {
            row[i] = 1;
        }
        let mut out = vec![identity];
        for len in 1..=max {
            let prev = &out[len - 1];
            let mut next = vec![vec![0u64; n]; n];
            for i in 0..n {
                for k in 0..n {
                    if prev[i][k] == 0 {
                        continue;
                    }
                    for j in 0..n {
                        let add = prev[i][k]
                            .checked_mul(adjacency[k][j])
                            .ok_or(Error::Overflow(len))?;
                        next[i][j] = next[i][j].checked_add(add).ok_or(Error::Overflow(len))?;
                    }
                }
            }
            out.push(next);
        }
        Ok(out)
    }

    /// `π_n(i, j)`: the number of length-`n` paths in the double from `i` to `j`.
    pub fn path_counts(&self, n: usize) -> Result<Vec<Vec<u64>>> {
        Ok(self.path_count_powers(n)?.pop().expect("at least π_0"))
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        let n = self.vertex_count();
        if i >= n || j >= n {
            return Err(Error::UnknownVertex(format!("#{}", i.max(j))));
        }
        Ok(())
    }

    /// Heat kernel truncated with the general solver's certificate at
    /// `R = 1`, `D = r`.
    pub fn heat_kernel(&self, i: usize, j: usize, t: f64, epsilon: f64) -> Result<f64> {
        self.check_pair(i, j)?;
        Ok(self.heat_kernel_table(t, epsilon)?[(i, j)])
    }

    pub fn heat_kernel_table(&self, t: f64, epsilon: f64) -> Result<DMatrix<f64>> {
        let r = self.regularity as f64;
        let order = choose_truncation(1.0, self.regularity, t, epsilon)?.order;
        let counts = self.path_count_powers(order)?;
        let n = self.vertex_count();
        let decay = (-r * t).exp();
        let mut table = DMatrix::zeros(n, n);
        let mut weight = 1.0; // t^k / k!
        for (k, pi) in counts.iter().enumerate() {
            if k > 0 {
                weight *= t / k as f64;
            }
            for i in 0..n {
                for j in 0..n {
                    table[(i, j)] += decay * pi[i][j] as f64 * weight;
                }
            }
        }
        Ok(table)
    }

    /// Poisson expectation `Σ_n φ_n(i, j) P(n)` of the discrete-walk
    /// transition probabilities.
    pub fn subordination_expectation(&self, i: usize, j: usize, t: f64, epsilon: f64) -> Result<f64> {
        self.check_pair(i, j)?;
        let r = self.regularity;
        if r == 0 {
            return Ok(if i == j { 1.0 } else { 0.0 });
        }
        let order = choose_truncation(1.0, r, t, epsilon)?.order;
        let counts = self.path_count_powers(order)?;
        let mut steps = 1.0; // r^n
        let mut total = 0.0;
        for (n, pi) in counts.iter().enumerate() {
            if n > 0 {
                steps *= r as f64;
            }
            total += pi[i][j] as f64 / steps * poisson_pmf(r as f64, t, n);
        }
        Ok(total)
    }
}

/// `(rt)^n e^{-rt} / n!`.
pub fn poisson_pmf(r: f64, t: f64, n: usize) -> f64 {
    let lambda = r * t;
    if lambda == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let log_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    (n as f64 * lambda.ln() - lambda - log_fact).exp()
}
