#![allow(dead_code)]

use std::f64::consts::PI;

use pathmeasure::{ChainSpec, DirectedGraph, Distribution, RateFunction, UndirectedGraph};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub const MAX_VERTICES: usize = 8;
pub const MAX_DEGREE: usize = 4;
pub const MAX_RATE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateFamily {
    Constant,
    Sinusoid,
    /// Every rate kind, chosen per edge.
    Mixed,
}

fn random_rate(rng: &mut StdRng, family: RateFamily, horizon: f64) -> RateFunction {
    let family = match family {
        RateFamily::Mixed => match rng.random_range(0..5) {
            0 => RateFamily::Constant,
            1 => RateFamily::Sinusoid,
            2 => {
                let values = (0..3).map(|_| rng.random_range(0.0..MAX_RATE)).collect();
                let mut breakpoints = vec![0.0, rng.random_range(0.1..0.5), rng.random_range(0.5..0.9)];
                breakpoints.iter_mut().for_each(|b| *b *= horizon);
                return RateFunction::PiecewiseConstant { breakpoints, values };
            }
            3 => {
                let values = (0..3).map(|_| rng.random_range(0.0..MAX_RATE)).collect();
                let knots = vec![0.0, 0.4 * horizon, 0.8 * horizon];
                return RateFunction::PiecewiseLinear { knots, values };
            }
            _ => {
                let values = (0..9).map(|_| rng.random_range(0.0..MAX_RATE)).collect();
                return RateFunction::Tabulated { horizon, values };
            }
        },
        f => f,
    };
    match family {
        RateFamily::Constant => RateFunction::constant(rng.random_range(0.05..MAX_RATE)),
        _ => {
            let offset: f64 = rng.random_range(0.2..1.2);
            let amplitude = rng.random_range(0.0..offset.min(MAX_RATE - offset));
            RateFunction::sinusoid(
                offset,
                amplitude,
                rng.random_range(0.5..8.0),
                rng.random_range(0.0..2.0 * PI),
            )
        }
    }
}

/// Random chain with at most 8 vertices, in- and out-degree at most 4 and
/// rates bounded by 2.
pub fn random_chain(seed: u64, family: RateFamily, horizon: f64) -> ChainSpec {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = rng.random_range(2..=MAX_VERTICES);
    let attempts = rng.random_range(n..=3 * n);
    let mut in_deg = vec![0; n];
    let mut out_deg = vec![0; n];
    let mut edges = Vec::new();
    for _ in 0..attempts {
        let s = rng.random_range(0..n);
        let t = rng.random_range(0..n);
        if s == t || out_deg[s] == MAX_DEGREE || in_deg[t] == MAX_DEGREE {
            continue;
        }
        out_deg[s] += 1;
        in_deg[t] += 1;
        edges.push((format!("e{}", edges.len()), format!("v{s}"), format!("v{t}")));
    }
    let rates = (0..edges.len())
        .map(|_| random_rate(&mut rng, family, horizon))
        .collect();
    let graph = DirectedGraph::new((0..n).map(|v| format!("v{v}")), edges).unwrap();
    ChainSpec::new(graph, rates, horizon).unwrap()
}

pub fn random_distribution(seed: u64, n: usize) -> Distribution {
    let mut rng = StdRng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let total: f64 = raw.iter().sum();
    Distribution::new(raw.into_iter().map(|x| x / total).collect()).unwrap()
}

pub fn undirected(vertices: &[&str], edges: &[(&str, &str)]) -> UndirectedGraph {
    UndirectedGraph::new(
        vertices.iter().copied(),
        edges
            .iter()
            .enumerate()
            .map(|(k, (a, b))| (format!("e{k}"), a.to_string(), b.to_string())),
    )
    .unwrap()
}

pub fn k2() -> UndirectedGraph {
    undirected(&["1", "2"], &[("1", "2")])
}

pub fn triangle() -> UndirectedGraph {
    undirected(&["1", "2", "3"], &[("1", "2"), ("2", "3"), ("3", "1")])
}

pub fn cube() -> UndirectedGraph {
    let ids: Vec<String> = (0..8).map(|v| v.to_string()).collect();
    let mut edges = Vec::new();
    for v in 0..8usize {
        for bit in 0..3 {
            let w = v ^ (1 << bit);
            if v < w {
                edges.push((format!("e{v}-{w}"), v.to_string(), w.to_string()));
            }
        }
    }
    UndirectedGraph::new(ids, edges).unwrap()
}

/// The double of `x` with every rate equal to `rate`.
pub fn constant_double(x: &UndirectedGraph, rate: f64, horizon: f64) -> ChainSpec {
    let g = x.double();
    let rates = vec![RateFunction::constant(rate); g.edge_count()];
    ChainSpec::new(g, rates, horizon).unwrap()
}

/// Two states joined in both directions with unit rates.
pub fn two_state() -> ChainSpec {
    constant_double(&k2(), 1.0, 1.0)
}
