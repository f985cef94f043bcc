//! Markov chains on directed multigraphs and distributions over their vertices.

use crate::error::{Error, Result};
use crate::graph::{DirectedEdge, DirectedGraph};
use crate::rates::RateFunction;

/// Mass tolerance accepted by [`Distribution::new`].
pub const MASS_TOLERANCE: f64 = 1e-9;

/// A directed multigraph with one rate function per edge and a time horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    graph: DirectedGraph,
    rates: Vec<RateFunction>,
    horizon: f64,
}

impl ChainSpec {
    pub fn new(graph: DirectedGraph, rates: Vec<RateFunction>, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "horizon {horizon} must be positive"
            )));
        }
        if rates.len() != graph.edge_count() {
            return Err(Error::InvalidArgument(format!(
                "{} rates for {} edges",
                rates.len(),
                graph.edge_count()
            )));
        }
        for (k, rate) in rates.iter().enumerate() {
            rate.validate()
                .and_then(|_| rate.check_horizon(horizon))
                .map_err(|e| Error::InvalidRate(format!("edge `{}`: {e}", graph.edge(k).id)))?;
        }
        Ok(ChainSpec {
            graph,
            rates,
            horizon,
        })
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn rates(&self) -> &[RateFunction] {
        &self.rates
    }

    pub fn rate(&self, edge: usize) -> &RateFunction {
        &self.rates[edge]
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    /// Same chain with a different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        ChainSpec::new(self.graph.clone(), self.rates.clone(), horizon)
    }

    pub fn check_time(&self, s: f64) -> Result<()> {
        if s.is_finite() && (0.0..=self.horizon).contains(&s) {
            Ok(())
        } else {
            Err(Error::OutOfHorizon {
                time: s,
                horizon: self.horizon,
            })
        }
    }

    pub fn check_interval(&self, a: f64, b: f64) -> Result<()> {
        if a > b {
            return Err(Error::ReversedInterval { a, b });
        }
        self.check_time(a)?;
        self.check_time(b)
    }

    /// Rate bound `R` over `[0, t]`: the largest supremum of any edge rate.
    pub fn rate_bound_at(&self, t: f64) -> f64 {
        self.rates
            .iter()
            .map(|k| k.rate_bound(t))
            .fold(0.0, f64::max)
    }

    /// Rate bound over the whole horizon.
    pub fn rate_bound(&self) -> f64 {
        self.rate_bound_at(self.horizon)
    }

    /// Degree bound `D = max(in-degree, out-degree)`.
    pub fn degree_bound(&self) -> usize {
        self.graph.degree_stats().bound
    }

    pub fn is_homogeneous(&self) -> bool {
        self.rates.iter().all(|k| k.constant_value().is_some())
    }

    pub fn has_tabulated_rates(&self) -> bool {
        self.rates.iter().any(RateFunction::is_tabulated)
    }

    /// Sum of the suprema of the rates leaving `v` over `[0, t]`.
    pub fn out_rate_bound(&self, v: usize, t: f64) -> f64 {
        self.graph
            .out_edges(v)
            .iter()
            .map(|&e| self.rates[e].rate_bound(t))
            .sum()
    }

    /// Cumulative out-hazard of `v` over `[a, b]` (unchecked).
    pub(crate) fn out_hazard(&self, v: usize, a: f64, b: f64) -> f64 {
        self.graph
            .out_edges(v)
            .iter()
            .map(|&e| self.rates[e].integral(a, b))
            .sum()
    }

    /// Embeds the chain into the double of its underlying graph.
    ///
    /// Every edge `i → j` is paired with an unpaired edge `j → i` when one
    /// exists (first match in declaration order); each edge left unpaired
    /// gains a reversal `<id>~rev` with rate identically zero, appended after
    /// the original edges. A chain that is already a double is returned as is.
    pub fn embed_in_double(&self) -> Result<ChainSpec> {
        let edges = self.graph.edges();
        let mut partner: Vec<Option<usize>> = vec![None; edges.len()];
        for a in 0..edges.len() {
            if partner[a].is_some() {
                continue;
            }
            let found = (a + 1..edges.len()).find(|&b| {
                partner[b].is_none()
                    && edges[b].source == edges[a].target
                    && edges[b].target == edges[a].source
            });
            if let Some(b) = found {
                partner[a] = Some(b);
                partner[b] = Some(a);
            }
        }
        let mut extra = Vec::new();
        let mut rates = self.rates.clone();
        for (a, e) in edges.iter().enumerate() {
            if partner[a].is_none() {
                extra.push(DirectedEdge {
                    id: format!("{}~rev", e.id),
                    source: e.target,
                    target: e.source,
                });
                rates.push(RateFunction::constant(0.0));
            }
        }
        let graph = self.graph.with_extra_edges(extra)?;
        ChainSpec::new(graph, rates, self.horizon)
    }
}

/// A probability vector over the vertices, indexed in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    /// Validated constructor: entries finite and nonnegative, mass 1 within
    /// [`MASS_TOLERANCE`].
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDistribution("no entries".into()));
        }
        if let Some((k, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidDistribution(format!("entry {k} = {v}")));
        }
        let mass: f64 = values.iter().sum();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("total mass {mass}")));
        }
        Ok(Distribution(values))
    }

    /// Wraps solver output without validation; entries may carry round-off.
    pub fn from_raw(values: Vec<f64>) -> Self {
        Distribution(values)
    }

    pub fn delta(len: usize, v: usize) -> Self {
        let mut values = vec![0.0; len];
        values[v] = 1.0;
        Distribution(values)
    }

    pub fn uniform(len: usize) -> Self {
        Distribution(vec![1.0 / len as f64; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn get(&self, v: usize) -> f64 {
        self.0[v]
    }

    pub fn mass(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Entries with round-off negatives replaced by zero, for reporting.
    pub fn clamped(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.clamp(0.0, 1.0)).collect()
    }

    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn total_variation(&self, other: &Distribution) -> f64 {
        0.5 * self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_edge(rate: f64) -> ChainSpec {
        let g = DirectedGraph::new(["1", "2"], [("e".into(), "1".into(), "2".into())]).unwrap();
        ChainSpec::new(g, vec![RateFunction::constant(rate)], 1.0).unwrap()
    }

    #[test]
    fn embed_single_edge() {
        let d = one_edge(1.0).embed_in_double().unwrap();
        assert_eq!(d.graph().edge_count(), 2);
        assert_eq!(d.rate(0).constant_value(), Some(1.0));
        assert_eq!(d.rate(1).constant_value(), Some(0.0));
        assert_eq!(d.graph().edge(1).id, "e~rev");
        assert_eq!((d.graph().edge(1).source, d.graph().edge(1).target), (1, 0));
    }

    #[test]
    fn embed_is_identity_on_doubles() {
        let x = crate::graph::UndirectedGraph::new(
            ["1", "2", "3"],
            [
                ("a".into(), "1".into(), "2".into()),
                ("b".into(), "2".into(), "3".into()),
            ],
        )
        .unwrap();
        let rates = vec![
            RateFunction::constant(1.0),
            RateFunction::constant(2.0),
            RateFunction::constant(0.5),
            RateFunction::constant(3.0),
        ];
        let chain = ChainSpec::new(x.double(), rates, 1.0).unwrap();
        assert_eq!(chain.embed_in_double().unwrap(), chain);
    }

    #[test]
    fn bounds() {
        let c = one_edge(1.5);
        assert_eq!(c.rate_bound(), 1.5);
        assert_eq!(c.degree_bound(), 1);
        assert!(c.is_homogeneous());
    }

    #[test]
    fn chain_validation() {
        let g = DirectedGraph::new(["1", "2"], [("e".into(), "1".into(), "2".into())]).unwrap();
        assert!(ChainSpec::new(g.clone(), vec![], 1.0).is_err());
        assert!(ChainSpec::new(g.clone(), vec![RateFunction::constant(1.0)], 0.0).is_err());
        let short = RateFunction::Tabulated {
            horizon: 0.5,
            values: vec![1.0, 1.0],
        };
        assert!(ChainSpec::new(g, vec![short], 1.0).is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![0.5, 0.5]).is_ok());
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![-0.1, 1.1]).is_err());
        assert!(Distribution::new(vec![]).is_err());
        let d = Distribution::delta(3, 1);
        assert_eq!(d.values(), &[0.0, 1.0, 0.0]);
        let u = Distribution::uniform(4);
        assert!((u.total_variation(&Distribution::delta(4, 1)) - 0.75).abs() < 1e-15);
    }
}
