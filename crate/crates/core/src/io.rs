//! JSON chain documents, result serialization and CSV tables.
//!
//! Chain document, version 1:
//!
//! ```json
//! {
//!   "version": 1,
//!   "directed": true,
//!   "vertices": ["1", "2"],
//!   "edges": [
//!     {"id": "a", "source": "1", "target": "2", "rate": {"kind": "constant", "value": 1.0}}
//!   ],
//!   "horizon": 1.0
//! }
//! ```
//!
//! Undirected documents give `endpoints: [i, j]` instead of `source`/`target`
//! and are converted to the double. `rate` applies to both directions unless
//! `forward_rate` (from `endpoints[0]`) and `backward_rate` are given.
//!
//! Floats in result documents are printed with 17 significant digits in
//! exponent form, so identical inputs give byte-identical output.

use serde::{Deserialize, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::chain::{ChainSpec, Distribution};
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, UndirectedGraph};
use crate::rates::RateFunction;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainDocument {
    pub version: u32,
    #[serde(default = "default_directed")]
    pub directed: bool,
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

fn default_directed() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoints: Option<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forward_rate: Option<RateFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backward_rate: Option<RateFunction>,
}

/// A validated document: the chain plus the undirected graph it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedChain {
    pub chain: ChainSpec,
    pub undirected: Option<UndirectedGraph>,
    /// Rates of the undirected edges when every edge uses one `rate` for
    /// both directions.
    pub symmetric_rates: Option<Vec<RateFunction>>,
}

pub fn parse_document(text: &str) -> Result<ChainDocument> {
    serde_json::from_str(text).map_err(|e| {
        Error::schema(
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })
}

/// Parses and validates a chain document. `horizon` is used when the
/// document does not carry one.
pub fn parse_chain(text: &str, horizon: Option<f64>) -> Result<ParsedChain> {
    parse_document(text)?.into_chain(horizon)
}

impl ChainDocument {
    pub fn into_chain(self, fallback_horizon: Option<f64>) -> Result<ParsedChain> {
        if self.version != FORMAT_VERSION {
            return Err(Error::schema(
                "version",
                format!("unsupported version {}, expected {FORMAT_VERSION}", self.version),
            ));
        }
        let horizon = self.horizon.or(fallback_horizon).unwrap_or(1.0);
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::schema("horizon", format!("{horizon} must be positive")));
        }
        {
            let mut seen = std::collections::HashSet::new();
            for (k, v) in self.vertices.iter().enumerate() {
                if !seen.insert(v.as_str()) {
                    return Err(Error::at(
                        format!("vertices[{k}]"),
                        Error::DuplicateId { kind: "vertex", id: v.clone() },
                    ));
                }
            }
        }
        let known = |field: String, v: &str| -> Result<()> {
            if self.vertices.iter().any(|x| x == v) {
                Ok(())
            } else {
                Err(Error::at(field, Error::UnknownVertex(v.to_string())))
            }
        };
        let check_rate = |field: String, rate: &RateFunction| -> Result<()> {
            rate.validate()
                .and_then(|_| rate.check_horizon(horizon))
                .map_err(|e| Error::at(field, e))
        };
        let ids: Vec<String> = self
            .edges
            .iter()
            .enumerate()
            .map(|(k, e)| e.id.clone().unwrap_or_else(|| format!("e{k}")))
            .collect();

        if self.directed {
            let mut triples = Vec::with_capacity(self.edges.len());
            let mut rates = Vec::with_capacity(self.edges.len());
            for (k, e) in self.edges.iter().enumerate() {
                let field = |name: &str| format!("edges[{k}].{name}");
                if e.endpoints.is_some() || e.forward_rate.is_some() || e.backward_rate.is_some() {
                    return Err(Error::schema(
                        format!("edges[{k}]"),
                        "directed edges take `source`, `target` and `rate`",
                    ));
                }
                let source = e
                    .source
                    .as_ref()
                    .ok_or_else(|| Error::schema(field("source"), "missing"))?;
                let target = e
                    .target
                    .as_ref()
                    .ok_or_else(|| Error::schema(field("target"), "missing"))?;
                known(field("source"), source)?;
                known(field("target"), target)?;
                if source == target {
                    return Err(Error::at(
                        format!("edges[{k}]"),
                        Error::LoopEdge { edge: ids[k].clone(), vertex: source.clone() },
                    ));
                }
                let rate = e
                    .rate
                    .clone()
                    .ok_or_else(|| Error::schema(field("rate"), "missing"))?;
                check_rate(field("rate"), &rate)?;
                triples.push((ids[k].clone(), source.clone(), target.clone()));
                rates.push(rate);
            }
            let graph = DirectedGraph::new(self.vertices.iter().cloned(), triples)
                .map_err(|e| Error::at("edges", e))?;
            let chain = ChainSpec::new(graph, rates, horizon)?;
            Ok(ParsedChain {
                chain,
                undirected: None,
                symmetric_rates: None,
            })
        } else {
            let mut triples = Vec::with_capacity(self.edges.len());
            let mut rates = Vec::with_capacity(2 * self.edges.len());
            let mut symmetric = Some(Vec::with_capacity(self.edges.len()));
            for (k, e) in self.edges.iter().enumerate() {
                let field = |name: &str| format!("edges[{k}].{name}");
                if e.source.is_some() || e.target.is_some() {
                    return Err(Error::schema(
                        format!("edges[{k}]"),
                        "undirected edges take `endpoints`",
                    ));
                }
                let [a, b] = e
                    .endpoints
                    .as_ref()
                    .ok_or_else(|| Error::schema(field("endpoints"), "missing"))?;
                known(field("endpoints"), a)?;
                known(field("endpoints"), b)?;
                if a == b {
                    return Err(Error::at(
                        format!("edges[{k}]"),
                        Error::LoopEdge { edge: ids[k].clone(), vertex: a.clone() },
                    ));
                }
                let (forward, backward) = match (&e.rate, &e.forward_rate, &e.backward_rate) {
                    (Some(r), None, None) => {
                        if let Some(s) = symmetric.as_mut() {
                            s.push(r.clone());
                        }
                        (r.clone(), r.clone())
                    }
                    (None, Some(f), Some(b)) => {
                        symmetric = None;
                        (f.clone(), b.clone())
                    }
                    _ => {
                        return Err(Error::schema(
                            format!("edges[{k}]"),
                            "give either `rate` or both `forward_rate` and `backward_rate`",
                        ))
                    }
                };
                check_rate(field("forward_rate"), &forward)?;
                check_rate(field("backward_rate"), &backward)?;
                triples.push((ids[k].clone(), a.clone(), b.clone()));
                rates.push(forward);
                rates.push(backward);
            }
            let x = UndirectedGraph::new(self.vertices.iter().cloned(), triples)
                .map_err(|e| Error::at("edges", e))?;
            let chain = ChainSpec::new(x.double(), rates, horizon)?;
            Ok(ParsedChain {
                chain,
                undirected: Some(x),
                symmetric_rates: symmetric,
            })
        }
    }

    /// Directed document for a chain.
    pub fn from_chain(chain: &ChainSpec) -> Self {
        let g = chain.graph();
        ChainDocument {
            version: FORMAT_VERSION,
            directed: true,
            vertices: g.vertex_ids().to_vec(),
            edges: g
                .edges()
                .iter()
                .zip(chain.rates())
                .map(|(e, rate)| EdgeDocument {
                    id: Some(e.id.clone()),
                    source: Some(g.vertex_id(e.source).to_string()),
                    target: Some(g.vertex_id(e.target).to_string()),
                    rate: Some(rate.clone()),
                    ..EdgeDocument::default()
                })
                .collect(),
            horizon: Some(chain.horizon()),
        }
    }
}

/// Canonical JSON for a chain.
pub fn serialize_chain(chain: &ChainSpec) -> String {
    serde_json::to_string_pretty(&ChainDocument::from_chain(chain)).expect("chain documents serialize")
}

/// SHA-256 of the canonical compact JSON of a chain, hex encoded.
pub fn chain_hash(chain: &ChainSpec) -> String {
    let json = serde_json::to_string(&ChainDocument::from_chain(chain)).expect("chain documents serialize");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// Float printed with 17 significant digits; non-finite values become `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            let raw = serde_json::value::RawValue::from_string(format_real(self.0))
                .map_err(serde::ser::Error::custom)?;
            raw.serialize(s)
        } else {
            s.serialize_none()
        }
    }
}

pub fn reals(xs: &[f64]) -> Vec<Real> {
    xs.iter().copied().map(Real).collect()
}

/// Parses `delta:<vertex>`, `uniform`, `<id>=<p>,...` or a comma list in
/// vertex order.
pub fn parse_initial(spec: &str, chain: &ChainSpec) -> Result<Distribution> {
    let n = chain.vertex_count();
    let spec = spec.trim();
    if let Some(v) = spec.strip_prefix("delta:") {
        let v = chain.graph().vertex_index(v)?;
        return Ok(Distribution::delta(n, v));
    }
    if spec == "uniform" {
        return Ok(Distribution::uniform(n));
    }
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidDistribution(format!("cannot parse `{s}`")))
    };
    if spec.contains('=') {
        let mut values = vec![0.0; n];
        for part in spec.split(',') {
            let (id, p) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidDistribution(format!("expected id=p, got `{part}`")))?;
            values[chain.graph().vertex_index(id.trim())?] = parse(p)?;
        }
        return Distribution::new(values);
    }
    let values = spec.split(',').map(parse).collect::<Result<Vec<_>>>()?;
    if values.len() != n {
        return Err(Error::InvalidDistribution(format!(
            "{} entries for {n} vertices",
            values.len()
        )));
    }
    Distribution::new(values)
}

/// CSV table with header `start,end,t,value`.
pub fn csv_table<'a>(t: f64, rows: impl IntoIterator<Item = (&'a str, &'a str, f64)>) -> String {
    let mut out = String::from("start,end,t,value\n");
    for (start, end, value) in rows {
        out.push_str(&format!("{start},{end},{},{}\n", format_real(t), format_real(value)));
    }
    out
}
