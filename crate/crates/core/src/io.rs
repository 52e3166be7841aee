//! Network and configuration file formats.
//!
//! Network documents are JSON with 1-based ids:
//!
//! ```json
//! {
//!   "n_in": 1,
//!   "n_boundary": 2,
//!   "n_total": 3,
//!   "nodes": [
//!     {"id": 1, "class": "inlet"},
//!     {"id": 2, "class": "outlet"},
//!     {"id": 3, "class": "interior", "length_m": 100.0, "lanes": 1}
//!   ],
//!   "edges": [
//!     [1, 3],
//!     [3, 2]
//!   ]
//! }
//! ```
//!
//! Unknown fields are rejected. [`serialize_network`] writes the canonical
//! layout shown above.

use std::collections::BTreeSet;
use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, NodeSpec, NoirGraph, RoadAttributes, RoadClass};
use crate::sim::SimConfig;

/// Where in the input an error occurred.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Location {
    /// JSON path such as `nodes[3].id`; empty for the document root.
    pub path: String,
    /// 1-based line and column, when the error came from the tokenizer.
    pub line: Option<usize>,
    pub column: Option<usize>,
}

impl Location {
    fn at(path: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            ..Self::default()
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() { "." } else { &self.path };
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{path} (line {l}, column {c})"),
            _ => f.write_str(path),
        }
    }
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON at {location}: {reason}")]
    Syntax { location: Location, reason: String },
    #[error("schema violation at {location}: {reason}")]
    Schema { location: Location, reason: String },
    #[error("graph construction failed: {0}")]
    Graph(#[from] GraphError),
}

impl FormatError {
    pub fn location(&self) -> Option<&Location> {
        match self {
            Self::Syntax { location, .. } | Self::Schema { location, .. } => Some(location),
            Self::Graph(_) => None,
        }
    }

    fn schema(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Schema {
            location: Location::at(path),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: usize,
    pub class: RoadClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lanes: Option<u32>,
}

/// Validated network file contents, nodes sorted by id and edges sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub n_in: usize,
    pub n_boundary: usize,
    pub n_total: usize,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<[usize; 2]>,
}

impl NetworkDocument {
    pub fn from_graph(graph: &NoirGraph) -> Self {
        let nodes = graph
            .nodes()
            .map(|id| {
                let attr = graph.attributes(id).ok().flatten();
                NodeRecord {
                    id: id.get(),
                    class: graph.class(id).expect("node of this graph"),
                    length_m: attr.map(|a| a.length_m),
                    lanes: attr.map(|a| a.lanes),
                }
            })
            .collect();
        let edges = graph.edges().iter().map(|(a, b)| [a.get(), b.get()]).collect();
        Self {
            n_in: graph.n_in(),
            n_boundary: graph.n_boundary(),
            n_total: graph.n_total(),
            nodes,
            edges,
        }
    }

    pub fn to_graph(&self) -> Result<NoirGraph, FormatError> {
        let mut specs = Vec::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.iter().enumerate() {
            let attributes = match (node.length_m, node.lanes) {
                (Some(len), Some(lanes)) => Some(
                    RoadAttributes::new(len, lanes)
                        .map_err(|e| FormatError::schema(format!("nodes[{i}]"), e.to_string()))?,
                ),
                _ => None,
            };
            specs.push(NodeSpec::new(node.class, attributes));
        }
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        Ok(NoirGraph::build(&specs, &edges)?)
    }

    /// Checks the document invariants and sorts nodes and edges.
    fn normalize(mut self) -> Result<Self, FormatError> {
        if self.n_total == 0 {
            return Err(FormatError::schema("n_total", "must be at least 1"));
        }
        if self.n_in > self.n_boundary {
            return Err(FormatError::schema("n_in", "exceeds n_boundary"));
        }
        if self.n_boundary > self.n_total {
            return Err(FormatError::schema("n_boundary", "exceeds n_total"));
        }
        let mut ids = BTreeSet::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id == 0 {
                return Err(FormatError::schema(format!("nodes[{i}].id"), "ids start at 1"));
            }
            if !ids.insert(node.id) {
                return Err(FormatError::schema(
                    format!("nodes[{i}].id"),
                    format!("duplicate id {}", node.id),
                ));
            }
        }
        if let Some(missing) = (1..=self.n_total).find(|id| !ids.contains(id)) {
            return Err(FormatError::schema("nodes", format!("missing id {missing}")));
        }
        if let Some(i) = self.nodes.iter().position(|n| n.id > self.n_total) {
            return Err(FormatError::schema(
                format!("nodes[{i}].id"),
                format!("id {} outside 1..={}", self.nodes[i].id, self.n_total),
            ));
        }

        for (i, node) in self.nodes.iter().enumerate() {
            let expected = if node.id <= self.n_in {
                RoadClass::Inlet
            } else if node.id <= self.n_boundary {
                RoadClass::Outlet
            } else {
                RoadClass::Interior
            };
            if node.class != expected {
                return Err(FormatError::schema(
                    format!("nodes[{i}].class"),
                    format!("id {} must be {expected}, found {}", node.id, node.class),
                ));
            }
            match (node.length_m, node.lanes) {
                (Some(len), Some(lanes)) => {
                    if !(len.is_finite() && len > 0.0) {
                        return Err(FormatError::schema(format!("nodes[{i}].length_m"), "must be positive"));
                    }
                    if lanes == 0 {
                        return Err(FormatError::schema(format!("nodes[{i}].lanes"), "must be positive"));
                    }
                }
                (None, None) if node.class.is_boundary() => {}
                (None, _) => {
                    return Err(FormatError::schema(format!("nodes[{i}].length_m"), "required"));
                }
                (_, None) => {
                    return Err(FormatError::schema(format!("nodes[{i}].lanes"), "required"));
                }
            }
        }

        let mut unique = BTreeSet::new();
        for (i, &[from, to]) in self.edges.iter().enumerate() {
            for (j, id) in [from, to].into_iter().enumerate() {
                if id == 0 || id > self.n_total {
                    return Err(FormatError::schema(
                        format!("edges[{i}][{j}]"),
                        format!("id {id} outside 1..={}", self.n_total),
                    ));
                }
            }
            if from == to {
                return Err(FormatError::schema(format!("edges[{i}]"), format!("self-loop on {from}")));
            }
            if !unique.insert((from, to)) {
                return Err(FormatError::schema(
                    format!("edges[{i}]"),
                    format!("duplicate edge {from} -> {to}"),
                ));
            }
        }

        self.nodes.sort_by_key(|n| n.id);
        self.edges.sort_unstable();
        Ok(self)
    }
}

fn parse_json<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, FormatError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let value = serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        let location = Location {
            path: if path == "." { String::new() } else { path },
            line: Some(inner.line()),
            column: Some(inner.column()),
        };
        let reason = inner.to_string();
        if inner.is_data() {
            FormatError::Schema { location, reason }
        } else {
            FormatError::Syntax { location, reason }
        }
    })?;
    Ok(value)
}

pub fn parse_network(bytes: &[u8]) -> Result<NetworkDocument, FormatError> {
    parse_json::<NetworkDocument>(bytes)?.normalize()
}

/// Canonical bytes: fixed key order, one node and one edge per line.
pub fn serialize_network(doc: &NetworkDocument) -> Vec<u8> {
    let mut nodes: Vec<&NodeRecord> = doc.nodes.iter().collect();
    nodes.sort_by_key(|n| n.id);
    let mut edges = doc.edges.clone();
    edges.sort_unstable();

    let mut out = String::with_capacity(64 * (nodes.len() + edges.len()));
    out.push_str(&format!(
        "{{\n  \"n_in\": {},\n  \"n_boundary\": {},\n  \"n_total\": {},\n  \"nodes\": [",
        doc.n_in, doc.n_boundary, doc.n_total
    ));
    for (i, n) in nodes.iter().enumerate() {
        out.push_str(if i == 0 { "\n    " } else { ",\n    " });
        out.push_str(&format!("{{\"id\": {}, \"class\": \"{}\"", n.id, n.class));
        if let Some(len) = n.length_m {
            out.push_str(", \"length_m\": ");
            out.push_str(&json_number(len));
        }
        if let Some(lanes) = n.lanes {
            out.push_str(&format!(", \"lanes\": {lanes}"));
        }
        out.push('}');
    }
    out.push_str(if nodes.is_empty() { "],\n  \"edges\": [" } else { "\n  ],\n  \"edges\": [" });
    for (i, [a, b]) in edges.iter().enumerate() {
        out.push_str(if i == 0 { "\n    " } else { ",\n    " });
        out.push_str(&format!("[{a}, {b}]"));
    }
    out.push_str(if edges.is_empty() { "]\n}\n" } else { "\n  ]\n}\n" });
    out.into_bytes()
}

fn json_number(v: f64) -> String {
    serde_json::to_string(&v).expect("finite float")
}

pub fn parse_config(bytes: &[u8]) -> Result<SimConfig, FormatError> {
    let cfg: SimConfig = parse_json(bytes)?;
    cfg.validate()
        .map_err(|(path, reason)| FormatError::schema(path, reason))?;
    Ok(cfg)
}

pub fn serialize_config(cfg: &SimConfig) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(cfg).expect("config serializes");
    bytes.push(b'\n');
    bytes
}
