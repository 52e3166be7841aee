//! Directed-graph representation of a network of interconnected roads.
//!
//! Every node is a unidirectional road element. Nodes are classified as
//! inlets, outlets or interior roads and follow a canonical ordering: ids
//! `1..=n_in` are inlets, `n_in+1..=n_boundary` are outlets and the rest are
//! interior roads. Ids are 1-based at every public boundary.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default vehicle length (meters) used to derive road capacities.
pub const DEFAULT_VEHICLE_LENGTH_M: f64 = 4.5;

/// 1-based road element identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn get(self) -> usize {
        self.0
    }

    fn index(self) -> usize {
        self.0 - 1
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoadClass {
    Inlet,
    Outlet,
    Interior,
}

impl RoadClass {
    pub fn as_str(self) -> &'static str {
        match self {
            RoadClass::Inlet => "inlet",
            RoadClass::Outlet => "outlet",
            RoadClass::Interior => "interior",
        }
    }

    pub fn is_boundary(self) -> bool {
        !matches!(self, RoadClass::Interior)
    }
}

impl fmt::Display for RoadClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Physical attributes of a road element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadAttributes {
    pub length_m: f64,
    pub lanes: u32,
}

impl RoadAttributes {
    pub fn new(length_m: f64, lanes: u32) -> Result<Self, GraphError> {
        let attr = Self { length_m, lanes };
        attr.check()?;
        Ok(attr)
    }

    fn check(&self) -> Result<(), GraphError> {
        if !(self.length_m.is_finite() && self.length_m > 0.0) {
            return Err(GraphError::NonPositive {
                what: "length_m",
                value: self.length_m,
            });
        }
        if self.lanes == 0 {
            return Err(GraphError::NonPositive {
                what: "lanes",
                value: 0.0,
            });
        }
        Ok(())
    }

    /// Vehicle capacity of the road, see [`compute_capacity`].
    pub fn capacity(&self, vehicle_length_m: f64) -> Result<f64, GraphError> {
        compute_capacity(self, vehicle_length_m)
    }
}

/// Maximum number of vehicles a road can hold: `lanes * length / vehicle_length`.
///
/// The result is kept real-valued; densities are expectations, not counts.
pub fn compute_capacity(attr: &RoadAttributes, vehicle_length_m: f64) -> Result<f64, GraphError> {
    attr.check()?;
    if !(vehicle_length_m.is_finite() && vehicle_length_m > 0.0) {
        return Err(GraphError::NonPositive {
            what: "vehicle_length_m",
            value: vehicle_length_m,
        });
    }
    Ok(f64::from(attr.lanes) * attr.length_m / vehicle_length_m)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("graph has no nodes")]
    Empty,
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(NodeId, NodeId),
    #[error("node {node} out of range 1..={n_total}")]
    OutOfRange { node: NodeId, n_total: usize },
    #[error("node {node} is {class} but follows a {previous} node; expected inlets, then outlets, then interior roads")]
    ClassOrdering {
        node: NodeId,
        class: RoadClass,
        previous: RoadClass,
    },
    #[error("interior node {0} has no road attributes")]
    MissingAttributes(NodeId),
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("invalid attributes on node {node}: {source}")]
    InvalidAttributes {
        node: NodeId,
        #[source]
        source: Box<GraphError>,
    },
}

/// A node as supplied to [`NoirGraph::build`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSpec {
    pub class: RoadClass,
    pub attributes: Option<RoadAttributes>,
}

impl NodeSpec {
    pub fn new(class: RoadClass, attributes: Option<RoadAttributes>) -> Self {
        Self { class, attributes }
    }

    pub fn boundary(class: RoadClass) -> Self {
        Self {
            class,
            attributes: None,
        }
    }

    pub fn interior(length_m: f64, lanes: u32) -> Self {
        Self {
            class: RoadClass::Interior,
            attributes: Some(RoadAttributes { length_m, lanes }),
        }
    }
}

/// Immutable network of interconnected roads.
#[derive(Debug, Clone, PartialEq)]
pub struct NoirGraph {
    classes: Vec<RoadClass>,
    attributes: Vec<Option<RoadAttributes>>,
    n_in: usize,
    n_boundary: usize,
    edges: Vec<(NodeId, NodeId)>,
    in_adj: Vec<Vec<NodeId>>,
    out_adj: Vec<Vec<NodeId>>,
}

impl NoirGraph {
    /// Builds the graph and its neighbor sets.
    ///
    /// Node `k` of `nodes` receives id `k + 1`. Edges are stored sorted.
    pub fn build(nodes: &[NodeSpec], edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let n_total = nodes.len();
        if n_total == 0 {
            return Err(GraphError::Empty);
        }

        let mut previous = RoadClass::Inlet;
        for (k, spec) in nodes.iter().enumerate() {
            let node = NodeId(k + 1);
            if spec.class < previous {
                return Err(GraphError::ClassOrdering {
                    node,
                    class: spec.class,
                    previous,
                });
            }
            previous = spec.class;
            match (&spec.attributes, spec.class) {
                (None, RoadClass::Interior) => return Err(GraphError::MissingAttributes(node)),
                (Some(attr), _) => attr.check().map_err(|e| GraphError::InvalidAttributes {
                    node,
                    source: Box::new(e),
                })?,
                (None, _) => {}
            }
        }
        let n_in = nodes
            .iter()
            .take_while(|s| s.class == RoadClass::Inlet)
            .count();
        let n_boundary = nodes.iter().take_while(|s| s.class.is_boundary()).count();

        let mut sorted = Vec::with_capacity(edges.len());
        for &(from, to) in edges {
            for id in [from, to] {
                if id == 0 || id > n_total {
                    return Err(GraphError::OutOfRange {
                        node: NodeId(id),
                        n_total,
                    });
                }
            }
            if from == to {
                return Err(GraphError::SelfLoop(NodeId(from)));
            }
            sorted.push((NodeId(from), NodeId(to)));
        }
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateEdge(w[0].0, w[0].1));
        }

        let mut in_adj = vec![Vec::new(); n_total];
        let mut out_adj = vec![Vec::new(); n_total];
        for &(from, to) in &sorted {
            out_adj[from.index()].push(to);
            in_adj[to.index()].push(from);
        }
        // out_adj is sorted by construction; in_adj needs a pass.
        for list in &mut in_adj {
            list.sort_unstable();
        }

        Ok(Self {
            classes: nodes.iter().map(|s| s.class).collect(),
            attributes: nodes.iter().map(|s| s.attributes).collect(),
            n_in,
            n_boundary,
            edges: sorted,
            in_adj,
            out_adj,
        })
    }

    pub fn n_total(&self) -> usize {
        self.classes.len()
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    /// Number of outlet roads.
    pub fn n_out(&self) -> usize {
        self.n_boundary - self.n_in
    }

    /// Inlets plus outlets; also the highest boundary id.
    pub fn n_boundary(&self) -> usize {
        self.n_boundary
    }

    pub fn n_interior(&self) -> usize {
        self.n_total() - self.n_boundary
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (1..=self.n_total()).map(NodeId)
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (self.n_boundary + 1..=self.n_total()).map(NodeId)
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.0 >= 1 && node.0 <= self.n_total()
    }

    fn checked(&self, node: NodeId) -> Result<usize, GraphError> {
        if self.contains(node) {
            Ok(node.index())
        } else {
            Err(GraphError::OutOfRange {
                node,
                n_total: self.n_total(),
            })
        }
    }

    pub fn class(&self, node: NodeId) -> Result<RoadClass, GraphError> {
        Ok(self.classes[self.checked(node)?])
    }

    pub fn attributes(&self, node: NodeId) -> Result<Option<RoadAttributes>, GraphError> {
        Ok(self.attributes[self.checked(node)?])
    }

    /// In-neighbors `{j : (j, i) ∈ E}`, sorted ascending.
    pub fn in_neighbors(&self, node: NodeId) -> Result<&[NodeId], GraphError> {
        Ok(&self.in_adj[self.checked(node)?])
    }

    /// Out-neighbors `{j : (i, j) ∈ E}`, sorted ascending.
    pub fn out_neighbors(&self, node: NodeId) -> Result<&[NodeId], GraphError> {
        Ok(&self.out_adj[self.checked(node)?])
    }

    /// Position of an interior node in the state vector (0-based).
    pub fn interior_index(&self, node: NodeId) -> Option<usize> {
        (self.contains(node) && node.0 > self.n_boundary).then(|| node.0 - self.n_boundary - 1)
    }

    /// Inverse of [`NoirGraph::interior_index`].
    pub fn interior_node(&self, index: usize) -> NodeId {
        NodeId(self.n_boundary + index + 1)
    }

    pub(crate) fn class_at(&self, index: usize) -> RoadClass {
        self.classes[index]
    }

    pub(crate) fn out_at(&self, index: usize) -> &[NodeId] {
        &self.out_adj[index]
    }

    pub(crate) fn in_at(&self, index: usize) -> &[NodeId] {
        &self.in_adj[index]
    }

    /// True if the interior node has at least one outlet among its out-neighbors.
    pub fn feeds_outlet(&self, node: NodeId) -> bool {
        self.contains(node)
            && self.out_adj[node.index()]
                .iter()
                .any(|j| self.classes[j.index()] == RoadClass::Outlet)
    }

    /// Capacities of the interior roads in state order.
    pub fn interior_capacities(&self, vehicle_length_m: f64) -> Result<Vec<f64>, GraphError> {
        self.interior_nodes()
            .map(|node| {
                let attr = self.attributes[node.index()].ok_or(GraphError::MissingAttributes(node))?;
                compute_capacity(&attr, vehicle_length_m)
            })
            .collect()
    }

    /// Checks the structural assumptions under which the density dynamics are
    /// BIBO stable.
    pub fn validate(&self) -> ValidationReport {
        let mut inlets_feed_interior = Vec::new();
        let mut no_inlet_outlet_edge = Vec::new();
        for k in 0..self.n_in {
            let outs = &self.out_adj[k];
            if outs.is_empty() || outs.iter().any(|j| self.classes[j.index()] != RoadClass::Interior) {
                inlets_feed_interior.push(NodeId(k + 1));
            }
            if outs.iter().any(|j| self.classes[j.index()] == RoadClass::Outlet) {
                no_inlet_outlet_edge.push(NodeId(k + 1));
            }
        }

        let reaches = self.reaches_outlet();
        let interior_reaches_outlet = self
            .interior_nodes()
            .filter(|n| !reaches[n.index()])
            .collect();

        let no_isolated_nodes = self
            .nodes()
            .filter(|n| self.in_adj[n.index()].is_empty() && self.out_adj[n.index()].is_empty())
            .collect();

        let boundary_orientation = self
            .nodes()
            .filter(|n| match self.classes[n.index()] {
                RoadClass::Inlet => !self.in_adj[n.index()].is_empty(),
                RoadClass::Outlet => !self.out_adj[n.index()].is_empty(),
                RoadClass::Interior => false,
            })
            .collect();

        ValidationReport {
            inlets_feed_interior: CheckResult::from_offenders(inlets_feed_interior),
            interior_reaches_outlet: CheckResult::from_offenders(interior_reaches_outlet),
            no_isolated_nodes: CheckResult::from_offenders(no_isolated_nodes),
            no_inlet_outlet_edge: CheckResult::from_offenders(no_inlet_outlet_edge),
            boundary_orientation: CheckResult::from_offenders(boundary_orientation),
        }
    }

    /// Reverse breadth-first search from the outlet set.
    fn reaches_outlet(&self) -> Vec<bool> {
        let mut seen = vec![false; self.n_total()];
        let mut queue: VecDeque<usize> = (self.n_in..self.n_boundary).collect();
        for &k in &queue {
            seen[k] = true;
        }
        while let Some(k) = queue.pop_front() {
            for j in &self.in_adj[k] {
                let j = j.index();
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    }
}

/// Outcome of one structural check; `offenders` is empty iff it passed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub passed: bool,
    pub offenders: Vec<NodeId>,
}

impl CheckResult {
    fn from_offenders(offenders: Vec<NodeId>) -> Self {
        Self {
            passed: offenders.is_empty(),
            offenders,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    /// Every inlet has at least one out-neighbor and all of them are interior.
    pub inlets_feed_interior: CheckResult,
    /// Every interior road has a directed path to some outlet.
    pub interior_reaches_outlet: CheckResult,
    /// Every node has at least one incident edge.
    pub no_isolated_nodes: CheckResult,
    /// No inlet is directly connected to an outlet.
    pub no_inlet_outlet_edge: CheckResult,
    /// Inlets have no in-edges and outlets have no out-edges.
    pub boundary_orientation: CheckResult,
}

impl ValidationReport {
    pub fn checks(&self) -> [(&'static str, &CheckResult); 5] {
        [
            ("inlets_feed_interior", &self.inlets_feed_interior),
            ("interior_reaches_outlet", &self.interior_reaches_outlet),
            ("no_isolated_nodes", &self.no_isolated_nodes),
            ("no_inlet_outlet_edge", &self.no_inlet_outlet_edge),
            ("boundary_orientation", &self.boundary_orientation),
        ]
    }

    /// True iff the four stability assumptions hold.
    pub fn stability_assumptions_hold(&self) -> bool {
        self.inlets_feed_interior.passed
            && self.interior_reaches_outlet.passed
            && self.no_isolated_nodes.passed
            && self.no_inlet_outlet_edge.passed
    }

    pub fn all_passed(&self) -> bool {
        self.checks().iter().all(|(_, c)| c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, check) in self.checks() {
            if check.passed {
                writeln!(f, "PASS {name}")?;
            } else {
                let ids: Vec<String> = check.offenders.iter().map(|n| n.to_string()).collect();
                writeln!(f, "FAIL {name}: nodes [{}]", ids.join(", "))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inlet() -> NodeSpec {
        NodeSpec::boundary(RoadClass::Inlet)
    }

    fn outlet() -> NodeSpec {
        NodeSpec::boundary(RoadClass::Outlet)
    }

    fn road() -> NodeSpec {
        NodeSpec::interior(100.0, 1)
    }

    fn minimal() -> NoirGraph {
        NoirGraph::build(&[inlet(), outlet(), road()], &[(1, 3), (3, 2)]).unwrap()
    }

    /// 1 -> 4 -> 3 -> 2 with 1 inlet, 2 outlet, 3 and 4 interior.
    fn chain() -> NoirGraph {
        NoirGraph::build(&[inlet(), outlet(), road(), road()], &[(1, 4), (4, 3), (3, 2)]).unwrap()
    }

    #[test]
    fn minimal_graph_neighbors() {
        let g = minimal();
        assert_eq!(g.in_neighbors(NodeId(3)).unwrap(), &[NodeId(1)]);
        assert_eq!(g.out_neighbors(NodeId(3)).unwrap(), &[NodeId(2)]);
        assert!(g.in_neighbors(NodeId(1)).unwrap().is_empty());
        assert_eq!(g.n_in(), 1);
        assert_eq!(g.n_boundary(), 2);
        assert_eq!(g.n_interior(), 1);
    }

    #[test]
    fn chain_neighbors() {
        let g = chain();
        // Enumerated from the edge set {(1,4), (4,3), (3,2)}.
        assert_eq!(g.in_neighbors(NodeId(3)).unwrap(), &[NodeId(4)]);
        assert_eq!(g.out_neighbors(NodeId(4)).unwrap(), &[NodeId(3)]);
        assert_eq!(g.out_neighbors(NodeId(1)).unwrap(), &[NodeId(4)]);
        assert!(g.out_neighbors(NodeId(2)).unwrap().is_empty());
        assert!(matches!(
            g.in_neighbors(NodeId(5)),
            Err(GraphError::OutOfRange { .. })
        ));
        assert!(g.in_neighbors(NodeId(0)).is_err());
    }

    #[test]
    fn build_errors() {
        let nodes = [inlet(), outlet(), road()];
        assert_eq!(
            NoirGraph::build(&nodes, &[(1, 1)]),
            Err(GraphError::SelfLoop(NodeId(1)))
        );
        assert_eq!(
            NoirGraph::build(&nodes, &[(1, 3), (1, 3)]),
            Err(GraphError::DuplicateEdge(NodeId(1), NodeId(3)))
        );
        assert!(matches!(
            NoirGraph::build(&nodes, &[(1, 4)]),
            Err(GraphError::OutOfRange { .. })
        ));
        assert!(matches!(
            NoirGraph::build(&[inlet(), road(), outlet()], &[]),
            Err(GraphError::ClassOrdering { .. })
        ));
        assert_eq!(
            NoirGraph::build(&[inlet(), outlet(), NodeSpec::boundary(RoadClass::Interior)], &[]),
            Err(GraphError::MissingAttributes(NodeId(3)))
        );
        assert!(matches!(
            NoirGraph::build(&[inlet(), outlet(), NodeSpec::interior(-1.0, 1)], &[]),
            Err(GraphError::InvalidAttributes { .. })
        ));
        assert_eq!(NoirGraph::build(&[], &[]), Err(GraphError::Empty));
    }

    #[test]
    fn opposite_edges_are_distinct() {
        let g = NoirGraph::build(
            &[inlet(), outlet(), road(), road()],
            &[(1, 3), (3, 4), (4, 3), (4, 2)],
        )
        .unwrap();
        assert_eq!(g.edges().len(), 4);
        assert!(g.validate().all_passed());
    }

    #[test]
    fn minimal_graph_validates() {
        let report = minimal().validate();
        assert!(report.all_passed(), "{report}");
        assert!(chain().validate().all_passed());
    }

    #[test]
    fn inlet_to_outlet_edge_fails_check_four() {
        let g = NoirGraph::build(&[inlet(), outlet(), road()], &[(1, 3), (3, 2), (1, 2)]).unwrap();
        let report = g.validate();
        assert!(!report.no_inlet_outlet_edge.passed);
        assert_eq!(report.no_inlet_outlet_edge.offenders, vec![NodeId(1)]);
        // The same edge also means inlet 1 feeds a non-interior road.
        assert!(!report.inlets_feed_interior.passed);
        assert!(report.interior_reaches_outlet.passed);
    }

    #[test]
    fn trapped_interior_node_is_listed() {
        // 4 -> 5 -> 4 is a cycle with no way out.
        let g = NoirGraph::build(
            &[inlet(), outlet(), road(), road(), road()],
            &[(1, 3), (3, 2), (3, 4), (4, 5), (5, 4)],
        )
        .unwrap();
        let report = g.validate();
        assert_eq!(report.interior_reaches_outlet.offenders, vec![NodeId(4), NodeId(5)]);
        assert!(report.no_isolated_nodes.passed);
    }

    #[test]
    fn isolated_and_misoriented_nodes() {
        let g = NoirGraph::build(
            &[inlet(), outlet(), road(), road()],
            &[(1, 3), (3, 2), (2, 3)],
        )
        .unwrap();
        let report = g.validate();
        assert_eq!(report.no_isolated_nodes.offenders, vec![NodeId(4)]);
        assert_eq!(report.boundary_orientation.offenders, vec![NodeId(2)]);
        assert!(!report.all_passed());
    }

    #[test]
    fn inlet_without_out_neighbors_fails_check_one() {
        let g = NoirGraph::build(&[inlet(), inlet(), outlet(), road()], &[(1, 4), (4, 3)]).unwrap();
        let report = g.validate();
        assert_eq!(report.inlets_feed_interior.offenders, vec![NodeId(2)]);
        assert_eq!(report.no_isolated_nodes.offenders, vec![NodeId(2)]);
    }

    #[test]
    fn capacity_arithmetic() {
        let c = compute_capacity(&RoadAttributes { length_m: 100.0, lanes: 2 }, 4.5).unwrap();
        assert!((c - 200.0 / 4.5).abs() < 1e-12);
        assert!((c - 44.44).abs() < 5e-3);
        let unit = compute_capacity(&RoadAttributes { length_m: 4.5, lanes: 1 }, 4.5).unwrap();
        assert_eq!(unit, 1.0);
        assert_eq!(DEFAULT_VEHICLE_LENGTH_M, 4.5);
        assert!(compute_capacity(&RoadAttributes { length_m: 4.5, lanes: 1 }, 0.0).is_err());
        assert!(compute_capacity(&RoadAttributes { length_m: 0.0, lanes: 1 }, 4.5).is_err());
        assert!(RoadAttributes::new(10.0, 0).is_err());
    }

    #[test]
    fn interior_index_roundtrip() {
        let g = chain();
        assert_eq!(g.interior_index(NodeId(3)), Some(0));
        assert_eq!(g.interior_index(NodeId(4)), Some(1));
        assert_eq!(g.interior_index(NodeId(2)), None);
        assert_eq!(g.interior_node(1), NodeId(4));
        assert!(g.feeds_outlet(NodeId(3)));
        assert!(!g.feeds_outlet(NodeId(4)));
    }
}
