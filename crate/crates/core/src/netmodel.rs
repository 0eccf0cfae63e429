//! QPU network model: nodes with qubit capacities, star / ring / arbitrary
//! topologies, and per-link accounting of the classical weight traffic.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::vqc::CircuitSpec;
use crate::{Error, Result};

/// Bytes per transmitted weight (`f64`).
pub const BYTES_PER_WEIGHT: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeRole {
    Client,
    Aggregator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    pub qubit_capacity: usize,
    pub role: NodeRole,
}

impl NodeSpec {
    /// Rejects circuits wider than this node. Aggregators only store weights
    /// and accept any circuit.
    pub fn admit(&self, spec: &CircuitSpec) -> Result<()> {
        if self.role == NodeRole::Client && spec.num_qubits > self.qubit_capacity {
            return Err(Error::Capacity(format!(
                "node {} has {} qubits, circuit needs {}",
                self.id, self.qubit_capacity, spec.num_qubits
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    Star,
    Ring,
    Arbitrary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge(pub NodeId, pub NodeId);

impl Edge {
    fn touches(&self, n: NodeId) -> bool {
        self.0 == n || self.1 == n
    }

    fn other(&self, n: NodeId) -> NodeId {
        if self.0 == n {
            self.1
        } else {
            self.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<Edge>,
    pub kind: TopologyKind,
}

fn client_nodes(capacities: &[usize]) -> Result<Vec<NodeSpec>> {
    capacities
        .iter()
        .enumerate()
        .map(|(i, &qubit_capacity)| {
            if qubit_capacity == 0 {
                return Err(Error::Usage(format!("client {i} has zero qubit capacity")));
            }
            Ok(NodeSpec {
                id: NodeId(i),
                qubit_capacity,
                role: NodeRole::Client,
            })
        })
        .collect()
}

/// Hub-and-spoke network. Clients are `n0..n(k-1)`, the aggregator is `nk`.
pub fn build_star(capacities: &[usize], aggregator_capacity: usize) -> Result<NetworkTopology> {
    if capacities.is_empty() {
        return Err(Error::Usage("star topology needs at least one client".into()));
    }
    let mut nodes = client_nodes(capacities)?;
    let hub = NodeId(capacities.len());
    nodes.push(NodeSpec {
        id: hub,
        qubit_capacity: aggregator_capacity,
        role: NodeRole::Aggregator,
    });
    let edges = (0..capacities.len()).map(|i| Edge(NodeId(i), hub)).collect();
    let topo = NetworkTopology {
        nodes,
        edges,
        kind: TopologyKind::Star,
    };
    topo.validate()?;
    Ok(topo)
}

/// Directed cycle `n0 -> n1 -> ... -> n(k-1) -> n0` in list order.
pub fn build_ring(capacities: &[usize]) -> Result<NetworkTopology> {
    if capacities.len() < 2 {
        return Err(Error::Usage(format!(
            "ring topology needs at least two clients, got {}",
            capacities.len()
        )));
    }
    let k = capacities.len();
    let topo = NetworkTopology {
        nodes: client_nodes(capacities)?,
        edges: (0..k).map(|i| Edge(NodeId(i), NodeId((i + 1) % k))).collect(),
        kind: TopologyKind::Ring,
    };
    topo.validate()?;
    Ok(topo)
}

impl NetworkTopology {
    /// Free-form graph; representable and validated for connectivity but
    /// not executable by the federated protocols.
    pub fn arbitrary(nodes: Vec<NodeSpec>, edges: Vec<Edge>) -> Result<Self> {
        let topo = NetworkTopology {
            nodes,
            edges,
            kind: TopologyKind::Arbitrary,
        };
        topo.validate()?;
        Ok(topo)
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn clients(&self) -> impl Iterator<Item = &NodeSpec> {
        self.nodes.iter().filter(|n| n.role == NodeRole::Client)
    }

    pub fn aggregator(&self) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.role == NodeRole::Aggregator)
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.edges.iter().filter(|e| e.touches(id)).count()
    }

    /// Ring successor of a client.
    pub fn successor(&self, id: NodeId) -> Option<NodeId> {
        if self.kind != TopologyKind::Ring {
            return None;
        }
        self.edges.iter().find(|e| e.0 == id).map(|e| e.1)
    }

    /// Index of the edge carrying `from -> to`. An edge stored in the same
    /// direction is preferred over one stored reversed.
    pub fn edge_index(&self, from: NodeId, to: NodeId) -> Option<usize> {
        self.edges
            .iter()
            .position(|e| e.0 == from && e.1 == to)
            .or_else(|| self.edges.iter().position(|e| e.0 == to && e.1 == from))
    }

    fn is_connected(&self) -> bool {
        let Some(start) = self.nodes.first() else {
            return false;
        };
        let mut seen = vec![start.id];
        let mut queue = VecDeque::from([start.id]);
        while let Some(n) = queue.pop_front() {
            for e in self.edges.iter().filter(|e| e.touches(n)) {
                let m = e.other(n);
                if !seen.contains(&m) {
                    seen.push(m);
                    queue.push_back(m);
                }
            }
        }
        seen.len() == self.nodes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::Usage(format!("invalid {:?} topology: {msg}", self.kind)));
        for e in &self.edges {
            if self.node(e.0).is_none() || self.node(e.1).is_none() {
                return invalid(format!("edge {} - {} references an unknown node", e.0, e.1));
            }
            if e.0 == e.1 {
                return invalid(format!("self loop on {}", e.0));
            }
        }
        if !self.is_connected() {
            return invalid("graph is not connected".into());
        }
        match self.kind {
            TopologyKind::Star => {
                let hubs: Vec<_> = self
                    .nodes
                    .iter()
                    .filter(|n| n.role == NodeRole::Aggregator)
                    .collect();
                let [hub] = hubs.as_slice() else {
                    return invalid(format!("{} aggregators, expected 1", hubs.len()));
                };
                for c in self.clients() {
                    let links: Vec<_> = self.edges.iter().filter(|e| e.touches(c.id)).collect();
                    if links.len() != 1 || links[0].other(c.id) != hub.id {
                        return invalid(format!("client {} is not linked to the hub only", c.id));
                    }
                }
            }
            TopologyKind::Ring => {
                if self.aggregator().is_some() {
                    return invalid("ring has an aggregator".into());
                }
                let k = self.nodes.len();
                if self.edges.len() != k {
                    return invalid(format!("{} edges for {k} clients", self.edges.len()));
                }
                let mut at = self.nodes[0].id;
                let mut visited = vec![at];
                for _ in 0..k {
                    let Some(next) = self.successor(at) else {
                        return invalid(format!("{at} has no successor"));
                    };
                    at = next;
                    if at == self.nodes[0].id {
                        break;
                    }
                    if visited.contains(&at) {
                        return invalid(format!("cycle revisits {at}"));
                    }
                    visited.push(at);
                }
                if visited.len() != k || at != self.nodes[0].id {
                    return invalid("clients do not form a single cycle".into());
                }
            }
            TopologyKind::Arbitrary => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkCounters {
    pub messages_sent: u64,
    pub payload_bytes: u64,
}

/// Lossless classical links with per-edge counters and an optional fixed
/// per-message latency used only for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkLedger {
    edges: Vec<Edge>,
    counters: Vec<LinkCounters>,
    pub latency_per_message_s: f64,
}

impl LinkLedger {
    pub fn new(topology: &NetworkTopology) -> Self {
        LinkLedger {
            edges: topology.edges.clone(),
            counters: vec![LinkCounters::default(); topology.edges.len()],
            latency_per_message_s: 0.0,
        }
    }

    pub fn edge_index(&self, from: NodeId, to: NodeId) -> Option<usize> {
        self.edges
            .iter()
            .position(|e| e.0 == from && e.1 == to)
            .or_else(|| self.edges.iter().position(|e| e.0 == to && e.1 == from))
    }

    /// Records one message of `weight_count` weights from `from` to `to`.
    pub fn send_weights(&mut self, from: NodeId, to: NodeId, weight_count: usize) -> Result<()> {
        let idx = self
            .edge_index(from, to)
            .ok_or_else(|| Error::Usage(format!("no link between {from} and {to}")))?;
        let c = &mut self.counters[idx];
        c.messages_sent += 1;
        c.payload_bytes += BYTES_PER_WEIGHT * weight_count as u64;
        Ok(())
    }

    pub fn counters(&self) -> &[LinkCounters] {
        &self.counters
    }

    pub fn totals(&self) -> LinkCounters {
        self.counters.iter().fold(LinkCounters::default(), |acc, c| LinkCounters {
            messages_sent: acc.messages_sent + c.messages_sent,
            payload_bytes: acc.payload_bytes + c.payload_bytes,
        })
    }

    pub fn simulated_latency_s(&self) -> f64 {
        self.totals().messages_sent as f64 * self.latency_per_message_s
    }
}

/// Ledger API in free-function form.
pub fn send_weights(ledger: &mut LinkLedger, edge: Edge, weight_count: usize) -> Result<()> {
    ledger.send_weights(edge.0, edge.1, weight_count)
}
