use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::PayloadKind;

/// A `node.port` address.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Endpoint {
    pub node: String,
    pub port: String,
}

impl Endpoint {
    pub fn new(node: impl Into<String>, port: impl Into<String>) -> Self {
        Self {
            node: node.into(),
            port: port.into(),
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.node, self.port)
    }
}

impl FromStr for Endpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().split_once('.') {
            Some((node, port)) if !node.is_empty() && !port.is_empty() => {
                Ok(Endpoint::new(node, port))
            }
            _ => Err(format!("expected `node.port`, got `{s}`")),
        }
    }
}

impl From<Endpoint> for String {
    fn from(e: Endpoint) -> Self {
        e.to_string()
    }
}

impl TryFrom<String> for Endpoint {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Input,
    Output,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortSpec {
    pub name: String,
    pub direction: Direction,
    pub kind: PayloadKind,
}

impl PortSpec {
    pub fn input(name: &str, kind: PayloadKind) -> Self {
        Self {
            name: name.to_string(),
            direction: Direction::Input,
            kind,
        }
    }

    pub fn output(name: &str, kind: PayloadKind) -> Self {
        Self {
            name: name.to_string(),
            direction: Direction::Output,
            kind,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDecl {
    pub id: String,
    pub ports: Vec<PortSpec>,
}

impl NodeDecl {
    pub fn port(&self, name: &str) -> Option<&PortSpec> {
        self.ports.iter().find(|p| p.name == name)
    }
}

/// Directed link from an output port to an input port.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Connection {
    pub from: Endpoint,
    pub to: Endpoint,
}

impl Connection {
    pub fn new(from: Endpoint, to: Endpoint) -> Self {
        Self { from, to }
    }
}

impl fmt::Display for Connection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.from, self.to)
    }
}

impl FromStr for Connection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (from, to) = s
            .split_once("->")
            .or_else(|| s.split_once('→'))
            .ok_or_else(|| format!("expected `a.out -> b.in`, got `{s}`"))?;
        Ok(Connection {
            from: from.parse()?,
            to: to.parse()?,
        })
    }
}

impl From<Connection> for String {
    fn from(c: Connection) -> Self {
        c.to_string()
    }
}

impl TryFrom<String> for Connection {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<NodeDecl>,
    pub connections: Vec<Connection>,
}

impl Topology {
    pub fn node(&self, id: &str) -> Option<&NodeDecl> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn port(&self, endpoint: &Endpoint) -> Option<&PortSpec> {
        self.node(&endpoint.node)?.port(&endpoint.port)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("DuplicateNode: node id `{0}` declared more than once")]
    DuplicateNode(String),
    #[error("DuplicatePort: port `{0}` declared more than once")]
    DuplicatePort(Endpoint),
    #[error("UnknownEndpoint: `{endpoint}` in connection `{connection}` does not exist")]
    UnknownEndpoint {
        endpoint: Endpoint,
        connection: Connection,
    },
    #[error("DirectionMismatch: connection `{0}` must run from an output to an input port")]
    DirectionMismatch(Connection),
    #[error("KindMismatch: `{from}` carries {from_kind} but `{to}` expects {to_kind}")]
    KindMismatch {
        from: Endpoint,
        from_kind: PayloadKind,
        to: Endpoint,
        to_kind: PayloadKind,
    },
    #[error("DuplicateWriter: input `{input}` is written by {writers:?}")]
    DuplicateWriter {
        input: Endpoint,
        writers: Vec<String>,
    },
}

/// Checks port compatibility and the single-writer rule; returns one error
/// per violation, empty when the topology is sound.
pub fn validate_topology(topology: &Topology) -> Vec<TopologyError> {
    let mut errors = Vec::new();

    let mut ids = HashSet::new();
    for node in &topology.nodes {
        if !ids.insert(node.id.as_str()) {
            errors.push(TopologyError::DuplicateNode(node.id.clone()));
        }
        let mut ports = HashSet::new();
        for port in &node.ports {
            if !ports.insert(port.name.as_str()) {
                errors.push(TopologyError::DuplicatePort(Endpoint::new(&node.id, &port.name)));
            }
        }
    }

    let mut writers: HashMap<&Endpoint, Vec<String>> = HashMap::new();
    for connection in &topology.connections {
        let from = topology.port(&connection.from);
        let to = topology.port(&connection.to);
        for (endpoint, port) in [(&connection.from, from), (&connection.to, to)] {
            if port.is_none() {
                errors.push(TopologyError::UnknownEndpoint {
                    endpoint: endpoint.clone(),
                    connection: connection.clone(),
                });
            }
        }
        let (Some(from), Some(to)) = (from, to) else {
            continue;
        };
        if from.direction != Direction::Output || to.direction != Direction::Input {
            errors.push(TopologyError::DirectionMismatch(connection.clone()));
            continue;
        }
        if from.kind != to.kind {
            errors.push(TopologyError::KindMismatch {
                from: connection.from.clone(),
                from_kind: from.kind,
                to: connection.to.clone(),
                to_kind: to.kind,
            });
        }
        writers
            .entry(&connection.to)
            .or_default()
            .push(connection.from.to_string());
    }

    let mut duplicated: Vec<_> = writers.into_iter().filter(|(_, w)| w.len() > 1).collect();
    duplicated.sort_by(|a, b| a.0.cmp(b.0));
    errors.extend(duplicated.into_iter().map(|(input, writers)| {
        TopologyError::DuplicateWriter {
            input: input.clone(),
            writers,
        }
    }));
    errors
}
