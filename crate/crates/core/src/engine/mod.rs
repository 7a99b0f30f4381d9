//! Message-passing engine: nodes with typed ports, validated wiring and a
//! deterministic superstep scheduler.

mod network;
mod payload;
mod topology;

pub use network::{
    EngineError, Entry, Message, Network, NetworkBuilder, NetworkRunResult, Node, NodeContext,
    NodeError, Receipt, TerminationRule,
};
pub use payload::{Payload, PayloadKind};
pub use topology::{
    validate_topology, Connection, Direction, Endpoint, NodeDecl, PortSpec, Topology,
    TopologyError,
};
