use std::collections::{BTreeMap, HashMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{validate_topology, Connection, Direction, Endpoint, NodeDecl, Payload, PortSpec};
use super::{PayloadKind, Topology, TopologyError};
use crate::rng::{named_stream, Stream};

pub type NodeError = Box<dyn std::error::Error + Send + Sync>;

/// A routed message. `correlation_id` is unique and increasing per sending
/// node; replies carry the id they answer in `in_reply_to`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub source: Endpoint,
    pub correlation_id: u64,
    pub in_reply_to: Option<u64>,
    pub payload: Payload,
}

/// Per-node execution state owned by the engine.
pub struct NodeContext {
    node: String,
    rng: Stream,
    next_id: u64,
    outbox: Vec<Message>,
}

impl NodeContext {
    fn new(node: &str, seed: u64) -> Self {
        Self {
            node: node.to_string(),
            rng: named_stream(seed, node),
            next_id: 0,
            outbox: Vec::new(),
        }
    }

    pub fn node_id(&self) -> &str {
        &self.node
    }

    /// The node's private random stream.
    pub fn rng(&mut self) -> &mut Stream {
        &mut self.rng
    }

    /// Queues a message on an output port and returns its correlation id.
    pub fn emit(&mut self, port: &str, payload: Payload) -> u64 {
        self.push(port, payload, None)
    }

    pub fn reply(&mut self, port: &str, payload: Payload, in_reply_to: u64) -> u64 {
        self.push(port, payload, Some(in_reply_to))
    }

    fn push(&mut self, port: &str, payload: Payload, in_reply_to: Option<u64>) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.outbox.push(Message {
            source: Endpoint::new(&self.node, port),
            correlation_id: id,
            in_reply_to,
            payload,
        });
        id
    }
}

/// A solver or orchestrator taking part in a network.
pub trait Node: Send {
    fn ports(&self) -> Vec<PortSpec>;

    /// Reacts to one message that arrived on input `port`.
    fn handle(&mut self, port: &str, message: &Message, ctx: &mut NodeContext)
        -> Result<(), NodeError>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TerminationRule {
    /// Stop after this many handler invocations.
    Budget(usize),
    /// Stop as soon as a message is emitted on this output port.
    FinalPayload(Endpoint),
}

/// An initial message injected on an input port.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub to: Endpoint,
    pub payload: Payload,
}

impl Entry {
    pub fn new(to: Endpoint, payload: Payload) -> Self {
        Self { to, payload }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub dest: Endpoint,
    pub position: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid topology: {}", join(.0))]
    InvalidTopology(Vec<TopologyError>),
    #[error("UnconnectedPort: `{0}` has no outgoing connection")]
    UnconnectedPort(Endpoint),
    #[error("unknown port `{0}`")]
    UnknownPort(Endpoint),
    #[error("port `{endpoint}` expects {expected}, got {actual}")]
    PayloadKindViolation {
        endpoint: Endpoint,
        expected: PayloadKind,
        actual: PayloadKind,
    },
    #[error("Deadlock: all queues empty after {handled} handled messages")]
    Deadlock { handled: usize },
    #[error("HandlerFailure in node `{node}`: {message}")]
    HandlerFailure { node: String, message: String },
}

fn join(errors: &[TopologyError]) -> String {
    errors
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Outcome of [`Network::run`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkRunResult {
    /// The payload that fired a `FinalPayload` rule.
    pub final_payload: Option<Payload>,
    /// Payloads emitted on unconnected output ports, keyed by `node.port`.
    pub sinks: BTreeMap<String, Vec<Payload>>,
    /// Handler invocations per node.
    pub handled: BTreeMap<String, usize>,
    pub supersteps: usize,
    pub entries: usize,
    /// Messages routed into input queues by nodes.
    pub produced: usize,
    pub consumed: usize,
    /// Messages still queued at termination.
    pub remaining: usize,
}

pub struct NetworkBuilder<'a> {
    seed: u64,
    nodes: Vec<(String, Box<dyn Node + 'a>)>,
    connections: Vec<Connection>,
}

impl<'a> NetworkBuilder<'a> {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            nodes: Vec::new(),
            connections: Vec::new(),
        }
    }

    pub fn node(mut self, id: &str, node: Box<dyn Node + 'a>) -> Self {
        self.nodes.push((id.to_string(), node));
        self
    }

    pub fn connect(mut self, from: Endpoint, to: Endpoint) -> Self {
        self.connections.push(Connection::new(from, to));
        self
    }

    pub fn connection(mut self, connection: Connection) -> Self {
        self.connections.push(connection);
        self
    }

    pub fn build(self) -> Result<Network<'a>, EngineError> {
        let topology = Topology {
            nodes: self
                .nodes
                .iter()
                .map(|(id, node)| NodeDecl {
                    id: id.clone(),
                    ports: node.ports(),
                })
                .collect(),
            connections: self.connections,
        };
        let errors = validate_topology(&topology);
        if !errors.is_empty() {
            return Err(EngineError::InvalidTopology(errors));
        }
        let routes = topology
            .connections
            .iter()
            .map(|c| (c.from.clone(), c.to.clone()))
            .collect();
        let index = topology
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        let slots = self
            .nodes
            .into_iter()
            .zip(&topology.nodes)
            .map(|((id, node), decl)| {
                let inputs: Vec<String> = decl
                    .ports
                    .iter()
                    .filter(|p| p.direction == Direction::Input)
                    .map(|p| p.name.clone())
                    .collect();
                Slot {
                    ctx: NodeContext::new(&id, self.seed),
                    queues: vec![VecDeque::new(); inputs.len()],
                    inputs,
                    cursor: 0,
                    node,
                }
            })
            .collect();
        Ok(Network {
            topology,
            routes,
            index,
            slots,
        })
    }
}

struct Slot<'a> {
    node: Box<dyn Node + 'a>,
    ctx: NodeContext,
    inputs: Vec<String>,
    queues: Vec<VecDeque<Message>>,
    /// Round-robin position over input ports.
    cursor: usize,
}

impl Slot<'_> {
    fn queued(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    fn next_message(&mut self) -> Option<(String, Message)> {
        let n = self.inputs.len();
        for step in 0..n {
            let k = (self.cursor + step) % n;
            if let Some(message) = self.queues[k].pop_front() {
                self.cursor = (k + 1) % n;
                return Some((self.inputs[k].clone(), message));
            }
        }
        None
    }

    fn invoke(&mut self, port: &str, message: &Message) -> Result<Vec<Message>, NodeError> {
        self.node.handle(port, message, &mut self.ctx)?;
        Ok(std::mem::take(&mut self.ctx.outbox))
    }
}

/// A validated network ready to run.
///
/// Execution proceeds in supersteps: every node with queued input takes one
/// message, handlers run (concurrently when workers > 1), then all outputs are
/// routed in node order. Each node handles at most one message at a time, so
/// results do not depend on the worker count.
pub struct Network<'a> {
    topology: Topology,
    routes: HashMap<Endpoint, Endpoint>,
    index: HashMap<String, usize>,
    slots: Vec<Slot<'a>>,
}

impl Network<'_> {
    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    /// Enqueues a message at the input connected to its source port.
    pub fn send(&mut self, message: Message) -> Result<Receipt, EngineError> {
        self.check_kind(&message.source, Direction::Output, &message.payload)?;
        let dest = self
            .routes
            .get(&message.source)
            .cloned()
            .ok_or_else(|| EngineError::UnconnectedPort(message.source.clone()))?;
        let position = self.enqueue(&dest, message)?;
        Ok(Receipt { dest, position })
    }

    fn check_kind(
        &self,
        endpoint: &Endpoint,
        direction: Direction,
        payload: &Payload,
    ) -> Result<(), EngineError> {
        let spec = self
            .topology
            .port(endpoint)
            .filter(|p| p.direction == direction)
            .ok_or_else(|| EngineError::UnknownPort(endpoint.clone()))?;
        if spec.kind != payload.kind() {
            return Err(EngineError::PayloadKindViolation {
                endpoint: endpoint.clone(),
                expected: spec.kind,
                actual: payload.kind(),
            });
        }
        Ok(())
    }

    fn enqueue(&mut self, dest: &Endpoint, message: Message) -> Result<usize, EngineError> {
        self.check_kind(dest, Direction::Input, &message.payload)?;
        let slot = &mut self.slots[self.index[&dest.node]];
        let k = slot
            .inputs
            .iter()
            .position(|p| *p == dest.port)
            .ok_or_else(|| EngineError::UnknownPort(dest.clone()))?;
        slot.queues[k].push_back(message);
        Ok(slot.queues[k].len() - 1)
    }

    /// Runs until the termination rule fires.
    pub fn run(
        &mut self,
        entries: Vec<Entry>,
        termination: TerminationRule,
        workers: usize,
    ) -> Result<NetworkRunResult, EngineError> {
        if let TerminationRule::FinalPayload(endpoint) = &termination {
            match self.topology.port(endpoint) {
                Some(p) if p.direction == Direction::Output => {}
                _ => return Err(EngineError::UnknownPort(endpoint.clone())),
            }
        }
        let mut result = NetworkRunResult {
            final_payload: None,
            sinks: BTreeMap::new(),
            handled: self.slots.iter().map(|s| (s.ctx.node.clone(), 0)).collect(),
            supersteps: 0,
            entries: entries.len(),
            produced: 0,
            consumed: 0,
            remaining: 0,
        };
        for (i, entry) in entries.into_iter().enumerate() {
            let message = Message {
                source: Endpoint::new("entry", i.to_string()),
                correlation_id: i as u64,
                in_reply_to: None,
                payload: entry.payload,
            };
            self.enqueue(&entry.to, message)?;
        }

        let pool = if workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| EngineError::HandlerFailure {
                        node: "scheduler".into(),
                        message: e.to_string(),
                    })?,
            )
        } else {
            None
        };

        loop {
            let budget_left = match termination {
                TerminationRule::Budget(b) => b.saturating_sub(result.consumed),
                TerminationRule::FinalPayload(_) => usize::MAX,
            };
            if budget_left == 0 {
                break;
            }
            let mut plan: Vec<Option<(String, Message)>> = Vec::with_capacity(self.slots.len());
            let mut planned = 0;
            for slot in &mut self.slots {
                let next = if planned < budget_left {
                    slot.next_message()
                } else {
                    None
                };
                planned += next.is_some() as usize;
                plan.push(next);
            }
            if planned == 0 {
                return Err(EngineError::Deadlock {
                    handled: result.consumed,
                });
            }
            result.supersteps += 1;
            result.consumed += planned;

            let step = |(slot, job): (&mut Slot<'_>, &Option<(String, Message)>)| {
                job.as_ref().map(|(port, message)| slot.invoke(port, message))
            };
            let outputs: Vec<Option<Result<Vec<Message>, NodeError>>> = match &pool {
                Some(pool) => pool.install(|| {
                    self.slots.par_iter_mut().zip(plan.par_iter()).map(step).collect()
                }),
                None => self.slots.iter_mut().zip(plan.iter()).map(step).collect(),
            };

            let mut finished = false;
            for (i, output) in outputs.into_iter().enumerate() {
                let Some(output) = output else { continue };
                let node = self.slots[i].ctx.node.clone();
                *result.handled.get_mut(&node).expect("node registered") += 1;
                let messages = output.map_err(|e| EngineError::HandlerFailure {
                    node: node.clone(),
                    message: e.to_string(),
                })?;
                for message in messages {
                    self.check_kind(&message.source, Direction::Output, &message.payload)?;
                    if let TerminationRule::FinalPayload(endpoint) = &termination {
                        if !finished && message.source == *endpoint {
                            result.final_payload = Some(message.payload.clone());
                            finished = true;
                        }
                    }
                    match self.routes.get(&message.source).cloned() {
                        Some(dest) => {
                            self.enqueue(&dest, message)?;
                            result.produced += 1;
                        }
                        None => result
                            .sinks
                            .entry(message.source.to_string())
                            .or_default()
                            .push(message.payload),
                    }
                }
            }
            if finished {
                break;
            }
        }
        result.remaining = self.slots.iter().map(Slot::queued).sum();
        Ok(result)
    }
}
