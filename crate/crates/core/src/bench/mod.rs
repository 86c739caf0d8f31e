//! The benchmark harness: builds the nodes for one arm from a config, runs
//! them over sockets or simulated links, and writes per-stream CSV results.

pub mod config;
pub mod cpu;
pub mod metrics;
mod real;
pub mod report;
mod sim;

use std::fmt;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forwarder::FaceId;
use crate::payload::Serialization;
use crate::traffic::{NamingMode, NdnNode, NodeLogic, NodeReport, PublisherNode, SubscriberNode};
use crate::transport::Scheme;

pub use config::{Config, ConfigError};
pub use real::{run_node_process, NodeProcessArgs};
pub use report::{compare, load_run, summarize_dirs, Comparison, RunManifest, RunOutcome};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("setup failed: {0}")]
    Setup(String),
    #[error("run failed: {0}")]
    Runtime(String),
    #[error("cannot write results: {0}")]
    Output(String),
    #[error("cannot read results: {0}")]
    Input(String),
}

impl BenchError {
    /// True for problems with the configuration or arguments, as opposed to
    /// failures while running.
    pub fn is_config(&self) -> bool {
        matches!(self, BenchError::Config(_))
    }
}

/// Which stack carries the streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    NdnUdp,
    NdnTcp,
    Pubsub,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::NdnUdp, Arm::NdnTcp, Arm::Pubsub];

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::NdnUdp => "ndn-udp",
            Arm::NdnTcp => "ndn-tcp",
            Arm::Pubsub => "pubsub",
        }
    }

    fn face_scheme(self) -> Option<Scheme> {
        match self {
            Arm::NdnUdp => Some(Scheme::Udp),
            Arm::NdnTcp => Some(Scheme::Tcp),
            Arm::Pubsub => None,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Arm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown arm {s:?}; expected ndn-udp, ndn-tcp or pubsub"))
    }
}

/// What every node of a run agrees on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunParams {
    pub arm: Arm,
    pub serialization: Serialization,
    pub duration: Duration,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub params: RunParams,
    pub out: PathBuf,
    /// Simulated links under a virtual clock instead of sockets.
    pub sim: bool,
    /// Run each node as a child process of this executable, which must
    /// implement the `node` subcommand.
    pub node_exe: Option<PathBuf>,
}

/// Time after the last emission during which nodes keep receiving: the
/// longest stream period, at least 100 ms.
pub fn drain_time(config: &Config) -> Duration {
    let longest = config.streams.iter().map(|s| s.period_us).max().unwrap_or(0);
    Duration::from_micros(longest).max(Duration::from_millis(100))
}

/// Checks that `config` can run `arm`.
pub fn check(config: &Config, arm: Arm) -> Result<(), BenchError> {
    config.validate()?;
    if arm == Arm::Pubsub {
        config.validate_pubsub()?;
    }
    Ok(())
}

/// Runs one arm and writes its results into `options.out`.
pub fn run(config: &Config, options: &RunOptions) -> Result<RunOutcome, BenchError> {
    check(config, options.params.arm)?;
    let reports = if options.sim {
        sim::run(config, &options.params)?
    } else {
        real::run(config, options)?
    };
    report::write_run(config, options, &reports)
}

/// How a built node attaches to the outside world.
pub(crate) enum Wiring {
    /// Config face indices and the forwarder face each became.
    Ndn(Vec<(usize, FaceId)>),
    /// The node's pub/sub socket address.
    PubSub(SocketAddr),
}

pub(crate) fn node_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Builds the logic for node `index` of `config`. Returns `None` for a node
/// with no part in a pub/sub run.
pub(crate) fn build_node(
    config: &Config,
    params: &RunParams,
    index: usize,
) -> Result<Option<(Box<dyn NodeLogic>, Wiring)>, BenchError> {
    let node = &config.nodes[index];
    let seed = node_seed(params.seed, index);
    let setup = |e: String| BenchError::Setup(format!("node {}: {e}", node.name));
    let mut specs = Vec::new();
    for s in &config.streams {
        let spec = s.spec(params.serialization).map_err(setup)?;
        let count = spec.expected_count(params.duration);
        specs.push((s, spec, count));
    }

    if params.arm == Arm::Pubsub {
        let addr = config.pubsub_addr(&node.name).ok();
        let publishes = specs.iter().any(|(s, ..)| s.producer == node.name);
        let subscribes = specs.iter().any(|(s, ..)| s.consumers.contains(&node.name));
        let logic: Box<dyn NodeLogic> = if publishes {
            let mut p = PublisherNode::new(&node.name, seed);
            for (s, spec, count) in &specs {
                if s.producer == node.name {
                    p.add_stream(spec.clone(), *count);
                }
            }
            Box::new(p)
        } else if subscribes {
            let port = addr.map(|a| a.port()).unwrap_or(0);
            let mut sub = SubscriberNode::new(&node.name, port);
            for (s, spec, _) in &specs {
                if s.consumers.contains(&node.name) {
                    sub.add_stream(spec, config.pubsub_addr(&s.producer).map_err(setup)?);
                }
            }
            Box::new(sub)
        } else {
            return Ok(None);
        };
        let addr = addr.ok_or_else(|| setup("no pubsub endpoint".into()))?;
        return Ok(Some((logic, Wiring::PubSub(addr))));
    }

    let mut ndn = NdnNode::new(&node.name, seed);
    let mut faces = Vec::new();
    for (i, f) in config.faces.iter().enumerate() {
        if f.node == node.name {
            faces.push((i, f.id, ndn.add_network_face()));
        }
    }
    for r in config.routes.iter().filter(|r| r.node == node.name) {
        let prefix = r.prefix.parse().map_err(|e: crate::packet::PacketError| setup(e.to_string()))?;
        let &(_, _, face) = faces
            .iter()
            .find(|(_, id, _)| *id == r.face)
            .ok_or_else(|| setup(format!("route uses unknown face {}", r.face)))?;
        ndn.add_route(prefix, face).map_err(|e| setup(e.to_string()))?;
    }
    for (s, spec, count) in specs {
        if s.producer == node.name {
            ndn.add_producer(spec.clone()).map_err(|e| setup(e.to_string()))?;
        }
        if s.consumers.contains(&node.name) {
            ndn.add_consumer(spec, count, NamingMode::Plain);
        }
    }
    let wiring = Wiring::Ndn(faces.into_iter().map(|(i, _, f)| (i, f)).collect());
    Ok(Some((Box::new(ndn), wiring)))
}

/// Collects every node report of a finished run, in config node order.
pub(crate) fn sort_reports(config: &Config, mut reports: Vec<NodeReport>) -> Vec<NodeReport> {
    reports.sort_by_key(|r| config.nodes.iter().position(|n| n.name == r.node));
    reports
}
