//! Experiment topology: nodes, faces, routes and streams, loaded from TOML.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::SocketAddr;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::packet::Name;
use crate::payload::Serialization;
use crate::traffic::{default_freshness_ms, StreamSpec, MIN_PERIOD_US};
use crate::transport::{Endpoint, LinkProfile, Scheme};

/// Warmup excluded from statistics when a config does not set one.
pub const DEFAULT_WARMUP_MS: u64 = 500;

/// Hops a route walk may take before it is treated as a loop.
const MAX_HOPS: usize = 16;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_warmup")]
    pub warmup_ms: u64,
    /// Link profile used in simulation for faces without their own.
    #[serde(default = "perfect", skip_serializing_if = "is_perfect")]
    pub sim: LinkProfile,
    pub nodes: Vec<NodeConfig>,
    #[serde(default)]
    pub faces: Vec<FaceConfig>,
    #[serde(default)]
    pub routes: Vec<RouteConfig>,
    pub streams: Vec<StreamConfig>,
}

fn default_warmup() -> u64 {
    DEFAULT_WARMUP_MS
}

fn perfect() -> LinkProfile {
    LinkProfile::PERFECT
}

fn is_perfect(p: &LinkProfile) -> bool {
    *p == LinkProfile::PERFECT
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub name: String,
    /// Datagram endpoint for the pub/sub arm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pubsub: Option<Endpoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceConfig {
    pub node: String,
    pub id: u32,
    pub local: Endpoint,
    pub remote: Endpoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<LinkProfile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteConfig {
    pub node: String,
    pub prefix: String,
    pub face: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamConfig {
    pub name: String,
    pub payload_bytes: usize,
    pub period_us: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freshness_ms: Option<u32>,
    pub producer: String,
    pub consumers: Vec<String>,
}

impl StreamConfig {
    pub fn spec(&self, serialization: Serialization) -> Result<StreamSpec, String> {
        let name = Name::parse(&self.name).map_err(|e| e.to_string())?;
        let spec = StreamSpec::new(name, self.payload_bytes, self.period_us, serialization)
            .map_err(|e| e.to_string())?;
        Ok(spec.with_freshness_ms(self.freshness_ms.unwrap_or(default_freshness_ms(self.period_us))))
    }
}

/// Index of the face at the other end of each face, by position in
/// [`Config::faces`].
pub type FacePairs = Vec<usize>;

impl Config {
    pub fn from_toml(text: &str) -> Result<Config, ConfigError> {
        let config: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Config, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Config::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse(m) => ConfigError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The built-in topology: one PC producing three streams for three
    /// receivers over loopback.
    pub fn builtin() -> Config {
        Config::from_toml(BUILTIN_TOML).expect("builtin config is valid")
    }

    pub fn node(&self, name: &str) -> Option<&NodeConfig> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn warmup_us(&self) -> u64 {
        self.warmup_ms * 1000
    }

    /// Output label for every (stream, consumer) pair: the stream name, or
    /// `name@node` when the stream has more than one consumer.
    pub fn stream_labels(&self) -> Vec<(usize, String, String)> {
        let mut out = Vec::new();
        for (i, s) in self.streams.iter().enumerate() {
            for c in &s.consumers {
                let label = if s.consumers.len() > 1 { format!("{}@{c}", s.name) } else { s.name.clone() };
                out.push((i, c.clone(), label));
            }
        }
        out
    }

    /// Pairs every face with its opposite end. Two faces pair when each
    /// one's local endpoint is the other's remote endpoint, or when both are
    /// `sim://` endpoints naming the same link.
    pub fn face_pairs(&self) -> Result<FacePairs, Vec<String>> {
        let mut pairs = vec![usize::MAX; self.faces.len()];
        let mut errors = Vec::new();
        for (i, a) in self.faces.iter().enumerate() {
            let matches: Vec<usize> = self
                .faces
                .iter()
                .enumerate()
                .filter(|&(j, b)| j != i && faces_pair(a, b))
                .map(|(j, _)| j)
                .collect();
            match matches.as_slice() {
                [j] => pairs[i] = *j,
                [] => errors.push(format!("{}: no face on the other end", FaceLabel(i, a))),
                _ => errors.push(format!("{}: more than one face on the other end", FaceLabel(i, a))),
            }
        }
        if errors.is_empty() {
            Ok(pairs)
        } else {
            Err(errors)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        let mut names = BTreeSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.name.is_empty() {
                errors.push(format!("nodes[{i}]: empty name"));
            }
            if !names.insert(n.name.as_str()) {
                errors.push(format!("nodes[{i}] ({}): duplicate node name", n.name));
            }
            if let Some(ep) = &n.pubsub {
                if ep.scheme != Scheme::Udp {
                    errors.push(format!("nodes[{i}] ({}): pubsub endpoint must be udp://", n.name));
                }
            }
        }
        let known = |n: &str| names.contains(n);

        let mut face_ids = BTreeSet::new();
        for (i, f) in self.faces.iter().enumerate() {
            let label = FaceLabel(i, f);
            if !known(&f.node) {
                errors.push(format!("{label}: unknown node {:?}", f.node));
            }
            if !face_ids.insert((f.node.as_str(), f.id)) {
                errors.push(format!("{label}: duplicate face id"));
            }
            if f.local.scheme != f.remote.scheme {
                errors.push(format!("{label}: local and remote use different schemes"));
            }
            if let Some(p) = &f.profile {
                if let Err(e) = p.validate() {
                    errors.push(format!("{label}: {e}"));
                }
            }
        }
        if let Err(e) = self.sim.validate() {
            errors.push(format!("sim: {e}"));
        }
        let pairs = match self.face_pairs() {
            Ok(p) => Some(p),
            Err(e) => {
                errors.extend(e);
                None
            }
        };

        for (i, r) in self.routes.iter().enumerate() {
            let label = format!("routes[{i}] ({} {} -> face {})", r.node, r.prefix, r.face);
            if !known(&r.node) {
                errors.push(format!("{label}: unknown node"));
            }
            if let Err(e) = Name::parse(&r.prefix) {
                errors.push(format!("{label}: {e}"));
            }
            if !face_ids.contains(&(r.node.as_str(), r.face)) {
                errors.push(format!("{label}: no such face on that node"));
            }
        }

        let mut stream_names = BTreeSet::new();
        for (i, s) in self.streams.iter().enumerate() {
            let label = format!("streams[{i}] ({})", s.name);
            if !stream_names.insert(s.name.as_str()) {
                errors.push(format!("{label}: duplicate stream name"));
            }
            if let Err(e) = s.spec(Serialization::Bytes) {
                errors.push(format!("{label}: {e}"));
            }
            if s.period_us < MIN_PERIOD_US {
                continue;
            }
            if !known(&s.producer) {
                errors.push(format!("{label}: unknown producer {:?}", s.producer));
            }
            if s.consumers.is_empty() {
                errors.push(format!("{label}: no consumers"));
            }
            let mut seen = BTreeSet::new();
            for c in &s.consumers {
                if !known(c) {
                    errors.push(format!("{label}: unknown consumer {c:?}"));
                } else if !seen.insert(c) {
                    errors.push(format!("{label}: consumer {c:?} listed twice"));
                } else if c == &s.producer {
                    errors.push(format!("{label}: consumer {c:?} is also the producer"));
                } else if let (Some(pairs), Ok(name)) = (&pairs, Name::parse(&s.name)) {
                    if let Err(e) = self.route_path(pairs, c, &s.producer, &name) {
                        errors.push(format!("{label}: {e}"));
                    }
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    /// Follows longest-prefix routes from `from` until `to` is reached.
    fn route_path(&self, pairs: &FacePairs, from: &str, to: &str, name: &Name) -> Result<(), String> {
        let mut at = from.to_string();
        for _ in 0..MAX_HOPS {
            if at == to {
                return Ok(());
            }
            let route = self
                .routes
                .iter()
                .filter(|r| r.node == at)
                .filter_map(|r| Name::parse(&r.prefix).ok().map(|p| (p, r)))
                .filter(|(p, _)| p.is_prefix_of(name))
                .max_by_key(|(p, _)| p.len())
                .map(|(_, r)| r)
                .ok_or_else(|| format!("no route from {at} toward {name}"))?;
            let face = self
                .faces
                .iter()
                .position(|f| f.node == at && f.id == route.face)
                .ok_or_else(|| format!("route on {at} uses a missing face"))?;
            at = self.faces[pairs[face]].node.clone();
        }
        Err(format!("routes from {from} toward {name} loop"))
    }

    /// Pub/sub endpoint of `node`, resolved.
    pub fn pubsub_addr(&self, node: &str) -> Result<SocketAddr, String> {
        let ep = self
            .node(node)
            .and_then(|n| n.pubsub.as_ref())
            .ok_or_else(|| format!("node {node} has no pubsub endpoint"))?;
        ep.socket_addr().map_err(|e| e.to_string())
    }

    /// Checks what the pub/sub arm needs beyond [`Config::validate`].
    pub fn validate_pubsub(&self) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        let mut producers = BTreeSet::new();
        for s in &self.streams {
            producers.insert(s.producer.as_str());
            for n in std::iter::once(&s.producer).chain(&s.consumers) {
                if let Err(e) = self.pubsub_addr(n) {
                    errors.push(format!("streams ({}): {e}", s.name));
                }
            }
        }
        let consumers: BTreeSet<&str> =
            self.streams.iter().flat_map(|s| s.consumers.iter().map(String::as_str)).collect();
        for both in producers.intersection(&consumers) {
            errors.push(format!("node {both} both publishes and subscribes; not supported by the pubsub arm"));
        }
        errors.dedup();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    /// Rewrites every udp/tcp port to one picked by `pick`, keeping paired
    /// faces consistent. Hosts are kept. Used to run the built-in topology
    /// where its fixed ports are taken.
    pub fn remap_ports(&mut self, mut pick: impl FnMut(&Endpoint) -> u16) {
        let mut mapping: BTreeMap<(String, u16), u16> = BTreeMap::new();
        let mut remap = |ep: &mut Endpoint| {
            if ep.scheme == Scheme::Sim {
                return;
            }
            let key = (ep.host.clone(), ep.port);
            let port = *mapping.entry(key).or_insert_with(|| pick(ep));
            ep.port = port;
        };
        for n in &mut self.nodes {
            if let Some(ep) = &mut n.pubsub {
                remap(ep);
            }
        }
        for f in &mut self.faces {
            remap(&mut f.local);
            remap(&mut f.remote);
        }
    }
}

impl Config {
    /// [`Config::remap_ports`] onto ports the OS reports free for both UDP
    /// and TCP on each endpoint's host.
    pub fn remap_to_free_ports(&mut self) -> std::io::Result<()> {
        let mut failure = None;
        self.remap_ports(|ep| match free_port(&ep.host) {
            Ok(p) => p,
            Err(e) => {
                failure.get_or_insert(e);
                ep.port
            }
        });
        failure.map_or(Ok(()), Err)
    }
}

fn free_port(host: &str) -> std::io::Result<u16> {
    let mut last = None;
    for _ in 0..32 {
        let listener = std::net::TcpListener::bind((host, 0))?;
        let port = listener.local_addr()?.port();
        match std::net::UdpSocket::bind((host, port)) {
            Ok(_) => return Ok(port),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| std::io::ErrorKind::AddrInUse.into()))
}

fn faces_pair(a: &FaceConfig, b: &FaceConfig) -> bool {
    if a.local.scheme == Scheme::Sim || b.local.scheme == Scheme::Sim {
        return a.local.scheme == Scheme::Sim && b.local.scheme == Scheme::Sim && a.local.host == b.local.host;
    }
    same_addr(&a.local, &b.remote) && same_addr(&a.remote, &b.local)
}

fn same_addr(a: &Endpoint, b: &Endpoint) -> bool {
    a.host.eq_ignore_ascii_case(&b.host) && a.port == b.port
}

struct FaceLabel<'a>(usize, &'a FaceConfig);

impl fmt::Display for FaceLabel<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "faces[{}] ({} face {})", self.0, self.1.node, self.1.id)
    }
}

/// Text of the built-in topology, also shipped as `configs/builtin.toml`.
pub const BUILTIN_TOML: &str = include_str!("../../configs/builtin.toml");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_topology() {
        let c = Config::builtin();
        assert_eq!(c.nodes.len(), 4);
        assert_eq!(c.faces.len(), 6);
        assert_eq!(c.streams.len(), 3);
        assert_eq!(c.warmup_ms, 500);
        let prefixes: std::collections::BTreeSet<&str> = c.routes.iter().map(|r| r.prefix.as_str()).collect();
        assert_eq!(prefixes.into_iter().collect::<Vec<_>>(), vec!["/trailer/cam", "/trailer/can", "/trailer/lidar"]);
        assert_eq!(c.routes.len(), 6);
        let pairs = c.face_pairs().unwrap();
        for (i, &j) in pairs.iter().enumerate() {
            assert_eq!(pairs[j], i);
        }
        c.validate_pubsub().unwrap();
        let labels: Vec<String> = c.stream_labels().into_iter().map(|l| l.2).collect();
        assert_eq!(labels, vec!["/trailer/lidar", "/trailer/can", "/trailer/cam"]);
    }

    #[test]
    fn toml_round_trip() {
        let c = Config::builtin();
        assert_eq!(Config::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_field_is_a_parse_error_with_location() {
        let text = BUILTIN_TOML.replacen("payload_bytes", "payload_size", 1);
        match Config::from_toml(&text) {
            Err(ConfigError::Parse(m)) => {
                assert!(m.contains("payload_size"), "{m}");
                assert!(m.contains("line"), "{m}");
            }
            other => panic!("{other:?}"),
        }
    }

    fn invalid(text: &str) -> Vec<String> {
        match Config::from_toml(text) {
            Err(ConfigError::Invalid(e)) => e,
            other => panic!("expected invalid, got {other:?}"),
        }
    }

    #[test]
    fn semantic_errors_name_the_entry() {
        let e = invalid(&BUILTIN_TOML.replacen("period_us = 5000", "period_us = 50", 1));
        assert!(e.iter().any(|m| m.contains("streams[0] (/trailer/lidar)") && m.contains("period_us")), "{e:?}");

        let e = invalid(&BUILTIN_TOML.replacen("producer = \"pc\"", "producer = \"ghost\"", 1));
        assert!(e.iter().any(|m| m.contains("unknown producer \"ghost\"")), "{e:?}");

        let e = invalid(&BUILTIN_TOML.replacen("node = \"rpi1\"\nprefix = \"/trailer/lidar\"", "node = \"rpi1\"\nprefix = \"/elsewhere\"", 1));
        assert!(e.iter().any(|m| m.contains("no route from rpi1")), "{e:?}");

        let e = invalid(&BUILTIN_TOML.replacen("face = 3", "face = 4", 1));
        assert!(e.iter().any(|m| m.contains("routes[2] (pc /trailer/cam -> face 4): no such face")), "{e:?}");
    }

    #[test]
    fn unpaired_face_is_reported() {
        let mut c = Config::builtin();
        c.faces[0].remote.port += 1;
        let errors = c.face_pairs().unwrap_err();
        assert!(errors.iter().any(|m| m.starts_with("faces[0] (pc face 1)")), "{errors:?}");
    }

    #[test]
    fn remap_keeps_pairs() {
        let mut c = Config::builtin();
        let mut next = 20_000;
        c.remap_ports(|_| {
            next += 1;
            next
        });
        let pairs = c.face_pairs().unwrap();
        assert_eq!(pairs.len(), 6);
        assert!(c.faces.iter().all(|f| f.local.port > 20_000));
        c.validate().unwrap();
    }

    #[test]
    fn multi_consumer_labels() {
        let mut c = Config::builtin();
        c.streams[1].consumers.push("rpi1".into());
        let labels: Vec<String> = c.stream_labels().into_iter().map(|l| l.2).collect();
        assert!(labels.contains(&"/trailer/can@rpi2".to_string()));
        assert!(labels.contains(&"/trailer/can@rpi1".to_string()));
    }
}
