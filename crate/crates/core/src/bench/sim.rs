//! Deterministic discrete-event runner over simulated links.

use std::collections::BTreeMap;

use crate::traffic::{NodeLogic, NodeReport, Peer, Transmit};
use crate::transport::{LinkProfile, SimEnd, SimNetwork, Time};

use super::{build_node, drain_time, sort_reports, Arm, BenchError, Config, RunParams, Wiring};

struct Driver {
    net: SimNetwork,
    nodes: Vec<Box<dyn NodeLogic>>,
    /// (sending node, destination as the sender names it) to link end.
    outbound: BTreeMap<(usize, Peer), SimEnd>,
    /// Receiving link end to (node, source as the receiver names it).
    inbound: BTreeMap<SimEnd, (usize, Peer)>,
}

impl Driver {
    fn dispatch(&mut self, node: usize, out: &mut Vec<Transmit>, now: Time) {
        for t in out.drain(..) {
            match self.outbound.get(&(node, t.to)) {
                Some(&end) => {
                    self.net.send(end, t.bytes, now);
                }
                None => self.nodes[node].on_send_failure(t.to),
            }
        }
    }
}

fn link_profile(base: LinkProfile, seed: u64, link: usize) -> LinkProfile {
    LinkProfile {
        seed: base.seed ^ seed.rotate_left(17) ^ (link as u64).wrapping_mul(0xD1B5_4A32_D192_ED03),
        ..base
    }
}

fn open(net: &mut SimNetwork, arm: Arm, profile: LinkProfile) -> Result<(SimEnd, SimEnd), BenchError> {
    let link = if arm == Arm::NdnTcp { net.open_ordered_link(profile) } else { net.open_sim_link(profile) };
    link.map_err(|e| BenchError::Setup(e.to_string()))
}

/// Profile for a link between config nodes `a` and `b`: that of the first
/// face joining them, or the config default.
fn profile_between(config: &Config, a: &str, b: &str) -> LinkProfile {
    let pairs = config.face_pairs().unwrap_or_default();
    config
        .faces
        .iter()
        .enumerate()
        .find(|(i, f)| {
            let other = &config.faces[pairs[*i]];
            (f.node == a && other.node == b) || (f.node == b && other.node == a)
        })
        .and_then(|(_, f)| f.profile)
        .unwrap_or(config.sim)
}

pub(crate) fn run(config: &Config, params: &RunParams) -> Result<Vec<NodeReport>, BenchError> {
    let mut nodes = Vec::new();
    let mut wiring = Vec::new();
    let mut names = Vec::new();
    for index in 0..config.nodes.len() {
        if let Some((logic, w)) = build_node(config, params, index)? {
            names.push(config.nodes[index].name.clone());
            nodes.push(logic);
            wiring.push(w);
        }
    }
    let mut d = Driver { net: SimNetwork::new(), nodes, outbound: BTreeMap::new(), inbound: BTreeMap::new() };

    if params.arm == Arm::Pubsub {
        let addrs: Vec<_> = wiring
            .iter()
            .map(|w| match w {
                Wiring::PubSub(a) => *a,
                Wiring::Ndn(_) => unreachable!("pubsub arm builds pubsub nodes"),
            })
            .collect();
        let mut link = 0;
        for s in &config.streams {
            let p = names.iter().position(|n| *n == s.producer).expect("validated producer");
            for c in &s.consumers {
                let c = names.iter().position(|n| n == c).expect("validated consumer");
                if d.outbound.contains_key(&(c, Peer::Addr(addrs[p]))) {
                    continue;
                }
                let base = profile_between(config, &names[p], &names[c]);
                let (pe, ce) = open(&mut d.net, params.arm, link_profile(base, params.seed, link))?;
                link += 1;
                d.outbound.insert((p, Peer::Addr(addrs[c])), pe);
                d.outbound.insert((c, Peer::Addr(addrs[p])), ce);
                d.inbound.insert(ce, (c, Peer::Addr(addrs[p])));
                d.inbound.insert(pe, (p, Peer::Addr(addrs[c])));
            }
        }
    } else {
        let pairs = config.face_pairs().map_err(|e| BenchError::Setup(e.join("; ")))?;
        let mut owner = BTreeMap::new();
        for (n, w) in wiring.iter().enumerate() {
            if let Wiring::Ndn(faces) = w {
                for &(cfg, fid) in faces {
                    owner.insert(cfg, (n, fid));
                }
            }
        }
        for (i, &j) in pairs.iter().enumerate() {
            if j < i {
                continue;
            }
            let base = config.faces[i].profile.or(config.faces[j].profile).unwrap_or(config.sim);
            let (ei, ej) = open(&mut d.net, params.arm, link_profile(base, params.seed, i))?;
            let (ni, fi) = owner[&i];
            let (nj, fj) = owner[&j];
            d.outbound.insert((ni, Peer::Face(fi)), ei);
            d.outbound.insert((nj, Peer::Face(fj)), ej);
            d.inbound.insert(ej, (nj, Peer::Face(fj)));
            d.inbound.insert(ei, (ni, Peer::Face(fi)));
        }
    }

    let end = Time::ZERO + params.duration + drain_time(config);
    let mut out = Vec::new();
    loop {
        let next_timer = d.nodes.iter().filter_map(|n| n.next_deadline()).min();
        let now = match (d.net.next_delivery(), next_timer) {
            (Some(a), Some(b)) => a.min(b),
            (a, b) => match a.or(b) {
                Some(t) => t,
                None => break,
            },
        };
        if now > end {
            break;
        }
        while let Some((end_point, bytes)) = d.net.poll_one(now) {
            let (node, from) = d.inbound[&end_point];
            d.nodes[node].on_packet(from, &bytes, now, &mut out);
            d.dispatch(node, &mut out, now);
        }
        for node in 0..d.nodes.len() {
            if d.nodes[node].next_deadline().is_some_and(|t| t <= now) {
                d.nodes[node].on_timer(now, &mut out);
                d.dispatch(node, &mut out, now);
            }
        }
    }
    Ok(sort_reports(config, d.nodes.iter().map(|n| n.report()).collect()))
}
