//! Runs nodes over real sockets, as threads of this process or as child
//! processes.

use std::collections::BTreeMap;
use std::net::{SocketAddr, UdpSocket};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crate::forwarder::FaceId;
use crate::traffic::{NodeLogic, NodeReport, Peer, Transmit};
use crate::transport::{
    open_face, Clock, Face, FaceEvent, FaceOptions, MonotonicClock, Time, UnixClock, MAX_DATAGRAM,
};

use super::{build_node, cpu, drain_time, sort_reports, BenchError, Config, RunOptions, RunParams, Wiring};

/// Lead time between spawning node processes and their common start.
const PROCESS_LEAD: Duration = Duration::from_secs(2);

/// Lead time between all node threads being ready and their common start.
const THREAD_LEAD: Duration = Duration::from_millis(50);

enum Io {
    Ndn { faces: BTreeMap<FaceId, Box<dyn Face>>, events: Receiver<FaceEvent> },
    PubSub {
        socket: UdpSocket,
        events: Receiver<(SocketAddr, Vec<u8>)>,
        stop: Arc<AtomicBool>,
        reader: Option<thread::JoinHandle<()>>,
    },
}

impl Io {
    fn open(config: &Config, params: &RunParams, wiring: Wiring) -> Result<Io, String> {
        match wiring {
            Wiring::Ndn(list) => {
                let scheme = params.arm.face_scheme().expect("ndn arm");
                let (tx, events) = mpsc::channel();
                let mut faces = BTreeMap::new();
                for (cfg, id) in list {
                    let f = &config.faces[cfg];
                    let local = f.local.with_scheme(scheme);
                    let remote = f.remote.with_scheme(scheme);
                    let face = open_face(id, &local, &remote, tx.clone(), FaceOptions::default())
                        .map_err(|e| format!("face {} ({local} -> {remote}): {e}", f.id))?;
                    faces.insert(id, face);
                }
                Ok(Io::Ndn { faces, events })
            }
            Wiring::PubSub(addr) => {
                let socket = UdpSocket::bind(addr).map_err(|e| format!("bind {addr}: {e}"))?;
                let reader = socket.try_clone().map_err(|e| e.to_string())?;
                reader.set_read_timeout(Some(Duration::from_millis(50))).map_err(|e| e.to_string())?;
                let (tx, events) = mpsc::channel();
                let stop = Arc::new(AtomicBool::new(false));
                let reader_stop = stop.clone();
                let reader = thread::spawn(move || {
                    let mut buf = vec![0u8; MAX_DATAGRAM];
                    while !reader_stop.load(Ordering::Relaxed) {
                        if let Ok((n, from)) = reader.recv_from(&mut buf) {
                            if tx.send((from, buf[..n].to_vec())).is_err() {
                                break;
                            }
                        }
                    }
                });
                Ok(Io::PubSub { socket, events, stop, reader: Some(reader) })
            }
        }
    }

    fn recv(&mut self, wait: Duration, errors: &mut Vec<String>) -> Option<(Peer, Vec<u8>)> {
        match self {
            Io::Ndn { events, .. } => match events.recv_timeout(wait) {
                Ok(FaceEvent::Packet { face, bytes }) => Some((Peer::Face(face), bytes)),
                Ok(FaceEvent::Closed { face }) => {
                    errors.push(format!("face {} closed", face.0));
                    None
                }
                Err(RecvTimeoutError::Timeout | RecvTimeoutError::Disconnected) => None,
            },
            Io::PubSub { events, .. } => {
                events.recv_timeout(wait).ok().map(|(from, bytes)| (Peer::Addr(from), bytes))
            }
        }
    }

    fn send(&mut self, t: &Transmit) -> bool {
        match (self, t.to) {
            (Io::Ndn { faces, .. }, Peer::Face(id)) => {
                faces.get_mut(&id).is_some_and(|f| f.send(&t.bytes).is_ok())
            }
            (Io::PubSub { socket, .. }, Peer::Addr(to)) => socket.send_to(&t.bytes, to).is_ok(),
            _ => false,
        }
    }

    fn close(&mut self) {
        match self {
            Io::Ndn { faces, .. } => faces.values_mut().for_each(|f| f.close()),
            Io::PubSub { stop, reader, .. } => {
                stop.store(true, Ordering::Relaxed);
                if let Some(r) = reader.take() {
                    let _ = r.join();
                }
            }
        }
    }
}

fn transmit(node: &mut dyn NodeLogic, io: &mut Io, out: &mut Vec<Transmit>) {
    for t in out.drain(..) {
        if !io.send(&t) {
            node.on_send_failure(t.to);
        }
    }
}

/// Drives `node` until `end` on `clock`. Returns the report with CPU usage.
fn event_loop(
    mut node: Box<dyn NodeLogic>,
    mut io: Io,
    clock: &dyn Clock,
    end: Time,
    cpu_time: fn() -> Duration,
) -> NodeReport {
    thread::sleep(clock.until_epoch());
    let wall_start = Instant::now();
    let cpu_start = cpu_time();
    let mut errors = Vec::new();
    let mut out = Vec::new();
    loop {
        let now = clock.now();
        if now >= end {
            break;
        }
        if node.next_deadline().is_some_and(|t| t <= now) {
            node.on_timer(now, &mut out);
            transmit(node.as_mut(), &mut io, &mut out);
            continue;
        }
        let until = node.next_deadline().map_or(end, |t| t.min(end));
        if let Some((from, bytes)) = io.recv(until - now, &mut errors) {
            node.on_packet(from, &bytes, clock.now(), &mut out);
            transmit(node.as_mut(), &mut io, &mut out);
        }
    }
    let cpu = cpu_time() - cpu_start;
    io.close();
    let mut report = node.report();
    report.errors.extend(errors);
    report.cpu_percent = Some(cpu::percent(cpu, wall_start.elapsed()));
    report
}

fn end_time(config: &Config, params: &RunParams) -> Time {
    Time::ZERO + params.duration + drain_time(config)
}

pub(crate) fn run(config: &Config, options: &RunOptions) -> Result<Vec<NodeReport>, BenchError> {
    match &options.node_exe {
        Some(exe) => run_processes(config, options, exe),
        None => run_threads(config, &options.params),
    }
}

fn run_threads(config: &Config, params: &RunParams) -> Result<Vec<NodeReport>, BenchError> {
    let end = end_time(config, params);
    let mut handles = Vec::new();
    let mut ready = Vec::new();
    let mut go = Vec::new();
    for index in 0..config.nodes.len() {
        let Some((logic, wiring)) = build_node(config, params, index)? else { continue };
        let (ready_tx, ready_rx) = mpsc::channel::<Result<(), String>>();
        let (go_tx, go_rx) = mpsc::channel::<Instant>();
        let config = config.clone();
        let params = *params;
        let name = config.nodes[index].name.clone();
        let handle = thread::Builder::new()
            .name(name.clone())
            .spawn(move || -> Option<NodeReport> {
                let io = match Io::open(&config, &params, wiring) {
                    Ok(io) => io,
                    Err(e) => {
                        let _ = ready_tx.send(Err(format!("node {name}: {e}")));
                        return None;
                    }
                };
                let _ = ready_tx.send(Ok(()));
                let epoch = go_rx.recv().ok()?;
                let clock = MonotonicClock::starting_at(epoch);
                Some(event_loop(logic, io, &clock, end, cpu::thread_cpu_time))
            })
            .map_err(|e| BenchError::Runtime(e.to_string()))?;
        handles.push(handle);
        ready.push(ready_rx);
        go.push(go_tx);
    }
    let mut failures = Vec::new();
    for rx in &ready {
        match rx.recv() {
            Ok(Ok(())) => {}
            Ok(Err(e)) => failures.push(e),
            Err(_) => failures.push("node thread exited during setup".into()),
        }
    }
    if failures.is_empty() {
        let epoch = Instant::now() + THREAD_LEAD;
        for tx in &go {
            let _ = tx.send(epoch);
        }
    }
    drop(go);
    let mut reports = Vec::new();
    for h in handles {
        match h.join() {
            Ok(Some(r)) => reports.push(r),
            Ok(None) => {}
            Err(_) => failures.push("node thread panicked".into()),
        }
    }
    if !failures.is_empty() {
        return Err(BenchError::Setup(failures.join("; ")));
    }
    Ok(sort_reports(config, reports))
}

/// Arguments of one node process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeProcessArgs {
    pub config: PathBuf,
    pub params: RunParams,
    pub node: String,
    /// Unix time, in microseconds, that all nodes treat as t = 0.
    pub epoch_unix_us: u64,
    pub report: PathBuf,
}

impl NodeProcessArgs {
    /// Arguments for the `node` subcommand, after the subcommand name.
    pub fn to_args(&self) -> Vec<String> {
        vec![
            "--config".into(),
            self.config.display().to_string(),
            "--arm".into(),
            self.params.arm.to_string(),
            "--serialization".into(),
            self.params.serialization.to_string(),
            "--duration-us".into(),
            self.params.duration.as_micros().to_string(),
            "--seed".into(),
            self.params.seed.to_string(),
            "--node".into(),
            self.node.clone(),
            "--epoch-unix-us".into(),
            self.epoch_unix_us.to_string(),
            "--report".into(),
            self.report.display().to_string(),
        ]
    }
}

/// Runs a single node of a multi-process run and writes its report as JSON.
pub fn run_node_process(args: &NodeProcessArgs) -> Result<(), BenchError> {
    let config = Config::load(&args.config)?;
    let index = config
        .nodes
        .iter()
        .position(|n| n.name == args.node)
        .ok_or_else(|| BenchError::Setup(format!("no node named {}", args.node)))?;
    let Some((logic, wiring)) = build_node(&config, &args.params, index)? else {
        return write_json(&args.report, &NodeReport { node: args.node.clone(), ..NodeReport::default() });
    };
    let io = Io::open(&config, &args.params, wiring).map_err(BenchError::Setup)?;
    let clock = UnixClock::new(args.epoch_unix_us);
    let report = event_loop(logic, io, &clock, end_time(&config, &args.params), cpu::process_cpu_time);
    write_json(&args.report, &report)
}

fn write_json(path: &Path, report: &NodeReport) -> Result<(), BenchError> {
    let text = serde_json::to_string(report).map_err(|e| BenchError::Output(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| BenchError::Output(format!("{}: {e}", path.display())))
}

fn run_processes(config: &Config, options: &RunOptions, exe: &Path) -> Result<Vec<NodeReport>, BenchError> {
    let params = &options.params;
    let work = options.out.join(".nodes");
    std::fs::create_dir_all(&work).map_err(|e| BenchError::Output(format!("{}: {e}", work.display())))?;
    let config_path = work.join("config.toml");
    std::fs::write(&config_path, config.to_toml()).map_err(|e| BenchError::Output(e.to_string()))?;
    let epoch_unix_us = UnixClock::unix_now_us() + PROCESS_LEAD.as_micros() as u64;

    let mut children: Vec<(String, PathBuf, Child)> = Vec::new();
    for node in &config.nodes {
        let report = work.join(format!("{}.json", node.name));
        let args = NodeProcessArgs {
            config: config_path.clone(),
            params: *params,
            node: node.name.clone(),
            epoch_unix_us,
            report: report.clone(),
        };
        let child = Command::new(exe)
            .arg("node")
            .args(args.to_args())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| BenchError::Runtime(format!("spawn {}: {e}", exe.display())));
        match child {
            Ok(c) => children.push((node.name.clone(), report, c)),
            Err(e) => {
                for (_, _, c) in &mut children {
                    let _ = c.kill();
                }
                return Err(e);
            }
        }
    }

    let mut failures = Vec::new();
    let mut reports = Vec::new();
    for (name, path, child) in children {
        let output = child.wait_with_output().map_err(|e| BenchError::Runtime(e.to_string()))?;
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            failures.push(format!("node {name} exited with {}: {}", output.status, stderr.trim()));
            continue;
        }
        let text = std::fs::read_to_string(&path).map_err(|e| BenchError::Runtime(format!("{name}: {e}")))?;
        let report: NodeReport =
            serde_json::from_str(&text).map_err(|e| BenchError::Runtime(format!("{name}: {e}")))?;
        // nodes without a role in this arm report no CPU usage
        if report.cpu_percent.is_some() {
            reports.push(report);
        }
    }
    let _ = std::fs::remove_dir_all(&work);
    if !failures.is_empty() {
        return Err(BenchError::Runtime(failures.join("; ")));
    }
    Ok(sort_reports(config, reports))
}
