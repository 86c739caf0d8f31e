//! Acceptance checks, one line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the PASS/FAIL lines always
//! reach the terminal. Exits non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use drawbar::bench::{self, Arm, Config, RunOptions, RunOutcome, RunParams};
use drawbar::forwarder::{ContentStore, Effect, FaceId, FaceKind, Fib, Forwarder};
use drawbar::mux::{self, Frame, Protocol};
use drawbar::packet::{Data, Interest, Name, MAX_PACKET_SIZE};
use drawbar::payload::Serialization;
use drawbar::tlv::{self, Packet, TlvError};
use drawbar::transport::Time;
use drawbar::PacketError;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- generators

fn random_name(rng: &mut ChaCha8Rng) -> Name {
    let n = rng.gen_range(1..=6);
    let comps: Vec<Vec<u8>> = (0..n)
        .map(|_| {
            let len = rng.gen_range(1..=24);
            (0..len).map(|_| rng.gen()).collect()
        })
        .collect();
    Name::from_components(comps).unwrap()
}

fn random_bytes(rng: &mut ChaCha8Rng, max: usize) -> Vec<u8> {
    let len = rng.gen_range(0..=max);
    let mut v = vec![0u8; len];
    rng.fill_bytes(&mut v);
    v
}

fn random_interest(rng: &mut ChaCha8Rng) -> Interest {
    let sig = rng.gen_bool(0.5).then(|| random_bytes(rng, 64));
    Interest::new(random_name(rng), rng.gen())
        .with_lifetime_ms(rng.gen_range(1..=u32::MAX))
        .unwrap()
        .with_must_be_fresh(rng.gen())
        .with_signature(sig)
}

fn random_data(rng: &mut ChaCha8Rng) -> Data {
    let max = if rng.gen_bool(0.1) { 8000 } else { 600 };
    let content = random_bytes(rng, max);
    Data::new(random_name(rng), content, rng.gen(), random_bytes(rng, 64)).unwrap()
}

// ---------------------------------------------------------------- criterion 1

fn codec_round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cases = 10_000;
    for i in 0..cases {
        let packet = if i % 2 == 0 {
            Packet::Interest(random_interest(&mut rng))
        } else {
            Packet::Data(random_data(&mut rng))
        };
        let bytes = packet.encode().map_err(|e| format!("case {i}: encode failed: {e}"))?;
        let back = Packet::decode(&bytes).map_err(|e| format!("case {i}: decode failed: {e}"))?;
        ensure(back == packet, || format!("case {i}: decode(encode(p)) != p"))?;
        let again = back.encode().unwrap();
        ensure(again == bytes, || format!("case {i}: encode(decode(b)) != b"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("{cases} packets, 0 failures, {:.2} s", elapsed.as_secs_f64()))
}

// ---------------------------------------------------------------- criterion 2

fn packet_cap() -> Outcome {
    let name = Name::parse("/trailer/cam").unwrap();
    // name TLV 2 + 9 + 5 = 16, freshness 6, signature 2, content header 1 + 3,
    // outer header 1 + 3: 8800 - 32 = 8768 bytes of content fill the cap.
    let at_cap = Data::new(name.clone(), vec![7; 8768], 20, vec![])
        .map_err(|e| format!("data at the cap rejected: {e}"))?;
    let wire = tlv::encode_data(&at_cap).unwrap();
    ensure(wire.len() == MAX_PACKET_SIZE, || format!("data at the cap encodes to {} bytes", wire.len()))?;
    ensure(tlv::decode_data(&wire).as_ref() == Ok(&at_cap), || "cap-size data does not decode".into())?;
    ensure(
        Data::new(name.clone(), vec![7; 8769], 20, vec![]) == Err(PacketError::OversizePacket(8801)),
        || "one byte over the cap was not rejected".into(),
    )?;
    let mut over = wire.clone();
    over.push(0);
    ensure(
        matches!(tlv::decode_data(&over), Err(TlvError::OversizePacket(8801))),
        || "an 8801-byte input was not rejected by the decoder".into(),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut accepted = 0;
    let mut rejected = 0;
    for i in 0..2_000 {
        let name = random_name(&mut rng);
        let content_len = rng.gen_range(8_500..=8_900);
        let sig_len = rng.gen_range(0..=40);
        let size = tlv::data_encoded_len(&name, content_len, sig_len);
        match Data::new(name, vec![0; content_len], 1, vec![1; sig_len]) {
            Ok(d) => {
                ensure(size <= MAX_PACKET_SIZE, || format!("case {i}: {size} bytes accepted"))?;
                let len = tlv::encode_data(&d).unwrap().len();
                ensure(len == size, || format!("case {i}: encoded {len}, predicted {size}"))?;
                accepted += 1;
            }
            Err(PacketError::OversizePacket(n)) => {
                ensure(n == size && size > MAX_PACKET_SIZE, || format!("case {i}: {size} bytes rejected"))?;
                rejected += 1;
            }
            Err(e) => return Err(format!("case {i}: unexpected error {e}")),
        }
    }
    Ok(format!("8800 accepted, 8801 rejected; random sizes around the cap: {accepted} accepted, {rejected} rejected"))
}

// ---------------------------------------------------------------- criterion 3

fn random_frames(rng: &mut ChaCha8Rng) -> Vec<Frame> {
    let n = rng.gen_range(1..=10);
    (0..n)
        .map(|_| {
            let protocol = *Protocol::ALL.choose(rng).unwrap();
            let len = if rng.gen_bool(0.1) { rng.gen_range(0..=1600) } else { rng.gen_range(0..=64) };
            let mut payload = vec![0u8; len];
            rng.fill_bytes(&mut payload);
            // few distinct priorities and timestamps so ties are common
            Frame::new(rng.gen_range(0..4), rng.gen_range(0..4), protocol, payload).unwrap()
        })
        .collect()
}

fn frame_key(f: &Frame) -> (u8, u64, u8, Vec<u8>) {
    (f.priority(), f.timestamp_us(), f.protocol().id(), f.payload().to_vec())
}

fn multiplexer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut round_trips = 0;
    let mut oversize = 0;
    while round_trips < 10_000 {
        let frames = random_frames(&mut rng);
        let mut key = [0u8; 32];
        rng.fill_bytes(&mut key);
        let key = rng.gen_bool(0.5).then_some(&key[..]);
        let bytes = match mux::pack(&frames, rng.gen(), key) {
            Ok(b) => b,
            Err(mux::MuxError::OversizeConstruct { size, budget }) => {
                ensure(size > budget, || "oversize reported under budget".into())?;
                oversize += 1;
                continue;
            }
            Err(e) => return Err(format!("pack failed: {e}")),
        };
        let c = mux::unpack(&bytes, key).map_err(|e| format!("unpack failed: {e}"))?;
        ensure(c.total_size as usize == bytes.len(), || {
            format!("total_size {} but {} bytes", c.total_size, bytes.len())
        })?;
        ensure(c.auth_tag.is_some() == key.is_some(), || "tag presence changed".into())?;
        let mut want: Vec<_> = frames.iter().map(frame_key).collect();
        let mut got: Vec<_> = c.frames.iter().map(frame_key).collect();
        want.sort();
        got.sort();
        ensure(want == got, || "frame multiset changed".into())?;
        round_trips += 1;
    }

    let mut detected = 0;
    for trial in 0..100 {
        let frames = random_frames(&mut rng);
        let mut key = [0u8; 32];
        rng.fill_bytes(&mut key);
        let Ok(mut bytes) = mux::pack(&frames, rng.gen(), Some(&key)) else { continue };
        let at = rng.gen_range(0..bytes.len());
        bytes[at] ^= rng.gen_range(1..=255u8);
        match mux::unpack(&bytes, Some(&key)) {
            Err(_) => detected += 1,
            Ok(_) => return Err(format!("trial {trial}: tamper at byte {at} not detected")),
        }
    }
    ensure(detected == 100, || format!("only {detected} tamper trials ran"))?;
    Ok(format!("{round_trips} round trips ({oversize} oversize rejected), tamper detected 100/100"))
}

// ---------------------------------------------------------------- criterion 4

fn n(uri: &str) -> Name {
    Name::parse(uri).unwrap()
}

fn sends(effects: &[Effect]) -> (Vec<FaceId>, Vec<FaceId>) {
    let mut interests = Vec::new();
    let mut data = Vec::new();
    for e in effects {
        match e {
            Effect::SendInterest { face, .. } => interests.push(*face),
            Effect::SendData { face, .. } => data.push(*face),
        }
    }
    (interests, data)
}

/// A forwarder with three network faces and `/trailer/can` routed to the third.
fn forwarder() -> (Forwarder, [FaceId; 3]) {
    let mut fw = Forwarder::new(16);
    let faces = [0; 3].map(|_| fw.add_face(FaceKind::Network));
    fw.add_route(n("/trailer/can"), faces[2]).unwrap();
    (fw, faces)
}

fn can_interest(nonce: u32) -> Interest {
    Interest::new(n("/trailer/can"), nonce).with_must_be_fresh(true)
}

fn can_data() -> Data {
    Data::new(n("/trailer/can"), vec![1; 160], 100, vec![]).unwrap()
}

fn forwarder_conformance() -> Outcome {
    let t = Time::from_millis;

    // (a) cache hit answers locally
    let (mut fw, [f1, f2, up]) = forwarder();
    let (i, _) = sends(&fw.on_interest(f1, can_interest(1), t(0)));
    ensure(i == vec![up], || format!("(a) first interest forwarded to {i:?}"))?;
    let (_, d) = sends(&fw.on_data(up, can_data(), t(1)));
    ensure(d == vec![f1], || format!("(a) data delivered to {d:?}"))?;
    let (i, d) = sends(&fw.on_interest(f2, can_interest(2), t(50)));
    ensure(i.is_empty() && d == vec![f2], || format!("(a) cache hit sent interests {i:?}, data {d:?}"))?;
    ensure(fw.counters().interests_out == 1 && fw.counters().cs_hits == 1, || "(a) counters".into())?;

    // (b) aggregation
    let (mut fw, [f1, f2, up]) = forwarder();
    let (i1, _) = sends(&fw.on_interest(f1, can_interest(1), t(0)));
    let (i2, _) = sends(&fw.on_interest(f2, can_interest(2), t(1)));
    ensure(i1.len() + i2.len() == 1, || format!("(b) {} upstream sends", i1.len() + i2.len()))?;
    let (i, mut d) = sends(&fw.on_data(up, can_data(), t(2)));
    d.sort();
    ensure(i.is_empty() && d == vec![f1, f2], || format!("(b) data delivered to {d:?}"))?;
    ensure(fw.pit().is_empty(), || "(b) PIT entry left behind".into())?;

    // (c) unsolicited data
    let (mut fw, [_, _, up]) = forwarder();
    let effects = fw.on_data(up, can_data(), t(0));
    ensure(effects.is_empty(), || "(c) unsolicited data forwarded".into())?;
    ensure(fw.cs().is_empty() && fw.counters().unsolicited == 1, || "(c) unsolicited data cached".into())?;

    // (d) data after PIT expiry
    let (mut fw, [f1, _, up]) = forwarder();
    let short = can_interest(1).with_lifetime_ms(100).unwrap();
    fw.on_interest(f1, short, t(0));
    let effects = fw.on_data(up, can_data(), t(101));
    ensure(effects.is_empty() && fw.counters().unsolicited == 1, || "(d) late data delivered".into())?;
    ensure(fw.cs().is_empty(), || "(d) late data cached".into())?;
    let (i, _) = sends(&fw.on_interest(f1, can_interest(2), t(102)));
    ensure(i == vec![up], || format!("(d) later interest forwarded to {i:?}"))?;
    let (mut fw, [f1, _, _]) = forwarder();
    fw.on_interest(f1, can_interest(3), t(0));
    fw.expire(t(4001));
    ensure(fw.pit().is_empty(), || "(d) 4000 ms entry alive at +4001 ms".into())?;

    // (e) longest prefix against brute force
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let alphabet = ["a", "b", "c"];
    let rand_name = |rng: &mut ChaCha8Rng, max: usize| {
        let len = rng.gen_range(1..=max);
        Name::from_components((0..len).map(|_| *alphabet.choose(rng).unwrap())).unwrap()
    };
    let mut matched = 0;
    for table in 0..1_000 {
        let mut fib = Fib::new();
        let mut entries: Vec<(Name, FaceId)> = Vec::new();
        for _ in 0..rng.gen_range(0..12) {
            let prefix = rand_name(&mut rng, 4);
            let face = FaceId(rng.gen_range(1..6));
            fib.add(prefix.clone(), face);
            entries.push((prefix, face));
        }
        let name = rand_name(&mut rng, 5);
        let oracle = entries
            .iter()
            .filter(|(p, _)| p.len() <= name.len() && (0..p.len()).all(|k| p.components()[k] == name.components()[k]))
            .map(|(p, _)| p)
            .max_by_key(|p| p.len());
        let got = fib.longest_prefix(&name).map(|(p, _)| p);
        ensure(got == oracle, || format!("(e) table {table}: {name} matched {got:?}, oracle {oracle:?}"))?;
        if let Some(prefix) = oracle {
            let first = entries.iter().find(|(p, _)| p == prefix).map(|(_, f)| *f).unwrap();
            let hops = fib.longest_prefix(&name).unwrap().1;
            ensure(hops[0] == first, || format!("(e) table {table}: first next hop {:?}, expected {first:?}", hops[0]))?;
            matched += 1;
        }
    }
    Ok(format!("(a)-(d) exact; (e) 1000 random tables agree with brute force ({matched} matches)"))
}

// ---------------------------------------------------------------- criterion 5

/// Reference LRU: a vector from least to most recently used.
struct ModelCs {
    capacity: usize,
    order: Vec<(Name, u64, u32)>,
}

impl ModelCs {
    fn insert(&mut self, name: &Name, now: u64, freshness_ms: u32) -> Option<Name> {
        self.order.retain(|(n, _, _)| n != name);
        self.order.push((name.clone(), now, freshness_ms));
        (self.order.len() > self.capacity).then(|| self.order.remove(0).0)
    }

    fn lookup(&mut self, name: &Name, must_be_fresh: bool, now: u64) -> bool {
        let Some(at) = self.order.iter().position(|(n, _, _)| n == name) else { return false };
        let (_, arrival, freshness) = self.order[at];
        let fresh = freshness > 0 && now - arrival <= freshness as u64 * 1000;
        if must_be_fresh && !fresh {
            return false;
        }
        let entry = self.order.remove(at);
        self.order.push(entry);
        true
    }
}

fn lru_model() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let names: Vec<Name> = (0..12).map(|i| n(&format!("/trailer/s{i}"))).collect();
    let mut evictions = 0;
    let traces = 100;
    for trace in 0..traces {
        let capacity = rng.gen_range(1..=8);
        let mut cs = ContentStore::new(capacity);
        let mut model = ModelCs { capacity, order: Vec::new() };
        let mut now = 0u64;
        let mut got_evicted = Vec::new();
        let mut want_evicted = Vec::new();
        for op in 0..1_000 {
            now += rng.gen_range(0..3_000);
            let name = names.choose(&mut rng).unwrap();
            if rng.gen_bool(0.5) {
                let freshness = rng.gen_range(0..5);
                let data = Data::new(name.clone(), vec![op as u8], freshness, vec![]).unwrap();
                got_evicted.extend(cs.insert(data, Time::from_micros(now)));
                want_evicted.extend(model.insert(name, now, freshness));
            } else {
                let must_be_fresh = rng.gen();
                let hit = cs.lookup(name, must_be_fresh, Time::from_micros(now)).is_some();
                let want = model.lookup(name, must_be_fresh, now);
                ensure(hit == want, || format!("trace {trace} op {op}: hit {hit}, model {want}"))?;
            }
            ensure(cs.len() <= capacity, || format!("trace {trace} op {op}: size above capacity"))?;
            let order: Vec<Name> = model.order.iter().map(|(n, _, _)| n.clone()).collect();
            ensure(cs.lru_order() == order, || format!("trace {trace} op {op}: recency order differs"))?;
        }
        ensure(got_evicted == want_evicted, || format!("trace {trace}: eviction sequences differ"))?;
        evictions += got_evicted.len();
    }
    Ok(format!("{traces} traces x 1000 ops, {evictions} evictions, sequences identical"))
}

// ---------------------------------------------------------------- real runs

struct Runs {
    root: tempfile::TempDir,
    config: Config,
    outcomes: BTreeMap<String, RunOutcome>,
}

impl Runs {
    fn new() -> Runs {
        let mut config = Config::builtin();
        if !builtin_ports_free(&config) {
            config.remap_to_free_ports().expect("free ports");
        }
        Runs { root: tempfile::tempdir().unwrap(), config, outcomes: BTreeMap::new() }
    }

    fn run(&mut self, arm: Arm, serialization: Serialization, secs: u64, sim: bool, seed: u64, tag: &str) -> Result<&RunOutcome, String> {
        let key = format!("{arm}-{serialization}-{secs}-{sim}-{seed}{tag}");
        if !self.outcomes.contains_key(&key) {
            let options = RunOptions {
                params: RunParams { arm, serialization, duration: Duration::from_secs(secs), seed },
                out: self.root.path().join(&key),
                sim,
                node_exe: None,
            };
            let outcome = bench::run(&self.config, &options).map_err(|e| format!("{key}: {e}"))?;
            self.outcomes.insert(key.clone(), outcome);
        }
        Ok(&self.outcomes[&key])
    }

    fn dirs(&self) -> Vec<PathBuf> {
        self.outcomes.values().map(|o| o.dir.clone()).collect()
    }
}

fn builtin_ports_free(config: &Config) -> bool {
    let mut endpoints: Vec<_> = config.faces.iter().map(|f| f.local.clone()).collect();
    endpoints.extend(config.nodes.iter().filter_map(|n| n.pubsub.clone()));
    endpoints.iter().all(|ep| {
        let addr = ep.socket_addr().unwrap();
        std::net::UdpSocket::bind(addr).is_ok() && std::net::TcpListener::bind(addr).is_ok()
    })
}

const NOMINAL_MS: [(&str, f64); 3] = [("/trailer/lidar", 5.0), ("/trailer/can", 8.0), ("/trailer/cam", 20.0)];

// ---------------------------------------------------------------- criterion 6

fn desk_run(runs: &mut Runs) -> Outcome {
    let start = Instant::now();
    let outcome = runs.run(Arm::NdnUdp, Serialization::Bytes, 10, false, 6, "")?;
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for (stream, nominal) in NOMINAL_MS {
        let s = outcome.summaries.iter().find(|s| s.stream == stream).ok_or(format!("{stream} missing"))?;
        let mean_ms = s.inter_arrival.mean / 1000.0;
        let within = (mean_ms - nominal).abs() <= 0.2 * nominal;
        if s.delivery_ratio < 0.95 || !within {
            failures.push(format!("{stream} ratio {:.3} mean {mean_ms:.3} ms", s.delivery_ratio));
        }
        parts.push(format!("{stream} {:.3} / {mean_ms:.3} ms", s.delivery_ratio));
    }
    ensure(failures.is_empty(), || failures.join("; "))?;
    Ok(format!("{} ({:.1} s)", parts.join(", "), start.elapsed().as_secs_f64()))
}

// ---------------------------------------------------------------- criterion 7

fn sizes_by_stream(dir: &Path) -> Result<BTreeMap<String, (usize, usize)>, String> {
    let mut out = BTreeMap::new();
    for (stream, _) in NOMINAL_MS {
        let file = dir.join(bench::report::arrivals_file(stream));
        let rows = bench::report::read_arrivals(&file).map_err(|e| e.to_string())?;
        ensure(!rows.is_empty(), || format!("{}: no arrivals captured", file.display()))?;
        let min = rows.iter().map(|r| r.size_bytes).min().unwrap();
        let max = rows.iter().map(|r| r.size_bytes).max().unwrap();
        out.insert(stream.to_string(), (min, max));
    }
    Ok(out)
}

fn serialization_sizes(runs: &mut Runs) -> Outcome {
    let mut parts = Vec::new();
    for arm in Arm::ALL {
        let bytes_secs = if arm == Arm::NdnUdp { 10 } else { 2 };
        let bytes = sizes_by_stream(&runs.run(arm, Serialization::Bytes, bytes_secs, false, 6, "")?.dir.clone())?;
        let string = sizes_by_stream(&runs.run(arm, Serialization::String, 10, false, 10, "")?.dir.clone())?;
        for (stream, (_, b_max)) in &bytes {
            let (s_min, _) = string[stream];
            ensure(*b_max < s_min, || format!("{arm} {stream}: bytes up to {b_max} B, string from {s_min} B"))?;
        }
        let lidar = "/trailer/lidar";
        parts.push(format!("{arm} lidar {} B < {} B", bytes[lidar].1, string[lidar].0));
    }
    Ok(parts.join(", "))
}

// ---------------------------------------------------------------- criterion 8

fn determinism(runs: &mut Runs) -> Outcome {
    let mut config = runs.config.clone();
    config.sim.jitter_stddev_us = 400;
    config.sim.loss_probability = 0.02;
    let root = runs.root.path().join("determinism");
    let mut files = 0;
    for arm in Arm::ALL {
        let run = |name: &str, seed: u64| {
            let options = RunOptions {
                params: RunParams { arm, serialization: Serialization::Bytes, duration: Duration::from_secs(5), seed },
                out: root.join(format!("{arm}-{name}")),
                sim: true,
                node_exe: None,
            };
            bench::run(&config, &options).map_err(|e| e.to_string())
        };
        let a = run("a", 42)?;
        let b = run("b", 42)?;
        let c = run("c", 43)?;
        let mut differs = false;
        for s in &a.manifest.streams {
            let fa = std::fs::read(a.dir.join(&s.file)).unwrap();
            let fb = std::fs::read(b.dir.join(&s.file)).unwrap();
            let fc = std::fs::read(c.dir.join(&s.file)).unwrap();
            ensure(fa == fb, || format!("{arm} {}: runs with the same seed differ", s.file))?;
            ensure(fa.len() > 100, || format!("{arm} {}: nearly empty", s.file))?;
            differs |= fa != fc;
            files += 1;
        }
        ensure(differs, || format!("{arm}: a different seed produced identical files"))?;
    }
    Ok(format!("{files} arrival files byte-identical across repeated lossy, jittered sim runs"))
}

// ---------------------------------------------------------------- criterion 9

fn nearest_rank(sorted: &[u64], p: f64) -> u64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.max(1).min(sorted.len()) - 1]
}

/// Recomputes summary.csv of `dir` from its arrival files with plain string
/// handling, independent of the library's readers and statistics.
fn recheck_dir(dir: &Path) -> Result<usize, String> {
    let text = std::fs::read_to_string(dir.join("summary.csv")).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or("empty summary")?.split(',').collect();
    let col = |row: &[&str], name: &str| -> String {
        row[header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"))].to_string()
    };
    let mut checked = 0;
    for line in lines {
        let row: Vec<&str> = line.split(',').collect();
        let stream = col(&row, "stream");
        let int = |name: &str| col(&row, name).parse::<u64>().unwrap();
        let float = |name: &str| col(&row, name).parse::<f64>().unwrap();
        let (period, duration, warmup) = (int("period_us"), int("duration_us"), int("warmup_us"));

        let slug: String = stream
            .trim_start_matches('/')
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
            .collect();
        let raw = std::fs::read_to_string(dir.join(format!("arrivals_{slug}.csv"))).map_err(|e| e.to_string())?;
        let mut raw_lines = raw.lines();
        ensure(
            raw_lines.next() == Some("stream,seq,send_ts_us,recv_ts_us,inter_arrival_us,size_bytes"),
            || format!("{stream}: arrivals header"),
        )?;
        // (seq, send, recv, inter_arrival, size)
        let mut recs: Vec<(u64, Option<u64>, u64, Option<u64>, u64)> = raw_lines
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                let opt = |s: &str| if s.is_empty() { None } else { Some(s.parse::<u64>().unwrap()) };
                (f[1].parse().unwrap(), opt(f[2]), f[3].parse().unwrap(), opt(f[4]), f[5].parse().unwrap())
            })
            .collect();
        recs.sort_by_key(|r| (r.2, r.0));
        for (i, r) in recs.iter().enumerate() {
            let gap = if i == 0 { None } else { Some(r.2 - recs[i - 1].2) };
            ensure(r.3 == gap, || format!("{stream}: inter_arrival_us column disagrees at row {i}"))?;
        }

        let expected = duration / period;
        let mut seqs: Vec<u64> = recs.iter().map(|r| r.0).filter(|&s| s < expected).collect();
        seqs.sort();
        seqs.dedup();
        let after: Vec<_> = recs.iter().filter(|r| r.2 >= warmup).collect();
        let mut gaps: Vec<u64> = after.iter().filter_map(|r| r.3).collect();
        gaps.sort();
        let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        let gaps_f: Vec<f64> = gaps.iter().map(|&g| g as f64).collect();
        let ia_mean = mean(&gaps_f);
        let ia_sd = (mean(&gaps_f.iter().map(|g| (g - ia_mean).powi(2)).collect::<Vec<_>>())).sqrt();
        let e2e: Vec<f64> = after.iter().filter_map(|r| r.1.map(|s| (r.2 - s) as f64)).collect();
        let sizes: Vec<f64> = after.iter().map(|r| r.4 as f64).collect();

        let close = |name: &str, want: f64| {
            let got = float(name);
            ensure((got - want).abs() <= 1.0, || format!("{stream} {name}: summary {got}, recomputed {want}"))
        };
        let exact = |name: &str, want: u64| {
            let got = int(name);
            ensure(got == want, || format!("{stream} {name}: summary {got}, recomputed {want}"))
        };
        exact("count", after.len() as u64)?;
        exact("expected", expected)?;
        exact("received", seqs.len() as u64)?;
        let ratio = if expected == 0 { 0.0 } else { seqs.len() as f64 / expected as f64 };
        ensure((float("delivery_ratio") - ratio).abs() < 1e-9, || format!("{stream} delivery_ratio"))?;
        exact("ia_n", gaps.len() as u64)?;
        close("ia_mean_us", ia_mean)?;
        close("ia_stddev_us", ia_sd)?;
        if !gaps.is_empty() {
            exact("ia_min_us", gaps[0])?;
            exact("ia_p50_us", nearest_rank(&gaps, 50.0))?;
            exact("ia_p95_us", nearest_rank(&gaps, 95.0))?;
            exact("ia_p99_us", nearest_rank(&gaps, 99.0))?;
            exact("ia_max_us", *gaps.last().unwrap())?;
        }
        if !e2e.is_empty() {
            close("e2e_mean_us", mean(&e2e))?;
        }
        close("size_mean_bytes", mean(&sizes))?;
        checked += 1;
    }
    Ok(checked)
}

fn self_consistency(runs: &mut Runs) -> Outcome {
    let mut streams = 0;
    let dirs = runs.dirs();
    for dir in &dirs {
        streams += recheck_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        let (_, from_library) = bench::load_run(dir).map_err(|e| e.to_string())?;
        for (s, row) in from_library.iter().zip(bench::report::read_summary(dir).map_err(|e| e.to_string())?) {
            ensure((s.inter_arrival.mean - row.ia_mean_us).abs() <= 1.0, || format!("{}: load_run differs", s.stream))?;
        }
    }
    ensure(streams > 0, || "no runs to check".into())?;
    Ok(format!("{streams} stream summaries in {} runs reproduced", dirs.len()))
}

// ---------------------------------------------------------------- criterion 10

fn three_arm_comparison(runs: &mut Runs) -> Outcome {
    let mut dirs = Vec::new();
    for arm in Arm::ALL {
        dirs.push(runs.run(arm, Serialization::String, 10, false, 10, "")?.dir.clone());
    }
    let table = bench::summarize_dirs(&dirs).map_err(|e| e.to_string())?;
    ensure(table.rows.len() == 3 && table.runs.len() == 3, || {
        format!("table is {}x{}", table.rows.len(), table.runs.len())
    })?;
    ensure(table.is_complete(), || format!("missing cells:\n{}", table.to_text()))?;
    for line in table.to_text().lines() {
        println!("    {line}");
    }
    Ok("3 streams x 3 arms, no missing cells".into())
}

// ---------------------------------------------------------------- main

fn main() {
    let mut runs = Runs::new();
    let checks: Vec<(&str, Box<dyn FnMut(&mut Runs) -> Outcome>)> = vec![
        ("codec round-trip", Box::new(|_| codec_round_trip())),
        ("packet cap", Box::new(|_| packet_cap())),
        ("multiplexer", Box::new(|_| multiplexer())),
        ("forwarder conformance", Box::new(|_| forwarder_conformance())),
        ("LRU content store", Box::new(|_| lru_model())),
        ("end-to-end desk run", Box::new(desk_run)),
        ("serialization sizes", Box::new(serialization_sizes)),
        ("determinism", Box::new(determinism)),
        ("three-arm comparison", Box::new(three_arm_comparison)),
        ("summary self-consistency", Box::new(self_consistency)),
    ];
    // criterion numbers; self-consistency runs last so it covers every run
    let numbers = [1, 2, 3, 4, 5, 6, 7, 8, 10, 9];
    let mut results = Vec::new();
    for ((name, mut check), number) in checks.into_iter().zip(numbers) {
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| check(&mut runs)))
            .unwrap_or_else(|_| Err("panicked".into()));
        results.push((number, name, result));
    }
    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (number, name, result) in &results {
        match result {
            Ok(detail) => println!("criterion {number:>2} {name}: PASS ({detail})"),
            Err(why) => {
                failed += 1;
                println!("criterion {number:>2} {name}: FAIL ({why})");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
