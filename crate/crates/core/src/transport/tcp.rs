use std::io;
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc::Sender;
use std::thread;
use std::time::{Duration, Instant};

use crate::forwarder::FaceId;

use super::framing::{read_frame, write_frame};
use super::{Endpoint, Face, FaceEvent, FaceOptions, TransportError};

const RETRY: Duration = Duration::from_millis(20);

/// A TCP connection carrying length-prefixed packets.
#[derive(Debug)]
pub struct TcpFace {
    id: FaceId,
    stream: TcpStream,
    closed: bool,
    reader: Option<thread::JoinHandle<()>>,
}

/// Accepts the first connection. The listener is bound to an endpoint used
/// by this face alone; the connecting side's source address is not checked
/// because loopback connections may originate from any 127/8 address.
fn accept_one(listener: &TcpListener, deadline: Instant) -> io::Result<TcpStream> {
    listener.set_nonblocking(true)?;
    loop {
        match listener.accept() {
            Ok((stream, _)) => {
                stream.set_nonblocking(false)?;
                return Ok(stream);
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {}
            Err(e) => return Err(e),
        }
        if Instant::now() >= deadline {
            return Err(io::ErrorKind::TimedOut.into());
        }
        thread::sleep(RETRY);
    }
}

fn connect_until(remote: SocketAddr, deadline: Instant) -> io::Result<TcpStream> {
    loop {
        match TcpStream::connect_timeout(&remote, Duration::from_millis(500)) {
            Ok(stream) => return Ok(stream),
            Err(e) if Instant::now() >= deadline => return Err(e),
            Err(_) => thread::sleep(RETRY),
        }
    }
}

impl TcpFace {
    pub fn open(
        id: FaceId,
        local: &Endpoint,
        remote: &Endpoint,
        events: Sender<FaceEvent>,
        options: FaceOptions,
    ) -> Result<Self, TransportError> {
        let local_addr = local.socket_addr()?;
        let remote_addr = remote.socket_addr()?;
        let deadline = Instant::now() + options.setup_timeout;
        let stream = if local_addr < remote_addr {
            let listener = TcpListener::bind(local_addr).map_err(|source| TransportError::Bind {
                endpoint: local.clone(),
                source,
            })?;
            accept_one(&listener, deadline).map_err(|source| {
                TransportError::Connect { endpoint: remote.clone(), source }
            })?
        } else {
            connect_until(remote_addr, deadline).map_err(|source| TransportError::Connect {
                endpoint: remote.clone(),
                source,
            })?
        };
        Self::from_stream(id, stream, events)
    }

    /// Wraps an established connection.
    pub fn from_stream(
        id: FaceId,
        stream: TcpStream,
        events: Sender<FaceEvent>,
    ) -> Result<Self, TransportError> {
        stream.set_nodelay(true)?;
        let mut reader_stream = stream.try_clone()?;
        let reader = thread::Builder::new()
            .name(format!("tcp-{id}"))
            .spawn(move || loop {
                match read_frame(&mut reader_stream) {
                    Ok(Some(bytes)) => {
                        if events.send(FaceEvent::Packet { face: id, bytes }).is_err() {
                            break;
                        }
                    }
                    Ok(None) | Err(_) => {
                        let _ = events.send(FaceEvent::Closed { face: id });
                        break;
                    }
                }
            })?;
        Ok(TcpFace { id, stream, closed: false, reader: Some(reader) })
    }
}

impl Face for TcpFace {
    fn id(&self) -> FaceId {
        self.id
    }

    fn send(&mut self, bytes: &[u8]) -> Result<(), TransportError> {
        if self.closed {
            return Err(TransportError::Closed);
        }
        write_frame(&mut self.stream, bytes).map_err(|e| match e.kind() {
            io::ErrorKind::BrokenPipe | io::ErrorKind::ConnectionReset => TransportError::Closed,
            _ => e.into(),
        })
    }

    fn close(&mut self) {
        if !self.closed {
            self.closed = true;
            let _ = self.stream.shutdown(Shutdown::Both);
        }
        if let Some(reader) = self.reader.take() {
            let _ = reader.join();
        }
    }
}

impl Drop for TcpFace {
    fn drop(&mut self) {
        self.close();
    }
}
