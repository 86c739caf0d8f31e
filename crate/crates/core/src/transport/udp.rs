use std::io;
use std::net::UdpSocket;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::Sender;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use crate::forwarder::FaceId;

use super::{Endpoint, Face, FaceEvent, TransportError, MAX_DATAGRAM};

const POLL: Duration = Duration::from_millis(50);

/// One connected UDP socket; each datagram is one packet.
#[derive(Debug)]
pub struct UdpFace {
    id: FaceId,
    socket: UdpSocket,
    stop: Arc<AtomicBool>,
    reader: Option<thread::JoinHandle<()>>,
}

impl UdpFace {
    pub fn open(
        id: FaceId,
        local: &Endpoint,
        remote: &Endpoint,
        events: Sender<FaceEvent>,
    ) -> Result<Self, TransportError> {
        let socket = UdpSocket::bind(local.socket_addr()?).map_err(|source| TransportError::Bind {
            endpoint: local.clone(),
            source,
        })?;
        socket
            .connect(remote.socket_addr()?)
            .map_err(|source| TransportError::Connect {
                endpoint: remote.clone(),
                source,
            })?;
        let reader_socket = socket.try_clone()?;
        reader_socket.set_read_timeout(Some(POLL))?;
        let stop = Arc::new(AtomicBool::new(false));
        let reader_stop = stop.clone();
        let reader = thread::Builder::new()
            .name(format!("udp-{id}"))
            .spawn(move || {
                let mut buf = vec![0u8; MAX_DATAGRAM];
                while !reader_stop.load(Ordering::Relaxed) {
                    match reader_socket.recv(&mut buf) {
                        Ok(n) => {
                            let event = FaceEvent::Packet { face: id, bytes: buf[..n].to_vec() };
                            if events.send(event).is_err() {
                                break;
                            }
                        }
                        // timeouts, and ICMP refusals while the peer is not bound yet
                        Err(e)
                            if matches!(
                                e.kind(),
                                io::ErrorKind::WouldBlock
                                    | io::ErrorKind::TimedOut
                                    | io::ErrorKind::ConnectionRefused
                                    | io::ErrorKind::Interrupted
                            ) => {}
                        Err(_) => {
                            let _ = events.send(FaceEvent::Closed { face: id });
                            break;
                        }
                    }
                }
            })?;
        Ok(UdpFace { id, socket, stop, reader: Some(reader) })
    }

    pub fn local_addr(&self) -> io::Result<std::net::SocketAddr> {
        self.socket.local_addr()
    }
}

impl Face for UdpFace {
    fn id(&self) -> FaceId {
        self.id
    }

    fn send(&mut self, bytes: &[u8]) -> Result<(), TransportError> {
        if self.stop.load(Ordering::Relaxed) {
            return Err(TransportError::Closed);
        }
        match self.socket.send(bytes) {
            Ok(_) => Ok(()),
            // the peer is not listening yet; UDP semantics, the packet is lost
            Err(e) if e.kind() == io::ErrorKind::ConnectionRefused => Ok(()),
            Err(e) => Err(e.into()),
        }
    }

    fn close(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(reader) = self.reader.take() {
            let _ = reader.join();
        }
    }
}

impl Drop for UdpFace {
    fn drop(&mut self) {
        self.close();
    }
}
