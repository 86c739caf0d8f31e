use std::fmt;
use std::net::{SocketAddr, ToSocketAddrs};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TransportError;

/// Port assumed when a udp/tcp endpoint omits one.
pub const DEFAULT_PORT: u16 = 6363;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Udp,
    Tcp,
    Sim,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Udp => "udp",
            Scheme::Tcp => "tcp",
            Scheme::Sim => "sim",
        })
    }
}

/// A face address: `udp://host:port`, `tcp://host:port` or `sim://link-name`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Endpoint {
    pub scheme: Scheme,
    pub host: String,
    /// Zero for sim endpoints.
    pub port: u16,
}

impl Endpoint {
    pub fn udp(host: impl Into<String>, port: u16) -> Self {
        Endpoint { scheme: Scheme::Udp, host: host.into(), port }
    }

    pub fn tcp(host: impl Into<String>, port: u16) -> Self {
        Endpoint { scheme: Scheme::Tcp, host: host.into(), port }
    }

    pub fn sim(link: impl Into<String>) -> Self {
        Endpoint { scheme: Scheme::Sim, host: link.into(), port: 0 }
    }

    pub fn with_scheme(&self, scheme: Scheme) -> Self {
        Endpoint { scheme, ..self.clone() }
    }

    pub fn socket_addr(&self) -> Result<SocketAddr, TransportError> {
        if self.scheme == Scheme::Sim {
            return Err(TransportError::UnsupportedScheme(Scheme::Sim));
        }
        (self.host.as_str(), self.port)
            .to_socket_addrs()
            .ok()
            .and_then(|mut it| it.next())
            .ok_or_else(|| TransportError::InvalidEndpoint(self.to_string()))
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.scheme {
            Scheme::Sim => write!(f, "sim://{}", self.host),
            _ => write!(f, "{}://{}:{}", self.scheme, self.host, self.port),
        }
    }
}

impl FromStr for Endpoint {
    type Err = TransportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let invalid = || TransportError::InvalidEndpoint(s.to_string());
        let (scheme, rest) = s.split_once("://").ok_or_else(invalid)?;
        let scheme = match scheme.to_ascii_lowercase().as_str() {
            "udp" => Scheme::Udp,
            "tcp" => Scheme::Tcp,
            "sim" => Scheme::Sim,
            _ => return Err(invalid()),
        };
        if rest.is_empty() || rest.contains('/') {
            return Err(invalid());
        }
        if scheme == Scheme::Sim {
            return Ok(Endpoint::sim(rest));
        }
        let (host, port) = match rest.rsplit_once(':') {
            Some((host, port)) => {
                let port: u16 = port.parse().map_err(|_| invalid())?;
                if port == 0 {
                    return Err(invalid());
                }
                (host, port)
            }
            None => (rest, DEFAULT_PORT),
        };
        if host.is_empty() {
            return Err(invalid());
        }
        Ok(Endpoint { scheme, host: host.to_string(), port })
    }
}

impl TryFrom<String> for Endpoint {
    type Error = TransportError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Endpoint> for String {
    fn from(e: Endpoint) -> String {
        e.to_string()
    }
}
