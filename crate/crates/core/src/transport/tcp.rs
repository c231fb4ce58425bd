//! Framed links over TCP. Parties listen; the coordinator dials.

use std::io::{ErrorKind, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};

use super::wire::{self, MAX_FRAME_BYTES};
use super::{Link, ProtocolMessage, TransportError};

pub struct TcpLink {
    stream: TcpStream,
    closed: bool,
}

impl TcpLink {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self, TransportError> {
        Ok(Self::from_stream(TcpStream::connect(addr)?))
    }

    pub fn from_stream(stream: TcpStream) -> Self {
        let _ = stream.set_nodelay(true);
        TcpLink { stream, closed: false }
    }

    pub fn peer_addr(&self) -> Option<SocketAddr> {
        self.stream.peer_addr().ok()
    }
}

impl Link for TcpLink {
    fn send(&mut self, message: &ProtocolMessage) -> Result<(), TransportError> {
        if self.closed {
            return Err(TransportError::Closed);
        }
        let frame = wire::encode_frame(message)?;
        self.stream.write_all(&frame)?;
        self.stream.flush()?;
        Ok(())
    }

    fn recv(&mut self) -> Result<ProtocolMessage, TransportError> {
        let mut prefix = [0u8; 4];
        match self.stream.read_exact(&mut prefix) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Err(TransportError::Closed),
            Err(e) => return Err(e.into()),
        }
        let len = u32::from_be_bytes(prefix) as usize;
        if len > MAX_FRAME_BYTES {
            return Err(TransportError::FrameTooLarge(len));
        }
        let mut body = vec![0u8; len];
        self.stream.read_exact(&mut body).map_err(|e| match e.kind() {
            ErrorKind::UnexpectedEof => TransportError::Malformed {
                offset: 4,
                reason: "connection closed mid-frame".into(),
            },
            _ => e.into(),
        })?;
        wire::from_json(&body).map_err(|e| match e {
            TransportError::Malformed { offset, reason } => {
                TransportError::Malformed { offset: offset + 4, reason }
            }
            other => other,
        })
    }

    fn close(&mut self) {
        if !self.closed {
            self.closed = true;
            let _ = self.stream.shutdown(Shutdown::Write);
        }
    }
}

/// A party's listening socket.
pub struct PartyListener {
    listener: TcpListener,
}

impl PartyListener {
    pub fn bind<A: ToSocketAddrs>(addr: A) -> Result<Self, TransportError> {
        Ok(PartyListener { listener: TcpListener::bind(addr)? })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, TransportError> {
        Ok(self.listener.local_addr()?)
    }

    /// Blocks until the coordinator connects.
    pub fn accept(&self) -> Result<TcpLink, TransportError> {
        let (stream, _) = self.listener.accept()?;
        Ok(TcpLink::from_stream(stream))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::Decimal;
    use std::thread;

    #[test]
    fn framed_round_trip_over_loopback() {
        let listener = PartyListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let echo = thread::spawn(move || {
            let mut link = listener.accept().unwrap();
            while let Ok(message) = link.recv() {
                link.send(&message).unwrap();
            }
        });
        let mut link = TcpLink::connect(addr).unwrap();
        let messages: Vec<ProtocolMessage> = (0..100)
            .map(|r| ProtocolMessage::RoundBroadcast {
                round: r,
                ranks: vec![Decimal(r as f64 / 7.0)],
                out_degree: vec![r],
            })
            .collect();
        for m in &messages {
            link.send(m).unwrap();
        }
        for m in &messages {
            assert_eq!(&link.recv().unwrap(), m);
        }
        link.close();
        assert!(matches!(link.send(&messages[0]), Err(TransportError::Closed)));
        echo.join().unwrap();
    }

    #[test]
    fn garbage_frame_is_reported() {
        let listener = PartyListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let writer = thread::spawn(move || {
            let mut stream = TcpStream::connect(addr).unwrap();
            stream.write_all(&3u32.to_be_bytes()).unwrap();
            stream.write_all(b"{]}").unwrap();
        });
        let mut link = listener.accept().unwrap();
        assert!(matches!(link.recv(), Err(TransportError::Malformed { offset, .. }) if offset >= 4));
        writer.join().unwrap();
    }
}
