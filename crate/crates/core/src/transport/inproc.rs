//! Channel-backed links between threads of one process.

use std::sync::mpsc::{channel, Receiver, Sender};

use super::{Link, ProtocolMessage, TransportError};

pub struct InProcLink {
    outbox: Option<Sender<ProtocolMessage>>,
    inbox: Receiver<ProtocolMessage>,
}

/// Two connected link ends.
pub fn pair() -> (InProcLink, InProcLink) {
    let (a_tx, a_rx) = channel();
    let (b_tx, b_rx) = channel();
    (
        InProcLink { outbox: Some(a_tx), inbox: b_rx },
        InProcLink { outbox: Some(b_tx), inbox: a_rx },
    )
}

impl Link for InProcLink {
    fn send(&mut self, message: &ProtocolMessage) -> Result<(), TransportError> {
        let outbox = self.outbox.as_ref().ok_or(TransportError::Closed)?;
        outbox.send(message.clone()).map_err(|_| TransportError::Closed)
    }

    fn recv(&mut self) -> Result<ProtocolMessage, TransportError> {
        self.inbox.recv().map_err(|_| TransportError::Closed)
    }

    fn close(&mut self) {
        self.outbox = None;
    }
}
