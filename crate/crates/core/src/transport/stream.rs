//! Byte-stream binding: the same frame codec over any `Read + Write`.

use std::io::{Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::thread;
use std::time::Duration;

use super::frame::{read_frame, write_frame, FrameError};
use crate::identity::Envelope;

pub const RECONNECT_DELAY: Duration = Duration::from_secs(1);

pub struct StreamLink<S> {
    stream: S,
}

impl<S: Read + Write> StreamLink<S> {
    pub fn new(stream: S) -> Self {
        Self { stream }
    }

    pub fn send(&mut self, env: &Envelope) -> Result<(), FrameError> {
        write_frame(&mut self.stream, env)
    }

    pub fn recv(&mut self) -> Result<Option<Envelope>, FrameError> {
        read_frame(&mut self.stream)
    }

    pub fn into_inner(self) -> S {
        self.stream
    }
}

/// Connect with a fixed one-second pause between attempts.
pub fn connect_with_retry<A: ToSocketAddrs + Clone>(
    addr: A,
    attempts: u32,
) -> std::io::Result<StreamLink<TcpStream>> {
    let mut last = None;
    for i in 0..attempts.max(1) {
        match TcpStream::connect(addr.clone()) {
            Ok(s) => return Ok(StreamLink::new(s)),
            Err(e) => last = Some(e),
        }
        if i + 1 < attempts {
            thread::sleep(RECONNECT_DELAY);
        }
    }
    Err(last.expect("at least one attempt"))
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;
    use crate::bytes::{EnvelopeId, FixedBytes};
    use crate::identity::{sign_envelope, EnvelopeDraft, Intent, KeyMaterial, Payload};
    use std::os::unix::net::UnixStream;

    #[test]
    fn frames_cross_a_real_socket_in_order() {
        let (a, b) = UnixStream::pair().unwrap();
        let keys = KeyMaterial::from_seed(&[4; 32]);
        let sent: Vec<Envelope> = (0..3u8)
            .map(|i| {
                sign_envelope(
                    EnvelopeDraft {
                        envelope_id: EnvelopeId(FixedBytes([i; 16])),
                        sender: "00000001:00000001".parse().unwrap(),
                        recipient: "00000002:00000001".parse().unwrap(),
                        intent: Intent::CHAT,
                        session_id: None,
                        correlation_id: None,
                        policy_ref: None,
                        sent_at: u64::from(i),
                        payload: Payload::plain(vec![i; 10]),
                    },
                    &keys,
                )
                .unwrap()
            })
            .collect();
        let to_send = sent.clone();
        let writer = thread::spawn(move || {
            let mut link = StreamLink::new(a);
            for e in &to_send {
                link.send(e).unwrap();
            }
        });
        let mut reader = StreamLink::new(b);
        let mut got = Vec::new();
        for _ in 0..3 {
            got.push(reader.recv().unwrap().unwrap());
        }
        writer.join().unwrap();
        assert_eq!(got, sent);
        assert!(reader.recv().unwrap().is_none());
    }
}
