//! 4-byte big-endian length prefix followed by a canonical JSON body.

use std::io::{self, Read, Write};

use crate::canonical::{canonical_encode, CanonicalError};
use crate::identity::Envelope;

pub const MAX_FRAME_BYTES: usize = 16 * 1024 * 1024;
const HEADER: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("frame declares {0} bytes, limit is {MAX_FRAME_BYTES}")]
    Oversize(usize),
    #[error("frame declares {declared} bytes but carries {actual}")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("stream ended inside a frame ({buffered} bytes buffered)")]
    Truncated { buffered: usize },
    #[error("frame body is not a valid envelope: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error(transparent)]
    Encode(#[from] CanonicalError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn encode_body(body: &[u8]) -> Result<Vec<u8>, FrameError> {
    if body.len() > MAX_FRAME_BYTES {
        return Err(FrameError::Oversize(body.len()));
    }
    let mut out = Vec::with_capacity(HEADER + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(body);
    Ok(out)
}

pub fn frame_encode(env: &Envelope) -> Result<Vec<u8>, FrameError> {
    encode_body(&canonical_encode(env)?)
}

fn declared_len(header: &[u8]) -> Result<usize, FrameError> {
    let len = u32::from_be_bytes(header[..HEADER].try_into().expect("4 bytes")) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(FrameError::Oversize(len));
    }
    Ok(len)
}

/// Decode exactly one frame occupying all of `bytes`.
pub fn frame_decode(bytes: &[u8]) -> Result<Envelope, FrameError> {
    if bytes.len() < HEADER {
        return Err(FrameError::Truncated {
            buffered: bytes.len(),
        });
    }
    let declared = declared_len(bytes)?;
    let actual = bytes.len() - HEADER;
    if declared != actual {
        return Err(FrameError::LengthMismatch { declared, actual });
    }
    Ok(serde_json::from_slice(&bytes[HEADER..])?)
}

/// Incremental decoder: feed arbitrary chunks, pull complete bodies.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, chunk: &[u8]) {
        self.buf.extend_from_slice(chunk);
    }

    /// The oversize check fires as soon as the header is buffered, before any
    /// body bytes are awaited.
    pub fn next_body(&mut self) -> Result<Option<Vec<u8>>, FrameError> {
        if self.buf.len() < HEADER {
            return Ok(None);
        }
        let len = declared_len(&self.buf)?;
        if self.buf.len() < HEADER + len {
            return Ok(None);
        }
        let body = self.buf[HEADER..HEADER + len].to_vec();
        self.buf.drain(..HEADER + len);
        Ok(Some(body))
    }

    pub fn next_envelope(&mut self) -> Result<Option<Envelope>, FrameError> {
        match self.next_body()? {
            Some(body) => Ok(Some(serde_json::from_slice(&body)?)),
            None => Ok(None),
        }
    }

    /// Call at end of stream; leftover bytes mean a truncated frame.
    pub fn finish(&self) -> Result<(), FrameError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(FrameError::Truncated {
                buffered: self.buf.len(),
            })
        }
    }
}

pub fn write_body<W: Write>(w: &mut W, body: &[u8]) -> Result<(), FrameError> {
    w.write_all(&encode_body(body)?)?;
    w.flush()?;
    Ok(())
}

/// Blocking read of one body. `Ok(None)` on a clean end of stream between
/// frames.
pub fn read_body<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>, FrameError> {
    let mut header = [0u8; HEADER];
    let mut got = 0;
    while got < HEADER {
        let n = r.read(&mut header[got..])?;
        if n == 0 {
            return if got == 0 {
                Ok(None)
            } else {
                Err(FrameError::Truncated { buffered: got })
            };
        }
        got += n;
    }
    let len = declared_len(&header)?;
    let mut body = vec![0u8; len];
    let mut filled = 0;
    while filled < len {
        let n = r.read(&mut body[filled..])?;
        if n == 0 {
            return Err(FrameError::Truncated {
                buffered: HEADER + filled,
            });
        }
        filled += n;
    }
    Ok(Some(body))
}

pub fn write_frame<W: Write>(w: &mut W, env: &Envelope) -> Result<(), FrameError> {
    write_body(w, &canonical_encode(env)?)
}

pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Envelope>, FrameError> {
    match read_body(r)? {
        Some(body) => Ok(Some(serde_json::from_slice(&body)?)),
        None => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bytes::{EnvelopeId, FixedBytes};
    use crate::identity::{sign_envelope, EntityAddress, EnvelopeDraft, Intent, KeyMaterial, Payload};

    fn env(payload: &[u8]) -> Envelope {
        let keys = KeyMaterial::from_seed(&[1; 32]);
        sign_envelope(
            EnvelopeDraft {
                envelope_id: EnvelopeId(FixedBytes([7; 16])),
                sender: "0000000a:00000001".parse::<EntityAddress>().unwrap(),
                recipient: "0000000b:00000002".parse().unwrap(),
                intent: Intent::CHAT,
                session_id: None,
                correlation_id: None,
                policy_ref: None,
                sent_at: 5,
                payload: Payload::plain(payload.to_vec()),
            },
            &keys,
        )
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let e = env(b"hi");
        assert_eq!(frame_decode(&frame_encode(&e).unwrap()).unwrap(), e);
    }

    #[test]
    fn oversize_rejected_from_header_alone() {
        let mut d = FrameDecoder::new();
        d.push(&(20u32 * 1024 * 1024).to_be_bytes());
        assert!(matches!(d.next_body(), Err(FrameError::Oversize(n)) if n == 20 * 1024 * 1024));
        let mut r: &[u8] = &(20u32 * 1024 * 1024).to_be_bytes();
        assert!(matches!(read_body(&mut r), Err(FrameError::Oversize(_))));
    }

    #[test]
    fn every_split_point_decodes_identically() {
        let frame = frame_encode(&env(b"split me")).unwrap();
        let whole = frame_decode(&frame).unwrap();
        for cut in 0..=frame.len() {
            let mut d = FrameDecoder::new();
            d.push(&frame[..cut]);
            let early = d.next_envelope().unwrap();
            if cut < frame.len() {
                assert!(early.is_none(), "cut {cut}");
                d.push(&frame[cut..]);
                assert_eq!(d.next_envelope().unwrap().as_ref(), Some(&whole));
            } else {
                assert_eq!(early.as_ref(), Some(&whole));
            }
            d.finish().unwrap();
        }
    }

    #[test]
    fn declared_length_must_match() {
        let mut frame = frame_encode(&env(b"x")).unwrap();
        frame.push(b' ');
        assert!(matches!(frame_decode(&frame), Err(FrameError::LengthMismatch { .. })));
        frame.truncate(frame.len() - 2);
        assert!(matches!(frame_decode(&frame), Err(FrameError::LengthMismatch { .. })));
    }

    #[test]
    fn truncated_stream() {
        let frame = frame_encode(&env(b"abc")).unwrap();
        let mut r: &[u8] = &frame[..frame.len() - 1];
        assert!(matches!(read_frame(&mut r), Err(FrameError::Truncated { .. })));
        let mut d = FrameDecoder::new();
        d.push(&frame[..10]);
        assert!(d.next_body().unwrap().is_none());
        assert!(d.finish().is_err());
    }

    #[test]
    fn malformed_body() {
        let bytes = encode_body(b"{not json").unwrap();
        assert!(matches!(frame_decode(&bytes), Err(FrameError::Malformed(_))));
    }
}
