//! Byte-exact message framing and transports for the prover–verifier
//! exchange.
//!
//! Frame layout: tag (1 byte) ‖ payload length (u32 LE) ‖ payload. Field
//! elements travel as 8-byte little-endian integers, always reduced mod q.

use std::io::{Read, Write};
use std::sync::mpsc;

use serde::Serialize;
use thiserror::Error;

use crate::arith::UnivariatePoly;
use crate::formula::Var;

pub const TAG_HEADER: u8 = 0x01;
pub const TAG_INITIAL_ASSIGNMENT: u8 = 0x02;
pub const TAG_ROUND_POLY: u8 = 0x03;
pub const TAG_CHALLENGE: u8 = 0x04;
pub const TAG_VERDICT: u8 = 0x05;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Header {
        q: u64,
        n: u32,
        order: Vec<Var>,
        claimed_constant: u64,
    },
    InitialAssignment(Vec<u64>),
    RoundPoly(UnivariatePoly),
    Challenge(u64),
    Verdict {
        accept: bool,
        reason: u8,
    },
}

impl Message {
    pub fn tag(&self) -> u8 {
        match self {
            Message::Header { .. } => TAG_HEADER,
            Message::InitialAssignment(_) => TAG_INITIAL_ASSIGNMENT,
            Message::RoundPoly(_) => TAG_ROUND_POLY,
            Message::Challenge(_) => TAG_CHALLENGE,
            Message::Verdict { .. } => TAG_VERDICT,
        }
    }
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("truncated frame: wanted {wanted} bytes, got {got}")]
    Truncated { wanted: usize, got: usize },
    #[error("unknown message tag {0:#04x}")]
    UnknownTag(u8),
    #[error("malformed payload for tag {tag:#04x}: {msg}")]
    Malformed { tag: u8, msg: String },
    #[error("channel closed")]
    ChannelClosed,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub fn encode(msg: &Message) -> Vec<u8> {
    let mut payload = Vec::new();
    match msg {
        Message::Header {
            q,
            n,
            order,
            claimed_constant,
        } => {
            payload.extend_from_slice(&q.to_le_bytes());
            payload.extend_from_slice(&n.to_le_bytes());
            for &v in order {
                payload.extend_from_slice(&v.to_le_bytes());
            }
            payload.extend_from_slice(&claimed_constant.to_le_bytes());
        }
        Message::InitialAssignment(values) => {
            for &v in values {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        Message::RoundPoly(p) => {
            for &c in &p.coeffs {
                payload.extend_from_slice(&c.to_le_bytes());
            }
        }
        Message::Challenge(r) => payload.extend_from_slice(&r.to_le_bytes()),
        Message::Verdict { accept, reason } => {
            payload.push(u8::from(*accept));
            payload.push(*reason);
        }
    }
    let mut out = Vec::with_capacity(5 + payload.len());
    out.push(msg.tag());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&payload);
    out
}

fn take_u64(payload: &[u8], at: &mut usize) -> u64 {
    let v = u64::from_le_bytes(payload[*at..*at + 8].try_into().unwrap());
    *at += 8;
    v
}

fn take_u32(payload: &[u8], at: &mut usize) -> u32 {
    let v = u32::from_le_bytes(payload[*at..*at + 4].try_into().unwrap());
    *at += 4;
    v
}

/// Decode one frame. Never reads past the declared payload length.
pub fn decode(bytes: &[u8]) -> Result<(Message, usize), WireError> {
    if bytes.len() < 5 {
        return Err(WireError::Truncated {
            wanted: 5,
            got: bytes.len(),
        });
    }
    let tag = bytes[0];
    let len = u32::from_le_bytes(bytes[1..5].try_into().unwrap()) as usize;
    if bytes.len() < 5 + len {
        return Err(WireError::Truncated {
            wanted: 5 + len,
            got: bytes.len(),
        });
    }
    let payload = &bytes[5..5 + len];
    let malformed = |msg: &str| WireError::Malformed {
        tag,
        msg: msg.to_string(),
    };
    let msg = match tag {
        TAG_HEADER => {
            if len < 20 {
                return Err(malformed("header too short"));
            }
            let mut at = 0;
            let q = take_u64(payload, &mut at);
            let n = take_u32(payload, &mut at);
            if len != 20 + 4 * n as usize {
                return Err(malformed("header length does not match n"));
            }
            let order = (0..n).map(|_| take_u32(payload, &mut at)).collect();
            let claimed_constant = take_u64(payload, &mut at);
            Message::Header {
                q,
                n,
                order,
                claimed_constant,
            }
        }
        TAG_INITIAL_ASSIGNMENT => {
            if !len.is_multiple_of(8) {
                return Err(malformed("assignment length not a multiple of 8"));
            }
            let mut at = 0;
            Message::InitialAssignment((0..len / 8).map(|_| take_u64(payload, &mut at)).collect())
        }
        TAG_ROUND_POLY => {
            if len != 56 {
                return Err(malformed("round polynomial must be 7 coefficients"));
            }
            let mut at = 0;
            let mut coeffs = [0u64; 7];
            for c in &mut coeffs {
                *c = take_u64(payload, &mut at);
            }
            Message::RoundPoly(UnivariatePoly { coeffs })
        }
        TAG_CHALLENGE => {
            if len != 8 {
                return Err(malformed("challenge must be 8 bytes"));
            }
            Message::Challenge(take_u64(payload, &mut 0))
        }
        TAG_VERDICT => {
            if len != 2 {
                return Err(malformed("verdict must be 2 bytes"));
            }
            Message::Verdict {
                accept: payload[0] != 0,
                reason: payload[1],
            }
        }
        other => return Err(WireError::UnknownTag(other)),
    };
    Ok((msg, 5 + len))
}

/// Validate that every field element in a message is reduced mod q.
pub fn check_reduced(msg: &Message, q: u64) -> Result<(), WireError> {
    let bad = |msg: &Message| WireError::Malformed {
        tag: msg.tag(),
        msg: format!("field element not reduced mod {q}"),
    };
    match msg {
        Message::Header {
            claimed_constant, ..
        } => {
            if *claimed_constant >= q {
                return Err(bad(msg));
            }
        }
        Message::InitialAssignment(values) => {
            if values.iter().any(|&v| v >= q) {
                return Err(bad(msg));
            }
        }
        Message::RoundPoly(p) => {
            if p.coeffs.iter().any(|&c| c >= q) {
                return Err(bad(msg));
            }
        }
        Message::Challenge(r) => {
            if *r >= q {
                return Err(bad(msg));
            }
        }
        Message::Verdict { .. } => {}
    }
    Ok(())
}

/// One logged message, as written to the JSON-lines transcript.
#[derive(Debug, Clone, Serialize)]
pub struct TranscriptEntry {
    pub dir: &'static str,
    pub tag: u8,
    pub payload: String,
}

/// A bidirectional message endpoint owned by one party. Counts the bytes it
/// sends and receives, split by protocol-message direction.
pub trait Transport {
    fn send(&mut self, msg: &Message) -> Result<(), WireError>;
    fn recv(&mut self) -> Result<Message, WireError>;
    fn bytes_sent(&self) -> u64;
    fn bytes_received(&self) -> u64;
}

/// In-process transport over a pair of byte-vector queues.
pub struct ChannelTransport {
    tx: mpsc::Sender<Vec<u8>>,
    rx: mpsc::Receiver<Vec<u8>>,
    sent: u64,
    received: u64,
}

impl ChannelTransport {
    /// A connected endpoint pair.
    pub fn pair() -> (ChannelTransport, ChannelTransport) {
        let (tx_a, rx_b) = mpsc::channel();
        let (tx_b, rx_a) = mpsc::channel();
        (
            ChannelTransport {
                tx: tx_a,
                rx: rx_a,
                sent: 0,
                received: 0,
            },
            ChannelTransport {
                tx: tx_b,
                rx: rx_b,
                sent: 0,
                received: 0,
            },
        )
    }
}

impl Transport for ChannelTransport {
    fn send(&mut self, msg: &Message) -> Result<(), WireError> {
        let bytes = encode(msg);
        self.sent += bytes.len() as u64;
        self.tx.send(bytes).map_err(|_| WireError::ChannelClosed)
    }

    fn recv(&mut self) -> Result<Message, WireError> {
        let bytes = self.rx.recv().map_err(|_| WireError::ChannelClosed)?;
        self.received += bytes.len() as u64;
        let (msg, _) = decode(&bytes)?;
        Ok(msg)
    }

    fn bytes_sent(&self) -> u64 {
        self.sent
    }

    fn bytes_received(&self) -> u64 {
        self.received
    }
}

/// Transport over any reliable ordered byte stream (pipe, socket, stdio).
pub struct StreamTransport<R: Read, W: Write> {
    reader: R,
    writer: W,
    sent: u64,
    received: u64,
}

impl<R: Read, W: Write> StreamTransport<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        StreamTransport {
            reader,
            writer,
            sent: 0,
            received: 0,
        }
    }
}

impl<R: Read, W: Write> Transport for StreamTransport<R, W> {
    fn send(&mut self, msg: &Message) -> Result<(), WireError> {
        let bytes = encode(msg);
        self.writer.write_all(&bytes)?;
        self.writer.flush()?;
        self.sent += bytes.len() as u64;
        Ok(())
    }

    fn recv(&mut self) -> Result<Message, WireError> {
        let mut head = [0u8; 5];
        self.reader.read_exact(&mut head)?;
        let len = u32::from_le_bytes(head[1..5].try_into().unwrap()) as usize;
        let mut frame = vec![0u8; 5 + len];
        frame[..5].copy_from_slice(&head);
        self.reader.read_exact(&mut frame[5..])?;
        self.received += frame.len() as u64;
        let (msg, _) = decode(&frame)?;
        Ok(msg)
    }

    fn bytes_sent(&self) -> u64 {
        self.sent
    }

    fn bytes_received(&self) -> u64 {
        self.received
    }
}

/// Byte size of one encoded frame, by tag and n.
pub fn frame_size(tag: u8, n: u32) -> u64 {
    5 + match tag {
        TAG_HEADER => 20 + 4 * n as u64,
        TAG_INITIAL_ASSIGNMENT => 8 * n as u64,
        TAG_ROUND_POLY => 56,
        TAG_CHALLENGE => 8,
        TAG_VERDICT => 2,
        _ => unreachable!(),
    }
}

/// Closed-form prover→verifier byte total for one protocol run:
/// the header frame plus one round polynomial per macrostep.
pub fn expected_p2v_bytes(n: u32, k: u64) -> u64 {
    frame_size(TAG_HEADER, n) + k * frame_size(TAG_ROUND_POLY, n)
}

/// Closed-form verifier→prover byte total for one protocol run:
/// the initial assignment frame plus one challenge per macrostep. The final
/// verdict frame is control-plane and not counted.
pub fn expected_v2p_bytes(n: u32, k: u64) -> u64 {
    frame_size(TAG_INITIAL_ASSIGNMENT, n) + k * frame_size(TAG_CHALLENGE, n)
}

/// Sum transcript bytes per direction, counting protocol messages only
/// (tags 0x01–0x04; verdict frames are excluded).
pub fn count_bytes(transcript: &[TranscriptEntry]) -> (u64, u64) {
    let mut p2v = 0;
    let mut v2p = 0;
    for entry in transcript {
        if entry.tag == TAG_VERDICT {
            continue;
        }
        let frame_len = 5 + entry.payload.len() as u64 / 2;
        match entry.dir {
            "p2v" => p2v += frame_len,
            "v2p" => v2p += frame_len,
            _ => {}
        }
    }
    (p2v, v2p)
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_poly_golden_bytes() {
        // 2z³ − z + 1 in F_15871: coefficients (1, 15870, 0, 2, 0, 0, 0)
        let msg = Message::RoundPoly(UnivariatePoly {
            coeffs: [1, 15870, 0, 2, 0, 0, 0],
        });
        let bytes = encode(&msg);
        assert_eq!(bytes.len(), 61);
        assert_eq!(bytes[0], TAG_ROUND_POLY);
        assert_eq!(&bytes[1..5], &56u32.to_le_bytes());
        assert_eq!(&bytes[5..13], &1u64.to_le_bytes());
        assert_eq!(&bytes[13..21], &15870u64.to_le_bytes());
        assert_eq!(&bytes[29..37], &2u64.to_le_bytes());
    }

    #[test]
    fn header_golden_bytes() {
        let msg = Message::Header {
            q: 15871,
            n: 3,
            order: vec![1, 2, 3],
            claimed_constant: 2,
        };
        let bytes = encode(&msg);
        assert_eq!(bytes.len() as u64, frame_size(TAG_HEADER, 3));
        assert_eq!(bytes[0], TAG_HEADER);
        assert_eq!(&bytes[5..13], &15871u64.to_le_bytes());
        assert_eq!(&bytes[13..17], &3u32.to_le_bytes());
        assert_eq!(&bytes[17..21], &1u32.to_le_bytes());
        assert_eq!(&bytes[29..37], &2u64.to_le_bytes());
    }

    #[test]
    fn roundtrip_all_variants() {
        let msgs = [
            Message::Header {
                q: 101,
                n: 2,
                order: vec![2, 1],
                claimed_constant: 7,
            },
            Message::InitialAssignment(vec![1, 2, 3]),
            Message::RoundPoly(UnivariatePoly {
                coeffs: [0, 1, 2, 3, 4, 5, 6],
            }),
            Message::Challenge(99),
            Message::Verdict {
                accept: false,
                reason: 2,
            },
        ];
        for m in msgs {
            let bytes = encode(&m);
            let (decoded, used) = decode(&bytes).unwrap();
            assert_eq!(decoded, m);
            assert_eq!(used, bytes.len());
        }
    }

    #[test]
    fn truncated_frame_rejected() {
        let mut bytes = encode(&Message::Challenge(5));
        bytes.pop();
        assert!(matches!(decode(&bytes), Err(WireError::Truncated { .. })));
    }

    #[test]
    fn unknown_tag_rejected() {
        let bytes = [0x77u8, 0, 0, 0, 0];
        assert!(matches!(decode(&bytes), Err(WireError::UnknownTag(0x77))));
    }

    #[test]
    fn unreduced_element_rejected() {
        let msg = Message::Challenge(101);
        assert!(check_reduced(&msg, 101).is_err());
        assert!(check_reduced(&Message::Challenge(100), 101).is_ok());
    }

    #[test]
    fn closed_form_byte_totals() {
        // n=3, k=6: header frame is 5+20+4n = 37 bytes, each poly frame 61
        assert_eq!(expected_p2v_bytes(3, 6), 37 + 6 * 61);
        assert_eq!(expected_v2p_bytes(3, 6), 29 + 6 * 13);
        assert_eq!(count_bytes(&[]), (0, 0));
    }

    #[test]
    fn channel_transport_roundtrip() {
        let (mut a, mut b) = ChannelTransport::pair();
        a.send(&Message::Challenge(9)).unwrap();
        assert_eq!(b.recv().unwrap(), Message::Challenge(9));
        assert_eq!(a.bytes_sent(), 13);
        assert_eq!(b.bytes_received(), 13);
    }
}
