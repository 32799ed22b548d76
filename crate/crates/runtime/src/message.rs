//! Master-worker messages and their wire encoding.
//!
//! A frame is a little-endian `u32` payload length followed by a fixed
//! 37-byte payload:
//!
//! | offset | type  | field      |
//! |-------:|-------|------------|
//! | 0      | `u8`  | kind       |
//! | 1      | `u32` | rank       |
//! | 5      | `u64` | start      |
//! | 13     | `u64` | size       |
//! | 21     | `f64` | exec_time  |
//! | 29     | `f64` | sched_time |
//!
//! Kinds: 0 work request, 1 work assignment, 2 terminate, 3 completion
//! report. Fields a kind does not use are zero.

use std::io::{self, Read, Write};

pub const PAYLOAD_LEN: usize = 37;
pub const FRAME_LEN: usize = 4 + PAYLOAD_LEN;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Message {
    WorkRequest {
        rank: u32,
    },
    WorkAssignment {
        rank: u32,
        start: u64,
        size: u64,
    },
    Terminate {
        rank: u32,
    },
    CompletionReport {
        rank: u32,
        start: u64,
        size: u64,
        exec_time: f64,
        sched_time: f64,
    },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WireError {
    #[error("frame payload of {0} bytes, expected {PAYLOAD_LEN}")]
    BadLength(u32),
    #[error("unknown message kind {0}")]
    UnknownKind(u8),
}

impl Message {
    pub fn kind(&self) -> u8 {
        match self {
            Message::WorkRequest { .. } => 0,
            Message::WorkAssignment { .. } => 1,
            Message::Terminate { .. } => 2,
            Message::CompletionReport { .. } => 3,
        }
    }

    /// Sender for requests and reports, addressee for assignments and
    /// terminations.
    pub fn rank(&self) -> u32 {
        match *self {
            Message::WorkRequest { rank }
            | Message::WorkAssignment { rank, .. }
            | Message::Terminate { rank }
            | Message::CompletionReport { rank, .. } => rank,
        }
    }

    pub fn encode(&self) -> [u8; FRAME_LEN] {
        let (start, size, exec, sched) = match *self {
            Message::WorkAssignment { start, size, .. } => (start, size, 0.0, 0.0),
            Message::CompletionReport {
                start,
                size,
                exec_time,
                sched_time,
                ..
            } => (start, size, exec_time, sched_time),
            _ => (0, 0, 0.0, 0.0),
        };
        let mut buf = [0u8; FRAME_LEN];
        buf[0..4].copy_from_slice(&(PAYLOAD_LEN as u32).to_le_bytes());
        buf[4] = self.kind();
        buf[5..9].copy_from_slice(&self.rank().to_le_bytes());
        buf[9..17].copy_from_slice(&start.to_le_bytes());
        buf[17..25].copy_from_slice(&size.to_le_bytes());
        buf[25..33].copy_from_slice(&exec.to_le_bytes());
        buf[33..41].copy_from_slice(&sched.to_le_bytes());
        buf
    }

    pub fn decode_payload(p: &[u8]) -> Result<Message, WireError> {
        if p.len() != PAYLOAD_LEN {
            return Err(WireError::BadLength(p.len() as u32));
        }
        let u32_at = |o: usize| u32::from_le_bytes(p[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(p[o..o + 8].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(p[o..o + 8].try_into().unwrap());
        let rank = u32_at(1);
        Ok(match p[0] {
            0 => Message::WorkRequest { rank },
            1 => Message::WorkAssignment {
                rank,
                start: u64_at(5),
                size: u64_at(13),
            },
            2 => Message::Terminate { rank },
            3 => Message::CompletionReport {
                rank,
                start: u64_at(5),
                size: u64_at(13),
                exec_time: f64_at(21),
                sched_time: f64_at(29),
            },
            k => return Err(WireError::UnknownKind(k)),
        })
    }
}

pub fn write_frame<W: Write>(mut w: W, m: &Message) -> io::Result<()> {
    w.write_all(&m.encode())
}

/// Next frame, or `None` on a clean end of stream between frames.
pub fn read_frame<R: Read>(mut r: R) -> io::Result<Option<Message>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(k) => got += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let len = u32::from_le_bytes(len);
    if len as usize != PAYLOAD_LEN {
        return Err(io::Error::new(io::ErrorKind::InvalidData, WireError::BadLength(len)));
    }
    let mut payload = [0u8; PAYLOAD_LEN];
    r.read_exact(&mut payload)?;
    Message::decode_payload(&payload)
        .map(Some)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}
