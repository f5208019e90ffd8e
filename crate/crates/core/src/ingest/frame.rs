//! Binary receiver frames.
//!
//! Layout: `B5 62 | class | id | len (u16 LE) | payload | CK_A CK_B`, with the
//! 8-bit Fletcher checksum taken over class, id, length and payload.

use thiserror::Error;

pub const SYNC_1: u8 = 0xB5;
pub const SYNC_2: u8 = 0x62;
/// sync(2) + class + id + len(2)
pub const HEADER_LEN: usize = 6;
pub const CHECKSUM_LEN: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("no sync pattern at start of input")]
    BadSync,
    #[error("checksum mismatch: computed {computed:02x?}, stored {stored:02x?}")]
    BadChecksum { computed: [u8; 2], stored: [u8; 2] },
    #[error("truncated frame: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("payload of {0} bytes exceeds the 16-bit length field")]
    PayloadTooLong(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFrame {
    pub msg_class: u8,
    pub msg_id: u8,
    pub payload: Vec<u8>,
}

impl RawFrame {
    pub fn new(msg_class: u8, msg_id: u8, payload: Vec<u8>) -> Self {
        Self {
            msg_class,
            msg_id,
            payload,
        }
    }

    /// Total bytes on the wire.
    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload.len() + CHECKSUM_LEN
    }
}

/// Fletcher-8 checksum over `bytes` (everything between sync and checksum).
pub fn checksum(bytes: &[u8]) -> [u8; 2] {
    let (mut ck_a, mut ck_b) = (0u8, 0u8);
    for &b in bytes {
        ck_a = ck_a.wrapping_add(b);
        ck_b = ck_b.wrapping_add(ck_a);
    }
    [ck_a, ck_b]
}

/// Parse one frame from the start of `bytes`.
///
/// Returns the frame and the number of bytes consumed. Trailing bytes after
/// the frame are left untouched.
pub fn parse_frame(bytes: &[u8]) -> Result<(RawFrame, usize), FrameError> {
    if bytes.len() < 2 || bytes[0] != SYNC_1 || bytes[1] != SYNC_2 {
        return Err(FrameError::BadSync);
    }
    if bytes.len() < HEADER_LEN {
        return Err(FrameError::Truncated {
            needed: HEADER_LEN,
            available: bytes.len(),
        });
    }
    let len = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
    let total = HEADER_LEN + len + CHECKSUM_LEN;
    if bytes.len() < total {
        return Err(FrameError::Truncated {
            needed: total,
            available: bytes.len(),
        });
    }
    let computed = checksum(&bytes[2..HEADER_LEN + len]);
    let stored = [bytes[total - 2], bytes[total - 1]];
    if computed != stored {
        return Err(FrameError::BadChecksum { computed, stored });
    }
    let frame = RawFrame {
        msg_class: bytes[2],
        msg_id: bytes[3],
        payload: bytes[HEADER_LEN..HEADER_LEN + len].to_vec(),
    };
    Ok((frame, total))
}

pub fn encode_frame(frame: &RawFrame) -> Result<Vec<u8>, FrameError> {
    let len = u16::try_from(frame.payload.len())
        .map_err(|_| FrameError::PayloadTooLong(frame.payload.len()))?;
    let mut out = Vec::with_capacity(frame.wire_len());
    out.extend_from_slice(&[SYNC_1, SYNC_2, frame.msg_class, frame.msg_id]);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&frame.payload);
    let ck = checksum(&out[2..]);
    out.extend_from_slice(&ck);
    Ok(out)
}

/// Iterates frames in a byte buffer, resynchronising after corrupt frames.
///
/// Bytes before a sync pattern are skipped silently; frames that fail the
/// checksum are yielded as errors and scanning resumes one byte later.
pub struct FrameReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> FrameReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }
}

impl Iterator for FrameReader<'_> {
    type Item = Result<RawFrame, FrameError>;

    fn next(&mut self) -> Option<Self::Item> {
        let rest = self.buf.get(self.pos..)?;
        let start = rest.windows(2).position(|w| w == [SYNC_1, SYNC_2])?;
        self.pos += start;
        match parse_frame(&self.buf[self.pos..]) {
            Ok((frame, used)) => {
                self.pos += used;
                Some(Ok(frame))
            }
            Err(e @ FrameError::Truncated { .. }) => {
                self.pos = self.buf.len();
                Some(Err(e))
            }
            Err(e) => {
                self.pos += 1;
                Some(Err(e))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_frame_known_checksum() {
        // class 0x0A id 0x31 len 0: A runs 0A 3B 3B 3B 3B, B runs 0A 45 80 BB
        let bytes = [0xB5, 0x62, 0x0A, 0x31, 0x00, 0x00, 0x3B, 0xBB];
        let (f, used) = parse_frame(&bytes).unwrap();
        assert_eq!(f, RawFrame::new(0x0A, 0x31, vec![]));
        assert_eq!(used, 8);
        assert_eq!(encode_frame(&f).unwrap(), bytes);
    }

    #[test]
    fn flipped_checksum() {
        let mut bytes = [0xB5, 0x62, 0x0A, 0x31, 0x00, 0x00, 0x3B, 0xBB];
        bytes[7] ^= 0xFF;
        assert!(matches!(parse_frame(&bytes), Err(FrameError::BadChecksum { .. })));
    }

    #[test]
    fn empty_and_truncated() {
        assert_eq!(parse_frame(&[]), Err(FrameError::BadSync));
        assert_eq!(parse_frame(&[0x00, 0x62]), Err(FrameError::BadSync));
        let f = encode_frame(&RawFrame::new(1, 2, vec![9; 10])).unwrap();
        assert_eq!(
            parse_frame(&f[..12]),
            Err(FrameError::Truncated {
                needed: 18,
                available: 12
            })
        );
    }

    #[test]
    fn consumes_exact_length() {
        let mut f = encode_frame(&RawFrame::new(1, 2, vec![7; 3])).unwrap();
        f.extend_from_slice(&[0xAA, 0xBB]);
        let (_, used) = parse_frame(&f).unwrap();
        assert_eq!(used, 11);
    }

    #[test]
    fn reader_resyncs() {
        let a = encode_frame(&RawFrame::new(1, 1, vec![1, 2])).unwrap();
        let mut b = encode_frame(&RawFrame::new(2, 2, vec![3])).unwrap();
        let c = encode_frame(&RawFrame::new(3, 3, vec![])).unwrap();
        let last = b.len() - 1;
        b[last] ^= 1;
        let mut buf = vec![0x00, 0x13];
        buf.extend(&a);
        buf.extend(&b);
        buf.extend(&c);
        let out: Vec<_> = FrameReader::new(&buf).collect();
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].as_ref().unwrap().msg_class, 1);
        assert!(out[1].is_err());
        assert_eq!(out[2].as_ref().unwrap().msg_class, 3);
    }
}
