//! Matcher wire protocol.
//!
//! Every frame is `len u32 | type u8 | payload`, little-endian, where `len`
//! counts the type byte plus the payload. Strings are `len u32 | UTF-8`.
//! A null score travels as a quiet NaN.
//!
//! | type | message     | payload                                              |
//! |------|-------------|------------------------------------------------------|
//! | 0x01 | HELLO       | version u16, modes u8 (face 1, body 2, gait 4, fusion 8) |
//! | 0x02 | CONFIG      | constraint profile XML (str)                         |
//! | 0x10 | MEDIA_BEGIN | entry_id str, kind u8 (0 gallery, 1 probe), metadata XML str |
//! | 0x11 | MEDIA_CHUNK | one media item's BRF bytes (rest of frame)           |
//! | 0x12 | MEDIA_END   | empty                                                |
//! | 0x13 | HANDLE      | handle str, tracklet count u32, tracklet str*        |
//! | 0x20 | VERIFY      | probe handle str, count u32, gallery handle str*, mode u8 |
//! | 0x21 | SCORES      | count u32, f32*                                      |
//! | 0x22 | SEARCH      | probe handle str, k u32, mode u8                     |
//! | 0x23 | RANKED      | count u32, (handle str, f32)*                        |
//! | 0x7F | ERROR       | code u16, message str                                |
//!
//! The harness opens with HELLO and the matcher answers with its own HELLO.
//! CONFIG, MEDIA_BEGIN and MEDIA_CHUNK get no reply; MEDIA_END is answered
//! by HANDLE, VERIFY by SCORES, SEARCH by RANKED, or any of them by ERROR.

use std::io::{self, Read, Write};

use mission_eval_core::model::{Mode, ModeSet, SigSetKind};

pub const PROTOCOL_VERSION: u16 = 1;
/// Frames above this size are refused rather than allocated.
pub const MAX_FRAME_LEN: u32 = 64 << 20;

pub mod msg {
    pub const HELLO: u8 = 0x01;
    pub const CONFIG: u8 = 0x02;
    pub const MEDIA_BEGIN: u8 = 0x10;
    pub const MEDIA_CHUNK: u8 = 0x11;
    pub const MEDIA_END: u8 = 0x12;
    pub const HANDLE: u8 = 0x13;
    pub const VERIFY: u8 = 0x20;
    pub const SCORES: u8 = 0x21;
    pub const SEARCH: u8 = 0x22;
    pub const RANKED: u8 = 0x23;
    pub const ERROR: u8 = 0x7F;
}

pub mod code {
    pub const MALFORMED: u16 = 1;
    pub const VERSION_MISMATCH: u16 = 2;
    pub const NO_MODES: u16 = 3;
    pub const BAD_MEDIA: u16 = 4;
    pub const UNKNOWN_HANDLE: u16 = 5;
    pub const UNSUPPORTED_MODE: u16 = 6;
    pub const OUT_OF_SEQUENCE: u16 = 7;
    pub const NO_TEMPLATE: u16 = 8;
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello { version: u16, modes: ModeSet },
    Config { profile_xml: String },
    MediaBegin { entry_id: String, kind: SigSetKind, metadata_xml: String },
    MediaChunk { data: Vec<u8> },
    MediaEnd,
    Handle { handle: String, tracklets: Vec<String> },
    Verify { probe: String, gallery: Vec<String>, mode: Mode },
    Scores { scores: Vec<Option<f32>> },
    Search { probe: String, k: u32, mode: Mode },
    Ranked { ranked: Vec<(String, f32)> },
    Error { code: u16, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("unknown message type 0x{0:02x}")]
    UnknownType(u8),
    #[error("payload truncated")]
    Truncated,
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("invalid UTF-8")]
    Utf8,
    #[error("invalid {field} value {value}")]
    BadValue { field: &'static str, value: u32 },
}

impl Message {
    pub fn type_byte(&self) -> u8 {
        match self {
            Message::Hello { .. } => msg::HELLO,
            Message::Config { .. } => msg::CONFIG,
            Message::MediaBegin { .. } => msg::MEDIA_BEGIN,
            Message::MediaChunk { .. } => msg::MEDIA_CHUNK,
            Message::MediaEnd => msg::MEDIA_END,
            Message::Handle { .. } => msg::HANDLE,
            Message::Verify { .. } => msg::VERIFY,
            Message::Scores { .. } => msg::SCORES,
            Message::Search { .. } => msg::SEARCH,
            Message::Ranked { .. } => msg::RANKED,
            Message::Error { .. } => msg::ERROR,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "HELLO",
            Message::Config { .. } => "CONFIG",
            Message::MediaBegin { .. } => "MEDIA_BEGIN",
            Message::MediaChunk { .. } => "MEDIA_CHUNK",
            Message::MediaEnd => "MEDIA_END",
            Message::Handle { .. } => "HANDLE",
            Message::Verify { .. } => "VERIFY",
            Message::Scores { .. } => "SCORES",
            Message::Search { .. } => "SEARCH",
            Message::Ranked { .. } => "RANKED",
            Message::Error { .. } => "ERROR",
        }
    }

    pub fn payload(&self) -> Vec<u8> {
        let mut p = Vec::new();
        match self {
            Message::Hello { version, modes } => {
                p.extend_from_slice(&version.to_le_bytes());
                p.push(modes.0);
            }
            Message::Config { profile_xml } => put_str(&mut p, profile_xml),
            Message::MediaBegin { entry_id, kind, metadata_xml } => {
                put_str(&mut p, entry_id);
                p.push(kind_code(*kind));
                put_str(&mut p, metadata_xml);
            }
            Message::MediaChunk { data } => p.extend_from_slice(data),
            Message::MediaEnd => {}
            Message::Handle { handle, tracklets } => {
                put_str(&mut p, handle);
                put_u32(&mut p, tracklets.len() as u32);
                for t in tracklets {
                    put_str(&mut p, t);
                }
            }
            Message::Verify { probe, gallery, mode } => {
                put_str(&mut p, probe);
                put_u32(&mut p, gallery.len() as u32);
                for g in gallery {
                    put_str(&mut p, g);
                }
                p.push(mode.code());
            }
            Message::Scores { scores } => {
                put_u32(&mut p, scores.len() as u32);
                for s in scores {
                    p.extend_from_slice(&s.unwrap_or(f32::NAN).to_le_bytes());
                }
            }
            Message::Search { probe, k, mode } => {
                put_str(&mut p, probe);
                put_u32(&mut p, *k);
                p.push(mode.code());
            }
            Message::Ranked { ranked } => {
                put_u32(&mut p, ranked.len() as u32);
                for (h, s) in ranked {
                    put_str(&mut p, h);
                    p.extend_from_slice(&s.to_le_bytes());
                }
            }
            Message::Error { code, message } => {
                p.extend_from_slice(&code.to_le_bytes());
                put_str(&mut p, message);
            }
        }
        p
    }

    /// Complete frame bytes.
    pub fn encode(&self) -> Vec<u8> {
        let payload = self.payload();
        let mut out = Vec::with_capacity(payload.len() + 5);
        put_u32(&mut out, payload.len() as u32 + 1);
        out.push(self.type_byte());
        out.extend_from_slice(&payload);
        out
    }

    pub fn decode(ty: u8, payload: &[u8]) -> Result<Message, DecodeError> {
        let mut r = Cursor { buf: payload, pos: 0 };
        let m = match ty {
            msg::HELLO => Message::Hello {
                version: r.u16()?,
                modes: ModeSet(r.u8()?),
            },
            msg::CONFIG => Message::Config { profile_xml: r.string()? },
            msg::MEDIA_BEGIN => Message::MediaBegin {
                entry_id: r.string()?,
                kind: kind_from_code(r.u8()?)?,
                metadata_xml: r.string()?,
            },
            msg::MEDIA_CHUNK => {
                r.pos = payload.len();
                Message::MediaChunk { data: payload.to_vec() }
            }
            msg::MEDIA_END => Message::MediaEnd,
            msg::HANDLE => {
                let handle = r.string()?;
                let n = r.count(4)?;
                let tracklets = (0..n).map(|_| r.string()).collect::<Result<_, _>>()?;
                Message::Handle { handle, tracklets }
            }
            msg::VERIFY => {
                let probe = r.string()?;
                let n = r.count(4)?;
                let gallery = (0..n).map(|_| r.string()).collect::<Result<_, _>>()?;
                Message::Verify { probe, gallery, mode: mode_from_code(r.u8()?)? }
            }
            msg::SCORES => {
                let n = r.count(4)?;
                let scores = (0..n)
                    .map(|_| r.f32().map(|s| (!s.is_nan()).then_some(s)))
                    .collect::<Result<_, _>>()?;
                Message::Scores { scores }
            }
            msg::SEARCH => Message::Search {
                probe: r.string()?,
                k: r.u32()?,
                mode: mode_from_code(r.u8()?)?,
            },
            msg::RANKED => {
                let n = r.count(8)?;
                let ranked = (0..n)
                    .map(|_| Ok((r.string()?, r.f32()?)))
                    .collect::<Result<_, DecodeError>>()?;
                Message::Ranked { ranked }
            }
            msg::ERROR => Message::Error {
                code: r.u16()?,
                message: r.string()?,
            },
            other => return Err(DecodeError::UnknownType(other)),
        };
        if r.pos != payload.len() {
            return Err(DecodeError::Trailing(payload.len() - r.pos));
        }
        Ok(m)
    }
}

pub fn kind_code(k: SigSetKind) -> u8 {
    match k {
        SigSetKind::Gallery => 0,
        SigSetKind::Probe => 1,
    }
}

fn kind_from_code(c: u8) -> Result<SigSetKind, DecodeError> {
    match c {
        0 => Ok(SigSetKind::Gallery),
        1 => Ok(SigSetKind::Probe),
        v => Err(DecodeError::BadValue { field: "kind", value: u32::from(v) }),
    }
}

fn mode_from_code(c: u8) -> Result<Mode, DecodeError> {
    Mode::from_code(c).ok_or(DecodeError::BadValue { field: "mode", value: u32::from(c) })
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self.pos.checked_add(n).ok_or(DecodeError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(DecodeError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32(&mut self) -> Result<f32, DecodeError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn count(&mut self, min_size: usize) -> Result<usize, DecodeError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(min_size) > self.buf.len() - self.pos {
            return Err(DecodeError::Truncated);
        }
        Ok(n)
    }

    fn string(&mut self) -> Result<String, DecodeError> {
        let n = self.count(1)?;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| DecodeError::Utf8)
    }
}

/// One raw frame off the stream. `Ok(None)` on a clean end of stream at a
/// frame boundary; a stream that ends inside a frame is `UnexpectedEof`.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<(u8, Vec<u8>)>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let len = u32::from_le_bytes(len);
    if len == 0 || len > MAX_FRAME_LEN {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame length {len} out of bounds"),
        ));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    let ty = body[0];
    body.remove(0);
    Ok(Some((ty, body)))
}

pub fn write_message(w: &mut impl Write, m: &Message) -> io::Result<()> {
    w.write_all(&m.encode())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn samples() -> Vec<Message> {
        vec![
            Message::Hello { version: 1, modes: ModeSet(0x0B) },
            Message::Config { profile_xml: "<profile/>".into() },
            Message::MediaBegin {
                entry_id: "gal-S0001".into(),
                kind: SigSetKind::Gallery,
                metadata_xml: "<metadata/>".into(),
            },
            Message::MediaChunk { data: vec![1, 2, 3] },
            Message::MediaEnd,
            Message::Handle { handle: "h1".into(), tracklets: vec!["h1.0".into(), "h1.1".into()] },
            Message::Verify { probe: "p".into(), gallery: vec!["a".into(), "b".into()], mode: Mode::Fusion },
            Message::Scores { scores: vec![Some(0.5), None, Some(-1.0)] },
            Message::Search { probe: "p".into(), k: 5, mode: Mode::Gait },
            Message::Ranked { ranked: vec![("a".into(), 0.9), ("b".into(), 0.1)] },
            Message::Error { code: code::BAD_MEDIA, message: "bad magic".into() },
        ]
    }

    #[test]
    fn every_message_round_trips_through_a_stream() {
        let mut stream = Vec::new();
        for m in samples() {
            write_message(&mut stream, &m).unwrap();
        }
        let mut r = stream.as_slice();
        for m in samples() {
            let (ty, payload) = read_frame(&mut r).unwrap().unwrap();
            assert_eq!(ty, m.type_byte());
            assert_eq!(Message::decode(ty, &payload).unwrap(), m);
        }
        assert!(read_frame(&mut r).unwrap().is_none());
    }

    #[test]
    fn hello_bytes_are_exact() {
        let bytes = Message::Hello { version: 1, modes: ModeSet(0x0F) }.encode();
        assert_eq!(bytes, [4, 0, 0, 0, 0x01, 1, 0, 0x0F]);
        assert_eq!(Message::MediaEnd.encode(), [1, 0, 0, 0, 0x12]);
    }

    #[test]
    fn truncated_stream_is_an_error() {
        let bytes = Message::Config { profile_xml: "<p/>".into() }.encode();
        let mut r = &bytes[..bytes.len() - 1];
        assert_eq!(read_frame(&mut r).unwrap_err().kind(), io::ErrorKind::UnexpectedEof);
        let mut r = &bytes[..2];
        assert_eq!(read_frame(&mut r).unwrap_err().kind(), io::ErrorKind::UnexpectedEof);
    }

    #[test]
    fn malformed_payloads() {
        assert_eq!(Message::decode(0x55, &[]), Err(DecodeError::UnknownType(0x55)));
        assert_eq!(Message::decode(msg::HELLO, &[1]), Err(DecodeError::Truncated));
        assert_eq!(Message::decode(msg::MEDIA_END, &[0]), Err(DecodeError::Trailing(1)));
        assert_eq!(
            Message::decode(msg::SEARCH, &[0, 0, 0, 0, 1, 0, 0, 0, 9]),
            Err(DecodeError::BadValue { field: "mode", value: 9 })
        );
        assert_eq!(Message::decode(msg::SCORES, &[255, 255, 255, 255]), Err(DecodeError::Truncated));
    }

    #[test]
    fn oversized_frame_refused() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&(MAX_FRAME_LEN + 1).to_le_bytes());
        let mut r = bytes.as_slice();
        assert_eq!(read_frame(&mut r).unwrap_err().kind(), io::ErrorKind::InvalidData);
    }

    fn mode() -> impl Strategy<Value = Mode> {
        prop::sample::select(Mode::ALL.to_vec())
    }

    fn message() -> impl Strategy<Value = Message> {
        let id = "[a-z0-9.-]{0,12}";
        let score = prop::option::of(-1.0e6f32..1.0e6);
        prop_oneof![
            (any::<u16>(), 0u8..16).prop_map(|(version, m)| Message::Hello { version, modes: ModeSet(m) }),
            ".{0,40}".prop_map(|profile_xml| Message::Config { profile_xml }),
            prop::collection::vec(any::<u8>(), 0..300).prop_map(|data| Message::MediaChunk { data }),
            (id, prop::collection::vec(id, 0..5)).prop_map(|(handle, tracklets)| Message::Handle { handle, tracklets }),
            (id, prop::collection::vec(id, 0..8), mode()).prop_map(|(probe, gallery, mode)| Message::Verify { probe, gallery, mode }),
            prop::collection::vec(score, 0..20).prop_map(|scores| Message::Scores { scores }),
            (id, any::<u32>(), mode()).prop_map(|(probe, k, mode)| Message::Search { probe, k, mode }),
            prop::collection::vec((id, -1.0e6f32..1.0e6), 0..10).prop_map(|ranked| Message::Ranked { ranked }),
            (any::<u16>(), ".{0,30}").prop_map(|(code, message)| Message::Error { code, message }),
        ]
    }

    proptest! {
        #[test]
        fn arbitrary_messages_round_trip(m in message()) {
            let mut r = m.encode();
            let (ty, payload) = read_frame(&mut r.as_slice()).unwrap().unwrap();
            prop_assert_eq!(Message::decode(ty, &payload).unwrap(), m);
            r.truncate(r.len() - 1);
            prop_assert!(read_frame(&mut r.as_slice()).is_err());
        }

        #[test]
        fn arbitrary_payloads_never_panic(ty in any::<u8>(), payload in prop::collection::vec(any::<u8>(), 0..64)) {
            let _ = Message::decode(ty, &payload);
        }
    }
}
