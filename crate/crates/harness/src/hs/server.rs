//! Wire-protocol server loop around any in-process matcher.

use std::io::{self, Read, Write};

use mission_eval_core::model::SigSetKind;

use super::{HolisticSolution, HsError, IngestRequest};
use crate::wire::{code, read_frame, write_message, Message};

struct Pending {
    entry_id: String,
    kind: SigSetKind,
    metadata_xml: String,
    media: Vec<Vec<u8>>,
}

fn error_reply(e: HsError) -> Message {
    match e {
        HsError::Remote { code, message } => Message::Error { code, message },
        other => Message::Error {
            code: code::MALFORMED,
            message: other.to_string(),
        },
    }
}

fn out_of_sequence(what: &str) -> Message {
    Message::Error {
        code: code::OUT_OF_SEQUENCE,
        message: format!("{what} out of sequence"),
    }
}

/// Serves one session until the peer closes the stream. A malformed frame
/// is answered with ERROR and the loop continues; a stream that ends inside
/// a frame is an error.
pub fn serve<H: HolisticSolution + ?Sized>(hs: &mut H, r: &mut impl Read, w: &mut impl Write) -> io::Result<()> {
    let mut greeted = false;
    let mut pending: Option<Pending> = None;
    while let Some((ty, payload)) = read_frame(r)? {
        let m = match Message::decode(ty, &payload) {
            Ok(m) => m,
            Err(e) => {
                log::warn!("malformed frame type 0x{ty:02x}: {e}");
                write_message(w, &Message::Error { code: code::MALFORMED, message: e.to_string() })?;
                w.flush()?;
                continue;
            }
        };
        log::debug!("recv {}", m.name());
        let reply = match m {
            Message::Hello { version, modes } => Some(match hs.hello(version, modes) {
                Ok(caps) => {
                    greeted = true;
                    Message::Hello { version: caps.version, modes: caps.modes }
                }
                Err(e) => error_reply(e),
            }),
            _ if !greeted => Some(out_of_sequence("request before HELLO")),
            Message::Config { profile_xml } => {
                if let Err(e) = hs.configure(&profile_xml) {
                    log::warn!("configuration refused: {e}");
                }
                None
            }
            Message::MediaBegin { entry_id, kind, metadata_xml } => {
                if let Some(p) = pending.replace(Pending { entry_id, kind, metadata_xml, media: Vec::new() }) {
                    log::warn!("entry {} abandoned without MEDIA_END", p.entry_id);
                }
                None
            }
            Message::MediaChunk { data } => {
                match pending.as_mut() {
                    Some(p) => p.media.push(data),
                    None => log::warn!("MEDIA_CHUNK outside an entry dropped"),
                }
                None
            }
            Message::MediaEnd => Some(match pending.take() {
                Some(p) => {
                    let req = IngestRequest {
                        entry_id: p.entry_id,
                        kind: p.kind,
                        metadata_xml: p.metadata_xml,
                        media: p.media,
                    };
                    match hs.ingest(&req) {
                        Ok(e) => Message::Handle { handle: e.handle, tracklets: e.tracklets },
                        Err(e) => error_reply(e),
                    }
                }
                None => out_of_sequence("MEDIA_END"),
            }),
            Message::Verify { probe, gallery, mode } => Some(match hs.verify(&probe, &gallery, mode) {
                Ok(scores) => Message::Scores { scores },
                Err(e) => error_reply(e),
            }),
            Message::Search { probe, k, mode } => Some(match hs.search(&probe, k, mode) {
                Ok(ranked) => Message::Ranked { ranked },
                Err(e) => error_reply(e),
            }),
            other => Some(out_of_sequence(other.name())),
        };
        if let Some(reply) = reply {
            log::debug!("send {}", reply.name());
            write_message(w, &reply)?;
            w.flush()?;
        }
    }
    Ok(())
}
