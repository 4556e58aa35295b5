//! BRF payload codec.
//!
//! Layout (little-endian throughout):
//!
//! ```text
//! magic "SYNB" | version u16 | segment_id str | frame_count u32 | frame_rate u32
//! frame:  frame_index u32 | timestamp_ms i64 | track_count u32 | track*
//! track:  track_id u32 | flags u8 (1 = head box, 2 = body box)
//!         | [head x,y,w,h f32] | [body x,y,w,h f32]
//!         | yaw f32 | pitch f32 | roll f32 | obs_count u32 | obs*
//! obs:    modality u8 | quality f32 | dim u32 | f32 * dim
//! str:    len u32 | UTF-8 bytes
//! ```

use mission_eval_core::model::{BBox, Modality};
use mission_eval_core::payload::{
    Observation, Payload, PayloadFrame, TrackObservation, BRF_MAGIC, BRF_VERSION,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BrfError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    Version(u16),
    #[error("truncated payload")]
    Truncated,
    #[error("invalid UTF-8 in segment id")]
    Utf8,
    #[error("unknown modality code {0}")]
    Modality(u8),
    #[error("payload has no frames")]
    Empty,
    #[error("{0} trailing bytes")]
    Trailing(usize),
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f32(out: &mut Vec<u8>, v: f32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_bbox(out: &mut Vec<u8>, b: &BBox) {
    for v in [b.x, b.y, b.w, b.h] {
        put_f32(out, v as f32);
    }
}

pub fn modality_code(m: Modality) -> u8 {
    m.index() as u8
}

pub fn modality_from_code(c: u8) -> Option<Modality> {
    Modality::ALL.get(usize::from(c)).copied()
}

pub fn encode(p: &Payload) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&BRF_MAGIC);
    out.extend_from_slice(&BRF_VERSION.to_le_bytes());
    put_u32(&mut out, p.segment_id.len() as u32);
    out.extend_from_slice(p.segment_id.as_bytes());
    put_u32(&mut out, p.frames.len() as u32);
    put_u32(&mut out, p.frame_rate);
    for f in &p.frames {
        put_u32(&mut out, f.frame_index);
        out.extend_from_slice(&f.timestamp_ms.to_le_bytes());
        put_u32(&mut out, f.tracks.len() as u32);
        for t in &f.tracks {
            put_u32(&mut out, t.track_id);
            let flags = u8::from(t.head_bbox.is_some()) | (u8::from(t.body_bbox.is_some()) << 1);
            out.push(flags);
            if let Some(b) = &t.head_bbox {
                put_bbox(&mut out, b);
            }
            if let Some(b) = &t.body_bbox {
                put_bbox(&mut out, b);
            }
            for v in [t.yaw_deg, t.pitch_deg, t.roll_deg] {
                put_f32(&mut out, v);
            }
            put_u32(&mut out, t.observations.len() as u32);
            for o in &t.observations {
                out.push(modality_code(o.modality));
                put_f32(&mut out, o.quality);
                put_u32(&mut out, o.vector.len() as u32);
                for &x in &o.vector {
                    put_f32(&mut out, x);
                }
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], BrfError> {
        let end = self.pos.checked_add(n).ok_or(BrfError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(BrfError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, BrfError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, BrfError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, BrfError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn i64(&mut self) -> Result<i64, BrfError> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32(&mut self) -> Result<f32, BrfError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn bbox(&mut self) -> Result<BBox, BrfError> {
        Ok(BBox {
            x: f64::from(self.f32()?),
            y: f64::from(self.f32()?),
            w: f64::from(self.f32()?),
            h: f64::from(self.f32()?),
        })
    }

    /// A count whose elements need at least `min_size` bytes each, checked
    /// against the remaining input before anything is allocated.
    fn count(&mut self, min_size: usize) -> Result<usize, BrfError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(min_size) > self.buf.len() - self.pos {
            return Err(BrfError::Truncated);
        }
        Ok(n)
    }
}

pub fn decode(bytes: &[u8]) -> Result<Payload, BrfError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4).map_err(|_| BrfError::BadMagic)? != BRF_MAGIC {
        return Err(BrfError::BadMagic);
    }
    let version = r.u16()?;
    if version != BRF_VERSION {
        return Err(BrfError::Version(version));
    }
    let id_len = r.count(1)?;
    let segment_id = std::str::from_utf8(r.take(id_len)?).map_err(|_| BrfError::Utf8)?.to_owned();
    let n_frames = r.count(16)?;
    let frame_rate = r.u32()?;
    if n_frames == 0 {
        return Err(BrfError::Empty);
    }
    let mut frames = Vec::with_capacity(n_frames);
    for _ in 0..n_frames {
        let frame_index = r.u32()?;
        let timestamp_ms = r.i64()?;
        let n_tracks = r.count(21)?;
        let mut tracks = Vec::with_capacity(n_tracks);
        for _ in 0..n_tracks {
            let track_id = r.u32()?;
            let flags = r.u8()?;
            let head_bbox = if flags & 1 != 0 { Some(r.bbox()?) } else { None };
            let body_bbox = if flags & 2 != 0 { Some(r.bbox()?) } else { None };
            let (yaw_deg, pitch_deg, roll_deg) = (r.f32()?, r.f32()?, r.f32()?);
            let n_obs = r.count(9)?;
            let mut observations = Vec::with_capacity(n_obs);
            for _ in 0..n_obs {
                let code = r.u8()?;
                let modality = modality_from_code(code).ok_or(BrfError::Modality(code))?;
                let quality = r.f32()?;
                let dim = r.count(4)?;
                let vector = (0..dim).map(|_| r.f32()).collect::<Result<_, _>>()?;
                observations.push(Observation { modality, quality, vector });
            }
            tracks.push(TrackObservation {
                track_id,
                head_bbox,
                body_bbox,
                yaw_deg,
                pitch_deg,
                roll_deg,
                observations,
            });
        }
        frames.push(PayloadFrame {
            frame_index,
            timestamp_ms,
            tracks,
        });
    }
    if r.pos != bytes.len() {
        return Err(BrfError::Trailing(bytes.len() - r.pos));
    }
    Ok(Payload {
        segment_id,
        frame_rate,
        frames,
    })
}
