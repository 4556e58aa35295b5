//! Matcher ("holistic solution") abstraction shared by the in-process
//! reference matcher and the wire client.

use std::io;

use mission_eval_core::model::{Mode, ModeSet, SigSetKind};

mod reference;
mod server;
mod wire_client;

pub use reference::ReferenceHs;
pub use server::serve;
pub use wire_client::{Direction, HsSpec, WireHs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub version: u16,
    pub modes: ModeSet,
}

/// One sig-set entry as streamed to a matcher.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestRequest {
    pub entry_id: String,
    pub kind: SigSetKind,
    pub metadata_xml: String,
    /// BRF bytes per media item, already reformatted for the profile.
    pub media: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enrolled {
    pub handle: String,
    /// Probe tracklets, primary first; empty for gallery templates.
    pub tracklets: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum HsError {
    /// The matcher refused one request; the session stays usable.
    #[error("matcher error {code}: {message}")]
    Remote { code: u16, message: String },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("transport: {0}")]
    Io(#[from] io::Error),
}

impl HsError {
    pub fn remote(code: u16, message: impl Into<String>) -> Self {
        HsError::Remote {
            code,
            message: message.into(),
        }
    }

    /// Transport and protocol failures end the session.
    pub fn is_fatal(&self) -> bool {
        !matches!(self, HsError::Remote { .. })
    }
}

pub trait HolisticSolution {
    fn hello(&mut self, version: u16, requested: ModeSet) -> Result<Capabilities, HsError>;

    fn configure(&mut self, profile_xml: &str) -> Result<(), HsError>;

    fn ingest(&mut self, req: &IngestRequest) -> Result<Enrolled, HsError>;

    /// Several ingests; implementations may keep up to `window` in flight.
    /// The outer error is fatal, inner ones are per entry.
    fn ingest_many(
        &mut self,
        reqs: &[IngestRequest],
        _window: usize,
    ) -> Result<Vec<Result<Enrolled, HsError>>, HsError> {
        let mut out = Vec::with_capacity(reqs.len());
        for r in reqs {
            match self.ingest(r) {
                Err(e) if e.is_fatal() => return Err(e),
                other => out.push(other),
            }
        }
        Ok(out)
    }

    /// One score per gallery handle, in order; `None` where no score exists.
    fn verify(&mut self, probe: &str, gallery: &[String], mode: Mode) -> Result<Vec<Option<f32>>, HsError>;

    /// Top `k` gallery handles by descending score, ties by handle.
    fn search(&mut self, probe: &str, k: u32, mode: Mode) -> Result<Vec<(String, f32)>, HsError>;
}

impl<T: HolisticSolution + ?Sized> HolisticSolution for Box<T> {
    fn hello(&mut self, version: u16, requested: ModeSet) -> Result<Capabilities, HsError> {
        (**self).hello(version, requested)
    }

    fn configure(&mut self, profile_xml: &str) -> Result<(), HsError> {
        (**self).configure(profile_xml)
    }

    fn ingest(&mut self, req: &IngestRequest) -> Result<Enrolled, HsError> {
        (**self).ingest(req)
    }

    fn ingest_many(
        &mut self,
        reqs: &[IngestRequest],
        window: usize,
    ) -> Result<Vec<Result<Enrolled, HsError>>, HsError> {
        (**self).ingest_many(reqs, window)
    }

    fn verify(&mut self, probe: &str, gallery: &[String], mode: Mode) -> Result<Vec<Option<f32>>, HsError> {
        (**self).verify(probe, gallery, mode)
    }

    fn search(&mut self, probe: &str, k: u32, mode: Mode) -> Result<Vec<(String, f32)>, HsError> {
        (**self).search(probe, k, mode)
    }
}
