//! One evaluation session against a matcher: negotiate, enroll the gallery,
//! ingest probes, then collect verification rows and search rankings.

use std::collections::BTreeMap;
use std::fmt;

use mission_eval_core::metrics::{ScoreMatrix, SearchResult};
use mission_eval_core::model::{MediaSegment, Mode, ModeSet, SigSet, SigSetEntry, SigSetKind};
use mission_eval_core::payload::Payload;

use crate::brf;
use crate::hs::{Enrolled, HolisticSolution, HsError, IngestRequest};
use crate::profile::ConstraintProfile;
use crate::wire::PROTOCOL_VERSION;

pub const DEFAULT_WINDOW: usize = 4;

/// Resolves media references to stored segments.
pub trait MediaSource {
    fn segment(&self, segment_id: &str) -> Result<MediaSegment, MediaError>;
    fn payload(&self, segment_id: &str) -> Result<Payload, MediaError>;
}

#[derive(Debug, thiserror::Error)]
pub enum MediaError {
    #[error("media {0} not found")]
    Missing(String),
    #[error("media {id}: {message}")]
    Invalid { id: String, message: String },
}

impl MediaSource for BTreeMap<String, (MediaSegment, Payload)> {
    fn segment(&self, id: &str) -> Result<MediaSegment, MediaError> {
        self.get(id).map(|m| m.0.clone()).ok_or_else(|| MediaError::Missing(id.into()))
    }

    fn payload(&self, id: &str) -> Result<Payload, MediaError> {
        self.get(id).map(|m| m.1.clone()).ok_or_else(|| MediaError::Missing(id.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Negotiate,
    Enroll,
    ProbeIngest,
    Verify,
    Search,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Negotiate => "negotiate",
            Stage::Enroll => "enroll",
            Stage::ProbeIngest => "probe_ingest",
            Stage::Verify => "verify",
            Stage::Search => "search",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("[{stage}] session refused: {message}")]
    Refused { stage: Stage, message: String },
    #[error("[{stage}] {source}")]
    Media {
        stage: Stage,
        #[source]
        source: MediaError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Negotiated {
    /// Requested modes the matcher supports.
    pub modes: ModeSet,
    /// Requested modes it does not.
    pub unsupported: ModeSet,
}

pub fn negotiate(hs: &mut dyn HolisticSolution, requested: ModeSet) -> Result<Negotiated, SessionError> {
    let refused = |message: String| SessionError::Refused {
        stage: Stage::Negotiate,
        message,
    };
    let caps = hs.hello(PROTOCOL_VERSION, requested).map_err(|e| refused(e.to_string()))?;
    if caps.version != PROTOCOL_VERSION {
        return Err(refused(format!(
            "matcher speaks protocol {}, harness {PROTOCOL_VERSION}",
            caps.version
        )));
    }
    if caps.modes.is_empty() {
        return Err(refused("matcher declares no modes".into()));
    }
    let modes = caps.modes.intersect(requested);
    if modes.is_empty() {
        return Err(refused("no requested mode is supported".into()));
    }
    Ok(Negotiated {
        modes,
        unsupported: ModeSet(requested.0 & !modes.0),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryFailure {
    pub entry_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageFailure {
    pub stage: Stage,
    pub message: String,
}

impl fmt::Display for StageFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage, self.message)
    }
}

/// Everything a session produced, keyed by sig-set entry ids rather than
/// matcher handles.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub negotiated: Negotiated,
    pub gallery: Vec<String>,
    pub probes: Vec<String>,
    /// Number of tracklets the matcher found in each ingested probe.
    pub tracklets: BTreeMap<String, usize>,
    pub matrices: BTreeMap<Mode, ScoreMatrix>,
    pub searches: BTreeMap<Mode, Vec<SearchResult>>,
    pub fte: Vec<EntryFailure>,
    pub fta: Vec<EntryFailure>,
    /// Verify or search requests the matcher refused, per mode.
    pub request_errors: BTreeMap<Mode, usize>,
    /// Set when the session ended early; everything above is partial.
    pub failure: Option<StageFailure>,
}

pub struct SessionPlan<'a> {
    pub gallery: &'a SigSet,
    /// Distinct probe entries over all requested cells.
    pub probes: Vec<&'a SigSetEntry>,
    pub modes: ModeSet,
    pub profile: &'a ConstraintProfile,
    pub window: usize,
}

pub fn requests(
    entries: &[&SigSetEntry],
    kind: SigSetKind,
    profile: &ConstraintProfile,
    media: &dyn MediaSource,
    stage: Stage,
) -> Result<Vec<IngestRequest>, SessionError> {
    let err = |source| SessionError::Media { stage, source };
    entries
        .iter()
        .map(|e| {
            let segments = e
                .media_refs
                .iter()
                .map(|r| media.segment(r))
                .collect::<Result<Vec<_>, _>>()
                .map_err(err)?;
            let blobs = e
                .media_refs
                .iter()
                .map(|r| media.payload(r).map(|p| brf::encode(&profile.media_reformat.apply(&p))))
                .collect::<Result<Vec<_>, _>>()
                .map_err(err)?;
            let refs: Vec<&MediaSegment> = segments.iter().collect();
            Ok(IngestRequest {
                entry_id: e.entry_id.clone(),
                kind,
                metadata_xml: profile.metadata_xml(&e.entry_id, &refs),
                media: blobs,
            })
        })
        .collect()
}

/// Streams `reqs` and returns handles by entry id. Entries without media
/// are refused locally and never streamed.
fn ingest_all(
    hs: &mut dyn HolisticSolution,
    reqs: Vec<IngestRequest>,
    window: usize,
    failures: &mut Vec<EntryFailure>,
) -> Result<BTreeMap<String, Enrolled>, HsError> {
    let (empty, reqs): (Vec<_>, Vec<_>) = reqs.into_iter().partition(|r| r.media.is_empty());
    for r in empty {
        failures.push(EntryFailure {
            entry_id: r.entry_id,
            reason: "no media references".into(),
        });
    }
    let results = hs.ingest_many(&reqs, window)?;
    let mut out = BTreeMap::new();
    for (r, res) in reqs.iter().zip(results) {
        match res {
            Ok(e) => {
                out.insert(r.entry_id.clone(), e);
            }
            Err(e) => failures.push(EntryFailure {
                entry_id: r.entry_id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    failures.sort_by(|a, b| a.entry_id.cmp(&b.entry_id));
    Ok(out)
}

pub fn run_session(
    hs: &mut dyn HolisticSolution,
    plan: &SessionPlan<'_>,
    media: &dyn MediaSource,
) -> Result<SessionOutcome, SessionError> {
    let negotiated = negotiate(hs, plan.modes)?;
    if let Err(e) = plan.profile.validate() {
        return Err(SessionError::Refused {
            stage: Stage::Negotiate,
            message: e.to_string(),
        });
    }
    let gallery_entries: Vec<&SigSetEntry> = plan.gallery.entries.iter().collect();
    let gallery_reqs = requests(&gallery_entries, SigSetKind::Gallery, plan.profile, media, Stage::Enroll)?;
    let probe_reqs = requests(&plan.probes, SigSetKind::Probe, plan.profile, media, Stage::ProbeIngest)?;

    let mut gallery: Vec<String> = gallery_entries.iter().map(|e| e.entry_id.clone()).collect();
    gallery.sort();
    let mut probes: Vec<String> = plan.probes.iter().map(|e| e.entry_id.clone()).collect();
    probes.sort();
    probes.dedup();
    let mut out = SessionOutcome {
        negotiated,
        matrices: negotiated
            .modes
            .iter()
            .map(|m| (m, ScoreMatrix::new(probes.clone(), gallery.clone())))
            .collect(),
        searches: BTreeMap::new(),
        gallery,
        probes,
        tracklets: BTreeMap::new(),
        fte: Vec::new(),
        fta: Vec::new(),
        request_errors: BTreeMap::new(),
        failure: None,
    };
    let fail = |out: &mut SessionOutcome, stage: Stage, e: HsError| {
        log::error!("[{stage}] {e}");
        out.failure = Some(StageFailure {
            stage,
            message: e.to_string(),
        });
    };

    if let Err(e) = hs.configure(&plan.profile.to_xml()) {
        fail(&mut out, Stage::Negotiate, e);
        return Ok(out);
    }
    let enrolled = match ingest_all(hs, gallery_reqs, plan.window, &mut out.fte) {
        Ok(m) => m,
        Err(e) => {
            fail(&mut out, Stage::Enroll, e);
            return Ok(out);
        }
    };
    log::info!("enrolled {} gallery entries, {} failed", enrolled.len(), out.fte.len());
    let ingested = match ingest_all(hs, probe_reqs, plan.window, &mut out.fta) {
        Ok(m) => m,
        Err(e) => {
            fail(&mut out, Stage::ProbeIngest, e);
            return Ok(out);
        }
    };
    log::info!("ingested {} probes, {} failed", ingested.len(), out.fta.len());
    out.tracklets = ingested.iter().map(|(k, v)| (k.clone(), v.tracklets.len())).collect();

    // Gallery columns in entry order; failed enrollments stay null.
    let columns: Vec<(usize, String)> = out
        .gallery
        .iter()
        .enumerate()
        .filter_map(|(i, id)| enrolled.get(id).map(|e| (i, e.handle.clone())))
        .collect();
    let handles: Vec<String> = columns.iter().map(|c| c.1.clone()).collect();
    let entry_of: BTreeMap<&str, &str> = enrolled
        .iter()
        .map(|(id, e)| (e.handle.as_str(), id.as_str()))
        .collect();
    let k = u32::try_from(handles.len()).unwrap_or(u32::MAX);

    for mode in negotiated.modes.iter() {
        let mut results = Vec::with_capacity(out.probes.len());
        for pi in 0..out.probes.len() {
            let probe_id = out.probes[pi].clone();
            let Some(p) = ingested.get(&probe_id) else {
                results.push(SearchResult {
                    probe: probe_id,
                    ranked: Vec::new(),
                });
                continue;
            };
            match hs.verify(&p.handle, &handles, mode) {
                Ok(row) => {
                    let m = out.matrices.get_mut(&mode).expect("matrix per mode");
                    for ((gi, _), s) in columns.iter().zip(row) {
                        m.set(pi, *gi, s.filter(|s| s.is_finite()).map(f64::from));
                    }
                }
                Err(e) if e.is_fatal() => {
                    fail(&mut out, Stage::Verify, e);
                    return Ok(out);
                }
                Err(e) => {
                    log::warn!("verify {probe_id} {}: {e}", mode.as_str());
                    *out.request_errors.entry(mode).or_default() += 1;
                }
            }
            let ranked = match hs.search(&p.handle, k, mode) {
                Ok(r) => r
                    .into_iter()
                    .filter_map(|(h, _)| entry_of.get(h.as_str()).map(|e| (*e).to_owned()))
                    .collect(),
                Err(e) if e.is_fatal() => {
                    fail(&mut out, Stage::Search, e);
                    return Ok(out);
                }
                Err(e) => {
                    log::warn!("search {probe_id} {}: {e}", mode.as_str());
                    *out.request_errors.entry(mode).or_default() += 1;
                    Vec::new()
                }
            };
            results.push(SearchResult { probe: probe_id, ranked });
        }
        out.searches.insert(mode, results);
    }
    Ok(out)
}

/// Distinct probe entries of several sig-sets, by entry id.
pub fn distinct_probes<'a>(sets: impl IntoIterator<Item = &'a SigSet>) -> Vec<&'a SigSetEntry> {
    let mut seen = BTreeMap::new();
    for s in sets {
        for e in &s.entries {
            seen.entry(e.entry_id.as_str()).or_insert(e);
        }
    }
    seen.into_values().collect()
}
