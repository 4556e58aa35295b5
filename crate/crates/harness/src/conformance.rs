//! Matcher conformance suite behind `protocol-check`.
//!
//! Drives a matcher through every operation on a small synthetic event and
//! compares its scores with the in-process reference matcher.

use std::collections::BTreeMap;
use std::io;

use anyhow::{Context, Result};
use mission_eval_core::classify::{MissionId, MissionSet, MissionThresholds};
use mission_eval_core::model::{MediaSegment, Mode, ModeSet, SigSetEntry, SigSetKind};
use mission_eval_core::partition::partition;
use mission_eval_core::payload::Payload;
use mission_eval_core::selection::SelectionConfig;
use mission_eval_core::synth::GeneratorConfig;
use mission_eval_core::template::FusionConfig;

use crate::hs::{Enrolled, HolisticSolution, HsError, IngestRequest, ReferenceHs};
use crate::pipeline::synthesize;
use crate::profile::ConstraintProfile;
use crate::session::{requests, Stage};
use crate::wire::{code, PROTOCOL_VERSION};

pub const TOLERANCE: f64 = 1e-6;
const N_GALLERY: usize = 6;
const N_PROBES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub outcome: Result<(), String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.outcome.is_ok()
    }

    pub fn line(&self) -> String {
        match &self.outcome {
            Ok(()) => format!("PASS {}", self.name),
            Err(e) => format!("FAIL {}: {e}", self.name),
        }
    }
}

pub type Opener<'a> = dyn Fn() -> io::Result<Box<dyn HolisticSolution + Send>> + 'a;

/// Gallery and probe requests of the fixture event.
pub struct Fixture {
    pub gallery: Vec<IngestRequest>,
    pub probes: Vec<IngestRequest>,
    pub profile: ConstraintProfile,
}

pub fn fixture() -> Result<Fixture> {
    let cfg = GeneratorConfig { n_subjects: 12, ..Default::default() };
    let c = synthesize(&cfg)?;
    let metas: Vec<MediaSegment> = c.segments.iter().map(|s| s.segment.clone()).collect();
    let missions: MissionSet = MissionId::ALL.into_iter().collect();
    let p = partition(&c.subjects, &metas, missions, &MissionThresholds::default(), &SelectionConfig::default());
    let media: BTreeMap<String, (MediaSegment, Payload)> = c
        .segments
        .into_iter()
        .map(|s| (s.segment.segment_id.clone(), (s.segment, s.payload)))
        .collect();
    let gallery: Vec<&SigSetEntry> = p.gallery.entries.iter().take(N_GALLERY).collect();
    let mut probes: Vec<&SigSetEntry> = Vec::new();
    for e in p.cells.iter().flat_map(|c| &c.sigset.entries) {
        if probes.len() < N_PROBES && !probes.iter().any(|x| x.entry_id == e.entry_id) {
            probes.push(e);
        }
    }
    let profile = ConstraintProfile::default();
    let err = |e| anyhow::anyhow!("{e}");
    Ok(Fixture {
        gallery: requests(&gallery, SigSetKind::Gallery, &profile, &media, Stage::Enroll).map_err(err)?,
        probes: requests(&probes, SigSetKind::Probe, &profile, &media, Stage::ProbeIngest).map_err(err)?,
        profile,
    })
}

fn remote_code(r: Result<impl std::fmt::Debug, HsError>, want: u16) -> Result<(), String> {
    match r {
        Err(HsError::Remote { code, .. }) if code == want => Ok(()),
        other => Err(format!("expected matcher error {want}, got {other:?}")),
    }
}

fn ingest_all(hs: &mut dyn HolisticSolution, reqs: &[IngestRequest]) -> Result<Vec<Enrolled>, String> {
    reqs.iter().map(|r| hs.ingest(r).map_err(|e| format!("{}: {e}", r.entry_id))).collect()
}

/// Scores of every probe against the whole gallery, per mode.
type Scores = BTreeMap<(String, usize), Vec<Option<f32>>>;

fn score_all(hs: &mut dyn HolisticSolution, f: &Fixture, modes: ModeSet) -> Result<(Scores, Vec<String>, Vec<String>), String> {
    let g: Vec<String> = ingest_all(hs, &f.gallery)?.into_iter().map(|e| e.handle).collect();
    let p: Vec<String> = ingest_all(hs, &f.probes)?.into_iter().map(|e| e.handle).collect();
    let mut out = Scores::new();
    for mode in modes.iter() {
        for (i, ph) in p.iter().enumerate() {
            let s = hs.verify(ph, &g, mode).map_err(|e| e.to_string())?;
            out.insert((mode.as_str().to_owned(), i), s);
        }
    }
    Ok((out, g, p))
}

fn close(a: Option<f32>, b: Option<f32>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (f64::from(a) - f64::from(b)).abs() <= TOLERANCE,
        (None, None) => true,
        _ => false,
    }
}

pub fn run(open: &Opener<'_>, fusion: FusionConfig) -> Result<Vec<Check>> {
    let f = fixture().context("building the fixture event")?;
    let mut checks = Vec::new();
    let mut push = |name, outcome| checks.push(Check { name, outcome });

    let mut fresh = open().context("starting matcher")?;
    push(
        "HELLO with a foreign version is refused",
        remote_code(fresh.hello(PROTOCOL_VERSION + 1, ModeSet::ALL), code::VERSION_MISMATCH),
    );
    drop(fresh);
    let mut fresh = open().context("starting matcher")?;
    push("HELLO with no modes is refused", remote_code(fresh.hello(PROTOCOL_VERSION, ModeSet::EMPTY), code::NO_MODES));
    drop(fresh);

    let mut hs = open().context("starting matcher")?;
    let caps = hs.hello(PROTOCOL_VERSION, ModeSet::ALL);
    let modes = match &caps {
        Ok(c) => c.modes.intersect(ModeSet::ALL),
        Err(_) => ModeSet::EMPTY,
    };
    push(
        "HELLO negotiates a non-empty mode set",
        match caps {
            Ok(c) if c.version == PROTOCOL_VERSION && !c.modes.is_empty() => Ok(()),
            other => Err(format!("{other:?}")),
        },
    );
    if modes.is_empty() {
        return Ok(checks);
    }
    push("CONFIG accepts a constraint profile", hs.configure(&f.profile.to_xml()).map_err(|e| e.to_string()));

    let gallery = ingest_all(&mut *hs, &f.gallery);
    push(
        "enroll yields one distinct handle per entry",
        match &gallery {
            Ok(g) => {
                let mut h: Vec<&str> = g.iter().map(|e| e.handle.as_str()).collect();
                h.sort_unstable();
                h.dedup();
                if h.len() == f.gallery.len() { Ok(()) } else { Err(format!("{} distinct of {}", h.len(), f.gallery.len())) }
            }
            Err(e) => Err(e.clone()),
        },
    );
    let mut corrupt = f.probes[0].clone();
    corrupt.entry_id = "corrupt".into();
    corrupt.media = vec![b"NOTBRF".to_vec()];
    push("corrupt media is refused with BAD_MEDIA", remote_code(hs.ingest(&corrupt), code::BAD_MEDIA));
    let probes = ingest_all(&mut *hs, &f.probes);
    push(
        "probe ingest yields a handle and a primary tracklet",
        match &probes {
            Ok(p) if p.iter().all(|e| !e.tracklets.is_empty()) => Ok(()),
            Ok(_) => Err("probe without tracklets".into()),
            Err(e) => Err(e.clone()),
        },
    );
    let (Ok(gallery), Ok(probes)) = (gallery, probes) else {
        return Ok(checks);
    };
    let g: Vec<String> = gallery.into_iter().map(|e| e.handle).collect();

    let mut verify_ok = Ok(());
    let mut search_ok = Ok(());
    let mut agree_ok = Ok(());
    let mut measured = Scores::new();
    for mode in modes.iter() {
        for (i, p) in probes.iter().enumerate() {
            let scores = match hs.verify(&p.handle, &g, mode) {
                Ok(s) if s.len() == g.len() => s,
                Ok(s) => {
                    verify_ok = Err(format!("{} scores for {} handles", s.len(), g.len()));
                    continue;
                }
                Err(e) => {
                    verify_ok = Err(e.to_string());
                    continue;
                }
            };
            match hs.search(&p.handle, g.len() as u32 + 5, mode) {
                Ok(ranked) => {
                    let ordered = ranked.windows(2).all(|w| {
                        w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0)
                    });
                    let scored = scores.iter().filter(|s| s.is_some()).count();
                    if !ordered || ranked.len() != scored {
                        search_ok = Err(format!("{} ranked of {scored} scored, ordered {ordered}", ranked.len()));
                    }
                    for (h, s) in &ranked {
                        let v = g.iter().position(|x| x == h).and_then(|j| scores[j]);
                        if !close(v, Some(*s)) {
                            agree_ok = Err(format!("{h}: search {s} vs verify {v:?}"));
                        }
                    }
                }
                Err(e) => search_ok = Err(e.to_string()),
            }
            measured.insert((mode.as_str().to_owned(), i), scores);
        }
    }
    push("VERIFY returns one score per gallery handle", verify_ok);
    push("SEARCH beyond gallery size ranks every scored handle, ties by handle", search_ok);
    push("SEARCH scores agree with VERIFY", agree_ok);
    push(
        "unknown handles are refused with UNKNOWN_HANDLE",
        remote_code(hs.verify("no-such-handle", &g, modes.iter().next().unwrap_or(Mode::Fusion)), code::UNKNOWN_HANDLE),
    );
    drop(hs);

    let mut reference = ReferenceHs::new(ModeSet::ALL, fusion);
    let parity = (|| {
        reference.hello(PROTOCOL_VERSION, modes).map_err(|e| e.to_string())?;
        let (expected, _, _) = score_all(&mut reference, &f, modes)?;
        for (k, want) in &expected {
            let got = measured.get(k).ok_or_else(|| format!("no scores for {k:?}"))?;
            if want.len() != got.len() || want.iter().zip(got).any(|(a, b)| !close(*a, *b)) {
                return Err(format!("{} probe {} differs", k.0, k.1));
            }
        }
        Ok(())
    })();
    push("scores match the reference matcher within 1e-6", parity);
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_matcher_conforms() {
        let open = || -> io::Result<Box<dyn HolisticSolution + Send>> { Ok(Box::new(ReferenceHs::default())) };
        let checks = run(&open, FusionConfig::default()).unwrap();
        assert!(checks.len() >= 11);
        for c in &checks {
            assert!(c.passed(), "{}", c.line());
        }
    }
}
