mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use mission_eval::conformance::{self, fixture};
use mission_eval::corpus::Corpus;
use mission_eval::hs::{Direction, HolisticSolution, HsSpec, ReferenceHs, WireHs};
use mission_eval::pipeline::{self, EvalOptions};
use mission_eval::profile::ConstraintProfile;
use mission_eval::session::{distinct_probes, run_session, SessionPlan, DEFAULT_WINDOW};
use mission_eval::wire::{Message, PROTOCOL_VERSION};
use mission_eval_core::classify::MissionId;
use mission_eval_core::model::{Mode, ModeSet, SigSet, SigSetKind};
use mission_eval_core::template::FusionConfig;

const BIN: &str = env!("CARGO_BIN_EXE_mission-eval");

fn serve_cmd() -> String {
    format!("'{BIN}' serve")
}

fn options(hs: HsSpec) -> EvalOptions {
    EvalOptions {
        hs,
        missions: MissionId::ALL.into_iter().collect(),
        modes: ModeSet::ALL,
        profile: ConstraintProfile::default(),
        window: DEFAULT_WINDOW,
        fusion: FusionConfig::default(),
        seed: 42,
    }
}

/// Message names in order, with runs of media chunks collapsed.
fn shape(t: &[(Direction, Message)]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for (d, m) in t {
        let arrow = if *d == Direction::ToMatcher { ">" } else { "<" };
        let s = format!("{arrow}{}", m.name());
        if out.last() != Some(&s) || m.name() != "MEDIA_CHUNK" {
            out.push(s);
        }
    }
    out
}

#[test]
fn golden_transcript() {
    let f = fixture().unwrap();
    let mut hs = WireHs::spawn(&serve_cmd()).unwrap();
    hs.record();
    hs.hello(PROTOCOL_VERSION, ModeSet::ALL).unwrap();
    hs.configure(&f.profile.to_xml()).unwrap();
    let g = hs.ingest(&f.gallery[0]).unwrap();
    let p = hs.ingest(&f.probes[0]).unwrap();
    let scores = hs.verify(&p.handle, &[g.handle.clone()], Mode::Fusion).unwrap();
    let ranked = hs.search(&p.handle, 1, Mode::Fusion).unwrap();
    let bad = hs.verify(&p.handle, &["nope".to_owned()], Mode::Fusion);
    assert!(bad.is_err());
    let transcript = hs.transcript().to_vec();
    assert_eq!(hs.close().unwrap().map(|s| s.success()), Some(true));

    let want = [
        ">HELLO", "<HELLO", ">CONFIG",
        ">MEDIA_BEGIN", ">MEDIA_CHUNK", ">MEDIA_END", "<HANDLE",
        ">MEDIA_BEGIN", ">MEDIA_CHUNK", ">MEDIA_END", "<HANDLE",
        ">VERIFY", "<SCORES", ">SEARCH", "<RANKED", ">VERIFY", "<ERROR",
    ];
    assert_eq!(shape(&transcript), want);
    assert_eq!(transcript[0].1.encode(), [4, 0, 0, 0, 0x01, 1, 0, ModeSet::ALL.0]);
    assert_eq!(ranked.len(), 1);
    assert_eq!(ranked[0].0, g.handle);
    assert_eq!(Some(ranked[0].1), scores[0]);

    // Same exchange in process gives the same score.
    let mut local = ReferenceHs::default();
    local.hello(PROTOCOL_VERSION, ModeSet::ALL).unwrap();
    local.configure(&f.profile.to_xml()).unwrap();
    let lg = local.ingest(&f.gallery[0]).unwrap();
    let lp = local.ingest(&f.probes[0]).unwrap();
    assert_eq!(local.verify(&lp.handle, &[lg.handle], Mode::Fusion).unwrap(), scores);
}

#[test]
fn probe_stream_leaks_no_identity() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::small_corpus(dir.path());
    let subjects: Vec<String> = corpus.segment_subjects().unwrap().into_values().collect();
    let gallery = corpus.load_sigset("gallery").unwrap();
    let loaded = pipeline::load_partition(&corpus, MissionId::ALL.into_iter().collect()).unwrap();
    let sets: Vec<&SigSet> = loaded.cells.iter().map(|c| &c.1).collect();
    let profile = ConstraintProfile::default();
    let plan = SessionPlan {
        gallery: &gallery,
        probes: distinct_probes(sets),
        modes: ModeSet::ALL,
        profile: &profile,
        window: DEFAULT_WINDOW,
    };
    let mut hs = WireHs::spawn(&serve_cmd()).unwrap();
    hs.record();
    let outcome = run_session(&mut hs, &plan, &corpus).unwrap();
    assert!(outcome.failure.is_none());

    let mut in_probe = false;
    let mut probe_messages = 0;
    for (d, m) in hs.transcript() {
        if *d != Direction::ToMatcher {
            continue;
        }
        match m {
            Message::MediaBegin { kind, metadata_xml, .. } => {
                in_probe = *kind == SigSetKind::Probe;
                if in_probe {
                    probe_messages += 1;
                    let doc = roxmltree::Document::parse(metadata_xml).unwrap();
                    for field in doc.descendants().filter(|n| n.has_tag_name("field")) {
                        let name = field.attribute("name").unwrap();
                        assert!(profile.exposes(name), "field {name} is not allowlisted");
                    }
                    assert!(!metadata_xml.contains("subject"), "{metadata_xml}");
                }
            }
            Message::MediaChunk { data } if in_probe => {
                for s in &subjects {
                    assert!(!data.windows(s.len()).any(|w| w == s.as_bytes()), "chunk carries {s}");
                }
            }
            Message::MediaEnd => in_probe = false,
            _ => {}
        }
    }
    assert_eq!(probe_messages, plan.probes.len());
    hs.close().unwrap();
}

#[test]
fn exec_matcher_matches_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::small_corpus(&dir.path().join("corpus"));
    let a = dir.path().join("builtin");
    let b = dir.path().join("exec");
    pipeline::evaluate(&corpus, &a, &options(HsSpec::Builtin)).unwrap();
    pipeline::evaluate(&corpus, &b, &options(HsSpec::Exec(serve_cmd()))).unwrap();
    assert_eq!(common::diff_trees(&a, &b), None);
}

fn wait_for(path: &Path) {
    let start = Instant::now();
    while !path.exists() {
        assert!(start.elapsed() < Duration::from_secs(20), "socket never appeared");
        std::thread::sleep(Duration::from_millis(20));
    }
}

#[cfg(unix)]
#[test]
fn unix_socket_matcher_matches_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let corpus: Corpus = common::small_corpus(&dir.path().join("corpus"));
    let sock = dir.path().join("hs.sock");
    let mut server = std::process::Command::new(BIN).arg("serve").arg("--socket").arg(&sock).spawn().unwrap();
    wait_for(&sock);
    let a = dir.path().join("builtin");
    let b = dir.path().join("socket");
    pipeline::evaluate(&corpus, &a, &options(HsSpec::Builtin)).unwrap();
    pipeline::evaluate(&corpus, &b, &options(HsSpec::Unix(sock.clone()))).unwrap();
    assert!(server.wait().unwrap().success());
    assert_eq!(common::diff_trees(&a, &b), None);
}

#[test]
fn exec_matcher_passes_conformance() {
    let open = || HsSpec::Exec(serve_cmd()).open(FusionConfig::default());
    let checks = conformance::run(&open, FusionConfig::default()).unwrap();
    for c in &checks {
        assert!(c.passed(), "{}", c.line());
    }
}
