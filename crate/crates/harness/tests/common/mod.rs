#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use mission_eval::corpus::Corpus;
use mission_eval::hs::ReferenceHs;
use mission_eval::pipeline::{self, synthesize, Curated};
use mission_eval::profile::ConstraintProfile;
use mission_eval::report::{self, CellInfo, Report};
use mission_eval::session::{distinct_probes, run_session, SessionOutcome, SessionPlan, DEFAULT_WINDOW};
use mission_eval_core::classify::{MissionId, MissionThresholds};
use mission_eval_core::model::{MediaSegment, ModeSet, SigSet};
use mission_eval_core::partition::{partition, Partition};
use mission_eval_core::payload::Payload;
use mission_eval_core::selection::SelectionConfig;
use mission_eval_core::synth::GeneratorConfig;
use mission_eval_core::template::FusionConfig;

pub struct Run {
    pub curated: Curated,
    pub partition: Partition,
    pub media: BTreeMap<String, (MediaSegment, Payload)>,
    pub outcome: SessionOutcome,
    pub report: Report,
}

/// Synthesize, partition and evaluate with the reference matcher, all in
/// memory.
pub fn run_in_memory(cfg: &GeneratorConfig, modes: ModeSet) -> Run {
    let curated = synthesize(cfg).expect("synthesize");
    let metas: Vec<MediaSegment> = curated.segments.iter().map(|s| s.segment.clone()).collect();
    let selection = SelectionConfig { seed: cfg.seed, ..Default::default() };
    let partition = partition(
        &curated.subjects,
        &metas,
        MissionId::ALL.into_iter().collect(),
        &MissionThresholds::default(),
        &selection,
    );
    let media: BTreeMap<String, (MediaSegment, Payload)> = curated
        .segments
        .iter()
        .map(|s| (s.segment.segment_id.clone(), (s.segment.clone(), s.payload.clone())))
        .collect();
    let profile = ConstraintProfile::default();
    let sets: Vec<&SigSet> = partition.cells.iter().map(|c| &c.sigset).collect();
    let plan = SessionPlan {
        gallery: &partition.gallery,
        probes: distinct_probes(sets),
        modes,
        profile: &profile,
        window: DEFAULT_WINDOW,
    };
    let mut hs = ReferenceHs::new(ModeSet::ALL, FusionConfig::default());
    let outcome = run_session(&mut hs, &plan, &media).expect("session");
    let cells: Vec<CellInfo> = partition
        .cells
        .iter()
        .map(|c| CellInfo {
            key: c.key,
            probes: c.sigset.entries.iter().map(|e| e.entry_id.clone()).collect(),
            n_subjects: c.n_subjects,
        })
        .collect();
    let report = report::build(&cells, &partition.truth, &outcome).expect("report");
    Run { curated, partition, media, outcome, report }
}

/// Generator settings small enough for on-disk tests.
pub fn small_config() -> GeneratorConfig {
    GeneratorConfig { n_subjects: 12, ..Default::default() }
}

/// Generates, curates and partitions a small corpus under `root`.
pub fn small_corpus(root: &Path) -> Corpus {
    let corpus = Corpus::new(root);
    let cfg = small_config();
    pipeline::generate(&corpus, &cfg).expect("generate");
    pipeline::curate(&corpus, None).expect("curate");
    pipeline::partition_stage(&corpus, None, MissionId::ALL.into_iter().collect()).expect("partition");
    corpus
}

/// Every file below `root`, relative, sorted.
pub fn tree(root: &Path) -> Vec<PathBuf> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<PathBuf>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, root, out);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

/// First difference between two trees, ignoring run manifests.
pub fn diff_trees(a: &Path, b: &Path) -> Option<String> {
    let keep = |p: &PathBuf| p.file_name().is_none_or(|n| n != "run-manifest.xml");
    let ta: Vec<PathBuf> = tree(a).into_iter().filter(keep).collect();
    let tb: Vec<PathBuf> = tree(b).into_iter().filter(keep).collect();
    if ta != tb {
        return Some(format!("file lists differ ({} vs {})", ta.len(), tb.len()));
    }
    ta.iter()
        .find(|p| fs::read(a.join(p)).unwrap() != fs::read(b.join(p)).unwrap())
        .map(|p| format!("{} differs", p.display()))
}
