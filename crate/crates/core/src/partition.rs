//! Gallery and per-mission probe sig-set construction.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::classify::{
    assign_treatment, classify_restriction, mission_filter, MissionId, MissionInput, MissionSet,
    MissionThresholds, ProbeClassification, Restriction, Treatment,
};
use crate::metrics::Truth;
use crate::model::{
    MediaSegment, ModalityHint, SigSet, SigSetEntry, SigSetKind, Site, Split, SubjectRecord,
    SubjectRole,
};
use crate::selection::{select_for_mission, ProbeCandidate, SelectionConfig};

/// Classification derived from a segment's stored metadata alone.
pub fn classify_segment(seg: &MediaSegment, thresholds: &MissionThresholds) -> ProbeClassification {
    let restriction = classify_restriction(&seg.annotations);
    let treatment = assign_treatment(seg.sensor.platform, &seg.geometry);
    let missions = mission_filter(
        &MissionInput {
            platform: seg.sensor.platform,
            configuration: seg.sensor.configuration,
            geometry: seg.geometry,
            activity: seg.activity,
            cn2: seg.environment.as_ref().map_or(0.0, |e| e.cn2),
            restriction,
            treatment,
        },
        thresholds,
    );
    ProbeClassification {
        restriction,
        treatment,
        missions,
    }
}

fn test_subjects(subjects: &[SubjectRecord]) -> BTreeMap<&str, &SubjectRecord> {
    subjects
        .iter()
        .filter(|s| s.split == Some(Split::Test))
        .map(|s| (s.subject_id.as_str(), s))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionWarning {
    NoControlledMedia { subject_id: String },
}

pub fn gallery_entry_id(subject_id: &str) -> String {
    format!("gal-{subject_id}")
}

pub fn probe_entry_id(segment_id: &str) -> String {
    format!("prb-{}", segment_id.trim_start_matches("seg-"))
}

/// One gallery entry per test-side subject (distractors included) holding
/// all of that subject's controlled, non-quarantined media.
pub fn build_gallery(
    subjects: &[SubjectRecord],
    segments: &[MediaSegment],
) -> (SigSet, Vec<PartitionWarning>) {
    let mut media: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for s in segments {
        if s.sensor.site == Site::Indoor && !s.quarantined {
            media.entry(&s.subject_id).or_default().push(&s.segment_id);
        }
    }
    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    for id in test_subjects(subjects).keys() {
        match media.get(id) {
            Some(refs) => {
                let mut refs: Vec<String> = refs.iter().map(|r| String::from(*r)).collect();
                refs.sort();
                entries.push(SigSetEntry {
                    entry_id: gallery_entry_id(id),
                    subject_id: Some(String::from(*id)),
                    media_refs: refs,
                    modality_hint: ModalityHint::All,
                });
            }
            None => warnings.push(PartitionWarning::NoControlledMedia {
                subject_id: String::from(*id),
            }),
        }
    }
    (
        SigSet {
            sigset_id: String::from("gallery"),
            kind: SigSetKind::Gallery,
            entries,
        },
        warnings,
    )
}

/// Field segments of test-side probe subjects that are eligible as probes.
pub fn probe_candidates(
    subjects: &[SubjectRecord],
    segments: &[MediaSegment],
    thresholds: &MissionThresholds,
) -> Vec<ProbeCandidate> {
    let test = test_subjects(subjects);
    let mut out: Vec<ProbeCandidate> = segments
        .iter()
        .filter(|s| s.sensor.site == Site::Field && !s.quarantined && s.is_probe_duration())
        .filter(|s| {
            test.get(s.subject_id.as_str())
                .is_some_and(|r| r.role == SubjectRole::ProbeSubject)
        })
        .map(|s| ProbeCandidate {
            segment_id: s.segment_id.clone(),
            subject_id: s.subject_id.clone(),
            classification: classify_segment(s, thresholds),
        })
        .collect();
    out.sort_by(|a, b| a.segment_id.cmp(&b.segment_id));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CellKey {
    pub mission: MissionId,
    pub restriction: Restriction,
    pub treatment: Treatment,
}

impl CellKey {
    pub fn all() -> impl Iterator<Item = CellKey> {
        MissionId::ALL.into_iter().flat_map(|mission| {
            Restriction::ALL.into_iter().flat_map(move |restriction| {
                Treatment::ALL.into_iter().map(move |treatment| CellKey {
                    mission,
                    restriction,
                    treatment,
                })
            })
        })
    }

    pub fn sigset_id(&self) -> String {
        format!(
            "probe-{}-{}-{}",
            self.mission.as_str(),
            self.restriction.as_str(),
            self.treatment.as_str()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub key: CellKey,
    pub sigset: SigSet,
    pub n_subjects: usize,
}

impl Cell {
    pub fn n_samples(&self) -> usize {
        self.sigset.entries.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionSummary {
    pub mission: MissionId,
    pub pool_size: usize,
    pub n_selected: usize,
    pub n_subjects: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub gallery: SigSet,
    /// Every (mission, restriction, treatment) combination, empty or not.
    pub cells: Vec<Cell>,
    pub missions: Vec<MissionSummary>,
    pub truth: Truth,
    /// Classification of each selected probe entry.
    pub probes: BTreeMap<String, ProbeClassification>,
    pub warnings: Vec<PartitionWarning>,
}

impl Partition {
    pub fn cell(&self, key: CellKey) -> Option<&Cell> {
        self.cells.iter().find(|c| c.key == key)
    }
}

pub fn partition(
    subjects: &[SubjectRecord],
    segments: &[MediaSegment],
    missions: MissionSet,
    thresholds: &MissionThresholds,
    selection: &SelectionConfig,
) -> Partition {
    let (gallery, warnings) = build_gallery(subjects, segments);
    let candidates = probe_candidates(subjects, segments, thresholds);

    let mut truth = Truth::default();
    for e in &gallery.entries {
        if let Some(s) = &e.subject_id {
            truth.gallery_subject.insert(e.entry_id.clone(), s.clone());
        }
    }

    let mut cell_members: BTreeMap<CellKey, Vec<usize>> = BTreeMap::new();
    let mut summaries = Vec::new();
    let mut probes = BTreeMap::new();
    for mission in missions.iter() {
        let sel = select_for_mission(&candidates, mission, selection);
        summaries.push(MissionSummary {
            mission,
            pool_size: sel.pool_size,
            n_selected: sel.selected.len(),
            n_subjects: sel.n_subjects,
        });
        for &i in &sel.selected {
            let c = &candidates[i];
            let key = CellKey {
                mission,
                restriction: c.classification.restriction,
                treatment: c.classification.treatment,
            };
            cell_members.entry(key).or_default().push(i);
            let id = probe_entry_id(&c.segment_id);
            truth.probe_subject.insert(id.clone(), c.subject_id.clone());
            probes.insert(id, c.classification);
        }
    }

    let cells = CellKey::all()
        .filter(|k| missions.contains(k.mission))
        .map(|key| {
            let mut members = cell_members.remove(&key).unwrap_or_default();
            members.sort_by(|&a, &b| candidates[a].segment_id.cmp(&candidates[b].segment_id));
            let subjects: BTreeSet<&str> =
                members.iter().map(|&i| candidates[i].subject_id.as_str()).collect();
            let entries = members
                .iter()
                .map(|&i| SigSetEntry {
                    entry_id: probe_entry_id(&candidates[i].segment_id),
                    subject_id: None,
                    media_refs: alloc::vec![candidates[i].segment_id.clone()],
                    modality_hint: ModalityHint::All,
                })
                .collect();
            Cell {
                key,
                sigset: SigSet {
                    sigset_id: key.sigset_id(),
                    kind: SigSetKind::Probe,
                    entries,
                },
                n_subjects: subjects.len(),
            }
        })
        .collect();

    Partition {
        gallery,
        cells,
        missions: summaries,
        truth,
        probes,
        warnings,
    }
}
