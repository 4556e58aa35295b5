//! Weighted, subject-balanced probe sampling.
//!
//! Each candidate gets an Efraimidis-Spirakis key `ln(u) / w`, with `u`
//! drawn from a stream keyed by its segment id, so the outcome does not
//! depend on candidate order. Within a mission the candidates are taken in
//! rounds: every subject contributes its best remaining candidate per round,
//! and rounds are ordered by key, until the cap is reached.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::classify::{MissionId, ProbeClassification, Treatment};
use crate::rng::{hash_str, unit, Purpose};

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeCandidate {
    pub segment_id: String,
    pub subject_id: String,
    pub classification: ProbeClassification,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    pub seed: u64,
    pub treatment_weight: f64,
    pub control_weight: f64,
    /// Cap applied to every mission without an explicit entry in `caps`.
    pub default_cap: Option<usize>,
    pub caps: BTreeMap<MissionId, usize>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            treatment_weight: 2.0,
            control_weight: 1.0,
            default_cap: None,
            caps: BTreeMap::new(),
        }
    }
}

impl SelectionConfig {
    pub fn cap(&self, m: MissionId) -> Option<usize> {
        self.caps.get(&m).copied().or(self.default_cap)
    }

    fn weight(&self, t: Treatment) -> f64 {
        match t {
            Treatment::Treatment => self.treatment_weight,
            Treatment::Control => self.control_weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionSelection {
    pub mission: MissionId,
    pub pool_size: usize,
    /// Indices into the candidate slice, in selection order.
    pub selected: Vec<usize>,
    pub n_subjects: usize,
}

/// Sampling key; larger is preferred. Zero-weight candidates sort last.
pub fn sampling_key(seed: u64, segment_id: &str, weight: f64) -> f64 {
    let u = unit(seed, Purpose::ProbeSelection, &[hash_str(segment_id)]).max(f64::MIN_POSITIVE);
    if weight > 0.0 {
        libm::log(u) / weight
    } else {
        f64::NEG_INFINITY
    }
}

/// Selection for one mission. An empty pool yields an empty selection.
pub fn select_for_mission(
    candidates: &[ProbeCandidate],
    mission: MissionId,
    cfg: &SelectionConfig,
) -> MissionSelection {
    let mut per_subject: BTreeMap<&str, Vec<(f64, usize)>> = BTreeMap::new();
    let mut pool_size = 0;
    for (i, c) in candidates.iter().enumerate() {
        if !c.classification.missions.contains(mission) {
            continue;
        }
        pool_size += 1;
        let key = sampling_key(cfg.seed, &c.segment_id, cfg.weight(c.classification.treatment));
        per_subject.entry(&c.subject_id).or_default().push((key, i));
    }
    let by_key_desc = |a: &(f64, usize), b: &(f64, usize)| {
        b.0.total_cmp(&a.0)
            .then_with(|| candidates[a.1].segment_id.cmp(&candidates[b.1].segment_id))
    };
    for list in per_subject.values_mut() {
        list.sort_by(by_key_desc);
    }
    let cap = cfg.cap(mission).unwrap_or(pool_size).min(pool_size);
    let mut selected = Vec::with_capacity(cap);
    let mut round = 0;
    while selected.len() < cap {
        let mut this_round: Vec<(f64, usize)> = per_subject
            .values()
            .filter_map(|l| l.get(round).copied())
            .collect();
        if this_round.is_empty() {
            break;
        }
        this_round.sort_by(by_key_desc);
        let room = cap - selected.len();
        selected.extend(this_round.iter().take(room).map(|x| x.1));
        round += 1;
    }
    let mut subjects: Vec<&str> = selected.iter().map(|&i| candidates[i].subject_id.as_str()).collect();
    subjects.sort_unstable();
    subjects.dedup();
    MissionSelection {
        mission,
        pool_size,
        n_subjects: subjects.len(),
        selected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{MissionSet, Restriction};
    use alloc::format;

    fn cand(i: usize, subject: usize, treatment: Treatment) -> ProbeCandidate {
        ProbeCandidate {
            segment_id: format!("seg-{i:05}"),
            subject_id: format!("S{subject:03}"),
            classification: ProbeClassification {
                restriction: Restriction::FaceRestricted,
                treatment,
                missions: [MissionId::Gait].into_iter().collect::<MissionSet>(),
            },
        }
    }

    #[test]
    fn cap_equal_to_pool_takes_everything() {
        let c: Vec<_> = (0..30).map(|i| cand(i, i % 7, Treatment::Control)).collect();
        let cfg = SelectionConfig { default_cap: Some(30), ..Default::default() };
        let s = select_for_mission(&c, MissionId::Gait, &cfg);
        assert_eq!(s.selected.len(), 30);
        assert_eq!(s.n_subjects, 7);
    }

    #[test]
    fn empty_pool() {
        let c: Vec<_> = (0..5).map(|i| cand(i, i, Treatment::Control)).collect();
        let s = select_for_mission(&c, MissionId::Uav, &SelectionConfig::default());
        assert_eq!(s.pool_size, 0);
        assert!(s.selected.is_empty());
    }

    #[test]
    fn subjects_are_balanced() {
        // subject 0 has 20 candidates, 1..=4 have 2 each
        let mut c: Vec<_> = (0..20).map(|i| cand(i, 0, Treatment::Control)).collect();
        c.extend((20..28).map(|i| cand(i, 1 + (i - 20) / 2, Treatment::Control)));
        let cfg = SelectionConfig { default_cap: Some(10), ..Default::default() };
        let s = select_for_mission(&c, MissionId::Gait, &cfg);
        let from_zero = s.selected.iter().filter(|&&i| c[i].subject_id == "S000").count();
        assert_eq!(s.selected.len(), 10);
        assert_eq!(from_zero, 2);
    }

    #[test]
    fn order_independent() {
        let c: Vec<_> = (0..40)
            .map(|i| cand(i, i % 9, if i % 2 == 0 { Treatment::Treatment } else { Treatment::Control }))
            .collect();
        let cfg = SelectionConfig { seed: 5, default_cap: Some(15), ..Default::default() };
        let a = select_for_mission(&c, MissionId::Gait, &cfg);
        let mut rev = c.clone();
        rev.reverse();
        let b = select_for_mission(&rev, MissionId::Gait, &cfg);
        let mut ia: Vec<&str> = a.selected.iter().map(|&i| c[i].segment_id.as_str()).collect();
        let mut ib: Vec<&str> = b.selected.iter().map(|&i| rev[i].segment_id.as_str()).collect();
        ia.sort_unstable();
        ib.sort_unstable();
        assert_eq!(ia, ib);
    }

    #[test]
    fn treatment_weight_tilts_selection() {
        // one candidate per subject, equal pools of 2000 each, take 400
        let c: Vec<_> = (0..4000)
            .map(|i| cand(i, i, if i % 2 == 0 { Treatment::Treatment } else { Treatment::Control }))
            .collect();
        let cfg = SelectionConfig { seed: 11, default_cap: Some(400), ..Default::default() };
        let s = select_for_mission(&c, MissionId::Gait, &cfg);
        let t = s
            .selected
            .iter()
            .filter(|&&i| c[i].classification.treatment == Treatment::Treatment)
            .count();
        let ratio = t as f64 / (400 - t) as f64;
        assert!(ratio > 1.6 && ratio < 2.5, "ratio {ratio}");
    }
}
