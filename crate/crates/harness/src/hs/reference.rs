//! In-process reference matcher over BRF observations.

use std::collections::BTreeMap;

use mission_eval_core::model::{Modality, Mode, ModeSet, SigSetKind};
use mission_eval_core::template::{
    cosine, enroll, fused_row, modality_rows, tracklet_templates, FusionConfig, Template,
};

use super::{Capabilities, Enrolled, HolisticSolution, HsError, IngestRequest};
use crate::brf;
use crate::wire::{code, PROTOCOL_VERSION};

/// Per-session state only: nothing survives the value.
#[derive(Debug, Clone)]
pub struct ReferenceHs {
    modes: ModeSet,
    fusion: FusionConfig,
    gallery: BTreeMap<String, Template>,
    probes: BTreeMap<String, Template>,
    next_gallery: u64,
    next_probe: u64,
}

impl Default for ReferenceHs {
    fn default() -> Self {
        Self::new(ModeSet::ALL, FusionConfig::default())
    }
}

impl ReferenceHs {
    pub fn new(modes: ModeSet, fusion: FusionConfig) -> Self {
        Self {
            modes,
            fusion,
            gallery: BTreeMap::new(),
            probes: BTreeMap::new(),
            next_gallery: 0,
            next_probe: 0,
        }
    }

    fn check_mode(&self, mode: Mode) -> Result<(), HsError> {
        if self.modes.contains(mode) {
            Ok(())
        } else {
            Err(HsError::remote(code::UNSUPPORTED_MODE, format!("mode {} not supported", mode.as_str())))
        }
    }

    fn probe(&self, handle: &str) -> Result<&Template, HsError> {
        self.probes
            .get(handle)
            .ok_or_else(|| HsError::remote(code::UNKNOWN_HANDLE, format!("unknown probe handle {handle}")))
    }

    fn scores(&self, probe: &Template, gallery: &[&Template], mode: Mode) -> Vec<Option<f32>> {
        match mode.modality() {
            Some(m) => gallery.iter().map(|g| cosine(probe, g, m).map(|s| s as f32)).collect(),
            None => {
                let rows = modality_rows(probe, gallery);
                fused_row(&rows, probe, &self.fusion)
                    .into_iter()
                    .map(|s| s.map(|s| s as f32))
                    .collect()
            }
        }
    }
}

impl HolisticSolution for ReferenceHs {
    fn hello(&mut self, version: u16, requested: ModeSet) -> Result<Capabilities, HsError> {
        if version != PROTOCOL_VERSION {
            return Err(HsError::remote(
                code::VERSION_MISMATCH,
                format!("protocol version {version} not supported"),
            ));
        }
        if requested.intersect(self.modes).is_empty() {
            return Err(HsError::remote(code::NO_MODES, "none of the requested modes is supported"));
        }
        Ok(Capabilities {
            version: PROTOCOL_VERSION,
            modes: self.modes,
        })
    }

    fn configure(&mut self, _profile_xml: &str) -> Result<(), HsError> {
        Ok(())
    }

    fn ingest(&mut self, req: &IngestRequest) -> Result<Enrolled, HsError> {
        let payloads = req
            .media
            .iter()
            .map(|m| brf::decode(m))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| HsError::remote(code::BAD_MEDIA, e.to_string()))?;
        match req.kind {
            SigSetKind::Gallery => {
                let refs: Vec<_> = payloads.iter().collect();
                let t = enroll(&refs, &Modality::ALL);
                if t.is_empty() {
                    return Err(HsError::remote(code::NO_TEMPLATE, "no usable observations"));
                }
                self.next_gallery += 1;
                let handle = format!("g{:06}", self.next_gallery);
                self.gallery.insert(handle.clone(), t);
                Ok(Enrolled {
                    handle,
                    tracklets: Vec::new(),
                })
            }
            SigSetKind::Probe => {
                let [payload] = payloads.as_slice() else {
                    return Err(HsError::remote(code::BAD_MEDIA, "probe entries carry exactly one media item"));
                };
                let tracklets = tracklet_templates(payload, &Modality::ALL);
                let Some((_, primary)) = tracklets.first().filter(|(_, t)| !t.is_empty()) else {
                    return Err(HsError::remote(code::NO_TEMPLATE, "no usable observations"));
                };
                self.next_probe += 1;
                let handle = format!("p{:06}", self.next_probe);
                self.probes.insert(handle.clone(), primary.clone());
                Ok(Enrolled {
                    tracklets: tracklets.iter().map(|(id, _)| format!("{handle}.t{id}")).collect(),
                    handle,
                })
            }
        }
    }

    fn verify(&mut self, probe: &str, gallery: &[String], mode: Mode) -> Result<Vec<Option<f32>>, HsError> {
        self.check_mode(mode)?;
        let p = self.probe(probe)?;
        let g = gallery
            .iter()
            .map(|h| {
                self.gallery
                    .get(h)
                    .ok_or_else(|| HsError::remote(code::UNKNOWN_HANDLE, format!("unknown gallery handle {h}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.scores(p, &g, mode))
    }

    fn search(&mut self, probe: &str, k: u32, mode: Mode) -> Result<Vec<(String, f32)>, HsError> {
        self.check_mode(mode)?;
        let p = self.probe(probe)?;
        let handles: Vec<&String> = self.gallery.keys().collect();
        let templates: Vec<&Template> = self.gallery.values().collect();
        let mut ranked: Vec<(String, f32)> = handles
            .into_iter()
            .zip(self.scores(p, &templates, mode))
            .filter_map(|(h, s)| s.map(|s| (h.clone(), s)))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(k as usize);
        Ok(ranked)
    }
}
