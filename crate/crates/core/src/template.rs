//! Reference matcher: quality-weighted templates, cosine scoring and
//! min-max score fusion.

use alloc::vec::Vec;

use crate::model::Modality;
use crate::payload::{Observation, Payload};

#[derive(Debug, Clone, PartialEq)]
pub struct ModalityTemplate {
    /// Unit vector.
    pub vector: Vec<f64>,
    /// Mean observation quality.
    pub quality: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Template {
    pub parts: [Option<ModalityTemplate>; 3],
}

impl Template {
    /// `normalize(sum q_i x_i)` per modality over the observations whose
    /// modality is in `modalities`. A modality without observations (or
    /// with a zero weighted sum) is absent.
    pub fn build<'a>(
        observations: impl IntoIterator<Item = &'a Observation>,
        modalities: &[Modality],
    ) -> Template {
        let mut sums: [Option<(Vec<f64>, f64, usize)>; 3] = Default::default();
        for o in observations {
            if !modalities.contains(&o.modality) {
                continue;
            }
            let q = f64::from(o.quality);
            let slot = sums[o.modality.index()]
                .get_or_insert_with(|| (alloc::vec![0.0; o.vector.len()], 0.0, 0));
            if slot.0.len() != o.vector.len() {
                continue;
            }
            for (acc, &x) in slot.0.iter_mut().zip(&o.vector) {
                *acc += q * f64::from(x);
            }
            slot.1 += q;
            slot.2 += 1;
        }
        let parts = sums.map(|s| {
            let (v, qsum, count) = s?;
            let n = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
            if !(n > 0.0) || count == 0 {
                return None;
            }
            Some(ModalityTemplate {
                vector: v.into_iter().map(|x| x / n).collect(),
                quality: qsum / count as f64,
                count,
            })
        });
        Template { parts }
    }

    pub fn part(&self, m: Modality) -> Option<&ModalityTemplate> {
        self.parts[m.index()].as_ref()
    }

    pub fn has(&self, m: Modality) -> bool {
        self.parts[m.index()].is_some()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.iter().all(Option::is_none)
    }
}

/// Template over the primary track of every payload, as used for gallery
/// enrollment.
pub fn enroll(payloads: &[&Payload], modalities: &[Modality]) -> Template {
    let obs = payloads.iter().flat_map(|p| {
        let primary = p.primary_track();
        p.frames
            .iter()
            .flat_map(|f| f.tracks.iter())
            .filter(move |t| Some(t.track_id) == primary)
            .flat_map(|t| t.observations.iter())
    });
    Template::build(obs, modalities)
}

/// One template per track of a probe payload, primary track first.
pub fn tracklet_templates(payload: &Payload, modalities: &[Modality]) -> Vec<(u32, Template)> {
    let primary = payload.primary_track();
    let mut out: Vec<(u32, Template)> = payload
        .tracklets()
        .into_iter()
        .map(|(id, tracks)| {
            let t = Template::build(tracks.iter().flat_map(|t| t.observations.iter()), modalities);
            (id, t)
        })
        .collect();
    out.sort_by_key(|(id, _)| (Some(*id) != primary, *id));
    out
}

/// Dot product of unit vectors; `None` if either side lacks the modality or
/// the dimensions differ.
pub fn cosine(a: &Template, b: &Template, m: Modality) -> Option<f64> {
    let (x, y) = (a.part(m)?, b.part(m)?);
    if x.vector.len() != y.vector.len() {
        return None;
    }
    Some(x.vector.iter().zip(&y.vector).map(|(p, q)| p * q).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    /// Base weight per modality.
    pub weights: [f64; 3],
    /// Scale each base weight by the probe's template quality for that
    /// modality.
    pub quality_weighted: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            weights: [1.0; 3],
            quality_weighted: true,
        }
    }
}

/// Weighted mean of the present normalized scores with weights renormalized
/// over those present. `None` when nothing is present or all weights are 0.
pub fn fuse(normalized: [Option<f64>; 3], weights: [f64; 3]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (s, w) in normalized.iter().zip(weights) {
        if let Some(s) = s {
            num += w * s;
            den += w;
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Min-max normalization over one probe's row. A constant row maps to 0.5.
pub fn min_max(row: &[Option<f64>]) -> Vec<Option<f64>> {
    let present = row.iter().flatten();
    let lo = present.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = present.copied().fold(f64::NEG_INFINITY, f64::max);
    row.iter()
        .map(|s| {
            s.map(|s| {
                if hi > lo {
                    (s - lo) / (hi - lo)
                } else {
                    0.5
                }
            })
        })
        .collect()
}

/// Per-modality cosine rows for one probe against a gallery, indexed
/// `[modality][gallery]`.
pub fn modality_rows(probe: &Template, gallery: &[&Template]) -> [Vec<Option<f64>>; 3] {
    Modality::ALL.map(|m| gallery.iter().map(|g| cosine(probe, g, m)).collect())
}

/// Fused scores of one probe against every gallery template.
pub fn fused_row(rows: &[Vec<Option<f64>>; 3], probe: &Template, cfg: &FusionConfig) -> Vec<Option<f64>> {
    let normalized = [0, 1, 2].map(|m| min_max(&rows[m]));
    let weights = Modality::ALL.map(|m| {
        let base = cfg.weights[m.index()];
        match (cfg.quality_weighted, probe.part(m)) {
            (true, Some(p)) => base * p.quality,
            _ => base,
        }
    });
    let n = rows[0].len();
    (0..n)
        .map(|g| fuse([normalized[0][g], normalized[1][g], normalized[2][g]], weights))
        .collect()
}
