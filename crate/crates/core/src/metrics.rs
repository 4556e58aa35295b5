//! Verification and identification metrics.
//!
//! ROC curves are exact step functions: a pair is accepted at threshold `t`
//! iff its score is `>= t`. No interpolation is ever applied. Null scores
//! (failure to enroll or acquire, unsupported mode) are never accepted, so a
//! null genuine pair is a miss at every threshold and a null impostor pair is
//! a correct rejection.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricsError {
    EmptyGenuine,
    EmptyImpostor,
    UnknownProbe(String),
    UnknownGallery(String),
    ShapeMismatch,
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::EmptyGenuine => f.write_str("no genuine pairs"),
            MetricsError::EmptyImpostor => f.write_str("no impostor pairs"),
            MetricsError::UnknownProbe(id) => write!(f, "probe {id} has no ground truth"),
            MetricsError::UnknownGallery(id) => write!(f, "gallery entry {id} has no ground truth"),
            MetricsError::ShapeMismatch => f.write_str("score matrix shape mismatch"),
        }
    }
}

impl core::error::Error for MetricsError {}

/// Probe x gallery scores for one mode. `None` marks a missing score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub probes: Vec<String>,
    pub gallery: Vec<String>,
    scores: Vec<Option<f64>>,
}

impl ScoreMatrix {
    pub fn new(probes: Vec<String>, gallery: Vec<String>) -> Self {
        let scores = alloc::vec![None; probes.len() * gallery.len()];
        Self {
            probes,
            gallery,
            scores,
        }
    }

    pub fn from_rows(
        probes: Vec<String>,
        gallery: Vec<String>,
        rows: Vec<Vec<Option<f64>>>,
    ) -> Result<Self, MetricsError> {
        if rows.len() != probes.len() || rows.iter().any(|r| r.len() != gallery.len()) {
            return Err(MetricsError::ShapeMismatch);
        }
        Ok(Self {
            probes,
            gallery,
            scores: rows.into_iter().flatten().collect(),
        })
    }

    pub fn get(&self, probe: usize, gallery: usize) -> Option<f64> {
        self.scores[probe * self.gallery.len() + gallery]
    }

    pub fn set(&mut self, probe: usize, gallery: usize, score: Option<f64>) {
        let g = self.gallery.len();
        self.scores[probe * g + gallery] = score;
    }

    pub fn row(&self, probe: usize) -> &[Option<f64>] {
        let g = self.gallery.len();
        &self.scores[probe * g..(probe + 1) * g]
    }

    pub fn null_count(&self) -> usize {
        self.scores.iter().filter(|s| s.is_none()).count()
    }
}

/// Harness-side identity of every probe and gallery entry.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Truth {
    pub probe_subject: BTreeMap<String, String>,
    pub gallery_subject: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledScores {
    pub genuine: Vec<Option<f64>>,
    pub impostor: Vec<Option<f64>>,
}

/// Splits the matrix rows selected by `probe_filter` into genuine and
/// impostor pairs.
pub fn label_pairs_where(
    matrix: &ScoreMatrix,
    truth: &Truth,
    mut probe_filter: impl FnMut(&str) -> bool,
) -> Result<LabeledScores, MetricsError> {
    let gallery_subjects = matrix
        .gallery
        .iter()
        .map(|g| {
            truth
                .gallery_subject
                .get(g)
                .ok_or_else(|| MetricsError::UnknownGallery(g.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = LabeledScores::default();
    for (pi, probe) in matrix.probes.iter().enumerate() {
        if !probe_filter(probe) {
            continue;
        }
        let subject = truth
            .probe_subject
            .get(probe)
            .ok_or_else(|| MetricsError::UnknownProbe(probe.clone()))?;
        for (gi, gs) in gallery_subjects.iter().enumerate() {
            let s = matrix.get(pi, gi);
            if *gs == subject {
                out.genuine.push(s);
            } else {
                out.impostor.push(s);
            }
        }
    }
    Ok(out)
}

pub fn label_pairs(matrix: &ScoreMatrix, truth: &Truth) -> Result<LabeledScores, MetricsError> {
    label_pairs_where(matrix, truth, |_| true)
}

/// One operating point of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// `-inf` and `+inf` mark the accept-all and accept-none sentinels.
    pub threshold: f64,
    pub accepted_genuine: usize,
    pub accepted_impostor: usize,
    pub tar: f64,
    pub far: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// Sorted by increasing threshold; TAR and FAR are non-increasing.
    pub points: Vec<RocPoint>,
    pub n_genuine: usize,
    pub n_impostor: usize,
}

fn scored(values: &[Option<f64>]) -> Vec<f64> {
    let mut v: Vec<f64> = values
        .iter()
        .filter_map(|s| s.filter(|x| !x.is_nan()))
        .collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    v
}

/// Number of elements `>= t` in an ascending slice.
fn count_at_least(sorted: &[f64], t: f64) -> usize {
    sorted.len() - sorted.partition_point(|&x| x < t)
}

/// Exact ROC sweep over every distinct score.
pub fn roc(genuine: &[Option<f64>], impostor: &[Option<f64>]) -> Result<RocCurve, MetricsError> {
    if genuine.is_empty() {
        return Err(MetricsError::EmptyGenuine);
    }
    if impostor.is_empty() {
        return Err(MetricsError::EmptyImpostor);
    }
    let g = scored(genuine);
    let i = scored(impostor);
    let n_g = genuine.len();
    let n_i = impostor.len();

    let mut thresholds: Vec<f64> = g.iter().chain(i.iter()).copied().collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    thresholds.dedup();

    let point = |t: f64| {
        let ag = count_at_least(&g, t);
        let ai = count_at_least(&i, t);
        RocPoint {
            threshold: t,
            accepted_genuine: ag,
            accepted_impostor: ai,
            tar: ag as f64 / n_g as f64,
            far: ai as f64 / n_i as f64,
        }
    };

    let mut points = Vec::with_capacity(thresholds.len() + 2);
    points.push(point(f64::NEG_INFINITY));
    points.extend(thresholds.iter().map(|&t| point(t)));
    points.push(point(f64::INFINITY));
    Ok(RocCurve {
        points,
        n_genuine: n_g,
        n_impostor: n_i,
    })
}

/// Highest TAR among operating points with FAR <= `alpha`.
///
/// The accept-none sentinel always qualifies, so the result is 0 when no
/// real threshold reaches the requested FAR.
pub fn tar_at_far(curve: &RocCurve, alpha: f64) -> f64 {
    curve
        .points
        .iter()
        .find(|p| p.far <= alpha)
        .map_or(0.0, |p| p.tar)
}

/// Threshold at which [`tar_at_far`] reads its value.
pub fn threshold_at_far(curve: &RocCurve, alpha: f64) -> f64 {
    curve
        .points
        .iter()
        .find(|p| p.far <= alpha)
        .map_or(f64::INFINITY, |p| p.threshold)
}

/// Trapezoidal area under the step curve's vertices.
pub fn auc(curve: &RocCurve) -> f64 {
    let mut area = 0.0;
    for w in curve.points.windows(2) {
        // points run from (1,1)-ish down to (0,0)
        let (a, b) = (&w[0], &w[1]);
        area += (a.far - b.far) * (a.tar + b.tar) * 0.5;
    }
    area
}

/// Ranked gallery entries returned by a search for one probe.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub probe: String,
    /// Best match first. Empty when the search failed.
    pub ranked: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmcCurve {
    /// `rates[k - 1]` is the rank-k identification rate.
    pub rates: Vec<f64>,
    pub n_mated: usize,
    /// Probes whose subject has no gallery entry.
    pub n_unmated: usize,
}

impl CmcCurve {
    pub fn rank(&self, k: usize) -> f64 {
        if k == 0 || self.rates.is_empty() {
            return 0.0;
        }
        self.rates[(k - 1).min(self.rates.len() - 1)]
    }
}

/// Cumulative match characteristic up to `max_rank`.
pub fn cmc(
    results: &[SearchResult],
    truth: &Truth,
    max_rank: usize,
) -> Result<CmcCurve, MetricsError> {
    let mut hits = alloc::vec![0usize; max_rank];
    let mut n_mated = 0;
    let mut n_unmated = 0;
    for r in results {
        let subject = truth
            .probe_subject
            .get(&r.probe)
            .ok_or_else(|| MetricsError::UnknownProbe(r.probe.clone()))?;
        if !truth.gallery_subject.values().any(|s| s == subject) {
            n_unmated += 1;
            continue;
        }
        n_mated += 1;
        let mut position = None;
        for (rank, g) in r.ranked.iter().enumerate() {
            let gs = truth
                .gallery_subject
                .get(g)
                .ok_or_else(|| MetricsError::UnknownGallery(g.clone()))?;
            if gs == subject {
                position = Some(rank);
                break;
            }
        }
        if let Some(p) = position.filter(|&p| p < max_rank) {
            for h in &mut hits[p..] {
                *h += 1;
            }
        }
    }
    let rates = hits
        .iter()
        .map(|&h| if n_mated == 0 { 0.0 } else { h as f64 / n_mated as f64 })
        .collect();
    Ok(CmcCurve {
        rates,
        n_mated,
        n_unmated,
    })
}

/// Ranks `(id, score)` pairs best first; ties go to the lexicographically
/// smaller id. Null scores are dropped.
pub fn rank_by_score(pairs: &[(String, Option<f64>)]) -> Vec<(String, f64)> {
    let mut ranked: Vec<(String, f64)> = pairs
        .iter()
        .filter_map(|(id, s)| s.filter(|x| !x.is_nan()).map(|s| (id.clone(), s)))
        .collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    ranked
}
