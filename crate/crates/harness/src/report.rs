//! Per-mission report bundle: summary XML, ROC and CMC CSVs, a text report
//! and SVG figures. Every number is a function of the persisted scores and
//! the harness-side truth map.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use mission_eval_core::classify::{MissionId, Restriction, Treatment};
use mission_eval_core::metrics::{
    auc, cmc, label_pairs_where, roc, tar_at_far, threshold_at_far, RocCurve, SearchResult, Truth,
};
use mission_eval_core::model::Mode;
use mission_eval_core::partition::CellKey;

use crate::corpus::write_file;
use crate::scores::fmt_modes;
use crate::session::SessionOutcome;
use crate::svg::{BarChart, LinePlot, Series};
use crate::xml::{fmt_f64, Element};

pub const FAR_TARGET: f64 = 0.01;
pub const MAX_RANK: usize = 20;

/// Probe membership of one partition cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellInfo {
    pub key: CellKey,
    pub probes: Vec<String>,
    pub n_subjects: usize,
}

/// A cell, or a union of a mission's cells when a facet is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Scope {
    pub mission: MissionId,
    pub restriction: Option<Restriction>,
    pub treatment: Option<Treatment>,
}

impl Scope {
    pub fn restriction_str(&self) -> &'static str {
        self.restriction.map_or("all", Restriction::as_str)
    }

    pub fn treatment_str(&self) -> &'static str {
        self.treatment.map_or("all", Treatment::as_str)
    }

    pub fn is_cell(&self) -> bool {
        self.restriction.is_some() && self.treatment.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScopeResult {
    pub scope: Scope,
    pub mode: Mode,
    pub n_subjects: usize,
    pub n_samples: usize,
    /// Probes of this scope the matcher failed to ingest.
    pub n_fta: usize,
    pub null_pairs: usize,
    pub roc: Option<RocCurve>,
    pub cmc: Vec<f64>,
    pub n_unmated: usize,
    /// Why there are no numbers, when there are none.
    pub note: Option<String>,
}

impl ScopeResult {
    pub fn tar_at_far(&self) -> Option<f64> {
        self.roc.as_ref().map(|c| tar_at_far(c, FAR_TARGET))
    }

    pub fn rank(&self, k: usize) -> Option<f64> {
        (!self.cmc.is_empty()).then(|| self.cmc[(k - 1).min(self.cmc.len() - 1)])
    }

    /// "subjects/samples"
    pub fn counts(&self) -> String {
        format!("{}/{}", self.n_subjects, self.n_samples)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub results: Vec<ScopeResult>,
    pub outcome_summary: OutcomeSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeSummary {
    pub evaluated: String,
    pub unsupported: Vec<Mode>,
    pub n_gallery: usize,
    pub n_probes: usize,
    pub fte: Vec<String>,
    pub fta: Vec<String>,
    pub request_errors: BTreeMap<Mode, usize>,
    pub failure: Option<String>,
}

impl Report {
    pub fn get(&self, scope: Scope, mode: Mode) -> Option<&ScopeResult> {
        self.results.iter().find(|r| r.scope == scope && r.mode == mode)
    }

    pub fn mission(&self, mission: MissionId, mode: Mode) -> Option<&ScopeResult> {
        self.get(
            Scope {
                mission,
                restriction: None,
                treatment: None,
            },
            mode,
        )
    }
}

fn scopes(cells: &[CellInfo]) -> BTreeMap<Scope, (BTreeSet<&str>, usize)> {
    let mut out: BTreeMap<Scope, (BTreeSet<&str>, usize)> = BTreeMap::new();
    for c in cells {
        let k = c.key;
        for scope in [
            Scope { mission: k.mission, restriction: Some(k.restriction), treatment: Some(k.treatment) },
            Scope { mission: k.mission, restriction: None, treatment: Some(k.treatment) },
            Scope { mission: k.mission, restriction: None, treatment: None },
        ] {
            let e = out.entry(scope).or_default();
            e.0.extend(c.probes.iter().map(String::as_str));
            if scope.is_cell() {
                e.1 = c.n_subjects;
            }
        }
    }
    out
}

fn subjects_of(probes: &BTreeSet<&str>, truth: &Truth) -> usize {
    probes
        .iter()
        .filter_map(|p| truth.probe_subject.get(*p))
        .collect::<BTreeSet<_>>()
        .len()
}

pub fn build(cells: &[CellInfo], truth: &Truth, outcome: &SessionOutcome) -> Result<Report> {
    let fta: BTreeSet<&str> = outcome.fta.iter().map(|f| f.entry_id.as_str()).collect();
    let mut results = Vec::new();
    for (scope, (probes, cell_subjects)) in scopes(cells) {
        let n_subjects = if scope.is_cell() { cell_subjects } else { subjects_of(&probes, truth) };
        for (&mode, matrix) in &outcome.matrices {
            let mut r = ScopeResult {
                scope,
                mode,
                n_subjects,
                n_samples: probes.len(),
                n_fta: probes.iter().filter(|p| fta.contains(*p)).count(),
                null_pairs: 0,
                roc: None,
                cmc: Vec::new(),
                n_unmated: 0,
                note: None,
            };
            if probes.is_empty() {
                r.note = Some("no data".into());
                results.push(r);
                continue;
            }
            let pairs = label_pairs_where(matrix, truth, |p| probes.contains(p))?;
            r.null_pairs = pairs.genuine.iter().chain(&pairs.impostor).filter(|s| s.is_none()).count();
            match roc(&pairs.genuine, &pairs.impostor) {
                Ok(c) => r.roc = Some(c),
                Err(e) => r.note = Some(format!("no data ({e})")),
            }
            if let Some(search) = outcome.searches.get(&mode) {
                let subset: Vec<SearchResult> = search.iter().filter(|s| probes.contains(s.probe.as_str())).cloned().collect();
                let depth = MAX_RANK.min(outcome.gallery.len()).max(1);
                let curve = cmc(&subset, truth, depth)?;
                r.n_unmated = curve.n_unmated;
                if curve.n_mated > 0 {
                    r.cmc = curve.rates;
                }
            }
            results.push(r);
        }
    }
    Ok(Report {
        results,
        outcome_summary: OutcomeSummary {
            evaluated: fmt_modes(outcome.negotiated.modes),
            unsupported: outcome.negotiated.unsupported.iter().collect(),
            n_gallery: outcome.gallery.len(),
            n_probes: outcome.probes.len(),
            fte: outcome.fte.iter().map(|f| f.entry_id.clone()).collect(),
            fta: outcome.fta.iter().map(|f| f.entry_id.clone()).collect(),
            request_errors: outcome.request_errors.clone(),
            failure: outcome.failure.as_ref().map(ToString::to_string),
        },
    })
}

pub fn summary_xml(r: &Report) -> String {
    let s = &r.outcome_summary;
    let mut root = Element::new("summary")
        .attr("far_target", fmt_f64(FAR_TARGET))
        .child(
            Element::new("matcher")
                .attr("modes", &s.evaluated)
                .attr("gallery", s.n_gallery.to_string())
                .attr("probes", s.n_probes.to_string())
                .attr("fte", s.fte.len().to_string())
                .attr("fta", s.fta.len().to_string()),
        );
    for m in &s.unsupported {
        root.push(Element::text("note", "unsupported by matcher").attr("mode", m.as_str()));
    }
    for (m, n) in &s.request_errors {
        root.push(Element::text("note", format!("{n} requests refused")).attr("mode", m.as_str()));
    }
    root.push(Element::text("status", if s.failure.is_some() { "failed" } else { "ok" }));
    if let Some(f) = &s.failure {
        root.push(Element::text("failure", f));
    }
    for x in &r.results {
        let mut e = Element::new("result")
            .attr("mission", x.scope.mission.as_str())
            .attr("mode", x.mode.as_str())
            .attr("restriction", x.scope.restriction_str())
            .attr("treatment", x.scope.treatment_str())
            .attr("counts", x.counts())
            .attr("fta", x.n_fta.to_string())
            .attr("null_pairs", x.null_pairs.to_string());
        match (&x.roc, &x.note) {
            (Some(c), _) => {
                e.push(Element::text("tar_at_far", fmt_f64(tar_at_far(c, FAR_TARGET))));
                e.push(Element::text("threshold", fmt_f64(threshold_at_far(c, FAR_TARGET))));
                e.push(Element::text("auc", fmt_f64(auc(c))));
                e.push(Element::text("genuine", c.n_genuine.to_string()));
                e.push(Element::text("impostor", c.n_impostor.to_string()));
                for k in [1, 5] {
                    if let Some(v) = x.rank(k) {
                        e.push(Element::text("rank", fmt_f64(v)).attr("k", k.to_string()));
                    }
                }
            }
            (None, note) => e.push(Element::text("note", note.as_deref().unwrap_or("no data"))),
        }
        root.push(e);
    }
    root.to_document()
}

pub fn roc_csv(r: &Report) -> String {
    let mut out = String::from("mission,mode,restriction,treatment,threshold,far,tar\n");
    for x in &r.results {
        let Some(c) = &x.roc else { continue };
        for p in &c.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                x.scope.mission.as_str(),
                x.mode.as_str(),
                x.scope.restriction_str(),
                x.scope.treatment_str(),
                fmt_f64(p.threshold),
                fmt_f64(p.far),
                fmt_f64(p.tar)
            );
        }
    }
    out
}

pub fn cmc_csv(r: &Report) -> String {
    let mut out = String::from("mission,mode,restriction,treatment,rank,rate\n");
    for x in &r.results {
        for (i, v) in x.cmc.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                x.scope.mission.as_str(),
                x.mode.as_str(),
                x.scope.restriction_str(),
                x.scope.treatment_str(),
                i + 1,
                fmt_f64(*v)
            );
        }
    }
    out
}

pub fn text_report(r: &Report) -> String {
    let s = &r.outcome_summary;
    let mut out = String::new();
    let _ = writeln!(out, "Evaluation report");
    let _ = writeln!(out, "modes evaluated: {}", if s.evaluated.is_empty() { "none" } else { &s.evaluated });
    for m in &s.unsupported {
        let _ = writeln!(out, "mode {}: unsupported by matcher, skipped", m.as_str());
    }
    let _ = writeln!(
        out,
        "gallery {} entries, {} failed to enroll; probes {}, {} failed to ingest",
        s.n_gallery,
        s.fte.len(),
        s.n_probes,
        s.fta.len()
    );
    for (m, n) in &s.request_errors {
        let _ = writeln!(out, "mode {}: {n} requests refused by matcher", m.as_str());
    }
    if let Some(f) = &s.failure {
        let _ = writeln!(out, "RUN FAILED {f}; results below are partial");
    }
    let mut mission = None;
    for x in r.results.iter().filter(|x| x.scope.is_cell() || x.scope.treatment.is_none()) {
        if mission != Some(x.scope.mission) {
            mission = Some(x.scope.mission);
            let _ = writeln!(out, "\n== {} ==", x.scope.mission.title());
            let _ = writeln!(
                out,
                "{:<7} {:<15} {:<10} {:>10} {:>4} {:>10} {:>7}",
                "mode", "restriction", "treatment", "subj/samp", "fta", "TAR@1%FAR", "rank-1"
            );
        }
        let tar = x.tar_at_far().map_or_else(|| x.note.clone().unwrap_or_default(), |v| format!("{v:.4}"));
        let rank1 = x.rank(1).map_or("-".to_owned(), |v| format!("{v:.4}"));
        let _ = writeln!(
            out,
            "{:<7} {:<15} {:<10} {:>10} {:>4} {:>10} {:>7}",
            x.mode.as_str(),
            x.scope.restriction_str(),
            x.scope.treatment_str(),
            x.counts(),
            x.n_fta,
            tar,
            rank1
        );
    }
    out
}

fn roc_series(c: &RocCurve) -> Vec<(f64, f64)> {
    c.points.iter().rev().map(|p| (p.far, p.tar)).collect()
}

/// One ROC figure per mission and restriction, one bar chart per mode
/// summary and a control-versus-treatment fusion comparison.
pub fn figures(r: &Report) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let missions: BTreeSet<MissionId> = r.results.iter().map(|x| x.scope.mission).collect();
    let modes: BTreeSet<Mode> = r.results.iter().map(|x| x.mode).collect();
    for &m in &missions {
        for restriction in Restriction::ALL {
            let series = r
                .results
                .iter()
                .filter(|x| x.scope.mission == m && x.scope.restriction == Some(restriction))
                .filter_map(|x| {
                    x.roc.as_ref().map(|c| Series {
                        name: format!("{} {}", x.mode.as_str(), x.scope.treatment_str()),
                        points: roc_series(c),
                    })
                })
                .collect();
            let plot = LinePlot {
                title: format!("{} - {}", m.title(), restriction.as_str()),
                x_label: "FAR".into(),
                y_label: "TAR".into(),
                log_x: true,
                x_min: 1e-3,
                series,
                empty_note: "no data".into(),
            };
            out.push((format!("roc-{}-{}.svg", m.as_str(), restriction.as_str()), plot.render()));
        }
    }
    let by_mode = BarChart {
        title: "TAR@1%FAR by mode".into(),
        y_label: "TAR@1%FAR".into(),
        series: modes.iter().map(|m| m.as_str().to_owned()).collect(),
        groups: missions
            .iter()
            .map(|&m| {
                (
                    m.as_str().to_owned(),
                    modes.iter().map(|&md| r.mission(m, md).and_then(ScopeResult::tar_at_far)).collect(),
                )
            })
            .collect(),
    };
    out.push(("tar-by-mode.svg".into(), by_mode.render()));
    if modes.contains(&Mode::Fusion) {
        let by_treatment = BarChart {
            title: "Fusion TAR@1%FAR, control vs treatment".into(),
            y_label: "TAR@1%FAR".into(),
            series: Treatment::ALL.iter().map(|t| t.as_str().to_owned()).collect(),
            groups: missions
                .iter()
                .map(|&m| {
                    (
                        m.as_str().to_owned(),
                        Treatment::ALL
                            .iter()
                            .map(|&t| {
                                r.get(Scope { mission: m, restriction: None, treatment: Some(t) }, Mode::Fusion)
                                    .and_then(ScopeResult::tar_at_far)
                            })
                            .collect(),
                    )
                })
                .collect(),
        };
        out.push(("fusion-control-vs-treatment.svg".into(), by_treatment.render()));
    }
    out
}

/// Writes the whole bundle below `dir`.
pub fn write_bundle(r: &Report, dir: &Path) -> Result<()> {
    write_file(&dir.join("summary.xml"), summary_xml(r))?;
    write_file(&dir.join("roc.csv"), roc_csv(r))?;
    write_file(&dir.join("cmc.csv"), cmc_csv(r))?;
    write_file(&dir.join("report.txt"), text_report(r))?;
    for (name, svg) in figures(r) {
        write_file(&dir.join("figures").join(name), svg)?;
    }
    Ok(())
}
