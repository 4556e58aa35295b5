//! The five pipeline stages. Each reads only persisted intermediates, writes
//! its own directory and leaves a `run-manifest.xml` there.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};
use mission_eval_core::classify::{MissionId, MissionSet, MissionThresholds, Restriction, Treatment};
use mission_eval_core::curation::{
    curate_recording, CuratedSegment, EventRecords, SkippedInterval, TimedAnnotation, WeatherSeries,
};
use mission_eval_core::metrics::Truth;
use mission_eval_core::model::{FrameAnnotation, ModeSet, SigSet, SubjectRecord};
use mission_eval_core::payload::Payload;
use mission_eval_core::partition::{partition, CellKey, Partition, PartitionWarning};
use mission_eval_core::selection::SelectionConfig;
use mission_eval_core::split::{split_train_test, SplitReport, DEFAULT_TOLERANCE};
use mission_eval_core::synth::{plan_event, EventPlan, GeneratorConfig, Renderer};
use mission_eval_core::template::FusionConfig;

use crate::config::{generator_document, read_generator};
use crate::corpus::{read_bytes, read_text, reset_dir, write_file, Corpus};
use crate::hs::HsSpec;
use crate::manifest::{RunManifest, FILE_NAME};
use crate::profile::ConstraintProfile;
use crate::records::*;
use crate::report::{self, CellInfo};
use crate::scores::{self, fmt_modes};
use crate::segment::canonical_serialize;
use crate::session::{distinct_probes, run_session, SessionPlan};
use crate::sigset::write_sigset;
use crate::xml::{children, fmt_f64, parse_as, parse_document, parse_enum, req_attr, root, Element};
use crate::brf;

pub const DEFAULT_SEED: u64 = 42;
pub const TEST_FRACTION: f64 = 0.5;

pub fn parse_missions(s: &str) -> Option<MissionSet> {
    if s == "all" {
        return Some(MissionId::ALL.into_iter().collect());
    }
    s.split(',')
        .filter(|x| !x.is_empty())
        .map(|x| MissionId::parse(x.trim()))
        .collect()
}

pub fn fmt_missions(m: MissionSet) -> String {
    m.iter().map(MissionId::as_str).collect::<Vec<_>>().join(",")
}

/// Runs `body`, then writes the manifest into `dir` whatever the outcome.
fn with_manifest<T>(dir: &Path, mut manifest: RunManifest, body: impl FnOnce(&mut RunManifest) -> Result<T>) -> Result<T> {
    let result = body(&mut manifest);
    if let Err(e) = &result {
        manifest.failure = Some(format!("{e:#}"));
    }
    write_file(&dir.join(FILE_NAME), manifest.to_xml())?;
    result
}

/// Tags an error with the stage that raised it.
fn tagged<T>(stage: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| anyhow!("[{stage}] {e:#}"))
}

fn manual_map(reviews: &[mission_eval_core::synth::ManualReview]) -> BTreeMap<String, Vec<FrameAnnotation>> {
    reviews.iter().map(|m| (m.segment_id.clone(), m.frames.clone())).collect()
}

pub fn generate(corpus: &Corpus, cfg: &GeneratorConfig) -> Result<()> {
    let raw = corpus.raw();
    reset_dir(&raw)?;
    let config = generator_document(cfg);
    with_manifest(&raw, RunManifest::new("generate", &config, cfg.seed), |m| {
        let plan = tagged("plan", m.stage("plan", || plan_event(cfg).map_err(anyhow::Error::from)))?;
        write_file(&raw.join("generator.xml"), &config)?;
        write_file(&raw.join("subjects.xml"), subjects_document(&plan.subjects))?;
        write_file(&raw.join("sensors.xml"), sensors_document(&plan.sensors))?;
        write_file(&raw.join("activity_log.xml"), activity_log_document(&plan.log))?;
        write_file(&raw.join("weather.xml"), weather_document(&plan.weather))?;
        write_file(&raw.join("telemetry.xml"), telemetry_document(&plan.telemetry))?;
        write_file(&raw.join("recordings.xml"), recordings_document(&plan.recordings))?;
        let renderer = Renderer::new(cfg, &plan);
        let mut manual = BTreeMap::new();
        tagged(
            "render",
            m.stage("render", || {
                for rec in &plan.recordings {
                    let r = renderer
                        .render_recording(&rec.sensor_id)
                        .with_context(|| format!("no sensor {}", rec.sensor_id))?;
                    write_file(&raw.join("media").join(format!("{}.brf", rec.sensor_id)), brf::encode(&r.payload))?;
                    write_file(
                        &raw.join("detections").join(format!("{}.xml", rec.sensor_id)),
                        detections_document(&rec.sensor_id, &r.auto),
                    )?;
                    manual.extend(manual_map(&r.manual));
                }
                Ok(())
            }),
        )?;
        write_file(&raw.join("manual_review.xml"), manual_review_document(&manual))?;
        m.outputs.push(raw.clone());
        info!(
            "generated {} subjects, {} recordings under {}",
            plan.subjects.len(),
            plan.recordings.len(),
            raw.display()
        );
        Ok(())
    })
}

/// Curated output of one event, before anything touches disk.
pub struct Curated {
    pub subjects: Vec<SubjectRecord>,
    pub segments: Vec<CuratedSegment>,
    pub skipped: Vec<(String, SkippedInterval)>,
    pub split: SplitReport,
}

/// Curates every recording of `plan` and assigns the train/test split.
/// `media` yields a recording's payload and automatic detections.
pub fn curate_event(
    plan: &EventPlan,
    media: impl Fn(&str) -> Result<(Payload, Vec<TimedAnnotation>)>,
    manual: &BTreeMap<String, Vec<FrameAnnotation>>,
    seed: u64,
) -> Result<Curated> {
    let weather = WeatherSeries::new(plan.weather.iter().cloned());
    let event = EventRecords {
        subjects: &plan.subjects,
        sensors: &plan.sensors,
        log: &plan.log,
        weather: &weather,
        telemetry: &plan.telemetry,
    };
    let mut segments = Vec::new();
    let mut skipped = Vec::new();
    for rec in &plan.recordings {
        let (payload, auto) = media(&rec.sensor_id)?;
        let (segs, skips) = curate_recording(&event, rec, &payload, &auto, manual)
            .with_context(|| format!("recording {}", rec.sensor_id))?;
        segments.extend(segs);
        skipped.extend(skips.into_iter().map(|s| (rec.sensor_id.clone(), s)));
    }
    segments.sort_by(|a, b| a.segment.segment_id.cmp(&b.segment.segment_id));
    let split = split_train_test(&plan.subjects, TEST_FRACTION, DEFAULT_TOLERANCE, seed)?;
    let mut subjects = plan.subjects.clone();
    for s in &mut subjects {
        s.split = split.assignment.get(&s.subject_id).copied();
    }
    Ok(Curated { subjects, segments, skipped, split })
}

/// Plans, renders and curates an event entirely in memory.
pub fn synthesize(cfg: &GeneratorConfig) -> Result<Curated> {
    let plan = plan_event(cfg)?;
    let renderer = Renderer::new(cfg, &plan);
    let mut rendered = BTreeMap::new();
    let mut manual = BTreeMap::new();
    for rec in &plan.recordings {
        let r = renderer
            .render_recording(&rec.sensor_id)
            .with_context(|| format!("no sensor {}", rec.sensor_id))?;
        manual.extend(manual_map(&r.manual));
        rendered.insert(rec.sensor_id.clone(), (r.payload, r.auto));
    }
    let rendered = RefCell::new(rendered);
    curate_event(
        &plan,
        |sensor| rendered.borrow_mut().remove(sensor).with_context(|| format!("no media for {sensor}")),
        &manual,
        cfg.seed,
    )
}

fn load_plan(raw: &Path) -> Result<EventPlan> {
    let read = |name: &str| read_text(&raw.join(name));
    let ctx = |name: &'static str| move |e| anyhow!("{name}: {e}");
    Ok(EventPlan {
        subjects: read_subjects(&read("subjects.xml")?).map_err(ctx("subjects.xml"))?,
        sensors: read_sensors(&read("sensors.xml")?).map_err(ctx("sensors.xml"))?,
        log: read_activity_log(&read("activity_log.xml")?).map_err(ctx("activity_log.xml"))?,
        recordings: read_recordings(&read("recordings.xml")?).map_err(ctx("recordings.xml"))?,
        weather: read_weather(&read("weather.xml")?).map_err(ctx("weather.xml"))?,
        telemetry: read_telemetry(&read("telemetry.xml")?).map_err(ctx("telemetry.xml"))?,
    })
}

/// Seed recorded by `generate`, for stages run without `--seed`.
pub fn corpus_seed(corpus: &Corpus) -> Result<u64> {
    let text = read_text(&corpus.raw().join("generator.xml"))?;
    Ok(read_generator(&text).map_err(|e| anyhow!("generator.xml: {e}"))?.seed)
}

fn split_report_document(r: &SplitReport) -> String {
    Element::new("split_report")
        .attr("test_fraction", fmt_f64(r.test_fraction))
        .attr("tolerance", fmt_f64(r.tolerance))
        .attr("within_tolerance", if r.within_tolerance { "true" } else { "false" })
        .child(Element::text("train", r.n_train.to_string()))
        .child(Element::text("test", r.n_test.to_string()))
        .child(Element::text("distractors", r.n_distractors.to_string()))
        .child(Element::text("swaps", r.swaps.to_string()))
        .children(r.distances.iter().map(|d| {
            Element::text("tv_distance", fmt_f64(d.tv_distance)).attr("attribute", d.attribute.as_str())
        }))
        .to_document()
}

fn split_report_text(r: &SplitReport) -> String {
    let mut s = format!(
        "train {} / test {} subjects, {} distractors, {} swaps\n",
        r.n_train, r.n_test, r.n_distractors, r.swaps
    );
    for d in &r.distances {
        s += &format!("{:<16} TV distance {:.4}\n", d.attribute.as_str(), d.tv_distance);
    }
    s += &format!(
        "max {:.4} against tolerance {:.4}: {}\n",
        r.max_distance(),
        r.tolerance,
        if r.within_tolerance { "within" } else { "EXCEEDED" }
    );
    s
}

fn skipped_document(skipped: &[(String, SkippedInterval)]) -> String {
    Element::new("skipped")
        .children(skipped.iter().map(|(sensor, s)| {
            Element::text("interval", s.reason)
                .attr("sensor_id", sensor)
                .attr("index", s.index.to_string())
                .attr("subject_id", &s.subject_id)
        }))
        .to_document()
}

pub fn curate(corpus: &Corpus, seed: Option<u64>) -> Result<()> {
    let curated = corpus.curated();
    let seed = match seed {
        Some(s) => s,
        None => tagged("curate", corpus_seed(corpus))?,
    };
    reset_dir(&curated)?;
    let raw = corpus.raw();
    let config = format!("<curate seed=\"{seed}\" test_fraction=\"{}\"/>", fmt_f64(TEST_FRACTION));
    with_manifest(&curated, RunManifest::new("curate", &config, seed), |m| {
        m.inputs.push(raw.clone());
        let plan = tagged("load", load_plan(&raw))?;
        let manual_text = read_text(&raw.join("manual_review.xml"))?;
        let manual = read_manual_review(&manual_text).map_err(|e| anyhow!("[load] manual_review.xml: {e}"))?;
        let c = tagged(
            "curate",
            m.stage("curate", || {
                curate_event(
                    &plan,
                    |sensor| {
                        let payload = brf::decode(&read_bytes(&raw.join("media").join(format!("{sensor}.brf")))?)
                            .with_context(|| format!("media of {sensor}"))?;
                        let det = raw.join("detections").join(format!("{sensor}.xml"));
                        let auto = read_detections(&read_text(&det)?).map_err(|e| anyhow!("{}: {e}", det.display()))?;
                        Ok((payload, auto))
                    },
                    &manual,
                    seed,
                )
            }),
        )?;
        for s in &c.segments {
            let id = &s.segment.segment_id;
            write_file(&corpus.segment_xml(id), canonical_serialize(&s.segment))?;
            write_file(&corpus.segment_brf(id), brf::encode(&s.payload))?;
        }
        write_file(&curated.join("subjects.xml"), subjects_document(&c.subjects))?;
        write_file(&curated.join("split_report.xml"), split_report_document(&c.split))?;
        write_file(&curated.join("split_report.txt"), split_report_text(&c.split))?;
        write_file(&curated.join("skipped.xml"), skipped_document(&c.skipped))?;
        if !c.split.within_tolerance {
            warn!("split exceeds TV tolerance: {:.4}", c.split.max_distance());
        }
        m.outputs.push(curated.clone());
        info!("curated {} segments, skipped {} intervals", c.segments.len(), c.skipped.len());
        Ok(())
    })
}

/// One row of `partition/manifest.xml`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellRecord {
    pub key: CellKey,
    pub n_subjects: usize,
    pub n_samples: usize,
}

fn partition_document(p: &Partition, missions: MissionSet, seed: u64) -> String {
    Element::new("partition")
        .attr("seed", seed.to_string())
        .attr("missions", fmt_missions(missions))
        .child(Element::new("gallery").attr("entries", p.gallery.entries.len().to_string()))
        .children(p.missions.iter().map(|s| {
            Element::new("mission")
                .attr("id", s.mission.as_str())
                .attr("pool", s.pool_size.to_string())
                .attr("selected", s.n_selected.to_string())
                .attr("subjects", s.n_subjects.to_string())
        }))
        .children(p.cells.iter().filter(|c| missions.contains(c.key.mission)).map(|c| {
            Element::new("cell")
                .attr("sigset", c.key.sigset_id())
                .attr("mission", c.key.mission.as_str())
                .attr("restriction", c.key.restriction.as_str())
                .attr("treatment", c.key.treatment.as_str())
                .attr("counts", format!("{}/{}", c.n_subjects, c.n_samples()))
        }))
        .children(p.warnings.iter().map(|w| match w {
            PartitionWarning::NoControlledMedia { subject_id } => {
                Element::text("warning", "no controlled media for gallery").attr("subject_id", subject_id)
            }
        }))
        .to_document()
}

pub fn read_cells(text: &str) -> Result<Vec<CellRecord>> {
    let doc = parse_document(text)?;
    let r = root(&doc, "partition")?;
    children(r, "cell")
        .map(|c| {
            let counts = req_attr(c, "counts")?;
            let (s, n) = counts.split_once('/').with_context(|| format!("bad counts {counts:?}"))?;
            Ok(CellRecord {
                key: CellKey {
                    mission: parse_enum(req_attr(c, "mission")?, "mission", MissionId::parse)?,
                    restriction: parse_enum(req_attr(c, "restriction")?, "restriction", Restriction::parse)?,
                    treatment: parse_enum(req_attr(c, "treatment")?, "treatment", Treatment::parse)?,
                },
                n_subjects: parse_as(s, "counts")?,
                n_samples: parse_as(n, "counts")?,
            })
        })
        .collect()
}

pub fn partition_stage(corpus: &Corpus, seed: Option<u64>, missions: MissionSet) -> Result<()> {
    let dir = corpus.partition();
    let seed = match seed {
        Some(s) => s,
        None => tagged("partition", corpus_seed(corpus))?,
    };
    reset_dir(&dir)?;
    let config = format!("<partition seed=\"{seed}\" missions=\"{}\"/>", fmt_missions(missions));
    with_manifest(&dir, RunManifest::new("partition", &config, seed), |m| {
        m.inputs.push(corpus.curated());
        let subjects = read_subjects(&read_text(&corpus.curated().join("subjects.xml"))?)
            .map_err(|e| anyhow!("[load] subjects.xml: {e}"))?;
        let segments = tagged("load", corpus.load_segments())?;
        let selection = SelectionConfig { seed, ..Default::default() };
        let p = m.stage("partition", || {
            partition(&subjects, &segments, missions, &MissionThresholds::default(), &selection)
        });
        write_file(&dir.join("gallery.xml"), write_sigset(&p.gallery))?;
        for c in p.cells.iter().filter(|c| missions.contains(c.key.mission)) {
            write_file(&corpus.sigset_path(&c.key.sigset_id()), write_sigset(&c.sigset))?;
        }
        write_file(&dir.join("manifest.xml"), partition_document(&p, missions, seed))?;
        for w in &p.warnings {
            let PartitionWarning::NoControlledMedia { subject_id } = w;
            warn!("subject {subject_id} has no controlled media for the gallery");
        }
        m.outputs.push(dir.clone());
        Ok(())
    })
}

/// Options of `evaluate`.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub hs: HsSpec,
    pub missions: MissionSet,
    pub modes: ModeSet,
    pub profile: ConstraintProfile,
    pub window: usize,
    pub fusion: FusionConfig,
    pub seed: u64,
}

impl EvalOptions {
    fn canonical(&self) -> String {
        Element::new("evaluate")
            .attr("hs", self.hs.to_string())
            .attr("missions", fmt_missions(self.missions))
            .attr("modes", fmt_modes(self.modes))
            .attr("window", self.window.to_string())
            .child(Element::text("profile", self.profile.to_xml()))
            .to_document()
    }
}

/// Cells, sig-sets and truth of a partitioned corpus, restricted to `missions`.
pub struct Loaded {
    pub gallery: SigSet,
    pub cells: Vec<(CellRecord, SigSet)>,
    pub truth: Truth,
}

pub fn load_partition(corpus: &Corpus, missions: MissionSet) -> Result<Loaded> {
    let cells = read_cells(&read_text(&corpus.partition().join("manifest.xml"))?)?;
    let gallery = corpus.load_sigset("gallery")?;
    let segment_subject = corpus.segment_subjects()?;
    let mut truth = Truth::default();
    for e in &gallery.entries {
        let s = e.subject_id.clone().with_context(|| format!("gallery entry {} has no subject", e.entry_id))?;
        truth.gallery_subject.insert(e.entry_id.clone(), s);
    }
    let mut out = Vec::new();
    for c in cells.into_iter().filter(|c| missions.contains(c.key.mission)) {
        let set = corpus.load_sigset(&c.key.sigset_id())?;
        for e in &set.entries {
            let seg = e.media_refs.first().with_context(|| format!("probe {} has no media", e.entry_id))?;
            let s = segment_subject.get(seg).with_context(|| format!("probe {} refers to unknown segment", e.entry_id))?;
            truth.probe_subject.insert(e.entry_id.clone(), s.clone());
        }
        out.push((c, set));
    }
    Ok(Loaded { gallery, cells: out, truth })
}

fn cell_infos(l: &Loaded) -> Vec<CellInfo> {
    l.cells
        .iter()
        .map(|(c, s)| CellInfo {
            key: c.key,
            probes: s.entries.iter().map(|e| e.entry_id.clone()).collect(),
            n_subjects: c.n_subjects,
        })
        .collect()
}

/// Clears only what `evaluate` owns, so `--out` may be a shared directory.
fn clear_outputs(out: &Path) -> Result<()> {
    for d in ["scores", "search", "figures"] {
        let p = out.join(d);
        if p.exists() {
            fs::remove_dir_all(&p).with_context(|| format!("clearing {}", p.display()))?;
        }
    }
    Ok(())
}

pub fn evaluate(corpus: &Corpus, out: &Path, opts: &EvalOptions) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    clear_outputs(out)?;
    with_manifest(out, RunManifest::new("evaluate", &opts.canonical(), opts.seed), |m| {
        m.inputs.push(corpus.partition());
        m.inputs.push(corpus.curated());
        let loaded = tagged("load", load_partition(corpus, opts.missions))?;
        let sets: Vec<&SigSet> = loaded.cells.iter().map(|(_, s)| s).collect();
        let plan = SessionPlan {
            gallery: &loaded.gallery,
            probes: distinct_probes(sets),
            modes: opts.modes,
            profile: &opts.profile,
            window: opts.window,
        };
        let mut hs = tagged("connect", opts.hs.open(opts.fusion).map_err(anyhow::Error::from))?;
        let outcome = m.stage("session", || run_session(&mut *hs, &plan, corpus));
        drop(hs);
        let outcome = outcome.map_err(|e| anyhow!("{e}"))?;
        scores::save(&outcome, out)?;
        m.stage("report", || -> Result<()> {
            let r = report::build(&cell_infos(&loaded), &loaded.truth, &outcome)?;
            report::write_bundle(&r, out)
        })?;
        m.outputs.push(PathBuf::from(out));
        if let Some(f) = &outcome.failure {
            bail!("{f}; partial scores kept in {}", out.display());
        }
        info!(
            "evaluated {} gallery entries and {} probes",
            outcome.gallery.len(),
            outcome.probes.len()
        );
        Ok(())
    })
}

/// Re-renders the report bundle from persisted scores.
pub fn report_stage(corpus: &Corpus, out: &Path, missions: MissionSet) -> Result<()> {
    let config = format!("<report missions=\"{}\"/>", fmt_missions(missions));
    let seed = corpus_seed(corpus).unwrap_or(DEFAULT_SEED);
    let figures = out.join("figures");
    if figures.exists() {
        fs::remove_dir_all(&figures)?;
    }
    with_manifest(out, RunManifest::new("report", &config, seed), |m| {
        let loaded = tagged("load", load_partition(corpus, missions))?;
        let outcome = tagged("load", scores::load(out))?;
        m.inputs.push(PathBuf::from(out));
        tagged(
            "report",
            m.stage("report", || -> Result<()> {
                let r = report::build(&cell_infos(&loaded), &loaded.truth, &outcome)?;
                report::write_bundle(&r, out)
            }),
        )?;
        m.outputs.push(PathBuf::from(out));
        match &outcome.failure {
            Some(f) => bail!("{f}; report rendered from partial scores"),
            None => Ok(()),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mission_lists() {
        assert_eq!(parse_missions("all").unwrap().len(), MissionId::ALL.len());
        let m = parse_missions("uav,long-range-body");
        assert!(m.is_some_and(|m| m.len() == 2 && m.contains(MissionId::Uav)), "{m:?}");
        assert!(parse_missions("uav,moon").is_none());
    }

    #[test]
    fn stage_errors_are_tagged() {
        let e = tagged::<()>("verify", Err(anyhow!("closed"))).unwrap_err();
        assert_eq!(e.to_string(), "[verify] closed");
    }
}
