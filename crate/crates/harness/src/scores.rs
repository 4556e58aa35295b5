//! Persisted session output: one score CSV and one ranking CSV per mode plus
//! `session.xml`, enough to re-render reports without the matcher.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use mission_eval_core::metrics::{ScoreMatrix, SearchResult};
use mission_eval_core::model::{Mode, ModeSet};

use crate::corpus::{read_text, write_file};
use crate::session::{EntryFailure, Negotiated, SessionOutcome, Stage, StageFailure};
use crate::xml::{children, fmt_f64, parse_as, parse_document, parse_f64, req_attr, req_child, root, text_of, Element};

pub fn fmt_modes(m: ModeSet) -> String {
    m.iter().map(Mode::as_str).collect::<Vec<_>>().join(",")
}

pub fn parse_modes(s: &str) -> Option<ModeSet> {
    if s == "all" {
        return Some(ModeSet::ALL);
    }
    let modes = s
        .split(',')
        .filter(|x| !x.is_empty())
        .map(|x| Mode::parse(x.trim()))
        .collect::<Option<Vec<_>>>()?;
    Some(ModeSet::from_modes(&modes))
}

fn stage_from_str(s: &str) -> Option<Stage> {
    [Stage::Negotiate, Stage::Enroll, Stage::ProbeIngest, Stage::Verify, Stage::Search]
        .into_iter()
        .find(|x| x.as_str() == s)
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(w.into_inner().context("flushing CSV")?)
}

fn failures_element(name: &str, f: &[EntryFailure]) -> Element {
    Element::new(name).children(
        f.iter()
            .map(|e| Element::text("entry", &e.reason).attr("id", &e.entry_id)),
    )
}

pub fn session_document(o: &SessionOutcome) -> String {
    let mut root = Element::new("session")
        .child(
            Element::new("modes")
                .attr("evaluated", fmt_modes(o.negotiated.modes))
                .attr("unsupported", fmt_modes(o.negotiated.unsupported)),
        )
        .child(Element::new("gallery").children(o.gallery.iter().map(|g| Element::new("entry").attr("id", g))))
        .child(Element::new("probes").children(o.probes.iter().map(|p| {
            let e = Element::new("entry").attr("id", p);
            match o.tracklets.get(p) {
                Some(n) => e.attr("tracklets", n.to_string()),
                None => e,
            }
        })))
        .child(failures_element("fte", &o.fte))
        .child(failures_element("fta", &o.fta))
        .child(Element::new("request_errors").children(
            o.request_errors
                .iter()
                .map(|(m, n)| Element::new("mode").attr("name", m.as_str()).attr("count", n.to_string())),
        ));
    if let Some(f) = &o.failure {
        root.push(Element::text("failure", &f.message).attr("stage", f.stage.as_str()));
    }
    root.to_document()
}

pub fn save(o: &SessionOutcome, dir: &Path) -> Result<()> {
    write_file(&dir.join("session.xml"), session_document(o))?;
    for (mode, m) in &o.matrices {
        let rows = (0..m.probes.len()).flat_map(|pi| {
            (0..m.gallery.len()).map(move |gi| {
                vec![
                    m.probes[pi].clone(),
                    m.gallery[gi].clone(),
                    m.get(pi, gi).map(fmt_f64).unwrap_or_default(),
                ]
            })
        });
        write_file(
            &dir.join("scores").join(format!("{}.csv", mode.as_str())),
            csv_bytes(&["probe", "gallery", "score"], rows)?,
        )?;
    }
    for (mode, results) in &o.searches {
        let rows = results.iter().flat_map(|r| {
            r.ranked
                .iter()
                .enumerate()
                .map(|(i, g)| vec![r.probe.clone(), (i + 1).to_string(), g.clone()])
        });
        write_file(
            &dir.join("search").join(format!("{}.csv", mode.as_str())),
            csv_bytes(&["probe", "rank", "gallery"], rows)?,
        )?;
    }
    Ok(())
}

fn read_failures(node: roxmltree::Node<'_, '_>) -> Result<Vec<EntryFailure>> {
    children(node, "entry")
        .map(|e| {
            Ok(EntryFailure {
                entry_id: req_attr(e, "id")?.to_owned(),
                reason: text_of(e).to_owned(),
            })
        })
        .collect()
}

fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let text = read_text(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    if r.headers()?.iter().collect::<Vec<_>>() != header {
        bail!("{}: unexpected header", path.display());
    }
    let rows = r.records().collect::<Result<Vec<_>, _>>();
    rows.with_context(|| format!("reading {}", path.display()))
}

pub fn load(dir: &Path) -> Result<SessionOutcome> {
    let path = dir.join("session.xml");
    let text = read_text(&path)?;
    let doc = parse_document(&text).with_context(|| format!("parsing {}", path.display()))?;
    let r = root(&doc, "session")?;
    let modes = req_child(r, "modes")?;
    let mode_set = |attr: &str| -> Result<ModeSet> {
        let v = req_attr(modes, attr)?;
        parse_modes(v).with_context(|| format!("bad mode list {v:?}"))
    };
    let negotiated = Negotiated {
        modes: mode_set("evaluated")?,
        unsupported: mode_set("unsupported")?,
    };
    let gallery: Vec<String> = children(req_child(r, "gallery")?, "entry")
        .map(|e| req_attr(e, "id").map(str::to_owned))
        .collect::<Result<_, _>>()?;
    let mut probes = Vec::new();
    let mut tracklets = BTreeMap::new();
    for e in children(req_child(r, "probes")?, "entry") {
        let id = req_attr(e, "id")?.to_owned();
        if let Some(n) = e.attribute("tracklets") {
            tracklets.insert(id.clone(), parse_as(n, "tracklets")?);
        }
        probes.push(id);
    }
    let mut request_errors = BTreeMap::new();
    for m in children(req_child(r, "request_errors")?, "mode") {
        let name = req_attr(m, "name")?;
        let mode = Mode::parse(name).with_context(|| format!("bad mode {name:?}"))?;
        request_errors.insert(mode, parse_as(req_attr(m, "count")?, "count")?);
    }
    let failure = match r.children().find(|c| c.has_tag_name("failure")) {
        Some(f) => {
            let s = req_attr(f, "stage")?;
            Some(StageFailure {
                stage: stage_from_str(s).with_context(|| format!("bad stage {s:?}"))?,
                message: text_of(f).to_owned(),
            })
        }
        None => None,
    };

    let gallery_index: BTreeMap<&str, usize> = gallery.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
    let probe_index: BTreeMap<&str, usize> = probes.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
    let mut matrices = BTreeMap::new();
    let mut searches = BTreeMap::new();
    for mode in negotiated.modes.iter() {
        let scores_path = dir.join("scores").join(format!("{}.csv", mode.as_str()));
        if !scores_path.exists() {
            // A run that failed before scoring persists no matrices.
            continue;
        }
        let mut m = ScoreMatrix::new(probes.clone(), gallery.clone());
        for rec in read_csv(&scores_path, &["probe", "gallery", "score"])? {
            let (Some(&pi), Some(&gi)) = (probe_index.get(&rec[0]), gallery_index.get(&rec[1])) else {
                bail!("{}: unknown pair {},{}", scores_path.display(), &rec[0], &rec[1]);
            };
            let s = if rec[2].is_empty() { None } else { Some(parse_f64(&rec[2], "score")?) };
            m.set(pi, gi, s);
        }
        matrices.insert(mode, m);
        let search_path = dir.join("search").join(format!("{}.csv", mode.as_str()));
        if search_path.exists() {
            let mut ranked: BTreeMap<&str, Vec<String>> = probes.iter().map(|p| (p.as_str(), Vec::new())).collect();
            for rec in read_csv(&search_path, &["probe", "rank", "gallery"])? {
                let Some(list) = ranked.get_mut(&rec[0]) else {
                    bail!("{}: unknown probe {}", search_path.display(), &rec[0]);
                };
                list.push(rec[2].to_owned());
            }
            searches.insert(
                mode,
                ranked
                    .into_iter()
                    .map(|(p, ranked)| SearchResult { probe: p.to_owned(), ranked })
                    .collect(),
            );
        }
    }
    Ok(SessionOutcome {
        negotiated,
        gallery,
        probes,
        tracklets,
        matrices,
        searches,
        fte: read_failures(req_child(r, "fte")?)?,
        fta: read_failures(req_child(r, "fta")?)?,
        request_errors,
        failure,
    })
}
