//! Sig-set documents: `<sigset kind=...><entry id=...><media ref=.../></entry></sigset>`.

use mission_eval_core::model::{ModalityHint, SigSet, SigSetEntry, SigSetError, SigSetKind};

use crate::xml::{children, parse_document, parse_enum, req_attr, root, Element, FormatError};

pub fn write_sigset(s: &SigSet) -> String {
    Element::new("sigset")
        .attr("id", &s.sigset_id)
        .attr("kind", s.kind.as_str())
        .children(s.entries.iter().map(|e| {
            let mut el = Element::new("entry").attr("id", &e.entry_id);
            if let Some(subject) = &e.subject_id {
                el = el.attr("subject_id", subject);
            }
            el.attr("modality", e.modality_hint.as_str())
                .children(e.media_refs.iter().map(|m| Element::new("media").attr("ref", m)))
        }))
        .to_document()
}

#[derive(Debug, thiserror::Error)]
pub enum SigSetReadError {
    #[error("malformed XML: {0}")]
    Parse(#[from] roxmltree::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("schema violation: {0}")]
    Schema(#[from] SigSetError),
}

pub fn parse_sigset(text: &str) -> Result<SigSet, SigSetReadError> {
    let doc = parse_document(text)?;
    let r = root(&doc, "sigset")?;
    let kind = parse_enum(req_attr(r, "kind")?, "kind", SigSetKind::parse)?;
    let mut entries = Vec::new();
    for e in children(r, "entry") {
        let entry_id = req_attr(e, "id")?.to_owned();
        let subject_id = e.attribute("subject_id").map(str::to_owned);
        if kind == SigSetKind::Probe && (subject_id.is_some() || e.attributes().any(|a| a.name().contains("subject"))) {
            return Err(SigSetError::ProbeEntryWithSubject(entry_id).into());
        }
        let modality_hint = match e.attribute("modality") {
            Some(m) => parse_enum(m, "modality", ModalityHint::parse)?,
            None => ModalityHint::All,
        };
        let media_refs = children(e, "media")
            .map(|m| req_attr(m, "ref").map(str::to_owned))
            .collect::<Result<_, _>>()?;
        entries.push(SigSetEntry {
            entry_id,
            subject_id,
            media_refs,
            modality_hint,
        });
    }
    let s = SigSet {
        sigset_id: req_attr(r, "id")?.to_owned(),
        kind,
        entries,
    };
    s.validate()?;
    Ok(s)
}
