//! On-disk corpus layout.
//!
//! ```text
//! raw/        generator.xml subjects.xml sensors.xml activity_log.xml
//!             weather.xml telemetry.xml recordings.xml manual_review.xml
//!             media/<sensor>.brf detections/<sensor>.xml
//! curated/    subjects.xml split_report.xml split_report.txt skipped.xml
//!             segments/<segment>.xml segments/<segment>.brf
//! partition/  gallery.xml <probe sig-set>.xml manifest.xml
//! ```
//!
//! Every stage directory also receives a `run-manifest.xml`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mission_eval_core::model::{MediaSegment, SigSet};
use mission_eval_core::payload::Payload;

use crate::brf;
use crate::segment::load_segment;
use crate::session::{MediaError, MediaSource};
use crate::sigset::parse_sigset;

#[derive(Debug, Clone)]
pub struct Corpus {
    pub root: PathBuf,
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

/// Removes and recreates a stage directory so stale files never survive a
/// re-run.
pub fn reset_dir(path: &Path) -> Result<()> {
    if path.exists() {
        fs::remove_dir_all(path).with_context(|| format!("clearing {}", path.display()))?;
    }
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

/// Files below `dir` with the given extension, sorted by name.
pub fn files_with_extension(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let p = e?.path();
        if p.extension().is_some_and(|x| x == ext) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

impl Corpus {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn raw(&self) -> PathBuf {
        self.root.join("raw")
    }

    pub fn curated(&self) -> PathBuf {
        self.root.join("curated")
    }

    pub fn segments(&self) -> PathBuf {
        self.curated().join("segments")
    }

    pub fn partition(&self) -> PathBuf {
        self.root.join("partition")
    }

    pub fn segment_xml(&self, id: &str) -> PathBuf {
        self.segments().join(format!("{id}.xml"))
    }

    pub fn segment_brf(&self, id: &str) -> PathBuf {
        self.segments().join(format!("{id}.brf"))
    }

    pub fn sigset_path(&self, sigset_id: &str) -> PathBuf {
        self.partition().join(format!("{sigset_id}.xml"))
    }

    pub fn load_segment(&self, id: &str) -> Result<MediaSegment> {
        let path = self.segment_xml(id);
        load_segment(&read_text(&path)?).with_context(|| format!("loading {}", path.display()))
    }

    pub fn load_payload(&self, id: &str) -> Result<Payload> {
        let path = self.segment_brf(id);
        brf::decode(&read_bytes(&path)?).with_context(|| format!("decoding {}", path.display()))
    }

    /// Every curated segment, validated, in id order.
    pub fn load_segments(&self) -> Result<Vec<MediaSegment>> {
        files_with_extension(&self.segments(), "xml")?
            .iter()
            .map(|p| load_segment(&read_text(p)?).with_context(|| format!("loading {}", p.display())))
            .collect()
    }

    pub fn load_sigset(&self, sigset_id: &str) -> Result<SigSet> {
        let path = self.sigset_path(sigset_id);
        parse_sigset(&read_text(&path)?).with_context(|| format!("loading {}", path.display()))
    }

    /// Subject of every curated segment, for harness-side ground truth.
    pub fn segment_subjects(&self) -> Result<BTreeMap<String, String>> {
        Ok(self
            .load_segments()?
            .into_iter()
            .map(|s| (s.segment_id, s.subject_id))
            .collect())
    }
}

impl MediaSource for Corpus {
    fn segment(&self, id: &str) -> Result<MediaSegment, MediaError> {
        if !self.segment_xml(id).exists() {
            return Err(MediaError::Missing(id.into()));
        }
        self.load_segment(id).map_err(|e| MediaError::Invalid {
            id: id.into(),
            message: format!("{e:#}"),
        })
    }

    fn payload(&self, id: &str) -> Result<Payload, MediaError> {
        if !self.segment_brf(id).exists() {
            return Err(MediaError::Missing(id.into()));
        }
        self.load_payload(id).map_err(|e| MediaError::Invalid {
            id: id.into(),
            message: format!("{e:#}"),
        })
    }
}
