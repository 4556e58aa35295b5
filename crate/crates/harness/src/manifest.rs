//! Run manifest written by every command.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use mission_eval_core::model::Timestamp;
use sha2::{Digest, Sha256};

use crate::xml::{fmt_timestamp, Element};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const FILE_NAME: &str = "run-manifest.xml";

/// Wall-clock now, or `SOURCE_DATE_EPOCH` when set.
pub fn now() -> Timestamp {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()) {
        return Timestamp(t);
    }
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    Timestamp(secs as i64)
}

/// Hex SHA-256 of a canonical configuration document.
pub fn config_hash(canonical: &str) -> String {
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTime {
    pub name: String,
    pub started: Timestamp,
    pub finished: Timestamp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub stages: Vec<StageTime>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub tool_version: String,
    /// `None` on success, else the stage-tagged diagnostic.
    pub failure: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &str, seed: u64) -> Self {
        Self {
            command: command.to_owned(),
            config_hash: config_hash(config),
            seed,
            stages: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            tool_version: TOOL_VERSION.to_owned(),
            failure: None,
        }
    }

    /// Runs `f` as a named stage, recording its start and end.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let started = now();
        let out = f();
        self.stages.push(StageTime {
            name: name.to_owned(),
            started,
            finished: now(),
        });
        out
    }

    pub fn to_xml(&self) -> String {
        let path = |name: &str, p: &Path| Element::new(name).attr("path", p.display().to_string());
        let mut root = Element::new("run_manifest")
            .attr("command", &self.command)
            .attr("tool_version", &self.tool_version)
            .child(Element::text("config_hash", &self.config_hash))
            .child(Element::text("seed", self.seed.to_string()))
            .child(Element::new("stages").children(self.stages.iter().map(|s| {
                Element::new("stage")
                    .attr("name", &s.name)
                    .attr("started", fmt_timestamp(s.started))
                    .attr("finished", fmt_timestamp(s.finished))
            })))
            .child(Element::new("inputs").children(self.inputs.iter().map(|p| path("input", p))))
            .child(Element::new("outputs").children(self.outputs.iter().map(|p| path("output", p))));
        root.push(Element::text(
            "status",
            if self.failure.is_some() { "failed" } else { "ok" },
        ));
        if let Some(f) = &self.failure {
            root.push(Element::text("failure", f));
        }
        root.to_document()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_configs_hash_identically() {
        let a = RunManifest::new("generate", "<generator seed=\"42\"/>", 42);
        let b = RunManifest::new("generate", "<generator seed=\"42\"/>", 42);
        let c = RunManifest::new("generate", "<generator seed=\"43\"/>", 43);
        assert_eq!(a.config_hash, b.config_hash);
        assert_ne!(a.config_hash, c.config_hash);
        assert_eq!(a.config_hash.len(), 64);
    }

    #[test]
    fn failure_is_recorded() {
        let mut m = RunManifest::new("evaluate", "", 1);
        m.stage("enroll", || ());
        m.failure = Some("[verify] matcher closed the connection".into());
        let x = m.to_xml();
        assert!(x.contains("<status>failed</status>"));
        assert!(x.contains("<stage name=\"enroll\""));
    }
}
