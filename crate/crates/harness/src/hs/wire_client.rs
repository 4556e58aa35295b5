//! Harness side of the wire protocol, over a child process or a socket.

use std::fmt;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::str::FromStr;

use mission_eval_core::model::{Mode, ModeSet};
use mission_eval_core::template::FusionConfig;

use super::{Capabilities, Enrolled, HolisticSolution, HsError, IngestRequest, ReferenceHs};
use crate::wire::{read_frame, Message};

/// Direction of a recorded message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToMatcher,
    FromMatcher,
}

pub struct WireHs {
    reader: Box<dyn Read + Send>,
    writer: Option<Box<dyn Write + Send>>,
    child: Option<Child>,
    transcript: Option<Vec<(Direction, Message)>>,
}

impl fmt::Debug for WireHs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WireHs").field("child", &self.child.as_ref().map(Child::id)).finish()
    }
}

impl WireHs {
    pub fn new(reader: impl Read + Send + 'static, writer: impl Write + Send + 'static) -> Self {
        Self {
            reader: Box::new(BufReader::new(reader)),
            writer: Some(Box::new(BufWriter::new(writer))),
            child: None,
            transcript: None,
        }
    }

    /// Runs `cmd` through `sh -c` and talks to it over its stdio.
    pub fn spawn(cmd: &str) -> io::Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut hs = Self::new(stdout, stdin);
        hs.child = Some(child);
        Ok(hs)
    }

    #[cfg(unix)]
    pub fn connect_unix(path: &std::path::Path) -> io::Result<Self> {
        let s = std::os::unix::net::UnixStream::connect(path)?;
        Ok(Self::new(s.try_clone()?, s))
    }

    /// Keeps every message exchanged from now on.
    pub fn record(&mut self) {
        self.transcript.get_or_insert_with(Vec::new);
    }

    pub fn transcript(&self) -> &[(Direction, Message)] {
        self.transcript.as_deref().unwrap_or(&[])
    }

    /// Closes the matcher's input and waits for it to exit.
    pub fn close(&mut self) -> io::Result<Option<std::process::ExitStatus>> {
        if let Some(mut w) = self.writer.take() {
            w.flush()?;
        }
        match self.child.take() {
            Some(mut c) => c.wait().map(Some),
            None => Ok(None),
        }
    }

    fn send(&mut self, m: Message) -> Result<(), HsError> {
        let w = self
            .writer
            .as_mut()
            .ok_or_else(|| HsError::Protocol("session closed".into()))?;
        w.write_all(&m.encode())?;
        if let Some(t) = self.transcript.as_mut() {
            t.push((Direction::ToMatcher, m));
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<(), HsError> {
        if let Some(w) = self.writer.as_mut() {
            w.flush()?;
        }
        Ok(())
    }

    fn recv(&mut self) -> Result<Message, HsError> {
        self.flush()?;
        let (ty, payload) = read_frame(&mut self.reader)?
            .ok_or_else(|| HsError::Protocol("matcher closed the connection".into()))?;
        let m = Message::decode(ty, &payload).map_err(|e| HsError::Protocol(format!("bad reply: {e}")))?;
        if let Some(t) = self.transcript.as_mut() {
            t.push((Direction::FromMatcher, m.clone()));
        }
        Ok(m)
    }

    fn send_entry(&mut self, req: &IngestRequest) -> Result<(), HsError> {
        self.send(Message::MediaBegin {
            entry_id: req.entry_id.clone(),
            kind: req.kind,
            metadata_xml: req.metadata_xml.clone(),
        })?;
        for m in &req.media {
            self.send(Message::MediaChunk { data: m.clone() })?;
        }
        self.send(Message::MediaEnd)
    }

    fn recv_handle(&mut self) -> Result<Result<Enrolled, HsError>, HsError> {
        match self.recv()? {
            Message::Handle { handle, tracklets } => Ok(Ok(Enrolled { handle, tracklets })),
            Message::Error { code, message } => Ok(Err(HsError::Remote { code, message })),
            other => Err(unexpected(&other, "HANDLE")),
        }
    }
}

impl Drop for WireHs {
    fn drop(&mut self) {
        let _ = self.close();
    }
}

fn unexpected(m: &Message, wanted: &str) -> HsError {
    HsError::Protocol(format!("expected {wanted}, got {}", m.name()))
}

impl HolisticSolution for WireHs {
    fn hello(&mut self, version: u16, requested: ModeSet) -> Result<Capabilities, HsError> {
        self.send(Message::Hello { version, modes: requested })?;
        match self.recv()? {
            Message::Hello { version, modes } => Ok(Capabilities { version, modes }),
            Message::Error { code, message } => Err(HsError::Remote { code, message }),
            other => Err(unexpected(&other, "HELLO")),
        }
    }

    fn configure(&mut self, profile_xml: &str) -> Result<(), HsError> {
        self.send(Message::Config { profile_xml: profile_xml.to_owned() })
    }

    fn ingest(&mut self, req: &IngestRequest) -> Result<Enrolled, HsError> {
        self.send_entry(req)?;
        self.recv_handle()?
    }

    fn ingest_many(
        &mut self,
        reqs: &[IngestRequest],
        window: usize,
    ) -> Result<Vec<Result<Enrolled, HsError>>, HsError> {
        let window = window.max(1);
        let mut out = Vec::with_capacity(reqs.len());
        let mut sent = 0;
        while out.len() < reqs.len() {
            while sent < reqs.len() && sent - out.len() < window {
                self.send_entry(&reqs[sent])?;
                sent += 1;
            }
            out.push(self.recv_handle()?);
        }
        Ok(out)
    }

    fn verify(&mut self, probe: &str, gallery: &[String], mode: Mode) -> Result<Vec<Option<f32>>, HsError> {
        self.send(Message::Verify { probe: probe.to_owned(), gallery: gallery.to_vec(), mode })?;
        match self.recv()? {
            Message::Scores { scores } if scores.len() == gallery.len() => Ok(scores),
            Message::Scores { scores } => Err(HsError::Protocol(format!(
                "{} scores for {} gallery handles",
                scores.len(),
                gallery.len()
            ))),
            Message::Error { code, message } => Err(HsError::Remote { code, message }),
            other => Err(unexpected(&other, "SCORES")),
        }
    }

    fn search(&mut self, probe: &str, k: u32, mode: Mode) -> Result<Vec<(String, f32)>, HsError> {
        self.send(Message::Search { probe: probe.to_owned(), k, mode })?;
        match self.recv()? {
            Message::Ranked { ranked } => Ok(ranked),
            Message::Error { code, message } => Err(HsError::Remote { code, message }),
            other => Err(unexpected(&other, "RANKED")),
        }
    }
}

/// Where the matcher under test lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HsSpec {
    Builtin,
    Exec(String),
    Unix(PathBuf),
}

impl FromStr for HsSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "builtin" {
            Ok(HsSpec::Builtin)
        } else if let Some(cmd) = s.strip_prefix("exec:").filter(|c| !c.trim().is_empty()) {
            Ok(HsSpec::Exec(cmd.to_owned()))
        } else if let Some(p) = s.strip_prefix("unix:").filter(|p| !p.is_empty()) {
            Ok(HsSpec::Unix(PathBuf::from(p)))
        } else {
            Err(format!("unrecognised matcher spec {s:?}; expected builtin, exec:<cmd> or unix:<path>"))
        }
    }
}

impl fmt::Display for HsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HsSpec::Builtin => f.write_str("builtin"),
            HsSpec::Exec(c) => write!(f, "exec:{c}"),
            HsSpec::Unix(p) => write!(f, "unix:{}", p.display()),
        }
    }
}

impl HsSpec {
    pub fn open(&self, fusion: FusionConfig) -> io::Result<Box<dyn HolisticSolution + Send>> {
        Ok(match self {
            HsSpec::Builtin => Box::new(ReferenceHs::new(ModeSet::ALL, fusion)),
            HsSpec::Exec(cmd) => Box::new(WireHs::spawn(cmd)?),
            #[cfg(unix)]
            HsSpec::Unix(p) => Box::new(WireHs::connect_unix(p)?),
            #[cfg(not(unix))]
            HsSpec::Unix(_) => return Err(io::Error::new(io::ErrorKind::Unsupported, "unix sockets unavailable")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing() {
        assert_eq!("builtin".parse(), Ok(HsSpec::Builtin));
        assert_eq!("exec:python3 hs.py".parse(), Ok(HsSpec::Exec("python3 hs.py".into())));
        assert_eq!("unix:/tmp/hs.sock".parse(), Ok(HsSpec::Unix("/tmp/hs.sock".into())));
        assert!("exec:".parse::<HsSpec>().is_err());
        assert!("tcp:1234".parse::<HsSpec>().is_err());
        let s = HsSpec::Exec("a b".into());
        assert_eq!(s.to_string().parse(), Ok(s));
    }

    #[test]
    fn dead_matcher_is_fatal() {
        let mut hs = WireHs::spawn("exit 0").unwrap();
        let err = hs.hello(1, ModeSet::ALL).unwrap_err();
        assert!(err.is_fatal());
    }
}
