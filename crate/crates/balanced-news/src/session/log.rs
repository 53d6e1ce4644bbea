//! Append-only session event log and deterministic replay.
//!
//! Each line of a log file is one JSON event. Sequence numbers are per
//! session and start at 0 with the `created` event.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use balanced_news_core::Pools;
use serde::{Deserialize, Serialize};

use super::{FeedKind, SessionConfig, SessionError, SessionState, Transition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventPayload {
    Created {
        config: SessionConfig,
        seed: u64,
    },
    PageServed {
        feed: FeedKind,
        iteration: u64,
        article_ids: Vec<String>,
    },
    Click {
        feed: FeedKind,
        article_id: String,
    },
    ConstraintChange {
        lower_liberal: f64,
        upper_liberal: f64,
    },
    NoClickAdvance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub session_id: String,
    pub seq: u64,
    pub t: u64,
    /// RFC 3339, informational only.
    pub wall_time: String,
    #[serde(flatten)]
    pub payload: EventPayload,
}

impl SessionEvent {
    pub fn new(session_id: &str, seq: u64, t: u64, payload: EventPayload) -> Self {
        Self {
            session_id: session_id.to_string(),
            seq,
            t,
            wall_time: chrono::Utc::now().to_rfc3339(),
            payload,
        }
    }

    /// Equality ignoring wall time.
    fn same_as(&self, other: &SessionEvent) -> bool {
        self.session_id == other.session_id
            && self.seq == other.seq
            && self.t == other.t
            && self.payload == other.payload
    }
}

/// Destination for session events. `append` must either store every event
/// in the batch or report an error having stored none of them.
pub trait EventSink {
    fn append(&mut self, events: &[SessionEvent]) -> io::Result<()>;
}

impl<T: EventSink + ?Sized> EventSink for &mut T {
    fn append(&mut self, events: &[SessionEvent]) -> io::Result<()> {
        (**self).append(events)
    }
}

impl<T: EventSink + ?Sized> EventSink for Box<T> {
    fn append(&mut self, events: &[SessionEvent]) -> io::Result<()> {
        (**self).append(events)
    }
}

/// In-memory log, optionally bounded to emulate a full device.
#[derive(Debug, Clone, Default)]
pub struct MemoryEventLog {
    events: Vec<SessionEvent>,
    capacity: Option<usize>,
}

impl MemoryEventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity_limit(capacity: usize) -> Self {
        Self {
            events: Vec::new(),
            capacity: Some(capacity),
        }
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }
}

impl EventSink for MemoryEventLog {
    fn append(&mut self, events: &[SessionEvent]) -> io::Result<()> {
        if let Some(cap) = self.capacity {
            if self.events.len() + events.len() > cap {
                return Err(io::Error::new(io::ErrorKind::StorageFull, "event log full"));
            }
        }
        self.events.extend_from_slice(events);
        Ok(())
    }
}

/// Line-delimited JSON log file opened for appending.
#[derive(Debug)]
pub struct FileEventLog {
    path: PathBuf,
    file: File,
    fsync: bool,
}

impl FileEventLog {
    pub fn open(path: impl Into<PathBuf>, fsync: bool) -> io::Result<Self> {
        let path = path.into();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { path, file, fsync })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Reads every event in file order.
    pub fn read_all(path: impl AsRef<Path>) -> Result<Vec<SessionEvent>, SessionError> {
        let path = path.as_ref();
        let file = match File::open(path) {
            Ok(file) => file,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut events = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let event = serde_json::from_str(&line).map_err(|e| SessionError::MalformedLog {
                line: i as u64 + 1,
                reason: e.to_string(),
            })?;
            events.push(event);
        }
        Ok(events)
    }
}

impl EventSink for FileEventLog {
    fn append(&mut self, events: &[SessionEvent]) -> io::Result<()> {
        let mut buf = String::new();
        for event in events {
            buf.push_str(&serde_json::to_string(event).map_err(io::Error::other)?);
            buf.push('\n');
        }
        let len_before = self.file.metadata()?.len();
        let written = self
            .file
            .write_all(buf.as_bytes())
            .and_then(|()| self.file.flush())
            .and_then(|()| if self.fsync { self.file.sync_data() } else { Ok(()) });
        if let Err(e) = written {
            // Drop a partially written batch so the log stays line-aligned.
            let _ = self.file.set_len(len_before);
            return Err(e);
        }
        Ok(())
    }
}

/// Rebuilds a session from its events.
///
/// Each primary event (`created`, `click`, `constraint_change`,
/// `no_click_advance`) is re-executed; the `page_served` events that follow
/// it must match the pages the re-execution serves. With `through`, events
/// after that sequence number are ignored.
pub fn replay<'a>(
    events: impl IntoIterator<Item = &'a SessionEvent>,
    session_id: &str,
    pools: &Pools,
    through: Option<u64>,
) -> Result<SessionState, SessionError> {
    let mine: Vec<&SessionEvent> = events
        .into_iter()
        .filter(|e| e.session_id == session_id)
        .filter(|e| through.is_none_or(|last| e.seq <= last))
        .collect();
    let Some(first) = mine.first() else {
        return Err(SessionError::UnknownSession(session_id.to_string()));
    };
    let corrupt = |seq: u64, reason: String| SessionError::CorruptLog { seq, reason };

    let mut state: Option<SessionState> = None;
    let mut i = 0;
    if !matches!(first.payload, EventPayload::Created { .. }) || first.seq != 0 {
        return Err(corrupt(first.seq, "log does not start with a created event at sequence 0".into()));
    }
    while i < mine.len() {
        let event = mine[i];
        let expected_seq = state.as_ref().map_or(0, |s| s.next_seq);
        if event.seq != expected_seq {
            return Err(corrupt(event.seq, format!("expected sequence {expected_seq}")));
        }
        let transition: Transition = match (&event.payload, &state) {
            (EventPayload::Created { config, seed }, None) => {
                SessionState::create(session_id, config.clone(), *seed, pools)
            }
            (EventPayload::Created { .. }, Some(_)) => {
                return Err(corrupt(event.seq, "duplicate created event".into()));
            }
            (_, None) => unreachable!("first event checked above"),
            (EventPayload::Click { feed, article_id }, Some(s)) => s.apply_click(pools, *feed, article_id),
            (EventPayload::ConstraintChange { lower_liberal, upper_liberal }, Some(s)) => {
                s.apply_constraint_change(pools, *lower_liberal, *upper_liberal)
            }
            (EventPayload::NoClickAdvance, Some(s)) => s.advance_without_click(pools),
            (EventPayload::PageServed { .. }, Some(_)) => {
                return Err(corrupt(event.seq, "page_served without a preceding mutation".into()));
            }
        }
        .map_err(|e| corrupt(event.seq, e.to_string()))?;

        for expected in &transition.events {
            match mine.get(i) {
                Some(logged) if logged.same_as(expected) => i += 1,
                Some(logged) => {
                    return Err(corrupt(logged.seq, "event does not match re-execution".into()));
                }
                None if through.is_some() => break,
                None => return Err(corrupt(expected.seq, "log truncated mid-mutation".into())),
            }
        }
        state = Some(transition.state);
    }
    Ok(state.expect("created event applied"))
}
