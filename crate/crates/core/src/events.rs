//! Append-only session events and their deterministic replay.
//!
//! A session is the left fold of its events through the [`process`]
//! operations. Analyses are recomputed on replay rather than stored, which
//! makes every log its own consistency check.
//!
//! [`process`]: crate::process

use std::io::BufRead;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cce::SearchOptions;
use crate::error::Error;
use crate::model::{Ballot, Choice, ChoiceId, ParticipantId};
use crate::process::{DiscussionOutcome, SessionState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "analysis", rename_all = "lowercase")]
pub enum Analysis {
    Pma,
    Cce(SearchOptions),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventKind {
    SessionCreated {
        session_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        facilitator_token: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        participant_token: Option<String>,
    },
    ChoiceAdded {
        id: ChoiceId,
        label: String,
    },
    ParticipantAdded {
        id: ParticipantId,
        name: String,
    },
    BallotSubmitted {
        participant_id: ParticipantId,
        ranking: Vec<ChoiceId>,
        permit_count: usize,
    },
    AnalysisRun(Analysis),
    OutcomeRecorded(DiscussionOutcome),
    SublatedAdded {
        id: ChoiceId,
        label: String,
        sources: Vec<ChoiceId>,
    },
    Restarted {
        retain: Vec<ChoiceId>,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::SessionCreated { .. } => "SessionCreated",
            EventKind::ChoiceAdded { .. } => "ChoiceAdded",
            EventKind::ParticipantAdded { .. } => "ParticipantAdded",
            EventKind::BallotSubmitted { .. } => "BallotSubmitted",
            EventKind::AnalysisRun(_) => "AnalysisRun",
            EventKind::OutcomeRecorded(_) => "OutcomeRecorded",
            EventKind::SublatedAdded { .. } => "SublatedAdded",
            EventKind::Restarted { .. } => "Restarted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub timestamp: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl Event {
    pub fn new(seq: u64, kind: EventKind) -> Self {
        Event {
            seq,
            timestamp: Utc::now(),
            idempotency_key: None,
            kind,
        }
    }

    pub fn with_idempotency_key(mut self, key: Option<String>) -> Self {
        self.idempotency_key = key;
        self
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("log is empty: missing SessionCreated")]
    Empty,
    #[error("line {line}: missing SessionCreated (found {found})")]
    MissingSessionCreated { line: usize, found: &'static str },
    #[error("line {line}: unreadable event: {message}")]
    Corrupt { line: usize, message: String },
    #[error("line {line}: expected seq {expected}, found {found}")]
    SeqGap {
        line: usize,
        expected: u64,
        found: u64,
    },
    #[error("line {line}: SessionCreated may only open a log")]
    DuplicateCreation { line: usize },
    #[error("line {line}: {kind} rejected: {error}")]
    Rejected {
        line: usize,
        kind: &'static str,
        error: Error,
    },
    #[error("line {line}: sublated choice recorded as `{recorded}` but replays as `{replayed}`")]
    IdMismatch {
        line: usize,
        recorded: ChoiceId,
        replayed: ChoiceId,
    },
}

impl ReplayError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ReplayError::Empty => None,
            ReplayError::MissingSessionCreated { line, .. }
            | ReplayError::Corrupt { line, .. }
            | ReplayError::SeqGap { line, .. }
            | ReplayError::DuplicateCreation { line }
            | ReplayError::Rejected { line, .. }
            | ReplayError::IdMismatch { line, .. } => Some(*line),
        }
    }
}

/// Applies one non-creation event to a state.
pub fn apply(state: &SessionState, kind: &EventKind) -> Result<SessionState, Error> {
    match kind {
        EventKind::SessionCreated { .. } => unreachable!("handled by replay"),
        EventKind::ChoiceAdded { id, label } => state.add_choice(Choice::original(id.clone(), label.clone())),
        EventKind::ParticipantAdded { id, name } => state.add_participant(id.clone(), name.clone()),
        EventKind::BallotSubmitted {
            participant_id,
            ranking,
            permit_count,
        } => state.submit_ballot(
            participant_id,
            Ballot {
                ranking: ranking.clone(),
                permit_count: *permit_count,
            },
        ),
        EventKind::AnalysisRun(Analysis::Pma) => state.start(),
        EventKind::AnalysisRun(Analysis::Cce(options)) => state.run_cce(options),
        EventKind::OutcomeRecorded(outcome) => state.record_outcome(outcome.clone()),
        EventKind::SublatedAdded { label, sources, .. } => state.add_sublated_choice(label.clone(), sources),
        EventKind::Restarted { retain } => state.restart_with_sublated(retain),
    }
}

/// Folds a gap-free log into the session state it describes. Event `i`
/// (0-based) is reported as line `i + 1`.
pub fn replay(events: &[Event]) -> Result<SessionState, ReplayError> {
    let first = events.first().ok_or(ReplayError::Empty)?;
    if !matches!(first.kind, EventKind::SessionCreated { .. }) {
        return Err(ReplayError::MissingSessionCreated {
            line: 1,
            found: first.kind.name(),
        });
    }
    let mut state = SessionState::new();
    for (i, event) in events.iter().enumerate() {
        let line = i + 1;
        let expected = line as u64;
        if event.seq != expected {
            return Err(ReplayError::SeqGap {
                line,
                expected,
                found: event.seq,
            });
        }
        if i == 0 {
            continue;
        }
        if matches!(event.kind, EventKind::SessionCreated { .. }) {
            return Err(ReplayError::DuplicateCreation { line });
        }
        if let EventKind::SublatedAdded { id, .. } = &event.kind {
            let replayed = state.next_sublated_id();
            if &replayed != id {
                return Err(ReplayError::IdMismatch {
                    line,
                    recorded: id.clone(),
                    replayed,
                });
            }
        }
        state = apply(&state, &event.kind).map_err(|error| ReplayError::Rejected {
            line,
            kind: event.kind.name(),
            error,
        })?;
    }
    Ok(state)
}

/// Reads a JSON-lines log. Blank lines are not allowed; every line must hold
/// one event.
pub fn read_log(reader: impl BufRead) -> Result<Vec<Event>, ReplayError> {
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|e| ReplayError::Corrupt {
            line: line_no,
            message: e.to_string(),
        })?;
        let event: Event = serde_json::from_str(&text).map_err(|e| ReplayError::Corrupt {
            line: line_no,
            message: e.to_string(),
        })?;
        events.push(event);
    }
    Ok(events)
}
