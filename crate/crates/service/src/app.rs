use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use concord_core::cce::{SearchOptions, DEFAULT_CHOICE_LIMIT};
use concord_core::events::{replay, Event, EventKind};
use concord_core::model::Participant;
use concord_core::process::{SccCandidates, SessionState};
use serde::Serialize;
use tokio::sync::Mutex;

use crate::error::ApiError;
use crate::store::{FileStore, LoadError};

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    /// Choice limit for the compromise search.
    pub cce_limit: usize,
    /// Require bearer tokens and separate facilitator from participant access.
    pub auth: bool,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        ServiceOptions {
            cce_limit: DEFAULT_CHOICE_LIMIT,
            auth: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Facilitator,
    Participant,
}

#[derive(Debug)]
pub struct SessionRecord {
    pub session_id: String,
    pub events: Vec<Event>,
    pub state: SessionState,
    facilitator_token: Option<String>,
    participant_token: Option<String>,
}

impl SessionRecord {
    fn from_events(session_id: String, events: Vec<Event>) -> Result<Self, concord_core::events::ReplayError> {
        let state = replay(&events)?;
        let (facilitator_token, participant_token) = match &events[0].kind {
            EventKind::SessionCreated {
                facilitator_token,
                participant_token,
                ..
            } => (facilitator_token.clone(), participant_token.clone()),
            _ => unreachable!("replay checked the first event"),
        };
        Ok(SessionRecord {
            session_id,
            events,
            state,
            facilitator_token,
            participant_token,
        })
    }

    pub fn seq(&self) -> u64 {
        self.events.len() as u64
    }

    fn has_key(&self, key: &str) -> bool {
        self.events
            .iter()
            .any(|e| e.idempotency_key.as_deref() == Some(key))
    }

    pub fn role(&self, token: Option<&str>, auth: bool) -> Result<Role, ApiError> {
        if !auth {
            return Ok(Role::Facilitator);
        }
        let token = token.ok_or_else(|| {
            ApiError::new(axum::http::StatusCode::UNAUTHORIZED, "bearer token required")
        })?;
        if Some(token) == self.facilitator_token.as_deref() {
            Ok(Role::Facilitator)
        } else if Some(token) == self.participant_token.as_deref() {
            Ok(Role::Participant)
        } else {
            Err(ApiError::new(axum::http::StatusCode::UNAUTHORIZED, "unknown token"))
        }
    }

    pub fn view(&self, role: Role) -> SessionView<'_> {
        let state = &self.state;
        SessionView {
            session_id: &self.session_id,
            seq: self.seq(),
            generation: state.generation(),
            phase: state.phase().to_string(),
            phase_detail: state.phase(),
            actions: state.phase().actions(),
            choices: state.current_choices().collect(),
            participants: state
                .profile()
                .participants
                .iter()
                .map(|p| ParticipantView::new(p, role))
                .collect(),
            pma: state.pma(),
            cce: state.cce(),
            cce_options: state.cce_options(),
            scc: state.scc_candidates().ok(),
            scc_history: state.scc_history(),
            outcomes: state.outcomes(),
        }
    }
}

#[derive(Serialize)]
pub struct SessionView<'a> {
    pub session_id: &'a str,
    pub seq: u64,
    pub generation: u32,
    pub phase: String,
    pub phase_detail: &'a concord_core::process::Phase,
    pub actions: &'static [&'static str],
    pub choices: Vec<&'a concord_core::model::Choice>,
    pub participants: Vec<ParticipantView<'a>>,
    pub pma: Option<&'a concord_core::pma::PmaResult>,
    pub cce: Option<&'a concord_core::cce::CceResult>,
    pub cce_options: Option<&'a SearchOptions>,
    pub scc: Option<&'a SccCandidates>,
    pub scc_history: &'a [SccCandidates],
    pub outcomes: &'a [concord_core::process::OutcomeRecord],
}

#[derive(Serialize)]
pub struct ParticipantView<'a> {
    pub id: &'a concord_core::model::ParticipantId,
    pub name: &'a str,
    pub ballot_submitted: bool,
    /// Omitted for participant-role readers.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ballot: Option<&'a concord_core::model::Ballot>,
}

impl<'a> ParticipantView<'a> {
    fn new(p: &'a Participant, role: Role) -> Self {
        ParticipantView {
            id: &p.id,
            name: &p.name,
            ballot_submitted: p.ballot.is_some(),
            ballot: match role {
                Role::Facilitator => p.ballot.as_ref(),
                Role::Participant => None,
            },
        }
    }
}

/// Live sessions plus logs that failed to load.
pub struct AppState {
    pub store: FileStore,
    pub options: ServiceOptions,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionRecord>>>>,
    broken: RwLock<HashMap<String, String>>,
}

pub type SharedState = Arc<AppState>;

impl AppState {
    /// Opens the store and replays every log in it. Logs that fail to replay
    /// are kept out of service and reported on access.
    pub fn load(store: FileStore, options: ServiceOptions) -> std::io::Result<Self> {
        let mut sessions = HashMap::new();
        let mut broken = HashMap::new();
        for id in store.session_ids()? {
            let loaded = store.load(&id).and_then(|events| {
                SessionRecord::from_events(id.clone(), events).map_err(|source| LoadError::Corrupt {
                    path: store.path(&id),
                    source,
                })
            });
            match loaded {
                Ok(record) => {
                    sessions.insert(id, Arc::new(Mutex::new(record)));
                }
                Err(e) => {
                    tracing::error!("refusing to load session {id}: {e}");
                    broken.insert(id, e.to_string());
                }
            }
        }
        Ok(AppState {
            store,
            options,
            sessions: RwLock::new(sessions),
            broken: RwLock::new(broken),
        })
    }

    pub fn session(&self, id: &str) -> Result<Arc<Mutex<SessionRecord>>, ApiError> {
        if let Some(s) = self.sessions.read().expect("registry lock").get(id) {
            return Ok(s.clone());
        }
        match self.broken.read().expect("registry lock").get(id) {
            Some(diag) => Err(ApiError::internal(format!("session log corrupt: {diag}"))),
            None => Err(ApiError::not_found(format!("unknown session `{id}`"))),
        }
    }

    pub fn create(&self, key: Option<String>) -> Result<(String, String, String), ApiError> {
        let session_id = uuid::Uuid::new_v4().simple().to_string();
        let facilitator = uuid::Uuid::new_v4().simple().to_string();
        let participant = uuid::Uuid::new_v4().simple().to_string();
        let event = Event::new(
            1,
            EventKind::SessionCreated {
                session_id: session_id.clone(),
                facilitator_token: Some(facilitator.clone()),
                participant_token: Some(participant.clone()),
            },
        )
        .with_idempotency_key(key);
        self.store
            .append(&session_id, &event)
            .map_err(|e| ApiError::internal(format!("storage failure: {e}")))?;
        let record = SessionRecord::from_events(session_id.clone(), vec![event])
            .expect("a creation event replays");
        self.sessions
            .write()
            .expect("registry lock")
            .insert(session_id.clone(), Arc::new(Mutex::new(record)));
        Ok((session_id, facilitator, participant))
    }

    /// Applies one engine operation to a session under its lock, persisting
    /// the resulting event before the new state becomes visible.
    ///
    /// A request carrying an idempotency key that is already in the log is
    /// acknowledged without re-applying it.
    pub async fn mutate<F>(
        &self,
        session: &Arc<Mutex<SessionRecord>>,
        key: Option<String>,
        role: Role,
        op: F,
    ) -> Result<serde_json::Value, ApiError>
    where
        F: FnOnce(&SessionState) -> Result<(EventKind, SessionState), ApiError>,
    {
        let mut record = session.lock().await;
        if let Some(k) = key.as_deref() {
            if record.has_key(k) {
                return Ok(serde_json::to_value(record.view(role)).expect("view serializes"));
            }
        }
        let (kind, next) = op(&record.state)?;
        let event = Event::new(record.seq() + 1, kind).with_idempotency_key(key);
        self.store
            .append(&record.session_id, &event)
            .map_err(|e| ApiError::internal(format!("storage failure: {e}")))?;
        record.events.push(event);
        record.state = next;
        #[cfg(debug_assertions)]
        {
            let replayed = replay(&record.events).expect("log replays");
            debug_assert_eq!(replayed, record.state, "replay diverged from live state");
        }
        Ok(serde_json::to_value(record.view(role)).expect("view serializes"))
    }
}
