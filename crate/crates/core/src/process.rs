//! The composite consensus-building process.
//!
//! ```text
//! Draft ──start──▶ PmaDiscussion ──no──▶ CceReady ──run_cce──▶ CceDiscussion ──no──▶ SccRound(1)
//!                       │ yes                                      │ yes                 │ add_sublated
//!                       ▼                                          ▼                     ▼
//!                   Concluded                                  Concluded          SccDiscussion(r)
//!                                                                     yes ◀──────────┤ no ──▶ SccRound(r+1)
//!                                                                                    │ restart
//!                                                                                    ▼
//!                                                                         Draft (next generation)
//! ```
//!
//! Discussion happens between people; the engine only records its structured
//! outcome and moves to the next step. [`SessionState`] is a value: every
//! operation returns a new state and leaves the receiver untouched.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cce::{self, CceResult, SearchOptions};
use crate::error::{Error, Result};
use crate::model::{
    validate_ballot, validate_profile, Ballot, Choice, ChoiceId, Origin, Participant,
    ParticipantId, Profile, ValidatedProfile,
};
use crate::pma::{self, PmaResult};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    /// Collecting choices, participants and ballots.
    Draft,
    PmaDiscussion,
    CceReady,
    CceDiscussion,
    SccRound(u32),
    SccDiscussion(u32),
    Concluded(ChoiceId),
}

impl Phase {
    pub fn is_discussion(&self) -> bool {
        matches!(
            self,
            Phase::PmaDiscussion | Phase::CceDiscussion | Phase::SccDiscussion(_)
        )
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Phase::Concluded(_))
    }

    /// Operations the engine accepts in this phase.
    pub fn actions(&self) -> &'static [&'static str] {
        match self {
            Phase::Draft => &["add_choice", "add_participant", "submit_ballot", "start"],
            Phase::PmaDiscussion => &["record_outcome"],
            Phase::CceReady => &["run_cce"],
            Phase::CceDiscussion => &["record_outcome", "run_cce"],
            Phase::SccRound(_) => &["add_sublated_choice"],
            Phase::SccDiscussion(_) => &[
                "record_outcome",
                "add_sublated_choice",
                "restart_with_sublated",
            ],
            Phase::Concluded(_) => &[],
        }
    }

    fn scc_round(&self) -> Option<u32> {
        match self {
            Phase::SccRound(r) | Phase::SccDiscussion(r) => Some(*r),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Draft => f.write_str("Draft"),
            Phase::PmaDiscussion => f.write_str("PmaDiscussion"),
            Phase::CceReady => f.write_str("CceReady"),
            Phase::CceDiscussion => f.write_str("CceDiscussion"),
            Phase::SccRound(r) => write!(f, "SccRound({r})"),
            Phase::SccDiscussion(r) => write!(f, "SccDiscussion({r})"),
            Phase::Concluded(c) => write!(f, "Concluded({c})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscussionOutcome {
    pub consensus: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice: Option<ChoiceId>,
    #[serde(default)]
    pub note: String,
}

impl DiscussionOutcome {
    pub fn agreed(choice: impl Into<ChoiceId>, note: impl Into<String>) -> Self {
        DiscussionOutcome {
            consensus: true,
            choice: Some(choice.into()),
            note: note.into(),
        }
    }

    pub fn no_consensus(note: impl Into<String>) -> Self {
        DiscussionOutcome {
            consensus: false,
            choice: None,
            note: note.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub generation: u32,
    pub phase: Phase,
    pub outcome: DiscussionOutcome,
}

/// Choices offered for synthesis in one SCC round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SccCandidates {
    pub round: u32,
    /// Choices in the `round` cheapest widening-cost tiers.
    pub from_pma: Vec<ChoiceId>,
    /// The top `round + 1` positions of every order in the `round` lowest
    /// score tiers.
    pub from_cce: Vec<ChoiceId>,
    /// `from_pma` then `from_cce`, without repeats.
    pub union: Vec<ChoiceId>,
    /// Every choice is already a candidate; widening further adds nothing.
    pub exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    generation: u32,
    profile: Profile,
    phase: Phase,
    pma: Option<PmaResult>,
    cce: Option<CceResult>,
    cce_options: Option<SearchOptions>,
    outcomes: Vec<OutcomeRecord>,
    sublated: Vec<Choice>,
    scc_rounds: Vec<SccCandidates>,
}

impl Default for SessionState {
    fn default() -> Self {
        SessionState::from_profile(Profile::default())
    }
}

/// Runs the permissible-range analysis on a complete profile and opens its
/// discussion.
pub fn start(profile: &ValidatedProfile) -> Result<SessionState> {
    SessionState::from_profile(profile.profile().clone()).start()
}

impl SessionState {
    pub fn new() -> Self {
        Self::default()
    }

    /// A draft session over an existing (possibly partial) profile.
    pub fn from_profile(profile: Profile) -> Self {
        SessionState {
            generation: 0,
            profile,
            phase: Phase::Draft,
            pma: None,
            cce: None,
            cce_options: None,
            outcomes: Vec::new(),
            sublated: Vec::new(),
            scc_rounds: Vec::new(),
        }
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn phase(&self) -> &Phase {
        &self.phase
    }

    pub fn pma(&self) -> Option<&PmaResult> {
        self.pma.as_ref()
    }

    pub fn cce(&self) -> Option<&CceResult> {
        self.cce.as_ref()
    }

    pub fn cce_options(&self) -> Option<&SearchOptions> {
        self.cce_options.as_ref()
    }

    pub fn outcomes(&self) -> &[OutcomeRecord] {
        &self.outcomes
    }

    pub fn sublated(&self) -> &[Choice] {
        &self.sublated
    }

    /// Candidate sets of every SCC round of the current generation.
    pub fn scc_history(&self) -> &[SccCandidates] {
        &self.scc_rounds
    }

    /// Ranked choices plus sublated choices created this generation.
    pub fn current_choices(&self) -> impl Iterator<Item = &Choice> {
        self.profile.choices.iter().chain(&self.sublated)
    }

    fn knows_choice(&self, id: &ChoiceId) -> bool {
        self.current_choices().any(|c| &c.id == id)
    }

    fn require(&self, operation: &'static str, ok: bool) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::WrongPhase {
                operation,
                phase: self.phase.clone(),
            })
        }
    }

    /// Validated view of the current generation's profile.
    pub fn validated_profile(&self) -> Result<ValidatedProfile> {
        ValidatedProfile::try_from(self.profile.clone())
    }

    pub fn add_choice(&self, choice: Choice) -> Result<SessionState> {
        self.require("add_choice", self.phase == Phase::Draft)?;
        if self.profile.participants.iter().any(|p| p.ballot.is_some()) {
            return Err(Error::BallotsAlreadySubmitted);
        }
        if self.knows_choice(&choice.id) || self.profile.ancestry.iter().any(|c| c.id == choice.id) {
            return Err(Error::DuplicateChoice(choice.id));
        }
        let mut next = self.clone();
        next.profile.choices.push(choice);
        Ok(next)
    }

    pub fn add_participant(&self, id: ParticipantId, name: impl Into<String>) -> Result<SessionState> {
        self.require("add_participant", self.phase == Phase::Draft)?;
        if self.profile.participant(&id).is_some() {
            return Err(Error::DuplicateParticipant(id));
        }
        let mut next = self.clone();
        next.profile.participants.push(Participant {
            id,
            name: name.into(),
            ballot: None,
        });
        Ok(next)
    }

    /// Stores (or replaces) a participant's ballot over the current choices.
    pub fn submit_ballot(&self, participant: &ParticipantId, ballot: Ballot) -> Result<SessionState> {
        self.require("submit_ballot", self.phase == Phase::Draft)?;
        let at = self
            .profile
            .participants
            .iter()
            .position(|p| &p.id == participant)
            .ok_or_else(|| Error::UnknownParticipant(participant.clone()))?;
        validate_ballot(participant, &ballot, &self.profile.choices).map_err(Error::InvalidProfile)?;
        let mut next = self.clone();
        next.profile.participants[at].ballot = Some(ballot);
        Ok(next)
    }

    pub fn start(&self) -> Result<SessionState> {
        self.require("start", self.phase == Phase::Draft)?;
        let profile = self.validated_profile()?;
        let result = pma::analyze(&profile)?;
        let mut next = self.clone();
        next.pma = Some(result);
        next.phase = Phase::PmaDiscussion;
        Ok(next)
    }

    /// Runs the compromise search. Allowed again during its discussion so the
    /// weights can be retuned.
    pub fn run_cce(&self, options: &SearchOptions) -> Result<SessionState> {
        self.require(
            "run_cce",
            matches!(self.phase, Phase::CceReady | Phase::CceDiscussion),
        )?;
        let profile = self.validated_profile()?;
        let result = cce::search_full_with(&profile, options)?;
        let mut next = self.clone();
        next.cce = Some(result);
        next.cce_options = Some(*options);
        next.phase = Phase::CceDiscussion;
        Ok(next)
    }

    pub fn record_outcome(&self, outcome: DiscussionOutcome) -> Result<SessionState> {
        self.require("record_outcome", self.phase.is_discussion())?;
        let mut next = self.clone();
        if outcome.consensus {
            let choice = outcome.choice.clone().ok_or(Error::ConsensusWithoutChoice)?;
            if !self.knows_choice(&choice) {
                return Err(Error::UnknownChoice(choice));
            }
            next.phase = Phase::Concluded(choice);
        } else {
            next.phase = match self.phase {
                Phase::PmaDiscussion => Phase::CceReady,
                Phase::CceDiscussion => Phase::SccRound(1),
                Phase::SccDiscussion(r) => Phase::SccRound(r + 1),
                _ => unreachable!("checked above"),
            };
            if let Phase::SccRound(r) = next.phase {
                let candidates = self.compute_candidates(r)?;
                next.scc_rounds.push(candidates);
            }
        }
        next.outcomes.push(OutcomeRecord {
            generation: self.generation,
            phase: self.phase.clone(),
            outcome,
        });
        Ok(next)
    }

    /// Candidates of the current SCC round.
    pub fn scc_candidates(&self) -> Result<&SccCandidates> {
        let round = self.phase.scc_round();
        self.require("scc_candidates", round.is_some())?;
        let round = round.expect("checked");
        Ok(self
            .scc_rounds
            .iter()
            .find(|c| c.round == round)
            .expect("candidates recorded on entering the round"))
    }

    fn compute_candidates(&self, round: u32) -> Result<SccCandidates> {
        let profile = self.validated_profile()?;
        let tiers = round as usize;

        let mut costs = pma::expansion_costs(&profile)?;
        costs.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        let mut levels: Vec<usize> = costs.iter().map(|c| c.1).collect();
        levels.dedup();
        levels.truncate(tiers);
        let from_pma: Vec<ChoiceId> = costs
            .into_iter()
            .filter(|(_, cost)| levels.contains(cost))
            .map(|(id, _)| id)
            .collect();

        let options = self.cce_options.unwrap_or_default();
        let options = SearchOptions {
            max_choices: options.max_choices.max(profile.n()).min(cce::HARD_CHOICE_LIMIT),
            ..options
        };
        let depth = (tiers + 1).min(profile.n());
        let mut from_cce: Vec<ChoiceId> = Vec::new();
        for tier in cce::score_tiers(&profile, &options, tiers)? {
            for scored in tier {
                for id in &scored.order[..depth] {
                    if !from_cce.contains(id) {
                        from_cce.push(id.clone());
                    }
                }
            }
        }

        let mut union = from_pma.clone();
        for id in &from_cce {
            if !union.contains(id) {
                union.push(id.clone());
            }
        }
        Ok(SccCandidates {
            round,
            exhausted: union.len() == profile.n(),
            from_pma,
            from_cce,
            union,
        })
    }

    /// Adds a facilitator-authored choice synthesized from current candidates.
    pub fn add_sublated_choice(
        &self,
        label: impl Into<String>,
        sources: &[ChoiceId],
    ) -> Result<SessionState> {
        let label = label.into();
        let round = self.phase.scc_round();
        self.require("add_sublated_choice", round.is_some())?;
        let distinct: HashSet<&ChoiceId> = sources.iter().collect();
        if distinct.len() < 2 || distinct.len() != sources.len() {
            return Err(Error::TooFewSources);
        }
        let candidates = self.scc_candidates()?;
        if let Some(s) = sources.iter().find(|s| !candidates.union.contains(s)) {
            return Err(Error::SourceNotCandidate((*s).clone()));
        }
        if self.current_choices().any(|c| c.label == label) {
            return Err(Error::DuplicateLabel(label));
        }
        let id = self.next_sublated_id();
        let mut next = self.clone();
        next.sublated.push(Choice {
            id,
            label,
            origin: Origin::Sublated(sources.to_vec()),
        });
        next.phase = Phase::SccDiscussion(round.expect("checked"));
        Ok(next)
    }

    /// Id the next sublated choice will receive.
    pub fn next_sublated_id(&self) -> ChoiceId {
        let taken: HashSet<&ChoiceId> = self
            .current_choices()
            .chain(&self.profile.ancestry)
            .map(|c| &c.id)
            .collect();
        (1..)
            .map(|k| ChoiceId::new(format!("s{k}")))
            .find(|id| !taken.contains(id))
            .expect("unbounded id space")
    }

    /// Opens a new generation over the sublated choices plus any retained
    /// current choices. Everyone must rank the new set afresh.
    pub fn restart_with_sublated(&self, retain: &[ChoiceId]) -> Result<SessionState> {
        self.require(
            "restart_with_sublated",
            matches!(self.phase, Phase::SccDiscussion(_)),
        )?;
        if let Some(unknown) = retain.iter().find(|id| !self.knows_choice(id)) {
            return Err(Error::UnknownChoice(unknown.clone()));
        }
        let pool: Vec<Choice> = self
            .profile
            .choices
            .iter()
            .filter(|c| retain.contains(&c.id))
            .chain(&self.sublated)
            .cloned()
            .collect();
        if pool.len() < 2 {
            return Err(Error::TooFewRetained(pool.len()));
        }
        let mut ancestry = self.profile.ancestry.clone();
        ancestry.extend(
            self.profile
                .choices
                .iter()
                .filter(|c| !retain.contains(&c.id))
                .cloned(),
        );
        let participants = self
            .profile
            .participants
            .iter()
            .map(|p| Participant {
                ballot: None,
                ..p.clone()
            })
            .collect();
        Ok(SessionState {
            generation: self.generation + 1,
            profile: Profile {
                choices: pool,
                participants,
                ancestry,
            },
            phase: Phase::Draft,
            pma: None,
            cce: None,
            cce_options: None,
            outcomes: self.outcomes.clone(),
            sublated: Vec::new(),
            scc_rounds: Vec::new(),
        })
    }
}

/// Validates `profile` and starts a session on it.
pub fn start_profile(profile: Profile) -> Result<SessionState> {
    let profile = validate_profile(profile).map_err(Error::InvalidProfile)?;
    start(&profile)
}
