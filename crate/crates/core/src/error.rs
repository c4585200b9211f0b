use std::fmt;

use thiserror::Error;

use crate::model::{ChoiceId, ParticipantId};
use crate::process::Phase;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A single broken profile invariant. Validation reports every one it finds.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("profile has no choices")]
    NoChoices,
    #[error("profile has no participants")]
    NoParticipants,
    #[error("empty choice id at position {0}")]
    EmptyChoiceId(usize),
    #[error("empty participant id at position {0}")]
    EmptyParticipantId(usize),
    #[error("duplicate choice id `{0}`")]
    DuplicateChoice(ChoiceId),
    #[error("duplicate participant id `{0}`")]
    DuplicateParticipant(ParticipantId),
    #[error("sublated choice `{choice}` is invalid: {reason}")]
    InvalidSublated { choice: ChoiceId, reason: String },
    #[error("participant `{participant}`: ranking not a permutation ({detail})")]
    RankingNotPermutation {
        participant: ParticipantId,
        detail: String,
    },
    #[error("participant `{participant}`: permit_count {permit_count} outside [1, {n}]")]
    PermitCountOutOfRange {
        participant: ParticipantId,
        permit_count: usize,
        n: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid profile: {}", Joined(.0))]
    InvalidProfile(Vec<Violation>),
    #[error("malformed profile document: {0}")]
    Parse(String),
    #[error("ballots missing for: {}", Joined(.0))]
    MissingBallots(Vec<ParticipantId>),
    #[error("unknown choice `{0}`")]
    UnknownChoice(ChoiceId),
    #[error("unknown participant `{0}`")]
    UnknownParticipant(ParticipantId),
    #[error("choice `{0}` already exists")]
    DuplicateChoice(ChoiceId),
    #[error("participant `{0}` already exists")]
    DuplicateParticipant(ParticipantId),
    #[error("rankings are over different choice sets")]
    MismatchedChoiceSets,
    #[error("not a permutation: {0}")]
    NotAPermutation(String),
    #[error("invalid weights (w_mu={w_mu}, w_sigma={w_sigma}): both must be finite, non-negative and not both zero")]
    InvalidWeights { w_mu: f64, w_sigma: f64 },
    #[error("{n} choices exceed the exhaustive search limit of {limit}; enable the explicit override or reduce choices")]
    TooManyChoices { n: usize, limit: usize },
    #[error("search limit {0} is above the hard maximum of {max}", max = crate::cce::HARD_CHOICE_LIMIT)]
    LimitAboveMaximum(usize),
    #[error("row limit must be positive")]
    ZeroLimit,
    #[error("expansion table would have {rows} rows, more than the cap of {cap}; table too large")]
    TableTooLarge { rows: u128, cap: usize },
    #[error("oracle search space of {size} vectors exceeds the guard of {guard}")]
    SearchSpaceTooLarge { size: u128, guard: u128 },
    #[error("`{operation}` is not allowed in phase {phase}")]
    WrongPhase {
        operation: &'static str,
        phase: Phase,
    },
    #[error("ballots have been submitted; the choice set is frozen for this generation")]
    BallotsAlreadySubmitted,
    #[error("a consensus outcome must name a choice")]
    ConsensusWithoutChoice,
    #[error("a sublated choice needs at least two distinct sources")]
    TooFewSources,
    #[error("source `{0}` is not among the current candidates")]
    SourceNotCandidate(ChoiceId),
    #[error("a choice labelled `{0}` already exists")]
    DuplicateLabel(String),
    #[error("restart needs at least two choices in the new pool, got {0}")]
    TooFewRetained(usize),
}

impl Error {
    /// Violations carried by a profile or ballot validation failure.
    pub fn violations(&self) -> &[Violation] {
        match self {
            Error::InvalidProfile(v) => v,
            _ => &[],
        }
    }
}

struct Joined<'a, T>(&'a [T]);

impl<T: fmt::Display> fmt::Display for Joined<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, item) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{item}")?;
        }
        Ok(())
    }
}
