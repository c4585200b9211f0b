//! Domain types, profile validation and the ranking-distance primitives
//! shared by both analyses.

mod distance;
mod profile;

pub use distance::{apply_rule, inversion_count, kendall_distance};
pub(crate) use distance::merge_count;
pub(crate) use profile::Electorate;
pub use profile::{
    validate_ballot, validate_profile, Ballot, Choice, ChoiceId, Origin, Participant,
    ParticipantId, Profile, ValidatedProfile, Weights,
};
