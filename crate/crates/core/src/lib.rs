//! Group-decision engine for facilitated consensus building.
//!
//! Participants rank every choice and say how many of their top choices they
//! can accept. From those ballots the engine offers three kinds of help:
//!
//! - [`pma`] finds the choices everyone can be brought to accept with the
//!   least total widening of their acceptable ranges;
//! - [`cce`] searches every common order for the one that asks the least,
//!   and most evenly shared, reordering of the participants;
//! - [`process`] strings both into a facilitated sequence of discussions,
//!   ending with facilitator-authored "sublated" choices that synthesize the
//!   candidates when neither analysis produced agreement.
//!
//! [`events`] turns that sequence into an append-only log that replays to
//! the same state.
//!
//! ```
//! use concord_core::{fixtures, model::validate_profile, pma, cce, model::Weights};
//!
//! let profile = validate_profile(fixtures::table7()).unwrap();
//! let meeting = pma::analyze(&profile).unwrap();
//! assert_eq!(meeting.consensus_choices[0].as_str(), "(1)");
//!
//! let compromise = cce::search_full(&profile, &Weights::default()).unwrap();
//! assert_eq!(compromise.consensus_choices[0].as_str(), "(4)");
//! ```

pub mod cce;
mod error;
pub mod events;
pub mod fixtures;
pub mod model;
pub mod pma;
pub mod process;

pub use error::{Error, Result, Violation};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/profiles.md")]
    mod profiles {}
    #[doc = include_str!("../../../book/src/distance.md")]
    mod distance {}
    #[doc = include_str!("../../../book/src/permissible.md")]
    mod permissible {}
    #[doc = include_str!("../../../book/src/compromise.md")]
    mod compromise {}
    #[doc = include_str!("../../../book/src/process.md")]
    mod process {}
    #[doc = include_str!("../../../book/src/events.md")]
    mod events {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/api.md")]
    mod api {}
}
