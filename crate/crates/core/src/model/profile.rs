use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

id_newtype!(
    /// Opaque, case-sensitive choice token.
    ChoiceId
);
id_newtype!(
    /// Opaque participant token.
    ParticipantId
);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Original,
    /// Synthesized from the contents of at least two existing choices.
    Sublated(Vec<ChoiceId>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub id: ChoiceId,
    pub label: String,
    pub origin: Origin,
}

impl Choice {
    pub fn original(id: impl Into<ChoiceId>, label: impl Into<String>) -> Self {
        Choice {
            id: id.into(),
            label: label.into(),
            origin: Origin::Original,
        }
    }
}

/// A strict ranking over every choice, most preferred first, and how many of
/// the top-ranked choices the participant currently accepts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ballot {
    pub ranking: Vec<ChoiceId>,
    pub permit_count: usize,
}

impl Ballot {
    pub fn new<I, C>(ranking: I, permit_count: usize) -> Self
    where
        I: IntoIterator<Item = C>,
        C: Into<ChoiceId>,
    {
        Ballot {
            ranking: ranking.into_iter().map(Into::into).collect(),
            permit_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub id: ParticipantId,
    pub name: String,
    pub ballot: Option<Ballot>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Profile {
    pub choices: Vec<Choice>,
    pub participants: Vec<Participant>,
    /// Choices from earlier session generations that sublated choices in
    /// `choices` were synthesized from. Not ranked, never analysed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ancestry: Vec<Choice>,
}

impl Profile {
    /// Parses the JSON profile document format.
    pub fn from_json(text: &str) -> Result<Profile> {
        let doc: ProfileDocument =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(doc.into())
    }

    /// Renders the profile in the JSON document format. Participants without a
    /// ballot are skipped, since the document requires one.
    pub fn to_json(&self) -> String {
        let doc = ProfileDocument {
            choices: self.choices.clone(),
            participants: self
                .participants
                .iter()
                .filter_map(|p| {
                    p.ballot.as_ref().map(|b| ParticipantEntry {
                        id: p.id.clone(),
                        name: p.name.clone(),
                        ranking: b.ranking.clone(),
                        permit_count: b.permit_count,
                    })
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("profile serializes")
    }

    pub fn choice(&self, id: &ChoiceId) -> Option<&Choice> {
        self.choices.iter().find(|c| &c.id == id)
    }

    pub fn participant(&self, id: &ParticipantId) -> Option<&Participant> {
        self.participants.iter().find(|p| &p.id == id)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDocument {
    choices: Vec<Choice>,
    participants: Vec<ParticipantEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParticipantEntry {
    id: ParticipantId,
    name: String,
    ranking: Vec<ChoiceId>,
    permit_count: usize,
}

impl From<ProfileDocument> for Profile {
    fn from(doc: ProfileDocument) -> Self {
        Profile {
            choices: doc.choices,
            participants: doc
                .participants
                .into_iter()
                .map(|p| Participant {
                    id: p.id,
                    name: p.name,
                    ballot: Some(Ballot {
                        ranking: p.ranking,
                        permit_count: p.permit_count,
                    }),
                })
                .collect(),
            ancestry: Vec::new(),
        }
    }
}

/// Relative weights of mean compromise and its spread in the order score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w_mu: f64,
    pub w_sigma: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            w_mu: 1.0,
            w_sigma: 1.0,
        }
    }
}

impl Weights {
    pub fn new(w_mu: f64, w_sigma: f64) -> Result<Self> {
        let w = Weights { w_mu, w_sigma };
        w.check()?;
        Ok(w)
    }

    pub fn check(&self) -> Result<()> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if ok(self.w_mu) && ok(self.w_sigma) && self.w_mu + self.w_sigma > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidWeights {
                w_mu: self.w_mu,
                w_sigma: self.w_sigma,
            })
        }
    }
}

/// Complete ballot data in index form, present once every participant has
/// submitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Electorate {
    /// `ranks[p][c]` is the 1-based rank participant `p` gives choice `c`.
    pub ranks: Vec<Vec<usize>>,
    /// `orders[p]` lists choice indices most-preferred first.
    pub orders: Vec<Vec<usize>>,
    pub permits: Vec<usize>,
}

/// A profile whose invariants have been checked, with rank lookups built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedProfile {
    profile: Profile,
    index: HashMap<ChoiceId, usize>,
    ranks: Vec<Option<Vec<usize>>>,
    electorate: Option<Electorate>,
}

impl ValidatedProfile {
    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn into_profile(self) -> Profile {
        self.profile
    }

    /// Number of choices.
    pub fn n(&self) -> usize {
        self.profile.choices.len()
    }

    /// Number of participants.
    pub fn m(&self) -> usize {
        self.profile.participants.len()
    }

    pub fn choices(&self) -> &[Choice] {
        &self.profile.choices
    }

    pub fn participants(&self) -> &[Participant] {
        &self.profile.participants
    }

    pub fn choice_index(&self, id: &ChoiceId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn choice_id(&self, index: usize) -> &ChoiceId {
        &self.profile.choices[index].id
    }

    /// 1-based rank of `choice` in participant `participant`'s ballot.
    pub fn rank(&self, participant: usize, choice: &ChoiceId) -> Option<usize> {
        let c = self.choice_index(choice)?;
        self.ranks.get(participant)?.as_ref().map(|r| r[c])
    }

    pub fn ballots_complete(&self) -> bool {
        self.electorate.is_some()
    }

    pub(crate) fn electorate(&self) -> Result<&Electorate> {
        self.electorate.as_ref().ok_or_else(|| {
            Error::MissingBallots(
                self.profile
                    .participants
                    .iter()
                    .filter(|p| p.ballot.is_none())
                    .map(|p| p.id.clone())
                    .collect(),
            )
        })
    }

    /// Ids in lexicographic order.
    pub(crate) fn sorted_ids(&self) -> Vec<ChoiceId> {
        let mut ids: Vec<ChoiceId> = self.profile.choices.iter().map(|c| c.id.clone()).collect();
        ids.sort();
        ids
    }
}

/// Checks every profile invariant, returning all violations found.
pub fn validate_profile(profile: Profile) -> std::result::Result<ValidatedProfile, Vec<Violation>> {
    let mut violations = Vec::new();
    let n = profile.choices.len();
    if n == 0 {
        violations.push(Violation::NoChoices);
    }
    if profile.participants.is_empty() {
        violations.push(Violation::NoParticipants);
    }

    let mut index = HashMap::with_capacity(n);
    for (i, choice) in profile.choices.iter().enumerate() {
        if choice.id.as_str().is_empty() {
            violations.push(Violation::EmptyChoiceId(i));
        } else if index.insert(choice.id.clone(), i).is_some() {
            violations.push(Violation::DuplicateChoice(choice.id.clone()));
        }
    }

    let known: HashSet<&ChoiceId> = profile
        .choices
        .iter()
        .chain(profile.ancestry.iter())
        .map(|c| &c.id)
        .collect();
    for choice in &profile.choices {
        if let Origin::Sublated(sources) = &choice.origin {
            let distinct: HashSet<&ChoiceId> = sources.iter().collect();
            let reason = if distinct.len() != sources.len() {
                Some("repeated source".to_owned())
            } else if sources.len() < 2 {
                Some("needs at least two sources".to_owned())
            } else if let Some(s) = sources.iter().find(|s| !known.contains(s)) {
                Some(format!("unknown source `{s}`"))
            } else if distinct.contains(&choice.id) {
                Some("cites itself".to_owned())
            } else {
                None
            };
            if let Some(reason) = reason {
                violations.push(Violation::InvalidSublated {
                    choice: choice.id.clone(),
                    reason,
                });
            }
        }
    }

    let mut seen = HashSet::new();
    let mut ranks = Vec::with_capacity(profile.participants.len());
    for (i, p) in profile.participants.iter().enumerate() {
        if p.id.as_str().is_empty() {
            violations.push(Violation::EmptyParticipantId(i));
        } else if !seen.insert(&p.id) {
            violations.push(Violation::DuplicateParticipant(p.id.clone()));
        }
        match &p.ballot {
            None => ranks.push(None),
            Some(ballot) => {
                let (rank, found) = check_ballot(&p.id, ballot, &index, n);
                violations.extend(found);
                ranks.push(rank);
            }
        }
    }

    if !violations.is_empty() {
        return Err(violations);
    }

    let electorate = if ranks.iter().all(Option::is_some) {
        let ranks: Vec<Vec<usize>> = ranks.iter().flatten().cloned().collect();
        let orders = profile
            .participants
            .iter()
            .map(|p| {
                p.ballot
                    .as_ref()
                    .expect("all ballots present")
                    .ranking
                    .iter()
                    .map(|id| index[id])
                    .collect()
            })
            .collect();
        let permits = profile
            .participants
            .iter()
            .map(|p| p.ballot.as_ref().expect("all ballots present").permit_count)
            .collect();
        Some(Electorate {
            ranks,
            orders,
            permits,
        })
    } else {
        None
    };

    Ok(ValidatedProfile {
        profile,
        index,
        ranks,
        electorate,
    })
}

/// Validates a single ballot against a choice set. Returns the rank table when
/// the ranking is a permutation.
fn check_ballot(
    participant: &ParticipantId,
    ballot: &Ballot,
    index: &HashMap<ChoiceId, usize>,
    n: usize,
) -> (Option<Vec<usize>>, Vec<Violation>) {
    let mut violations = Vec::new();
    let mut rank = vec![0usize; n];
    let mut problems = Vec::new();
    for (pos, id) in ballot.ranking.iter().enumerate() {
        match index.get(id) {
            None => problems.push(format!("unknown choice `{id}`")),
            Some(&c) if rank[c] != 0 => problems.push(format!("`{id}` ranked twice")),
            Some(&c) => rank[c] = pos + 1,
        }
    }
    let mut missing: Vec<&ChoiceId> = index
        .iter()
        .filter(|(_, &c)| rank[c] == 0)
        .map(|(id, _)| id)
        .collect();
    missing.sort();
    for id in missing {
        problems.push(format!("`{id}` missing"));
    }
    if !problems.is_empty() {
        violations.push(Violation::RankingNotPermutation {
            participant: participant.clone(),
            detail: problems.join(", "),
        });
    }
    if ballot.permit_count < 1 || ballot.permit_count > n {
        violations.push(Violation::PermitCountOutOfRange {
            participant: participant.clone(),
            permit_count: ballot.permit_count,
            n,
        });
    }
    let rank = if violations.is_empty() { Some(rank) } else { None };
    (rank, violations)
}

/// Validates a ballot against a bare choice list.
pub fn validate_ballot(
    participant: &ParticipantId,
    ballot: &Ballot,
    choices: &[Choice],
) -> std::result::Result<(), Vec<Violation>> {
    let index: HashMap<ChoiceId, usize> = choices
        .iter()
        .enumerate()
        .map(|(i, c)| (c.id.clone(), i))
        .collect();
    let (_, violations) = check_ballot(participant, ballot, &index, choices.len());
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

impl TryFrom<Profile> for ValidatedProfile {
    type Error = Error;

    fn try_from(profile: Profile) -> Result<Self> {
        validate_profile(profile).map_err(Error::InvalidProfile)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn table7_profile_is_valid() {
        let v = validate_profile(fixtures::table7()).unwrap();
        assert_eq!((v.n(), v.m()), (7, 5));
        assert!(v.ballots_complete());
        assert_eq!(v.rank(1, &"(1)".into()), Some(5));
    }

    #[test]
    fn minimal_profile() {
        let p = fixtures::profile(&["x"], &[(&["x"], 1)]);
        let v = validate_profile(p).unwrap();
        assert_eq!((v.n(), v.m()), (1, 1));
    }

    #[test]
    fn ranking_omitting_a_choice() {
        let p = fixtures::profile(&["a", "b", "c"], &[(&["a", "b"], 1)]);
        let errs = validate_profile(p).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].to_string().contains("ranking not a permutation"));
        assert!(errs[0].to_string().contains("`c` missing"));
    }

    #[test]
    fn reports_every_violation() {
        let mut p = fixtures::profile(
            &["a", "b", "a"],
            &[(&["a", "b", "z"], 0), (&["b", "a", "a"], 4)],
        );
        p.participants[1].id = p.participants[0].id.clone();
        let errs = validate_profile(p).unwrap_err();
        assert!(errs.contains(&Violation::DuplicateChoice("a".into())));
        assert!(errs.contains(&Violation::DuplicateParticipant("p1".into())));
        let permits = errs
            .iter()
            .filter(|v| matches!(v, Violation::PermitCountOutOfRange { .. }))
            .count();
        let perms = errs
            .iter()
            .filter(|v| matches!(v, Violation::RankingNotPermutation { .. }))
            .count();
        assert_eq!((permits, perms), (2, 2));
    }

    #[test]
    fn empty_profile() {
        let errs = validate_profile(Profile::default()).unwrap_err();
        assert_eq!(errs, vec![Violation::NoChoices, Violation::NoParticipants]);
    }

    #[test]
    fn sublated_sources_checked() {
        let mut p = fixtures::profile(&["a", "b", "s"], &[(&["a", "b", "s"], 1)]);
        p.choices[2].origin = Origin::Sublated(vec!["a".into()]);
        assert!(matches!(
            &validate_profile(p.clone()).unwrap_err()[0],
            Violation::InvalidSublated { .. }
        ));
        p.choices[2].origin = Origin::Sublated(vec!["a".into(), "q".into()]);
        assert!(validate_profile(p.clone()).is_err());
        p.ancestry.push(Choice::original("q", "old"));
        assert!(validate_profile(p).is_ok());
    }

    #[test]
    fn missing_ballot_is_not_a_violation() {
        let mut p = fixtures::profile(&["a", "b"], &[(&["a", "b"], 1), (&["b", "a"], 1)]);
        p.participants[1].ballot = None;
        let v = validate_profile(p).unwrap();
        assert!(!v.ballots_complete());
        assert_eq!(
            v.electorate().unwrap_err(),
            Error::MissingBallots(vec!["p2".into()])
        );
    }

    #[test]
    fn document_round_trip_and_unknown_fields() {
        let p = fixtures::table1();
        let back = Profile::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);

        let bad = r#"{"choices":[{"id":"a","label":"A","origin":"original"}],
            "participants":[{"id":"p","name":"P","ranking":["a"],"permit_count":1,"extra":1}]}"#;
        let err = Profile::from_json(bad).unwrap_err().to_string();
        assert!(err.contains("extra"), "{err}");
    }

    #[test]
    fn sublated_origin_document_form() {
        let text = r#"{"choices":[
            {"id":"a","label":"A","origin":"original"},
            {"id":"b","label":"B","origin":"original"},
            {"id":"s","label":"S","origin":{"sublated":["a","b"]}}],
            "participants":[{"id":"p","name":"P","ranking":["s","a","b"],"permit_count":2}]}"#;
        let p = Profile::from_json(text).unwrap();
        assert_eq!(p.choices[2].origin, Origin::Sublated(vec!["a".into(), "b".into()]));
        assert!(validate_profile(p).is_ok());
    }

    #[test]
    fn weights() {
        assert!(Weights::new(1.0, 0.0).is_ok());
        assert!(Weights::new(0.0, 0.0).is_err());
        assert!(Weights::new(-1.0, 2.0).is_err());
        assert!(Weights::new(f64::NAN, 1.0).is_err());
        assert_eq!(Weights::default(), Weights::new(1.0, 1.0).unwrap());
    }
}
