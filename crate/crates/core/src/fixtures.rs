//! Worked-example profiles used throughout the tests, the guide and the CLI
//! fixture files.

use crate::model::{Ballot, Choice, Participant, Profile};

/// Choice labels for the nuclear-power deliberation profiles.
pub const NUCLEAR_CHOICES: [(&str, &str); 7] = [
    ("(1)", "Zero nuclear power plants by 2030"),
    ("(2)", "Nationalize and decommission nuclear power plants"),
    (
        "(3)",
        "No new plants; restarting is possible on the condition of safety and local consent",
    ),
    (
        "(4)",
        "No new plants; restarting is possible until alternative generation methods are established",
    ),
    (
        "(5)",
        "Restart plants intending to decommission them and develop next-generation plants",
    ),
    ("(6)", "Plants can be operated with emphasis on safety"),
    ("(7)", "Proactively utilize nuclear power plants"),
];

/// Builds a profile with choices labelled by their ids and participants
/// `p1, p2, ...`.
pub fn profile(choices: &[&str], ballots: &[(&[&str], usize)]) -> Profile {
    Profile {
        choices: choices.iter().map(|&c| Choice::original(c, c)).collect(),
        participants: ballots
            .iter()
            .enumerate()
            .map(|(i, (ranking, k))| Participant {
                id: format!("p{}", i + 1).into(),
                name: format!("Participant {}", i + 1),
                ballot: Some(Ballot::new(ranking.iter().copied(), *k)),
            })
            .collect(),
        ancestry: Vec::new(),
    }
}

fn nuclear(ballots: [([&str; 7], usize); 5]) -> Profile {
    Profile {
        choices: NUCLEAR_CHOICES
            .iter()
            .map(|&(id, label)| Choice::original(id, label))
            .collect(),
        participants: ballots
            .iter()
            .zip(["A", "B", "C", "D", "E"])
            .map(|((ranking, k), name)| Participant {
                id: name.into(),
                name: format!("Person {name}"),
                ballot: Some(Ballot::new(ranking.iter().copied(), *k)),
            })
            .collect(),
        ancestry: Vec::new(),
    }
}

/// Three participants over `a, b, c` with no common acceptable choice.
pub fn table1() -> Profile {
    profile(
        &["a", "b", "c"],
        &[
            (&["a", "b", "c"], 2),
            (&["b", "c", "a"], 1),
            (&["c", "a", "b"], 2),
        ],
    )
}

/// Three participants over `a, b, c, d` used for the replacement-count
/// walkthrough. Permissible counts are not part of that example; each is 2.
pub fn fig3() -> Profile {
    profile(
        &["a", "b", "c", "d"],
        &[
            (&["a", "b", "c", "d"], 2),
            (&["d", "a", "c", "b"], 2),
            (&["c", "d", "a", "b"], 2),
        ],
    )
}

/// The five-person trial ballots. Permissible counts of 2 each leave `(4)` as
/// the only commonly acceptable choice.
pub fn table5() -> Profile {
    nuclear([
        (["(5)", "(4)", "(3)", "(2)", "(1)", "(6)", "(7)"], 2),
        (["(4)", "(3)", "(2)", "(6)", "(1)", "(7)", "(5)"], 2),
        (["(4)", "(3)", "(2)", "(1)", "(5)", "(6)", "(7)"], 2),
        (["(5)", "(4)", "(3)", "(2)", "(1)", "(6)", "(7)"], 2),
        (["(4)", "(2)", "(1)", "(3)", "(5)", "(6)", "(7)"], 2),
    ])
}

/// The conflict scenario: no choice is acceptable to everyone.
pub fn table7() -> Profile {
    nuclear([
        (["(5)", "(4)", "(3)", "(2)", "(1)", "(6)", "(7)"], 5),
        (["(4)", "(3)", "(2)", "(6)", "(1)", "(7)", "(5)"], 4),
        (["(7)", "(6)", "(2)", "(1)", "(4)", "(3)", "(5)"], 4),
        (["(5)", "(4)", "(3)", "(2)", "(1)", "(6)", "(7)"], 4),
        (["(6)", "(7)", "(1)", "(5)", "(3)", "(4)", "(2)"], 4),
    ])
}
