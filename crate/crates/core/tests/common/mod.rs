#![allow(dead_code)]

use concord_core::cce::SearchOptions;
use concord_core::events::{apply, Analysis, EventKind};
use concord_core::fixtures;
use concord_core::model::{kendall_distance, ChoiceId, Profile, ValidatedProfile};
use concord_core::process::{DiscussionOutcome, Phase, SessionState};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

pub fn choice_names(n: usize) -> Vec<String> {
    (0..n).map(|i| ((b'a' + i as u8) as char).to_string()).collect()
}

/// `m` random complete ballots over `n` choices `a, b, ...`.
pub fn random_profile(rng: &mut impl Rng, n: usize, m: usize) -> Profile {
    let names = choice_names(n);
    let ballots: Vec<(Vec<&str>, usize)> = (0..m)
        .map(|_| {
            let mut ranking: Vec<&str> = names.iter().map(String::as_str).collect();
            ranking.shuffle(rng);
            (ranking, rng.gen_range(1..=n))
        })
        .collect();
    let borrowed: Vec<(&[&str], usize)> = ballots.iter().map(|(r, k)| (r.as_slice(), *k)).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    fixtures::profile(&refs, &borrowed)
}

pub fn validated(profile: Profile) -> ValidatedProfile {
    ValidatedProfile::try_from(profile).expect("valid profile")
}

/// Every order minimizing the summed Kendall distance to the ballots, sorted.
pub fn kemeny_oracle(profile: &ValidatedProfile) -> (u64, Vec<Vec<ChoiceId>>) {
    let ids: Vec<ChoiceId> = profile.choices().iter().map(|c| c.id.clone()).collect();
    let mut best = u64::MAX;
    let mut orders = Vec::new();
    for order in permutations(&ids) {
        let total: u64 = profile
            .participants()
            .iter()
            .map(|p| kendall_distance(&p.ballot.as_ref().unwrap().ranking, &order).unwrap())
            .sum();
        if total < best {
            best = total;
            orders.clear();
        }
        if total == best {
            orders.push(order);
        }
    }
    orders.sort();
    (best, orders)
}

/// Session operations the model checker drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    SubmitBallots,
    Start,
    RunCce,
    Agree,
    Disagree,
    AddSublated,
    Restart,
}

pub const ACTIONS: [Action; 7] = [
    Action::SubmitBallots,
    Action::Start,
    Action::RunCce,
    Action::Agree,
    Action::Disagree,
    Action::AddSublated,
    Action::Restart,
];

impl Action {
    pub fn operation(self) -> &'static str {
        match self {
            Action::SubmitBallots => "submit_ballot",
            Action::Start => "start",
            Action::RunCce => "run_cce",
            Action::Agree | Action::Disagree => "record_outcome",
            Action::AddSublated => "add_sublated_choice",
            Action::Restart => "restart_with_sublated",
        }
    }
}

/// Three participants over `a, b, c`, no ballots yet.
pub fn draft_session() -> SessionState {
    let mut profile = fixtures::table1();
    for p in &mut profile.participants {
        p.ballot = None;
    }
    SessionState::from_profile(profile)
}

/// The events performing `action` on `state`. `None` when the action has no
/// sensible arguments in this state; the engine may still reject the events.
pub fn events_for(state: &SessionState, action: Action) -> Option<Vec<EventKind>> {
    let current: Vec<ChoiceId> = state.current_choices().map(|c| c.id.clone()).collect();
    Some(match action {
        Action::SubmitBallots => {
            let n = current.len();
            state
                .profile()
                .participants
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let mut ranking = current.clone();
                    ranking.rotate_left(i % n.max(1));
                    EventKind::BallotSubmitted {
                        participant_id: p.id.clone(),
                        ranking,
                        permit_count: 1,
                    }
                })
                .collect()
        }
        Action::Start => vec![EventKind::AnalysisRun(Analysis::Pma)],
        Action::RunCce => vec![EventKind::AnalysisRun(Analysis::Cce(SearchOptions::default()))],
        Action::Agree => vec![EventKind::OutcomeRecorded(DiscussionOutcome::agreed(
            current.last()?.clone(),
            "",
        ))],
        Action::Disagree => vec![EventKind::OutcomeRecorded(DiscussionOutcome::no_consensus(""))],
        Action::AddSublated => {
            let union = state.scc_candidates().ok()?.union.clone();
            let sources = if union.len() >= 2 {
                union[..2].to_vec()
            } else {
                current.iter().take(2).cloned().collect()
            };
            vec![EventKind::SublatedAdded {
                id: state.next_sublated_id(),
                label: format!("blend {}", state.next_sublated_id()),
                sources,
            }]
        }
        Action::Restart => vec![EventKind::Restarted {
            retain: state.profile().choices.iter().take(1).map(|c| c.id.clone()).collect(),
        }],
    })
}

/// Applies `action`, returning the new state and the events that produced it.
pub fn step(state: &SessionState, action: Action) -> Option<(SessionState, Vec<EventKind>)> {
    let events = events_for(state, action)?;
    let mut next = state.clone();
    for e in &events {
        next = apply(&next, e).ok()?;
    }
    Some((next, events))
}

/// The process's permitted phase transitions.
pub fn edge_allowed(from: &Phase, to: &Phase, action: Action) -> bool {
    use Phase::*;
    match (from, to) {
        (Draft, Draft) => action == Action::SubmitBallots,
        (Draft, PmaDiscussion) => action == Action::Start,
        (PmaDiscussion, Concluded(_)) => action == Action::Agree,
        (PmaDiscussion, CceReady) => action == Action::Disagree,
        (CceReady, CceDiscussion) => action == Action::RunCce,
        (CceDiscussion, CceDiscussion) => action == Action::RunCce,
        (CceDiscussion, Concluded(_)) => action == Action::Agree,
        (CceDiscussion, SccRound(1)) => action == Action::Disagree,
        (SccRound(r), SccDiscussion(s)) => r == s && action == Action::AddSublated,
        (SccDiscussion(r), SccDiscussion(s)) => r == s && action == Action::AddSublated,
        (SccDiscussion(_), Concluded(_)) => action == Action::Agree,
        (SccDiscussion(r), SccRound(s)) => *s == r + 1 && action == Action::Disagree,
        (SccDiscussion(_), Draft) => action == Action::Restart,
        _ => false,
    }
}

/// Depth-first search over every action sequence up to `depth`, checking each
/// transition. Returns the number of transitions visited.
pub fn model_check(depth: usize) -> Result<u64, String> {
    fn visit(state: &SessionState, depth: usize, count: &mut u64) -> Result<(), String> {
        if depth == 0 {
            return Ok(());
        }
        for action in ACTIONS {
            let Some((next, _)) = step(state, action) else {
                continue;
            };
            *count += 1;
            let (from, to) = (state.phase(), next.phase());
            if !edge_allowed(from, to, action) {
                return Err(format!("{action:?} took {from} to {to}"));
            }
            if !from.actions().contains(&action.operation()) {
                return Err(format!("{action:?} succeeded in {from} but is not listed"));
            }
            if to.is_terminal() && !to.actions().is_empty() {
                return Err(format!("{to} lists actions"));
            }
            let expected_generation = state.generation() + u32::from(action == Action::Restart);
            if next.generation() != expected_generation {
                return Err(format!("{action:?} changed generation unexpectedly"));
            }
            if let Phase::Concluded(c) = to {
                if !next.current_choices().any(|x| &x.id == c) {
                    return Err(format!("concluded on unknown choice {c}"));
                }
            }
            visit(&next, depth - 1, count)?;
        }
        Ok(())
    }
    let mut count = 0;
    visit(&draft_session(), depth, &mut count)?;
    Ok(count)
}
