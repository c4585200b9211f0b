//! Permissible meeting analysis.
//!
//! Each participant accepts the top `k_i` choices of their ranking. When no
//! choice is acceptable to everyone, participants widen their ranges by `l_i`
//! ranks; the analysis finds the choices reachable with the least total
//! widening `sum(l_i)`.
//!
//! The cost of bringing a single choice `x` into every range is
//! `sum(max(0, rank_i(x) - k_i))`, and that vector of per-participant
//! shortfalls is the unique componentwise-minimal widening that does it. The
//! production path therefore scores each choice directly in `O(n * m)`;
//! [`oracle_analyze`] keeps the literal enumeration of widening vectors for
//! cross-checking.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChoiceId, Electorate, ValidatedProfile};

/// Default cap on [`expansion_table`] rows.
pub const DEFAULT_TABLE_CAP: usize = 100_000;

/// Guard on the number of widening vectors [`oracle_analyze`] will visit.
pub const ORACLE_GUARD: u128 = 1_000_000;

/// Per-participant widening `l_i`, in ranks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExpansionVector(pub Vec<usize>);

impl ExpansionVector {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionRow {
    pub expansion: ExpansionVector,
    pub total: usize,
    /// Each participant's widened acceptable prefix, in ranking order.
    pub permissible_sets: Vec<Vec<ChoiceId>>,
    /// Choices in every widened prefix, in profile choice order.
    pub intersection: Vec<ChoiceId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PmaResult {
    /// Sorted by id.
    pub consensus_choices: Vec<ChoiceId>,
    pub total_expansion: usize,
    pub witnesses: BTreeMap<ChoiceId, ExpansionVector>,
    /// True when some choice was acceptable to everyone without widening.
    pub immediate: bool,
}

/// Choices inside every participant's unwidened acceptable prefix, sorted by id.
pub fn base_intersection(profile: &ValidatedProfile) -> Result<Vec<ChoiceId>> {
    let e = profile.electorate()?;
    let mut out: Vec<ChoiceId> = (0..profile.n())
        .filter(|&c| shortfalls(e, c).iter().all(|&l| l == 0))
        .map(|c| profile.choice_id(c).clone())
        .collect();
    out.sort();
    Ok(out)
}

/// Least total widening that puts `choice` in everyone's acceptable range.
pub fn expansion_cost(profile: &ValidatedProfile, choice: &ChoiceId) -> Result<usize> {
    let e = profile.electorate()?;
    let c = profile
        .choice_index(choice)
        .ok_or_else(|| Error::UnknownChoice(choice.clone()))?;
    Ok(shortfalls(e, c).iter().sum())
}

/// Widening cost of every choice, in profile choice order.
pub fn expansion_costs(profile: &ValidatedProfile) -> Result<Vec<(ChoiceId, usize)>> {
    let e = profile.electorate()?;
    Ok((0..profile.n())
        .map(|c| (profile.choice_id(c).clone(), shortfalls(e, c).iter().sum()))
        .collect())
}

fn shortfalls(e: &Electorate, choice: usize) -> Vec<usize> {
    e.ranks
        .iter()
        .zip(&e.permits)
        .map(|(ranks, &k)| ranks[choice].saturating_sub(k))
        .collect()
}

pub fn analyze(profile: &ValidatedProfile) -> Result<PmaResult> {
    let e = profile.electorate()?;
    let mut best = usize::MAX;
    let mut witnesses = BTreeMap::new();
    for c in 0..profile.n() {
        let l = shortfalls(e, c);
        let cost: usize = l.iter().sum();
        if cost < best {
            best = cost;
            witnesses.clear();
        }
        if cost == best {
            witnesses.insert(profile.choice_id(c).clone(), ExpansionVector(l));
        }
    }
    Ok(PmaResult {
        consensus_choices: witnesses.keys().cloned().collect(),
        total_expansion: best,
        witnesses,
        immediate: best == 0,
    })
}

/// Every widening vector with total at most `max_total`, ordered by total and
/// then by descending vector (earlier participants widen first), with the
/// resulting acceptable sets and their intersection.
pub fn expansion_table(profile: &ValidatedProfile, max_total: usize) -> Result<Vec<ExpansionRow>> {
    expansion_table_capped(profile, max_total, DEFAULT_TABLE_CAP)
}

pub fn expansion_table_capped(
    profile: &ValidatedProfile,
    max_total: usize,
    cap: usize,
) -> Result<Vec<ExpansionRow>> {
    let e = profile.electorate()?;
    let n = profile.n();
    let slack: Vec<usize> = e.permits.iter().map(|&k| n - k).collect();
    let rows = count_vectors(&slack, max_total);
    if rows > cap as u128 {
        return Err(Error::TableTooLarge { rows, cap });
    }

    let mut out = Vec::with_capacity(rows as usize);
    let mut current = vec![0; slack.len()];
    for total in 0..=max_total {
        let mut vectors = Vec::new();
        vectors_with_total(&slack, total, 0, &mut current, &mut vectors);
        for l in vectors {
            out.push(row(profile, e, l));
        }
    }
    Ok(out)
}

fn row(profile: &ValidatedProfile, e: &Electorate, l: Vec<usize>) -> ExpansionRow {
    let permissible_sets = e
        .orders
        .iter()
        .zip(&e.permits)
        .zip(&l)
        .map(|((order, &k), &li)| {
            order[..k + li]
                .iter()
                .map(|&c| profile.choice_id(c).clone())
                .collect()
        })
        .collect();
    let intersection = (0..profile.n())
        .filter(|&c| {
            e.ranks
                .iter()
                .zip(&e.permits)
                .zip(&l)
                .all(|((ranks, &k), &li)| ranks[c] <= k + li)
        })
        .map(|c| profile.choice_id(c).clone())
        .collect();
    ExpansionRow {
        total: l.iter().sum(),
        expansion: ExpansionVector(l),
        permissible_sets,
        intersection,
    }
}

/// Pushes every vector bounded componentwise by `slack` summing to `total`,
/// in descending lexicographic order.
fn vectors_with_total(
    slack: &[usize],
    total: usize,
    at: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if at == slack.len() {
        if total == 0 {
            out.push(current.clone());
        }
        return;
    }
    let room: usize = slack[at + 1..].iter().sum();
    let hi = total.min(slack[at]);
    let lo = total.saturating_sub(room);
    if lo > hi {
        return;
    }
    for v in (lo..=hi).rev() {
        current[at] = v;
        vectors_with_total(slack, total - v, at + 1, current, out);
    }
    current[at] = 0;
}

/// Number of vectors bounded by `slack` with sum at most `max_total`.
fn count_vectors(slack: &[usize], max_total: usize) -> u128 {
    // ways[t] = number of prefixes summing to exactly t
    let mut ways = vec![0u128; max_total + 1];
    ways[0] = 1;
    for &s in slack {
        let mut next = vec![0u128; max_total + 1];
        for (t, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for v in 0..=s.min(max_total - t) {
                next[t + v] += w;
            }
        }
        ways = next;
    }
    ways.iter().sum()
}

/// Literal enumeration of widening vectors: visit every vector, intersect the
/// widened prefixes as sets, and keep the choices found at the smallest total
/// with a non-empty intersection.
pub fn oracle_analyze(profile: &ValidatedProfile) -> Result<PmaResult> {
    let e = profile.electorate()?;
    let n = profile.n();
    let slack: Vec<usize> = e.permits.iter().map(|&k| n - k).collect();
    let size: u128 = slack.iter().map(|&s| s as u128 + 1).product();
    if size > ORACLE_GUARD {
        return Err(Error::SearchSpaceTooLarge {
            size,
            guard: ORACLE_GUARD,
        });
    }

    let prefix_sets = |l: &[usize]| -> Vec<HashSet<usize>> {
        e.orders
            .iter()
            .zip(&e.permits)
            .zip(l)
            .map(|((order, &k), &li)| order[..k + li].iter().copied().collect())
            .collect()
    };

    let mut best_total = usize::MAX;
    let mut found: BTreeMap<ChoiceId, ExpansionVector> = BTreeMap::new();
    let mut l = vec![0usize; slack.len()];
    loop {
        let total: usize = l.iter().sum();
        if total <= best_total {
            let sets = prefix_sets(&l);
            let mut common: BTreeSet<usize> = sets[0].iter().copied().collect();
            for s in &sets[1..] {
                common.retain(|c| s.contains(c));
            }
            if !common.is_empty() {
                if total < best_total {
                    best_total = total;
                    found.clear();
                }
                for c in common {
                    found
                        .entry(profile.choice_id(c).clone())
                        .or_insert_with(|| ExpansionVector(l.clone()));
                }
            }
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == l.len() {
                let consensus_choices = found.keys().cloned().collect();
                return Ok(PmaResult {
                    consensus_choices,
                    total_expansion: best_total,
                    witnesses: found,
                    immediate: best_total == 0,
                });
            }
            if l[i] < slack[i] {
                l[i] += 1;
                break;
            }
            l[i] = 0;
            i += 1;
        }
    }
}
