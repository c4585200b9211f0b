//! Compromise choice exploration.
//!
//! Every common order of the choices is scored by how far each participant
//! would have to move from their own ranking to accept it. With `r_i` the
//! Kendall distance from ballot `i`, the score is `w_mu * mean(r) +
//! w_sigma * stddev(r)` (population deviation). Small scores mean little total
//! compromise, spread evenly. The search is exhaustive over all `n!` orders.
//!
//! Orders are enumerated lexicographically by choice id and sharded by their
//! first element, so the parallel scan merges to exactly the sequential result.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{merge_count, ChoiceId, ValidatedProfile, Weights};

/// Largest choice count searched without an explicit override.
pub const DEFAULT_CHOICE_LIMIT: usize = 10;
/// Largest choice count the search accepts at all.
pub const HARD_CHOICE_LIMIT: usize = 12;
/// Absolute score difference under which two orders tie.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub weights: Weights,
    pub max_choices: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            weights: Weights::default(),
            max_choices: DEFAULT_CHOICE_LIMIT,
        }
    }
}

impl SearchOptions {
    pub fn new(weights: Weights) -> Self {
        SearchOptions {
            weights,
            ..Default::default()
        }
    }

    /// Raises (or lowers) the choice limit. Values above
    /// [`HARD_CHOICE_LIMIT`] are refused.
    pub fn with_max_choices(mut self, max_choices: usize) -> Result<Self> {
        if max_choices > HARD_CHOICE_LIMIT {
            return Err(Error::LimitAboveMaximum(max_choices));
        }
        self.max_choices = max_choices;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderScore {
    pub order: Vec<ChoiceId>,
    /// Replacement count per participant, in profile order.
    pub r: Vec<usize>,
    pub mu: f64,
    pub sigma: f64,
    pub score: f64,
}

impl OrderScore {
    pub fn head(&self) -> &ChoiceId {
        &self.order[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CceResult {
    /// Every order tying the minimal score, ascending by (score, order).
    pub best: Vec<OrderScore>,
    pub consensus_choices: Vec<ChoiceId>,
    pub weights: Weights,
    pub explored: u64,
}

/// Scores one common order against every ballot.
pub fn score_order(
    profile: &ValidatedProfile,
    order: &[ChoiceId],
    weights: &Weights,
) -> Result<OrderScore> {
    weights.check()?;
    let scorer = Scorer::new(profile, *weights)?;
    let n = profile.n();
    let mut positions = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for id in order {
        let pos = scorer
            .sorted_ids
            .binary_search(id)
            .map_err(|_| Error::NotAPermutation(format!("unknown choice `{id}` in order")))?;
        if std::mem::replace(&mut seen[pos], true) {
            return Err(Error::NotAPermutation(format!("`{id}` repeated in order")));
        }
        positions.push(pos);
    }
    if positions.len() != n {
        return Err(Error::NotAPermutation(format!(
            "order has {} of {n} choices",
            positions.len()
        )));
    }
    let mut scratch = Scratch::new(n);
    let cand = scorer.evaluate(&positions, &mut scratch);
    Ok(scorer.materialize(&cand))
}

/// Exhaustive search with the default choice limit.
pub fn search_full(profile: &ValidatedProfile, weights: &Weights) -> Result<CceResult> {
    search_full_with(profile, &SearchOptions::new(*weights))
}

pub fn search_full_with(profile: &ValidatedProfile, options: &SearchOptions) -> Result<CceResult> {
    let best = score_tiers(profile, options, 1)?
        .into_iter()
        .next()
        .expect("at least one order exists");
    let mut result = CceResult {
        best,
        consensus_choices: Vec::new(),
        weights: options.weights,
        explored: factorial(profile.n()),
    };
    result.consensus_choices = consensus_choices(&result);
    Ok(result)
}

/// The `limit` lowest-scoring orders, ascending by (score, order).
pub fn score_table(
    profile: &ValidatedProfile,
    weights: &Weights,
    limit: usize,
) -> Result<Vec<OrderScore>> {
    score_table_with(profile, &SearchOptions::new(*weights), limit)
}

pub fn score_table_with(
    profile: &ValidatedProfile,
    options: &SearchOptions,
    limit: usize,
) -> Result<Vec<OrderScore>> {
    if limit == 0 {
        return Err(Error::ZeroLimit);
    }
    let scorer = Scorer::for_search(profile, options)?;
    let top = scan(&scorer, || TopK::new(limit));
    Ok(top
        .into_sorted()
        .iter()
        .map(|c| scorer.materialize(c))
        .collect())
}

/// All orders in the `tiers` smallest score tiers, one inner list per tier.
/// A tier collects orders within [`TIE_TOLERANCE`] of its lowest score.
pub fn score_tiers(
    profile: &ValidatedProfile,
    options: &SearchOptions,
    tiers: usize,
) -> Result<Vec<Vec<OrderScore>>> {
    if tiers == 0 {
        return Err(Error::ZeroLimit);
    }
    let scorer = Scorer::for_search(profile, options)?;
    let collected = scan(&scorer, || Tiers::new(tiers));
    Ok(collected
        .into_tiers()
        .into_iter()
        .map(|tier| tier.iter().map(|c| scorer.materialize(c)).collect())
        .collect())
}

/// Distinct first-ranked choices of the best orders, in best-list order.
pub fn consensus_choices(result: &CceResult) -> Vec<ChoiceId> {
    let mut out: Vec<ChoiceId> = Vec::new();
    for s in &result.best {
        if !out.contains(s.head()) {
            out.push(s.head().clone());
        }
    }
    out
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// An evaluated order. `order` holds indices into the id-sorted choice list,
/// so comparing it lexicographically compares orders by choice id.
#[derive(Debug, Clone)]
struct Candidate {
    score: f64,
    order: Vec<usize>,
}

impl Candidate {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| self.order.cmp(&other.order))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

struct Scratch {
    seq: Vec<usize>,
    merge: Vec<usize>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            seq: vec![0; n],
            merge: vec![0; n],
        }
    }
}

struct Scorer {
    sorted_ids: Vec<ChoiceId>,
    /// `ranks[p][s]`: participant `p`'s rank of the `s`-th choice by id.
    ranks: Vec<Vec<usize>>,
    weights: Weights,
}

impl Scorer {
    fn new(profile: &ValidatedProfile, weights: Weights) -> Result<Self> {
        let electorate = profile.electorate()?;
        let sorted_ids = profile.sorted_ids();
        let ranks = electorate
            .ranks
            .iter()
            .map(|by_index| {
                sorted_ids
                    .iter()
                    .map(|id| by_index[profile.choice_index(id).expect("known id")])
                    .collect()
            })
            .collect();
        Ok(Scorer {
            sorted_ids,
            ranks,
            weights,
        })
    }

    fn for_search(profile: &ValidatedProfile, options: &SearchOptions) -> Result<Self> {
        options.weights.check()?;
        if options.max_choices > HARD_CHOICE_LIMIT {
            return Err(Error::LimitAboveMaximum(options.max_choices));
        }
        if profile.n() > options.max_choices {
            return Err(Error::TooManyChoices {
                n: profile.n(),
                limit: options.max_choices,
            });
        }
        Scorer::new(profile, options.weights)
    }

    fn n(&self) -> usize {
        self.sorted_ids.len()
    }

    fn distances(&self, order: &[usize], scratch: &mut Scratch) -> Vec<usize> {
        self.ranks
            .iter()
            .map(|ranks| {
                for (slot, &c) in scratch.seq.iter_mut().zip(order) {
                    *slot = ranks[c];
                }
                merge_count(&mut scratch.seq, &mut scratch.merge) as usize
            })
            .collect()
    }

    fn evaluate(&self, order: &[usize], scratch: &mut Scratch) -> Candidate {
        let r = self.distances(order, scratch);
        Candidate {
            score: self.stats(&r).2,
            order: order.to_vec(),
        }
    }

    /// (mu, sigma, score) from integer moments, so equal multisets of `r`
    /// give bitwise-equal scores.
    fn stats(&self, r: &[usize]) -> (f64, f64, f64) {
        let m = r.len() as u64;
        let sum: u64 = r.iter().map(|&x| x as u64).sum();
        let sum_sq: u64 = r.iter().map(|&x| (x * x) as u64).sum();
        let spread = ((m * sum_sq - sum * sum) as f64).sqrt();
        let m = m as f64;
        let mu = sum as f64 / m;
        let sigma = spread / m;
        let score = (self.weights.w_mu * sum as f64 + self.weights.w_sigma * spread) / m;
        (mu, sigma, score)
    }

    fn materialize(&self, cand: &Candidate) -> OrderScore {
        let mut scratch = Scratch::new(self.n());
        let r = self.distances(&cand.order, &mut scratch);
        let (mu, sigma, score) = self.stats(&r);
        OrderScore {
            order: cand.order.iter().map(|&i| self.sorted_ids[i].clone()).collect(),
            r,
            mu,
            sigma,
            score,
        }
    }
}

trait Collector: Send + Sized {
    fn offer(&mut self, scorer: &Scorer, order: &[usize], scratch: &mut Scratch);
    fn merge(self, other: Self) -> Self;
}

/// Visits every order, one shard per leading choice, and merges the shard
/// collectors.
fn scan<C, F>(scorer: &Scorer, make: F) -> C
where
    C: Collector,
    F: Fn() -> C + Sync,
{
    let n = scorer.n();
    (0..n)
        .into_par_iter()
        .map(|first| {
            let mut collector = make();
            let mut scratch = Scratch::new(n);
            let mut order: Vec<usize> = std::iter::once(first)
                .chain((0..n).filter(|&c| c != first))
                .collect();
            loop {
                collector.offer(scorer, &order, &mut scratch);
                if !next_permutation(&mut order[1..]) {
                    break;
                }
            }
            collector
        })
        .reduce_with(C::merge)
        .unwrap_or_else(make)
}

/// Advances `xs` to the next lexicographic permutation; false once the last
/// one has been passed.
fn next_permutation(xs: &mut [usize]) -> bool {
    if xs.len() < 2 {
        return false;
    }
    let mut i = xs.len() - 1;
    while i > 0 && xs[i - 1] >= xs[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = xs.len() - 1;
    while xs[j] <= xs[i - 1] {
        j -= 1;
    }
    xs.swap(i - 1, j);
    xs[i..].reverse();
    true
}

/// The `k` smallest candidates under the exact (score, order) key.
struct TopK {
    k: usize,
    heap: BinaryHeap<Candidate>,
}

impl TopK {
    fn new(k: usize) -> Self {
        TopK {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    fn push(&mut self, cand: Candidate) {
        if self.heap.len() < self.k {
            self.heap.push(cand);
        } else if let Some(mut worst) = self.heap.peek_mut() {
            if cand < *worst {
                *worst = cand;
            }
        }
    }

    fn into_sorted(self) -> Vec<Candidate> {
        self.heap.into_sorted_vec()
    }
}

impl Collector for TopK {
    fn offer(&mut self, scorer: &Scorer, order: &[usize], scratch: &mut Scratch) {
        let cand = scorer.evaluate(order, scratch);
        self.push(cand);
    }

    fn merge(mut self, other: Self) -> Self {
        for cand in other.heap {
            self.push(cand);
        }
        self
    }
}

/// Keeps every candidate that can still land in the `count` lowest tiers.
///
/// `floors` holds the lowest score of each tier seen so far (at most `count`
/// of them). Floors only ever decrease, so the admission threshold only
/// tightens and nothing that belongs in the final tiers is turned away.
struct Tiers {
    count: usize,
    floors: Vec<f64>,
    kept: Vec<Candidate>,
}

impl Tiers {
    fn new(count: usize) -> Self {
        Tiers {
            count,
            floors: Vec::with_capacity(count + 1),
            kept: Vec::new(),
        }
    }

    fn threshold(&self) -> f64 {
        if self.floors.len() < self.count {
            f64::INFINITY
        } else {
            self.floors[self.count - 1] + TIE_TOLERANCE
        }
    }

    fn note_floor(&mut self, score: f64) {
        if let Some(f) = self
            .floors
            .iter_mut()
            .find(|f| (score - **f).abs() <= TIE_TOLERANCE)
        {
            if score < *f {
                *f = score;
            }
        } else {
            let at = self.floors.partition_point(|f| *f < score);
            self.floors.insert(at, score);
            self.floors.truncate(self.count);
        }
    }

    fn admit(&mut self, cand: Candidate) {
        if cand.score > self.threshold() {
            return;
        }
        let before = self.threshold();
        self.note_floor(cand.score);
        self.kept.push(cand);
        let after = self.threshold();
        if after < before {
            self.kept.retain(|c| c.score <= after);
        }
    }

    /// Groups the kept candidates: a tier opens at its lowest score and takes
    /// everything within tolerance of it.
    fn into_tiers(mut self) -> Vec<Vec<Candidate>> {
        self.kept.sort();
        let mut tiers: Vec<Vec<Candidate>> = Vec::new();
        let mut floor = f64::NEG_INFINITY;
        for cand in self.kept {
            if tiers.is_empty() || cand.score > floor + TIE_TOLERANCE {
                if tiers.len() == self.count {
                    break;
                }
                floor = cand.score;
                tiers.push(Vec::new());
            }
            tiers.last_mut().expect("tier opened").push(cand);
        }
        tiers
    }
}

impl Collector for Tiers {
    fn offer(&mut self, scorer: &Scorer, order: &[usize], scratch: &mut Scratch) {
        let cand = scorer.evaluate(order, scratch);
        self.admit(cand);
    }

    fn merge(mut self, other: Self) -> Self {
        for cand in other.kept {
            self.admit(cand);
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::validate_profile;

    fn ids(s: &[&str]) -> Vec<ChoiceId> {
        s.iter().map(|&x| x.into()).collect()
    }

    fn chars(s: &str) -> Vec<ChoiceId> {
        s.chars().map(|c| ChoiceId::new(c.to_string())).collect()
    }

    #[test]
    fn next_permutation_visits_all_in_order() {
        let mut xs = vec![0, 1, 2, 3];
        let mut seen = vec![xs.clone()];
        while next_permutation(&mut xs) {
            seen.push(xs.clone());
        }
        assert_eq!(seen.len(), 24);
        assert!(seen.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn scores_for_four_choice_example() {
        let p = validate_profile(fixtures::fig3()).unwrap();
        let w = Weights::default();
        let s = score_order(&p, &chars("acdb"), &w).unwrap();
        assert_eq!(s.r, vec![2, 2, 2]);
        assert_eq!((s.mu, s.sigma, s.score), (2.0, 0.0, 2.0));

        let s = score_order(&p, &chars("cadb"), &w).unwrap();
        assert_eq!(s.r, vec![3, 3, 1]);
        assert!((s.mu - 7.0 / 3.0).abs() < 1e-12);
        assert!((s.sigma - 8f64.sqrt() / 3.0).abs() < 1e-12);
        assert!((s.score - 3.276).abs() < 1e-3);

        let s = score_order(&p, &chars("bdca"), &w).unwrap();
        assert_eq!((s.r.clone(), s.score), (vec![4, 4, 4], 4.0));
    }

    #[test]
    fn score_order_rejects_bad_orders() {
        let p = validate_profile(fixtures::fig3()).unwrap();
        let w = Weights::default();
        assert!(matches!(score_order(&p, &chars("abc"), &w), Err(Error::NotAPermutation(_))));
        assert!(matches!(score_order(&p, &chars("abcc"), &w), Err(Error::NotAPermutation(_))));
        assert!(matches!(score_order(&p, &chars("abce"), &w), Err(Error::NotAPermutation(_))));
    }

    #[test]
    fn identical_ballots_score_zero() {
        let p = fixtures::profile(&["a", "b", "c"], &[(&["b", "c", "a"], 1), (&["b", "c", "a"], 2)]);
        let p = validate_profile(p).unwrap();
        let s = score_order(&p, &chars("bca"), &Weights::default()).unwrap();
        assert_eq!((s.r, s.score), (vec![0, 0], 0.0));
        let r = search_full(&p, &Weights::default()).unwrap();
        assert_eq!(r.best.len(), 1);
        assert_eq!(r.best[0].order, chars("bca"));
    }

    #[test]
    fn full_search_on_four_choice_example() {
        let p = validate_profile(fixtures::fig3()).unwrap();
        let r = search_full(&p, &Weights::default()).unwrap();
        assert_eq!(r.explored, 24);
        assert_eq!(r.best.len(), 1);
        assert_eq!(r.best[0].order, chars("acdb"));
        assert_eq!(r.consensus_choices, chars("a"));
    }

    #[test]
    fn score_table_is_sorted_and_headed_by_best() {
        let p = validate_profile(fixtures::table7()).unwrap();
        let w = Weights::default();
        let rows = score_table(&p, &w, 3).unwrap();
        assert!((rows[0].score - 9.548).abs() < 1e-3);
        assert!((rows[1].score - 9.89).abs() < 1e-3);
        assert!((rows[2].score - 9.89).abs() < 1e-3);
        assert!(rows[1].order < rows[2].order);
        let best = search_full(&p, &w).unwrap();
        assert_eq!(score_table(&p, &w, 1).unwrap()[0], best.best[0]);
        assert_eq!(best.consensus_choices, ids(&["(4)"]));
        assert_eq!(score_table(&p, &w, 0), Err(Error::ZeroLimit));
    }

    #[test]
    fn tiers_group_ties() {
        let p = validate_profile(fixtures::table7()).unwrap();
        let tiers = score_tiers(&p, &SearchOptions::default(), 3).unwrap();
        assert_eq!(tiers.len(), 3);
        assert_eq!(tiers[0].len(), 1);
        assert!(tiers[1].iter().all(|s| (s.score - 9.89).abs() < 1e-3));
        // a two-order tier at 9.948 sits between 9.89 and 10.09
        assert_eq!(tiers[2].len(), 2);
        assert!(tiers[2].iter().all(|s| (s.score - 9.948).abs() < 1e-3));
        let table = score_table(&p, &Weights::default(), 1 + tiers[1].len()).unwrap();
        assert_eq!(&table[1..], &tiers[1][..]);
    }

    #[test]
    fn two_opposite_ballots_tie() {
        let p = fixtures::profile(&["x", "y"], &[(&["x", "y"], 1), (&["y", "x"], 1)]);
        let p = validate_profile(p).unwrap();
        let r = search_full(&p, &Weights::default()).unwrap();
        // both orders give r = (0, 1) in some arrangement: mu 0.5, sigma 0.5
        assert_eq!(r.best.len(), 2);
        assert!(r.best.iter().all(|s| (s.score - 1.0).abs() < 1e-12));
        assert_eq!(r.consensus_choices, ids(&["x", "y"]));
    }

    #[test]
    fn choice_limit() {
        let choices: Vec<String> = (0..11).map(|i| format!("c{i:02}")).collect();
        let refs: Vec<&str> = choices.iter().map(String::as_str).collect();
        let p = validate_profile(fixtures::profile(&refs, &[(&refs[..], 1)])).unwrap();
        assert_eq!(
            search_full(&p, &Weights::default()).unwrap_err(),
            Error::TooManyChoices { n: 11, limit: 10 }
        );
        assert_eq!(
            SearchOptions::default().with_max_choices(13).unwrap_err(),
            Error::LimitAboveMaximum(13)
        );
    }

    #[test]
    fn invalid_weights_rejected() {
        let p = validate_profile(fixtures::fig3()).unwrap();
        let w = Weights { w_mu: 0.0, w_sigma: 0.0 };
        assert!(matches!(search_full(&p, &w), Err(Error::InvalidWeights { .. })));
    }

    #[test]
    fn consensus_dedups_heads() {
        let s = |o: &str| OrderScore {
            order: chars(o),
            r: vec![],
            mu: 0.0,
            sigma: 0.0,
            score: 0.0,
        };
        let r = CceResult {
            best: vec![s("ab"), s("ab"), s("ba")],
            consensus_choices: vec![],
            weights: Weights::default(),
            explored: 2,
        };
        assert_eq!(consensus_choices(&r), chars("ab"));
    }
}
