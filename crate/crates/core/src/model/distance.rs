//! Replacement counts between rankings.
//!
//! A ballot defines a relabelling rule `x_{i1} -> 1, ..., x_{in} -> n`. Pushing
//! a candidate order through that rule yields an integer sequence whose
//! inversion count is the number of adjacent swaps separating the two
//! rankings, i.e. their Kendall tau distance.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::ChoiceId;

/// Maps each element of `order` to its 1-based position in `ballot_ranking`.
pub fn apply_rule(ballot_ranking: &[ChoiceId], order: &[ChoiceId]) -> Result<Vec<usize>> {
    let rule: HashMap<&ChoiceId, usize> = ballot_ranking
        .iter()
        .enumerate()
        .map(|(i, id)| (id, i + 1))
        .collect();
    if rule.len() != ballot_ranking.len() {
        return Err(Error::NotAPermutation("ballot ranking repeats a choice".into()));
    }
    if order.len() != ballot_ranking.len() {
        return Err(Error::MismatchedChoiceSets);
    }
    let seq: Vec<usize> = order
        .iter()
        .map(|id| rule.get(id).copied().ok_or(Error::MismatchedChoiceSets))
        .collect::<Result<_>>()?;
    check_permutation(&seq).map_err(|_| Error::MismatchedChoiceSets)?;
    Ok(seq)
}

/// Number of pairs `i < j` with `seq[i] > seq[j]`; the minimum number of
/// adjacent transpositions that sorts `seq` ascending.
///
/// `seq` must be a permutation of `1..=n`. Runs in `O(n log n)`.
pub fn inversion_count(seq: &[usize]) -> Result<u64> {
    check_permutation(seq)?;
    let mut buf: Vec<usize> = seq.to_vec();
    let mut scratch = vec![0; buf.len()];
    Ok(merge_count(&mut buf, &mut scratch))
}

/// Kendall tau distance between two rankings of the same choice set.
pub fn kendall_distance(ballot_ranking: &[ChoiceId], order: &[ChoiceId]) -> Result<u64> {
    let seq = apply_rule(ballot_ranking, order)?;
    let mut scratch = vec![0; seq.len()];
    let mut seq = seq;
    Ok(merge_count(&mut seq, &mut scratch))
}

fn check_permutation(seq: &[usize]) -> Result<()> {
    let n = seq.len();
    let mut seen = vec![false; n];
    for &v in seq {
        if v == 0 || v > n {
            return Err(Error::NotAPermutation(format!("{v} outside 1..={n}")));
        }
        if std::mem::replace(&mut seen[v - 1], true) {
            return Err(Error::NotAPermutation(format!("{v} repeated")));
        }
    }
    Ok(())
}

/// Sorts `buf` in place and returns its inversion count. `scratch` must be at
/// least as long as `buf`.
pub(crate) fn merge_count<T: Copy + Ord>(buf: &mut [T], scratch: &mut [T]) -> u64 {
    let n = buf.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (left, right) = buf.split_at_mut(mid);
        merge_count(left, scratch) + merge_count(right, scratch)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if buf[i] <= buf[j] {
            scratch[k] = buf[i];
            i += 1;
        } else {
            scratch[k] = buf[j];
            // every remaining left element exceeds buf[j]
            count += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    scratch[k..k + mid - i].copy_from_slice(&buf[i..mid]);
    k += mid - i;
    scratch[k..k + n - j].copy_from_slice(&buf[j..n]);
    buf.copy_from_slice(&scratch[..n]);
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(s: &str) -> Vec<ChoiceId> {
        s.chars().map(|c| ChoiceId::new(c.to_string())).collect()
    }

    /// Literal bubble sort that counts swaps.
    fn bubble_swaps(seq: &[usize]) -> u64 {
        let mut v = seq.to_vec();
        let mut swaps = 0;
        for end in (1..v.len()).rev() {
            for i in 0..end {
                if v[i] > v[i + 1] {
                    v.swap(i, i + 1);
                    swaps += 1;
                }
            }
        }
        swaps
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn rule_examples() {
        assert_eq!(apply_rule(&ids("abcd"), &ids("bcad")).unwrap(), vec![2, 3, 1, 4]);
        assert_eq!(apply_rule(&ids("cdab"), &ids("acdb")).unwrap(), vec![3, 1, 2, 4]);
        assert_eq!(apply_rule(&ids("dacb"), &ids("abcd")).unwrap(), vec![2, 4, 3, 1]);
        let r = ids("qwerty");
        assert_eq!(apply_rule(&r, &r).unwrap(), (1..=6).collect::<Vec<_>>());
    }

    #[test]
    fn rule_rejects_mismatched_sets() {
        assert_eq!(apply_rule(&ids("abc"), &ids("abd")), Err(Error::MismatchedChoiceSets));
        assert_eq!(apply_rule(&ids("abc"), &ids("ab")), Err(Error::MismatchedChoiceSets));
        assert_eq!(apply_rule(&ids("abc"), &ids("aab")), Err(Error::MismatchedChoiceSets));
        assert!(apply_rule(&ids("aab"), &ids("abc")).is_err());
    }

    #[test]
    fn inversion_examples() {
        assert_eq!(inversion_count(&[2, 3, 1, 4]).unwrap(), 2);
        assert_eq!(inversion_count(&[1, 2, 3, 4]).unwrap(), 0);
        assert_eq!(inversion_count(&[4, 3, 2, 1]).unwrap(), 6);
        assert_eq!(inversion_count(&[]).unwrap(), 0);
        assert!(inversion_count(&[1, 1]).is_err());
        assert!(inversion_count(&[0, 1]).is_err());
        assert!(inversion_count(&[1, 3]).is_err());
    }

    #[test]
    fn merge_count_matches_bubble_sort_up_to_six() {
        for n in 0..=6 {
            for p in permutations(n) {
                assert_eq!(inversion_count(&p).unwrap(), bubble_swaps(&p), "{p:?}");
            }
        }
    }

    #[test]
    fn distance_examples() {
        assert_eq!(kendall_distance(&ids("abcd"), &ids("acdb")).unwrap(), 2);
        assert_eq!(kendall_distance(&ids("abcd"), &ids("abcd")).unwrap(), 0);
        assert_eq!(kendall_distance(&ids("abcd"), &ids("dcba")).unwrap(), 6);
    }
}
