use std::collections::{HashMap, HashSet};
use std::hash::Hash;

use super::Prepared;
use crate::symbol::Sym;

/// `1 - |a ∩ b| / |a ∪ b|`, with two empty sets at distance 0.
pub fn jaccard_distance<T: Eq + Hash>(a: &HashSet<T>, b: &HashSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    jaccard_from_counts(inter, a.len() + b.len() - inter)
}

fn jaccard_from_counts(inter: usize, union: usize) -> f64 {
    if union == 0 {
        0.0
    } else {
        1.0 - inter as f64 / union as f64
    }
}

fn action_set(p: &Prepared, upto: usize) -> HashSet<Sym> {
    p.action_names[..upto].iter().copied().collect()
}

fn delta_name_set(p: &Prepared, upto: usize) -> HashSet<Sym> {
    p.delta_names[..upto].iter().flatten().copied().collect()
}

pub(super) fn actions(a: &Prepared, b: &Prepared) -> f64 {
    jaccard_distance(&action_set(a, a.len), &action_set(b, b.len))
}

pub(super) fn delta_names(a: &Prepared, b: &Prepared) -> f64 {
    jaccard_distance(&delta_name_set(a, a.len), &delta_name_set(b, b.len))
}

/// Grows the query's name set one step at a time, tracking the intersection.
fn jaccard_prefixes<'a>(
    steps: impl Iterator<Item = &'a [Sym]>,
    len: usize,
    stored: &HashSet<Sym>,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(len + 1);
    let mut seen: HashSet<Sym> = HashSet::new();
    let mut inter = 0usize;
    out.push(jaccard_from_counts(0, stored.len()));
    for names in steps {
        for s in names {
            if seen.insert(*s) && stored.contains(s) {
                inter += 1;
            }
        }
        out.push(jaccard_from_counts(inter, seen.len() + stored.len() - inter));
    }
    out
}

pub(super) fn actions_prefixes(q: &Prepared, t: &Prepared) -> Vec<f64> {
    let stored = action_set(t, t.len);
    jaccard_prefixes(q.action_names.chunks(1), q.len, &stored)
}

pub(super) fn delta_names_prefixes(q: &Prepared, t: &Prepared) -> Vec<f64> {
    let stored = delta_name_set(t, t.len);
    jaccard_prefixes(q.delta_names.iter().map(Vec::as_slice), q.len, &stored)
}

fn counts(p: &Prepared, upto: usize) -> HashMap<Sym, i64> {
    let mut c = HashMap::new();
    for s in &p.action_names[..upto] {
        *c.entry(*s).or_insert(0) += 1;
    }
    c
}

/// Squared Euclidean distance between action-name count vectors.
pub(super) fn ngram(a: &Prepared, b: &Prepared) -> f64 {
    let ca = counts(a, a.len);
    let cb = counts(b, b.len);
    let keys: HashSet<&Sym> = ca.keys().chain(cb.keys()).collect();
    let sum: i64 = keys
        .into_iter()
        .map(|k| {
            let d = ca.get(k).copied().unwrap_or(0) - cb.get(k).copied().unwrap_or(0);
            d * d
        })
        .sum();
    sum as f64
}

pub(super) fn ngram_prefixes(q: &Prepared, t: &Prepared) -> Vec<f64> {
    let stored = counts(t, t.len);
    let mut sum: i64 = stored.values().map(|c| c * c).sum();
    let mut mine: HashMap<Sym, i64> = HashMap::new();
    let mut out = Vec::with_capacity(q.len + 1);
    out.push(sum as f64);
    for s in &q.action_names {
        let c = mine.entry(*s).or_insert(0);
        let other = stored.get(s).copied().unwrap_or(0);
        // (c+1-o)^2 - (c-o)^2
        sum += 2 * (*c - other) + 1;
        *c += 1;
        out.push(sum as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jaccard_edge_cases() {
        let e: HashSet<u8> = HashSet::new();
        let a: HashSet<u8> = [1, 2].into_iter().collect();
        let b: HashSet<u8> = [3].into_iter().collect();
        assert_eq!(jaccard_distance(&e, &e), 0.0);
        assert_eq!(jaccard_distance(&a, &a), 0.0);
        assert_eq!(jaccard_distance(&a, &b), 1.0);
        assert_eq!(jaccard_distance(&a, &e), 1.0);
    }
}
