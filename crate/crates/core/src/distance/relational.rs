//! Relational trace distance over normalized traces.
//!
//! `d_r = ½ (d_ra + d_rΔ)`. Each part sums, over the query's distinct
//! elements, the distance to the closest element of the stored trace and
//! divides by the larger element count. Elements of the stored trace may be
//! matched more than once; ties go to the earliest stored element.

use serde::{Deserialize, Serialize};

use super::{DistanceConfig, EAtom, ELit, Prepared};

/// Sum of per-element minima divided by the larger set size. One empty side
/// means every element of the other is unmatched (distance 1).
#[inline]
fn combine(sum: f64, n_query: usize, n_stored: usize) -> f64 {
    match (n_query, n_stored) {
        (0, 0) => 0.0,
        (0, _) | (_, 0) => 1.0,
        (q, s) => sum / q.max(s) as f64,
    }
}

fn min_action(cfg: &DistanceConfig, a: &EAtom, stored: &[EAtom]) -> (f64, Option<usize>) {
    let mut best = (1.0, None);
    for (j, b) in stored.iter().enumerate() {
        let d = a.df(b, cfg.df_variant);
        if best.1.is_none() || d < best.0 {
            best = (d, Some(j));
            if d == 0.0 {
                break;
            }
        }
    }
    best
}

/// `d_rδ` between two deltas.
fn delta_distance(cfg: &DistanceConfig, d1: &[ELit], d2: &[ELit]) -> f64 {
    if d1.is_empty() || d2.is_empty() {
        return combine(0.0, d1.len(), d2.len());
    }
    let mut sum = 0.0;
    for l in d1 {
        let mut best = f64::INFINITY;
        for m in d2 {
            let d = l.dist(m, cfg);
            if d < best {
                best = d;
                if d == 0.0 {
                    break;
                }
            }
        }
        sum += best;
    }
    combine(sum, d1.len(), d2.len())
}

fn min_delta(cfg: &DistanceConfig, d: &[ELit], stored: &[Vec<ELit>]) -> (f64, Option<usize>) {
    let mut best = (1.0, None);
    for (j, e) in stored.iter().enumerate() {
        let v = delta_distance(cfg, d, e);
        if best.1.is_none() || v < best.0 {
            best = (v, Some(j));
            if v == 0.0 {
                break;
            }
        }
    }
    best
}

fn directional(cfg: &DistanceConfig, q: &Prepared, t: &Prepared) -> f64 {
    let sa: f64 = q
        .actions
        .iter()
        .map(|a| min_action(cfg, a, &t.actions).0)
        .sum();
    let sd: f64 = q
        .deltas
        .iter()
        .map(|d| min_delta(cfg, d, &t.deltas).0)
        .sum();
    0.5 * (combine(sa, q.actions.len(), t.actions.len())
        + combine(sd, q.deltas.len(), t.deltas.len()))
}

pub(super) fn distance(cfg: &DistanceConfig, q: &Prepared, t: &Prepared) -> f64 {
    let fwd = directional(cfg, q, t);
    if cfg.symmetrize {
        0.5 * (fwd + directional(cfg, t, q))
    } else {
        fwd
    }
}

/// Prefix normalization equals truncated normalization, so the per-element
/// minima of the full query serve every prefix.
pub(super) fn prefixes(cfg: &DistanceConfig, q: &Prepared, t: &Prepared) -> Vec<f64> {
    let amin: Vec<f64> = q
        .actions
        .iter()
        .map(|a| min_action(cfg, a, &t.actions).0)
        .collect();
    let dmin: Vec<f64> = q
        .deltas
        .iter()
        .map(|d| min_delta(cfg, d, &t.deltas).0)
        .collect();

    // reverse direction: stored elements against the growing query
    let mut rev_a = vec![f64::INFINITY; t.actions.len()];
    let mut rev_d = vec![f64::INFINITY; t.deltas.len()];

    let mut out = Vec::with_capacity(q.len + 1);
    let (mut ia, mut id) = (0usize, 0usize);
    let (mut sa, mut sd) = (0.0f64, 0.0f64);
    for j in 0..=q.len {
        while ia < q.actions.len() && q.action_first[ia] < j {
            sa += amin[ia];
            if cfg.symmetrize {
                for (r, e) in rev_a.iter_mut().zip(&t.actions) {
                    *r = r.min(e.df(&q.actions[ia], cfg.df_variant));
                }
            }
            ia += 1;
        }
        while id < q.deltas.len() && q.delta_first[id] < j {
            sd += dmin[id];
            if cfg.symmetrize {
                for (r, e) in rev_d.iter_mut().zip(&t.deltas) {
                    *r = r.min(delta_distance(cfg, e, &q.deltas[id]));
                }
            }
            id += 1;
        }
        let fwd = 0.5 * (combine(sa, ia, t.actions.len()) + combine(sd, id, t.deltas.len()));
        if cfg.symmetrize {
            let ra: f64 = if ia == 0 { 0.0 } else { rev_a.iter().sum() };
            let rd: f64 = if id == 0 { 0.0 } else { rev_d.iter().sum() };
            let back = 0.5
                * (combine(ra, t.actions.len(), ia) + combine(rd, t.deltas.len(), id));
            out.push(0.5 * (fwd + back));
        } else {
            out.push(fwd);
        }
    }
    out
}

/// Closest stored element for one query element. Steps are 0-based indices
/// of the element's first occurrence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementMatch {
    pub query_step: usize,
    pub stored_step: Option<usize>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RelationalMatches {
    pub actions: Vec<ElementMatch>,
    pub deltas: Vec<ElementMatch>,
}

/// The minimizing matches behind the forward relational distance.
pub fn relational_matches(cfg: &DistanceConfig, q: &Prepared, t: &Prepared) -> RelationalMatches {
    let actions = q
        .actions
        .iter()
        .zip(&q.action_first)
        .map(|(a, &step)| {
            let (d, j) = min_action(cfg, a, &t.actions);
            ElementMatch {
                query_step: step,
                stored_step: j.map(|j| t.action_first[j]),
                distance: d,
            }
        })
        .collect();
    let deltas = q
        .deltas
        .iter()
        .zip(&q.delta_first)
        .map(|(dl, &step)| {
            let (d, j) = min_delta(cfg, dl, &t.deltas);
            ElementMatch {
                query_step: step,
                stored_step: j.map(|j| t.delta_first[j]),
                distance: d,
            }
        })
        .collect();
    RelationalMatches { actions, deltas }
}
