//! Distances between traces.
//!
//! Four metrics, all insensitive to step order at the set or count level:
//! action-name Jaccard, delta-name Jaccard, action-count squared Euclidean,
//! and a relational distance that matches ground actions and delta literals
//! after constant normalization.
//!
//! Besides the whole-trace distance, every metric can evaluate all prefixes
//! of a query against one stored trace in a single pass
//! ([`prefix_distances`]); online classification relies on this.

mod formula;
mod relational;
mod set_based;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::symbol::Sym;
use crate::trace::{normalize_trace, Trace};

pub use formula::{formula_distance, literal_distance, numeric_distance, Formula};
pub use relational::{relational_matches, ElementMatch, RelationalMatches};
pub use set_based::jaccard_distance;

pub(crate) use formula::{EAtom, ELit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Actions,
    Delta,
    Ngram,
    Relational,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 4] = [
        DistanceKind::Actions,
        DistanceKind::Delta,
        DistanceKind::Ngram,
        DistanceKind::Relational,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DistanceKind::Actions => "actions",
            DistanceKind::Delta => "delta",
            DistanceKind::Ngram => "ngram",
            DistanceKind::Relational => "relational",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistanceKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        DistanceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown distance `{s}`"))
    }
}

/// How `d_f` turns argument mismatches into a distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DfVariant {
    /// `0.5 * mismatches / arity`: identical atoms are at 0.
    #[default]
    Corrected,
    /// `0.5 - 0.5 * mismatches / arity`, kept for comparison only.
    PaperLiteral,
}

impl FromStr for DfVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "corrected" => Ok(DfVariant::Corrected),
            "paper_literal" => Ok(DfVariant::PaperLiteral),
            other => Err(format!("unknown d_f variant `{other}`")),
        }
    }
}

pub const DEFAULT_MAX_DIFF: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistanceConfig {
    pub kind: DistanceKind,
    /// Normalizer `M` for numeric differences; must be positive.
    pub max_diff: f64,
    pub df_variant: DfVariant,
    /// Average both directions of the relational distance.
    pub symmetrize: bool,
    /// Floor on the head weight of `d_n` when two function heads coincide.
    pub min_weight: f64,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        DistanceConfig {
            kind: DistanceKind::Relational,
            max_diff: DEFAULT_MAX_DIFF,
            df_variant: DfVariant::Corrected,
            symmetrize: false,
            min_weight: 0.0,
        }
    }
}

impl DistanceConfig {
    pub fn new(kind: DistanceKind) -> Self {
        DistanceConfig {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(self.max_diff > 0.0 && self.max_diff.is_finite()) {
            return Err(crate::Error::Config(format!(
                "M must be a positive finite number, got {}",
                self.max_diff
            )));
        }
        if !(0.0..=0.5).contains(&self.min_weight) {
            return Err(crate::Error::Config(format!(
                "min_weight must lie in [0, 0.5], got {}",
                self.min_weight
            )));
        }
        Ok(())
    }
}

/// A normalized trace indexed for distance computations.
#[derive(Debug, Clone)]
pub struct Prepared {
    len: usize,
    action_names: Vec<Sym>,
    /// Distinct names per delta, in order of appearance.
    delta_names: Vec<Vec<Sym>>,
    /// Distinct ground actions and the step where each first occurs.
    actions: Vec<EAtom>,
    action_first: Vec<usize>,
    /// Distinct deltas and the step where each first occurs.
    deltas: Vec<Vec<ELit>>,
    delta_first: Vec<usize>,
}

impl Prepared {
    pub fn new(t: &Trace) -> Prepared {
        let n = normalize_trace(t);
        let mut seen_actions = HashSet::new();
        let mut actions = Vec::new();
        let mut action_first = Vec::new();
        let mut seen_deltas = HashSet::new();
        let mut deltas = Vec::new();
        let mut delta_first = Vec::new();
        let mut action_names = Vec::with_capacity(n.len());
        let mut delta_names = Vec::with_capacity(n.len());
        for (i, d) in n.deltas().into_iter().enumerate() {
            let a = &n.steps[i].action;
            action_names.push(Sym::new(&a.name));
            if seen_actions.insert(a.clone()) {
                actions.push(EAtom::new(&a.name, &a.args));
                action_first.push(i);
            }
            let mut names: Vec<Sym> = Vec::new();
            for l in &d {
                let s = Sym::new(&l.name);
                if !names.contains(&s) {
                    names.push(s);
                }
            }
            delta_names.push(names);
            let mut key: Vec<_> = d.iter().map(|l| (&l.name, &l.args, l.value)).collect();
            key.sort();
            let key: Vec<_> = key
                .into_iter()
                .map(|(n, a, v)| (n.clone(), a.clone(), v))
                .collect();
            if seen_deltas.insert(key) {
                deltas.push(d.iter().map(ELit::new).collect());
                delta_first.push(i);
            }
        }
        Prepared {
            len: n.len(),
            action_names,
            delta_names,
            actions,
            action_first,
            deltas,
            delta_first,
        }
    }

    /// Number of steps.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn distinct_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn distinct_deltas(&self) -> usize {
        self.deltas.len()
    }
}

/// Distance between two whole traces.
///
/// The query is `a`; only the relational distance depends on the order of
/// the arguments (unless `symmetrize` is set).
pub fn distance(cfg: &DistanceConfig, a: &Prepared, b: &Prepared) -> f64 {
    match cfg.kind {
        DistanceKind::Actions => set_based::actions(a, b),
        DistanceKind::Delta => set_based::delta_names(a, b),
        DistanceKind::Ngram => set_based::ngram(a, b),
        DistanceKind::Relational => relational::distance(cfg, a, b),
    }
}

/// Convenience wrapper over plain traces.
pub fn trace_distance(cfg: &DistanceConfig, a: &Trace, b: &Trace) -> f64 {
    distance(cfg, &Prepared::new(a), &Prepared::new(b))
}

/// `out[j]` is the distance from the first `j` steps of `query` to `stored`,
/// for `j` in `0..=query.len()`.
pub fn prefix_distances(cfg: &DistanceConfig, query: &Prepared, stored: &Prepared) -> Vec<f64> {
    match cfg.kind {
        DistanceKind::Actions => set_based::actions_prefixes(query, stored),
        DistanceKind::Delta => set_based::delta_names_prefixes(query, stored),
        DistanceKind::Ngram => set_based::ngram_prefixes(query, stored),
        DistanceKind::Relational => relational::prefixes(cfg, query, stored),
    }
}
