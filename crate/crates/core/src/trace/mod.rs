//! Grounded literals, states, and action/state traces.

mod jsonl;
mod normalize;

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::amount::Amount;

pub use jsonl::{parse_trace, read_trace, serialize_trace, write_trace, Encoding};
pub use normalize::{is_normalized, normalize_trace, normalized_constant};

/// The identity of a literal without its numeric value: `name(args…)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub name: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl Atom {
    pub fn new<S: Into<String>>(name: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        Atom {
            name: name.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(","))
    }
}

/// A grounded predicate (`value == None`) or function atom (`value == Some`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub name: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Amount>,
}

impl Literal {
    pub fn pred<S: Into<String>>(name: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        Literal {
            name: name.into(),
            args: args.into_iter().map(Into::into).collect(),
            value: None,
        }
    }

    pub fn func<S: Into<String>>(
        name: impl Into<String>,
        args: impl IntoIterator<Item = S>,
        value: Amount,
    ) -> Self {
        Literal {
            value: Some(value),
            ..Literal::pred(name, args)
        }
    }

    pub fn is_function(&self) -> bool {
        self.value.is_some()
    }

    pub fn atom(&self) -> Atom {
        Atom {
            name: self.name.clone(),
            args: self.args.clone(),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(","))?;
        if let Some(v) = self.value {
            write!(f, "={v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionInstance {
    pub name: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl ActionInstance {
    pub fn new<S: Into<String>>(name: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        ActionInstance {
            name: name.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for ActionInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(","))
    }
}

/// A set of literals. Keyed by atom, so a function atom holds exactly one
/// value. Insertion order is kept and drives constant normalization;
/// equality ignores it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct State {
    facts: IndexMap<Atom, Option<Amount>>,
}

impl State {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Inserts or overwrites. A new atom goes to the end; an existing one keeps its slot.
    pub fn insert(&mut self, lit: Literal) {
        let Literal { name, args, value } = lit;
        self.facts.insert(Atom { name, args }, value);
    }

    pub fn set(&mut self, atom: Atom, value: Option<Amount>) {
        self.facts.insert(atom, value);
    }

    pub fn remove(&mut self, atom: &Atom) -> bool {
        self.facts.shift_remove(atom).is_some()
    }

    pub fn contains_atom(&self, atom: &Atom) -> bool {
        self.facts.contains_key(atom)
    }

    pub fn contains(&self, lit: &Literal) -> bool {
        self.lookup(&lit.name, &lit.args)
            .is_some_and(|v| v == lit.value)
    }

    /// `Some(value)` when the atom is present (`value` is `None` for predicates).
    pub fn lookup(&self, name: &str, args: &[String]) -> Option<Option<Amount>> {
        // IndexMap needs an owned key for Borrow-free lookups; atoms are small.
        self.facts
            .get(&Atom {
                name: name.to_string(),
                args: args.to_vec(),
            })
            .copied()
    }

    pub fn value_of(&self, atom: &Atom) -> Option<Amount> {
        self.facts.get(atom).copied().flatten()
    }

    pub fn iter(&self) -> impl Iterator<Item = Literal> + '_ {
        self.facts.iter().map(|(a, v)| Literal {
            name: a.name.clone(),
            args: a.args.clone(),
            value: *v,
        })
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Atom, Option<Amount>)> + '_ {
        self.facts.iter().map(|(a, v)| (a, *v))
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> + '_ {
        self.facts.keys()
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&Atom) -> bool) {
        self.facts.retain(|a, _| keep(a));
    }

    /// Atoms present in `self` but not in `next`, in `self` order.
    pub fn removed_in(&self, next: &State) -> Vec<Atom> {
        self.facts
            .keys()
            .filter(|a| !next.facts.contains_key(*a))
            .cloned()
            .collect()
    }

    /// Byte-level equality: same literals in the same order.
    pub fn ordered_eq(&self, other: &State) -> bool {
        self.facts.len() == other.facts.len()
            && self.facts.iter().zip(other.facts.iter()).all(|(a, b)| a == b)
    }
}

impl FromIterator<Literal> for State {
    fn from_iter<I: IntoIterator<Item = Literal>>(iter: I) -> Self {
        let mut s = State::new();
        for l in iter {
            s.insert(l);
        }
        s
    }
}

impl Serialize for State {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for State {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let lits = Vec::<Literal>::deserialize(d)?;
        Ok(lits.into_iter().collect())
    }
}

/// Literals of `next` that are not literals of `prev`. A function whose value
/// changed is a different literal and is included; removals are not.
pub fn delta(prev: &State, next: &State) -> Vec<Literal> {
    next.facts
        .iter()
        .filter(|(atom, value)| prev.facts.get(*atom) != Some(*value))
        .map(|(a, v)| Literal {
            name: a.name.clone(),
            args: a.args.clone(),
            value: *v,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Good,
    Bad,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Good => "good",
            Label::Bad => "bad",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "good" => Ok(Label::Good),
            "bad" => Ok(Label::Bad),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub seed: u64,
    pub horizon: u32,
    pub observability: String,
    pub generator: String,
    /// Set when the simulation stopped early after repeated planning failures.
    pub truncated: bool,
}

impl Default for TraceMeta {
    fn default() -> Self {
        TraceMeta {
            seed: 0,
            horizon: 0,
            observability: "full".to_string(),
            generator: crate::GENERATOR_VERSION.to_string(),
            truncated: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub action: ActionInstance,
    pub state: State,
}

/// `s0, a1, s1, …, an, sn` with an optional class label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    pub initial_state: State,
    pub steps: Vec<Step>,
    pub label: Option<Label>,
    pub meta: TraceMeta,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// State before step `i` (0-based), i.e. `s_i` in the `s0, a1, s1` numbering.
    pub fn state_before(&self, i: usize) -> &State {
        if i == 0 {
            &self.initial_state
        } else {
            &self.steps[i - 1].state
        }
    }

    pub fn final_state(&self) -> &State {
        self.steps
            .last()
            .map(|s| &s.state)
            .unwrap_or(&self.initial_state)
    }

    /// One delta per action.
    pub fn deltas(&self) -> Vec<Vec<Literal>> {
        (0..self.steps.len())
            .map(|i| delta(self.state_before(i), &self.steps[i].state))
            .collect()
    }

    /// The first `j` steps with the same initial state, label and metadata.
    pub fn prefix(&self, j: usize) -> Trace {
        Trace {
            initial_state: self.initial_state.clone(),
            steps: self.steps[..j.min(self.steps.len())].to_vec(),
            label: self.label,
            meta: self.meta.clone(),
        }
    }

    pub fn action_names(&self) -> impl Iterator<Item = &str> + '_ {
        self.steps.iter().map(|s| s.action.name.as_str())
    }

    /// Equality including the order of literals inside every state.
    pub fn ordered_eq(&self, other: &Trace) -> bool {
        self == other
            && self.initial_state.ordered_eq(&other.initial_state)
            && self
                .steps
                .iter()
                .zip(&other.steps)
                .all(|(a, b)| a.state.ordered_eq(&b.state))
    }
}
