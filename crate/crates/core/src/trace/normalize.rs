use std::collections::HashMap;

use super::{ActionInstance, State, Step, Trace};

/// Name of the `k`-th (1-based) constant in a normalized trace.
pub fn normalized_constant(k: usize) -> String {
    format!("i{k}")
}

struct Renamer {
    map: HashMap<String, String>,
}

impl Renamer {
    fn name(&mut self, c: &str) -> String {
        let next = self.map.len() + 1;
        self.map
            .entry(c.to_string())
            .or_insert_with(|| normalized_constant(next))
            .clone()
    }

    fn args(&mut self, args: &[String]) -> Vec<String> {
        args.iter().map(|a| self.name(a)).collect()
    }

    fn state(&mut self, s: &State) -> State {
        let mut out = State::new();
        for (atom, value) in s.entries() {
            let args = self.args(&atom.args);
            out.set(
                super::Atom {
                    name: atom.name.clone(),
                    args,
                },
                value,
            );
        }
        out
    }
}

/// Replaces every constant with `i<k>`, `k` being its order of first
/// appearance: initial state first, then each step's action arguments
/// followed by its state, left to right.
///
/// A prefix of the normalized trace is the normalization of the prefix.
pub fn normalize_trace(t: &Trace) -> Trace {
    let mut r = Renamer {
        map: HashMap::new(),
    };
    let initial_state = r.state(&t.initial_state);
    let steps = t
        .steps
        .iter()
        .map(|step| {
            let action = ActionInstance {
                name: step.action.name.clone(),
                args: r.args(&step.action.args),
            };
            Step {
                action,
                state: r.state(&step.state),
            }
        })
        .collect();
    Trace {
        initial_state,
        steps,
        label: t.label,
        meta: t.meta.clone(),
    }
}

pub fn is_normalized(t: &Trace) -> bool {
    normalize_trace(t).ordered_eq(t)
}
