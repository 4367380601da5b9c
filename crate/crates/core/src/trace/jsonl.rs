//! JSONL trace files.
//!
//! Line 1 is a header object; every further line is one step, carrying the
//! action plus either the literals added since the previous state
//! (`"encoding": "delta"`, with removed atoms under `"removed"`) or the whole
//! state (`"encoding": "full"`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{delta, ActionInstance, Atom, Label, Literal, State, Step, Trace, TraceMeta};
use crate::catalog::{Catalog, SymbolKind};
use crate::error::{CatalogError, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    #[default]
    Delta,
    Full,
}

#[derive(Serialize, Deserialize)]
struct Header {
    label: Option<Label>,
    seed: u64,
    horizon: u32,
    observability: String,
    #[serde(default)]
    encoding: Encoding,
    #[serde(default = "default_generator")]
    generator: String,
    #[serde(default)]
    truncated: bool,
    initial_state: Vec<Literal>,
}

fn default_generator() -> String {
    crate::GENERATOR_VERSION.to_string()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepLine {
    action: ActionInstance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state_delta: Option<Vec<Literal>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    removed: Vec<Atom>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state: Option<Vec<Literal>>,
}

fn check_literal(cat: &Catalog, line: usize, l: &Literal) -> Result<()> {
    let row = cat.lookup(&l.name)?;
    match (row.kind, l.value.is_some()) {
        (SymbolKind::Function, false) => {
            return Err(Error::parse(
                line,
                format!("function literal `{}` is missing its value", l.name),
            ))
        }
        (SymbolKind::Predicate, true) => {
            return Err(Error::parse(
                line,
                format!("predicate literal `{}` must not carry a value", l.name),
            ))
        }
        (SymbolKind::Action, _) => {
            return Err(CatalogError::Kind {
                symbol: l.name.clone(),
                expected: "action",
                found: "literal",
            }
            .into())
        }
        _ => {}
    }
    cat.check_literal(l)?;
    Ok(())
}

fn check_atom(cat: &Catalog, a: &Atom) -> Result<()> {
    let row = cat.lookup(&a.name)?;
    if row.arity() != a.args.len() {
        return Err(CatalogError::Arity {
            symbol: a.name.clone(),
            expected: row.arity(),
            found: a.args.len(),
        }
        .into());
    }
    Ok(())
}

/// Parses a trace, validating every symbol against the built-in catalog.
pub fn parse_trace(text: &str) -> Result<Trace> {
    parse_trace_with(text, Catalog::builtin())
}

pub fn parse_trace_with(text: &str, cat: &Catalog) -> Result<Trace> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (hline, htext) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing header line"))?;
    let header: Header =
        serde_json::from_str(htext).map_err(|e| Error::parse(hline, e.to_string()))?;
    for l in &header.initial_state {
        check_literal(cat, hline, l)?;
    }
    let initial_state: State = header.initial_state.into_iter().collect();
    let mut steps: Vec<Step> = Vec::new();
    for (n, text) in lines {
        let line: StepLine = serde_json::from_str(text).map_err(|e| Error::parse(n, e.to_string()))?;
        cat.check_action(&line.action)?;
        let prev = steps
            .last()
            .map(|s| &s.state)
            .unwrap_or(&initial_state);
        let state = match (header.encoding, line.state_delta, line.state) {
            (Encoding::Delta, Some(added), None) => {
                let mut s = prev.clone();
                for a in &line.removed {
                    check_atom(cat, a)?;
                    s.remove(a);
                }
                for l in added {
                    check_literal(cat, n, &l)?;
                    s.insert(l);
                }
                s
            }
            (Encoding::Full, None, Some(full)) if line.removed.is_empty() => {
                for l in &full {
                    check_literal(cat, n, l)?;
                }
                full.into_iter().collect()
            }
            (enc, _, _) => {
                return Err(Error::parse(
                    n,
                    format!("step does not match the `{enc:?}` encoding declared in the header"),
                ))
            }
        };
        steps.push(Step {
            action: line.action,
            state,
        });
    }
    Ok(Trace {
        initial_state,
        steps,
        label: header.label,
        meta: TraceMeta {
            seed: header.seed,
            horizon: header.horizon,
            observability: header.observability,
            generator: header.generator,
            truncated: header.truncated,
        },
    })
}

pub fn serialize_trace(t: &Trace, encoding: Encoding) -> String {
    let header = Header {
        label: t.label,
        seed: t.meta.seed,
        horizon: t.meta.horizon,
        observability: t.meta.observability.clone(),
        encoding,
        generator: t.meta.generator.clone(),
        truncated: t.meta.truncated,
        initial_state: t.initial_state.iter().collect(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for (i, step) in t.steps.iter().enumerate() {
        let prev = t.state_before(i);
        let line = match encoding {
            Encoding::Delta => StepLine {
                action: step.action.clone(),
                state_delta: Some(delta(prev, &step.state)),
                removed: prev.removed_in(&step.state),
                state: None,
            },
            Encoding::Full => StepLine {
                action: step.action.clone(),
                state_delta: None,
                removed: Vec::new(),
                state: Some(step.state.iter().collect()),
            },
        };
        out.push_str(&serde_json::to_string(&line).expect("step serializes"));
        out.push('\n');
    }
    out
}

pub fn write_trace(path: &Path, t: &Trace, encoding: Encoding) -> Result<()> {
    std::fs::write(path, serialize_trace(t, encoding)).map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text)
}
