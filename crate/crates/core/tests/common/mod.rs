#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use tracelab_core::amount::Amount;
use tracelab_core::observability::{filter_trace, ObservabilityModel as M};
use tracelab_core::sim::domain::{Domain, Effect};
use tracelab_core::sim::exec::{apply, unmet_preconditions};
use tracelab_core::sim::{simulate, Env, ProfileOptions, SimConfig, SimOutput};
use tracelab_core::trace::{Label, State, Step, Trace};

/// `n` simulations alternating good and bad, cycling through the default and
/// comparison profiles, a few goal probabilities and horizons.
pub fn corpus(n: usize, failure_prob: f64) -> Vec<(SimConfig, SimOutput)> {
    (0..n)
        .map(|i| {
            let cfg = SimConfig {
                seed: 7000 + i as u64,
                label: if i % 2 == 0 { Label::Good } else { Label::Bad },
                horizon: [50, 80, 120][i % 3],
                goal_prob: [0.3, 1.0, 0.6][(i / 2) % 3],
                failure_prob,
                profile: if (i / 3) % 2 == 0 {
                    ProfileOptions::default()
                } else {
                    ProfileOptions::comparison()
                },
                ..Default::default()
            };
            let out = simulate(&cfg).unwrap_or_else(|e| panic!("seed {}: {e}", cfg.seed));
            (cfg, out)
        })
        .collect()
}

pub const HIDDEN: [&str; 15] = [
    "money-laundering",
    "money-laundered",
    "has-dirty-money",
    "criminal",
    "owes-money",
    "enjoyed-service",
    "provides-service",
    "owns",
    "dirty-money",
    "criminal-income",
    "working-day",
    "days-without-pay",
    "salary",
    "price",
    "owed-money",
];

pub const ALIASES: [&str; 6] = [
    "placement-cash-in",
    "placement-digital",
    "integration-cash-out",
    "integration-pay-bill",
    "placement-buy-direct",
    "placement-enjoyed-service",
];
const ALIAS_TARGETS: [&str; 6] = [
    "quick-deposit",
    "digital-deposit",
    "cash-out",
    "pay-bill",
    "buy-direct",
    "enjoy-service",
];

/// Full-trace symbols as an observer names them.
fn aliased(s: &BTreeSet<String>) -> BTreeSet<String> {
    s.iter()
        .map(|n| match ALIASES.iter().position(|a| a == n) {
            Some(i) => ALIAS_TARGETS[i].to_string(),
            None => n.clone(),
        })
        .collect()
}

pub const PLACEMENT: [&str; 4] = [
    "placement-cash-in",
    "placement-digital",
    "placement-buy-direct",
    "placement-enjoyed-service",
];
pub const INTEGRATION: [&str; 3] = ["integration-cash-out", "integration-pay-bill", "finish-money-laundering"];
pub const TRANSFERS: [&str; 4] = ["move-funds", "move-funds-self", "move-funds-internationally", "quick-payment"];

pub fn symbols(t: &Trace) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = t.initial_state.iter().map(|l| l.name).collect();
    for s in &t.steps {
        out.insert(s.action.name.clone());
        out.extend(s.state.iter().map(|l| l.name));
    }
    out
}

fn subset(a: &BTreeSet<String>, b: &BTreeSet<String>, what: &str) -> Result<(), String> {
    let extra: Vec<_> = a.difference(b).collect();
    if extra.is_empty() {
        Ok(())
    } else {
        Err(format!("{what}: {extra:?}"))
    }
}

/// Containment chain, opacity, idempotence, and agreement with the
/// simulator's own observed trace.
pub fn check_filters(cfg: &SimConfig, out: &SimOutput) -> Result<(), String> {
    let full = &out.full;
    let id = format!("seed {}", cfg.seed);
    let filtered = |m| filter_trace(full, m).map_err(|e| format!("{id} {m}: {e}"));
    let sym = |m| filtered(m).map(|t| symbols(&t));
    if sym(M::Full)? != symbols(full) {
        return Err(format!("{id}: full is not the identity"));
    }
    let (b, n, t, nc, l) = (
        sym(M::Bank)?,
        sym(M::Network)?,
        sym(M::Transactions)?,
        sym(M::NoCompanies)?,
        sym(M::Limited)?,
    );
    subset(&l, &nc, &format!("{id} limited ⊆ no-companies"))?;
    subset(&nc, &b, &format!("{id} no-companies ⊆ bank"))?;
    subset(&b, &aliased(&symbols(full)), &format!("{id} bank ⊆ aliased full"))?;
    subset(&n, &b, &format!("{id} network ⊆ bank"))?;
    subset(&t, &b, &format!("{id} transactions ⊆ bank"))?;
    for m in M::ALL.into_iter().filter(|m| *m != M::Full) {
        let obs = filtered(m)?;
        if let Some(s) = symbols(&obs)
            .into_iter()
            .find(|s| HIDDEN.contains(&s.as_str()) || ALIASES.contains(&s.as_str()))
        {
            return Err(format!("{id} {m}: `{s}` leaks"));
        }
        if obs
            .action_names()
            .any(|a| a == "perform-criminal-action" || a == "finish-money-laundering")
        {
            return Err(format!("{id} {m}: criminal bookkeeping action leaks"));
        }
        if filter_trace(&obs, m).map_err(|e| e.to_string())? != obs {
            return Err(format!("{id} {m}: not idempotent"));
        }
    }
    if out.observed != filtered(cfg.observability)? {
        return Err(format!("{id}: observed trace differs from filtering the full one"));
    }
    Ok(())
}

/// Literals that entered the state with the action without being one of its
/// effects (amounts and objects supplied by goal generation).
fn injected(d: &Domain, prev: &State, step: &Step) -> Result<State, String> {
    let schema = d
        .action(&step.action.name)
        .ok_or_else(|| format!("no schema for `{}`", step.action.name))?;
    let mut env = Env::default();
    for (p, v) in schema.params.iter().zip(&step.action.args) {
        env.objs.insert(p.clone(), v.clone());
    }
    let mut targets = HashSet::new();
    for e in &schema.effects {
        let (Effect::Add(p) | Effect::Del(p) | Effect::Set(p, _) | Effect::Inc(p, _) | Effect::Dec(p, _)) = e;
        targets.insert(env.ground(p).map_err(|e| e.to_string())?);
    }
    Ok(step
        .state
        .iter()
        .filter(|l| !prev.contains_atom(&l.atom()) && !targets.contains(&l.atom()))
        .collect())
}

/// Every step's action was applicable in the preceding state (plus what
/// arrived with it) and produced exactly the recorded state.
pub fn check_replay(d: &Domain, t: &Trace, id: &str) -> Result<(), String> {
    for (i, step) in t.steps.iter().enumerate() {
        let prev = t.state_before(i);
        let mut pre = prev.clone();
        for l in injected(d, prev, step)?.iter() {
            pre.insert(l);
        }
        let unmet = unmet_preconditions(d, &pre, &step.action).map_err(|e| e.to_string())?;
        if !unmet.is_empty() {
            return Err(format!("{id} step {i} `{}`: unmet {unmet:?}", step.action));
        }
        if apply(d, &pre, &step.action).map_err(|e| e.to_string())? != step.state {
            return Err(format!("{id} step {i} `{}`: state differs from replay", step.action));
        }
    }
    Ok(())
}

pub fn first(t: &Trace, names: &[&str]) -> Option<usize> {
    t.action_names().position(|a| names.contains(&a))
}

/// Crime before placement before layering before integration; standard
/// customers never launder. Returns whether all phases occurred.
pub fn check_phases(label: Label, t: &Trace, id: &str) -> Result<bool, String> {
    if label == Label::Good {
        return match first(t, &[&PLACEMENT[..], &INTEGRATION[..], &["perform-criminal-action", "layering"]].concat()) {
            Some(i) => Err(format!("{id}: standard customer laundering at step {i}")),
            None => Ok(false),
        };
    }
    let order = [
        first(t, &["perform-criminal-action"]),
        first(t, &PLACEMENT),
        first(t, &["layering"]),
        first(t, &INTEGRATION),
    ];
    for w in 1..order.len() {
        if let Some(later) = order[w] {
            match order[w - 1] {
                Some(earlier) if earlier < later => {}
                _ => return Err(format!("{id}: phase order {order:?}")),
            }
        }
    }
    Ok(order[3].is_some())
}

fn balance(s: &State, acct: &str) -> Option<Amount> {
    s.lookup("balance", &[acct.to_string()]).flatten()
}

/// Transfers between two accounts with known balances leave their sum
/// unchanged. Returns the number of transfers checked.
pub fn check_conservation(t: &Trace, id: &str) -> Result<usize, String> {
    let mut seen = 0;
    for (i, step) in t.steps.iter().enumerate() {
        if !TRANSFERS.contains(&step.action.name.as_str()) {
            continue;
        }
        let (from, to) = (&step.action.args[1], &step.action.args[2]);
        let prev = t.state_before(i);
        let (Some(f0), Some(t0)) = (balance(prev, from), balance(prev, to)) else {
            continue;
        };
        let after = (balance(&step.state, from), balance(&step.state, to));
        let (Some(f1), Some(t1)) = after else {
            return Err(format!("{id} step {i}: balance vanished"));
        };
        if f0 + t0 != f1 + t1 || f1 >= f0 {
            return Err(format!("{id} step {i} `{}`: {f0}+{t0} -> {f1}+{t1}", step.action));
        }
        seen += 1;
    }
    Ok(seen)
}

