//! Grounding and applying action schemas.

use std::collections::HashMap;

use rand::Rng;

use super::domain::{ActionSchema, Cond, Domain, Effect, Expr, Inject, LitPat, Op, Term};
use crate::amount::Amount;
use crate::error::{Error, Result};
use crate::trace::{ActionInstance, Atom, Literal, State};

/// Variable and parameter bindings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Env {
    pub objs: HashMap<String, String>,
    pub nums: HashMap<String, Amount>,
}

impl Env {
    pub fn obj(&self, var: &str) -> Option<&str> {
        self.objs.get(var).map(String::as_str)
    }

    pub fn term(&self, t: &Term) -> Result<String> {
        match t {
            Term::Const(c) => Ok(c.clone()),
            Term::Var(v) => self
                .objs
                .get(v)
                .cloned()
                .ok_or_else(|| Error::Sim(format!("unbound variable `?{v}`"))),
        }
    }

    pub fn ground(&self, p: &LitPat) -> Result<Atom> {
        let args = p.args.iter().map(|a| self.term(a)).collect::<Result<Vec<_>>>()?;
        Ok(Atom {
            name: p.name.clone(),
            args,
        })
    }

    fn is_ground(&self, p: &LitPat) -> bool {
        p.args.iter().all(|a| match a {
            Term::Const(_) => true,
            Term::Var(v) => self.objs.contains_key(v),
        })
    }
}

/// `None` when a function atom has no value in `s`.
pub fn eval(e: &Expr, env: &Env, s: &State) -> Result<Option<Amount>> {
    Ok(match e {
        Expr::Num(v) => Some(*v),
        Expr::Param(p) => Some(
            *env.nums
                .get(p)
                .ok_or_else(|| Error::Sim(format!("unbound parameter `${p}`")))?,
        ),
        Expr::Func(f) => s.value_of(&env.ground(f)?),
        Expr::Bin(a, op, b) => {
            let (Some(x), Some(y)) = (eval(a, env, s)?, eval(b, env, s)?) else {
                return Ok(None);
            };
            match op {
                Op::Add => Some(x + y),
                Op::Sub => Some(x - y),
                Op::Mul => Some(
                    x.checked_mul(y)
                        .ok_or_else(|| Error::Sim("amount overflow".into()))?,
                ),
            }
        }
    })
}

fn eval_required(e: &Expr, env: &Env, s: &State) -> Result<Amount> {
    eval(e, env, s)?.ok_or_else(|| Error::Sim(format!("undefined value in {e:?}")))
}

/// Truth of a condition whose variables are bound. A negated literal with
/// free variables holds when no state atom matches it.
pub fn holds(c: &Cond, env: &Env, s: &State) -> Result<bool> {
    Ok(match c {
        Cond::Pos(p) => s.contains_atom(&env.ground(p)?),
        Cond::Neg(p) if env.is_ground(p) => !s.contains_atom(&env.ground(p)?),
        Cond::Neg(p) => s.atoms().all(|a| unify(p, a, env).is_none()),
        Cond::Distinct(a, b) => env.term(a)? != env.term(b)?,
        Cond::Num(a, cmp, b) => match (eval(a, env, s)?, eval(b, env, s)?) {
            (Some(x), Some(y)) => cmp.holds(x, y),
            _ => false,
        },
    })
}

pub fn holds_all(cs: &[Cond], env: &Env, s: &State) -> Result<bool> {
    for c in cs {
        if !holds(c, env, s)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// New bindings that make `p` equal to `a`, if any.
fn unify(p: &LitPat, a: &Atom, env: &Env) -> Option<Vec<(String, String)>> {
    if p.name != a.name || p.args.len() != a.args.len() {
        return None;
    }
    let mut new: Vec<(String, String)> = Vec::new();
    for (t, v) in p.args.iter().zip(&a.args) {
        match t {
            Term::Const(c) if c != v => return None,
            Term::Const(_) => {}
            Term::Var(x) => {
                let known = env
                    .objs
                    .get(x)
                    .or_else(|| new.iter().find(|(k, _)| k == x).map(|(_, v)| v));
                match known {
                    Some(k) if k != v => return None,
                    Some(_) => {}
                    None => new.push((x.clone(), v.clone())),
                }
            }
        }
    }
    Some(new)
}

/// Every extension of `env` satisfying all conditions, in state order.
/// Positive literals bind variables; the other conditions filter.
pub fn solutions(conds: &[Cond], env: &Env, s: &State) -> Result<Vec<Env>> {
    let (pos, rest): (Vec<&Cond>, Vec<&Cond>) = conds.iter().partition(|c| matches!(c, Cond::Pos(_)));
    let mut frontier = vec![env.clone()];
    for c in pos {
        let Cond::Pos(p) = c else { unreachable!() };
        let mut next = Vec::new();
        for e in &frontier {
            if e.is_ground(p) {
                if s.contains_atom(&e.ground(p)?) {
                    next.push(e.clone());
                }
                continue;
            }
            for a in s.atoms() {
                if let Some(b) = unify(p, a, e) {
                    let mut e2 = e.clone();
                    e2.objs.extend(b);
                    next.push(e2);
                }
            }
        }
        frontier = next;
    }
    let mut out = Vec::new();
    for e in frontier {
        let mut ok = true;
        for c in &rest {
            if !holds(c, &e, s)? {
                ok = false;
                break;
            }
        }
        if ok {
            out.push(e);
        }
    }
    Ok(out)
}

pub fn inject_literal(i: &Inject, env: &Env, s: &State) -> Result<Literal> {
    let atom = env.ground(&i.lit)?;
    let value = match &i.value {
        Some(e) => Some(eval_required(e, env, s)?),
        None => None,
    };
    Ok(Literal {
        name: atom.name,
        args: atom.args,
        value,
    })
}

fn schema_env(schema: &ActionSchema, a: &ActionInstance) -> Result<Env> {
    if schema.params.len() != a.args.len() {
        return Err(Error::Sim(format!(
            "`{}` takes {} arguments, got {}",
            a.name,
            schema.params.len(),
            a.args.len()
        )));
    }
    let mut env = Env::default();
    for (p, v) in schema.params.iter().zip(&a.args) {
        env.objs.insert(p.clone(), v.clone());
    }
    Ok(env)
}

fn schema_for<'d>(d: &'d Domain, a: &ActionInstance) -> Result<&'d ActionSchema> {
    d.action(&a.name)
        .ok_or_else(|| Error::Sim(format!("no schema for `{}`", a.name)))
}

/// Preconditions of `a` that fail in `s`.
pub fn unmet_preconditions(d: &Domain, s: &State, a: &ActionInstance) -> Result<Vec<Cond>> {
    let schema = schema_for(d, a)?;
    let env = schema_env(schema, a)?;
    let mut out = Vec::new();
    for c in &schema.pre {
        if !holds(c, &env, s)? {
            out.push(c.clone());
        }
    }
    Ok(out)
}

/// Applies `a` to `s` assuming its preconditions hold: delete list, then
/// add list, then numeric effects evaluated in the pre-action state.
pub fn apply(d: &Domain, s: &State, a: &ActionInstance) -> Result<State> {
    let schema = schema_for(d, a)?;
    let env = schema_env(schema, a)?;
    let mut adds = Vec::new();
    let mut dels = Vec::new();
    let mut num = Vec::new();
    for e in &schema.effects {
        match e {
            Effect::Add(p) => adds.push(env.ground(p)?),
            Effect::Del(p) => dels.push(env.ground(p)?),
            Effect::Set(f, x) => num.push((env.ground(f)?, eval_required(x, &env, s)?)),
            Effect::Inc(f, x) | Effect::Dec(f, x) => {
                let atom = env.ground(f)?;
                let old = s.value_of(&atom).unwrap_or(Amount::ZERO);
                let delta = eval_required(x, &env, s)?;
                let v = if matches!(e, Effect::Inc(..)) { old + delta } else { old - delta };
                num.push((atom, v));
            }
        }
    }
    let mut next = s.clone();
    for atom in &dels {
        if !adds.contains(atom) {
            next.remove(atom);
        }
    }
    for atom in adds {
        if !next.contains_atom(&atom) {
            next.set(atom, None);
        }
    }
    for (atom, v) in num {
        next.set(atom, Some(v));
    }
    Ok(next)
}

/// One attempt at executing `a`. `inject` holds literals supplied by goal
/// generation that enter the state together with the action. A failure draw
/// leaves the state untouched and reports `false`; a violated precondition
/// is a planning bug and an error.
pub fn execute_step<R: Rng + ?Sized>(
    d: &Domain,
    s: &State,
    a: &ActionInstance,
    inject: &[Literal],
    failure_prob: f64,
    rng: &mut R,
) -> Result<(State, bool)> {
    if failure_prob > 0.0 && rng.gen::<f64>() < failure_prob {
        return Ok((s.clone(), false));
    }
    let mut pre = s.clone();
    for l in inject {
        pre.insert(l.clone());
    }
    let unmet = unmet_preconditions(d, &pre, a)?;
    if !unmet.is_empty() {
        return Err(Error::Sim(format!("`{a}` executed with unmet preconditions {unmet:?}")));
    }
    Ok((apply(d, &pre, a)?, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dom() -> &'static Domain {
        Domain::builtin()
    }

    fn bal(a: &str, v: i64) -> Literal {
        Literal::func("balance", [a], Amount::from_units(v))
    }

    #[test]
    fn quick_deposit_adds_the_amount() {
        let mut s = State::new();
        s.insert(Literal::pred("account-owner", ["c1", "a1"]));
        s.insert(bal("a1", 100));
        let a = ActionInstance::new("quick-deposit", ["c1", "a1", "t1"]);
        let inj = [Literal::func("transaction-amount", ["t1"], Amount::from_units(500))];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (next, ok) = execute_step(dom(), &s, &a, &inj, 0.0, &mut rng).unwrap();
        assert!(ok);
        assert_eq!(next.value_of(&Atom::new("balance", ["a1"])), Some(Amount::from_units(600)));
        assert!(next.contains(&Literal::pred("transaction-destination", ["t1", "a1"])));
    }

    #[test]
    fn certain_failure_leaves_state_unchanged() {
        let s = State::new();
        let a = ActionInstance::new("work", ["c1"]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (next, ok) = execute_step(dom(), &s, &a, &[], 1.0, &mut rng).unwrap();
        assert!(!ok);
        assert_eq!(next, s);
    }

    #[test]
    fn violated_precondition_is_an_error() {
        let s = State::new();
        let a = ActionInstance::new("work", ["c1"]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(execute_step(dom(), &s, &a, &[], 0.0, &mut rng), Err(Error::Sim(_))));
    }

    #[test]
    fn create_account_sets_owner_country_and_balance() {
        let s = State::new();
        let a = ActionInstance::new("create-account", ["customer-234", "acc-345"]);
        let next = apply(dom(), &s, &a).unwrap();
        assert!(next.contains(&Literal::pred("account-owner", ["customer-234", "acc-345"])));
        assert!(next.contains(&Literal::pred("account-country", ["acc-345", "home"])));
        assert_eq!(next.value_of(&Atom::new("balance", ["acc-345"])), Some(Amount::ZERO));
    }

    #[test]
    fn delete_then_add_keeps_a_readded_atom() {
        let text = "tracelab-domain 1\naction work ?c\n  del employed(?c)\n  add employed(?c)\nend\n";
        let d = Domain::parse(text).unwrap();
        let mut s = State::new();
        s.insert(Literal::pred("employed", ["c1"]));
        let next = apply(&d, &s, &ActionInstance::new("work", ["c1"])).unwrap();
        assert!(next.contains_atom(&Atom::new("employed", ["c1"])));
    }

    #[test]
    fn solutions_join_and_filter() {
        let mut s = State::new();
        s.insert(Literal::pred("has-company", ["c", "co1"]));
        s.insert(Literal::pred("account-owner", ["c", "a0"]));
        s.insert(Literal::pred("account-owner", ["co1", "a1"]));
        s.insert(Literal::pred("has-card", ["c", "a0"]));
        s.insert(bal("a1", 5));
        s.insert(bal("a0", 0));
        let d = Domain::parse(
            "tracelab-domain 1\ntemplate t\n  bind ?co ?a : has-company(?c, ?co), account-owner(?co, ?a)\n  bind ?b : account-owner(?c, ?b), not has-card(?c, ?b), balance(?b) > 0\nend\n",
        )
        .unwrap();
        let body = &d.templates["t"].body;
        let mut env = Env::default();
        env.objs.insert("c".into(), "c".into());
        let super::super::domain::Stmt::Bind { conds, .. } = &body[0] else { panic!() };
        let sols = solutions(conds, &env, &s).unwrap();
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].obj("a"), Some("a1"));
        let super::super::domain::Stmt::Bind { conds, .. } = &body[1] else { panic!() };
        assert!(solutions(conds, &env, &s).unwrap().is_empty());
        s.insert(Literal::pred("account-owner", ["c", "a1"]));
        let sols = solutions(conds, &env, &s).unwrap();
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].obj("b"), Some("a1"));
    }
}
