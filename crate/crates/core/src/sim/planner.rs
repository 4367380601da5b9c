//! Plan-library instantiation.
//!
//! A template is interpreted against a projected copy of the state. Every
//! `do` is checked against its schema and applied to the projection, so a
//! returned plan is valid when executed from the state it was built for.
//! `bind … else` and `need … else` repair missing objects or funds by
//! expanding another template in place.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rand::Rng;

use super::domain::{Call, Cond, Dist, Domain, Stmt, Template, AGENT_VAR};
use super::exec::{apply, eval, holds_all, inject_literal, solutions, unmet_preconditions, Env};
use crate::amount::Amount;
use crate::error::{Error, Result};
use crate::trace::{ActionInstance, Literal, State};

/// Upper bound on interpreted statements per expansion.
const STATEMENT_BUDGET: usize = 200_000;
const MAX_LOOP: i64 = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedAction {
    pub action: ActionInstance,
    /// Literals entering the state just before the action executes.
    pub inject: Vec<Literal>,
}

/// A grounded plan for one goal.
#[derive(Debug, Clone)]
pub struct Expansion {
    pub template: String,
    pub actions: Vec<PlannedAction>,
    pub goal: Vec<Cond>,
    pub env: Env,
    /// Injections with no later action to ride on.
    pub leftover: Vec<Literal>,
    pub projected: State,
}

/// Per-type counters for fresh object names (`account-3`, ...).
#[derive(Debug, Clone, Default)]
pub struct FreshNames {
    next: BTreeMap<String, usize>,
}

impl FreshNames {
    pub fn name(&mut self, kind: &str) -> String {
        let n = self.next.entry(kind.to_string()).or_insert(1);
        let out = format!("{kind}-{n}");
        *n += 1;
        out
    }
}

/// Why a template could not be instantiated.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanFailure(pub String);

enum Stop {
    Fail(String),
    Err(Error),
}

impl From<Error> for Stop {
    fn from(e: Error) -> Self {
        Stop::Err(e)
    }
}

type Flow<T> = std::result::Result<T, Stop>;

pub struct Planner<'a, R: Rng + ?Sized> {
    pub domain: &'a Domain,
    pub params: &'a HashMap<String, Amount>,
    pub agent: &'a str,
    pub rng: &'a mut R,
    pub fresh: &'a mut FreshNames,
    pub deadline: Option<Instant>,
}

struct Ctx {
    proj: State,
    pending: Vec<Literal>,
    out: Vec<PlannedAction>,
    goal: Vec<Cond>,
    steps: usize,
}

impl<'a, R: Rng + ?Sized> Planner<'a, R> {
    /// Instantiates `template` from `state`. Planning failures (no binding,
    /// unmet schema preconditions, exhausted repairs, time bound) come back
    /// as `Ok(Err(..))`; malformed templates are errors.
    pub fn expand(&mut self, template: &str, state: &State) -> Result<std::result::Result<Expansion, PlanFailure>> {
        let t = self.template(template)?;
        let mut ctx = Ctx {
            proj: state.clone(),
            pending: Vec::new(),
            out: Vec::new(),
            goal: Vec::new(),
            steps: 0,
        };
        let mut env = self.base_env();
        match self.block(&t.body, &mut env, &mut ctx, true) {
            Ok(()) => Ok(Ok(Expansion {
                template: template.to_string(),
                actions: ctx.out,
                goal: ctx.goal,
                env,
                leftover: ctx.pending,
                projected: ctx.proj,
            })),
            Err(Stop::Fail(m)) => Ok(Err(PlanFailure(format!("{template}: {m}")))),
            Err(Stop::Err(e)) => Err(e),
        }
    }

    fn template(&self, name: &str) -> Result<&'a Template> {
        self.domain
            .template(name)
            .ok_or_else(|| Error::Sim(format!("unknown template `{name}`")))
    }

    fn base_env(&self) -> Env {
        let mut env = Env {
            objs: HashMap::new(),
            nums: self.params.clone(),
        };
        env.objs.insert(AGENT_VAR.to_string(), self.agent.to_string());
        env
    }

    fn call(&mut self, call: &Call, env: &Env, ctx: &mut Ctx) -> Flow<()> {
        let t = self.template(&call.template)?;
        let mut sub = self.base_env();
        for (p, a) in t.params.iter().zip(&call.args) {
            sub.objs.insert(p.clone(), env.term(a)?);
        }
        self.block(&t.body, &mut sub, ctx, false)
    }

    fn tick(&self, ctx: &mut Ctx) -> Flow<()> {
        ctx.steps += 1;
        if ctx.steps > STATEMENT_BUDGET {
            return Err(Stop::Fail("statement budget exhausted".into()));
        }
        if let Some(d) = self.deadline {
            if Instant::now() > d {
                return Err(Stop::Fail("time bound exceeded".into()));
            }
        }
        Ok(())
    }

    fn amount(&self, e: &super::domain::Expr, env: &Env, ctx: &Ctx) -> Flow<Amount> {
        eval(e, env, &ctx.proj)?.ok_or_else(|| Stop::Fail(format!("undefined value in {e:?}")))
    }

    fn block(&mut self, body: &[Stmt], env: &mut Env, ctx: &mut Ctx, top: bool) -> Flow<()> {
        for s in body {
            self.tick(ctx)?;
            match s {
                Stmt::Goal(conds) => {
                    if top {
                        ctx.goal.extend(conds.iter().cloned());
                    }
                }
                Stmt::Fresh { var, kind } => {
                    let name = self.fresh.name(kind);
                    env.objs.insert(var.clone(), name);
                }
                Stmt::Draw { param, dist } => {
                    let v = self.draw(dist, env, ctx)?;
                    env.nums.insert(param.clone(), v);
                }
                Stmt::LetNum { param, expr } => {
                    let v = self.amount(expr, env, ctx)?;
                    env.nums.insert(param.clone(), v);
                }
                Stmt::LetVar { var, from } => {
                    let v = env.term(&super::domain::Term::Var(from.clone()))?;
                    env.objs.insert(var.clone(), v);
                }
                Stmt::Init(i) => {
                    let lit = inject_literal(i, env, &ctx.proj)?;
                    ctx.proj.insert(lit.clone());
                    ctx.pending.push(lit);
                }
                Stmt::Bind { vars, conds, repair } => {
                    let mut sols = self.bindings(vars, conds, env, ctx)?;
                    if sols.is_empty() {
                        if let Some(c) = repair {
                            self.call(c, env, ctx)?;
                            sols = self.bindings(vars, conds, env, ctx)?;
                        }
                    }
                    if sols.is_empty() {
                        return Err(Stop::Fail(format!("nothing to bind {vars:?}")));
                    }
                    let pick = sols.swap_remove(self.rng.gen_range(0..sols.len()));
                    for (v, o) in vars.iter().zip(pick) {
                        env.objs.insert(v.clone(), o);
                    }
                }
                Stmt::Need { conds, repair, max } => {
                    let mut tries = 0;
                    while !holds_all(conds, env, &ctx.proj)? {
                        if tries == *max {
                            return Err(Stop::Fail(format!("still unmet after {max} repairs")));
                        }
                        self.call(repair, env, ctx)?;
                        tries += 1;
                    }
                }
                Stmt::Do { action, args, with } => {
                    let args = args.iter().map(|a| env.term(a)).collect::<Result<Vec<_>>>()?;
                    let inst = ActionInstance {
                        name: action.clone(),
                        args,
                    };
                    let mut inject = std::mem::take(&mut ctx.pending);
                    for w in with {
                        let lit = inject_literal(w, env, &ctx.proj)?;
                        ctx.proj.insert(lit.clone());
                        inject.push(lit);
                    }
                    let unmet = unmet_preconditions(self.domain, &ctx.proj, &inst)?;
                    if !unmet.is_empty() {
                        return Err(Stop::Fail(format!("`{inst}` not applicable: {unmet:?}")));
                    }
                    ctx.proj = apply(self.domain, &ctx.proj, &inst)?;
                    ctx.out.push(PlannedAction { action: inst, inject });
                }
                Stmt::Repeat { count, body } => {
                    let n = self.count(count, env, ctx)?;
                    for _ in 0..n {
                        self.block(body, env, ctx, top)?;
                    }
                }
                Stmt::Split { param, total, below, body } => {
                    let total = self.amount(total, env, ctx)?;
                    let thr = self.amount(below, env, ctx)?;
                    if thr <= Amount::ZERO {
                        return Err(Stop::Err(Error::Sim("split threshold must be positive".into())));
                    }
                    let mut left = total;
                    let mut rounds = 0;
                    while left > Amount::ZERO {
                        rounds += 1;
                        if rounds > MAX_LOOP {
                            return Err(Stop::Fail("too many chunks".into()));
                        }
                        let chunk = self.chunk(left, thr);
                        env.nums.insert(param.clone(), chunk);
                        self.block(body, env, ctx, top)?;
                        left = left - chunk;
                    }
                }
            }
        }
        Ok(())
    }

    /// Distinct assignments to `vars`, in state order.
    fn bindings(&self, vars: &[String], conds: &[Cond], env: &Env, ctx: &Ctx) -> Flow<Vec<Vec<String>>> {
        let mut out: Vec<Vec<String>> = Vec::new();
        for e in solutions(conds, env, &ctx.proj)? {
            let row = vars
                .iter()
                .map(|v| e.term(&super::domain::Term::Var(v.clone())))
                .collect::<Result<Vec<_>>>()?;
            if !out.contains(&row) {
                out.push(row);
            }
        }
        Ok(out)
    }

    fn count(&self, e: &super::domain::Expr, env: &Env, ctx: &Ctx) -> Flow<i64> {
        let v = self.amount(e, env, ctx)?;
        let n = v.raw() / Amount::from_units(1).raw();
        if !(0..=MAX_LOOP).contains(&n) {
            return Err(Stop::Err(Error::Sim(format!("repeat count {v} out of range"))));
        }
        Ok(n)
    }

    /// A chunk strictly below `thr`: the remainder when it fits, otherwise a
    /// whole-unit amount in `[0.6 thr, thr)`.
    fn chunk(&mut self, left: Amount, thr: Amount) -> Amount {
        if left < thr {
            return left;
        }
        let unit = Amount::from_units(1).raw();
        let hi = (thr.raw() - 1) / unit;
        let lo = ((thr.raw() * 6 / 10) / unit).clamp(1, hi.max(1));
        if hi < 1 {
            // thresholds under one unit: fall back to the smallest step
            return Amount::from_raw(thr.raw() - 1).min(left);
        }
        Amount::from_units(self.rng.gen_range(lo..=hi))
    }

    fn draw(&mut self, d: &Dist, env: &Env, ctx: &Ctx) -> Flow<Amount> {
        let (lo, hi) = match d {
            Dist::LogUniform(a, b) | Dist::Uniform(a, b) | Dist::Int(a, b) => {
                (self.amount(a, env, ctx)?, self.amount(b, env, ctx)?)
            }
        };
        if lo > hi {
            return Err(Stop::Err(Error::Config(format!("empty range [{lo}, {hi}]"))));
        }
        let v = match d {
            Dist::Int(..) => {
                let unit = Amount::from_units(1).raw();
                Amount::from_units(self.rng.gen_range(lo.raw() / unit..=hi.raw() / unit))
            }
            Dist::Uniform(..) => {
                let x = lo.to_f64() + self.rng.gen::<f64>() * (hi.to_f64() - lo.to_f64());
                to_cents(x)
            }
            Dist::LogUniform(..) => {
                if lo <= Amount::ZERO {
                    return Err(Stop::Err(Error::Config(format!(
                        "log-uniform range must be positive, got [{lo}, {hi}]"
                    ))));
                }
                let (a, b) = (lo.to_f64().ln(), hi.to_f64().ln());
                to_cents((a + self.rng.gen::<f64>() * (b - a)).exp())
            }
        };
        Ok(v)
    }
}

fn to_cents(x: f64) -> Amount {
    Amount::from_f64(x).unwrap_or(Amount::ZERO).truncate_to(2)
}
