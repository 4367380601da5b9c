//! Goal-driven simulation of one bank customer.
//!
//! Each simulation step runs goal generation, plans any new goal from the
//! plan library, then executes the next pending action. Steps with nothing
//! to execute advance time without producing a trace step.

pub mod domain;
pub mod exec;
pub mod planner;

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::amount::Amount;
use crate::error::{Error, Result};
use crate::observability::{filter_trace, ObservabilityModel};
use crate::par::{self, Exec};
use crate::trace::{write_trace, Encoding, Label, Literal, State, Step, Trace, TraceMeta};

pub use domain::Domain;
pub use exec::{execute_step, Env};
pub use planner::{Expansion, FreshNames, PlanFailure, PlannedAction, Planner};

/// The simulated customer.
pub const AGENT: &str = "cust-0";

/// Amount ranges and strategy constants referenced by templates as `$name`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub structuring_threshold: f64,
    pub digital_chunk: f64,
    pub layering_hops_max: f64,
    /// Fraction of the layered balance sent abroad on international integration.
    pub transfer_pricing: f64,
    pub work_days_max: f64,
    pub deposit_min: f64,
    pub deposit_max: f64,
    pub bill_min: f64,
    pub bill_max: f64,
    pub price_min: f64,
    pub price_max: f64,
    pub service_min: f64,
    pub service_max: f64,
    pub payment_min: f64,
    pub payment_max: f64,
    pub rent_min: f64,
    pub rent_max: f64,
    pub salary_min: f64,
    pub salary_max: f64,
    pub initial_balance_min: f64,
    pub initial_balance_max: f64,
    pub criminal_income_min: f64,
    pub criminal_income_max: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            structuring_threshold: 10_000.0,
            digital_chunk: 60_000.0,
            layering_hops_max: 3.0,
            transfer_pricing: 1.0,
            work_days_max: 5.0,
            deposit_min: 50.0,
            deposit_max: 1_500.0,
            bill_min: 30.0,
            bill_max: 400.0,
            price_min: 50.0,
            price_max: 1_500.0,
            service_min: 20.0,
            service_max: 300.0,
            payment_min: 20.0,
            payment_max: 500.0,
            rent_min: 300.0,
            rent_max: 1_200.0,
            salary_min: 80.0,
            salary_max: 250.0,
            initial_balance_min: 200.0,
            initial_balance_max: 3_000.0,
            criminal_income_min: 20_000.0,
            criminal_income_max: 120_000.0,
        }
    }
}

impl SimParams {
    /// All values as exact amounts keyed by name.
    pub fn amounts(&self) -> Result<HashMap<String, Amount>> {
        let v = serde_json::to_value(self)?;
        let mut out = HashMap::new();
        for (k, x) in v.as_object().expect("struct serializes to an object") {
            let f = x.as_f64().unwrap_or(f64::NAN);
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::Config(format!("`{k}` must be positive, got {x}")));
            }
            let a = Amount::from_f64(f).ok_or_else(|| Error::Config(format!("`{k}` out of range")))?;
            out.insert(k.clone(), a);
        }
        for (lo, hi) in [
            ("deposit_min", "deposit_max"),
            ("bill_min", "bill_max"),
            ("price_min", "price_max"),
            ("service_min", "service_max"),
            ("payment_min", "payment_max"),
            ("rent_min", "rent_max"),
            ("salary_min", "salary_max"),
            ("initial_balance_min", "initial_balance_max"),
            ("criminal_income_min", "criminal_income_max"),
        ] {
            if out[lo] > out[hi] {
                return Err(Error::Config(format!("`{lo}` exceeds `{hi}`")));
            }
        }
        if self.transfer_pricing > 1.0 {
            return Err(Error::Config("transfer_pricing must not exceed 1".into()));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlacementWeights {
    pub structuring: f64,
    pub digital: f64,
}

impl Default for PlacementWeights {
    fn default() -> Self {
        PlacementWeights {
            structuring: 0.5,
            digital: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrationWeights {
    pub withdrawal: f64,
    pub bills: f64,
    pub international: f64,
}

impl Default for IntegrationWeights {
    fn default() -> Self {
        IntegrationWeights {
            withdrawal: 1.0,
            bills: 1.0,
            international: 1.0,
        }
    }
}

/// Knobs shared by both behavior profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileOptions {
    /// Standard customers may start companies too.
    pub create_companies: bool,
    /// Standard customers may withdraw cash, use digital money and send funds abroad.
    pub cash_and_digital: bool,
    /// Chance that the customer starts out employed.
    pub employed_prob: f64,
    pub placement: PlacementWeights,
    pub integration: IntegrationWeights,
    /// The criminal's first goal is always to commit a crime.
    pub first_goal_crime: bool,
    /// Chance that an idle criminal's laundering draw starts a new cycle.
    pub crime_prob: f64,
    /// Chance that a criminal's goal draw picks the laundering entry rather
    /// than a standard goal.
    pub launder_share: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            create_companies: false,
            cash_and_digital: false,
            employed_prob: 1.0,
            placement: PlacementWeights::default(),
            integration: IntegrationWeights::default(),
            first_goal_crime: true,
            crime_prob: 0.2,
            launder_share: 0.95,
        }
    }
}

impl ProfileOptions {
    /// Standard customers get every action criminals use.
    pub fn comparison() -> Self {
        ProfileOptions {
            create_companies: true,
            cash_and_digital: true,
            ..Default::default()
        }
    }
}

type Menu = Vec<(String, f64)>;

fn menu(items: &[(&str, f64)]) -> Menu {
    items
        .iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|(n, w)| (n.to_string(), *w))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrimeStrategy {
    pub placement: Menu,
    pub integration: Menu,
    pub first_goal_crime: bool,
    pub crime_prob: f64,
    pub share: f64,
}

/// Goal distributions of one class of customer.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorProfile {
    pub label: Label,
    pub menu: Menu,
    pub crime: Option<CrimeStrategy>,
}

impl BehaviorProfile {
    pub fn standard(o: &ProfileOptions) -> Self {
        let mut items = vec![
            ("earn", 3.0),
            ("deposit", 2.0),
            ("pay-bill", 3.0),
            ("buy-product", 2.0),
            ("enjoy-service", 1.0),
            ("pay-friend", 1.0),
            ("pay-rent", 1.0),
            ("save", 1.0),
            ("open-account", 0.5),
        ];
        if o.cash_and_digital {
            items.extend([
                ("withdraw", 1.0),
                ("digital-deposit", 1.0),
                ("buy-digital", 0.5),
                ("send-abroad", 0.5),
            ]);
        }
        if o.create_companies {
            items.push(("start-company", 1.5));
        }
        BehaviorProfile {
            label: Label::Good,
            menu: menu(&items),
            crime: None,
        }
    }

    /// The standard menu interleaved with laundering goals.
    pub fn criminal(o: &ProfileOptions) -> Self {
        let base = Self::standard(o);
        BehaviorProfile {
            label: Label::Bad,
            menu: base.menu,
            crime: Some(CrimeStrategy {
                placement: menu(&[
                    ("placement-structuring", o.placement.structuring),
                    ("placement-digital", o.placement.digital),
                ]),
                integration: menu(&[
                    ("integration-withdrawal", o.integration.withdrawal),
                    ("integration-bills", o.integration.bills),
                    ("integration-international", o.integration.international),
                ]),
                first_goal_crime: o.first_goal_crime,
                crime_prob: o.crime_prob,
                share: o.launder_share,
            }),
        }
    }

    pub fn for_label(label: Label, o: &ProfileOptions) -> Self {
        match label {
            Label::Good => Self::standard(o),
            Label::Bad => Self::criminal(o),
        }
    }

    pub fn validate(&self, d: &Domain) -> Result<()> {
        let mut menus = vec![("goal menu", &self.menu)];
        if let Some(c) = &self.crime {
            menus.push(("placement strategies", &c.placement));
            menus.push(("integration strategies", &c.integration));
            if !(0.0..=1.0).contains(&c.crime_prob) {
                return Err(Error::Config("crime_prob must lie in [0, 1]".into()));
            }
            if !(0.0..=1.0).contains(&c.share) {
                return Err(Error::Config("launder_share must lie in [0, 1]".into()));
            }
        }
        for (what, m) in menus {
            if m.is_empty() || m.iter().any(|(_, w)| !w.is_finite() || *w < 0.0) {
                return Err(Error::Config(format!("{what} needs positive weights")));
            }
            if let Some((n, _)) = m.iter().find(|(n, _)| d.template(n).is_none()) {
                return Err(Error::Config(format!("{what} names unknown template `{n}`")));
            }
        }
        Ok(())
    }
}

fn pick<'m, R: Rng + ?Sized>(m: &'m Menu, rng: &mut R) -> &'m str {
    let total: f64 = m.iter().map(|(_, w)| w).sum();
    let mut x = rng.gen::<f64>() * total;
    for (n, w) in m {
        if x < *w {
            return n;
        }
        x -= w;
    }
    &m.last().expect("validated non-empty").0
}

/// Where a criminal stands in the laundering cycle, read off the
/// unobservable flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Idle,
    Placement,
    Layering,
    Integration,
}

pub fn laundering_phase(s: &State, agent: &str) -> Phase {
    let has = |p: &str| s.lookup(p, &[agent.to_string()]).is_some();
    let dirty = s
        .lookup("dirty-money", &[agent.to_string()])
        .flatten()
        .unwrap_or(Amount::ZERO);
    match (has("money-laundering"), has("has-dirty-money")) {
        (false, _) => Phase::Idle,
        (true, true) if dirty > Amount::ZERO => Phase::Placement,
        (true, true) => Phase::Layering,
        (true, false) => Phase::Integration,
    }
}

/// A goal drawn by goal generation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalChoice {
    pub template: String,
    pub laundering: bool,
}

/// Picks one goal (the caller has already drawn against the goal
/// probability). A criminal's menu holds one laundering entry, drawn with
/// `launder_share`, next to the standard goals. Drawing it while a laundering goal is still pending
/// yields no goal; otherwise it yields the next phase's goal, and an idle
/// criminal starts a new cycle with `crime_prob` (always on the very first
/// goal when `first_goal_crime` is set), falling back to a standard goal.
pub fn generate_goal<R: Rng + ?Sized>(
    profile: &BehaviorProfile,
    state: &State,
    agent: &str,
    first_goal: bool,
    laundering_pending: bool,
    rng: &mut R,
) -> Option<GoalChoice> {
    let laundering = |t: &str| {
        Some(GoalChoice {
            template: t.to_string(),
            laundering: true,
        })
    };
    if let Some(c) = &profile.crime {
        let phase = laundering_phase(state, agent);
        if first_goal && c.first_goal_crime && phase == Phase::Idle && !laundering_pending {
            return laundering("commit-crime");
        }
        if rng.gen::<f64>() < c.share {
            if laundering_pending {
                return None;
            }
            match phase {
                Phase::Idle => {
                    if rng.gen::<f64>() < c.crime_prob {
                        return laundering("commit-crime");
                    }
                }
                Phase::Placement => return laundering(pick(&c.placement, rng)),
                Phase::Layering => return laundering("layering"),
                Phase::Integration => return laundering(pick(&c.integration, rng)),
            }
        }
    }
    Some(GoalChoice {
        template: pick(&profile.menu, rng).to_string(),
        laundering: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub horizon: usize,
    pub label: Label,
    pub goal_prob: f64,
    pub observability: ObservabilityModel,
    pub failure_prob: f64,
    pub time_bound_ms: u64,
    pub profile: ProfileOptions,
    pub params: SimParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            horizon: 50,
            label: Label::Good,
            goal_prob: 0.3,
            observability: ObservabilityModel::Bank,
            failure_prob: 0.0,
            time_bound_ms: 10_000,
            profile: ProfileOptions::default(),
            params: SimParams::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        for (name, p) in [
            ("goal_prob", self.goal_prob),
            ("failure_prob", self.failure_prob),
            ("employed_prob", self.profile.employed_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        self.params.amounts()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalStatus {
    Pending,
    Done,
    Dropped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoalRecord {
    pub template: String,
    pub laundering: bool,
    /// Simulation step at which the goal was adopted.
    pub adopted_at: usize,
    pub status: GoalStatus,
    pub condition: Vec<domain::Cond>,
    pub env: Env,
}

impl GoalRecord {
    pub fn satisfied_in(&self, s: &State) -> Result<bool> {
        exec::holds_all(&self.condition, &self.env, s)
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub full: Trace,
    pub observed: Trace,
    pub goals: Vec<GoalRecord>,
    pub planning_failures: usize,
}

fn draw_amount<R: Rng + ?Sized>(rng: &mut R, lo: Amount, hi: Amount) -> Amount {
    let (a, b) = (lo.to_f64().ln(), hi.to_f64().ln());
    let x = (a + rng.gen::<f64>() * (b - a)).exp();
    Amount::from_f64(x).unwrap_or(lo).truncate_to(2)
}

/// Same literals for both classes except the criminal's flag and income,
/// which come last.
pub fn initial_state<R: Rng + ?Sized>(
    label: Label,
    o: &ProfileOptions,
    params: &HashMap<String, Amount>,
    rng: &mut R,
) -> State {
    let p = |k: &str| params[k];
    let mut s = State::new();
    s.insert(Literal::pred("account-owner", [AGENT, "account-0"]));
    s.insert(Literal::pred("has-card", [AGENT, "account-0"]));
    s.insert(Literal::pred("account-country", ["account-0", "home"]));
    let bal = draw_amount(rng, p("initial_balance_min"), p("initial_balance_max"));
    s.insert(Literal::func("balance", ["account-0"], bal));
    let salary = draw_amount(rng, p("salary_min"), p("salary_max"));
    s.insert(Literal::func("salary", [AGENT], salary));
    s.insert(Literal::func("working-day", [AGENT], Amount::ZERO));
    s.insert(Literal::func("days-without-pay", [AGENT], Amount::ZERO));
    if rng.gen::<f64>() < o.employed_prob {
        s.insert(Literal::pred("employed", [AGENT]));
        s.insert(Literal::pred("works-for", [AGENT, "company-0"]));
    }
    if label == Label::Bad {
        s.insert(Literal::pred("criminal", [AGENT]));
        let income = draw_amount(rng, p("criminal_income_min"), p("criminal_income_max"));
        s.insert(Literal::func("criminal-income", [AGENT], income));
    }
    s
}

struct Queued {
    goal: usize,
    planned: PlannedAction,
}

struct Agent<'a> {
    domain: &'a Domain,
    profile: BehaviorProfile,
    params: HashMap<String, Amount>,
    time_bound: Duration,
    rng: ChaCha8Rng,
    fresh: FreshNames,
    state: State,
    projected: State,
    agenda: VecDeque<Queued>,
    carry: Vec<Literal>,
    goals: Vec<GoalRecord>,
    remaining: Vec<usize>,
}

impl Agent<'_> {
    fn expand(&mut self, template: &str, from: &State) -> Result<std::result::Result<Expansion, PlanFailure>> {
        let mut planner = Planner {
            domain: self.domain,
            params: &self.params,
            agent: AGENT,
            rng: &mut self.rng,
            fresh: &mut self.fresh,
            deadline: Some(Instant::now() + self.time_bound),
        };
        planner.expand(template, from)
    }

    fn enqueue(&mut self, goal: usize, exp: Expansion) {
        self.remaining[goal] = exp.actions.len();
        self.goals[goal].condition = exp.goal;
        self.goals[goal].env = exp.env;
        if exp.actions.is_empty() {
            self.goals[goal].status = GoalStatus::Done;
        }
        for planned in exp.actions {
            self.agenda.push_back(Queued { goal, planned });
        }
        self.carry.extend(exp.leftover);
        self.projected = exp.projected;
    }

    /// Puts a plan ahead of everything queued; `end` is the projection after
    /// the whole agenda.
    fn enqueue_front(&mut self, goal: usize, exp: Expansion, end: State) {
        self.remaining[goal] = exp.actions.len();
        self.goals[goal].condition = exp.goal;
        self.goals[goal].env = exp.env;
        if exp.actions.is_empty() {
            self.goals[goal].status = GoalStatus::Done;
        }
        for planned in exp.actions.into_iter().rev() {
            self.agenda.push_front(Queued { goal, planned });
        }
        self.projected = end;
    }

    /// Applies the queued actions from `base`, or `None` once one of them is
    /// no longer applicable.
    fn replay(&self, base: State) -> Result<Option<State>> {
        let mut s = base;
        for q in &self.agenda {
            for l in &q.planned.inject {
                s.insert(l.clone());
            }
            if !exec::unmet_preconditions(self.domain, &s, &q.planned.action)?.is_empty() {
                return Ok(None);
            }
            s = exec::apply(self.domain, &s, &q.planned.action)?;
        }
        Ok(Some(s))
    }

    /// Plans a laundering goal to run before the queued standard actions.
    /// Falls back (returns false) when that would break the queued plans.
    fn prioritize(&mut self, goal: usize, template: &str) -> Result<bool> {
        let mut base = self.state.clone();
        for l in &self.carry {
            base.insert(l.clone());
        }
        let Ok(exp) = self.expand(template, &base)? else {
            return Ok(false);
        };
        if !exp.leftover.is_empty() {
            return Ok(false);
        }
        match self.replay(exp.projected.clone())? {
            Some(end) => {
                self.enqueue_front(goal, exp, end);
                Ok(true)
            }
            None => Ok(false),
        }
    }

    fn laundering_pending(&self) -> bool {
        self.goals
            .iter()
            .any(|g| g.laundering && g.status == GoalStatus::Pending)
    }

    /// Rebuilds the agenda from the real state for every unfinished goal.
    /// Returns the number of goals that could not be replanned.
    fn replan(&mut self) -> Result<usize> {
        self.agenda.clear();
        self.projected = self.state.clone();
        let mut failed = 0;
        for g in 0..self.goals.len() {
            if self.goals[g].status != GoalStatus::Pending {
                continue;
            }
            let from = self.projected.clone();
            match self.expand(&self.goals[g].template.clone(), &from)? {
                Ok(exp) => self.enqueue(g, exp),
                Err(_) => {
                    self.goals[g].status = GoalStatus::Dropped;
                    failed += 1;
                }
            }
        }
        Ok(failed)
    }
}

/// Runs one simulation. Deterministic for a given config.
pub fn simulate(cfg: &SimConfig) -> Result<SimOutput> {
    simulate_with(cfg, Domain::builtin())
}

pub fn simulate_with(cfg: &SimConfig, domain: &Domain) -> Result<SimOutput> {
    cfg.validate()?;
    let profile = BehaviorProfile::for_label(cfg.label, &cfg.profile);
    profile.validate(domain)?;
    let params = cfg.params.amounts()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let initial = initial_state(cfg.label, &cfg.profile, &params, &mut rng);
    let mut agent = Agent {
        domain,
        profile,
        params,
        time_bound: Duration::from_millis(cfg.time_bound_ms),
        rng,
        fresh: FreshNames::default(),
        state: initial.clone(),
        projected: initial.clone(),
        agenda: VecDeque::new(),
        carry: Vec::new(),
        goals: Vec::new(),
        remaining: Vec::new(),
    };
    let mut steps = Vec::new();
    let mut failures = 0usize;
    let mut consecutive = 0usize;
    let mut truncated = false;

    for t in 0..cfg.horizon {
        let mut failed_now = false;
        let choice = if agent.rng.gen::<f64>() < cfg.goal_prob {
            generate_goal(
                &agent.profile,
                &agent.projected,
                AGENT,
                agent.goals.is_empty(),
                agent.laundering_pending(),
                &mut agent.rng,
            )
        } else {
            None
        };
        if let Some(choice) = choice {
            let from = agent.projected.clone();
            let g = agent.goals.len();
            agent.goals.push(GoalRecord {
                template: choice.template.clone(),
                laundering: choice.laundering,
                adopted_at: t,
                status: GoalStatus::Pending,
                condition: Vec::new(),
                env: Env::default(),
            });
            agent.remaining.push(0);
            let first = choice.laundering
                && !agent.agenda.is_empty()
                && agent.prioritize(g, &choice.template)?;
            if !first {
                match agent.expand(&choice.template, &from)? {
                    Ok(exp) => agent.enqueue(g, exp),
                    Err(_) => {
                        agent.goals[g].status = GoalStatus::Dropped;
                        failed_now = true;
                    }
                }
            }
        }

        if let Some(q) = agent.agenda.pop_front() {
            let mut inject = std::mem::take(&mut agent.carry);
            inject.extend(q.planned.inject.iter().cloned());
            let (next, ok) = execute_step(
                domain,
                &agent.state,
                &q.planned.action,
                &inject,
                cfg.failure_prob,
                &mut agent.rng,
            )?;
            if ok {
                agent.state = next;
                steps.push(Step {
                    action: q.planned.action,
                    state: agent.state.clone(),
                });
                agent.remaining[q.goal] -= 1;
                if agent.remaining[q.goal] == 0 {
                    agent.goals[q.goal].status = GoalStatus::Done;
                }
                if agent.agenda.is_empty() && agent.carry.is_empty() {
                    agent.projected = agent.state.clone();
                }
            } else if agent.replan()? > 0 {
                failed_now = true;
            }
        }

        if failed_now {
            failures += 1;
            consecutive += 1;
            if consecutive >= 2 {
                truncated = true;
                break;
            }
        } else {
            consecutive = 0;
        }
    }

    let full = Trace {
        initial_state: initial,
        steps,
        label: Some(cfg.label),
        meta: TraceMeta {
            seed: cfg.seed,
            horizon: u32::try_from(cfg.horizon).map_err(|_| Error::Config("horizon too large".into()))?,
            observability: ObservabilityModel::Full.as_str().to_string(),
            truncated,
            ..TraceMeta::default()
        },
    };
    let observed = filter_trace(&full, cfg.observability)?;
    Ok(SimOutput {
        full,
        observed,
        goals: agent.goals,
        planning_failures: failures,
    })
}

/// One simulation of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchJob {
    pub id: String,
    pub config: SimConfig,
}

/// `good` standard and `bad` criminal runs with consecutive seeds from
/// `first_seed`, standard customers first.
pub fn batch_jobs(base: &SimConfig, good: usize, bad: usize, first_seed: u64) -> Vec<BatchJob> {
    let mut jobs = Vec::with_capacity(good + bad);
    let mut seed = first_seed;
    for (label, n) in [(Label::Good, good), (Label::Bad, bad)] {
        for i in 0..n {
            jobs.push(BatchJob {
                id: format!("{label}-{i:04}"),
                config: SimConfig {
                    seed,
                    label,
                    ..base.clone()
                },
            });
            seed += 1;
        }
    }
    jobs
}

/// Runs every job; simulations are independent and may run in parallel.
pub fn run_jobs(jobs: &[BatchJob], exec: Exec) -> Result<Vec<SimOutput>> {
    par::try_map(exec, jobs, |j| {
        simulate(&j.config).map_err(|e| Error::Cell {
            cell: j.id.clone(),
            source: Box::new(e),
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub label: Label,
    pub seed: u64,
    pub horizon: usize,
    pub observability: ObservabilityModel,
    pub truncated: bool,
    pub full_len: usize,
    pub observed_len: usize,
    pub full: String,
    pub observed: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub generator: String,
    pub good: usize,
    pub bad: usize,
    pub traces: Vec<ManifestEntry>,
}

pub fn write_output(dir: &Path, stem: &str, out: &SimOutput) -> Result<(String, String)> {
    let full = format!("{stem}.full.jsonl");
    let obs = format!("{stem}.obs.jsonl");
    write_trace(&dir.join(&full), &out.full, Encoding::Delta)?;
    write_trace(&dir.join(&obs), &out.observed, Encoding::Delta)?;
    Ok((full, obs))
}

/// Writes `<id>.full.jsonl`, `<id>.obs.jsonl` and `manifest.json` under `dir`.
pub fn run_batch(jobs: &[BatchJob], dir: &Path, exec: Exec) -> Result<BatchManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let outs = run_jobs(jobs, exec)?;
    let mut traces = Vec::with_capacity(jobs.len());
    for (j, o) in jobs.iter().zip(&outs) {
        let (full, observed) = write_output(dir, &j.id, o)?;
        traces.push(ManifestEntry {
            id: j.id.clone(),
            label: j.config.label,
            seed: j.config.seed,
            horizon: j.config.horizon,
            observability: j.config.observability,
            truncated: o.full.meta.truncated,
            full_len: o.full.len(),
            observed_len: o.observed.len(),
            full,
            observed,
        });
    }
    let manifest = BatchManifest {
        generator: crate::GENERATOR_VERSION.to_string(),
        good: traces.iter().filter(|t| t.label == Label::Good).count(),
        bad: traces.iter().filter(|t| t.label == Label::Bad).count(),
        traces,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
