//! Attribute-value baseline: fixed-length features of a filtered trace
//! prefix and a CART decision tree (Gini impurity, greedy binary splits).
//!
//! Features, in order:
//!
//! * for each transaction category (deposit, transfer, cash-out, bill,
//!   digital, purchase): count, mean, min, max amount and a presence flag
//!   that is 1 once any amount of that category has been seen;
//! * balance mean, min, max over accounts in the current state, plus a
//!   presence flag;
//! * number of distinct accounts seen, accounts owned, companies linked.
//!
//! Transaction statistics need `transaction-amount` to be visible; models
//! that hide it get zeros there. An amount comes from the step's transaction
//! object, or for steps without one (bills, purchases) from the balance
//! change of the first account argument.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::classifier::{convergence_step, OnlineResult};
use crate::error::{Error, Result};
use crate::observability::{filter_trace, ObservabilityModel, COMPANY_SYMBOLS};
use crate::par::{self, Exec};
use crate::trace::{Atom, Label, State, Step, Trace};

/// Bumped whenever the feature list changes.
pub const FEATURE_SET: &str = "tracelab-features/1";
pub const TREE_FORMAT: &str = "tracelab-tree/1";

pub const CATEGORIES: [&str; 6] = ["deposit", "transfer", "cash-out", "bill", "digital", "purchase"];
const STATS: [&str; 5] = ["count", "mean", "min", "max", "present"];

fn category(action: &str) -> Option<usize> {
    Some(match action {
        "quick-deposit" | "placement-cash-in" | "payroll" => 0,
        "move-funds" | "move-funds-self" | "move-funds-internationally" | "quick-payment" => 1,
        "cash-out" | "integration-cash-out" => 2,
        "pay-bill" | "integration-pay-bill" => 3,
        "digital-deposit" | "placement-digital" | "buy-digital" => 4,
        "buy-direct" | "enjoy-service" | "placement-buy-direct" | "placement-enjoyed-service" => 5,
        _ => return None,
    })
}

pub fn feature_names() -> Vec<String> {
    let mut out = Vec::new();
    for c in CATEGORIES {
        for s in STATS {
            out.push(format!("{c}.{s}"));
        }
    }
    for s in ["balance.mean", "balance.min", "balance.max", "balance.present"] {
        out.push(s.to_string());
    }
    out.extend(["accounts.seen", "accounts.owned", "companies"].map(String::from));
    out
}

pub fn dimension() -> usize {
    CATEGORIES.len() * STATS.len() + 7
}

pub type FeatureVector = Vec<f64>;

#[derive(Debug, Clone, Copy, Default)]
struct Stat {
    count: usize,
    amounts: usize,
    sum: f64,
    min: f64,
    max: f64,
}

impl Stat {
    fn add(&mut self, amount: Option<f64>) {
        self.count += 1;
        if let Some(x) = amount {
            if self.amounts == 0 {
                self.min = x;
                self.max = x;
            } else {
                self.min = self.min.min(x);
                self.max = self.max.max(x);
            }
            self.amounts += 1;
            self.sum += x;
        }
    }
}

/// Running featurization over the steps of one filtered trace.
pub struct Featurizer<'c> {
    cat: &'c Catalog,
    tx_visible: bool,
    stats: [Stat; 6],
    accounts: HashSet<String>,
    companies: BTreeSet<String>,
    state: State,
}

impl<'c> Featurizer<'c> {
    pub fn new(model: ObservabilityModel, initial: &State) -> Result<Self> {
        Self::with_catalog(model, initial, Catalog::builtin())
    }

    pub fn with_catalog(model: ObservabilityModel, initial: &State, cat: &'c Catalog) -> Result<Self> {
        let mut f = Featurizer {
            cat,
            tx_visible: model.keeps_name(cat, "transaction-amount")?,
            stats: Default::default(),
            accounts: HashSet::new(),
            companies: BTreeSet::new(),
            state: initial.clone(),
        };
        f.scan_state()?;
        Ok(f)
    }

    fn typed_args<'a>(&self, name: &str, args: &'a [String], ty: &str) -> Result<Vec<&'a String>> {
        let row = self.cat.lookup(name)?;
        Ok(row
            .args
            .iter()
            .zip(args)
            .filter(|(t, _)| t.as_str() == ty)
            .map(|(_, a)| a)
            .collect())
    }

    fn scan_state(&mut self) -> Result<()> {
        let mut found = Vec::new();
        for atom in self.state.atoms() {
            let row = self.cat.lookup(&atom.name)?;
            for (t, a) in row.args.iter().zip(&atom.args) {
                if t == "account" {
                    found.push((true, a.clone()));
                } else if t == "company" && COMPANY_SYMBOLS.contains(&atom.name.as_str()) {
                    found.push((false, a.clone()));
                }
            }
        }
        for (acc, a) in found {
            if acc {
                self.accounts.insert(a);
            } else {
                self.companies.insert(a);
            }
        }
        Ok(())
    }

    fn amount(&self, prev: &State, step: &Step) -> Result<Option<f64>> {
        let a = &step.action;
        if let Some(tx) = self.typed_args(&a.name, &a.args, "transaction")?.first() {
            let v = step.state.value_of(&Atom::new("transaction-amount", [tx.as_str()]));
            return Ok(v.map(|x| x.to_f64()));
        }
        let Some(acc) = self.typed_args(&a.name, &a.args, "account")?.into_iter().next() else {
            return Ok(None);
        };
        let bal = Atom::new("balance", [acc.as_str()]);
        Ok(match (prev.value_of(&bal), step.state.value_of(&bal)) {
            (Some(x), Some(y)) => Some((y.to_f64() - x.to_f64()).abs()),
            _ => None,
        })
    }

    pub fn push(&mut self, step: &Step) -> Result<()> {
        let a = &step.action;
        if self.tx_visible {
            if let Some(c) = category(&a.name) {
                let amount = self.amount(&self.state, step)?;
                self.stats[c].add(amount);
            }
        }
        let row = self.cat.lookup(&a.name)?;
        for (t, x) in row.args.iter().zip(&a.args) {
            if t == "account" {
                self.accounts.insert(x.clone());
            } else if t == "company" && COMPANY_SYMBOLS.contains(&a.name.as_str()) {
                self.companies.insert(x.clone());
            }
        }
        self.state = step.state.clone();
        self.scan_state()
    }

    pub fn vector(&self) -> FeatureVector {
        let mut v = Vec::with_capacity(dimension());
        for s in &self.stats {
            let seen = s.amounts > 0;
            v.push(s.count as f64);
            v.push(if seen { s.sum / s.amounts as f64 } else { 0.0 });
            v.push(if seen { s.min } else { 0.0 });
            v.push(if seen { s.max } else { 0.0 });
            v.push(if seen { 1.0 } else { 0.0 });
        }
        let balances: Vec<f64> = self
            .state
            .entries()
            .filter(|(a, _)| a.name == "balance")
            .filter_map(|(_, v)| v.map(|x| x.to_f64()))
            .collect();
        if balances.is_empty() {
            v.extend([0.0; 4]);
        } else {
            let n = balances.len() as f64;
            v.push(balances.iter().sum::<f64>() / n);
            v.push(balances.iter().copied().fold(f64::INFINITY, f64::min));
            v.push(balances.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            v.push(1.0);
        }
        v.push(self.accounts.len() as f64);
        v.push(self.state.atoms().filter(|a| a.name == "account-owner").count() as f64);
        v.push(self.companies.len() as f64);
        v
    }
}

/// Features of every prefix `0..=len` of a filtered trace.
pub fn featurize_prefixes(t: &Trace, model: ObservabilityModel) -> Result<Vec<FeatureVector>> {
    let mut f = Featurizer::new(model, &t.initial_state)?;
    let mut out = Vec::with_capacity(t.len() + 1);
    out.push(f.vector());
    for s in &t.steps {
        f.push(s)?;
        out.push(f.vector());
    }
    Ok(out)
}

/// Features of the first `j` steps of a filtered trace.
pub fn featurize_prefix(t: &Trace, j: usize, model: ObservabilityModel) -> Result<FeatureVector> {
    if j > t.len() {
        return Err(Error::Model(format!("prefix {j} exceeds trace length {}", t.len())));
    }
    let mut f = Featurizer::new(model, &t.initial_state)?;
    for s in &t.steps[..j] {
        f.push(s)?;
    }
    Ok(f.vector())
}

/// CSV with one row per prefix: trace id, label, prefix length, features.
pub fn features_csv(traces: &[(String, Trace)], model: ObservabilityModel) -> Result<String> {
    let mut out = String::from("trace,label,prefix");
    for n in feature_names() {
        out.push(',');
        out.push_str(&n);
    }
    out.push('\n');
    for (id, t) in traces {
        let label = t.label.map_or("", Label::as_str);
        for (j, v) in featurize_prefixes(t, model)?.iter().enumerate() {
            write!(out, "{id},{label},{j}").unwrap();
            for x in v {
                write!(out, ",{x}").unwrap();
            }
            out.push('\n');
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 8,
            min_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        label: Label,
        good: usize,
        bad: usize,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub dimension: usize,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> Label {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { label, .. } => return *label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

fn gini(good: usize, bad: usize) -> f64 {
    let n = (good + bad) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = good as f64 / n;
    2.0 * p * (1.0 - p)
}

/// Majority label; ties go to `good`.
fn majority(good: usize, bad: usize) -> Label {
    if bad > good {
        Label::Bad
    } else {
        Label::Good
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn best_split_on(
    xs: &[FeatureVector],
    ys: &[Label],
    idx: &[usize],
    feature: usize,
    min_leaf: usize,
) -> Option<Candidate> {
    let mut order: Vec<usize> = idx.to_vec();
    order.sort_by(|&a, &b| xs[a][feature].total_cmp(&xs[b][feature]));
    let total_bad = order.iter().filter(|&&i| ys[i] == Label::Bad).count();
    let total_good = order.len() - total_bad;
    let n = order.len() as f64;
    let (mut lg, mut lb) = (0usize, 0usize);
    let mut best: Option<Candidate> = None;
    for w in 0..order.len() - 1 {
        match ys[order[w]] {
            Label::Good => lg += 1,
            Label::Bad => lb += 1,
        }
        let (lo, hi) = (xs[order[w]][feature], xs[order[w + 1]][feature]);
        let left = w + 1;
        if lo == hi || left < min_leaf || order.len() - left < min_leaf {
            continue;
        }
        let (rg, rb) = (total_good - lg, total_bad - lb);
        let impurity = (left as f64 * gini(lg, lb) + (rg + rb) as f64 * gini(rg, rb)) / n;
        if best.is_none_or(|b| impurity < b.impurity) {
            let mut threshold = lo + (hi - lo) / 2.0;
            if threshold >= hi || threshold.is_nan() {
                threshold = lo;
            }
            best = Some(Candidate {
                feature,
                threshold,
                impurity,
            });
        }
    }
    best
}

/// Greedy CART with Gini impurity. Split candidates are searched per feature
/// (in parallel when `exec` allows); ties go to the lowest feature index,
/// then the lowest threshold.
pub fn train_tree(xs: &[FeatureVector], ys: &[Label], params: TreeParams, exec: Exec) -> Result<Tree> {
    if xs.len() != ys.len() {
        return Err(Error::Model("feature and label counts differ".into()));
    }
    for l in [Label::Good, Label::Bad] {
        if !ys.contains(&l) {
            return Err(Error::Model(format!("no training example labelled {l}")));
        }
    }
    if params.min_leaf == 0 {
        return Err(Error::Config("min_leaf must be at least 1".into()));
    }
    let dim = xs[0].len();
    if let Some(bad) = xs.iter().position(|x| x.len() != dim || x.iter().any(|v| !v.is_finite())) {
        return Err(Error::Model(format!("example {bad} has a bad feature vector")));
    }
    let mut tree = Tree {
        nodes: Vec::new(),
        dimension: dim,
    };
    let all: Vec<usize> = (0..xs.len()).collect();
    grow(&mut tree, xs, ys, all, 0, params, exec);
    Ok(tree)
}

fn grow(
    tree: &mut Tree,
    xs: &[FeatureVector],
    ys: &[Label],
    idx: Vec<usize>,
    depth: usize,
    params: TreeParams,
    exec: Exec,
) -> usize {
    let bad = idx.iter().filter(|&&i| ys[i] == Label::Bad).count();
    let good = idx.len() - bad;
    let at = tree.nodes.len();
    tree.nodes.push(Node::Leaf {
        label: majority(good, bad),
        good,
        bad,
    });
    if good == 0 || bad == 0 || depth >= params.max_depth || idx.len() < 2 * params.min_leaf {
        return at;
    }
    let found = par::map_range(exec, tree.dimension, |f| {
        best_split_on(xs, ys, &idx, f, params.min_leaf)
    });
    let mut best: Option<Candidate> = None;
    for c in found.into_iter().flatten() {
        if best.is_none_or(|b| c.impurity < b.impurity) {
            best = Some(c);
        }
    }
    let Some(best) = best.filter(|b| b.impurity < gini(good, bad) - 1e-12) else {
        return at;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx
        .into_iter()
        .partition(|&i| xs[i][best.feature] <= best.threshold);
    let left = grow(tree, xs, ys, l, depth + 1, params, exec);
    let right = grow(tree, xs, ys, r, depth + 1, params, exec);
    tree.nodes[at] = Node::Split {
        feature: best.feature,
        threshold: best.threshold,
        left,
        right,
    };
    at
}

/// A tree together with the observability model its features assume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub format: String,
    pub features: String,
    pub observability: ObservabilityModel,
    pub params: TreeParams,
    pub tree: Tree,
}

impl TreeModel {
    /// One example per non-empty prefix of every (unfiltered) training trace;
    /// each inherits its trace's label.
    pub fn train(
        traces: &[Trace],
        model: ObservabilityModel,
        params: TreeParams,
        exec: Exec,
    ) -> Result<TreeModel> {
        let per_trace = par::try_map(exec, traces, |t| {
            let label = t
                .label
                .ok_or_else(|| Error::Model("training trace without a label".into()))?;
            let f = filter_trace(t, model)?;
            let v = featurize_prefixes(&f, model)?;
            Ok::<_, Error>((label, v))
        })?;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (label, vs) in per_trace {
            for v in vs.into_iter().skip(1) {
                xs.push(v);
                ys.push(label);
            }
        }
        if xs.is_empty() {
            return Err(Error::Model("training traces are all empty".into()));
        }
        Ok(TreeModel {
            format: TREE_FORMAT.to_string(),
            features: FEATURE_SET.to_string(),
            observability: model,
            params,
            tree: train_tree(&xs, &ys, params, exec)?,
        })
    }

    /// Prediction after each prefix `0..=len` of an unfiltered trace.
    pub fn classify_online(&self, t: &Trace) -> Result<OnlineResult> {
        let f = filter_trace(t, self.observability)?;
        let predictions: Vec<Label> = featurize_prefixes(&f, self.observability)?
            .iter()
            .map(|v| self.tree.predict(v))
            .collect();
        let n = predictions.len();
        Ok(OnlineResult {
            convergence_step: convergence_step(&predictions),
            final_label: predictions[n - 1],
            predictions,
            nearest: vec![String::new(); n],
            nearest_distance: vec![f64::NAN; n],
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<TreeModel> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: TreeModel = serde_json::from_str(&text)?;
        if m.format != TREE_FORMAT || m.features != FEATURE_SET {
            return Err(Error::Model(format!(
                "{}: unsupported model `{}` with features `{}`",
                path.display(),
                m.format,
                m.features
            )));
        }
        Ok(m)
    }
}
