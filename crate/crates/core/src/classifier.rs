//! Relational k-nearest-neighbor classification of traces.
//!
//! Training stores observability-filtered traces; there is no generalization
//! step. Classification filters the query the same way, ranks the stored
//! cases by distance and takes the majority class of the `k` nearest.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distance::{
    distance, prefix_distances, relational_matches, DistanceConfig, DistanceKind, Prepared,
    RelationalMatches,
};
use crate::error::{Error, Result};
use crate::observability::{filter_trace, ObservabilityModel};
use crate::par::{self, Exec};
use crate::trace::{read_trace, write_trace, Encoding, Label, Step, Trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub observability: ObservabilityModel,
    pub distance: DistanceConfig,
    pub k: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            observability: ObservabilityModel::Bank,
            distance: DistanceConfig::default(),
            k: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Case {
    pub id: String,
    pub label: Label,
    /// Filtered under the case base's observability model.
    pub trace: Trace,
    prepared: Prepared,
}

#[derive(Debug, Clone)]
pub struct CaseBase {
    config: ClassifierConfig,
    cases: Vec<Case>,
    exec: Exec,
}

/// Stores labeled traces, ids `case-0000`, `case-0001`, … in input order.
pub fn train(traces: &[Trace], config: ClassifierConfig) -> Result<CaseBase> {
    let named: Vec<(String, Trace)> = traces
        .iter()
        .enumerate()
        .map(|(i, t)| (format!("case-{i:04}"), t.clone()))
        .collect();
    train_named(named, config)
}

pub fn train_named(traces: Vec<(String, Trace)>, config: ClassifierConfig) -> Result<CaseBase> {
    if config.k == 0 {
        return Err(Error::Model("k must be at least 1".into()));
    }
    config.distance.validate()?;
    let mut cases = Vec::with_capacity(traces.len());
    for (id, t) in traces {
        let label = t
            .label
            .ok_or_else(|| Error::Model(format!("training trace `{id}` has no label")))?;
        let trace = filter_trace(&t, config.observability)?;
        let prepared = Prepared::new(&trace);
        cases.push(Case {
            id,
            label,
            trace,
            prepared,
        });
    }
    for class in [Label::Good, Label::Bad] {
        if !cases.iter().any(|c| c.label == class) {
            return Err(Error::Model(format!("no training trace of class `{class}`")));
        }
    }
    Ok(CaseBase {
        config,
        cases,
        exec: Exec::default(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: String,
    pub label: Label,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: Label,
    /// Nearest first.
    pub neighbors: Vec<Neighbor>,
    /// Element matches against the nearest case (relational distance only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matches: Option<RelationalMatches>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineResult {
    /// `predictions[j]` is the label after observing `j` steps.
    pub predictions: Vec<Label>,
    pub nearest: Vec<String>,
    pub nearest_distance: Vec<f64>,
    pub final_label: Label,
    /// Smallest `j` from which every prediction equals the final one.
    pub convergence_step: usize,
}

/// Smallest index from which all labels equal the last one.
pub fn convergence_step(predictions: &[Label]) -> usize {
    let Some(last) = predictions.last() else {
        return 0;
    };
    predictions
        .iter()
        .rposition(|p| p != last)
        .map_or(0, |i| i + 1)
}

/// Indices of the `k` smallest distances; ties keep insertion order.
fn nearest_k(dists: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..dists.len()).collect();
    idx.sort_by(|&a, &b| dists[a].partial_cmp(&dists[b]).unwrap_or(Ordering::Equal));
    idx.truncate(k);
    idx
}

/// Majority class; an even split goes to the single nearest neighbor.
fn vote(labels: impl Iterator<Item = Label> + Clone) -> Label {
    let first = labels.clone().next().expect("at least one neighbor");
    let bad = labels.clone().filter(|l| *l == Label::Bad).count();
    let good = labels.count() - bad;
    match bad.cmp(&good) {
        Ordering::Greater => Label::Bad,
        Ordering::Less => Label::Good,
        Ordering::Equal => first,
    }
}

impl CaseBase {
    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    pub fn cases(&self) -> &[Case] {
        &self.cases
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    fn prepare_query(&self, t: &Trace) -> Result<Prepared> {
        Ok(Prepared::new(&filter_trace(t, self.config.observability)?))
    }

    pub fn classify(&self, t: &Trace) -> Result<Classification> {
        let q = self.prepare_query(t)?;
        let cfg = &self.config.distance;
        let dists = par::map(self.exec, &self.cases, |c| distance(cfg, &q, &c.prepared));
        let near = nearest_k(&dists, self.config.k);
        let label = vote(near.iter().map(|&i| self.cases[i].label));
        let neighbors = near
            .iter()
            .map(|&i| Neighbor {
                id: self.cases[i].id.clone(),
                label: self.cases[i].label,
                distance: dists[i],
            })
            .collect();
        let matches = (cfg.kind == DistanceKind::Relational)
            .then(|| relational_matches(cfg, &q, &self.cases[near[0]].prepared));
        Ok(Classification {
            label,
            neighbors,
            matches,
        })
    }

    /// Classifies every prefix `0..=n` of the filtered query.
    pub fn classify_online(&self, t: &Trace) -> Result<OnlineResult> {
        let q = self.prepare_query(t)?;
        let cfg = &self.config.distance;
        let rows: Vec<Vec<f64>> =
            par::map(self.exec, &self.cases, |c| prefix_distances(cfg, &q, &c.prepared));
        let mut predictions = Vec::with_capacity(q.len() + 1);
        let mut nearest = Vec::with_capacity(q.len() + 1);
        let mut nearest_distance = Vec::with_capacity(q.len() + 1);
        let mut column = vec![0.0; self.cases.len()];
        for j in 0..=q.len() {
            for (c, row) in column.iter_mut().zip(&rows) {
                *c = row[j];
            }
            let near = nearest_k(&column, self.config.k);
            predictions.push(vote(near.iter().map(|&i| self.cases[i].label)));
            nearest.push(self.cases[near[0]].id.clone());
            nearest_distance.push(column[near[0]]);
        }
        let final_label = *predictions.last().expect("prefix 0 always exists");
        Ok(OnlineResult {
            convergence_step: convergence_step(&predictions),
            predictions,
            nearest,
            nearest_distance,
            final_label,
        })
    }

    /// Starts a step-by-step classification that only ever sees the steps
    /// pushed so far.
    pub fn session(&self) -> OnlineSession<'_> {
        OnlineSession {
            cb: self,
            observed: Trace::default(),
        }
    }

    /// Writes `manifest.json` plus one JSONL file per case under `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let cases_dir = dir.join("cases");
        fs::create_dir_all(&cases_dir).map_err(|e| Error::io(&cases_dir, e))?;
        let mut entries = Vec::with_capacity(self.cases.len());
        for c in &self.cases {
            let file = format!("cases/{}.jsonl", c.id);
            write_trace(&dir.join(&file), &c.trace, Encoding::Delta)?;
            entries.push(ManifestCase {
                id: c.id.clone(),
                label: c.label,
                file,
            });
        }
        let manifest = CaseBaseManifest {
            format: CASEBASE_FORMAT.to_string(),
            config: self.config.clone(),
            cases: entries,
        };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<CaseBase> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: CaseBaseManifest = serde_json::from_str(&text)?;
        if manifest.format != CASEBASE_FORMAT {
            return Err(Error::Model(format!(
                "unsupported case base format `{}`",
                manifest.format
            )));
        }
        let mut named = Vec::with_capacity(manifest.cases.len());
        for c in manifest.cases {
            let mut t = read_trace(&dir.join(&c.file))?;
            t.label = Some(c.label);
            named.push((c.id, t));
        }
        train_named(named, manifest.config)
    }
}

pub const CASEBASE_FORMAT: &str = "tracelab-casebase/1";

#[derive(Serialize, Deserialize)]
struct CaseBaseManifest {
    format: String,
    config: ClassifierConfig,
    cases: Vec<ManifestCase>,
}

#[derive(Serialize, Deserialize)]
struct ManifestCase {
    id: String,
    label: Label,
    file: String,
}

/// Incremental classification over an already-filtered step stream.
pub struct OnlineSession<'a> {
    cb: &'a CaseBase,
    observed: Trace,
}

impl OnlineSession<'_> {
    pub fn set_initial_state(&mut self, s: crate::trace::State) {
        self.observed.initial_state = s;
    }

    /// Label for what has been observed so far.
    pub fn current(&self) -> Result<Label> {
        Ok(self.cb.classify(&self.observed)?.label)
    }

    pub fn push(&mut self, step: Step) -> Result<Label> {
        self.observed.steps.push(step);
        self.current()
    }

    pub fn observed(&self) -> &Trace {
        &self.observed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Catalog;
    use crate::trace::ActionInstance;

    fn labeled(label: Label, names: &[&str]) -> Trace {
        let steps = names
            .iter()
            .map(|n| Step {
                action: ActionInstance::new(*n, args_for(n)),
                state: Default::default(),
            })
            .collect();
        Trace {
            steps,
            label: Some(label),
            ..Default::default()
        }
    }

    fn args_for(name: &str) -> Vec<String> {
        let arity = Catalog::builtin().get(name).unwrap().args.len();
        (0..arity).map(|i| format!("k{i}")).collect()
    }

    fn cfg(k: usize) -> ClassifierConfig {
        ClassifierConfig {
            observability: ObservabilityModel::Full,
            distance: DistanceConfig::new(DistanceKind::Actions),
            k,
        }
    }

    #[test]
    fn convergence_step_definition() {
        use Label::*;
        assert_eq!(convergence_step(&[Good, Good, Good]), 0);
        assert_eq!(convergence_step(&[Good, Bad, Bad]), 1);
        assert_eq!(convergence_step(&[Bad, Bad, Good]), 2);
        assert_eq!(convergence_step(&[Bad, Good, Bad]), 2);
        assert_eq!(convergence_step(&[]), 0);
    }

    #[test]
    fn unlabeled_training_trace_is_rejected() {
        let mut t = labeled(Label::Good, &["cash-out"]);
        t.label = None;
        let r = train(&[t, labeled(Label::Bad, &["pay-bill"])], cfg(1));
        assert!(matches!(r, Err(Error::Model(_))));
    }

    #[test]
    fn missing_class_is_rejected() {
        let r = train(&[labeled(Label::Good, &["cash-out"])], cfg(1));
        assert!(matches!(r, Err(Error::Model(_))));
    }

    #[test]
    fn duplicates_are_kept() {
        let g = labeled(Label::Good, &["cash-out"]);
        let cb = train(&[g.clone(), g, labeled(Label::Bad, &["pay-bill"])], cfg(1)).unwrap();
        assert_eq!(cb.len(), 3);
    }

    #[test]
    fn exact_match_with_k1() {
        let g = labeled(Label::Good, &["pay-bill", "quick-deposit"]);
        let b = labeled(Label::Bad, &["cash-out"]);
        let cb = train(&[g.clone(), b], cfg(1)).unwrap();
        let c = cb.classify(&g).unwrap();
        assert_eq!(c.label, Label::Good);
        assert_eq!(c.neighbors[0].distance, 0.0);
        assert!(c.matches.is_none());
    }

    #[test]
    fn mode_of_three_neighbors() {
        let q = labeled(Label::Good, &["cash-out", "pay-bill"]);
        let cb = train(
            &[
                labeled(Label::Good, &["cash-out", "pay-bill"]),
                labeled(Label::Bad, &["cash-out", "pay-bill", "quick-deposit"]),
                labeled(Label::Bad, &["cash-out"]),
                labeled(Label::Good, &["work"]),
            ],
            cfg(3),
        )
        .unwrap();
        let c = cb.classify(&q).unwrap();
        let labels: Vec<_> = c.neighbors.iter().map(|n| n.label).collect();
        assert_eq!(labels, vec![Label::Good, Label::Bad, Label::Bad]);
        assert_eq!(c.label, Label::Bad);
    }

    #[test]
    fn even_split_goes_to_nearest() {
        assert_eq!(vote([Label::Good, Label::Bad].into_iter()), Label::Good);
        assert_eq!(vote([Label::Bad, Label::Good].into_iter()), Label::Bad);
    }

    #[test]
    fn empty_query_still_gets_a_label() {
        let cb = train(
            &[labeled(Label::Bad, &["cash-out"]), labeled(Label::Good, &["pay-bill"])],
            cfg(1),
        )
        .unwrap();
        let c = cb.classify(&Trace::default()).unwrap();
        assert_eq!(c.label, Label::Bad);
    }

    #[test]
    fn online_boundaries() {
        let cb = train(
            &[labeled(Label::Good, &["pay-bill"]), labeled(Label::Bad, &["pay-bill", "cash-out"])],
            cfg(1),
        )
        .unwrap();
        // prefix 0 ties and the first case wins
        let r = cb.classify_online(&labeled(Label::Good, &["pay-bill", "pay-bill"])).unwrap();
        assert_eq!(r.predictions, vec![Label::Good; 3]);
        assert_eq!(r.convergence_step, 0);
        // flips only at the final step
        let r = cb.classify_online(&labeled(Label::Bad, &["pay-bill", "cash-out", "cash-out"])).unwrap();
        assert_eq!(r.final_label, Label::Bad);
        assert_eq!(r.convergence_step, 2);
        let r = cb.classify_online(&labeled(Label::Bad, &["pay-bill", "pay-bill", "cash-out"])).unwrap();
        assert_eq!(r.convergence_step, 3);
        assert_eq!(r.convergence_step, r.predictions.len() - 1);
    }

    #[test]
    fn save_and_load_preserve_decisions() {
        let dir = tempfile::tempdir().unwrap();
        let traces = [
            labeled(Label::Good, &["pay-bill", "quick-deposit"]),
            labeled(Label::Bad, &["cash-out", "move-funds-self"]),
        ];
        let cb = train(&traces, cfg(1)).unwrap();
        cb.save(dir.path()).unwrap();
        let back = CaseBase::load(dir.path()).unwrap();
        assert_eq!(back.config(), cb.config());
        assert_eq!(back.len(), 2);
        let q = labeled(Label::Bad, &["cash-out"]);
        assert_eq!(back.classify(&q).unwrap(), cb.classify(&q).unwrap());
    }
}
