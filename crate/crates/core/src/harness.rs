//! Experiment grids: simulate labelled datasets, train a classifier per grid
//! cell, classify every test trace online, and report accuracy at trace end
//! plus the mean convergence step.
//!
//! A spec is TOML:
//!
//! ```toml
//! name = "observability"
//! seeds = 5
//! classifiers = ["knn"]
//! observability = ["full", "bank"]
//! distances = ["actions", "relational"]
//! horizons = [50]
//! goal_probs = [0.3]
//!
//! [sim.profile]
//! create_companies = true
//! ```
//!
//! Dataset `i` (for `i < seeds`) uses consecutive simulator seeds starting at
//! `base_seed + i * SEED_STRIDE`: training traces first, then test traces,
//! standard customers before criminals. The same datasets are reused across
//! observability models, distances and classifiers.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baseline::{TreeModel, TreeParams};
use crate::classifier::{self, ClassifierConfig, OnlineResult};
use crate::distance::{DistanceConfig, DistanceKind};
use crate::error::{Error, Result};
use crate::observability::ObservabilityModel;
use crate::par::{self, Exec};
use crate::sim::{batch_jobs, run_jobs, PlacementWeights, SimConfig};
use crate::trace::{Label, Trace};

pub const SEED_STRIDE: u64 = 1_000_003;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Knn,
    Tree,
}

impl ClassifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::Tree => "tree",
        }
    }
}

/// Criminals in the training and test sets use different placement
/// strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Novelty {
    pub train: PlacementWeights,
    pub test: PlacementWeights,
}

/// Which grid dimensions label the rows and columns of the rendered table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dim {
    Classifier,
    Observability,
    Distance,
    Horizon,
    GoalProb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableLayout {
    pub rows: Vec<Dim>,
    pub columns: Vec<Dim>,
}

impl Default for TableLayout {
    fn default() -> Self {
        TableLayout {
            rows: vec![Dim::Observability, Dim::Horizon, Dim::GoalProb],
            columns: vec![Dim::Classifier, Dim::Distance],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub seeds: usize,
    pub base_seed: u64,
    pub train_good: usize,
    pub train_bad: usize,
    pub test_good: usize,
    pub test_bad: usize,
    pub classifiers: Vec<ClassifierKind>,
    pub observability: Vec<ObservabilityModel>,
    /// Only used by `knn` cells.
    pub distances: Vec<DistanceKind>,
    pub horizons: Vec<usize>,
    pub goal_probs: Vec<f64>,
    pub k: usize,
    /// Distance settings shared by every cell; `kind` comes from `distances`.
    pub distance: DistanceConfig,
    pub tree: TreeParams,
    /// Simulator settings; seed, horizon, label and goal probability are set
    /// per dataset.
    pub sim: SimConfig,
    pub novelty: Option<Novelty>,
    pub table: TableLayout,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: "experiment".to_string(),
            seeds: 5,
            base_seed: 0,
            train_good: 10,
            train_bad: 10,
            test_good: 10,
            test_bad: 10,
            classifiers: vec![ClassifierKind::Knn],
            observability: vec![ObservabilityModel::Bank],
            distances: vec![DistanceKind::Relational],
            horizons: vec![50],
            goal_probs: vec![0.3],
            k: 1,
            distance: DistanceConfig::default(),
            tree: TreeParams::default(),
            sim: SimConfig::default(),
            novelty: None,
            table: TableLayout::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<ExperimentSpec> {
        let spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| Error::Config(format!("experiment spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<ExperimentSpec> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_good == 0 || self.train_bad == 0 {
            return Err(Error::Config("training needs at least one trace per class".into()));
        }
        if self.test_good + self.test_bad == 0 {
            return Err(Error::Config("no test traces".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.horizons.contains(&0) {
            return Err(Error::Config("horizons must be at least 1".into()));
        }
        if let Some(p) = self.goal_probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!("goal probability {p} outside [0, 1]")));
        }
        self.distance.validate()?;
        self.sim.validate()
    }

    /// Grid cells in report order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &horizon in &self.horizons {
            for &goal_prob in &self.goal_probs {
                for &observability in &self.observability {
                    for &classifier in &self.classifiers {
                        let distances: Vec<Option<DistanceKind>> = match classifier {
                            ClassifierKind::Knn => self.distances.iter().copied().map(Some).collect(),
                            ClassifierKind::Tree => vec![None],
                        };
                        for distance in distances {
                            out.push(Cell {
                                classifier,
                                observability,
                                distance,
                                horizon,
                                goal_prob,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    fn dataset_config(&self, horizon: usize, goal_prob: f64) -> SimConfig {
        SimConfig {
            horizon,
            goal_prob,
            ..self.sim.clone()
        }
    }

    /// Training and test traces for dataset `i`, unfiltered.
    pub fn dataset(&self, i: usize, horizon: usize, goal_prob: f64, exec: Exec) -> Result<Dataset> {
        let base = self.dataset_config(horizon, goal_prob);
        let seed = self.base_seed + i as u64 * SEED_STRIDE;
        let mut train = batch_jobs(&base, self.train_good, self.train_bad, seed);
        let mut test = batch_jobs(
            &base,
            self.test_good,
            self.test_bad,
            seed + (self.train_good + self.train_bad) as u64,
        );
        if let Some(n) = &self.novelty {
            for j in &mut train {
                j.config.profile.placement = n.train.clone();
            }
            for j in &mut test {
                j.config.profile.placement = n.test.clone();
            }
        }
        for j in &mut train {
            j.id = format!("train-{}", j.id);
        }
        for j in &mut test {
            j.id = format!("test-{}", j.id);
        }
        let named = |jobs: &[crate::sim::BatchJob]| -> Result<Vec<(String, Trace)>> {
            Ok(jobs
                .iter()
                .map(|j| j.id.clone())
                .zip(run_jobs(jobs, exec)?.into_iter().map(|o| o.full))
                .collect())
        };
        Ok(Dataset {
            train: named(&train)?,
            test: named(&test)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<(String, Trace)>,
    pub test: Vec<(String, Trace)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub classifier: ClassifierKind,
    pub observability: ObservabilityModel,
    pub distance: Option<DistanceKind>,
    pub horizon: usize,
    pub goal_prob: f64,
}

impl Cell {
    pub fn distance_name(&self) -> &'static str {
        self.distance.map_or("-", DistanceKind::as_str)
    }

    fn dim(&self, d: Dim) -> String {
        match d {
            Dim::Classifier => self.classifier.as_str().to_string(),
            Dim::Observability => self.observability.as_str().to_string(),
            Dim::Distance => self.distance_name().to_string(),
            Dim::Horizon => self.horizon.to_string(),
            Dim::GoalProb => self.goal_prob.to_string(),
        }
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "classifier={} observability={} distance={} horizon={} goal_prob={}",
            self.classifier.as_str(),
            self.observability,
            self.distance_name(),
            self.horizon,
            self.goal_prob
        )
    }
}

/// Outcome of classifying one test trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceResult {
    pub id: String,
    pub label: Label,
    pub predicted: Label,
    pub convergence_step: usize,
    pub observed_len: usize,
}

impl TraceResult {
    fn from_online(id: &str, label: Label, r: &OnlineResult) -> TraceResult {
        TraceResult {
            id: id.to_string(),
            label,
            predicted: r.final_label,
            convergence_step: r.convergence_step,
            observed_len: r.predictions.len() - 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    /// Fraction of test traces whose final prediction is right.
    pub accuracy: f64,
    pub mean_convergence: f64,
    pub n: usize,
}

/// Accuracy and mean convergence step; an empty input gives zeros.
pub fn evaluate(results: &[TraceResult]) -> MetricsRow {
    if results.is_empty() {
        return MetricsRow {
            accuracy: 0.0,
            mean_convergence: 0.0,
            n: 0,
        };
    }
    let n = results.len() as f64;
    MetricsRow {
        accuracy: results.iter().filter(|r| r.predicted == r.label).count() as f64 / n,
        mean_convergence: results.iter().map(|r| r.convergence_step as f64).sum::<f64>() / n,
        n: results.len(),
    }
}

/// Trains the cell's classifier on the dataset and classifies every test
/// trace online.
pub fn run_cell(spec: &ExperimentSpec, cell: &Cell, data: &Dataset, exec: Exec) -> Result<Vec<TraceResult>> {
    let labelled = |t: &Trace| {
        t.label
            .ok_or_else(|| Error::Model("test trace without a label".into()))
    };
    match (cell.classifier, cell.distance) {
        (ClassifierKind::Knn, Some(kind)) => {
            let cfg = ClassifierConfig {
                observability: cell.observability,
                distance: DistanceConfig {
                    kind,
                    ..spec.distance.clone()
                },
                k: spec.k,
            };
            let cb = classifier::train_named(data.train.clone(), cfg)?.with_exec(exec);
            par::try_map(exec, &data.test, |(id, t)| {
                Ok(TraceResult::from_online(id, labelled(t)?, &cb.classify_online(t)?))
            })
        }
        (ClassifierKind::Tree, _) => {
            let train: Vec<Trace> = data.train.iter().map(|(_, t)| t.clone()).collect();
            let m = TreeModel::train(&train, cell.observability, spec.tree, exec)?;
            par::try_map(exec, &data.test, |(id, t)| {
                Ok(TraceResult::from_online(id, labelled(t)?, &m.classify_online(t)?))
            })
        }
        (ClassifierKind::Knn, None) => Err(Error::Config("knn cell without a distance".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub cell: Cell,
    pub seed: usize,
    pub metrics: MetricsRow,
    pub traces: Vec<TraceResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub cell: Cell,
    /// Means over seeds.
    pub accuracy: f64,
    pub mean_convergence: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub layout: TableLayout,
    pub rows: Vec<SeedRow>,
    pub summary: Vec<SummaryRow>,
}

/// Runs every cell for every seed. Output does not depend on `exec`.
pub fn run_experiment(spec: &ExperimentSpec, exec: Exec) -> Result<Report> {
    spec.validate()?;
    let cells = spec.cells();
    let mut keys: Vec<(usize, f64)> = Vec::new();
    for c in &cells {
        if !keys.iter().any(|&(h, p)| h == c.horizon && p == c.goal_prob) {
            keys.push((c.horizon, c.goal_prob));
        }
    }
    let data_jobs: Vec<(usize, usize, f64)> = keys
        .iter()
        .flat_map(|&(h, p)| (0..spec.seeds).map(move |s| (s, h, p)))
        .collect();
    let datasets = par::try_map(exec, &data_jobs, |&(s, h, p)| {
        spec.dataset(s, h, p, exec).map_err(|e| Error::Cell {
            cell: format!("dataset seed={s} horizon={h} goal_prob={p}"),
            source: Box::new(e),
        })
    })?;
    let mut by_key: HashMap<(usize, usize), &Dataset> = HashMap::new();
    for ((s, h, p), d) in data_jobs.iter().zip(&datasets) {
        let k = keys.iter().position(|&(kh, kp)| kh == *h && kp == *p).expect("key listed");
        by_key.insert((k, *s), d);
    }

    let units: Vec<(Cell, usize, &Dataset)> = cells
        .iter()
        .flat_map(|c| {
            let k = keys
                .iter()
                .position(|&(h, p)| h == c.horizon && p == c.goal_prob)
                .expect("key listed");
            let by_key = &by_key;
            (0..spec.seeds).map(move |s| (*c, s, by_key[&(k, s)]))
        })
        .collect();
    let rows = par::try_map(exec, &units, |(cell, seed, data)| {
        let traces = run_cell(spec, cell, data, exec).map_err(|e| Error::Cell {
            cell: format!("{cell} seed={seed}"),
            source: Box::new(e),
        })?;
        Ok::<_, Error>(SeedRow {
            cell: *cell,
            seed: *seed,
            metrics: evaluate(&traces),
            traces,
        })
    })?;
    let summary = summarize(&cells, &rows);
    Ok(Report {
        name: spec.name.clone(),
        layout: spec.table.clone(),
        rows,
        summary,
    })
}

fn summarize(cells: &[Cell], rows: &[SeedRow]) -> Vec<SummaryRow> {
    cells
        .iter()
        .map(|c| {
            let mine: Vec<&SeedRow> = rows.iter().filter(|r| r.cell == *c).collect();
            let n = mine.len().max(1) as f64;
            SummaryRow {
                cell: *c,
                accuracy: mine.iter().map(|r| r.metrics.accuracy).sum::<f64>() / n,
                mean_convergence: mine.iter().map(|r| r.metrics.mean_convergence).sum::<f64>() / n,
                seeds: mine.len(),
            }
        })
        .collect()
}

const CELL_HEADER: &str = "classifier,observability,distance,horizon,goal_prob";

fn cell_csv(c: &Cell) -> String {
    format!(
        "{},{},{},{},{}",
        c.classifier.as_str(),
        c.observability,
        c.distance_name(),
        c.horizon,
        c.goal_prob
    )
}

impl Report {
    pub fn summary_csv(&self) -> String {
        let mut out = format!("{CELL_HEADER},seeds,accuracy,mean_convergence\n");
        for r in &self.summary {
            writeln!(
                out,
                "{},{},{},{}",
                cell_csv(&r.cell),
                r.seeds,
                r.accuracy,
                r.mean_convergence
            )
            .unwrap();
        }
        out
    }

    pub fn seeds_csv(&self) -> String {
        let mut out = format!("{CELL_HEADER},seed,n,accuracy,mean_convergence\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                cell_csv(&r.cell),
                r.seed,
                r.metrics.n,
                r.metrics.accuracy,
                r.metrics.mean_convergence
            )
            .unwrap();
        }
        out
    }

    pub fn traces_csv(&self) -> String {
        let mut out = format!("{CELL_HEADER},seed,trace,label,predicted,convergence_step,observed_len\n");
        for r in &self.rows {
            for t in &r.traces {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    cell_csv(&r.cell),
                    r.seed,
                    t.id,
                    t.label,
                    t.predicted,
                    t.convergence_step,
                    t.observed_len
                )
                .unwrap();
            }
        }
        out
    }

    /// Plain-text pivot of the summary: `accuracy% (mean convergence)`.
    pub fn render(&self) -> String {
        let varying = |d: Dim| {
            let mut vals: Vec<String> = self.summary.iter().map(|r| r.cell.dim(d)).collect();
            vals.dedup();
            vals.sort();
            vals.dedup();
            vals.len() > 1
        };
        let key = |c: &Cell, dims: &[Dim]| -> String {
            let parts: Vec<String> = dims
                .iter()
                .filter(|d| varying(**d))
                .map(|d| c.dim(*d))
                .filter(|p| p != "-")
                .collect();
            if parts.is_empty() {
                "all".to_string()
            } else {
                parts.join(" ")
            }
        };
        let mut rows: Vec<String> = Vec::new();
        let mut cols: Vec<String> = Vec::new();
        let mut vals: BTreeMap<(String, String), String> = BTreeMap::new();
        for r in &self.summary {
            let rk = key(&r.cell, &self.layout.rows);
            let ck = key(&r.cell, &self.layout.columns);
            if !rows.contains(&rk) {
                rows.push(rk.clone());
            }
            if !cols.contains(&ck) {
                cols.push(ck.clone());
            }
            vals.insert(
                (rk, ck),
                format!("{:.0} ({:.1})", r.accuracy * 100.0, r.mean_convergence),
            );
        }
        let mut out = format!("{}\n", self.name);
        if self.summary.is_empty() {
            out.push_str("(no cells)\n");
            return out;
        }
        let w0 = rows.iter().map(String::len).max().unwrap_or(0).max(1);
        let widths: Vec<usize> = cols
            .iter()
            .map(|c| {
                rows.iter()
                    .filter_map(|r| vals.get(&(r.clone(), c.clone())))
                    .map(String::len)
                    .chain([c.len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        write!(out, "{:w0$}", "").unwrap();
        for (c, w) in cols.iter().zip(&widths) {
            write!(out, "  {c:>w$}").unwrap();
        }
        out.push('\n');
        for r in &rows {
            write!(out, "{r:w0$}").unwrap();
            for (c, w) in cols.iter().zip(&widths) {
                let v = vals.get(&(r.clone(), c.clone())).map_or("", String::as_str);
                write!(out, "  {v:>w$}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Writes `summary.csv`, `seeds.csv`, `traces.csv` and `table.txt`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, text) in [
            ("summary.csv", self.summary_csv()),
            ("seeds.csv", self.seeds_csv()),
            ("traces.csv", self.traces_csv()),
            ("table.txt", self.render()),
        ] {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}
