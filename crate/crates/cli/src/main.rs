use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use tracelab_core::baseline::{features_csv, TreeModel, TreeParams};
use tracelab_core::classifier::{self, CaseBase, ClassifierConfig};
use tracelab_core::distance::{DfVariant, DistanceConfig, DistanceKind, DEFAULT_MAX_DIFF};
use tracelab_core::harness::{run_experiment, ExperimentSpec};
use tracelab_core::observability::ObservabilityModel;
use tracelab_core::par::Exec;
use tracelab_core::sim::{self, batch_jobs, run_batch, Domain, SimConfig};
use tracelab_core::trace::{read_trace, Label, Trace};

#[derive(Parser)]
#[command(name = "tracelab", version, about = "Simulate and classify customer behavior traces")]
struct Cli {
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one customer and write its full and observed traces.
    Simulate(SimulateArgs),
    /// Simulate a labelled batch plus a manifest.
    Batch(BatchArgs),
    /// Build and save a case base.
    Casebase {
        #[command(subcommand)]
        cmd: CasebaseCmd,
    },
    /// Classify a trace against a saved case base.
    Classify(ClassifyArgs),
    /// Decision-tree baseline.
    Baseline {
        #[command(subcommand)]
        cmd: BaselineCmd,
    },
    /// Experiment grids.
    Experiment {
        #[command(subcommand)]
        cmd: ExperimentCmd,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Standard,
    Criminal,
}

#[derive(Args)]
struct SimOpts {
    /// TOML simulator config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Action schemas and plan library to use instead of the built-in one.
    #[arg(long)]
    domain: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    goal_prob: Option<f64>,
    #[arg(long)]
    observability: Option<ObservabilityModel>,
    #[arg(long)]
    failure_prob: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

impl SimOpts {
    fn config(&self) -> Result<SimConfig> {
        let mut c = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => SimConfig::default(),
        };
        if let Some(h) = self.horizon {
            c.horizon = h;
        }
        if let Some(p) = self.goal_prob {
            c.goal_prob = p;
        }
        if let Some(m) = self.observability {
            c.observability = m;
        }
        if let Some(f) = self.failure_prob {
            c.failure_prob = f;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    profile: Profile,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    sim: SimOpts,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long, default_value_t = 10)]
    good: usize,
    #[arg(long, default_value_t = 10)]
    bad: usize,
    /// First seed; each trace takes the next one.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    sim: SimOpts,
}

#[derive(Args)]
struct DistanceOpts {
    #[arg(long, default_value = "relational")]
    distance: DistanceKind,
    /// Normalizer for numeric differences.
    #[arg(long = "M", default_value_t = DEFAULT_MAX_DIFF)]
    max_diff: f64,
    #[arg(long, default_value = "corrected")]
    df_variant: DfVariant,
    #[arg(long)]
    symmetrize: bool,
}

#[derive(Subcommand)]
enum CasebaseCmd {
    Train {
        /// Trace files or directories of traces.
        #[arg(long, required = true, num_args = 1..)]
        traces: Vec<PathBuf>,
        #[arg(long, default_value = "bank")]
        observability: ObservabilityModel,
        #[command(flatten)]
        distance: DistanceOpts,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ClassifyArgs {
    /// Case base directory.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    /// Report a prediction after every step.
    #[arg(long)]
    online: bool,
}

#[derive(Subcommand)]
enum BaselineCmd {
    Train {
        #[arg(long, required = true, num_args = 1..)]
        traces: Vec<PathBuf>,
        #[arg(long, default_value = "bank")]
        observability: ObservabilityModel,
        #[arg(long, default_value_t = 8)]
        max_depth: usize,
        #[arg(long, default_value_t = 2)]
        min_leaf: usize,
        /// Model file (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Dump prefix features as CSV.
    Features {
        #[arg(long, required = true, num_args = 1..)]
        traces: Vec<PathBuf>,
        #[arg(long, default_value = "bank")]
        observability: ObservabilityModel,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ExperimentCmd {
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Expands directories: `*.full.jsonl` if there are any, otherwise every
/// `*.jsonl`. Sorted by file name.
fn collect_traces(paths: &[PathBuf]) -> Result<Vec<(String, Trace)>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.to_string_lossy().ends_with(".jsonl"))
                .collect();
            if found.iter().any(|f| f.to_string_lossy().ends_with(".full.jsonl")) {
                found.retain(|f| f.to_string_lossy().ends_with(".full.jsonl"));
            }
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        bail!("no trace files found");
    }
    files
        .iter()
        .map(|f| {
            let t = read_trace(f)?;
            Ok((stem(f), t))
        })
        .collect()
}

fn stem(p: &Path) -> String {
    let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.trim_end_matches(".jsonl")
        .trim_end_matches(".full")
        .trim_end_matches(".obs")
        .to_string()
}

fn print(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json values serialize"));
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    match cli.cmd {
        Cmd::Simulate(a) => {
            let mut cfg = a.sim.config()?;
            cfg.seed = a.seed;
            cfg.label = match a.profile {
                Profile::Standard => Label::Good,
                Profile::Criminal => Label::Bad,
            };
            let out = match &a.sim.domain {
                Some(p) => sim::simulate_with(&cfg, &Domain::load(p)?)?,
                None => sim::simulate(&cfg)?,
            };
            fs::create_dir_all(&a.sim.out)
                .with_context(|| format!("creating {}", a.sim.out.display()))?;
            let name = format!("{}-{}", cfg.label, cfg.seed);
            let (full, obs) = sim::write_output(&a.sim.out, &name, &out)?;
            print(&json!({
                "full": a.sim.out.join(full),
                "observed": a.sim.out.join(obs),
                "full_len": out.full.len(),
                "observed_len": out.observed.len(),
                "truncated": out.full.meta.truncated,
                "goals": out.goals.iter().map(|g| json!({
                    "template": g.template,
                    "adopted_at": g.adopted_at,
                    "status": g.status,
                })).collect::<Vec<_>>(),
            }));
        }
        Cmd::Batch(a) => {
            if a.sim.domain.is_some() {
                bail!("--domain is only supported by `simulate`");
            }
            let cfg = a.sim.config()?;
            let jobs = batch_jobs(&cfg, a.good, a.bad, a.seed);
            let m = run_batch(&jobs, &a.sim.out, exec)?;
            print(&json!({ "dir": a.sim.out, "good": m.good, "bad": m.bad }));
        }
        Cmd::Casebase {
            cmd:
                CasebaseCmd::Train {
                    traces,
                    observability,
                    distance,
                    k,
                    out,
                },
        } => {
            let cfg = ClassifierConfig {
                observability,
                distance: DistanceConfig {
                    kind: distance.distance,
                    max_diff: distance.max_diff,
                    df_variant: distance.df_variant,
                    symmetrize: distance.symmetrize,
                    ..Default::default()
                },
                k,
            };
            cfg.distance.validate()?;
            let cb = classifier::train_named(collect_traces(&traces)?, cfg)?;
            cb.save(&out)?;
            print(&json!({ "dir": out, "cases": cb.len() }));
        }
        Cmd::Classify(a) => {
            let cb = CaseBase::load(&a.model)?.with_exec(exec);
            let t = read_trace(&a.trace)?;
            let c = cb.classify(&t)?;
            let mut report = json!({
                "trace": a.trace,
                "label": c.label,
                "neighbors": c.neighbors,
            });
            if a.online {
                report["online"] = serde_json::to_value(cb.classify_online(&t)?)?;
            }
            print(&report);
        }
        Cmd::Baseline { cmd } => match cmd {
            BaselineCmd::Train {
                traces,
                observability,
                max_depth,
                min_leaf,
                out,
            } => {
                let traces: Vec<Trace> = collect_traces(&traces)?.into_iter().map(|(_, t)| t).collect();
                let params = TreeParams { max_depth, min_leaf };
                let m = TreeModel::train(&traces, observability, params, exec)?;
                m.save(&out)?;
                print(&json!({
                    "model": out,
                    "nodes": m.tree.nodes.len(),
                    "depth": m.tree.depth(),
                }));
            }
            BaselineCmd::Predict { model, trace } => {
                let m = TreeModel::load(&model)?;
                let r = m.classify_online(&read_trace(&trace)?)?;
                print(&json!({
                    "trace": trace,
                    "label": r.final_label,
                    "predictions": r.predictions,
                    "convergence_step": r.convergence_step,
                }));
            }
            BaselineCmd::Features {
                traces,
                observability,
                out,
            } => {
                let traces = collect_traces(&traces)?;
                let filtered = traces
                    .iter()
                    .map(|(id, t)| Ok((id.clone(), tracelab_core::observability::filter_trace(t, observability)?)))
                    .collect::<Result<Vec<_>>>()?;
                let csv = features_csv(&filtered, observability)?;
                match out {
                    Some(p) => fs::write(&p, csv).with_context(|| format!("writing {}", p.display()))?,
                    None => print!("{csv}"),
                }
            }
        },
        Cmd::Experiment {
            cmd: ExperimentCmd::Run { spec, out },
        } => {
            let spec = ExperimentSpec::load(&spec)?;
            let report = run_experiment(&spec, exec)?;
            report.write(&out)?;
            print!("{}", report.render());
        }
    }
    Ok(())
}
