//! One PASS/FAIL line per acceptance criterion, with supporting numbers.
//!
//! Runs as a plain binary so the report always shows. Exits non-zero only
//! when `ACCEPTANCE_STRICT` is set and something failed.

mod common;

use std::collections::HashMap;
use std::panic;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tracelab_core::amount::Amount;
use tracelab_core::distance::{
    distance, formula_distance, trace_distance, DfVariant, DistanceConfig, DistanceKind, Prepared,
};
use tracelab_core::harness::{run_experiment, ClassifierKind, ExperimentSpec, Novelty, Report};
use tracelab_core::observability::ObservabilityModel as M;
use tracelab_core::par::Exec;
use tracelab_core::sim::domain::Domain;
use tracelab_core::sim::{simulate, PlacementWeights, ProfileOptions};
use tracelab_core::trace::{serialize_trace, ActionInstance, Encoding, Literal, State, Step, Trace};

const EXEC: Exec = Exec::Parallel;

struct Outcome {
    pass: bool,
    summary: String,
    detail: Vec<String>,
}

fn outcome(pass: bool, summary: impl Into<String>, detail: Vec<String>) -> Outcome {
    Outcome {
        pass,
        summary: summary.into(),
        detail,
    }
}

fn spec(name: &str) -> ExperimentSpec {
    ExperimentSpec {
        name: name.into(),
        seeds: 5,
        ..Default::default()
    }
}

fn symmetrized(mut s: ExperimentSpec) -> ExperimentSpec {
    s.distance.symmetrize = true;
    s
}

fn run(s: &ExperimentSpec) -> Report {
    run_experiment(s, EXEC).unwrap_or_else(|e| panic!("{}: {e}", s.name))
}

fn pct(x: f64) -> String {
    format!("{:.0}%", 100.0 * x)
}

fn table(r: &Report) -> Vec<String> {
    r.render().lines().map(String::from).collect()
}

fn step_trace(init: Vec<Literal>, steps: Vec<(ActionInstance, Vec<Literal>)>) -> Trace {
    let mut s: State = init.into_iter().collect();
    let initial_state = s.clone();
    let steps = steps
        .into_iter()
        .map(|(action, adds)| {
            for l in adds {
                s.insert(l);
            }
            Step {
                action,
                state: s.clone(),
            }
        })
        .collect();
    Trace {
        initial_state,
        steps,
        ..Default::default()
    }
}

fn c1_worked_examples() -> Outcome {
    let a = ActionInstance::new("create-account", ["i1", "i2"]);
    let b = ActionInstance::new("create-account", ["i3", "i2"]);
    let df = formula_distance((&a).into(), (&b).into(), DfVariant::Corrected).unwrap();

    let init = vec![Literal::pred("known", ["i1", "i2", "i3"])];
    let delta = |acct: &str, v: i64| {
        vec![
            Literal::pred("acc-owner", ["i1", acct]),
            Literal::func("balance", [acct], Amount::from_units(v)),
        ]
    };
    let t1 = step_trace(init.clone(), vec![(ActionInstance::new("work", ["i1"]), delta("i2", 20))]);
    let t2 = step_trace(init, vec![(ActionInstance::new("work", ["i1"]), delta("i3", 10))]);
    let m: f64 = 1e6;
    let expected = 0.5 * (0.25f64.min(1.0) + (0.5 * 10.0 / m).min(1.0));
    // identical actions: the relational distance is half the delta-pair value
    let got = 2.0 * trace_distance(&DistanceConfig::default(), &t1, &t2);
    let pass = (df - 0.25).abs() < 1e-12 && (got - expected).abs() < 1e-12;
    outcome(
        pass,
        format!("d_f = {df}, delta pair = {got:.15} (expected {expected:.15})"),
        vec![],
    )
}

const LITS: [(&str, usize, bool); 5] = [
    ("owner", 2, false),
    ("flag", 1, false),
    ("link", 2, false),
    ("balance", 1, true),
    ("price", 1, true),
];
const ACTS: [(&str, usize); 4] = [("open", 2), ("pay", 3), ("work", 1), ("move", 4)];
const CONSTS: [&str; 6] = ["c0", "acct-7", "x", "co-2", "t9", "b1"];

fn random_args(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    (0..n).map(|_| CONSTS[rng.gen_range(0..CONSTS.len())].to_string()).collect()
}

fn random_literal(rng: &mut ChaCha8Rng) -> Literal {
    let (name, arity, func) = LITS[rng.gen_range(0..LITS.len())];
    let args = random_args(rng, arity);
    if func {
        Literal::func(name, args, Amount::from_units(rng.gen_range(0..5000)))
    } else {
        Literal::pred(name, args)
    }
}

fn random_trace(rng: &mut ChaCha8Rng) -> Trace {
    let init = (0..rng.gen_range(0..3)).map(|_| random_literal(rng)).collect();
    let steps = (0..rng.gen_range(0..8))
        .map(|_| {
            let (name, arity) = ACTS[rng.gen_range(0..ACTS.len())];
            let a = ActionInstance::new(name, random_args(rng, arity));
            let adds = (0..rng.gen_range(0..3)).map(|_| random_literal(rng)).collect();
            (a, adds)
        })
        .collect();
    step_trace(init, steps)
}

fn renamed(t: &Trace, rho: &HashMap<String, String>) -> Trace {
    let r = |args: &[String]| -> Vec<String> { args.iter().map(|a| rho[a].clone()).collect() };
    let state = |s: &State| -> State { s.iter().map(|l| Literal { args: r(&l.args), ..l }).collect() };
    Trace {
        initial_state: state(&t.initial_state),
        steps: t
            .steps
            .iter()
            .map(|s| Step {
                action: ActionInstance::new(s.action.name.clone(), r(&s.action.args)),
                state: state(&s.state),
            })
            .collect(),
        ..t.clone()
    }
}

fn c2_metric_axioms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let kinds = [
        DistanceKind::Actions,
        DistanceKind::Delta,
        DistanceKind::Ngram,
        DistanceKind::Relational,
    ];
    let mut violations: Vec<String> = Vec::new();
    let pairs = 1000;
    for i in 0..pairs {
        let (a, b) = (random_trace(&mut rng), random_trace(&mut rng));
        let mut perm: Vec<&str> = CONSTS.to_vec();
        perm.shuffle(&mut rng);
        let rho: HashMap<String, String> =
            CONSTS.iter().zip(perm).map(|(c, p)| (c.to_string(), format!("r-{p}"))).collect();
        let ra = renamed(&a, &rho);
        let (pa, pb, pra) = (Prepared::new(&a), Prepared::new(&b), Prepared::new(&ra));
        for kind in kinds {
            for sym in [false, true] {
                let c = DistanceConfig {
                    kind,
                    symmetrize: sym,
                    ..Default::default()
                };
                let d = distance(&c, &pa, &pb);
                let in_range = d >= 0.0 && (kind == DistanceKind::Ngram || d <= 1.0);
                let checks = [
                    ("range", in_range),
                    ("reflexivity", distance(&c, &pa, &pa) == 0.0),
                    ("renaming", distance(&c, &pra, &pb) == d && distance(&c, &pa, &pra) == 0.0),
                    (
                        "symmetry",
                        (kind == DistanceKind::Relational && !sym) || distance(&c, &pb, &pa) == d,
                    ),
                ];
                for (what, ok) in checks {
                    if !ok {
                        violations.push(format!("pair {i} {kind} symmetrize={sym}: {what}"));
                    }
                }
            }
        }
        for (x, y) in a.steps.iter().zip(&b.steps) {
            if x.action.name == y.action.name {
                let d = formula_distance((&x.action).into(), (&y.action).into(), DfVariant::Corrected).unwrap();
                if d > 0.5 {
                    violations.push(format!("pair {i}: d_f {d} > 0.5"));
                }
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!("{pairs} random pairs, four distances, both directions; {} violations", violations.len()),
        violations.into_iter().take(5).collect(),
    )
}

fn c3_saturation() -> Outcome {
    let models = [M::Full, M::Bank, M::Transactions];
    let kinds = [
        DistanceKind::Actions,
        DistanceKind::Delta,
        DistanceKind::Ngram,
        DistanceKind::Relational,
    ];
    let mut pass = true;
    let mut misses = Vec::new();
    let mut slowest = 0.0f64;
    let mut detail = Vec::new();
    let mut row = |m: M, cells: &mut Vec<String>| {
        for kind in kinds {
            let s = ExperimentSpec {
                observability: vec![m],
                distances: vec![kind],
                ..spec("saturation cell")
            };
            let t0 = Instant::now();
            let acc = run(&s).summary[0].accuracy;
            slowest = slowest.max(t0.elapsed().as_secs_f64());
            cells.push(format!("{kind} {}", pct(acc)));
            let ok = match m {
                M::Transactions => kind != DistanceKind::Ngram || acc >= 0.9,
                _ => acc == 1.0,
            };
            if !ok {
                pass = false;
                misses.push(format!("{m}/{kind} {}", pct(acc)));
            }
        }
    };
    for m in models {
        let mut cells = Vec::new();
        row(m, &mut cells);
        detail.push(format!("{m}: {}", cells.join(", ")));
    }
    pass &= slowest < 60.0;
    let sym = symmetrized(ExperimentSpec {
        observability: vec![M::Full, M::Bank],
        distances: vec![DistanceKind::Relational],
        ..spec("saturation, symmetrized relational")
    });
    let r = run(&sym);
    detail.push(format!(
        "symmetrized relational (informational): full {}, bank {}",
        pct(r.summary[0].accuracy),
        pct(r.summary[1].accuracy)
    ));
    detail.push(format!("slowest cell {slowest:.1} s"));
    let summary = if misses.is_empty() {
        "every full/bank cell at 100%, transactions x ngram >= 90%".to_string()
    } else {
        format!("below target: {}", misses.join(", "))
    };
    outcome(pass, summary, detail)
}

/// Seeds on which `ok` holds for the per-seed metrics of the given cells.
fn seed_votes(r: &Report, n_cells: usize, ok: impl Fn(&[(f64, f64)]) -> bool) -> usize {
    let seeds = r.rows.iter().map(|x| x.seed).max().map_or(0, |m| m + 1);
    let cells: Vec<_> = r.summary.iter().map(|s| s.cell).collect();
    assert_eq!(cells.len(), n_cells);
    (0..seeds)
        .filter(|&s| {
            let per: Vec<(f64, f64)> = cells
                .iter()
                .map(|c| {
                    let row = r.rows.iter().find(|x| x.cell == *c && x.seed == s).unwrap();
                    (row.metrics.accuracy, row.metrics.mean_convergence)
                })
                .collect();
            ok(&per)
        })
        .count()
}

fn c4_convergence_order() -> Outcome {
    let base = ExperimentSpec {
        observability: vec![M::Full, M::Bank, M::Transactions],
        distances: vec![DistanceKind::Relational],
        ..spec("convergence by observability")
    };
    let ordered = |m: &[(f64, f64)]| m[0].1 < m[1].1 && m[1].1 < m[2].1;
    let describe = |r: &Report| {
        r.summary
            .iter()
            .map(|s| format!("{} {:.2}", s.cell.observability, s.mean_convergence))
            .collect::<Vec<_>>()
            .join(" / ")
    };
    let r = run(&base);
    let votes = seed_votes(&r, 3, ordered);
    let rs = run(&symmetrized(base));
    let sym_votes = seed_votes(&rs, 3, ordered);
    outcome(
        votes >= 3,
        format!("full < bank < transactions on {votes}/5 seeds; mean convergence {}", describe(&r)),
        vec![format!(
            "symmetrized relational (informational): {sym_votes}/5 seeds; {}",
            describe(&rs)
        )],
    )
}

fn c5_goal_probability() -> Outcome {
    let base = ExperimentSpec {
        distances: vec![DistanceKind::Relational],
        horizons: vec![5, 10, 20, 50],
        goal_probs: vec![0.01, 1.0],
        ..spec("goal probability boundaries")
    };
    let check = |r: &Report| {
        let mut bad = Vec::new();
        for s in &r.summary {
            let ok = if s.cell.goal_prob == 1.0 {
                s.accuracy == 1.0
            } else {
                (0.3..=0.7).contains(&s.accuracy)
            };
            if !ok {
                bad.push(format!("p={} len={} {}", s.cell.goal_prob, s.cell.horizon, pct(s.accuracy)));
            }
        }
        bad
    };
    let r = run(&base);
    let bad = check(&r);
    let rs = run(&symmetrized(ExperimentSpec {
        distances: vec![DistanceKind::Relational, DistanceKind::Actions],
        ..base
    }));
    let mut detail = table(&r);
    detail.push("symmetrized relational and actions (informational):".into());
    detail.extend(table(&rs));
    let summary = if bad.is_empty() {
        "p=1 at 100% and p=0.01 within [30%, 70%] for lengths 5-50".to_string()
    } else {
        format!("off target: {}", bad.join(", "))
    };
    outcome(bad.is_empty(), summary, detail)
}

fn placement(structuring: f64) -> PlacementWeights {
    PlacementWeights {
        structuring,
        digital: 1.0 - structuring,
    }
}

fn novelty_run(train: f64, test: f64, symmetrize: bool) -> (f64, f64) {
    let mut s = ExperimentSpec {
        observability: vec![M::Bank],
        distances: vec![DistanceKind::Relational],
        horizons: vec![350],
        novelty: Some(Novelty {
            train: placement(train),
            test: placement(test),
        }),
        ..spec("novelty")
    };
    s.distance.symmetrize = symmetrize;
    let r = run(&s);
    (r.summary[0].accuracy, r.summary[0].mean_convergence)
}

fn c6_novelty() -> Outcome {
    let directions = [(1.0, 0.0, "structuring -> digital"), (0.0, 1.0, "digital -> structuring")];
    let measure = |symmetrize: bool| {
        directions.map(|(train, test, name)| {
            let (acc, conv) = novelty_run(train, test, symmetrize);
            let (macc, mconv) = novelty_run(test, test, symmetrize);
            let ratio = if mconv > 0.0 { conv / mconv } else { f64::INFINITY };
            let line = format!(
                "{name}: {} conv {conv:.2} vs matched {} conv {mconv:.2} (x{ratio:.2})",
                pct(acc),
                pct(macc)
            );
            (acc == 1.0 && ratio > 1.5, line)
        })
    };
    let directional = measure(false);
    let pass = directional.iter().all(|(ok, _)| *ok);
    let mut detail = vec!["symmetrized relational (informational):".to_string()];
    detail.extend(measure(true).into_iter().map(|(_, l)| format!("  {l}")));
    outcome(
        pass,
        directional.into_iter().map(|(_, l)| l).collect::<Vec<_>>().join("; "),
        detail,
    )
}

fn c7_against_tree() -> Outcome {
    let sim = tracelab_core::sim::SimConfig {
        profile: ProfileOptions::comparison(),
        ..Default::default()
    };
    let base = ExperimentSpec {
        classifiers: vec![ClassifierKind::Knn, ClassifierKind::Tree],
        observability: vec![M::Full, M::Bank],
        distances: vec![DistanceKind::Relational],
        horizons: vec![10, 20, 50],
        sim,
        ..spec("relational knn vs tree")
    };
    let judge = |r: &Report| {
        let mut lost = Vec::new();
        for m in [M::Full, M::Bank] {
            for h in [10, 20, 50] {
                let sub = Report {
                    rows: r
                        .rows
                        .iter()
                        .filter(|x| x.cell.observability == m && x.cell.horizon == h)
                        .cloned()
                        .collect(),
                    summary: r
                        .summary
                        .iter()
                        .filter(|x| x.cell.observability == m && x.cell.horizon == h)
                        .cloned()
                        .collect(),
                    ..r.clone()
                };
                // knn row first: classifiers sort before the other dimensions
                let knn_first = sub.summary[0].cell.classifier == ClassifierKind::Knn;
                let votes = seed_votes(&sub, 2, |v| {
                    let (k, t) = if knn_first { (v[0], v[1]) } else { (v[1], v[0]) };
                    k.0 >= t.0 && k.1 <= t.1
                });
                if votes < 3 {
                    lost.push(format!("{m}/{h} ({votes}/5)"));
                }
            }
        }
        lost
    };
    let r = run(&base);
    let lost = judge(&r);
    let rs = run(&symmetrized(base));
    let lost_sym = judge(&rs);
    let mut detail = table(&r);
    detail.push(format!(
        "symmetrized relational (informational), cells lost: {}",
        if lost_sym.is_empty() { "none".to_string() } else { lost_sym.join(", ") }
    ));
    detail.extend(table(&rs));
    let summary = if lost.is_empty() {
        "knn matches or beats the tree on accuracy and convergence in all six cells".to_string()
    } else {
        format!("tree ahead on the seed majority in {}", lost.join(", "))
    };
    outcome(lost.is_empty(), summary, detail)
}

fn c8_filters() -> Outcome {
    let corpus = common::corpus(200, 0.0);
    let errors: Vec<String> = corpus
        .iter()
        .filter_map(|(c, o)| common::check_filters(c, o).err())
        .collect();
    outcome(
        errors.is_empty(),
        format!("{} traces x 6 models; {} violations", corpus.len(), errors.len()),
        errors.into_iter().take(5).collect(),
    )
}

fn c9_simulator() -> Outcome {
    let d = Domain::builtin();
    let corpus = common::corpus(100, 0.0);
    let mut errors = Vec::new();
    let (mut complete, mut transfers) = (0, 0);
    for (cfg, out) in &corpus {
        let id = format!("seed {}", cfg.seed);
        if let Err(e) = common::check_replay(d, &out.full, &id) {
            errors.push(e);
        }
        match common::check_phases(cfg.label, &out.full, &id) {
            Ok(c) => complete += usize::from(c),
            Err(e) => errors.push(e),
        }
        match common::check_conservation(&out.full, &id) {
            Ok(n) => transfers += n,
            Err(e) => errors.push(e),
        }
        let again = simulate(cfg).unwrap();
        let same = [&out.full, &out.observed]
            .iter()
            .zip([&again.full, &again.observed])
            .all(|(a, b)| serialize_trace(a, Encoding::Full) == serialize_trace(b, Encoding::Full));
        if !same {
            errors.push(format!("{id}: rerun differs"));
        }
    }
    outcome(
        errors.is_empty() && complete > 0 && transfers > 0,
        format!(
            "{} traces: replay, phase order ({complete} complete cycles), conservation ({transfers} transfers), reruns; {} violations",
            corpus.len(),
            errors.len()
        ),
        errors.into_iter().take(5).collect(),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("worked examples", c1_worked_examples),
        ("metric axioms", c2_metric_axioms),
        ("saturation cells", c3_saturation),
        ("relational convergence order", c4_convergence_order),
        ("goal probability boundaries", c5_goal_probability),
        ("behavior novelty", c6_novelty),
        ("relational knn vs decision tree", c7_against_tree),
        ("observability filters", c8_filters),
        ("simulator soundness", c9_simulator),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let t0 = Instant::now();
        let o = panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"), vec![])
        });
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n} ({name}): {verdict} - {} [{:.1} s]", o.summary, t0.elapsed().as_secs_f64());
        for line in &o.detail {
            println!("    {line}");
        }
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {failed} failing");
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
