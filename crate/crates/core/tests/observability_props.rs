mod common;

use std::collections::BTreeSet;

use tracelab_core::observability::{filter_trace, ObservabilityModel as M};
use tracelab_core::trace::Label;

#[test]
fn containment_opacity_and_idempotence_over_the_corpus() {
    let corpus = common::corpus(200, 0.0);
    for (cfg, out) in &corpus {
        common::check_filters(cfg, out).unwrap();
    }
    let crimes = corpus
        .iter()
        .filter(|(c, o)| c.label == Label::Bad && o.full.action_names().any(|a| a == "perform-criminal-action"))
        .count();
    assert!(crimes > 50, "only {crimes} criminal traces commit a crime");
}

#[test]
fn comparison_profile_shares_the_observable_vocabulary() {
    // Across a batch, good and bad customers under the comparison profile
    // show the same action and predicate names to the bank.
    let corpus = common::corpus(200, 0.0);
    let mut good = BTreeSet::new();
    let mut bad = BTreeSet::new();
    for (cfg, out) in corpus.iter().filter(|(c, _)| c.profile.create_companies) {
        let s = common::symbols(&filter_trace(&out.full, M::Bank).unwrap());
        match cfg.label {
            Label::Good => good.extend(s),
            Label::Bad => bad.extend(s),
        }
    }
    let extra: Vec<_> = bad.difference(&good).collect();
    assert!(extra.is_empty(), "bad vocabulary beyond good: {extra:?}");
}

#[test]
fn integration_cash_out_is_seen_as_cash_out_and_dropped_by_limited() {
    let corpus = common::corpus(200, 0.0);
    let (cfg, out) = corpus
        .iter()
        .find(|(_, o)| o.full.action_names().any(|a| a == "integration-cash-out"))
        .expect("some trace withdraws dirty money");
    let n = out.full.action_names().filter(|a| *a == "integration-cash-out" || *a == "cash-out").count();
    let bank = filter_trace(&out.full, M::Bank).unwrap();
    assert_eq!(bank.action_names().filter(|a| *a == "cash-out").count(), n, "seed {}", cfg.seed);
    let limited = filter_trace(&out.full, M::Limited).unwrap();
    assert!(!limited.action_names().any(|a| a == "cash-out"), "seed {}", cfg.seed);
}
