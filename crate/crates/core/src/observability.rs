//! What a financial institution can see of a customer's trace.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, CatalogRow, InfoType};
use crate::error::Result;
use crate::trace::{ActionInstance, Step, Trace};

/// Symbols that disappear under `no-companies` (and `limited`).
pub const COMPANY_SYMBOLS: [&str; 6] = [
    "member-of",
    "has-company",
    "set-ownership-account",
    "create-company",
    "associate",
    "works-for",
];

/// Withdrawal and digital-currency actions that `limited` also hides.
pub const LIMITED_EXTRA: [&str; 5] = [
    "cash-out",
    "integration-cash-out",
    "digital-deposit",
    "placement-digital",
    "buy-digital",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservabilityModel {
    Full,
    Bank,
    Network,
    Transactions,
    NoCompanies,
    Limited,
}

impl ObservabilityModel {
    pub const ALL: [ObservabilityModel; 6] = [
        ObservabilityModel::Full,
        ObservabilityModel::Bank,
        ObservabilityModel::Network,
        ObservabilityModel::Transactions,
        ObservabilityModel::NoCompanies,
        ObservabilityModel::Limited,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObservabilityModel::Full => "full",
            ObservabilityModel::Bank => "bank",
            ObservabilityModel::Network => "network",
            ObservabilityModel::Transactions => "transactions",
            ObservabilityModel::NoCompanies => "no-companies",
            ObservabilityModel::Limited => "limited",
        }
    }

    /// Whether a catalog row survives this model.
    pub fn keeps(self, row: &CatalogRow) -> bool {
        use ObservabilityModel::*;
        let bank = row.observable;
        match self {
            Full => true,
            Bank => bank,
            Network => {
                bank && matches!(row.info, InfoType::Network | InfoType::Bank | InfoType::Both)
            }
            Transactions => {
                bank && matches!(
                    row.info,
                    InfoType::Transactions | InfoType::Bank | InfoType::Both
                )
            }
            NoCompanies => bank && !COMPANY_SYMBOLS.contains(&row.name.as_str()),
            Limited => {
                bank && !COMPANY_SYMBOLS.contains(&row.name.as_str())
                    && !LIMITED_EXTRA.contains(&row.name.as_str())
            }
        }
    }

    pub fn keeps_name(self, cat: &Catalog, name: &str) -> Result<bool> {
        Ok(self.keeps(cat.lookup(name)?))
    }
}

impl fmt::Display for ObservabilityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObservabilityModel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ObservabilityModel::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown observability model `{s}`"))
    }
}

/// Filters a trace through `model`.
///
/// Criminal actions are first renamed to their standard counterparts (except
/// under `full`); steps whose action is then hidden are dropped, so their
/// visible state changes show up in the next kept step's delta; hidden state
/// literals are removed everywhere.
pub fn filter_trace(t: &Trace, model: ObservabilityModel) -> Result<Trace> {
    filter_trace_with(t, model, Catalog::builtin())
}

pub fn filter_trace_with(t: &Trace, model: ObservabilityModel, cat: &Catalog) -> Result<Trace> {
    cat.check_trace(t)?;
    let mut meta = t.meta.clone();
    meta.observability = model.as_str().to_string();
    if model == ObservabilityModel::Full {
        return Ok(Trace {
            meta,
            ..t.clone()
        });
    }
    let filter_state = |s: &crate::trace::State| {
        let mut s = s.clone();
        s.retain(|a| cat.get(&a.name).is_some_and(|r| model.keeps(r)));
        s
    };
    let mut steps = Vec::with_capacity(t.steps.len());
    for step in &t.steps {
        let name = cat.alias_of(&step.action.name);
        if !model.keeps(cat.lookup(name)?) {
            continue;
        }
        steps.push(Step {
            action: ActionInstance {
                name: name.to_string(),
                args: step.action.args.clone(),
            },
            state: filter_state(&step.state),
        });
    }
    Ok(Trace {
        initial_state: filter_state(&t.initial_state),
        steps,
        label: t.label,
        meta,
    })
}
