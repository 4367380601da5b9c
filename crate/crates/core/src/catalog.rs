//! Symbol catalog: every predicate, function and action the domain knows,
//! with its arity, observability and information type.
//!
//! The rows live in `data/catalog.jsonl` and are embedded at compile time.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{CatalogError, Error, Result};
use crate::trace::{ActionInstance, Literal, State, Trace};

pub const CATALOG_DATA: &str = include_str!("../data/catalog.jsonl");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolKind {
    Predicate,
    Function,
    Action,
}

impl SymbolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SymbolKind::Predicate => "predicate",
            SymbolKind::Function => "function",
            SymbolKind::Action => "action",
        }
    }
}

/// Which kind of information an observable symbol carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoType {
    Network,
    Transactions,
    Both,
    Bank,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogRow {
    pub kind: SymbolKind,
    pub name: String,
    /// Parameter type names; the arity is their count.
    pub args: Vec<String>,
    pub observable: bool,
    #[serde(rename = "type")]
    pub info: InfoType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alias: Option<String>,
}

impl CatalogRow {
    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

#[derive(Debug, Clone)]
pub struct Catalog {
    rows: Vec<CatalogRow>,
    index: HashMap<String, usize>,
}

impl Catalog {
    pub fn parse(text: &str) -> Result<Catalog> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: CatalogRow =
                serde_json::from_str(line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
            rows.push(row);
        }
        Catalog::from_rows(rows)
    }

    pub fn from_rows(rows: Vec<CatalogRow>) -> Result<Catalog> {
        let mut index = HashMap::new();
        for (i, r) in rows.iter().enumerate() {
            if index.insert(r.name.clone(), i).is_some() {
                return Err(Error::Model(format!("duplicate catalog row `{}`", r.name)));
            }
        }
        let cat = Catalog { rows, index };
        for r in &cat.rows {
            if let Some(target) = &r.alias {
                let t = cat.lookup(target)?;
                if t.kind != r.kind || t.arity() != r.arity() || !t.observable {
                    return Err(Error::Model(format!(
                        "alias `{}` -> `{target}` must target an observable {} of the same arity",
                        r.name,
                        r.kind.as_str()
                    )));
                }
            }
        }
        Ok(cat)
    }

    /// The embedded domain catalog.
    pub fn builtin() -> &'static Catalog {
        static CAT: OnceLock<Catalog> = OnceLock::new();
        CAT.get_or_init(|| Catalog::parse(CATALOG_DATA).expect("embedded catalog is valid"))
    }

    pub fn rows(&self) -> &[CatalogRow] {
        &self.rows
    }

    pub fn get(&self, name: &str) -> Option<&CatalogRow> {
        self.index.get(name).map(|&i| &self.rows[i])
    }

    pub fn lookup(&self, name: &str) -> Result<&CatalogRow, CatalogError> {
        self.get(name)
            .ok_or_else(|| CatalogError::UnknownSymbol(name.to_string()))
    }

    /// Names of all symbols that are never observable by the institution.
    pub fn unobservable(&self) -> impl Iterator<Item = &str> + '_ {
        self.rows
            .iter()
            .filter(|r| !r.observable)
            .map(|r| r.name.as_str())
    }

    /// Criminal variants that are observed under another name.
    pub fn aliased(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.rows
            .iter()
            .filter_map(|r| r.alias.as_deref().map(|t| (r.name.as_str(), t)))
    }

    pub fn alias_of<'a>(&'a self, name: &'a str) -> &'a str {
        self.get(name)
            .and_then(|r| r.alias.as_deref())
            .unwrap_or(name)
    }

    fn check(&self, name: &str, arity: usize, kind: SymbolKind) -> Result<&CatalogRow, CatalogError> {
        let row = self.lookup(name)?;
        if row.kind != kind {
            return Err(CatalogError::Kind {
                symbol: name.to_string(),
                expected: row.kind.as_str(),
                found: kind.as_str(),
            });
        }
        if row.arity() != arity {
            return Err(CatalogError::Arity {
                symbol: name.to_string(),
                expected: row.arity(),
                found: arity,
            });
        }
        Ok(row)
    }

    pub fn check_action(&self, a: &ActionInstance) -> Result<(), CatalogError> {
        self.check(&a.name, a.args.len(), SymbolKind::Action).map(|_| ())
    }

    /// A function literal must carry a value and a predicate must not.
    pub fn check_literal(&self, l: &Literal) -> Result<(), CatalogError> {
        let kind = if l.is_function() {
            SymbolKind::Function
        } else {
            SymbolKind::Predicate
        };
        self.check(&l.name, l.args.len(), kind).map(|_| ())
    }

    pub fn check_state(&self, s: &State) -> Result<(), CatalogError> {
        s.iter().try_for_each(|l| self.check_literal(&l))
    }

    pub fn check_trace(&self, t: &Trace) -> Result<(), CatalogError> {
        self.check_state(&t.initial_state)?;
        for step in &t.steps {
            self.check_action(&step.action)?;
            self.check_state(&step.state)?;
        }
        Ok(())
    }
}

impl fmt::Display for InfoType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            InfoType::Network => "network",
            InfoType::Transactions => "transactions",
            InfoType::Both => "both",
            InfoType::Bank => "bank",
            InfoType::None => "none",
        };
        f.write_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows_are_all_present() {
        let cat = Catalog::builtin();
        let count = |k| cat.rows().iter().filter(|r| r.kind == k).count();
        assert_eq!(count(SymbolKind::Predicate), 20);
        assert_eq!(count(SymbolKind::Function), 9);
        assert_eq!(count(SymbolKind::Action), 28);
    }

    #[test]
    fn lookup_examples() {
        let cat = Catalog::builtin();
        let r = cat.lookup("banned-country").unwrap();
        assert!(r.observable);
        assert_eq!(r.info, InfoType::Network);
        assert!(!cat.lookup("dirty-money").unwrap().observable);
        let r = cat.lookup("move-funds").unwrap();
        assert!(r.observable);
        assert_eq!(r.info, InfoType::Transactions);
        assert_eq!(
            cat.lookup("nope"),
            Err(CatalogError::UnknownSymbol("nope".into()))
        );
    }

    #[test]
    fn aliases_match_the_criminal_variants() {
        let cat = Catalog::builtin();
        let mut aliases: Vec<_> = cat.aliased().collect();
        aliases.sort();
        assert_eq!(
            aliases,
            vec![
                ("integration-cash-out", "cash-out"),
                ("integration-pay-bill", "pay-bill"),
                ("placement-buy-direct", "buy-direct"),
                ("placement-cash-in", "quick-deposit"),
                ("placement-digital", "digital-deposit"),
                ("placement-enjoyed-service", "enjoy-service"),
            ]
        );
    }

    #[test]
    fn both_typed_symbols() {
        let cat = Catalog::builtin();
        for name in ["received-payroll", "payroll", "balance", "pay-bill"] {
            assert_eq!(cat.lookup(name).unwrap().info, InfoType::Both, "{name}");
        }
    }

    #[test]
    fn literal_shape_checks() {
        let cat = Catalog::builtin();
        let bad_arity = Literal::pred("account-owner", ["c1"]);
        assert!(matches!(cat.check_literal(&bad_arity), Err(CatalogError::Arity { .. })));
        let missing_value = Literal::pred("balance", ["a1"]);
        assert!(matches!(cat.check_literal(&missing_value), Err(CatalogError::Kind { .. })));
    }

    #[test]
    fn alias_to_unobservable_target_is_rejected() {
        let mut rows = Catalog::builtin().rows().to_vec();
        let i = rows.iter().position(|r| r.name == "placement-cash-in").unwrap();
        rows[i].alias = Some("buy-digital".into());
        assert!(Catalog::from_rows(rows).is_err());
    }
}
