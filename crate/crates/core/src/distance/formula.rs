//! Distances between single relational formulae (actions or literals).

use super::{DfVariant, DistanceConfig};
use crate::error::CatalogError;
use crate::symbol::Sym;
use crate::trace::{ActionInstance, Atom, Literal};

/// A name applied to constant arguments, borrowed from an action, atom or literal.
#[derive(Debug, Clone, Copy)]
pub struct Formula<'a> {
    pub name: &'a str,
    pub args: &'a [String],
}

impl<'a> From<&'a ActionInstance> for Formula<'a> {
    fn from(a: &'a ActionInstance) -> Self {
        Formula {
            name: &a.name,
            args: &a.args,
        }
    }
}

impl<'a> From<&'a Atom> for Formula<'a> {
    fn from(a: &'a Atom) -> Self {
        Formula {
            name: &a.name,
            args: &a.args,
        }
    }
}

impl<'a> From<&'a Literal> for Formula<'a> {
    fn from(l: &'a Literal) -> Self {
        Formula {
            name: &l.name,
            args: &l.args,
        }
    }
}

fn scaled(mismatches: usize, arity: usize, variant: DfVariant) -> f64 {
    let frac = if arity == 0 {
        0.0
    } else {
        mismatches as f64 / arity as f64
    };
    match variant {
        DfVariant::Corrected => 0.5 * frac,
        DfVariant::PaperLiteral => 0.5 - 0.5 * frac,
    }
}

/// `d_f`: 1 when the names differ, otherwise half the fraction of argument
/// positions holding different constants.
pub fn formula_distance(
    a: Formula<'_>,
    b: Formula<'_>,
    variant: DfVariant,
) -> Result<f64, CatalogError> {
    if a.name != b.name {
        return Ok(1.0);
    }
    if a.args.len() != b.args.len() {
        return Err(CatalogError::Arity {
            symbol: a.name.to_string(),
            expected: a.args.len(),
            found: b.args.len(),
        });
    }
    let mism = a.args.iter().zip(b.args).filter(|(x, y)| x != y).count();
    Ok(scaled(mism, a.args.len(), variant))
}

/// `d_n` over two function literals: the head distance weighting the
/// value difference normalized by `M` (clamped to 1).
pub fn numeric_distance(a: &Literal, b: &Literal, cfg: &DistanceConfig) -> Result<f64, CatalogError> {
    let head = formula_distance(a.into(), b.into(), cfg.df_variant)?;
    if head >= 1.0 {
        return Ok(1.0);
    }
    let (va, vb) = match (a.value, b.value) {
        (Some(x), Some(y)) => (x.to_f64(), y.to_f64()),
        _ => {
            return Err(CatalogError::Kind {
                symbol: a.name.clone(),
                expected: "function",
                found: "predicate",
            })
        }
    };
    Ok(head.max(cfg.min_weight) * value_ratio(va, vb, cfg.max_diff))
}

fn value_ratio(a: f64, b: f64, m: f64) -> f64 {
    ((a - b).abs() / m).min(1.0)
}

/// `d_f'`: `d_f` for predicates, `d_n` for functions, 1 across the two.
pub fn literal_distance(a: &Literal, b: &Literal, cfg: &DistanceConfig) -> Result<f64, CatalogError> {
    match (a.is_function(), b.is_function()) {
        (false, false) => formula_distance(a.into(), b.into(), cfg.df_variant),
        (true, true) => numeric_distance(a, b, cfg),
        _ => Ok(1.0),
    }
}

/// Interned form used in the inner loops.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct EAtom {
    pub name: Sym,
    pub args: Vec<Sym>,
}

impl EAtom {
    pub fn new(name: &str, args: &[String]) -> Self {
        EAtom {
            name: Sym::new(name),
            args: args.iter().map(|a| Sym::new(a)).collect(),
        }
    }

    /// Inputs are catalog-checked, so same-name atoms share an arity.
    #[inline]
    pub fn df(&self, other: &EAtom, variant: DfVariant) -> f64 {
        if self.name != other.name {
            return 1.0;
        }
        debug_assert_eq!(self.args.len(), other.args.len());
        let mism = self
            .args
            .iter()
            .zip(&other.args)
            .filter(|(x, y)| x != y)
            .count();
        scaled(mism, self.args.len(), variant)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ELit {
    pub atom: EAtom,
    pub value: Option<f64>,
}

impl ELit {
    pub fn new(l: &Literal) -> Self {
        ELit {
            atom: EAtom::new(&l.name, &l.args),
            value: l.value.map(|v| v.to_f64()),
        }
    }

    #[inline]
    pub fn dist(&self, other: &ELit, cfg: &DistanceConfig) -> f64 {
        match (self.value, other.value) {
            (None, None) => self.atom.df(&other.atom, cfg.df_variant),
            (Some(a), Some(b)) => {
                let head = self.atom.df(&other.atom, cfg.df_variant);
                if head >= 1.0 {
                    1.0
                } else {
                    head.max(cfg.min_weight) * value_ratio(a, b, cfg.max_diff)
                }
            }
            _ => 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amount::Amount;

    fn f<'a>(name: &'a str, args: &'a [String]) -> Formula<'a> {
        Formula { name, args }
    }

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn create_account_example() {
        let a = s(&["i1", "i2"]);
        let b = s(&["i3", "i2"]);
        let d = formula_distance(f("create-account", &a), f("create-account", &b), DfVariant::Corrected).unwrap();
        assert_eq!(d, 0.25);
    }

    #[test]
    fn identical_and_renamed_atoms() {
        let a = s(&["i1", "i2"]);
        assert_eq!(formula_distance(f("cash-out", &a), f("cash-out", &a), DfVariant::Corrected).unwrap(), 0.0);
        assert_eq!(formula_distance(f("cash-out", &a), f("pay-bill", &a), DfVariant::Corrected).unwrap(), 1.0);
        assert_eq!(formula_distance(f("work", &[]), f("work", &[]), DfVariant::Corrected).unwrap(), 0.0);
    }

    #[test]
    fn printed_variant_inverts_the_argument_term() {
        let a = s(&["i1", "i2"]);
        let b = s(&["i3", "i2"]);
        let d = |x: &[String], y: &[String]| {
            formula_distance(f("create-account", x), f("create-account", y), DfVariant::PaperLiteral).unwrap()
        };
        assert_eq!(d(&a, &a), 0.5);
        assert_eq!(d(&a, &b), 0.25);
        assert_eq!(d(&a, &s(&["i3", "i4"])), 0.0);
    }

    #[test]
    fn arity_mismatch_is_a_catalog_error() {
        let a = s(&["i1", "i2"]);
        let b = s(&["i1"]);
        assert!(formula_distance(f("create-account", &a), f("create-account", &b), DfVariant::Corrected).is_err());
    }

    #[test]
    fn numeric_examples() {
        let cfg = DistanceConfig::default();
        let b20 = Literal::func("balance", ["i2"], Amount::from_units(20));
        let b10 = Literal::func("balance", ["i3"], Amount::from_units(10));
        assert_eq!(numeric_distance(&b20, &b10, &cfg).unwrap(), 0.5 * 10.0 / 1e6);
        assert_eq!(numeric_distance(&b20, &b20, &cfg).unwrap(), 0.0);
        let same_head = Literal::func("balance", ["i2"], Amount::from_units(10));
        assert_eq!(numeric_distance(&b20, &same_head, &cfg).unwrap(), 0.0);
        let cfg = DistanceConfig {
            min_weight: 0.1,
            ..DistanceConfig::default()
        };
        assert!(numeric_distance(&b20, &same_head, &cfg).unwrap() > 0.0);
    }

    #[test]
    fn numeric_difference_is_clamped() {
        let cfg = DistanceConfig {
            max_diff: 10.0,
            ..DistanceConfig::default()
        };
        let a = Literal::func("balance", ["i2"], Amount::from_units(1000));
        let b = Literal::func("balance", ["i3"], Amount::ZERO);
        assert_eq!(numeric_distance(&a, &b, &cfg).unwrap(), 0.5);
    }

    #[test]
    fn predicate_against_function_is_one() {
        let cfg = DistanceConfig::default();
        let p = Literal::pred("acc-owner", ["i1", "i2"]);
        let q = Literal::func("balance", ["i2"], Amount::from_units(20));
        assert_eq!(literal_distance(&p, &q, &cfg).unwrap(), 1.0);
        assert_eq!(ELit::new(&p).dist(&ELit::new(&q), &cfg), 1.0);
    }

    #[test]
    fn interned_form_agrees() {
        let cfg = DistanceConfig::default();
        let lits = [
            Literal::pred("acc-owner", ["i1", "i2"]),
            Literal::pred("acc-owner", ["i1", "i3"]),
            Literal::func("balance", ["i2"], Amount::from_units(20)),
            Literal::func("balance", ["i3"], Amount::from_units(10)),
        ];
        for a in &lits {
            for b in &lits {
                assert_eq!(literal_distance(a, b, &cfg).unwrap(), ELit::new(a).dist(&ELit::new(b), &cfg));
            }
        }
    }
}
