//! Valuation functions over `m` items and their class tests.

use std::fmt;

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Rat;

/// A normalized, nondecreasing valuation stored as a dense `2^m` table.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Valuation<T: Scalar = Rat> {
    m: usize,
    table: Vec<T>,
    clauses: Option<XosClauses<T>>,
}

impl<T: Scalar> Valuation<T> {
    /// Validates normalization and monotonicity.
    pub fn new(m: usize, table: Vec<T>) -> Result<Self> {
        Bundle::check_items(m)?;
        if table.len() != 1 << m {
            return Err(Error::Domain(format!(
                "table has {} entries, expected {}",
                table.len(),
                1usize << m
            )));
        }
        if !table[0].is_zero() {
            return Err(Error::Domain(format!("v(empty) = {} is not 0", table[0])));
        }
        for s in Bundle::all(m) {
            for j in 0..m {
                if !s.contains(j) && table[s.with(j).index()] < table[s.index()] {
                    return Err(Error::Domain(format!(
                        "not monotone: v({}) = {} > v({}) = {}",
                        s,
                        table[s.index()],
                        s.with(j),
                        table[s.with(j).index()]
                    )));
                }
            }
        }
        Ok(Valuation { m, table, clauses: None })
    }

    pub fn from_fn(m: usize, f: impl Fn(Bundle) -> T) -> Result<Self> {
        Valuation::new(m, Bundle::all(m).map(f).collect())
    }

    pub fn zero(m: usize) -> Self {
        Valuation { m, table: vec![T::zero(); 1 << m], clauses: None }
    }

    /// `v(S) = sum of item values in S`.
    pub fn additive(values: &[T]) -> Result<Self> {
        if values.iter().any(|x| x.is_negative()) {
            return Err(Error::Domain("additive item values must be non-negative".into()));
        }
        let m = values.len();
        Valuation::from_fn(m, |s| s.items().fold(T::zero(), |acc, j| acc + values[j].clone()))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn value(&self, s: Bundle) -> &T {
        &self.table[s.index()]
    }

    pub fn table(&self) -> &[T] {
        &self.table
    }

    pub fn clauses(&self) -> Option<&XosClauses<T>> {
        self.clauses.as_ref()
    }

    pub fn max_value(&self) -> &T {
        &self.table[(1 << self.m) - 1]
    }

    pub fn is_additive(&self) -> bool {
        Bundle::all(self.m).all(|s| {
            let sum = s.items().fold(T::zero(), |acc, j| acc + self.value(Bundle::singleton(j)).clone());
            &sum == self.value(s)
        })
    }

    /// Decreasing marginals: `v(S+j) - v(S) >= v(T+j) - v(T)` for `S ⊆ T`, `j ∉ T`.
    /// Checked in the equivalent local form on pairs of added items.
    pub fn is_submodular(&self) -> bool {
        for s in Bundle::all(self.m) {
            for j in 0..self.m {
                if s.contains(j) {
                    continue;
                }
                for k in (j + 1)..self.m {
                    if s.contains(k) {
                        continue;
                    }
                    let lhs = self.value(s.with(j)).clone() + self.value(s.with(k)).clone();
                    let rhs = self.value(s.with(j).with(k)).clone() + self.value(s).clone();
                    if lhs < rhs {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn is_subadditive(&self) -> bool {
        for s in Bundle::all(self.m) {
            for t in Bundle::all(self.m) {
                if t.0 < s.0 {
                    continue;
                }
                if self.value(s.union(t)) > &(self.value(s).clone() + self.value(t).clone()) {
                    return false;
                }
            }
        }
        true
    }

    pub fn classify(&self) -> ClassFlags {
        ClassFlags {
            additive: self.is_additive(),
            submodular: self.is_submodular(),
            xos: self.clauses.is_some(),
            subadditive: self.is_subadditive(),
        }
    }

    /// Smallest-mask bundle with the largest value; value ties among
    /// supersets are common, so this is mostly useful on strict valuations.
    pub fn argmax_value(&self) -> Bundle {
        let mut best = Bundle::EMPTY;
        for s in Bundle::all(self.m) {
            if self.value(s) > self.value(best) {
                best = s;
            }
        }
        best
    }

    /// Reinterprets the table over a new scalar type.
    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Valuation<U> {
        Valuation {
            m: self.m,
            table: self.table.iter().map(&f).collect(),
            clauses: self.clauses.as_ref().map(|c| XosClauses {
                m: c.m,
                clauses: c.clauses.iter().map(|row| row.iter().map(&f).collect()).collect(),
            }),
        }
    }
}

impl<T: Scalar> fmt::Debug for Valuation<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Valuation(m={}; ", self.m)?;
        for s in Bundle::all(self.m) {
            if s.0 > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}:{}", s, self.value(s))?;
        }
        write!(f, ")")
    }
}

/// Membership flags. `xos` is set only when a clause witness is attached.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct ClassFlags {
    pub additive: bool,
    pub submodular: bool,
    pub xos: bool,
    pub subadditive: bool,
}

/// The valuation classes handled by menu verification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValuationClass {
    General,
    Subadditive,
    Xos,
    Submodular,
}

impl ValuationClass {
    pub const ALL: [ValuationClass; 4] =
        [ValuationClass::General, ValuationClass::Subadditive, ValuationClass::Xos, ValuationClass::Submodular];

    pub fn name(self) -> &'static str {
        match self {
            ValuationClass::General => "general",
            ValuationClass::Subadditive => "subadditive",
            ValuationClass::Xos => "xos",
            ValuationClass::Submodular => "submodular",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ValuationClass::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Additive clauses whose pointwise maximum is an XOS valuation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct XosClauses<T: Scalar = Rat> {
    m: usize,
    clauses: Vec<Vec<T>>,
}

impl<T: Scalar> XosClauses<T> {
    pub fn new(m: usize, clauses: Vec<Vec<T>>) -> Result<Self> {
        Bundle::check_items(m)?;
        if clauses.is_empty() {
            return Err(Error::Domain("an XOS valuation needs at least one clause".into()));
        }
        for (k, c) in clauses.iter().enumerate() {
            if c.len() != m {
                return Err(Error::Domain(format!("clause {k} has {} entries, expected {m}", c.len())));
            }
            if let Some(j) = c.iter().position(|x| x.is_negative()) {
                return Err(Error::Domain(format!("clause {k} has negative entry at item {}", j + 1)));
            }
        }
        Ok(XosClauses { m, clauses })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn clauses(&self) -> &[Vec<T>] {
        &self.clauses
    }

    pub fn eval(&self, s: Bundle) -> T {
        self.clauses
            .iter()
            .map(|c| s.items().fold(T::zero(), |acc, j| acc + c[j].clone()))
            .max()
            .unwrap_or_else(T::zero)
    }

    /// Expands to a table and keeps the clauses as the XOS witness.
    pub fn to_valuation(&self) -> Result<Valuation<T>> {
        let mut v = Valuation::from_fn(self.m, |s| self.eval(s))?;
        v.clauses = Some(self.clone());
        Ok(v)
    }
}

/// Welfare-maximizing allocation by enumeration of all `n^m` assignments.
/// Ties go to the lexicographically smallest tuple of masks.
pub fn optimal_welfare<T: Scalar>(profile: &[Valuation<T>]) -> Result<(Vec<Bundle>, T)> {
    let n = profile.len();
    if n == 0 {
        return Err(Error::Domain("empty profile".into()));
    }
    let m = profile[0].m();
    if profile.iter().any(|v| v.m() != m) {
        return Err(Error::Domain("valuations disagree on m".into()));
    }
    let choices = n as u64;
    let total = choices.checked_pow(m as u32).filter(|&t| t <= 1 << 24);
    let total = total.ok_or_else(|| Error::Capacity(format!("{n} players and {m} items is too many to enumerate")))?;
    let mut best: Option<(Vec<Bundle>, T)> = None;
    for code in 0..total {
        let mut alloc = vec![Bundle::EMPTY; n];
        let mut c = code;
        for j in 0..m {
            let owner = (c % choices) as usize;
            c /= choices;
            alloc[owner] = alloc[owner].with(j);
        }
        let w = alloc.iter().zip(profile).fold(T::zero(), |acc, (s, v)| acc + v.value(*s).clone());
        let better = match &best {
            None => true,
            Some((ba, bw)) => w > *bw || (w == *bw && alloc < *ba),
        };
        if better {
            best = Some((alloc, w));
        }
    }
    Ok(best.expect("at least one assignment"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rat {
        Rat::ratio(n, d)
    }

    #[test]
    fn rejects_non_monotone_and_unnormalized() {
        assert!(Valuation::new(1, vec![r(0, 1), r(1, 1)]).is_ok());
        assert!(matches!(Valuation::new(1, vec![r(1, 1), r(1, 1)]), Err(Error::Domain(_))));
        assert!(matches!(
            Valuation::new(2, vec![r(0, 1), r(2, 1), r(1, 1), r(1, 1)]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn class_flags_of_standard_examples() {
        let add = Valuation::additive(&[r(1, 1), r(2, 1)]).unwrap();
        let f = add.classify();
        assert!(f.additive && f.submodular && f.subadditive && !f.xos);

        // unit demand is submodular but not additive
        let ud = Valuation::from_fn(2, |s| if s.is_empty() { r(0, 1) } else { r(1, 1) }).unwrap();
        let f = ud.classify();
        assert!(!f.additive && f.submodular && f.subadditive);

        // complements: v = 1 only on the grand bundle
        let comp = Valuation::from_fn(2, |s| if s.len() == 2 { r(1, 1) } else { r(0, 1) }).unwrap();
        let f = comp.classify();
        assert!(!f.submodular && !f.subadditive);
    }

    #[test]
    fn xos_clauses_expand_to_max() {
        let x = XosClauses::new(2, vec![vec![r(1, 1), r(0, 1)], vec![r(0, 1), r(2, 1)]]).unwrap();
        let v = x.to_valuation().unwrap();
        assert_eq!(v.value(Bundle::of(&[0, 1])), &r(2, 1));
        assert!(v.classify().xos);
        assert!(v.is_subadditive());
        assert!(XosClauses::new(2, vec![vec![r(-1, 1), r(0, 1)]]).is_err());
    }

    #[test]
    fn welfare_brute_force_small() {
        let a = Valuation::additive(&[r(3, 1), r(1, 1)]).unwrap();
        let b = Valuation::additive(&[r(1, 1), r(2, 1)]).unwrap();
        let (alloc, w) = optimal_welfare(&[a, b]).unwrap();
        assert_eq!(w, r(5, 1));
        assert_eq!(alloc, vec![Bundle::of(&[0]), Bundle::of(&[1])]);
        let zero = Valuation::<Rat>::zero(2);
        let (alloc, w) = optimal_welfare(&[zero.clone(), zero]).unwrap();
        assert_eq!(w, r(0, 1));
        assert_eq!(alloc, vec![Bundle::EMPTY, Bundle::grand(2)]);
    }
}
