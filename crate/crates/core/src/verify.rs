//! Menu verification: deciding whether a candidate price function `f`
//! exceeds the menu somewhere, using only runs of the mechanism on probe
//! valuations of the verified class.

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::menu::Menu;
use crate::protocol::{run_mechanism, Mechanism, RunResult};
use crate::scalar::{ceil_log2, Price, Scalar};
use crate::valuation::{Valuation, ValuationClass, XosClauses};
use crate::Rat;

/// A candidate price function: `f(∅) = 0`, nondecreasing, finite values at
/// most the mechanism's bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaseFunction<T: Scalar = Rat> {
    m: usize,
    table: Vec<Price<T>>,
}

impl<T: Scalar> BaseFunction<T> {
    pub fn new(m: usize, table: Vec<Price<T>>, bound: &T) -> Result<Self> {
        let menu = Menu::new(m, table)?;
        if !menu.is_normalized() {
            return Err(Error::Domain("base function must vanish on the empty bundle and be nondecreasing".into()));
        }
        if let Some(top) = menu.max_finite_price() {
            if &top > bound {
                return Err(Error::Domain(format!("finite value {top} exceeds the bound {bound}")));
            }
        }
        Ok(BaseFunction { m, table: menu.prices().to_vec() })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, s: Bundle) -> &Price<T> {
        &self.table[s.index()]
    }

    /// Distinct values, finite ones ascending and then infinity if present.
    pub fn distinct_values(&self) -> Vec<Price<T>> {
        let mut v = self.table.clone();
        v.sort();
        v.dedup();
        v
    }
}

/// The answer the verifier must produce: whether `f(S) > menu(S)` for some `S`.
pub fn exceeds_somewhere<T: Scalar>(f: &BaseFunction<T>, menu: &Menu<T>) -> bool {
    Bundle::all(f.m).any(|s| f.get(s) > menu.price(s))
}

/// One probe valuation and how to read its run.
#[derive(Clone, Debug)]
pub struct Probe<T: Scalar> {
    pub valuation: Valuation<T>,
    pub rule: ProbeRule<T>,
}

#[derive(Clone, Debug)]
pub enum ProbeRule<T: Scalar> {
    /// `v(S_i) - shift > payment`.
    Exceeds { shift: T },
    /// `|S_i| >= r` and `v(S_i) - shift > payment`.
    ExceedsAtLeast { r: usize, shift: T },
    /// `v(S_i) = level` and `payment < w`.
    LevelBelow { level: T, w: Price<T> },
}

impl<T: Scalar> ProbeRule<T> {
    fn bit(&self, v: &Valuation<T>, got: Bundle, payment: &T) -> bool {
        match self {
            ProbeRule::Exceeds { shift } => &(v.value(got).clone() - shift.clone()) > payment,
            ProbeRule::ExceedsAtLeast { r, shift } => {
                got.len() >= *r && &(v.value(got).clone() - shift.clone()) > payment
            }
            ProbeRule::LevelBelow { level, w } => v.value(got) == level && w.cmp_value(payment).is_gt(),
        }
    }
}

fn general_probe<T: Scalar>(f: &BaseFunction<T>, bound: &T) -> Result<Valuation<T>> {
    let three_b = T::int(3) * bound.clone();
    Valuation::from_fn(f.m, |s| f.get(s).finite().cloned().unwrap_or_else(|| three_b.clone()))
}

/// Probe valuations of the given class for checking `f`.
pub fn build_probe<T: Scalar>(class: ValuationClass, f: &BaseFunction<T>, bound: &T) -> Result<Vec<Probe<T>>> {
    if !bound.is_positive() {
        return Err(Error::Contract("the price bound must be positive".into()));
    }
    let m = f.m;
    let three_b = T::int(3) * bound.clone();
    match class {
        ValuationClass::General => Ok(vec![Probe {
            valuation: general_probe(f, bound)?,
            rule: ProbeRule::Exceeds { shift: T::zero() },
        }]),
        ValuationClass::Subadditive => {
            let base = general_probe(f, bound)?;
            let top = base.max_value().clone();
            let v = Valuation::from_fn(m, |s| {
                if s.is_empty() {
                    T::zero()
                } else {
                    base.value(s).clone() + top.clone()
                }
            })?;
            Ok(vec![Probe { valuation: v, rule: ProbeRule::Exceeds { shift: top } }])
        }
        ValuationClass::Xos => (1..=m)
            .map(|r| {
                let rr = T::int(r as i64);
                let clauses = Bundle::of_size(m, r)
                    .map(|t| {
                        let per_item = match f.get(t) {
                            Price::Finite(x) => x.clone() / rr.clone(),
                            Price::Infinite => T::int(2) * bound.clone() / rr.clone(),
                        } + three_b.clone();
                        (0..m).map(|j| if t.contains(j) { per_item.clone() } else { T::zero() }).collect()
                    })
                    .collect();
                let valuation = XosClauses::new(m, clauses)?.to_valuation()?;
                Ok(Probe { valuation, rule: ProbeRule::ExceedsAtLeast { r, shift: three_b.clone() * rr } })
            })
            .collect(),
        ValuationClass::Submodular => {
            let t = T::int(1i64 << (m + 1)) * bound.clone();
            let mut probes = Vec::new();
            for k in 1..=m {
                for w in f.distinct_values() {
                    let family: Vec<Bundle> = Bundle::of_size(m, k).filter(|s| f.get(*s) == &w).collect();
                    if family.is_empty() {
                        continue;
                    }
                    let kt = T::int(k as i64) * t.clone();
                    let v = Valuation::from_fn(m, |s| {
                        if s.len() < k {
                            T::int(s.len() as i64) * t.clone()
                        } else if family.iter().any(|x| x.is_subset(s)) {
                            kt.clone()
                        } else {
                            (T::int(k as i64) - T::ratio(1, 1i64 << s.len())) * t.clone()
                        }
                    })?;
                    if !v.is_submodular() {
                        return Err(Error::Contract(format!("probe for k = {k}, w = {w} is not submodular")));
                    }
                    probes.push(Probe { valuation: v, rule: ProbeRule::LevelBelow { level: kt, w } });
                }
            }
            Ok(probes)
        }
    }
}

/// Verifier result and its communication.
#[derive(Clone, Debug)]
pub struct VerifyOutcome {
    pub bit: bool,
    pub runs: usize,
    /// Sum over runs of transcript length plus one answer bit.
    pub bits: usize,
    /// First run that answered 1.
    pub witness_run: Option<usize>,
}

/// Decides whether `f(S) > menu_i(S)` for some `S`, where `menu_i` is the menu
/// presented to player `i` by `profile` (whose `i`-th entry is ignored).
pub fn verify_menu<T: Scalar>(
    mech: &dyn Mechanism<T>,
    i: usize,
    profile: &[Valuation<T>],
    f: &BaseFunction<T>,
    class: ValuationClass,
) -> Result<VerifyOutcome> {
    if f.m != mech.items() {
        return Err(Error::Domain("base function and mechanism disagree on m".into()));
    }
    let probes = build_probe(class, f, &mech.bound())?;
    let mut prof = profile.to_vec();
    let mut out = VerifyOutcome { bit: false, runs: 0, bits: 0, witness_run: None };
    for (k, probe) in probes.iter().enumerate() {
        prof[i] = probe.valuation.clone();
        let run: RunResult<T> = run_mechanism(mech, &prof).map_err(|e| match e {
            Error::Domain(msg) => Error::Contract(format!("{} probe outside the mechanism's domain: {msg}", class.name())),
            other => other,
        })?;
        let got = run.outcome.allocation[i];
        let bit = probe.rule.bit(&probe.valuation, got, &run.outcome.payments[i]);
        out.runs += 1;
        out.bits += run.transcript.len() + 1;
        if bit && !out.bit {
            out.bit = true;
            out.witness_run = Some(k);
        }
    }
    Ok(out)
}

/// Whether `q` bits of verification can distinguish `menus` menus:
/// `2^(q-1) >= menus`.
pub fn counting_check(q: usize, menus: usize) -> bool {
    q >= 1 && (q - 1) as u32 >= ceil_log2(menus as u128)
}
