//! Menu reconstruction from value queries.
//!
//! A bundle is *useless* for a 0/1 valuation `v` when `v(S) = 0` and every
//! one-item extension has value 1. [`learn_useless`] finds all useless
//! bundles by a depth-first walk; [`reconstruct_menu_value`] applies it to
//! the threshold valuations `v^p(S) = [price(S) > p]` along the ladder of
//! menu prices.

use std::collections::{BTreeMap, BTreeSet};

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::menu::{menu_from_members, Menu};
use crate::protocol::{run_price_protocol, Mechanism};
use crate::valuation::Valuation;
use crate::scalar::{Price, Scalar};

/// Answers price queries for one menu and counts calls.
pub trait PriceOracle<T: Scalar> {
    fn m(&self) -> usize;
    fn price(&mut self, s: Bundle) -> Result<Price<T>>;
    fn calls(&self) -> usize;
}

/// Price oracle backed by a known menu, charging a fixed cost per call.
#[derive(Clone, Debug)]
pub struct MenuPriceOracle<T: Scalar> {
    menu: Menu<T>,
    pub cost_per_call: usize,
    calls: usize,
}

impl<T: Scalar> MenuPriceOracle<T> {
    pub fn new(menu: Menu<T>, cost_per_call: usize) -> Self {
        MenuPriceOracle { menu, cost_per_call, calls: 0 }
    }

    pub fn cost(&self) -> usize {
        self.calls * self.cost_per_call
    }
}

impl<T: Scalar> PriceOracle<T> for MenuPriceOracle<T> {
    fn m(&self) -> usize {
        self.menu.m()
    }

    fn price(&mut self, s: Bundle) -> Result<Price<T>> {
        if !s.fits(self.menu.m()) {
            return Err(Error::Oracle(format!("bundle {s} out of range")));
        }
        self.calls += 1;
        Ok(self.menu.price(s).clone())
    }

    fn calls(&self) -> usize {
        self.calls
    }
}

/// Price oracle that runs the mechanism's price protocol on a profile.
pub struct ProtocolPriceOracle<'a, T: Scalar> {
    mech: &'a dyn Mechanism<T>,
    player: usize,
    profile: &'a [Valuation<T>],
    calls: usize,
    /// Transcript bits over all calls.
    pub bits: usize,
}

impl<'a, T: Scalar> ProtocolPriceOracle<'a, T> {
    pub fn new(mech: &'a dyn Mechanism<T>, player: usize, profile: &'a [Valuation<T>]) -> Self {
        ProtocolPriceOracle { mech, player, profile, calls: 0, bits: 0 }
    }
}

impl<T: Scalar> PriceOracle<T> for ProtocolPriceOracle<'_, T> {
    fn m(&self) -> usize {
        self.mech.items()
    }

    fn price(&mut self, s: Bundle) -> Result<Price<T>> {
        let run = run_price_protocol(self.mech, self.player, self.profile, s)?;
        self.calls += 1;
        self.bits += run.transcript.len();
        Ok(run.price)
    }

    fn calls(&self) -> usize {
        self.calls
    }
}

/// One visited node of the FindUseless walk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Visit {
    pub bundle: Bundle,
    pub parent: Option<usize>,
    pub queries: usize,
}

#[derive(Clone, Debug, Default)]
pub struct UselessSearch {
    pub useless: BTreeSet<Bundle>,
    pub queries: usize,
    pub visits: Vec<Visit>,
}

impl UselessSearch {
    /// `(m + 1) * m^2 * k` queries.
    pub fn query_bound(m: usize, k: usize) -> usize {
        (m + 1) * m * m * k
    }
}

struct Walker<'o, F> {
    m: usize,
    oracle: &'o mut F,
    out: UselessSearch,
    answers: BTreeMap<Bundle, bool>,
    limit: usize,
}

impl<F: FnMut(Bundle) -> Result<bool>> Walker<'_, F> {
    fn ask(&mut self, s: Bundle) -> Result<bool> {
        self.out.queries += 1;
        if self.out.queries > self.limit {
            return Err(Error::Bound(format!("FindUseless exceeded {} queries", self.limit)));
        }
        let one = (self.oracle)(s)?;
        if let Some(&prev) = self.answers.get(&s) {
            if prev != one {
                return Err(Error::Oracle(format!("inconsistent answers for {s}")));
            }
        } else {
            for (&t, &tv) in &self.answers {
                if (t.is_subset(s) && tv && !one) || (s.is_subset(t) && one && !tv) {
                    return Err(Error::Oracle(format!("answers for {t} and {s} are not monotone")));
                }
            }
            self.answers.insert(s, one);
        }
        Ok(one)
    }

    fn find(&mut self, s: Bundle, allowed: &mut Vec<usize>, parent: Option<usize>) -> Result<()> {
        let node = self.out.visits.len();
        self.out.visits.push(Visit { bundle: s, parent, queries: 0 });
        let before = self.out.queries;
        if self.ask(s)? {
            self.out.visits[node].queries = self.out.queries - before;
            return Ok(());
        }
        let mut useless = true;
        for j in 0..self.m {
            if !s.contains(j) && !self.ask(s.with(j))? {
                useless = false;
                break;
            }
        }
        self.out.visits[node].queries = self.out.queries - before;
        if useless {
            self.out.useless.insert(s);
            return Ok(());
        }
        // each item is removed from the shared list before its branch
        while let Some(pos) = allowed.iter().position(|&j| !s.contains(j)) {
            let j = allowed.remove(pos);
            let mut sub = allowed.clone();
            self.find(s.with(j), &mut sub, Some(node))?;
        }
        Ok(())
    }
}

/// All useless bundles of a 0/1 valuation given as an oracle. `k` is the
/// promised bound on their number; the walk errors once it spends more than
/// `(m + 1) m^2 k` queries.
pub fn learn_useless(m: usize, k: usize, oracle: &mut impl FnMut(Bundle) -> Result<bool>) -> Result<UselessSearch> {
    Bundle::check_items(m)?;
    let limit = UselessSearch::query_bound(m, k.max(1));
    let mut w = Walker { m, oracle, out: UselessSearch::default(), answers: BTreeMap::new(), limit };
    let mut allowed: Vec<usize> = (0..m).collect();
    w.find(Bundle::EMPTY, &mut allowed, None)?;
    if w.out.useless.len() > k.max(1) {
        return Err(Error::Bound(format!("found {} useless bundles, promised at most {k}", w.out.useless.len())));
    }
    Ok(w.out)
}

/// One rung of the price ladder.
#[derive(Clone, Debug)]
pub struct LadderStep<T: Scalar> {
    pub threshold: T,
    pub useless: Vec<Bundle>,
    pub price_calls: usize,
}

#[derive(Clone, Debug)]
pub struct ValueReconstruction<T: Scalar> {
    pub menu: Menu<T>,
    pub members: Vec<(Bundle, Price<T>)>,
    pub steps: Vec<LadderStep<T>>,
    pub price_calls: usize,
}

/// Rebuilds a normalized menu of complexity at most `mc_bound` from price
/// queries.
pub fn reconstruct_menu_value<T: Scalar>(oracle: &mut dyn PriceOracle<T>, mc_bound: usize) -> Result<ValueReconstruction<T>> {
    let m = oracle.m();
    let mut p = T::zero();
    let mut members: BTreeMap<Bundle, Price<T>> = BTreeMap::new();
    let mut steps = Vec::new();
    loop {
        if steps.len() >= mc_bound.max(1) {
            return Err(Error::Bound(format!("ladder needs more than {mc_bound} steps")));
        }
        let calls_before = oracle.calls();
        let mut seen: BTreeMap<Bundle, Price<T>> = BTreeMap::new();
        let threshold = p.clone();
        let search = learn_useless(m, mc_bound, &mut |s| {
            let price = oracle.price(s)?;
            let one = price.cmp_value(&threshold).is_gt();
            seen.insert(s, price);
            Ok(one)
        })?;
        for s in &search.useless {
            let price = seen[s].clone();
            if price == Price::Finite(p.clone()) {
                members.insert(*s, price);
            }
        }
        steps.push(LadderStep {
            threshold: p.clone(),
            useless: search.useless.iter().copied().collect(),
            price_calls: oracle.calls() - calls_before,
        });
        let next = seen.values().filter_map(|x| x.finite()).filter(|x| **x > p).min().cloned();
        match next {
            Some(q) => p = q,
            None => break,
        }
    }
    let members: Vec<(Bundle, Price<T>)> = members.into_iter().collect();
    let menu = menu_from_members(m, &members)?;
    Ok(ValueReconstruction { menu, members, steps, price_calls: oracle.calls() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rat;

    fn f(n: i64) -> Price<Rat> {
        Price::Finite(Rat::int(n))
    }

    #[test]
    fn ladder_visits_each_price() {
        let menu = Menu::new(2, vec![f(0), f(1), f(2), Price::Infinite]).unwrap();
        let mut oracle = MenuPriceOracle::new(menu.clone(), 1);
        let rec = reconstruct_menu_value(&mut oracle, 3).unwrap();
        assert_eq!(rec.menu, menu);
        let rungs: Vec<Rat> = rec.steps.iter().map(|s| s.threshold).collect();
        assert_eq!(rungs, vec![Rat::int(0), Rat::int(1), Rat::int(2)]);
    }

    #[test]
    fn useless_bundles_of_a_threshold_function() {
        // v = 1 exactly on bundles containing item 1 or of size >= 2 (m = 3)
        let mut oracle = |s: Bundle| Ok(s.contains(0) || s.len() >= 2);
        let res = learn_useless(3, 3, &mut oracle).unwrap();
        let want: BTreeSet<Bundle> = [Bundle::of(&[1]), Bundle::of(&[2])].into_iter().collect();
        assert_eq!(res.useless, want);
        assert!(res.queries <= UselessSearch::query_bound(3, 3));
    }

    #[test]
    fn inconsistent_oracle_is_rejected() {
        let mut oracle = |s: Bundle| Ok(s == Bundle::of(&[0]));
        assert!(matches!(learn_useless(2, 2, &mut oracle), Err(Error::Oracle(_))));
    }
}
