//! Demand-query menus: min-affine extraction, the min-affine optimizer, and
//! the `M_T` gadget with its price-check cover.

use std::collections::BTreeMap;

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::menu::Menu;
use crate::min_affine::MinAffineMenu;
use crate::oracle::{bundle_cost, demand_query, QueryAccess, QueryRecord};
use crate::protocol::{extract_menu, run_mechanism, Mechanism};
use crate::scalar::{profit, Price, Scalar};
use crate::valuation::Valuation;

/// Result of reading a min-affine menu off a mechanism's demand queries.
#[derive(Clone, Debug)]
pub struct MinAffineExtraction<T: Scalar> {
    /// Clamped min-affine menu with exceptions.
    pub menu: MinAffineMenu<T>,
    /// Ground-truth normalized menu from probing.
    pub truth: Menu<T>,
    /// Unclamped price vectors and offsets, one per demand query.
    pub raw_vectors: Vec<Vec<Price<T>>>,
    pub raw_offsets: Vec<T>,
    /// Bundles that were value-queried (the exception set).
    pub value_queried: Vec<Bundle>,
    pub demand_queries: usize,
    pub value_queries: usize,
}

impl<T: Scalar> MinAffineExtraction<T> {
    /// For every finitely priced nonempty `S` outside the value-queried set:
    /// `price(S) <= p^k(S) + r^k` for all `k`, with equality for some `k`.
    pub fn check_lemmas(&self) -> Result<()> {
        let m = self.truth.m();
        for s in Bundle::all(m) {
            let Price::Finite(target) = self.truth.price(s) else { continue };
            if s.is_empty() || self.value_queried.contains(&s) {
                continue;
            }
            let mut tight = false;
            for (p, r) in self.raw_vectors.iter().zip(&self.raw_offsets) {
                match bundle_cost(p, s).add(&Price::Finite(r.clone())) {
                    Price::Finite(x) if &x < target => {
                        return Err(Error::Characterization {
                            bundle: s,
                            detail: format!("affine bound {x} below menu price {target}"),
                        })
                    }
                    Price::Finite(x) if &x == target => tight = true,
                    _ => {}
                }
            }
            if !tight {
                return Err(Error::Characterization { bundle: s, detail: "no tight price vector".into() });
            }
        }
        Ok(())
    }
}

/// Runs the mechanism with player `i` holding its own menu as a valuation
/// (infinite prices become `(m+1)B`) and turns every demand query into a
/// price vector and offset. Value-queried bundles become exceptions.
pub fn extract_min_affine<T: Scalar>(
    mech: &dyn Mechanism<T>,
    i: usize,
    profile: &[Valuation<T>],
) -> Result<MinAffineExtraction<T>> {
    let truth = extract_menu(mech, i, profile)?;
    let m = mech.items();
    let b = mech.bound();
    let high = T::int(m as i64 + 1) * b.clone();
    let vi = Valuation::from_fn(m, |s| match truth.price(s) {
        Price::Finite(x) => x.clone(),
        Price::Infinite => high.clone(),
    })?;
    let mut prof = profile.to_vec();
    prof[i] = vi.clone();
    let run = run_mechanism(mech, &prof)?;

    let mut raw_vectors = Vec::new();
    let mut raw_offsets = Vec::new();
    let mut vectors = Vec::new();
    let mut offsets = Vec::new();
    let mut exceptions = BTreeMap::new();
    let mut value_queried = Vec::new();
    let mut value_queries = 0;
    for rec in run.log.for_player(i) {
        match rec {
            QueryRecord::Demand { prices, answer, value, .. } => {
                let cost = bundle_cost(prices, *answer);
                let r = profit(value, &cost).ok_or_else(|| Error::Mechanism("demand answer at infinite cost".into()))?;
                let clamped: Vec<Price<T>> = if r > b {
                    vec![Price::Infinite; m]
                } else {
                    prices
                        .iter()
                        .map(|p| match p {
                            Price::Finite(x) if *x > b => Price::Infinite,
                            other => other.clone(),
                        })
                        .collect()
                };
                raw_vectors.push(prices.clone());
                raw_offsets.push(r.clone());
                vectors.push(clamped);
                offsets.push(if r > b { T::zero() } else { r });
            }
            QueryRecord::Value { bundle, .. } => {
                value_queries += 1;
                if !value_queried.contains(bundle) {
                    value_queried.push(*bundle);
                }
                exceptions.insert(*bundle, truth.price(*bundle).clone());
            }
        }
    }
    let demand_queries = vectors.len();
    let menu = MinAffineMenu::new(m, vectors, offsets, exceptions)?;
    for s in Bundle::all(m) {
        let got = menu.eval(s);
        if &got != truth.price(s) {
            return Err(Error::Characterization {
                bundle: s,
                detail: format!("min-affine price {got} but menu price {}", truth.price(s)),
            });
        }
    }
    Ok(MinAffineExtraction { menu, truth, raw_vectors, raw_offsets, value_queried, demand_queries, value_queries })
}

/// Profit-maximizing bundle of a min-affine menu using one demand query per
/// price vector and one value query per exception. Ties go to the smallest
/// mask. Exceptions must not exceed the affine price of their bundle.
pub fn min_affine_argmax<T: Scalar, A: QueryAccess<T>>(menu: &MinAffineMenu<T>, oracle: &mut A) -> Result<Bundle> {
    let mut best = Bundle::EMPTY;
    let mut best_profit = profit(&T::zero(), &menu.eval(Bundle::EMPTY))
        .ok_or_else(|| Error::Domain("empty bundle has infinite price".into()))?;
    let consider = |s: Bundle, v: T, best: &mut Bundle, best_profit: &mut T| {
        if let Some(p) = profit(&v, &menu.eval(s)) {
            if p > *best_profit || (p == *best_profit && s < *best) {
                *best = s;
                *best_profit = p;
            }
        }
    };
    for p in menu.vectors() {
        let (d, v) = oracle.demand(p)?;
        consider(d, v, &mut best, &mut best_profit);
    }
    for &s in menu.exceptions().keys() {
        let v = oracle.value(s)?;
        consider(s, v, &mut best, &mut best_profit);
    }
    Ok(best)
}

/// `M_T(S) = |S|`, except `M_T(T) = |T| + 1/2`.
pub fn mt_menu<T: Scalar>(m: usize, target: Bundle) -> Result<Menu<T>> {
    check_target(m, target)?;
    Menu::from_fn(m, |s| {
        let base = T::int(s.len() as i64);
        Price::Finite(if s == target { base + T::ratio(1, 2) } else { base })
    })
}

/// The presenting player's valuation encoding `T`: `1/4` on `T`, `1` above
/// half size, `0` otherwise.
pub fn gadget_valuation<T: Scalar>(m: usize, target: Bundle) -> Result<Valuation<T>> {
    check_target(m, target)?;
    Valuation::from_fn(m, |s| {
        if s.len() > m / 2 {
            T::one()
        } else if s == target {
            T::ratio(1, 4)
        } else {
            T::zero()
        }
    })
}

fn check_target(m: usize, target: Bundle) -> Result<()> {
    if m % 2 != 0 || m == 0 {
        return Err(Error::Construction(format!("the gadget needs an even, positive m (got {m})")));
    }
    if !target.fits(m) || target.len() != m / 2 {
        return Err(Error::Construction(format!("target {target} is not a bundle of size {}", m / 2)));
    }
    Ok(())
}

/// Price check through one demand query: prices 0 on `S`, infinite
/// elsewhere; the returned value is `v(S)`.
pub fn gadget_price_check<T: Scalar, A: QueryAccess<T>>(oracle: &mut A, s: Bundle) -> Result<bool> {
    let m = oracle.m();
    if s.len() != m / 2 {
        return Ok(false);
    }
    let prices: Vec<Price<T>> = (0..m).map(|j| if s.contains(j) { Price::zero() } else { Price::Infinite }).collect();
    let (_, v) = oracle.demand(&prices)?;
    Ok(v == T::ratio(1, 4))
}

/// First step of the gadget optimizer: demand at unit prices.
pub fn gadget_first_query<T: Scalar, A: QueryAccess<T>>(oracle: &mut A) -> Result<(Bundle, T)> {
    let ones = vec![Price::Finite(T::one()); oracle.m()];
    oracle.demand(&ones)
}

/// Remaining steps once the first answer is known to be the target `t`:
/// one demand query per item of `t` priced out, and one per item outside
/// `t` discounted to `1/2` with `t` free. Returns the best answer by `M_T`
/// profit, smallest mask on ties.
pub fn gadget_batches<T: Scalar, A: QueryAccess<T>>(oracle: &mut A, t: Bundle, v_t: T) -> Result<Bundle> {
    let m = oracle.m();
    let menu: Menu<T> = mt_menu(m, t)?;
    let mut candidates = vec![(t, v_t)];
    for j in t.items() {
        let prices: Vec<Price<T>> =
            (0..m).map(|k| if k == j { Price::Infinite } else { Price::Finite(T::one()) }).collect();
        candidates.push(oracle.demand(&prices)?);
    }
    for j in t.complement(m).items() {
        let prices: Vec<Price<T>> = (0..m)
            .map(|k| {
                if k == j {
                    Price::Finite(T::ratio(1, 2))
                } else if t.contains(k) {
                    Price::zero()
                } else {
                    Price::Finite(T::one())
                }
            })
            .collect();
        candidates.push(oracle.demand(&prices)?);
    }
    let mut best: Option<(T, Bundle)> = None;
    for (s, v) in candidates {
        let p = profit(&v, menu.price(s)).expect("finite menu");
        let better = match &best {
            None => true,
            Some((bp, bs)) => p > *bp || (p == *bp && s < *bs),
        };
        if better {
            best = Some((p, s));
        }
    }
    Ok(best.expect("nonempty").1)
}

/// Profit-maximizing bundle for the `M_T` menu using at most `m + 1` demand
/// queries to `oracle` plus one call to `is_target`.
pub fn mt_gadget_argmax<T: Scalar, A: QueryAccess<T>>(
    oracle: &mut A,
    mut is_target: impl FnMut(Bundle) -> Result<bool>,
) -> Result<Bundle> {
    let m = oracle.m();
    let (s0, v0) = gadget_first_query(oracle)?;
    if s0.len() != m / 2 || !is_target(s0)? {
        return Ok(s0);
    }
    gadget_batches(oracle, s0, v0)
}

/// Bundles `C` with `|C| = m/2` such that the gadget valuation of `C`
/// demands exactly `C` at prices `p`. At most one bundle qualifies: the
/// items priced at most `1/4`.
pub fn demand_cover<T: Scalar>(m: usize, prices: &[Price<T>]) -> Result<Vec<Bundle>> {
    if prices.len() != m {
        return Err(Error::Domain(format!("{} prices for {m} items", prices.len())));
    }
    let quarter = T::ratio(1, 4);
    let c = Bundle(
        prices
            .iter()
            .enumerate()
            .filter(|(_, p)| matches!(p, Price::Finite(x) if *x <= quarter))
            .fold(0, |acc, (j, _)| acc | (1 << j)),
    );
    if c.len() != m / 2 {
        return Ok(vec![]);
    }
    let v = gadget_valuation(m, c)?;
    Ok(if demand_query(&v, prices)?.0 == c { vec![c] } else { vec![] })
}
