use super::{run_mechanism, Mechanism, Protocol, Transcript};
use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::menu::{normalize_menu, Menu};
use crate::scalar::{Price, Scalar};
use crate::valuation::Valuation;

/// Additive valuation worth `3B` per item of `s` and nothing elsewhere.
pub fn probe_valuation<T: Scalar>(m: usize, s: Bundle, bound: &T) -> Valuation<T> {
    let three_b = T::int(3) * bound.clone();
    let vals: Vec<T> = (0..m).map(|j| if s.contains(j) { three_b.clone() } else { T::zero() }).collect();
    Valuation::additive(&vals).expect("non-negative probe")
}

fn check_bound<T: Scalar>(mech: &dyn Mechanism<T>) -> Result<T> {
    let b = mech.bound();
    if !b.is_positive() {
        return Err(Error::Contract(format!("{} declares a non-positive price bound", mech.name())));
    }
    Ok(b)
}

/// Price table read off probe runs, before normalization: the payment when
/// the probed bundle is contained in the allocation, infinite otherwise.
pub fn extract_menu_raw<T: Scalar>(mech: &dyn Mechanism<T>, i: usize, profile: &[Valuation<T>]) -> Result<Menu<T>> {
    if i >= mech.players() {
        return Err(Error::Domain(format!("no player {i}")));
    }
    let b = check_bound(mech)?;
    let m = mech.items();
    let mut prof = profile.to_vec();
    let mut prices = Vec::with_capacity(1 << m);
    for s in Bundle::all(m) {
        prof[i] = probe_valuation(m, s, &b);
        let run = run_mechanism(mech, &prof)?;
        let got = run.outcome.allocation[i];
        prices.push(if s.is_subset(got) { Price::Finite(run.outcome.payments[i].clone()) } else { Price::Infinite });
    }
    let raw = Menu::new(m, prices)?;
    for s in Bundle::all(m) {
        for j in 0..m {
            if !s.contains(j) && raw.price(s.with(j)) < raw.price(s) {
                return Err(Error::Taxation(format!(
                    "{}: probed price of {} exceeds that of {}",
                    mech.name(),
                    s,
                    s.with(j)
                )));
            }
        }
    }
    Ok(raw)
}

/// The normalized menu presented to player `i` by the others' valuations.
/// `profile[i]` is ignored.
pub fn extract_menu<T: Scalar>(mech: &dyn Mechanism<T>, i: usize, profile: &[Valuation<T>]) -> Result<Menu<T>> {
    let raw = extract_menu_raw(mech, i, profile)?;
    let menu = normalize_menu(&raw).map_err(|e| Error::Taxation(e.to_string()))?;
    let b = mech.bound();
    if let Some(top) = menu.max_finite_price() {
        if top > b {
            return Err(Error::Bound(format!("{}: menu price {top} exceeds the declared bound {b}", mech.name())));
        }
    }
    Ok(menu)
}

/// Outcome of one price-protocol run.
#[derive(Clone, Debug)]
pub struct PriceRun<T: Scalar> {
    pub price: Price<T>,
    pub transcript: Transcript,
}

/// Runs the declared price protocol for `(i, s)`, or a single probe run
/// when the mechanism declares none.
pub fn run_price_protocol<T: Scalar>(
    mech: &dyn Mechanism<T>,
    i: usize,
    profile: &[Valuation<T>],
    s: Bundle,
) -> Result<PriceRun<T>> {
    let m = mech.items();
    let mut prof = profile.to_vec();
    prof[i] = Valuation::zero(m);
    let mut proto = Protocol::new(&prof);
    if let Some(price) = mech.price_protocol(&mut proto, i, s) {
        let price = price?;
        return Ok(PriceRun { price, transcript: proto.into_parts().0 });
    }
    let b = check_bound(mech)?;
    prof[i] = probe_valuation(m, s, &b);
    let run = run_mechanism(mech, &prof)?;
    let got = run.outcome.allocation[i];
    let price = if s.is_subset(got) { Price::Finite(run.outcome.payments[i].clone()) } else { Price::Infinite };
    Ok(PriceRun { price, transcript: run.transcript })
}
