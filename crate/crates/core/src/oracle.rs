//! Value and demand query oracles with per-player query logs.

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::scalar::{Price, Scalar};
use crate::valuation::Valuation;
use crate::Rat;

/// One recorded query and its answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QueryRecord<T: Scalar = Rat> {
    Value { player: usize, bundle: Bundle, answer: T },
    Demand { player: usize, prices: Vec<Price<T>>, answer: Bundle, value: T },
}

impl<T: Scalar> QueryRecord<T> {
    pub fn player(&self) -> usize {
        match self {
            QueryRecord::Value { player, .. } | QueryRecord::Demand { player, .. } => *player,
        }
    }
}

/// Ordered list of all queries made during a run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QueryLog<T: Scalar = Rat> {
    pub records: Vec<QueryRecord<T>>,
}

impl<T: Scalar> QueryLog<T> {
    pub fn new() -> Self {
        QueryLog { records: Vec::new() }
    }

    pub fn value_count(&self) -> usize {
        self.records.iter().filter(|r| matches!(r, QueryRecord::Value { .. })).count()
    }

    pub fn demand_count(&self) -> usize {
        self.records.iter().filter(|r| matches!(r, QueryRecord::Demand { .. })).count()
    }

    pub fn value_count_for(&self, player: usize) -> usize {
        self.records
            .iter()
            .filter(|r| matches!(r, QueryRecord::Value { player: p, .. } if *p == player))
            .count()
    }

    pub fn demand_count_for(&self, player: usize) -> usize {
        self.records
            .iter()
            .filter(|r| matches!(r, QueryRecord::Demand { player: p, .. } if *p == player))
            .count()
    }

    pub fn for_player(&self, player: usize) -> impl Iterator<Item = &QueryRecord<T>> {
        self.records.iter().filter(move |r| r.player() == player)
    }
}

pub fn value_query<T: Scalar>(v: &Valuation<T>, s: Bundle) -> Result<T> {
    if !s.fits(v.m()) {
        return Err(Error::Domain(format!("bundle {s} does not fit {} items", v.m())));
    }
    Ok(v.value(s).clone())
}

/// Profit-maximizing bundle at item prices `prices`, smallest mask on ties.
/// Items priced at infinity are never demanded. Returns the bundle and its value.
pub fn demand_query<T: Scalar>(v: &Valuation<T>, prices: &[Price<T>]) -> Result<(Bundle, T)> {
    let m = v.m();
    if prices.len() != m {
        return Err(Error::Domain(format!("{} prices for {m} items", prices.len())));
    }
    if prices.iter().any(|p| matches!(p, Price::Finite(x) if x.is_negative())) {
        return Err(Error::Domain("negative item price".into()));
    }
    let allowed = Bundle(
        prices
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_finite())
            .fold(0, |acc, (j, _)| acc | (1 << j)),
    );
    let mut best = Bundle::EMPTY;
    let mut best_profit = T::zero();
    for s in allowed.subsets() {
        let cost = s.items().fold(T::zero(), |acc, j| acc + prices[j].finite().expect("finite").clone());
        let profit = v.value(s).clone() - cost;
        if profit > best_profit {
            best = s;
            best_profit = profit;
        }
    }
    Ok((best, v.value(best).clone()))
}

/// Counted access to one player's valuation.
pub trait QueryAccess<T: Scalar> {
    fn m(&self) -> usize;
    fn value(&mut self, s: Bundle) -> Result<T>;
    fn demand(&mut self, prices: &[Price<T>]) -> Result<(Bundle, T)>;
}

/// A valuation paired with a log, for running query algorithms directly.
pub struct LoggedOracle<'a, T: Scalar> {
    pub player: usize,
    pub valuation: &'a Valuation<T>,
    pub log: QueryLog<T>,
}

impl<'a, T: Scalar> LoggedOracle<'a, T> {
    pub fn new(player: usize, valuation: &'a Valuation<T>) -> Self {
        LoggedOracle { player, valuation, log: QueryLog::new() }
    }
}

impl<T: Scalar> QueryAccess<T> for LoggedOracle<'_, T> {
    fn m(&self) -> usize {
        self.valuation.m()
    }

    fn value(&mut self, s: Bundle) -> Result<T> {
        let answer = value_query(self.valuation, s)?;
        self.log.records.push(QueryRecord::Value { player: self.player, bundle: s, answer: answer.clone() });
        Ok(answer)
    }

    fn demand(&mut self, prices: &[Price<T>]) -> Result<(Bundle, T)> {
        let (answer, value) = demand_query(self.valuation, prices)?;
        self.log.records.push(QueryRecord::Demand {
            player: self.player,
            prices: prices.to_vec(),
            answer,
            value: value.clone(),
        });
        Ok((answer, value))
    }
}

/// Sum of item prices over a bundle.
pub fn bundle_cost<T: Scalar>(prices: &[Price<T>], s: Bundle) -> Price<T> {
    s.items().fold(Price::zero(), |acc, j| acc.add(&prices[j]))
}
