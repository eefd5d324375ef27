//! Menus: bundle prices presented to a single player.

use std::collections::BTreeSet;
use std::fmt;

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::scalar::{profit, Price, Scalar};
use crate::valuation::Valuation;
use crate::Rat;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Menu<T: Scalar = Rat> {
    m: usize,
    prices: Vec<Price<T>>,
}

impl<T: Scalar> Menu<T> {
    /// Raw price table; no normalization is applied.
    pub fn new(m: usize, prices: Vec<Price<T>>) -> Result<Self> {
        Bundle::check_items(m)?;
        if prices.len() != 1 << m {
            return Err(Error::Domain(format!("menu has {} prices, expected {}", prices.len(), 1usize << m)));
        }
        if prices.iter().any(|p| matches!(p, Price::Finite(x) if x.is_negative())) {
            return Err(Error::Domain("negative menu price".into()));
        }
        Ok(Menu { m, prices })
    }

    pub fn from_fn(m: usize, f: impl Fn(Bundle) -> Price<T>) -> Result<Self> {
        Menu::new(m, Bundle::all(m).map(f).collect())
    }

    /// Every bundle priced at zero.
    pub fn free(m: usize) -> Self {
        Menu { m, prices: vec![Price::zero(); 1 << m] }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn price(&self, s: Bundle) -> &Price<T> {
        &self.prices[s.index()]
    }

    pub fn prices(&self) -> &[Price<T>] {
        &self.prices
    }

    /// `price(∅) = 0` and prices are nondecreasing under inclusion.
    pub fn is_normalized(&self) -> bool {
        self.prices[0] == Price::zero()
            && Bundle::all(self.m).all(|s| {
                (0..self.m).all(|j| s.contains(j) || self.price(s) <= self.price(s.with(j)))
            })
    }

    /// Distinct finite prices, ascending.
    pub fn finite_prices(&self) -> BTreeSet<T> {
        self.prices.iter().filter_map(|p| p.finite().cloned()).collect()
    }

    pub fn max_finite_price(&self) -> Option<T> {
        self.finite_prices().into_iter().next_back()
    }
}

impl<T: Scalar> fmt::Debug for Menu<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Menu(m={}; ", self.m)?;
        for s in Bundle::all(self.m) {
            if s.0 > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}:{}", s, self.price(s))?;
        }
        write!(f, ")")
    }
}

/// Subtracts `price(∅)` and lowers every price to the minimum over its
/// supersets. The maximum profit of every valuation is unchanged; the
/// profit-maximizing set can only gain bundles that tie a cheaper superset,
/// which never happens for strictly monotone valuations.
pub fn normalize_menu<T: Scalar>(menu: &Menu<T>) -> Result<Menu<T>> {
    let base = match menu.price(Bundle::EMPTY) {
        Price::Finite(x) => x.clone(),
        Price::Infinite => return Err(Error::Domain("price of the empty bundle is infinite".into())),
    };
    let m = menu.m;
    let mut prices: Vec<Price<T>> = menu.prices.iter().map(|p| p.sub_finite(&base)).collect();
    if let Some(s) = Bundle::all(m).find(|s| matches!(&prices[s.index()], Price::Finite(x) if x.is_negative())) {
        return Err(Error::Domain(format!("bundle {s} is cheaper than the empty bundle")));
    }
    for mask in (0..(1u32 << m)).rev() {
        let s = Bundle(mask);
        for j in 0..m {
            if !s.contains(j) && prices[s.with(j).index()] < prices[s.index()] {
                prices[s.index()] = prices[s.with(j).index()].clone();
            }
        }
    }
    Ok(Menu { m, prices })
}

/// All bundles maximizing `v(S) - price(S)`, ascending by mask.
pub fn profit_argmax_set<T: Scalar>(menu: &Menu<T>, v: &Valuation<T>) -> Result<Vec<Bundle>> {
    check_sizes(menu, v)?;
    let mut best: Option<T> = None;
    let mut set = Vec::new();
    for s in Bundle::all(menu.m) {
        if let Some(p) = profit(v.value(s), menu.price(s)) {
            match &best {
                Some(b) if p < *b => {}
                Some(b) if p == *b => set.push(s),
                _ => {
                    best = Some(p);
                    set = vec![s];
                }
            }
        }
    }
    Ok(set)
}

/// Maximum profit and the smallest-mask bundle attaining it.
pub fn best_bundle<T: Scalar>(menu: &Menu<T>, v: &Valuation<T>) -> Result<(Bundle, T)> {
    let set = profit_argmax_set(menu, v)?;
    let s = *set.first().ok_or_else(|| Error::Domain("menu has no finite price".into()))?;
    let p = profit(v.value(s), menu.price(s)).expect("finite");
    Ok((s, p))
}

fn check_sizes<T: Scalar>(menu: &Menu<T>, v: &Valuation<T>) -> Result<()> {
    if menu.m != v.m() {
        Err(Error::Domain(format!("menu over {} items, valuation over {}", menu.m, v.m())))
    } else {
        Ok(())
    }
}

/// Number of bundles in the menu: `S` counts when every strict superset is
/// strictly more expensive, and the grand bundle counts when finitely priced.
pub fn menu_complexity<T: Scalar>(menu: &Menu<T>) -> Result<(usize, Vec<Bundle>)> {
    if !menu.is_normalized() {
        return Err(Error::Contract("menu complexity needs a normalized menu".into()));
    }
    let m = menu.m;
    let grand = Bundle::grand(m);
    let mut members = Vec::new();
    for s in Bundle::all(m) {
        let inside = if s == grand {
            menu.price(s).is_finite()
        } else {
            // monotone prices: checking one-item extensions suffices
            (0..m).filter(|&j| !s.contains(j)).all(|j| menu.price(s) < menu.price(s.with(j)))
        };
        if inside {
            members.push(s);
        }
    }
    Ok((members.len(), members))
}

/// Rebuilds a normalized menu from its members and their prices:
/// `price(S) = min { price(T) : T member, T ⊇ S }`, infinite if none.
pub fn menu_from_members<T: Scalar>(m: usize, members: &[(Bundle, Price<T>)]) -> Result<Menu<T>> {
    Menu::from_fn(m, |s| {
        members
            .iter()
            .filter(|(t, _)| s.is_subset(*t))
            .map(|(_, p)| p.clone())
            .min()
            .unwrap_or(Price::Infinite)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(n: i64) -> Price<Rat> {
        Price::Finite(Rat::int(n))
    }

    fn warmup_menu(t: i64) -> Menu<Rat> {
        Menu::new(2, vec![f(0), f(t), Price::Infinite, Price::Infinite]).unwrap()
    }

    #[test]
    fn complexity_examples() {
        assert_eq!(menu_complexity(&warmup_menu(3)).unwrap().0, 2);
        assert_eq!(menu_complexity(&Menu::<Rat>::free(3)).unwrap(), (1, vec![Bundle::grand(3)]));
        let drop_tie = Menu::new(2, vec![f(0), f(0), f(0), Price::Infinite]).unwrap();
        assert_eq!(
            menu_complexity(&drop_tie).unwrap(),
            (2, vec![Bundle::of(&[0]), Bundle::of(&[1])])
        );
    }

    #[test]
    fn complexity_requires_normal_form() {
        let raw = Menu::new(1, vec![f(1), f(2)]).unwrap();
        assert!(matches!(menu_complexity(&raw), Err(Error::Contract(_))));
    }

    #[test]
    fn normalization_lowers_to_superset_minimum() {
        let raw = Menu::new(2, vec![f(0), f(2), f(0), f(1)]).unwrap();
        let n = normalize_menu(&raw).unwrap();
        assert_eq!(n.prices(), &[f(0), f(1), f(0), f(1)]);
        assert!(n.is_normalized());
        let shifted = Menu::new(1, vec![f(2), f(5)]).unwrap();
        assert_eq!(normalize_menu(&shifted).unwrap().prices(), &[f(0), f(3)]);
        let bad = Menu::new(1, vec![Price::Infinite, f(5)]).unwrap();
        assert!(normalize_menu(&bad).is_err());
    }

    #[test]
    fn members_reconstruct_the_menu() {
        let menu = warmup_menu(2);
        let (_, members) = menu_complexity(&menu).unwrap();
        let pairs: Vec<_> = members.iter().map(|&s| (s, menu.price(s).clone())).collect();
        assert_eq!(menu_from_members(2, &pairs).unwrap(), menu);
    }

    #[test]
    fn argmax_set_lists_ties() {
        let menu = warmup_menu(2);
        let v = Valuation::additive(&[Rat::int(2), Rat::int(0)]).unwrap();
        assert_eq!(profit_argmax_set(&menu, &v).unwrap(), vec![Bundle::EMPTY, Bundle::of(&[0])]);
    }
}
