use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use super::{extract_menu, run_mechanism, run_price_protocol, run_tie_protocol, AccessMode, Mechanism};
use crate::bundle::Bundle;
use crate::catalog::{index_tuples, Catalog};
use crate::error::{Error, Result};
use crate::menu::{menu_complexity, profit_argmax_set, Menu};
use crate::scalar::{ceil_log2, Price, Scalar};
use crate::valuation::Valuation;

/// The distinct menus presented to one player over all catalog profiles of
/// the others, in first-seen order.
#[derive(Clone, Debug)]
pub struct MenuCatalog<T: Scalar> {
    pub player: usize,
    pub menus: Vec<Menu<T>>,
    sizes: Vec<usize>,
    index: Vec<usize>,
}

impl<T: Scalar> MenuCatalog<T> {
    fn code(&self, ids: &[usize]) -> usize {
        let mut code = 0;
        for k in (0..self.sizes.len()).rev() {
            let d = if k == self.player { 0 } else { ids[k] };
            code = code * self.sizes[k] + d;
        }
        code
    }

    /// Index of the menu presented when the others hold catalog entries
    /// `ids` (the player's own entry is ignored).
    pub fn menu_index(&self, ids: &[usize]) -> usize {
        self.index[self.code(ids)]
    }

    pub fn menu_for(&self, ids: &[usize]) -> &Menu<T> {
        &self.menus[self.menu_index(ids)]
    }

    pub fn len(&self) -> usize {
        self.menus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.menus.is_empty()
    }

    /// `ceil(log2 |M^i|)`.
    pub fn bits(&self) -> u32 {
        ceil_log2(self.menus.len() as u128)
    }
}

fn profile_of<T: Scalar>(catalogs: &[Catalog<T>], ids: &[usize]) -> Vec<Valuation<T>> {
    ids.iter().zip(catalogs).map(|(&k, c)| c.get(k).clone()).collect()
}

fn check_catalogs<T: Scalar>(mech: &dyn Mechanism<T>, catalogs: &[Catalog<T>]) -> Result<()> {
    if catalogs.len() != mech.players() {
        return Err(Error::Domain(format!("{} catalogs for {} players", catalogs.len(), mech.players())));
    }
    if catalogs.iter().any(|c| c.m() != mech.items()) {
        return Err(Error::Domain("catalog item count differs from the mechanism".into()));
    }
    Ok(())
}

/// Menus presented to player `i` over every catalog profile of the others.
pub fn menu_catalog<T: Scalar>(mech: &dyn Mechanism<T>, catalogs: &[Catalog<T>], i: usize) -> Result<MenuCatalog<T>> {
    check_catalogs(mech, catalogs)?;
    let sizes: Vec<usize> = catalogs.iter().enumerate().map(|(k, c)| if k == i { 1 } else { c.len() }).collect();
    let tuples: Vec<Vec<usize>> = index_tuples(&sizes).collect();
    let menus: Vec<Menu<T>> = tuples
        .par_iter()
        .map(|ids| extract_menu(mech, i, &profile_of(catalogs, ids)))
        .collect::<Result<_>>()?;
    let mut distinct: Vec<Menu<T>> = Vec::new();
    let mut index = Vec::with_capacity(menus.len());
    for menu in menus {
        let k = match distinct.iter().position(|d| *d == menu) {
            Some(k) => k,
            None => {
                distinct.push(menu);
                distinct.len() - 1
            }
        };
        index.push(k);
    }
    Ok(MenuCatalog { player: i, menus: distinct, sizes, index })
}

/// Measured complexities of a mechanism over catalog profiles.
#[derive(Clone, Debug, Serialize)]
pub struct ComplexityReport {
    pub mechanism: String,
    pub params: serde_json::Value,
    pub m: usize,
    pub n: usize,
    pub tax: u32,
    pub cc: usize,
    pub price: usize,
    pub tie: usize,
    pub mc: usize,
    pub val: usize,
    pub dem: usize,
    pub d: usize,
    pub menu_counts: Vec<usize>,
    pub profiles: usize,
    pub valid: bool,
    pub violations: Vec<String>,
    pub checks: Vec<(String, bool)>,
}

impl ComplexityReport {
    pub fn check(&self, name: &str) -> Option<bool> {
        self.checks.iter().find(|(n, _)| n == name).map(|(_, ok)| *ok)
    }
}

struct ProfileStats {
    cc: usize,
    val: usize,
    dem: usize,
    tie: usize,
    violations: Vec<String>,
}

/// Enumerates all catalog profiles and measures taxation, communication,
/// price and tie complexities, menu complexity and query counts. Checks the
/// taxation principle, declared price and tie protocols, and the
/// characterization bound `tax + price + tie <= 3 cc` along the way.
pub fn measure_complexities<T: Scalar>(mech: &dyn Mechanism<T>, catalogs: &[Catalog<T>]) -> Result<ComplexityReport> {
    check_catalogs(mech, catalogs)?;
    let n = mech.players();
    let m = mech.items();
    let menu_cats: Vec<MenuCatalog<T>> = (0..n).map(|i| menu_catalog(mech, catalogs, i)).collect::<Result<_>>()?;

    let sizes: Vec<usize> = catalogs.iter().map(|c| c.len()).collect();
    let tuples: Vec<Vec<usize>> = index_tuples(&sizes).collect();
    let stats: Vec<ProfileStats> = tuples
        .par_iter()
        .map(|ids| -> Result<ProfileStats> {
            let profile = profile_of(catalogs, ids);
            let run = run_mechanism(mech, &profile)?;
            let mut violations = Vec::new();
            let menus: Vec<Menu<T>> = menu_cats.iter().map(|mc| mc.menu_for(ids).clone()).collect();
            for i in 0..n {
                let s = run.outcome.allocation[i];
                let price = menus[i].price(s);
                if price != &Price::Finite(run.outcome.payments[i].clone()) {
                    violations.push(format!(
                        "taxation: profile {ids:?}, player {i} paid {} for {s}, menu says {price}",
                        run.outcome.payments[i]
                    ));
                } else if !profit_argmax_set(&menus[i], &profile[i])?.contains(&s) {
                    violations.push(format!("taxation: profile {ids:?}, player {i} got non-optimal {s}"));
                }
            }
            let (tie_alloc, tie_t) = run_tie_protocol(mech, &profile, &menus)?;
            if tie_alloc != run.outcome.allocation {
                violations.push(format!(
                    "tie protocol: profile {ids:?} gives {tie_alloc:?}, mechanism gives {:?}",
                    run.outcome.allocation
                ));
            }
            Ok(ProfileStats {
                cc: run.transcript.len(),
                val: run.log.value_count(),
                dem: run.log.demand_count(),
                tie: tie_t.len(),
                violations,
            })
        })
        .collect::<Result<_>>()?;

    let mut violations: Vec<String> = stats.iter().flat_map(|s| s.violations.iter().cloned()).collect();
    let cc = stats.iter().map(|s| s.cc).max().unwrap_or(0);
    let val = stats.iter().map(|s| s.val).max().unwrap_or(0);
    let dem = stats.iter().map(|s| s.dem).max().unwrap_or(0);
    let tie = stats.iter().map(|s| s.tie).max().unwrap_or(0);

    // price complexity, checking declared protocols against the probed menus
    let mut price = 0;
    for (i, mc) in menu_cats.iter().enumerate() {
        let sizes: Vec<usize> = catalogs.iter().enumerate().map(|(k, c)| if k == i { 1 } else { c.len() }).collect();
        let others: Vec<Vec<usize>> = index_tuples(&sizes).collect();
        let runs: Vec<(usize, Option<String>)> = others
            .par_iter()
            .flat_map_iter(|ids| Bundle::all(m).map(move |s| (ids.clone(), s)))
            .map(|(ids, s)| -> Result<(usize, Option<String>)> {
                let pr = run_price_protocol(mech, i, &profile_of(catalogs, &ids), s)?;
                let want = mc.menu_for(&ids).price(s);
                let bad = (&pr.price != want).then(|| {
                    format!("price protocol: player {i}, others {ids:?}, bundle {s}: {} vs menu {want}", pr.price)
                });
                Ok((pr.transcript.len(), bad))
            })
            .collect::<Result<_>>()?;
        for (bits, bad) in runs {
            price = price.max(bits);
            violations.extend(bad);
        }
    }

    let mut mc = 0;
    let mut finite: BTreeSet<T> = BTreeSet::new();
    for cat in &menu_cats {
        for menu in &cat.menus {
            mc = mc.max(menu_complexity(menu)?.0);
            finite.extend(menu.finite_prices());
        }
    }
    let tax = menu_cats.iter().map(|c| c.bits()).max().unwrap_or(0);
    let characterization = tax as usize + price + tie <= 3 * cc;
    if !characterization {
        violations.push(format!("characterization: tax {tax} + price {price} + tie {tie} > 3 * cc {cc}"));
    }
    let mut checks = vec![
        ("tax<=cc".to_string(), tax as usize <= cc),
        ("tax<=cc+1".to_string(), tax as usize <= cc + 1),
        ("(tax+price+tie)/3<=cc".to_string(), characterization),
    ];
    if mech.mode() == AccessMode::Value {
        checks.push(("mc<=val+2".to_string(), mc <= val + 2));
    }
    Ok(ComplexityReport {
        mechanism: mech.name().to_string(),
        params: mech.params(),
        m,
        n,
        tax,
        cc,
        price,
        tie,
        mc,
        val,
        dem,
        d: finite.len(),
        menu_counts: menu_cats.iter().map(|c| c.len()).collect(),
        profiles: tuples.len(),
        valid: violations.is_empty(),
        violations,
        checks,
    })
}
