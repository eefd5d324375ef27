mod common;

use std::collections::BTreeSet;

use common::*;
use rand::Rng;
use taxlab::menu::menu_complexity;
use taxlab::value_reconstruct::{learn_useless, reconstruct_menu_value, MenuPriceOracle, UselessSearch};
use taxlab::Bundle;

/// Brute force: `S` is useless when `v(S) = 0` and all one-item extensions are 1.
fn useless_oracle(m: usize, v: &dyn Fn(Bundle) -> bool) -> BTreeSet<Bundle> {
    Bundle::all(m)
        .filter(|&s| !v(s) && (0..m).filter(|&j| !s.contains(j)).all(|j| v(s.with(j))))
        .collect()
}

#[test]
fn ladder_recovers_random_menus_exactly() {
    let mut r = rng(11);
    for trial in 0..400 {
        let m = r.random_range(1..=5);
        let menu = random_menu(&mut r, m, 6, 0.2);
        let (mc, _) = menu_complexity(&menu).unwrap();
        let mut oracle = MenuPriceOracle::new(menu.clone(), 1);
        let rec = reconstruct_menu_value(&mut oracle, mc.max(1)).unwrap_or_else(|e| panic!("trial {trial}: {e} for {menu:?}"));
        assert_eq!(rec.menu, menu, "trial {trial}");
        assert!(rec.steps.len() <= mc.max(1));
    }
}

#[test]
fn find_useless_matches_brute_force_within_bound() {
    let mut r = rng(12);
    for trial in 0..500 {
        let m = r.random_range(1..=8);
        // upward-closed 0/1 function generated by a few random minimal sets
        let gens: Vec<Bundle> = (0..r.random_range(1..=4)).map(|_| Bundle(r.random_range(0..(1u32 << m)))).collect();
        let v = |s: Bundle| gens.iter().any(|g| g.is_subset(s));
        let want = useless_oracle(m, &v);
        let k = want.len();
        if k == 0 || k > 8 {
            continue;
        }
        let res = learn_useless(m, k, &mut |s| Ok(v(s))).unwrap_or_else(|e| panic!("trial {trial}: {e}"));
        assert_eq!(res.useless, want, "trial {trial}");
        assert!(res.queries <= UselessSearch::query_bound(m, k));
    }
}

fn value_mode_mechanisms() -> Vec<taxlab::MechanismSpec<taxlab::Rat>> {
    use serde_json::json;
    let mut out = Vec::new();
    for c in 1..=4 {
        out.push(taxlab::make_example("warmup", &json!({"c": c})).unwrap());
    }
    for c in 1..=4 {
        out.push(taxlab::make_example("value_tightness", &json!({"c": c})).unwrap());
    }
    out.push(taxlab::make_example("value_tightness", &json!({"m": 6, "bundles": [3, 12, 48]})).unwrap());
    out.push(taxlab::make_example("value_tightness", &json!({"m": 5, "bundles": [7, 25, 14, 28]})).unwrap());
    out
}

#[test]
fn ladder_recovers_every_value_mechanism_menu() {
    use taxlab::catalog::index_tuples;
    use taxlab::protocol::extract_menu;
    use taxlab::protocol::library::default_catalogs;
    use taxlab::value_reconstruct::ProtocolPriceOracle;
    for mech in value_mode_mechanisms() {
        assert_eq!(mech.mode(), taxlab::protocol::AccessMode::Value);
        let cats = default_catalogs(mech.as_ref()).unwrap();
        let sizes: Vec<usize> = cats.iter().map(|c| c.len()).collect();
        for ids in index_tuples(&sizes) {
            let profile: Vec<_> = ids.iter().zip(&cats).map(|(&k, c)| c.get(k).clone()).collect();
            for i in 0..mech.players() {
                let truth = extract_menu(mech.as_ref(), i, &profile).unwrap();
                let (mc, _) = menu_complexity(&truth).unwrap();
                let mut oracle = ProtocolPriceOracle::new(mech.as_ref(), i, &profile);
                let rec = reconstruct_menu_value(&mut oracle, mc.max(1)).unwrap();
                assert_eq!(rec.menu, truth, "{} player {i} {ids:?}", mech.id());
            }
        }
    }
}
